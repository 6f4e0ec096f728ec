//! Two-time photon correlations from the quantum regression theorem.
//!
//! `G²(t₁, t₂) = tr[a†a V(t₂, t₁)[a ρ(t₁) a†]]`, where `V` is the driven
//! master-equation propagator. The coincidence rate integrates `G²` over the
//! triangle `t₁ ≤ t₂` of one excitation cycle; the fluorescence rate integrates
//! `⟨a†a⟩`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operator::{DensityMatrix, Operator, C64, ZERO};
use crate::propagator::{DensityTrajectory, Propagator};
use crate::system::{DriveProgram, Frame, QuantumSystem};

/// Largest tolerated imaginary part or negative excursion of a `G²` sample.
pub const G2_RESIDUE_TOL: f64 = 1e-10;
/// Excited population left at the end of the window, relative to its peak.
pub const TRUNCATION_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionParams {
    pub eta_c: f64,
    pub eta_f: f64,
    /// Repetition rate in s⁻¹.
    pub nu_rep: f64,
    /// Emission rate entering the rate prefactors, a.u.
    pub gamma_f: f64,
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, eta) in [("eta_c", self.eta_c), ("eta_f", self.eta_f)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidParameter(format!("{name} = {eta} outside [0, 1]")));
            }
        }
        if !(self.nu_rep > 0.0 && self.nu_rep.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu_rep = {}", self.nu_rep)));
        }
        if !(self.gamma_f > 0.0 && self.gamma_f.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma_f = {}", self.gamma_f)));
        }
        Ok(())
    }
}

/// What to do when the excitation has not decayed by the end of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruncationPolicy {
    Strict,
    #[default]
    Warn,
    Ignore,
}

/// `a ρ a†`, flagged as unnormalized.
pub fn apply_emission_jump(a: &Operator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if a.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: rho.dim() });
    }
    Ok(DensityMatrix::new(a.matmul(&rho.op).matmul(&a.dagger()), false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapQuantity {
    /// `G²(t₁, t₂)`, a product of two excited-state populations.
    G2,
    /// Per-bin coincidence probability `G² γ_f² dt²`.
    Probability,
}

/// `G²(t₁, t₂)` on the triangle `t₂ ≥ t₁`, with `t₁` on a strided subgrid.
#[derive(Debug, Clone)]
pub struct CorrelationMap {
    pub grid: TimeGrid,
    pub t1_stride: usize,
    /// Delay between the pulses, a.u. (metadata).
    pub delay: f64,
    pub quantity: MapQuantity,
    launches: Vec<usize>,
    /// `rows[i][j - launches[i]]` holds the value at `(launches[i], j)`.
    rows: Vec<Vec<f64>>,
    pub max_imag_residue: f64,
}

impl CorrelationMap {
    /// Grid indices of the `t₁` launch points.
    pub fn launches(&self) -> &[usize] {
        &self.launches
    }

    pub fn row(&self, launch: usize) -> &[f64] {
        &self.rows[launch]
    }

    /// Value at grid indices `(i, j)`; `i` must be a launch point and `j ≥ i`.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let r = self.launches.binary_search(&i).ok()?;
        j.checked_sub(i).and_then(|o| self.rows[r].get(o).copied())
    }

    /// `(t₁ index, t₂ index, value)` in `t₁`-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.launches
            .iter()
            .zip(&self.rows)
            .flat_map(|(&i, row)| row.iter().enumerate().map(move |(o, &v)| (i, i + o, v)))
    }

    /// Location and value of the largest entry.
    pub fn argmax(&self) -> (usize, usize, f64) {
        self.iter().fold((0, 0, f64::NEG_INFINITY), |best, cur| if cur.2 > best.2 { cur } else { best })
    }

    pub fn max_diagonal(&self) -> f64 {
        self.rows.iter().map(|r| r[0].abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.rows.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    /// `∫dt₁ ∫_{t₁} dt₂ G²` by the triangular trapezoid rule.
    pub fn triangle_integral(&self) -> f64 {
        let dt = self.grid.dt;
        let weights = launch_weights(&self.launches, dt);
        self.rows
            .iter()
            .zip(&weights)
            .map(|(row, w)| w * inner_trapezoid(row, dt))
            .sum()
    }

    fn map_values(&self, quantity: MapQuantity, f: impl Fn(f64) -> f64) -> Self {
        Self {
            quantity,
            rows: self.rows.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect(),
            ..self.clone()
        }
    }
}

/// Trapezoid over one row starting on the diagonal: half weight at both ends.
fn inner_trapezoid(row: &[f64], dt: f64) -> f64 {
    match row.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (row[0] + row[n - 1]) + row[1..n - 1].iter().sum::<f64>()),
    }
}

/// `0, s, 2s, …` plus the final index.
pub fn launch_indices(n_steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut v: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *v.last().expect("non-empty") != n_steps {
        v.push(n_steps);
    }
    v
}

/// Trapezoid weights in time for the (possibly non-uniform) launch subgrid.
pub fn launch_weights(launches: &[usize], dt: f64) -> Vec<f64> {
    let n = launches.len();
    (0..n)
        .map(|k| {
            let left = if k > 0 { launches[k] - launches[k - 1] } else { 0 };
            let right = if k + 1 < n { launches[k + 1] - launches[k] } else { 0 };
            0.5 * (left + right) as f64 * dt
        })
        .collect()
}

/// Smallest stride that keeps the number of launch points at or below `max_launches`.
pub fn auto_stride(n_steps: usize, max_launches: usize) -> usize {
    let max = max_launches.max(2);
    let mut s = n_steps.div_ceil(max - 1).max(1);
    while launch_indices(n_steps, s).len() > max {
        s += 1;
    }
    s
}

fn hs_real(a: &[C64], b: &[C64]) -> f64 {
    // Re tr(A† B)
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `tr(A X)` with `A` Hermitian, computed as `Re ⟨A, X⟩`.
fn expect_hermitian(a: &[C64], x: &[C64]) -> C64 {
    let mut acc = ZERO;
    for (p, q) in a.iter().zip(x) {
        acc += p.conj() * q;
    }
    acc
}

/// Unconditional dynamics of one excitation cycle plus everything needed to
/// evaluate correlations on it.
#[derive(Debug, Clone)]
pub struct RegressionEngine {
    emission: Operator,
    number: Operator,
    photons: Operator,
    propagator: Propagator,
    trajectory: DensityTrajectory,
    residual: f64,
}

impl RegressionEngine {
    /// Propagates the ground state over `grid` and checks that the window is long
    /// enough for the excitation to decay.
    pub fn new(
        system: &QuantumSystem,
        drive: &DriveProgram,
        grid: TimeGrid,
        frame: Frame,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        let rho0 = DensityMatrix::basis(0, system.dim())?;
        Self::with_initial_state(system, drive, grid, frame, policy, &rho0)
    }

    pub fn with_initial_state(
        system: &QuantumSystem,
        drive: &DriveProgram,
        grid: TimeGrid,
        frame: Frame,
        policy: TruncationPolicy,
        rho0: &DensityMatrix,
    ) -> Result<Self> {
        let propagator = Propagator::new(system, drive, grid, frame)?;
        let trajectory = propagator.trajectory(rho0)?;
        let ground = trajectory.population(0);
        let excited: Vec<f64> = ground.iter().zip(trajectory.operators()).map(|(g, r)| r.trace().re - g).collect();
        let peak = excited.iter().copied().fold(0.0, f64::max);
        let last = *excited.last().expect("non-empty trajectory");
        let residual = if peak > 0.0 { last / peak } else { 0.0 };
        if residual > TRUNCATION_LIMIT {
            let err = Error::Truncation { residual, limit: TRUNCATION_LIMIT, t_end: grid.t_end() };
            match policy {
                TruncationPolicy::Strict => return Err(err),
                TruncationPolicy::Warn => log::warn!("{err}"),
                TruncationPolicy::Ignore => {}
            }
        }
        Ok(Self {
            emission: system.emission().clone(),
            number: system.emission_number(),
            photons: system.photon_number(),
            propagator,
            trajectory,
            residual,
        })
    }

    pub fn trajectory(&self) -> &DensityTrajectory {
        &self.trajectory
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn grid(&self) -> &TimeGrid {
        self.propagator.grid()
    }

    /// Excited population at the end of the window relative to its maximum.
    pub fn truncation_residual(&self) -> f64 {
        self.residual
    }

    /// `⟨a†a⟩(t_k)` along the unconditional trajectory.
    pub fn emission_series(&self) -> Vec<f64> {
        self.trajectory.expectation(&self.number)
    }

    /// `⟨Σᵢ Jᵢ†Jᵢ⟩(t_k)`, the photon number entering the fluorescence rate.
    pub fn photon_series(&self) -> Vec<f64> {
        self.trajectory.expectation(&self.photons)
    }

    /// Conditional state `a ρ(t_k) a†`.
    pub fn conditional_state(&self, k: usize) -> DensityMatrix {
        apply_emission_jump(&self.emission, &self.trajectory.state(k)).expect("dimensions agree")
    }

    /// `G²(t₁, ·)` for one launch index: propagates `a ρ(t₁) a†` to the end of the window.
    pub fn g2_row(&self, i: usize) -> Result<(Vec<f64>, f64)> {
        let x = self.conditional_state(i);
        let a = self.number.as_slice();
        let mut row = Vec::with_capacity(self.grid().n_steps + 1 - i);
        let mut residue = 0.0_f64;
        self.propagator.run_from(i, x.op.as_slice(), |_, s| {
            let g = expect_hermitian(a, s);
            residue = residue.max(g.im.abs()).max(-g.re);
            row.push(g.re);
        })?;
        Ok((row, residue))
    }

    /// Correlation map with `t₁` launched every `t1_stride` grid points.
    ///
    /// Rows are computed in parallel on the current rayon pool; each row is
    /// independent, so the map does not depend on scheduling.
    pub fn g2_grid(&self, t1_stride: usize, delay: f64) -> Result<CorrelationMap> {
        if t1_stride == 0 {
            return Err(Error::InvalidParameter("t1 stride must be at least 1".into()));
        }
        let grid = *self.grid();
        let launches = launch_indices(grid.n_steps, t1_stride);
        let rows: Vec<(Vec<f64>, f64)> =
            launches.par_iter().map(|&i| self.g2_row(i)).collect::<Result<_>>()?;
        let max_imag_residue = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        if max_imag_residue > G2_RESIDUE_TOL {
            log::warn!("G2 imaginary/negative residue {max_imag_residue:.3e} exceeds {G2_RESIDUE_TOL:.1e}");
        }
        Ok(CorrelationMap {
            grid,
            t1_stride,
            delay,
            quantity: MapQuantity::G2,
            launches,
            rows: rows.into_iter().map(|r| r.0).collect(),
            max_imag_residue,
        })
    }

    /// The triangular double integral of `G²` computed by a backward sweep.
    ///
    /// Accumulates `Q_i = Σ_{j ≥ i} w_j V†(t_j, t_i)[a†a]` with the adjoint of
    /// each RK4 step map, then sums `⟨Q_i, a ρ(t_i) a†⟩` over the launch points.
    /// This is the same discrete sum as [`CorrelationMap::triangle_integral`] on
    /// a map with the same stride, at linear instead of quadratic cost.
    pub fn triangle_integral_adjoint(&self, t1_stride: usize) -> Result<f64> {
        if t1_stride == 0 {
            return Err(Error::InvalidParameter("t1 stride must be at least 1".into()));
        }
        let grid = *self.grid();
        let n = grid.n_steps;
        let dt = grid.dt;
        let launches = launch_indices(n, t1_stride);
        let weights = launch_weights(&launches, dt);
        let a = self.number.as_slice();
        let mut ws = self.propagator.workspace();
        let mut q: Vec<C64> = a.iter().map(|z| z * (0.5 * dt)).collect();
        let mut total = 0.0;
        // The last launch point is t_n, whose inner interval is empty.
        let mut next = launches.len() - 2;
        for i in (0..n).rev() {
            self.propagator.adjoint_step(i, &mut q, &mut ws);
            for (qz, az) in q.iter_mut().zip(a) {
                *qz += az * dt;
            }
            if !q.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { t: grid.time(i), step: i });
            }
            if launches[next] == i {
                let x = self.conditional_state(i);
                let xs = x.op.as_slice();
                let inner = hs_real(&q, xs) - 0.5 * dt * expect_hermitian(a, xs).re;
                total += weights[next] * inner;
                next = next.saturating_sub(1);
            }
        }
        Ok(total)
    }
}

/// Correlation map of the ground-state-initialized cycle in the lab frame.
pub fn g2_grid(
    system: &QuantumSystem,
    drive: &DriveProgram,
    grid: TimeGrid,
    t1_stride: usize,
) -> Result<CorrelationMap> {
    let engine = RegressionEngine::new(system, drive, grid, Frame::Lab, TruncationPolicy::Warn)?;
    engine.g2_grid(t1_stride, 0.0)
}

/// Per-bin two-photon probability `p = G² γ_f² dt²`.
pub fn coincidence_probability_map(map: &CorrelationMap, gamma_f: f64, dt: f64) -> CorrelationMap {
    let s = (gamma_f * dt).powi(2);
    map.map_values(MapQuantity::Probability, |v| v * s)
}

/// Per-cycle mean number of ordered photon pairs, `γ_f² ∫∫ G²`.
pub fn pairs_per_cycle(triangle_integral: f64, gamma_f: f64) -> f64 {
    gamma_f * gamma_f * triangle_integral
}

/// Coincidence rate in s⁻¹: `η_c² ν_rep γ_f² ∫dt₁ ∫_{t₁} dt₂ G²`.
pub fn coincidence_rate(map: &CorrelationMap, det: &DetectionParams) -> f64 {
    coincidence_rate_from_integral(map.triangle_integral(), det)
}

pub fn coincidence_rate_from_integral(triangle_integral: f64, det: &DetectionParams) -> f64 {
    det.eta_c * det.eta_c * det.nu_rep * pairs_per_cycle(triangle_integral, det.gamma_f)
}

/// Fluorescence rate in s⁻¹: `η_f ν_rep γ_f ∫ ⟨Σᵢ Jᵢ†Jᵢ⟩ dt`.
pub fn fluorescence_rate(trajectory: &DensityTrajectory, system: &QuantumSystem, det: &DetectionParams) -> f64 {
    let series = trajectory.expectation(&system.photon_number());
    fluorescence_rate_from_series(&series, &trajectory.grid, det)
}

pub fn fluorescence_rate_from_series(series: &[f64], grid: &TimeGrid, det: &DetectionParams) -> f64 {
    let integral: f64 = series.iter().enumerate().map(|(k, v)| grid.trapezoid_weight(k) * v).sum();
    det.eta_f * det.nu_rep * det.gamma_f * integral
}
