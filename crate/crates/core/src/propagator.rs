//! Lindblad master equation and fixed-step fourth-order Runge–Kutta propagation.
//!
//! Convention: ħ = 1, `ρ̇ = −i[H₀ + H_d(t), ρ] + Σᵢ γᵢ (Jᵢ ρ Jᵢ† − ½{Jᵢ†Jᵢ, ρ})`
//! with `H_d(t) = −Σ_c E_c(t) D_c`, where `E_c` is the summed field of every
//! pulse assigned to drive channel `c`.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operator::{DensityMatrix, Operator, C64, ZERO};
use crate::pulse::pulse_field;
use crate::system::{DriveProgram, Frame, QuantumSystem};

/// Default propagation step in atomic units.
pub const DEFAULT_DT: f64 = 0.5;

type Entries = Vec<(usize, usize, C64)>;

/// `Σᵢ γᵢ (Jᵢ ρ Jᵢ† − ½{Jᵢ†Jᵢ, ρ})`.
pub fn dissipator(system: &QuantumSystem, rho: &DensityMatrix) -> Result<Operator> {
    check_dim(system, rho.dim())?;
    let mut out = Operator::zeros(system.dim());
    for ch in system.jumps() {
        let j = &ch.op;
        let jd = j.dagger();
        let jdj = jd.matmul(j);
        let gain = j.matmul(&rho.op).matmul(&jd);
        let anti = &jdj.matmul(&rho.op) + &rho.op.matmul(&jdj);
        out += &(&gain - &anti.scale_real(0.5)).scale_real(ch.rate);
    }
    Ok(out)
}

/// Lab-frame Hamiltonian `H₀ − Σ_c E_c(t) D_c`.
pub fn hamiltonian_at(system: &QuantumSystem, drive: &DriveProgram, t: f64) -> Result<Operator> {
    drive.validate(system)?;
    let mut h = system.h0().clone();
    for (pulse, ch) in &drive.assignments {
        let e = pulse_field(pulse, t);
        h += &system.drives()[ch.0].op.scale_real(-e);
    }
    Ok(h)
}

/// Full lab-frame right-hand side of the master equation at time `t`.
pub fn master_rhs(
    system: &QuantumSystem,
    drive: &DriveProgram,
    rho: &DensityMatrix,
    t: f64,
) -> Result<Operator> {
    check_dim(system, rho.dim())?;
    let h = hamiltonian_at(system, drive, t)?;
    let coherent = h.commutator(&rho.op).scale(C64::new(0.0, -1.0));
    Ok(&coherent + &dissipator(system, rho)?)
}

/// Classical RK4 step with the derivative evaluated at `t`, `t + dt/2` and `t + dt`.
pub fn rk4_step<F>(rhs: F, rho: &Operator, t: f64, dt: f64) -> Operator
where
    F: Fn(f64, &Operator) -> Operator,
{
    let half = 0.5 * dt;
    let k1 = rhs(t, rho);
    let k2 = rhs(t + half, &(rho + &k1.scale_real(half)));
    let k3 = rhs(t + half, &(rho + &k2.scale_real(half)));
    let k4 = rhs(t + dt, &(rho + &k3.scale_real(dt)));
    let mut incr = k1;
    incr += &k2.scale_real(2.0);
    incr += &k3.scale_real(2.0);
    incr += &k4;
    rho + &incr.scale_real(dt / 6.0)
}

fn check_dim(system: &QuantumSystem, dim: usize) -> Result<()> {
    if dim != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: dim });
    }
    Ok(())
}

/// Density matrices at every point of a time grid.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub grid: TimeGrid,
    pub normalized: bool,
    states: Vec<Operator>,
}

impl DensityTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> DensityMatrix {
        DensityMatrix::new(self.states[k].clone(), self.normalized)
    }

    pub fn operator(&self, k: usize) -> &Operator {
        &self.states[k]
    }

    pub fn operators(&self) -> &[Operator] {
        &self.states
    }

    /// Real part of `tr(A ρ(t_k))` for every grid point.
    pub fn expectation(&self, a: &Operator) -> Vec<f64> {
        // tr(Aρ) = Σ A_rc ρ_cr
        let d = a.dim();
        let at = a.as_slice();
        self.states
            .iter()
            .map(|rho| {
                let r = rho.as_slice();
                let mut acc = ZERO;
                for i in 0..d {
                    for j in 0..d {
                        acc += at[i * d + j] * r[j * d + i];
                    }
                }
                acc.re
            })
            .collect()
    }

    /// Population of basis level `k` at every grid point.
    pub fn population(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|rho| rho[(k, k)].re).collect()
    }
}

/// Pre-sampled drive coefficients at every RK4 stage time of a grid.
///
/// Stage `m` sits at `t_start + m·dt/2`; step `k` uses stages `2k`, `2k+1`, `2k+2`.
#[derive(Debug, Clone)]
struct FieldTable {
    n_channels: usize,
    coeffs: Vec<C64>,
}

impl FieldTable {
    fn new(drive: &DriveProgram, n_channels: usize, grid: &TimeGrid, frame: Frame) -> Self {
        let n_stages = 2 * grid.n_steps + 1;
        let mut coeffs = vec![ZERO; n_stages * n_channels];
        let half = 0.5 * grid.dt;
        for m in 0..n_stages {
            let t = grid.t_start + m as f64 * half;
            for (pulse, ch) in &drive.assignments {
                let kappa = match frame {
                    Frame::Lab => C64::new(-pulse_field(pulse, t), 0.0),
                    Frame::Rotating { omega } => {
                        let env = pulse.amplitude * pulse.envelope(t);
                        let phase = omega * t - pulse.carrier * (t - pulse.center);
                        C64::from_polar(-0.5 * env, phase)
                    }
                };
                coeffs[m * n_channels + ch.0] += kappa;
            }
        }
        Self { n_channels, coeffs }
    }

    fn stage(&self, m: usize) -> &[C64] {
        &self.coeffs[m * self.n_channels..(m + 1) * self.n_channels]
    }

    /// Whether every stage coefficient of steps `k..` is exactly zero.
    fn quiet_from_step(&self, k: usize) -> bool {
        self.coeffs[2 * k * self.n_channels..].iter().all(|z| *z == ZERO)
    }
}

#[derive(Debug, Clone)]
struct CompiledChannel {
    /// Entries multiplied by the stage coefficient κ.
    direct: Entries,
    /// Entries multiplied by κ*.
    conjugate: Entries,
}

/// Reusable scratch buffers for RK4 steps.
#[derive(Debug, Clone)]
pub struct Workspace {
    h: [Vec<C64>; 3],
    k: [Vec<C64>; 4],
    y: Vec<C64>,
    prod: Vec<C64>,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        let z = || vec![ZERO; dim * dim];
        Self { h: [z(), z(), z()], k: [z(), z(), z(), z()], y: z(), prod: z() }
    }
}

/// Master-equation propagator bound to one system, drive program and grid.
///
/// The RK4 step map is linear in the state, so the same propagator moves
/// normalized states, conditional states `aρa†` and (through
/// [`Propagator::adjoint_step`]) Heisenberg-picture observables.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    grid: TimeGrid,
    h_eff: Vec<C64>,
    channels: Vec<CompiledChannel>,
    jumps: Vec<(f64, Entries)>,
    field: FieldTable,
}

impl Propagator {
    pub fn new(system: &QuantumSystem, drive: &DriveProgram, grid: TimeGrid, frame: Frame) -> Result<Self> {
        drive.validate(system)?;
        let dim = system.dim();
        let mut h = system.h0().clone();
        if let Frame::Rotating { omega } = frame {
            if !(omega > 0.0) {
                return Err(Error::InvalidParameter(format!("rotating-frame frequency {omega}")));
            }
            for (i, n) in system.excitation().iter().enumerate() {
                h[(i, i)] -= C64::new(omega * n, 0.0);
            }
        }
        let mut jumps = Vec::with_capacity(system.jumps().len());
        for ch in system.jumps() {
            if ch.rate == 0.0 {
                continue;
            }
            let jdj = ch.op.dagger().matmul(&ch.op);
            h = &h - &jdj.scale(C64::new(0.0, 0.5 * ch.rate));
            jumps.push((ch.rate, ch.op.nonzeros()));
        }
        let channels = system
            .drives()
            .iter()
            .map(|d| match frame {
                Frame::Lab => CompiledChannel { direct: d.op.nonzeros(), conjugate: Vec::new() },
                Frame::Rotating { .. } => {
                    let r = d.raising();
                    CompiledChannel { direct: r.nonzeros(), conjugate: r.dagger().nonzeros() }
                }
            })
            .collect::<Vec<_>>();
        let field = FieldTable::new(drive, channels.len(), &grid, frame);
        Ok(Self { dim, grid, h_eff: h.into_vec(), channels, jumps, field })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.dim)
    }

    /// Whether the drive vanishes identically from step `k` on.
    pub fn drive_quiet_from(&self, k: usize) -> bool {
        self.field.quiet_from_step(k)
    }

    /// Effective non-Hermitian Hamiltonian `H(t) − (i/2)Σγ J†J` at stage `m`.
    pub(crate) fn assemble(&self, m: usize, out: &mut [C64]) {
        out.copy_from_slice(&self.h_eff);
        let d = self.dim;
        for (ch, &kappa) in self.channels.iter().zip(self.field.stage(m)) {
            if kappa == ZERO {
                continue;
            }
            for &(r, c, v) in &ch.direct {
                out[r * d + c] += kappa * v;
            }
            let kc = kappa.conj();
            for &(r, c, v) in &ch.conjugate {
                out[r * d + c] += kc * v;
            }
        }
    }

    /// Effective Hamiltonian at stage `m` as an operator (stage `2k` is grid point `k`).
    pub fn effective_hamiltonian(&self, m: usize) -> Operator {
        let mut buf = vec![ZERO; self.dim * self.dim];
        self.assemble(m, &mut buf);
        Operator::from_row_major(self.dim, buf).expect("square buffer")
    }

    /// `out = −i(H ρ − ρ H†) + Σ γ J ρ J†`.
    fn generator(&self, h: &[C64], rho: &[C64], prod: &mut [C64], out: &mut [C64]) {
        let d = self.dim;
        matmul(d, h, rho, prod);
        // out = −i (Hρ − ρH†)
        for r in 0..d {
            for c in 0..d {
                let mut acc = prod[r * d + c];
                for k in 0..d {
                    acc -= rho[r * d + k] * h[c * d + k].conj();
                }
                out[r * d + c] = C64::new(acc.im, -acc.re);
            }
        }
        for (rate, entries) in &self.jumps {
            for &(r1, c1, v1) in entries {
                for &(r2, c2, v2) in entries {
                    out[r1 * d + r2] += *rate * v1 * v2.conj() * rho[c1 * d + c2];
                }
            }
        }
    }

    /// Hilbert–Schmidt adjoint: `out = i(H† B − B H) + Σ γ J† B J`.
    fn adjoint_generator(&self, h: &[C64], b: &[C64], prod: &mut [C64], out: &mut [C64]) {
        let d = self.dim;
        matmul(d, b, h, prod);
        for r in 0..d {
            for c in 0..d {
                let mut acc = -prod[r * d + c];
                for k in 0..d {
                    acc += h[k * d + r].conj() * b[k * d + c];
                }
                out[r * d + c] = C64::new(-acc.im, acc.re);
            }
        }
        for (rate, entries) in &self.jumps {
            for &(r1, c1, v1) in entries {
                for &(r2, c2, v2) in entries {
                    out[c1 * d + c2] += *rate * v1.conj() * v2 * b[r1 * d + r2];
                }
            }
        }
    }

    /// Advances `state` from grid point `k` to `k + 1`.
    pub fn step(&self, k: usize, state: &mut [C64], ws: &mut Workspace) {
        let dt = self.grid.dt;
        let half = 0.5 * dt;
        let Workspace { h, k: kk, y, prod } = ws;
        for (s, hs) in h.iter_mut().enumerate() {
            self.assemble(2 * k + s, hs);
        }
        let [k1, k2, k3, k4] = kk;
        self.generator(&h[0], state, prod, k1);
        axpy_into(y, state, half, k1);
        self.generator(&h[1], y, prod, k2);
        axpy_into(y, state, half, k2);
        self.generator(&h[1], y, prod, k3);
        axpy_into(y, state, dt, k3);
        self.generator(&h[2], y, prod, k4);
        let w = dt / 6.0;
        for i in 0..state.len() {
            state[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }

    /// Applies the adjoint of the step map `k → k + 1` to `obs` in place.
    ///
    /// For every `X`, `⟨step†(B), X⟩ = ⟨B, step(X)⟩` up to round-off.
    pub fn adjoint_step(&self, k: usize, obs: &mut [C64], ws: &mut Workspace) {
        let dt = self.grid.dt;
        let half = 0.5 * dt;
        let w = dt / 6.0;
        let Workspace { h, k: kk, y: g4, prod } = ws;
        for (s, hs) in h.iter_mut().enumerate() {
            self.assemble(2 * k + s, hs);
        }
        let [g1, g2, g3, a] = kk;
        // Reverse sweep through the stages; g_s is the adjoint of k_s.
        for i in 0..obs.len() {
            g1[i] = w * obs[i];
            g2[i] = 2.0 * w * obs[i];
            g3[i] = g2[i];
            g4[i] = g1[i];
        }
        self.adjoint_generator(&h[2], g4, prod, a);
        for i in 0..obs.len() {
            obs[i] += a[i];
            g3[i] += dt * a[i];
        }
        self.adjoint_generator(&h[1], g3, prod, a);
        for i in 0..obs.len() {
            obs[i] += a[i];
            g2[i] += half * a[i];
        }
        self.adjoint_generator(&h[1], g2, prod, a);
        for i in 0..obs.len() {
            obs[i] += a[i];
            g1[i] += half * a[i];
        }
        self.adjoint_generator(&h[0], g1, prod, a);
        for i in 0..obs.len() {
            obs[i] += a[i];
        }
    }

    /// Propagates `rho0` from grid point `from` to the end, calling
    /// `observer(k, state)` at every grid point `k ≥ from` (including `from`).
    pub fn run_from<F>(&self, from: usize, rho0: &[C64], mut observer: F) -> Result<Vec<C64>>
    where
        F: FnMut(usize, &[C64]),
    {
        let mut ws = self.workspace();
        let mut state = rho0.to_vec();
        observer(from, &state);
        for k in from..self.grid.n_steps {
            self.step(k, &mut state, &mut ws);
            if !state.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { t: self.grid.time(k + 1), step: k + 1 });
            }
            observer(k + 1, &state);
        }
        Ok(state)
    }

    /// Full trajectory starting from `rho0` at the first grid point.
    pub fn trajectory(&self, rho0: &DensityMatrix) -> Result<DensityTrajectory> {
        if rho0.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rho0.dim() });
        }
        let d = self.dim;
        let mut states = Vec::with_capacity(self.grid.len());
        self.run_from(0, rho0.op.as_slice(), |_, s| {
            states.push(Operator::from_row_major(d, s.to_vec()).expect("square buffer"));
        })?;
        Ok(DensityTrajectory { grid: self.grid, normalized: rho0.normalized, states })
    }
}

#[inline]
fn matmul(d: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    for r in 0..d {
        let row = &mut out[r * d..(r + 1) * d];
        row.fill(ZERO);
        for k in 0..d {
            let x = a[r * d + k];
            if x == ZERO {
                continue;
            }
            for c in 0..d {
                row[c] += x * b[k * d + c];
            }
        }
    }
}

#[inline]
fn axpy_into(out: &mut [C64], x: &[C64], a: f64, y: &[C64]) {
    for i in 0..out.len() {
        out[i] = x[i] + a * y[i];
    }
}

/// Propagates `rho0` over `grid` in the lab frame.
pub fn propagate(
    system: &QuantumSystem,
    drive: &DriveProgram,
    rho0: &DensityMatrix,
    grid: TimeGrid,
) -> Result<DensityTrajectory> {
    Propagator::new(system, drive, grid, Frame::Lab)?.trajectory(rho0)
}

/// Worst-case state-validity figures along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryDiagnostics {
    /// Largest `|tr ρ − tr ρ₀|`.
    pub max_trace_drift: f64,
    pub max_hermiticity_defect: f64,
    /// Smallest eigenvalue over the sampled states.
    pub min_eigenvalue: f64,
}

impl TrajectoryDiagnostics {
    /// Scans every state for trace and Hermiticity, and every `eig_stride`-th
    /// state (plus the last) for positivity.
    pub fn of(traj: &DensityTrajectory, eig_stride: usize) -> Self {
        let eig_stride = eig_stride.max(1);
        let tr0 = traj.operator(0).trace().re;
        let last = traj.len() - 1;
        let mut d = Self { min_eigenvalue: f64::INFINITY, ..Self::default() };
        for (k, rho) in traj.operators().iter().enumerate() {
            d.max_trace_drift = d.max_trace_drift.max((rho.trace().re - tr0).abs());
            d.max_hermiticity_defect = d.max_hermiticity_defect.max(rho.hermiticity_defect());
            if k % eig_stride == 0 || k == last {
                let ev = rho.eigenvalues_hermitian()[0];
                d.min_eigenvalue = d.min_eigenvalue.min(ev);
            }
        }
        d
    }

    /// Folds two diagnostics into their joint worst case.
    pub fn worst(self, other: Self) -> Self {
        Self {
            max_trace_drift: self.max_trace_drift.max(other.max_trace_drift),
            max_hermiticity_defect: self.max_hermiticity_defect.max(other.max_hermiticity_defect),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{make_exciton_biexciton, make_two_level, ExcitonBiexcitonParams};
    use crate::operator::projector;
    use crate::pulse::Pulse;
    use proptest::prelude::*;

    const W: f64 = 7.35e-2;
    const G: f64 = 3.3e-3;
    const MU: f64 = 3.93;

    fn xx_system() -> QuantumSystem {
        make_exciton_biexciton(&ExcitonBiexcitonParams { omega_x: W, delta: 1e-3, gamma: G, mu: MU }).unwrap()
    }

    fn xx_drive(sys: &QuantumSystem, e0: f64) -> DriveProgram {
        let p = Pulse::new(e0, 400.0, 200.0, W).unwrap();
        DriveProgram::new()
            .with(p, sys.channel("sigma_plus").unwrap())
            .with(p.shifted(150.0), sys.channel("sigma_minus").unwrap())
    }

    fn pseudo_random_state(dim: usize, seed: u64) -> Operator {
        // A = B B† / tr(B B†) with deterministic complex entries
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let b = Operator::from_fn(dim, |_, _| C64::new(next(), next()));
        let a = b.matmul(&b.dagger());
        a.scale_real(1.0 / a.trace().re)
    }

    #[test]
    fn dissipator_of_excited_tls() {
        let sys = make_two_level(W, G, MU).unwrap();
        let d = dissipator(&sys, &DensityMatrix::basis(1, 2).unwrap()).unwrap();
        let expected = &projector(0, 0, 2).unwrap().scale_real(G) - &projector(1, 1, 2).unwrap().scale_real(G);
        assert!((&d - &expected).max_abs() < 1e-18);
        // coherences decay at γ/2
        let coh = DensityMatrix::new(projector(0, 1, 2).unwrap(), false);
        let d = dissipator(&sys, &coh).unwrap();
        assert!((d[(0, 1)] - C64::new(-G / 2.0, 0.0)).norm() < 1e-18);
    }

    #[test]
    fn rk4_on_scalar_decay() {
        let one = |v: f64| Operator::from_fn(1, |_, _| C64::new(v, 0.0));
        let y = rk4_step(|_, y| y.scale_real(-1.0), &one(1.0), 0.0, 0.1);
        assert!((y[(0, 0)].re - 0.9048375).abs() < 1e-12);
        // global error drops by 2⁴ when the step is halved
        let integrate = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut y = one(1.0);
            for k in 0..n {
                y = rk4_step(|_, y| y.scale_real(-1.0), &y, k as f64 * dt, dt);
            }
            (y[(0, 0)].re - (-1.0f64).exp()).abs()
        };
        let ratio = integrate(0.1) / integrate(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    /// Term-by-term evaluation of the master equation from its definition.
    fn reference_rhs(sys: &QuantumSystem, drive: &DriveProgram, rho: &Operator, t: f64) -> Operator {
        let mut h = sys.h0().clone();
        for (p, ch) in &drive.assignments {
            let env = (-2.0 * 2f64.ln() * ((t - p.center) / p.duration).powi(2)).exp();
            let e = p.amplitude * env * (p.carrier * (t - p.center)).cos();
            h = &h - &sys.drives()[ch.0].op.scale_real(e);
        }
        let minus_i = C64::new(0.0, -1.0);
        let mut out = (&h.matmul(rho) - &rho.matmul(&h)).scale(minus_i);
        for j in sys.jumps() {
            let l = &j.op;
            let ld = l.dagger();
            out = &out + &l.matmul(rho).matmul(&ld).scale_real(j.rate);
            out = &out - &ld.matmul(l).matmul(rho).scale_real(0.5 * j.rate);
            out = &out - &rho.matmul(&ld).matmul(l).scale_real(0.5 * j.rate);
        }
        out
    }

    #[test]
    fn master_rhs_matches_definition_at_pulse_peak() {
        let sys = xx_system();
        let drive = xx_drive(&sys, 2e-2);
        let rho = pseudo_random_state(4, 3);
        for t in [400.0, 475.0, 550.0] {
            let got = master_rhs(&sys, &drive, &DensityMatrix::new(rho.clone(), true), t).unwrap();
            let want = reference_rhs(&sys, &drive, &rho, t);
            assert!((&got - &want).max_abs() < 1e-15);
            assert!(got.hermiticity_defect() < 1e-15);
            assert!(got.trace().norm() < 1e-15);
        }
    }

    #[test]
    fn compiled_step_matches_operator_rk4() {
        let sys = xx_system();
        let drive = xx_drive(&sys, 2e-2);
        let grid = TimeGrid::new(300.0, 0.5, 400).unwrap();
        let rho0 = pseudo_random_state(4, 9);
        let traj = Propagator::new(&sys, &drive, grid, Frame::Lab)
            .unwrap()
            .trajectory(&DensityMatrix::new(rho0.clone(), true))
            .unwrap();
        let mut rho = rho0;
        for k in 0..grid.n_steps {
            rho = rk4_step(|t, r| reference_rhs(&sys, &drive, r, t), &rho, grid.time(k), grid.dt);
        }
        assert!((&rho - traj.operator(grid.n_steps)).max_abs() < 1e-12);
    }

    #[test]
    fn free_decay_follows_exponential() {
        let sys = make_two_level(W, G, MU).unwrap();
        let grid = TimeGrid::new(0.0, DEFAULT_DT, 4000).unwrap();
        let traj = propagate(&sys, &DriveProgram::new(), &DensityMatrix::basis(1, 2).unwrap(), grid).unwrap();
        for k in (0..=grid.n_steps).step_by(250) {
            let exact = (-G * grid.time(k)).exp();
            assert!((traj.population(1)[k] - exact).abs() < 1e-6, "k={k}: {} vs {exact}", traj.population(1)[k]);
        }
    }

    #[test]
    fn adjoint_step_is_exact_transpose() {
        let sys = xx_system();
        let drive = xx_drive(&sys, 3e-2);
        let grid = TimeGrid::new(350.0, 0.5, 200).unwrap();
        let prop = Propagator::new(&sys, &drive, grid, Frame::Lab).unwrap();
        let mut ws = prop.workspace();
        for (k, seed) in [(0, 1), (57, 2), (120, 3), (199, 4)] {
            let x = pseudo_random_state(4, seed);
            // a non-Hermitian observable exercises the complex structure
            let b = &pseudo_random_state(4, seed + 100) + &projector(0, 3, 4).unwrap().scale(C64::new(0.3, 0.7));
            let mut sx = x.clone();
            prop.step(k, sx.as_mut_slice(), &mut ws);
            let mut sb = b.clone();
            prop.adjoint_step(k, sb.as_mut_slice(), &mut ws);
            let lhs = sb.inner(&x);
            let rhs = b.inner(&sx);
            assert!((lhs - rhs).norm() < 1e-14, "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn linear_in_initial_state() {
        let sys = xx_system();
        let drive = xx_drive(&sys, 2e-2);
        let grid = TimeGrid::new(300.0, 0.5, 300).unwrap();
        let prop = Propagator::new(&sys, &drive, grid, Frame::Lab).unwrap();
        let a = pseudo_random_state(4, 5);
        let b = pseudo_random_state(4, 6);
        let mix = &a.scale_real(0.3) + &b.scale_real(0.7);
        let end = |r: &Operator| prop.run_from(0, r.as_slice(), |_, _| {}).unwrap();
        let (ea, eb, em) = (end(&a), end(&b), end(&mix));
        for i in 0..16 {
            assert!((0.3 * ea[i] + 0.7 * eb[i] - em[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn run_from_offset_matches_full_run() {
        let sys = xx_system();
        let drive = xx_drive(&sys, 2e-2);
        let grid = TimeGrid::new(300.0, 0.5, 300).unwrap();
        let prop = Propagator::new(&sys, &drive, grid, Frame::Lab).unwrap();
        let traj = prop.trajectory(&DensityMatrix::basis(0, 4).unwrap()).unwrap();
        let tail = prop.run_from(120, traj.operator(120).as_slice(), |_, _| {}).unwrap();
        assert_eq!(tail.as_slice(), traj.operator(300).as_slice());
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let sys = xx_system();
        assert!(dissipator(&sys, &DensityMatrix::basis(0, 2).unwrap()).is_err());
        assert!(master_rhs(&sys, &DriveProgram::new(), &DensityMatrix::basis(0, 3).unwrap(), 0.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn propagation_keeps_trace_hermiticity_and_positivity(
            seed in 0u64..10_000,
            e0 in 0.0f64..5e-2,
            center in 200.0f64..600.0,
            width in 60.0f64..300.0,
        ) {
            let sys = xx_system();
            let p = Pulse::new(e0, center, width, W).unwrap();
            let drive = DriveProgram::new().with(p, sys.channel("sigma_plus").unwrap());
            let grid = TimeGrid::new(0.0, DEFAULT_DT, 1600).unwrap();
            let rho0 = DensityMatrix::new(pseudo_random_state(4, seed), true);
            let traj = propagate(&sys, &drive, &rho0, grid).unwrap();
            let diag = TrajectoryDiagnostics::of(&traj, 100);
            prop_assert!(diag.max_trace_drift < 1e-10);
            prop_assert!(diag.max_hermiticity_defect < 1e-12);
            prop_assert!(diag.min_eigenvalue > -1e-9);
        }

        #[test]
        fn rhs_is_hermitian_and_traceless(seed in 0u64..10_000, t in 0.0f64..800.0) {
            let sys = xx_system();
            let drive = xx_drive(&sys, 3e-2);
            let rho = DensityMatrix::new(pseudo_random_state(4, seed), true);
            let r = master_rhs(&sys, &drive, &rho, t).unwrap();
            prop_assert!(r.hermiticity_defect() < 1e-15);
            prop_assert!(r.trace().norm() < 1e-15);
        }
    }
}
