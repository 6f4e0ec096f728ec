//! Monte-Carlo wave-function unraveling of the master equation.
//!
//! Used only to cross-check the regression engine: the mean number of ordered
//! photon pairs per cycle estimated here must match `γ_f² ∫∫ G²`.
//!
//! Each step of length `dt` either emits a photon on channel `i` with
//! probability `γᵢ ‖Jᵢψ‖² dt`, or evolves `ψ` with the effective Hamiltonian
//! `H(t) − (i/2)Σγ J†J` (RK4) and renormalizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operator::{Operator, C64, ZERO};
use crate::propagator::Propagator;
use crate::system::{DriveProgram, Frame, QuantumSystem};

pub const MIN_TRAJECTORIES: usize = 100;
/// Per-step total jump probability above which the unraveling is considered too coarse.
pub const MAX_STEP_JUMP_PROBABILITY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Click {
    pub time: f64,
    pub channel: usize,
}

/// Emission records of every trajectory of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRun {
    pub n_traj: usize,
    pub seed: u64,
    pub records: Vec<Vec<Click>>,
    /// Largest per-step total jump probability encountered.
    pub max_step_probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub n_traj: usize,
    /// Probability of at least one click per cycle.
    pub p1_hat: f64,
    pub p1_se: f64,
    /// Probability of at least two clicks per cycle.
    pub p2_hat: f64,
    pub p2_se: f64,
    /// Mean number of ordered pairs `k(k−1)/2` per cycle.
    pub pairs_hat: f64,
    pub pairs_se: f64,
    pub mean_clicks: f64,
}

impl TrajectoryRun {
    pub fn estimate(&self) -> McEstimate {
        let n = self.records.len() as f64;
        let counts: Vec<f64> = self.records.iter().map(|r| r.len() as f64).collect();
        let frac = |pred: &dyn Fn(f64) -> bool| counts.iter().filter(|&&k| pred(k)).count() as f64 / n;
        let p1 = frac(&|k| k >= 1.0);
        let p2 = frac(&|k| k >= 2.0);
        let pairs: Vec<f64> = counts.iter().map(|k| 0.5 * k * (k - 1.0)).collect();
        let (pairs_hat, pairs_var) = mean_var(&pairs);
        McEstimate {
            n_traj: self.records.len(),
            p1_hat: p1,
            p1_se: (p1 * (1.0 - p1) / n).sqrt(),
            p2_hat: p2,
            p2_se: (p2 * (1.0 - p2) / n).sqrt(),
            pairs_hat,
            pairs_se: (pairs_var / n).sqrt(),
            mean_clicks: counts.iter().sum::<f64>() / n,
        }
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Independent, reproducible random stream for trajectory `index`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Unraveling {
    prop: Propagator,
    jumps: Vec<(f64, Operator)>,
    dim: usize,
}

struct Scratch {
    h: [Vec<C64>; 3],
    k: [Vec<C64>; 4],
    y: Vec<C64>,
    jpsi: Vec<C64>,
    probs: Vec<f64>,
    /// Stage index currently held in `h[0]`.
    h0_stage: Option<usize>,
}

impl Unraveling {
    fn new(system: &QuantumSystem, drive: &DriveProgram, grid: TimeGrid) -> Result<Self> {
        let prop = Propagator::new(system, drive, grid, Frame::Lab)?;
        let jumps = system.jumps().iter().map(|j| (j.rate, j.op.clone())).collect();
        Ok(Self { prop, jumps, dim: system.dim() })
    }

    fn scratch(&self) -> Scratch {
        let d = self.dim;
        let z = |n: usize| vec![ZERO; n];
        Scratch {
            h: [z(d * d), z(d * d), z(d * d)],
            k: [z(d), z(d), z(d), z(d)],
            y: z(d),
            jpsi: z(d),
            probs: vec![0.0; self.jumps.len()],
            h0_stage: None,
        }
    }

    /// `out = −i H ψ`.
    fn deriv(d: usize, h: &[C64], psi: &[C64], out: &mut [C64]) {
        for r in 0..d {
            let mut acc = ZERO;
            for c in 0..d {
                acc += h[r * d + c] * psi[c];
            }
            out[r] = C64::new(acc.im, -acc.re);
        }
    }

    fn apply(op: &Operator, psi: &[C64], out: &mut [C64]) {
        let d = op.dim();
        let a = op.as_slice();
        for r in 0..d {
            out[r] = (0..d).map(|c| a[r * d + c] * psi[c]).sum();
        }
    }

    /// Runs one trajectory from the ground state, calling `observer(k, ψ)` with the
    /// normalized state at every grid point reached. Returns the clicks and the
    /// largest per-step jump probability.
    fn run<R: Rng, F: FnMut(usize, &[C64])>(&self, rng: &mut R, mut observer: F) -> (Vec<Click>, f64) {
        let grid = *self.prop.grid();
        let d = self.dim;
        let dt = grid.dt;
        let mut s = self.scratch();
        let mut psi = vec![ZERO; d];
        psi[0] = C64::new(1.0, 0.0);
        let mut clicks = Vec::new();
        let mut max_p = 0.0_f64;
        observer(0, &psi);
        for k in 0..grid.n_steps {
            let mut total = 0.0;
            for (p, (rate, j)) in s.probs.iter_mut().zip(&self.jumps) {
                Self::apply(j, &psi, &mut s.jpsi);
                *p = rate * s.jpsi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
                total += *p;
            }
            if total == 0.0 && self.prop.drive_quiet_from(k) {
                // Dark state with no field left: nothing can happen any more.
                for kk in k + 1..=grid.n_steps {
                    observer(kk, &psi);
                }
                break;
            }
            max_p = max_p.max(total);
            let u: f64 = rng.gen();
            if u < total {
                let mut acc = 0.0;
                let mut chosen = self.jumps.len() - 1;
                for (i, p) in s.probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                Self::apply(&self.jumps[chosen].1, &psi, &mut s.jpsi);
                psi.copy_from_slice(&s.jpsi);
                clicks.push(Click { time: grid.time(k), channel: chosen });
            } else {
                self.no_jump_step(k, &mut psi, &mut s);
            }
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in psi.iter_mut() {
                *z /= norm;
            }
            observer(k + 1, &psi);
        }
        (clicks, max_p)
    }

    fn no_jump_step(&self, k: usize, psi: &mut [C64], s: &mut Scratch) {
        let d = self.dim;
        let dt = self.prop.grid().dt;
        let half = 0.5 * dt;
        // the last stage of step k is the first stage of step k + 1
        if s.h0_stage != Some(2 * k) {
            self.prop.assemble(2 * k, &mut s.h[0]);
        }
        self.prop.assemble(2 * k + 1, &mut s.h[1]);
        self.prop.assemble(2 * k + 2, &mut s.h[2]);
        let [k1, k2, k3, k4] = &mut s.k;
        Self::deriv(d, &s.h[0], psi, k1);
        for i in 0..d {
            s.y[i] = psi[i] + half * k1[i];
        }
        Self::deriv(d, &s.h[1], &s.y, k2);
        for i in 0..d {
            s.y[i] = psi[i] + half * k2[i];
        }
        Self::deriv(d, &s.h[1], &s.y, k3);
        for i in 0..d {
            s.y[i] = psi[i] + dt * k3[i];
        }
        Self::deriv(d, &s.h[2], &s.y, k4);
        for i in 0..d {
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
        s.h.swap(0, 2);
        s.h0_stage = Some(2 * k + 2);
    }
}

/// Unravels `n_traj` trajectories; trajectory `i` uses stream `i` of `seed`.
pub fn mc_trajectories(
    system: &QuantumSystem,
    drive: &DriveProgram,
    grid: TimeGrid,
    n_traj: usize,
    seed: u64,
) -> Result<TrajectoryRun> {
    if n_traj < MIN_TRAJECTORIES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_TRAJECTORIES} trajectories, got {n_traj}")));
    }
    let unr = Unraveling::new(system, drive, grid)?;
    let results: Vec<(Vec<Click>, f64)> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| unr.run(&mut trajectory_rng(seed, i), |_, _| {}))
        .collect();
    let max_step_probability = results.iter().map(|r| r.1).fold(0.0, f64::max);
    if max_step_probability > MAX_STEP_JUMP_PROBABILITY {
        log::warn!(
            "per-step jump probability reached {max_step_probability:.3e} (> {MAX_STEP_JUMP_PROBABILITY}); reduce dt"
        );
    }
    Ok(TrajectoryRun { n_traj, seed, records: results.into_iter().map(|r| r.0).collect(), max_step_probability })
}

/// Per-cycle click statistics from `n_traj` unraveled trajectories.
pub fn mc_coincidence(
    system: &QuantumSystem,
    drive: &DriveProgram,
    grid: TimeGrid,
    n_traj: usize,
    seed: u64,
) -> Result<McEstimate> {
    Ok(mc_trajectories(system, drive, grid, n_traj, seed)?.estimate())
}

/// Ensemble average of `|ψ⟩⟨ψ|` at the requested grid indices, with the
/// standard error of every entry (`(re, im)` pairs, row-major).
pub fn mc_density_average(
    system: &QuantumSystem,
    drive: &DriveProgram,
    grid: TimeGrid,
    n_traj: usize,
    seed: u64,
    sample_steps: &[usize],
) -> Result<Vec<(Operator, Vec<f64>)>> {
    if n_traj < MIN_TRAJECTORIES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_TRAJECTORIES} trajectories, got {n_traj}")));
    }
    let unr = Unraveling::new(system, drive, grid)?;
    let d = system.dim();
    let m = sample_steps.len();
    // Each trajectory yields its projectors at the sample points, in order.
    let samples: Vec<Vec<C64>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![ZERO; m * d * d];
            unr.run(&mut trajectory_rng(seed, i), |k, psi| {
                for (slot, _) in sample_steps.iter().enumerate().filter(|(_, &s)| s == k) {
                    let block = &mut out[slot * d * d..(slot + 1) * d * d];
                    for r in 0..d {
                        for c in 0..d {
                            block[r * d + c] = psi[r] * psi[c].conj();
                        }
                    }
                }
            });
            out
        })
        .collect();
    let n = n_traj as f64;
    let mut result = Vec::with_capacity(m);
    for slot in 0..m {
        let range = slot * d * d..(slot + 1) * d * d;
        let mut mean = vec![ZERO; d * d];
        for s in &samples {
            for (acc, z) in mean.iter_mut().zip(&s[range.clone()]) {
                *acc += z;
            }
        }
        for z in mean.iter_mut() {
            *z /= n;
        }
        let mut se = vec![0.0; d * d];
        for idx in 0..d * d {
            let var: f64 = samples.iter().map(|s| (s[range.start + idx] - mean[idx]).norm_sqr()).sum::<f64>() / (n - 1.0);
            se[idx] = (var / n).sqrt();
        }
        result.push((Operator::from_row_major(d, mean)?, se));
    }
    Ok(result)
}
