//! Two-pulse delay scans and their Fourier spectra.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::operator::C64;
use crate::propagator::TrajectoryDiagnostics;
use crate::pulse::Pulse;
use crate::regression::{
    auto_stride, coincidence_rate, coincidence_rate_from_integral, fluorescence_rate_from_series,
    pairs_per_cycle, DetectionParams, RegressionEngine, TruncationPolicy,
};
use crate::system::{ChannelId, DriveProgram, Frame, QuantumSystem};
use crate::units::UnitContext;

/// Default number of lifetimes appended after the last pulse.
pub const DEFAULT_PAD_LIFETIMES: f64 = 12.0;
/// Default cap on `t₁` launch points for the explicit correlation grid.
pub const DEFAULT_MAX_LAUNCHES: usize = 2000;
/// States between positivity checks in scan diagnostics.
const EIG_STRIDE: usize = 16;

/// How the coincidence double integral is evaluated at each delay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoincidenceMethod {
    /// Backward sweep with the adjoint step map (linear cost).
    Adjoint { t1_stride: usize },
    /// Explicit `G²` grid, with `t1_stride` chosen to keep at most `max_launches` rows
    /// unless a stride is given.
    Grid { t1_stride: Option<usize>, max_launches: usize },
}

impl Default for CoincidenceMethod {
    fn default() -> Self {
        Self::Adjoint { t1_stride: 1 }
    }
}

/// Uniform delay range `T_min, T_min + ΔT, …, ≤ T_max` in atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl DelayRange {
    pub fn single(delay: f64) -> Self {
        Self { min: delay, max: delay, step: 1.0 }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.min + k as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub system: QuantumSystem,
    /// Template for both pulses; its `center` is the first pulse's center.
    pub pulse: Pulse,
    pub first_channel: ChannelId,
    pub second_channel: ChannelId,
    pub detection: DetectionParams,
    pub delays: DelayRange,
    pub dt: f64,
    pub t_start: f64,
    /// Window length appended after the last pulse center, a.u.
    pub pad: f64,
    pub method: CoincidenceMethod,
    pub frame: Frame,
    pub truncation: TruncationPolicy,
    /// Accept delay steps that undersample the carrier.
    pub allow_aliasing: bool,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.detection.validate()?;
        self.drive(0.0).validate(&self.system)?;
        let d = &self.delays;
        if !(d.min >= 0.0 && d.max >= d.min && d.step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delay range [{}, {}] step {} (need 0 ≤ T_min ≤ T_max, ΔT > 0)",
                d.min, d.max, d.step
            )));
        }
        let nyquist = PI / self.pulse.carrier;
        if d.max > d.min && d.step >= nyquist && !self.allow_aliasing {
            return Err(Error::InvalidParameter(format!(
                "delay step {} a.u. does not resolve the carrier (needs < {nyquist:.4} a.u.)",
                d.step
            )));
        }
        if !(self.dt > 0.0) || !(self.pad > 0.0) {
            return Err(Error::InvalidParameter("dt and pad must be positive".into()));
        }
        if self.pulse.center < self.t_start {
            return Err(Error::InvalidParameter("first pulse precedes the window start".into()));
        }
        Ok(())
    }

    /// Pulse 1 at the template center, pulse 2 `delay` later.
    pub fn drive(&self, delay: f64) -> DriveProgram {
        DriveProgram::new()
            .with(self.pulse, self.first_channel)
            .with(self.pulse.shifted(delay), self.second_channel)
    }

    pub fn grid(&self, delay: f64) -> Result<TimeGrid> {
        let last = self.pulse.center + delay.max(0.0);
        TimeGrid::covering(self.t_start, last + self.pad, self.dt)
    }

    pub fn engine(&self, delay: f64) -> Result<RegressionEngine> {
        RegressionEngine::new(&self.system, &self.drive(delay), self.grid(delay)?, self.frame, self.truncation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub delay: f64,
    /// Coincidence rate, s⁻¹.
    pub coincidence: f64,
    /// Fluorescence rate, s⁻¹.
    pub fluorescence: f64,
    /// Mean number of ordered photon pairs per cycle.
    pub pairs_per_cycle: f64,
    /// Largest total excited population along the cycle.
    pub peak_excitation: f64,
    pub truncation_residual: f64,
    pub diagnostics: TrajectoryDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    pub fn delays(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delay).collect()
    }

    pub fn coincidence(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.coincidence).collect()
    }

    pub fn fluorescence(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.fluorescence).collect()
    }

    pub fn series(&self, channel: SignalChannel) -> Vec<f64> {
        match channel {
            SignalChannel::Coincidence => self.coincidence(),
            SignalChannel::Fluorescence => self.fluorescence(),
        }
    }

    pub fn diagnostics(&self) -> TrajectoryDiagnostics {
        self.points
            .iter()
            .map(|p| p.diagnostics)
            .reduce(TrajectoryDiagnostics::worst)
            .unwrap_or_default()
    }
}

/// Evaluates c(T) and f(T) for a single delay.
pub fn scan_point(cfg: &ScanConfig, delay: f64) -> Result<ScanPoint> {
    let engine = cfg.engine(delay)?;
    let grid = *engine.grid();
    let integral = match cfg.method {
        CoincidenceMethod::Adjoint { t1_stride } => engine.triangle_integral_adjoint(t1_stride)?,
        CoincidenceMethod::Grid { t1_stride, max_launches } => {
            let stride = t1_stride.unwrap_or_else(|| auto_stride(grid.n_steps, max_launches));
            engine.g2_grid(stride, delay)?.triangle_integral()
        }
    };
    let det = &cfg.detection;
    let emission = engine.photon_series();
    let ground = engine.trajectory().population(0);
    let peak_excitation = engine
        .trajectory()
        .operators()
        .iter()
        .zip(&ground)
        .map(|(r, g)| r.trace().re - g)
        .fold(0.0, f64::max);
    Ok(ScanPoint {
        delay,
        coincidence: coincidence_rate_from_integral(integral, det),
        fluorescence: fluorescence_rate_from_series(&emission, &grid, det),
        pairs_per_cycle: pairs_per_cycle(integral, det.gamma_f),
        peak_excitation,
        truncation_residual: engine.truncation_residual(),
        diagnostics: TrajectoryDiagnostics::of(engine.trajectory(), EIG_STRIDE),
    })
}

/// Runs every delay of `cfg` on the current rayon pool.
///
/// Points are independent and collected by index, so the result does not
/// depend on the number of workers.
pub fn run_delay_scan(cfg: &ScanConfig) -> Result<ScanResult> {
    cfg.validate()?;
    let delays = cfg.delays.values();
    let points = delays
        .par_iter()
        .map(|&t| {
            scan_point(cfg, t).map_err(|e| Error::ScanPoint {
                delay_fs: UnitContext::default().time_au_to_fs(t),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult { points })
}

/// Coincidence rate from the explicit correlation grid, for cross-checks.
pub fn grid_coincidence(cfg: &ScanConfig, delay: f64, t1_stride: usize) -> Result<f64> {
    let map = cfg.engine(delay)?.g2_grid(t1_stride, delay)?;
    Ok(coincidence_rate(&map, &cfg.detection))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalChannel {
    Coincidence,
    Fluorescence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    None,
    Hann,
}

/// Positive-frequency DFT magnitudes of a delay series.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Angular frequencies, a.u., ascending from zero.
    pub omega: Vec<f64>,
    /// `|X_k| / Σ w_n`.
    pub magnitude: Vec<f64>,
    pub window: Window,
    pub mean_subtracted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    /// Quadratically interpolated position, a.u.
    pub omega: f64,
    pub magnitude: f64,
}

impl Spectrum {
    pub fn bin_width(&self) -> f64 {
        if self.omega.len() > 1 {
            self.omega[1] - self.omega[0]
        } else {
            0.0
        }
    }

    pub fn bin_of(&self, omega: f64) -> usize {
        let w = self.bin_width();
        if w == 0.0 {
            return 0;
        }
        ((omega / w).round() as usize).min(self.omega.len() - 1)
    }

    /// Parabolic refinement around bin `k`.
    pub fn interpolate(&self, k: usize) -> Peak {
        let m = &self.magnitude;
        if k == 0 || k + 1 >= m.len() {
            return Peak { bin: k, omega: self.omega[k], magnitude: m[k] };
        }
        let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
        let denom = a - 2.0 * b + c;
        let p = if denom != 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        Peak { bin: k, omega: self.omega[k] + p * self.bin_width(), magnitude: b - 0.25 * (a - c) * p }
    }

    /// Strict local maxima with `lo ≤ ω ≤ hi`, strongest first.
    pub fn local_maxima(&self, lo: f64, hi: f64) -> Vec<Peak> {
        let m = &self.magnitude;
        let mut peaks: Vec<Peak> = (1..m.len().saturating_sub(1))
            .filter(|&k| self.omega[k] >= lo && self.omega[k] <= hi)
            .filter(|&k| m[k] > m[k - 1] && m[k] > m[k + 1])
            .map(|k| self.interpolate(k))
            .collect();
        peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
        peaks
    }

    /// Largest non-DC bin, interpolated.
    pub fn dominant_peak(&self) -> Option<Peak> {
        let k = (1..self.magnitude.len()).max_by(|&a, &b| self.magnitude[a].total_cmp(&self.magnitude[b]))?;
        Some(self.interpolate(k))
    }

    /// Median magnitude over bins in `[lo, hi]`.
    pub fn median_in(&self, lo: f64, hi: f64) -> f64 {
        let mut v: Vec<f64> = self
            .omega
            .iter()
            .zip(&self.magnitude)
            .filter(|(w, _)| **w >= lo && **w <= hi)
            .map(|(_, m)| *m)
            .collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }
}

/// Spectrum of a uniformly sampled series `values(times)`; times in a.u.
pub fn spectrum_of_series(times: &[f64], values: &[f64], window: Window, subtract_mean: bool) -> Result<Spectrum> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    let n = times.len();
    if n < 2 {
        return Err(Error::InvalidParameter("spectrum needs at least two samples".into()));
    }
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::NonUniformSampling { index: 1 });
    }
    for k in 1..n {
        if ((times[k] - times[k - 1]) - step).abs() > 1e-6 * step {
            return Err(Error::NonUniformSampling { index: k });
        }
    }
    let mean = if subtract_mean { values.iter().sum::<f64>() / n as f64 } else { 0.0 };
    let weights: Vec<f64> = match window {
        Window::None => vec![1.0; n],
        Window::Hann => (0..n).map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (n - 1) as f64).cos()).collect(),
    };
    let norm: f64 = weights.iter().sum();
    let mut buf: Vec<C64> = values.iter().zip(&weights).map(|(v, w)| C64::new((v - mean) * w, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let omega = (0..=half).map(|k| 2.0 * PI * k as f64 / (n as f64 * step)).collect();
    let magnitude = buf[..=half].iter().map(|z| z.norm() / norm).collect();
    Ok(Spectrum { omega, magnitude, window, mean_subtracted: subtract_mean })
}

pub fn spectrum(scan: &ScanResult, channel: SignalChannel, window: Window, subtract_mean: bool) -> Result<Spectrum> {
    spectrum_of_series(&scan.delays(), &scan.series(channel), window, subtract_mean)
}

/// Relative modulation depth `(max − min) / mean` of a series.
pub fn modulation_depth(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean == 0.0 {
        0.0
    } else {
        (max - min) / mean.abs()
    }
}
