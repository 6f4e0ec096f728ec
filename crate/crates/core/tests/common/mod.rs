#![allow(dead_code)]

use cpcs_core::models::{
    make_coupled_emitters, make_exciton_biexciton, make_two_level, CoupledEmitterParams, ExcitonBiexcitonParams,
    CHANNEL_EMITTER_1, CHANNEL_LINEAR, CHANNEL_SIGMA_MINUS, CHANNEL_SIGMA_PLUS,
};
use cpcs_core::regression::{DetectionParams, TruncationPolicy};
use cpcs_core::scan::{CoincidenceMethod, DelayRange, ScanConfig};
use cpcs_core::{Frame, Pulse, QuantumSystem};

pub const OMEGA: f64 = 7.35e-2;
pub const MU: f64 = 3.93;
/// Faster decay than the physical one keeps the windows short.
pub const FAST_GAMMA: f64 = 1e-2;

pub fn detection(gamma_f: f64) -> DetectionParams {
    DetectionParams { eta_c: 0.2, eta_f: 0.2, nu_rep: 1e8, gamma_f }
}

pub fn pulse(amplitude: f64) -> Pulse {
    Pulse::new(amplitude, 500.0, 100.0, OMEGA).unwrap()
}

pub fn tls(gamma: f64) -> QuantumSystem {
    make_two_level(OMEGA, gamma, MU).unwrap()
}

pub fn exciton_biexciton(delta: f64, gamma: f64) -> QuantumSystem {
    make_exciton_biexciton(&ExcitonBiexcitonParams { omega_x: OMEGA, delta, gamma, mu: MU }).unwrap()
}

pub fn coupled(coupling: f64, gamma: f64) -> QuantumSystem {
    make_coupled_emitters(&CoupledEmitterParams { omega1: OMEGA, omega2: OMEGA, coupling, gamma, mu: MU }).unwrap()
}

/// Two-pulse scan on `system` with both pulses on `channels`.
pub fn scan_config(system: QuantumSystem, channels: (&str, &str), amplitude: f64, delays: DelayRange) -> ScanConfig {
    let gamma = system.jumps()[0].rate;
    ScanConfig {
        first_channel: system.channel(channels.0).unwrap(),
        second_channel: system.channel(channels.1).unwrap(),
        system,
        pulse: pulse(amplitude),
        detection: detection(gamma),
        delays,
        dt: 0.5,
        t_start: 0.0,
        pad: 12.0 / gamma,
        method: CoincidenceMethod::Adjoint { t1_stride: 1 },
        frame: Frame::Lab,
        truncation: TruncationPolicy::Strict,
        allow_aliasing: false,
    }
}

pub fn tls_scan(gamma: f64, amplitude: f64, delays: DelayRange) -> ScanConfig {
    scan_config(tls(gamma), (CHANNEL_LINEAR, CHANNEL_LINEAR), amplitude, delays)
}

pub fn xx_scan(delta: f64, gamma: f64, amplitude: f64, delays: DelayRange) -> ScanConfig {
    scan_config(exciton_biexciton(delta, gamma), (CHANNEL_SIGMA_PLUS, CHANNEL_SIGMA_MINUS), amplitude, delays)
}

pub fn coupled_scan(coupling: f64, gamma: f64, amplitude: f64, delays: DelayRange) -> ScanConfig {
    scan_config(coupled(coupling, gamma), (CHANNEL_EMITTER_1, CHANNEL_EMITTER_1), amplitude, delays)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
