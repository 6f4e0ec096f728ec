//! Constructors for the single emitter, the Zeeman-split exciton–biexciton
//! quantum dot and two coupled emitters.
//!
//! Basis orders (ascending excitation):
//! - two-level system: `|g⟩, |e⟩`
//! - exciton–biexciton: `|0⟩, |X⁺⟩, |X⁻⟩, |XX⟩`
//! - coupled emitters: `|g g⟩, |e g⟩, |g e⟩, |e e⟩` (emitter 1 listed first)
//!
//! All dipole matrix elements are real and positive.

use crate::error::{Error, Result};
use crate::operator::{projector, Operator};
use crate::system::{DriveCoupling, JumpChannel, QuantumSystem};

pub const CHANNEL_LINEAR: &str = "linear";
pub const CHANNEL_SIGMA_PLUS: &str = "sigma_plus";
pub const CHANNEL_SIGMA_MINUS: &str = "sigma_minus";
pub const CHANNEL_EMITTER_1: &str = "emitter1";

/// Basis indices of the exciton–biexciton model.
pub mod xx {
    pub const GROUND: usize = 0;
    pub const X_PLUS: usize = 1;
    pub const X_MINUS: usize = 2;
    pub const BIEXCITON: usize = 3;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitonBiexcitonParams {
    pub omega_x: f64,
    /// Zeeman splitting δ: `|X±⟩` sit at `ω_x ± δ`.
    pub delta: f64,
    pub gamma: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledEmitterParams {
    pub omega1: f64,
    pub omega2: f64,
    pub coupling: f64,
    pub gamma: f64,
    pub mu: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

fn symmetric_pair(dim: usize, pairs: &[(usize, usize)], mu: f64) -> Result<Operator> {
    let mut op = Operator::zeros(dim);
    for &(lo, hi) in pairs {
        op += &projector(lo, hi, dim)?.scale_real(mu);
        op += &projector(hi, lo, dim)?.scale_real(mu);
    }
    Ok(op)
}

pub fn make_two_level(omega: f64, gamma: f64, mu: f64) -> Result<QuantumSystem> {
    positive("omega", omega)?;
    positive("gamma", gamma)?;
    finite("mu", mu)?;
    let sigma = projector(0, 1, 2)?;
    QuantumSystem::new(
        Operator::diagonal(&[0.0, omega]),
        vec![JumpChannel { label: "e->g".into(), op: sigma, rate: gamma }],
        vec![DriveCoupling { name: CHANNEL_LINEAR.into(), op: symmetric_pair(2, &[(0, 1)], mu)? }],
        vec![0.0, 1.0],
    )
}

pub fn make_exciton_biexciton(p: &ExcitonBiexcitonParams) -> Result<QuantumSystem> {
    positive("omega_x", p.omega_x)?;
    positive("gamma", p.gamma)?;
    finite("mu", p.mu)?;
    finite("delta", p.delta)?;
    if p.delta.abs() >= p.omega_x {
        return Err(Error::InvalidParameter(format!(
            "Zeeman splitting {} must be smaller than the exciton energy {}",
            p.delta, p.omega_x
        )));
    }
    use xx::*;
    let h0 = Operator::diagonal(&[0.0, p.omega_x + p.delta, p.omega_x - p.delta, 2.0 * p.omega_x]);
    let jump = |lo: usize, hi: usize, label: &str| -> Result<JumpChannel> {
        Ok(JumpChannel { label: label.into(), op: projector(lo, hi, 4)?, rate: p.gamma })
    };
    let jumps = vec![
        jump(X_PLUS, BIEXCITON, "XX->X+")?,
        jump(X_MINUS, BIEXCITON, "XX->X-")?,
        jump(GROUND, X_PLUS, "X+->0")?,
        jump(GROUND, X_MINUS, "X-->0")?,
    ];
    let drives = vec![
        DriveCoupling {
            name: CHANNEL_SIGMA_PLUS.into(),
            op: symmetric_pair(4, &[(GROUND, X_PLUS), (X_MINUS, BIEXCITON)], p.mu)?,
        },
        DriveCoupling {
            name: CHANNEL_SIGMA_MINUS.into(),
            op: symmetric_pair(4, &[(GROUND, X_MINUS), (X_PLUS, BIEXCITON)], p.mu)?,
        },
    ];
    QuantumSystem::new(h0, jumps, drives, vec![0.0, 1.0, 1.0, 2.0])
}

/// Lowering operators `(σ₁, σ₂)` on the two-emitter product space.
pub fn coupled_lowering_ops() -> (Operator, Operator) {
    // |gg⟩=0, |eg⟩=1, |ge⟩=2, |ee⟩=3
    let s1 = &projector(0, 1, 4).expect("in range") + &projector(2, 3, 4).expect("in range");
    let s2 = &projector(0, 2, 4).expect("in range") + &projector(1, 3, 4).expect("in range");
    (s1, s2)
}

pub fn make_coupled_emitters(p: &CoupledEmitterParams) -> Result<QuantumSystem> {
    positive("omega1", p.omega1)?;
    positive("omega2", p.omega2)?;
    positive("gamma", p.gamma)?;
    finite("coupling", p.coupling)?;
    finite("mu", p.mu)?;
    let (s1, s2) = coupled_lowering_ops();
    let n1 = s1.dagger().matmul(&s1);
    let n2 = s2.dagger().matmul(&s2);
    let hop = &s1.dagger().matmul(&s2) + &s1.matmul(&s2.dagger());
    let h0 = &(&n1.scale_real(p.omega1) + &n2.scale_real(p.omega2)) + &hop.scale_real(p.coupling);
    let drive = (&s1 + &s1.dagger()).scale_real(p.mu);
    QuantumSystem::new(
        h0,
        vec![
            JumpChannel { label: "sigma1".into(), op: s1, rate: p.gamma },
            JumpChannel { label: "sigma2".into(), op: s2, rate: p.gamma },
        ],
        vec![DriveCoupling { name: CHANNEL_EMITTER_1.into(), op: drive }],
        vec![0.0, 1.0, 1.0, 2.0],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::C64;

    const W: f64 = 7.35e-2;
    const G: f64 = 3.3e-3;
    const MU: f64 = 3.93;

    fn xx_params(delta: f64) -> ExcitonBiexcitonParams {
        ExcitonBiexcitonParams { omega_x: W, delta, gamma: G, mu: MU }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn two_level_structure() {
        let s = make_two_level(W, G, MU).unwrap();
        assert!(close(&s.h0().eigenvalues_hermitian(), &[0.0, W], 1e-15));
        assert_eq!(s.jumps().len(), 1);
        assert_eq!(s.emission_number(), projector(1, 1, 2).unwrap());
        assert!(make_two_level(-1.0, G, MU).is_err());
        assert!(make_two_level(W, 0.0, MU).is_err());
    }

    #[test]
    fn exciton_biexciton_spectrum() {
        let s = make_exciton_biexciton(&xx_params(1e-3)).unwrap();
        assert!(close(&s.h0().eigenvalues_hermitian(), &[0.0, 0.0725, 0.0745, 0.147], 1e-12));
        let s0 = make_exciton_biexciton(&xx_params(0.0)).unwrap();
        assert_eq!(s0.h0()[(1, 1)], s0.h0()[(2, 2)]);
        for d in [-5e-3, 0.0, 2e-3] {
            let s = make_exciton_biexciton(&xx_params(d)).unwrap();
            assert_eq!(s.h0()[(3, 3)].re, 2.0 * W);
        }
        assert!(make_exciton_biexciton(&xx_params(0.08)).is_err());
    }

    #[test]
    fn exciton_biexciton_channels() {
        let s = make_exciton_biexciton(&xx_params(0.0)).unwrap();
        assert_eq!(s.jumps().len(), 4);
        assert!(s.jumps().iter().all(|j| j.rate == G));
        // a|XX⟩ = |X+⟩ + |X-⟩
        let a = s.emission();
        assert_eq!(a[(1, 3)], C64::new(1.0, 0.0));
        assert_eq!(a[(2, 3)], C64::new(1.0, 0.0));
        assert_eq!(s.channel_names(), vec![CHANNEL_SIGMA_PLUS, CHANNEL_SIGMA_MINUS]);
        // a†a couples |X+⟩ and |X-⟩; the photon number does not
        assert_eq!(s.emission_number()[(1, 2)], C64::new(1.0, 0.0));
        assert_eq!(s.photon_number(), Operator::diagonal(&[0.0, 1.0, 1.0, 2.0]));
        let masked = s.with_detection_mask(&[true, false, false, false]).unwrap();
        assert_eq!(masked.photon_number(), projector(3, 3, 4).unwrap());
    }

    #[test]
    fn excitation_number_is_conserved_by_h0_and_changed_by_one_by_drives() {
        for d in [0.0, 1e-3] {
            let s = make_exciton_biexciton(&xx_params(d)).unwrap();
            let n = Operator::diagonal(s.excitation());
            assert_eq!(s.h0().commutator(&n).max_abs(), 0.0);
            for drive in s.drives() {
                for (r, c, _) in drive.op.nonzeros() {
                    assert_eq!((s.excitation()[r] - s.excitation()[c]).abs(), 1.0);
                }
            }
        }
        let s = make_coupled_emitters(&CoupledEmitterParams {
            omega1: W,
            omega2: 0.07,
            coupling: 2e-3,
            gamma: G,
            mu: MU,
        })
        .unwrap();
        let n = Operator::diagonal(s.excitation());
        assert!(s.h0().commutator(&n).max_abs() < 1e-18);
    }

    #[test]
    fn coupled_emitter_spectrum() {
        let g = 2e-3;
        let s = make_coupled_emitters(&CoupledEmitterParams {
            omega1: W,
            omega2: W,
            coupling: g,
            gamma: G,
            mu: MU,
        })
        .unwrap();
        let ev = s.h0().eigenvalues_hermitian();
        assert!(close(&ev, &[0.0, W - g, W + g, 2.0 * W], 1e-14), "{ev:?}");
        assert_eq!(s.jumps().len(), 2);
        assert_eq!(s.drives().len(), 1);
        let (s1, s2) = coupled_lowering_ops();
        assert_eq!(s.emission(), &(&s1 + &s2));
    }
}
