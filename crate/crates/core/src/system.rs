//! Few-level open quantum systems and the pulses that drive them.

use crate::error::{Error, Result};
use crate::operator::{Operator, C64};
use crate::pulse::Pulse;

const HERMITIAN_TOL: f64 = 1e-12;

/// Spontaneous-emission channel `γ D[J]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub label: String,
    pub op: Operator,
    pub rate: f64,
}

/// Hermitian dipole coupling addressed by pulses assigned to this channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveCoupling {
    pub name: String,
    pub op: Operator,
}

impl DriveCoupling {
    /// The part of the coupling that raises the excitation (entries below the diagonal).
    pub fn raising(&self) -> Operator {
        Operator::from_fn(self.op.dim(), |r, c| if r > c { self.op[(r, c)] } else { C64::new(0.0, 0.0) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId(pub usize);

/// Bare Hamiltonian, dissipation, drive couplings and detected emission operator.
///
/// Basis states are ordered by ascending excitation number, so every jump
/// operator is strictly upper triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSystem {
    h0: Operator,
    jumps: Vec<JumpChannel>,
    drives: Vec<DriveCoupling>,
    emission: Operator,
    detected: Vec<bool>,
    excitation: Vec<f64>,
}

impl QuantumSystem {
    /// Builds a system whose emission operator is the sum of all jump operators.
    pub fn new(
        h0: Operator,
        jumps: Vec<JumpChannel>,
        drives: Vec<DriveCoupling>,
        excitation: Vec<f64>,
    ) -> Result<Self> {
        let dim = h0.dim();
        let mut emission = Operator::zeros(dim);
        for j in &jumps {
            if j.op.dim() == dim {
                emission += &j.op;
            }
        }
        let detected = vec![true; jumps.len()];
        let sys = Self { h0, jumps, drives, emission, detected, excitation };
        sys.validate()?;
        Ok(sys)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !self.h0.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::InvalidParameter("bare Hamiltonian is not Hermitian".into()));
        }
        if self.excitation.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.excitation.len() });
        }
        for j in &self.jumps {
            if j.op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: j.op.dim() });
            }
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(Error::InvalidParameter(format!("jump rate {} for {}", j.rate, j.label)));
            }
            let nz = j.op.nonzeros();
            if nz.is_empty() || nz.iter().any(|&(r, c, _)| r >= c) {
                return Err(Error::InvalidParameter(format!(
                    "jump operator {} must be a non-zero lowering operator",
                    j.label
                )));
            }
        }
        for d in &self.drives {
            if d.op.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: d.op.dim() });
            }
            if !d.op.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::InvalidParameter(format!("drive coupling {} is not Hermitian", d.name)));
            }
        }
        if self.emission.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.emission.dim() });
        }
        Ok(())
    }

    /// Restricts detection to the jump channels flagged in `mask`.
    pub fn with_detection_mask(mut self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.jumps.len() {
            return Err(Error::DimensionMismatch { expected: self.jumps.len(), found: mask.len() });
        }
        let mut emission = Operator::zeros(self.dim());
        for (j, &on) in self.jumps.iter().zip(mask) {
            if on {
                emission += &j.op;
            }
        }
        self.emission = emission;
        self.detected = mask.to_vec();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn h0(&self) -> &Operator {
        &self.h0
    }

    pub fn jumps(&self) -> &[JumpChannel] {
        &self.jumps
    }

    pub fn drives(&self) -> &[DriveCoupling] {
        &self.drives
    }

    /// Emission operator `a`.
    pub fn emission(&self) -> &Operator {
        &self.emission
    }

    /// `a†a`.
    pub fn emission_number(&self) -> Operator {
        self.emission.dagger().matmul(&self.emission)
    }

    /// Photon number `Σᵢ Jᵢ†Jᵢ` over the detected channels.
    ///
    /// Unlike `a†a` it carries no cross terms between channels, so photons
    /// emitted on different transitions add as counts rather than amplitudes.
    pub fn photon_number(&self) -> Operator {
        let mut n = Operator::zeros(self.dim());
        for (j, _) in self.jumps.iter().zip(&self.detected).filter(|(_, &on)| on) {
            n += &j.op.dagger().matmul(&j.op);
        }
        n
    }

    /// Excitation number of each basis state.
    pub fn excitation(&self) -> &[f64] {
        &self.excitation
    }

    pub fn channel(&self, name: &str) -> Result<ChannelId> {
        self.drives
            .iter()
            .position(|d| d.name == name)
            .map(ChannelId)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.drives.iter().map(|d| d.name.as_str()).collect()
    }
}

/// Pulses paired with the drive channel each one addresses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriveProgram {
    pub assignments: Vec<(Pulse, ChannelId)>,
}

impl DriveProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, pulse: Pulse, channel: ChannelId) -> Self {
        self.assignments.push((pulse, channel));
        self
    }

    pub fn validate(&self, system: &QuantumSystem) -> Result<()> {
        for (pulse, ch) in &self.assignments {
            pulse.validate()?;
            if ch.0 >= system.drives().len() {
                return Err(Error::UnknownChannel(format!("#{}", ch.0)));
            }
        }
        Ok(())
    }

    /// Center of the latest pulse, if any.
    pub fn last_center(&self) -> Option<f64> {
        self.assignments.iter().map(|(p, _)| p.center).reduce(f64::max)
    }

    pub fn first_center(&self) -> Option<f64> {
        self.assignments.iter().map(|(p, _)| p.center).reduce(f64::min)
    }
}

/// Frame in which the equations of motion are written.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Frame {
    /// Literal lab-frame equations with the explicit cosine carrier.
    #[default]
    Lab,
    /// Rotating frame at `omega` with the rotating-wave approximation.
    /// Not validated against the lab-frame reference results.
    Rotating { omega: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::projector;

    fn tls() -> QuantumSystem {
        let s = projector(0, 1, 2).unwrap();
        QuantumSystem::new(
            Operator::diagonal(&[0.0, 1.0]),
            vec![JumpChannel { label: "e->g".into(), op: s.clone(), rate: 0.1 }],
            vec![DriveCoupling { name: "x".into(), op: &s + &s.dagger() }],
            vec![0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn rejects_raising_jump() {
        let r = QuantumSystem::new(
            Operator::diagonal(&[0.0, 1.0]),
            vec![JumpChannel { label: "up".into(), op: projector(1, 0, 2).unwrap(), rate: 0.1 }],
            vec![],
            vec![0.0, 1.0],
        );
        assert!(r.is_err());
    }

    #[test]
    fn rejects_negative_rate_and_non_hermitian_drive() {
        let s = projector(0, 1, 2).unwrap();
        assert!(QuantumSystem::new(
            Operator::diagonal(&[0.0, 1.0]),
            vec![JumpChannel { label: "j".into(), op: s.clone(), rate: -1.0 }],
            vec![],
            vec![0.0, 1.0],
        )
        .is_err());
        assert!(QuantumSystem::new(
            Operator::diagonal(&[0.0, 1.0]),
            vec![],
            vec![DriveCoupling { name: "x".into(), op: s }],
            vec![0.0, 1.0],
        )
        .is_err());
    }

    #[test]
    fn channel_lookup() {
        let sys = tls();
        assert_eq!(sys.channel("x").unwrap(), ChannelId(0));
        assert_eq!(sys.channel("y"), Err(Error::UnknownChannel("y".into())));
        let p = Pulse::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(DriveProgram::new().with(p, ChannelId(1)).validate(&sys).is_err());
        assert!(DriveProgram::new().with(p, ChannelId(0)).validate(&sys).is_ok());
    }

    #[test]
    fn detection_mask() {
        let sys = tls().with_detection_mask(&[false]).unwrap();
        assert_eq!(sys.emission().max_abs(), 0.0);
        assert!(tls().with_detection_mask(&[true, false]).is_err());
    }
}
