use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Gaussian pulse with a cosine carrier referenced to the pulse center.
///
/// All quantities in atomic units. An infinite `duration` gives a
/// continuous-wave field `E₀ cos(ω₀ (t − T))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    pub amplitude: f64,
    pub center: f64,
    /// Intensity FWHM.
    pub duration: f64,
    pub carrier: f64,
}

impl Pulse {
    pub fn new(amplitude: f64, center: f64, duration: f64, carrier: f64) -> Result<Self> {
        let p = Self { amplitude, center, duration, carrier };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse amplitude {}", self.amplitude)));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter(format!("pulse duration {}", self.duration)));
        }
        if !(self.carrier > 0.0 && self.carrier.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse carrier {}", self.carrier)));
        }
        if !self.center.is_finite() {
            return Err(Error::InvalidParameter(format!("pulse center {}", self.center)));
        }
        Ok(())
    }

    /// Gaussian envelope `exp[−2 ln2 ((t − T)/t_p)²]`.
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.duration;
        (-2.0 * LN_2 * x * x).exp()
    }

    pub fn shifted(&self, delay: f64) -> Self {
        Self { center: self.center + delay, ..*self }
    }
}

/// Real field of `p` at time `t`.
pub fn pulse_field(p: &Pulse, t: f64) -> f64 {
    p.amplitude * p.envelope(t) * (p.carrier * (t - p.center)).cos()
}
