//! Conversions between Hartree atomic units and laboratory units.
//!
//! Everything inside the crate is in atomic units (ħ = e = mₑ = a₀ = 1).
//! Conversion happens only when reading configuration or writing output.

use std::f64::consts::PI;

/// CODATA 2018 constants relating atomic units to SI and common lab units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitContext {
    /// Hartree energy in eV.
    pub hartree_ev: f64,
    /// Atomic unit of time in seconds.
    pub au_time_s: f64,
    /// Atomic unit of electric field in V/m.
    pub au_field_v_per_m: f64,
    /// Atomic unit of electric dipole moment (e·a₀) in C·m.
    pub au_dipole_cm: f64,
    /// One Debye in C·m.
    pub debye_cm: f64,
}

impl Default for UnitContext {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

impl UnitContext {
    pub const CODATA_2018: Self = Self {
        hartree_ev: 27.211_386_245_988,
        au_time_s: 2.418_884_326_585_7e-17,
        au_field_v_per_m: 5.142_206_747_63e11,
        au_dipole_cm: 8.478_353_625_5e-30,
        debye_cm: 3.335_640_951_981_52e-30,
    };

    pub fn au_time_fs(&self) -> f64 {
        self.au_time_s * 1e15
    }

    pub fn energy_au_to_ev(&self, e: f64) -> f64 {
        e * self.hartree_ev
    }

    pub fn energy_ev_to_au(&self, e: f64) -> f64 {
        e / self.hartree_ev
    }

    pub fn time_au_to_fs(&self, t: f64) -> f64 {
        t * self.au_time_fs()
    }

    pub fn time_fs_to_au(&self, t: f64) -> f64 {
        t / self.au_time_fs()
    }

    pub fn field_au_to_v_per_m(&self, e: f64) -> f64 {
        e * self.au_field_v_per_m
    }

    pub fn field_v_per_m_to_au(&self, e: f64) -> f64 {
        e / self.au_field_v_per_m
    }

    pub fn dipole_au_to_debye(&self, d: f64) -> f64 {
        d * self.au_dipole_cm / self.debye_cm
    }

    pub fn dipole_debye_to_au(&self, d: f64) -> f64 {
        d * self.debye_cm / self.au_dipole_cm
    }

    /// Angular rate (a.u.⁻¹) to events per second.
    pub fn rate_au_to_per_s(&self, r: f64) -> f64 {
        r / self.au_time_s
    }

    pub fn rate_per_s_to_au(&self, r: f64) -> f64 {
        r * self.au_time_s
    }

    /// Angular frequency (a.u.) to cyclic frequency in Hz, ν = ω / 2π.
    pub fn angular_au_to_hz(&self, w: f64) -> f64 {
        w / (2.0 * PI * self.au_time_s)
    }

    pub fn hz_to_angular_au(&self, nu: f64) -> f64 {
        nu * 2.0 * PI * self.au_time_s
    }
}
