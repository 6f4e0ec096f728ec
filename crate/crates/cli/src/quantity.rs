//! Unit-tagged scalar values such as `"7.2e8 V_per_m"` or `"72fs"`.

use std::fmt;

use cpcs_core::UnitContext;

/// Physical dimension of a configuration value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Energy,
    Time,
    Field,
    Dipole,
    /// Emission rates, in inverse atomic time (or the equivalent energy).
    Rate,
    /// Repetition rates in cycles per second.
    Frequency,
}

impl Dimension {
    pub fn units(self) -> &'static [&'static str] {
        match self {
            Dimension::Energy | Dimension::Rate => &["au", "eV"],
            Dimension::Time => &["au", "fs"],
            Dimension::Field => &["au", "V_per_m"],
            Dimension::Dipole => &["au", "D"],
            Dimension::Frequency => &["Hz"],
        }
    }

    /// Unit used by the canonical form.
    pub fn canonical_unit(self) -> &'static str {
        self.units()[0]
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Energy => "energy",
            Dimension::Time => "time",
            Dimension::Field => "field",
            Dimension::Dipole => "dipole",
            Dimension::Rate => "rate",
            Dimension::Frequency => "frequency",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuantityError {
    #[error("`{0}` is not of the form `VALUE UNIT`")]
    Malformed(String),
    #[error("unit `{unit}` is not a {dim} unit (expected one of {expected})")]
    UnitMismatch { unit: String, dim: Dimension, expected: String },
    #[error("value `{0}` is not finite")]
    NonFinite(String),
}

/// Splits `"1.5e-3 au"` or `"72fs"` into number and unit.
pub fn split(text: &str) -> Result<(f64, &str), QuantityError> {
    let t = text.trim();
    let end = t
        .char_indices()
        .find(|&(i, c)| {
            // a unit starts at the first letter that is not an exponent marker
            c.is_ascii_alphabetic()
                && !((c == 'e' || c == 'E')
                    && t[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')
                    && i > 0)
        })
        .map(|(i, _)| i)
        .ok_or_else(|| QuantityError::Malformed(text.to_string()))?;
    let value: f64 = t[..end].trim().parse().map_err(|_| QuantityError::Malformed(text.to_string()))?;
    if !value.is_finite() {
        return Err(QuantityError::NonFinite(text.to_string()));
    }
    Ok((value, t[end..].trim()))
}

/// Parses `text` as a `dim` quantity and returns it in atomic units
/// (or s⁻¹ for frequencies).
pub fn parse(text: &str, dim: Dimension) -> Result<f64, QuantityError> {
    let (v, unit) = split(text)?;
    let u = UnitContext::default();
    let converted = match (dim, unit) {
        (Dimension::Frequency, "Hz") => v,
        (Dimension::Frequency, _) => return Err(mismatch(unit, dim)),
        (_, "au") => v,
        (Dimension::Energy | Dimension::Rate, "eV") => u.energy_ev_to_au(v),
        (Dimension::Time, "fs") => u.time_fs_to_au(v),
        (Dimension::Field, "V_per_m") => u.field_v_per_m_to_au(v),
        (Dimension::Dipole, "D") => u.dipole_debye_to_au(v),
        _ => return Err(mismatch(unit, dim)),
    };
    Ok(converted)
}

fn mismatch(unit: &str, dim: Dimension) -> QuantityError {
    QuantityError::UnitMismatch { unit: unit.to_string(), dim, expected: dim.units().join("|") }
}

/// Canonical text of a value already in atomic units (shortest round-trip form).
pub fn canonical(value: f64, dim: Dimension) -> String {
    format!("{value:e} {}", dim.canonical_unit())
}

/// Converts between any two units of the same dimension.
pub fn convert(text: &str, to: &str) -> Result<(f64, Dimension), QuantityError> {
    let (_, from) = split(text)?;
    let dims = [
        Dimension::Time,
        Dimension::Energy,
        Dimension::Field,
        Dimension::Dipole,
        Dimension::Frequency,
    ];
    let dim = dims
        .into_iter()
        .find(|d| d.units().contains(&from) && d.units().contains(&to) && from != "au")
        .or_else(|| dims.into_iter().find(|d| d.units().contains(&to) && to != "au" && from == "au"))
        .ok_or_else(|| QuantityError::UnitMismatch {
            unit: to.to_string(),
            dim: Dimension::Energy,
            expected: format!("a unit sharing a dimension with `{from}`"),
        })?;
    let au = parse(text, dim)?;
    let u = UnitContext::default();
    let out = match (dim, to) {
        (_, "au") | (Dimension::Frequency, _) => au,
        (Dimension::Energy, "eV") => u.energy_au_to_ev(au),
        (Dimension::Time, "fs") => u.time_au_to_fs(au),
        (Dimension::Field, "V_per_m") => u.field_au_to_v_per_m(au),
        (Dimension::Dipole, "D") => u.dipole_au_to_debye(au),
        _ => return Err(mismatch(to, dim)),
    };
    Ok((out, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_with_and_without_space() {
        assert_eq!(split("72fs").unwrap(), (72.0, "fs"));
        assert_eq!(split(" 1.4e-3 au ").unwrap(), (1.4e-3, "au"));
        assert_eq!(split("7.2E8 V_per_m").unwrap(), (7.2e8, "V_per_m"));
        assert_eq!(split("-2e+3eV").unwrap(), (-2e3, "eV"));
        assert!(split("au").is_err());
        assert!(split("12").is_err());
        assert!(split("inf au").is_err());
    }

    #[test]
    fn field_unit_equivalence() {
        let e = parse("7.2e8 V_per_m", Dimension::Field).unwrap();
        assert!((e / 1.4e-3 - 1.0).abs() < 0.01);
        let w = parse("2.0 eV", Dimension::Energy).unwrap();
        assert!((w / 7.35e-2 - 1.0).abs() < 0.005);
        let mu = parse("10 D", Dimension::Dipole).unwrap();
        assert!((mu / 3.93 - 1.0).abs() < 0.005);
        let t = parse("2.4 fs", Dimension::Time).unwrap();
        assert!((t / 100.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn rejects_wrong_units() {
        assert!(matches!(parse("3 fs", Dimension::Energy), Err(QuantityError::UnitMismatch { .. })));
        assert!(parse("1e8 au", Dimension::Frequency).is_err());
        assert!(parse("1 D", Dimension::Field).is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        for v in [1.4e-3, 0.1, 3.3e-3 * 2.0 / 7.0, 2975.7692] {
            let t = canonical(v, Dimension::Time);
            assert_eq!(parse(&t, Dimension::Time).unwrap(), v);
        }
    }

    #[test]
    fn converts_between_units() {
        let (v, d) = convert("72 fs", "au").unwrap();
        assert_eq!(d, Dimension::Time);
        assert!((v - 2976.5).abs() < 0.5);
        let (v, _) = convert("7.35e-2 au", "eV").unwrap();
        assert!((v - 2.0).abs() < 0.01);
        assert!(convert("1 fs", "eV").is_err());
    }
}
