//! Run configuration: strict JSON schema, unit normalization and the
//! canonical form whose hash tags every output file.
//!
//! Every physical value is a string `"VALUE UNIT"`. After loading, the
//! configuration is rewritten in canonical form: all defaults filled in,
//! every quantity in atomic units (repetition rate in Hz). Serializing the
//! canonical form and loading it again gives the same canonical form.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cpcs_core::models::{
    make_coupled_emitters, make_exciton_biexciton, make_two_level, CoupledEmitterParams, ExcitonBiexcitonParams,
};
use cpcs_core::output::DEFAULT_SIGNIFICANT_DIGITS;
use cpcs_core::regression::{DetectionParams, TruncationPolicy};
use cpcs_core::scan::{CoincidenceMethod, DelayRange, ScanConfig, DEFAULT_MAX_LAUNCHES, DEFAULT_PAD_LIFETIMES};
use cpcs_core::{Frame, Pulse, QuantumSystem, DEFAULT_DT};

use crate::quantity::{self, Dimension, QuantityError};

/// Presets shipped with the binary, looked up by file name.
pub const PRESETS: [(&str, &str); 3] = [
    ("fig1c.json", include_str!("../presets/fig1c.json")),
    ("fig2.json", include_str!("../presets/fig2.json")),
    ("fig3.json", include_str!("../presets/fig3.json")),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("`{path}`: {source}")]
    Quantity { path: String, source: QuantityError },
    #[error("`{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Model(#[from] cpcs_core::Error),
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: RawModel,
    pub pulses: RawPulses,
    pub detection: RawDetection,
    #[serde(default)]
    pub numerics: RawNumerics,
    #[serde(default)]
    pub output: RawOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RawModel {
    Tls(RawTls),
    ExcitonBiexciton(RawExcitonBiexciton),
    CoupledEmitters(RawCoupledEmitters),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTls {
    pub omega: String,
    pub gamma: String,
    pub mu: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExcitonBiexciton {
    pub omega_x: String,
    pub delta: String,
    pub gamma: String,
    pub mu: String,
    /// Detected jump channels in the order XX→X⁺, XX→X⁻, X⁺→0, X⁻→0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCoupledEmitters {
    pub omega1: String,
    pub omega2: String,
    pub coupling: String,
    pub gamma: String,
    pub mu: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPulses {
    pub amplitude: String,
    pub duration: String,
    pub carrier: String,
    /// Center of the first pulse.
    pub center: String,
    pub count: usize,
    /// Drive channel of each pulse, in order.
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDetection {
    pub eta_c: f64,
    pub eta_f: f64,
    pub nu_rep: String,
    /// Defaults to the model's emission rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_f: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDelays {
    pub min: String,
    pub max: String,
    pub step: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNumerics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<String>,
    /// Window length after the last pulse center; defaults to 12 lifetimes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<String>,
    /// `adjoint` or `grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Launch stride of the explicit correlation grid; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<RawDelays>,
    /// Delay used by `g2map` when `--delay` is not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_delay: Option<String>,
    /// `lab` or `rotating`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<String>,
    /// `strict`, `warn` or `ignore`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_aliasing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Any of `csv`, `json` (run summary).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Tls { omega: f64, gamma: f64, mu: f64 },
    ExcitonBiexciton(ExcitonBiexcitonParams),
    CoupledEmitters(CoupledEmitterParams),
}

impl ModelParams {
    pub fn gamma(&self) -> f64 {
        match self {
            ModelParams::Tls { gamma, .. } => *gamma,
            ModelParams::ExcitonBiexciton(p) => p.gamma,
            ModelParams::CoupledEmitters(p) => p.gamma,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelParams::Tls { .. } => "tls",
            ModelParams::ExcitonBiexciton(_) => "exciton_biexciton",
            ModelParams::CoupledEmitters(_) => "coupled_emitters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: String,
    pub csv: bool,
    pub summary: bool,
    pub precision: usize,
}

/// Fully validated configuration in atomic units.
#[derive(Debug, Clone)]
pub struct RunConfig {
    canonical: RawConfig,
    pub model: ModelParams,
    pub scan: ScanConfig,
    pub map_delay: f64,
    pub t1_stride: Option<usize>,
    pub output: OutputConfig,
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_json())
    }
}

fn q(path: &str, text: &str, dim: Dimension) -> Result<f64, ConfigError> {
    quantity::parse(text, dim).map_err(|source| ConfigError::Quantity { path: path.to_string(), source })
}

fn canon(path: &str, text: &mut String, dim: Dimension) -> Result<f64, ConfigError> {
    let v = q(path, text, dim)?;
    *text = quantity::canonical(v, dim);
    Ok(v)
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(path, format!("must be positive, got {v}")))
    }
}

/// Parses JSON text against the strict schema, reporting the path of the offending key.
pub fn parse_raw(text: &str) -> Result<RawConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema { path, message: e.into_inner().to_string() }
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_raw(parse_raw(text)?)
}

/// Reads a configuration file; a bare preset name such as `fig2.json` falls
/// back to the bundled copy when no such file exists.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            match PRESETS.iter().find(|(n, _)| *n == name && path.parent().map_or(true, |p| p.as_os_str().is_empty())) {
                Some((_, text)) => text.to_string(),
                None => return Err(ConfigError::Io { path: path.display().to_string(), source: e }),
            }
        }
    };
    parse_config(&text)
}

impl RunConfig {
    pub fn from_raw(mut raw: RawConfig) -> Result<Self, ConfigError> {
        let (model, system) = Self::build_model(&mut raw.model)?;
        let gamma = model.gamma();

        let p = &mut raw.pulses;
        let amplitude = canon("pulses.amplitude", &mut p.amplitude, Dimension::Field)?;
        if amplitude < 0.0 {
            return Err(invalid("pulses.amplitude", "must be non-negative"));
        }
        let duration = positive("pulses.duration", canon("pulses.duration", &mut p.duration, Dimension::Time)?)?;
        let carrier = positive("pulses.carrier", canon("pulses.carrier", &mut p.carrier, Dimension::Energy)?)?;
        let center = canon("pulses.center", &mut p.center, Dimension::Time)?;
        if p.count != 2 {
            return Err(invalid("pulses.count", "only two-pulse sequences are supported"));
        }
        if p.channels.len() != p.count {
            return Err(invalid("pulses.channels", format!("expected {} channel names", p.count)));
        }
        let first_channel = system.channel(&p.channels[0]).map_err(|e| invalid("pulses.channels[0]", e.to_string()))?;
        let second_channel = system.channel(&p.channels[1]).map_err(|e| invalid("pulses.channels[1]", e.to_string()))?;
        let pulse = Pulse::new(amplitude, center, duration, carrier)
            .map_err(|e| invalid("pulses", e.to_string()))?;

        let d = &mut raw.detection;
        let nu_rep = positive("detection.nu_rep", canon("detection.nu_rep", &mut d.nu_rep, Dimension::Frequency)?)?;
        let gamma_f = match d.gamma_f.as_mut() {
            Some(text) => canon("detection.gamma_f", text, Dimension::Rate)?,
            None => {
                d.gamma_f = Some(quantity::canonical(gamma, Dimension::Rate));
                gamma
            }
        };
        let detection = DetectionParams { eta_c: d.eta_c, eta_f: d.eta_f, nu_rep, gamma_f };
        detection.validate().map_err(|e| invalid("detection", e.to_string()))?;

        let n = &mut raw.numerics;
        let dt = positive("numerics.dt", Self::with_default(&mut n.dt, "numerics.dt", DEFAULT_DT, Dimension::Time)?)?;
        let pad = positive(
            "numerics.pad",
            Self::with_default(&mut n.pad, "numerics.pad", DEFAULT_PAD_LIFETIMES / gamma, Dimension::Time)?,
        )?;
        let t_start = Self::with_default(&mut n.t_start, "numerics.t_start", 0.0, Dimension::Time)?;
        let t1_stride = n.t1_stride;
        if t1_stride == Some(0) {
            return Err(invalid("numerics.t1_stride", "must be at least 1"));
        }
        let method_name = n.method.get_or_insert_with(|| "adjoint".into()).clone();
        let method = match method_name.as_str() {
            "adjoint" => CoincidenceMethod::Adjoint { t1_stride: 1 },
            "grid" => CoincidenceMethod::Grid { t1_stride, max_launches: DEFAULT_MAX_LAUNCHES },
            other => return Err(invalid("numerics.method", format!("unknown method `{other}` (adjoint|grid)"))),
        };
        let delays_raw = n.delays.get_or_insert_with(|| RawDelays {
            min: "0 fs".into(),
            max: "220 fs".into(),
            step: "0.25 fs".into(),
        });
        let delays = DelayRange {
            min: canon("numerics.delays.min", &mut delays_raw.min, Dimension::Time)?,
            max: canon("numerics.delays.max", &mut delays_raw.max, Dimension::Time)?,
            step: canon("numerics.delays.step", &mut delays_raw.step, Dimension::Time)?,
        };
        let map_delay = Self::with_default(&mut n.map_delay, "numerics.map_delay", delays.min, Dimension::Time)?;
        let frame = match n.frame.get_or_insert_with(|| "lab".into()).as_str() {
            "lab" => Frame::Lab,
            "rotating" => {
                log::warn!("rotating-frame propagation is not validated against the lab-frame reference");
                Frame::Rotating { omega: carrier }
            }
            other => return Err(invalid("numerics.frame", format!("unknown frame `{other}` (lab|rotating)"))),
        };
        let truncation = match n.truncation.get_or_insert_with(|| "strict".into()).as_str() {
            "strict" => TruncationPolicy::Strict,
            "warn" => TruncationPolicy::Warn,
            "ignore" => TruncationPolicy::Ignore,
            other => {
                return Err(invalid("numerics.truncation", format!("unknown policy `{other}` (strict|warn|ignore)")))
            }
        };
        let allow_aliasing = *n.allow_aliasing.get_or_insert(false);

        let o = &mut raw.output;
        let directory = o.directory.get_or_insert_with(|| "out".into()).clone();
        let formats = o.formats.get_or_insert_with(|| vec!["csv".into(), "json".into()]).clone();
        for f in &formats {
            if f != "csv" && f != "json" {
                return Err(invalid("output.formats", format!("unknown format `{f}` (csv|json)")));
            }
        }
        let precision = *o.precision.get_or_insert(DEFAULT_SIGNIFICANT_DIGITS);
        if !(1..=17).contains(&precision) {
            return Err(invalid("output.precision", "must lie in 1..=17"));
        }

        let scan = ScanConfig {
            system,
            pulse,
            first_channel,
            second_channel,
            detection,
            delays,
            dt,
            t_start,
            pad,
            method,
            frame,
            truncation,
            allow_aliasing,
        };
        scan.validate().map_err(|e| invalid("numerics", e.to_string()))?;
        Ok(Self {
            canonical: raw,
            model,
            scan,
            map_delay,
            t1_stride,
            output: OutputConfig {
                directory,
                csv: formats.iter().any(|f| f == "csv"),
                summary: formats.iter().any(|f| f == "json"),
                precision,
            },
        })
    }

    fn with_default(slot: &mut Option<String>, path: &str, default: f64, dim: Dimension) -> Result<f64, ConfigError> {
        match slot.as_mut() {
            Some(text) => canon(path, text, dim),
            None => {
                *slot = Some(quantity::canonical(default, dim));
                Ok(default)
            }
        }
    }

    fn build_model(raw: &mut RawModel) -> Result<(ModelParams, QuantumSystem), ConfigError> {
        Ok(match raw {
            RawModel::Tls(m) => {
                let omega = canon("model.omega", &mut m.omega, Dimension::Energy)?;
                let gamma = canon("model.gamma", &mut m.gamma, Dimension::Rate)?;
                let mu = canon("model.mu", &mut m.mu, Dimension::Dipole)?;
                (ModelParams::Tls { omega, gamma, mu }, make_two_level(omega, gamma, mu)?)
            }
            RawModel::ExcitonBiexciton(m) => {
                let p = ExcitonBiexcitonParams {
                    omega_x: canon("model.omega_x", &mut m.omega_x, Dimension::Energy)?,
                    delta: canon("model.delta", &mut m.delta, Dimension::Energy)?,
                    gamma: canon("model.gamma", &mut m.gamma, Dimension::Rate)?,
                    mu: canon("model.mu", &mut m.mu, Dimension::Dipole)?,
                };
                let mut sys = make_exciton_biexciton(&p)?;
                if let Some(mask) = &m.detection_mask {
                    sys = sys.with_detection_mask(mask).map_err(|e| invalid("model.detection_mask", e.to_string()))?;
                }
                (ModelParams::ExcitonBiexciton(p), sys)
            }
            RawModel::CoupledEmitters(m) => {
                let p = CoupledEmitterParams {
                    omega1: canon("model.omega1", &mut m.omega1, Dimension::Energy)?,
                    omega2: canon("model.omega2", &mut m.omega2, Dimension::Energy)?,
                    coupling: canon("model.coupling", &mut m.coupling, Dimension::Energy)?,
                    gamma: canon("model.gamma", &mut m.gamma, Dimension::Rate)?,
                    mu: canon("model.mu", &mut m.mu, Dimension::Dipole)?,
                };
                (ModelParams::CoupledEmitters(p), make_coupled_emitters(&p)?)
            }
        })
    }

    pub fn canonical(&self) -> &RawConfig {
        &self.canonical
    }

    /// Canonical JSON (compact, fixed key order).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.canonical).expect("configuration serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Returns a copy with the canonical form edited by `f` and revalidated.
    pub fn modified(&self, f: impl FnOnce(&mut RawConfig)) -> Result<Self, ConfigError> {
        let mut raw = self.canonical.clone();
        f(&mut raw);
        Self::from_raw(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset(name: &str) -> RunConfig {
        let text = PRESETS.iter().find(|(n, _)| *n == name).unwrap().1;
        parse_config(text).unwrap()
    }

    #[test]
    fn fig2_preset_values() {
        let c = preset("fig2.json");
        let ModelParams::ExcitonBiexciton(p) = c.model else { panic!("wrong model") };
        assert_eq!(p.omega_x, 7.35e-2);
        assert_eq!(p.gamma, 3.3e-3);
        assert_eq!(p.mu, 3.93);
        assert_eq!(c.scan.pulse.amplitude, 1.4e-3);
        assert_eq!(c.scan.pulse.duration, 100.0);
        assert_eq!(c.scan.detection.eta_c, 0.2);
        assert_eq!(c.scan.detection.eta_f, 0.2);
        assert_eq!(c.scan.detection.nu_rep, 1e8);
    }

    #[test]
    fn fig3_preset_uses_weak_field() {
        let c = preset("fig3.json");
        assert_eq!(c.scan.pulse.amplitude, 2e-5);
        assert!(matches!(c.model, ModelParams::CoupledEmitters(_)));
    }

    #[test]
    fn field_in_volts_per_metre_normalizes() {
        let text = PRESETS[1].1.replace("\"1.4e-3 au\"", "\"7.2e8 V_per_m\"");
        let c = parse_config(&text).unwrap();
        assert!((c.scan.pulse.amplitude / 1.4e-3 - 1.0).abs() < 0.01);
    }

    #[test]
    fn canonical_round_trip_is_idempotent() {
        for (name, _) in PRESETS {
            let c = preset(name);
            let again = parse_config(&c.canonical_json()).unwrap();
            assert_eq!(again.canonical(), c.canonical(), "{name}");
            assert_eq!(again.hash(), c.hash());
        }
    }

    #[test]
    fn hashes_differ_between_configs() {
        let hashes: Vec<String> = PRESETS.iter().map(|(n, _)| preset(n).hash()).collect();
        assert_ne!(hashes[0], hashes[1]);
        assert_ne!(hashes[1], hashes[2]);
        let c = preset("fig2.json");
        let d = c
            .modified(|r| {
                if let RawModel::ExcitonBiexciton(m) = &mut r.model {
                    m.delta = "0 au".into();
                }
            })
            .unwrap();
        assert_ne!(c.hash(), d.hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let text = PRESETS[1].1.replace("\"eta_c\"", "\"eta_x\": 0.1, \"eta_c\"");
        match parse_config(&text) {
            Err(ConfigError::Schema { path, .. }) => assert_eq!(path, "detection.eta_x"),
            other => panic!("unexpected {other:?}"),
        }
        let text = PRESETS[1].1.replace("\"omega_x\"", "\"omega_y\": \"1 au\", \"omega_x\"");
        assert!(matches!(parse_config(&text), Err(ConfigError::Schema { .. })));
    }

    #[test]
    fn missing_block_and_bad_units_are_reported() {
        let v: serde_json::Value = serde_json::from_str(PRESETS[1].1).unwrap();
        let mut obj = v.as_object().unwrap().clone();
        obj.remove("detection");
        let err = parse_config(&serde_json::to_string(&obj).unwrap()).unwrap_err();
        assert!(err.to_string().contains("detection"), "{err}");

        let text = PRESETS[1].1.replace("\"100 au\"", "\"100 eV\"");
        match parse_config(&text) {
            Err(ConfigError::Quantity { path, .. }) => assert_eq!(path, "pulses.duration"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn physical_constraints_are_enforced() {
        let text = PRESETS[1].1.replace("\"eta_c\": 0.2", "\"eta_c\": 1.5");
        assert!(parse_config(&text).is_err());
        let text = PRESETS[1].1.replace("\"3.3e-3 au\"", "\"-3.3e-3 au\"");
        assert!(parse_config(&text).is_err());
        let text = PRESETS[1].1.replace("\"sigma_minus\"", "\"sigma_z\"");
        assert!(parse_config(&text).is_err());
    }
}
