//! Scenario parameterization and validation.
//!
//! A [`NetworkConfig`] is built from a [`RawConfig`] (the JSON file schema),
//! checked once, and then treated as immutable. Gains and the SIR threshold
//! are stored linear; the file may give them in dB through `_db` keys.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("missing required field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` must be {expected}, got {value}")]
    NonPositiveValue {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("UE offset {offset} m does not lie inside the disk of radius {radius} m")]
    OffsetOutOfDisk { offset: f64, radius: f64 },
    #[error("both `{0}` and `{0}_db` given")]
    Conflict(&'static str),
    #[error("`precoder_mags` has {got} entries but n_antennas = {expected}")]
    PrecoderLength { got: usize, expected: usize },
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error("invalid value for `{field}`: {message}")]
    InvalidValue { field: String, message: String },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Whether the RIS sits above the blockages (AP–RIS links always LoS) or at
/// or below them (AP–RIS links are thinned by blockages too).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RisPlacement {
    HighRis,
    LowRis,
}

impl RisPlacement {
    pub fn as_str(self) -> &'static str {
        match self {
            RisPlacement::HighRis => "high-ris",
            RisPlacement::LowRis => "low-ris",
        }
    }
}

/// The on-disk schema. Every key is optional at parse time; [`validate`]
/// decides what is required.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_antennas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precoder_mags: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_abs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_a_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_u_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_ris: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_ris_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_elements: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ue_offset: Option<f64>,
}

/// Scalar keys accepted by [`RawConfig::set`] (and therefore by sweeps).
pub const SCALAR_KEYS: &[&str] = &[
    "lambda_a", "lambda_b", "radius", "h_a", "h_u", "h_r", "h_b", "r_b", "v0", "p_a",
    "n_antennas", "freq", "k_abs", "g_a", "g_a_db", "g_u", "g_u_db", "g_ris", "g_ris_db",
    "n_elements", "l_x", "l_y", "tau", "tau_db", "ue_offset",
];

impl RawConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Sets one scalar key. A linear key clears its `_db` twin and vice versa,
    /// so overrides never conflict with what the file already had.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ConfigError> {
        fn pair(lin: &mut Option<f64>, db: &mut Option<f64>, is_db: bool, v: f64) {
            if is_db {
                *db = Some(v);
                *lin = None;
            } else {
                *lin = Some(v);
                *db = None;
            }
        }
        match key {
            "lambda_a" => self.lambda_a = Some(value),
            "lambda_b" => self.lambda_b = Some(value),
            "radius" => self.radius = Some(value),
            "h_a" => self.h_a = Some(value),
            "h_u" => self.h_u = Some(value),
            "h_r" => self.h_r = Some(value),
            "h_b" => self.h_b = Some(value),
            "r_b" => self.r_b = Some(value),
            "v0" => self.v0 = Some(value),
            "p_a" => self.p_a = Some(value),
            "n_antennas" => {
                if value < 1.0 || value.fract() != 0.0 || value > 1e6 {
                    return Err(ConfigError::InvalidValue {
                        field: key.into(),
                        message: format!("expected a positive integer, got {value}"),
                    });
                }
                self.n_antennas = Some(value as usize);
                self.precoder_mags = None;
            }
            "freq" => self.freq = Some(value),
            "k_abs" => self.k_abs = Some(value),
            "g_a" | "g_a_db" => pair(&mut self.g_a, &mut self.g_a_db, key.ends_with("_db"), value),
            "g_u" | "g_u_db" => pair(&mut self.g_u, &mut self.g_u_db, key.ends_with("_db"), value),
            "g_ris" | "g_ris_db" => {
                pair(&mut self.g_ris, &mut self.g_ris_db, key.ends_with("_db"), value)
            }
            "n_elements" => self.n_elements = Some(value),
            "l_x" => self.l_x = Some(value),
            "l_y" => self.l_y = Some(value),
            "tau" | "tau_db" => pair(&mut self.tau, &mut self.tau_db, key.ends_with("_db"), value),
            "ue_offset" => self.ue_offset = Some(value),
            other => return Err(ConfigError::UnknownField(other.to_string())),
        }
        Ok(())
    }

    /// Parses `key=value` and applies it with [`RawConfig::set`].
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec.split_once('=').ok_or_else(|| ConfigError::InvalidValue {
            field: spec.to_string(),
            message: "expected key=value".into(),
        })?;
        let key = key.trim();
        let value: f64 = value.trim().parse().map_err(|_| ConfigError::InvalidValue {
            field: key.to_string(),
            message: format!("`{}` is not a number", value.trim()),
        })?;
        self.set(key, value)
    }
}

/// A validated scenario with its derived blockage and geometry terms.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkConfig {
    /// AP density, per m².
    pub lambda_a: f64,
    /// Blockage density, per m².
    pub lambda_b: f64,
    /// Disk radius, m.
    pub radius: f64,
    pub h_a: f64,
    pub h_u: f64,
    pub h_r: f64,
    pub h_b: f64,
    /// Blockage cylinder radius, m.
    pub r_b: f64,
    /// 2D RIS–UE distance, m.
    pub v0: f64,
    /// AP transmit power, W.
    pub p_a: f64,
    pub n_antennas: usize,
    pub precoder_mags: Vec<f64>,
    /// Carrier frequency, Hz.
    pub freq: f64,
    /// Molecular absorption coefficient, 1/m.
    pub k_abs: f64,
    pub g_a: f64,
    pub g_u: f64,
    /// Extra gain of an active RIS (1 for a passive panel).
    pub g_ris: f64,
    pub n_elements: f64,
    pub l_x: f64,
    pub l_y: f64,
    /// Linear SIR threshold.
    pub tau: f64,
    /// 2D UE displacement from the disk center, m (Monte-Carlo only).
    pub ue_offset: f64,
    derived: Derived,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Derived {
    hat_a: f64,
    hat_b: f64,
    hat_r: f64,
    beta_d: f64,
    beta_r: f64,
    beta_ar: f64,
    placement: RisPlacement,
    sum_f_sq: f64,
    sum_f: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

fn required(v: Option<f64>, name: &'static str) -> Result<f64, ConfigError> {
    v.ok_or(ConfigError::MissingField(name))
}

fn positive(v: f64, name: &'static str) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::NonPositiveValue {
            field: name,
            value: v,
            expected: "finite and > 0",
        })
    }
}

fn non_negative(v: f64, name: &'static str) -> Result<f64, ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::NonPositiveValue {
            field: name,
            value: v,
            expected: "finite and >= 0",
        })
    }
}

fn linear_or_db(
    lin: Option<f64>,
    db: Option<f64>,
    name: &'static str,
    default: Option<f64>,
) -> Result<f64, ConfigError> {
    match (lin, db) {
        (Some(_), Some(_)) => Err(ConfigError::Conflict(name)),
        (Some(v), None) => Ok(v),
        (None, Some(d)) => {
            if !d.is_finite() {
                return Err(ConfigError::InvalidValue {
                    field: format!("{name}_db"),
                    message: format!("non-finite dB value {d}"),
                });
            }
            Ok(db_to_linear(d))
        }
        (None, None) => default.ok_or(ConfigError::MissingField(name)),
    }
}

/// Checks `raw` and builds the immutable scenario.
///
/// `lambda_b`, `k_abs` and `ue_offset` may be zero (no blockages, no
/// absorption, centered UE); every other scalar must be strictly positive.
/// Defaults: unit precoder magnitudes, passive RIS, half-wavelength elements,
/// centered UE.
pub fn validate(raw: &RawConfig) -> Result<NetworkConfig, ConfigError> {
    let lambda_a = positive(required(raw.lambda_a, "lambda_a")?, "lambda_a")?;
    let lambda_b = non_negative(required(raw.lambda_b, "lambda_b")?, "lambda_b")?;
    let radius = positive(required(raw.radius, "radius")?, "radius")?;
    let h_a = positive(required(raw.h_a, "h_a")?, "h_a")?;
    let h_u = positive(required(raw.h_u, "h_u")?, "h_u")?;
    let h_r = positive(required(raw.h_r, "h_r")?, "h_r")?;
    let h_b = positive(required(raw.h_b, "h_b")?, "h_b")?;
    let r_b = positive(required(raw.r_b, "r_b")?, "r_b")?;
    let v0 = positive(required(raw.v0, "v0")?, "v0")?;
    let p_a = positive(required(raw.p_a, "p_a")?, "p_a")?;
    let n_antennas = raw.n_antennas.ok_or(ConfigError::MissingField("n_antennas"))?;
    if n_antennas == 0 {
        return Err(ConfigError::NonPositiveValue {
            field: "n_antennas",
            value: 0.0,
            expected: "at least 1",
        });
    }
    let freq = positive(required(raw.freq, "freq")?, "freq")?;
    let k_abs = non_negative(required(raw.k_abs, "k_abs")?, "k_abs")?;
    let g_a = positive(linear_or_db(raw.g_a, raw.g_a_db, "g_a", None)?, "g_a")?;
    let g_u = positive(linear_or_db(raw.g_u, raw.g_u_db, "g_u", None)?, "g_u")?;
    let g_ris = positive(linear_or_db(raw.g_ris, raw.g_ris_db, "g_ris", Some(1.0))?, "g_ris")?;
    let n_elements = positive(required(raw.n_elements, "n_elements")?, "n_elements")?;
    let half_wave = SPEED_OF_LIGHT / (2.0 * freq);
    let l_x = positive(raw.l_x.unwrap_or(half_wave), "l_x")?;
    let l_y = positive(raw.l_y.unwrap_or(half_wave), "l_y")?;
    let tau = positive(linear_or_db(raw.tau, raw.tau_db, "tau", None)?, "tau")?;
    let ue_offset = non_negative(raw.ue_offset.unwrap_or(0.0), "ue_offset")?;

    let precoder_mags = match &raw.precoder_mags {
        Some(m) => {
            if m.len() != n_antennas {
                return Err(ConfigError::PrecoderLength {
                    got: m.len(),
                    expected: n_antennas,
                });
            }
            for &x in m {
                positive(x, "precoder_mags")?;
            }
            m.clone()
        }
        None => vec![1.0; n_antennas],
    };

    if h_u >= h_a {
        return Err(ConfigError::GeometryViolation(format!(
            "UE height {h_u} m must be below the AP height {h_a} m"
        )));
    }
    if h_u >= h_r {
        return Err(ConfigError::GeometryViolation(format!(
            "UE height {h_u} m must be below the RIS height {h_r} m"
        )));
    }
    if h_r >= h_a {
        return Err(ConfigError::GeometryViolation(format!(
            "RIS height {h_r} m must be below the AP height {h_a} m (zero incidence factor otherwise)"
        )));
    }
    if ue_offset >= radius {
        return Err(ConfigError::OffsetOutOfDisk {
            offset: ue_offset,
            radius,
        });
    }

    let hat_a = h_a - h_u;
    let hat_b = h_b - h_u;
    let hat_r = h_r - h_u;
    let blockage_scale = 2.0 * lambda_b * r_b;
    let placement = if h_r <= h_b {
        RisPlacement::LowRis
    } else {
        RisPlacement::HighRis
    };
    let derived = Derived {
        hat_a,
        hat_b,
        hat_r,
        beta_d: blockage_scale * (hat_b / hat_a).abs(),
        beta_r: blockage_scale * (hat_b / hat_r).abs(),
        beta_ar: blockage_scale * ((h_b - h_r) / (h_a - h_r)).abs(),
        placement,
        sum_f_sq: precoder_mags.iter().map(|f| f * f).sum(),
        sum_f: precoder_mags.iter().sum(),
    };

    Ok(NetworkConfig {
        lambda_a,
        lambda_b,
        radius,
        h_a,
        h_u,
        h_r,
        h_b,
        r_b,
        v0,
        p_a,
        n_antennas,
        precoder_mags,
        freq,
        k_abs,
        g_a,
        g_u,
        g_ris,
        n_elements,
        l_x,
        l_y,
        tau,
        ue_offset,
        derived,
    })
}

/// The reference indoor scenario: 1 AP/m², 2 blockages/m², a √140 m disk,
/// 0.3 THz with k_a = 0.075 /m, 30 dB antennas, 10 unit-magnitude AP
/// antennas, a 10¹³-element passive RIS at 2.25 m and √2 m from the UE,
/// τ = 2 dB.
pub fn reference_config() -> NetworkConfig {
    validate(&default_raw()).expect("reference scenario is valid")
}

/// [`reference_config`] in file form (linear values, every key present).
pub fn default_raw() -> RawConfig {
    let freq = 0.3e12;
    RawConfig {
        lambda_a: Some(1.0),
        lambda_b: Some(2.0),
        radius: Some(140f64.sqrt()),
        h_a: Some(3.0),
        h_u: Some(1.0),
        h_r: Some(0.75 * 3.0),
        h_b: Some(1.63),
        r_b: Some(0.22),
        v0: Some(SQRT_2),
        p_a: Some(1e-3),
        n_antennas: Some(10),
        precoder_mags: Some(vec![1.0; 10]),
        freq: Some(freq),
        k_abs: Some(0.075),
        g_a: Some(db_to_linear(30.0)),
        g_u: Some(db_to_linear(30.0)),
        g_ris: Some(1.0),
        n_elements: Some(1e13),
        l_x: Some(SPEED_OF_LIGHT / (2.0 * freq)),
        l_y: Some(SPEED_OF_LIGHT / (2.0 * freq)),
        tau: Some(db_to_linear(2.0)),
        ue_offset: Some(0.0),
        ..RawConfig::default()
    }
}

impl NetworkConfig {
    /// Re-serializes to the file schema (linear values, every key present).
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            lambda_a: Some(self.lambda_a),
            lambda_b: Some(self.lambda_b),
            radius: Some(self.radius),
            h_a: Some(self.h_a),
            h_u: Some(self.h_u),
            h_r: Some(self.h_r),
            h_b: Some(self.h_b),
            r_b: Some(self.r_b),
            v0: Some(self.v0),
            p_a: Some(self.p_a),
            n_antennas: Some(self.n_antennas),
            precoder_mags: Some(self.precoder_mags.clone()),
            freq: Some(self.freq),
            k_abs: Some(self.k_abs),
            g_a: Some(self.g_a),
            g_u: Some(self.g_u),
            g_ris: Some(self.g_ris),
            n_elements: Some(self.n_elements),
            l_x: Some(self.l_x),
            l_y: Some(self.l_y),
            tau: Some(self.tau),
            ue_offset: Some(self.ue_offset),
            ..RawConfig::default()
        }
    }

    /// Returns a copy with one scalar key changed and everything re-derived.
    pub fn with(&self, key: &str, value: f64) -> Result<NetworkConfig, ConfigError> {
        let mut raw = self.to_raw();
        raw.set(key, value)?;
        validate(&raw)
    }

    /// AP height above the UE.
    pub fn hat_a(&self) -> f64 {
        self.derived.hat_a
    }

    /// Blockage height above the UE.
    pub fn hat_b(&self) -> f64 {
        self.derived.hat_b
    }

    /// RIS height above the UE.
    pub fn hat_r(&self) -> f64 {
        self.derived.hat_r
    }

    /// Blockage rate of the AP–UE link per metre of 2D distance.
    pub fn beta_d(&self) -> f64 {
        self.derived.beta_d
    }

    /// Blockage rate of the RIS–UE link per metre.
    pub fn beta_r(&self) -> f64 {
        self.derived.beta_r
    }

    /// Blockage rate of the AP–RIS link per metre (used only for a low RIS).
    pub fn beta_ar(&self) -> f64 {
        self.derived.beta_ar
    }

    pub fn placement(&self) -> RisPlacement {
        self.derived.placement
    }

    pub fn is_low_ris(&self) -> bool {
        self.derived.placement == RisPlacement::LowRis
    }

    /// Σ|f_j|².
    pub fn sum_precoder_sq(&self) -> f64 {
        self.derived.sum_f_sq
    }

    /// Σ|f_j|.
    pub fn sum_precoder(&self) -> f64 {
        self.derived.sum_f
    }

    /// Expected number of APs in the disk.
    pub fn mean_ap_count(&self) -> f64 {
        self.lambda_a * std::f64::consts::PI * self.radius * self.radius
    }

    /// Flat key/value view used when echoing the config in CSV preambles.
    pub fn echo(&self) -> BTreeMap<String, serde_json::Value> {
        match serde_json::to_value(self.to_raw()) {
            Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        }
    }
}

impl Serialize for NetworkConfig {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(serializer)
    }
}
