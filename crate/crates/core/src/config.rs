//! Experiment configuration: JSON schema, validation, and unit handling.
//!
//! Angles may be given as plain radians or as strings with a `pi` suffix
//! ("0.45pi"); lengths are in units of lambda/(2 pi), which coincide with
//! 1/k internally. Unknown keys are rejected, and validation reports every
//! violated guard, not just the first.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::optics::{BeamGeometry, CloudLaw, THETA0_LIMIT};
use crate::spin::MAX_ATOMS;
use crate::trajectory::TrajectorySettings;

/// An angle in radians, parsed from a number or a "<x>pi" string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(Angle(v)),
            Raw::Text(s) => parse_pi_angle(&s)
                .map(Angle)
                .ok_or_else(|| serde::de::Error::custom(format!("cannot parse angle `{s}`"))),
        }
    }
}

fn parse_pi_angle(s: &str) -> Option<f64> {
    let t = s.trim();
    if let Some(prefix) = t.strip_suffix("pi").map(str::trim) {
        if prefix.is_empty() {
            return Some(std::f64::consts::PI);
        }
        return prefix.parse::<f64>().ok().map(|v| v * std::f64::consts::PI);
    }
    t.parse::<f64>().ok()
}

/// Spatial law of the cloud, selected by the `law` tag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase", deny_unknown_fields)]
pub enum CloudConfig {
    Point,
    Gaussian { rms: f64 },
    Box { dims: [f64; 3] },
}

impl CloudConfig {
    pub fn law(&self) -> CloudLaw {
        match *self {
            CloudConfig::Point => CloudLaw::Point,
            CloudConfig::Gaussian { rms } => CloudLaw::Gaussian { rms },
            CloudConfig::Box { dims } => CloudLaw::Box { dims },
        }
    }
}

/// Detection-grid overrides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_theta: Option<usize>,
    pub n_phi: Option<usize>,
    pub max_cells: usize,
    pub table_bytes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_theta: None,
            n_phi: None,
            max_cells: crate::optics::DEFAULT_CELL_CAP,
            table_bytes: crate::optics::DEFAULT_TABLE_BYTES,
        }
    }
}

/// Dense-cloud model parameters (box with sub-wavelength cells).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseConfig {
    /// Transverse box side (x and y), in lambda/(2 pi) units.
    pub lx: f64,
    /// Longitudinal box side.
    pub lz: f64,
    /// Cell side; must stay below the wavelength 2 pi.
    pub cell: f64,
    /// Atoms per cell.
    pub n_cell: f64,
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_atoms: usize,
    pub cloud: CloudConfig,
    pub theta0: Angle,
    /// Single-atom scattering amplitude, in 1/k units.
    pub f: f64,
    /// Interferometer phase offset; balanced quarter-pi by default.
    #[serde(default = "default_phi")]
    pub phi: Angle,
    pub n_photons: u64,
    #[serde(default = "default_one")]
    pub n_histories: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub record_every: usize,
    /// Switch the scattering channel off to run the ideal interferometer.
    #[serde(default = "default_true")]
    pub scattering: bool,
    #[serde(default = "default_true")]
    pub light_shift_compensation: bool,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<DenseConfig>,
}

fn default_phi() -> Angle {
    Angle(std::f64::consts::FRAC_PI_4)
}

fn default_one() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// Parses and validates a JSON configuration string.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::ConfigParse(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Loads a configuration file.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Checks every guard and reports all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.n_atoms == 0 || self.n_atoms > MAX_ATOMS {
            violations.push(format!(
                "n_atoms must lie in [1, {MAX_ATOMS}], got {}",
                self.n_atoms
            ));
        }
        match self.cloud {
            CloudConfig::Gaussian { rms } if rms < 0.0 => {
                violations.push(format!("gaussian cloud rms must be >= 0, got {rms}"));
            }
            CloudConfig::Box { dims } if dims.iter().any(|&d| d <= 0.0) => {
                violations.push(format!("box dimensions must be positive, got {dims:?}"));
            }
            _ => {}
        }
        match BeamGeometry::new(1.0, self.theta0.0, self.f, self.phi.0) {
            Err(Error::InvalidConfig(more)) => violations.extend(more),
            Err(other) => violations.push(other.to_string()),
            Ok(_) => {}
        }
        if self.n_photons == 0 {
            violations.push("n_photons must be >= 1".into());
        }
        if self.n_histories == 0 {
            violations.push("n_histories must be >= 1".into());
        }
        if self.record_every == 0 {
            violations.push("record_every must be >= 1".into());
        }
        if let (Some(nt), Some(np)) = (self.grid.n_theta, self.grid.n_phi) {
            if nt == 0 || np == 0 {
                violations.push("grid resolution overrides must be >= 1".into());
            }
            if nt * np > self.grid.max_cells {
                violations.push(format!(
                    "grid override {nt}x{np} exceeds max_cells {}",
                    self.grid.max_cells
                ));
            }
        } else if self.grid.n_theta.is_some() != self.grid.n_phi.is_some() {
            violations.push("grid overrides need both n_theta and n_phi".into());
        }
        if let Some(d) = &self.dense {
            let lambda = 2.0 * std::f64::consts::PI;
            if d.cell <= 0.0 || d.cell >= lambda {
                violations.push(format!(
                    "dense cell side must lie in (0, {lambda:.4}), got {}",
                    d.cell
                ));
            }
            if d.lx < d.cell || d.lz < d.cell {
                violations.push("dense box must hold at least one cell per axis".into());
            }
            if d.n_cell < 1.0 {
                violations.push(format!("dense n_cell must be >= 1, got {}", d.n_cell));
            }
        }
        let _ = THETA0_LIMIT; // guard text lives in BeamGeometry::new
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }

    pub fn geometry(&self) -> Result<BeamGeometry> {
        BeamGeometry::new(1.0, self.theta0.0, self.f, self.phi.0)
    }

    pub fn cloud_law(&self) -> CloudLaw {
        self.cloud.law()
    }

    pub fn settings(&self) -> TrajectorySettings {
        TrajectorySettings {
            scattering: self.scattering,
            compensate_light_shift: self.light_shift_compensation,
            record_every: self.record_every,
            probability_tolerance: crate::trajectory::PROBABILITY_TOLERANCE,
            cell_cap: self.grid.max_cells,
            table_byte_cap: self.grid.table_bytes,
            grid_resolution: match (self.grid.n_theta, self.grid.n_phi) {
                (Some(nt), Some(np)) => Some((nt, np)),
                _ => None,
            },
        }
    }

    /// Canonical JSON rendering (used for hashing and echoing).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a hash of the canonical rendering, for output provenance.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_json().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
