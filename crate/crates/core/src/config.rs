//! Run configuration, read from a TOML file.
//!
//! ```toml
//! out_dir = "out"                 # overridden by --out
//!
//! [squid]
//! critical_current = 1.25e-6      # A
//! cell_capacitance = 90e-15       # F
//! cell_length = 10e-6             # m
//! cos_psi = 1.0                   # weak-signal phase factor, (0, 1]
//!
//! [profile]
//! kind = "cubic"                  # cubic | tabulated | uniform
//! scale_a = 1e-2                  # m, length unit a of x/a
//! # path = "profile.csv"          # tabulated: columns x_over_a, c_tilde
//! # speed = 1.0                   # uniform: c_tilde
//!
//! [design]
//! window = [-1.26, -1.0]          # x/a
//! search_window = [-2.0, 1.0]     # x/a, for feasibility diagnostics
//! cells = 64
//! margin_delta = 0.05             # flux distance from phi0/2, units of phi0
//! branch_policy = "auto"          # auto | force_cos_positive | force_cos_negative
//!
//! [lattice]
//! # padding = 200                 # cells per side; sized from the pulse if absent
//! cfl = 0.5
//! boundary = "matched_termination" # or "reflective"
//! carrier_scale = 1.0             # carrier as a fraction of the dispersion guard
//! amplitude = 1e-3                # V
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::designer::{BranchPolicy, DesignRequest, Window, DEFAULT_MARGIN_DELTA};
use crate::lattice::{Boundary, DEFAULT_CFL_FACTOR};
use crate::spacetime::{SpeedProfile, TabulatedProfile};
use crate::squid::{PhaseAssumption, SquidParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("tabulated profile {path}: {message}")]
    Profile { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SquidSection {
    pub critical_current: f64,
    pub cell_capacitance: f64,
    pub cell_length: f64,
    pub cos_psi: f64,
}

impl Default for SquidSection {
    fn default() -> Self {
        Self {
            critical_current: 1.25e-6,
            cell_capacitance: 90e-15,
            cell_length: 10e-6,
            cos_psi: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    #[default]
    Cubic,
    Tabulated,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub kind: ProfileKind,
    pub scale_a: f64,
    pub path: Option<PathBuf>,
    pub speed: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        Self {
            kind: ProfileKind::Cubic,
            scale_a: 1e-2,
            path: None,
            speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub window: [f64; 2],
    pub search_window: [f64; 2],
    pub cells: usize,
    pub margin_delta: f64,
    pub branch_policy: BranchPolicy,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            window: [-1.26, -1.0],
            search_window: [-2.0, 1.0],
            cells: 64,
            margin_delta: DEFAULT_MARGIN_DELTA,
            branch_policy: BranchPolicy::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub padding: Option<usize>,
    pub cfl: f64,
    pub boundary: Boundary,
    pub carrier_scale: f64,
    pub amplitude: f64,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            padding: None,
            cfl: DEFAULT_CFL_FACTOR,
            boundary: Boundary::MatchedTermination,
            carrier_scale: 1.0,
            amplitude: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: Option<PathBuf>,
    pub squid: SquidSection,
    pub profile: ProfileSection,
    pub design: DesignSection,
    pub lattice: LatticeSection,
    /// Directory relative profile paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            source: Box::new(e),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text, path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn params(&self) -> Result<SquidParams, ConfigError> {
        let s = &self.squid;
        SquidParams::new(s.critical_current, s.cell_capacitance, s.cell_length)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn phase(&self) -> Result<PhaseAssumption, ConfigError> {
        PhaseAssumption::new(self.squid.cos_psi).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn window(&self) -> Result<Window, ConfigError> {
        let [lo, hi] = self.design.window;
        Window::new(lo, hi).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn search_window(&self) -> Result<Window, ConfigError> {
        let [lo, hi] = self.design.search_window;
        Window::new(lo, hi).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn profile(&self) -> Result<SpeedProfile, ConfigError> {
        let p = &self.profile;
        match p.kind {
            ProfileKind::Cubic => {
                SpeedProfile::cubic(p.scale_a).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            ProfileKind::Uniform => {
                if p.speed.is_finite() && p.speed > 0.0 {
                    Ok(SpeedProfile::constant(p.speed))
                } else {
                    Err(ConfigError::Invalid(format!(
                        "uniform speed {} must be positive",
                        p.speed
                    )))
                }
            }
            ProfileKind::Tabulated => {
                let rel = p.path.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("tabulated profile needs profile.path".into())
                })?;
                let path = match &self.base_dir {
                    Some(base) if rel.is_relative() => base.join(rel),
                    _ => rel.clone(),
                };
                read_tabulated(&path).map(SpeedProfile::Tabulated)
            }
        }
    }

    /// Physical length unit `a` in meters.
    pub fn scale_a(&self) -> Result<f64, ConfigError> {
        let a = self.profile.scale_a;
        if a.is_finite() && a > 0.0 {
            Ok(a)
        } else {
            Err(ConfigError::Invalid(format!("scale_a = {a} must be positive")))
        }
    }

    pub fn design_request(&self) -> Result<DesignRequest, ConfigError> {
        if self.design.cells == 0 {
            return Err(ConfigError::Invalid("cells must be at least 1".into()));
        }
        let mut req = DesignRequest::new(
            self.profile()?,
            self.window()?,
            self.design.cells,
            self.params()?,
        );
        req.branch_policy = self.design.branch_policy;
        req.margin_delta = self.design.margin_delta;
        req.phase = self.phase()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.design_request()?;
        self.search_window()?;
        let l = &self.lattice;
        if !(l.cfl > 0.0 && l.cfl <= 1.0) {
            return Err(ConfigError::Invalid(format!("cfl = {} outside (0, 1]", l.cfl)));
        }
        if !(l.carrier_scale > 0.0 && l.carrier_scale <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "carrier_scale = {} outside (0, 1]",
                l.carrier_scale
            )));
        }
        if !(l.amplitude > 0.0 && l.amplitude.is_finite()) {
            return Err(ConfigError::Invalid("amplitude must be positive".into()));
        }
        let m = self.design.margin_delta;
        if !(m > 0.0 && m < 0.5) {
            return Err(ConfigError::Invalid(format!("margin_delta = {m} outside (0, 1/2)")));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct ProfileRow {
    x_over_a: f64,
    c_tilde: f64,
}

/// Reads a CSV with header `x_over_a,c_tilde`.
pub fn read_tabulated(path: &Path) -> Result<TabulatedProfile, ConfigError> {
    let fail = |message: String| ConfigError::Profile {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let rows = reader
        .deserialize::<ProfileRow>()
        .map(|r| r.map(|row| (row.x_over_a, row.c_tilde)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| fail(e.to_string()))?;
    TabulatedProfile::new(rows).map_err(|e| fail(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("", Path::new("x.toml")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        assert!(cfg.profile().unwrap().is_cubic());
    }

    #[test]
    fn sections_parse() {
        let text = r#"
            out_dir = "results"
            [squid]
            critical_current = 2e-6
            [profile]
            kind = "uniform"
            speed = 0.5
            [design]
            window = [0.0, 1.0]
            cells = 10
            branch_policy = "force_cos_positive"
            [lattice]
            boundary = "reflective"
            padding = 40
        "#;
        let cfg = RunConfig::from_toml_str(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.out_dir, Some(PathBuf::from("results")));
        assert_eq!(cfg.squid.critical_current, 2e-6);
        assert_eq!(cfg.squid.cell_capacitance, 90e-15);
        assert_eq!(cfg.design.branch_policy, BranchPolicy::ForceCosPositive);
        assert_eq!(cfg.lattice.boundary, Boundary::Reflective);
        assert_eq!(cfg.lattice.padding, Some(40));
        assert_eq!(cfg.profile().unwrap().speed(0.3).unwrap(), 0.5);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml_str("[design]\ncell = 3\n", Path::new("x.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = RunConfig::default();
        cfg.squid.cell_capacitance = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.design.window = [1.0, -1.0];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.lattice.cfl = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tabulated_profile_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("p.csv"), "x_over_a,c_tilde\n0,1\n1,0.5\n").unwrap();
        let cfg_path = dir.path().join("run.toml");
        std::fs::write(&cfg_path, "[profile]\nkind = \"tabulated\"\npath = \"p.csv\"\n").unwrap();
        let cfg = RunConfig::load(&cfg_path).unwrap();
        let p = cfg.profile().unwrap();
        assert!((p.speed(0.5).unwrap() - 0.75).abs() < 1e-15);
    }
}
