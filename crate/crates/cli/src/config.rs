//! JSON configuration, merged with command-line flags.
//!
//! Every field is optional. Precedence is built-in default < config file < flag.

use std::path::{Path, PathBuf};

use edgelab_core::mesh::{DEFAULT_R_MAX, MIN_POINTS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub mesh: MeshSection,
    pub edge: EdgeSection,
    pub borders: BorderSection,
    pub space: SpaceSection,
    pub dtn: DtnSection,
    pub algebra: AlgebraSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub r_max: Option<f64>,
    pub n_points: Option<usize>,
    pub grading_exponent: Option<f64>,
    pub levels: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeSection {
    pub gamma: Option<f64>,
    pub sweep: Option<Sweep>,
    pub xi_norm: Option<f64>,
    pub sigma0: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BorderSection {
    /// `boundary_row` or `coboundary_column`.
    pub mode: Option<String>,
    /// `default` or a path to a JSON φ table.
    pub phi: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    pub gamma: Option<f64>,
    pub s: Option<u8>,
    /// Tests `r^α e^{−r}`.
    pub alpha: Option<f64>,
    pub dual: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtnSection {
    /// Path to a JSON list of pieces, `catalog:<index>` or `constant:<value>`.
    pub profile: Option<String>,
    pub other_profile: Option<String>,
    pub modes: Option<usize>,
    pub cells: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgebraSection {
    pub dim_j: Option<usize>,
    pub dim_o: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    /// `csv`, `json` or `both`.
    pub formats: Option<String>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{field}: {msg}"))
}

/// Reads a config file, or the `config` echo of a run manifest.
pub fn load(path: &Path) -> Result<CliConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("config {} is not JSON: {e}", path.display())))?;
    let value = match value.get("config") {
        Some(inner) if value.get("tool_version").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(value)
        .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))
}

pub const DEFAULT_N_POINTS: usize = 128;
pub const DEFAULT_EDGE_GRADING: f64 = 4.0;
pub const DEFAULT_SPACE_GRADING: f64 = 3.0;
pub const DEFAULT_LEVELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshParams {
    pub r_max: f64,
    pub n_points: usize,
    pub grading_exponent: f64,
    pub levels: usize,
}

pub fn mesh_params(m: &MeshSection, default_grading: f64) -> Result<MeshParams, ConfigError> {
    let p = MeshParams {
        r_max: m.r_max.unwrap_or(DEFAULT_R_MAX),
        n_points: m.n_points.unwrap_or(DEFAULT_N_POINTS),
        grading_exponent: m.grading_exponent.unwrap_or(default_grading),
        levels: m.levels.unwrap_or(DEFAULT_LEVELS),
    };
    if !(p.r_max.is_finite() && p.r_max > 0.0) {
        return Err(bad(
            "mesh.r_max",
            format!("must be positive, got {}", p.r_max),
        ));
    }
    if p.n_points < MIN_POINTS {
        return Err(bad(
            "mesh.n_points",
            format!("must be at least {MIN_POINTS}, got {}", p.n_points),
        ));
    }
    if !(p.grading_exponent.is_finite() && p.grading_exponent >= 1.0) {
        return Err(bad(
            "mesh.grading_exponent",
            format!("must be at least 1, got {}", p.grading_exponent),
        ));
    }
    if !(3..=8).contains(&p.levels) {
        return Err(bad(
            "mesh.levels",
            format!("must be between 3 and 8, got {}", p.levels),
        ));
    }
    Ok(p)
}

pub fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(bad(field, format!("must be positive, got {v}")))
    }
}

pub fn finite(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(field, format!("must be finite, got {v}")))
    }
}

pub fn at_least(field: &str, v: usize, min: usize) -> Result<usize, ConfigError> {
    if v >= min {
        Ok(v)
    } else {
        Err(bad(field, format!("must be at least {min}, got {v}")))
    }
}

pub fn required<T>(field: &str, v: Option<T>) -> Result<T, ConfigError> {
    v.ok_or_else(|| bad(field, "is required"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c: CliConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, CliConfig::default());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(serde_json::from_str::<CliConfig>(r#"{"edge": {"gama": 1}}"#).is_err());
    }

    #[test]
    fn manifest_config_is_unwrapped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(
            &p,
            r#"{"tool_version": "x", "config": {"edge": {"gamma": 0.25}}}"#,
        )
        .unwrap();
        assert_eq!(load(&p).unwrap().edge.gamma, Some(0.25));
    }

    #[test]
    fn mesh_errors_name_field() {
        let m = MeshSection {
            n_points: Some(4),
            ..Default::default()
        };
        assert!(mesh_params(&m, 4.0)
            .unwrap_err()
            .0
            .starts_with("mesh.n_points"));
        let m = MeshSection {
            levels: Some(2),
            ..Default::default()
        };
        assert!(mesh_params(&m, 4.0)
            .unwrap_err()
            .0
            .starts_with("mesh.levels"));
    }
}
