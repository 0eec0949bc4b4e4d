//! Run configuration files.
//!
//! A config is a JSON object:
//!
//! ```text
//! {
//!   "schemaVersion": 1,
//!   "task": "spectrum" | "obc" | "agbz" | "gbz" | "winding-raster"
//!         | "intersections" | "verify" | "nfold-generate",
//!   "model": { "type": ..., ... },
//!   "params": { ... },        // optional, every key optional
//!   "output": "out/run"       // optional, overridden by --out
//! }
//! ```
//!
//! Model types:
//!
//! * `one_band`: `hops` is a list of `[n, re, im]`, giving `t_n = re + i im`.
//! * `extended_hn`: `gamma1`, for `t_{-2}, t_{-1}, t_1, t_2 = 0.5, 1 - g, 1 + g, 1.5`.
//! * `ssh`: real `t1`, `t2`, `t3`, `gamma`.
//! * `nfold`: `n`, `phi` and `q` (as `hops`), for `h = (1 - e^{i phi} b^n) q(b)`.
//!
//! Params (defaults in parentheses): `numK` (1024), `lengths` ([20, 40, 60]),
//! `thermodynamic` (true), `thetaPoints` (720), `adaptive` (true),
//! `adaptiveFactor` (8), `implicit` (true), `degreeCap` (64),
//! `bbox` (`[reMin, reMax, imMin, imMax]`, fitted to the spectrum when absent),
//! `margin` (0.3), `resolution` ([200, 200]), `tolE` (1e-6), `tieTol` (1e-6).
//! Lowering `tolE` separates nearly coincident self-intersections that would
//! otherwise merge into one of higher multiplicity.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use nhband::gbz::{DEFAULT_DEGREE_CAP, DEFAULT_THETA_POINTS, DEFAULT_TIE_TOL};
use nhband::intersect::{DEFAULT_TOL_E, MIN_NUM_K_INTERSECT};
use nhband::model::{extended_hn_gamma, nfold_construct, nh_ssh_real, LaurentPoly, Model, OneBandModel};
use nhband::spectra::{MIN_NUM_K, OBC_MAX_L};
use nhband::topology::MIN_RASTER;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub const PRESETS: [(&str, &str); 4] = [
    ("fig2b", include_str!("../presets/fig2b.json")),
    ("fig2c", include_str!("../presets/fig2c.json")),
    ("fig2d", include_str!("../presets/fig2d.json")),
    ("fig3", include_str!("../presets/fig3.json")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    Obc,
    Agbz,
    Gbz,
    WindingRaster,
    Intersections,
    Verify,
    NfoldGenerate,
}

impl std::str::FromStr for Task {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| CliError::Config(format!("unknown task {s:?}")))
    }
}

/// `[n, re, im]` entries of a Laurent polynomial.
pub type Hops = Vec<(i32, f64, f64)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    OneBand { hops: Hops },
    ExtendedHn { gamma1: f64 },
    Ssh { t1: f64, t2: f64, t3: f64, gamma: f64 },
    Nfold { n: usize, phi: f64, q: Hops },
}

pub fn laurent(hops: &Hops) -> LaurentPoly {
    LaurentPoly::new(hops.iter().map(|&(n, re, im)| (n, Complex64::new(re, im))))
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model, CliError> {
        let hops_finite = |h: &Hops| h.iter().all(|t| t.1.is_finite() && t.2.is_finite());
        let model = match self {
            ModelSpec::OneBand { hops } => {
                if !hops_finite(hops) {
                    return Err(CliError::Config("hopping amplitudes must be finite".into()));
                }
                OneBandModel::new(laurent(hops)).map(Model::OneBand)
            }
            ModelSpec::ExtendedHn { gamma1 } => extended_hn_gamma(*gamma1),
            ModelSpec::Ssh { t1, t2, t3, gamma } => nh_ssh_real(*t1, *t2, *t3, *gamma),
            ModelSpec::Nfold { n, phi, q } => {
                if !hops_finite(q) {
                    return Err(CliError::Config("q coefficients must be finite".into()));
                }
                nfold_construct(*n, *phi, &laurent(q))
            }
        };
        model.map_err(|e| CliError::Config(format!("model: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct Params {
    pub num_k: usize,
    pub lengths: Vec<usize>,
    pub thermodynamic: bool,
    pub theta_points: usize,
    pub adaptive: bool,
    pub adaptive_factor: usize,
    pub implicit: bool,
    pub degree_cap: u32,
    pub bbox: Option<[f64; 4]>,
    pub margin: f64,
    pub resolution: [usize; 2],
    pub tol_e: f64,
    pub tie_tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            num_k: 1024,
            lengths: vec![20, 40, 60],
            thermodynamic: true,
            theta_points: DEFAULT_THETA_POINTS,
            adaptive: true,
            adaptive_factor: 8,
            implicit: true,
            degree_cap: DEFAULT_DEGREE_CAP,
            bbox: None,
            margin: 0.3,
            resolution: [200, 200],
            tol_e: DEFAULT_TOL_E,
            tie_tol: DEFAULT_TIE_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub task: Task,
    pub model: ModelSpec,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schemaVersion {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let text = PRESETS
            .iter()
            .find(|p| p.0 == name)
            .map(|p| p.1)
            .ok_or_else(|| {
                let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
                CliError::Config(format!("unknown preset {name:?} (available: {})", names.join(", ")))
            })?;
        Self::parse(text)
    }

    /// Applies `KEY=VAL` for the tolerance keys `tolE` and `tieTol`.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("tolerance override {spec:?} is not KEY=VAL")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("tolerance override {key}: {value:?} is not a number")))?;
        match key.trim() {
            "tolE" => self.params.tol_e = value,
            "tieTol" => self.params.tie_tol = value,
            other => return Err(CliError::Config(format!("unknown tolerance key {other:?} (expected tolE or tieTol)"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let p = &self.params;
        let bad = |msg: String| Err(CliError::Config(msg));
        for (name, tol) in [("tolE", p.tol_e), ("tieTol", p.tie_tol)] {
            if !(tol.is_finite() && tol > 0.0) {
                return bad(format!("{name} must be positive, got {tol}"));
            }
        }
        let min_k = match self.task {
            Task::Intersections | Task::Verify | Task::NfoldGenerate => MIN_NUM_K_INTERSECT,
            _ => MIN_NUM_K,
        };
        if p.num_k < min_k {
            return bad(format!("numK = {} is below the minimum of {min_k} for this task", p.num_k));
        }
        if p.theta_points == 0 || p.adaptive_factor == 0 {
            return bad("thetaPoints and adaptiveFactor must be positive".into());
        }
        if self.task == Task::Obc {
            if p.lengths.is_empty() && !p.thermodynamic {
                return bad("obc needs at least one length or thermodynamic = true".into());
            }
            if let Some(&l) = p.lengths.iter().find(|&&l| l > OBC_MAX_L) {
                return bad(format!("chain length {l} exceeds the cap {OBC_MAX_L}"));
            }
        }
        if let Some([x0, x1, y0, y1]) = p.bbox {
            if !(x0 < x1 && y0 < y1) || [x0, x1, y0, y1].iter().any(|v| !v.is_finite()) {
                return bad(format!("bbox [{x0}, {x1}, {y0}, {y1}] is not a finite nonempty box"));
            }
        }
        if !(p.margin.is_finite() && p.margin >= 0.0) {
            return bad(format!("margin must be nonnegative, got {}", p.margin));
        }
        let [nx, ny] = p.resolution;
        if nx < MIN_RASTER || ny < MIN_RASTER {
            return bad(format!("resolution {nx}x{ny} is below {MIN_RASTER}x{MIN_RASTER}"));
        }
        if self.task == Task::NfoldGenerate && !matches!(self.model, ModelSpec::Nfold { .. }) {
            return bad("nfold-generate needs a model of type nfold".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for (name, _) in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            c.validate().unwrap();
            c.model.build().unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let base = r#"{"schemaVersion": 1, "task": "spectrum", "model": {"type": "extended_hn", "gamma1": 0.1}"#;
        assert!(RunConfig::parse(&format!("{base}}}")).is_ok());
        assert!(RunConfig::parse(&format!("{base}, \"extra\": 1}}")).is_err());
        assert!(RunConfig::parse(&format!("{base}, \"params\": {{\"numk\": 64}}}}")).is_err());
        let model = r#"{"schemaVersion": 1, "task": "spectrum", "model": {"type": "ssh", "t1": 1, "t2": 1, "t3": 0, "gamma": 0, "t4": 1}}"#;
        assert!(RunConfig::parse(model).is_err());
    }

    #[test]
    fn overrides_touch_only_tolerances() {
        let mut c = RunConfig::preset("fig2b").unwrap();
        c.apply_override("tolE=1e-8").unwrap();
        assert_eq!(c.params.tol_e, 1e-8);
        assert!(c.apply_override("numK=12").is_err());
        assert!(c.apply_override("tieTol").is_err());
        c.apply_override("tieTol=-1").unwrap();
        assert!(c.validate().is_err());
    }
}
