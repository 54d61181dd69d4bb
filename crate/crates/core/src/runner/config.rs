//! Experiment configs: flat `key = value` text with sections (TOML), or JSON.
//!
//! ```text
//! experiment = "martingale"
//! seed = 1
//! outdir = "out"
//!
//! [family]
//! kind = "uniform_cube"
//! dim = 4
//!
//! [params]
//! T = 1.0
//! paths = 256
//!
//! [tolerances]
//! martingale_sigmas = 4
//! ```
//!
//! Every key is checked on its own, so a bad config reports all offending
//! keys at once.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::localization::Backend;
use crate::measures::{KindTag, LogConcaveFamily};
use crate::reduction;
use crate::tolerances::{Constants, Tolerances};

/// Experiments accepted by [`crate::runner::run_experiment`].
pub const EXPERIMENTS: [&str; 13] = [
    "reduce",
    "localize",
    "smallball",
    "bounds",
    "martingale",
    "covbound",
    "borell",
    "subgaussian",
    "shrinkage",
    "guan",
    "subspace",
    "certificate",
    "slicing",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySpec {
    /// A base kind, `zoo` (all base kinds), or a body name for slicing.
    pub kind: Option<String>,
    pub dim: Option<usize>,
    /// `none`, `symmetrize`, `restrict`, `reduce` or `diagonal`.
    pub transform: Option<String>,
    /// Radius for `restrict`.
    pub radius: Option<f64>,
    /// Diagonal of the linear map for `diagonal`.
    pub diagonal: Option<Vec<f64>>,
    /// `C₀` for `reduce`.
    pub c0: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[serde(alias = "T")]
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    pub paths: Option<usize>,
    pub budget: Option<usize>,
    #[serde(alias = "N")]
    pub samples: Option<usize>,
    pub epsilons: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub c1: Option<f64>,
    pub c0_constant: Option<f64>,
    pub t_star: Option<f64>,
    pub p_max: Option<u32>,
    pub ps: Option<Vec<f64>>,
    pub times: Option<Vec<f64>>,
    pub radius: Option<f64>,
    pub backend: Option<String>,
    pub record_every: Option<usize>,
    pub dims: Option<Vec<usize>>,
    pub theta: Option<Vec<f64>>,
    pub spectrum: Option<Vec<f64>>,
    pub b: Option<f64>,
    pub directions: Option<usize>,
    pub trials: Option<usize>,
    pub vertices: Option<Vec<Vec<f64>>>,
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub outdir: PathBuf,
    pub family: FamilySpec,
    pub params: Params,
    pub tolerances: Tolerances,
    pub constants: Constants,
}

// Only deserialized to validate top-level keys one at a time.
#[allow(dead_code)]
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopLevel {
    #[serde(default)]
    experiment: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    outdir: Option<PathBuf>,
}

/// Check each key of `section` alone against `T`, collecting failures, and
/// return the keys that passed.
fn check_keys<T: DeserializeOwned>(section: &str, object: &Map<String, Value>, errors: &mut Vec<String>) -> Map<String, Value> {
    let mut good = Map::new();
    for (key, value) in object {
        let mut single = Map::new();
        single.insert(key.clone(), value.clone());
        match serde_json::from_value::<T>(Value::Object(single)) {
            Ok(_) => {
                good.insert(key.clone(), value.clone());
            }
            Err(e) => {
                let msg = e.to_string();
                if msg.contains("unknown field") {
                    errors.push(format!("{section}{key}: unknown key"));
                } else {
                    errors.push(format!("{section}{key}: {msg}"));
                }
            }
        }
    }
    good
}

/// The valid keys of a section, so later checks still see them.
fn section<T: DeserializeOwned + Default>(root: &Map<String, Value>, name: &str, errors: &mut Vec<String>) -> T {
    match root.get(name) {
        None => T::default(),
        Some(Value::Object(obj)) => {
            let good = check_keys::<T>(&format!("{name}."), obj, errors);
            serde_json::from_value(Value::Object(good)).unwrap_or_default()
        }
        Some(_) => {
            errors.push(format!("{name}: expected a section"));
            T::default()
        }
    }
}

impl ExperimentConfig {
    /// A config with defaults everywhere but the experiment name and seed.
    pub fn new(experiment: impl Into<String>, seed: u64) -> Self {
        ExperimentConfig {
            experiment: experiment.into(),
            seed,
            outdir: PathBuf::from("."),
            family: FamilySpec::default(),
            params: Params::default(),
            tolerances: Tolerances::default(),
            constants: Constants::default(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if json {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(vec![format!("syntax: {e}")]))?;
        let value = serde_json::to_value(table)?;
        Self::from_value(value)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("syntax: {e}")]))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(root) = value else {
            return Err(Error::Config(vec!["top level must be a table".into()]));
        };
        let mut errors = Vec::new();
        let sections = ["family", "params", "tolerances", "constants"];
        let top: Map<String, Value> =
            root.iter().filter(|(k, _)| !sections.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
        check_keys::<TopLevel>("", &top, &mut errors);
        let family: FamilySpec = section(&root, "family", &mut errors);
        let params: Params = section(&root, "params", &mut errors);
        let tolerances: Tolerances = section(&root, "tolerances", &mut errors);
        let constants: Constants = section(&root, "constants", &mut errors);
        let get = |k: &str| top.get(k).cloned();
        let experiment = match get("experiment") {
            Some(Value::String(s)) => s,
            None => {
                errors.push("experiment: missing".into());
                String::new()
            }
            Some(_) => String::new(),
        };
        let seed = get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
        let outdir = get("outdir").and_then(|v| v.as_str().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
        let config = ExperimentConfig { experiment, seed, outdir, family, params, tolerances, constants };
        config.validate_into(&mut errors);
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.validate_into(&mut errors);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    fn validate_into(&self, errors: &mut Vec<String>) {
        if !self.experiment.is_empty() && !EXPERIMENTS.contains(&self.experiment.as_str()) {
            errors.push(format!("experiment: unknown `{}`; valid names: {}", self.experiment, EXPERIMENTS.join(", ")));
        }
        let p = &self.params;
        let positive = [
            ("params.horizon", p.horizon),
            ("params.dt", p.dt),
            ("params.lambda", p.lambda),
            ("params.c0_constant", p.c0_constant),
            ("params.radius", p.radius),
            ("params.b", p.b),
            ("params.t_star", p.t_star),
            ("family.radius", self.family.radius),
            ("family.c0", self.family.c0),
        ];
        for (key, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    errors.push(format!("{key}: must be positive, got {v}"));
                }
            }
        }
        let counts = [
            ("params.paths", p.paths),
            ("params.budget", p.budget),
            ("params.samples", p.samples),
            ("params.record_every", p.record_every),
            ("params.directions", p.directions),
            ("params.trials", p.trials),
            ("family.dim", self.family.dim),
        ];
        for (key, v) in counts {
            if v == Some(0) {
                errors.push(format!("{key}: must be at least 1"));
            }
        }
        if let (Some(dt), Some(t)) = (p.dt, p.horizon) {
            if dt > t {
                errors.push(format!("params.dt: {dt} exceeds params.horizon {t}"));
            }
        }
        if let Some(l) = p.lambda {
            if !(l > 1.0) {
                errors.push(format!("params.lambda: must exceed 1, got {l}"));
            }
        }
        if let Some(c1) = p.c1 {
            if !(c1 > 0.0 && c1 <= 1.0) {
                errors.push(format!("params.c1: must lie in (0,1], got {c1}"));
            }
        }
        if let Some(t) = p.t_star {
            if t > 1.0 {
                errors.push(format!("params.t_star: must lie in (0,1], got {t}"));
            }
        }
        if let Some(eps) = &p.epsilons {
            // Slicing radii may exceed the body, so its grid is only required positive.
            let slicing = self.experiment == "slicing";
            if eps.is_empty() {
                errors.push("params.epsilons: must be nonempty".into());
            }
            for e in eps {
                if !(*e > 0.0 && (slicing || *e < 1.0)) {
                    let range = if slicing { "positive" } else { "in (0,1)" };
                    errors.push(format!("params.epsilons: {e} is not {range}"));
                }
            }
        }
        if let Some(ps) = &p.ps {
            if ps.iter().any(|v| !(*v >= 2.0)) {
                errors.push("params.ps: every exponent must be at least 2".into());
            }
        }
        if let Some(pm) = p.p_max {
            if pm < 2 || pm % 2 != 0 {
                errors.push(format!("params.p_max: must be an even integer ≥ 2, got {pm}"));
            }
        }
        if let Some(b) = &p.backend {
            if Backend::parse(b).is_none() {
                errors.push(format!("params.backend: unknown `{b}`; valid: closed_form, quadrature, sampling"));
            }
        }
        if let Some(dims) = &p.dims {
            if dims.is_empty() || dims.contains(&0) {
                errors.push("params.dims: dimensions must be positive".into());
            }
        }
        if let Some(kind) = &self.family.kind {
            let known = KindTag::parse(kind).is_some_and(|t| t != KindTag::Transformed)
                || ["zoo", "polytope"].contains(&kind.as_str());
            if !known {
                errors.push(format!(
                    "family.kind: unknown `{kind}`; valid: gaussian, uniform_cube, uniform_ball, uniform_simplex, product_laplace, zoo, polytope"
                ));
            }
        }
        if let Some(t) = &self.family.transform {
            if !["none", "symmetrize", "restrict", "reduce", "diagonal"].contains(&t.as_str()) {
                errors.push(format!("family.transform: unknown `{t}`; valid: none, symmetrize, restrict, reduce, diagonal"));
            }
            if t == "restrict" && self.family.radius.is_none() {
                errors.push("family.radius: required by transform `restrict`".into());
            }
            if t == "diagonal" {
                match &self.family.diagonal {
                    None => errors.push("family.diagonal: required by transform `diagonal`".into()),
                    Some(d) if self.family.dim.is_some_and(|n| n != d.len()) => {
                        errors.push("family.diagonal: length must equal family.dim".into())
                    }
                    Some(d) if d.iter().any(|v| *v == 0.0) => errors.push("family.diagonal: entries must be nonzero".into()),
                    _ => {}
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.family.dim.unwrap_or(2)
    }

    pub fn kind(&self) -> &str {
        self.family.kind.as_deref().unwrap_or("gaussian")
    }

    /// The configured family in dimension `n`, with its transform applied.
    pub fn family_at(&self, n: usize) -> Result<LogConcaveFamily> {
        let tag = KindTag::parse(self.kind())
            .ok_or_else(|| Error::InvalidArgument(format!("`{}` is not a single family", self.kind())))?;
        let base = LogConcaveFamily::from_tag(tag, n)?;
        self.transformed(base)
    }

    pub fn transformed(&self, base: LogConcaveFamily) -> Result<LogConcaveFamily> {
        let n = base.dim();
        Ok(match self.family.transform.as_deref().unwrap_or("none") {
            "none" => base,
            "symmetrize" => LogConcaveFamily::symmetrized(&base),
            "restrict" => LogConcaveFamily::restricted(&base, self.family.radius.unwrap_or(f64::INFINITY))?,
            "reduce" => {
                let c0 = self.family.c0.unwrap_or(self.constants.c0);
                reduction::reduce(&base, c0, crate::rng::derive_seed(self.seed, &[crate::rng::tag::EXPERIMENT]))?.0
            }
            "diagonal" => {
                let d = self.family.diagonal.clone().unwrap_or_else(|| vec![1.0; n]);
                if d.len() != n {
                    return Err(Error::InvalidArgument("diagonal length must equal the dimension".into()));
                }
                LogConcaveFamily::affine(&base, DMatrix::from_diagonal(&DVector::from_vec(d)), DVector::zeros(n))?
            }
            other => return Err(Error::InvalidArgument(format!("unknown transform `{other}`"))),
        })
    }

    /// The configured family, or every base family for kind `zoo`.
    pub fn families(&self, dims: &[usize]) -> Result<Vec<LogConcaveFamily>> {
        let mut out = Vec::new();
        for &n in dims {
            if self.kind() == "zoo" {
                for base in LogConcaveFamily::zoo(n) {
                    out.push(self.transformed(base)?);
                }
            } else {
                out.push(self.family_at(n)?);
            }
        }
        Ok(out)
    }

    /// Serialized config, the input of the content hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"martingale\"\nseed = 3\n[family]\nkind = \"cube\"\ndim = 4\n[params]\nT = 0.5\npaths = 8\n[tolerances]\nmartingale_sigmas = 5\n",
        )
        .unwrap();
        assert_eq!(c.params.horizon, Some(0.5));
        assert_eq!(c.tolerances.martingale_sigmas, 5.0);
        assert_eq!(c.family_at(4).unwrap().name(), "uniform_cube");
    }

    #[test]
    fn lists_every_offending_key() {
        let err = ExperimentConfig::from_toml_str(
            "experiment = \"nope\"\nbogus = 1\n[params]\ndt = -1\nwat = 2\n[tolerances]\nzzz = 1\n",
        )
        .unwrap_err();
        let Error::Config(list) = err else { panic!("expected a config error") };
        let joined = list.join("\n");
        for needle in ["bogus", "params.wat", "tolerances.zzz", "params.dt", "valid names"] {
            assert!(joined.contains(needle), "missing {needle} in {joined}");
        }
    }

    #[test]
    fn json_configs_are_accepted() {
        let c = ExperimentConfig::from_json_str(r#"{"experiment": "bounds", "seed": 1, "params": {"b": 2}}"#).unwrap();
        assert_eq!(c.params.b, Some(2.0));
    }
}
