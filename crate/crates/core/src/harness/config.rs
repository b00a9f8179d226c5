//! Experiment configuration files (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::opinf::Method;
use crate::pde::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Burgers,
    Kse,
}

impl Problem {
    /// Initial-condition parameter names, in sampling order.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            Problem::Burgers => &["amplitude", "frequency", "phase"],
            Problem::Kse => &["a", "b"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    ExactRhs,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

/// Explicit training parameter lists; the training set is their Cartesian
/// product, first parameter outermost.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingIcs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

impl TrainingIcs {
    fn values(&self, name: &str) -> Option<Vec<f64>> {
        match name {
            "amplitude" => self.amplitude.clone(),
            "frequency" => self.frequency.as_ref().map(|v| v.iter().map(|&f| f as f64).collect()),
            "phase" => self.phase.clone(),
            "a" => self.a.clone(),
            "b" => self.b.clone(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Inside,
    Outside,
}

/// Distribution of one parameter: uniform over a union of intervals
/// (length-weighted) or uniform over a finite set of choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSampler {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<f64>>,
}

impl ParamSampler {
    fn validate(&self, name: &str) -> Result<()> {
        match (&self.intervals, &self.choices) {
            (Some(iv), None) => {
                if iv.is_empty() || iv.iter().any(|[lo, hi]| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                    return Err(Error::Config(format!("`{name}`: intervals must be nonempty with lo < hi")));
                }
            }
            (None, Some(c)) => {
                if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("`{name}`: choices must be a nonempty list")));
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "`{name}`: give exactly one of `intervals` or `choices`"
                )))
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if let Some(c) = &self.choices {
            return c[rng.random_range(0..c.len())];
        }
        let iv = self.intervals.as_ref().expect("validated");
        let total: f64 = iv.iter().map(|[lo, hi]| hi - lo).sum();
        let mut u = rng.random::<f64>() * total;
        for [lo, hi] in iv {
            if u < hi - lo {
                return lo + u;
            }
            u -= hi - lo;
        }
        let [_, hi] = iv[iv.len() - 1];
        hi
    }

    /// Smallest and largest attainable value.
    fn hull(&self) -> (f64, f64) {
        let vals: Vec<f64> = match (&self.intervals, &self.choices) {
            (Some(iv), _) => iv.iter().flatten().copied().collect(),
            (_, Some(c)) => c.clone(),
            _ => vec![],
        };
        vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestIcs {
    pub name: String,
    pub count: usize,
    pub seed: u64,
    pub region: Region,
    pub params: BTreeMap<String, ParamSampler>,
}

/// Autocorrelation settings; omit the section to skip statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticsConfig {
    pub k_max: usize,
    #[serde(default)]
    pub burn_in: usize,
    /// Reduced dimensions whose averaged autocorrelation curves are written.
    pub autocorr_r: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub mu: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub final_time: f64,
    pub stride: usize,
    pub scheme: Scheme,
    pub r_max: usize,
    pub r_list: Vec<usize>,
    pub method_list: Vec<Method>,
    #[serde(default)]
    pub ridge: f64,
    pub derivative_mode: DerivativeMode,
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub training_ics: TrainingIcs,
    #[serde(default)]
    pub test_ics: Vec<TestIcs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistics: Option<StatisticsConfig>,
}

/// One initial condition: named parameter values in sampling order.
#[derive(Debug, Clone, PartialEq)]
pub struct IcParams(pub Vec<(String, f64)>);

impl IcParams {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.0.iter().cloned().collect()
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.dt > 0.0) || !(self.final_time > 0.0) {
            return bad("dt and T must be positive".into());
        }
        let steps = self.final_time / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!("T = {} is not a whole number of steps of {}", self.final_time, self.dt));
        }
        if self.stride == 0 || steps.round() as usize % self.stride != 0 {
            return bad(format!("stride {} must be >= 1 and divide the step count", self.stride));
        }
        if self.grid.n < 4 || !(self.grid.length > 0.0) {
            return bad("grid needs n >= 4 and L > 0".into());
        }
        if self.problem == Problem::Kse && self.grid.n < 6 {
            return bad("KSE grid needs n >= 6".into());
        }
        if self.r_max == 0 || self.r_list.is_empty() || self.r_list.iter().any(|&r| r == 0 || r > self.r_max) {
            return bad(format!("r_list must be nonempty with entries in 1..={}", self.r_max));
        }
        if self.r_max > self.grid.n {
            return bad("r_max exceeds the state dimension".into());
        }
        let mut methods = self.method_list.clone();
        methods.sort();
        methods.dedup();
        if methods.is_empty() || methods.len() != self.method_list.len() {
            return bad("method_list must be nonempty without repeats".into());
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge must be >= 0".into());
        }

        let train = self.training_params()?;
        if train.len() * self.snapshots_per_ic() < self.r_max {
            return bad("fewer training snapshots than r_max".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for set in &self.test_ics {
            if set.name == "train" || !names.insert(set.name.as_str()) {
                return bad(format!("test set name `{}` is reserved or repeated", set.name));
            }
            if set.name.is_empty() || !set.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return bad(format!("test set name `{}` must be alphanumeric", set.name));
            }
            if set.count == 0 {
                return bad(format!("test set `{}` has count 0", set.name));
            }
            self.check_sampler(set)?;
        }
        if let Some(st) = &self.statistics {
            if st.burn_in + st.k_max >= self.snapshots_per_ic() {
                return bad(format!(
                    "statistics need burn_in + k_max < {} stored snapshots",
                    self.snapshots_per_ic()
                ));
            }
            if st.autocorr_r.iter().any(|r| !self.r_list.contains(r)) {
                return bad("statistics.autocorr_r must be a subset of r_list".into());
            }
        }
        Ok(())
    }

    fn check_sampler(&self, set: &TestIcs) -> Result<()> {
        let expected: Vec<&str> = self.problem.parameters().to_vec();
        let given: Vec<&str> = set.params.keys().map(String::as_str).collect();
        let mut sorted = expected.clone();
        sorted.sort();
        if given != sorted {
            return Err(Error::Config(format!(
                "test set `{}` must specify exactly the parameters {expected:?}",
                set.name
            )));
        }
        for name in expected {
            let s = &set.params[name];
            s.validate(name)?;
            let train = self.training_ics.values(name).expect("validated by training_params");
            let (tlo, thi) = train.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let (lo, hi) = s.hull();
            let ok = match set.region {
                Region::Inside => lo >= tlo && hi <= thi,
                Region::Outside => match (&s.intervals, &s.choices) {
                    (Some(iv), _) => iv.iter().all(|[a, b]| *b <= tlo || *a >= thi),
                    (_, Some(c)) => c.iter().all(|v| *v < tlo || *v > thi),
                    _ => false,
                },
            };
            if !ok {
                return Err(Error::Config(format!(
                    "test set `{}`: `{name}` range is not {:?} the training range [{tlo}, {thi}]",
                    set.name, set.region
                )));
            }
            if name == "frequency" {
                let whole = |v: f64| v >= 1.0 && v.fract() == 0.0;
                if s.intervals.is_some() || !s.choices.as_ref().unwrap().iter().all(|&v| whole(v)) {
                    return Err(Error::Config("frequency must be sampled from integer choices >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Stored columns per trajectory, including the initial state.
    pub fn snapshots_per_ic(&self) -> usize {
        (self.final_time / self.dt).round() as usize / self.stride + 1
    }

    pub fn training_params(&self) -> Result<Vec<IcParams>> {
        let mut lists = Vec::new();
        for &name in self.problem.parameters() {
            let v = self.training_ics.values(name).ok_or_else(|| {
                Error::Config(format!("training_ics.{name} is required for {:?}", self.problem))
            })?;
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("training_ics.{name} must be a nonempty list")));
            }
            lists.push((name, v));
        }
        let others: Vec<&str> = ["amplitude", "frequency", "phase", "a", "b"]
            .into_iter()
            .filter(|n| !self.problem.parameters().contains(n))
            .collect();
        if let Some(n) = others.iter().find(|n| self.training_ics.values(n).is_some()) {
            return Err(Error::Config(format!("training_ics.{n} does not apply to {:?}", self.problem)));
        }
        if self.training_ics.frequency.as_ref().is_some_and(|f| f.contains(&0)) {
            return Err(Error::Config("frequencies must be >= 1".into()));
        }
        let mut out = vec![IcParams(Vec::new())];
        for (name, values) in lists {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.0.push((name.to_string(), v));
                        q
                    })
                })
                .collect();
        }
        Ok(out)
    }

    /// Parameters of test IC `index` of `set`. Each draw uses its own stream
    /// of a generator keyed by the set's seed, so draws do not depend on count.
    pub fn test_params(&self, set: &TestIcs, index: usize) -> IcParams {
        let mut rng = ChaCha8Rng::seed_from_u64(set.seed);
        rng.set_stream(index as u64);
        IcParams(
            self.problem
                .parameters()
                .iter()
                .map(|&name| (name.to_string(), set.params[name].sample(&mut rng)))
                .collect(),
        )
    }

    pub fn test_set(&self, name: &str) -> Option<&TestIcs> {
        self.test_ics.iter().find(|s| s.name == name)
    }
}

pub const BURGERS: &str = include_str!("../../configs/burgers.toml");
pub const KSE_DESK: &str = include_str!("../../configs/kse_desk.toml");
pub const KSE_FULL: &str = include_str!("../../configs/kse_full.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Minutes on a laptop.
    Desk,
    /// Full-size runs; the KSE setup takes hours.
    Paper,
}

/// Checked-in configuration for a problem and profile. The Burgers' setup is
/// already desk-sized, so both profiles share it.
pub fn builtin_config(problem: Problem, profile: Profile) -> ExperimentConfig {
    let text = match (problem, profile) {
        (Problem::Burgers, _) => BURGERS,
        (Problem::Kse, Profile::Desk) => KSE_DESK,
        (Problem::Kse, Profile::Paper) => KSE_FULL,
    };
    ExperimentConfig::from_toml(text).expect("built-in configs are valid")
}
