//! Experiment harness: configuration, matrix files, manifests and the
//! simulate / train / evaluate / reproduce pipeline.

pub mod config;
pub mod csv;
pub mod manifest;
pub mod matrix_io;
pub mod pipeline;

use std::path::PathBuf;

pub use config::{builtin_config, ExperimentConfig, Problem, Profile};
pub use manifest::RunManifest;
pub use pipeline::{run_all, run_evaluate, run_simulate, run_train, EvalScope, Layout};

use crate::error::{Error, Result};

/// Data sets behind the published figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    BurgersError,
    BurgersViolation,
    KseAutocorr,
    KseNace,
    KseViolation,
}

impl Figure {
    pub const ALL: [Figure; 5] =
        [Figure::BurgersError, Figure::BurgersViolation, Figure::KseAutocorr, Figure::KseNace, Figure::KseViolation];

    pub fn name(self) -> &'static str {
        match self {
            Figure::BurgersError => "burgers-error",
            Figure::BurgersViolation => "burgers-violation",
            Figure::KseAutocorr => "kse-autocorr",
            Figure::KseNace => "kse-nace",
            Figure::KseViolation => "kse-violation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn problem(self) -> Problem {
        match self {
            Figure::BurgersError | Figure::BurgersViolation => Problem::Burgers,
            _ => Problem::Kse,
        }
    }

    fn scope(self) -> EvalScope {
        match self {
            Figure::BurgersViolation | Figure::KseViolation => EvalScope { sets: None, trajectories: false },
            _ => EvalScope::default(),
        }
    }

    /// `(figure file stem, source table)` pairs.
    fn tables(self, cfg: &ExperimentConfig) -> Vec<(String, String)> {
        let mut sets = vec!["train".to_string()];
        sets.extend(cfg.test_ics.iter().map(|s| s.name.clone()));
        let name = self.name();
        match self {
            Figure::BurgersViolation | Figure::KseViolation => vec![(name.into(), "violation".into())],
            Figure::BurgersError => {
                sets.iter().map(|s| (format!("{name}_{s}"), format!("state_error_{s}"))).collect()
            }
            Figure::KseNace => sets.iter().map(|s| (format!("{name}_{s}"), format!("nace_{s}"))).collect(),
            Figure::KseAutocorr => {
                let rs = cfg.statistics.as_ref().map(|s| s.autocorr_r.clone()).unwrap_or_default();
                sets.iter()
                    .flat_map(|s| rs.iter().map(move |r| (format!("{name}_{s}_r{r}"), format!("autocorr_{s}_r{r}"))))
                    .collect()
            }
        }
    }

    fn axes(self) -> &'static str {
        match self {
            Figure::BurgersError => {
                "x: reduced dimension r. y: relative state error, the mean over trajectories of \
                 ‖X − V_r X̄‖²_F / ‖X‖²_F, one column per method. One file per trajectory set \
                 (train and each test set). `inf` marks a reduced model that blew up."
            }
            Figure::BurgersViolation | Figure::KseViolation => {
                "x: reduced dimension r. y: energy-preservation constraint violation \
                 Σ_ijk |ĥ_ijk + ĥ_jik + ĥ_kji| of the quadratic operator (log scale), one column \
                 per method."
            }
            Figure::KseAutocorr => {
                "x: lag in stored samples (`lag`) or model time (`time`). y: spatially averaged \
                 autocorrelation ρ(k) = c_k / c_0, averaged over trajectories; `full` is the \
                 full-order model, the other columns are reduced models reconstructed in the full \
                 space. One file per trajectory set and reduced dimension."
            }
            Figure::KseNace => {
                "x: reduced dimension r. y: normalized autocorrelation error, the mean over \
                 trajectories of ‖ρ − ρ̄‖² / ‖ρ‖² over the lag grid, one column per method. One \
                 file per trajectory set."
            }
        }
    }
}

/// Runs the full pipeline for `figure` with `cfg` and copies the relevant
/// tables to `figures/` next to a README describing the axes. Returns the
/// written figure files.
pub fn reproduce(figure: Figure, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    if cfg.problem != figure.problem() {
        return Err(Error::Config(format!("figure {} needs a {:?} config", figure.name(), figure.problem())));
    }
    run_all(cfg, &figure.scope())?;
    let layout = Layout::new(&cfg.output_dir);
    let dir = layout.figures();
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for (stem, table) in figure.tables(cfg) {
        let dst = dir.join(format!("{stem}.csv"));
        std::fs::copy(layout.table(&table), &dst)?;
        written.push(dst);
    }
    let files: Vec<String> = written
        .iter()
        .map(|p| format!("- `{}`", p.file_name().expect("file").to_string_lossy()))
        .collect();
    let readme = format!(
        "# {}\n\n{}\n\nFiles:\n{}\n\nValues carry 17 significant digits. Config hash: `{}`.\n",
        figure.name(),
        figure.axes(),
        files.join("\n"),
        cfg.sha256()
    );
    std::fs::write(dir.join("README.md"), readme)?;
    let mut m = RunManifest::open(&cfg.output_dir, &cfg.sha256())?;
    m.save(&cfg.output_dir)?;
    Ok(written)
}
