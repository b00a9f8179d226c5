//! Simulate → train → evaluate stages over an output directory.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::json;

use super::config::{DerivativeMode, ExperimentConfig, IcParams, Problem};
use super::csv::{fmt_value, write_csv};
use super::manifest::RunManifest;
use super::matrix_io::{load_basis, load_operators, load_snapshots, save_basis, save_operators, save_snapshots};
use crate::error::{Error, Result};
use crate::metrics::{field_autocorrelation, AutocorrSeries, Source, TrajectoryPair};
use crate::opinf::{
    assemble_lsq, ep_opinf, intrusive_reduce, kkt_diagnostics, standard_opinf, Method, ReducedModel,
};
use crate::pde::{
    assemble_burgers, assemble_kse, burgers_ic, kse_ic, simulate, simulate_states, Grid1D,
    QuadraticModel, SnapshotSet,
};
use crate::pod::{compute_pod, energy_lost, energy_retained, project, PodBasis};
use crate::tensor_ops::build_constraint_matrix;

/// File locations inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn snapshot(&self, index: usize) -> PathBuf {
        self.root.join("snapshots").join(format!("train_{index:03}.oimx"))
    }

    pub fn basis(&self) -> PathBuf {
        self.root.join("basis.oimx")
    }

    pub fn operators(&self, method: Method, r_max: usize) -> PathBuf {
        self.root.join("operators").join(format!("{}_r{r_max}.oimx", method.name()))
    }

    pub fn table(&self, name: &str) -> PathBuf {
        self.root.join("tables").join(format!("{name}.csv"))
    }

    pub fn figures(&self) -> PathBuf {
        self.root.join("figures")
    }
}

pub fn full_model(cfg: &ExperimentConfig) -> Result<QuadraticModel> {
    let grid = Grid1D::new(cfg.grid.n, cfg.grid.length)?;
    match cfg.problem {
        Problem::Burgers => assemble_burgers(&grid, cfg.mu),
        Problem::Kse => assemble_kse(&grid, cfg.mu),
    }
}

pub fn initial_condition(cfg: &ExperimentConfig, p: &IcParams) -> Result<DVector<f64>> {
    let grid = Grid1D::new(cfg.grid.n, cfg.grid.length)?;
    let get = |k: &str| p.get(k).ok_or_else(|| Error::Config(format!("missing IC parameter `{k}`")));
    match cfg.problem {
        Problem::Burgers => burgers_ic(&grid, get("amplitude")?, get("frequency")? as u32, get("phase")?),
        Problem::Kse => Ok(kse_ic(&grid, get("a")?, get("b")?)),
    }
}

fn label(set: &str, index: usize, p: &IcParams) -> String {
    let params: Vec<String> = p.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{set} IC #{index} ({})", params.join(", "))
}

fn full_trajectory(cfg: &ExperimentConfig, model: &QuadraticModel, p: &IcParams) -> Result<SnapshotSet> {
    let x0 = initial_condition(cfg, p)?;
    let mut s = simulate(model, &x0, cfg.dt, cfg.final_time, cfg.stride, cfg.scheme)?;
    s.ic_params = p.to_map();
    if cfg.derivative_mode == DerivativeMode::FiniteDifference {
        s = s.with_finite_difference_derivatives()?;
    }
    Ok(s)
}

fn finish_stage(cfg: &ExperimentConfig, stage: &str, start: Instant, diag: serde_json::Value) -> Result<()> {
    let root = &cfg.output_dir;
    let mut m = RunManifest::open(root, &cfg.sha256())?;
    m.timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
    m.diagnostics.insert(stage.to_string(), diag);
    m.save(root)
}

/// Integrates every training initial condition and writes one snapshot file
/// per trajectory.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<()> {
    let start = Instant::now();
    let layout = Layout::new(&cfg.output_dir);
    std::fs::create_dir_all(&layout.root)?;
    std::fs::write(layout.root.join("config.toml"), cfg.to_toml())?;
    let model = full_model(cfg)?;
    let params = cfg.training_params()?;
    params.par_iter().enumerate().try_for_each(|(i, p)| {
        let wrap = |e: Error| Error::Trajectory { label: label("train", i, p), source: Box::new(e) };
        let s = full_trajectory(cfg, &model, p).map_err(wrap)?;
        save_snapshots(&layout.snapshot(i), &s)
    })?;
    finish_stage(
        cfg,
        "simulate",
        start,
        json!({ "trajectories": params.len(), "snapshots_per_trajectory": cfg.snapshots_per_ic() }),
    )
}

pub fn load_training(cfg: &ExperimentConfig) -> Result<Vec<SnapshotSet>> {
    let layout = Layout::new(&cfg.output_dir);
    let count = cfg.training_params()?.len();
    (0..count).map(|i| load_snapshots(&layout.snapshot(i))).collect()
}

/// POD basis of size `r_max` plus one operator file per method, all fitted at
/// `r_max`.
pub fn run_train(cfg: &ExperimentConfig) -> Result<()> {
    let start = Instant::now();
    let layout = Layout::new(&cfg.output_dir);
    let snapshots = load_training(cfg)?;
    let basis = compute_pod(&snapshots, cfg.r_max)?;
    save_basis(&layout.basis(), &basis)?;

    let sigma = &basis.singular_values;
    let rows = (1..=sigma.len())
        .map(|r| {
            Ok(vec![
                r.to_string(),
                fmt_value(energy_lost(sigma, r)?),
                fmt_value(energy_retained(sigma, r)?),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(&layout.table("energy"), &["r", "energy_lost", "energy_retained"], &rows)?;

    let needs_data = cfg.method_list.iter().any(|&m| m != Method::Intrusive);
    let sys = if needs_data { Some(assemble_lsq(&project(&basis, &snapshots, cfg.r_max)?)?) } else { None };
    let mut diag = serde_json::Map::new();
    for &method in &cfg.method_list {
        let (model, extra) = match method {
            Method::Intrusive => (intrusive_reduce(&full_model(cfg)?, &basis, cfg.r_max)?, json!(null)),
            Method::OpInf => (standard_opinf(sys.as_ref().expect("built"), cfg.ridge)?, json!(null)),
            Method::EpOpInf => {
                let sys = sys.as_ref().expect("built");
                let c = build_constraint_matrix(cfg.r_max)?;
                let model = ep_opinf(sys, &c, cfg.ridge)?;
                let kkt = kkt_diagnostics(&model, sys, &c)?;
                (model, serde_json::to_value(kkt).expect("report serializes"))
            }
        };
        save_operators(&layout.operators(method, cfg.r_max), &model)?;
        let d = &model.diagnostics;
        diag.insert(
            method.name().to_string(),
            json!({
                "residual_norm": d.residual_norm,
                "condition": d.condition,
                "constraint_residual": d.constraint_residual,
                "ep_violation": model.ep_violation(),
                "ridge": d.ridge,
                "solver": d.solver,
                "kkt": extra,
            }),
        );
    }
    diag.insert("energy_retained_r_max".into(), json!(energy_retained(sigma, cfg.r_max)?));
    finish_stage(cfg, "train", start, serde_json::Value::Object(diag))
}

/// What `run_evaluate` computes.
#[derive(Debug, Clone)]
pub struct EvalScope {
    /// Trajectory sets to evaluate (`train` and test-set names); `None` = all.
    pub sets: Option<Vec<String>>,
    /// Integrate reduced models; without it only the violation table is made.
    pub trajectories: bool,
}

impl Default for EvalScope {
    fn default() -> Self {
        Self { sets: None, trajectories: true }
    }
}

/// Reduced models for every method and every `r` in `r_list`, extracted from
/// the stored `r_max` fits.
pub fn load_models(cfg: &ExperimentConfig) -> Result<BTreeMap<(Method, usize), ReducedModel>> {
    let layout = Layout::new(&cfg.output_dir);
    let mut out = BTreeMap::new();
    for &method in &cfg.method_list {
        let full = load_operators(&layout.operators(method, cfg.r_max), method)?;
        if full.r() != cfg.r_max {
            return Err(Error::Format(format!("{method} operators have r = {}", full.r())));
        }
        for &r in &cfg.r_list {
            out.insert((method, r), full.submodel(r)?);
        }
    }
    Ok(out)
}

/// Per-trajectory results: relative errors and (optional) autocorrelations,
/// `None` where the reduced model blew up.
struct TrajectoryResult {
    errors: BTreeMap<(Method, usize), Option<f64>>,
    full_rho: Option<AutocorrSeries>,
    reduced_rho: BTreeMap<(Method, usize), Option<AutocorrSeries>>,
}

fn evaluate_trajectory(
    cfg: &ExperimentConfig,
    basis: &PodBasis,
    models: &BTreeMap<(Method, usize), ReducedModel>,
    full: &DMatrix<f64>,
) -> Result<TrajectoryResult> {
    let stats = cfg.statistics.as_ref();
    let x0 = full.column(0).into_owned();
    let burn = stats.map_or(0, |s| s.burn_in);
    let full_rho = match stats {
        Some(s) => Some(field_autocorrelation(&full.columns(burn, full.ncols() - burn).into_owned(), s.k_max)?),
        None => None,
    };
    let mut res = TrajectoryResult { errors: BTreeMap::new(), full_rho, reduced_rho: BTreeMap::new() };
    for (&(method, r), rom) in models {
        let v = basis.leading(r)?;
        let xhat0 = v.tr_mul(&x0);
        let traj = match simulate_states(&rom.to_model(), &xhat0, cfg.dt, cfg.final_time, cfg.stride, cfg.scheme) {
            Ok(t) => Some(t),
            Err(Error::BlowUp { .. }) => None,
            Err(e) => return Err(e),
        };
        let err = match &traj {
            Some(t) => Some(TrajectoryPair::new(full, t, &v)?.relative_error()?),
            None => None,
        };
        res.errors.insert((method, r), err);
        if let Some(s) = stats {
            let rho = match &traj {
                Some(t) => {
                    let recon = &v * t.columns(burn, t.ncols() - burn);
                    match field_autocorrelation(&recon, s.k_max) {
                        Ok(a) => Some(a.with_source(Source::Reduced)),
                        Err(Error::ConstantSeries) => None,
                        Err(e) => return Err(e),
                    }
                }
                None => None,
            };
            res.reduced_rho.insert((method, r), rho);
        }
    }
    Ok(res)
}

fn mean_or_inf(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        match v {
            Some(x) if x.is_finite() => sum += x,
            _ => return f64::INFINITY,
        }
        count += 1;
    }
    sum / count as f64
}

fn method_header(cfg: &ExperimentConfig, first: &str) -> Vec<String> {
    std::iter::once(first.to_string()).chain(cfg.method_list.iter().map(|m| m.name().to_string())).collect()
}

/// Writes `violation.csv` and, per trajectory set, `state_error_<set>.csv`,
/// plus `nace_<set>.csv` and `autocorr_<set>_r<r>.csv` when statistics are
/// configured.
pub fn run_evaluate(cfg: &ExperimentConfig, scope: &EvalScope) -> Result<()> {
    let start = Instant::now();
    let layout = Layout::new(&cfg.output_dir);
    let basis = load_basis(&layout.basis())?;
    if basis.r_max() != cfg.r_max {
        return Err(Error::Format(format!("basis has {} modes, config r_max = {}", basis.r_max(), cfg.r_max)));
    }
    let models = load_models(cfg)?;

    let header: Vec<String> = method_header(cfg, "r");
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = cfg
        .r_list
        .iter()
        .map(|&r| {
            std::iter::once(r.to_string())
                .chain(cfg.method_list.iter().map(|&m| fmt_value(models[&(m, r)].ep_violation())))
                .collect()
        })
        .collect();
    write_csv(&layout.table("violation"), &header_refs, &rows)?;

    let mut diag = serde_json::Map::new();
    if scope.trajectories {
        let model = full_model(cfg)?;
        let mut names = vec!["train".to_string()];
        names.extend(cfg.test_ics.iter().map(|s| s.name.clone()));
        if let Some(only) = &scope.sets {
            if let Some(bad) = only.iter().find(|s| !names.contains(s)) {
                return Err(Error::Config(format!("unknown trajectory set `{bad}`")));
            }
            names.retain(|n| only.contains(n));
        }
        for name in names {
            let results = evaluate_set(cfg, &name, &model, &basis, &models)?;
            let blowups = write_set_tables(cfg, &layout, &name, &results)?;
            diag.insert(name, json!({ "trajectories": results.len(), "rom_blowups": blowups }));
        }
    }
    finish_stage(cfg, "evaluate", start, serde_json::Value::Object(diag))
}

fn evaluate_set(
    cfg: &ExperimentConfig,
    name: &str,
    model: &QuadraticModel,
    basis: &PodBasis,
    models: &BTreeMap<(Method, usize), ReducedModel>,
) -> Result<Vec<TrajectoryResult>> {
    let params: Vec<IcParams> = match cfg.test_set(name) {
        Some(set) => (0..set.count).map(|i| cfg.test_params(set, i)).collect(),
        None => cfg.training_params()?,
    };
    let layout = Layout::new(&cfg.output_dir);
    params
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let wrap = |e: Error| Error::Trajectory { label: label(name, i, p), source: Box::new(e) };
            let states = if name == "train" {
                load_snapshots(&layout.snapshot(i))?.states
            } else {
                full_trajectory(cfg, model, p).map_err(wrap)?.states
            };
            evaluate_trajectory(cfg, basis, models, &states).map_err(wrap)
        })
        .collect()
}

fn write_set_tables(
    cfg: &ExperimentConfig,
    layout: &Layout,
    name: &str,
    results: &[TrajectoryResult],
) -> Result<usize> {
    let header = method_header(cfg, "r");
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let blowups = results.iter().flat_map(|t| t.errors.values()).filter(|e| e.is_none()).count();

    let table = |f: &dyn Fn(Method, usize) -> f64| -> Vec<Vec<String>> {
        cfg.r_list
            .iter()
            .map(|&r| {
                std::iter::once(r.to_string())
                    .chain(cfg.method_list.iter().map(|&m| fmt_value(f(m, r))))
                    .collect()
            })
            .collect()
    };
    let errors = table(&|m, r| mean_or_inf(results.iter().map(|t| t.errors[&(m, r)])));
    write_csv(&layout.table(&format!("state_error_{name}")), &header, &errors)?;

    let Some(stats) = &cfg.statistics else {
        return Ok(blowups);
    };
    let nace_of = |m: Method, r: usize| {
        mean_or_inf(results.iter().map(|t| {
            let full = t.full_rho.as_ref().expect("statistics enabled");
            t.reduced_rho[&(m, r)]
                .as_ref()
                .and_then(|red| crate::metrics::nace(std::slice::from_ref(full), std::slice::from_ref(red)).ok())
        }))
    };
    write_csv(&layout.table(&format!("nace_{name}")), &header, &table(&nace_of))?;

    let lag_header = method_header(cfg, "full");
    let mut lag_header: Vec<&str> = lag_header.iter().map(String::as_str).collect();
    lag_header.splice(0..0, ["lag", "time"]);
    let sample_dt = cfg.dt * cfg.stride as f64;
    let avg = |get: &dyn Fn(&TrajectoryResult) -> Option<&AutocorrSeries>, k: usize| {
        mean_or_inf(results.iter().map(|t| get(t).map(|s| s.rho[k])))
    };
    for &r in &stats.autocorr_r {
        let rows: Vec<Vec<String>> = (0..=stats.k_max)
            .map(|k| {
                let mut row = vec![k.to_string(), fmt_value(k as f64 * sample_dt)];
                row.push(fmt_value(avg(&|t| t.full_rho.as_ref(), k)));
                for &m in &cfg.method_list {
                    row.push(fmt_value(avg(&|t| t.reduced_rho[&(m, r)].as_ref(), k)));
                }
                row
            })
            .collect();
        write_csv(&layout.table(&format!("autocorr_{name}_r{r}")), &lag_header, &rows)?;
    }
    Ok(blowups)
}

/// Runs all three stages.
pub fn run_all(cfg: &ExperimentConfig, scope: &EvalScope) -> Result<()> {
    run_simulate(cfg)?;
    run_train(cfg)?;
    run_evaluate(cfg, scope)
}

