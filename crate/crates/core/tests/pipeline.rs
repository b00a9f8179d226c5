mod common;

use std::collections::BTreeMap;
use std::path::Path;

use ep_opinf::harness::manifest::sha256_file;
use ep_opinf::harness::matrix_io::{load_basis, load_operators, load_snapshots};
use ep_opinf::harness::{
    builtin_config, run_all, run_simulate, run_train, EvalScope, ExperimentConfig, Layout, Problem, Profile,
    RunManifest,
};
use ep_opinf::{Error, Method};

fn tiny(dir: &Path, r_max: usize, methods: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&common::tiny_burgers_toml(&dir.join("out"), r_max, methods)).unwrap()
}

const ALL_METHODS: &str = r#""intrusive", "opinf", "ep-opinf""#;

fn files_on_disk(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                if rel != "manifest.json" {
                    out.push(rel);
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn full_pipeline_writes_complete_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 4, ALL_METHODS);
    run_all(&cfg, &EvalScope::default()).unwrap();
    let root = &cfg.output_dir;

    let text = std::fs::read_to_string(RunManifest::path(root)).unwrap();
    let m: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(m.config_sha256, cfg.sha256());
    assert_eq!(m.files.keys().cloned().collect::<Vec<_>>(), files_on_disk(root));
    for (rel, sum) in &m.files {
        assert_eq!(&sha256_file(&root.join(rel)).unwrap(), sum, "{rel}");
    }
    for stage in ["simulate", "train", "evaluate"] {
        assert!(m.timings.contains_key(stage));
    }

    let layout = Layout::new(root);
    for name in ["energy", "violation", "state_error_train", "state_error_test1"] {
        assert!(layout.table(name).exists(), "{name}");
    }
    let violation = std::fs::read_to_string(layout.table("violation")).unwrap();
    assert_eq!(violation.lines().next(), Some("r,intrusive,opinf,ep-opinf"));
    assert_eq!(violation.lines().count(), 1 + 4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sums: Vec<BTreeMap<String, String>> = [a.path(), b.path()]
        .iter()
        .map(|d| {
            let cfg = tiny(d, 3, ALL_METHODS);
            run_all(&cfg, &EvalScope::default()).unwrap();
            let m: RunManifest =
                serde_json::from_str(&std::fs::read_to_string(RunManifest::path(&cfg.output_dir)).unwrap()).unwrap();
            m.files.into_iter().filter(|(k, _)| k != "config.toml").collect()
        })
        .collect();
    assert!(!sums[0].is_empty());
    assert_eq!(sums[0], sums[1]);
}

#[test]
fn snapshot_files_have_one_column_per_stored_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 3, ALL_METHODS);
    run_simulate(&cfg).unwrap();
    let params = cfg.training_params().unwrap();
    assert_eq!(params.len(), 4);
    for i in 0..params.len() {
        let s = load_snapshots(&Layout::new(&cfg.output_dir).snapshot(i)).unwrap();
        assert_eq!(s.states.shape(), (64, 201));
        assert_eq!(s.derivatives.shape(), (64, 201));
        assert_eq!(s.stride, 1);
        assert_eq!(s.ic_params, params[i].to_map());
    }
    assert!(!Layout::new(&cfg.output_dir).snapshot(4).exists());
}

#[test]
fn zero_amplitude_gives_zero_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path(), 2, ALL_METHODS);
    cfg.training_ics.amplitude = Some(vec![0.0]);
    cfg.training_ics.frequency = Some(vec![3]);
    run_simulate(&cfg).unwrap();
    let s = load_snapshots(&Layout::new(&cfg.output_dir).snapshot(0)).unwrap();
    assert!(s.states.iter().all(|&v| v == 0.0));
    assert!(s.derivatives.iter().all(|&v| v == 0.0));
}

#[test]
fn intrusive_only_skips_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 3, r#""intrusive""#);
    run_simulate(&cfg).unwrap();
    run_train(&cfg).unwrap();
    let layout = Layout::new(&cfg.output_dir);
    assert!(layout.operators(Method::Intrusive, 3).exists());
    assert!(!layout.operators(Method::OpInf, 3).exists());
    assert!(!layout.operators(Method::EpOpInf, 3).exists());
    let m = RunManifest::open(&cfg.output_dir, &cfg.sha256()).unwrap();
    let train = m.diagnostics["train"].as_object().unwrap();
    assert!(train.contains_key("intrusive") && !train.contains_key("opinf"));
}

#[test]
fn ep_operators_at_r10_store_compact_quadratic_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 10, r#""ep-opinf""#);
    run_simulate(&cfg).unwrap();
    run_train(&cfg).unwrap();
    let layout = Layout::new(&cfg.output_dir);
    let m = load_operators(&layout.operators(Method::EpOpInf, 10), Method::EpOpInf).unwrap();
    assert_eq!(m.f_hat.entries().shape(), (10, 55));
    // Trailing modes are barely excited: badly conditioned data.
    assert!(m.ep_violation() <= 1e-12 * m.f_hat.entries().amax() * 55.0);
    let diag = RunManifest::open(&cfg.output_dir, &cfg.sha256()).unwrap().diagnostics;
    assert!(diag["train"]["ep-opinf"]["solver"].as_str().is_some());
    assert_eq!(load_basis(&layout.basis()).unwrap().r_max(), 10);
}

#[test]
fn train_without_snapshots_is_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 3, ALL_METHODS);
    let err = run_train(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
}

#[test]
fn evaluate_without_operators_is_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), 3, ALL_METHODS);
    run_simulate(&cfg).unwrap();
    let err = ep_opinf::harness::run_evaluate(&cfg, &EvalScope::default()).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
}

#[test]
fn burgers_outside_test_set_draws_outside_training_ranges() {
    let cfg = builtin_config(Problem::Burgers, Profile::Paper);
    let set = cfg.test_set("test2").unwrap();
    for i in 0..set.count {
        let p = cfg.test_params(set, i);
        let a = p.get("amplitude").unwrap();
        let f = p.get("frequency").unwrap();
        let phi = p.get("phase").unwrap();
        assert!((0.5..=0.8).contains(&a) || (1.2..=1.5).contains(&a), "A = {a}");
        assert!([4.0, 5.0, 6.0].contains(&f));
        assert!((0.25..=0.5).contains(&phi.abs()), "phase = {phi}");
    }
}

#[test]
fn shipped_configs_validate() {
    for (problem, profile) in [
        (Problem::Burgers, Profile::Paper),
        (Problem::Kse, Profile::Desk),
        (Problem::Kse, Profile::Paper),
    ] {
        let cfg = builtin_config(problem, profile);
        cfg.validate().unwrap();
        let round = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(round.sha256(), cfg.sha256());
    }
    let kse = builtin_config(Problem::Kse, Profile::Paper);
    assert_eq!(kse.r_max, 24);
    assert_eq!(kse.training_params().unwrap().len(), 9);
    assert_eq!(kse.snapshots_per_ic(), 3001);
    assert_eq!(kse.statistics.unwrap().autocorr_r, vec![9, 12, 20, 24]);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::tiny_burgers_toml(dir.path(), 3, ALL_METHODS) + "\nextra = 1\n";
    match ExperimentConfig::from_toml(&text) {
        Err(e @ Error::Config(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("expected config error, got {other:?}"),
    }
}
