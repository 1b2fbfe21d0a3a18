#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::PathBuf;

use cama_core::attack::{AttackType, FlipLog, Method};
use cama_core::gnn::Arch;
use cama_harness::output::{flip_log_path, read_flip_log};
use cama_harness::{
    accuracy_from_logs, run, run_evasion, run_poison, train_models, ExperimentConfig, ExperimentData, HarnessError,
    Mode, ResultTable,
};

fn data_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Small, fast settings; the full protocol runs in the acceptance suite.
fn quick(mode: Mode, attack_type: AttackType, method: Method) -> ExperimentConfig {
    ExperimentConfig {
        data_root: data_root(),
        mode,
        attack_type,
        method,
        surrogate: (mode != Mode::Whitebox).then_some(Arch::Gcn),
        arch: if mode == Mode::Whitebox { Arch::Gcn } else { Arch::Gin0 },
        epochs: 15,
        hidden_dim: 16,
        num_layers: 3,
        epochs_mask: 5,
        ..Default::default()
    }
}

#[test]
fn identity_attack_keeps_accuracy() {
    let cfg = quick(Mode::Whitebox, AttackType::Structure, Method::None);
    let out = run(&cfg).unwrap();
    let row = out.row();
    assert_eq!(row.attacked_acc, row.clean_acc);
    assert_eq!(row.change, 0.0);
    assert_eq!(row.fold_attacked, row.fold_clean);
    assert!(out.logs.iter().all(|l| l.flips.is_empty() && !l.skipped));
}

#[test]
fn degenerate_transfer_reproduces_whitebox() {
    let white = quick(Mode::Whitebox, AttackType::Structure, Method::Cama);
    let data = ExperimentData::load(&white).unwrap();
    let gcn = train_models(&white, &data, Arch::Gcn).unwrap();
    let w = run_evasion(&white, &data, &gcn, &gcn).unwrap();
    let black = ExperimentConfig { mode: Mode::Blackbox, surrogate: Some(Arch::Gcn), allow_same_arch: true, ..white };
    // independently trained, but with identical seeds
    let gcn_again = train_models(&black, &data, Arch::Gcn).unwrap();
    let b = run_evasion(&black, &data, &gcn_again, &gcn_again).unwrap();
    let (wr, br) = (w.row(), b.row());
    assert_eq!((wr.clean_acc, wr.attacked_acc, &wr.fold_attacked), (br.clean_acc, br.attacked_acc, &br.fold_attacked));
    assert_eq!(w.logs.iter().map(|l| &l.flips).collect::<Vec<_>>(), b.logs.iter().map(|l| &l.flips).collect::<Vec<_>>());
}

#[test]
fn flip_logs_account_for_the_table() {
    for (ty, method) in [(AttackType::Structure, Method::CamaSubgraph), (AttackType::Feature, Method::Cama)] {
        let cfg = quick(Mode::Whitebox, ty, method);
        let out = run(&cfg).unwrap();
        let row = out.row();
        assert!(out.violations.is_empty(), "{:?}", out.violations);
        // each validation graph once per fold
        let mut ids: Vec<usize> = out.logs.iter().map(|l| l.graph_id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..188).collect::<Vec<_>>());
        let from_logs = accuracy_from_logs(&out.logs, cfg.folds);
        let mean = 100.0 * from_logs.iter().sum::<f64>() / cfg.folds as f64;
        assert!((mean - row.attacked_acc).abs() < 0.005 + 1e-9, "{mean} vs {}", row.attacked_acc);
        for (a, b) in from_logs.iter().zip(&row.fold_attacked) {
            assert!((100.0 * a - b).abs() < 0.005 + 1e-9);
        }
        assert!((row.change - (row.attacked_acc - row.clean_acc)).abs() < 1e-9);
        assert_eq!(row.graphs, 188);
        assert!(row.skipped > 0 && row.skipped < 188);
    }
}

#[test]
fn poisoning_protocol() {
    let mut cfg = quick(Mode::Poison, AttackType::Structure, Method::None);
    cfg.epochs = 8;
    let data = ExperimentData::load(&cfg).unwrap();
    let gcn = train_models(&cfg, &data, Arch::Gcn).unwrap();
    let gin = train_models(&cfg, &data, Arch::Gin0).unwrap();
    let none = run_poison(&cfg, &data, &gcn, &gin).unwrap();
    assert_eq!(none.row().fold_attacked, none.row().fold_clean);
    assert_eq!(none.row().fold_attacked.len(), 10);

    cfg.method = Method::Cama;
    let cama = run_poison(&cfg, &data, &gcn, &gin).unwrap();
    assert_eq!(cama.row().fold_attacked.len(), 10);
    assert!(cama.violations.is_empty());
    // every training graph is perturbed once per fold it trains in
    assert_eq!(cama.logs.len(), 188 * 9);
    assert!(cama.logs.iter().any(|l| !l.flips.is_empty()));
}

#[test]
fn outputs_are_written_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick(Mode::Whitebox, AttackType::Feature, Method::Degree);
    cfg.out = Some(dir.path().to_path_buf());
    let out = run(&cfg).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(ResultTable::from_csv(&csv).unwrap(), out.table);
    let json = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
    assert_eq!(ResultTable::from_json(&json).unwrap(), out.table);
    let resolved = ExperimentConfig::load(&dir.path().join("config.resolved.json")).unwrap();
    assert_eq!(resolved, cfg);
    assert!(dir.path().join("timing.json").exists());
    for log in &out.logs {
        let back: FlipLog = read_flip_log(&flip_log_path(dir.path(), log, false)).unwrap();
        assert_eq!(&back, log);
    }
    assert!(out.row().mean_avg_degree.is_some());
}

#[test]
fn results_match_the_shipped_schema() {
    let schema: serde_json::Value = serde_json::from_str(include_str!("../schema/results.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let out = run(&quick(Mode::Whitebox, AttackType::Structure, Method::Random)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&out.table.to_json().unwrap()).unwrap();
    assert!(validator.is_valid(&json));
    let mut broken = json.clone();
    broken["rows"][0]["method"] = "pgd".into();
    assert!(!validator.is_valid(&broken));
    assert!(validator.is_valid(&serde_json::from_str(&ResultTable::new().to_json().unwrap()).unwrap()));
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let cfg = ExperimentConfig { data_root: PathBuf::from("/nonexistent"), ..Default::default() };
    let err = run(&cfg).unwrap_err();
    assert!(matches!(err, HarnessError::DatasetMissing(_)) && err.is_usage());
}
