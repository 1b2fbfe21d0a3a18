use std::path::PathBuf;
use std::time::Instant;

use cama_core::attack::{
    attack_graph, audit_log, avg_degree_selected, AttackType, AuditContext, Budget, FlipLog, Method,
};
use cama_core::gnn::{evaluate, load_checkpoint, predict, save_checkpoint, train, Arch, ModelParams};
use cama_core::graph::{load_tu_dataset, split_folds, Dataset, FoldSplit, Graph};
use serde::{Deserialize, Serialize};

use crate::config::{attack_seed, ExperimentConfig, Mode, Precision};
use crate::output::{flip_log_path, write_file, write_json};
use crate::results::{ResultRow, ResultTable};
use crate::HarnessError;

/// A dataset loaded at both precisions plus its fold split.
pub struct ExperimentData {
    pub ds32: Dataset<f32>,
    pub ds64: Dataset<f64>,
    pub folds: FoldSplit,
}

impl ExperimentData {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let dir = cfg.dataset_dir();
        if !dir.is_dir() {
            return Err(HarnessError::DatasetMissing(dir));
        }
        let ds64 = load_tu_dataset::<f64>(&dir, &cfg.dataset, cfg.features)?;
        let ds32 = load_tu_dataset::<f32>(&dir, &cfg.dataset, cfg.features)?;
        let folds = split_folds(&ds64.labels(), cfg.folds, cfg.seed)?;
        Ok(Self { ds32, ds64, folds })
    }
}

/// One trained model per fold with its clean validation accuracy.
#[derive(Debug, Clone)]
pub struct FoldModels {
    pub arch: Arch,
    pub params: Vec<ModelParams<f64>>,
    pub fold_accuracy: Vec<f64>,
    pub train_seconds: f64,
}

impl FoldModels {
    pub fn mean_accuracy(&self) -> f64 {
        self.fold_accuracy.iter().sum::<f64>() / self.fold_accuracy.len() as f64
    }
}

fn checkpoint_path(cfg: &ExperimentConfig, dir: &std::path::Path, arch: Arch, fold: usize) -> PathBuf {
    let precision = match cfg.train_precision {
        Precision::F32 => "f32",
        Precision::F64 => "f64",
    };
    dir.join(format!(
        "{}_{arch}_seed{}_folds{}_ep{}_lr{}_h{}_l{}_{precision}_fold{fold}.json",
        cfg.dataset, cfg.seed, cfg.folds, cfg.epochs, cfg.lr, cfg.hidden_dim, cfg.num_layers
    ))
}

/// Trains `arch` on the given training graphs at the configured precision
/// and returns f64 parameters.
fn fit(
    cfg: &ExperimentConfig,
    arch: Arch,
    fold: usize,
    graphs32: &[&Graph<f32>],
    graphs64: &[&Graph<f64>],
    num_classes: usize,
) -> Result<ModelParams<f64>, HarnessError> {
    let tc = cfg.train(fold);
    Ok(match cfg.train_precision {
        Precision::F32 => train(arch, graphs32, num_classes, &tc)?.params.cast(),
        Precision::F64 => train(arch, graphs64, num_classes, &tc)?.params,
    })
}

/// Trains (or loads from `cfg.models`) one `arch` model per fold.
pub fn train_models(cfg: &ExperimentConfig, data: &ExperimentData, arch: Arch) -> Result<FoldModels, HarnessError> {
    let start = Instant::now();
    let mut params = Vec::with_capacity(cfg.folds);
    let mut fold_accuracy = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let cached = cfg.models.as_deref().map(|dir| checkpoint_path(cfg, dir, arch, fold));
        let model = match &cached {
            Some(path) if path.exists() => load_checkpoint(path)?,
            _ => {
                let train_idx = data.folds.train_indices(fold);
                let model = fit(
                    cfg,
                    arch,
                    fold,
                    &data.ds32.subset(&train_idx),
                    &data.ds64.subset(&train_idx),
                    data.ds64.num_classes,
                )?;
                if let Some(path) = &cached {
                    if let Some(parent) = path.parent() {
                        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
                    }
                    save_checkpoint(&model, path)?;
                }
                model
            }
        };
        fold_accuracy.push(evaluate(&model, &data.ds64.subset(&data.folds.test_indices(fold)))?);
        params.push(model);
    }
    Ok(FoldModels { arch, params, fold_accuracy, train_seconds: start.elapsed().as_secs_f64() })
}

/// Audit failure attached to the graph and fold it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub graph_id: usize,
    pub fold: usize,
    pub violation: String,
}

/// Wall-clock figures, kept apart from the results so those stay
/// byte-reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub attack_seconds: f64,
    pub graphs_attacked: usize,
    pub seconds_per_graph: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: ResultTable,
    pub logs: Vec<FlipLog>,
    pub violations: Vec<AuditRecord>,
    pub timing: Timing,
}

impl RunOutput {
    pub fn row(&self) -> &ResultRow {
        &self.table.rows[0]
    }
}

/// Running totals for one result row.
#[derive(Default)]
struct Tally {
    flips: usize,
    perturbed: usize,
    degree_sum: f64,
    degree_count: usize,
    graphs: usize,
    skipped: usize,
    successes: usize,
    logs: Vec<FlipLog>,
    violations: Vec<AuditRecord>,
    attack_seconds: f64,
}

impl Tally {
    /// Attacks one graph, audits and records the log; returns the result's
    /// perturbed graph.
    fn attack(
        &mut self,
        cfg: &ExperimentConfig,
        attacker: &ModelParams<f64>,
        graph: &Graph<f64>,
        fold: usize,
    ) -> Result<(Graph<f64>, FlipLog), HarnessError> {
        let acfg = cfg.attack();
        let start = Instant::now();
        let result = attack_graph(attacker, graph, &acfg, attack_seed(cfg.seed, graph.id))?;
        self.attack_seconds += start.elapsed().as_secs_f64();
        self.graphs += 1;
        if result.skipped {
            self.skipped += 1;
        } else if result.method != Method::None {
            self.perturbed += 1;
            self.flips += result.flips.len();
        }
        if result.success {
            self.successes += 1;
        }
        if !result.selected_nodes.is_empty() {
            self.degree_sum += avg_degree_selected(graph, &result.selected_nodes)?;
            self.degree_count += 1;
        }
        let log = FlipLog::from_result(graph.id, fold, &result, false);
        let ctx = AuditContext {
            attack_type: cfg.attack_type,
            clean: graph,
            budget: Budget::for_graph(graph, &acfg.fractions)?,
            perturbed: Some(&result.perturbed),
            attacker: Some(attacker),
            similarity: acfg.similarity,
        };
        for v in audit_log(&log, &ctx) {
            self.violations.push(AuditRecord { graph_id: graph.id, fold, violation: v.to_string() });
        }
        Ok((result.perturbed, log))
    }

    fn record(&mut self, cfg: &ExperimentConfig, log: FlipLog) -> Result<(), HarnessError> {
        if let Some(out) = &cfg.out {
            write_json(&flip_log_path(out, &log, cfg.mode == Mode::Poison), &log)?;
        }
        self.logs.push(log);
        Ok(())
    }

    fn finish(self, cfg: &ExperimentConfig, fold_clean: &[f64], fold_attacked: &[f64], train_seconds: f64) -> RunOutput {
        let mean_flips = if self.perturbed == 0 { 0.0 } else { self.flips as f64 / self.perturbed as f64 };
        let degree = (self.degree_count > 0).then(|| self.degree_sum / self.degree_count as f64);
        let row = ResultRow::from_folds(
            &cfg.dataset,
            cfg.mode,
            cfg.arch,
            (cfg.mode != Mode::Whitebox).then(|| cfg.attacker_arch()),
            cfg.attack_type,
            cfg.method,
            fold_clean,
            fold_attacked,
            mean_flips,
            degree,
            (self.graphs, self.skipped, self.successes),
        );
        let mut table = ResultTable::new();
        table.push(row).expect("a fresh table has no rows");
        RunOutput {
            table,
            logs: self.logs,
            violations: self.violations,
            timing: Timing {
                train_seconds,
                attack_seconds: self.attack_seconds,
                graphs_attacked: self.graphs,
                seconds_per_graph: self.attack_seconds / self.graphs.max(1) as f64,
            },
        }
    }
}

fn check_models(cfg: &ExperimentConfig, models: &FoldModels, arch: Arch, role: &str) -> Result<(), HarnessError> {
    if models.arch != arch || models.params.len() != cfg.folds {
        return Err(HarnessError::Config(format!(
            "{role} models are {} x{}, expected {arch} x{}",
            models.arch,
            models.params.len(),
            cfg.folds
        )));
    }
    Ok(())
}

/// Evasion: the attacker's models perturb each validation fold and the
/// victim's models are evaluated on the result. White-box runs pass the
/// same models twice.
pub fn run_evasion(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    attacker: &FoldModels,
    victim: &FoldModels,
) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    if cfg.mode == Mode::Poison {
        return Err(HarnessError::Config("poisoning runs go through run_poison".into()));
    }
    check_models(cfg, attacker, cfg.attacker_arch(), "attacker")?;
    check_models(cfg, victim, cfg.arch, "victim")?;
    let mut tally = Tally::default();
    let mut fold_attacked = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let test = data.folds.test_indices(fold);
        let mut correct = 0;
        for &i in &test {
            let graph = &data.ds64.graphs[i];
            let (perturbed, mut log) = tally.attack(cfg, &attacker.params[fold], graph, fold)?;
            log.victim_correct_after = predict(&victim.params[fold], &perturbed)? == graph.label;
            correct += usize::from(log.victim_correct_after);
            tally.record(cfg, log)?;
        }
        fold_attacked.push(correct as f64 / test.len() as f64);
    }
    let train_seconds = attacker.train_seconds + if cfg.attacker_arch() == cfg.arch { 0.0 } else { victim.train_seconds };
    Ok(tally.finish(cfg, &victim.fold_accuracy, &fold_attacked, train_seconds))
}

/// Poisoning: the surrogate perturbs every training graph of each fold, a
/// fresh victim is trained on the perturbed folds with the same
/// initialisation as `clean_victim`, and both are scored on the clean
/// validation fold.
pub fn run_poison(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    surrogate: &FoldModels,
    clean_victim: &FoldModels,
) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    if cfg.mode != Mode::Poison {
        return Err(HarnessError::Config("run_poison needs mode poison".into()));
    }
    check_models(cfg, surrogate, cfg.attacker_arch(), "surrogate")?;
    check_models(cfg, clean_victim, cfg.arch, "victim")?;
    debug_assert_eq!(cfg.attack_type, AttackType::Structure);
    let start = Instant::now();
    let mut tally = Tally::default();
    let mut fold_poisoned = Vec::with_capacity(cfg.folds);
    for fold in 0..cfg.folds {
        let train_idx = data.folds.train_indices(fold);
        let mut graphs32 = Vec::with_capacity(train_idx.len());
        let mut graphs64 = Vec::with_capacity(train_idx.len());
        let mut logs = Vec::with_capacity(train_idx.len());
        for &i in &train_idx {
            let clean = &data.ds64.graphs[i];
            let (perturbed, log) = tally.attack(cfg, &surrogate.params[fold], clean, fold)?;
            let pairs: Vec<(usize, usize)> = log.flips.iter().map(|f| f.pair()).collect();
            graphs32.push(data.ds32.graphs[i].with_flipped(&pairs)?);
            graphs64.push(perturbed);
            logs.push(log);
        }
        let refs32: Vec<&Graph<f32>> = graphs32.iter().collect();
        let refs64: Vec<&Graph<f64>> = graphs64.iter().collect();
        let poisoned = fit(cfg, cfg.arch, fold, &refs32, &refs64, data.ds64.num_classes)?;
        for (mut log, g) in logs.into_iter().zip(&graphs64) {
            log.victim_correct_after = predict(&poisoned, g)? == g.label;
            tally.record(cfg, log)?;
        }
        fold_poisoned.push(evaluate(&poisoned, &data.ds64.subset(&data.folds.test_indices(fold)))?);
    }
    let retrain = start.elapsed().as_secs_f64() - tally.attack_seconds;
    let train_seconds = surrogate.train_seconds + clean_victim.train_seconds + retrain;
    Ok(tally.finish(cfg, &clean_victim.fold_accuracy, &fold_poisoned, train_seconds))
}

/// Loads data, trains whatever models the mode needs and runs it. Writes
/// every output file when `cfg.out` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let data = ExperimentData::load(cfg)?;
    let victim = train_models(cfg, &data, cfg.arch)?;
    let attacker = if cfg.attacker_arch() == cfg.arch { victim.clone() } else { train_models(cfg, &data, cfg.attacker_arch())? };
    let output = match cfg.mode {
        Mode::Whitebox | Mode::Blackbox => run_evasion(cfg, &data, &attacker, &victim)?,
        Mode::Poison => run_poison(cfg, &data, &attacker, &victim)?,
    };
    if let Some(out) = &cfg.out {
        write_outputs(out, cfg, &output)?;
    }
    Ok(output)
}

/// Writes the tables, resolved config, audit report and timing file. Flip
/// logs are written as they are produced.
pub fn write_outputs(out: &std::path::Path, cfg: &ExperimentConfig, output: &RunOutput) -> Result<(), HarnessError> {
    output.table.write(out)?;
    write_json(&out.join("config.resolved.json"), cfg)?;
    write_json(&out.join("audit.json"), &output.violations)?;
    write_json(&out.join("timing.json"), &output.timing)?;
    Ok(())
}

/// Per-fold victim accuracy rebuilt from flip logs alone.
pub fn accuracy_from_logs(logs: &[FlipLog], folds: usize) -> Vec<f64> {
    (0..folds)
        .map(|k| {
            let fold: Vec<&FlipLog> = logs.iter().filter(|l| l.fold == k).collect();
            fold.iter().filter(|l| l.victim_correct_after).count() as f64 / fold.len().max(1) as f64
        })
        .collect()
}

/// Summary written by the `train` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub dataset: String,
    pub arch: Arch,
    pub seed: u64,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

pub fn write_train_summary(out: &std::path::Path, cfg: &ExperimentConfig, models: &FoldModels) -> Result<(), HarnessError> {
    let summary = TrainSummary {
        dataset: cfg.dataset.clone(),
        arch: models.arch,
        seed: cfg.seed,
        fold_accuracy: models.fold_accuracy.clone(),
        mean_accuracy: models.mean_accuracy(),
    };
    write_json(&out.join("train.json"), &summary)?;
    write_json(&out.join("config.resolved.json"), cfg)?;
    write_file(
        &out.join("timing.json"),
        &(serde_json::to_string_pretty(&Timing { train_seconds: models.train_seconds, ..Default::default() })? + "\n"),
    )
}
