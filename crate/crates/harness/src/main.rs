#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::path::PathBuf;
use std::process::ExitCode;

use cama_core::attack::{AttackType, Method};
use cama_core::autodiff::gradcheck::{primitive_suite, GradCheckConfig};
use cama_core::gnn::{check_model_gradients, Arch, ModelParams};
use cama_core::graph::{load_tu_dataset, FeaturePolicy, Graph};
use cama_harness::experiment::write_train_summary;
use cama_harness::{run, train_models, ExperimentConfig, ExperimentData, HarnessError, Mode};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cama", version, about = "Train GNN graph classifiers and attack them with CAM-guided perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per fold and report validation accuracy.
    Train(Overrides),
    /// White-box evasion attack on the validation folds.
    Attack(Overrides),
    /// Black-box transfer: perturbations from a surrogate, evaluated on the victim.
    Transfer(Overrides),
    /// Poison the training folds through a surrogate and retrain the victim.
    Poison(Overrides),
    /// Print dataset statistics.
    Stats {
        #[arg(long, default_value = "MUTAG")]
        dataset: String,
        #[arg(long, default_value = "data")]
        data_root: PathBuf,
    },
    /// Finite-difference check of every autodiff primitive and both models.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// Flat JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    arch: Option<Arch>,
    #[arg(long)]
    surrogate: Option<Arch>,
    #[arg(long)]
    allow_same_arch: bool,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    attack_type: Option<AttackType>,
    #[arg(long)]
    edge_frac: Option<f64>,
    #[arg(long)]
    node_frac: Option<f64>,
    #[arg(long)]
    feat_frac: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    s1: Option<f64>,
    #[arg(long)]
    s2: Option<f64>,
    #[arg(long)]
    subgraph_frac: Option<f64>,
    #[arg(long)]
    epochs_mask: Option<usize>,
    #[arg(long)]
    lambda_ent: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Training epochs per fold.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint directory reused across runs.
    #[arg(long)]
    models: Option<PathBuf>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($field:ident),*) => {
        $(if let Some(v) = $o.$field.clone() { $cfg.$field = v; })*
    };
}

impl Overrides {
    fn resolve(&self, mode: Mode) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let o = self;
        apply!(
            cfg, o, dataset, data_root, arch, method, attack_type, edge_frac, node_frac, feat_frac, lambda, s1, s2,
            subgraph_frac, epochs_mask, lambda_ent, folds, epochs, seed
        );
        if o.surrogate.is_some() {
            cfg.surrogate = o.surrogate;
        }
        if o.out.is_some() {
            cfg.out = o.out.clone();
        }
        if o.models.is_some() {
            cfg.models = o.models.clone();
        }
        cfg.allow_same_arch |= o.allow_same_arch;
        cfg.mode = mode;
        if mode != Mode::Whitebox && cfg.surrogate.is_none() {
            cfg.surrogate = Some(Arch::Gcn);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_row(output: &cama_harness::RunOutput) {
    let r = output.row();
    println!(
        "{} {} victim={} method={} ({}) clean={:.2} attacked={:.2} change={:+.2} flips={:.2} audit_violations={}",
        r.dataset,
        r.mode.as_str(),
        r.victim,
        r.method,
        r.attack_type,
        r.clean_acc,
        r.attacked_acc,
        r.change,
        r.mean_flips,
        output.violations.len()
    );
}

fn gradcheck(seed: u64) -> Result<bool, HarnessError> {
    let config = GradCheckConfig::default();
    let mut ok = true;
    let suite = primitive_suite(seed, config).map_err(|e| HarnessError::Parse(e.to_string()))?;
    for (name, report) in suite {
        println!("{:<22} {}", name, if report.passed() { "ok" } else { "FAILED" });
        ok &= report.passed();
    }
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3)];
    let x = ndarray::Array2::from_shape_fn((6, 3), |(i, j)| if i % 3 == j { 1.0 } else { 0.0 });
    let graph = Graph::new(0, 6, edges, x, 1)?;
    for arch in [Arch::Gcn, Arch::Gin0] {
        let params = ModelParams::<f64>::init(arch, 3, 8, 5, 2, seed);
        let report = check_model_gradients(&params, &graph.features, &graph.adjacency(), graph.label, config)?;
        println!("{:<22} {}", format!("model {arch}"), if report.passed() { "ok" } else { "FAILED" });
        ok &= report.passed();
    }
    Ok(ok)
}

fn execute(command: Command) -> Result<bool, HarnessError> {
    match command {
        Command::Stats { dataset, data_root } => {
            let dir = data_root.join(&dataset);
            if !dir.is_dir() {
                return Err(HarnessError::DatasetMissing(dir));
            }
            let stats = load_tu_dataset::<f64>(&dir, &dataset, FeaturePolicy::OneHotLabel)?.stats()?;
            println!("dataset\tgraphs\tclasses\tavg_nodes\tavg_edges");
            println!("{dataset}\t{}\t{}\t{:.2}\t{:.2}", stats.graphs, stats.classes, stats.mean_nodes, stats.mean_edges);
            Ok(true)
        }
        Command::Gradcheck { seed } => gradcheck(seed),
        Command::Train(o) => {
            let cfg = o.resolve(Mode::Whitebox)?;
            let data = ExperimentData::load(&cfg)?;
            let models = train_models(&cfg, &data, cfg.arch)?;
            for (k, acc) in models.fold_accuracy.iter().enumerate() {
                println!("fold {k}: {:.2}", 100.0 * acc);
            }
            println!("{} {} mean accuracy {:.2}", cfg.dataset, cfg.arch, 100.0 * models.mean_accuracy());
            if let Some(out) = &cfg.out {
                write_train_summary(out, &cfg, &models)?;
            }
            Ok(true)
        }
        Command::Attack(o) => {
            let output = run(&o.resolve(Mode::Whitebox)?)?;
            print_row(&output);
            Ok(true)
        }
        Command::Transfer(o) => {
            let output = run(&o.resolve(Mode::Blackbox)?)?;
            print_row(&output);
            Ok(true)
        }
        Command::Poison(o) => {
            let output = run(&o.resolve(Mode::Poison)?)?;
            print_row(&output);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) if e.is_usage() => {
            eprintln!("error: {e}\n\nRun `cama --help` for usage.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
