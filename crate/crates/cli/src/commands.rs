use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpform_core::autodiff::{grad_check, ParamStore};
use lpform_core::config::RunConfig;
use lpform_core::context::{context_batch, write_context_tsv, ContextParams, PprFilter, Thresholds};
use lpform_core::eval::{evaluate, score_split, HeuristicScorer, LinkScorer, ModelScorer, RankingReport};
use lpform_core::factors::{assign_factors, per_factor_report, write_factors_tsv};
use lpform_core::graph::{load_graph, read_edge_list, EdgeSplit, Graph, Negatives};
use lpform_core::heuristics::HeuristicKind;
use lpform_core::model::{normalized_adjacency, LpFormer, ModelConfig};
use lpform_core::ppr::{precompute_cache, PprCache, DEFAULT_ALPHA};
use lpform_core::train::{sample_negatives, train, Validation};
use lpform_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const CONFIG_FILE: &str = "config.json";
const CHECKPOINT_FILE: &str = "checkpoint.lpck";
const METRICS_FILE: &str = "metrics.tsv";
const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "lpform", version, about = "Link prediction with PPR-filtered pairwise attention")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Precompute approximate PPR rows for every node into an LPPR file.
    Ppr(PprArgs),
    /// Train a model; writes config, checkpoint, metrics and report to the run directory.
    Train(TrainArgs),
    /// Rank a split with a trained checkpoint.
    Eval(EvalArgs),
    /// Rank a split with a classical heuristic.
    Heuristic(HeuristicArgs),
    /// Group test links by dominant factor and report per group.
    Factors(FactorsArgs),
    /// Compare model gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Write the selected context nodes of each link as TSV.
    DumpContext(DumpContextArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitName {
    Valid,
    Test,
}

impl SplitName {
    fn as_str(self) -> &'static str {
        match self {
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }

    fn pick(self, split: &EdgeSplit) -> (&[(usize, usize)], &Negatives) {
        match self {
            SplitName::Valid => (&split.valid, &split.valid_neg),
            SplitName::Test => (&split.test, &split.test_neg),
        }
    }
}

#[derive(Debug, Args)]
struct PprArgs {
    #[arg(long)]
    edges: PathBuf,
    #[arg(long)]
    num_nodes: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-7)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `train.seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "run")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ModelSource {
    /// Run directory from `train`; supplies config.json and checkpoint.lpck.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

impl ModelSource {
    fn config_path(&self) -> Result<PathBuf> {
        match (&self.config, &self.run_dir) {
            (Some(c), _) => Ok(c.clone()),
            (None, Some(d)) => Ok(d.join(CONFIG_FILE)),
            (None, None) => Err(Error::Config("need --config or --run-dir".into())),
        }
    }

    fn checkpoint_path(&self) -> Option<PathBuf> {
        match (&self.checkpoint, &self.run_dir) {
            (Some(c), _) => Some(c.clone()),
            (None, Some(d)) => Some(d.join(CHECKPOINT_FILE)),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    /// Comma-separated cut-offs, e.g. 1,3,10,50,100.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct HeuristicArgs {
    #[arg(long)]
    kind: HeuristicKind,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Split directory, used when no config is given.
    #[arg(long)]
    split_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct FactorsArgs {
    #[command(flatten)]
    source: ModelSource,
    #[arg(long, default_value_t = lpform_core::factors::DEFAULT_PERCENTILE)]
    p: f64,
    /// Heuristic that scores links when no checkpoint is given.
    #[arg(long, default_value = "cn")]
    kind: HeuristicKind,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long, default_value = "factors.tsv")]
    out: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long)]
    config: PathBuf,
    /// Coordinates sampled per parameter tensor; all when omitted.
    #[arg(long)]
    max_coords: Option<usize>,
    /// Positive links in the checked batch (with as many negatives).
    #[arg(long, default_value_t = 8)]
    links: usize,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct DumpContextArgs {
    /// Run config; supplies the graph and context parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Precomputed LPPR file; computed on the fly when omitted.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Edge-list file of the links to dump.
    #[arg(long)]
    links: PathBuf,
    /// Uniform PPR threshold for 1-hop and >1-hop nodes (overrides config).
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum)]
    filter: Option<FilterArg>,
    #[arg(long)]
    max_context: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterArg {
    And,
    Or,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ppr(a) => cmd_ppr(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Heuristic(a) => cmd_heuristic(a),
        Command::Factors(a) => cmd_factors(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::DumpContext(a) => cmd_dump_context(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn cache_for(g: &Graph, model: &ModelConfig) -> Result<PprCache> {
    precompute_cache(g, model.ppr_alpha, model.ppr_eps)
}

fn load_model(cfg: &RunConfig, g: &Graph, checkpoint: &Path) -> Result<LpFormer> {
    let params = ParamStore::read_checkpoint(checkpoint)?;
    LpFormer::from_params(cfg.model, g.features().dim(), &params)
}

fn split_or_fail(split: &EdgeSplit, which: SplitName) -> Result<(&[(usize, usize)], &Negatives)> {
    let (pos, neg) = which.pick(split);
    if !pos.is_empty() && neg.all_pairs().is_empty() {
        return Err(Error::Config(format!("{} split has positives but no negatives", which.as_str())));
    }
    Ok((pos, neg))
}

#[derive(Serialize)]
struct SplitReport<'a> {
    split: &'a str,
    scorer: String,
    #[serde(flatten)]
    report: RankingReport,
}

fn cmd_ppr(a: PprArgs) -> Result<()> {
    let g = load_graph(&a.edges, None, a.num_nodes)?;
    let cache = precompute_cache(&g, a.alpha, a.eps)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    cache.write(&a.out)?;
    println!(
        "nodes\t{}\tnnz\t{}\tout\t{}",
        cache.num_nodes(),
        cache.total_nnz(),
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.train.seed = seed;
    }
    let (g, split) = cfg.load_data()?;
    create_dir(&a.out_dir)?;
    write_file(&a.out_dir.join(CONFIG_FILE), &(cfg.to_json() + "\n"))?;

    let cache = cache_for(&g, &cfg.model)?;
    let model = LpFormer::new(cfg.model, g.features().dim(), cfg.train.seed)?;
    let validation = match split_or_fail(&split, SplitName::Valid)? {
        (pos, _) if pos.is_empty() => None,
        (positives, negatives) => Some(Validation { positives, negatives }),
    };

    let metrics_path = a.out_dir.join(METRICS_FILE);
    let mut metrics = open_writer(&metrics_path)?;
    writeln!(metrics, "epoch\tloss\tval_mrr").map_err(io_err(&metrics_path))?;
    let mut write_err = None;
    let outcome = train(&g, &cache, model, &split.train, validation, &cfg.train, |e| {
        let val = e.val_mrr.map_or_else(|| "nan".to_string(), |m| m.to_string());
        if let Err(err) = writeln!(metrics, "{}\t{}\t{val}", e.epoch, e.loss) {
            write_err.get_or_insert(err);
        }
    })?;
    if let Some(err) = write_err {
        return Err(io_err(&metrics_path)(err));
    }
    metrics.flush().map_err(io_err(&metrics_path))?;

    outcome.model.params().write_checkpoint(&a.out_dir.join(CHECKPOINT_FILE))?;
    let test = match split_or_fail(&split, SplitName::Test)? {
        (pos, _) if pos.is_empty() => None,
        (pos, neg) => {
            let scorer = ModelScorer {
                model: &outcome.model,
                graph: &g,
                cache: &cache,
                batch_size: cfg.eval.batch_size,
            };
            Some(evaluate(&scorer, pos, neg, &cfg.eval.ks)?)
        }
    };

    #[derive(Serialize)]
    struct TrainReport {
        epochs_run: usize,
        best_epoch: usize,
        best_val_mrr: Option<f64>,
        final_loss: Option<f64>,
        test: Option<RankingReport>,
    }
    let report = TrainReport {
        epochs_run: outcome.log.len(),
        best_epoch: outcome.best_epoch,
        best_val_mrr: outcome.best_val_mrr,
        final_loss: outcome.log.last().map(|e| e.loss),
        test,
    };
    write_json(&a.out_dir.join(REPORT_FILE), &report)?;
    println!(
        "epochs\t{}\tbest_epoch\t{}\tbest_val_mrr\t{}",
        report.epochs_run,
        report.best_epoch,
        report.best_val_mrr.map_or("nan".into(), |m| m.to_string())
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.source.config_path()?)?;
    let checkpoint = a
        .source
        .checkpoint_path()
        .ok_or_else(|| Error::Config("need --checkpoint or --run-dir".into()))?;
    let (g, split) = cfg.load_data()?;
    let model = load_model(&cfg, &g, &checkpoint)?;
    let cache = cache_for(&g, &cfg.model)?;
    let (pos, neg) = split_or_fail(&split, a.split)?;
    let scorer = ModelScorer {
        model: &model,
        graph: &g,
        cache: &cache,
        batch_size: cfg.eval.batch_size,
    };
    let ks = a.ks.unwrap_or(cfg.eval.ks);
    check_ks(&ks)?;
    let report = evaluate(&scorer, pos, neg, &ks)?;
    emit_report(&a.out_dir, a.split, "model".into(), report)
}

fn check_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("--ks must list positive integers".into()));
    }
    Ok(())
}

fn emit_report(out_dir: &Path, split: SplitName, scorer: String, report: RankingReport) -> Result<()> {
    create_dir(out_dir)?;
    println!("split\t{}\tmrr\t{}\tpositives\t{}", split.as_str(), report.mrr, report.num_positives);
    write_json(
        &out_dir.join(REPORT_FILE),
        &SplitReport {
            split: split.as_str(),
            scorer,
            report,
        },
    )
}

fn heuristic_data(config: Option<&Path>, split_dir: Option<&Path>) -> Result<(Graph, EdgeSplit, ModelConfig)> {
    match (config, split_dir) {
        (Some(c), _) => {
            let cfg = RunConfig::load(c)?;
            let (g, split) = cfg.load_data()?;
            Ok((g, split, cfg.model))
        }
        (None, Some(dir)) => {
            let split = EdgeSplit::load_dir(dir)?;
            let n = [&split.train, &split.valid, &split.test]
                .into_iter()
                .flatten()
                .chain(split.valid_neg.all_pairs().iter())
                .chain(split.test_neg.all_pairs().iter())
                .map(|&(u, v)| u.max(v) + 1)
                .max()
                .unwrap_or(0);
            split.validate(n)?;
            let g = Graph::from_edges(n, &split.train, None)?;
            Ok((g, split, ModelConfig::default()))
        }
        (None, None) => Err(Error::Config("need --config or --split-dir".into())),
    }
}

fn cmd_heuristic(a: HeuristicArgs) -> Result<()> {
    let (g, split, model_cfg) = heuristic_data(a.config.as_deref(), a.split_dir.as_deref())?;
    let cache = match a.kind {
        HeuristicKind::Ppr => Some(cache_for(&g, &model_cfg)?),
        _ => None,
    };
    let (pos, neg) = split_or_fail(&split, a.split)?;
    let ks = a.ks.unwrap_or_else(|| lpform_core::eval::DEFAULT_KS.to_vec());
    check_ks(&ks)?;
    let scorer = HeuristicScorer {
        graph: &g,
        cache: cache.as_ref(),
        kind: a.kind,
    };
    let report = evaluate(&scorer, pos, neg, &ks)?;
    emit_report(&a.out_dir, a.split, a.kind.to_string(), report)
}

fn cmd_factors(a: FactorsArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.source.config_path()?)?;
    let (g, split) = cfg.load_data()?;
    let cache = cache_for(&g, &cfg.model)?;
    let (pos, neg) = split_or_fail(&split, a.split)?;
    if pos.is_empty() {
        return Err(Error::Config(format!("{} split has no positives", a.split.as_str())));
    }
    let assignments = assign_factors(&g, &cache, pos, a.p)?;

    let model = a.source.checkpoint_path().map(|p| load_model(&cfg, &g, &p)).transpose()?;
    let heuristic = HeuristicScorer {
        graph: &g,
        cache: Some(&cache),
        kind: a.kind,
    };
    let model_scorer = model.as_ref().map(|m| ModelScorer {
        model: m,
        graph: &g,
        cache: &cache,
        batch_size: cfg.eval.batch_size,
    });
    let (scorer, name): (&dyn LinkScorer, String) = match &model_scorer {
        Some(s) => (s, "model".into()),
        None => (&heuristic, a.kind.to_string()),
    };
    let (pos_scores, neg_scores) = score_split(scorer, pos, neg)?;
    let ks = a.ks.unwrap_or(cfg.eval.ks);
    check_ks(&ks)?;
    let reports = per_factor_report(&assignments, &pos_scores, &neg_scores, &ks)?;

    create_dir(&a.out_dir)?;
    let tsv = if a.out.is_absolute() { a.out.clone() } else { a.out_dir.join(&a.out) };
    let mut w = open_writer(&tsv)?;
    write_factors_tsv(&mut w, &assignments).map_err(io_err(&tsv))?;
    w.flush().map_err(io_err(&tsv))?;

    #[derive(Serialize)]
    struct FactorReport {
        split: &'static str,
        scorer: String,
        percentile: f64,
        thresholds: [f64; 3],
        unassigned: usize,
        groups: std::collections::BTreeMap<String, RankingReport>,
    }
    let report = FactorReport {
        split: a.split.as_str(),
        scorer: name,
        percentile: a.p,
        thresholds: assignments[0].thresholds,
        unassigned: assignments
            .iter()
            .filter(|f| f.factor == lpform_core::factors::Factor::None)
            .count(),
        groups: reports.into_iter().map(|(f, r)| (f.to_string(), r)).collect(),
    };
    for (f, r) in &report.groups {
        println!("factor\t{f}\tlinks\t{}\tmrr\t{}", r.num_positives, r.mrr);
    }
    write_json(&a.out_dir.join(REPORT_FILE), &report)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let (g, split) = cfg.load_data()?;
    let model_cfg = ModelConfig { dropout: 0.0, ..cfg.model };
    let model = LpFormer::new(model_cfg, g.features().dim(), cfg.train.seed)?;
    let cache = cache_for(&g, &model_cfg)?;
    let positives: Vec<_> = split.train.iter().copied().take(a.links.max(1)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    let negatives = sample_negatives(&g, &positives, 1, &mut rng)?;
    let mut links = positives.clone();
    links.extend(&negatives);
    let mut labels = vec![1.0; positives.len()];
    labels.resize(links.len(), 0.0);
    let contexts = context_batch(&g, &cache, &links, &model_cfg.context)?;
    let adj = Rc::new(normalized_adjacency(&g, &[]));
    let mut store = model.params().clone();
    let rep = grad_check(&mut store, a.step, a.max_coords, cfg.train.seed, |s, t| {
        model.loss(t, s, &g, &adj, &contexts, &labels)
    })?;
    println!("max_rel_error\t{:e}\tcoords\t{}", rep.max_rel_error, rep.coords_checked);
    if rep.max_rel_error > a.tolerance {
        return Err(Error::Numeric(format!(
            "max relative gradient error {:e} exceeds {:e}",
            rep.max_rel_error, a.tolerance
        )));
    }
    Ok(())
}

fn cmd_dump_context(a: DumpContextArgs) -> Result<()> {
    let (g, model_cfg) = match (&a.config, &a.edges) {
        (Some(c), _) => {
            let cfg = RunConfig::load(c)?;
            (cfg.load_data()?.0, cfg.model)
        }
        (None, Some(e)) => (load_graph(e, None, None)?, ModelConfig::default()),
        (None, None) => return Err(Error::Config("need --config or --edges".into())),
    };
    let cache = match &a.cache {
        Some(p) => {
            let c = PprCache::read(p)?;
            if c.num_nodes() != g.num_nodes() {
                return Err(Error::Format(format!(
                    "cache covers {} nodes, graph has {}",
                    c.num_nodes(),
                    g.num_nodes()
                )));
            }
            c
        }
        None => cache_for(&g, &model_cfg)?,
    };
    let mut params: ContextParams = model_cfg.context;
    if let Some(eta) = a.eta {
        params.thresholds = Thresholds {
            one_hop: eta,
            gt_one_hop: eta,
            ..params.thresholds
        };
        params.thresholds.validate()?;
    }
    if let Some(f) = a.filter {
        params.filter = match f {
            FilterArg::And => PprFilter::And,
            FilterArg::Or => PprFilter::Or,
        };
    }
    if a.max_context.is_some() {
        params.max_context = a.max_context;
    }
    let links = read_edge_list(&a.links)?;
    let contexts = context_batch(&g, &cache, &links, &params)?;
    let mut w = open_writer(&a.out)?;
    write_context_tsv(&mut w, &contexts).map_err(io_err(&a.out))?;
    w.flush().map_err(io_err(&a.out))?;
    let total: usize = contexts.iter().map(|c| c.len()).sum();
    println!("links\t{}\tcontext_nodes\t{total}", contexts.len());
    Ok(())
}
