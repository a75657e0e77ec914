use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use olprec::complexity::{self, Neighborhood, META_FEATURE_NAMES};
use olprec::dataset::read_keel;
use olprec::harness::{self, RunConfig};
use olprec::metarec::{self, PipelineConfig};
use olprec::neighbors;
use olprec::olp;
use olprec::{metrics, seed, Dataset, MetaClassifier, MetaDataset, ModelKind, Scaler};

#[derive(Parser)]
#[command(name = "olprec", version, about = "Per-sample model recommendation for online local pools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the twelve local complexity measures of every sample.
    Complexity {
        file: PathBuf,
        /// Neighborhood size.
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cross-validate online local pools of one model family on one dataset.
    Olp {
        file: PathBuf,
        /// Portfolio model (perceptron, ds, dt, lsvm, gsvm) or `sgh`.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build, train or inspect the meta-classifier.
    #[command(subcommand)]
    Meta(MetaCommand),
    /// Leave-one-dataset-out experiment.
    Lodo {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check that a run directory's aggregates match its per-sample records.
    Report {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
}

#[derive(Subcommand)]
enum MetaCommand {
    /// Meta-dataset CSV from the datasets named in a run config.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Binary-relevance trees from a meta-dataset CSV.
    Train {
        meta_csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Summary of a trained meta-classifier.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct InspectArgs {
    model_json: PathBuf,
}

fn load(path: &Path) -> Result<Dataset> {
    read_keel(path).with_context(|| format!("reading {}", path.display()))
}

fn complexity_cmd(file: &Path, k: usize, run_seed: u64) -> Result<()> {
    let ds = load(file)?;
    let x = Scaler::fit(&ds.features).apply(&ds.features);
    let k = k.min(ds.n_samples() - 1);
    let mut out = csv::Writer::from_writer(io::stdout().lock());
    let mut header = vec!["sample".to_string()];
    header.extend(META_FEATURE_NAMES.iter().map(|s| s.to_string()));
    out.write_record(&header)?;
    for i in 0..ds.n_samples() {
        let nb = neighbors::knn_excluding(x.row(i), &x, k, Some(i))?;
        let local = Neighborhood::new(
            x.select_rows(&nb.indices),
            nb.indices.iter().map(|&j| ds.labels[j]).collect(),
            nb.indices.clone(),
        )?;
        let v = complexity::measure(&local, seed::derive(run_seed, &[i as u64]))?;
        let mut rec = vec![i.to_string()];
        rec.extend(v.0.iter().map(|m| m.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

fn olp_cmd(file: &Path, model: &str, folds: usize, run_seed: u64) -> Result<()> {
    let ds = load(file)?;
    let kind = if model.eq_ignore_ascii_case("sgh") {
        None
    } else {
        let k: ModelKind = model.parse()?;
        if k.portfolio_index().is_none() {
            bail!("--model must be a portfolio model or sgh");
        }
        Some(k)
    };
    let cfg = PipelineConfig {
        folds,
        seed: run_seed,
        ..PipelineConfig::default()
    };
    let ctxs = metarec::prepare_folds(&ds, &cfg)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "fold,n_test,n_borderline,accuracy,auc,fmeasure,gmean")?;
    for ctx in &ctxs {
        let mut pred = Vec::new();
        let mut score = Vec::new();
        let mut n_borderline = 0;
        for (r, &sample) in ctx.test_indices.iter().enumerate() {
            let x = ctx.test_x.row(r);
            let o = match kind {
                None => olp::classify_sgh_mcb(&ctx.state, x, cfg.olp.sim_thr, cfg.olp.comp_thr)?,
                Some(k) => {
                    let q = cfg.query_seed(&ds.name, ctx.fold, sample);
                    let j = k.portfolio_index().expect("checked above");
                    olp::classify_with_model(&ctx.state, x, &cfg.model_spec(q, j))?
                }
            };
            n_borderline += usize::from(o.pool_used);
            pred.push(o.label);
            score.push(o.proba[1]);
        }
        let c = metrics::confusion(&ctx.test_y, &pred);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            ctx.fold,
            pred.len(),
            n_borderline,
            metrics::accuracy(&c),
            metrics::auc(&ctx.test_y, &score).value,
            metrics::fmeasure(&c).value,
            metrics::gmean(&c).value
        )?;
    }
    Ok(())
}

fn meta_build(config: &Path, out: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let datasets: Vec<Dataset> = harness::load_sources(&cfg)?.into_iter().map(|s| s.dataset).collect();
    let pipe = cfg.pipeline(cfg.seeds[0]);
    let md = metarec::build_meta_dataset(&datasets, &pipe)?;
    md.write_csv(BufWriter::new(File::create(out)?))?;
    eprintln!("{} meta-instances from {} datasets", md.len(), datasets.len());
    Ok(())
}

fn meta_train(meta_csv: &Path, out: &Path, run_seed: u64) -> Result<()> {
    let md = MetaDataset::read_csv(File::open(meta_csv)?)?;
    let mc = metarec::train_meta(&md, run_seed)?;
    fs::write(out, mc.to_json()?)?;
    eprintln!("trained on {} meta-instances, cv precision {:.4}", md.len(), mc.cv_precision);
    Ok(())
}

fn meta_inspect(path: &Path) -> Result<()> {
    let mc = MetaClassifier::from_json(&fs::read_to_string(path)?)?;
    let g = mc.grid_choice;
    let depth = g.max_depth.map_or("none".to_string(), |d| d.to_string());
    println!(
        "grid: max_depth={depth} min_impurity_decrease={} min_samples_leaf={}",
        g.min_impurity_decrease, g.min_samples_leaf
    );
    println!("cv_precision: {}", mc.cv_precision);
    println!("model,positives,negatives,constant,top_feature");
    for ((kind, stats), imp) in mc.portfolio.iter().zip(&mc.training_stats).zip(mc.feature_importances()) {
        let top = imp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .filter(|(_, &v)| v > 0.0)
            .map_or("-", |(k, _)| META_FEATURE_NAMES[k]);
        println!("{kind},{},{},{},{top}", stats.positives, stats.negatives, stats.constant);
    }
    Ok(())
}

fn lodo(config: &Path, output_dir: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    if workers.is_some() {
        cfg.workers = workers;
    }
    let report = harness::run_lodo(&cfg)?;
    for path in harness::emit_reports(&report, &cfg.output_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn report(run_dir: &Path, alpha: f64) -> Result<bool> {
    let v = harness::verify_run_dir(run_dir, alpha)?;
    for name in &v.checked {
        let status = if v.mismatched.contains(name) { "MISMATCH" } else { "ok" };
        println!("{name}: {status}");
    }
    let summary = fs::read_to_string(run_dir.join("summary.csv"))?;
    print!("{summary}");
    Ok(v.ok())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Complexity { file, k, seed } => complexity_cmd(&file, k, seed)?,
        Command::Olp {
            file,
            model,
            folds,
            seed,
        } => olp_cmd(&file, &model, folds, seed)?,
        Command::Meta(MetaCommand::Build { config, out }) => meta_build(&config, &out)?,
        Command::Meta(MetaCommand::Train { meta_csv, out, seed }) => meta_train(&meta_csv, &out, seed)?,
        Command::Meta(MetaCommand::Inspect(a)) => meta_inspect(&a.model_json)?,
        Command::Lodo {
            config,
            output_dir,
            workers,
        } => lodo(&config, output_dir, workers)?,
        Command::Report { run_dir, alpha } => return report(&run_dir, alpha),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
