//! End-to-end acceptance checks. Prints one PASS/FAIL/SKIP line per criterion
//! and exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use olprec::harness::{self, DatasetSource, RunConfig};
use olprec::learners::PORTFOLIO_SIZE;
use olprec::metarec::{self, PipelineConfig, Recommendation};
use olprec::metrics::{self, ConfusionCounts};
use olprec::{complexity, dataset, neighbors, olp, sgh, synth, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Directory of user-supplied KEEL files for the benchmark check.
const KEEL_DIR_ENV: &str = "OLPREC_KEEL_DIR";

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn verdict(failures: Vec<String>, detail: String) -> Outcome {
    if failures.is_empty() {
        Outcome::Pass(detail)
    } else {
        let shown: Vec<_> = failures.iter().take(5).cloned().collect();
        Outcome::Fail(format!("{detail}; {} failure(s): {}", failures.len(), shown.join(" | ")))
    }
}

/// Fuzzed sets with contradictory duplicates removed, half on a coarse grid.
fn fuzz_set(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<u8>) {
    loop {
        let n = rng.gen_range(2..=60);
        let d = rng.gen_range(1..=5);
        let coarse = rng.gen_bool(0.5);
        let mut x: Vec<Vec<f64>> = Vec::new();
        let mut y: Vec<u8> = Vec::new();
        for _ in 0..n {
            let p: Vec<f64> = (0..d)
                .map(|_| if coarse { rng.gen_range(0..5) as f64 / 4.0 } else { rng.gen::<f64>() })
                .collect();
            let c = u8::from(rng.gen_bool(0.35));
            if !x.iter().zip(&y).any(|(q, &cq)| *q == p && cq != c) {
                x.push(p);
                y.push(c);
            }
        }
        if y.contains(&0) && y.contains(&1) {
            return (x, y);
        }
    }
}

fn sgh_oracle_guarantee() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    let mut planes = 0;
    for case in 0..1000 {
        let (x, y) = fuzz_set(&mut rng);
        match sgh::generate(&Matrix::from_rows(&x).unwrap(), &y) {
            Ok(pool) => {
                planes += pool.len();
                let uncovered = (0..y.len())
                    .filter(|&i| !pool.classifiers.iter().any(|h| h.predict(&x[i]) == y[i]))
                    .count();
                if uncovered > 0 {
                    failures.push(format!("case {case}: {uncovered} uncovered"));
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(failures, format!("1000 sets, {planes} hyperplanes, {elapsed:.2?}"))
}

fn fold_accuracy(evals: &[&metarec::SampleEvaluation<f64>], pick: impl Fn(&metarec::SampleEvaluation<f64>) -> usize) -> f64 {
    let t: Vec<u8> = evals.iter().map(|e| e.y_true).collect();
    let p: Vec<u8> = evals.iter().map(|e| e.outputs[pick(e)].label).collect();
    metrics::accuracy(&metrics::confusion(&t, &p))
}

fn ideal_dominance() -> Outcome {
    let cfg = PipelineConfig::default();
    let corpus = synth::heterogeneous_corpus(200, 7).unwrap();
    let mut failures = Vec::new();
    let mut ideal_mean = 0.0;
    let mut fixed_mean = [0.0; PORTFOLIO_SIZE];
    for ds in &corpus {
        let evals = match metarec::evaluate_portfolio(ds, &cfg) {
            Ok(e) => e,
            Err(e) => return Outcome::Fail(format!("{}: {e}", ds.name)),
        };
        let mut ideal_ds = 0.0;
        let mut fixed_ds = [0.0; PORTFOLIO_SIZE];
        for fold in 0..cfg.folds {
            let f: Vec<_> = evals.iter().filter(|e| e.fold == fold).collect();
            let ideal = fold_accuracy(&f, |e| olp::ideal_index(&e.outputs, e.y_true));
            ideal_ds += ideal / cfg.folds as f64;
            for j in 0..PORTFOLIO_SIZE {
                let a = fold_accuracy(&f, |_| j);
                fixed_ds[j] += a / cfg.folds as f64;
                if ideal < a {
                    failures.push(format!("{} fold {fold} model {j}: {ideal} < {a}", ds.name));
                }
            }
        }
        ideal_mean += ideal_ds / corpus.len() as f64;
        for j in 0..PORTFOLIO_SIZE {
            fixed_mean[j] += fixed_ds[j] / corpus.len() as f64;
        }
    }
    let best = fixed_mean.iter().copied().fold(f64::MIN, f64::max);
    let gap = ideal_mean - best;
    if gap < 0.02 {
        failures.push(format!("gap {gap:.4} below 0.02"));
    }
    verdict(failures, format!("ideal {ideal_mean:.4}, best fixed {best:.4}, gap {gap:.4}"))
}

fn complexity_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    for case in 0..200 {
        let n = rng.gen_range(3..=50);
        let d = rng.gen_range(1..=4);
        let (x, y) = random_points(&mut rng, n, d);
        let nb = neighborhood(&x, &y);
        let nm = complexity::neighbor_measures(&nb, 0);
        if nm.n1 != n1_oracle(&x, &y) {
            failures.push(format!("case {case}: N1"));
        }
        if nm.n3 != n3_oracle(&x, &y) {
            failures.push(format!("case {case}: N3"));
        }
        if complexity::feature_measures(&nb).0 != f3_oracle(&x, &y) {
            failures.push(format!("case {case}: F3"));
        }
        let k = 7.min(n - 1);
        let kdn = neighbors::kdn_raw(&Matrix::from_rows(&x).unwrap(), &y, k).unwrap();
        if kdn.scores != kdn_oracle(&x, &y, k) {
            failures.push(format!("case {case}: KDN"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..10_000 {
        let n = rng.gen_range(2..=50);
        let d = rng.gen_range(1..=5);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
        let share = rng.gen_range(0.05..0.95);
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(share))).collect();
        if rng.gen_bool(0.9) {
            y[0] = 0;
            y[1] = 1;
        }
        let v = match complexity::measure(&neighborhood(&x, &y), case) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("fuzz {case}: {e}"));
                continue;
            }
        };
        let out_of_range = v.0[..11].iter().any(|m| !(0.0..=1.0).contains(m)) || !v.0[11].is_finite();
        if out_of_range {
            failures.push(format!("fuzz {case}: {:?}", v.0));
        }
    }
    verdict(failures, "200 oracle neighborhoods, 10000 bound cases".into())
}

fn metric_identities() -> Outcome {
    let mut failures = Vec::new();
    let c = ConfusionCounts { tp: 8, fp: 2, tn: 85, fn_: 5 };
    let (f, g) = (metrics::fmeasure(&c).value, metrics::gmean(&c).value);
    if (f - 0.6957).abs() > 1e-4 || (g - 0.7754).abs() > 1e-4 {
        failures.push(format!("worked example F={f} G={g}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..2000 {
        let c = ConfusionCounts {
            tp: rng.gen_range(1..60),
            fp: rng.gen_range(1..60),
            tn: rng.gen_range(0..60),
            fn_: rng.gen_range(0..60),
        };
        let p = c.tp as f64 / (c.tp + c.fp) as f64;
        let r = c.tp as f64 / (c.tp + c.fn_) as f64;
        if (metrics::fmeasure(&c).value - 2.0 * p * r / (p + r)).abs() > 1e-12 {
            failures.push(format!("fmeasure case {case}"));
        }
        let n = rng.gen_range(2..80);
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        y[0] = 0;
        y[1] = 1;
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..30) as f64 / 30.0).collect();
        let warped: Vec<f64> = s.iter().map(|v| 5.0 * v.powi(3) + 2.0).collect();
        if metrics::auc(&y, &s).value != metrics::auc(&y, &warped).value {
            failures.push(format!("auc case {case}"));
        }
    }
    let five = metrics::wilcoxon(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5], 0.05).p_value;
    let six = metrics::wilcoxon(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6], 0.05).p_value;
    if five != 0.0625 || six != 0.03125 {
        failures.push(format!("wilcoxon p {five} {six}"));
    }
    verdict(failures, format!("F={f:.4} G={g:.4} p5={five} p6={six}"))
}

fn meta_recoverability() -> Outcome {
    let rules = synth::default_label_rules();
    let train = synth::meta_corpus(1500, &rules, 1);
    let test = synth::meta_corpus(500, &rules, 2);
    let mc = match metarec::train_meta(&train, 3) {
        Ok(mc) => mc,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut truth = Vec::new();
    let mut committed = Vec::new();
    for inst in &test.instances {
        let (relevant, probs) = mc.predict_labels(&inst.v);
        let rec = Recommendation::from_scores(probs, relevant);
        let mut set = rec.relevant_set;
        set[rec.chosen] = true;
        truth.push(inst.u);
        committed.push(set);
    }
    let precision = metrics::multilabel_precision(&truth, &committed);
    let importances = mc.feature_importances();
    let hits = (0..PORTFOLIO_SIZE)
        .filter(|&j| {
            let top = importances[j]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(k, _)| k);
            top == Some(rules[j].feature)
        })
        .count();
    let mut failures = Vec::new();
    if precision < 0.9 {
        failures.push(format!("precision {precision:.4}"));
    }
    if hits < 4 {
        failures.push(format!("top importance matched {hits}/5"));
    }
    verdict(failures, format!("precision {precision:.4}, importance hits {hits}/5"))
}

fn threshold_semantics() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut failures = Vec::new();
    let mut checked = 0;
    for ds in synth::heterogeneous_corpus(120, 9).unwrap() {
        let folds = match metarec::prepare_folds(&ds, &cfg) {
            Ok(f) => f,
            Err(e) => return Outcome::Fail(format!("{}: {e}", ds.name)),
        };
        let evals = metarec::evaluate_folds(&folds, &ds.name, &cfg).unwrap();
        for e in evals.iter().filter(|e| e.borderline) {
            let ctx = &folds[e.fold];
            let r = ctx.test_indices.iter().position(|&s| s == e.sample).unwrap();
            let x = ctx.test_x.row(r);
            let u = e.relevance(cfg.t);
            for (j, &uj) in u.iter().enumerate() {
                let out = olp::classify_with_model(&ctx.state, x, &cfg.model_spec(e.query_seed, j)).unwrap();
                let pool = out.pool.as_ref().expect("borderline output keeps its pool");
                let votes = pool.members.iter().filter(|m| m.predict(x).unwrap() == e.y_true).count();
                if pool.members.len() != 5 || uj != (votes >= 4) {
                    failures.push(format!("{} sample {} model {j}: u={uj} votes={votes}", ds.name, e.sample));
                }
                checked += 1;
            }
        }
    }
    verdict(failures, format!("{checked} pool-routed (sample, model) pairs"))
}

fn rendered(sources: &[DatasetSource], workers: usize) -> olprec::Result<Vec<(&'static str, Vec<u8>)>> {
    let cfg = RunConfig {
        workers: Some(workers),
        ..RunConfig::default()
    };
    harness::render_reports(&harness::run_lodo_on(sources, &cfg)?)
}

fn determinism() -> Outcome {
    let sources: Vec<DatasetSource> = synth::heterogeneous_corpus(100, 11)
        .unwrap()
        .into_iter()
        .take(4)
        .map(DatasetSource::from)
        .collect();
    let runs = [4, 4, 1, 8].map(|w| rendered(&sources, w));
    let runs: Vec<_> = match runs.into_iter().collect::<olprec::Result<Vec<_>>>() {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut failures = Vec::new();
    for (label, a, b) in [("repeat", 0, 1), ("1 vs 8 workers", 2, 3), ("4 vs 1 workers", 0, 2)] {
        for ((name, x), (_, y)) in runs[a].iter().zip(&runs[b]) {
            if x != y {
                failures.push(format!("{label}: {name} differs"));
            }
        }
    }
    let bytes: usize = runs[0].iter().map(|(_, b)| b.len()).sum();
    verdict(failures, format!("{} files, {bytes} bytes per run", runs[0].len()))
}

fn keel_benchmark() -> Outcome {
    let Some(dir) = std::env::var_os(KEEL_DIR_ENV).map(PathBuf::from) else {
        return Outcome::Skip(format!("set {KEEL_DIR_ENV} to a directory of KEEL files"));
    };
    let folds = 5;
    let names = match harness::discover_datasets(&dir, folds) {
        Ok(n) => n,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let mut failures = Vec::new();
    let mut sources = Vec::new();
    for name in &names {
        match harness::load_dataset(&dir, name, folds) {
            Ok(src) => {
                if let Some(entry) = dataset::benchmark_entry(name) {
                    let ir = src.dataset.imbalance_ratio();
                    if format!("{ir:.2}") != format!("{:.2}", entry.imbalance_ratio) {
                        failures.push(format!("{name}: IR {ir:.2} vs {:.2}", entry.imbalance_ratio));
                    }
                }
                sources.push(src);
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    if sources.len() < 2 {
        failures.push(format!("only {} usable datasets", sources.len()));
        return verdict(failures, String::new());
    }
    sources.truncate(10);
    let start = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    match harness::run_lodo_on(&sources, &cfg).and_then(|r| harness::emit_reports(&r, out.path())) {
        Ok(paths) => {
            for p in &paths {
                let lines = std::fs::read_to_string(p).map(|s| s.lines().count()).unwrap_or(0);
                if lines < 2 {
                    failures.push(format!("{} is empty", p.display()));
                }
            }
            if paths.len() != harness::REPORT_FILES.len() {
                failures.push(format!("{} report files", paths.len()));
            }
        }
        Err(e) => failures.push(format!("LODO: {e}")),
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30 * 60) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(failures, format!("{} datasets checked, LODO on {} in {elapsed:.1?}", names.len(), sources.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 8] = [
        ("sgh oracle guarantee", sgh_oracle_guarantee),
        ("ideal selector dominance", ideal_dominance),
        ("complexity oracles and bounds", complexity_oracles),
        ("metric identities", metric_identities),
        ("meta-pipeline recoverability", meta_recoverability),
        ("relevance threshold semantics", threshold_semantics),
        ("end-to-end determinism", determinism),
        ("keel benchmark", keel_benchmark),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = false;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed = true;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("{tag} [{}] {name} ({secs:.1}s): {detail}", i + 1);
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
