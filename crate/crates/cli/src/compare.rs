use std::io::Write;

use anyhow::{Context, Result};
use fedcf::data::{split, DatasetBundle, SplitSpec};
use fedcf::eval::{
    bayes_correlated_ttest, diff_percent, ranking_metrics, rmse, MetricValues, MetricsReport,
    PosteriorRecord, Recommender, METRIC_NAMES,
};
use fedcf::seed::derive_seed;
use fedcf::tuning::{grid_search, GridResult};
use fedcf::{fit, run_federated, Error, HyperParams, InteractionStore};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Command, CompareArgs};
use crate::common::{create_file, create_out_dir, finish, load_dataset, write_config};

/// Comparison defaults: the federated side uses Adam with β₁ = 0.4,
/// β₂ = 0.99, γ = 0.2.
pub fn compare_defaults() -> HyperParams {
    HyperParams::adam()
}

#[derive(Debug, Clone, Serialize)]
pub struct DiffRow {
    pub metric: &'static str,
    pub cf_mean: f64,
    pub cf_std: f64,
    pub fcf_mean: f64,
    pub fcf_std: f64,
    /// `None` when the centralized mean is zero.
    pub diff_percent: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RebuildFailure {
    pub rebuild: usize,
    pub model: &'static str,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub hp: HyperParams,
    pub cf: MetricsReport,
    pub fcf: MetricsReport,
    pub diffs: Vec<DiffRow>,
    pub posteriors: Vec<PosteriorRecord>,
    pub failures: Vec<RebuildFailure>,
    pub grid: Option<GridResult>,
}

#[derive(Debug, Serialize)]
struct RebuildSeeds {
    rebuild: usize,
    split: u64,
    init: u64,
    rmse: u64,
}

#[derive(Debug, Serialize)]
struct Resolved<'a> {
    hp: &'a HyperParams,
    dataset: &'a str,
    grid_init_seed: Option<u64>,
    rebuilds: Vec<RebuildSeeds>,
}

fn seeds(master: u64, rebuild: usize) -> RebuildSeeds {
    let r = rebuild as u64;
    RebuildSeeds {
        rebuild,
        split: derive_seed(master, "split", r),
        init: derive_seed(master, "init", r),
        rmse: derive_seed(master, "rmse", r),
    }
}

fn evaluate<R: Recommender + Sync>(
    bundle: &DatasetBundle,
    model: &R,
    args: &CompareArgs,
    rmse_seed: u64,
) -> MetricValues {
    let ranking = ranking_metrics(bundle, model, args.top_k);
    let report = rmse(bundle, model, args.negative_rate, rmse_seed);
    if report.users_without_negatives > 0 {
        log::warn!(
            "{} users had no negatives for RMSE",
            report.users_without_negatives
        );
    }
    MetricValues::new(&ranking, report.rmse)
}

type RebuildResult = (
    usize,
    Result<MetricValues, String>,
    Result<MetricValues, String>,
);

fn rebuild(
    store: &InteractionStore,
    hp: &HyperParams,
    args: &CompareArgs,
    s: &RebuildSeeds,
) -> RebuildResult {
    let bundle = match split(store, &SplitSpec::new(s.split)) {
        Ok(b) => b,
        Err(e) => return (s.rebuild, Err(e.to_string()), Err(e.to_string())),
    };
    let cf = fit(&bundle.train, hp, s.init).map(|f| evaluate(&bundle, &f.model, args, s.rmse));
    let fcf = run_federated(&bundle.train, hp, s.init, None).map(|r| {
        if !r.skipped.is_empty() {
            log::warn!(
                "rebuild {}: {} client updates skipped",
                s.rebuild,
                r.skipped.len()
            );
        }
        evaluate(&bundle, &r.model, args, s.rmse)
    });
    log::info!("rebuild {} done", s.rebuild);
    (
        s.rebuild,
        cf.map_err(|e| e.to_string()),
        fcf.map_err(|e| e.to_string()),
    )
}

/// Writes `metrics.csv`, `diff.csv`, `posterior_<metric>.json`,
/// `failures.csv` and, with `--grid-search`, `grid.csv`.
pub fn cmd_compare(args: &CompareArgs) -> Result<CompareOutcome> {
    let mut hp = args.model_args.resolve(compare_defaults(), args.alpha);
    hp.validate()?;
    if args.rebuilds < 2 {
        anyhow::bail!(Error::InsufficientSamples {
            needed: 2,
            got: args.rebuilds
        });
    }
    let (store, dataset) = load_dataset(&args.data, args.seed)?;
    create_out_dir(&args.out)?;
    let rebuild_seeds: Vec<RebuildSeeds> =
        (0..args.rebuilds).map(|r| seeds(args.seed, r)).collect();

    let grid_init_seed = args.grid_search.then(|| derive_seed(args.seed, "grid", 0));
    let grid = match grid_init_seed {
        Some(init) => {
            let bundle = split(&store, &SplitSpec::new(rebuild_seeds[0].split))?;
            let g = grid_search(&bundle, &hp, args.top_k, init)?;
            hp = g.apply(&hp);
            let mut w = create_file(&args.out.join("grid.csv"))?;
            writeln!(w, "k,alpha,lambda,validation_f1")?;
            for p in &g.evaluated {
                writeln!(w, "{},{},{},{}", p.k, p.alpha, p.lambda, p.score)?;
            }
            finish(w)?;
            Some(g)
        }
        None => None,
    };
    let resolved = Resolved {
        hp: &hp,
        dataset: &dataset,
        grid_init_seed,
        rebuilds: rebuild_seeds,
    };
    write_config(&args.out, &Command::Compare(args.clone()), &resolved)?;

    let results: Vec<RebuildResult> = resolved
        .rebuilds
        .par_iter()
        .map(|s| rebuild(&store, &hp, args, s))
        .collect();

    let mut cf = MetricsReport::new("cf");
    let mut fcf = MetricsReport::new("fcf");
    let mut failures = Vec::new();
    for (r, a, b) in results {
        for (name, res, report) in [("cf", a, &mut cf), ("fcf", b, &mut fcf)] {
            match res {
                Ok(v) => report.rebuilds.push((r, v)),
                Err(error) => {
                    log::error!("rebuild {r} {name} failed: {error}");
                    failures.push(RebuildFailure {
                        rebuild: r,
                        model: name,
                        error,
                    });
                }
            }
        }
    }

    let mut w = create_file(&args.out.join("metrics.csv"))?;
    MetricsReport::write_csv_header(&mut w)?;
    cf.write_csv_rows(&mut w)?;
    fcf.write_csv_rows(&mut w)?;
    finish(w)?;

    let mut w = create_file(&args.out.join("failures.csv"))?;
    writeln!(w, "rebuild,model,error")?;
    for f in &failures {
        writeln!(
            w,
            "{},{},\"{}\"",
            f.rebuild,
            f.model,
            f.error.replace('"', "'")
        )?;
    }
    finish(w)?;

    if cf.rebuilds.is_empty() || fcf.rebuilds.is_empty() {
        anyhow::bail!(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let diffs: Vec<DiffRow> = METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(m, &metric)| DiffRow {
            metric,
            cf_mean: cf.mean(m),
            cf_std: cf.std(m),
            fcf_mean: fcf.mean(m),
            fcf_std: fcf.std(m),
            diff_percent: diff_percent(fcf.mean(m), cf.mean(m)).ok(),
        })
        .collect();
    let mut w = create_file(&args.out.join("diff.csv"))?;
    writeln!(w, "metric,cf_mean,cf_std,fcf_mean,fcf_std,diff_percent")?;
    for d in &diffs {
        let pct = d.diff_percent.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{pct}",
            d.metric, d.cf_mean, d.cf_std, d.fcf_mean, d.fcf_std
        )?;
    }
    finish(w)?;

    // paired on rebuilds where both models succeeded
    let paired: Vec<(MetricValues, MetricValues)> = cf
        .rebuilds
        .iter()
        .filter_map(|(r, a)| {
            fcf.rebuilds
                .iter()
                .find(|(q, _)| q == r)
                .map(|(_, b)| (*a, *b))
        })
        .collect();
    let mut posteriors = Vec::new();
    for (m, &metric) in METRIC_NAMES.iter().enumerate() {
        let a: Vec<f64> = paired.iter().map(|(_, f)| f.as_array()[m]).collect();
        let b: Vec<f64> = paired.iter().map(|(c, _)| c.as_array()[m]).collect();
        let summary = bayes_correlated_ttest(&a, &b, args.rope, args.rho)
            .with_context(|| format!("posterior for {metric}"))?;
        let record = PosteriorRecord {
            metric: metric.to_string(),
            summary,
        };
        let mut json = serde_json::to_string_pretty(&record)?;
        json.push('\n');
        std::fs::write(args.out.join(format!("posterior_{metric}.json")), json)?;
        posteriors.push(record);
    }

    Ok(CompareOutcome {
        hp,
        cf,
        fcf,
        diffs,
        posteriors,
        failures,
        grid,
    })
}
