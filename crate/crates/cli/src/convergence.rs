use std::io::Write;

use anyhow::Result;
use fedcf::eval::{ConvergenceTrace, TraceReference};
use fedcf::seed::derive_seed;
use fedcf::{fit, Error, Federation, HyperParams, InteractionStore};
use serde::Serialize;

use crate::args::{Command, ConvergenceArgs, ReferenceArg};
use crate::common::{create_file, create_out_dir, finish, load_dataset, write_config};

/// Defaults for divergence traces: one epoch of plain gradient descent from
/// `U[0, 8/√k)` factors.
pub fn convergence_defaults() -> HyperParams {
    HyperParams {
        epochs: 1,
        init_scale: 8.0,
        ..HyperParams::default()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRun {
    pub alpha: f64,
    pub restart: usize,
    pub init_seed: u64,
    pub epochs_completed: usize,
    /// Set when the federated item factors stopped being finite.
    pub diverged: Option<String>,
    #[serde(skip)]
    pub trace: ConvergenceTrace,
}

impl ConvergenceRun {
    pub fn final_e(&self) -> Option<f64> {
        self.trace.rows().last().map(|r| r.e_percent)
    }
}

#[derive(Debug, Serialize)]
struct Resolved<'a> {
    hp: &'a HyperParams,
    dataset: &'a str,
    init_seeds: Vec<u64>,
}

/// Runs the centralized model and the federation from the same
/// initialization and records `e` after every server round.
pub fn trace_run(
    store: &InteractionStore,
    hp: &HyperParams,
    init_seed: u64,
    reference: ReferenceArg,
) -> Result<(ConvergenceTrace, usize, Option<String>)> {
    let cf = fit(store, hp, init_seed)?;
    let reference = match reference {
        ReferenceArg::PerEpoch => TraceReference::PerEpoch(cf.item_snapshots),
        ReferenceArg::Final => TraceReference::Fixed(cf.model.y),
    };
    let mut fed = Federation::new(store, hp, init_seed)?.with_reference(reference);
    let mut completed = 0;
    let mut diverged = None;
    for _ in 0..hp.epochs {
        match fed.run_epoch() {
            Ok(()) => completed += 1,
            Err(e @ Error::Diverged { .. }) => {
                log::warn!("alpha {}: {e}", hp.alpha);
                diverged = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((fed.trace().clone(), completed, diverged))
}

/// Writes one `trace_alpha<α>_run<r>.csv` per run plus `runs.csv`.
pub fn cmd_convergence(args: &ConvergenceArgs) -> Result<Vec<ConvergenceRun>> {
    let base = args.model_args.resolve(convergence_defaults(), None);
    for &alpha in &args.alpha {
        HyperParams {
            alpha,
            ..base.clone()
        }
        .validate()?;
    }
    if args.restarts == 0 {
        anyhow::bail!(Error::InvalidHyperParams("--restarts must be >= 1".into()));
    }
    let (store, dataset) = load_dataset(&args.data, args.seed)?;
    create_out_dir(&args.out)?;
    let init_seeds: Vec<u64> = (0..args.restarts)
        .map(|r| derive_seed(args.seed, "init", r as u64))
        .collect();
    let resolved = Resolved {
        hp: &base,
        dataset: &dataset,
        init_seeds: init_seeds.clone(),
    };
    write_config(&args.out, &Command::Convergence(args.clone()), &resolved)?;

    let mut runs = Vec::new();
    for &alpha in &args.alpha {
        let hp = HyperParams {
            alpha,
            ..base.clone()
        };
        for (restart, &init_seed) in init_seeds.iter().enumerate() {
            let (trace, epochs_completed, diverged) =
                trace_run(&store, &hp, init_seed, args.reference)?;
            let mut w = create_file(
                &args
                    .out
                    .join(format!("trace_alpha{alpha}_run{restart}.csv")),
            )?;
            trace.write_csv(&mut w)?;
            finish(w)?;
            runs.push(ConvergenceRun {
                alpha,
                restart,
                init_seed,
                epochs_completed,
                diverged,
                trace,
            });
        }
    }

    let mut w = create_file(&args.out.join("runs.csv"))?;
    writeln!(
        w,
        "alpha,run,init_seed,status,epochs_completed,final_e_percent"
    )?;
    for r in &runs {
        let status = if r.diverged.is_some() {
            "diverged"
        } else {
            "completed"
        };
        let final_e = r.final_e().map(|e| e.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{status},{},{final_e}",
            r.alpha, r.restart, r.init_seed, r.epochs_completed
        )?;
    }
    finish(w)?;
    Ok(runs)
}
