use std::io::Write;

use anyhow::Result;
use fedcf::seed::derive_seed;
use fedcf::server::RoundLog;
use fedcf::{AlsSolver, Federation, HyperParams};
use serde::Serialize;

use crate::args::{Command, ModelKind, TrainArgs};
use crate::common::{create_file, create_out_dir, finish, load_dataset, write_config};

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub hp: HyperParams,
    pub init_seed: u64,
    pub dataset: String,
    /// `J` before training, then after each epoch.
    pub cost_trace: Vec<f64>,
    pub skipped_clients: usize,
}

#[derive(Debug, Serialize)]
struct Resolved<'a> {
    hp: &'a HyperParams,
    init_seed: u64,
    dataset: &'a str,
}

/// Trains on the whole dataset; writes `model.json`, `cost.csv`
/// (`epoch,cost`) and, for the federated model, `skipped_clients.csv`.
pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    let hp = args.model_args.resolve(HyperParams::default(), args.alpha);
    hp.validate()?;
    let (store, dataset) = load_dataset(&args.data, args.seed)?;
    let init_seed = derive_seed(args.seed, "init", 0);
    create_out_dir(&args.out)?;
    let resolved = Resolved {
        hp: &hp,
        init_seed,
        dataset: &dataset,
    };
    write_config(&args.out, &Command::Train(args.clone()), &resolved)?;

    let mut cost_trace = Vec::with_capacity(hp.epochs + 1);
    let mut skipped_clients = 0;
    let model_json = match args.model {
        ModelKind::Cf => {
            let mut solver = AlsSolver::new(&store, &hp, init_seed)?;
            cost_trace.push(solver.cost()?);
            for _ in 0..hp.epochs {
                solver.epoch()?;
                cost_trace.push(solver.cost()?);
            }
            serde_json::to_string(solver.model())?
        }
        ModelKind::Fcf => {
            let mut fed = Federation::new(&store, &hp, init_seed)?;
            if args.round_log {
                fed = fed.with_round_log(RoundLog::create(args.out.join("rounds"))?);
            }
            cost_trace.push(fed.cost(&store)?);
            for _ in 0..hp.epochs {
                fed.run_epoch()?;
                cost_trace.push(fed.cost(&store)?);
            }
            let mut w = create_file(&args.out.join("skipped_clients.csv"))?;
            writeln!(w, "epoch,client_id,reason")?;
            for s in fed.skipped() {
                writeln!(
                    w,
                    "{},{},\"{}\"",
                    s.epoch,
                    s.client_id,
                    s.reason.replace('"', "'")
                )?;
            }
            finish(w)?;
            skipped_clients = fed.skipped().len();
            serde_json::to_string(&fed.model())?
        }
    };
    std::fs::write(args.out.join("model.json"), model_json + "\n")?;

    let mut w = create_file(&args.out.join("cost.csv"))?;
    writeln!(w, "epoch,cost")?;
    for (epoch, c) in cost_trace.iter().enumerate() {
        writeln!(w, "{epoch},{c}")?;
    }
    finish(w)?;

    Ok(TrainOutcome {
        hp,
        init_seed,
        dataset,
        cost_trace,
        skipped_clients,
    })
}
