//! Experiment commands for the `fedcf` binary. Each command writes its
//! artifacts plus a `config.json` echo to its output directory and returns
//! what it computed.

pub mod args;
pub mod common;
pub mod compare;
pub mod convergence;
pub mod gen_data;
pub mod train;

use std::path::Path;

use anyhow::{Context, Result};

pub use args::{Cli, Command};
pub use compare::{cmd_compare, CompareOutcome};
pub use convergence::{cmd_convergence, ConvergenceRun};
pub use gen_data::cmd_gen_data;
pub use train::cmd_train;

/// Process exit codes by failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const BAD_INPUT: i32 = 4;
    pub const INFEASIBLE: i32 = 5;
    pub const DIVERGED: i32 = 6;
    pub const SINGULAR: i32 = 7;
    pub const EVALUATION: i32 = 8;
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    use fedcf::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidHyperParams(_) => exit::USAGE,
                E::Io(_) => exit::IO,
                E::Parse { .. }
                | E::InvalidInteractions(_)
                | E::EmptyInput(_)
                | E::Json(_)
                | E::MalformedPayload(_)
                | E::DimensionMismatch { .. }
                | E::IndexOutOfRange { .. } => exit::BAD_INPUT,
                E::Infeasible(_) => exit::INFEASIBLE,
                E::Diverged { .. } => exit::DIVERGED,
                E::SingularSystem { .. } => exit::SINGULAR,
                E::ZeroReference | E::InsufficientSamples { .. } => exit::EVALUATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return exit::IO;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return exit::BAD_INPUT;
        }
    }
    exit::OTHER
}

/// Reads the command recorded in a `config.json`.
pub fn read_config(path: &Path) -> Result<Command> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("version");
        obj.remove("resolved");
    }
    Ok(serde_json::from_value(value)?)
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::GenData(a) => cmd_gen_data(a).map(|_| ()),
        Command::Train(a) => cmd_train(a).map(|_| ()),
        Command::Convergence(a) => cmd_convergence(a).map(|_| ()),
        Command::Compare(a) => cmd_compare(a).map(|_| ()),
        Command::Rerun(a) => {
            let mut recorded = read_config(&a.config)?;
            if let Some(out) = &a.out {
                match &mut recorded {
                    Command::GenData(c) => c.out = out.clone(),
                    Command::Train(c) => c.out = out.clone(),
                    Command::Convergence(c) => c.out = out.clone(),
                    Command::Compare(c) => c.out = out.clone(),
                    Command::Rerun(_) => {
                        anyhow::bail!(fedcf::Error::InvalidHyperParams("nested rerun".into()))
                    }
                }
            }
            run(&recorded)
        }
    }
}
