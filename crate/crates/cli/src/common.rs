use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use fedcf::data::{generate_simulated, load_movielens, read_cache, Preset};
use fedcf::seed::derive_seed;
use fedcf::InteractionStore;
use serde::Serialize;

use crate::args::{Command, DatasetArgs};

pub const CONFIG_FILE: &str = "config.json";

/// Everything needed to repeat a run: the command as parsed, plus what it
/// resolved to.
#[derive(Debug, Serialize)]
pub struct ConfigEcho<'a, R: Serialize> {
    pub version: &'static str,
    #[serde(flatten)]
    pub command: &'a Command,
    pub resolved: R,
}

pub fn write_config<R: Serialize>(out: &Path, command: &Command, resolved: R) -> Result<()> {
    let echo = ConfigEcho {
        version: env!("CARGO_PKG_VERSION"),
        command,
        resolved,
    };
    let mut json = serde_json::to_string_pretty(&echo)?;
    json.push('\n');
    fs::write(out.join(CONFIG_FILE), json)
        .with_context(|| format!("writing {}", out.join(CONFIG_FILE).display()))?;
    Ok(())
}

pub fn create_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

pub fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn finish(mut w: BufWriter<fs::File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// Seed of the simulated dataset for a given master seed.
pub fn data_seed(seed: u64) -> u64 {
    derive_seed(seed, "data", 0)
}

/// Loads or generates the interactions and describes where they came from.
pub fn load_dataset(args: &DatasetArgs, seed: u64) -> Result<(InteractionStore, String)> {
    match (&args.dataset, args.preset) {
        (Some(path), None) => {
            if path.is_dir() {
                let (store, header) = read_cache(path)
                    .with_context(|| format!("reading cache {}", path.display()))?;
                Ok((
                    store,
                    format!("cache {} ({})", path.display(), header.provenance),
                ))
            } else {
                let ml = load_movielens(path, args.id_mapping.into())
                    .with_context(|| format!("loading {}", path.display()))?;
                Ok((ml.interactions, format!("movielens {}", path.display())))
            }
        }
        (None, Some(preset)) => {
            let preset: Preset = preset.into();
            let store = generate_simulated(&preset.params(), data_seed(seed))?;
            Ok((store, format!("{preset:?} seed {}", data_seed(seed))))
        }
        _ => bail!(fedcf::Error::InvalidHyperParams(
            "exactly one of --dataset and --preset is required".into()
        )),
    }
}
