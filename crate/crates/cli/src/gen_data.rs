use anyhow::{bail, Result};
use fedcf::data::{generate_simulated, write_cache, DatasetCheck, GeneratorParams, Preset};
use serde::Serialize;

use crate::args::{Command, GenDataArgs};
use crate::common::{create_out_dir, data_seed, write_config};

#[derive(Debug, Clone, Serialize)]
pub struct GenDataOutcome {
    pub params: GeneratorParams,
    pub generator_seed: u64,
    pub check: DatasetCheck,
}

pub fn resolve_params(args: &GenDataArgs) -> Result<GeneratorParams> {
    let mut p = match args.preset {
        Some(preset) => Preset::from(preset).params(),
        None => {
            let (Some(n_users), Some(n_items)) = (args.users, args.items) else {
                bail!(fedcf::Error::InvalidHyperParams(
                    "--users and --items are required without --preset".into()
                ));
            };
            GeneratorParams {
                n_users,
                n_items,
                density: 0.2,
                min_views_per_user: 1,
            }
        }
    };
    p.n_users = args.users.unwrap_or(p.n_users);
    p.n_items = args.items.unwrap_or(p.n_items);
    p.density = args.density.unwrap_or(p.density);
    p.min_views_per_user = args
        .min_views
        .unwrap_or(p.min_views_per_user)
        .min(p.n_items);
    Ok(p)
}

pub fn cmd_gen_data(args: &GenDataArgs) -> Result<GenDataOutcome> {
    let params = resolve_params(args)?;
    let generator_seed = data_seed(args.seed);
    let store = generate_simulated(&params, generator_seed)?;
    let check = DatasetCheck::of(&store);
    if !check.satisfies(&params) {
        bail!(fedcf::Error::Infeasible(format!(
            "generated data fails validation: {check:?}"
        )));
    }
    create_out_dir(&args.out)?;
    let provenance = match args.preset {
        Some(p) => format!("{:?}", Preset::from(p)),
        None => "custom".to_string(),
    };
    write_cache(&args.out, &store, Some(generator_seed), &provenance)?;
    let outcome = GenDataOutcome {
        params,
        generator_seed,
        check,
    };
    write_config(&args.out, &Command::GenData(args.clone()), &outcome)?;
    log::info!(
        "{}x{} interactions, density {:.4}, written to {}",
        params.n_users,
        params.n_items,
        check.density,
        args.out.display()
    );
    Ok(outcome)
}
