//! Federated collaborative filtering for implicit feedback.
//!
//! The crate provides the centralized ALS baseline ([`als`]), the client and
//! server halves of the federated protocol ([`client`], [`server`]), dataset
//! tooling ([`data`]) and evaluation ([`eval`]). In the federated protocol
//! the item factors live on the server, each client solves its own user
//! factor and returns only gradient parts for the item factors; summed over
//! clients these equal the centralized gradient exactly.

pub mod als;
pub mod client;
pub mod data;
pub mod error;
pub mod eval;
pub mod factors;
pub mod interactions;
pub mod model;
pub mod params;
pub mod seed;
pub mod server;
pub mod tuning;

pub use als::{fit, solve_item_factor, solve_user_factor, AlsFit, AlsSolver, CfModel};
pub use client::{ClientPayload, ClientState};
pub use error::{Error, Result};
pub use factors::{init_factors, FactorMatrix};
pub use interactions::InteractionStore;
pub use model::{confidence, cost, grad_x, grad_y, grad_y_all, predict, preference};
pub use params::{BiasCorrection, HyperParams, Optimizer};
pub use server::{
    aggregate, run_federated, AdamState, FederatedModel, FederatedRun, Federation, ServerModel,
};
