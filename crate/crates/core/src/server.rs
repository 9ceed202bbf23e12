//! Server side of the federated protocol and the simulated federation.
//!
//! The server owns the master item factors `Y`. Each server round it sums
//! the clients' gradient parts into the full item gradient
//! `∂J/∂y_i = −2 Σ_u f(u, i) + 2λ y_i` and steps `Y` with plain gradient
//! descent or Adam. Summation runs in ascending client order, which makes
//! the floating-point result independent of how clients were scheduled.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::client::{ClientPayload, ClientState};
use crate::error::{Error, Result};
use crate::eval::convergence::{divergence_e, ConvergenceTrace, TraceReference, TraceRow};
use crate::factors::{axpy, init_factors, FactorMatrix};
use crate::interactions::InteractionStore;
use crate::model::cost;
use crate::params::{BiasCorrection, HyperParams, Optimizer};

/// Adam moment accumulators, shaped like `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: FactorMatrix,
    pub v: FactorMatrix,
    /// Number of Adam steps taken.
    pub t: u64,
}

impl AdamState {
    pub fn zeros(k: usize, n_items: usize) -> Self {
        Self {
            m: FactorMatrix::zeros(k, n_items),
            v: FactorMatrix::zeros(k, n_items),
            t: 0,
        }
    }
}

/// Sums the payloads in the order given and adds the regularization term:
/// `G = −2 Σ payloads + 2λ Y`.
pub fn aggregate(
    payloads: &[ClientPayload],
    y: &FactorMatrix,
    lambda: f64,
) -> Result<FactorMatrix> {
    let mut sum = FactorMatrix::zeros(y.k(), y.n_cols());
    for p in payloads {
        if !p.grads.same_shape(y) {
            return Err(Error::DimensionMismatch {
                context: "client payload",
                expected: y.values().len(),
                actual: p.grads.values().len(),
            });
        }
        for (s, g) in sum.values_mut().iter_mut().zip(p.grads.values()) {
            *s += g;
        }
    }
    for (s, yv) in sum.values_mut().iter_mut().zip(y.values()) {
        *s = -2.0 * *s + 2.0 * lambda * yv;
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerModel {
    pub y: FactorMatrix,
    pub adam: AdamState,
    pub hp: HyperParams,
    /// Completed aggregation rounds.
    pub round: usize,
    /// Epoch currently being run (1-based, 0 before the first epoch).
    pub epoch: usize,
}

impl ServerModel {
    pub fn new(y: FactorMatrix, hp: HyperParams) -> Self {
        let adam = AdamState::zeros(y.k(), y.n_cols());
        Self {
            y,
            adam,
            hp,
            round: 0,
            epoch: 0,
        }
    }

    /// Aggregates one round of payloads (ascending client order) and counts
    /// the round.
    pub fn aggregate(&mut self, payloads: &[ClientPayload]) -> Result<FactorMatrix> {
        let g = aggregate(payloads, &self.y, self.hp.lambda)?;
        self.round += 1;
        Ok(g)
    }

    fn diverged(&self) -> Error {
        Error::Diverged {
            epoch: self.epoch,
            round: self.round,
        }
    }

    fn check_gradient(&self, g: &FactorMatrix) -> Result<()> {
        if !g.same_shape(&self.y) {
            return Err(Error::DimensionMismatch {
                context: "server gradient",
                expected: self.y.values().len(),
                actual: g.values().len(),
            });
        }
        if !g.is_finite() {
            return Err(self.diverged());
        }
        Ok(())
    }

    /// `Y ← Y − γ G`.
    pub fn gd_step(&mut self, g: &FactorMatrix) -> Result<()> {
        self.check_gradient(g)?;
        axpy(-self.hp.gamma, g.values(), self.y.values_mut());
        if !self.y.is_finite() {
            return Err(self.diverged());
        }
        Ok(())
    }

    /// Adam update of `Y` with the configured bias correction.
    pub fn adam_step(&mut self, g: &FactorMatrix) -> Result<()> {
        self.check_gradient(g)?;
        let HyperParams {
            gamma,
            beta1,
            beta2,
            epsilon,
            bias_correction,
            ..
        } = self.hp;
        let adam = &mut self.adam;
        adam.t += 1;
        let (c1, c2) = match bias_correction {
            BiasCorrection::Constant => (1.0 - beta1, 1.0 - beta2),
            BiasCorrection::TimeIndexed => {
                let t = adam.t.min(i32::MAX as u64) as i32;
                (1.0 - beta1.powi(t), 1.0 - beta2.powi(t))
            }
        };
        let rows = self
            .y
            .values_mut()
            .iter_mut()
            .zip(adam.m.values_mut())
            .zip(adam.v.values_mut())
            .zip(g.values());
        for (((y, m), v), &gr) in rows {
            *m = beta1 * *m + (1.0 - beta1) * gr;
            *v = beta2 * *v + (1.0 - beta2) * gr * gr;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *y -= gamma * m_hat / (v_hat.sqrt() + epsilon);
        }
        if !self.y.is_finite() {
            return Err(self.diverged());
        }
        Ok(())
    }

    /// Steps with the configured optimizer.
    pub fn step(&mut self, g: &FactorMatrix) -> Result<()> {
        match self.hp.optimizer {
            Optimizer::PlainGd => self.gd_step(g),
            Optimizer::Adam => self.adam_step(g),
        }
    }
}

/// Writes one binary payload file per (round, client) plus `index.csv`
/// with columns `round,client_id,payload_checksum` (SHA-256, hex).
#[derive(Debug)]
pub struct RoundLog {
    dir: PathBuf,
    index: fs::File,
}

impl RoundLog {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut index = fs::File::create(dir.join("index.csv"))?;
        writeln!(index, "round,client_id,payload_checksum")?;
        Ok(Self { dir, index })
    }

    pub fn payload_path(&self, round: usize, client_id: usize) -> PathBuf {
        self.dir
            .join(format!("round{round:06}_client{client_id:08}.bin"))
    }

    fn record(
        &mut self,
        round: usize,
        client_ids: &[usize],
        payloads: &[ClientPayload],
    ) -> Result<()> {
        for (&id, p) in client_ids.iter().zip(payloads) {
            let bytes = p.to_bytes();
            fs::write(self.payload_path(round, id), &bytes)?;
            writeln!(self.index, "{round},{id},{}", payload_checksum(&bytes))?;
        }
        self.index.flush()?;
        Ok(())
    }
}

pub fn payload_checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A client that could not update in some epoch and sat that epoch out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedClient {
    pub epoch: usize,
    pub client_id: usize,
    pub reason: String,
}

/// Factors of a federated model gathered for evaluation. In a deployment
/// `x` never leaves the clients; the simulation collects it to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedModel {
    pub x: FactorMatrix,
    pub y: FactorMatrix,
    pub hp: HyperParams,
    pub epoch: usize,
}

/// In-process simulation of every client plus the server.
pub struct Federation {
    clients: Vec<ClientState>,
    server: ServerModel,
    reference: Option<TraceReference>,
    trace: ConvergenceTrace,
    skipped: Vec<SkippedClient>,
    round_log: Option<RoundLog>,
}

impl Federation {
    /// One client per user, factors initialized exactly as the centralized
    /// solver would for the same `seed`.
    pub fn new(interactions: &InteractionStore, hp: &HyperParams, seed: u64) -> Result<Self> {
        hp.validate()?;
        let (x, y) = init_factors(
            hp.k,
            interactions.n_users(),
            interactions.n_items(),
            hp.init_scale,
            seed,
        );
        let clients = (0..interactions.n_users())
            .map(|u| ClientState::new(u, interactions.row(u).collect(), x.col(u).to_vec()))
            .collect();
        Ok(Self {
            clients,
            server: ServerModel::new(y, hp.clone()),
            reference: None,
            trace: ConvergenceTrace::new(),
            skipped: Vec::new(),
            round_log: None,
        })
    }

    pub fn with_reference(mut self, reference: TraceReference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_round_log(mut self, log: RoundLog) -> Self {
        self.round_log = Some(log);
        self
    }

    pub fn server(&self) -> &ServerModel {
        &self.server
    }

    pub fn trace(&self) -> &ConvergenceTrace {
        &self.trace
    }

    pub fn skipped(&self) -> &[SkippedClient] {
        &self.skipped
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    /// One epoch: every client updates `x_u` once against the current `Y`,
    /// then the server runs `gd_iters_per_epoch` rounds, re-collecting the
    /// gradient parts against each new `Y`.
    pub fn run_epoch(&mut self) -> Result<()> {
        self.server.epoch += 1;
        let epoch = self.server.epoch;
        let hp = self.server.hp.clone();

        let y = &self.server.y;
        let updates: Vec<Result<()>> = self
            .clients
            .par_iter_mut()
            .map(|c| c.update_user_factor(y, &hp))
            .collect();
        let mut active = vec![true; self.clients.len()];
        for (id, res) in updates.into_iter().enumerate() {
            if let Err(e) = res {
                log::warn!("epoch {epoch}: client {id} skipped: {e}");
                active[id] = false;
                self.skipped.push(SkippedClient {
                    epoch,
                    client_id: id,
                    reason: e.to_string(),
                });
            }
        }

        for gd_iter in 1..=hp.gd_iters_per_epoch {
            let y = &self.server.y;
            let collected: Vec<(usize, Result<ClientPayload>)> = self
                .clients
                .par_iter()
                .filter(|c| active[c.client_id()])
                .map(|c| (c.client_id(), c.item_gradients(y, &hp)))
                .collect();
            let mut ids = Vec::with_capacity(collected.len());
            let mut payloads = Vec::with_capacity(collected.len());
            for (id, p) in collected {
                ids.push(id);
                payloads.push(p?);
            }
            let g = self.server.aggregate(&payloads)?;
            if let Some(log) = &mut self.round_log {
                log.record(self.server.round, &ids, &payloads)?;
            }
            self.server.step(&g)?;
            if let Some(reference) = self.reference.as_ref().and_then(|r| r.for_epoch(epoch)) {
                self.trace.push(TraceRow {
                    epoch,
                    gd_iter,
                    e_percent: divergence_e(&self.server.y, reference)?,
                });
            }
        }
        Ok(())
    }

    /// Runs the configured number of epochs.
    pub fn run(&mut self) -> Result<()> {
        for _ in 0..self.server.hp.epochs {
            self.run_epoch()?;
        }
        Ok(())
    }

    /// Current user factors, column `u` from client `u`.
    pub fn user_factors(&self) -> FactorMatrix {
        let k = self.server.y.k();
        let values = self
            .clients
            .iter()
            .flat_map(|c| c.user_factor().iter().copied())
            .collect();
        FactorMatrix::from_values(k, self.clients.len(), values)
            .expect("client factors have length k")
    }

    pub fn model(&self) -> FederatedModel {
        FederatedModel {
            x: self.user_factors(),
            y: self.server.y.clone(),
            hp: self.server.hp.clone(),
            epoch: self.server.epoch,
        }
    }

    /// Objective at the current federated factors.
    pub fn cost(&self, interactions: &InteractionStore) -> Result<f64> {
        cost(
            &self.user_factors(),
            &self.server.y,
            interactions,
            &self.server.hp,
        )
    }
}

/// Output of [`run_federated`].
#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub server: ServerModel,
    pub model: FederatedModel,
    pub trace: ConvergenceTrace,
    pub skipped: Vec<SkippedClient>,
}

/// Runs the full federated protocol for `hp.epochs` epochs, recording the
/// divergence from `reference` after every server round when one is given.
pub fn run_federated(
    interactions: &InteractionStore,
    hp: &HyperParams,
    seed: u64,
    reference: Option<TraceReference>,
) -> Result<FederatedRun> {
    let mut fed = Federation::new(interactions, hp, seed)?;
    if let Some(r) = reference {
        fed = fed.with_reference(r);
    }
    fed.run()?;
    Ok(FederatedRun {
        model: fed.model(),
        server: fed.server.clone(),
        trace: fed.trace.clone(),
        skipped: fed.skipped.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn server(hp: HyperParams, y: Vec<f64>) -> ServerModel {
        let k = hp.k;
        let n = y.len() / k;
        ServerModel::new(FactorMatrix::from_values(k, n, y).unwrap(), hp)
    }

    #[test]
    fn aggregate_without_clients_or_regularization_is_zero() {
        let y = FactorMatrix::from_values(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = aggregate(&[], &y, 0.0).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregate_single_client() {
        let y = FactorMatrix::from_values(1, 2, vec![1.0, 2.0]).unwrap();
        let p = ClientPayload {
            grads: FactorMatrix::from_values(1, 2, vec![0.5, -3.0]).unwrap(),
        };
        let g = aggregate(std::slice::from_ref(&p), &y, 0.0).unwrap();
        assert_eq!(g.values(), &[-1.0, 6.0]);
        let bad = ClientPayload {
            grads: FactorMatrix::zeros(1, 3),
        };
        assert!(aggregate(&[bad], &y, 0.0).is_err());
    }

    #[test]
    fn gd_step_examples() {
        let hp = HyperParams {
            k: 2,
            ..Default::default()
        };
        let mut s = server(hp, vec![1.0, 2.0, 3.0, 4.0]);
        s.gd_step(&FactorMatrix::zeros(2, 2)).unwrap();
        assert_eq!(s.y.values(), &[1.0, 2.0, 3.0, 4.0]);
        s.gd_step(&FactorMatrix::from_values(2, 2, vec![1.0; 4]).unwrap())
            .unwrap();
        for (a, b) in s.y.values().iter().zip([0.95, 1.95, 2.95, 3.95]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_reports_round() {
        let hp = HyperParams {
            k: 1,
            ..Default::default()
        };
        let mut s = server(hp, vec![1.0]);
        s.round = 7;
        s.epoch = 2;
        let g = FactorMatrix::from_values(1, 1, vec![f64::NAN]).unwrap();
        assert!(matches!(
            s.gd_step(&g),
            Err(Error::Diverged { epoch: 2, round: 7 })
        ));
        assert!(matches!(s.adam_step(&g), Err(Error::Diverged { .. })));
    }

    #[test]
    fn adam_zero_gradient_from_zero_state() {
        let hp = HyperParams {
            k: 1,
            ..HyperParams::adam()
        };
        let mut s = server(hp, vec![0.3, -0.7]);
        s.adam_step(&FactorMatrix::zeros(1, 2)).unwrap();
        assert_eq!(s.y.values(), &[0.3, -0.7]);
    }

    #[test]
    fn adam_first_step_moves_by_gamma_times_sign() {
        let hp = HyperParams {
            k: 1,
            ..HyperParams::adam()
        };
        let mut s = server(hp.clone(), vec![0.0, 0.0]);
        let g = FactorMatrix::from_values(1, 2, vec![3.0, -0.5]).unwrap();
        s.adam_step(&g).unwrap();
        let expect = |gv: f64| -hp.gamma * gv / (gv.abs() + hp.epsilon);
        assert!((s.y.values()[0] - expect(3.0)).abs() < 1e-15);
        assert!((s.y.values()[1] - expect(-0.5)).abs() < 1e-15);
        assert!((s.y.values()[0] + 0.2).abs() < 1e-8);
    }

    #[test]
    fn time_indexed_correction_matches_constant_on_first_step() {
        let g = FactorMatrix::from_values(1, 2, vec![3.0, -0.5]).unwrap();
        let mut a = server(
            HyperParams {
                k: 1,
                ..HyperParams::adam()
            },
            vec![0.0, 0.0],
        );
        let mut b = server(
            HyperParams {
                k: 1,
                bias_correction: BiasCorrection::TimeIndexed,
                ..HyperParams::adam()
            },
            vec![0.0, 0.0],
        );
        a.adam_step(&g).unwrap();
        b.adam_step(&g).unwrap();
        assert_eq!(a.y, b.y);
        a.adam_step(&g).unwrap();
        b.adam_step(&g).unwrap();
        assert_ne!(a.y, b.y);
    }
}
