//! Client side of the federated protocol.
//!
//! A client owns exactly one user's interaction row. Per round it receives
//! the master item factors `Y`, re-solves its own user factor locally and
//! reports `f(u, i) = c_ui (p_ui − x_uᵀ y_i) x_u` for every item. Only these
//! gradient parts leave the client.

use crate::als::solve_side;
use crate::error::{Error, Result};
use crate::factors::{axpy, dot, FactorMatrix};
use crate::interactions::Entry;
use crate::model::{confidence, preference};
use crate::params::HyperParams;

#[derive(Debug, Clone)]
pub struct ClientState {
    client_id: usize,
    user_row: Vec<Entry>,
    x_u: Vec<f64>,
}

/// One client's additive contribution to the item-factor gradient; column
/// `i` holds `f(u, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientPayload {
    pub grads: FactorMatrix,
}

impl ClientState {
    pub fn new(client_id: usize, user_row: Vec<Entry>, x_u: Vec<f64>) -> Self {
        debug_assert!(user_row.windows(2).all(|w| w[0].0 < w[1].0));
        Self {
            client_id,
            user_row,
            x_u,
        }
    }

    pub fn client_id(&self) -> usize {
        self.client_id
    }

    pub fn user_factor(&self) -> &[f64] {
        &self.x_u
    }

    /// Replaces `x_u` by its closed-form optimum against `y`.
    pub fn update_user_factor(&mut self, y: &FactorMatrix, hp: &HyperParams) -> Result<()> {
        let id = self.client_id;
        self.x_u = solve_side(self.user_row.iter().copied(), y, &y.gram(), hp, || {
            format!("client {id}")
        })?;
        Ok(())
    }

    /// `f(u, i)` for every item against the current `x_u`.
    pub fn item_gradients(&self, y: &FactorMatrix, hp: &HyperParams) -> Result<ClientPayload> {
        if y.k() != self.x_u.len() {
            return Err(Error::DimensionMismatch {
                context: "client latent dimension",
                expected: self.x_u.len(),
                actual: y.k(),
            });
        }
        let mut grads = FactorMatrix::zeros(y.k(), y.n_cols());
        let mut observed = self.user_row.iter().peekable();
        for (i, (out, y_i)) in grads.cols_mut().zip(y.cols()).enumerate() {
            let s = dot(&self.x_u, y_i);
            let weight = match observed.next_if(|&&(j, _)| j as usize == i) {
                Some(&(_, r)) => {
                    let r = r as f64;
                    confidence(r, hp.alpha) * (preference(r) - s)
                }
                // c = 1, p = 0
                None => -s,
            };
            axpy(weight, &self.x_u, out);
        }
        Ok(ClientPayload { grads })
    }

    /// One full client round: local user-factor update, then the gradient
    /// parts against the same `y`.
    pub fn client_update(&mut self, y: &FactorMatrix, hp: &HyperParams) -> Result<ClientPayload> {
        self.update_user_factor(y, hp)?;
        self.item_gradients(y, hp)
    }
}

impl ClientPayload {
    pub fn k(&self) -> usize {
        self.grads.k()
    }

    pub fn n_items(&self) -> usize {
        self.grads.n_cols()
    }

    /// `k` and `n_items` as little-endian `u64`, followed by the column-major
    /// block as little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let values = self.grads.values();
        let mut out = Vec::with_capacity(16 + 8 * values.len());
        out.extend_from_slice(&(self.k() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_items() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = |at: usize| -> Result<usize> {
            let raw: [u8; 8] = bytes
                .get(at..at + 8)
                .and_then(|s| s.try_into().ok())
                .ok_or_else(|| Error::MalformedPayload("truncated header".into()))?;
            usize::try_from(u64::from_le_bytes(raw))
                .map_err(|_| Error::MalformedPayload("dimension overflows usize".into()))
        };
        let k = header(0)?;
        let m = header(8)?;
        let body = &bytes[16..];
        let expected = k
            .checked_mul(m)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::MalformedPayload("dimension overflow".into()))?;
        if body.len() != expected {
            return Err(Error::MalformedPayload(format!(
                "expected {expected} body bytes for {k}x{m}, got {}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let grads = FactorMatrix::from_values(k, m, values)
            .map_err(|e| Error::MalformedPayload(e.to_string()))?;
        Ok(Self { grads })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_round() {
        let y = FactorMatrix::from_values(1, 1, vec![1.0]).unwrap();
        let hp = HyperParams {
            k: 1,
            ..Default::default()
        };
        let mut c = ClientState::new(0, vec![(0, 1)], vec![0.0]);
        let p = c.client_update(&y, &hp).unwrap();
        assert!((c.user_factor()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.grads.values()[0] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn empty_client_sends_zeros() {
        let y = FactorMatrix::from_values(2, 3, vec![0.1, 0.5, 0.3, 0.2, 0.9, 0.4]).unwrap();
        let hp = HyperParams {
            k: 2,
            ..Default::default()
        };
        let mut c = ClientState::new(4, vec![], vec![1.0, 1.0]);
        let p = c.client_update(&y, &hp).unwrap();
        assert_eq!(c.user_factor(), &[0.0, 0.0]);
        assert!(p.grads.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn payload_bytes_round_trip_and_reject_truncation() {
        let grads = FactorMatrix::from_values(2, 2, vec![1.5, -0.25, 3.0, 1e-300]).unwrap();
        let p = ClientPayload { grads };
        let bytes = p.to_bytes();
        assert_eq!(bytes.len(), 16 + 32);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(ClientPayload::from_bytes(&bytes).unwrap(), p);
        assert!(ClientPayload::from_bytes(&bytes[..40]).is_err());
        assert!(ClientPayload::from_bytes(&bytes[..10]).is_err());
    }
}
