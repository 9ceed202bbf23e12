use sha2::{Digest, Sha256};

/// Derives a named sub-seed from a master seed: the first eight bytes of
/// `SHA-256(master ‖ label ‖ index)`, little-endian.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
