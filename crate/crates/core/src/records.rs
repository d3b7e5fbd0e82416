//! Replayable run records.
//!
//! Every experiment writes a `RunRecord`: the command, input digest, the
//! full effective parameter set, the seed, and the solution payload.
//! Replaying a record (same digests, same seed) reproduces the payload
//! byte-for-byte; wall time and similar observational fields live outside
//! the payload.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::numerics::DenseMatrix;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub instance_digest: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    /// The deterministic solution payload; replay compares these bytes.
    pub payload: serde_json::Value,
    pub objective: Option<f64>,
    pub oracle_value: Option<f64>,
    pub gap: Option<f64>,
    pub wall_time_ms: f64,
    pub artifact_version: String,
    pub constants_digest: String,
    pub non_exhaustive: bool,
}

impl RunRecord {
    pub fn payload_bytes(&self) -> Vec<u8> {
        // serde_json maps are BTree-backed, so serialization is canonical
        serde_json::to_vec(&self.payload).expect("payload serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn digest_matrix(a: &DenseMatrix) -> String {
    let mut bytes = Vec::with_capacity(16 + a.entries().len() * 8);
    bytes.extend_from_slice(&(a.rows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(a.cols() as u64).to_le_bytes());
    for e in a.entries() {
        bytes.extend_from_slice(&e.to_bits().to_le_bytes());
    }
    digest_bytes(&bytes)
}
