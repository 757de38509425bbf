//! CSV rendering and the JSON metadata sidecar.
//!
//! CSV uses `,` as separator, `.` as decimal mark, a header row, and Rust's
//! shortest round-trip float formatting, so equal results give equal bytes.

use serde::{Deserialize, Serialize};

use super::{QqResult, SweepResult, TableResult};

impl TableResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,n,method,mean,se,replications,max_coincident\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.p,
                c.n,
                c.method.label(),
                c.mean,
                c.se,
                c.replications,
                c.max_coincident
            ));
        }
        s
    }
}

impl QqResult {
    pub fn to_csv(&self) -> String {
        let m = self.empirical.len();
        let mut s = String::from("k,probability,empirical,reference\n");
        for (k, (e, r)) in self.empirical.iter().zip(&self.reference).enumerate() {
            let prob = (k as f64 + 0.5) / m as f64;
            s.push_str(&format!("{},{},{},{}\n", k + 1, prob, e, r));
        }
        s
    }
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,n,method,mean_abs_error,se,replications\n");
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.gamma,
                c.n,
                c.method.label(),
                c.mean_abs_error,
                c.se,
                c.replications
            ));
        }
        s
    }
}

/// FNV-1a over the canonical JSON of a config.
pub fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(config).unwrap_or_default();
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub experiment: String,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub master_seed: u64,
    pub rng: String,
    pub versions: serde_json::Value,
    pub workers: usize,
    pub wall_time_seconds: f64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl ExperimentMetadata {
    pub fn new(
        experiment: &str,
        config: serde_json::Value,
        master_seed: u64,
        workers: usize,
        wall_time_seconds: f64,
    ) -> Self {
        ExperimentMetadata {
            experiment: experiment.into(),
            config_hash: config_hash(&config),
            config,
            master_seed,
            rng: "ChaCha8 (rand_chacha), seed_from_u64(master_seed), stream = cell << 32 | replication"
                .into(),
            versions: serde_json::json!({ "signcov": env!("CARGO_PKG_VERSION") }),
            workers,
            wall_time_seconds,
            extra: serde_json::Value::Null,
        }
    }
}
