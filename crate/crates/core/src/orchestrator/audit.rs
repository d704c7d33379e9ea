//! Hash-chained audit records.
//!
//! A record's chain hash is `sha256(prev_hash ‖ payload_hash ‖ seq)` over the
//! raw 32-byte digests and the big-endian 8-byte sequence number. The first
//! record links to 64 zero hex digits.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{canonical_bytes, sha256, AgentMessage, AuditRecord};

pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

pub fn payload_hash(message: &AgentMessage) -> String {
    hex::encode(sha256(&canonical_bytes(message)))
}

fn digest32(hex_str: &str) -> Option<[u8; 32]> {
    let mut out = [0u8; 32];
    hex::decode_to_slice(hex_str, &mut out).ok()?;
    Some(out)
}

/// Chain hash of a record. `None` when a stored digest is not 64 hex digits.
pub fn chain_hash(record: &AuditRecord) -> Option<String> {
    let prev = digest32(&record.prev_hash)?;
    let payload = digest32(&record.payload_hash)?;
    let mut h = Sha256::new();
    h.update(prev);
    h.update(payload);
    h.update(record.seq.to_be_bytes());
    Some(hex::encode(h.finalize()))
}

/// Builds the record that would follow `chain`.
pub fn next_record(chain: &[AuditRecord], message: AgentMessage) -> AuditRecord {
    let prev_hash = chain
        .last()
        .map(|r| chain_hash(r).expect("records built here carry valid digests"))
        .unwrap_or_else(|| GENESIS_HASH.to_string());
    AuditRecord {
        seq: chain.len() as u64,
        prev_hash,
        payload_hash: payload_hash(&message),
        message,
    }
}

pub fn append_audit(chain: &mut Vec<AuditRecord>, message: AgentMessage) -> &AuditRecord {
    let record = next_record(chain, message);
    chain.push(record);
    chain.last().expect("just pushed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub valid: bool,
    pub first_bad_seq: Option<u64>,
}

/// Recomputes every link. The first record whose sequence number, payload
/// hash or back-link does not match is reported.
pub fn verify_audit_chain(chain: &[AuditRecord]) -> ChainCheck {
    let mut expected_prev = GENESIS_HASH.to_string();
    for (i, record) in chain.iter().enumerate() {
        let ok = record.seq == i as u64
            && record.prev_hash == expected_prev
            && record.payload_hash == payload_hash(&record.message);
        if !ok {
            return ChainCheck { valid: false, first_bad_seq: Some(i as u64) };
        }
        match chain_hash(record) {
            Some(h) => expected_prev = h,
            None => return ChainCheck { valid: false, first_bad_seq: Some(i as u64) },
        }
    }
    ChainCheck { valid: true, first_bad_seq: None }
}

/// Position of a per-claim record in the global order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalEntry {
    pub global_seq: u64,
    pub claim_id: String,
    pub seq: u64,
}

#[derive(Default)]
struct LogState {
    chains: BTreeMap<String, Vec<AuditRecord>>,
    global: Vec<GlobalEntry>,
}

/// Per-claim audit chains with a global sequence across claims. When a
/// directory is set each claim's chain is also appended to
/// `<dir>/<claim_id>.jsonl`.
pub struct AuditLog {
    state: Mutex<LogState>,
    dir: Option<PathBuf>,
}

fn chain_file(dir: &Path, claim_id: &str) -> PathBuf {
    let safe: String = claim_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    dir.join(format!("{safe}.jsonl"))
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self { state: Mutex::new(LogState::default()), dir: None }
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { state: Mutex::new(LogState::default()), dir: Some(dir) })
    }

    /// Appends to the claim's chain and returns `(seq, global_seq)`.
    pub fn append(&self, message: AgentMessage) -> io::Result<(u64, u64)> {
        let mut state = self.state.lock();
        let claim_id = message.correlation_id.clone();
        let chain = state.chains.entry(claim_id.clone()).or_default();
        let record = next_record(chain, message);
        if let Some(dir) = &self.dir {
            let mut f = OpenOptions::new().create(true).append(true).open(chain_file(dir, &claim_id))?;
            writeln!(f, "{}", String::from_utf8(canonical_bytes(&record)).expect("json is utf-8"))?;
        }
        let seq = record.seq;
        chain.push(record);
        let global_seq = state.global.len() as u64;
        state.global.push(GlobalEntry { global_seq, claim_id, seq });
        Ok((seq, global_seq))
    }

    pub fn chain(&self, claim_id: &str) -> Option<Vec<AuditRecord>> {
        self.state.lock().chains.get(claim_id).cloned()
    }

    pub fn global_order(&self) -> Vec<GlobalEntry> {
        self.state.lock().global.clone()
    }

    pub fn claim_ids(&self) -> Vec<String> {
        self.state.lock().chains.keys().cloned().collect()
    }
}

/// Reads a chain file written by [`AuditLog`].
pub fn read_chain_file(path: &Path) -> io::Result<Vec<AuditRecord>> {
    let file = std::fs::File::open(path)?;
    io::BufReader::new(file)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l?).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
        .collect()
}

pub fn chain_path(dir: &Path, claim_id: &str) -> PathBuf {
    chain_file(dir, claim_id)
}
