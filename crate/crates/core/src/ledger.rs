//! Append-only signed provenance ledger: 264-byte canonical records binding
//! a design hash to vendor and user addresses with up to five references to
//! earlier records, plus recursive ownership tracing.
//!
//! Storage is a flat file of fixed-size entries (payload, signature, public
//! key). References must already exist at push time, which keeps the
//! reference graph acyclic and the trace recursion terminating.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, Rng};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const RECORD_PAYLOAD_LEN: usize = 264;
pub const MAX_REFERENCES: usize = 5;
const ENTRY_LEN: usize = RECORD_PAYLOAD_LEN + 64 + 32;

pub type RecordId = [u8; 32];

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("record {0} not found")]
    NotFound(String),
    #[error("record {0} already exists")]
    DuplicateId(String),
    #[error("reference {0} does not exist yet")]
    DanglingReference(String),
    #[error("{0} references exceed the capacity of {MAX_REFERENCES}")]
    TooManyReferences(usize),
    #[error("references must fill slots contiguously from slot 0")]
    ReferenceGap,
    #[error("signing key address does not match the record's from-address")]
    AddressMismatch,
    #[error("signature verification failed for record {0}")]
    BadSignature(String),
    #[error("ledger file corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn short(id: &RecordId) -> String {
    hex::encode(&id[..8])
}

/// 20-byte address: the leading bytes of the hash of a verification key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub fn of_key(key: &VerifyingKey) -> Address {
        let digest = Sha256::digest(key.as_bytes());
        let mut addr = [0u8; 20];
        addr.copy_from_slice(&digest[..20]);
        Address(addr)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(text: &str) -> Result<Address, LedgerError> {
        let bytes =
            hex::decode(text).map_err(|e| LedgerError::Corrupt(format!("bad address hex: {e}")))?;
        let arr: [u8; 20] = bytes
            .try_into()
            .map_err(|_| LedgerError::Corrupt("address must be 20 bytes".into()))?;
        Ok(Address(arr))
    }
}

impl std::fmt::Debug for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

/// Signing identity; the address derives deterministically from the
/// verification key.
pub struct LedgerKeyPair {
    signing: SigningKey,
}

impl LedgerKeyPair {
    pub fn generate<R: Rng + CryptoRng>(rng: &mut R) -> Self {
        let mut secret = [0u8; 32];
        rng.fill_bytes(&mut secret);
        LedgerKeyPair {
            signing: SigningKey::from_bytes(&secret),
        }
    }

    pub fn from_secret_bytes(secret: &[u8; 32]) -> Self {
        LedgerKeyPair {
            signing: SigningKey::from_bytes(secret),
        }
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }

    pub fn address(&self) -> Address {
        Address::of_key(&self.verifying_key())
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "signing_key": hex::encode(self.secret_bytes()),
            "address": self.address().to_hex(),
        })
        .to_string()
    }

    pub fn from_json(text: &str) -> Result<Self, LedgerError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| LedgerError::Corrupt(e.to_string()))?;
        let sk_hex = value["signing_key"]
            .as_str()
            .ok_or_else(|| LedgerError::Corrupt("missing signing_key".into()))?;
        let bytes = hex::decode(sk_hex).map_err(|e| LedgerError::Corrupt(e.to_string()))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| LedgerError::Corrupt("signing key must be 32 bytes".into()))?;
        Ok(Self::from_secret_bytes(&arr))
    }
}

/// Record content prior to signing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordFields {
    pub id: RecordId,
    pub design_hash: [u8; 32],
    pub from: Address,
    pub to: Address,
    pub references: Vec<RecordId>,
}

impl RecordFields {
    /// Canonical 264-byte payload: id, hash, from, to, five reference slots
    /// (unused slots zero, used slots contiguous from slot 0).
    pub fn canonical_payload(&self) -> Result<[u8; RECORD_PAYLOAD_LEN], LedgerError> {
        if self.references.len() > MAX_REFERENCES {
            return Err(LedgerError::TooManyReferences(self.references.len()));
        }
        if self.references.iter().any(|r| r == &[0u8; 32]) {
            return Err(LedgerError::ReferenceGap);
        }
        let mut payload = [0u8; RECORD_PAYLOAD_LEN];
        payload[0..32].copy_from_slice(&self.id);
        payload[32..64].copy_from_slice(&self.design_hash);
        payload[64..84].copy_from_slice(&self.from.0);
        payload[84..104].copy_from_slice(&self.to.0);
        for (k, reference) in self.references.iter().enumerate() {
            let start = 104 + 32 * k;
            payload[start..start + 32].copy_from_slice(reference);
        }
        Ok(payload)
    }

    fn from_payload(payload: &[u8; RECORD_PAYLOAD_LEN]) -> Result<Self, LedgerError> {
        let mut id = [0u8; 32];
        id.copy_from_slice(&payload[0..32]);
        let mut design_hash = [0u8; 32];
        design_hash.copy_from_slice(&payload[32..64]);
        let mut from = [0u8; 20];
        from.copy_from_slice(&payload[64..84]);
        let mut to = [0u8; 20];
        to.copy_from_slice(&payload[84..104]);
        let mut references = Vec::new();
        let mut seen_zero = false;
        for k in 0..MAX_REFERENCES {
            let start = 104 + 32 * k;
            let mut slot = [0u8; 32];
            slot.copy_from_slice(&payload[start..start + 32]);
            if slot == [0u8; 32] {
                seen_zero = true;
            } else {
                if seen_zero {
                    return Err(LedgerError::ReferenceGap);
                }
                references.push(slot);
            }
        }
        Ok(RecordFields {
            id,
            design_hash,
            from: Address(from),
            to: Address(to),
            references,
        })
    }
}

/// A signed, stored record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerRecord {
    pub fields: RecordFields,
    pub signature: [u8; 64],
    pub public_key: [u8; 32],
}

impl LedgerRecord {
    /// Checks the signature over the canonical payload and that the signer's
    /// key resolves to the from-address.
    pub fn verify(&self) -> Result<(), LedgerError> {
        let key = VerifyingKey::from_bytes(&self.public_key)
            .map_err(|_| LedgerError::BadSignature(short(&self.fields.id)))?;
        if Address::of_key(&key) != self.fields.from {
            return Err(LedgerError::AddressMismatch);
        }
        let payload = self.fields.canonical_payload()?;
        let signature = Signature::from_bytes(&self.signature);
        key.verify(&payload, &signature)
            .map_err(|_| LedgerError::BadSignature(short(&self.fields.id)))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "id": hex::encode(self.fields.id),
            "design_hash": hex::encode(self.fields.design_hash),
            "from": self.fields.from.to_hex(),
            "to": self.fields.to.to_hex(),
            "references": self.fields.references.iter().map(hex::encode).collect::<Vec<_>>(),
        })
        .to_string()
    }

    fn entry_bytes(&self) -> Result<[u8; ENTRY_LEN], LedgerError> {
        let mut entry = [0u8; ENTRY_LEN];
        entry[..RECORD_PAYLOAD_LEN].copy_from_slice(&self.fields.canonical_payload()?);
        entry[RECORD_PAYLOAD_LEN..RECORD_PAYLOAD_LEN + 64].copy_from_slice(&self.signature);
        entry[RECORD_PAYLOAD_LEN + 64..].copy_from_slice(&self.public_key);
        Ok(entry)
    }

    fn from_entry(entry: &[u8]) -> Result<Self, LedgerError> {
        let payload: [u8; RECORD_PAYLOAD_LEN] = entry[..RECORD_PAYLOAD_LEN]
            .try_into()
            .map_err(|_| LedgerError::Corrupt("short entry".into()))?;
        let mut signature = [0u8; 64];
        signature.copy_from_slice(&entry[RECORD_PAYLOAD_LEN..RECORD_PAYLOAD_LEN + 64]);
        let mut public_key = [0u8; 32];
        public_key.copy_from_slice(&entry[RECORD_PAYLOAD_LEN + 64..]);
        Ok(LedgerRecord {
            fields: RecordFields::from_payload(&payload)?,
            signature,
            public_key,
        })
    }
}

/// The ledger: an in-memory index over an append-only entry file (or purely
/// in memory for tests). Single writer; existing bytes never change.
pub struct Ledger {
    path: Option<PathBuf>,
    records: Vec<LedgerRecord>,
    index: HashMap<RecordId, usize>,
}

impl Ledger {
    pub fn in_memory() -> Self {
        Ledger {
            path: None,
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Opens (or creates) a ledger file and loads all entries.
    pub fn open(path: &Path) -> Result<Self, LedgerError> {
        let mut ledger = Ledger {
            path: Some(path.to_path_buf()),
            records: Vec::new(),
            index: HashMap::new(),
        };
        if path.exists() {
            let mut file = File::open(path)?;
            let mut bytes = Vec::new();
            file.read_to_end(&mut bytes)?;
            if bytes.len() % ENTRY_LEN != 0 {
                return Err(LedgerError::Corrupt(format!(
                    "file length {} is not a multiple of the {ENTRY_LEN}-byte entry size",
                    bytes.len()
                )));
            }
            for chunk in bytes.chunks(ENTRY_LEN) {
                let record = LedgerRecord::from_entry(chunk)?;
                let id = record.fields.id;
                let pos = ledger.records.len();
                ledger.records.push(record);
                if ledger.index.insert(id, pos).is_some() {
                    return Err(LedgerError::Corrupt(format!(
                        "duplicate record id {}",
                        short(&id)
                    )));
                }
            }
        }
        Ok(ledger)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Signs and appends a record. Usage-authorization records carry no
    /// references; registration records reference already-pushed ids.
    pub fn push_record(
        &mut self,
        fields: RecordFields,
        key: &LedgerKeyPair,
    ) -> Result<RecordId, LedgerError> {
        if fields.from != key.address() {
            return Err(LedgerError::AddressMismatch);
        }
        if self.index.contains_key(&fields.id) {
            return Err(LedgerError::DuplicateId(short(&fields.id)));
        }
        for reference in &fields.references {
            if !self.index.contains_key(reference) {
                return Err(LedgerError::DanglingReference(short(reference)));
            }
        }
        let payload = fields.canonical_payload()?;
        let signature = key.signing.sign(&payload);
        let record = LedgerRecord {
            fields,
            signature: signature.to_bytes(),
            public_key: key.verifying_key().to_bytes(),
        };
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            file.write_all(&record.entry_bytes()?)?;
            file.sync_data()?;
        }
        let id = record.fields.id;
        let pos = self.records.len();
        self.records.push(record);
        self.index.insert(id, pos);
        Ok(id)
    }

    /// Fetches a record by id, re-verifying its signature on access so a
    /// tampered store is detected at read time.
    pub fn track_record(&self, id: &RecordId) -> Result<&LedgerRecord, LedgerError> {
        let pos = *self
            .index
            .get(id)
            .ok_or_else(|| LedgerError::NotFound(short(id)))?;
        let record = &self.records[pos];
        record.verify()?;
        Ok(record)
    }

    /// Recursive ownership trace: the union of from-addresses at
    /// reference-free leaves, deduplicated. Every visited record's signature
    /// is re-verified; a failure aborts with the offending id.
    pub fn trace_soft_ip(&self, id: &RecordId) -> Result<BTreeSet<Address>, LedgerError> {
        let mut vendors = BTreeSet::new();
        let mut visited = BTreeSet::new();
        self.trace_inner(id, &mut vendors, &mut visited)?;
        Ok(vendors)
    }

    fn trace_inner(
        &self,
        id: &RecordId,
        vendors: &mut BTreeSet<Address>,
        visited: &mut BTreeSet<RecordId>,
    ) -> Result<(), LedgerError> {
        if !visited.insert(*id) {
            return Ok(());
        }
        let record = self.track_record(id)?;
        if record.fields.references.is_empty() {
            vendors.insert(record.fields.from);
            return Ok(());
        }
        for reference in record.fields.references.clone() {
            self.trace_inner(&reference, vendors, visited)?;
        }
        Ok(())
    }

    /// Test hook: returns a mutable record reference without re-indexing.
    #[doc(hidden)]
    pub fn record_mut_for_tamper_test(&mut self, id: &RecordId) -> Option<&mut LedgerRecord> {
        let pos = *self.index.get(id)?;
        self.records.get_mut(pos)
    }
}

/// Design hash helper for record construction.
pub fn hash_design_bytes(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn keypair(seed: u64) -> LedgerKeyPair {
        let mut rng = StdRng::seed_from_u64(seed);
        LedgerKeyPair::generate(&mut rng)
    }

    fn fields(id: u8, key: &LedgerKeyPair, to: Address, refs: Vec<RecordId>) -> RecordFields {
        RecordFields {
            id: [id; 32],
            design_hash: hash_design_bytes(&[id]),
            from: key.address(),
            to,
            references: refs,
        }
    }

    #[test]
    fn authorization_record_with_no_references_accepted() {
        let vendor = keypair(1);
        let user = keypair(2);
        let mut ledger = Ledger::in_memory();
        let id = ledger
            .push_record(fields(1, &vendor, user.address(), vec![]), &vendor)
            .unwrap();
        let record = ledger.track_record(&id).unwrap();
        assert_eq!(record.fields.from, vendor.address());
        assert!(record.fields.references.is_empty());
    }

    #[test]
    fn registration_record_with_two_references() {
        let vendor = keypair(1);
        let user = keypair(2);
        let mut ledger = Ledger::in_memory();
        let a = ledger
            .push_record(fields(1, &vendor, user.address(), vec![]), &vendor)
            .unwrap();
        let b = ledger
            .push_record(fields(2, &vendor, user.address(), vec![]), &vendor)
            .unwrap();
        let c = ledger
            .push_record(fields(3, &user, user.address(), vec![a, b]), &user)
            .unwrap();
        let record = ledger.track_record(&c).unwrap();
        assert_eq!(record.fields.references.len(), 2);
        // Canonical payload keeps unused slots zero.
        let payload = record.fields.canonical_payload().unwrap();
        assert_eq!(payload.len(), RECORD_PAYLOAD_LEN);
        assert!(payload[104 + 64..].iter().all(|&b| b == 0));
    }

    #[test]
    fn six_references_rejected() {
        let vendor = keypair(1);
        let mut ledger = Ledger::in_memory();
        let mut refs = Vec::new();
        for k in 1..=6u8 {
            let id = ledger
                .push_record(fields(k, &vendor, vendor.address(), vec![]), &vendor)
                .unwrap();
            refs.push(id);
        }
        let res = ledger.push_record(fields(7, &vendor, vendor.address(), refs), &vendor);
        assert!(matches!(res, Err(LedgerError::TooManyReferences(6))));
    }

    #[test]
    fn dangling_reference_rejected_and_ledger_unchanged() {
        let vendor = keypair(1);
        let mut ledger = Ledger::in_memory();
        let res = ledger.push_record(
            fields(1, &vendor, vendor.address(), vec![[9u8; 32]]),
            &vendor,
        );
        assert!(matches!(res, Err(LedgerError::DanglingReference(_))));
        assert_eq!(ledger.len(), 0);
    }

    #[test]
    fn signing_key_must_match_from_address() {
        let vendor = keypair(1);
        let impostor = keypair(2);
        let mut ledger = Ledger::in_memory();
        let res = ledger.push_record(fields(1, &vendor, vendor.address(), vec![]), &impostor);
        assert!(matches!(res, Err(LedgerError::AddressMismatch)));
    }

    #[test]
    fn unknown_id_is_not_found() {
        let ledger = Ledger::in_memory();
        assert!(matches!(
            ledger.track_record(&[5u8; 32]),
            Err(LedgerError::NotFound(_))
        ));
    }

    #[test]
    fn tampered_record_fails_verification_on_access() {
        let vendor = keypair(1);
        let mut ledger = Ledger::in_memory();
        let id = ledger
            .push_record(fields(1, &vendor, vendor.address(), vec![]), &vendor)
            .unwrap();
        ledger
            .record_mut_for_tamper_test(&id)
            .unwrap()
            .fields
            .design_hash[0] ^= 0x01;
        assert!(matches!(
            ledger.track_record(&id),
            Err(LedgerError::BadSignature(_))
        ));
    }

    #[test]
    fn trace_leaf_returns_its_vendor() {
        let vendor = keypair(1);
        let mut ledger = Ledger::in_memory();
        let id = ledger
            .push_record(fields(1, &vendor, vendor.address(), vec![]), &vendor)
            .unwrap();
        let vendors = ledger.trace_soft_ip(&id).unwrap();
        assert_eq!(
            vendors.into_iter().collect::<Vec<_>>(),
            vec![vendor.address()]
        );
    }

    #[test]
    fn trace_unions_distinct_vendors() {
        let vendor_a = keypair(1);
        let vendor_b = keypair(2);
        let user = keypair(3);
        let mut ledger = Ledger::in_memory();
        let a = ledger
            .push_record(fields(1, &vendor_a, user.address(), vec![]), &vendor_a)
            .unwrap();
        let b = ledger
            .push_record(fields(2, &vendor_b, user.address(), vec![]), &vendor_b)
            .unwrap();
        let c = ledger
            .push_record(fields(3, &user, user.address(), vec![a, b]), &user)
            .unwrap();
        let vendors = ledger.trace_soft_ip(&c).unwrap();
        let expected: BTreeSet<Address> = [vendor_a.address(), vendor_b.address()]
            .into_iter()
            .collect();
        assert_eq!(vendors, expected);
    }

    #[test]
    fn diamond_trace_deduplicates() {
        let vendor = keypair(1);
        let user = keypair(2);
        let mut ledger = Ledger::in_memory();
        let a = ledger
            .push_record(fields(1, &vendor, user.address(), vec![]), &vendor)
            .unwrap();
        let b = ledger
            .push_record(fields(2, &user, user.address(), vec![a]), &user)
            .unwrap();
        let c = ledger
            .push_record(fields(3, &user, user.address(), vec![a]), &user)
            .unwrap();
        let d = ledger
            .push_record(fields(4, &user, user.address(), vec![b, c]), &user)
            .unwrap();
        let vendors = ledger.trace_soft_ip(&d).unwrap();
        assert_eq!(
            vendors.into_iter().collect::<Vec<_>>(),
            vec![vendor.address()]
        );
    }

    #[test]
    fn file_backed_ledger_appends_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.bml");
        let vendor = keypair(1);
        let size_after_one;
        {
            let mut ledger = Ledger::open(&path).unwrap();
            ledger
                .push_record(fields(1, &vendor, vendor.address(), vec![]), &vendor)
                .unwrap();
            size_after_one = std::fs::metadata(&path).unwrap().len();
            assert_eq!(size_after_one, ENTRY_LEN as u64);
            ledger
                .push_record(fields(2, &vendor, vendor.address(), vec![]), &vendor)
                .unwrap();
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 2 * ENTRY_LEN, "append-only growth");
        let reloaded = Ledger::open(&path).unwrap();
        assert_eq!(reloaded.len(), 2);
        let record = reloaded.track_record(&[1u8; 32]).unwrap();
        assert_eq!(record.fields.from, vendor.address());
        // The first entry's bytes are exactly the prefix written earlier.
        let first_entry = record.entry_bytes().unwrap();
        assert_eq!(&bytes[..ENTRY_LEN], first_entry.as_slice());
    }

    #[test]
    fn keypair_json_round_trip() {
        let key = keypair(9);
        let back = LedgerKeyPair::from_json(&key.to_json()).unwrap();
        assert_eq!(back.secret_bytes(), key.secret_bytes());
        assert_eq!(back.address(), key.address());
    }
}
