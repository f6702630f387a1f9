//! 1-out-of-N oblivious transfer for masked design payloads.
//!
//! Baseline construction over the Ristretto prime-order group: the sender
//! samples y and publishes S = yG; the receiver with choice a sends
//! R = (a-1)S + xG; the sender encrypts message j under
//! k_j = KDF(y(R - (j-1)S)), and the receiver recovers k_a = KDF(xS).
//! Keys are domain-separated by session id and message index. A loopback
//! test implementation with the same interface (and no privacy) is gated
//! behind an explicit insecure flag.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::{CryptoRng, Rng};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::transport::{FrameChannel, FrameType, SessionId, TransportError};

#[derive(Debug, Error)]
pub enum OtError {
    #[error("choice index {index} out of range 1..={count}")]
    ChoiceOutOfRange { index: u32, count: u32 },
    #[error("message vector is empty")]
    EmptyVector,
    #[error("messages have unequal lengths")]
    UnequalLengths,
    #[error("malformed group element")]
    BadGroupElement,
    #[error("ciphertext index {got} out of order, expected {expected}")]
    CiphertextOrder { expected: u32, got: u32 },
    #[error("ciphertext length {got} does not match announced {expected}")]
    CiphertextLength { expected: usize, got: usize },
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// The sender's N equal-length byte strings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OtMessageVector {
    messages: Vec<Vec<u8>>,
}

impl OtMessageVector {
    pub fn new(messages: Vec<Vec<u8>>) -> Result<Self, OtError> {
        if messages.is_empty() {
            return Err(OtError::EmptyVector);
        }
        let len = messages[0].len();
        if messages.iter().any(|m| m.len() != len) {
            return Err(OtError::UnequalLengths);
        }
        Ok(OtMessageVector { messages })
    }

    pub fn count(&self) -> u32 {
        self.messages.len() as u32
    }

    pub fn message_len(&self) -> usize {
        self.messages[0].len()
    }

    pub fn messages(&self) -> &[Vec<u8>] {
        &self.messages
    }

    /// Pads the vector with zero-filled dummy messages up to `count`.
    pub fn pad_to(&mut self, count: u32) {
        let len = self.message_len();
        while self.count() < count {
            self.messages.push(vec![0u8; len]);
        }
    }
}

fn kdf(point: &RistrettoPoint, session_id: &SessionId, index: u32) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"ot-kdf/v1");
    hasher.update(session_id);
    hasher.update(index.to_le_bytes());
    hasher.update(point.compress().as_bytes());
    hasher.finalize().into()
}

/// Keystream expansion: SHA-256 in counter mode over the derived key.
fn prg_xor(key: &[u8; 32], data: &mut [u8]) {
    let mut counter = 0u64;
    let mut offset = 0;
    while offset < data.len() {
        let mut hasher = Sha256::new();
        hasher.update(b"ot-prg/v1");
        hasher.update(key);
        hasher.update(counter.to_le_bytes());
        let block = hasher.finalize();
        for (d, k) in data[offset..].iter_mut().zip(block.iter()) {
            *d ^= k;
        }
        offset += block.len();
        counter += 1;
    }
}

fn read_point(payload: &[u8]) -> Result<RistrettoPoint, OtError> {
    let bytes: [u8; 32] = payload.try_into().map_err(|_| OtError::BadGroupElement)?;
    CompressedRistretto(bytes)
        .decompress()
        .ok_or(OtError::BadGroupElement)
}

/// Sender side: transmits the whole vector; learns nothing about the choice.
/// The transcript length depends only on (N, message length).
pub fn ot_send<C, R>(
    channel: &mut C,
    session_id: &SessionId,
    vector: &OtMessageVector,
    rng: &mut R,
) -> Result<(), OtError>
where
    C: FrameChannel,
    R: Rng + CryptoRng,
{
    let y = Scalar::random(rng);
    let s = &y * RISTRETTO_BASEPOINT_TABLE;
    channel.send_frame(FrameType::OtS, s.compress().as_bytes())?;
    let r_payload = channel.expect_frame(FrameType::OtR)?;
    let r = read_point(&r_payload)?;
    let ys = y * s;
    // y(R - (j-1)S) stepped by repeated subtraction of yS.
    let mut point = y * r;
    for j in 1..=vector.count() {
        let key = kdf(&point, session_id, j);
        let mut ciphertext = Vec::with_capacity(4 + vector.message_len());
        ciphertext.extend_from_slice(&j.to_le_bytes());
        ciphertext.extend_from_slice(&vector.messages()[(j - 1) as usize]);
        prg_xor(&key, &mut ciphertext[4..]);
        channel.send_frame(FrameType::OtCiph, &ciphertext)?;
        point -= ys;
    }
    Ok(())
}

/// Receiver side: obtains message `choice` (1-based) byte-exact. The single
/// transmitted group element is uniformly distributed whatever the choice.
pub fn ot_receive<C, R>(
    channel: &mut C,
    session_id: &SessionId,
    count: u32,
    message_len: usize,
    choice: u32,
    rng: &mut R,
) -> Result<Vec<u8>, OtError>
where
    C: FrameChannel,
    R: Rng + CryptoRng,
{
    if choice == 0 || choice > count {
        return Err(OtError::ChoiceOutOfRange {
            index: choice,
            count,
        });
    }
    let s_payload = channel.expect_frame(FrameType::OtS)?;
    let s = read_point(&s_payload)?;
    let x = Scalar::random(rng);
    let r = Scalar::from(choice - 1) * s + &x * RISTRETTO_BASEPOINT_TABLE;
    channel.send_frame(FrameType::OtR, r.compress().as_bytes())?;
    let key = kdf(&(x * s), session_id, choice);
    let mut chosen = None;
    for j in 1..=count {
        let payload = channel.expect_frame(FrameType::OtCiph)?;
        if payload.len() < 4 {
            return Err(OtError::CiphertextLength {
                expected: 4 + message_len,
                got: payload.len(),
            });
        }
        let got = u32::from_le_bytes(payload[0..4].try_into().unwrap());
        if got != j {
            return Err(OtError::CiphertextOrder { expected: j, got });
        }
        if payload.len() != 4 + message_len {
            return Err(OtError::CiphertextLength {
                expected: 4 + message_len,
                got: payload.len(),
            });
        }
        if j == choice {
            let mut message = payload[4..].to_vec();
            prg_xor(&key, &mut message);
            chosen = Some(message);
        }
    }
    Ok(chosen.expect("choice validated in range"))
}

/// Receiver's first move alone, for transcript-distribution tests. Takes
/// the sender's compressed commitment and returns the compressed reply.
pub fn receiver_commitment<R: Rng + CryptoRng>(
    sender_point: &[u8; 32],
    count: u32,
    choice: u32,
    rng: &mut R,
) -> Result<[u8; 32], OtError> {
    if choice == 0 || choice > count {
        return Err(OtError::ChoiceOutOfRange {
            index: choice,
            count,
        });
    }
    let s = read_point(sender_point)?;
    let x = Scalar::random(rng);
    let r = Scalar::from(choice - 1) * s + &x * RISTRETTO_BASEPOINT_TABLE;
    Ok(r.compress().to_bytes())
}

/// A deterministic valid compressed group element, for tests.
pub fn example_group_element(seed: u64) -> [u8; 32] {
    let point = &Scalar::from(seed.max(1)) * RISTRETTO_BASEPOINT_TABLE;
    point.compress().to_bytes()
}

/// Loopback test transfer: same interface and framing, no cryptography, and
/// no choice privacy (the index crosses the wire in clear). Only for
/// deterministic protocol tests behind an explicit opt-in.
pub mod insecure_test_ot {
    use super::*;

    pub fn ot_send<C: FrameChannel>(
        channel: &mut C,
        vector: &OtMessageVector,
    ) -> Result<(), OtError> {
        channel.send_frame(FrameType::OtS, &vector.count().to_le_bytes())?;
        let payload = channel.expect_frame(FrameType::OtR)?;
        let choice = u32::from_le_bytes(
            payload
                .as_slice()
                .try_into()
                .map_err(|_| OtError::BadGroupElement)?,
        );
        if choice == 0 || choice > vector.count() {
            return Err(OtError::ChoiceOutOfRange {
                index: choice,
                count: vector.count(),
            });
        }
        channel.send_frame(FrameType::OtCiph, &vector.messages()[(choice - 1) as usize])?;
        Ok(())
    }

    pub fn ot_receive<C: FrameChannel>(
        channel: &mut C,
        count: u32,
        message_len: usize,
        choice: u32,
    ) -> Result<Vec<u8>, OtError> {
        if choice == 0 || choice > count {
            return Err(OtError::ChoiceOutOfRange {
                index: choice,
                count,
            });
        }
        let _ = channel.expect_frame(FrameType::OtS)?;
        channel.send_frame(FrameType::OtR, &choice.to_le_bytes())?;
        let message = channel.expect_frame(FrameType::OtCiph)?;
        if message.len() != message_len {
            return Err(OtError::CiphertextLength {
                expected: message_len,
                got: message.len(),
            });
        }
        Ok(message)
    }
}
