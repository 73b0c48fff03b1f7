//! Hashing, proof and MAC composition, randomness, and timing-safe comparison.
//!
//! Every multi-field preimage uses fixed-width fields (digest 32, id 16,
//! key 16, counters 8 octets big-endian) so no two distinct field tuples can
//! produce the same byte string.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::rngs::OsRng;
use rand::{RngCore, TryRngCore};
use sha2::{Digest as _, Sha256};

/// Length in octets of every digest produced by this module.
pub const DIGEST_LEN: usize = 32;
/// Length in octets of a session key.
pub const SESSION_KEY_LEN: usize = 16;
/// Length in octets of a session id.
pub const SESSION_ID_LEN: usize = 16;
/// Length in octets of the server secret.
pub const SERVER_SECRET_LEN: usize = 32;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("attempt counter must be at least 1")]
    InvalidAttempt,
    #[error("system entropy source unavailable")]
    EntropyUnavailable,
}

/// Errors loading or storing the server secret file.
#[derive(Debug, thiserror::Error)]
pub enum SecretError {
    #[error("secret file not found: {0}")]
    Missing(String),
    #[error("secret file malformed: expected one line of 64 hex characters")]
    Malformed,
    #[error("secret file i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A SHA-256 output. Always exactly [`DIGEST_LEN`] octets.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let raw = hex::decode(s).ok()?;
        let bytes: [u8; DIGEST_LEN] = raw.try_into().ok()?;
        Some(Digest(bytes))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

/// Per-session random key. Delivered to the prover over the secure channel
/// only; mixing it into the proof is what makes captured proofs worthless in
/// later sessions.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionKey([u8; SESSION_KEY_LEN]);

impl SessionKey {
    pub fn from_bytes(bytes: [u8; SESSION_KEY_LEN]) -> Self {
        SessionKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SESSION_KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Key material stays out of logs.
        f.write_str("SessionKey(***)")
    }
}

/// Per-session random identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SessionId([u8; SESSION_ID_LEN]);

impl SessionId {
    pub fn from_bytes(bytes: [u8; SESSION_ID_LEN]) -> Self {
        SessionId(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SESSION_ID_LEN] {
        &self.0
    }
}

impl fmt::Debug for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionId({})", hex::encode(self.0))
    }
}

/// Long-lived verifier key. Prepended to every MAC preimage so echoed
/// cookies cannot be forged by anyone who lacks it; persisting it is what
/// lets verdicts survive a verifier restart.
#[derive(Clone, PartialEq, Eq)]
pub struct ServerSecret([u8; SERVER_SECRET_LEN]);

impl ServerSecret {
    pub fn from_bytes(bytes: [u8; SERVER_SECRET_LEN]) -> Self {
        ServerSecret(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SERVER_SECRET_LEN] {
        &self.0
    }

    /// Draws a fresh secret from the OS entropy source.
    pub fn generate() -> Result<Self, CryptoError> {
        let mut bytes = [0u8; SERVER_SECRET_LEN];
        OsRng
            .try_fill_bytes(&mut bytes)
            .map_err(|_| CryptoError::EntropyUnavailable)?;
        Ok(ServerSecret(bytes))
    }

    /// Parses the file format: a single line of 64 hex characters.
    pub fn parse(text: &str) -> Result<Self, SecretError> {
        let line = text.trim();
        let raw = hex::decode(line).map_err(|_| SecretError::Malformed)?;
        let bytes: [u8; SERVER_SECRET_LEN] = raw.try_into().map_err(|_| SecretError::Malformed)?;
        Ok(ServerSecret(bytes))
    }

    pub fn load(path: &Path) -> Result<Self, SecretError> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => SecretError::Missing(path.display().to_string()),
            _ => SecretError::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), SecretError> {
        let mut file = fs::File::create(path)?;
        writeln!(file, "{}", hex::encode(self.0))?;
        Ok(())
    }
}

impl fmt::Debug for ServerSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ServerSecret(***)")
    }
}

/// SHA-256 of `data`. Pure and deterministic.
pub fn digest(data: &[u8]) -> Digest {
    let out = Sha256::new().chain_update(data).finalize();
    Digest(out.into())
}

/// `D = H(p)`: the only password-derived value ever persisted server-side.
pub fn password_digest(password: &str) -> Result<Digest, CryptoError> {
    if password.is_empty() {
        return Err(CryptoError::EmptyPassword);
    }
    Ok(digest(password.as_bytes()))
}

/// `V = H(D || key)`: the proof value computed by the prover and recomputed
/// by the verifier. Composition order is fixed: digest first, key second.
pub fn session_proof(d: &Digest, key: &SessionKey) -> Digest {
    let mut preimage = [0u8; DIGEST_LEN + SESSION_KEY_LEN];
    preimage[..DIGEST_LEN].copy_from_slice(d.as_bytes());
    preimage[DIGEST_LEN..].copy_from_slice(key.as_bytes());
    digest(&preimage)
}

/// MAC over the proof value, session id, attempt counter, and issue
/// timestamp: `H(secret || v || id || n_be8 || ts_be8)`.
///
/// The secret prefix keeps the cookie unforgeable even though the client
/// echoes it; it also domain-separates MAC outputs from proof outputs.
pub fn mac_compute(
    v: &Digest,
    id: &SessionId,
    n: u64,
    ts: u64,
    secret: &ServerSecret,
) -> Result<Digest, CryptoError> {
    if n < 1 {
        return Err(CryptoError::InvalidAttempt);
    }
    let mut preimage = [0u8; SERVER_SECRET_LEN + DIGEST_LEN + SESSION_ID_LEN + 8 + 8];
    let mut at = 0;
    for part in [
        secret.as_bytes().as_slice(),
        v.as_bytes().as_slice(),
        id.as_bytes().as_slice(),
        &n.to_be_bytes(),
        &ts.to_be_bytes(),
    ] {
        preimage[at..at + part.len()].copy_from_slice(part);
        at += part.len();
    }
    Ok(digest(&preimage))
}

// Single comparison loop shared by ct_equal; generic over the byte accessor
// so tests can count exactly how many octets get inspected.
fn ct_eq_fold(len: usize, mut read: impl FnMut(usize) -> (u8, u8)) -> bool {
    let mut acc = 0u8;
    for i in 0..len {
        let (x, y) = read(i);
        acc |= x ^ y;
    }
    acc == 0
}

/// Timing-safe digest equality: inspects every octet of both inputs no
/// matter where the first mismatch sits.
pub fn ct_equal(a: &Digest, b: &Digest) -> bool {
    ct_eq_fold(DIGEST_LEN, |i| (a.as_bytes()[i], b.as_bytes()[i]))
}

/// Fresh session key from the OS entropy source.
pub fn random_key() -> Result<SessionKey, CryptoError> {
    let mut bytes = [0u8; SESSION_KEY_LEN];
    OsRng
        .try_fill_bytes(&mut bytes)
        .map_err(|_| CryptoError::EntropyUnavailable)?;
    Ok(SessionKey(bytes))
}

/// Fresh session id from the OS entropy source.
pub fn random_session_id() -> Result<SessionId, CryptoError> {
    let mut bytes = [0u8; SESSION_ID_LEN];
    OsRng
        .try_fill_bytes(&mut bytes)
        .map_err(|_| CryptoError::EntropyUnavailable)?;
    Ok(SessionId(bytes))
}

/// Session key drawn from a caller-supplied generator (deterministic
/// simulations seed this).
pub fn random_key_with<R: RngCore + ?Sized>(rng: &mut R) -> SessionKey {
    let mut bytes = [0u8; SESSION_KEY_LEN];
    rng.fill_bytes(&mut bytes);
    SessionKey(bytes)
}

/// Session id drawn from a caller-supplied generator.
pub fn random_session_id_with<R: RngCore + ?Sized>(rng: &mut R) -> SessionId {
    let mut bytes = [0u8; SESSION_ID_LEN];
    rng.fill_bytes(&mut bytes);
    SessionId(bytes)
}

/// Random digest-sized value; used for decoy challenges.
pub fn random_digest_with<R: RngCore + ?Sized>(rng: &mut R) -> Digest {
    let mut bytes = [0u8; DIGEST_LEN];
    rng.fill_bytes(&mut bytes);
    Digest(bytes)
}
