//! The four-message exchange: username, challenge (MAC cookie over the
//! insecure channel, session id + key over the secure channel), proof,
//! verdict.
//!
//! The verifier keeps no per-session state. Everything it needs to judge a
//! proof rides inside the cookie the client echoes back, and the cookie is
//! bound by a MAC keyed with the long-lived server secret, so a client
//! cannot roll back its attempt counter or splice cookies together. The
//! prover never compares anything and nothing here can invert a hash; the
//! single comparison in the whole protocol happens in [`Verifier::check`].

use rand::RngCore;

use crate::crypto::{
    ct_equal, mac_compute, password_digest, random_digest_with, random_key_with,
    random_session_id_with, session_proof, CryptoError, Digest, ServerSecret, SessionId,
    SessionKey, DIGEST_LEN, SESSION_ID_LEN, SESSION_KEY_LEN,
};
use crate::store::UserStore;
use crate::throttle::DelayPolicy;

/// Wire size of an encoded challenge cookie.
pub const COOKIE_LEN: usize = 80;
/// Wire size of the secure-channel part of a challenge.
pub const SECURE_PART_LEN: usize = SESSION_ID_LEN + SESSION_KEY_LEN;
/// Wire size of an encoded proof response (cookie plus proof digest).
pub const PROOF_RESPONSE_LEN: usize = COOKIE_LEN + DIGEST_LEN;
/// Wire size of an encoded verdict.
pub const VERDICT_LEN: usize = 1 + 8 + 8 + SESSION_ID_LEN;
/// Default maximum cookie age in time-units before a proof is refused.
pub const DEFAULT_MAX_AGE: u64 = 300;
/// Usernames are capped at this many octets.
pub const MAX_USERNAME_LEN: usize = 64;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("username must be 1-{MAX_USERNAME_LEN} octets with no control characters")]
    MalformedUsername,
    #[error("password must not be empty")]
    EmptyPassword,
    #[error("attempt counter must be at least 1")]
    InvalidAttempt,
    #[error("malformed cookie: expected {expected} octets, got {got}")]
    MalformedCookie { expected: usize, got: usize },
    #[error("malformed verdict: expected {expected} octets, got {got}")]
    MalformedVerdict { expected: usize, got: usize },
}

/// Checks the username rules shared by login requests and the account
/// store: 1 to [`MAX_USERNAME_LEN`] octets, no control characters.
pub fn validate_username(username: &str) -> Result<(), ProtocolError> {
    if username.is_empty()
        || username.len() > MAX_USERNAME_LEN
        || username.chars().any(|c| c.is_control())
    {
        return Err(ProtocolError::MalformedUsername);
    }
    Ok(())
}

/// Message 1: the client names the account it wants to prove.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoginRequest {
    username: String,
}

impl LoginRequest {
    pub fn new(username: &str) -> Result<Self, ProtocolError> {
        validate_username(username)?;
        Ok(LoginRequest {
            username: username.to_string(),
        })
    }

    pub fn username(&self) -> &str {
        &self.username
    }
}

/// The echoed, MAC-protected half of a challenge. Safe for the insecure
/// channel: every field is either public or a one-way hash output.
///
/// Wire layout (80 octets):
/// `session_id[16] || n[8 BE] || issued_at[8 BE] || mac[32] || reserved[16]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeCookie {
    pub session_id: SessionId,
    pub n: u64,
    pub issued_at: u64,
    pub mac: Digest,
}

impl ChallengeCookie {
    pub fn encode(&self) -> [u8; COOKIE_LEN] {
        let mut out = [0u8; COOKIE_LEN];
        out[..16].copy_from_slice(self.session_id.as_bytes());
        out[16..24].copy_from_slice(&self.n.to_be_bytes());
        out[24..32].copy_from_slice(&self.issued_at.to_be_bytes());
        out[32..64].copy_from_slice(self.mac.as_bytes());
        // out[64..80] stays reserved-zero.
        out
    }

    /// Decodes any 80-octet string; the reserved tail is ignored. Field
    /// integrity is the MAC's job, not the codec's.
    pub fn decode(raw: &[u8]) -> Result<Self, ProtocolError> {
        if raw.len() != COOKIE_LEN {
            return Err(ProtocolError::MalformedCookie {
                expected: COOKIE_LEN,
                got: raw.len(),
            });
        }
        Ok(ChallengeCookie {
            session_id: SessionId::from_bytes(raw[..16].try_into().expect("length checked")),
            n: u64::from_be_bytes(raw[16..24].try_into().expect("length checked")),
            issued_at: u64::from_be_bytes(raw[24..32].try_into().expect("length checked")),
            mac: Digest::from_bytes(raw[32..64].try_into().expect("length checked")),
        })
    }
}

/// The confidential half of a challenge. Never leaves the secure channel.
///
/// Wire layout (32 octets): `session_id[16] || key[16]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureChannelPart {
    pub session_id: SessionId,
    pub key: SessionKey,
}

impl SecureChannelPart {
    pub fn encode(&self) -> [u8; SECURE_PART_LEN] {
        let mut out = [0u8; SECURE_PART_LEN];
        out[..16].copy_from_slice(self.session_id.as_bytes());
        out[16..].copy_from_slice(self.key.as_bytes());
        out
    }

    pub fn decode(raw: &[u8]) -> Result<Self, ProtocolError> {
        if raw.len() != SECURE_PART_LEN {
            return Err(ProtocolError::MalformedCookie {
                expected: SECURE_PART_LEN,
                got: raw.len(),
            });
        }
        Ok(SecureChannelPart {
            session_id: SessionId::from_bytes(raw[..16].try_into().expect("length checked")),
            key: SessionKey::from_bytes(raw[16..].try_into().expect("length checked")),
        })
    }
}

/// A freshly issued challenge as the verifier sees it. The two wire views
/// are derived with [`cookie`](Challenge::cookie) and
/// [`secure_part`](Challenge::secure_part); the full struct (and in
/// particular `user_known`) is never serialized.
#[derive(Debug, Clone)]
pub struct Challenge {
    pub session_id: SessionId,
    pub key: SessionKey,
    pub n: u64,
    pub issued_at: u64,
    pub mac: Digest,
    user_known: bool,
}

impl Challenge {
    pub fn cookie(&self) -> ChallengeCookie {
        ChallengeCookie {
            session_id: self.session_id,
            n: self.n,
            issued_at: self.issued_at,
            mac: self.mac,
        }
    }

    pub fn secure_part(&self) -> SecureChannelPart {
        SecureChannelPart {
            session_id: self.session_id,
            key: self.key,
        }
    }

    /// Whether the username matched an account, or this is a decoy. Server
    /// diagnostics only; the wire views are identical either way.
    pub fn user_known(&self) -> bool {
        self.user_known
    }
}

/// Message 3: the echoed cookie plus the prover's digest `V = H(D || key)`.
///
/// Wire layout (112 octets): `cookie[80] || proof[32]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofResponse {
    pub cookie: ChallengeCookie,
    pub proof: Digest,
}

impl ProofResponse {
    pub fn encode(&self) -> [u8; PROOF_RESPONSE_LEN] {
        let mut out = [0u8; PROOF_RESPONSE_LEN];
        out[..COOKIE_LEN].copy_from_slice(&self.cookie.encode());
        out[COOKIE_LEN..].copy_from_slice(self.proof.as_bytes());
        out
    }

    pub fn decode(raw: &[u8]) -> Result<Self, ProtocolError> {
        if raw.len() != PROOF_RESPONSE_LEN {
            return Err(ProtocolError::MalformedCookie {
                expected: PROOF_RESPONSE_LEN,
                got: raw.len(),
            });
        }
        Ok(ProofResponse {
            cookie: ChallengeCookie::decode(&raw[..COOKIE_LEN])?,
            proof: Digest::from_bytes(raw[COOKIE_LEN..].try_into().expect("length checked")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Valid,
    Invalid,
}

/// Why a proof was refused. Diagnostics for the harness and server logs;
/// deliberately absent from the wire encoding so the protocol leaks a
/// single undifferentiated `Invalid` for wrong passwords, forged cookies,
/// and expired cookies alike.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Recomputed MAC did not match the echoed one: wrong password,
    /// tampered cookie, or a decoy challenge.
    MacMismatch,
    /// Cookie older than the verifier's max age, or dated in the future.
    Expired,
    /// Cookie carried an attempt counter of zero.
    AttemptOutOfRange,
}

/// Message 4: the verifier's decision plus what the next attempt costs.
///
/// Wire layout (33 octets):
/// `outcome[1] || next_n[8 BE] || next_delay_millis[8 BE] || session_id[16]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub next_n: u64,
    /// Seconds the verifier prescribes before the next prompt. Always zero
    /// on success.
    pub next_delay: f64,
    pub session_id: SessionId,
    /// Harness-visible diagnostics; never serialized.
    pub reason: Option<RejectReason>,
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        self.outcome == Outcome::Valid
    }

    pub fn encode(&self) -> [u8; VERDICT_LEN] {
        let mut out = [0u8; VERDICT_LEN];
        out[0] = match self.outcome {
            Outcome::Valid => 1,
            Outcome::Invalid => 0,
        };
        out[1..9].copy_from_slice(&self.next_n.to_be_bytes());
        let millis = (self.next_delay * 1000.0).round() as u64;
        out[9..17].copy_from_slice(&millis.to_be_bytes());
        out[17..].copy_from_slice(self.session_id.as_bytes());
        out
    }

    pub fn decode(raw: &[u8]) -> Result<Self, ProtocolError> {
        if raw.len() != VERDICT_LEN {
            return Err(ProtocolError::MalformedVerdict {
                expected: VERDICT_LEN,
                got: raw.len(),
            });
        }
        let outcome = if raw[0] == 1 {
            Outcome::Valid
        } else {
            Outcome::Invalid
        };
        let next_n = u64::from_be_bytes(raw[1..9].try_into().expect("length checked"));
        let millis = u64::from_be_bytes(raw[9..17].try_into().expect("length checked"));
        Ok(Verdict {
            outcome,
            next_n,
            next_delay: millis as f64 / 1000.0,
            session_id: SessionId::from_bytes(raw[17..].try_into().expect("length checked")),
            reason: None,
        })
    }
}

/// The stateless verifier: a server secret, a delay policy, and a cookie
/// age limit. Holds nothing per session, so any instance built from the
/// same secret judges any response identically.
#[derive(Debug, Clone)]
pub struct Verifier {
    secret: ServerSecret,
    policy: DelayPolicy,
    max_age: u64,
}

impl Verifier {
    pub fn new(secret: ServerSecret, policy: DelayPolicy) -> Self {
        Verifier {
            secret,
            policy,
            max_age: DEFAULT_MAX_AGE,
        }
    }

    pub fn with_max_age(mut self, max_age: u64) -> Self {
        self.max_age = max_age;
        self
    }

    pub fn policy(&self) -> &DelayPolicy {
        &self.policy
    }

    pub fn max_age(&self) -> u64 {
        self.max_age
    }

    /// Issues a challenge for attempt `n` of a session.
    ///
    /// Unknown usernames get a decoy challenge whose MAC covers a random
    /// digest instead of an account proof value: same wire shape, never
    /// verifiable, so the wire betrays nothing about which accounts exist.
    pub fn begin<R: RngCore + ?Sized>(
        &self,
        req: &LoginRequest,
        store: &UserStore,
        n: u64,
        now: u64,
        rng: &mut R,
    ) -> Result<Challenge, ProtocolError> {
        if n < 1 {
            return Err(ProtocolError::InvalidAttempt);
        }
        let key = random_key_with(rng);
        let session_id = random_session_id_with(rng);
        let (v, user_known) = match store.lookup(req.username()) {
            Some(d) => (session_proof(d, &key), true),
            None => (random_digest_with(rng), false),
        };
        let mac = mac_compute(&v, &session_id, n, now, &self.secret)
            .expect("attempt counter checked above");
        Ok(Challenge {
            session_id,
            key,
            n,
            issued_at: now,
            mac,
            user_known,
        })
    }

    /// Judges a proof response using nothing but the response itself, the
    /// server secret, and the clock.
    ///
    /// The MAC is recomputed over the *claimed* cookie fields with the
    /// submitted proof in place of the proof value the challenge was built
    /// from; only the genuine `V = H(D || key)` can reproduce it. All
    /// failure modes yield the same wire-visible `Invalid`.
    pub fn check(&self, resp: &ProofResponse, now: u64) -> Verdict {
        let n = resp.cookie.n;
        let next_n = n.saturating_add(1);
        let session_id = resp.cookie.session_id;
        let fail = |reason: RejectReason| Verdict {
            outcome: Outcome::Invalid,
            next_n,
            next_delay: self
                .policy
                .delay_for_next(next_n, resp.cookie.issued_at, now),
            session_id,
            reason: Some(reason),
        };
        if n < 1 {
            return fail(RejectReason::AttemptOutOfRange);
        }
        if now < resp.cookie.issued_at || now - resp.cookie.issued_at > self.max_age {
            return fail(RejectReason::Expired);
        }
        let expected = mac_compute(
            &resp.proof,
            &session_id,
            n,
            resp.cookie.issued_at,
            &self.secret,
        )
        .expect("attempt counter checked above");
        if ct_equal(&expected, &resp.cookie.mac) {
            Verdict {
                outcome: Outcome::Valid,
                next_n: 1,
                next_delay: 0.0,
                session_id,
                reason: None,
            }
        } else {
            fail(RejectReason::MacMismatch)
        }
    }
}

/// The prover's whole job: hash the password with the session key and echo
/// the cookie verbatim. No comparison against any reference value, no
/// decryption — the prover cannot even tell whether its own answer is
/// right.
pub fn prover_respond(
    secure: &SecureChannelPart,
    cookie: &ChallengeCookie,
    password: &str,
) -> Result<ProofResponse, ProtocolError> {
    let d = password_digest(password).map_err(|e| match e {
        CryptoError::EmptyPassword => ProtocolError::EmptyPassword,
        _ => ProtocolError::EmptyPassword,
    })?;
    let proof = session_proof(&d, &secure.key);
    Ok(ProofResponse {
        cookie: cookie.clone(),
        proof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(7)
    }

    fn verifier() -> Verifier {
        Verifier::new(ServerSecret::from_bytes([3; 32]), DelayPolicy::default())
    }

    fn store_with(users: &[(&str, &str)]) -> UserStore {
        let mut store = UserStore::new();
        for (u, p) in users {
            store.register(u, p).unwrap();
        }
        store
    }

    fn honest_response(
        v: &Verifier,
        store: &UserStore,
        user: &str,
        password: &str,
        n: u64,
        now: u64,
        rng: &mut ChaCha20Rng,
    ) -> ProofResponse {
        let req = LoginRequest::new(user).unwrap();
        let ch = v.begin(&req, store, n, now, rng).unwrap();
        prover_respond(&ch.secure_part(), &ch.cookie(), password).unwrap()
    }

    #[test]
    fn honest_round_trip_is_valid_with_no_delay() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let resp = honest_response(&v, &store, "alice", "hunter2", 1, 100, &mut rng);
        let verdict = v.check(&resp, 100);
        assert_eq!(verdict.outcome, Outcome::Valid);
        assert_eq!(verdict.next_delay, 0.0);
        assert!(verdict.reason.is_none());
    }

    #[test]
    fn wrong_password_fails_with_doubled_counter_and_four_second_delay() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let resp = honest_response(&v, &store, "alice", "*******", 1, 100, &mut rng);
        let verdict = v.check(&resp, 100);
        assert_eq!(verdict.outcome, Outcome::Invalid);
        assert_eq!(verdict.next_n, 2);
        assert_eq!(verdict.next_delay, 4.0);
        assert_eq!(verdict.reason, Some(RejectReason::MacMismatch));
    }

    #[test]
    fn completeness_over_random_accounts() {
        let mut rng = rng();
        let mut store = UserStore::new();
        let accounts: Vec<(String, String)> = (0..20)
            .map(|i| (format!("user{i}"), format!("pw-{i}-{}", i * 31)))
            .collect();
        for (u, p) in &accounts {
            store.register(u, p).unwrap();
        }
        let v = verifier();
        for (u, p) in &accounts {
            let resp = honest_response(&v, &store, u, p, 1, 50, &mut rng);
            assert_eq!(v.check(&resp, 50).outcome, Outcome::Valid, "account {u}");
        }
    }

    #[test]
    fn unknown_user_gets_a_wire_indistinguishable_decoy() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        for i in 0..100 {
            let known = v
                .begin(
                    &LoginRequest::new("alice").unwrap(),
                    &store,
                    1,
                    10,
                    &mut rng,
                )
                .unwrap();
            let unknown = v
                .begin(
                    &LoginRequest::new(&format!("ghost{i}")).unwrap(),
                    &store,
                    1,
                    10,
                    &mut rng,
                )
                .unwrap();
            assert!(known.user_known());
            assert!(!unknown.user_known());
            assert_eq!(
                known.cookie().encode().len(),
                unknown.cookie().encode().len()
            );
            assert_eq!(
                known.secure_part().encode().len(),
                unknown.secure_part().encode().len()
            );
        }
    }

    #[test]
    fn decoy_challenges_never_verify() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let ch = v
            .begin(
                &LoginRequest::new("ghost").unwrap(),
                &store,
                1,
                10,
                &mut rng,
            )
            .unwrap();
        for guess in ["hunter2", "ghost", "password", ""] {
            if guess.is_empty() {
                continue;
            }
            let resp = prover_respond(&ch.secure_part(), &ch.cookie(), guess).unwrap();
            assert_eq!(v.check(&resp, 10).outcome, Outcome::Invalid);
        }
    }

    #[test]
    fn username_validation() {
        assert_eq!(
            LoginRequest::new("").unwrap_err(),
            ProtocolError::MalformedUsername
        );
        assert_eq!(
            LoginRequest::new("a\tb").unwrap_err(),
            ProtocolError::MalformedUsername
        );
        assert_eq!(
            LoginRequest::new(&"x".repeat(65)).unwrap_err(),
            ProtocolError::MalformedUsername
        );
        assert!(LoginRequest::new(&"x".repeat(64)).is_ok());
        assert!(LoginRequest::new("alice").is_ok());
    }

    #[test]
    fn begin_rejects_zero_attempt() {
        let mut rng = rng();
        let store = store_with(&[("alice", "hunter2")]);
        let err = verifier()
            .begin(
                &LoginRequest::new("alice").unwrap(),
                &store,
                0,
                10,
                &mut rng,
            )
            .unwrap_err();
        assert_eq!(err, ProtocolError::InvalidAttempt);
    }

    #[test]
    fn every_single_octet_tamper_of_the_mac_is_rejected() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let resp = honest_response(&v, &store, "alice", "hunter2", 1, 100, &mut rng);
        for i in 0..DIGEST_LEN {
            let mut mac = *resp.cookie.mac.as_bytes();
            mac[i] ^= 0x01;
            let tampered = ProofResponse {
                cookie: ChallengeCookie {
                    mac: Digest::from_bytes(mac),
                    ..resp.cookie.clone()
                },
                proof: resp.proof,
            };
            let verdict = v.check(&tampered, 100);
            assert_eq!(verdict.outcome, Outcome::Invalid, "tampered octet {i}");
            assert_eq!(verdict.reason, Some(RejectReason::MacMismatch));
        }
    }

    #[test]
    fn tampering_any_cookie_field_is_rejected() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let resp = honest_response(&v, &store, "alice", "hunter2", 2, 100, &mut rng);
        assert_eq!(v.check(&resp, 100).outcome, Outcome::Valid);

        // Rolled-back attempt counter.
        let mut rolled = resp.clone();
        rolled.cookie.n = 1;
        assert_eq!(v.check(&rolled, 100).outcome, Outcome::Invalid);

        // Shifted issue timestamp.
        let mut shifted = resp.clone();
        shifted.cookie.issued_at = 99;
        assert_eq!(v.check(&shifted, 100).outcome, Outcome::Invalid);

        // Substituted session id.
        let mut swapped = resp.clone();
        swapped.cookie.session_id = SessionId::from_bytes([9; 16]);
        assert_eq!(v.check(&swapped, 100).outcome, Outcome::Invalid);
    }

    #[test]
    fn prover_echoes_tampered_cookies_without_objection() {
        // The prover holds no reference value to compare against, so a
        // corrupted cookie still produces a response; only the verifier can
        // tell.
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let ch = v
            .begin(
                &LoginRequest::new("alice").unwrap(),
                &store,
                1,
                100,
                &mut rng,
            )
            .unwrap();
        let mut cookie = ch.cookie();
        let mut mac = *cookie.mac.as_bytes();
        mac[0] ^= 0xFF;
        cookie.mac = Digest::from_bytes(mac);
        let resp = prover_respond(&ch.secure_part(), &cookie, "hunter2").unwrap();
        assert_eq!(resp.cookie, cookie);
        assert_eq!(v.check(&resp, 100).outcome, Outcome::Invalid);
    }

    #[test]
    fn prover_rejects_empty_password_only() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let ch = v
            .begin(
                &LoginRequest::new("alice").unwrap(),
                &store,
                1,
                100,
                &mut rng,
            )
            .unwrap();
        let err = prover_respond(&ch.secure_part(), &ch.cookie(), "").unwrap_err();
        assert_eq!(err, ProtocolError::EmptyPassword);
    }

    #[test]
    fn cookie_codec_round_trips() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let ch = v
            .begin(
                &LoginRequest::new("alice").unwrap(),
                &store,
                3,
                12345,
                &mut rng,
            )
            .unwrap();
        let cookie = ch.cookie();
        assert_eq!(ChallengeCookie::decode(&cookie.encode()).unwrap(), cookie);
    }

    #[test]
    fn cookie_decode_rejects_wrong_lengths() {
        assert_eq!(
            ChallengeCookie::decode(&[0u8; 79]).unwrap_err(),
            ProtocolError::MalformedCookie {
                expected: 80,
                got: 79
            }
        );
        assert_eq!(
            ChallengeCookie::decode(&[0u8; 81]).unwrap_err(),
            ProtocolError::MalformedCookie {
                expected: 80,
                got: 81
            }
        );
        assert!(ProofResponse::decode(&[0u8; 111]).is_err());
        assert!(SecureChannelPart::decode(&[0u8; 31]).is_err());
    }

    #[test]
    fn fuzzed_cookies_decode_but_never_verify() {
        let mut rng = rng();
        let v = verifier();
        for _ in 0..10_000 {
            let mut raw = [0u8; COOKIE_LEN];
            rng.fill_bytes(&mut raw);
            let cookie = ChallengeCookie::decode(&raw).expect("any 80-octet string decodes");
            let mut proof = [0u8; DIGEST_LEN];
            rng.fill_bytes(&mut proof);
            let resp = ProofResponse {
                cookie,
                proof: Digest::from_bytes(proof),
            };
            // Clock chosen inside the validity window of whatever issued_at
            // the fuzz produced, so the MAC is what rejects.
            let verdict = v.check(&resp, resp.cookie.issued_at.max(1));
            assert_eq!(verdict.outcome, Outcome::Invalid);
        }
    }

    #[test]
    fn secure_part_and_verdict_codecs_round_trip() {
        let part = SecureChannelPart {
            session_id: SessionId::from_bytes([1; 16]),
            key: SessionKey::from_bytes([2; 16]),
        };
        assert_eq!(SecureChannelPart::decode(&part.encode()).unwrap(), part);

        let verdict = Verdict {
            outcome: Outcome::Invalid,
            next_n: 5,
            next_delay: 32.0,
            session_id: SessionId::from_bytes([7; 16]),
            reason: Some(RejectReason::MacMismatch),
        };
        let decoded = Verdict::decode(&verdict.encode()).unwrap();
        assert_eq!(decoded.outcome, verdict.outcome);
        assert_eq!(decoded.next_n, verdict.next_n);
        assert_eq!(decoded.next_delay, verdict.next_delay);
        assert_eq!(decoded.session_id, verdict.session_id);
        // Diagnostics do not survive the wire.
        assert_eq!(decoded.reason, None);
        assert!(Verdict::decode(&[0u8; 32]).is_err());
    }

    #[test]
    fn expired_and_future_cookies_are_refused_uniformly() {
        let mut rng = rng();
        let v = verifier().with_max_age(300);
        let store = store_with(&[("alice", "hunter2")]);
        let resp = honest_response(&v, &store, "alice", "hunter2", 1, 1000, &mut rng);

        // Exactly at the age limit: still judged on the MAC.
        assert_eq!(v.check(&resp, 1300).outcome, Outcome::Valid);
        // One past the limit.
        let late = v.check(&resp, 1301);
        assert_eq!(late.outcome, Outcome::Invalid);
        assert_eq!(late.reason, Some(RejectReason::Expired));
        // Dated in the future.
        let future = v.check(&resp, 999);
        assert_eq!(future.outcome, Outcome::Invalid);
        assert_eq!(future.reason, Some(RejectReason::Expired));
    }

    #[test]
    fn zero_and_saturating_attempt_counters_do_not_panic() {
        let v = verifier();
        let zero = ProofResponse {
            cookie: ChallengeCookie {
                session_id: SessionId::from_bytes([0; 16]),
                n: 0,
                issued_at: 10,
                mac: Digest::from_bytes([0; 32]),
            },
            proof: Digest::from_bytes([0; 32]),
        };
        let verdict = v.check(&zero, 10);
        assert_eq!(verdict.outcome, Outcome::Invalid);
        assert_eq!(verdict.next_n, 1);
        assert_eq!(verdict.reason, Some(RejectReason::AttemptOutOfRange));

        let max = ProofResponse {
            cookie: ChallengeCookie {
                n: u64::MAX,
                ..zero.cookie
            },
            proof: zero.proof,
        };
        let verdict = v.check(&max, 10);
        assert_eq!(verdict.outcome, Outcome::Invalid);
        assert_eq!(verdict.next_n, u64::MAX);
    }

    #[test]
    fn verifier_recreation_changes_no_verdict() {
        let mut rng = rng();
        let secret = ServerSecret::from_bytes([11; 32]);
        let store = store_with(&[("alice", "hunter2")]);
        for trial in 0..50 {
            let password = if trial % 2 == 0 { "hunter2" } else { "wrong" };
            let (resp, expected) = {
                let first = Verifier::new(secret.clone(), DelayPolicy::default());
                let resp = honest_response(&first, &store, "alice", password, 1, 500, &mut rng);
                let expected = first.check(&resp, 500);
                (resp, expected)
            };
            // A brand-new verifier built from the same secret must agree.
            let second = Verifier::new(secret.clone(), DelayPolicy::default());
            assert_eq!(second.check(&resp, 500), expected);
        }
    }

    #[test]
    fn identical_response_reverifies_within_the_same_session() {
        // A stateless verifier cannot distinguish a byte-identical
        // re-presentation of a proof it already accepted; cross-session
        // replay is what the fresh key defeats.
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        let resp = honest_response(&v, &store, "alice", "hunter2", 1, 100, &mut rng);
        assert_eq!(v.check(&resp, 100).outcome, Outcome::Valid);
        assert_eq!(v.check(&resp, 100).outcome, Outcome::Valid);
    }

    #[test]
    fn invalid_verdicts_always_increment_the_counter() {
        let mut rng = rng();
        let v = verifier();
        let store = store_with(&[("alice", "hunter2")]);
        for n in 1..=10 {
            let resp = honest_response(&v, &store, "alice", "nope", n, 100, &mut rng);
            let verdict = v.check(&resp, 100);
            assert_eq!(verdict.outcome, Outcome::Invalid);
            assert_eq!(verdict.next_n, n + 1);
            assert_eq!(verdict.next_delay, 2f64.powi(n as i32 + 1));
        }
    }
}
