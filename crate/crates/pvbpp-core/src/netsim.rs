//! Deterministic in-memory simulation of the two channels, a simulated
//! clock, and transcript capture.
//!
//! The secure channel is modeled as a message class the adversary cannot
//! see, not as actual TLS. Throttling delays are ledger entries against the
//! simulated clock, never real sleeps, so sessions that accrue millions of
//! time-units of lockout finish in milliseconds of wall time.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::ServerSecret;
use crate::protocol::{
    prover_respond, LoginRequest, ProofResponse, ProtocolError, Verdict, Verifier,
    PROOF_RESPONSE_LEN,
};
use crate::store::UserStore;
use crate::throttle::DelayPolicy;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("session incomplete: a message was lost before the verdict")]
    SessionIncomplete { transcript: Transcript },
    #[error("no client-to-server proof message with seq {seq}")]
    NoSuchMessage { seq: u64 },
    #[error("transcript is missing the opening login message")]
    MissingLogin,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Simulated clock in whole time-units. Advances only on request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    now: u64,
}

impl SimClock {
    pub fn new() -> Self {
        SimClock { now: 0 }
    }

    pub fn at(now: u64) -> Self {
        SimClock { now }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn advance(&mut self, delta: u64) {
        self.now = self
            .now
            .checked_add(delta)
            .expect("simulated clock overflow");
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Secure,
    Insecure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// One captured message. Exported as JSON-lines with the payload
/// hex-encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMessage {
    pub seq: u64,
    pub channel: ChannelKind,
    pub direction: Direction,
    #[serde(with = "hex_payload")]
    pub payload: Vec<u8>,
    pub sent_at: u64,
}

mod hex_payload {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        hex::decode(&s).map_err(serde::de::Error::custom)
    }
}

/// Ordered record of everything that crossed either channel during one or
/// more exchanges, plus the verdicts reached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub messages: Vec<ChannelMessage>,
    pub outcomes: Vec<Verdict>,
}

impl Transcript {
    fn push(&mut self, channel: ChannelKind, direction: Direction, payload: Vec<u8>, sent_at: u64) {
        let seq = self.messages.len() as u64 + 1;
        self.messages.push(ChannelMessage {
            seq,
            channel,
            direction,
            payload,
            sent_at,
        });
    }

    /// What an eavesdropper on the public network sees: exactly the
    /// insecure-channel messages, in order.
    pub fn adversary_view(&self) -> Vec<ChannelMessage> {
        self.messages
            .iter()
            .filter(|m| m.channel == ChannelKind::Insecure)
            .cloned()
            .collect()
    }

    pub fn find(&self, seq: u64) -> Option<&ChannelMessage> {
        self.messages.iter().find(|m| m.seq == seq)
    }

    /// Seq of the client's proof message, if the exchange got that far.
    pub fn proof_message_seq(&self) -> Option<u64> {
        self.messages
            .iter()
            .find(|m| {
                m.direction == Direction::ClientToServer
                    && m.channel == ChannelKind::Insecure
                    && m.payload.len() == PROOF_RESPONSE_LEN
            })
            .map(|m| m.seq)
    }

    /// Username from the opening login message.
    pub fn username(&self) -> Option<String> {
        let first = self.messages.iter().find(|m| {
            m.direction == Direction::ClientToServer && m.payload.len() != PROOF_RESPONSE_LEN
        })?;
        String::from_utf8(first.payload.clone()).ok()
    }

    /// One JSON object per line, payload hex-encoded.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for msg in &self.messages {
            out.push_str(&serde_json::to_string(msg).expect("message serializes"));
            out.push('\n');
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Vec<ChannelMessage>, serde_json::Error> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }
}

/// Which protocol message a fault plan removes from the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageRole {
    Login,
    ChallengeInsecure,
    ChallengeSecure,
    Proof,
    Verdict,
}

/// Channel faults and client behavior knobs for a single simulated session.
#[derive(Debug, Clone, Copy, Default)]
pub struct SessionFaults {
    /// Drop this message in transit; the session then stalls.
    pub drop_message: Option<MessageRole>,
    /// Time-units the prover spends between receiving the challenge and its
    /// proof arriving. Feeds the timestamp delay policy.
    pub think_time: u64,
}

impl SessionFaults {
    pub fn none() -> Self {
        Self::default()
    }
}

/// One verifier, one account store, one clock, one seeded random stream.
/// Identical seeds and inputs reproduce transcripts octet for octet.
pub struct Simulation<'a> {
    store: &'a UserStore,
    verifier: Verifier,
    clock: SimClock,
    rng: ChaCha20Rng,
}

impl<'a> Simulation<'a> {
    pub fn new(store: &'a UserStore, policy: DelayPolicy, secret: ServerSecret, seed: u64) -> Self {
        Self::with_verifier(store, Verifier::new(secret, policy), seed)
    }

    pub fn with_verifier(store: &'a UserStore, verifier: Verifier, seed: u64) -> Self {
        Simulation {
            store,
            verifier,
            clock: SimClock::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn clock_mut(&mut self) -> &mut SimClock {
        &mut self.clock
    }

    pub fn verifier(&self) -> &Verifier {
        &self.verifier
    }

    pub fn store(&self) -> &UserStore {
        self.store
    }

    pub(crate) fn rng_mut(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    /// Runs the full four-message exchange for a first attempt, advancing
    /// the clock by the prescribed delay when the verdict is invalid.
    pub fn run_session(
        &mut self,
        username: &str,
        password: &str,
    ) -> Result<(Verdict, Transcript), SimError> {
        self.run_attempt(username, password, 1)
    }

    /// Same as [`run_session`](Self::run_session) but for attempt `n` of a
    /// continuing session.
    pub fn run_attempt(
        &mut self,
        username: &str,
        password: &str,
        n: u64,
    ) -> Result<(Verdict, Transcript), SimError> {
        self.drive(username, password, n, SessionFaults::none(), true)
    }

    /// Full-control variant: fault injection plus prover think time.
    pub fn run_session_with(
        &mut self,
        username: &str,
        password: &str,
        n: u64,
        faults: SessionFaults,
    ) -> Result<(Verdict, Transcript), SimError> {
        self.drive(username, password, n, faults, true)
    }

    /// Attempt whose prescribed delay is left for the caller to pay; the
    /// attack harness charges waits before the *next* guess rather than
    /// after the last one.
    pub(crate) fn run_attempt_no_wait(
        &mut self,
        username: &str,
        password: &str,
        n: u64,
    ) -> Result<(Verdict, Transcript), SimError> {
        self.drive(username, password, n, SessionFaults::none(), false)
    }

    fn drive(
        &mut self,
        username: &str,
        password: &str,
        n: u64,
        faults: SessionFaults,
        pay_delay: bool,
    ) -> Result<(Verdict, Transcript), SimError> {
        let mut t = Transcript::default();
        let req = LoginRequest::new(username)?;
        let drops = |role| faults.drop_message == Some(role);

        let now = self.clock.now();
        if drops(MessageRole::Login) {
            return Err(SimError::SessionIncomplete { transcript: t });
        }
        t.push(
            ChannelKind::Insecure,
            Direction::ClientToServer,
            username.as_bytes().to_vec(),
            now,
        );

        let challenge = self
            .verifier
            .begin(&req, self.store, n, now, &mut self.rng)?;
        if drops(MessageRole::ChallengeInsecure) {
            return Err(SimError::SessionIncomplete { transcript: t });
        }
        t.push(
            ChannelKind::Insecure,
            Direction::ServerToClient,
            challenge.cookie().encode().to_vec(),
            now,
        );
        if drops(MessageRole::ChallengeSecure) {
            return Err(SimError::SessionIncomplete { transcript: t });
        }
        t.push(
            ChannelKind::Secure,
            Direction::ServerToClient,
            challenge.secure_part().encode().to_vec(),
            now,
        );

        if faults.think_time > 0 {
            self.clock.advance(faults.think_time);
        }
        let resp = prover_respond(&challenge.secure_part(), &challenge.cookie(), password)?;
        if drops(MessageRole::Proof) {
            return Err(SimError::SessionIncomplete { transcript: t });
        }
        let sent = self.clock.now();
        t.push(
            ChannelKind::Insecure,
            Direction::ClientToServer,
            resp.encode().to_vec(),
            sent,
        );

        let verdict = self.verifier.check(&resp, sent);
        if drops(MessageRole::Verdict) {
            return Err(SimError::SessionIncomplete { transcript: t });
        }
        t.push(
            ChannelKind::Insecure,
            Direction::ServerToClient,
            verdict.encode().to_vec(),
            sent,
        );
        t.outcomes.push(verdict.clone());

        if pay_delay && !verdict.is_valid() {
            self.clock.advance(verdict.next_delay.ceil() as u64);
        }
        Ok((verdict, t))
    }

    /// Cross-session replay: opens a fresh session for the transcript's own
    /// username and answers the fresh challenge with the captured proof
    /// digest. The fresh session key makes that digest stale, so the
    /// expected verdict is invalid.
    pub fn replay(
        &mut self,
        transcript: &Transcript,
        message_seq: u64,
    ) -> Result<Verdict, SimError> {
        let username = transcript.username().ok_or(SimError::MissingLogin)?;
        self.replay_as(transcript, message_seq, &username)
    }

    /// Replay variant aimed at an arbitrary account.
    pub fn replay_as(
        &mut self,
        transcript: &Transcript,
        message_seq: u64,
        username: &str,
    ) -> Result<Verdict, SimError> {
        let msg = transcript
            .find(message_seq)
            .filter(|m| {
                m.direction == Direction::ClientToServer && m.channel == ChannelKind::Insecure
            })
            .ok_or(SimError::NoSuchMessage { seq: message_seq })?;
        let recorded = ProofResponse::decode(&msg.payload)
            .map_err(|_| SimError::NoSuchMessage { seq: message_seq })?;

        let req = LoginRequest::new(username)?;
        let now = self.clock.now();
        let challenge = self
            .verifier
            .begin(&req, self.store, 1, now, &mut self.rng)?;
        let forged = ProofResponse {
            cookie: challenge.cookie(),
            proof: recorded.proof,
        };
        let verdict = self.verifier.check(&forged, now);
        if !verdict.is_valid() {
            self.clock.advance(verdict.next_delay.ceil() as u64);
        }
        Ok(verdict)
    }
}
