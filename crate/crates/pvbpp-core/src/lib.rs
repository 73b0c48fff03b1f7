//! Challenge-response password authentication built around a stateless
//! verifier.
//!
//! A login session is four messages. The client names an account; the
//! server answers with a MAC-protected cookie on the public channel and a
//! fresh session id and key on the confidential one; the client hashes its
//! password with the key and echoes the cookie; the server recomputes the
//! MAC from the response alone and announces the verdict. Failed attempts
//! buy exponentially growing waits before the next prompt.
//!
//! The crate splits into:
//!
//! - [`crypto`]: digests, proof/MAC composition, randomness, constant-time
//!   comparison, and the server secret file.
//! - [`protocol`]: the prover and verifier plus the wire codecs for
//!   cookies, secure parts, proofs, and verdicts.
//! - [`throttle`]: the exponential and timestamp-interval delay policies.
//! - [`store`]: the flat-file account store (digests only, never
//!   plaintext).
//! - [`netsim`]: a deterministic two-channel simulator with a simulated
//!   clock and transcript capture.
//! - [`attack`]: dictionary, replay, and forgery adversaries with
//!   CSV/JSON-lines reporting.

pub mod attack;
pub mod crypto;
pub mod netsim;
pub mod protocol;
pub mod store;
pub mod throttle;

pub use crypto::{Digest, ServerSecret, SessionId, SessionKey};
pub use protocol::{
    ChallengeCookie, LoginRequest, Outcome, ProofResponse, SecureChannelPart, Verdict, Verifier,
};
pub use store::UserStore;
pub use throttle::DelayPolicy;
