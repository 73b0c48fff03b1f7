//! TCP server: accepts connections, runs the four-message handshake per
//! connection, and enforces throttling as per-connection deadlines.
//!
//! Verification itself is stateless — any proof frame is judged from its
//! own bytes plus the server secret — so a connection may open with a
//! proof for a challenge issued before a server restart. What each
//! connection tracks locally is only its penalty deadline and the attempt
//! counter for the *next* challenge it will be granted. A connection under
//! penalty gets an error frame carrying the remaining wait instead of a
//! challenge; other connections are never affected, so one throttled
//! attacker cannot deny service to anyone else.

use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use pvbpp_core::crypto::{SecretError, ServerSecret};
use pvbpp_core::protocol::{LoginRequest, ProofResponse, Verifier};
use pvbpp_core::store::{StoreError, UserStore};
use pvbpp_core::throttle::DelayPolicy;

use crate::frame::{error_payload, ErrorCode, Frame, FrameError, MsgType};

pub const DEFAULT_MAX_REAL_DELAY_SECS: u64 = 60;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("user store unusable: {0}")]
    Store(#[from] StoreError),
    #[error("server secret unusable: {0}")]
    Secret(#[from] SecretError),
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub store_path: PathBuf,
    pub secret_path: PathBuf,
    pub policy: DelayPolicy,
    pub max_age: u64,
    /// Real-time ceiling on enforced waits, so a large policy delay cannot
    /// park a connection for hours. The verdict still announces the policy
    /// value.
    pub max_real_delay: Duration,
}

struct ServerCtx {
    store: UserStore,
    verifier: Verifier,
    max_real_delay: Duration,
}

/// A running listener. Dropping it (or calling [`shutdown`](Self::shutdown))
/// stops the accept loop.
pub struct Server {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl Server {
    /// Loads the store and secret, binds the listener, and starts accepting
    /// in a background thread.
    pub fn bind(addr: &str, config: ServerConfig) -> Result<Server, ServeError> {
        let store = UserStore::load_or_empty(&config.store_path)?;
        let secret = ServerSecret::load(&config.secret_path)?;
        let listener = TcpListener::bind(addr).map_err(|source| ServeError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        let local_addr = listener.local_addr().map_err(|source| ServeError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        listener
            .set_nonblocking(true)
            .map_err(|source| ServeError::Bind {
                addr: addr.to_string(),
                source,
            })?;

        let ctx = Arc::new(ServerCtx {
            store,
            verifier: Verifier::new(secret, config.policy).with_max_age(config.max_age),
            max_real_delay: config.max_real_delay,
        });
        let stop = Arc::new(AtomicBool::new(false));
        let stop_flag = Arc::clone(&stop);
        let accept_thread = std::thread::spawn(move || {
            while !stop_flag.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let ctx = Arc::clone(&ctx);
                        std::thread::spawn(move || handle_connection(stream, ctx));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(10));
                    }
                    Err(_) => break,
                }
            }
        });

        Ok(Server {
            local_addr,
            stop,
            accept_thread: Some(accept_thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }

    /// Blocks until the accept loop ends (effectively forever for the
    /// `serve` subcommand).
    pub fn run_forever(mut self) {
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop_accepting();
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn send(stream: &mut TcpStream, msg_type: MsgType, payload: Vec<u8>) -> Result<(), FrameError> {
    Frame::new(msg_type, payload).write_to(stream)
}

fn send_error(stream: &mut TcpStream, code: ErrorCode, wait_millis: u64) {
    let _ = send(stream, MsgType::Error, error_payload(code, wait_millis));
}

fn handle_connection(mut stream: TcpStream, ctx: Arc<ServerCtx>) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(120)));
    let _ = stream.set_nodelay(true);
    let mut rng = rand::rng();
    let mut penalty_deadline: Option<Instant> = None;
    let mut next_n: u64 = 1;

    loop {
        let frame = match Frame::read_from(&mut stream) {
            Ok(frame) => frame,
            Err(FrameError::Oversize { .. }) => {
                send_error(&mut stream, ErrorCode::MalformedFrame, 0);
                return;
            }
            Err(FrameError::UnknownType(_)) => {
                send_error(&mut stream, ErrorCode::ProtocolViolation, 0);
                return;
            }
            Err(FrameError::Io(_)) => return,
        };

        match frame.msg_type {
            MsgType::LoginRequest => {
                if let Some(deadline) = penalty_deadline {
                    let now = Instant::now();
                    if now < deadline {
                        let remaining = deadline - now;
                        send_error(
                            &mut stream,
                            ErrorCode::Throttled,
                            remaining.as_millis() as u64,
                        );
                        continue;
                    }
                    penalty_deadline = None;
                }
                let request = match std::str::from_utf8(&frame.payload)
                    .ok()
                    .and_then(|u| LoginRequest::new(u).ok())
                {
                    Some(request) => request,
                    None => {
                        send_error(&mut stream, ErrorCode::ProtocolViolation, 0);
                        return;
                    }
                };
                let challenge =
                    match ctx
                        .verifier
                        .begin(&request, &ctx.store, next_n, unix_now(), &mut rng)
                    {
                        Ok(challenge) => challenge,
                        Err(_) => {
                            send_error(&mut stream, ErrorCode::Internal, 0);
                            return;
                        }
                    };
                let insecure = send(
                    &mut stream,
                    MsgType::ChallengeInsecure,
                    challenge.cookie().encode().to_vec(),
                );
                let secure = send(
                    &mut stream,
                    MsgType::ChallengeSecure,
                    challenge.secure_part().encode().to_vec(),
                );
                if insecure.is_err() || secure.is_err() {
                    return;
                }
            }
            MsgType::ProofResponse => {
                let resp = match ProofResponse::decode(&frame.payload) {
                    Ok(resp) => resp,
                    Err(_) => {
                        send_error(&mut stream, ErrorCode::ProtocolViolation, 0);
                        return;
                    }
                };
                let verdict = ctx.verifier.check(&resp, unix_now());
                if send(&mut stream, MsgType::Verdict, verdict.encode().to_vec()).is_err() {
                    return;
                }
                if verdict.is_valid() {
                    penalty_deadline = None;
                    next_n = 1;
                } else {
                    next_n = verdict.next_n;
                    let enforced = verdict.next_delay.min(ctx.max_real_delay.as_secs_f64());
                    penalty_deadline = Some(Instant::now() + Duration::from_secs_f64(enforced));
                }
            }
            // Clients have no business sending server-to-client types.
            MsgType::ChallengeInsecure
            | MsgType::ChallengeSecure
            | MsgType::Verdict
            | MsgType::Error => {
                send_error(&mut stream, ErrorCode::ProtocolViolation, 0);
                return;
            }
        }
    }
}
