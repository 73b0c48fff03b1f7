//! Prover-side wire client.

use std::net::TcpStream;
use std::time::Duration;

use pvbpp_core::protocol::{
    prover_respond, ChallengeCookie, ProofResponse, SecureChannelPart, Verdict,
};

use crate::frame::{parse_error_payload, ErrorCode, Frame, FrameError, MsgType};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot connect to {addr}: {source}")]
    Connect {
        addr: String,
        source: std::io::Error,
    },
    #[error("connection i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("server is throttling this connection: {wait_millis} ms remaining")]
    Throttled { wait_millis: u64 },
    #[error("password must not be empty")]
    EmptyPassword,
}

impl From<FrameError> for ClientError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::Io(io) => ClientError::Io(io),
            other => ClientError::Protocol(other.to_string()),
        }
    }
}

pub fn connect(addr: &str) -> Result<TcpStream, ClientError> {
    let stream = TcpStream::connect(addr).map_err(|source| ClientError::Connect {
        addr: addr.to_string(),
        source,
    })?;
    stream.set_read_timeout(Some(Duration::from_secs(120)))?;
    stream.set_nodelay(true)?;
    Ok(stream)
}

fn expect_frame(stream: &mut TcpStream, wanted: MsgType) -> Result<Frame, ClientError> {
    let frame = Frame::read_from(stream)?;
    if frame.msg_type == MsgType::Error {
        return match parse_error_payload(&frame.payload) {
            Some((ErrorCode::Throttled, wait_millis)) => {
                Err(ClientError::Throttled { wait_millis })
            }
            Some((code, _)) => Err(ClientError::Protocol(format!("server error: {code:?}"))),
            None => Err(ClientError::Protocol("malformed error frame".to_string())),
        };
    }
    if frame.msg_type != wanted {
        return Err(ClientError::Protocol(format!(
            "expected {wanted:?}, got {:?}",
            frame.msg_type
        )));
    }
    Ok(frame)
}

/// Sends the username and collects both challenge halves.
pub fn request_challenge(
    stream: &mut TcpStream,
    username: &str,
) -> Result<(ChallengeCookie, SecureChannelPart), ClientError> {
    Frame::new(MsgType::LoginRequest, username.as_bytes().to_vec()).write_to(stream)?;
    let insecure = expect_frame(stream, MsgType::ChallengeInsecure)?;
    let cookie = ChallengeCookie::decode(&insecure.payload)
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    let secure = expect_frame(stream, MsgType::ChallengeSecure)?;
    let secure_part = SecureChannelPart::decode(&secure.payload)
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    Ok((cookie, secure_part))
}

/// Submits a proof response and returns the verdict.
pub fn submit_proof(stream: &mut TcpStream, resp: &ProofResponse) -> Result<Verdict, ClientError> {
    Frame::new(MsgType::ProofResponse, resp.encode().to_vec()).write_to(stream)?;
    let frame = expect_frame(stream, MsgType::Verdict)?;
    Verdict::decode(&frame.payload).map_err(|e| ClientError::Protocol(e.to_string()))
}

/// One full login attempt on a fresh connection.
pub fn login(addr: &str, username: &str, password: &str) -> Result<Verdict, ClientError> {
    if password.is_empty() {
        return Err(ClientError::EmptyPassword);
    }
    let mut stream = connect(addr)?;
    let (cookie, secure_part) = request_challenge(&mut stream, username)?;
    let resp = prover_respond(&secure_part, &cookie, password)
        .map_err(|e| ClientError::Protocol(e.to_string()))?;
    submit_proof(&mut stream, &resp)
}
