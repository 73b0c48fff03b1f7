//! Length-prefixed frames for the TCP transport.
//!
//! Wire layout: `length[4 BE] || msg_type[1] || payload[length]` with
//! `length <= 4096`. Message types:
//!
//! | type | meaning             | payload                                 |
//! |------|---------------------|-----------------------------------------|
//! | 0x01 | login request       | username, UTF-8                         |
//! | 0x02 | challenge, insecure | 80-octet cookie                         |
//! | 0x03 | challenge, secure   | 32-octet session id + key               |
//! | 0x04 | proof response      | 112-octet cookie + proof                |
//! | 0x05 | verdict             | 33-octet verdict                        |
//! | 0x06 | error               | 1-octet code + remaining millis (8 BE)  |

use std::io::{Read, Write};

/// Upper bound on a frame payload.
pub const MAX_PAYLOAD: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("frame payload of {len} octets exceeds the {MAX_PAYLOAD}-octet limit")]
    Oversize { len: u32 },
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("frame i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    LoginRequest = 0x01,
    ChallengeInsecure = 0x02,
    ChallengeSecure = 0x03,
    ProofResponse = 0x04,
    Verdict = 0x05,
    Error = 0x06,
}

impl MsgType {
    pub fn from_byte(byte: u8) -> Option<Self> {
        match byte {
            0x01 => Some(MsgType::LoginRequest),
            0x02 => Some(MsgType::ChallengeInsecure),
            0x03 => Some(MsgType::ChallengeSecure),
            0x04 => Some(MsgType::ProofResponse),
            0x05 => Some(MsgType::Verdict),
            0x06 => Some(MsgType::Error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        debug_assert!(payload.len() <= MAX_PAYLOAD);
        Frame { msg_type, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), FrameError> {
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }

    /// Reads one frame. The length header is validated before anything else
    /// is consumed, so an oversize announcement never allocates.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Frame, FrameError> {
        let mut header = [0u8; 4];
        r.read_exact(&mut header)?;
        let len = u32::from_be_bytes(header);
        if len as usize > MAX_PAYLOAD {
            return Err(FrameError::Oversize { len });
        }
        let mut type_byte = [0u8; 1];
        r.read_exact(&mut type_byte)?;
        let msg_type =
            MsgType::from_byte(type_byte[0]).ok_or(FrameError::UnknownType(type_byte[0]))?;
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Frame { msg_type, payload })
    }
}

/// Error-frame payload codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    MalformedFrame = 0x01,
    Throttled = 0x02,
    ProtocolViolation = 0x03,
    Internal = 0x04,
}

impl ErrorCode {
    pub fn from_byte(byte: u8) -> Option<Self> {
        match byte {
            0x01 => Some(ErrorCode::MalformedFrame),
            0x02 => Some(ErrorCode::Throttled),
            0x03 => Some(ErrorCode::ProtocolViolation),
            0x04 => Some(ErrorCode::Internal),
            _ => None,
        }
    }
}

/// Builds the 9-octet error payload: code plus remaining-wait milliseconds
/// (zero when not applicable).
pub fn error_payload(code: ErrorCode, wait_millis: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(9);
    out.push(code as u8);
    out.extend_from_slice(&wait_millis.to_be_bytes());
    out
}

pub fn parse_error_payload(payload: &[u8]) -> Option<(ErrorCode, u64)> {
    if payload.len() != 9 {
        return None;
    }
    let code = ErrorCode::from_byte(payload[0])?;
    let wait = u64::from_be_bytes(payload[1..9].try_into().ok()?);
    Some((code, wait))
}
