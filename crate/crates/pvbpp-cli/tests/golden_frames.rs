//! Byte-exact frame vectors. The hex in tests/data/golden_frames.txt was
//! produced by an independent implementation of the layout; the codec must
//! reproduce and re-read every vector bit for bit.

use std::io::Cursor;

use pvbpp_cli::frame::{error_payload, ErrorCode, Frame, MsgType};

fn golden_vectors() -> Vec<(String, Vec<u8>)> {
    let text = include_str!("data/golden_frames.txt");
    text.lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let (name, hex_bytes) = line.split_once(' ').expect("name and hex");
            (
                name.to_string(),
                hex::decode(hex_bytes.trim()).expect("valid hex"),
            )
        })
        .collect()
}

fn expected_frame(name: &str) -> Frame {
    let cookie: Vec<u8> = {
        let mut c = Vec::new();
        c.extend(0u8..16);
        c.extend(1u64.to_be_bytes());
        c.extend(42u64.to_be_bytes());
        c.extend([0xAA; 32]);
        c.extend([0x00; 16]);
        c
    };
    match name {
        "login_request" => Frame::new(MsgType::LoginRequest, b"alice".to_vec()),
        "challenge_insecure" => Frame::new(MsgType::ChallengeInsecure, cookie),
        "challenge_secure" => Frame::new(MsgType::ChallengeSecure, (0u8..32).collect()),
        "proof_response" => {
            let mut payload = cookie;
            payload.extend([0xBB; 32]);
            Frame::new(MsgType::ProofResponse, payload)
        }
        "verdict" => {
            let mut payload = vec![0x00];
            payload.extend(2u64.to_be_bytes());
            payload.extend(4000u64.to_be_bytes());
            payload.extend([0xCC; 16]);
            Frame::new(MsgType::Verdict, payload)
        }
        "error_throttled" => Frame::new(MsgType::Error, error_payload(ErrorCode::Throttled, 1500)),
        other => panic!("unknown golden vector {other:?}"),
    }
}

#[test]
fn codec_matches_every_golden_vector_byte_for_byte() {
    let vectors = golden_vectors();
    assert_eq!(vectors.len(), 6);
    for (name, golden) in vectors {
        let frame = expected_frame(&name);
        assert_eq!(frame.encode(), golden, "encode mismatch for {name}");
        let decoded = Frame::read_from(&mut Cursor::new(&golden)).unwrap();
        assert_eq!(decoded, frame, "decode mismatch for {name}");
        assert_eq!(decoded.encode(), golden, "re-encode mismatch for {name}");
    }
}
