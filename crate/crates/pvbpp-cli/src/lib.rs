//! Wire transport and service layer: length-prefixed frames over TCP, a
//! multi-connection server with per-connection throttling deadlines, a
//! prover-side client, and configuration plumbing for the `pvbpp` binary.

pub mod client;
pub mod config;
pub mod frame;
pub mod server;
