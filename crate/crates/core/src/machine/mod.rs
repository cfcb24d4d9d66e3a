//! Finite-state encoders and delayed decoders with per-state prefix codes.

pub mod bits;
pub mod code;
pub mod decoder;
pub mod encoder;
pub mod eval;
pub mod text;

pub use bits::{BitReader, Bitstream};
pub use code::{kraft_check, Codeword, KraftReport, PrefixCode};
pub use decoder::{fsm_decode, parse_bitstream, FsmDecoder, ParseMachine};
pub use encoder::{fsm_encode, Encoding, FsmEncoder};
pub use eval::{
    exact_trace, expected_distortion_exact, monte_carlo_distortion, ExactTrace, MonteCarloEstimate,
};
pub use text::{decoder_from_text, decoder_to_text, encoder_from_text, encoder_to_text};
