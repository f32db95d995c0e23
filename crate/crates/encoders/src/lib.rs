//! Power-constrained linear encoders, pilot schemes and transmit-block assembly.

pub mod block;
pub mod error;
pub mod linear;
pub mod pilots;
pub mod source;

pub use block::{assemble_block, data_gain, data_symbol_offset};
pub use channel_sim::TransmitTensor;
pub use error::EncoderError;
pub use linear::{complexify, LinearEncoder, OVERFLOW_FACTOR};
pub use pilots::{PilotKind, PilotScheme};
pub use source::{source_energy, subspace_source_prior};
