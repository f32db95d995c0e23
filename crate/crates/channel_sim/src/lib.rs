//! Block-fading MIMO-OFDM channel generation and the per-subcarrier receive model
//! `Y_f = X_f H_f + W_f`.

pub mod dims;
pub mod error;
pub mod io;
pub mod model;
pub mod prior;

pub use dims::SystemDims;
pub use error::ChannelError;
pub use model::{
    calibrate_noise_var, csnr, generate_channel, noiseless, transmit, ChannelTensor, ReceiveTensor,
    TransmitTensor,
};
pub use prior::{circular_gaussian_prior, exponential_correlation, kron_exponential_covariance};
