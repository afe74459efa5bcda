//! Real-input Fourier transforms and the learnable spectral convolution.

mod conv;
mod fft;
mod plan;

pub use conv::{init_spectral_weights, spectral_conv, spectral_conv_on, weight_mode_shape};
pub use fft::{frequency, Fft, Fft2};
pub use plan::RfftPlan;
