//! Power-line communication channel emulation and machine-learning
//! experiments built on a small from-scratch neural network core.

pub mod autoencoder;
pub mod classifiers;
pub mod clustering;
pub mod diagnostics;
pub mod error;
pub mod features;
pub mod gan;
pub mod io;
pub mod medium;
pub mod nn;
pub mod routing;
pub mod seed;
pub mod tensor;
pub mod trace;

pub use error::{Error, Result};
pub use tensor::Tensor2;
pub use trace::Trace;

/// Library version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The guide's chapters, compiled so their code blocks run as doc-tests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/transmission-lines.md")]
    pub mod transmission_lines {}
    #[doc = include_str!("../../../book/src/channels-and-noise.md")]
    pub mod channels_and_noise {}
    #[doc = include_str!("../../../book/src/neural-core.md")]
    pub mod neural_core {}
    #[doc = include_str!("../../../book/src/noise-clustering.md")]
    pub mod noise_clustering {}
    #[doc = include_str!("../../../book/src/autoencoder.md")]
    pub mod autoencoder {}
    #[doc = include_str!("../../../book/src/gan.md")]
    pub mod gan {}
    #[doc = include_str!("../../../book/src/routing.md")]
    pub mod routing {}
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    pub mod diagnostics {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    pub mod reproducibility {}
}
