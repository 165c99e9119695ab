//! Desk-scale laboratory for eye-behavior-aided multimodal emotion
//! recognition: a self-contained f64 autodiff kernel, synthetic multimodal
//! data with a controllable gap between displayed and felt emotion, eye
//! stream conditioning, reliability-weighted annotation aggregation, the
//! EMERT model (adversarial feature decoupling + cross-attention fusion),
//! evaluation metrics, and an experiment harness.

pub mod ala;
pub mod datamodel;
pub mod diffkernel;
pub mod emert;
pub mod error;
pub mod eyeprep;
pub mod harness;
pub mod metrics;

pub use error::{Error, Result};
