//! Deterministic core of a chain-of-rendering-decomposition pipeline for PBR
//! material estimation.
//!
//! The pipeline decomposes a shaded, tileable texture image into basecolor,
//! normal, height, roughness and metalness maps in three steps, each
//! conditioned on a representation computed from the previous outputs:
//!
//! 1. basecolor prediction from the RGB image;
//! 2. normal prediction conditioned on an approximate irradiance image
//!    (`rgb / basecolor`), with height integrated from the normals;
//! 3. roughness/metalness prediction conditioned on a per-pixel grid search
//!    under an estimated directional light.
//!
//! The learned predictors are abstracted behind [`chain::PredictorSuite`];
//! this crate ships a passthrough suite, an oracle suite for testing and an
//! optimization-based reference suite built on [`optim`].

pub mod brdf;
pub mod chain;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod height;
pub mod io;
pub mod math;
pub mod optim;
pub mod synth;
pub mod types;

pub use brdf::{render, shade_pixel, shade_pixel_with_jacobian, BrdfSample, ShadingJacobian};
pub use error::{ChordError, Result};
pub use math::Vec3;
pub use types::{
    ColorSpace, DirectionalLight, MaterialSet, TextureImage, ViewConfig,
};
