//! Ray-based interior-penalty discontinuous Galerkin (IPDG) solver for
//! high-frequency Helmholtz equations.
//!
//! The solver pipeline has four stages:
//! 1. solve the Helmholtz problem at a reduced frequency with a standard
//!    bilinear IPDG discretization on a fine mesh,
//! 2. extract local ray directions from the oscillatory solution, either
//!    with a small convolutional network trained on synthetic plane-wave
//!    superpositions or with a brute-force plane-wave fitting oracle,
//! 3. prune redundant directions per element via a small SVD,
//! 4. solve at the target frequency on a coarse mesh whose basis functions
//!    are bilinear shape functions modulated by locally linearized
//!    plane-wave phases along the extracted directions.
//!
//! The crate is organized by stage: [`mesh`] and [`fields`] provide the
//! geometric and physical setup, [`ray_basis`] the modulated approximation
//! space, [`assembly`] the IPDG forms (impedance, Cauchy and PML boundary
//! handling), [`solver`] the complex sparse direct solve, [`nn`] a minimal
//! deep-learning kernel, [`ray_learning`] the direction extraction, and
//! [`pipeline`] the orchestration plus error metrics.

pub mod assembly;
pub mod config;
pub mod fields;
pub mod mesh;
pub mod nn;
pub mod pipeline;
pub mod quadrature;
pub mod ray_basis;
pub mod ray_learning;
pub mod solver;

pub use num_complex::Complex64;

/// Spatial point with runtime dimension; unused trailing components are zero.
pub type Point = [f64; 3];

/// Complex gradient with runtime dimension.
pub type CGrad = [Complex64; 3];
