//! Cancelable face-template protection.
//!
//! The pipeline projects a real-valued feature vector through a seeded
//! orthonormal random matrix, binarizes it with per-bit perceptron
//! discriminants trained against class target codewords, and seals the
//! result in a fuzzy commitment (repetition code + salted SHA-256 key
//! hash). Compromised templates are revoked by re-issuing with a fresh
//! seed. The crate also ships a security-strength analyzer, brute-force
//! and affine attack simulators, and an evaluation harness.

pub mod bda;
pub mod bits;
pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod ingestion;
pub mod linalg;
pub mod pipeline;
pub mod security;
pub mod store;

pub use bits::BinaryTemplate;
pub use error::{Error, Result};
pub use linalg::{CancelableTemplate, FeatureVector, ProjectionMatrix};
pub use pipeline::{AuthDecision, EnrollmentRecord, SystemConfig};
