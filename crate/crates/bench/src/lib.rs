//! Benchmark fixtures shared by the criterion targets.

use facelock_core::ingestion::{generate_synthetic, SyntheticSpec};
use facelock_core::linalg::FeatureVector;
use facelock_core::pipeline::{enroll, EnrollmentRecord, SystemConfig};

pub fn fixture(l: usize, l_r: usize, n: usize, rho: u16) -> (EnrollmentRecord, FeatureVector) {
    let config = SystemConfig::new(l, l_r, n, rho);
    let spec = SyntheticSpec { k: 1, r: 4, l, sigma_within: 0.05, sigma_between: 1.0, seed: 7 };
    let samples = generate_synthetic(&spec).unwrap().classes()[0].samples.clone();
    let record = enroll("bench-user", &samples, &config, 42).unwrap();
    let probe = samples[0].clone();
    (record, probe)
}
