//! Security-strength reporting and empirical attack simulations.
//!
//! A stage of output length Kc costs a brute-force attacker 2^(Kc-1)
//! guesses; the report records Kc and strength_bits = Kc - 1 per stage in
//! exact integer arithmetic, alongside a 40-character password-guessing
//! baseline for comparison. Attack simulators consume only serialized
//! records — never keys or raw biometrics.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bda;
use crate::bits::BinaryTemplate;
use crate::error::{Error, Result};
use crate::fuzzy::{self, Commitment};
use crate::linalg::CancelableTemplate;
use crate::pipeline::{deserialize_record, EnrollmentRecord, SystemConfig};

pub const CHARSET_SIZE: u32 = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageStrength {
    pub stage: String,
    pub kc: u64,
    pub strength_bits: u64,
    /// log2 of the guess space (same as strength_bits for the 2^(Kc-1) rule).
    pub guess_space_log2: u64,
}

impl StageStrength {
    pub fn new(stage: impl Into<String>, kc: u64) -> Self {
        let strength = kc.saturating_sub(1);
        Self { stage: stage.into(), kc, strength_bits: strength, guess_space_log2: strength }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityReport {
    pub stages: Vec<StageStrength>,
    pub charset_size: u32,
    pub password_length: u32,
    /// log2(charset_size ^ password_length).
    pub charset_strength_log2: f64,
    pub overall_strength_bits: u64,
}

impl SecurityReport {
    fn assemble(stages: Vec<StageStrength>, password_length: u32) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Structural("report needs at least one stage".into()));
        }
        let overall = stages.iter().map(|s| s.strength_bits).min().unwrap();
        Ok(Self {
            stages,
            charset_size: CHARSET_SIZE,
            password_length,
            charset_strength_log2: f64::from(password_length) * f64::from(CHARSET_SIZE).log2(),
            overall_strength_bits: overall,
        })
    }

    /// Machine-readable CSV: `stage,Kc,strength_bits`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,Kc,strength_bits\n");
        for s in &self.stages {
            out.push_str(&format!("{},{},{}\n", s.stage, s.kc, s.strength_bits));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<20} {:>8} {:>14}\n", "stage", "Kc", "strength_bits"));
        for s in &self.stages {
            out.push_str(&format!("{:<20} {:>8} {:>14}\n", s.stage, s.kc, s.strength_bits));
        }
        out.push_str(&format!(
            "charset baseline: log2({}^{}) = {:.1} bits\n",
            self.charset_size, self.password_length, self.charset_strength_log2
        ));
        out.push_str(&format!("overall (min stage): {} bits\n", self.overall_strength_bits));
        out
    }
}

/// Measured per-stage Kc from a configuration: the cancelable stage is the
/// bit length of its serialized form (l_r f64s), the binary and commitment
/// stages are n, and the full entry is the stored commitment string.
pub fn strength_report(config: &SystemConfig, password_length: u32) -> Result<SecurityReport> {
    config.validate()?;
    let commitment_bits = commitment_wire_bits(config);
    let stages = vec![
        StageStrength::new("random_projection", (config.l_r * 64) as u64),
        StageStrength::new("bda", config.n as u64),
        StageStrength::new("fuzzy_commitment", config.n as u64),
        StageStrength::new("full", commitment_bits),
    ];
    SecurityReport::assemble(stages, password_length)
}

fn commitment_wire_bits(config: &SystemConfig) -> u64 {
    // FCM1 layout: magic 4 + name len 2 + name + rho 2 + n 4 + salt 16 +
    // hash 32 + helper bytes
    let name_len = fuzzy::CODEC_REPETITION.len() as u64;
    (4 + 2 + name_len + 2 + 4 + 16 + 32 + (config.n as u64 + 7) / 8) * 8
}

/// Report with literal Kc overrides so published rows can be reproduced
/// verbatim; overrides are (stage name, Kc) pairs and replace or append.
pub fn strength_report_with_overrides(
    config: &SystemConfig,
    password_length: u32,
    overrides: &[(String, u64)],
) -> Result<SecurityReport> {
    let mut report = strength_report(config, password_length)?;
    for (stage, kc) in overrides {
        let row = StageStrength::new(stage.clone(), *kc);
        match report.stages.iter_mut().find(|s| &s.stage == stage) {
            Some(existing) => *existing = row,
            None => report.stages.push(row),
        }
    }
    report.overall_strength_bits = report.stages.iter().map(|s| s.strength_bits).min().unwrap();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub attack: String,
    pub trials: u64,
    pub successes: u64,
    pub empirical_rate: f64,
    pub theoretical_rate: f64,
    /// Consistency of empirical vs theoretical at a 3-sigma binomial bound.
    pub verdict: Verdict,
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of n-bit templates the commitment accepts: every per-block error
/// pattern of weight <= t, i.e. (sum_{e<=t} C(rho,e))^(n/rho).
pub fn acceptance_ball_size(rho: u16, n: usize) -> Result<u128> {
    let codec = fuzzy::EccCodec::repetition(rho, n as u32)?;
    let t = codec.t() as u64;
    let per_block: u128 = (0..=t).map(|e| binomial(rho as u64, e)).sum();
    Ok(per_block.pow((n / rho as usize) as u32))
}

fn verdict_for(successes: u64, trials: u64, p: f64) -> (f64, Verdict) {
    let emp = successes as f64 / trials as f64;
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    // degenerate p in {0,1}: any deviation is inconsistent
    let ok = if sigma == 0.0 { emp == p } else { (emp - p).abs() <= 3.0 * sigma };
    (emp, if ok { Verdict::Consistent } else { Verdict::Inconsistent })
}

fn mix_seed(seed: u64, trial: u64) -> u64 {
    // splitmix64 step; per-trial generators make results schedule-independent
    let mut z = seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_template_seeded(seed: u64, n: usize) -> BinaryTemplate {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut bytes = vec![0u8; (n + 7) / 8];
    rng.fill_bytes(&mut bytes);
    if n % 8 != 0 {
        let last = bytes.len() - 1;
        bytes[last] &= 0xFFu8 << (8 - n % 8);
    }
    BinaryTemplate::from_bytes(n, bytes).expect("pad cleared")
}

/// Brute force against a reduced-size commitment: uniform random templates
/// vs the analytic acceptance probability A / 2^n.
pub fn brute_force_sim(
    commitment: &Commitment,
    n_small: usize,
    trials: u64,
    seed: u64,
) -> Result<AttackOutcome> {
    if trials == 0 {
        return Err(Error::Domain("trials must be positive".into()));
    }
    if n_small > 24 {
        return Err(Error::Budget(format!(
            "n_small = {n_small} > 24: space too large to calibrate empirically"
        )));
    }
    if commitment.codec().n() != n_small {
        return Err(Error::Dimension {
            what: "brute force commitment width",
            expected: n_small,
            actual: commitment.codec().n(),
        });
    }
    let a = acceptance_ball_size(commitment.codec().rho(), n_small)?;
    let p = a as f64 / (1u128 << n_small) as f64;
    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let q = random_template_seeded(mix_seed(seed, i), n_small);
            u64::from(fuzzy::verify_commitment(&q, commitment).map(|o| o.accepted).unwrap_or(false))
        })
        .sum();
    let (empirical_rate, verdict) = verdict_for(successes, trials, p);
    Ok(AttackOutcome {
        attack: "brute_force".into(),
        trials,
        successes,
        empirical_rate,
        theoretical_rate: p,
        verdict,
    })
}

/// Exhaustive accept count over all 2^n templates; oracle for the analytic
/// ball size at desk scale.
pub fn exhaustive_acceptance_count(commitment: &Commitment) -> Result<u64> {
    let n = commitment.codec().n();
    if n > 16 {
        return Err(Error::Budget(format!("exhaustive enumeration capped at n = 16, got {n}")));
    }
    let mut count = 0u64;
    for v in 0u32..(1u32 << n) {
        let bits: Vec<bool> = (0..n).map(|i| v >> (n - 1 - i) & 1 == 1).collect();
        let t = BinaryTemplate::from_bits(&bits);
        if fuzzy::verify_commitment(&t, commitment)?.accepted {
            count += 1;
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleAccess {
    /// Attacker holds only the serialized record's helper data.
    None,
    /// Attacker additionally inverts the linear discriminant functions by
    /// least squares on a guessed bit-string.
    Model,
}

/// Affine ("smart") attack against a stolen serialized record. The
/// simulator deserializes the record itself, so it can never be handed a
/// key or raw biometric.
pub fn affine_attack_sim(
    stolen_record: &[u8],
    oracle_access: OracleAccess,
    trials: u64,
    seed: u64,
) -> Result<AttackOutcome> {
    if trials == 0 {
        return Err(Error::Domain("trials must be positive".into()));
    }
    let record = deserialize_record(stolen_record)?;
    let n = record.config.n;
    let codec = record.commitment.codec().clone();
    let k_bits = codec.k_bits();

    let theoretical_rate = match oracle_access {
        // each guess is a uniform key guess over 2^k_bits
        OracleAccess::None => 0.5f64.powi(k_bits as i32),
        // random target bits: same acceptance ball as brute force
        OracleAccess::Model => {
            acceptance_ball_size(codec.rho(), n)? as f64 / 2.0f64.powi(n as i32)
        }
    };

    let successes: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = mix_seed(seed, i);
            let query = match oracle_access {
                OracleAccess::None => {
                    let guess = random_template_seeded(trial_seed, k_bits);
                    let cw = fuzzy::ecc_encode(&guess, &codec).expect("guess length");
                    cw.xor(record.commitment.helper()).expect("same length")
                }
                OracleAccess::Model => {
                    let target = random_template_seeded(trial_seed, n);
                    let x = invert_sign_system(&record, &target);
                    bda::binarize(&x, &record.bda_model).expect("dimension")
                }
            };
            u64::from(
                fuzzy::verify_commitment(&query, &record.commitment)
                    .map(|o| o.accepted)
                    .unwrap_or(false),
            )
        })
        .sum();
    let (empirical_rate, verdict) = verdict_for(successes, trials, theoretical_rate);
    Ok(AttackOutcome {
        attack: format!(
            "affine_{}",
            match oracle_access {
                OracleAccess::None => "helper_only",
                OracleAccess::Model => "model",
            }
        ),
        trials,
        successes,
        empirical_rate,
        theoretical_rate,
        verdict,
    })
}

/// Worst case outside the protected-store threat model: an attacker holding
/// the true binary template trivially verifies. Template secrecy rests on
/// the commitment.
pub fn replay_true_template(record: &EnrollmentRecord, template: &BinaryTemplate) -> Result<bool> {
    Ok(fuzzy::verify_commitment(template, &record.commitment)?.accepted)
}

/// Minimum-norm least-squares solution of W x = t' (t' = +-1 targets minus
/// biases) via the normal equations on W W^T with a small ridge.
fn invert_sign_system(record: &EnrollmentRecord, target: &BinaryTemplate) -> CancelableTemplate {
    let model = &record.bda_model;
    let n = model.n();
    let d = model.dim();
    let rhs: Vec<f64> = (0..n)
        .map(|j| (if target.get(j) { 1.0 } else { -1.0 }) - model.biases()[j])
        .collect();
    // gram = W W^T + ridge I
    let mut gram = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 =
                model.weights()[i].iter().zip(&model.weights()[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = dot;
            gram[j][i] = dot;
        }
        gram[i][i] += 1e-9;
    }
    let y = solve_gaussian(gram, rhs);
    let mut x = vec![0.0f64; d];
    for (j, yj) in y.iter().enumerate() {
        for (xi, wji) in x.iter_mut().zip(&model.weights()[j]) {
            *xi += yj * wji;
        }
    }
    CancelableTemplate::new(x).expect("finite solve")
}

fn solve_gaussian(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        // partial pivot
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        if diag.abs() < 1e-300 {
            continue;
        }
        for row in col + 1..n {
            let f = a[row][col] / diag;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = if a[col][col].abs() < 1e-300 { 0.0 } else { acc / a[col][col] };
    }
    x
}
