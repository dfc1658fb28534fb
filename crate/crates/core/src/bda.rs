//! Binary discriminant analysis: per-class target codewords, one pocket
//! perceptron per output bit, and binarization of cancelable templates.
//!
//! Training decomposes per bit; bits are trained concurrently and the result
//! is bit-identical to sequential training because each bit's computation is
//! self-contained and deterministic (zero init, fixed sample order).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bits::BinaryTemplate;
use crate::error::{Error, Result};
use crate::linalg::CancelableTemplate;

/// Rejection-sampling attempt budget for codeword assignment.
const ASSIGN_BUDGET: usize = 1_000_000;

/// Reference codewords, one per class, pairwise Hamming distance >= d_min.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetCodebook {
    codewords: Vec<BinaryTemplate>,
    d_min: usize,
    seed: u64,
}

impl TargetCodebook {
    pub fn codewords(&self) -> &[BinaryTemplate] {
        &self.codewords
    }

    pub fn codeword(&self, class: usize) -> &BinaryTemplate {
        &self.codewords[class]
    }

    pub fn k(&self) -> usize {
        self.codewords.len()
    }

    pub fn d_min(&self) -> usize {
        self.d_min
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn random_template(rng: &mut ChaCha20Rng, n: usize) -> BinaryTemplate {
    let mut bytes = vec![0u8; (n + 7) / 8];
    rng.fill_bytes(&mut bytes);
    // zero the pad bits
    if n % 8 != 0 {
        let last = bytes.len() - 1;
        bytes[last] &= 0xFFu8 << (8 - n % 8);
    }
    BinaryTemplate::from_bytes(n, bytes).expect("pad bits cleared")
}

/// Draw `k` random n-bit codewords at pairwise distance >= `d_min`.
pub fn assign_targets(k: usize, n: usize, d_min: usize, seed: u64) -> Result<TargetCodebook> {
    if k == 0 || n == 0 {
        return Err(Error::Domain("k and n must be positive".into()));
    }
    if d_min > n {
        return Err(Error::Domain(format!("d_min {d_min} exceeds n {n}")));
    }
    if n < 128 && (k as u128) > (1u128 << n) {
        return Err(Error::Infeasible(format!("k = {k} codewords cannot be distinct in 2^{n} strings")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut kept: Vec<BinaryTemplate> = Vec::with_capacity(k);
    let floor = d_min.max(1); // codewords must at least be distinct
    let mut attempts = 0usize;
    while kept.len() < k {
        if attempts >= ASSIGN_BUDGET {
            return Err(Error::Capacity(format!(
                "codeword sampling budget of {ASSIGN_BUDGET} draws exhausted at {} of {k}; \
                 increase n or decrease d_min",
                kept.len()
            )));
        }
        attempts += 1;
        let cand = random_template(&mut rng, n);
        let ok = kept.iter().all(|c| c.hamming_distance(&cand).unwrap() >= floor);
        if ok {
            kept.push(cand);
        }
    }
    Ok(TargetCodebook { codewords: kept, d_min, seed })
}

/// One linear discriminant function per output bit.
#[derive(Debug, Clone, PartialEq)]
pub struct BDAModel {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl BDAModel {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Structural("model must have one bias per weight row".into()));
        }
        let dim = weights[0].len();
        for row in &weights {
            if row.len() != dim {
                return Err(Error::Dimension { what: "model weight row", expected: dim, actual: row.len() });
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::Domain("non-finite model weight".into()));
            }
        }
        Ok(Self { weights, biases })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

fn errors_of(w: &[f64], b: f64, samples: &[(&[f64], bool)]) -> usize {
    samples
        .iter()
        .filter(|(x, t)| {
            let act: f64 = w.iter().zip(*x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
            (act >= 0.0) != *t
        })
        .count()
}

/// Pocket perceptron for one output bit. Labels {0,1} map to {-1,+1}
/// internally; activation exactly 0 predicts bit 1. Zero initialization and
/// the caller's sample order make the result deterministic.
pub fn train_bit(
    samples: &[(&[f64], bool)],
    max_epochs: usize,
    learning_rate: f64,
) -> Result<(Vec<f64>, f64)> {
    if max_epochs < 1 {
        return Err(Error::Domain("max_epochs must be >= 1".into()));
    }
    if samples.is_empty() {
        return Err(Error::Structural("no training samples".into()));
    }
    let dim = samples[0].0.len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut pocket_w = w.clone();
    let mut pocket_b = b;
    let mut pocket_errors = errors_of(&w, b, samples);

    'outer: for _ in 0..max_epochs {
        if pocket_errors == 0 {
            break;
        }
        let mut updated = false;
        for (x, t) in samples {
            let act: f64 = w.iter().zip(*x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
            let predicted = act >= 0.0;
            if predicted != *t {
                let target = if *t { 1.0 } else { -1.0 };
                // (t - y_hat) = 2 * target when misclassified
                let step = 2.0 * learning_rate * target;
                for (wi, xi) in w.iter_mut().zip(*x) {
                    *wi += step * xi;
                }
                b += step;
                updated = true;
                let e = errors_of(&w, b, samples);
                if e < pocket_errors {
                    pocket_errors = e;
                    pocket_w.copy_from_slice(&w);
                    pocket_b = b;
                    if e == 0 {
                        break 'outer;
                    }
                }
            }
        }
        if !updated {
            break;
        }
    }
    Ok((pocket_w, pocket_b))
}

/// Train the full model: bit `j` learns target = bit `j` of each sample's
/// class codeword. Sample order is class-major, sample-minor.
pub fn train_bda(
    projected: &[Vec<CancelableTemplate>],
    codebook: &TargetCodebook,
    max_epochs: usize,
    learning_rate: f64,
) -> Result<BDAModel> {
    if projected.len() != codebook.k() {
        return Err(Error::Structural(format!(
            "{} classes but codebook has {} codewords",
            projected.len(),
            codebook.k()
        )));
    }
    let n = codebook.codeword(0).len();
    let mut flat: Vec<(usize, &[f64])> = Vec::new();
    let mut dim = None;
    for (class, group) in projected.iter().enumerate() {
        if group.is_empty() {
            return Err(Error::Structural(format!("class {class} has no samples")));
        }
        for t in group {
            let d = *dim.get_or_insert(t.len());
            if t.len() != d {
                return Err(Error::Dimension { what: "projected sample", expected: d, actual: t.len() });
            }
            flat.push((class, t.values()));
        }
    }

    let rows: Vec<Result<(Vec<f64>, f64)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let samples: Vec<(&[f64], bool)> = flat
                .iter()
                .map(|(class, x)| (*x, codebook.codeword(*class).get(j)))
                .collect();
            train_bit(&samples, max_epochs, learning_rate)
        })
        .collect();

    let mut weights = Vec::with_capacity(n);
    let mut biases = Vec::with_capacity(n);
    for row in rows {
        let (w, b) = row?;
        weights.push(w);
        biases.push(b);
    }
    BDAModel::new(weights, biases)
}

/// bit j = 1 iff weights[j] . x + biases[j] >= 0 (ties map to 1).
pub fn binarize(x: &CancelableTemplate, model: &BDAModel) -> Result<BinaryTemplate> {
    if x.len() != model.dim() {
        return Err(Error::Dimension { what: "binarize input", expected: model.dim(), actual: x.len() });
    }
    let bits: Vec<bool> = model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| w.iter().zip(x.values()).map(|(wi, xi)| wi * xi).sum::<f64>() + b >= 0.0)
        .collect();
    Ok(BinaryTemplate::from_bits(&bits))
}

/// Comparison baseline: bit j = sign of coordinate j of the cancelable
/// template (ties to 1). Stands in for the hybrid approach's binarizer in
/// the evaluation tables.
pub fn baseline_binarize(x: &CancelableTemplate, n: usize) -> Result<BinaryTemplate> {
    if n > x.len() {
        return Err(Error::Dimension { what: "baseline binarize width", expected: x.len(), actual: n });
    }
    let bits: Vec<bool> = x.values()[..n].iter().map(|&v| v >= 0.0).collect();
    Ok(BinaryTemplate::from_bits(&bits))
}

/// n - HammingDistance(a, b).
pub fn hamming_similarity(a: &BinaryTemplate, b: &BinaryTemplate) -> Result<usize> {
    Ok(a.len() - a.hamming_distance(b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn ct(values: Vec<f64>) -> CancelableTemplate {
        CancelableTemplate::new(values).unwrap()
    }

    #[test]
    fn single_codeword_is_trivially_valid() {
        let cb = assign_targets(1, 8, 8, 7).unwrap();
        assert_eq!(cb.k(), 1);
        assert_eq!(cb.codeword(0).len(), 8);
    }

    #[test]
    fn codewords_respect_d_min() {
        let cb = assign_targets(2, 8, 4, 1).unwrap();
        let d = cb.codeword(0).hamming_distance(cb.codeword(1)).unwrap();
        assert!(d >= 4, "distance {d} < 4");
    }

    #[test]
    fn pigeonhole_infeasibility() {
        assert!(matches!(assign_targets(300, 8, 1, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn assignment_is_deterministic() {
        assert_eq!(assign_targets(5, 32, 8, 3).unwrap(), assign_targets(5, 32, 8, 3).unwrap());
    }

    #[test]
    fn train_bit_separable_1d() {
        let neg = [-1.0];
        let pos = [1.0];
        let samples: Vec<(&[f64], bool)> = vec![(&neg, false), (&pos, true)];
        let (w, b) = train_bit(&samples, 1000, 1.0).unwrap();
        assert!(w[0] * -1.0 + b < 0.0);
        assert!(w[0] * 1.0 + b >= 0.0);
    }

    #[test]
    fn train_bit_constant_target() {
        let a = [0.3, -0.4];
        let b_ = [1.2, 0.8];
        let samples: Vec<(&[f64], bool)> = vec![(&a, true), (&b_, true)];
        let (w, b) = train_bit(&samples, 10, 1.0).unwrap();
        for (x, _) in &samples {
            let act: f64 = w.iter().zip(*x).map(|(wi, xi)| wi * xi).sum::<f64>() + b;
            assert!(act >= 0.0);
        }
    }

    #[test]
    fn pocket_beats_zero_weights_on_xor() {
        let pts = [
            ([0.0f64, 0.0], false),
            ([1.0, 1.0], false),
            ([1.0, 0.0], true),
            ([0.0, 1.0], true),
        ];
        let samples: Vec<(&[f64], bool)> = pts.iter().map(|(x, t)| (&x[..], *t)).collect();
        let (w, b) = train_bit(&samples, 200, 1.0).unwrap();
        let zero_err = errors_of(&[0.0, 0.0], 0.0, &samples);
        let got_err = errors_of(&w, b, &samples);
        assert!(got_err <= zero_err, "pocket {got_err} vs zero {zero_err}");
    }

    #[test]
    fn rejects_zero_epochs() {
        let x = [1.0];
        let samples: Vec<(&[f64], bool)> = vec![(&x, true)];
        assert!(matches!(train_bit(&samples, 0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_class_binarizes_to_its_codeword() {
        let cb = assign_targets(1, 16, 4, 11).unwrap();
        let samples = vec![vec![ct(vec![0.5, -0.2, 1.0]), ct(vec![0.6, -0.1, 0.9])]];
        let model = train_bda(&samples, &cb, 100, 1.0).unwrap();
        for s in &samples[0] {
            assert_eq!(&binarize(s, &model).unwrap(), cb.codeword(0));
        }
    }

    #[test]
    fn well_separated_classes_hit_their_codewords() {
        // two tight clusters far apart
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let l_r = 8;
        let mut classes = Vec::new();
        for c in 0..2 {
            let center: Vec<f64> =
                (0..l_r).map(|_| { let v: f64 = StandardNormal.sample(&mut rng); v * 1.0 + c as f64 * 3.0 }).collect();
            let group: Vec<CancelableTemplate> = (0..5)
                .map(|_| {
                    ct(center
                        .iter()
                        .map(|&m| { let e: f64 = StandardNormal.sample(&mut rng); m + 0.05 * e })
                        .collect())
                })
                .collect();
            classes.push(group);
        }
        let cb = assign_targets(2, 16, 4, 5).unwrap();
        let model = train_bda(&classes, &cb, 1000, 1.0).unwrap();
        for (c, group) in classes.iter().enumerate() {
            for s in group {
                assert_eq!(&binarize(s, &model).unwrap(), cb.codeword(c));
            }
        }
    }

    #[test]
    fn train_bda_equals_independent_train_bit_calls() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let classes: Vec<Vec<CancelableTemplate>> = (0..3)
            .map(|_| {
                (0..4)
                    .map(|_| ct((0..6).map(|_| StandardNormal.sample(&mut rng)).collect()))
                    .collect()
            })
            .collect();
        let cb = assign_targets(3, 16, 4, 2).unwrap();
        let model = train_bda(&classes, &cb, 50, 1.0).unwrap();
        // per-bit oracle: same flattening, sequential
        let flat: Vec<(usize, &CancelableTemplate)> = classes
            .iter()
            .enumerate()
            .flat_map(|(c, g)| g.iter().map(move |s| (c, s)))
            .collect();
        for j in 0..16 {
            let samples: Vec<(&[f64], bool)> =
                flat.iter().map(|(c, s)| (s.values(), cb.codeword(*c).get(j))).collect();
            let (w, b) = train_bit(&samples, 50, 1.0).unwrap();
            assert_eq!(model.weights()[j], w, "bit {j} weights differ");
            assert_eq!(model.biases()[j], b, "bit {j} bias differs");
        }
    }

    #[test]
    fn binarize_tie_and_sign_rules() {
        let model = BDAModel::new(vec![vec![1.0, 0.0]], vec![0.0]).unwrap();
        assert!(binarize(&ct(vec![0.5, -3.0]), &model).unwrap().get(0));
        // activation exactly zero -> bit 1
        assert!(binarize(&ct(vec![0.0, 7.0]), &model).unwrap().get(0));
        assert!(!binarize(&ct(vec![-0.5, 0.0]), &model).unwrap().get(0));
    }

    #[test]
    fn binarize_matches_naive_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let n = 32;
        let dim = 10;
        let weights: Vec<Vec<f64>> =
            (0..n).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
        let biases: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let model = BDAModel::new(weights.clone(), biases.clone()).unwrap();
        let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let got = binarize(&ct(x.clone()), &model).unwrap();
        for j in 0..n {
            let mut acc = biases[j];
            for i in 0..dim {
                acc += weights[j][i] * x[i];
            }
            assert_eq!(got.get(j), acc >= 0.0, "bit {j}");
        }
    }

    #[test]
    fn hamming_similarity_bounds() {
        let a = BinaryTemplate::zeros(32);
        assert_eq!(hamming_similarity(&a, &a).unwrap(), 32);
        assert_eq!(hamming_similarity(&a, &a.complement()).unwrap(), 0);
    }

    #[test]
    fn random_pair_similarity_is_binomial() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let trials = 10_000;
        let n = 64;
        let mut total = 0usize;
        for _ in 0..trials {
            let a = random_template(&mut rng, n);
            let b = random_template(&mut rng, n);
            total += hamming_similarity(&a, &b).unwrap();
        }
        let mean = total as f64 / trials as f64;
        // mean n/2 = 32, sd of mean = 4/sqrt(trials) = 0.04; 3 sigma << 1
        assert!((mean - 32.0).abs() < 1.0, "mean {mean}");
    }
}
