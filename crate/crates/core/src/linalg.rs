//! Seeded matrix/vector arithmetic for the projection stage.
//!
//! Raw matrix entries are i.i.d. standard-normal draws from ChaCha20 (a
//! counter-based stream cipher RNG), so a matrix is regenerable bit-for-bit
//! from `(seed, l, l_r)` on any platform. Columns are orthonormalized with
//! modified Gram-Schmidt plus one re-orthogonalization pass.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Residual norm below this is treated as a rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Real-valued length-`l` face representation entering the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("feature vector must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("feature vector contains non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Projected template of length `l_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CancelableTemplate {
    values: Vec<f64>,
}

impl CancelableTemplate {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("cancelable template contains non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Dense column-accessible matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() || columns[0].is_empty() {
            return Err(Error::Domain("matrix must have at least one row and column".into()));
        }
        let rows = columns[0].len();
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Dimension { what: "matrix column", expected: rows, actual: c.len() });
            }
            let _ = j;
        }
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Row-major little-endian f64 bytes; used by the determinism tests.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// Seeded `l x l_r` matrix with orthonormal columns. Only `(seed, l, l_r)`
/// is ever persisted; the dense form is regenerated on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    seed: u64,
    entries: Matrix,
}

impl ProjectionMatrix {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn l(&self) -> usize {
        self.entries.rows()
    }

    pub fn l_r(&self) -> usize {
        self.entries.cols()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }
}

/// Generate the per-user projection matrix from its seed.
pub fn generate_projection_matrix(seed: u64, l: usize, l_r: usize) -> Result<ProjectionMatrix> {
    if l == 0 || l_r == 0 {
        return Err(Error::Domain("l and l_r must be positive".into()));
    }
    if l_r > l {
        return Err(Error::Dimension { what: "projection width l_r", expected: l, actual: l_r });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut raw = Matrix::zeros(l, l_r);
    // Column-major fill so l_r extension does not disturb existing columns.
    for j in 0..l_r {
        for i in 0..l {
            let v: f64 = StandardNormal.sample(&mut rng);
            raw.set(i, j, v);
        }
    }
    let entries = gram_schmidt(&raw)?;
    Ok(ProjectionMatrix { seed, entries })
}

/// Modified Gram-Schmidt with a second re-orthogonalization sweep.
pub fn gram_schmidt(matrix: &Matrix) -> Result<Matrix> {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut v = matrix.column(j);
        for _ in 0..2 {
            for prev in &q {
                let dot: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= dot * pi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < RANK_TOLERANCE {
            return Err(Error::RankDeficient { column: j });
        }
        for vi in &mut v {
            *vi /= norm;
        }
        q.push(v);
    }
    let _ = rows;
    Matrix::from_columns(&q)
}

/// Project a feature vector: `out[j] = sum_i x[i] * m[i][j]`.
pub fn project(x: &FeatureVector, m: &ProjectionMatrix) -> Result<CancelableTemplate> {
    if x.len() != m.l() {
        return Err(Error::Dimension { what: "projection input", expected: m.l(), actual: x.len() });
    }
    project_raw(x.values(), m)
}

/// Projection for already-validated slices (used on projected residuals in
/// the attack simulator where NaN checks are still wanted).
pub fn project_raw(x: &[f64], m: &ProjectionMatrix) -> Result<CancelableTemplate> {
    if x.len() != m.l() {
        return Err(Error::Dimension { what: "projection input", expected: m.l(), actual: x.len() });
    }
    let e = m.entries();
    let mut out = vec![0.0; m.l_r()];
    for i in 0..m.l() {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += xi * e.get(i, j);
        }
    }
    CancelableTemplate::new(out)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { what: "cosine similarity", expected: a.len(), actual: b.len() });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine similarity of a zero-norm vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}
