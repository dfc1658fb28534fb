//! Dataset ingestion: graymap image directories, feature CSVs, and the
//! synthetic generator that stands in for benchmark face databases.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use image::codecs::pnm::PnmDecoder;
use image::imageops::{self, FilterType};
use image::{DynamicImage, GrayImage};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::FeatureVector;

/// Labeled groups of feature vectors: k classes, each with r samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    classes: Vec<ClassGroup>,
    l: usize,
    provenance: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassGroup {
    pub label: String,
    pub samples: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(classes: Vec<ClassGroup>, provenance: String) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Structural("dataset has no classes".into()));
        }
        let mut l = None;
        let mut seen = std::collections::HashSet::new();
        for g in &classes {
            if !seen.insert(g.label.clone()) {
                return Err(Error::Structural(format!("duplicate class label {:?}", g.label)));
            }
            if g.samples.is_empty() {
                return Err(Error::Structural(format!("class {:?} has no samples", g.label)));
            }
            for s in &g.samples {
                let expect = *l.get_or_insert(s.len());
                if s.len() != expect {
                    return Err(Error::Dimension { what: "dataset vector", expected: expect, actual: s.len() });
                }
            }
        }
        Ok(Self { classes, l: l.unwrap(), provenance })
    }

    pub fn classes(&self) -> &[ClassGroup] {
        &self.classes
    }

    pub fn k(&self) -> usize {
        self.classes.len()
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Write as the CSV interchange format: `label,v1,...,vl` per sample.
    /// Values print in shortest round-trip form, so reload is exact.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for g in &self.classes {
            for s in &g.samples {
                out.push_str(&g.label);
                for v in s.values() {
                    out.push(',');
                    out.push_str(&format!("{v}"));
                }
                out.push('\n');
            }
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Parameters for the synthetic stand-in dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub k: usize,
    pub r: usize,
    pub l: usize,
    pub sigma_within: f64,
    pub sigma_between: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.r == 0 || self.l == 0 {
            return Err(Error::Domain("k, r and l must be positive".into()));
        }
        if self.sigma_within < 0.0 || !self.sigma_within.is_finite() {
            return Err(Error::Domain("sigma_within must be >= 0".into()));
        }
        if self.sigma_between <= 0.0 || !self.sigma_between.is_finite() {
            return Err(Error::Domain("sigma_between must be > 0".into()));
        }
        Ok(())
    }
}

/// Class centers ~ N(0, sigma_between^2) per coordinate; samples are
/// center + N(0, sigma_within^2) noise. Deterministic in the seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut classes = Vec::with_capacity(spec.k);
    for c in 0..spec.k {
        let center: Vec<f64> = (0..spec.l)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * spec.sigma_between
            })
            .collect();
        let samples = (0..spec.r)
            .map(|_| {
                let v: Vec<f64> = center
                    .iter()
                    .map(|&m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + z * spec.sigma_within
                    })
                    .collect();
                FeatureVector::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        classes.push(ClassGroup { label: format!("c{c:03}"), samples });
    }
    Dataset::new(
        classes,
        format!(
            "synthetic k={} r={} l={} sw={} sb={} seed={}",
            spec.k, spec.r, spec.l, spec.sigma_within, spec.sigma_between, spec.seed
        ),
    )
}

/// One row per sample: class label, then l numeric fields.
pub fn load_feature_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", path.display())))?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<FeatureVector>> = Default::default();
    let mut l = None;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or("").trim().to_string();
        if label.is_empty() {
            return Err(Error::Parse { row, msg: "empty class label".into() });
        }
        let values: Vec<f64> = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse { row, msg: format!("non-numeric field {f:?}") })
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(Error::Parse { row, msg: "row has no feature fields".into() });
        }
        let expect = *l.get_or_insert(values.len());
        if values.len() != expect {
            return Err(Error::Parse {
                row,
                msg: format!("ragged row: {} fields, expected {}", values.len(), expect),
            });
        }
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        groups.entry(label).or_default().push(FeatureVector::new(values).map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?);
    }
    if order.is_empty() {
        return Err(Error::Structural(format!("{} contains no samples", path.display())));
    }
    let classes = order
        .into_iter()
        .map(|label| {
            let samples = groups.remove(&label).unwrap();
            ClassGroup { label, samples }
        })
        .collect();
    Dataset::new(classes, path.display().to_string())
}

/// Directory of portable graymaps (P2/P5, 8-bit), one subdirectory per
/// class. Images are bilinearly resized, flattened row-major and normalized
/// to zero mean and unit norm. Files decode in lexicographic path order so
/// the layout is schedule-independent.
pub fn load_image_dir(path: &Path, target_width: u32, target_height: u32) -> Result<Dataset> {
    if target_width == 0 || target_height == 0 {
        return Err(Error::Domain("target dimensions must be positive".into()));
    }
    let mut class_dirs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::Structural(format!("{} has no class subdirectories", path.display())));
    }
    let mut classes = Vec::new();
    for dir in class_dirs {
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Structural(format!("class directory {} is empty", dir.display())));
        }
        let samples = files
            .iter()
            .map(|f| load_graymap(f, target_width, target_height))
            .collect::<Result<Vec<_>>>()?;
        classes.push(ClassGroup { label, samples });
    }
    Dataset::new(classes, path.display().to_string())
}

fn load_graymap(path: &Path, width: u32, height: u32) -> Result<FeatureVector> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Ingest(format!("cannot open {}: {e}", path.display())))?;
    let decoder = PnmDecoder::new(BufReader::new(file))
        .map_err(|e| Error::Ingest(format!("cannot decode {}: {e}", path.display())))?;
    let img = DynamicImage::from_decoder(decoder)
        .map_err(|e| Error::Ingest(format!("cannot decode {}: {e}", path.display())))?;
    let gray: GrayImage = match img {
        DynamicImage::ImageLuma8(g) => g,
        _ => {
            return Err(Error::Ingest(format!(
                "{} is not an 8-bit graymap (color/alpha inputs are rejected)",
                path.display()
            )))
        }
    };
    let gray = if gray.width() == width && gray.height() == height {
        gray
    } else {
        imageops::resize(&gray, width, height, FilterType::Triangle)
    };
    let raw: Vec<f64> = gray.into_raw().into_iter().map(f64::from).collect();
    let normalized = normalize(raw).map_err(|_| {
        Error::Ingest(format!("{} is a degenerate (constant) image with no variance", path.display()))
    })?;
    FeatureVector::new(normalized)
}

/// Zero mean, unit norm.
fn normalize(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in &mut v {
        *x -= mean;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Domain("zero-variance vector".into()));
    }
    for x in &mut v {
        *x /= norm;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_pgm_p5(path: &Path, w: usize, h: usize, pixels: &[u8]) {
        let mut f = fs::File::create(path).unwrap();
        write!(f, "P5\n{w} {h}\n255\n").unwrap();
        f.write_all(pixels).unwrap();
    }

    fn write_pgm_p2(path: &Path, w: usize, h: usize, pixels: &[u8]) {
        let mut f = fs::File::create(path).unwrap();
        write!(f, "P2\n{w} {h}\n255\n").unwrap();
        for p in pixels {
            write!(f, "{p} ").unwrap();
        }
    }

    #[test]
    fn synthetic_zero_noise_duplicates_samples() {
        let spec = SyntheticSpec { k: 2, r: 3, l: 4, sigma_within: 0.0, sigma_between: 1.0, seed: 1 };
        let ds = generate_synthetic(&spec).unwrap();
        for g in ds.classes() {
            for s in &g.samples {
                assert_eq!(s, &g.samples[0]);
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec { k: 2, r: 5, l: 16, sigma_within: 0.1, sigma_between: 1.0, seed: 9 };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn synthetic_within_distance_below_between_distance() {
        let spec =
            SyntheticSpec { k: 10, r: 5, l: 256, sigma_within: 0.1, sigma_between: 1.0, seed: 4 };
        let ds = generate_synthetic(&spec).unwrap();
        let dist = |a: &FeatureVector, b: &FeatureVector| -> f64 {
            a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        let mut within = Vec::new();
        let mut between = Vec::new();
        for (ci, gi) in ds.classes().iter().enumerate() {
            for (si, a) in gi.samples.iter().enumerate() {
                for b in gi.samples.iter().skip(si + 1) {
                    within.push(dist(a, b));
                }
                for gj in ds.classes().iter().skip(ci + 1) {
                    for b in &gj.samples {
                        between.push(dist(a, b));
                    }
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&within) < mean(&between));
    }

    #[test]
    fn csv_structural_and_error_cases() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "a,1,0\nb,0,1\n").unwrap();
        let ds = load_feature_csv(&p).unwrap();
        assert_eq!(ds.k(), 2);
        assert_eq!(ds.l(), 2);

        fs::write(&p, "").unwrap();
        assert!(matches!(load_feature_csv(&p), Err(Error::Structural(_))));

        fs::write(&p, "a,1,0,2\nb,0,1\n").unwrap();
        match load_feature_csv(&p) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        fs::write(&p, "a,1,zzz\n").unwrap();
        assert!(matches!(load_feature_csv(&p), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let spec = SyntheticSpec { k: 3, r: 2, l: 8, sigma_within: 0.2, sigma_between: 1.0, seed: 2 };
        let ds = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("round.csv");
        ds.write_csv(&p).unwrap();
        let back = load_feature_csv(&p).unwrap();
        assert_eq!(back.k(), ds.k());
        for (a, b) in ds.classes().iter().zip(back.classes()) {
            assert_eq!(a.label, b.label);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                for (u, v) in x.values().iter().zip(y.values()) {
                    assert!((u - v).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn image_dir_structure_and_normalization() {
        let dir = tempfile::tempdir().unwrap();
        for class in ["alice", "bob"] {
            let cdir = dir.path().join(class);
            fs::create_dir(&cdir).unwrap();
            for i in 0..3 {
                let px = [0u8, 255, 255, i as u8 * 10];
                write_pgm_p5(&cdir.join(format!("{i}.pgm")), 2, 2, &px);
            }
        }
        let ds = load_image_dir(dir.path(), 2, 2).unwrap();
        assert_eq!(ds.k(), 2);
        assert_eq!(ds.classes()[0].samples.len(), 3);
        assert_eq!(ds.l(), 4);
        for g in ds.classes() {
            for s in &g.samples {
                let mean = s.values().iter().sum::<f64>() / s.len() as f64;
                let norm = s.values().iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(mean.abs() <= 1e-9);
                assert!((norm - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn hand_normalization_example() {
        let dir = tempfile::tempdir().unwrap();
        let cdir = dir.path().join("u");
        fs::create_dir(&cdir).unwrap();
        write_pgm_p2(&cdir.join("x.pgm"), 2, 2, &[0, 255, 255, 0]);
        let ds = load_image_dir(dir.path(), 2, 2).unwrap();
        let v = ds.classes()[0].samples[0].values();
        assert_eq!(v, &[-0.5, 0.5, 0.5, -0.5]);
    }

    #[test]
    fn uniform_image_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let cdir = dir.path().join("u");
        fs::create_dir(&cdir).unwrap();
        write_pgm_p5(&cdir.join("flat.pgm"), 4, 4, &[128; 16]);
        match load_image_dir(dir.path(), 4, 4) {
            Err(Error::Ingest(msg)) => assert!(msg.contains("degenerate"), "{msg}"),
            other => panic!("expected degenerate-image error, got {other:?}"),
        }
    }

    #[test]
    fn empty_class_directory_is_structural() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("empty")).unwrap();
        assert!(matches!(load_image_dir(dir.path(), 2, 2), Err(Error::Structural(_))));
    }
}
