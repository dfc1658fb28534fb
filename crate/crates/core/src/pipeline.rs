//! Enrollment and authentication orchestration plus the canonical record
//! serialization.
//!
//! A record stores only (projection seed, BDA model, commitment, config):
//! never raw feature vectors, cancelable templates, binary templates or
//! keys. Authentication needs only the record plus a live probe.

use sha2::{Digest, Sha256};

use crate::bda::{self, BDAModel, TargetCodebook};
use crate::bits::BinaryTemplate;
use crate::error::{Error, Result};
use crate::fuzzy::{self, Commitment, EccCodec};
use crate::linalg::{self, CancelableTemplate, FeatureVector};

pub const HASH_SHA256: &str = "sha-256";
const MAGIC: &[u8; 4] = b"NBT1";
const VERSION: u16 = 1;

/// Full system configuration; one snapshot travels inside every record.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub l: usize,
    pub l_r: usize,
    pub n: usize,
    pub rho: u16,
    pub d_min: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub hash_name: String,
    /// System-wide multi-class BDA mode used by the evaluation harness;
    /// the per-user mode is the operational default.
    pub multi_class: bool,
}

impl SystemConfig {
    pub fn new(l: usize, l_r: usize, n: usize, rho: u16) -> Self {
        Self {
            l,
            l_r,
            n,
            rho,
            d_min: (n + 3) / 4,
            max_epochs: 1000,
            learning_rate: 1.0,
            hash_name: HASH_SHA256.to_string(),
            multi_class: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.l_r == 0 || self.n == 0 || self.max_epochs == 0 {
            return Err(Error::Domain("config lengths and max_epochs must be positive".into()));
        }
        if self.l_r > self.l {
            return Err(Error::Dimension { what: "config l_r", expected: self.l, actual: self.l_r });
        }
        if self.rho == 0 || self.rho % 2 == 0 {
            return Err(Error::Domain(format!("rho must be odd, got {}", self.rho)));
        }
        if self.n % self.rho as usize != 0 {
            return Err(Error::Domain(format!("rho = {} must divide n = {}", self.rho, self.n)));
        }
        if self.d_min > self.n {
            return Err(Error::Domain("d_min cannot exceed n".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Domain("learning_rate must be positive".into()));
        }
        if self.hash_name != HASH_SHA256 {
            return Err(Error::Domain(format!("unsupported hash {:?}", self.hash_name)));
        }
        Ok(())
    }

    pub fn codec(&self) -> Result<EccCodec> {
        EccCodec::repetition(self.rho, self.n as u32)
    }
}

/// Sub-seeds expanded from one master seed via SHA-256.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubSeeds {
    pub projection: u64,
    pub codeword: u64,
    pub key: u64,
}

pub fn derive_seeds(master_seed: u64) -> SubSeeds {
    SubSeeds {
        projection: derive_seed(master_seed, b"projection"),
        codeword: derive_seed(master_seed, b"codeword"),
        key: derive_seed(master_seed, b"key"),
    }
}

fn derive_seed(master: u64, tag: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(tag);
    h.update(master.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Per-user bundle persisted by the store.
#[derive(Debug, Clone)]
pub struct EnrollmentRecord {
    pub user_id: String,
    pub projection_seed: u64,
    pub bda_model: BDAModel,
    pub commitment: Commitment,
    pub config: SystemConfig,
    /// RFC 3339; lives in the store index, not in the canonical bytes.
    pub created_at: String,
}

impl PartialEq for EnrollmentRecord {
    fn eq(&self, other: &Self) -> bool {
        // created_at is bookkeeping, not part of the record identity
        self.user_id == other.user_id
            && self.projection_seed == other.projection_seed
            && self.bda_model == other.bda_model
            && self.commitment == other.commitment
            && self.config == other.config
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageDiagnostics {
    pub binary_similarity: usize,
    pub corrected_errors: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthDecision {
    pub accepted: bool,
    /// Populated only in evaluation mode; the operational reject path is
    /// score-free.
    pub stage_diagnostics: Option<StageDiagnostics>,
}

/// Per-coordinate majority vote across binarized training samples; the
/// committed reference template. Ties (even splits) go to 1, matching the
/// binarize tie rule.
pub fn majority_reference(templates: &[BinaryTemplate]) -> Result<BinaryTemplate> {
    if templates.is_empty() {
        return Err(Error::Structural("no templates for majority vote".into()));
    }
    let n = templates[0].len();
    let mut bits = vec![false; n];
    for (j, bit) in bits.iter_mut().enumerate() {
        let ones = templates
            .iter()
            .map(|t| {
                if t.len() != n {
                    return Err(Error::Dimension { what: "majority vote", expected: n, actual: t.len() });
                }
                Ok(usize::from(t.get(j)))
            })
            .sum::<Result<usize>>()?;
        *bit = 2 * ones >= templates.len();
    }
    Ok(BinaryTemplate::from_bits(&bits))
}

fn check_samples(samples: &[FeatureVector], config: &SystemConfig) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!("enrollment requires r >= 2 samples, got {}", samples.len())));
    }
    for s in samples {
        if s.len() != config.l {
            return Err(Error::Dimension { what: "enrollment sample", expected: config.l, actual: s.len() });
        }
        if s.is_zero() {
            return Err(Error::Domain("degenerate zero-vector enrollment sample".into()));
        }
    }
    Ok(())
}

/// Enrollment (per-user mode): derive sub-seeds, build the projection,
/// train a single-codeword BDA model on the user's own samples, commit the
/// majority-vote reference template.
pub fn enroll(
    user_id: &str,
    samples: &[FeatureVector],
    config: &SystemConfig,
    master_seed: u64,
) -> Result<EnrollmentRecord> {
    config.validate()?;
    check_samples(samples, config)?;
    let seeds = derive_seeds(master_seed);
    let codebook = bda::assign_targets(1, config.n, config.d_min, seeds.codeword)?;
    let matrix = linalg::generate_projection_matrix(seeds.projection, config.l, config.l_r)?;
    let projected: Vec<CancelableTemplate> =
        samples.iter().map(|s| linalg::project(s, &matrix)).collect::<Result<_>>()?;
    let model =
        bda::train_bda(&[projected.clone()], &codebook, config.max_epochs, config.learning_rate)?;
    enroll_with_model(user_id, &projected, config, seeds.projection, model, seeds.key)
}

/// Shared-model enrollment used by the multi-class evaluation mode: the
/// caller supplies the projection seed and an already-trained model.
pub fn enroll_with_model(
    user_id: &str,
    projected: &[CancelableTemplate],
    config: &SystemConfig,
    projection_seed: u64,
    model: BDAModel,
    key_seed: u64,
) -> Result<EnrollmentRecord> {
    let binarized: Vec<BinaryTemplate> =
        projected.iter().map(|p| bda::binarize(p, &model)).collect::<Result<_>>()?;
    let reference = majority_reference(&binarized)?;
    let codec = config.codec()?;
    let commitment = fuzzy::commit(&reference, &codec, key_seed)?;
    Ok(EnrollmentRecord {
        user_id: user_id.to_string(),
        projection_seed,
        bda_model: model,
        commitment,
        config: config.clone(),
        created_at: chrono::Utc::now().to_rfc3339(),
    })
}

pub fn authenticate(probe: &FeatureVector, record: &EnrollmentRecord) -> Result<AuthDecision> {
    authenticate_with_mode(probe, record, false)
}

/// `eval_mode = true` additionally reports per-stage diagnostics; the
/// operational path never computes them so rejects stay score-free.
pub fn authenticate_with_mode(
    probe: &FeatureVector,
    record: &EnrollmentRecord,
    eval_mode: bool,
) -> Result<AuthDecision> {
    if probe.len() != record.config.l {
        return Err(Error::Dimension { what: "probe", expected: record.config.l, actual: probe.len() });
    }
    let matrix = linalg::generate_projection_matrix(
        record.projection_seed,
        record.config.l,
        record.config.l_r,
    )?;
    let projected = linalg::project(probe, &matrix)?;
    let binary = bda::binarize(&projected, &record.bda_model)?;
    let outcome = fuzzy::verify_commitment(&binary, &record.commitment)?;
    let stage_diagnostics = if eval_mode {
        // reference template similarity is only recoverable on accept;
        // report similarity against the helper-corrected template
        let sim = if outcome.accepted {
            record.config.n - outcome.corrected_errors.unwrap_or(0)
        } else {
            0
        };
        Some(StageDiagnostics { binary_similarity: sim, corrected_errors: outcome.corrected_errors })
    } else {
        None
    };
    Ok(AuthDecision { accepted: outcome.accepted, stage_diagnostics })
}

/// Recompute the binary template a record would produce for a probe.
/// Evaluation-mode helper; the operational API never exposes this.
pub fn recompute_binary_template(
    probe: &FeatureVector,
    record: &EnrollmentRecord,
) -> Result<BinaryTemplate> {
    let matrix = linalg::generate_projection_matrix(
        record.projection_seed,
        record.config.l,
        record.config.l_r,
    )?;
    let projected = linalg::project(probe, &matrix)?;
    bda::binarize(&projected, &record.bda_model)
}

/// Full re-enrollment under fresh seeds. The store marks the old record
/// revoked; old and new records share no secret material.
pub fn revoke_reissue(
    old: &EnrollmentRecord,
    new_master_seed: u64,
    samples: &[FeatureVector],
) -> Result<EnrollmentRecord> {
    let seeds = derive_seeds(new_master_seed);
    if seeds.projection == old.projection_seed {
        return Err(Error::Policy("reissue must use a fresh master seed".into()));
    }
    enroll(&old.user_id, samples, &old.config, new_master_seed)
}

// --- canonical serialization -------------------------------------------

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

/// Record layout: magic "NBT1" | version (u16) | config block (incl.
/// user_id) | projection_seed (u64) | weights (n x l_r f64 LE row-major) |
/// biases (n f64) | commitment (FCM1 layout) | CRC-32.
pub fn serialize_record(record: &EnrollmentRecord) -> Result<Vec<u8>> {
    record.config.validate()?;
    let c = &record.config;
    if record.bda_model.n() != c.n || record.bda_model.dim() != c.l_r {
        return Err(Error::Structural("model dimensions disagree with config".into()));
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_str(&mut out, &record.user_id);
    out.extend_from_slice(&(c.l as u32).to_le_bytes());
    out.extend_from_slice(&(c.l_r as u32).to_le_bytes());
    out.extend_from_slice(&(c.n as u32).to_le_bytes());
    out.extend_from_slice(&c.rho.to_le_bytes());
    out.extend_from_slice(&(c.d_min as u32).to_le_bytes());
    out.extend_from_slice(&(c.max_epochs as u32).to_le_bytes());
    out.extend_from_slice(&c.learning_rate.to_le_bytes());
    put_str(&mut out, &c.hash_name);
    out.push(u8::from(c.multi_class));
    out.extend_from_slice(&record.projection_seed.to_le_bytes());
    for row in record.bda_model.weights() {
        for w in row {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    for b in record.bda_model.biases() {
        out.extend_from_slice(&b.to_le_bytes());
    }
    out.extend_from_slice(&record.commitment.to_bytes());
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::Integrity("truncated record".into()));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Integrity("record string field is not UTF-8".into()))
    }
}

pub fn deserialize_record(bytes: &[u8]) -> Result<EnrollmentRecord> {
    if bytes.len() < 4 + 2 + 4 {
        return Err(Error::Integrity("record too short".into()));
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32fast::hash(payload) != stored_crc {
        return Err(Error::Integrity("record checksum mismatch".into()));
    }
    let mut r = Reader { bytes: payload, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Integrity("bad record magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Integrity(format!("unsupported record version {version}")));
    }
    let user_id = r.string()?;
    let l = r.u32()? as usize;
    let l_r = r.u32()? as usize;
    let n = r.u32()? as usize;
    let rho = r.u16()?;
    let d_min = r.u32()? as usize;
    let max_epochs = r.u32()? as usize;
    let learning_rate = r.f64()?;
    let hash_name = r.string()?;
    let multi_class = r.take(1)?[0] != 0;
    let config = SystemConfig { l, l_r, n, rho, d_min, max_epochs, learning_rate, hash_name, multi_class };
    config.validate().map_err(|e| Error::Integrity(format!("invalid config in record: {e}")))?;
    let projection_seed = r.u64()?;
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(l_r);
        for _ in 0..l_r {
            row.push(r.f64()?);
        }
        weights.push(row);
    }
    let mut biases = Vec::with_capacity(n);
    for _ in 0..n {
        biases.push(r.f64()?);
    }
    let bda_model = BDAModel::new(weights, biases)
        .map_err(|e| Error::Integrity(format!("invalid model in record: {e}")))?;
    let (commitment, used) = Commitment::from_bytes(&payload[r.pos..])?;
    r.pos += used;
    if r.pos != payload.len() {
        return Err(Error::Integrity("trailing bytes in record".into()));
    }
    Ok(EnrollmentRecord {
        user_id,
        projection_seed,
        bda_model,
        commitment,
        config,
        created_at: String::new(),
    })
}

/// Shared model for the multi-class evaluation mode: one projection matrix,
/// one codebook of k codewords, one model trained across all classes.
pub struct SharedModel {
    pub projection_seed: u64,
    pub codebook: TargetCodebook,
    pub model: BDAModel,
}

pub fn train_shared_model(
    per_class_samples: &[Vec<FeatureVector>],
    config: &SystemConfig,
    master_seed: u64,
) -> Result<SharedModel> {
    config.validate()?;
    let seeds = derive_seeds(master_seed);
    let matrix = linalg::generate_projection_matrix(seeds.projection, config.l, config.l_r)?;
    let projected: Vec<Vec<CancelableTemplate>> = per_class_samples
        .iter()
        .map(|group| group.iter().map(|s| linalg::project(s, &matrix)).collect())
        .collect::<Result<_>>()?;
    let codebook = bda::assign_targets(per_class_samples.len(), config.n, config.d_min, seeds.codeword)?;
    let model = bda::train_bda(&projected, &codebook, config.max_epochs, config.learning_rate)?;
    Ok(SharedModel { projection_seed: seeds.projection, codebook, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{generate_synthetic, SyntheticSpec};

    fn desk_config() -> SystemConfig {
        SystemConfig::new(64, 16, 40, 5)
    }

    fn samples_for(class: usize) -> Vec<FeatureVector> {
        let spec =
            SyntheticSpec { k: class + 1, r: 4, l: 64, sigma_within: 0.05, sigma_between: 1.0, seed: 31 };
        generate_synthetic(&spec).unwrap().classes()[class].samples.clone()
    }

    #[test]
    fn enroll_then_authenticate_training_sample() {
        let config = desk_config();
        let samples = samples_for(0);
        let record = enroll("alice", &samples, &config, 1234).unwrap();
        let d = authenticate(&samples[0], &record).unwrap();
        assert!(d.accepted);
        assert!(d.stage_diagnostics.is_none());
    }

    #[test]
    fn duplicate_samples_round_trip() {
        let config = desk_config();
        let spec = SyntheticSpec { k: 1, r: 3, l: 64, sigma_within: 0.0, sigma_between: 1.0, seed: 8 };
        let samples = generate_synthetic(&spec).unwrap().classes()[0].samples.clone();
        let record = enroll("u", &samples, &config, 77).unwrap();
        assert!(authenticate(&samples[1], &record).unwrap().accepted);
    }

    #[test]
    fn single_sample_is_rejected() {
        let config = desk_config();
        let samples = vec![samples_for(0)[0].clone()];
        assert!(matches!(enroll("u", &samples, &config, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_sample_is_rejected() {
        let config = desk_config();
        let mut samples = samples_for(0);
        samples[1] = FeatureVector::new(vec![0.0; 64]).unwrap();
        assert!(matches!(enroll("u", &samples, &config, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn different_master_seeds_decorrelate_templates() {
        let config = desk_config();
        let samples = samples_for(0);
        let a = enroll("u", &samples, &config, 100).unwrap();
        let b = enroll("u", &samples, &config, 200).unwrap();
        let ta = recompute_binary_template(&samples[0], &a).unwrap();
        let tb = recompute_binary_template(&samples[0], &b).unwrap();
        let d = ta.hamming_distance(&tb).unwrap();
        assert!(d >= config.n / 4, "distance {d} < n/4");
    }

    #[test]
    fn reissue_requires_fresh_seed() {
        let config = desk_config();
        let samples = samples_for(0);
        let record = enroll("u", &samples, &config, 55).unwrap();
        assert!(matches!(revoke_reissue(&record, 55, &samples), Err(Error::Policy(_))));
        let reissued = revoke_reissue(&record, 56, &samples).unwrap();
        assert!(authenticate(&samples[0], &reissued).unwrap().accepted);
        assert_ne!(reissued.projection_seed, record.projection_seed);
    }

    #[test]
    fn serialization_roundtrip_and_determinism() {
        let config = desk_config();
        let samples = samples_for(0);
        let a = enroll("alice", &samples, &config, 9).unwrap();
        let b = enroll("alice", &samples, &config, 9).unwrap();
        let ba = serialize_record(&a).unwrap();
        let bb = serialize_record(&b).unwrap();
        assert_eq!(ba, bb, "enrollment must be deterministic in its seeds");
        let back = deserialize_record(&ba).unwrap();
        assert_eq!(back, a);
        assert_eq!(serialize_record(&back).unwrap(), ba);
    }

    #[test]
    fn corruption_is_detected() {
        let config = desk_config();
        let samples = samples_for(0);
        let record = enroll("alice", &samples, &config, 9).unwrap();
        let mut bytes = serialize_record(&record).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(deserialize_record(&bytes), Err(Error::Integrity(_))));
        let record2 = deserialize_record(&serialize_record(&record).unwrap()).unwrap();
        assert_eq!(record2, record);
    }

    #[test]
    fn record_contains_no_raw_biometrics() {
        // grep-level privacy: the serialized record must not embed any raw
        // sample's f64-LE byte string
        let config = desk_config();
        let samples = samples_for(0);
        let record = enroll("alice", &samples, &config, 12).unwrap();
        let bytes = serialize_record(&record).unwrap();
        for s in &samples {
            let mut raw = Vec::new();
            for v in s.values() {
                raw.extend_from_slice(&v.to_le_bytes());
            }
            let found = bytes.windows(raw.len()).any(|w| w == raw.as_slice());
            assert!(!found, "serialized record embeds a raw feature vector");
        }
    }

    #[test]
    fn dimension_mismatch_is_error_not_reject() {
        let config = desk_config();
        let samples = samples_for(0);
        let record = enroll("alice", &samples, &config, 3).unwrap();
        let probe = FeatureVector::new(vec![1.0; 63]).unwrap();
        assert!(matches!(authenticate(&probe, &record), Err(Error::Dimension { .. })));
    }
}
