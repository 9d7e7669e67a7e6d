//! Offline experience repository: one sampled dataset and one trained
//! surrogate per solved instance, persisted as a directory.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{pack_bits, sha256_hex, unpack_bits, ByteReader, ByteWriter};
use crate::neural::{load_surrogate, save_surrogate, train_vae, Normalization, TrainConfig, VaeSurrogate};
use crate::problems::{EvaluatedSample, Instance, Objective, ProblemClass, Solution};
use crate::{par, rng, Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const SAMPLES_MAGIC: &[u8; 4] = b"XFS1";

#[derive(Clone, Debug, PartialEq)]
pub struct ExperienceRecord {
    pub id: String,
    pub source_dim: usize,
    /// Informational only; selection never looks at it.
    pub class: ProblemClass,
    pub dataset: Vec<EvaluatedSample>,
    pub surrogate: VaeSurrogate,
    /// Min-max scaling of the dataset objectives, as used to fit the scorer.
    pub normalization: Normalization,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperienceRepository {
    pub records: Vec<ExperienceRecord>,
    pub config: RepositoryConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepositoryConfig {
    pub samples_per_instance: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for RepositoryConfig {
    fn default() -> Self {
        RepositoryConfig { samples_per_instance: 2000, seed: 0, train: TrainConfig::default() }
    }
}

/// `m` uniform random solutions, each repaired and then evaluated.
pub fn collect_experience<R: Rng + ?Sized>(
    objective: &dyn Objective,
    m: usize,
    rng: &mut R,
) -> Result<Vec<EvaluatedSample>> {
    if m == 0 {
        return Err(Error::invalid("at least one experience sample is required"));
    }
    let d = objective.dim();
    (0..m)
        .map(|_| {
            let solution = objective.repair(&Solution::random(d, rng));
            let value = objective.evaluate(&solution)?;
            Ok(EvaluatedSample { solution, objective: value })
        })
        .collect()
}

/// Samples and trains one record per instance. Records are independent and
/// built in parallel; each uses its own seed so the result does not depend on
/// scheduling.
pub fn build_repository(instances: &[Instance], config: &RepositoryConfig) -> Result<ExperienceRepository> {
    if instances.is_empty() {
        return Err(Error::invalid("repository needs at least one instance"));
    }
    let records = par::map_range(instances.len(), |i| {
        let inst = &instances[i];
        let id = inst.id();
        let wrap = |e: Error| Error::Training { id: id.clone(), source: Box::new(e) };
        let seed = rng::derive_seed(&[b"record", &config.seed.to_le_bytes(), &(i as u64).to_le_bytes()]);
        let dataset = collect_experience(inst, config.samples_per_instance, &mut rng::seeded(seed)).map_err(wrap)?;
        let train = TrainConfig { seed: seed ^ 1, ..config.train.clone() };
        let trained = train_vae(&dataset, &train).map_err(wrap)?;
        Ok(ExperienceRecord {
            id: id.clone(),
            source_dim: inst.dim,
            class: inst.class,
            dataset,
            surrogate: trained.surrogate,
            normalization: trained.normalization,
        })
    });
    Ok(ExperienceRepository { records: records.into_iter().collect::<Result<_>>()?, config: config.clone() })
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    n: usize,
    config: RepositoryConfig,
    records: Vec<ManifestRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    id: String,
    dim: usize,
    class: String,
    weights: String,
    samples: String,
}

fn encode_samples(samples: &[EvaluatedSample]) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(SAMPLES_MAGIC);
    w.u64(samples.len() as u64);
    for s in samples {
        w.bytes(&pack_bits(s.solution.bits()));
        w.f64(s.objective);
    }
    w.into_inner()
}

fn decode_samples(bytes: &[u8], dim: usize) -> Result<Vec<EvaluatedSample>> {
    let mut r = ByteReader::new(bytes);
    if r.take(4)? != SAMPLES_MAGIC {
        return Err(Error::VersionMismatch("sample file".into()));
    }
    let n = r.u64()? as usize;
    let per = dim.div_ceil(8) + 8;
    if r.remaining() != n.saturating_mul(per) {
        return Err(Error::corrupt("sample file length does not match its count"));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let solution = Solution::new(unpack_bits(r.take(dim.div_ceil(8))?, dim))?;
        out.push(EvaluatedSample { solution, objective: r.f64()? });
    }
    r.finish()?;
    Ok(out)
}

impl ExperienceRepository {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn files(&self) -> (String, Vec<(String, Vec<u8>, String, Vec<u8>)>) {
        let mut records = Vec::new();
        let mut blobs = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            let (weights, samples) = (format!("rec_{i}.weights"), format!("rec_{i}.samples"));
            records.push(ManifestRecord {
                id: r.id.clone(),
                dim: r.source_dim,
                class: r.class.tag().to_string(),
                weights: weights.clone(),
                samples: samples.clone(),
            });
            blobs.push((weights, save_surrogate(&r.surrogate), samples, encode_samples(&r.dataset)));
        }
        let manifest = Manifest { version: FORMAT_VERSION, n: self.records.len(), config: self.config.clone(), records };
        (toml::to_string(&manifest).expect("manifest serialises"), blobs)
    }

    /// Stable content hash of the repository (manifest plus every blob).
    pub fn fingerprint(&self) -> String {
        let (manifest, blobs) = self.files();
        let mut all = manifest.into_bytes();
        for (_, w, _, s) in blobs {
            all.extend(sha256_hex(&w).bytes());
            all.extend(sha256_hex(&s).bytes());
        }
        sha256_hex(&all)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let (manifest, blobs) = self.files();
        for (weights, w, samples, s) in blobs {
            fs::write(dir.join(weights), w)?;
            fs::write(dir.join(samples), s)?;
        }
        fs::write(dir.join("manifest.toml"), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.toml"))?;
        let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::VersionMismatch(format!("repository version {}", manifest.version)));
        }
        // A record counts as present while either of its two files exists, so a
        // single deleted file is reported against the record it belongs to.
        let found = (0..)
            .take_while(|i| {
                dir.join(format!("rec_{i}.weights")).exists() || dir.join(format!("rec_{i}.samples")).exists()
            })
            .count();
        if manifest.n != manifest.records.len() || manifest.n != found {
            return Err(Error::CountMismatch { manifest: manifest.n, found });
        }
        if manifest.n == 0 {
            return Err(Error::corrupt("repository has no records"));
        }
        let mut records = Vec::with_capacity(manifest.n);
        for m in &manifest.records {
            let read = |name: &str| {
                fs::read(dir.join(name)).map_err(|_| Error::MissingRecord(format!("{} ({name})", m.id)))
            };
            let surrogate = load_surrogate(&read(&m.weights)?)?;
            let dataset = decode_samples(&read(&m.samples)?, m.dim)?;
            if surrogate.input_dim() != m.dim || dataset.is_empty() {
                return Err(Error::corrupt(format!("record {} does not match its dimension", m.id)));
            }
            let normalization = Normalization::fit(&dataset.iter().map(|s| s.objective).collect::<Vec<_>>());
            records.push(ExperienceRecord {
                id: m.id.clone(),
                source_dim: m.dim,
                class: m.class.parse()?,
                dataset,
                surrogate,
                normalization,
            });
        }
        Ok(ExperienceRepository { records, config: manifest.config })
    }
}

pub fn save_repository(repo: &ExperienceRepository, dir: &Path) -> Result<()> {
    repo.save(dir)
}

pub fn load_repository(dir: &Path) -> Result<ExperienceRepository> {
    ExperienceRepository::load(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::generate_instance;

    fn tiny() -> ExperienceRepository {
        let instances: Vec<Instance> = [(ProblemClass::OneMax, 8), (ProblemClass::Knapsack, 10)]
            .iter()
            .map(|&(c, d)| generate_instance(c, d, 1).unwrap())
            .collect();
        let cfg = RepositoryConfig {
            samples_per_instance: 40,
            seed: 3,
            train: TrainConfig { epochs: 5, ..Default::default() },
        };
        build_repository(&instances, &cfg).unwrap()
    }

    #[test]
    fn collect_counts_and_feasibility() {
        let inst = generate_instance(ProblemClass::Knapsack, 25, 2).unwrap();
        let s = collect_experience(&inst, 50, &mut rng::seeded(0)).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.iter().all(|x| inst.repair(&x.solution) == x.solution));
        assert!(collect_experience(&inst, 0, &mut rng::seeded(0)).is_err());
    }

    #[test]
    fn samples_codec_round_trip() {
        let mut r = rng::seeded(1);
        let s: Vec<EvaluatedSample> = (0..7)
            .map(|i| EvaluatedSample { solution: Solution::random(13, &mut r), objective: i as f64 * 0.5 })
            .collect();
        assert_eq!(decode_samples(&encode_samples(&s), 13).unwrap(), s);
        assert!(decode_samples(&encode_samples(&s)[..20], 13).is_err());
    }

    #[test]
    fn save_load_round_trip_and_errors() {
        let repo = tiny();
        assert_eq!(repo.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        repo.save(dir.path()).unwrap();
        let back = load_repository(dir.path()).unwrap();
        assert_eq!(back, repo);
        assert_eq!(back.fingerprint(), repo.fingerprint());

        fs::remove_file(dir.path().join("rec_1.samples")).unwrap();
        match load_repository(dir.path()) {
            Err(Error::MissingRecord(m)) => assert!(m.contains("KP")),
            other => panic!("unexpected {other:?}"),
        }
        fs::remove_file(dir.path().join("rec_1.weights")).unwrap();
        assert!(matches!(load_repository(dir.path()), Err(Error::CountMismatch { manifest: 2, found: 1 })));
    }

    #[test]
    fn build_is_deterministic() {
        assert_eq!(tiny().fingerprint(), tiny().fingerprint());
    }
}
