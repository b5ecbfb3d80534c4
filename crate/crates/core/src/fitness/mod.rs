//! Fitness oracles and the statistics used to analyse them.
//!
//! An [`Evaluator`] stands in for "inherit supernet weights, score on the
//! validation split": it maps a genome to a validation score (what search
//! optimizes), a test score (ground truth, only looked at afterwards) and a
//! cost. Three oracles are provided:
//!
//! * [`SyntheticLandscape`]: unary plus adjacent-pair utilities.
//! * [`CorrelatedOracle`]: wraps another oracle and replaces its validation
//!   score with one whose Pearson correlation to the test score is a chosen ρ.
//! * [`TabularBenchmark`]: lookups into a precomputed CSV table.

pub mod mmd;
pub mod stats;

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cost::CostTable;
use crate::error::{NasError, Result};
use crate::space::{genome_to_id, ArchGenome, SearchSpaceSpec};
use crate::SeededRng;

pub use mmd::{
    median_heuristic_bandwidth, mmd_biased, mmd_unbiased, rbf_kernel, Kernel, KernelSpec,
    UnbiasedForm,
};
pub use stats::{combined_loss, mean_std, pearson, DEFAULT_MMD_WEIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub val_score: f64,
    pub test_score: f64,
    pub cost_mflops: f64,
}

/// Black-box scoring of a genome. Implementations must be pure: the same
/// genome always yields the identical report.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, genome: &ArchGenome) -> Result<FitnessReport>;

    /// Mean and population standard deviation of the test score over the
    /// oracle's domain, when known.
    fn test_score_moments(&self) -> Option<(f64, f64)> {
        None
    }
}

impl<E: Evaluator + ?Sized> Evaluator for Box<E> {
    fn evaluate(&self, genome: &ArchGenome) -> Result<FitnessReport> {
        (**self).evaluate(genome)
    }

    fn test_score_moments(&self) -> Option<(f64, f64)> {
        (**self).test_score_moments()
    }
}

pub fn evaluate<E: Evaluator + ?Sized>(evaluator: &E, genome: &ArchGenome) -> Result<FitnessReport> {
    evaluator.evaluate(genome)
}

/// Stable 64-bit fingerprint of a genome (splitmix64 over the choices).
fn genome_fingerprint(seed: u64, genome: &ArchGenome) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    genome
        .choices()
        .iter()
        .fold(mix(seed ^ genome.len() as u64), |h, &c| mix(h ^ c as u64))
}

/// Standard normal draw tied to `(seed, genome)`.
fn genome_normal(seed: u64, genome: &ArchGenome) -> f64 {
    let mut rng = SeededRng::seed_from_u64(genome_fingerprint(seed, genome));
    StandardNormal.sample(&mut rng)
}

/// Parameters for generating a random landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeParams {
    pub seed: u64,
    /// Expected score of a uniformly drawn genome.
    #[serde(default = "default_baseline")]
    pub baseline: f64,
    pub unary_scale: f64,
    pub pairwise_scale: f64,
    #[serde(default)]
    pub noise_std: f64,
}

fn default_baseline() -> f64 {
    66.0
}

/// `score(g) = sum_k unary[k][g_k] + sum_k pair[k][g_k][g_{k+1}]`.
///
/// The test score is the exact score. The validation score adds
/// `noise_std` times a per-genome standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLandscape {
    unary: Vec<Vec<f64>>,
    pairwise: Vec<Vec<Vec<f64>>>,
    noise_std: f64,
    noise_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_table: Option<CostTable>,
}

impl SyntheticLandscape {
    pub fn new(
        unary: Vec<Vec<f64>>,
        pairwise: Vec<Vec<Vec<f64>>>,
        noise_std: f64,
        noise_seed: u64,
    ) -> Result<Self> {
        let n = unary.len();
        if n == 0 {
            return Err(NasError::Parameter("landscape needs at least one layer".into()));
        }
        let m = unary[0].len();
        if unary.iter().any(|row| row.len() != m) {
            return Err(NasError::Parameter("ragged unary utilities".into()));
        }
        if pairwise.len() != n - 1 {
            return Err(NasError::Dimension {
                expected: n - 1,
                actual: pairwise.len(),
            });
        }
        if pairwise
            .iter()
            .any(|block| block.len() != m || block.iter().any(|row| row.len() != m))
        {
            return Err(NasError::Parameter("pairwise blocks must be M x M".into()));
        }
        let all_finite = unary.iter().flatten().all(|v| v.is_finite())
            && pairwise.iter().flatten().flatten().all(|v| v.is_finite());
        if !all_finite {
            return Err(NasError::Parameter("utilities must be finite".into()));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(NasError::Parameter(format!("noise_std {noise_std} must be >= 0")));
        }
        Ok(Self {
            unary,
            pairwise,
            noise_std,
            noise_seed,
            cost_table: None,
        })
    }

    /// All utilities zero.
    pub fn flat(spec: &SearchSpaceSpec) -> Self {
        let (n, m) = (spec.num_layers(), spec.num_choices());
        Self {
            unary: vec![vec![0.0; m]; n],
            pairwise: vec![vec![vec![0.0; m]; m]; n - 1],
            noise_std: 0.0,
            noise_seed: 0,
            cost_table: None,
        }
    }

    /// Gaussian utilities: unary `N(0, unary_scale²)`, pairwise
    /// `N(0, pairwise_scale²)`, shifted so the mean over the space equals
    /// `baseline`. With `pairwise_scale` above `unary_scale` the landscape is
    /// dominated by inter-layer interactions and has many local optima.
    pub fn random(spec: &SearchSpaceSpec, params: &LandscapeParams) -> Result<Self> {
        if !(params.unary_scale >= 0.0 && params.pairwise_scale >= 0.0) {
            return Err(NasError::Parameter("landscape scales must be >= 0".into()));
        }
        let (n, m) = (spec.num_layers(), spec.num_choices());
        let mut rng = SeededRng::seed_from_u64(params.seed);
        let mut normal = |scale: f64| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        };
        let mut unary: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| normal(params.unary_scale)).collect())
            .collect();
        let pairwise: Vec<Vec<Vec<f64>>> = (0..n.saturating_sub(1))
            .map(|_| {
                (0..m)
                    .map(|_| (0..m).map(|_| normal(params.pairwise_scale)).collect())
                    .collect()
            })
            .collect();
        let mut landscape = Self::new(unary.clone(), pairwise, params.noise_std, params.seed)?;
        let (mean, _) = landscape.score_moments();
        let shift = (params.baseline - mean) / n as f64;
        for row in &mut unary {
            for v in row.iter_mut() {
                *v += shift;
            }
        }
        landscape.unary = unary;
        Ok(landscape)
    }

    pub fn with_cost_table(mut self, table: CostTable) -> Result<Self> {
        if table.num_layers() != self.num_layers() || table.num_choices() != self.num_choices() {
            return Err(NasError::Dimension {
                expected: self.num_layers(),
                actual: table.num_layers(),
            });
        }
        self.cost_table = Some(table);
        Ok(self)
    }

    pub fn num_layers(&self) -> usize {
        self.unary.len()
    }

    pub fn num_choices(&self) -> usize {
        self.unary[0].len()
    }

    pub fn unary(&self) -> &[Vec<f64>] {
        &self.unary
    }

    pub fn pairwise(&self) -> &[Vec<Vec<f64>>] {
        &self.pairwise
    }

    fn check(&self, genome: &ArchGenome) -> Result<()> {
        if genome.len() != self.num_layers() {
            return Err(NasError::Dimension {
                expected: self.num_layers(),
                actual: genome.len(),
            });
        }
        let m = self.num_choices();
        if let Some((layer, &choice)) = genome.choices().iter().enumerate().find(|(_, &c)| c >= m) {
            return Err(NasError::InvalidChoice {
                layer,
                choice,
                num_choices: m,
            });
        }
        Ok(())
    }

    /// Noise-free score.
    pub fn true_score(&self, genome: &ArchGenome) -> Result<f64> {
        self.check(genome)?;
        let c = genome.choices();
        let unary: f64 = c.iter().zip(&self.unary).map(|(&ck, row)| row[ck]).sum();
        let pairs: f64 = self
            .pairwise
            .iter()
            .enumerate()
            .map(|(k, block)| block[c[k]][c[k + 1]])
            .sum();
        Ok(unary + pairs)
    }

    /// Exact mean and population standard deviation of the score under
    /// uniformly drawn genomes, by a forward pass over the layer chain.
    pub fn score_moments(&self) -> (f64, f64) {
        let m = self.num_choices();
        let p = 1.0 / m as f64;
        // per current choice c: P(g_k = c), E[S 1{g_k=c}], E[S^2 1{g_k=c}]
        let mut mass = vec![p; m];
        let mut first: Vec<f64> = self.unary[0].iter().map(|u| p * u).collect();
        let mut second: Vec<f64> = self.unary[0].iter().map(|u| p * u * u).collect();
        for k in 1..self.num_layers() {
            let mut next_mass = vec![0.0; m];
            let mut next_first = vec![0.0; m];
            let mut next_second = vec![0.0; m];
            for c in 0..m {
                for prev in 0..m {
                    let step = self.pairwise[k - 1][prev][c] + self.unary[k][c];
                    next_mass[c] += p * mass[prev];
                    next_first[c] += p * (first[prev] + step * mass[prev]);
                    next_second[c] +=
                        p * (second[prev] + 2.0 * step * first[prev] + step * step * mass[prev]);
                }
            }
            mass = next_mass;
            first = next_first;
            second = next_second;
        }
        let mean: f64 = first.iter().sum();
        let raw: f64 = second.iter().sum();
        (mean, (raw - mean * mean).max(0.0).sqrt())
    }
}

impl Evaluator for SyntheticLandscape {
    fn evaluate(&self, genome: &ArchGenome) -> Result<FitnessReport> {
        let test_score = self.true_score(genome)?;
        let val_score = if self.noise_std > 0.0 {
            test_score + self.noise_std * genome_normal(self.noise_seed, genome)
        } else {
            test_score
        };
        let cost_mflops = match &self.cost_table {
            Some(table) => table.genome_cost(genome)?,
            None => 0.0,
        };
        Ok(FitnessReport {
            val_score,
            test_score,
            cost_mflops,
        })
    }

    fn test_score_moments(&self) -> Option<(f64, f64)> {
        Some(self.score_moments())
    }
}

/// Validation scores with a controlled correlation to the test score.
///
/// In standardized units `z = (test - mean) / std`, the validation score is
/// `rho * z + sqrt(1 - rho^2) * eps` with `eps` a per-genome standard normal,
/// then mapped back to the test score's scale. Test score and cost pass
/// through from the base oracle.
pub struct CorrelatedOracle {
    base: Box<dyn Evaluator>,
    target_pearson: f64,
    oracle_seed: u64,
    mean: f64,
    std: f64,
}

impl std::fmt::Debug for CorrelatedOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorrelatedOracle")
            .field("target_pearson", &self.target_pearson)
            .field("oracle_seed", &self.oracle_seed)
            .field("mean", &self.mean)
            .field("std", &self.std)
            .finish_non_exhaustive()
    }
}

impl CorrelatedOracle {
    pub fn new(base: Box<dyn Evaluator>, target_pearson: f64, oracle_seed: u64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&target_pearson) {
            return Err(NasError::Parameter(format!(
                "target_pearson {target_pearson} outside [-1, 1]"
            )));
        }
        let (mean, std) = base.test_score_moments().ok_or_else(|| {
            NasError::Parameter("base oracle does not expose score moments".into())
        })?;
        if !(std > 0.0 && std.is_finite()) {
            return Err(NasError::DegenerateVariance(
                "base oracle test scores are constant".into(),
            ));
        }
        Ok(Self {
            base,
            target_pearson,
            oracle_seed,
            mean,
            std,
        })
    }

    pub fn target_pearson(&self) -> f64 {
        self.target_pearson
    }
}

impl Evaluator for CorrelatedOracle {
    fn evaluate(&self, genome: &ArchGenome) -> Result<FitnessReport> {
        let base = self.base.evaluate(genome)?;
        let rho = self.target_pearson;
        let z = (base.test_score - self.mean) / self.std;
        let eps = if rho.abs() < 1.0 {
            genome_normal(self.oracle_seed, genome)
        } else {
            0.0
        };
        let mixed = rho * z + (1.0 - rho * rho).sqrt() * eps;
        Ok(FitnessReport {
            val_score: self.mean + self.std * mixed,
            ..base
        })
    }

    fn test_score_moments(&self) -> Option<(f64, f64)> {
        Some((self.mean, self.std))
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct TabularRow {
    genome_id: u64,
    val_score: f64,
    test_score: f64,
    cost_mflops: f64,
}

/// Precomputed scores keyed by mixed-radix genome id.
#[derive(Debug, Clone)]
pub struct TabularBenchmark {
    spec: SearchSpaceSpec,
    records: HashMap<u64, FitnessReport>,
}

impl TabularBenchmark {
    pub fn new(spec: SearchSpaceSpec, records: HashMap<u64, FitnessReport>) -> Result<Self> {
        let size = spec.space_size().ok_or(NasError::Capacity {
            num_layers: spec.num_layers(),
            num_choices: spec.num_choices(),
        })?;
        for (&id, report) in &records {
            if id >= size {
                return Err(NasError::Range { id, size });
            }
            let finite = report.val_score.is_finite()
                && report.test_score.is_finite()
                && report.cost_mflops.is_finite();
            if !finite || report.cost_mflops < 0.0 {
                return Err(NasError::Input(format!("record {id} has invalid values")));
            }
        }
        Ok(Self { spec, records })
    }

    /// Reads `genome_id,val_score,test_score,cost_mflops` CSV.
    pub fn from_csv_reader<R: std::io::Read>(spec: SearchSpaceSpec, reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = csv.headers()?.clone();
        let expected = ["genome_id", "val_score", "test_score", "cost_mflops"];
        if headers.iter().ne(expected) {
            return Err(NasError::Input(format!(
                "tabular header must be `{}`",
                expected.join(",")
            )));
        }
        let mut records = HashMap::new();
        for row in csv.deserialize() {
            let row: TabularRow = row?;
            let report = FitnessReport {
                val_score: row.val_score,
                test_score: row.test_score,
                cost_mflops: row.cost_mflops,
            };
            if records.insert(row.genome_id, report).is_some() {
                return Err(NasError::Input(format!("duplicate genome_id {}", row.genome_id)));
            }
        }
        Self::new(spec, records)
    }

    pub fn from_csv_path(spec: SearchSpaceSpec, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| NasError::io(path, e))?;
        Self::from_csv_reader(spec, file)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut ids: Vec<_> = self.records.keys().copied().collect();
        ids.sort_unstable();
        for id in ids {
            let r = &self.records[&id];
            out.serialize(TabularRow {
                genome_id: id,
                val_score: r.val_score,
                test_score: r.test_score,
                cost_mflops: r.cost_mflops,
            })?;
        }
        out.flush().map_err(|e| NasError::Input(e.to_string()))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl Evaluator for TabularBenchmark {
    fn evaluate(&self, genome: &ArchGenome) -> Result<FitnessReport> {
        let id = genome_to_id(&self.spec, genome)?;
        self.records.get(&id).copied().ok_or(NasError::UnknownGenome(id))
    }

    fn test_score_moments(&self) -> Option<(f64, f64)> {
        let scores: Vec<f64> = self.records.values().map(|r| r.test_score).collect();
        mean_std(&scores).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::id_to_genome;

    fn small_landscape(spec: &SearchSpaceSpec, seed: u64) -> SyntheticLandscape {
        let params = LandscapeParams {
            seed,
            baseline: 10.0,
            unary_scale: 1.0,
            pairwise_scale: 2.0,
            noise_std: 0.0,
        };
        SyntheticLandscape::random(spec, &params).unwrap()
    }

    fn all_genomes(spec: &SearchSpaceSpec) -> Vec<ArchGenome> {
        (0..spec.space_size().unwrap())
            .map(|id| id_to_genome(spec, id).unwrap())
            .collect()
    }

    #[test]
    fn flat_landscape_scores_zero() {
        let spec = SearchSpaceSpec::new(5, 3).unwrap();
        let flat = SyntheticLandscape::flat(&spec);
        for g in all_genomes(&spec) {
            let r = flat.evaluate(&g).unwrap();
            assert_eq!((r.val_score, r.test_score, r.cost_mflops), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn landscape_argmax_matches_brute_force_formula() {
        let spec = SearchSpaceSpec::new(4, 2).unwrap();
        let land = small_landscape(&spec, 3);
        let (u, p) = (land.unary(), land.pairwise());
        let direct = |c: &[usize]| {
            let mut s = 0.0;
            for k in 0..4 {
                s += u[k][c[k]];
            }
            for k in 0..3 {
                s += p[k][c[k]][c[k + 1]];
            }
            s
        };
        let mut best_direct = (f64::NEG_INFINITY, vec![]);
        let mut best_eval = (f64::NEG_INFINITY, vec![]);
        for g in all_genomes(&spec) {
            let d = direct(g.choices());
            let e = land.evaluate(&g).unwrap().test_score;
            assert!((d - e).abs() < 1e-12);
            if d > best_direct.0 {
                best_direct = (d, g.choices().to_vec());
            }
            if e > best_eval.0 {
                best_eval = (e, g.choices().to_vec());
            }
        }
        assert_eq!(best_direct.1, best_eval.1);
    }

    #[test]
    fn score_moments_match_enumeration() {
        let spec = SearchSpaceSpec::new(5, 3).unwrap();
        let land = small_landscape(&spec, 8);
        let scores: Vec<f64> = all_genomes(&spec)
            .iter()
            .map(|g| land.true_score(g).unwrap())
            .collect();
        let (mean, std) = mean_std(&scores).unwrap();
        let (dm, ds) = land.score_moments();
        assert!((mean - dm).abs() < 1e-9, "{mean} vs {dm}");
        assert!((std - ds).abs() < 1e-9, "{std} vs {ds}");
        assert!((mean - 10.0).abs() < 1e-9);
    }

    #[test]
    fn noise_only_touches_validation() {
        let spec = SearchSpaceSpec::new(6, 3).unwrap();
        let mut params = LandscapeParams {
            seed: 1,
            baseline: 0.0,
            unary_scale: 1.0,
            pairwise_scale: 1.0,
            noise_std: 0.5,
        };
        let noisy = SyntheticLandscape::random(&spec, &params).unwrap();
        params.noise_std = 0.0;
        let clean = SyntheticLandscape::random(&spec, &params).unwrap();
        let g = ArchGenome::from_choices(vec![0, 1, 2, 0, 1, 2]);
        let (a, b) = (noisy.evaluate(&g).unwrap(), clean.evaluate(&g).unwrap());
        assert_eq!(a.test_score, b.test_score);
        assert_ne!(a.val_score, b.val_score);
        assert_eq!(a, noisy.evaluate(&g).unwrap());
    }

    #[test]
    fn correlated_oracle_with_unit_rho_preserves_order() {
        let spec = SearchSpaceSpec::new(4, 3).unwrap();
        let oracle =
            CorrelatedOracle::new(Box::new(small_landscape(&spec, 2)), 1.0, 77).unwrap();
        let mut reports: Vec<FitnessReport> = all_genomes(&spec)
            .iter()
            .map(|g| oracle.evaluate(g).unwrap())
            .collect();
        reports.sort_by(|a, b| a.val_score.total_cmp(&b.val_score));
        assert!(reports
            .windows(2)
            .all(|w| w[0].test_score <= w[1].test_score));
    }

    #[test]
    fn correlated_oracle_rejects_bad_inputs() {
        let spec = SearchSpaceSpec::new(3, 2).unwrap();
        assert!(CorrelatedOracle::new(Box::new(small_landscape(&spec, 1)), 1.5, 0).is_err());
        let flat = SyntheticLandscape::flat(&spec);
        assert!(matches!(
            CorrelatedOracle::new(Box::new(flat), 0.5, 0),
            Err(NasError::DegenerateVariance(_))
        ));
    }

    #[test]
    fn tabular_lookup_and_missing_records() {
        let spec = SearchSpaceSpec::new(2, 2).unwrap();
        let csv = "genome_id,val_score,test_score,cost_mflops\n0,1.0,2.0,3.0\n3,4.0,5.0,6.0\n";
        let table = TabularBenchmark::from_csv_reader(spec.clone(), csv.as_bytes()).unwrap();
        let r = table.evaluate(&ArchGenome::from_choices(vec![1, 1])).unwrap();
        assert_eq!(r.test_score, 5.0);
        assert!(matches!(
            table.evaluate(&ArchGenome::from_choices(vec![1, 0])),
            Err(NasError::UnknownGenome(1))
        ));
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), csv);
    }

    #[test]
    fn tabular_rejects_malformed_files() {
        let spec = SearchSpaceSpec::new(2, 2).unwrap();
        let wrong_header = "id,val,test,cost\n0,1,2,3\n";
        assert!(TabularBenchmark::from_csv_reader(spec.clone(), wrong_header.as_bytes()).is_err());
        let dup = "genome_id,val_score,test_score,cost_mflops\n0,1,2,3\n0,1,2,3\n";
        assert!(TabularBenchmark::from_csv_reader(spec.clone(), dup.as_bytes()).is_err());
        let out_of_range = "genome_id,val_score,test_score,cost_mflops\n4,1,2,3\n";
        assert!(matches!(
            TabularBenchmark::from_csv_reader(spec, out_of_range.as_bytes()),
            Err(NasError::Range { id: 4, size: 4 })
        ));
    }
}
