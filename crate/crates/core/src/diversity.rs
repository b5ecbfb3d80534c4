//! Network similarity, population diversity and similarity-directed
//! initialization.
//!
//! The similarity of two genomes is the number of layers on which they pick
//! the same operation. A population's APS is the mean, over its members, of
//! each member's highest similarity to any other member; low APS means a
//! spread-out population.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{CostConstraint, CostTable};
use crate::error::{NasError, Result};
use crate::space::{random_genome, ArchGenome, SearchSpaceSpec};
use crate::MAX_REJECTION_SAMPLES;

/// Number of layers on which `a` and `b` agree.
pub fn similarity(a: &ArchGenome, b: &ArchGenome) -> Result<usize> {
    if a.len() != b.len() {
        return Err(NasError::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(similarity_unchecked(a, b))
}

#[inline]
fn similarity_unchecked(a: &ArchGenome, b: &ArchGenome) -> usize {
    a.choices()
        .iter()
        .zip(b.choices())
        .filter(|(x, y)| x == y)
        .count()
}

/// Ordered collection of genomes from one space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Population {
    members: Vec<ArchGenome>,
}

impl Population {
    pub fn new(members: Vec<ArchGenome>) -> Self {
        Self { members }
    }

    pub fn members(&self) -> &[ArchGenome] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn push(&mut self, genome: ArchGenome) {
        self.members.push(genome);
    }

    pub fn into_members(self) -> Vec<ArchGenome> {
        self.members
    }

    /// Highest similarity between `genome` and any member other than
    /// `exclude_index`.
    pub fn max_similarity_to(
        &self,
        genome: &ArchGenome,
        exclude_index: Option<usize>,
    ) -> Result<usize> {
        let mut best = None;
        for (i, member) in self.members.iter().enumerate() {
            if Some(i) == exclude_index {
                continue;
            }
            let s = similarity(genome, member)?;
            best = Some(best.map_or(s, |b: usize| b.max(s)));
        }
        best.ok_or(NasError::EmptyPopulation)
    }

    /// Each member's highest similarity to any other member.
    pub fn max_similarity_profile(&self) -> Result<Vec<usize>> {
        if self.members.len() < 2 {
            return Err(NasError::InsufficientPopulation {
                required: 2,
                actual: self.members.len(),
            });
        }
        (0..self.members.len())
            .map(|i| self.max_similarity_to(&self.members[i], Some(i)))
            .collect()
    }

    /// Average population similarity.
    pub fn average_similarity(&self) -> Result<f64> {
        let profile = self.max_similarity_profile()?;
        let total: usize = profile.iter().sum();
        Ok(total as f64 / profile.len() as f64)
    }
}

impl FromIterator<ArchGenome> for Population {
    fn from_iter<I: IntoIterator<Item = ArchGenome>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

pub fn max_similarity_to(
    pop: &Population,
    genome: &ArchGenome,
    exclude_index: Option<usize>,
) -> Result<usize> {
    pop.max_similarity_to(genome, exclude_index)
}

pub fn average_population_similarity(pop: &Population) -> Result<f64> {
    pop.average_similarity()
}

/// Settings for similarity-directed initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsdiConfig {
    pub population_size: usize,
    /// Initial similarity threshold.
    pub aps_max: usize,
    /// Consecutive rejections tolerated before the threshold is raised.
    pub timeout: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_bound: Option<f64>,
}

impl NsdiConfig {
    pub fn validate(&self, spec: &SearchSpaceSpec) -> Result<()> {
        if self.population_size == 0 {
            return Err(NasError::config("nsdi.population_size", "must be positive"));
        }
        if self.aps_max > spec.num_layers() {
            return Err(NasError::config(
                "nsdi.aps_max",
                format!("{} exceeds num_layers {}", self.aps_max, spec.num_layers()),
            ));
        }
        if self.timeout == 0 {
            return Err(NasError::config("nsdi.timeout", "must be at least 1"));
        }
        Ok(())
    }
}

/// Bookkeeping from one initializer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NsdiStats {
    pub samples_drawn: u64,
    pub final_threshold: usize,
    pub threshold_bumps: usize,
}

fn infeasible(drawn: u64) -> NasError {
    NasError::InfeasibleConstraint(format!(
        "no admissible genome found after {drawn} samples"
    ))
}

/// Uniform sampling under an optional cost bound.
pub fn random_init<R: Rng + ?Sized>(
    spec: &SearchSpaceSpec,
    size: usize,
    cost_model: Option<&CostTable>,
    cost_bound: Option<f64>,
    rng: &mut R,
) -> Result<Population> {
    let constraint = CostConstraint::new(cost_model, cost_bound)?;
    random_init_counted(spec, size, constraint, rng).map(|(pop, _)| pop)
}

pub(crate) fn random_init_counted<R: Rng + ?Sized>(
    spec: &SearchSpaceSpec,
    size: usize,
    constraint: CostConstraint<'_>,
    rng: &mut R,
) -> Result<(Population, u64)> {
    if size == 0 {
        return Err(NasError::Parameter("population size must be positive".into()));
    }
    let mut members = Vec::with_capacity(size);
    let mut drawn = 0u64;
    while members.len() < size {
        if drawn >= MAX_REJECTION_SAMPLES {
            return Err(infeasible(drawn));
        }
        let v = random_genome(spec, rng);
        drawn += 1;
        if constraint.admits(&v)? {
            members.push(v);
        }
    }
    Ok((Population::new(members), drawn))
}

/// Similarity-directed initialization.
///
/// A candidate is accepted when its highest similarity to the accepted
/// members is at most the current threshold and it satisfies the cost bound.
/// After `timeout` consecutive rejections the threshold rises by one. The
/// rejection counter resets on every acceptance and every raise.
pub fn nsdi_init<R: Rng + ?Sized>(
    spec: &SearchSpaceSpec,
    cfg: &NsdiConfig,
    cost_model: Option<&CostTable>,
    rng: &mut R,
) -> Result<(Population, NsdiStats)> {
    cfg.validate(spec)?;
    let constraint = CostConstraint::new(cost_model, cfg.cost_bound)?;

    let mut pop = Population::new(Vec::with_capacity(cfg.population_size));
    let mut threshold = cfg.aps_max;
    let mut rejections = 0u64;
    let mut stats = NsdiStats {
        samples_drawn: 0,
        final_threshold: threshold,
        threshold_bumps: 0,
    };

    while pop.len() < cfg.population_size {
        if stats.samples_drawn >= MAX_REJECTION_SAMPLES {
            return Err(infeasible(stats.samples_drawn));
        }
        let v = random_genome(spec, rng);
        stats.samples_drawn += 1;

        // similarity first, it is cheaper than the cost lookup
        let similar_enough = pop
            .members()
            .iter()
            .all(|u| similarity_unchecked(&v, u) <= threshold);
        if similar_enough && constraint.admits(&v)? {
            pop.push(v);
            rejections = 0;
        } else {
            rejections += 1;
        }

        if rejections > cfg.timeout && threshold < spec.num_layers() {
            threshold += 1;
            rejections = 0;
            stats.threshold_bumps += 1;
        }
    }
    stats.final_threshold = threshold;
    Ok((pop, stats))
}
