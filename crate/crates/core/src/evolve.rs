//! Constrained evolutionary search and the random-search baseline.
//!
//! The evolutionary schedule: build an initial population (uniform or
//! similarity-directed), keep the best `survivor_count` as parents, then
//! alternate a batch of mutation children with a batch of crossover children,
//! re-selecting the parent pool by truncation after every batch, until
//! `total_budget` distinct genomes have been evaluated.
//!
//! Every candidate satisfies the cost bound and no genome is evaluated twice
//! within a trial. Ties in selection are broken by lower cost, then lower
//! genome id.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{CostConstraint, CostTable};
use crate::diversity::{nsdi_init, random_init_counted, NsdiConfig, NsdiStats, Population};
use crate::error::{NasError, Result};
use crate::fitness::{Evaluator, FitnessReport};
use crate::space::{random_genome, ArchGenome, SearchSpaceSpec};
use crate::MAX_REJECTION_SAMPLES;

/// Proposals rejected for one child slot before falling back to a fresh
/// random genome.
pub const SLOT_REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Random,
    Nsdi(NsdiConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    #[default]
    Uniform,
    SinglePoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaConfig {
    pub init_population: usize,
    pub survivor_count: usize,
    pub mutation_prob: f64,
    pub batch_size: usize,
    pub total_budget: usize,
    #[serde(default)]
    pub cost_bound: Option<f64>,
    pub init_method: InitMethod,
    pub topk_report: usize,
    #[serde(default)]
    pub crossover: CrossoverKind,
}

impl EaConfig {
    /// 100 initial candidates, top 50 kept, per-layer mutation probability
    /// 0.1, batches of 25, 1000 evaluations, 1800 MFLOPs, top 10 reported.
    pub fn reference(init_method: InitMethod) -> Self {
        Self {
            init_population: 100,
            survivor_count: 50,
            mutation_prob: 0.1,
            batch_size: 25,
            total_budget: 1000,
            cost_bound: Some(1800.0),
            init_method,
            topk_report: 10,
            crossover: CrossoverKind::Uniform,
        }
    }

    pub fn validate(&self, spec: &SearchSpaceSpec) -> Result<()> {
        if self.init_population == 0 {
            return Err(NasError::config("init_population", "must be positive"));
        }
        if self.survivor_count == 0 || self.survivor_count > self.init_population {
            return Err(NasError::config(
                "survivor_count",
                format!("must be in [1, init_population={}]", self.init_population),
            ));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(NasError::config("mutation_prob", "must be in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(NasError::config("batch_size", "must be positive"));
        }
        if self.total_budget < self.init_population {
            return Err(NasError::config(
                "total_budget",
                "must be at least init_population",
            ));
        }
        if self.topk_report == 0 {
            return Err(NasError::config("topk_report", "must be positive"));
        }
        if let InitMethod::Nsdi(nsdi) = &self.init_method {
            nsdi.validate(spec)?;
            if nsdi.population_size != self.init_population {
                return Err(NasError::config(
                    "init_method.nsdi.population_size",
                    format!("must equal init_population ({})", self.init_population),
                ));
            }
            if nsdi.cost_bound.is_some() && nsdi.cost_bound != self.cost_bound {
                return Err(NasError::config(
                    "init_method.nsdi.cost_bound",
                    "must be omitted or equal to cost_bound",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSearchConfig {
    pub budget: usize,
    #[serde(default)]
    pub cost_bound: Option<f64>,
    #[serde(default = "default_topk")]
    pub topk_report: usize,
}

fn default_topk() -> usize {
    10
}

/// One evaluated genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub genome: ArchGenome,
    pub report: FitnessReport,
}

/// Snapshot after initialization (generation 0) and after each batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub evaluated: usize,
    /// Best validation score among everything evaluated so far.
    pub best_val: f64,
    /// Mean validation score of the current population.
    pub mean_val: f64,
}

/// Full trace of one seeded search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub per_generation: Vec<GenerationStat>,
    pub evaluated_count: usize,
    /// Best candidates by validation score, descending.
    pub topk: Vec<Candidate>,
    pub init_stats: Option<NsdiStats>,
    /// Average population similarity of the initial population.
    pub init_aps: Option<f64>,
    /// Every evaluation in order.
    pub history: Vec<Candidate>,
}

impl TrialRecord {
    pub fn best(&self) -> Option<&Candidate> {
        self.topk.first()
    }
}

/// Independently per layer, with probability `prob` redraw the choice
/// uniformly from all `num_choices` options (possibly the same one).
pub fn mutate<R: Rng + ?Sized>(
    genome: &ArchGenome,
    num_choices: usize,
    prob: f64,
    rng: &mut R,
) -> Result<ArchGenome> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(NasError::Parameter(format!("mutation probability {prob}")));
    }
    if num_choices == 0 {
        return Err(NasError::Parameter("num_choices must be positive".into()));
    }
    let choices = genome
        .choices()
        .iter()
        .map(|&c| {
            if rng.random_bool(prob) {
                rng.random_range(0..num_choices)
            } else {
                c
            }
        })
        .collect();
    Ok(ArchGenome::from_choices(choices))
}

pub fn crossover<R: Rng + ?Sized>(
    a: &ArchGenome,
    b: &ArchGenome,
    kind: CrossoverKind,
    rng: &mut R,
) -> Result<ArchGenome> {
    if a.len() != b.len() {
        return Err(NasError::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (ca, cb) = (a.choices(), b.choices());
    let choices = match kind {
        CrossoverKind::Uniform => ca
            .iter()
            .zip(cb)
            .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
            .collect(),
        CrossoverKind::SinglePoint => {
            // cut in [0, N]: 0 copies b entirely, N copies a entirely
            let cut = rng.random_range(0..=ca.len());
            ca[..cut].iter().chain(&cb[cut..]).copied().collect()
        }
    };
    Ok(ArchGenome::from_choices(choices))
}

fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    b.report
        .val_score
        .total_cmp(&a.report.val_score)
        .then(a.report.cost_mflops.total_cmp(&b.report.cost_mflops))
        .then_with(|| a.genome.cmp_by_id(&b.genome))
}

fn top_k(candidates: &[Candidate], k: usize) -> Vec<Candidate> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(rank);
    sorted.truncate(k);
    sorted
}

fn mean_val(pool: &[Candidate]) -> f64 {
    pool.iter().map(|c| c.report.val_score).sum::<f64>() / pool.len() as f64
}

/// Evaluation bookkeeping shared by both strategies.
struct Archive<'a, E: ?Sized> {
    spec: &'a SearchSpaceSpec,
    evaluator: &'a E,
    constraint: CostConstraint<'a>,
    seen: HashSet<ArchGenome>,
    history: Vec<Candidate>,
    best_val: f64,
}

impl<'a, E: Evaluator + ?Sized> Archive<'a, E> {
    fn new(spec: &'a SearchSpaceSpec, evaluator: &'a E, constraint: CostConstraint<'a>) -> Self {
        Self {
            spec,
            evaluator,
            constraint,
            seen: HashSet::new(),
            history: Vec::new(),
            best_val: f64::NEG_INFINITY,
        }
    }

    fn admissible(&self, genome: &ArchGenome) -> Result<bool> {
        Ok(!self.seen.contains(genome) && self.constraint.admits(genome)?)
    }

    /// Uniform genome that satisfies the bound and has not been claimed yet.
    fn fresh_random<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ArchGenome> {
        for _ in 0..MAX_REJECTION_SAMPLES {
            let g = random_genome(self.spec, rng);
            if self.admissible(&g)? {
                return Ok(g);
            }
        }
        Err(NasError::InfeasibleConstraint(format!(
            "no unevaluated admissible genome after {MAX_REJECTION_SAMPLES} samples"
        )))
    }

    /// Draws proposals until one is admissible, falling back to a fresh
    /// random genome after [`SLOT_REJECTION_CAP`] rejections.
    fn fill_slot<R, F>(&self, rng: &mut R, mut propose: F) -> Result<ArchGenome>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> Result<ArchGenome>,
    {
        for _ in 0..SLOT_REJECTION_CAP {
            let g = propose(rng)?;
            if self.admissible(&g)? {
                return Ok(g);
            }
        }
        self.fresh_random(rng)
    }

    fn claim(&mut self, genome: &ArchGenome) {
        self.seen.insert(genome.clone());
    }

    fn evaluate_all(&mut self, genomes: Vec<ArchGenome>) -> Result<Vec<Candidate>> {
        let mut out = Vec::with_capacity(genomes.len());
        for genome in genomes {
            let report = self.evaluator.evaluate(&genome)?;
            self.seen.insert(genome.clone());
            self.best_val = self.best_val.max(report.val_score);
            let candidate = Candidate { genome, report };
            self.history.push(candidate.clone());
            out.push(candidate);
        }
        Ok(out)
    }
}

/// Builds the initial population and replaces any duplicate members with
/// fresh admissible genomes.
fn initial_population<R: Rng + ?Sized, E: Evaluator + ?Sized>(
    cfg: &EaConfig,
    archive: &mut Archive<'_, E>,
    cost_model: Option<&CostTable>,
    rng: &mut R,
) -> Result<(Vec<ArchGenome>, Option<NsdiStats>)> {
    let (population, stats) = match &cfg.init_method {
        InitMethod::Random => {
            let (pop, _) =
                random_init_counted(archive.spec, cfg.init_population, archive.constraint, rng)?;
            (pop, None)
        }
        InitMethod::Nsdi(nsdi) => {
            let nsdi = NsdiConfig {
                cost_bound: cfg.cost_bound,
                ..nsdi.clone()
            };
            let (pop, stats) = nsdi_init(archive.spec, &nsdi, cost_model, rng)?;
            (pop, Some(stats))
        }
    };
    let mut members = Vec::with_capacity(population.len());
    for genome in population.into_members() {
        let genome = if archive.seen.contains(&genome) {
            archive.fresh_random(rng)?
        } else {
            genome
        };
        archive.claim(&genome);
        members.push(genome);
    }
    Ok((members, stats))
}

/// Runs one evolutionary trial.
pub fn ea_search<R, E>(
    spec: &SearchSpaceSpec,
    cfg: &EaConfig,
    evaluator: &E,
    cost_model: Option<&CostTable>,
    seed: u64,
    rng: &mut R,
) -> Result<TrialRecord>
where
    R: Rng + ?Sized,
    E: Evaluator + ?Sized,
{
    cfg.validate(spec)?;
    if let Some(table) = cost_model {
        table.check_space(spec)?;
    }
    let constraint = CostConstraint::new(cost_model, cfg.cost_bound)?;
    let mut archive = Archive::new(spec, evaluator, constraint);

    let (initial, init_stats) = initial_population(cfg, &mut archive, cost_model, rng)?;
    let init_aps = if initial.len() >= 2 {
        Some(Population::new(initial.clone()).average_similarity()?)
    } else {
        None
    };
    let evaluated = archive.evaluate_all(initial)?;
    let mut parents = top_k(&evaluated, cfg.survivor_count);

    let mut per_generation = vec![GenerationStat {
        generation: 0,
        evaluated: archive.history.len(),
        best_val: archive.best_val,
        mean_val: mean_val(&parents),
    }];

    let mut use_mutation = true;
    while archive.history.len() < cfg.total_budget {
        let count = cfg.batch_size.min(cfg.total_budget - archive.history.len());
        let mut children = Vec::with_capacity(count);
        for _ in 0..count {
            let child = if use_mutation {
                archive.fill_slot(rng, |rng| {
                    let parent = &parents[rng.random_range(0..parents.len())];
                    mutate(&parent.genome, spec.num_choices(), cfg.mutation_prob, rng)
                })?
            } else {
                archive.fill_slot(rng, |rng| {
                    let (i, j) = distinct_pair(parents.len(), rng);
                    crossover(&parents[i].genome, &parents[j].genome, cfg.crossover, rng)
                })?
            };
            archive.claim(&child);
            children.push(child);
        }
        let evaluated = archive.evaluate_all(children)?;
        parents.extend(evaluated);
        parents = top_k(&parents, cfg.survivor_count);
        use_mutation = !use_mutation;

        per_generation.push(GenerationStat {
            generation: per_generation.len(),
            evaluated: archive.history.len(),
            best_val: archive.best_val,
            mean_val: mean_val(&parents),
        });
    }

    Ok(TrialRecord {
        seed,
        per_generation,
        evaluated_count: archive.history.len(),
        topk: top_k(&archive.history, cfg.topk_report),
        init_stats,
        init_aps,
        history: archive.history,
    })
}

/// Two distinct indices below `len`, or the same index twice when `len == 1`.
fn distinct_pair<R: Rng + ?Sized>(len: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..len);
    if len < 2 {
        return (i, i);
    }
    let mut j = rng.random_range(0..len - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Evaluates `budget` distinct, bound-satisfying uniform genomes. The trace
/// has one entry per evaluation; its mean is over everything seen so far.
pub fn random_search<R, E>(
    spec: &SearchSpaceSpec,
    cfg: &RandomSearchConfig,
    evaluator: &E,
    cost_model: Option<&CostTable>,
    seed: u64,
    rng: &mut R,
) -> Result<TrialRecord>
where
    R: Rng + ?Sized,
    E: Evaluator + ?Sized,
{
    if cfg.budget == 0 {
        return Err(NasError::config("budget", "must be positive"));
    }
    if cfg.topk_report == 0 {
        return Err(NasError::config("topk_report", "must be positive"));
    }
    if let Some(table) = cost_model {
        table.check_space(spec)?;
    }
    let constraint = CostConstraint::new(cost_model, cfg.cost_bound)?;
    let mut archive = Archive::new(spec, evaluator, constraint);
    let mut per_generation = Vec::with_capacity(cfg.budget);
    let mut total = 0.0;
    for i in 0..cfg.budget {
        let g = archive.fresh_random(rng)?;
        let [candidate] = archive.evaluate_all(vec![g])?.try_into().expect("one candidate");
        total += candidate.report.val_score;
        per_generation.push(GenerationStat {
            generation: i + 1,
            evaluated: i + 1,
            best_val: archive.best_val,
            mean_val: total / (i + 1) as f64,
        });
    }
    Ok(TrialRecord {
        seed,
        per_generation,
        evaluated_count: archive.history.len(),
        topk: top_k(&archive.history, cfg.topk_report),
        init_stats: None,
        init_aps: None,
        history: archive.history,
    })
}
