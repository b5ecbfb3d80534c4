//! Discrete layered search spaces and their genomes.
//!
//! A space has `num_layers` positions, each choosing one of `num_choices`
//! operations, for `num_choices^num_layers` architectures in total. Genomes
//! store the per-layer choice index directly.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpaceSpec")]
pub struct SearchSpaceSpec {
    num_layers: usize,
    num_choices: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    layer_names: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    choice_names: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct RawSpaceSpec {
    num_layers: usize,
    num_choices: usize,
    #[serde(default)]
    layer_names: Option<Vec<String>>,
    #[serde(default)]
    choice_names: Option<Vec<String>>,
}

impl TryFrom<RawSpaceSpec> for SearchSpaceSpec {
    type Error = NasError;

    fn try_from(raw: RawSpaceSpec) -> Result<Self> {
        let spec = SearchSpaceSpec::new(raw.num_layers, raw.num_choices)?;
        spec.with_names(raw.layer_names, raw.choice_names)
    }
}

impl SearchSpaceSpec {
    pub fn new(num_layers: usize, num_choices: usize) -> Result<Self> {
        if num_layers < 1 {
            return Err(NasError::config("space.num_layers", "must be at least 1"));
        }
        if num_choices < 2 {
            return Err(NasError::config("space.num_choices", "must be at least 2"));
        }
        Ok(Self {
            num_layers,
            num_choices,
            layer_names: None,
            choice_names: None,
        })
    }

    /// Attaches display names, checking their counts against the dimensions.
    pub fn with_names(
        mut self,
        layer_names: Option<Vec<String>>,
        choice_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(names) = &layer_names {
            if names.len() != self.num_layers {
                return Err(NasError::config(
                    "space.layer_names",
                    format!("expected {} entries, got {}", self.num_layers, names.len()),
                ));
            }
        }
        if let Some(names) = &choice_names {
            if names.len() != self.num_choices {
                return Err(NasError::config(
                    "space.choice_names",
                    format!("expected {} entries, got {}", self.num_choices, names.len()),
                ));
            }
        }
        self.layer_names = layer_names;
        self.choice_names = choice_names;
        Ok(self)
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn num_choices(&self) -> usize {
        self.num_choices
    }

    pub fn layer_names(&self) -> Option<&[String]> {
        self.layer_names.as_deref()
    }

    pub fn choice_names(&self) -> Option<&[String]> {
        self.choice_names.as_deref()
    }

    /// Total number of architectures, or `None` if it does not fit in a `u64`.
    pub fn space_size(&self) -> Option<u64> {
        let m = u64::try_from(self.num_choices).ok()?;
        let n = u32::try_from(self.num_layers).ok()?;
        m.checked_pow(n)
    }

    /// Checks that `genome` belongs to this space.
    pub fn validate(&self, genome: &ArchGenome) -> Result<()> {
        if genome.len() != self.num_layers {
            return Err(NasError::Dimension {
                expected: self.num_layers,
                actual: genome.len(),
            });
        }
        for (layer, &choice) in genome.choices().iter().enumerate() {
            if choice >= self.num_choices {
                return Err(NasError::InvalidChoice {
                    layer,
                    choice,
                    num_choices: self.num_choices,
                });
            }
        }
        Ok(())
    }

    /// Renders a genome with choice names when available.
    pub fn describe(&self, genome: &ArchGenome) -> String {
        match &self.choice_names {
            Some(names) => genome
                .choices()
                .iter()
                .map(|&c| names.get(c).map(String::as_str).unwrap_or("?"))
                .collect::<Vec<_>>()
                .join(" "),
            None => genome.to_string(),
        }
    }
}

/// One architecture: the chosen operation index at every layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchGenome {
    choices: Vec<usize>,
}

impl ArchGenome {
    /// Builds a genome and validates it against `spec`.
    pub fn new(spec: &SearchSpaceSpec, choices: Vec<usize>) -> Result<Self> {
        let genome = Self { choices };
        spec.validate(&genome)?;
        Ok(genome)
    }

    /// Builds a genome without a space to check against.
    pub fn from_choices(choices: Vec<usize>) -> Self {
        Self { choices }
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn into_choices(self) -> Vec<usize> {
        self.choices
    }

    /// Orders genomes the way their mixed-radix ids would order, without
    /// computing the ids (works for spaces beyond 64 bits).
    pub fn cmp_by_id(&self, other: &Self) -> Ordering {
        self.choices
            .iter()
            .rev()
            .cmp(other.choices.iter().rev())
            .then(self.choices.len().cmp(&other.choices.len()))
    }
}

impl fmt::Display for ArchGenome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, c) in self.choices.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

/// Draws each layer's choice uniformly and independently.
pub fn random_genome<R: Rng + ?Sized>(spec: &SearchSpaceSpec, rng: &mut R) -> ArchGenome {
    let choices = (0..spec.num_layers)
        .map(|_| rng.random_range(0..spec.num_choices))
        .collect();
    ArchGenome { choices }
}

/// Mixed-radix id with layer 0 as the least-significant digit.
pub fn genome_to_id(spec: &SearchSpaceSpec, genome: &ArchGenome) -> Result<u64> {
    spec.validate(genome)?;
    if spec.space_size().is_none() {
        return Err(NasError::Capacity {
            num_layers: spec.num_layers,
            num_choices: spec.num_choices,
        });
    }
    let radix = spec.num_choices as u64;
    // Cannot overflow: the id is below space_size, which fits.
    Ok(genome
        .choices
        .iter()
        .rev()
        .fold(0u64, |acc, &c| acc * radix + c as u64))
}

pub fn id_to_genome(spec: &SearchSpaceSpec, id: u64) -> Result<ArchGenome> {
    let size = spec.space_size().ok_or(NasError::Capacity {
        num_layers: spec.num_layers,
        num_choices: spec.num_choices,
    })?;
    if id >= size {
        return Err(NasError::Range { id, size });
    }
    let radix = spec.num_choices as u64;
    let mut rest = id;
    let choices = (0..spec.num_layers)
        .map(|_| {
            let digit = (rest % radix) as usize;
            rest /= radix;
            digit
        })
        .collect();
    Ok(ArchGenome { choices })
}
