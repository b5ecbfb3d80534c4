//! FLOPs cost tables and the complexity constraint.

use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};
use crate::space::{ArchGenome, SearchSpaceSpec};

/// Per-layer, per-choice cost in MFLOPs plus a fixed stem/head cost.
///
/// Serialized as `{"base_mflops": f64, "layers": [[f64; M]; N]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCostTable")]
pub struct CostTable {
    #[serde(rename = "base_mflops")]
    base_cost: f64,
    #[serde(rename = "layers")]
    per_layer_choice_cost: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawCostTable {
    base_mflops: f64,
    layers: Vec<Vec<f64>>,
}

impl TryFrom<RawCostTable> for CostTable {
    type Error = NasError;

    fn try_from(raw: RawCostTable) -> Result<Self> {
        CostTable::new(raw.base_mflops, raw.layers)
    }
}

fn check_cost(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(NasError::config(field, format!("cost {value} must be finite and >= 0")))
    }
}

impl CostTable {
    pub fn new(base_cost: f64, per_layer_choice_cost: Vec<Vec<f64>>) -> Result<Self> {
        check_cost("cost_table.base_mflops", base_cost)?;
        if per_layer_choice_cost.is_empty() {
            return Err(NasError::config("cost_table.layers", "no layers"));
        }
        let width = per_layer_choice_cost[0].len();
        for (k, row) in per_layer_choice_cost.iter().enumerate() {
            if row.len() != width {
                return Err(NasError::config(
                    format!("cost_table.layers[{k}]"),
                    format!("expected {width} entries, got {}", row.len()),
                ));
            }
            for &c in row {
                check_cost(&format!("cost_table.layers[{k}]"), c)?;
            }
        }
        Ok(Self {
            base_cost,
            per_layer_choice_cost,
        })
    }

    /// A table that charges nothing.
    pub fn zeros(spec: &SearchSpaceSpec) -> Self {
        Self {
            base_cost: 0.0,
            per_layer_choice_cost: vec![vec![0.0; spec.num_choices()]; spec.num_layers()],
        }
    }

    /// Same cost for every cell.
    pub fn uniform(spec: &SearchSpaceSpec, base_cost: f64, cell: f64) -> Result<Self> {
        Self::new(
            base_cost,
            vec![vec![cell; spec.num_choices()]; spec.num_layers()],
        )
    }

    /// Synthetic 20-layer, 4-choice table for the default configs.
    ///
    /// Layers form four stages of 4/4/8/4 blocks; within a layer the choices
    /// cost 3x3 < 5x5 < 7x7 < Xception. A uniformly drawn genome averages
    /// 1695 MFLOPs, so the 1800 MFLOPs bound rejects roughly 6% of the space.
    /// These figures are made up; they only give the bound something to bite.
    pub fn default_20x4() -> Self {
        const STAGES: [(usize, [f64; 4]); 4] = [
            (4, [44.0, 56.0, 68.0, 84.0]),
            (4, [48.0, 60.0, 72.0, 88.0]),
            (8, [50.0, 62.0, 74.0, 92.0]),
            (4, [54.0, 67.0, 80.0, 98.0]),
        ];
        let layers = STAGES
            .iter()
            .flat_map(|(count, row)| std::iter::repeat_n(row.to_vec(), *count))
            .collect();
        Self {
            base_cost: 320.0,
            per_layer_choice_cost: layers,
        }
    }

    pub fn base_cost(&self) -> f64 {
        self.base_cost
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.per_layer_choice_cost
    }

    pub fn num_layers(&self) -> usize {
        self.per_layer_choice_cost.len()
    }

    pub fn num_choices(&self) -> usize {
        self.per_layer_choice_cost.first().map_or(0, Vec::len)
    }

    /// Checks the table's shape against a space.
    pub fn check_space(&self, spec: &SearchSpaceSpec) -> Result<()> {
        if self.num_layers() != spec.num_layers() {
            return Err(NasError::Dimension {
                expected: spec.num_layers(),
                actual: self.num_layers(),
            });
        }
        if self.num_choices() != spec.num_choices() {
            return Err(NasError::Dimension {
                expected: spec.num_choices(),
                actual: self.num_choices(),
            });
        }
        Ok(())
    }

    /// `base + sum_k cost[k][g_k]`, in MFLOPs.
    pub fn genome_cost(&self, genome: &ArchGenome) -> Result<f64> {
        if genome.len() != self.num_layers() {
            return Err(NasError::Dimension {
                expected: self.num_layers(),
                actual: genome.len(),
            });
        }
        let mut total = self.base_cost;
        for (layer, (&choice, row)) in genome
            .choices()
            .iter()
            .zip(&self.per_layer_choice_cost)
            .enumerate()
        {
            let cell = row.get(choice).ok_or(NasError::InvalidChoice {
                layer,
                choice,
                num_choices: row.len(),
            })?;
            total += cell;
        }
        Ok(total)
    }

    /// Inclusive bound check.
    pub fn satisfies_bound(&self, genome: &ArchGenome, bound: f64) -> Result<bool> {
        Ok(self.genome_cost(genome)? <= bound)
    }
}

/// A cost table paired with an optional bound. Genomes pass when no bound is
/// set or their cost is at most the bound.
#[derive(Debug, Clone, Copy)]
pub struct CostConstraint<'a> {
    pub table: Option<&'a CostTable>,
    pub bound: Option<f64>,
}

impl<'a> CostConstraint<'a> {
    pub const NONE: CostConstraint<'static> = CostConstraint {
        table: None,
        bound: None,
    };

    /// Fails when a bound is requested without a table to measure against.
    pub fn new(table: Option<&'a CostTable>, bound: Option<f64>) -> Result<Self> {
        if let Some(b) = bound {
            if b.is_nan() || b < 0.0 {
                return Err(NasError::Parameter(format!("cost bound {b} must be >= 0")));
            }
            if table.is_none() {
                return Err(NasError::Parameter(
                    "a cost bound needs a cost table".to_string(),
                ));
            }
        }
        Ok(Self { table, bound })
    }

    pub fn admits(&self, genome: &ArchGenome) -> Result<bool> {
        match (self.table, self.bound) {
            (Some(table), Some(bound)) => table.satisfies_bound(genome, bound),
            _ => Ok(true),
        }
    }

    pub fn cost(&self, genome: &ArchGenome) -> Result<f64> {
        match self.table {
            Some(table) => table.genome_cost(genome),
            None => Ok(0.0),
        }
    }
}
