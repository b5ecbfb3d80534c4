//! Maximum mean discrepancy between two samples.
//!
//! With kernel `k`, sample `xs` of size `n` and `ys` of size `m`:
//!
//! ```text
//! biased      = Sxx / n^2       + Syy / m^2       - 2 Sxy / (n m)
//! u-statistic = Sxx' / (n(n-1)) + Syy' / (m(m-1)) - 2 Sxy / (n m)
//! ```
//!
//! where `Sxx` sums `k(x_i, x_j)` over all pairs and `Sxx'` only over
//! `i != j`. The commonly printed "unbiased" estimator keeps the diagonal and
//! the `1/n^2` normalization, which makes it equal to the biased form;
//! [`UnbiasedForm::AsPrinted`] reproduces that and
//! [`UnbiasedForm::UStatistic`] gives the genuinely unbiased estimator.

use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};

/// A resolved kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `<x, y>`
    Linear,
    /// `exp(-|x - y|^2 / (2 bandwidth^2))`
    Rbf { bandwidth: f64 },
}

impl Kernel {
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Kernel::Rbf { bandwidth })
    }

    /// Kernel value; both slices must have equal length.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
            Kernel::Rbf { bandwidth } => {
                (-squared_distance(x, y) / (2.0 * bandwidth * bandwidth)).exp()
            }
        }
    }
}

/// Kernel choice before looking at data. An RBF kernel without a bandwidth
/// uses the median heuristic over the pooled samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Rbf {
        #[serde(default)]
        bandwidth: Option<f64>,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Rbf { bandwidth: None }
    }
}

impl KernelSpec {
    pub fn resolve<P: AsRef<[f64]>>(&self, xs: &[P], ys: &[P]) -> Result<Kernel> {
        match *self {
            KernelSpec::Linear => Ok(Kernel::Linear),
            KernelSpec::Rbf {
                bandwidth: Some(bw),
            } => Kernel::rbf(bw),
            KernelSpec::Rbf { bandwidth: None } => {
                let pooled: Vec<&[f64]> =
                    xs.iter().chain(ys).map(|p| p.as_ref()).collect();
                Kernel::rbf(median_heuristic_bandwidth(&pooled)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnbiasedForm {
    /// Diagonal terms kept, `1/n^2` normalization.
    #[default]
    AsPrinted,
    /// Diagonal terms dropped, `1/(n(n-1))` normalization. Can be negative.
    UStatistic,
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if bandwidth > 0.0 && bandwidth.is_finite() {
        Ok(())
    } else {
        Err(NasError::Parameter(format!(
            "bandwidth {bandwidth} must be positive and finite"
        )))
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rbf_kernel(x: &[f64], y: &[f64], bandwidth: f64) -> Result<f64> {
    check_bandwidth(bandwidth)?;
    if x.len() != y.len() {
        return Err(NasError::Dimension {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(Kernel::Rbf { bandwidth }.eval(x, y))
}

/// `sqrt(median(|x_i - x_j|^2 for i < j) / 2)`; an even count of pairs takes
/// the mean of the two middle values.
pub fn median_heuristic_bandwidth<P: AsRef<[f64]>>(points: &[P]) -> Result<f64> {
    if points.len() < 2 {
        return Err(NasError::Input(format!(
            "median heuristic needs at least 2 points, got {}",
            points.len()
        )));
    }
    common_dim(points)?;
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            dists.push(squared_distance(a.as_ref(), b.as_ref()));
        }
    }
    if dists.iter().all(|&d| d == 0.0) {
        return Err(NasError::DegenerateData("all points are identical".into()));
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median == 0.0 {
        return Err(NasError::DegenerateData(
            "more than half of the point pairs coincide".into(),
        ));
    }
    Ok((median / 2.0).sqrt())
}

fn common_dim<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    let dim = points[0].as_ref().len();
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(NasError::Dimension {
                expected: dim,
                actual: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(NasError::Input("non-finite coordinate".into()));
        }
    }
    Ok(dim)
}

fn check_sets<P: AsRef<[f64]>>(xs: &[P], ys: &[P], min_len: usize) -> Result<()> {
    if xs.len() < min_len || ys.len() < min_len {
        return Err(NasError::Input(format!(
            "each sample needs at least {min_len} points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let dx = common_dim(xs)?;
    let dy = common_dim(ys)?;
    if dx != dy {
        return Err(NasError::Dimension {
            expected: dx,
            actual: dy,
        });
    }
    Ok(())
}

/// Kernel sum within one sample: (all pairs including diagonal, diagonal).
fn within_sums<P: AsRef<[f64]>>(xs: &[P], kernel: &Kernel) -> (f64, f64) {
    let mut off = 0.0;
    let mut diag = 0.0;
    for (i, a) in xs.iter().enumerate() {
        let a = a.as_ref();
        diag += kernel.eval(a, a);
        for b in &xs[i + 1..] {
            off += kernel.eval(a, b.as_ref());
        }
    }
    (2.0 * off + diag, diag)
}

fn cross_sum<P: AsRef<[f64]>>(xs: &[P], ys: &[P], kernel: &Kernel) -> f64 {
    xs.iter()
        .map(|x| ys.iter().map(|y| kernel.eval(x.as_ref(), y.as_ref())).sum::<f64>())
        .sum()
}

/// Squared RKHS distance between the two empirical mean embeddings.
pub fn mmd_biased<P: AsRef<[f64]>>(xs: &[P], ys: &[P], kernel: &Kernel) -> Result<f64> {
    check_sets(xs, ys, 1)?;
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (sxx, _) = within_sums(xs, kernel);
    let (syy, _) = within_sums(ys, kernel);
    let sxy = cross_sum(xs, ys, kernel);
    let value = sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m);
    // a PSD kernel gives a non-negative value; anything below is rounding
    Ok(value.max(0.0))
}

pub fn mmd_unbiased<P: AsRef<[f64]>>(
    xs: &[P],
    ys: &[P],
    kernel: &Kernel,
    form: UnbiasedForm,
) -> Result<f64> {
    check_sets(xs, ys, 2)?;
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (sxx, dx) = within_sums(xs, kernel);
    let (syy, dy) = within_sums(ys, kernel);
    let sxy = cross_sum(xs, ys, kernel);
    Ok(match form {
        UnbiasedForm::AsPrinted => sxx / (n * n) + syy / (m * m) - 2.0 * sxy / (n * m),
        UnbiasedForm::UStatistic => {
            (sxx - dx) / (n * (n - 1.0)) + (syy - dy) / (m * (m - 1.0)) - 2.0 * sxy / (n * m)
        }
    })
}
