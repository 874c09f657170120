//! GOE sampling, spectral-edge statistics, and the SK certification sweep.
//!
//! Normalization: off-diagonal entries are `N(0, 1/N)` and diagonal entries `N(0, 2/N)`,
//! so the spectrum fills `[−2, 2]` and the edge span `λ⁺ − λ⁻` concentrates at 4. The
//! SK coupling `M = βH` therefore passes the spectral condition (span `< 1`) with
//! probability tending to one exactly when `β < 1/4`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{certify_from_range, Inequality};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng;

/// Recorded in sweep output: the diagonal convention is ours, not a model input.
pub const DIAGONAL_CONVENTION: &str = "diagonal variance 2/N, off-diagonal variance 1/N";

#[derive(Clone, Debug)]
pub struct GoeSample {
    size: usize,
    seed: u64,
    h: Matrix,
    edge_span: f64,
    lambda_min: f64,
    lambda_max: f64,
}

impl GoeSample {
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn matrix(&self) -> &Matrix {
        &self.h
    }
    pub fn edge_span(&self) -> f64 {
        self.edge_span
    }
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

/// Draws the matrix only, without diagonalizing it.
pub fn goe_matrix(size: usize, seed: u64) -> Result<Matrix> {
    if size < 2 {
        return Err(Error::InvalidDimensions(format!(
            "GOE needs N ≥ 2, got {size}"
        )));
    }
    let mut rng = rng::from_seed(seed);
    let sd = (1.0 / size as f64).sqrt();
    let mut h = Matrix::zeros(size);
    for i in 0..size {
        for j in i..size {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = if i == j {
                z * sd * std::f64::consts::SQRT_2
            } else {
                z * sd
            };
            h[(i, j)] = x;
            h[(j, i)] = x;
        }
    }
    Ok(h)
}

pub fn sample_goe(size: usize, seed: u64) -> Result<GoeSample> {
    let h = goe_matrix(size, seed)?;
    let eig = linalg::symmetric_eigen(&h, false)?;
    let lambda_min = eig.values[0];
    let lambda_max = eig.values[size - 1];
    Ok(GoeSample {
        size,
        seed,
        h,
        edge_span: lambda_max - lambda_min,
        lambda_min,
        lambda_max,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bins = if hi > lo { bins.max(1) } else { 1 };
        let width = if hi > lo {
            (hi - lo) / bins as f64
        } else {
            1.0
        };
        let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower,upper,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.edges[k], self.edges[k + 1], c));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EdgeStatistics {
    pub size: usize,
    pub count: usize,
    pub mean_span: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for a single sample).
    pub std_span: f64,
    pub histogram: Histogram,
}

pub const HISTOGRAM_BINS: usize = 20;

pub fn edge_statistics(samples: &[GoeSample]) -> Result<EdgeStatistics> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("edge statistics need at least one sample"))?;
    if samples.iter().any(|s| s.size != first.size) {
        return Err(Error::invalid("edge statistics need samples of equal N"));
    }
    let spans: Vec<f64> = samples.iter().map(|s| s.edge_span).collect();
    Ok(span_statistics(first.size, &spans))
}

fn span_statistics(size: usize, spans: &[f64]) -> EdgeStatistics {
    let k = spans.len() as f64;
    let mean = spans.iter().sum::<f64>() / k;
    let std = if spans.len() > 1 {
        (spans.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    EdgeStatistics {
        size,
        count: spans.len(),
        mean_span: mean,
        std_span: std,
        histogram: Histogram::new(spans, HISTOGRAM_BINS),
    }
}

/// Seed of GOE sample `index` at size `size` under a sweep root seed. Every β cell at a
/// given size reuses the same matrices.
pub fn sample_seed(root: u64, size: usize, index: usize) -> u64 {
    rng::derive_seed(root, "goe", ((size as u64) << 32) | index as u64)
}

/// Draws `count` samples of size `size` under `root`, in parallel on the current rayon pool.
pub fn sample_batch(size: usize, count: usize, root: u64) -> Result<Vec<GoeSample>> {
    (0..count)
        .into_par_iter()
        .map(|k| sample_goe(size, sample_seed(root, size, k)))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepCell {
    pub beta: f64,
    pub size: usize,
    pub certified_fraction: f64,
    pub mean_edge_span: f64,
    pub sample_count: usize,
    /// Over certified samples only; `None` if none certified.
    pub mean_certified_constant: Option<f64>,
    pub max_certified_constant: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub beta_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    pub samples_per_cell: usize,
    pub seed: u64,
    pub gamma: f64,
    pub diagonal_convention: String,
    pub per_cell: Vec<SweepCell>,
    pub edge_statistics: Vec<EdgeStatistics>,
}

impl SweepResult {
    pub fn cell(&self, beta: f64, size: usize) -> Option<&SweepCell> {
        self.per_cell
            .iter()
            .find(|c| c.beta == beta && c.size == size)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "beta,size,certified_fraction,mean_edge_span,sample_count,mean_certified_constant\n",
        );
        for c in &self.per_cell {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.beta,
                c.size,
                c.certified_fraction,
                c.mean_edge_span,
                c.sample_count,
                c.mean_certified_constant
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            ));
        }
        out
    }
}

/// For every `(β, N)` draws GOE samples, forms `M = βH` and certifies with `n = 1`.
///
/// The spectrum of `βH` is `β` times that of `H`, so each matrix is diagonalized once per
/// size and reused across the β grid.
pub fn sk_certification_sweep(
    beta_grid: &[f64],
    sizes: &[usize],
    samples_per_cell: usize,
    seed: u64,
    gamma: f64,
) -> Result<SweepResult> {
    if beta_grid.is_empty() || sizes.is_empty() {
        return Err(Error::invalid("sweep grids must be nonempty"));
    }
    if samples_per_cell == 0 {
        return Err(Error::invalid("samples per cell must be ≥ 1"));
    }
    if let Some(b) = beta_grid.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::invalid(format!("β must be finite and ≥ 0, got {b}")));
    }
    let mut per_cell = Vec::new();
    let mut edges = Vec::new();
    for &size in sizes {
        let samples = sample_batch(size, samples_per_cell, seed)?;
        let stats = edge_statistics(&samples)?;
        for &beta in beta_grid {
            let mut certified = 0usize;
            let mut constants = Vec::new();
            for s in &samples {
                let cert = certify_from_range(
                    beta * s.lambda_min,
                    beta * s.lambda_max,
                    1,
                    gamma,
                    Inequality::LogSobolev,
                )?;
                if let Some(c) = cert.certified_constant {
                    certified += 1;
                    constants.push(c);
                }
            }
            per_cell.push(SweepCell {
                beta,
                size,
                certified_fraction: certified as f64 / samples.len() as f64,
                mean_edge_span: beta * stats.mean_span,
                sample_count: samples.len(),
                mean_certified_constant: (!constants.is_empty())
                    .then(|| constants.iter().sum::<f64>() / constants.len() as f64),
                max_certified_constant: constants.iter().copied().reduce(f64::max),
            });
        }
        edges.push(stats);
    }
    Ok(SweepResult {
        beta_grid: beta_grid.to_vec(),
        sizes: sizes.to_vec(),
        samples_per_cell,
        seed,
        gamma,
        diagonal_convention: DIAGONAL_CONVENTION.to_string(),
        per_cell,
        edge_statistics: edges,
    })
}
