//! Integrated autocorrelation times and the relaxation study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SpinChain, SpinConfiguration};
use crate::coupling::{lattice, mean_field, CouplingKind, CouplingMatrix};
use crate::error::{Error, Result};
use crate::goe::goe_matrix;
use crate::rng::{self, derive_seed};

/// Self-consistent window: the smallest `W` with `W ≥ SOKAL_WINDOW · τ(W)`.
pub const SOKAL_WINDOW: f64 = 5.0;
/// Traces shorter than this multiple of `τ` are rejected.
pub const MIN_LENGTH_FACTOR: f64 = 100.0;
/// Batches used for the standard errors.
pub const BATCHES: usize = 10;
/// Burn-in length as a multiple of the pilot estimate of `τ`.
pub const BURN_IN_FACTOR: f64 = 20.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DynamicsTrace {
    pub observable_name: String,
    pub samples: Vec<f64>,
    pub sweep_count: usize,
    pub seed: u64,
    pub model: String,
}

impl DynamicsTrace {
    pub fn new(observable_name: &str, samples: Vec<f64>, seed: u64, model: &str) -> Result<Self> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("trace value {i} is not finite")));
        }
        Ok(DynamicsTrace {
            observable_name: observable_name.to_string(),
            sweep_count: samples.len(),
            samples,
            seed,
            model: model.to_string(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("sweep,{}\n", self.observable_name);
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RelaxationEstimate {
    pub integrated_autocorr_time: f64,
    /// Spread of `τ` over [`BATCHES`] batches, each windowed at `window`.
    pub standard_error: f64,
    pub window: usize,
    pub mean: f64,
    /// Batch-means error of the trace mean.
    pub mean_standard_error: f64,
    pub length: usize,
}

/// `τ = 1 + 2 Σ_{t=1}^{W} ρ(t)` with fixed window `W`.
fn tau_with_window(x: &[f64], window: usize) -> Option<f64> {
    let len = x.len();
    let mean = x.iter().sum::<f64>() / len as f64;
    let c0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64;
    if !(c0 > 0.0) {
        return None;
    }
    let mut tau = 1.0;
    for t in 1..=window.min(len - 1) {
        let ct = (0..len - t)
            .map(|i| (x[i] - mean) * (x[i + t] - mean))
            .sum::<f64>()
            / len as f64;
        tau += 2.0 * ct / c0;
    }
    Some(tau)
}

fn spread(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

pub fn estimate_relaxation(trace: &DynamicsTrace) -> Result<RelaxationEstimate> {
    let x = &trace.samples;
    let len = x.len();
    if len < 2 {
        return Err(Error::TraceTooShort {
            len,
            required: MIN_LENGTH_FACTOR as usize,
            tau: f64::NAN,
        });
    }
    let mean = x.iter().sum::<f64>() / len as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = centred.iter().map(|v| v * v).sum::<f64>() / len as f64;
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(c0 > (4.0 * f64::EPSILON * scale).powi(2)) {
        return Err(Error::ZeroVariance);
    }

    let mut tau = 1.0;
    let mut window = 0;
    loop {
        window += 1;
        if window >= len / 2 {
            return Err(Error::TraceTooShort {
                len,
                required: (len as f64 * 2.0).ceil() as usize,
                tau,
            });
        }
        let ct = centred[..len - window]
            .iter()
            .zip(&centred[window..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / len as f64;
        tau += 2.0 * ct / c0;
        if window as f64 >= SOKAL_WINDOW * tau {
            break;
        }
    }
    let required = (MIN_LENGTH_FACTOR * tau).ceil() as usize;
    if len < required {
        return Err(Error::TraceTooShort { len, required, tau });
    }

    let batch = len / BATCHES;
    let mut batch_taus = Vec::with_capacity(BATCHES);
    let mut batch_means = Vec::with_capacity(BATCHES);
    for k in 0..BATCHES {
        let slice = &x[k * batch..(k + 1) * batch];
        batch_means.push(slice.iter().sum::<f64>() / batch as f64);
        // A batch can be constant even when the whole trace is not; it then carries no
        // autocorrelation information.
        if let Some(t) = tau_with_window(slice, window) {
            batch_taus.push(t);
        }
    }
    let standard_error = if batch_taus.len() >= 2 {
        spread(&batch_taus)
    } else {
        f64::NAN
    };
    Ok(RelaxationEstimate {
        integrated_autocorr_time: tau,
        standard_error,
        window,
        mean,
        mean_standard_error: spread(&batch_means),
        length: len,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimulationOptions {
    /// Recorded sweeps after burn-in.
    pub sweeps: usize,
    /// Sweeps of the pilot run that sets the burn-in (and tunes the sphere step).
    pub pilot_sweeps: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            sweeps: 20_000,
            pilot_sweeps: 2_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Simulation {
    pub magnetization: DynamicsTrace,
    pub energy: DynamicsTrace,
    pub pilot_tau: f64,
    pub burn_in: usize,
    pub acceptance_rate: f64,
    pub proposal_step: Option<f64>,
}

fn pilot_tau(samples: Vec<f64>) -> Option<f64> {
    let trace = DynamicsTrace::new("pilot", samples, 0, "").ok()?;
    match estimate_relaxation(&trace) {
        Ok(r) => Some(r.integrated_autocorr_time),
        Err(Error::TraceTooShort { tau, .. }) if tau.is_finite() => Some(tau),
        Err(_) => None,
    }
}

/// Pilot run, burn-in of `BURN_IN_FACTOR · τ̂`, then `sweeps` recorded sweeps of
/// magnetization and energy per site. Random start drawn from `seed`.
pub fn simulate(
    m: &CouplingMatrix,
    spin_dimension: usize,
    options: &SimulationOptions,
    seed: u64,
    model: &str,
) -> Result<Simulation> {
    if spin_dimension == 0 {
        return Err(Error::invalid("spin dimension must be at least 1"));
    }
    let mut rng = rng::stream(seed, "dynamics-start", 0);
    let start = SpinConfiguration::random(m.size(), spin_dimension, &mut rng);
    let mut chain = SpinChain::new(m, start, rng::stream(seed, "dynamics-chain", 0))?;

    let mut pm = Vec::with_capacity(options.pilot_sweeps);
    let mut pe = Vec::with_capacity(options.pilot_sweeps);
    if spin_dimension > 1 {
        // Tune the proposal on the first half, measure on the second.
        chain.burn_in(options.pilot_sweeps / 2);
    }
    let measured = if spin_dimension > 1 {
        options.pilot_sweeps - options.pilot_sweeps / 2
    } else {
        options.pilot_sweeps
    };
    for _ in 0..measured {
        chain.sweep();
        pm.push(chain.state().magnetization());
        pe.push(chain.energy_per_site());
    }
    let tau_hat = [pilot_tau(pm), pilot_tau(pe)]
        .into_iter()
        .flatten()
        .fold(1.0f64, f64::max);
    let burn_in = (BURN_IN_FACTOR * tau_hat).ceil() as usize;
    for _ in 0..burn_in {
        chain.sweep();
    }
    chain.acceptance_rate();

    let mut mag = Vec::with_capacity(options.sweeps);
    let mut energy = Vec::with_capacity(options.sweeps);
    for _ in 0..options.sweeps {
        chain.sweep();
        mag.push(chain.state().magnetization());
        energy.push(chain.energy_per_site());
    }
    Ok(Simulation {
        magnetization: DynamicsTrace::new("magnetization", mag, seed, model)?,
        energy: DynamicsTrace::new("energy", energy, seed, model)?,
        pilot_tau: tau_hat,
        burn_in,
        acceptance_rate: chain.acceptance_rate(),
        proposal_step: (spin_dimension > 1).then(|| chain.step()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StudyFamily {
    /// `β H` with `H` drawn from the GOE per `(N, cell seed)`.
    Sk,
    /// Periodic chain with nearest-neighbour coupling `−β` (ferromagnetic).
    Ferromagnet1d,
    /// Complete graph with coupling `−β/N`.
    MeanField,
}

impl StudyFamily {
    pub fn coupling(&self, size: usize, beta: f64, seed: u64) -> Result<CouplingMatrix> {
        match self {
            StudyFamily::Sk => {
                let h = goe_matrix(size, derive_seed(seed, "study-goe", size as u64))?;
                CouplingMatrix::new(h.scaled(beta), CouplingKind::SkGoe, Some(seed))
            }
            StudyFamily::Ferromagnet1d => lattice(&[size], -beta),
            StudyFamily::MeanField => mean_field(size, -beta / size as f64),
        }
    }

    fn label(&self) -> &'static str {
        match self {
            StudyFamily::Sk => "sk",
            StudyFamily::Ferromagnet1d => "ferromagnet-1d",
            StudyFamily::MeanField => "mean-field",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudySpec {
    pub family: StudyFamily,
    pub sizes: Vec<usize>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub spin_dimension: usize,
    #[serde(default)]
    pub options: SimulationOptions,
    /// Mixed into every cell seed, so one study can be rerun on fresh randomness.
    #[serde(default)]
    pub root_seed: u64,
    /// Keep the magnetization and energy traces on each row (never serialised).
    #[serde(default, skip_serializing)]
    pub keep_traces: bool,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StudyRow {
    pub size: usize,
    pub beta: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub tau_magnetization: Option<f64>,
    pub se_magnetization: Option<f64>,
    pub tau_energy: Option<f64>,
    pub se_energy: Option<f64>,
    pub acceptance_rate: f64,
    /// Per-observable failures, e.g. a trace too short for its `τ`.
    pub errors: Vec<String>,
    #[serde(skip)]
    pub traces: Option<[DynamicsTrace; 2]>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StudyTable {
    pub spec: StudySpec,
    pub rows: Vec<StudyRow>,
}

impl StudyTable {
    pub fn row(&self, size: usize, beta: f64, seed: u64) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.size == size && r.beta == beta && r.seed == seed)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(
            "size,beta,seed,burn_in,tau_magnetization,se_magnetization,tau_energy,se_energy,acceptance_rate,errors\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},\"{}\"\n",
                r.size,
                r.beta,
                r.seed,
                r.burn_in,
                opt(r.tau_magnetization),
                opt(r.se_magnetization),
                opt(r.tau_energy),
                opt(r.se_energy),
                r.acceptance_rate,
                r.errors.join("; ").replace('"', "'"),
            ));
        }
        out
    }
}

fn run_cell(spec: &StudySpec, size: usize, beta: f64, seed: u64) -> Result<StudyRow> {
    let cell_root = derive_seed(spec.root_seed, "study-cell", seed);
    let m = spec.family.coupling(size, beta, cell_root)?;
    let chain_seed = derive_seed(
        derive_seed(cell_root, "study-chain", size as u64),
        "beta",
        beta.to_bits(),
    );
    let model = format!("{} N={size} beta={beta}", spec.family.label());
    let sim = simulate(&m, spec.spin_dimension, &spec.options, chain_seed, &model)?;
    let mut errors = Vec::new();
    let mut estimate = |trace: &DynamicsTrace| match estimate_relaxation(trace) {
        Ok(r) => (Some(r.integrated_autocorr_time), Some(r.standard_error)),
        Err(e) => {
            errors.push(format!("{}: {e}", trace.observable_name));
            (None, None)
        }
    };
    let (tau_m, se_m) = estimate(&sim.magnetization);
    let (tau_e, se_e) = estimate(&sim.energy);
    Ok(StudyRow {
        size,
        beta,
        seed,
        burn_in: sim.burn_in,
        tau_magnetization: tau_m,
        se_magnetization: se_m,
        tau_energy: tau_e,
        se_energy: se_e,
        acceptance_rate: sim.acceptance_rate,
        errors,
        traces: spec.keep_traces.then_some([sim.magnetization, sim.energy]),
    })
}

/// Runs every `(N, β, seed)` cell in parallel; rows come back sorted by that key, so the
/// table does not depend on the thread count.
pub fn relaxation_study(spec: &StudySpec) -> Result<StudyTable> {
    if spec.sizes.is_empty() || spec.betas.is_empty() || spec.seeds.is_empty() {
        return Err(Error::invalid(
            "study needs at least one size, beta and seed",
        ));
    }
    if let Some(b) = spec.betas.iter().find(|b| !b.is_finite() || **b < 0.0) {
        return Err(Error::invalid(format!(
            "beta must be finite and non-negative, got {b}"
        )));
    }
    let mut cells = Vec::new();
    for &size in &spec.sizes {
        for &beta in &spec.betas {
            for &seed in &spec.seeds {
                cells.push((size, beta, seed));
            }
        }
    }
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    cells.dedup();
    let rows = cells
        .par_iter()
        .map(|&(size, beta, seed)| run_cell(spec, size, beta, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyTable {
        spec: spec.clone(),
        rows,
    })
}
