//! Random-walk Metropolis for field measures `∝ exp(−½(φ, Bφ) − Σ_x V(φ_x)) dφ`.
//!
//! One sweep proposes `φ_x + s ξ` (ξ standard normal in `ℝⁿ`) at every site in order and
//! accepts with the exact Metropolis ratio. The step `s` is adapted during burn-in toward
//! [`TARGET_ACCEPTANCE`] and frozen afterwards.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{Potential, RenormalizedModel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, Rng};

pub const TARGET_ACCEPTANCE: f64 = 0.4;

pub trait SitePotential {
    fn value(&self, phi: &[f64]) -> f64;
}

impl SitePotential for Potential {
    fn value(&self, phi: &[f64]) -> f64 {
        Potential::value(self, phi)
    }
}

/// `V ≡ 0`: the chain then targets the Gaussian with precision `B`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroPotential;

impl SitePotential for ZeroPotential {
    fn value(&self, _phi: &[f64]) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SamplerOptions {
    /// Sweeps spent adapting the step; discarded.
    pub burn_in: usize,
    /// Sweeps between recorded samples.
    pub thin: usize,
    pub initial_step: f64,
    /// Sweeps per adaptation update.
    pub adapt_interval: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            burn_in: 2000,
            thin: 1,
            initial_step: 1.0,
            adapt_interval: 50,
        }
    }
}

pub struct FieldChain<'a, P: SitePotential + ?Sized> {
    b: &'a Matrix,
    n: usize,
    potential: &'a P,
    phi: Vec<f64>,
    site_v: Vec<f64>,
    step: f64,
    rng: Rng,
    accepted: u64,
    proposed: u64,
}

impl<'a, P: SitePotential + ?Sized> FieldChain<'a, P> {
    pub fn new(b: &'a Matrix, n: usize, potential: &'a P, step: f64, seed: u64) -> Self {
        let size = b.size();
        let phi = vec![0.0; size * n];
        let site_v = (0..size).map(|_| potential.value(&vec![0.0; n])).collect();
        FieldChain {
            b,
            n,
            potential,
            phi,
            site_v,
            step,
            rng: rng::from_seed(seed),
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.phi
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn sweep(&mut self) {
        let n = self.n;
        let size = self.b.size();
        let mut proposal = vec![0.0; n];
        for x in 0..size {
            let row = self.b.row(x);
            let bxx = row[x];
            let mut delta = 0.0;
            let mut new_sq = 0.0;
            let mut old_sq = 0.0;
            for a in 0..n {
                let old = self.phi[x * n + a];
                let z: f64 = StandardNormal.sample(&mut self.rng);
                let new = old + self.step * z;
                proposal[a] = new;
                let field: f64 = (0..size)
                    .filter(|&y| y != x)
                    .map(|y| row[y] * self.phi[y * n + a])
                    .sum();
                delta += (new - old) * field;
                new_sq += new * new;
                old_sq += old * old;
            }
            let v_new = self.potential.value(&proposal);
            delta += 0.5 * bxx * (new_sq - old_sq) + v_new - self.site_v[x];
            self.proposed += 1;
            let u: f64 = self.rng.random();
            if delta <= 0.0 || u < (-delta).exp() {
                self.phi[x * n..(x + 1) * n].copy_from_slice(&proposal);
                self.site_v[x] = v_new;
                self.accepted += 1;
            }
        }
    }

    fn take_acceptance(&mut self) -> f64 {
        let r = if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        };
        self.accepted = 0;
        self.proposed = 0;
        r
    }

    /// Burn-in with step adaptation; leaves the acceptance counters reset.
    pub fn adapt(&mut self, options: &SamplerOptions) {
        let interval = options.adapt_interval.max(1);
        let mut done = 0;
        let mut updates: f64 = 0.0;
        while done < options.burn_in {
            let k = interval.min(options.burn_in - done);
            for _ in 0..k {
                self.sweep();
            }
            done += k;
            let rate = self.take_acceptance();
            // Robbins–Monro gain, so the frozen step does not carry the last interval's noise.
            updates += 1.0;
            self.step *= (2.0 * (rate - TARGET_ACCEPTANCE) / updates.sqrt()).exp();
        }
        self.take_acceptance();
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleSet {
    /// Each sample flattened site-major, `N·n` entries.
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    pub step: f64,
    /// Sweeps after burn-in.
    pub chain_length: usize,
    pub burn_in: usize,
    pub seed: u64,
}

/// Runs the chain and hands each recorded state to `visit`. Returns diagnostics with an
/// empty `samples` vector.
pub fn run_field_chain<P: SitePotential + ?Sized>(
    b: &Matrix,
    n: usize,
    potential: &P,
    count: usize,
    seed: u64,
    options: &SamplerOptions,
    mut visit: impl FnMut(&[f64]),
) -> Result<SampleSet> {
    if n == 0 || b.size() == 0 {
        return Err(Error::invalid("field sampler needs N ≥ 1 and n ≥ 1"));
    }
    if !(options.initial_step > 0.0) {
        return Err(Error::invalid("initial step must be positive"));
    }
    let mut chain = FieldChain::new(b, n, potential, options.initial_step, seed);
    chain.adapt(options);
    let thin = options.thin.max(1);
    for _ in 0..count {
        for _ in 0..thin {
            chain.sweep();
        }
        visit(chain.state());
    }
    Ok(SampleSet {
        samples: Vec::new(),
        acceptance_rate: chain.take_acceptance(),
        step: chain.step(),
        chain_length: count * thin,
        burn_in: options.burn_in,
        seed,
    })
}

pub fn sample_field_measure<P: SitePotential + ?Sized>(
    b: &Matrix,
    n: usize,
    potential: &P,
    count: usize,
    seed: u64,
    options: &SamplerOptions,
) -> Result<SampleSet> {
    let mut samples = Vec::with_capacity(count);
    let mut set = run_field_chain(b, n, potential, count, seed, options, |s| {
        samples.push(s.to_vec())
    })?;
    set.samples = samples;
    Ok(set)
}

/// Samples `ν_r` of a renormalised model carrying its potential. Requires `λ = c − c²/n > 0`.
pub fn sample_renormalized(
    model: &RenormalizedModel,
    count: usize,
    seed: u64,
) -> Result<SampleSet> {
    if !(model.lambda_be > 0.0) {
        return Err(Error::invalid(format!(
            "renormalised measure is not uniformly convex: λ = {}",
            model.lambda_be
        )));
    }
    let potential = model
        .potential
        .as_ref()
        .ok_or_else(|| Error::invalid("renormalised model has no potential attached"))?;
    sample_field_measure(
        &model.b,
        model.spin_dimension,
        potential,
        count,
        seed,
        &SamplerOptions::default(),
    )
}
