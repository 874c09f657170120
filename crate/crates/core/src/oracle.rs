//! Brute-force ground truth for small Ising systems (`n = 1`).
//!
//! States are indexed by bit patterns: bit `x` set means `σ_x = −1`, so state 0 is all up and
//! `σ^x` (spin `x` flipped) is `s ^ (1 << x)`.
//!
//! The Dirichlet form is `D(f) = Σ_x ν(|f(σ) − f(σ^x)|²)`. Each unordered pair `{σ, σ^x}`
//! then carries weight `ν(σ) + ν(σ^x)`, which gives the symmetric operator `L` with
//! `L_σσ = Σ_x (ν(σ) + ν(σ^x))` and `L_{σ,σ^x} = −(ν(σ) + ν(σ^x))`.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::coupling::{spectrum, CouplingMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::renorm::{positive_shift, run_field_chain, split_covariance, SamplerOptions};
use crate::rng::{self, derive_seed};
use crate::singlespin::SingleSpinModel;

pub const MAX_ENUMERATION_SITES: usize = 16;
/// Dense `2^N × 2^N` operators (gap, LSI search, transition matrices) stop here.
pub const MAX_KERNEL_SITES: usize = 10;
/// Smallest state probability accepted by the dense operators.
pub const MIN_PROBABILITY: f64 = 1e-280;

/// `σ_x` in state `s`.
pub fn ising_spin(state: usize, x: usize) -> f64 {
    if state >> x & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExactChain {
    size: usize,
    state_probabilities: Vec<f64>,
    log_partition: f64,
}

impl ExactChain {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn states(&self) -> usize {
        self.state_probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.state_probabilities
    }

    /// `log Σ_σ exp(−½(σ, Mσ))`, uniform reference measure not normalised.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.state_probabilities
            .iter()
            .enumerate()
            .map(|(s, p)| p * f(s))
            .sum()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean = self.expectation(|s| f[s]);
        self.expectation(|s| (f[s] - mean).powi(2))
    }

    /// `Σ_x ν(|f(σ) − f(σ^x)|²)`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        let mut d = 0.0;
        for (s, p) in self.state_probabilities.iter().enumerate() {
            for x in 0..self.size {
                let diff = f[s] - f[s ^ (1 << x)];
                d += p * diff * diff;
            }
        }
        d
    }

    /// `ent_ν(f²) = ν(f² log f²) − ν(f²) log ν(f²)`.
    pub fn entropy_of_square(&self, f: &[f64]) -> f64 {
        let g: Vec<f64> = f.iter().map(|v| v.abs().ln()).collect();
        entropy_from_log(&self.state_probabilities, &g)
    }

    fn pair_weight(&self, s: usize, x: usize) -> f64 {
        self.state_probabilities[s] + self.state_probabilities[s ^ (1 << x)]
    }

    pub fn dirichlet_form_matrix(&self) -> Result<Matrix> {
        if self.size > MAX_KERNEL_SITES {
            return Err(Error::SystemTooLarge {
                n: self.size,
                max: MAX_KERNEL_SITES,
            });
        }
        let mut l = Matrix::zeros(self.states());
        for s in 0..self.states() {
            for x in 0..self.size {
                let w = self.pair_weight(s, x);
                l[(s, s)] += w;
                l[(s, s ^ (1 << x))] -= w;
            }
        }
        Ok(l)
    }

    fn check_probabilities(&self) -> Result<()> {
        match self
            .state_probabilities
            .iter()
            .position(|&p| !(p >= MIN_PROBABILITY))
        {
            Some(state) => Err(Error::ProbabilityUnderflow { state }),
            None => Ok(()),
        }
    }
}

pub fn enumerate_gibbs(m: &CouplingMatrix) -> Result<ExactChain> {
    let size = m.size();
    if size > MAX_ENUMERATION_SITES {
        return Err(Error::SystemTooLarge {
            n: size,
            max: MAX_ENUMERATION_SITES,
        });
    }
    let states = 1usize << size;
    let a = m.entries();
    let log_w: Vec<f64> = (0..states)
        .map(|s| {
            let sigma: Vec<f64> = (0..size).map(|x| ising_spin(s, x)).collect();
            -0.5 * a.quadratic_form(&sigma)
        })
        .collect();
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_w.iter().map(|l| (l - top).exp()).sum();
    let log_partition = top + sum.ln();
    Ok(ExactChain {
        size,
        state_probabilities: log_w.iter().map(|l| (l - log_partition).exp()).collect(),
        log_partition,
    })
}

/// Smallest nonzero eigenvalue of `D f = λ diag(ν) f`, i.e. `min D(f)/var_ν(f)` over
/// non-constant `f`.
pub fn exact_spectral_gap(chain: &ExactChain) -> Result<f64> {
    chain.check_probabilities()?;
    let l = chain.dirichlet_form_matrix()?;
    let states = chain.states();
    let root: Vec<f64> = chain.state_probabilities.iter().map(|p| p.sqrt()).collect();
    // S = ν^{−1/2} L ν^{−1/2} has kernel spanned by √ν. Adding α √ν √νᵀ with α above the
    // Gershgorin bound of S moves that eigenvalue past the rest of the spectrum.
    let mut s = Matrix::from_fn(states, |i, j| l[(i, j)] / (root[i] * root[j]));
    let alpha = 1.0 + 2.0 * (0..states).map(|i| s[(i, i)]).fold(0.0, f64::max);
    for i in 0..states {
        for j in 0..states {
            s[(i, j)] += alpha * root[i] * root[j];
        }
    }
    let eig = linalg::symmetric_eigen(&s, false)?;
    Ok(eig.values[0])
}

/// `(1 + u) log(1 + u) − u`, accurate for small `u`.
fn entropy_kernel(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        u2 / 2.0 - u2 * u / 6.0 + u2 * u2 / 12.0 - u2 * u2 * u / 20.0
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

fn log_sum_exp_weighted(p: &[f64], a: &[f64]) -> f64 {
    let top = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + p
        .iter()
        .zip(a)
        .map(|(p, v)| p * (v - top).exp())
        .sum::<f64>()
        .ln()
}

/// `ent_ν(e^{2g})` without cancellation: after normalising `ν(f²) = 1`, each term
/// `ν(σ) φ(f(σ)² − 1)` is non-negative.
fn entropy_from_log(p: &[f64], g: &[f64]) -> f64 {
    let two_g: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
    let norm = log_sum_exp_weighted(p, &two_g);
    let scale = norm.exp();
    p.iter()
        .zip(&two_g)
        .map(|(p, t)| p * entropy_kernel((t - norm).exp_m1()))
        .sum::<f64>()
        * scale
}

/// Value and gradient (in `g`) of `J = 2 D(e^g) / ent_ν(e^{2g})`; `None` once `f` is numerically
/// constant.
fn lsi_objective(chain: &ExactChain, g: &[f64]) -> Option<(f64, Vec<f64>)> {
    let p = &chain.state_probabilities;
    let two_g: Vec<f64> = g.iter().map(|v| 2.0 * v).collect();
    let half_norm = 0.5 * log_sum_exp_weighted(p, &two_g);
    let f: Vec<f64> = g.iter().map(|v| (v - half_norm).exp()).collect();
    let mut ent = 0.0;
    let mut d_ent = vec![0.0; g.len()];
    for s in 0..g.len() {
        let lg = 2.0 * (g[s] - half_norm);
        ent += p[s] * entropy_kernel(lg.exp_m1());
        d_ent[s] = 2.0 * p[s] * f[s] * lg;
    }
    if !(ent > 1e-24) {
        return None;
    }
    let mut d = 0.0;
    let mut d_d = vec![0.0; g.len()];
    for s in 0..g.len() {
        for x in 0..chain.size {
            let t = s ^ (1 << x);
            let diff = -f[s] * (g[t] - g[s]).exp_m1();
            d += p[s] * diff * diff;
            d_d[s] += 2.0 * chain.pair_weight(s, x) * diff;
        }
    }
    let j = 2.0 * d / ent;
    let grad = (0..g.len())
        .map(|s| f[s] * 2.0 * (d_d[s] * ent - d * d_ent[s]) / (ent * ent))
        .collect();
    Some((j, grad))
}

pub const LSI_RESTARTS: usize = 50;
const LSI_MAX_ITERATIONS: usize = 4000;
const LSI_REL_TOL: f64 = 1e-10;

struct Descent {
    value: f64,
    g: Vec<f64>,
    converged: bool,
}

/// Natural-gradient descent (metric `diag(ν)`) with Armijo backtracking.
fn descend(chain: &ExactChain, mut g: Vec<f64>) -> Option<Descent> {
    let p = &chain.state_probabilities;
    let (mut value, mut grad) = lsi_objective(chain, &g)?;
    let mut t = 1.0;
    for _ in 0..LSI_MAX_ITERATIONS {
        let dir: Vec<f64> = grad.iter().zip(p).map(|(d, p)| -d / p).collect();
        let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            return Some(Descent {
                value,
                g,
                converged: true,
            });
        }
        t *= 2.0;
        let next = loop {
            let trial: Vec<f64> = g.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            match lsi_objective(chain, &trial) {
                Some((v, gr)) if v <= value + 1e-4 * t * slope => break Some((trial, v, gr)),
                // Collapsing onto constants: the quotient tends to the linearised limit,
                // which the caller accounts for separately.
                None => break None,
                _ => {}
            }
            t *= 0.5;
            if t < 1e-30 {
                break None;
            }
        };
        let Some((trial, v, gr)) = next else {
            return Some(Descent {
                value,
                g,
                converged: true,
            });
        };
        let change = (value - v).abs() / value.abs().max(1e-300);
        g = trial;
        value = v;
        grad = gr;
        if change < LSI_REL_TOL {
            return Some(Descent {
                value,
                g,
                converged: true,
            });
        }
    }
    Some(Descent {
        value,
        g,
        converged: false,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LsiSearchReport {
    /// `ρ̂ = min(search minimum, linearised limit)`, an upper bound on the optimal rate.
    pub rate: f64,
    /// Best `2D(f)/ent(f²)` found at a genuinely non-constant `f`.
    pub search_minimum: f64,
    /// `lim_{ε→0} 2D(1+εh)/ent((1+εh)²) = D(h)/var(h)`, minimised: the spectral gap.
    pub linearized_limit: f64,
    pub restarts: usize,
    pub converged_restarts: usize,
    /// Minimising `f`, normalised to `ν(f²) = 1`.
    pub best_f: Vec<f64>,
}

/// Upper bound on the optimal rate `ρ* = inf 2D(f)/ent_ν(f²)` over `f > 0`.
pub fn numeric_lsi_upper_bound(
    chain: &ExactChain,
    restarts: usize,
    seed: u64,
) -> Result<LsiSearchReport> {
    if chain.size > MAX_KERNEL_SITES {
        return Err(Error::SystemTooLarge {
            n: chain.size,
            max: MAX_KERNEL_SITES,
        });
    }
    if restarts == 0 {
        return Err(Error::invalid("need at least one restart"));
    }
    let gap = exact_spectral_gap(chain)?;
    let states = chain.states();
    let runs: Vec<Option<Descent>> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, "lsi-restart", k as u64);
            // Degenerate (constant) starts are redrawn.
            for _ in 0..100 {
                let scale = 10f64.powf(rng.random_range(-1.0..0.5));
                let g: Vec<f64> = (0..states)
                    .map(|_| {
                        scale
                            * <StandardNormal as Distribution<f64>>::sample(
                                &StandardNormal,
                                &mut rng,
                            )
                    })
                    .collect();
                if let Some(d) = descend(chain, g) {
                    return Some(d);
                }
            }
            None
        })
        .collect();
    let converged_restarts = runs.iter().flatten().filter(|d| d.converged).count();
    let best = runs
        .into_iter()
        .flatten()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::invalid("every LSI restart degenerated to a constant function"))?;
    let norm = 0.5
        * log_sum_exp_weighted(
            &chain.state_probabilities,
            &best.g.iter().map(|v| 2.0 * v).collect::<Vec<_>>(),
        );
    Ok(LsiSearchReport {
        rate: best.value.min(gap),
        search_minimum: best.value,
        linearized_limit: gap,
        restarts,
        converged_restarts,
        best_f: best.g.iter().map(|v| (v - norm).exp()).collect(),
    })
}

/// Gaussian symmetric coupling (zero diagonal) rescaled so its spectrum has width `span`.
pub fn random_coupling(size: usize, span: f64, rng: &mut rng::Rng) -> Result<CouplingMatrix> {
    if size < 2 {
        return Err(Error::invalid("random couplings need at least two sites"));
    }
    let mut m = Matrix::zeros(size);
    for i in 0..size {
        for j in 0..i {
            let v: f64 = StandardNormal.sample(&mut *rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let m = CouplingMatrix::from_rows(&m.rows())?;
    let width = spectrum(&m)?.span();
    Ok(m.scaled(span / width))
}

/// `ρ_cert ≤ ρ̂ ≤ gap` on one Ising instance.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OrderingReport {
    pub size: usize,
    pub span: f64,
    /// `None` when the instance is not certified; the lower inequality is then vacuous.
    pub certified_rate: Option<f64>,
    pub lsi: LsiSearchReport,
    pub gap: f64,
    pub holds: bool,
}

/// Slack allowed on both inequalities of [`ordering_check`].
pub const ORDERING_TOL: f64 = 1e-6;

pub fn ordering_check(
    m: &CouplingMatrix,
    gamma: f64,
    restarts: usize,
    seed: u64,
) -> Result<OrderingReport> {
    let cert = crate::coupling::certify_lsi(m, 1, gamma)?;
    let chain = enumerate_gibbs(m)?;
    let lsi = numeric_lsi_upper_bound(&chain, restarts, seed)?;
    let gap = lsi.linearized_limit;
    let lower = cert
        .certified_lsi_rate
        .is_none_or(|r| lsi.rate >= r - ORDERING_TOL);
    Ok(OrderingReport {
        size: m.size(),
        span: spectrum(m)?.span(),
        certified_rate: cert.certified_lsi_rate,
        holds: lower && lsi.rate <= gap + ORDERING_TOL,
        lsi,
        gap,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DuplicationReport {
    pub evaluations: usize,
    pub violations: usize,
    /// Largest `|cov(F², σ)|² / (8 var(F) μ(F²))` over non-constant `F`.
    pub max_ratio: f64,
    /// Smallest `8 var(F) μ(F²) − |cov(F², σ)|²`.
    pub min_slack: f64,
}

/// Twenty fields spread over `[−8, 8]`.
pub fn standard_duplication_fields() -> Vec<f64> {
    (0..20).map(|i| -8.0 + 16.0 * i as f64 / 19.0).collect()
}

/// Checks `|cov(F², σ)|² ≤ 8 var(F) μ(F²)` under `μ_h(σ) ∝ e^{hσ}` on `{±1}`, for
/// `functions` random `F` per field. `F(±1)` are drawn with a random common scale and offset.
pub fn duplication_inequality_check(
    fields: &[f64],
    functions: usize,
    seed: u64,
) -> DuplicationReport {
    let mut rng = rng::stream(seed, "duplication", 0);
    let mut report = DuplicationReport {
        evaluations: 0,
        violations: 0,
        max_ratio: 0.0,
        min_slack: f64::INFINITY,
    };
    let mut test_functions: Vec<(f64, f64)> = vec![(1.0, 1.0), (1.0, -1.0), (0.0, 0.0)];
    while test_functions.len() < functions {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let offset: f64 = if rng.random::<bool>() {
            scale * rng.random_range(-3.0..3.0)
        } else {
            0.0
        };
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        test_functions.push((offset + scale * a, offset + scale * b));
    }
    test_functions.truncate(functions);
    for &h in fields {
        let p_up = 1.0 / (1.0 + (-2.0 * h).exp());
        let p_down = 1.0 - p_up;
        for &(fp, fm) in &test_functions {
            let mean_s = p_up - p_down;
            let mean_f2 = p_up * fp * fp + p_down * fm * fm;
            let mean_f2s = p_up * fp * fp - p_down * fm * fm;
            let cov = mean_f2s - mean_f2 * mean_s;
            let var_f = p_up * p_down * (fp - fm) * (fp - fm);
            let lhs = cov * cov;
            let rhs = 8.0 * var_f * mean_f2;
            report.evaluations += 1;
            // Rounding allowance: both sides are products of a handful of terms.
            if lhs > rhs * (1.0 + 1e-12) + 1e-300 {
                report.violations += 1;
            }
            if rhs > 0.0 {
                report.max_ratio = report.max_ratio.max(lhs / rhs);
            }
            report.min_slack = report.min_slack.min(rhs - lhs);
        }
    }
    report
}

pub const MIXTURE_MAX_SITES: usize = 6;
/// Batches for the Monte Carlo standard errors.
pub const MIXTURE_BATCHES: usize = 50;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MixtureObservable {
    pub name: String,
    pub exact: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MixtureReport {
    pub c: f64,
    pub shift: f64,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub observables: Vec<MixtureObservable>,
    pub pass: bool,
}

struct Observable {
    name: String,
    /// Exact value of `F(σ)` at a state.
    exact: Box<dyn Fn(usize) -> f64 + Send + Sync>,
    /// `μ_φ(F)` given the tilted means `t_x = tanh(c φ_x)`.
    conditional: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

fn battery(m: &CouplingMatrix) -> Vec<Observable> {
    let size = m.size();
    let a = m.entries().clone();
    let mut obs = vec![
        Observable {
            name: "one".into(),
            exact: Box::new(|_| 1.0),
            conditional: Box::new(|_| 1.0),
        },
        Observable {
            name: "magnetization".into(),
            exact: Box::new(move |s| {
                (0..size).map(|x| ising_spin(s, x)).sum::<f64>() / size as f64
            }),
            conditional: Box::new(move |t| t.iter().sum::<f64>() / size as f64),
        },
    ];
    let a2 = a.clone();
    obs.push(Observable {
        name: "energy".into(),
        exact: Box::new(move |s| {
            let sigma: Vec<f64> = (0..size).map(|x| ising_spin(s, x)).collect();
            0.5 * a.quadratic_form(&sigma)
        }),
        conditional: Box::new(move |t| {
            let mut e = 0.0;
            for x in 0..size {
                e += a2[(x, x)];
                for y in 0..size {
                    if y != x {
                        e += a2[(x, y)] * t[x] * t[y];
                    }
                }
            }
            0.5 * e
        }),
    });
    let pairs = (0..size).flat_map(|x| (x + 1..size).map(move |y| (x, y)));
    for (x, y) in pairs {
        obs.push(Observable {
            name: format!("sigma{x}Sigma{y}"),
            exact: Box::new(move |s| ising_spin(s, x) * ising_spin(s, y)),
            conditional: Box::new(move |t| t[x] * t[y]),
        });
    }
    obs
}

/// Compares exact `ν(F)` with a Monte Carlo estimate of `ν_r(μ_φ(F))`.
///
/// Ising spins have `|σ_x|² = 1`, so `M` is first shifted to a spectrum inside `(0, c)`
/// without changing `ν`; this needs the spectral span of `M` below `c`, and `c < 1` keeps
/// the renormalised measure uniformly convex.
pub fn mixture_identity_check(
    m: &CouplingMatrix,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<MixtureReport> {
    let size = m.size();
    if size > MIXTURE_MAX_SITES {
        return Err(Error::SystemTooLarge {
            n: size,
            max: MIXTURE_MAX_SITES,
        });
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::invalid(format!(
            "mixture check needs 0 < c < 1, got {c}"
        )));
    }
    if samples < MIXTURE_BATCHES {
        return Err(Error::invalid(format!(
            "need at least {MIXTURE_BATCHES} samples"
        )));
    }
    let span = spectrum(m)?.span();
    if !(span < c) {
        return Err(Error::invalid(format!(
            "spectral span {span} is not below c = {c}"
        )));
    }
    let (shifted, shift) = positive_shift(m, 0.5 * (c - span))?;
    let model =
        split_covariance(&shifted, c, 1)?.with_potential(&SingleSpinModel::sphere(1, None)?)?;
    let potential = model.potential.as_ref().expect("attached above");

    let chain = enumerate_gibbs(m)?;
    let obs = battery(m);
    let batch_len = samples / MIXTURE_BATCHES;
    let used = batch_len * MIXTURE_BATCHES;
    let mut batch_sums = vec![vec![0.0; MIXTURE_BATCHES]; obs.len()];
    let mut count = 0usize;
    let mut t = vec![0.0; size];
    let options = SamplerOptions::default();
    let run = run_field_chain(
        &model.b,
        1,
        potential,
        used,
        derive_seed(seed, "mixture-chain", 0),
        &options,
        |phi| {
            for (tx, p) in t.iter_mut().zip(phi) {
                *tx = (c * p).tanh();
            }
            let batch = count / batch_len;
            for (k, o) in obs.iter().enumerate() {
                batch_sums[k][batch] += (o.conditional)(&t);
            }
            count += 1;
        },
    )?;

    let mut observables = Vec::with_capacity(obs.len());
    for (k, o) in obs.iter().enumerate() {
        let means: Vec<f64> = batch_sums[k].iter().map(|s| s / batch_len as f64).collect();
        let estimate = means.iter().sum::<f64>() / MIXTURE_BATCHES as f64;
        let var = means.iter().map(|v| (v - estimate).powi(2)).sum::<f64>()
            / (MIXTURE_BATCHES - 1) as f64;
        let standard_error = (var / MIXTURE_BATCHES as f64).sqrt();
        let exact = chain.expectation(&o.exact);
        let pass = (estimate - exact).abs() <= 3.0 * standard_error + 1e-12;
        observables.push(MixtureObservable {
            name: o.name.clone(),
            exact,
            estimate,
            standard_error,
            pass,
        });
    }
    Ok(MixtureReport {
        c,
        shift,
        samples: used,
        acceptance_rate: run.acceptance_rate,
        pass: observables.iter().all(|o| o.pass),
        observables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::mean_field;

    fn pair(a: f64) -> CouplingMatrix {
        CouplingMatrix::from_rows(&[vec![0.0, a], vec![a, 0.0]]).unwrap()
    }

    #[test]
    fn zero_coupling_is_uniform() {
        for size in 1..=4 {
            let m = CouplingMatrix::from_rows(&vec![vec![0.0; size]; size]).unwrap();
            let chain = enumerate_gibbs(&m).unwrap();
            let u = 1.0 / chain.states() as f64;
            assert!(chain.probabilities().iter().all(|p| (p - u).abs() < 1e-15));
        }
    }

    #[test]
    fn pair_agreement_probability() {
        let a = 0.7;
        let chain = enumerate_gibbs(&pair(a)).unwrap();
        let same = chain.expectation(|s| {
            if ising_spin(s, 0) == ising_spin(s, 1) {
                1.0
            } else {
                0.0
            }
        });
        let expected = (-a).exp() / ((-a).exp() + a.exp());
        assert!((same - expected).abs() < 1e-14);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = mean_field(10, 1.3).unwrap();
        let chain = enumerate_gibbs(&m).unwrap();
        let total: f64 = chain.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(chain.probabilities().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn too_many_sites() {
        let m = mean_field(17, 0.1).unwrap();
        assert!(matches!(
            enumerate_gibbs(&m),
            Err(Error::SystemTooLarge { .. })
        ));
        let m = mean_field(11, 0.1).unwrap();
        let chain = enumerate_gibbs(&m).unwrap();
        assert!(matches!(
            exact_spectral_gap(&chain),
            Err(Error::SystemTooLarge { .. })
        ));
    }

    #[test]
    fn dirichlet_matrix_matches_form() {
        let chain = enumerate_gibbs(&mean_field(3, 0.4).unwrap()).unwrap();
        let l = chain.dirichlet_form_matrix().unwrap();
        let f = [0.3, -1.0, 2.0, 0.5, 0.0, 1.5, -0.7, 0.9];
        let quad = l.quadratic_form(&f);
        assert!((quad - chain.dirichlet_form(&f)).abs() < 1e-13);
        let ones = vec![1.0; 8];
        assert!(l.mul_vec(&ones).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn gap_bounds_rayleigh_quotients() {
        let chain = enumerate_gibbs(&mean_field(3, -0.3).unwrap()).unwrap();
        let gap = exact_spectral_gap(&chain).unwrap();
        let mut rng = rng::from_seed(4);
        for _ in 0..200 {
            let f: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            assert!(chain.dirichlet_form(&f) / chain.variance(&f) >= gap - 1e-12);
        }
    }

    #[test]
    fn stable_entropy_matches_direct_formula() {
        let chain = enumerate_gibbs(&pair(0.2)).unwrap();
        let f = [1.0, 2.0, 0.5, 1.5];
        let p = chain.probabilities();
        let z: f64 = p.iter().zip(&f).map(|(p, f)| p * f * f).sum();
        let direct: f64 = p
            .iter()
            .zip(&f)
            .map(|(p, f)| p * f * f * (f * f).ln())
            .sum::<f64>()
            - z * z.ln();
        assert!((chain.entropy_of_square(&f) - direct).abs() < 1e-14);
    }

    #[test]
    fn objective_gradient_matches_differences() {
        let chain = enumerate_gibbs(&mean_field(2, 0.3).unwrap()).unwrap();
        let g = vec![0.1, -0.4, 0.3, 0.05];
        let (_, grad) = lsi_objective(&chain, &g).unwrap();
        for s in 0..4 {
            let h = 1e-6;
            let mut gp = g.clone();
            gp[s] += h;
            let mut gm = g.clone();
            gm[s] -= h;
            let fd = (lsi_objective(&chain, &gp).unwrap().0
                - lsi_objective(&chain, &gm).unwrap().0)
                / (2.0 * h);
            assert!((fd - grad[s]).abs() < 1e-6, "{s}: {fd} vs {}", grad[s]);
        }
    }

    #[test]
    fn biased_two_point_lsi_is_below_gap() {
        // ν = (p, q) on one site: D(f) = (f₊ − f₋)², gap 1/(pq), and the optimal rate is
        // 2(p − q)/(pq log(p/q)).
        let (p, q) = (0.9, 0.1);
        let chain = ExactChain {
            size: 1,
            state_probabilities: vec![p, q],
            log_partition: 0.0,
        };
        let gap = exact_spectral_gap(&chain).unwrap();
        assert!((gap - 1.0 / (p * q)).abs() < 1e-10);
        let optimum = 2.0 * (p - q) / (p * q * (p / q).ln());
        let report = numeric_lsi_upper_bound(&chain, 10, 0).unwrap();
        assert!(report.search_minimum < gap);
        assert!(
            (report.rate - optimum).abs() < 1e-6 * optimum,
            "{} vs {optimum}",
            report.rate
        );
    }

    #[test]
    fn duplication_trivial_cases() {
        let r = duplication_inequality_check(&[0.0], 3, 0);
        assert_eq!(r.violations, 0);
        // Constant F and F = σ both give zero covariance.
        assert_eq!(r.max_ratio, 0.0);
    }
}
