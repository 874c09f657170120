//! Single-site dynamics for `ν(dσ) ∝ exp(−½(σ, Mσ)) Π μ(dσ_x)`.
//!
//! Sign convention: positive off-diagonal `M_xy` is antiferromagnetic. The conditional law of
//! `σ_x` given the rest is `∝ exp(h_x · σ_x) μ(dσ_x)` with local field
//! `h_x = −Σ_{y≠x} M_xy σ_y`; the diagonal of `M` never enters.
//!
//! Ising spins (`n = 1`) are updated by heat bath, spheres (`n ≥ 2`) by Metropolis with a
//! tangent Gaussian proposal projected back to the sphere. Production sweeps visit sites in
//! a fixed order; the random-site kernel is exposed for exact reversibility checks.

mod relaxation;

pub use relaxation::{
    estimate_relaxation, relaxation_study, simulate, DynamicsTrace, RelaxationEstimate, Simulation,
    SimulationOptions, StudyFamily, StudyRow, StudySpec, StudyTable, BATCHES, BURN_IN_FACTOR,
    MIN_LENGTH_FACTOR, SOKAL_WINDOW,
};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::oracle::{ising_spin, MAX_KERNEL_SITES};
use crate::renorm::TARGET_ACCEPTANCE;
use crate::rng::Rng;

/// `N` unit vectors in `ℝⁿ`, flattened site-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpinConfiguration {
    n: usize,
    values: Vec<f64>,
}

impl SpinConfiguration {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.is_empty() || values.len() % n != 0 {
            return Err(Error::InvalidDimensions(format!(
                "{} values do not form spins of dimension {n}",
                values.len()
            )));
        }
        let cfg = SpinConfiguration { n, values };
        for x in 0..cfg.sites() {
            let len = cfg.spin(x).iter().map(|v| v * v).sum::<f64>().sqrt();
            if (len - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("spin {x} has length {len}")));
            }
        }
        Ok(cfg)
    }

    pub fn all_up(sites: usize, n: usize) -> Self {
        let mut values = vec![0.0; sites * n];
        for x in 0..sites {
            values[x * n] = 1.0;
        }
        SpinConfiguration { n, values }
    }

    pub fn random(sites: usize, n: usize, rng: &mut Rng) -> Self {
        let mut values = vec![0.0; sites * n];
        for x in 0..sites {
            let s = &mut values[x * n..(x + 1) * n];
            if n == 1 {
                s[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            } else {
                loop {
                    for v in s.iter_mut() {
                        *v = StandardNormal.sample(rng);
                    }
                    let len = s.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if len > 1e-8 {
                        s.iter_mut().for_each(|v| *v /= len);
                        break;
                    }
                }
            }
        }
        SpinConfiguration { n, values }
    }

    pub fn spin_dimension(&self) -> usize {
        self.n
    }

    pub fn sites(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn spin(&self, x: usize) -> &[f64] {
        &self.values[x * self.n..(x + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// First component of the mean spin.
    pub fn magnetization(&self) -> f64 {
        (0..self.sites()).map(|x| self.spin(x)[0]).sum::<f64>() / self.sites() as f64
    }

    /// `½ Σ_{x≠y} M_xy σ_x·σ_y / N`.
    pub fn energy_per_site(&self, m: &CouplingMatrix) -> f64 {
        let sites = self.sites();
        let mut e = 0.0;
        for x in 0..sites {
            for y in 0..sites {
                if x != y {
                    let d: f64 = self
                        .spin(x)
                        .iter()
                        .zip(self.spin(y))
                        .map(|(a, b)| a * b)
                        .sum();
                    e += m.get(x, y) * d;
                }
            }
        }
        0.5 * e / sites as f64
    }

    /// Ising state index (bit `x` set ⟺ `σ_x = −1`).
    pub fn ising_index(&self) -> usize {
        debug_assert_eq!(self.n, 1);
        self.values
            .iter()
            .enumerate()
            .fold(0, |acc, (x, &s)| if s < 0.0 { acc | (1 << x) } else { acc })
    }
}

/// `P(σ_x = +1 | rest) = e^{h}/(e^{h} + e^{−h})`, `h = −Σ_{y≠x} M_xy σ_y`.
pub fn heat_bath_up_probability(m: &CouplingMatrix, state: &SpinConfiguration, x: usize) -> f64 {
    let h: f64 = -(0..state.sites())
        .filter(|&y| y != x)
        .map(|y| m.get(x, y) * state.spin(y)[0])
        .sum::<f64>();
    1.0 / (1.0 + (-2.0 * h).exp())
}

/// Sequential chain with cached local fields.
pub struct SpinChain<'a> {
    m: &'a CouplingMatrix,
    state: SpinConfiguration,
    /// `Σ_{y≠x} M_xy σ_y`, per site and component.
    local: Vec<f64>,
    rng: Rng,
    step: f64,
    accepted: u64,
    proposed: u64,
}

impl<'a> SpinChain<'a> {
    pub fn new(m: &'a CouplingMatrix, state: SpinConfiguration, rng: Rng) -> Result<Self> {
        if state.sites() != m.size() {
            return Err(Error::InvalidDimensions(format!(
                "configuration has {} sites, coupling has {}",
                state.sites(),
                m.size()
            )));
        }
        let mut chain = SpinChain {
            m,
            state,
            local: Vec::new(),
            rng,
            step: 1.0,
            accepted: 0,
            proposed: 0,
        };
        chain.recompute_fields();
        Ok(chain)
    }

    fn recompute_fields(&mut self) {
        let (sites, n) = (self.state.sites(), self.state.n);
        self.local = vec![0.0; sites * n];
        for x in 0..sites {
            for y in 0..sites {
                if x != y {
                    for a in 0..n {
                        self.local[x * n + a] += self.m.get(x, y) * self.state.values[y * n + a];
                    }
                }
            }
        }
    }

    pub fn state(&self) -> &SpinConfiguration {
        &self.state
    }

    pub fn rng(&mut self) -> &mut Rng {
        &mut self.rng
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn set_spin(&mut self, x: usize, new: &[f64]) {
        let n = self.state.n;
        let row = self.m.entries().row(x);
        for a in 0..n {
            let d = new[a] - self.state.values[x * n + a];
            if d != 0.0 {
                for (y, &mxy) in row.iter().enumerate() {
                    if y != x {
                        self.local[y * n + a] += mxy * d;
                    }
                }
            }
        }
        self.state.values[x * n..(x + 1) * n].copy_from_slice(new);
    }

    /// Heat-bath (`n = 1`) or Metropolis (`n ≥ 2`) update at site `x`.
    pub fn update_site(&mut self, x: usize) {
        if self.state.n == 1 {
            let h = -self.local[x];
            let p_up = 1.0 / (1.0 + (-2.0 * h).exp());
            let s = if self.rng.random::<f64>() < p_up {
                1.0
            } else {
                -1.0
            };
            if s != self.state.values[x] {
                self.set_spin(x, &[s]);
            }
        } else {
            let n = self.state.n;
            let old = self.state.spin(x).to_vec();
            let mut xi: Vec<f64> = (0..n)
                .map(|_| StandardNormal.sample(&mut self.rng))
                .collect();
            let radial: f64 = xi.iter().zip(&old).map(|(a, b)| a * b).sum();
            for (v, o) in xi.iter_mut().zip(&old) {
                *v -= radial * o;
            }
            let mut new: Vec<f64> = old
                .iter()
                .zip(&xi)
                .map(|(o, v)| o + self.step * v)
                .collect();
            let len = new.iter().map(|v| v * v).sum::<f64>().sqrt();
            new.iter_mut().for_each(|v| *v /= len);
            let field = &self.local[x * n..(x + 1) * n];
            // Energy ½(σ, Mσ) changes by (σ'_x − σ_x)·Σ_{y≠x} M_xy σ_y.
            let delta: f64 = new
                .iter()
                .zip(&old)
                .zip(field)
                .map(|((a, b), f)| (a - b) * f)
                .sum();
            self.proposed += 1;
            if delta <= 0.0 || self.rng.random::<f64>() < (-delta).exp() {
                self.set_spin(x, &new);
                self.accepted += 1;
            }
        }
    }

    /// One systematic sweep over all sites.
    pub fn sweep(&mut self) {
        for x in 0..self.state.sites() {
            self.update_site(x);
        }
    }

    fn take_acceptance(&mut self) -> f64 {
        let r = if self.proposed == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposed as f64
        };
        self.accepted = 0;
        self.proposed = 0;
        r
    }

    /// Burn-in sweeps; for sphere spins the proposal step is tuned toward 0.4 acceptance.
    pub fn burn_in(&mut self, sweeps: usize) {
        let interval = 20;
        let mut updates: f64 = 0.0;
        let mut done = 0;
        while done < sweeps {
            let k = interval.min(sweeps - done);
            for _ in 0..k {
                self.sweep();
            }
            done += k;
            if self.state.n > 1 {
                updates += 1.0;
                let rate = self.take_acceptance();
                self.step = (self.step * (2.0 * (rate - TARGET_ACCEPTANCE) / updates.sqrt()).exp())
                    .min(10.0);
            }
        }
        self.take_acceptance();
        // Guard against drift of the cached fields over long runs.
        self.recompute_fields();
    }

    /// `½ Σ_{x≠y} M_xy σ_x·σ_y / N` from the cached fields.
    pub fn energy_per_site(&self) -> f64 {
        let e: f64 = self
            .state
            .values
            .iter()
            .zip(&self.local)
            .map(|(s, h)| s * h)
            .sum();
        0.5 * e / self.state.sites() as f64
    }

    /// Acceptance since the last call (1 for heat bath).
    pub fn acceptance_rate(&mut self) -> f64 {
        self.take_acceptance()
    }
}

/// One systematic Glauber sweep, in place.
pub fn glauber_sweep(
    m: &CouplingMatrix,
    state: &mut SpinConfiguration,
    rng: &mut Rng,
) -> Result<()> {
    let taken = std::mem::replace(state, SpinConfiguration::all_up(1, 1));
    let mut chain = SpinChain::new(m, taken, rng.clone())?;
    chain.sweep();
    *rng = chain.rng.clone();
    *state = chain.state;
    Ok(())
}

/// Transition matrix of the random-site heat-bath kernel over the `2^N` Ising states:
/// pick `x` uniformly, then resample `σ_x` from its conditional law.
pub fn random_site_transition_matrix(m: &CouplingMatrix) -> Result<Matrix> {
    let sites = m.size();
    if sites > MAX_KERNEL_SITES {
        return Err(Error::SystemTooLarge {
            n: sites,
            max: MAX_KERNEL_SITES,
        });
    }
    let states = 1usize << sites;
    let mut p = Matrix::zeros(states);
    for s in 0..states {
        let cfg = SpinConfiguration {
            n: 1,
            values: (0..sites).map(|x| ising_spin(s, x)).collect(),
        };
        let mut stay = 0.0;
        for x in 0..sites {
            let up = heat_bath_up_probability(m, &cfg, x);
            let flip_prob = if ising_spin(s, x) > 0.0 { 1.0 - up } else { up };
            p[(s, s ^ (1 << x))] += flip_prob / sites as f64;
            stay += (1.0 - flip_prob) / sites as f64;
        }
        p[(s, s)] += stay;
    }
    Ok(p)
}
