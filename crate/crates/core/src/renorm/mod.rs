//! One Gaussian renormalisation step.
//!
//! For `0 < M < c` there is a positive definite `B` with `M⁻¹ = c⁻¹ I + B⁻¹`, so the Gaussian
//! weight of the spins factors as a convolution
//!
//! ```text
//! exp(−½(σ, Mσ)) = C ∫ exp(−½ c |φ − σ|²) exp(−½(φ, Bφ)) dφ.
//! ```
//!
//! Integrating the spins out site by site leaves the field measure
//! `ν_r(dφ) ∝ exp(−½(φ, Bφ) − Σ_x V(φ_x)) dφ` with
//! `V(ψ) = −log ∫ exp(−½ c |ψ − σ|²) μ(dσ)`. Its Hessian is `c I − c² cov_{μ_ψ}(σ)`, where
//! `μ_ψ = μ^{cψ}` on the spheres, and is bounded below by `λ = c − c²/n` whenever every
//! directional variance of the tilted single-spin measures is at most `1/n`.

mod potential;
mod sampler;

pub use potential::{
    hessian_fd, hessian_lower_bound_check, potential_hessian, renormalized_potential, rows_to_csv,
    standard_psi_grid, HessianReport, Potential, PotentialRow, FD_STEP, HESSIAN_FD_TOL,
    HESSIAN_TOL, PSI_MAX, TABLE_NODES,
};
pub use sampler::{
    run_field_chain, sample_field_measure, sample_renormalized, FieldChain, SampleSet,
    SamplerOptions, SitePotential, ZeroPotential, TARGET_ACCEPTANCE,
};

use serde::Serialize;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::singlespin::SingleSpinModel;

/// Round-trip tolerance for `B` against `cM(cI − M)⁻¹`.
pub const ROUND_TRIP_TOL: f64 = 1e-8;
/// Spread tolerance of the Gaussian convolution identity.
pub const GAUSSIAN_SPREAD_TOL: f64 = 1e-9;
/// Largest `N·n` accepted by [`gaussian_identity_check`].
pub const GAUSSIAN_CHECK_MAX_DIM: usize = 64;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RenormalizedModel {
    pub c: f64,
    pub b: Matrix,
    pub lambda_be: f64,
    pub spin_dimension: usize,
    /// Eigenvalues `m_i` of `M`, ascending.
    pub coupling_eigenvalues: Vec<f64>,
    /// `b_i = c m_i / (c − m_i)`, in the same order.
    pub b_eigenvalues: Vec<f64>,
    /// `‖B − cM(cI − M)⁻¹‖_F / ‖B‖_F`.
    pub round_trip_error: f64,
    /// `max b / min b`; blows up as the top eigenvalue of `M` approaches `c`.
    pub condition_number: f64,
    #[serde(skip)]
    pub potential: Option<Potential>,
}

impl RenormalizedModel {
    pub fn size(&self) -> usize {
        self.b.size()
    }

    /// Attaches the renormalised potential of `model` at this model's `c`.
    pub fn with_potential(mut self, model: &SingleSpinModel) -> Result<Self> {
        if model.spin_dimension() != self.spin_dimension {
            return Err(Error::InvalidDimensions(format!(
                "single-spin model has n = {}, renormalised model n = {}",
                model.spin_dimension(),
                self.spin_dimension
            )));
        }
        self.potential = Some(Potential::new(model, self.c)?);
        Ok(self)
    }

    pub fn round_trip_ok(&self) -> bool {
        self.round_trip_error < ROUND_TRIP_TOL
    }
}

/// `b = c m / (c − m)`.
pub fn b_eigenvalue(c: f64, m: f64) -> f64 {
    c * m / (c - m)
}

/// `λ = c − c²/n`.
pub fn bakry_emery_constant(c: f64, n: usize) -> f64 {
    c - c * c / n as f64
}

/// Builds `B` on the eigenbasis of `M` and checks it against `cM(cI − M)⁻¹` computed by LU.
/// Every eigenvalue of `M` must lie strictly inside `(0, c)`.
pub fn split_covariance(m: &CouplingMatrix, c: f64, n: usize) -> Result<RenormalizedModel> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!(
            "smoothing scale must be positive, got {c}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("spin dimension must be ≥ 1"));
    }
    let a = m.entries();
    let size = a.size();
    let eig = linalg::symmetric_eigen(a, true)?;
    for (index, &ev) in eig.values.iter().enumerate() {
        if !(ev > 0.0 && ev < c) {
            return Err(Error::SpectralCondition {
                index,
                eigenvalue: ev,
                c,
            });
        }
    }
    let q = eig.vectors.as_ref().expect("vectors requested");
    let bvals: Vec<f64> = eig.values.iter().map(|&mi| b_eigenvalue(c, mi)).collect();
    let mut b = Matrix::zeros(size);
    for i in 0..size {
        for j in i..size {
            let v: f64 = (0..size).map(|k| q[(i, k)] * bvals[k] * q[(j, k)]).sum();
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let alt = linalg::solve(&Matrix::identity(size).scaled(c).sub(a), &a.scaled(c))?;
    let round_trip_error = b.sub(&alt).frobenius_norm() / b.frobenius_norm();
    let bmax = bvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bmin = bvals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RenormalizedModel {
        c,
        b,
        lambda_be: bakry_emery_constant(c, n),
        spin_dimension: n,
        coupling_eigenvalues: eig.values,
        b_eigenvalues: bvals,
        round_trip_error,
        condition_number: bmax / bmin,
        potential: None,
    })
}

/// Coupling with the same spin measure and spectrum in `[δ, span + δ]`: `M − (λ⁻ − δ) I`.
pub fn positive_shift(m: &CouplingMatrix, delta: f64) -> Result<(CouplingMatrix, f64)> {
    let s = crate::coupling::spectrum(m)?;
    let shift = s.lambda_min - delta;
    Ok((m.shifted(-shift), shift))
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianIdentityReport {
    /// `log LHS − log RHS` per sample, up to one common additive constant.
    pub log_ratios: Vec<f64>,
    pub max_log_ratio_deviation: f64,
    /// `max |M − (cI − c²(cI + B)⁻¹)|` entrywise.
    pub max_kernel_deviation: f64,
    pub pass: bool,
}

/// Evaluates both sides of the convolution identity in closed form.
///
/// The φ-integral is Gaussian: `∫ exp(−½c|φ − σ|² − ½(φ, Bφ)) dφ ∝ exp(−½ σᵀ K σ)` with
/// `K = cI − c²(cI + B)⁻¹`, computed here by LU independently of the eigenbasis used to
/// build `B`. Each sample is a configuration of `N` spins in `ℝⁿ`, flattened site-major.
pub fn gaussian_identity_check(
    m: &CouplingMatrix,
    c: f64,
    n: usize,
    sigma_samples: &[Vec<f64>],
) -> Result<GaussianIdentityReport> {
    let size = m.size();
    if size * n > GAUSSIAN_CHECK_MAX_DIM {
        return Err(Error::SystemTooLarge {
            n: size * n,
            max: GAUSSIAN_CHECK_MAX_DIM,
        });
    }
    if sigma_samples.is_empty() {
        return Err(Error::invalid("need at least one σ sample"));
    }
    let model = split_covariance(m, c, n)?;
    let cb = model.b.shifted(c);
    let k = Matrix::identity(size)
        .scaled(c)
        .sub(&linalg::inverse(&cb)?.scaled(c * c));
    let a = m.entries();
    let mut log_ratios = Vec::with_capacity(sigma_samples.len());
    for s in sigma_samples {
        if s.len() != size * n {
            return Err(Error::InvalidDimensions(format!(
                "σ sample has {} entries, expected {}",
                s.len(),
                size * n
            )));
        }
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for comp in 0..n {
            let v: Vec<f64> = (0..size).map(|x| s[x * n + comp]).collect();
            lhs += -0.5 * a.quadratic_form(&v);
            rhs += -0.5 * k.quadratic_form(&v);
        }
        log_ratios.push(lhs - rhs);
    }
    let hi = log_ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = log_ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;
    Ok(GaussianIdentityReport {
        log_ratios,
        max_log_ratio_deviation: spread,
        max_kernel_deviation: a.sub(&k).max_abs(),
        pass: spread < GAUSSIAN_SPREAD_TOL,
    })
}
