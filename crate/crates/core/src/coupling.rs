//! Coupling matrices, their spectra, and the spectral-condition certificates.
//!
//! The spin measure is `ν(dσ) ∝ exp(−½ (σ, Mσ)) Π μ(dσ_x)` with `|σ_x| = 1`, so adding a
//! multiple of the identity to `M` leaves `ν` unchanged. Certification therefore works with
//! the shifted matrix `M − λ⁻ I`, whose norm is the spectral span `λ⁺ − λ⁻`. The uniform
//! log-Sobolev inequality
//!
//! ```text
//! ent_ν(F²) ≤ C Σ_x ν(|∇_x F|²),    C = (2/γ) (1 + 2nc / (n − c)),    c = λ⁺ − λ⁻,
//! ```
//!
//! holds whenever `c < n`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goe;
use crate::linalg::{self, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    FerromagnetLattice,
    MeanField,
    SkGoe,
    File,
}

/// Symmetric, finite interaction matrix together with where it came from.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CouplingMatrix {
    entries: Matrix,
    kind: CouplingKind,
    seed: Option<u64>,
}

impl CouplingMatrix {
    /// Validates exact symmetry and finiteness.
    pub fn new(entries: Matrix, kind: CouplingKind, seed: Option<u64>) -> Result<Self> {
        if entries.size() == 0 {
            return Err(Error::InvalidDimensions(
                "coupling matrix must have N ≥ 1".into(),
            ));
        }
        let n = entries.size();
        for i in 0..n {
            for j in 0..n {
                if !entries[(i, j)].is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        if let Some((i, j)) = entries.symmetry_violation() {
            return Err(Error::NotSymmetric {
                row: i,
                col: j,
                upper: entries[(i, j)],
                lower: entries[(j, i)],
            });
        }
        Ok(CouplingMatrix {
            entries,
            kind,
            seed,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, CouplingKind::File, None)
    }

    pub fn size(&self) -> usize {
        self.entries.size()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn kind(&self) -> CouplingKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[(x, y)]
    }

    /// Same measure, coupling `M + t I`.
    pub fn shifted(&self, t: f64) -> CouplingMatrix {
        CouplingMatrix {
            entries: self.entries.shifted(t),
            kind: self.kind,
            seed: self.seed,
        }
    }

    pub fn scaled(&self, s: f64) -> CouplingMatrix {
        CouplingMatrix {
            entries: self.entries.scaled(s),
            kind: self.kind,
            seed: self.seed,
        }
    }

    pub fn to_file_format(&self) -> MatrixFile {
        MatrixFile {
            n: self.size(),
            rows: self.entries.rows(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses the `{"n": N, "rows": [[...], ...]}` format; `origin` labels diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if file.rows.len() != file.n {
            return Err(Error::InvalidDimensions(format!(
                "{origin}: header says n = {} but {} rows given",
                file.n,
                file.rows.len()
            )));
        }
        Self::new(Matrix::from_rows(&file.rows)?, CouplingKind::File, None)
    }
}

/// On-disk matrix format.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

/// Parameters for [`build_coupling`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// Periodic hypercubic lattice; every nearest-neighbour pair gets `weight`
    /// (negative weight is ferromagnetic under the `exp(−½(σ, Mσ))` convention).
    FerromagnetLattice {
        dims: Vec<usize>,
        weight: f64,
    },
    /// Complete graph, every off-diagonal entry equal to `strength`.
    MeanField {
        size: usize,
        strength: f64,
    },
    /// `M = β H` with `H` drawn from the GOE.
    SkGoe {
        size: usize,
        beta: f64,
        seed: u64,
    },
    File {
        path: String,
    },
}

pub fn build_coupling(spec: &ModelSpec) -> Result<CouplingMatrix> {
    match spec {
        ModelSpec::FerromagnetLattice { dims, weight } => lattice(dims, *weight),
        ModelSpec::MeanField { size, strength } => mean_field(*size, *strength),
        ModelSpec::SkGoe { size, beta, seed } => {
            if !beta.is_finite() {
                return Err(Error::invalid("beta must be finite"));
            }
            let h = goe::sample_goe(*size, *seed)?;
            CouplingMatrix::new(h.matrix().scaled(*beta), CouplingKind::SkGoe, Some(*seed))
        }
        ModelSpec::File { path } => CouplingMatrix::load(path),
    }
}

pub fn mean_field(size: usize, strength: f64) -> Result<CouplingMatrix> {
    if size == 0 {
        return Err(Error::InvalidDimensions(
            "mean-field model needs N ≥ 1".into(),
        ));
    }
    let m = Matrix::from_fn(size, |i, j| if i == j { 0.0 } else { strength });
    CouplingMatrix::new(m, CouplingKind::MeanField, None)
}

pub fn lattice(dims: &[usize], weight: f64) -> Result<CouplingMatrix> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidDimensions(format!(
            "lattice dimensions must be non-empty and positive, got {dims:?}"
        )));
    }
    let size: usize = dims.iter().product();
    let mut m = Matrix::zeros(size);
    let mut coords = vec![0usize; dims.len()];
    for site in 0..size {
        let mut rem = site;
        for (c, &l) in coords.iter_mut().zip(dims) {
            *c = rem % l;
            rem /= l;
        }
        let mut stride = 1;
        for (axis, &l) in dims.iter().enumerate() {
            if l > 1 {
                let up = (coords[axis] + 1) % l;
                let nb = site - coords[axis] * stride + up * stride;
                if nb != site {
                    m[(site, nb)] = weight;
                    m[(nb, site)] = weight;
                }
            }
            stride *= l;
        }
    }
    CouplingMatrix::new(m, CouplingKind::FerromagnetLattice, None)
}

/// Declared bound on the eigenpair residual, relative to `max(1, ‖M‖_F)`.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Above this size only eigenvalues are computed; the residual is then the
/// off-diagonal norm left by the solver, which bounds every eigenvalue error.
pub const EIGENVECTOR_LIMIT: usize = 256;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectrumSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    pub residual: f64,
}

impl SpectrumSummary {
    pub fn span(&self) -> f64 {
        self.lambda_max - self.lambda_min
    }
}

pub fn spectrum(m: &CouplingMatrix) -> Result<SpectrumSummary> {
    let a = m.entries();
    let want_vectors = m.size() <= EIGENVECTOR_LIMIT;
    let eig = linalg::symmetric_eigen(a, want_vectors)?;
    let residual = eig.residual(a).unwrap_or(eig.off_norm);
    let n = eig.values.len();
    Ok(SpectrumSummary {
        lambda_min: eig.values[0],
        lambda_max: eig.values[n - 1],
        eigenvalues: Some(eig.values),
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateStatus {
    Certified,
    FailedSpectralCondition,
}

/// Which single-spin inequality was fed in, and hence which inequality is certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Inequality {
    LogSobolev,
    SpectralGap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LsiCertificate {
    pub inequality: Inequality,
    pub spin_dimension: usize,
    pub shift: f64,
    pub effective_norm: f64,
    pub single_spin_lsi: f64,
    /// `None` when the spectral condition fails.
    pub certified_constant: Option<f64>,
    pub certified_lsi_rate: Option<f64>,
    pub status: CertificateStatus,
    /// `c − n`, present only when the condition fails.
    pub failure_margin: Option<f64>,
}

impl LsiCertificate {
    pub fn is_certified(&self) -> bool {
        self.status == CertificateStatus::Certified
    }
}

/// `(2/γ)(1 + 2nc/(n − c))`, defined for `0 ≤ c < n`.
pub fn certified_constant(n: usize, gamma: f64, c: f64) -> f64 {
    let n = n as f64;
    (2.0 / gamma) * (1.0 + 2.0 * n * c / (n - c))
}

/// Certificate from a known spectrum range `[lambda_min, lambda_max]`.
pub fn certify_from_range(
    lambda_min: f64,
    lambda_max: f64,
    n: usize,
    gamma: f64,
    inequality: Inequality,
) -> Result<LsiCertificate> {
    if n == 0 {
        return Err(Error::invalid("spin dimension must be ≥ 1"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!(
            "single-spin constant must be positive and finite, got {gamma}"
        )));
    }
    let c = (lambda_max - lambda_min).max(0.0);
    let nf = n as f64;
    let mut cert = LsiCertificate {
        inequality,
        spin_dimension: n,
        shift: lambda_min,
        effective_norm: c,
        single_spin_lsi: gamma,
        certified_constant: None,
        certified_lsi_rate: None,
        status: CertificateStatus::FailedSpectralCondition,
        failure_margin: None,
    };
    if c < nf {
        let constant = certified_constant(n, gamma, c);
        cert.status = CertificateStatus::Certified;
        cert.certified_constant = Some(constant);
        cert.certified_lsi_rate = Some(2.0 / constant);
    } else {
        cert.failure_margin = Some(c - nf);
    }
    Ok(cert)
}

pub fn certify_lsi(m: &CouplingMatrix, n: usize, gamma: f64) -> Result<LsiCertificate> {
    let s = spectrum(m)?;
    certify_from_range(s.lambda_min, s.lambda_max, n, gamma, Inequality::LogSobolev)
}

/// Same pipeline fed with a single-spin spectral gap. An LSI with rate ρ implies a gap
/// ≥ ρ, so the LSI constant built from `gamma_sg` is a valid, possibly loose, certificate.
pub fn certify_spectral_gap(m: &CouplingMatrix, n: usize, gamma_sg: f64) -> Result<LsiCertificate> {
    let s = spectrum(m)?;
    certify_from_range(
        s.lambda_min,
        s.lambda_max,
        n,
        gamma_sg,
        Inequality::SpectralGap,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeanFieldReport {
    pub row_sup_norm: f64,
    pub implies_condition: bool,
}

/// `sup_x Σ_y |M_xy| < n`. Only meaningful as a proof of `‖M‖ < n` when `M` is
/// positive semidefinite.
pub fn mean_field_bound_check(m: &CouplingMatrix, n: usize) -> MeanFieldReport {
    let row_sup_norm = (0..m.size())
        .map(|x| m.entries().row(x).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    MeanFieldReport {
        row_sup_norm,
        implies_condition: row_sup_norm < n as f64,
    }
}
