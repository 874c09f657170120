use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::singlespin::{standard_directions, MeasureKind, SingleSpinModel};

/// Radial extent of the tabulated potential for `n ≥ 2`.
pub const PSI_MAX: f64 = 50.0;
pub const TABLE_NODES: usize = 4096;
/// Step of the central differences used to cross-check Hessians.
pub const FD_STEP: f64 = 1e-3;
/// Allowed shortfall of `min eig Hess V` below `c − c²/n`.
pub const HESSIAN_TOL: f64 = 1e-8;
/// Allowed analytic-vs-finite-difference Hessian disagreement (max entry).
pub const HESSIAN_FD_TOL: f64 = 1e-5;

/// `V(ψ) = −log ∫ exp(−½ c |ψ − σ|²) μ(dσ)` for probability `μ`, evaluated by
/// closed form (`n = 1` spheres) or quadrature.
pub fn renormalized_potential(model: &SingleSpinModel, c: f64, psi: &[f64]) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!(
            "smoothing scale must be positive, got {c}"
        )));
    }
    let h: Vec<f64> = psi.iter().map(|p| c * p).collect();
    let sq: f64 = psi.iter().map(|p| p * p).sum();
    Ok(0.5 * c * sq - model.log_partition_weighted(&h, c)?)
}

/// `Hess V(ψ) = c I − c² cov_{μ_ψ}(σ)`.
pub fn potential_hessian(model: &SingleSpinModel, c: f64, psi: &[f64]) -> Result<Matrix> {
    let h: Vec<f64> = psi.iter().map(|p| c * p).collect();
    let m = model.tilted_moments_weighted(&h, c)?;
    let n = psi.len();
    Ok(Matrix::identity(n)
        .scaled(c)
        .sub(&m.covariance.scaled(c * c)))
}

/// Central second differences of [`renormalized_potential`].
pub fn hessian_fd(model: &SingleSpinModel, c: f64, psi: &[f64], step: f64) -> Result<Matrix> {
    let n = psi.len();
    let v = |dx: &[(usize, f64)]| -> Result<f64> {
        let mut p = psi.to_vec();
        for &(i, d) in dx {
            p[i] += d;
        }
        renormalized_potential(model, c, &p)
    };
    let v0 = v(&[])?;
    let mut hess = Matrix::zeros(n);
    for i in 0..n {
        hess[(i, i)] = (v(&[(i, step)])? - 2.0 * v0 + v(&[(i, -step)])?) / (step * step);
        for j in (i + 1)..n {
            let pp = v(&[(i, step), (j, step)])?;
            let pm = v(&[(i, step), (j, -step)])?;
            let mp = v(&[(i, -step), (j, step)])?;
            let mm = v(&[(i, -step), (j, -step)])?;
            let d = (pp - pm - mp + mm) / (4.0 * step * step);
            hess[(i, j)] = d;
            hess[(j, i)] = d;
        }
    }
    Ok(hess)
}

/// Magnitudes of the standard ψ grid.
pub const PSI_MAGNITUDES: [f64; 11] = [0.0, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0];

pub fn standard_psi_grid(n: usize) -> Vec<Vec<f64>> {
    let mut grid = Vec::new();
    for d in standard_directions(n) {
        for &m in &PSI_MAGNITUDES {
            grid.push(d.iter().map(|x| x * m).collect());
        }
    }
    grid
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HessianReport {
    pub min_eig_hess: f64,
    pub lambda_be: f64,
    pub pass: bool,
    pub argmin_psi: Vec<f64>,
    /// Largest entrywise `|analytic − finite difference|` over the grid.
    pub max_fd_deviation: f64,
    pub fd_agreement: bool,
    pub points: usize,
}

/// Minimum eigenvalue of `Hess V` over the grid against `λ = c − c²/n`, with the analytic
/// Hessian cross-checked by finite differences at every point.
pub fn hessian_lower_bound_check(
    model: &SingleSpinModel,
    c: f64,
    psi_grid: &[Vec<f64>],
) -> Result<HessianReport> {
    if psi_grid.is_empty() {
        return Err(Error::invalid("ψ grid must be nonempty"));
    }
    let lambda_be = super::bakry_emery_constant(c, model.spin_dimension());
    let mut min_eig = f64::INFINITY;
    let mut argmin = psi_grid[0].clone();
    let mut max_dev: f64 = 0.0;
    for psi in psi_grid {
        let hess = potential_hessian(model, c, psi)?;
        let e = linalg::symmetric_eigen(&hess, false)?.values[0];
        if e < min_eig {
            min_eig = e;
            argmin = psi.clone();
        }
        let fd = hessian_fd(model, c, psi, FD_STEP)?;
        max_dev = max_dev.max(fd.sub(&hess).max_abs());
    }
    Ok(HessianReport {
        min_eig_hess: min_eig,
        lambda_be,
        pass: min_eig >= lambda_be - HESSIAN_TOL,
        argmin_psi: argmin,
        max_fd_deviation: max_dev,
        fd_agreement: max_dev < HESSIAN_FD_TOL,
        points: psi_grid.len(),
    })
}

#[derive(Clone, Debug)]
enum Repr {
    Direct,
    /// Cubic Hermite table of `V(r)` and `V'(r)` on `r ∈ [0, PSI_MAX]`.
    Radial {
        step: f64,
        values: Vec<f64>,
        slopes: Vec<f64>,
    },
}

/// The renormalised single-site potential as used by the field sampler: closed form for
/// Ising spins, a radial table for `n ≥ 2`, direct quadrature for general measures.
#[derive(Clone, Debug)]
pub struct Potential {
    model: SingleSpinModel,
    c: f64,
    repr: Repr,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PotentialRow {
    pub radius: f64,
    pub value: f64,
    pub second_derivative: f64,
    pub second_derivative_fd: f64,
}

impl Potential {
    pub fn new(model: &SingleSpinModel, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!(
                "smoothing scale must be positive, got {c}"
            )));
        }
        let repr = if model.spin_dimension() >= 2 && model.kind() == MeasureKind::Sphere {
            if c * PSI_MAX > model.field_limit() {
                return Err(Error::FieldTooLarge {
                    magnitude: c * PSI_MAX,
                    limit: model.field_limit(),
                });
            }
            let step = PSI_MAX / (TABLE_NODES - 1) as f64;
            let mut values = Vec::with_capacity(TABLE_NODES);
            let mut slopes = Vec::with_capacity(TABLE_NODES);
            for k in 0..TABLE_NODES {
                let r = k as f64 * step;
                let m = model.axis_moments(c * r, c);
                values.push(0.5 * c * r * r - m.log_partition);
                slopes.push(c * r - c * m.mean);
            }
            Repr::Radial {
                step,
                values,
                slopes,
            }
        } else {
            Repr::Direct
        };
        Ok(Potential {
            model: model.clone(),
            c,
            repr,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn spin_dimension(&self) -> usize {
        self.model.spin_dimension()
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.repr, Repr::Radial { .. })
    }

    /// `V(ψ)`; `+∞` where the quadrature cannot be evaluated.
    pub fn value(&self, psi: &[f64]) -> f64 {
        if let Repr::Radial {
            step,
            values,
            slopes,
        } = &self.repr
        {
            let r = psi.iter().map(|p| p * p).sum::<f64>().sqrt();
            if r < PSI_MAX {
                let k = ((r / step) as usize).min(values.len() - 2);
                let t = (r - k as f64 * step) / step;
                let (t2, t3) = (t * t, t * t * t);
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + t;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                return h00 * values[k]
                    + h10 * step * slopes[k]
                    + h01 * values[k + 1]
                    + h11 * step * slopes[k + 1];
            }
        }
        renormalized_potential(&self.model, self.c, psi).unwrap_or(f64::INFINITY)
    }

    /// Rows `(|ψ|, V, V'' analytic, V'' by differences)` along the first axis on an even grid
    /// over `[0, r_max]`.
    pub fn table_rows(&self, r_max: f64, rows: usize) -> Result<Vec<PotentialRow>> {
        let n = self.spin_dimension();
        let rows = rows.max(2);
        (0..rows)
            .map(|k| {
                let r = r_max * k as f64 / (rows - 1) as f64;
                let at = |x: f64| {
                    let mut p = vec![0.0; n];
                    p[0] = x;
                    p
                };
                let value = renormalized_potential(&self.model, self.c, &at(r))?;
                let analytic = potential_hessian(&self.model, self.c, &at(r))?[(0, 0)];
                let fd = (renormalized_potential(&self.model, self.c, &at(r + FD_STEP))?
                    - 2.0 * value
                    + renormalized_potential(&self.model, self.c, &at(r - FD_STEP))?)
                    / (FD_STEP * FD_STEP);
                Ok(PotentialRow {
                    radius: r,
                    value,
                    second_derivative: analytic,
                    second_derivative_fd: fd,
                })
            })
            .collect()
    }
}

pub fn rows_to_csv(rows: &[PotentialRow]) -> String {
    let mut out = String::from("abs_psi,V,V2_analytic,V2_finite_difference\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.radius, r.value, r.second_derivative, r.second_derivative_fd
        ));
    }
    out
}
