//! Single-spin measures and their tilts `μ^h(dσ) ∝ exp(h·σ) μ(dσ)`.
//!
//! `μ` is normalized to a probability measure. On the spheres every quantity depends on
//! `h` only through `|h|` and the direction `ĥ`, so integrals reduce to one-dimensional
//! rules in the longitudinal coordinate `t = ĥ·σ`:
//!
//! * `n = 1`: two points `t = ±1`, closed forms.
//! * `n = 2`: `t = cos θ`, periodic trapezoid in θ (128 nodes).
//! * `n = 3`: `t` is uniform on `[−1, 1]` (Archimedes), Gauss–Legendre (64 nodes).
//!
//! A general bounded measure on `[−R, R]` is given by a node/weight table.

use std::f64::consts::LN_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quadrature;

/// Default trapezoid nodes on the circle (`n = 2`).
pub const CIRCLE_NODES: usize = 128;
/// Default Gauss–Legendre nodes in `cos θ` (`n = 3`).
pub const SPHERE_NODES: usize = 64;
/// `|h| · R` beyond this is rejected instead of risking `exp` overflow.
pub const FIELD_LIMIT: f64 = 700.0;
/// Above this `|h|` the `n = 3` rule is split into a boundary-layer panel of width
/// `SPHERE_LAYER / |h|` next to `t = 1` plus the remainder, each with the full rule.
const SPHERE_PANEL_FIELD: f64 = 20.0;
const SPHERE_LAYER: f64 = 40.0;
/// Slack allowed on top of `R²/n` by [`variance_bound_check`].
pub const VARIANCE_TOL: f64 = 1e-8;
/// Single-spin LSI constant of the Ising spin (`2/γ = 1/2`).
pub const ISING_GAMMA: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Sphere,
    GeneralBounded,
}

/// Density table accepted for the general bounded kind.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityTable {
    pub radius: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub gamma: f64,
}

impl DensityTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

#[derive(Clone, Debug)]
enum Rule {
    /// The two-point measure; handled in closed form.
    Ising,
    /// Nodes `t_i` in the longitudinal coordinate, `1 − t_i²`, and weights summing to one.
    Circle {
        t: Vec<f64>,
        s: Vec<f64>,
        w: Vec<f64>,
    },
    /// Gauss–Legendre reference rule on `[−1, 1]`, raw weights (sum 2).
    Sphere {
        x: Vec<f64>,
        w: Vec<f64>,
    },
    Table {
        x: Vec<f64>,
        w: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct SingleSpinModel {
    n: usize,
    kind: MeasureKind,
    radius: f64,
    gamma: Option<f64>,
    resolution: usize,
    rule: Rule,
}

/// Moments of `σ` under `μ^h`.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TiltedMoments {
    pub field: Vec<f64>,
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    /// `log ∫ exp(h·σ) dμ` with `μ` a probability measure.
    pub log_partition: f64,
    /// Variance along `ĥ`.
    pub longitudinal_variance: f64,
    /// Variance along each direction orthogonal to `ĥ` (0 when `n = 1`).
    pub transverse_variance: f64,
}

impl TiltedMoments {
    /// Largest eigenvalue of the covariance: the maximal directional variance.
    pub fn max_directional_variance(&self) -> f64 {
        if self.field.len() == 1 {
            self.longitudinal_variance
        } else {
            self.longitudinal_variance.max(self.transverse_variance)
        }
    }
}

/// Moments along the field direction for a measure `∝ exp(r t − a|σ|²/2) μ`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct AxisMoments {
    pub log_partition: f64,
    pub mean: f64,
    pub var_long: f64,
    pub var_trans: f64,
}

impl SingleSpinModel {
    /// Uniform measure on `S^{n−1}`, `n ∈ {1, 2, 3}`, at default resolution.
    pub fn sphere(n: usize, gamma: Option<f64>) -> Result<Self> {
        let resolution = match n {
            1 => 2,
            2 => CIRCLE_NODES,
            3 => SPHERE_NODES,
            _ => {
                return Err(Error::invalid(format!(
                    "sphere spins are supported for n ∈ {{1, 2, 3}}, got {n}"
                )))
            }
        };
        Self::sphere_with_resolution(n, gamma, resolution)
    }

    pub fn sphere_with_resolution(n: usize, gamma: Option<f64>, resolution: usize) -> Result<Self> {
        if let Some(g) = gamma {
            check_gamma(g)?;
        }
        let rule = match n {
            1 => Rule::Ising,
            2 => {
                let (theta, w) = quadrature::periodic_trapezoid(resolution);
                let t = theta.iter().map(|a| a.cos()).collect();
                let s = theta.iter().map(|a| a.sin().powi(2)).collect();
                Rule::Circle { t, s, w }
            }
            3 => {
                let (x, w) = quadrature::gauss_legendre(resolution);
                Rule::Sphere { x, w }
            }
            _ => {
                return Err(Error::invalid(format!(
                    "sphere spins are supported for n ∈ {{1, 2, 3}}, got {n}"
                )))
            }
        };
        Ok(SingleSpinModel {
            n,
            kind: MeasureKind::Sphere,
            radius: 1.0,
            gamma,
            resolution,
            rule,
        })
    }

    /// Probability measure on `[−R, R]` from a node/weight table. Weights are normalized.
    pub fn general_bounded(table: &DensityTable) -> Result<Self> {
        let r = table.radius;
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {r}")));
        }
        if table.nodes.is_empty() || table.nodes.len() != table.weights.len() {
            return Err(Error::invalid(
                "density table needs equally many nodes and weights (≥ 1)",
            ));
        }
        if let Some(x) = table.nodes.iter().find(|x| !(x.abs() <= r)) {
            return Err(Error::invalid(format!("node {x} outside [−{r}, {r}]")));
        }
        if let Some(w) = table.weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!("weights must be positive, got {w}")));
        }
        check_gamma(table.gamma)?;
        let total: f64 = table.weights.iter().sum();
        Ok(SingleSpinModel {
            n: 1,
            kind: MeasureKind::GeneralBounded,
            radius: r,
            gamma: Some(table.gamma),
            resolution: table.nodes.len(),
            rule: Rule::Table {
                x: table.nodes.clone(),
                w: table.weights.iter().map(|w| w / total).collect(),
            },
        })
    }

    pub fn spin_dimension(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// The single-spin LSI constant γ: the configured value, else the Ising default.
    pub fn gamma(&self) -> Result<f64> {
        match self.kind {
            MeasureKind::Sphere => single_spin_lsi_default(self.n, self.gamma),
            MeasureKind::GeneralBounded => self.gamma.ok_or(Error::NoDefaultGamma(self.n)),
        }
    }

    /// Bound used by the variance check: `R²/n`.
    pub fn variance_bound(&self) -> f64 {
        self.radius * self.radius / self.n as f64
    }

    pub fn field_limit(&self) -> f64 {
        FIELD_LIMIT / self.radius
    }

    fn check_field(&self, magnitude: f64) -> Result<()> {
        if !magnitude.is_finite() || magnitude > self.field_limit() {
            return Err(Error::FieldTooLarge {
                magnitude,
                limit: self.field_limit(),
            });
        }
        Ok(())
    }

    pub fn tilted_moments(&self, h: &[f64]) -> Result<TiltedMoments> {
        self.tilted_moments_weighted(h, 0.0)
    }

    /// Moments of the measure `∝ exp(h·σ − a|σ|²/2) μ(dσ)`. On spheres the extra factor is
    /// constant and only shifts `log_partition` by `−a/2`.
    pub fn tilted_moments_weighted(&self, h: &[f64], a: f64) -> Result<TiltedMoments> {
        if h.len() != self.n {
            return Err(Error::InvalidDimensions(format!(
                "field has {} components, spin dimension is {}",
                h.len(),
                self.n
            )));
        }
        let magnitude = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.check_field(magnitude)?;
        let (dir, r) = if self.n == 1 {
            // Signed scalar: the general table need not be symmetric.
            (vec![1.0], h[0])
        } else if magnitude > 0.0 {
            (
                h.iter().map(|x| x / magnitude).collect::<Vec<_>>(),
                magnitude,
            )
        } else {
            let mut e = vec![0.0; self.n];
            e[0] = 1.0;
            (e, 0.0)
        };
        let m = self.axis_moments(r, a);
        let mut cov = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let iso = if i == j { m.var_trans } else { 0.0 };
                cov[(i, j)] = iso + (m.var_long - m.var_trans) * dir[i] * dir[j];
            }
        }
        Ok(TiltedMoments {
            field: h.to_vec(),
            mean: dir.iter().map(|d| d * m.mean).collect(),
            covariance: cov,
            log_partition: m.log_partition,
            longitudinal_variance: m.var_long,
            transverse_variance: m.var_trans,
        })
    }

    /// Moments along the field axis at signed strength `r` (for `n ≥ 2`, `r = |h| ≥ 0`).
    /// The caller has checked `r` against the field limit.
    pub(crate) fn axis_moments(&self, r: f64, a: f64) -> AxisMoments {
        match &self.rule {
            Rule::Ising => {
                let x = r.abs();
                let e = (-2.0 * x).exp();
                let tanh = r.signum() * (1.0 - e) / (1.0 + e);
                AxisMoments {
                    log_partition: x + e.ln_1p() - LN_2 - 0.5 * a,
                    mean: if r == 0.0 { 0.0 } else { tanh },
                    var_long: 4.0 * e / ((1.0 + e) * (1.0 + e)),
                    var_trans: 0.0,
                }
            }
            Rule::Circle { t, s, w } => {
                let mut m = weighted_axis(r, t, w, Some(s), 1.0);
                m.log_partition -= 0.5 * a;
                m
            }
            Rule::Sphere { x, w } => {
                let (t, s, wt) = sphere_nodes(x, w, r);
                let mut m = weighted_axis(r, &t, &wt, Some(&s), 0.5);
                m.log_partition -= 0.5 * a;
                m
            }
            Rule::Table { x, w } => {
                if a == 0.0 {
                    weighted_axis(r, x, w, None, 0.0)
                } else {
                    let w2: Vec<f64> = x
                        .iter()
                        .zip(w)
                        .map(|(x, w)| w * (-0.5 * a * x * x).exp())
                        .collect();
                    weighted_axis(r, x, &w2, None, 0.0)
                }
            }
        }
    }

    /// `log ∫ exp(h·σ − a|σ|²/2) dμ`.
    pub fn log_partition_weighted(&self, h: &[f64], a: f64) -> Result<f64> {
        Ok(self.tilted_moments_weighted(h, a)?.log_partition)
    }
}

fn check_gamma(g: f64) -> Result<()> {
    if g > 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "gamma must be positive and finite, got {g}"
        )))
    }
}

/// Nodes in `t`, `1 − t²` and weights (summing to one) for the `n = 3` rule at field `r`.
fn sphere_nodes(x: &[f64], w: &[f64], r: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = Vec::with_capacity(2 * x.len());
    let mut s = Vec::with_capacity(2 * x.len());
    let mut wt = Vec::with_capacity(2 * x.len());
    // Panel [lo, hi] ⊂ [−1, 1], written in terms of the distance to t = 1 for accuracy.
    let mut push = |d_lo: f64, d_hi: f64| {
        // d = 1 − t runs from d_hi (t = lo) to d_lo (t = hi).
        let half = 0.5 * (d_hi - d_lo);
        let mid = 0.5 * (d_hi + d_lo);
        for (xi, wi) in x.iter().zip(w) {
            let d = mid - half * xi;
            t.push(1.0 - d);
            s.push(d * (2.0 - d));
            wt.push(0.5 * wi * half);
        }
    };
    if r.abs() <= SPHERE_PANEL_FIELD {
        push(0.0, 2.0);
    } else {
        let layer = SPHERE_LAYER / r.abs();
        push(0.0, layer);
        push(layer, 2.0);
    }
    (t, s, wt)
}

/// Tilted axis moments from a discrete rule. `trans_factor` converts `E[s]` to the variance
/// per transverse direction (`1` on the circle, `1/2` on `S²`).
fn weighted_axis(
    r: f64,
    t: &[f64],
    w: &[f64],
    s: Option<&[f64]>,
    trans_factor: f64,
) -> AxisMoments {
    let shift = t.iter().map(|&ti| r * ti).fold(f64::NEG_INFINITY, f64::max);
    let p: Vec<f64> = t
        .iter()
        .zip(w)
        .map(|(&ti, &wi)| wi * (r * ti - shift).exp())
        .collect();
    let z: f64 = p.iter().sum();
    let mean = t.iter().zip(&p).map(|(ti, pi)| ti * pi).sum::<f64>() / z;
    let var_long = t
        .iter()
        .zip(&p)
        .map(|(ti, pi)| (ti - mean).powi(2) * pi)
        .sum::<f64>()
        / z;
    let var_trans = s.map_or(0.0, |s| {
        trans_factor * s.iter().zip(&p).map(|(si, pi)| si * pi).sum::<f64>() / z
    });
    AxisMoments {
        log_partition: shift + z.ln(),
        mean,
        var_long,
        var_trans,
    }
}

/// γ for the given spin dimension: `configured` if present, else 4 for Ising. No value is
/// assumed for `n ≥ 2`.
pub fn single_spin_lsi_default(n: usize, configured: Option<f64>) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::invalid(format!(
            "spin dimension must be 1, 2 or 3, got {n}"
        )));
    }
    if let Some(g) = configured {
        check_gamma(g)?;
        return Ok(g);
    }
    if n == 1 {
        Ok(ISING_GAMMA)
    } else {
        Err(Error::NoDefaultGamma(n))
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VarianceBoundReport {
    pub max_directional_variance: f64,
    pub bound: f64,
    pub pass: bool,
    pub argmax_field: Vec<f64>,
    pub points: usize,
}

/// Largest directional variance `max_{|x|=1} var_{μ^h}(x·σ)` over the grid versus `R²/n`.
pub fn variance_bound_check(
    model: &SingleSpinModel,
    grid: &[Vec<f64>],
) -> Result<VarianceBoundReport> {
    if grid.is_empty() {
        return Err(Error::invalid("field grid must be nonempty"));
    }
    let mut best = f64::NEG_INFINITY;
    let mut argmax = grid[0].clone();
    for h in grid {
        let v = model.tilted_moments(h)?.max_directional_variance();
        if v > best {
            best = v;
            argmax = h.clone();
        }
    }
    let bound = model.variance_bound();
    Ok(VarianceBoundReport {
        max_directional_variance: best,
        bound,
        pass: best <= bound + VARIANCE_TOL,
        argmax_field: argmax,
        points: grid.len(),
    })
}

/// Field magnitudes of the standard grid.
pub const STANDARD_MAGNITUDES: [f64; 7] = [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];

/// Three fixed unit directions in `ℝⁿ` (for `n = 1`: `+1`, `−1`, `+1`).
pub fn standard_directions(n: usize) -> Vec<Vec<f64>> {
    let raw: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [1.0, 1.0, 1.0], [-0.3, 0.8, -0.5]];
    raw.iter()
        .enumerate()
        .map(|(k, d)| {
            if n == 1 {
                vec![if k == 1 { -1.0 } else { 1.0 }]
            } else {
                let v = &d[..n];
                let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / len).collect()
            }
        })
        .collect()
}

/// `|h| ∈ {0, 0.1, 0.5, 1, 2, 5, 10}` along each of the three standard directions.
pub fn standard_field_grid(n: usize) -> Vec<Vec<f64>> {
    let mut grid = Vec::new();
    for d in standard_directions(n) {
        for &m in &STANDARD_MAGNITUDES {
            grid.push(d.iter().map(|x| x * m).collect());
        }
    }
    grid
}
