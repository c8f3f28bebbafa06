//! Closed-form optimal designs.
//!
//! Each constructor returns the design prescribed by an analytic result
//! together with the signed slack of the inequality that makes the result
//! applicable. A negative margin means the construction is not certified
//! optimal; callers can fall back to [`crate::optimizer`].

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::design::{hypercube_vertices, CriterionOrder, Design, Region};
use crate::error::{DesignError, Result};
use crate::glm::{LinkFamily, ModelSpec, RegressionKind};
use crate::optimizer::{optimize_weights, OptimizerOptions};

/// Rounding slack on a condition margin.
pub const MARGIN_SLACK: f64 = 1e-12;

/// Relative agreement required of the four-point D weight certificate.
pub const FOUR_POINT_AGREEMENT: f64 = 1e-8;

/// Default number of interior points for the interval curvature check.
pub const DEFAULT_INTERVAL_GRID: usize = 999;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// The two criteria with dedicated weight formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    D,
    A,
}

impl Criterion {
    pub fn order(&self) -> f64 {
        match self {
            Criterion::D => 0.0,
            Criterion::A => 1.0,
        }
    }

    pub fn from_order(k: f64) -> Option<Self> {
        if k == 0.0 {
            Some(Criterion::D)
        } else if k == 1.0 {
            Some(Criterion::A)
        } else {
            None
        }
    }
}

/// A constructed design with the status of its applicability condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructResult {
    pub design: Design,
    #[serde(rename = "case")]
    pub case_label: String,
    pub condition_ok: bool,
    pub condition_margin: f64,
}

impl ConstructResult {
    fn new(design: Design, case_label: impl Into<String>, condition_margin: f64) -> Self {
        Self {
            design,
            case_label: case_label.into(),
            condition_ok: condition_margin >= -MARGIN_SLACK,
            condition_margin,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("construct result serializes")
    }
}

fn intensities(spec: &ModelSpec, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.iter().map(|x| spec.intensity(x)).collect()
}

fn require_kind(spec: &ModelSpec, ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(DesignError::Precondition(format!(
            "{what} (got {} with {} factors)",
            spec.kind().name(),
            spec.factors()
        )))
    }
}

/// Optimal weights on a saturated support of `p` linearly independent points.
///
/// D gives `1/p`. A gives `w_i ∝ sqrt(c_ii / u_i)` where `c_ii` are the
/// diagonal entries of `(F^-1)' F^-1` and `F` stacks the regression vectors.
pub fn saturated_weights(spec: &ModelSpec, points: &[Vec<f64>], criterion: Criterion) -> Result<Vec<f64>> {
    let p = spec.dim();
    if points.len() != p {
        return Err(DesignError::DimensionMismatch {
            expected: p,
            got: points.len(),
        });
    }
    let mut f = DMatrix::zeros(p, p);
    for (i, x) in points.iter().enumerate() {
        f.set_row(i, &spec.regression_vector(x)?.transpose());
    }
    let det = f.determinant();
    if !(det.abs() > 1e-12 * f.norm().powi(p as i32)) {
        return Err(DesignError::RankDeficient);
    }
    let u = intensities(spec, points)?;
    match criterion {
        Criterion::D => Ok(vec![1.0 / p as f64; p]),
        Criterion::A => {
            let inv = f.try_inverse().ok_or(DesignError::RankDeficient)?;
            let raw: Vec<f64> = (0..p).map(|i| (inv.column(i).norm_squared() / u[i]).sqrt()).collect();
            let total: f64 = raw.iter().sum();
            Ok(raw.into_iter().map(|r| r / total).collect())
        }
    }
}

/// Published closed-form weights for four points of a three-parameter model
/// whose second and third points are exchangeable (`u_2 = u_3`,
/// `d_2^2 = d_3^2`).
///
/// `d_i` is the determinant of the regression vectors of the other three
/// points, in their original order. The formulas are exact when all `u_i`
/// agree but do not satisfy the D stationarity condition in general, so
/// [`two_factor_design`] does not rely on them.
pub fn fourpoint_d_weights(spec: &ModelSpec, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if spec.dim() != 3 {
        return Err(DesignError::Precondition("four-point weights need a 3-parameter model".into()));
    }
    if points.len() != 4 {
        return Err(DesignError::DimensionMismatch {
            expected: 4,
            got: points.len(),
        });
    }
    let f = points
        .iter()
        .map(|x| spec.regression_vector(x))
        .collect::<Result<Vec<_>>>()?;
    let u = intensities(spec, points)?;
    let minor = |skip: usize| {
        let cols: Vec<_> = (0..4).filter(|&j| j != skip).map(|j| f[j].clone()).collect();
        Matrix3::from_columns(&[
            cols[0].fixed_rows::<3>(0).into_owned(),
            cols[1].fixed_rows::<3>(0).into_owned(),
            cols[2].fixed_rows::<3>(0).into_owned(),
        ])
        .determinant()
    };
    let d2: Vec<f64> = (0..4).map(|i| minor(i).powi(2)).collect();
    let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max).powi(3);
    if d2.iter().any(|d| d.sqrt() <= 1e-12 * scale) {
        return Err(DesignError::Precondition("every triple of regression vectors must be independent".into()));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    if !close(u[1], u[2]) || !close(d2[1], d2[2]) {
        return Err(DesignError::Precondition(
            "second and third points must share intensity and squared minor".into(),
        ));
    }
    let w1 = 0.375 + 0.25 / (1.0 + d2[0] / d2[3] * u[0] / u[3] - 4.0 * d2[1] / d2[3] * u[0] / u[1]);
    let w23 = 0.5 / (4.0 - d2[3] / d2[1] * u[1] / u[0] - d2[0] / d2[1] * u[1] / u[3]);
    let w4 = 0.375 + 0.25 / (1.0 + d2[3] / d2[0] * u[3] / u[0] - 4.0 * d2[1] / d2[0] * u[3] / u[1]);
    let weights = [w1, w23, w23, w4];
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0 && *w < 1.0)) {
        return Err(DesignError::Precondition(format!(
            "four-point optimum does not exist on this support (weights {weights:?})"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(DesignError::Precondition(format!("four-point weights sum to {total}")));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

fn axis_points(a: &[f64]) -> Vec<Vec<f64>> {
    (0..a.len())
        .map(|i| {
            let mut p = vec![0.0; a.len()];
            p[i] = a[i];
            p
        })
        .collect()
}

fn check_axis_scales(spec: &ModelSpec, a: &[f64]) -> Result<()> {
    require_kind(spec, !spec.kind().has_intercept(), "axis designs need a model without intercept")?;
    if a.len() != spec.factors() {
        return Err(DesignError::DimensionMismatch {
            expected: spec.factors(),
            got: a.len(),
        });
    }
    if a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(DesignError::Precondition("axis scales must be positive".into()));
    }
    Ok(())
}

/// Weights proportional to `t_i^(-k/(k+1))`, `t_i^-1` for the E criterion.
fn power_weights(t: &[f64], k: CriterionOrder) -> Vec<f64> {
    let exponent = match k {
        CriterionOrder::Finite(k) => -k / (k + 1.0),
        CriterionOrder::Infinite => -1.0,
    };
    // log space keeps extreme intensities from overflowing
    let logs: Vec<f64> = t.iter().map(|v| exponent * v.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// `Phi_k`-optimal weights on the axis points `a_i e_i` of a model without
/// intercept: `w_i ∝ (a_i^2 u_i)^(-k/(k+1))`.
pub fn phik_axis_weights(spec: &ModelSpec, a: &[f64], k: CriterionOrder) -> Result<Vec<f64>> {
    check_axis_scales(spec, a)?;
    let u = intensities(spec, &axis_points(a))?;
    let t: Vec<f64> = a.iter().zip(&u).map(|(ai, ui)| ai * ai * ui).collect();
    Ok(power_weights(&t, k))
}

/// Optimal design on the two-point region `{a, b}` of a single-factor model.
pub fn binary_two_point_design(spec: &ModelSpec, a: f64, b: f64, criterion: Criterion) -> Result<Design> {
    require_kind(
        spec,
        spec.kind() == RegressionKind::SingleFactorIntercept,
        "two-point designs need the single-factor model",
    )?;
    if a == b {
        return Err(DesignError::Precondition("the two points must differ".into()));
    }
    let ua = spec.intensity(&[a])?;
    let ub = spec.intensity(&[b])?;
    let weights = match criterion {
        Criterion::D => vec![0.5, 0.5],
        Criterion::A => {
            let na = ua.powf(-0.5) * (1.0 + b * b).sqrt();
            let nb = ub.powf(-0.5) * (1.0 + a * a).sqrt();
            vec![na / (na + nb), nb / (na + nb)]
        }
    };
    Design::normalized(vec![vec![a], vec![b]], weights)
}

/// `q''(x)` for `q = 1/u` along the single factor.
fn inverse_intensity_second_derivative(spec: &ModelSpec, x: f64) -> Result<f64> {
    let beta = spec.beta();
    if let Some(curv) = spec.family().inverse_intensity_curvature(beta[0] + beta[1] * x) {
        // domain check for the analytic branch
        spec.intensity(&[x])?;
        return Ok(beta[1] * beta[1] * curv);
    }
    let h = 1e-4 * x.abs().max(1.0);
    let q = |t: f64| spec.intensity(&[t]).map(|u| 1.0 / u);
    Ok((q(x + h)? - 2.0 * q(x)? + q(x - h)?) / (h * h))
}

/// Two-point design on `{0, 1}` for the single-factor model on `[0, 1]`,
/// with its sufficient curvature condition checked at `grid_n` interior points.
pub fn interval_boundary_design(spec: &ModelSpec, criterion: Criterion, grid_n: usize) -> Result<ConstructResult> {
    require_kind(
        spec,
        spec.kind() == RegressionKind::SingleFactorIntercept,
        "the interval design needs the single-factor model",
    )?;
    if grid_n == 0 {
        return Err(DesignError::Precondition("grid_n must be positive".into()));
    }
    let q_sq0 = 1.0 / spec.intensity(&[0.0])?;
    let q_sq1 = 1.0 / spec.intensity(&[1.0])?;
    let (q0, q1) = (q_sq0.sqrt(), q_sq1.sqrt());
    let (lhs, weights, label) = match criterion {
        Criterion::D => (q_sq0 + q_sq1, vec![0.5, 0.5], "D-boundary"),
        Criterion::A => {
            let c = SQRT_2 * q0 + q1;
            (q_sq0 + q_sq1 + SQRT_2 * q0 * q1, vec![SQRT_2 * q0 / c, q1 / c], "A-boundary")
        }
    };
    let mut margin = f64::INFINITY;
    for j in 1..=grid_n {
        let x = j as f64 / (grid_n + 1) as f64;
        margin = margin.min(lhs - inverse_intensity_second_derivative(spec, x)? / 2.0);
    }
    let design = Design::normalized(vec![vec![0.0], vec![1.0]], weights)?;
    Ok(ConstructResult::new(design, label, margin))
}

fn corners2() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
}

/// Options used for numerically determined four-point weights.
fn four_point_options() -> OptimizerOptions {
    OptimizerOptions::default()
        .with_tolerance(1e-13)
        .with_max_iterations(2_000_000)
}

/// Locally D- or A-optimal design for the two-factor model with intercept
/// on `{0,1}^2`.
///
/// Corners are numbered `(0,0), (1,0), (0,1), (1,1)`.
pub fn two_factor_design(spec: &ModelSpec, criterion: Criterion) -> Result<ConstructResult> {
    require_kind(
        spec,
        spec.kind() == RegressionKind::FirstOrderIntercept(2),
        "the two-factor design needs the first-order model with intercept and two factors",
    )?;
    let corners = corners2();
    let u = intensities(spec, &corners)?;
    match criterion {
        Criterion::D => two_factor_d(spec, &corners, &u),
        Criterion::A => two_factor_a(spec, &corners, &u),
    }
}

fn two_factor_d(spec: &ModelSpec, corners: &[Vec<f64>], u: &[f64]) -> Result<ConstructResult> {
    let mut order: Vec<usize> = (0..4).collect();
    // stable: ties keep corner order
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
    let lowest = order[0];
    let rest: f64 = order[1..].iter().map(|&i| 1.0 / u[i]).sum();
    let slack = 1.0 / u[lowest] - rest;
    if slack >= 0.0 {
        let support: Vec<Vec<f64>> = (0..4).filter(|&i| i != lowest).map(|i| corners[i].clone()).collect();
        return Ok(ConstructResult::new(Design::uniform(support)?, "D-3pt", slack));
    }

    let solved = equal_product_weights(u, lowest).filter(|w| product_spread(u, w) <= FOUR_POINT_AGREEMENT);
    let weights = match solved {
        Some(w) => w,
        None => optimize_weights(spec, corners, 0.0, &four_point_options())?.weights().to_vec(),
    };
    let spread = product_spread(u, &weights);
    if !(spread <= FOUR_POINT_AGREEMENT) {
        return Err(DesignError::NonConvergence {
            iterations: four_point_options().max_iterations,
            gap: spread,
        });
    }
    Ok(ConstructResult::new(Design::normalized(corners.to_vec(), weights)?, "D-4pt", -slack))
}

/// Relative spread of `u_i w_i (1/3 - w_i)` over the four corners.
fn product_spread(u: &[f64], w: &[f64]) -> f64 {
    let products: Vec<f64> = u.iter().zip(w).map(|(ui, wi)| ui * wi * (1.0 / 3.0 - wi)).collect();
    let mean = products.iter().sum::<f64>() / products.len() as f64;
    products.iter().map(|c| (c - mean).abs()).fold(0.0, f64::max) / mean.abs()
}

/// Solves `u_i w_i (1/3 - w_i) = const`, `sum w = 1` on the four corners.
///
/// With `t` the weight of the lowest-intensity corner `j`, every other weight
/// is `1/6 + sqrt(1/36 - u_j t (1/3 - t) / u_i)`; at most the weight of `j`
/// can sit on the lower root. `sum w - 1 = t h(t)` with `h(0) < 0` exactly
/// when the three-point condition fails and `h(1/3) = 1`, so `t` is found by
/// bisection on `h`.
fn equal_product_weights(u: &[f64], j: usize) -> Option<Vec<f64>> {
    let ratios: Vec<(usize, f64)> = (0..u.len()).filter(|&i| i != j).map(|i| (i, u[j] / u[i])).collect();
    let h = |t: f64| {
        1.0 - ratios
            .iter()
            .map(|&(_, r)| {
                let z = 36.0 * r * t * (1.0 / 3.0 - t);
                6.0 * r * (1.0 / 3.0 - t) / (1.0 + (1.0 - z).sqrt())
            })
            .sum::<f64>()
    };
    if !(h(0.0) < 0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0 / 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let mut w = vec![0.0; u.len()];
    w[j] = t;
    for &(i, r) in &ratios {
        w[i] = (1.0 + (1.0 - 36.0 * r * t * (1.0 / 3.0 - t)).sqrt()) / 6.0;
    }
    let total: f64 = w.iter().sum();
    if !(w.iter().all(|v| *v > 0.0 && *v < 1.0 / 3.0) && (total - 1.0).abs() <= 1e-9) {
        return None;
    }
    Some(w.into_iter().map(|v| v / total).collect())
}

fn two_factor_a(spec: &ModelSpec, corners: &[Vec<f64>], u: &[f64]) -> Result<ConstructResult> {
    let q: Vec<f64> = u.iter().map(|v| v.powf(-0.5)).collect();
    let qq: Vec<f64> = u.iter().map(|v| 1.0 / v).collect();
    let (q1, q2, q3, q4) = (q[0], q[1], q[2], q[3]);
    let two_sqrt_two_thirds = 2.0 * (2.0f64 / 3.0).sqrt();
    let two_over_sqrt3 = 2.0 / SQRT_3;

    // (slack, dropped corner, numerators over the remaining corners)
    let cases = [
        (
            "A-3pt-i",
            qq[0] - (qq[1] + qq[2] + qq[3] + q2 * q3 + two_sqrt_two_thirds * (q2 * q4 + q3 * q4)),
            0,
            [SQRT_2 * q2, SQRT_2 * q3, SQRT_3 * q4],
        ),
        (
            "A-3pt-ii",
            qq[1] - (qq[0] + qq[2] + qq[3] + q1 * q3 + SQRT_2 * q3 * q4),
            1,
            [SQRT_2 * q1, SQRT_2 * q3, q4],
        ),
        (
            "A-3pt-iii",
            qq[2] - (qq[0] + qq[1] + qq[3] + q1 * q2 + SQRT_2 * q2 * q4),
            2,
            [SQRT_2 * q1, SQRT_2 * q2, q4],
        ),
        (
            "A-3pt-iv",
            qq[3] - (qq[0] + qq[1] + qq[2] + two_over_sqrt3 * (q1 * q2 + q1 * q3)),
            3,
            [SQRT_3 * q1, q2, q3],
        ),
    ];
    for (label, slack, dropped, numerators) in cases {
        if slack >= 0.0 {
            let support: Vec<Vec<f64>> = (0..4).filter(|&i| i != dropped).map(|i| corners[i].clone()).collect();
            let design = Design::normalized(support, numerators.to_vec())?;
            return Ok(ConstructResult::new(design, label, slack));
        }
    }
    let closest = cases.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let design = optimize_weights(spec, corners, 1.0, &four_point_options())?;
    Ok(ConstructResult::new(design, "A-4pt-numeric", -closest))
}

/// Saturated design on the origin and the unit vectors of `{0,1}^nu` for the
/// first-order model with intercept, with its optimality condition checked
/// at every vertex.
pub fn corner_design_multifactor(spec: &ModelSpec, criterion: Criterion) -> Result<ConstructResult> {
    let nu = spec.factors();
    require_kind(
        spec,
        spec.kind() == RegressionKind::FirstOrderIntercept(nu) && nu >= 2,
        "the corner design needs the first-order model with intercept and at least two factors",
    )?;
    let mut support = vec![vec![0.0; nu]];
    support.extend(axis_points(&vec![1.0; nu]));
    let u = intensities(spec, &support)?;
    let inv_u: Vec<f64> = u.iter().map(|v| 1.0 / v).collect();
    let q: Vec<f64> = u.iter().map(|v| v.powf(-0.5)).collect();
    let root = ((nu + 1) as f64).sqrt();

    let mut margin = f64::INFINITY;
    for x in hypercube_vertices(nu) {
        let s: f64 = x.iter().sum();
        let lhs = match criterion {
            Criterion::D => inv_u[0] * (1.0 - s).powi(2) + (0..nu).map(|i| inv_u[i + 1] * x[i] * x[i]).sum::<f64>(),
            Criterion::A => {
                let cross: f64 = (0..nu).map(|i| q[i + 1] * x[i]).sum();
                inv_u[0] * (1.0 - s).powi(2)
                    + (0..nu).map(|i| inv_u[i + 1] * x[i] * x[i]).sum::<f64>()
                    + 2.0 * q[0] / root * (s - 1.0) * cross
            }
        };
        margin = margin.min(1.0 / spec.intensity(&x)? - lhs);
    }
    let (weights, label) = match criterion {
        Criterion::D => (vec![1.0; nu + 1], "D-corner"),
        Criterion::A => {
            let mut w = vec![root * q[0]];
            w.extend_from_slice(&q[1..]);
            (w, "A-corner")
        }
    };
    Ok(ConstructResult::new(Design::normalized(support, weights)?, label, margin))
}

/// Saturated axis design `{a_i e_i}` for a model without intercept.
///
/// Gamma models are always certified. Poisson models on `{0,1}^nu` with unit
/// scales use the two-largest-rates test. Otherwise the condition
/// `u(x) sum_i x_i^2 / (u_i a_i^2) <= 1` is checked at every region point.
pub fn axis_design(spec: &ModelSpec, a: &[f64], k: CriterionOrder, region: &Region) -> Result<ConstructResult> {
    check_axis_scales(spec, a)?;
    let candidates = region.candidates()?;
    if let Some(p) = candidates.iter().find(|p| p.len() != spec.factors()) {
        return Err(DesignError::DimensionMismatch {
            expected: spec.factors(),
            got: p.len(),
        });
    }
    let support = axis_points(a);
    let u = intensities(spec, &support)?;
    let nu = a.len();

    match spec.family() {
        LinkFamily::GammaInverse => {
            // a_i^2 u_i = beta_i^-2, so the weights do not depend on a
            let t: Vec<f64> = spec.beta().iter().map(|b| b.powi(-2)).collect();
            let design = Design::normalized(support, power_weights(&t, k))?;
            Ok(ConstructResult::new(design, "gamma-axis", 0.0))
        }
        LinkFamily::PoissonLog
            if nu >= 2 && *region == (Region::BinaryHypercube { nu }) && a.iter().all(|&v| v == 1.0) =>
        {
            let mut rates: Vec<f64> = spec.beta().iter().map(|b| b.exp()).collect();
            rates.sort_by(|x, y| y.total_cmp(x));
            let margin = 1.0 - (rates[0] + rates[1]);
            let design = Design::normalized(support, phik_axis_weights(spec, a, k)?)?;
            Ok(ConstructResult::new(design, "poisson-unit-axis", margin))
        }
        _ => {
            let mut margin = f64::INFINITY;
            for x in &candidates {
                let quad: f64 = (0..nu).map(|i| x[i] * x[i] / (u[i] * a[i] * a[i])).sum();
                let lhs = if quad == 0.0 { 0.0 } else { spec.intensity(x)? * quad };
                margin = margin.min(1.0 - lhs);
            }
            let design = Design::normalized(support, phik_axis_weights(spec, a, k)?)?;
            Ok(ConstructResult::new(design, "axis", margin))
        }
    }
}

/// Linear model without intercept used by [`hypercube_linear_design`].
pub fn hypercube_linear_spec(nu: usize) -> Result<ModelSpec> {
    ModelSpec::new(
        LinkFamily::LinearIdentity,
        RegressionKind::FirstOrderNoIntercept(nu),
        vec![0.0; nu],
    )
}

/// Equally weighted layer designs `{x in {0,1}^nu : sum x = m}` for the
/// linear model without intercept.
///
/// Odd `nu = 2q+1`: layer `q+1` for both criteria. Even `nu = 2q`: layers
/// `q` and `q+1` for D, layer `q` for A.
pub fn hypercube_linear_design(nu: usize, criterion: Criterion) -> Result<Design> {
    if nu < 2 {
        return Err(DesignError::Precondition(format!("need at least two factors, got {nu}")));
    }
    let q = nu / 2;
    let layers: Vec<usize> = match (nu % 2, criterion) {
        (1, _) => vec![q + 1],
        (_, Criterion::D) => vec![q, q + 1],
        (_, Criterion::A) => vec![q],
    };
    let mut vertices = hypercube_vertices(nu);
    // descending lexicographic within a layer
    vertices.reverse();
    let support: Vec<Vec<f64>> = layers
        .iter()
        .flat_map(|&m| {
            vertices
                .iter()
                .filter(move |v| v.iter().sum::<f64>() as usize == m)
                .cloned()
                .collect::<Vec<_>>()
        })
        .collect();
    Design::uniform(support)
}
