//! Designs, candidate regions, information matrices and Kiefer criteria.

use std::cmp::Ordering;
use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::glm::ModelSpec;

/// Tolerance on the weight sum of a design.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A matrix is singular when `lambda_min <= SINGULAR_RATIO * lambda_max`.
pub const SINGULAR_RATIO: f64 = 1e-10;

/// Relative asymmetry accepted by the eigen-solver entry points.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Identity key of a point: every coordinate rounded to 12 significant digits.
pub fn canonical_key(point: &[f64]) -> Vec<String> {
    point.iter().map(|&x| format!("{:.11e}", x + 0.0)).collect()
}

/// Lexicographic comparison of points.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Finitely supported probability measure on the design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDesign", into = "RawDesign")]
pub struct Design {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDesign {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<RawDesign> for Design {
    type Error = DesignError;

    fn try_from(raw: RawDesign) -> Result<Self> {
        Design::new(raw.points, raw.weights)
    }
}

impl From<Design> for RawDesign {
    fn from(d: Design) -> Self {
        RawDesign {
            points: d.points,
            weights: d.weights,
        }
    }
}

impl Design {
    /// Validates support and weights as given.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(DesignError::InvalidDesign("empty support".into()));
        }
        if points.len() != weights.len() {
            return Err(DesignError::InvalidDesign(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(DesignError::InvalidDesign("points must share a positive dimension".into()));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(DesignError::InvalidDesign("non-finite coordinate".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(DesignError::InvalidDesign("weights must be finite and positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DesignError::InvalidDesign(format!("weights sum to {total}, not 1")));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for p in &points {
            if !seen.insert(canonical_key(p)) {
                return Err(DesignError::InvalidDesign(format!("duplicate support point {p:?}")));
            }
        }
        Ok(Self { points, weights })
    }

    /// Divides `weights` by their sum before validating.
    pub fn normalized(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(DesignError::InvalidDesign("weights must have a positive sum".into()));
        }
        Self::new(points, weights.into_iter().map(|w| w / total).collect())
    }

    /// Equal weights on `points`.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::normalized(points, vec![1.0; n])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinates per support point.
    pub fn factors(&self) -> usize {
        self.points[0].len()
    }

    /// Weight at a point, matched by canonical key.
    pub fn weight_of(&self, point: &[f64]) -> Option<f64> {
        let key = canonical_key(point);
        self.points
            .iter()
            .position(|p| canonical_key(p) == key)
            .map(|i| self.weights[i])
    }

    /// Support and weights reordered lexicographically by point.
    pub fn sorted(&self) -> Design {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| lex_cmp(&self.points[a], &self.points[b]));
        Design {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("design serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Kiefer criterion order `k`: 0 is D, 1 is A, infinity is E.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriterionOrder {
    Finite(f64),
    Infinite,
}

impl CriterionOrder {
    pub const D: CriterionOrder = CriterionOrder::Finite(0.0);
    pub const A: CriterionOrder = CriterionOrder::Finite(1.0);
    pub const E: CriterionOrder = CriterionOrder::Infinite;

    /// `f64::INFINITY` maps to the E criterion.
    pub fn new(k: f64) -> Result<Self> {
        if k == f64::INFINITY {
            Ok(CriterionOrder::Infinite)
        } else if k.is_finite() && k >= 0.0 {
            Ok(CriterionOrder::Finite(k))
        } else {
            Err(DesignError::InvalidCriterion(format!("k = {k}")))
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            CriterionOrder::Finite(k) => k,
            CriterionOrder::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            CriterionOrder::Finite(k) => Some(k),
            CriterionOrder::Infinite => None,
        }
    }
}

/// Default grid resolution per axis for a continuous box with `nu` factors.
pub fn default_grid_resolution(nu: usize) -> usize {
    match nu {
        1 => 1001,
        2 => 101,
        _ => 11,
    }
}

/// Candidate set for design points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    FiniteSet {
        points: Vec<Vec<f64>>,
    },
    BinaryHypercube {
        nu: usize,
    },
    GridBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        /// Points per axis; empty means the default for the dimension.
        #[serde(default)]
        resolution: Vec<usize>,
    },
    AxisSet {
        a: Vec<f64>,
    },
}

impl Region {
    pub fn grid(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Self {
        Region::GridBox {
            lower,
            upper,
            resolution,
        }
    }

    /// Unit interval `[0, 1]` gridded at `n` points.
    pub fn unit_interval(n: usize) -> Self {
        Region::grid(vec![0.0], vec![1.0], vec![n])
    }

    pub fn factors(&self) -> usize {
        match self {
            Region::FiniteSet { points } => points.first().map_or(0, Vec::len),
            Region::BinaryHypercube { nu } => *nu,
            Region::GridBox { lower, .. } => lower.len(),
            Region::AxisSet { a } => a.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::FiniteSet { points } => {
                if let Some(first) = points.first() {
                    if first.is_empty() || points.iter().any(|p| p.len() != first.len()) {
                        return Err(DesignError::InvalidRegion(
                            "finite set points must share a positive dimension".into(),
                        ));
                    }
                    if points.iter().flatten().any(|x| !x.is_finite()) {
                        return Err(DesignError::InvalidRegion("non-finite coordinate".into()));
                    }
                }
            }
            Region::BinaryHypercube { nu } => {
                if *nu == 0 || *nu > 24 {
                    return Err(DesignError::InvalidRegion(format!("hypercube dimension {nu}")));
                }
            }
            Region::GridBox {
                lower,
                upper,
                resolution,
            } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(DesignError::InvalidRegion("lower/upper dimension mismatch".into()));
                }
                if !resolution.is_empty() && resolution.len() != lower.len() {
                    return Err(DesignError::InvalidRegion("one resolution per axis".into()));
                }
                if resolution.iter().any(|&n| n < 2) {
                    return Err(DesignError::InvalidRegion("resolution must be at least 2".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
                    return Err(DesignError::InvalidRegion("need lower < upper on every axis".into()));
                }
            }
            Region::AxisSet { a } => {
                if a.is_empty() || a.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(DesignError::InvalidRegion("axis scales must be positive".into()));
                }
            }
        }
        Ok(())
    }

    fn resolution(&self) -> Vec<usize> {
        match self {
            Region::GridBox {
                lower, resolution, ..
            } if resolution.is_empty() => vec![default_grid_resolution(lower.len()); lower.len()],
            Region::GridBox { resolution, .. } => resolution.clone(),
            _ => Vec::new(),
        }
    }

    /// All candidate points, lexicographically ordered and deduplicated.
    pub fn candidates(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut points: Vec<Vec<f64>> = match self {
            Region::FiniteSet { points } => points.clone(),
            Region::BinaryHypercube { nu } => hypercube_vertices(*nu),
            Region::GridBox { lower, upper, .. } => {
                let res = self.resolution();
                let axes: Vec<Vec<f64>> = lower
                    .iter()
                    .zip(upper)
                    .zip(&res)
                    .map(|((&l, &u), &n)| {
                        (0..n)
                            .map(|j| if j + 1 == n { u } else { l + (u - l) * j as f64 / (n - 1) as f64 })
                            .collect()
                    })
                    .collect();
                cartesian(&axes)
            }
            Region::AxisSet { a } => (0..a.len())
                .map(|i| {
                    let mut p = vec![0.0; a.len()];
                    p[i] = a[i];
                    p
                })
                .collect(),
        };
        points.sort_by(|a, b| lex_cmp(a, b));
        let mut seen = HashSet::with_capacity(points.len());
        points.retain(|p| seen.insert(canonical_key(p)));
        if points.is_empty() {
            return Err(DesignError::EmptyRegion);
        }
        Ok(points)
    }

    /// Short human readable description, recorded in certificates.
    pub fn describe(&self) -> String {
        match self {
            Region::FiniteSet { points } => format!("finite_set({} points)", points.len()),
            Region::BinaryHypercube { nu } => format!("binary_hypercube({nu})"),
            Region::GridBox { lower, upper, .. } => {
                format!("grid_box({lower:?}, {upper:?}, {:?})", self.resolution())
            }
            Region::AxisSet { a } => format!("axis_set({a:?})"),
        }
    }

    /// True for regions that discretize a continuum.
    pub fn is_grid(&self) -> bool {
        matches!(self, Region::GridBox { .. })
    }
}

/// Vertices of `{0,1}^nu` in lexicographic order.
pub fn hypercube_vertices(nu: usize) -> Vec<Vec<f64>> {
    (0..1usize << nu)
        .map(|mask| (0..nu).map(|i| ((mask >> (nu - 1 - i)) & 1) as f64).collect())
        .collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}

/// `sum_i w_i u(x_i) f(x_i) f(x_i)'` without normalizing the weights.
pub fn accumulate_information(points: &[Vec<f64>], weights: &[f64], spec: &ModelSpec) -> Result<DMatrix<f64>> {
    let p = spec.dim();
    let mut m = DMatrix::zeros(p, p);
    for (x, &w) in points.iter().zip(weights) {
        let (f, u) = spec.evaluate(x)?;
        m.syger(w * u, &f, &f, 1.0);
    }
    m.fill_upper_triangle_with_lower_triangle();
    Ok(m)
}

/// Information matrix of a design at the model's parameter point.
pub fn information_matrix(design: &Design, spec: &ModelSpec) -> Result<DMatrix<f64>> {
    accumulate_information(&design.points, &design.weights, spec)
}

/// Eigen-decomposition of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Decomposes `m`, rejecting asymmetric or singular input.
    pub fn positive_definite(m: &DMatrix<f64>) -> Result<Self> {
        let eig = symmetric_eigen(m)?;
        if is_singular_spectrum(eig.eigenvalues.as_slice()) {
            return Err(DesignError::Singular {
                min: eig.eigenvalues.min(),
                max: eig.eigenvalues.max(),
            });
        }
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `M^power` built from the eigen-decomposition.
    pub fn power(&self, power: f64) -> DMatrix<f64> {
        let scaled = DVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|l| l.powf(power)));
        let q = &self.eigenvectors;
        q * DMatrix::from_diagonal(&scaled) * q.transpose()
    }

    /// `tr(M^-k)`.
    pub fn trace_inverse_power(&self, k: f64) -> f64 {
        self.eigenvalues.iter().map(|l| l.powf(-k)).sum()
    }

    /// Kiefer criterion value; lower is better.
    pub fn phi(&self, k: CriterionOrder) -> f64 {
        phi_from_eigenvalues(self.eigenvalues.as_slice(), k)
    }
}

/// `Phi_k` from the (positive) eigenvalues of `M`.
pub(crate) fn phi_from_eigenvalues(eigenvalues: &[f64], k: CriterionOrder) -> f64 {
    let p = eigenvalues.len() as f64;
    let lmin = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    match k {
        CriterionOrder::Infinite => 1.0 / lmin,
        CriterionOrder::Finite(0.0) => {
            let mean_log = eigenvalues.iter().map(|l| l.ln()).sum::<f64>() / p;
            (-mean_log).exp()
        }
        CriterionOrder::Finite(k) if k < 1.0 => {
            // ((1/p) sum l^-k)^(1/k) = exp(ln1p(mean(expm1(-k ln l))) / k)
            let mean = eigenvalues.iter().map(|l| (-k * l.ln()).exp_m1()).sum::<f64>() / p;
            (mean.ln_1p() / k).exp()
        }
        CriterionOrder::Finite(k) => {
            // factor out the largest term so l^-k cannot overflow
            let mean = eigenvalues.iter().map(|l| (lmin / l).powf(k)).sum::<f64>() / p;
            mean.powf(1.0 / k) / lmin
        }
    }
}

/// True when the eigenvalue range is below the singularity threshold.
pub(crate) fn is_singular_spectrum(eigenvalues: &[f64]) -> bool {
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    !(max > 0.0) || min <= SINGULAR_RATIO * max
}

fn symmetric_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(DesignError::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(DesignError::Asymmetric(asym / scale));
    }
    let sym = (m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(sym))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigen(m)?.eigenvalues.min())
}

/// `Phi_k` of an information matrix.
pub fn phi_k_of_matrix(m: &DMatrix<f64>, k: CriterionOrder) -> Result<f64> {
    Ok(Spectrum::positive_definite(m)?.phi(k))
}

/// Classical A value `tr(M^-1)`, equal to `p * Phi_1`.
pub fn classical_a_value(m: &DMatrix<f64>) -> Result<f64> {
    Ok(Spectrum::positive_definite(m)?.trace_inverse_power(1.0))
}

/// `Phi_k` of a design.
pub fn phi_k_value(design: &Design, spec: &ModelSpec, k: CriterionOrder) -> Result<f64> {
    phi_k_of_matrix(&information_matrix(design, spec)?, k)
}
