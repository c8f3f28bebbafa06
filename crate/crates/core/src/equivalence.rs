//! Sensitivity function and equivalence-theorem certificates.
//!
//! A design with nonsingular information matrix `M` is `Phi_k`-optimal on a
//! region iff `u(x) f(x)' M^(-k-1) f(x) <= tr(M^-k)` for every `x` in the
//! region, with equality on the support. Continuous regions are checked on
//! their grid only; the report records which region was scanned.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::design::{information_matrix, Design, Region, Spectrum};
use crate::error::{DesignError, Result};
use crate::glm::ModelSpec;

/// Default relative tolerance of a certificate.
pub const DEFAULT_TOLERANCE: f64 = 1e-7;

/// Rejects orders the equivalence condition does not cover.
pub(crate) fn finite_order(k: f64) -> Result<f64> {
    if k == f64::INFINITY {
        return Err(DesignError::Unsupported(
            "equivalence condition is only available for finite k".into(),
        ));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(DesignError::InvalidCriterion(format!("k = {k}")));
    }
    Ok(k)
}

/// Precomputed `M^(-k-1)` and `tr(M^-k)` for one design.
#[derive(Debug, Clone)]
pub struct SensitivityKernel {
    spectrum: Spectrum,
    k: f64,
    bound: f64,
}

impl SensitivityKernel {
    pub fn new(design: &Design, spec: &ModelSpec, k: f64) -> Result<Self> {
        let k = finite_order(k)?;
        if design.factors() != spec.factors() {
            return Err(DesignError::DimensionMismatch {
                expected: spec.factors(),
                got: design.factors(),
            });
        }
        let spectrum = Spectrum::positive_definite(&information_matrix(design, spec)?)?;
        let bound = if k == 0.0 {
            spectrum.dim() as f64
        } else {
            spectrum.trace_inverse_power(k)
        };
        Ok(Self { spectrum, k, bound })
    }

    /// `tr(M^-k)`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// `u(x) f(x)' M^(-k-1) f(x)`.
    pub fn at(&self, spec: &ModelSpec, x: &[f64]) -> Result<f64> {
        let (f, u) = spec.evaluate(x)?;
        let proj = self.spectrum.eigenvectors.tr_mul(&f);
        let quad: f64 = proj
            .iter()
            .zip(self.spectrum.eigenvalues.iter())
            .map(|(c, l)| c * c * l.powf(-self.k - 1.0))
            .sum();
        Ok(u * quad)
    }
}

/// Sensitivity of `design` at a single point.
pub fn sensitivity_at(design: &Design, spec: &ModelSpec, k: f64, x: &[f64]) -> Result<f64> {
    SensitivityKernel::new(design, spec, k)?.at(spec, x)
}

/// Right-hand side `tr(M^-k)` of the equivalence condition.
pub fn equivalence_bound(design: &Design, spec: &ModelSpec, k: f64) -> Result<f64> {
    Ok(SensitivityKernel::new(design, spec, k)?.bound())
}

/// Certificate produced by [`verify_design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub k: f64,
    /// `tr(M^-k)`.
    pub bound: f64,
    /// Largest `sensitivity - bound` over the scanned region.
    pub worst_gap: f64,
    pub worst_point: Vec<f64>,
    /// `|sensitivity - bound|` at each support point, in design order.
    pub support_residuals: Vec<f64>,
    pub pass: bool,
    pub tolerance: f64,
    pub region: String,
    pub candidates: usize,
    /// True when the region is a grid standing in for a continuum.
    pub grid_only: bool,
}

impl VerificationReport {
    /// `tol * max(1, |bound|)`.
    pub fn threshold(&self) -> f64 {
        self.tolerance * self.bound.abs().max(1.0)
    }

    pub fn max_support_residual(&self) -> f64 {
        self.support_residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Checks the equivalence condition on every candidate of `region`.
pub fn verify_design(
    design: &Design,
    spec: &ModelSpec,
    k: f64,
    region: &Region,
    tol: f64,
) -> Result<VerificationReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DesignError::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let kernel = SensitivityKernel::new(design, spec, k)?;
    let candidates = region.candidates()?;
    let bound = kernel.bound();

    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_point = Vec::new();
    // candidates are lexicographic, so strict comparison keeps the first maximizer
    for x in &candidates {
        let gap = kernel.at(spec, x)? - bound;
        if gap > worst_gap {
            worst_gap = gap;
            worst_point = x.clone();
        }
    }
    let support_residuals = design
        .points()
        .iter()
        .map(|x| Ok((kernel.at(spec, x)? - bound).abs()))
        .collect::<Result<Vec<_>>>()?;

    let mut report = VerificationReport {
        k: kernel.k(),
        bound,
        worst_gap,
        worst_point,
        support_residuals,
        pass: false,
        tolerance: tol,
        region: region.describe(),
        candidates: candidates.len(),
        grid_only: region.is_grid(),
    };
    let threshold = report.threshold();
    report.pass = report.worst_gap <= threshold && report.support_residuals.iter().all(|r| *r <= threshold);
    Ok(report)
}

/// One row of a sensitivity scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub point: Vec<f64>,
    pub sensitivity: f64,
    pub bound: f64,
}

/// Sensitivity at every candidate point, in lexicographic order.
pub fn sensitivity_scan(design: &Design, spec: &ModelSpec, k: f64, region: &Region) -> Result<Vec<ScanRow>> {
    let kernel = SensitivityKernel::new(design, spec, k)?;
    region
        .candidates()?
        .into_iter()
        .map(|x| {
            let s = kernel.at(spec, &x)?;
            Ok(ScanRow {
                point: x,
                sensitivity: s,
                bound: kernel.bound(),
            })
        })
        .collect()
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `x1,...,xnu,sensitivity,bound`.
pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let nu = rows.first().map_or(0, |r| r.point.len());
    let mut out = String::new();
    for i in 1..=nu {
        let _ = write!(out, "x{i},");
    }
    out.push_str("sensitivity,bound\n");
    for row in rows {
        for x in &row.point {
            out.push_str(&fmt_float(*x));
            out.push(',');
        }
        let _ = writeln!(out, "{},{}", fmt_float(row.sensitivity), fmt_float(row.bound));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{LinkFamily, RegressionKind};
    use approx::assert_relative_eq;

    fn two_factor(family: LinkFamily, beta: [f64; 3]) -> ModelSpec {
        ModelSpec::new(family, RegressionKind::FirstOrderIntercept(2), beta.to_vec()).unwrap()
    }

    fn corners3(w: [f64; 3]) -> Design {
        Design::new(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], w.to_vec()).unwrap()
    }

    #[test]
    fn logistic_single_factor_sensitivities() {
        let spec =
            ModelSpec::new(LinkFamily::Logistic, RegressionKind::SingleFactorIntercept, vec![0.0, 0.0]).unwrap();
        let d = Design::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert_relative_eq!(sensitivity_at(&d, &spec, 0.0, &[0.0]).unwrap(), 2.0, max_relative = 1e-13);
        assert_relative_eq!(sensitivity_at(&d, &spec, 0.0, &[1.0]).unwrap(), 2.0, max_relative = 1e-13);
        // k = 1: M^-2 = [[128,-192],[-192,320]], u = 1/4
        assert_relative_eq!(equivalence_bound(&d, &spec, 1.0).unwrap(), 24.0, max_relative = 1e-13);
        assert_relative_eq!(sensitivity_at(&d, &spec, 1.0, &[0.0]).unwrap(), 32.0, max_relative = 1e-12);
        assert_relative_eq!(sensitivity_at(&d, &spec, 1.0, &[1.0]).unwrap(), 16.0, max_relative = 1e-12);
        let report = verify_design(&d, &spec, 1.0, &Region::FiniteSet { points: vec![vec![0.0], vec![1.0]] }, 1e-7)
            .unwrap();
        assert!(!report.pass);
        assert_eq!(report.worst_point, vec![0.0]);
        assert_relative_eq!(report.worst_gap, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_logistic_corners_pass() {
        let spec = two_factor(LinkFamily::Logistic, [0.0; 3]);
        let d = Design::uniform(crate::design::hypercube_vertices(2)).unwrap();
        let r = verify_design(&d, &spec, 0.0, &Region::BinaryHypercube { nu: 2 }, 1e-7).unwrap();
        assert!(r.pass, "{r:?}");
        assert_relative_eq!(r.bound, 3.0);
    }

    #[test]
    fn poisson_three_point_design() {
        let spec = two_factor(LinkFamily::PoissonLog, [0.0, -3.0, -3.0]);
        assert!(6f64.exp() >= 1.0 + 2.0 * 3f64.exp());
        let region = Region::BinaryHypercube { nu: 2 };
        let w = 1.0 / 3.0;
        let good = verify_design(&corners3([w, w, w]), &spec, 0.0, &region, 1e-7).unwrap();
        assert!(good.pass, "{good:?}");
        assert!(good.max_support_residual() < 1e-12);
        let bad = verify_design(&corners3([0.5, 0.25, 0.25]), &spec, 0.0, &region, 1e-7).unwrap();
        assert!(!bad.pass);
        assert!(bad.worst_gap > 0.0);
    }

    #[test]
    fn infinite_order_is_unsupported() {
        let spec = two_factor(LinkFamily::PoissonLog, [0.0; 3]);
        let d = corners3([0.3, 0.3, 0.4]);
        assert!(matches!(
            verify_design(&d, &spec, f64::INFINITY, &Region::BinaryHypercube { nu: 2 }, 1e-7),
            Err(DesignError::Unsupported(_))
        ));
        assert!(matches!(sensitivity_at(&d, &spec, -1.0, &[0.0, 0.0]), Err(DesignError::InvalidCriterion(_))));
    }

    #[test]
    fn singular_design_is_rejected() {
        let spec = two_factor(LinkFamily::PoissonLog, [0.0; 3]);
        let d = Design::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            verify_design(&d, &spec, 0.0, &Region::BinaryHypercube { nu: 2 }, 1e-7),
            Err(DesignError::Singular { .. })
        ));
    }

    #[test]
    fn scan_cardinality_and_order() {
        let spec =
            ModelSpec::new(LinkFamily::PoissonLog, RegressionKind::SingleFactorIntercept, vec![0.0, 1.0]).unwrap();
        let d = Design::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let rows = sensitivity_scan(&d, &spec, 0.0, &Region::FiniteSet { points: vec![vec![1.0], vec![0.0]] })
            .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].point, vec![0.0]);
        let rows = sensitivity_scan(&d, &spec, 0.0, &Region::unit_interval(11)).unwrap();
        assert_eq!(rows.len(), 11);
        assert_eq!(rows[3].point, vec![0.3]);

        let spec3 =
            ModelSpec::new(LinkFamily::PoissonLog, RegressionKind::FirstOrderIntercept(3), vec![0.0; 4]).unwrap();
        let d3 = Design::uniform(crate::design::hypercube_vertices(3)).unwrap();
        let rows = sensitivity_scan(&d3, &spec3, 0.0, &Region::BinaryHypercube { nu: 3 }).unwrap();
        assert_eq!(rows.len(), 8);
    }

    #[test]
    fn csv_format() {
        let rows = vec![ScanRow {
            point: vec![0.1, 1.0],
            sensitivity: 2.0,
            bound: 3.0,
        }];
        let csv = scan_to_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x1,x2,sensitivity,bound");
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "1.0000000000000001e-1");
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.1);
        assert_eq!(fields[3], "3.0000000000000000e0");
    }
}
