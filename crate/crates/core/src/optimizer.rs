//! Iterative and exhaustive design optimizers.
//!
//! These are independent of the closed-form constructions and serve as
//! oracles for them: weights on a fixed support (multiplicative or projected
//! gradient steps), a vertex-exchange search over a finite region, and an
//! exhaustive simplex grid search for small supports.

use nalgebra::{DMatrix, DVector};

use crate::design::{
    is_singular_spectrum, phi_from_eigenvalues, CriterionOrder, Design, Region, Spectrum,
};
use crate::equivalence::{finite_order, verify_design, VerificationReport};
use crate::error::{DesignError, Result};
use crate::glm::ModelSpec;

/// Support points with weight below this are dropped by the exchange search.
pub const PRUNE_THRESHOLD: f64 = 1e-8;

/// Relative slack allowed on the descent check, for rounding.
const DESCENT_SLACK: f64 = 1e-13;

/// Largest support accepted by [`brute_force_weights`].
pub const BRUTE_FORCE_MAX_SUPPORT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `w_i <- w_i (s_i / bound)^(1/(k+1))`, renormalized.
    Multiplicative,
    /// Euclidean projection onto the simplex after a sensitivity step.
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Target for the relative equivalence gap.
    pub convergence_tol: f64,
    pub step_rule: StepRule,
    /// Simplex grid resolution used by the brute-force oracle.
    pub grid_resolution: usize,
    /// Carried for reproducibility records; every algorithm here is deterministic.
    pub random_seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            convergence_tol: 1e-10,
            step_rule: StepRule::Multiplicative,
            grid_resolution: 200,
            random_seed: 0,
        }
    }
}

impl OptimizerOptions {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.convergence_tol = tol;
        self
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(DesignError::Precondition("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(DesignError::Precondition("convergence_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Criterion values and weights after each accepted iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightTrace {
    pub phi: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

/// Regression vectors and intensities of a fixed support.
struct SupportModel {
    rows: Vec<(DVector<f64>, f64)>,
    dim: usize,
    k: f64,
}

struct Evaluation {
    phi: f64,
    bound: f64,
    sensitivities: Vec<f64>,
}

impl Evaluation {
    /// Largest relative excess of a sensitivity over the bound.
    fn gap(&self) -> f64 {
        let worst = self.sensitivities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (worst - self.bound) / self.bound.abs().max(1.0)
    }

    /// True when every point keeping weight sits on the bound.
    fn support_equal(&self, weights: &[f64], tol: f64) -> bool {
        let scale = tol * self.bound.abs().max(1.0);
        weights
            .iter()
            .zip(&self.sensitivities)
            .all(|(w, s)| *w < PRUNE_THRESHOLD || (s - self.bound).abs() <= scale)
    }
}

impl SupportModel {
    fn new(spec: &ModelSpec, points: &[Vec<f64>], k: f64) -> Result<Self> {
        let rows = points.iter().map(|x| spec.evaluate(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            dim: spec.dim(),
            k,
        })
    }

    fn information(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for ((f, u), w) in self.rows.iter().zip(weights) {
            if *w > 0.0 {
                m.syger(w * u, f, f, 1.0);
            }
        }
        m.fill_upper_triangle_with_lower_triangle();
        m
    }

    /// `None` when the weighted information matrix is singular.
    fn evaluate(&self, weights: &[f64]) -> Option<Evaluation> {
        let spectrum = Spectrum::positive_definite(&self.information(weights)).ok()?;
        let phi = spectrum.phi(CriterionOrder::Finite(self.k));
        let bound = if self.k == 0.0 {
            self.dim as f64
        } else {
            spectrum.trace_inverse_power(self.k)
        };
        let power = -self.k - 1.0;
        let scales: Vec<f64> = spectrum.eigenvalues.iter().map(|l| l.powf(power)).collect();
        let sensitivities = self
            .rows
            .iter()
            .map(|(f, u)| {
                let proj = spectrum.eigenvectors.tr_mul(f);
                u * proj.iter().zip(&scales).map(|(c, s)| c * c * s).sum::<f64>()
            })
            .collect();
        Some(Evaluation {
            phi,
            bound,
            sensitivities,
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum StopRule {
    /// Restricted equivalence gap below tolerance.
    Gap,
    /// Gap below tolerance and equality on every point above the prune threshold.
    SupportEquality,
}

struct RunOutcome {
    weights: Vec<f64>,
    converged: bool,
    iterations: usize,
    gap: f64,
}

fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn run_weights(
    model: &SupportModel,
    init: Vec<f64>,
    opts: &OptimizerOptions,
    stop: StopRule,
    mut trace: Option<&mut WeightTrace>,
) -> Result<RunOutcome> {
    let mut weights = init;
    let mut current = model.evaluate(&weights).ok_or(DesignError::RankDeficient)?;
    if let Some(t) = trace.as_deref_mut() {
        t.phi.push(current.phi);
        t.weights.push(weights.clone());
    }
    let delta = 1.0 / (model.k + 1.0);
    let mut step: f64 = 1.0;
    let done = |e: &Evaluation, w: &[f64]| {
        let gap_ok = e.gap() <= opts.convergence_tol;
        match stop {
            StopRule::Gap => gap_ok,
            StopRule::SupportEquality => gap_ok && e.support_equal(w, opts.convergence_tol),
        }
    };

    for iteration in 0..opts.max_iterations {
        if done(&current, &weights) {
            return Ok(RunOutcome {
                gap: current.gap(),
                weights,
                converged: true,
                iterations: iteration,
            });
        }
        let ratios: Vec<f64> = current.sensitivities.iter().map(|s| s / current.bound).collect();
        let mut accepted = None;
        match opts.step_rule {
            StepRule::Multiplicative => {
                // full exponent first, halved until the criterion does not increase
                let mut exponent = delta;
                for _ in 0..40 {
                    let mut trial: Vec<f64> =
                        weights.iter().zip(&ratios).map(|(w, r)| w * r.powf(exponent)).collect();
                    normalize(&mut trial);
                    if let Some(e) = model.evaluate(&trial) {
                        if e.phi <= current.phi * (1.0 + DESCENT_SLACK) {
                            accepted = Some((trial, e));
                            break;
                        }
                    }
                    exponent *= 0.5;
                }
            }
            StepRule::ProjectedGradient => {
                let mut eta = (step * 2.0).min(1.0);
                for _ in 0..60 {
                    let moved: Vec<f64> = weights.iter().zip(&ratios).map(|(w, r)| w + eta * r).collect();
                    let trial = project_simplex(&moved);
                    if let Some(e) = model.evaluate(&trial) {
                        if e.phi <= current.phi * (1.0 + DESCENT_SLACK) {
                            step = eta;
                            accepted = Some((trial, e));
                            break;
                        }
                    }
                    eta *= 0.5;
                }
            }
        }
        let Some((next, eval)) = accepted else {
            // no admissible step left at working precision
            return Ok(RunOutcome {
                gap: current.gap(),
                converged: done(&current, &weights),
                weights,
                iterations: iteration,
            });
        };
        weights = next;
        current = eval;
        if let Some(t) = trace.as_deref_mut() {
            t.phi.push(current.phi);
            t.weights.push(weights.clone());
        }
    }
    let converged = done(&current, &weights);
    Ok(RunOutcome {
        gap: current.gap(),
        weights,
        converged,
        iterations: opts.max_iterations,
    })
}

fn weights_to_design(points: &[Vec<f64>], weights: &[f64]) -> Result<Design> {
    let (pts, ws): (Vec<_>, Vec<_>) = points
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(p, w)| (p.clone(), *w))
        .unzip();
    Design::normalized(pts, ws)
}

fn check_support(spec: &ModelSpec, points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(DesignError::InvalidDesign("empty support".into()));
    }
    if let Some(p) = points.iter().find(|p| p.len() != spec.factors()) {
        return Err(DesignError::DimensionMismatch {
            expected: spec.factors(),
            got: p.len(),
        });
    }
    // distinctness
    Design::uniform(points.to_vec()).map(|_| ())
}

/// `Phi_k`-optimal weights on a fixed support.
pub fn optimize_weights(spec: &ModelSpec, points: &[Vec<f64>], k: f64, opts: &OptimizerOptions) -> Result<Design> {
    optimize_weights_inner(spec, points, k, opts, None)
}

/// As [`optimize_weights`], also recording every accepted iterate.
pub fn optimize_weights_traced(
    spec: &ModelSpec,
    points: &[Vec<f64>],
    k: f64,
    opts: &OptimizerOptions,
) -> Result<(Design, WeightTrace)> {
    let mut trace = WeightTrace::default();
    let design = optimize_weights_inner(spec, points, k, opts, Some(&mut trace))?;
    Ok((design, trace))
}

fn optimize_weights_inner(
    spec: &ModelSpec,
    points: &[Vec<f64>],
    k: f64,
    opts: &OptimizerOptions,
    trace: Option<&mut WeightTrace>,
) -> Result<Design> {
    let k = finite_order(k)?;
    opts.validate()?;
    check_support(spec, points)?;
    let model = SupportModel::new(spec, points, k)?;
    let init = vec![1.0 / points.len() as f64; points.len()];
    let outcome = run_weights(&model, init, opts, StopRule::Gap, trace)?;
    if !outcome.converged {
        return Err(DesignError::NonConvergence {
            iterations: outcome.iterations,
            gap: outcome.gap,
        });
    }
    weights_to_design(points, &outcome.weights)
}

/// Greedy pivoted selection of `dim` rows with large spanned volume.
fn max_volume_subset(rows: &[DVector<f64>], dim: usize) -> Option<Vec<usize>> {
    let mut residual: Vec<DVector<f64>> = rows.to_vec();
    let scale = rows.iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut chosen = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (best, norm2) = residual
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .map(|(i, r)| (i, r.norm_squared()))
            .fold((usize::MAX, 0.0), |acc, (i, n)| if n > acc.1 { (i, n) } else { acc });
        if best == usize::MAX || norm2 <= 1e-20 * scale {
            return None;
        }
        chosen.push(best);
        let q = &residual[best] / norm2.sqrt();
        for r in residual.iter_mut() {
            let c = q.dot(r);
            r.axpy(-c, &q, 1.0);
        }
    }
    chosen.sort_unstable();
    Some(chosen)
}

/// Outcome of the exchange search.
#[derive(Debug, Clone)]
pub struct ExchangeResult {
    pub design: Design,
    /// Certificate of `design` on the full region at the convergence tolerance.
    pub report: VerificationReport,
    pub converged: bool,
    pub iterations: usize,
}

/// Vertex-exchange search for a `Phi_k`-optimal design on a finite region.
///
/// Returns the best iterate with `converged == false` when the budget runs
/// out before the certificate passes.
pub fn optimize_design(spec: &ModelSpec, region: &Region, k: f64, opts: &OptimizerOptions) -> Result<ExchangeResult> {
    let k = finite_order(k)?;
    opts.validate()?;
    let candidates = region.candidates()?;
    if let Some(p) = candidates.iter().find(|p| p.len() != spec.factors()) {
        return Err(DesignError::DimensionMismatch {
            expected: spec.factors(),
            got: p.len(),
        });
    }
    let full = SupportModel::new(spec, &candidates, k)?;
    let scaled: Vec<DVector<f64>> = full.rows.iter().map(|(f, u)| f * u.sqrt()).collect();
    let mut support = max_volume_subset(&scaled, spec.dim()).ok_or(DesignError::RankDeficient)?;
    let mut weights = vec![1.0 / support.len() as f64; support.len()];

    let outer_limit = 2 * candidates.len() + 100;
    let mut budget = opts.max_iterations;
    let mut iterations = 0;
    for _ in 0..outer_limit {
        let pts: Vec<Vec<f64>> = support.iter().map(|&i| candidates[i].clone()).collect();
        let model = SupportModel::new(spec, &pts, k)?;
        let inner_opts = OptimizerOptions {
            max_iterations: budget.max(1),
            ..opts.clone()
        };
        let outcome = run_weights(&model, weights, &inner_opts, StopRule::SupportEquality, None)?;
        iterations += outcome.iterations;
        budget = budget.saturating_sub(outcome.iterations);

        // prune dead points; keep the rest in candidate order
        let keep: Vec<usize> = (0..support.len())
            .filter(|&j| outcome.weights[j] >= PRUNE_THRESHOLD)
            .collect();
        let pruned = keep.len() < support.len();
        support = keep.iter().map(|&j| support[j]).collect();
        weights = keep.iter().map(|&j| outcome.weights[j]).collect();
        normalize(&mut weights);
        if pruned && budget > 0 {
            continue;
        }

        let Some(eval) = full.evaluate(&expand(&support, &weights, candidates.len())) else {
            return Err(DesignError::RankDeficient);
        };
        let scale = eval.bound.abs().max(1.0);
        let (best, best_s) = eval
            .sensitivities
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        let gap = (best_s - eval.bound) / scale;
        if (gap <= opts.convergence_tol && outcome.converged) || budget == 0 {
            break;
        }
        if gap > opts.convergence_tol && !support.contains(&best) {
            let insert_at = support.partition_point(|&i| i < best);
            let share = 1.0 / (support.len() + 1) as f64;
            weights.iter_mut().for_each(|w| *w *= 1.0 - share);
            support.insert(insert_at, best);
            weights.insert(insert_at, share);
        }
    }

    let pts: Vec<Vec<f64>> = support.iter().map(|&i| candidates[i].clone()).collect();
    let design = Design::normalized(pts, weights)?;
    let report = verify_design(&design, spec, k, region, opts.convergence_tol)?;
    Ok(ExchangeResult {
        converged: report.pass,
        design,
        report,
        iterations,
    })
}

fn expand(support: &[usize], weights: &[f64], n: usize) -> Vec<f64> {
    let mut full = vec![0.0; n];
    for (&i, &w) in support.iter().zip(weights) {
        full[i] = w;
    }
    full
}

/// Exhaustive search over the weight simplex at step `1/grid_resolution`.
///
/// Test oracle only; accuracy is of order `1/grid_resolution`. `k` may be
/// `f64::INFINITY` for the E criterion.
pub fn brute_force_weights(spec: &ModelSpec, points: &[Vec<f64>], k: f64, grid_resolution: usize) -> Result<Design> {
    let order = CriterionOrder::new(k)?;
    if points.len() > BRUTE_FORCE_MAX_SUPPORT {
        return Err(DesignError::Precondition(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_SUPPORT} points, got {}",
            points.len()
        )));
    }
    if grid_resolution < 10 {
        return Err(DesignError::Precondition("grid_resolution must be at least 10".into()));
    }
    check_support(spec, points)?;
    let n = points.len();
    if n == 1 {
        return Design::new(points.to_vec(), vec![1.0]);
    }
    let units = points
        .iter()
        .map(|x| spec.unit_information(x))
        .collect::<Result<Vec<_>>>()?;
    let res = grid_resolution as f64;
    let mut counts = vec![1usize; n];
    counts[n - 1] = grid_resolution - (n - 1);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut m = DMatrix::<f64>::zeros(spec.dim(), spec.dim());
    loop {
        if counts.iter().sum::<usize>() == grid_resolution {
            m.fill(0.0);
            for (unit, &c) in units.iter().zip(&counts) {
                m += unit * (c as f64 / res);
            }
            let eig = m.symmetric_eigenvalues();
            if !is_singular_spectrum(eig.as_slice()) {
                let phi = phi_from_eigenvalues(eig.as_slice(), order);
                if best.as_ref().is_none_or(|(b, _)| phi < *b) {
                    best = Some((phi, counts.clone()));
                }
            }
        }
        if !next_composition(&mut counts, grid_resolution) {
            break;
        }
    }
    let (_, counts) = best.ok_or(DesignError::RankDeficient)?;
    Design::normalized(points.to_vec(), counts.iter().map(|&c| c as f64).collect())
}

/// Steps through positive integer vectors whose leading entries sum to at
/// most `total`; the last entry is forced so the full sum equals `total`.
fn next_composition(counts: &mut [usize], total: usize) -> bool {
    let n = counts.len();
    // odometer over the first n-1 entries, last one fills the remainder
    let head = n - 1;
    loop {
        let mut i = head;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            counts[i] += 1;
            let used: usize = counts[..head].iter().sum();
            if used < total {
                break;
            }
            counts[i] = 1;
        }
        let used: usize = counts[..head].iter().sum();
        if used < total {
            counts[head] = total - used;
            return true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{LinkFamily, RegressionKind};
    use approx::assert_abs_diff_eq;

    fn corners() -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]
    }

    #[test]
    fn compositions_are_enumerated_once() {
        let mut counts = vec![1, 1, 1];
        counts[2] = 3;
        let mut seen = vec![counts.clone()];
        while next_composition(&mut counts, 5) {
            seen.push(counts.clone());
        }
        // positive compositions of 5 into 3 parts: C(4,2) = 6
        assert_eq!(seen.len(), 6);
        assert!(seen.iter().all(|c| c.iter().sum::<usize>() == 5 && c.iter().all(|&x| x >= 1)));
        let mut dedup = seen.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 6);
    }

    #[test]
    fn simplex_projection() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.4, 0.4, 0.4]);
        for v in p {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn saturated_d_weights_are_uniform() {
        let spec =
            ModelSpec::new(LinkFamily::PoissonLog, RegressionKind::FirstOrderIntercept(2), vec![0.2, -1.0, 0.5])
                .unwrap();
        let pts = corners()[..3].to_vec();
        let d = optimize_weights(&spec, &pts, 0.0, &OptimizerOptions::default()).unwrap();
        for w in d.weights() {
            assert_abs_diff_eq!(*w, 1.0 / 3.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn rank_deficient_support() {
        let spec =
            ModelSpec::new(LinkFamily::PoissonLog, RegressionKind::FirstOrderIntercept(2), vec![0.0; 3]).unwrap();
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(matches!(
            optimize_weights(&spec, &pts, 0.0, &OptimizerOptions::default()),
            Err(DesignError::RankDeficient)
        ));
        assert!(matches!(
            optimize_design(&spec, &Region::FiniteSet { points: pts }, 0.0, &OptimizerOptions::default()),
            Err(DesignError::RankDeficient)
        ));
    }

    #[test]
    fn tiny_budget_reports_non_convergence() {
        let spec =
            ModelSpec::new(LinkFamily::PoissonLog, RegressionKind::FirstOrderIntercept(2), vec![0.0, -0.5, -0.5])
                .unwrap();
        let opts = OptimizerOptions::default().with_max_iterations(2);
        assert!(matches!(
            optimize_weights(&spec, &corners(), 0.0, &opts),
            Err(DesignError::NonConvergence { .. })
        ));
        let r = optimize_design(&spec, &Region::BinaryHypercube { nu: 2 }, 0.0, &opts).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn brute_force_guards() {
        let spec = ModelSpec::new(LinkFamily::LinearIdentity, RegressionKind::SingleFactorIntercept, vec![0.0; 2])
            .unwrap();
        let six: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        assert!(brute_force_weights(&spec, &six, 0.0, 10).is_err());
        assert!(brute_force_weights(&spec, &six[..2], 0.0, 5).is_err());
        let d = brute_force_weights(&spec, &six[..2], 0.0, 1000).unwrap();
        assert_abs_diff_eq!(d.weights()[0], 0.5, epsilon = 1e-3);
    }

    #[test]
    fn max_volume_start_spans() {
        let rows: Vec<DVector<f64>> = vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0]),
        ];
        assert_eq!(max_volume_subset(&rows, 2).unwrap(), vec![1, 2]);
        let flat = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![3.0, 0.0])];
        assert!(max_volume_subset(&flat, 2).is_none());
    }
}
