//! Model families and regression functions.
//!
//! A model is fixed by three pieces: the family, which maps the linear
//! predictor `eta = f(x)' beta` to the intensity `u = (var(Y) (d eta/d mu)^2)^-1`;
//! the regression kind, which maps a point `x` to `f(x)`; and the parameter
//! point `beta`. The dispersion factor is fixed to one throughout, since
//! rescaling the intensity by a constant leaves optimal designs unchanged.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::erfc;

use crate::error::{DesignError, Result};

/// Lower clamp for `Phi(eta) (1 - Phi(eta))` in the probit weight.
const PROBIT_TAIL_FLOOR: f64 = 1e-300;

type IntensityFn = dyn Fn(f64) -> f64 + Send + Sync;
type DomainFn = dyn Fn(f64) -> bool + Send + Sync;

/// User supplied intensity as a function of the linear predictor.
#[derive(Clone)]
pub struct CustomFamily {
    name: String,
    intensity: Arc<IntensityFn>,
    domain: Option<Arc<DomainFn>>,
}

impl CustomFamily {
    pub fn new<F>(name: impl Into<String>, intensity: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            intensity: Arc::new(intensity),
            domain: None,
        }
    }

    /// Restricts the family to linear predictor values accepted by `domain`.
    pub fn with_domain<D>(mut self, domain: D) -> Self
    where
        D: Fn(f64) -> bool + Send + Sync + 'static,
    {
        self.domain = Some(Arc::new(domain));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomFamily")
            .field("name", &self.name)
            .field("has_domain", &self.domain.is_some())
            .finish()
    }
}

/// GLM family, identified by the intensity it induces.
#[derive(Debug, Clone)]
pub enum LinkFamily {
    Logistic,
    Probit,
    PoissonLog,
    GammaInverse,
    LinearIdentity,
    Custom(CustomFamily),
}

impl LinkFamily {
    pub fn name(&self) -> &str {
        match self {
            LinkFamily::Logistic => "logistic",
            LinkFamily::Probit => "probit",
            LinkFamily::PoissonLog => "poisson_log",
            LinkFamily::GammaInverse => "gamma_inverse",
            LinkFamily::LinearIdentity => "linear_identity",
            LinkFamily::Custom(c) => c.name(),
        }
    }

    /// Parses one of the built-in family names.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "logistic" => Some(LinkFamily::Logistic),
            "probit" => Some(LinkFamily::Probit),
            "poisson_log" => Some(LinkFamily::PoissonLog),
            "gamma_inverse" => Some(LinkFamily::GammaInverse),
            "linear_identity" => Some(LinkFamily::LinearIdentity),
            _ => None,
        }
    }

    pub fn in_domain(&self, eta: f64) -> bool {
        if !eta.is_finite() {
            return false;
        }
        match self {
            LinkFamily::GammaInverse => eta > 0.0,
            LinkFamily::Custom(c) => c.domain.as_ref().is_none_or(|d| d(eta)),
            _ => true,
        }
    }

    /// Intensity `u` as a function of the linear predictor.
    ///
    /// The point is only used to make domain errors informative.
    pub fn intensity_at(&self, eta: f64, point: &[f64]) -> Result<f64> {
        if !self.in_domain(eta) {
            return Err(DesignError::Domain {
                family: self.name().to_string(),
                point: point.to_vec(),
                eta,
            });
        }
        let value = match self {
            LinkFamily::Logistic => {
                let e = (-eta.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            LinkFamily::Probit => {
                let density = (-0.5 * eta * eta).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let tail = 0.5 * erfc(eta.abs() / std::f64::consts::SQRT_2);
                let body = 1.0 - tail;
                if tail > 0.0 {
                    // density^2 underflows long before density / tail does
                    density * (density / tail) / body
                } else {
                    density * density / PROBIT_TAIL_FLOOR
                }
            }
            LinkFamily::PoissonLog => eta.exp(),
            LinkFamily::GammaInverse => 1.0 / (eta * eta),
            LinkFamily::LinearIdentity => 1.0,
            LinkFamily::Custom(c) => (c.intensity)(eta),
        };
        if !value.is_finite() || value <= 0.0 {
            return Err(DesignError::NonFinite { eta, value });
        }
        Ok(value)
    }

    /// Analytic `d^2 (1/u) / d eta^2`, where one is known.
    pub(crate) fn inverse_intensity_curvature(&self, eta: f64) -> Option<f64> {
        match self {
            // 1/u = e^-eta + 2 + e^eta
            LinkFamily::Logistic => Some((-eta).exp() + eta.exp()),
            LinkFamily::PoissonLog => Some((-eta).exp()),
            // 1/u = eta^2
            LinkFamily::GammaInverse => Some(2.0),
            LinkFamily::LinearIdentity => Some(0.0),
            LinkFamily::Probit | LinkFamily::Custom(_) => None,
        }
    }
}

/// Shape of the regression function `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionKind {
    /// `f(x) = (1, x)`, p = 2.
    SingleFactorIntercept,
    /// `f(x) = (1, x_1, ..., x_nu)`, p = nu + 1.
    FirstOrderIntercept(usize),
    /// `f(x) = (x_1, ..., x_nu)`, p = nu.
    FirstOrderNoIntercept(usize),
}

impl RegressionKind {
    /// Number of model parameters.
    pub fn dim(&self) -> usize {
        match *self {
            RegressionKind::SingleFactorIntercept => 2,
            RegressionKind::FirstOrderIntercept(nu) => nu + 1,
            RegressionKind::FirstOrderNoIntercept(nu) => nu,
        }
    }

    /// Number of coordinates of a design point.
    pub fn factors(&self) -> usize {
        match *self {
            RegressionKind::SingleFactorIntercept => 1,
            RegressionKind::FirstOrderIntercept(nu) | RegressionKind::FirstOrderNoIntercept(nu) => nu,
        }
    }

    pub fn has_intercept(&self) -> bool {
        !matches!(self, RegressionKind::FirstOrderNoIntercept(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegressionKind::SingleFactorIntercept => "single_factor_intercept",
            RegressionKind::FirstOrderIntercept(_) => "first_order_intercept",
            RegressionKind::FirstOrderNoIntercept(_) => "first_order_no_intercept",
        }
    }

    pub fn from_name(name: &str, nu: usize) -> Option<Self> {
        match name {
            "single_factor_intercept" => Some(RegressionKind::SingleFactorIntercept),
            "first_order_intercept" => Some(RegressionKind::FirstOrderIntercept(nu)),
            "first_order_no_intercept" => Some(RegressionKind::FirstOrderNoIntercept(nu)),
            _ => None,
        }
    }
}

/// A GLM at a fixed parameter point.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    family: LinkFamily,
    kind: RegressionKind,
    beta: Vec<f64>,
}

impl ModelSpec {
    pub fn new(family: LinkFamily, kind: RegressionKind, beta: Vec<f64>) -> Result<Self> {
        if kind.factors() == 0 {
            return Err(DesignError::InvalidModel("at least one factor is required".into()));
        }
        if beta.len() != kind.dim() {
            return Err(DesignError::DimensionMismatch {
                expected: kind.dim(),
                got: beta.len(),
            });
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(DesignError::InvalidModel("beta must be finite".into()));
        }
        if matches!(family, LinkFamily::GammaInverse)
            && !kind.has_intercept()
            && beta.iter().any(|&b| b <= 0.0)
        {
            return Err(DesignError::InvalidModel(
                "gamma model without intercept needs every beta component > 0".into(),
            ));
        }
        Ok(Self { family, kind, beta })
    }

    pub fn family(&self) -> &LinkFamily {
        &self.family
    }

    pub fn kind(&self) -> RegressionKind {
        self.kind
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Number of parameters `p`.
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    /// Number of coordinates of a design point.
    pub fn factors(&self) -> usize {
        self.kind.factors()
    }

    /// Same family and kind, different parameter point.
    pub fn with_beta(&self, beta: Vec<f64>) -> Result<Self> {
        Self::new(self.family.clone(), self.kind, beta)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.factors() {
            return Err(DesignError::DimensionMismatch {
                expected: self.factors(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn regression_vector(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let f = if self.kind.has_intercept() {
            DVector::from_iterator(self.dim(), std::iter::once(1.0).chain(x.iter().copied()))
        } else {
            DVector::from_column_slice(x)
        };
        Ok(f)
    }

    pub fn linear_predictor(&self, x: &[f64]) -> Result<f64> {
        let f = self.regression_vector(x)?;
        Ok(f.iter().zip(&self.beta).map(|(a, b)| a * b).sum())
    }

    pub fn intensity(&self, x: &[f64]) -> Result<f64> {
        let eta = self.linear_predictor(x)?;
        self.family.intensity_at(eta, x)
    }

    /// Regression vector and intensity in one pass.
    pub(crate) fn evaluate(&self, x: &[f64]) -> Result<(DVector<f64>, f64)> {
        let f = self.regression_vector(x)?;
        let eta: f64 = f.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        let u = self.family.intensity_at(eta, x)?;
        Ok((f, u))
    }

    /// `u(x) f(x) f(x)'`.
    pub fn unit_information(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (f, u) = self.evaluate(x)?;
        Ok(&f * f.transpose() * u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(family: LinkFamily, kind: RegressionKind, beta: &[f64]) -> ModelSpec {
        ModelSpec::new(family, kind, beta.to_vec()).unwrap()
    }

    #[test]
    fn regression_vectors() {
        let s = spec(LinkFamily::Logistic, RegressionKind::FirstOrderIntercept(2), &[0.0; 3]);
        assert_eq!(s.regression_vector(&[1.0, 0.0]).unwrap().as_slice(), &[1.0, 1.0, 0.0]);

        let s = spec(LinkFamily::PoissonLog, RegressionKind::FirstOrderNoIntercept(3), &[0.0; 3]);
        assert_eq!(s.regression_vector(&[0.0, 1.0, 0.0]).unwrap().as_slice(), &[0.0, 1.0, 0.0]);

        let s = spec(LinkFamily::Logistic, RegressionKind::SingleFactorIntercept, &[0.0; 2]);
        assert_eq!(s.regression_vector(&[0.5]).unwrap().as_slice(), &[1.0, 0.5]);
        assert!(matches!(
            s.regression_vector(&[0.5, 1.0]),
            Err(DesignError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn logistic_at_zero() {
        assert_eq!(LinkFamily::Logistic.intensity_at(0.0, &[]).unwrap(), 0.25);
    }

    #[test]
    fn poisson_intensity_matches_variance_composition() {
        let s = spec(LinkFamily::PoissonLog, RegressionKind::FirstOrderIntercept(2), &[0.0, -3.0, -3.0]);
        let u = s.intensity(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(u, (-6.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(u, 0.002_478_752_176_666_358, max_relative = 1e-12);
        // mu = e^eta, var = mu, d eta / d mu by central difference of ln
        let eta = -6.0f64;
        let mu = eta.exp();
        let h = mu * 1e-6;
        let deta_dmu = ((mu + h).ln() - (mu - h).ln()) / (2.0 * h);
        assert_relative_eq!(u, 1.0 / (mu * deta_dmu * deta_dmu), max_relative = 1e-8);
    }

    #[test]
    fn gamma_intensity_and_domain() {
        let s = spec(LinkFamily::GammaInverse, RegressionKind::FirstOrderNoIntercept(2), &[1.0, 2.0]);
        assert_relative_eq!(s.intensity(&[0.0, 1.0]).unwrap(), 0.25);
        // var = mu^2 (unit dispersion), d eta / d mu = -mu^-2, mu = 1/eta
        let mu = 0.5f64;
        assert_relative_eq!(1.0 / (mu * mu * mu.powi(-4)), 0.25);
        assert!(matches!(s.intensity(&[0.0, 0.0]), Err(DesignError::Domain { .. })));

        let s = spec(LinkFamily::GammaInverse, RegressionKind::SingleFactorIntercept, &[1.0, -2.0]);
        assert!(matches!(s.intensity(&[1.0]), Err(DesignError::Domain { .. })));
        assert!(ModelSpec::new(
            LinkFamily::GammaInverse,
            RegressionKind::FirstOrderNoIntercept(2),
            vec![1.0, -1.0]
        )
        .is_err());
    }

    #[test]
    fn beta_length_checked() {
        let r = ModelSpec::new(LinkFamily::Logistic, RegressionKind::FirstOrderIntercept(2), vec![0.0; 2]);
        assert!(matches!(r, Err(DesignError::DimensionMismatch { expected: 3, got: 2 })));
    }

    #[test]
    fn probit_matches_normal_formula() {
        // phi(0)^2 / (1/4) = 4 / (2 pi)
        let u = LinkFamily::Probit.intensity_at(0.0, &[]).unwrap();
        assert_relative_eq!(u, 2.0 / std::f64::consts::PI, max_relative = 1e-14);
        // symmetric in eta
        let a = LinkFamily::Probit.intensity_at(1.7, &[]).unwrap();
        let b = LinkFamily::Probit.intensity_at(-1.7, &[]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-13);
        // tail stays finite and positive
        let t = LinkFamily::Probit.intensity_at(30.0, &[]).unwrap();
        assert!(t.is_finite() && t > 0.0);
    }

    #[test]
    fn underflowing_intensity_is_an_error() {
        assert!(matches!(
            LinkFamily::Logistic.intensity_at(800.0, &[]),
            Err(DesignError::NonFinite { .. })
        ));
        assert!(matches!(
            LinkFamily::PoissonLog.intensity_at(800.0, &[]),
            Err(DesignError::NonFinite { .. })
        ));
    }

    #[test]
    fn unit_information_examples() {
        let s = spec(LinkFamily::Logistic, RegressionKind::SingleFactorIntercept, &[0.0, 1.0]);
        let m = s.unit_information(&[1.0]).unwrap();
        let u = std::f64::consts::E / (1.0 + std::f64::consts::E).powi(2);
        assert_relative_eq!(u, 0.196_611_933_241_481_85, max_relative = 1e-12);
        for v in m.iter() {
            assert_relative_eq!(*v, u, max_relative = 1e-14);
        }

        let s = spec(LinkFamily::LinearIdentity, RegressionKind::FirstOrderIntercept(2), &[3.0, 1.0, 2.0]);
        let m = s.unit_information(&[0.0, 0.0]).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(0, 0)] = 1.0;
        assert_eq!(m, expected);

        let s = spec(LinkFamily::PoissonLog, RegressionKind::FirstOrderNoIntercept(2), &[0.0, 0.0]);
        let m = s.unit_information(&[1.0, 0.0]).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn custom_family_domain() {
        let fam = CustomFamily::new("sqrt", |eta: f64| eta.sqrt()).with_domain(|eta| eta > 0.0);
        let fam = LinkFamily::Custom(fam);
        assert_eq!(fam.intensity_at(4.0, &[]).unwrap(), 2.0);
        assert!(matches!(fam.intensity_at(-1.0, &[]), Err(DesignError::Domain { .. })));
        assert_eq!(fam.name(), "sqrt");
    }
}
