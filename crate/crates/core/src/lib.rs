//! Locally optimal approximate designs for generalized linear models.
//!
//! The crate covers Kiefer's `Phi_k` family of criteria (D, A, E and the
//! orders in between), equivalence-theorem certificates, analytic designs
//! for binary and multi-factor regions, and iterative and brute-force
//! optimizers that serve as independent checks.
//!
//! ```
//! use glm_optdesign::{closed_form, equivalence, LinkFamily, ModelSpec, Region, RegressionKind};
//!
//! let spec = ModelSpec::new(
//!     LinkFamily::PoissonLog,
//!     RegressionKind::FirstOrderIntercept(2),
//!     vec![0.0, -3.0, -3.0],
//! )
//! .unwrap();
//! let built = closed_form::two_factor_design(&spec, closed_form::Criterion::D).unwrap();
//! assert!(built.condition_ok);
//! let report =
//!     equivalence::verify_design(&built.design, &spec, 0.0, &Region::BinaryHypercube { nu: 2 }, 1e-7).unwrap();
//! assert!(report.pass);
//! ```

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closed_form;
pub mod design;
pub mod equivalence;
pub mod error;
pub mod glm;
pub mod optimizer;

pub use design::{information_matrix, phi_k_value, CriterionOrder, Design, Region};
pub use error::{DesignError, Result};
pub use glm::{CustomFamily, LinkFamily, ModelSpec, RegressionKind};
