//! Exterior calculus on coordinate charts of the frame bundle, its first jet
//! and the Palatini velocity–multimomentum space.
//!
//! Coefficients are expression graphs with exact symbolic derivatives, so
//! identities between forms can be checked pointwise to machine precision.

pub mod chart;
pub mod expr;
pub mod forms;
pub mod frame;
pub mod lie;
pub mod lifts;
pub mod palatini;
pub mod parse;
pub mod sampling;
pub mod scenario;
pub mod suite;
pub mod sections;
pub mod transition;

pub use chart::{Chart, ChartError, Jet, Point, ScalarField};
pub use expr::{EvalError, Expr, Tape};
pub use forms::{ChartMap, DiffForm, FormError, SectionMap, VectorField};
pub use frame::{CanonicalForms, Identity, JetChart};
pub use lie::{Eta, MatrixForm};
pub use sampling::Sampler;
pub use scenario::{Scenario, ScenarioError};
pub use suite::{run_suite, CheckResult, Family, Report, SuiteConfig};
