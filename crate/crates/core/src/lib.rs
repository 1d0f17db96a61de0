//! Construction and numerical certification of a cooperative system
//! `x' = f(x)`, `y' = g(y)`, `z' = x + y - sigma(z)` whose omega-limit sets
//! violate the limit set dichotomy.
//!
//! Module map:
//! - [`functions`]: the profiles `p`, `q` and the choice of `c0`.
//! - [`field`]: `f`, `g` (by inversion of `q`) and `sigma`.
//! - [`oscillation`]: `H_{a,b}` by quadrature and in closed form.
//! - [`ode`]: adaptive Runge–Kutta integration.
//! - [`monotone`]: the assembled system, omega-limit estimates and the
//!   dichotomy certificate.
//! - [`suites`]: verification suites that bundle the checks above.

pub mod error;
pub mod field;
pub mod functions;
pub mod kv;
pub mod monotone;
pub mod ode;
pub mod oscillation;
pub mod output;
pub mod quadrature;
pub mod suites;
pub mod sum;

pub use error::{Error, Result};
pub use field::{build_sigma, FieldTable, SigmaSpec};
pub use functions::{choose_c0, ConstructionParams};
pub use monotone::{DichotomyCertificate, OmegaEstimate, OmegaOrder, SystemInstance};
pub use ode::{integrate, IntegrateOptions, Trajectory};
pub use oscillation::OscillationReport;
