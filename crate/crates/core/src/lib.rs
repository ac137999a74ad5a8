//! Operator-splitting solvers for `min f(x) + g(x) + h(B x)`.
//!
//! `f` is smooth with Lipschitz gradient, `g` and `h` have cheap proximity
//! operators and `B` is linear. The nested solvers run `J` inner dual
//! iterations per outer step; with `J = 1` they coincide with the classical
//! single-loop schemes (PDFP, Condat-Vu, PD3O), which are provided too.
//!
//! ```
//! use opsplit::problems::build_fused_lasso;
//! use opsplit::solvers::{solve, ParamPreset, SolverConfig, SolverId};
//!
//! let p = build_fused_lasso(30, 60, 0.2, 0.8, 0.1, 1).unwrap();
//! let c = SolverConfig::from_preset(&p, ParamPreset::TypeII).with_eps(1e-6);
//! let trace = solve(SolverId::Alg3, &p, &c).unwrap();
//! assert!(trace.converged);
//! ```

pub mod cli;
pub mod error;
pub mod metrics;
pub mod operators;
pub mod problems;
pub mod prox;
pub mod random;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use operators::{LinearMap, Vector};
pub use prox::ProxFunction;
pub use solvers::{SmoothFunction, SolverConfig, SolverId, SplitProblem};
