//! Relaxed greedy deterministic row (RGDR) and column (RGDC) methods for
//! dense linear systems and least-squares problems, the randomized and block
//! methods they are compared against, problem generators, convergence-bound
//! certification and an experiment harness.
//!
//! ```
//! use rgd_core::{problems, run_method, Method, SolveOptions};
//!
//! let inst = problems::generate(&problems::ProblemSpec::randn(200, 20, 7)).unwrap();
//! let report = run_method(Method::Rgdr, &inst.a, &inst.b, &inst.x_star, &SolveOptions::default(), 0).unwrap();
//! assert!(report.final_rse < 1e-4);
//! ```

pub mod cgls;
pub mod cols;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mtx;
pub mod problems;
pub mod rows;
pub mod selection;
pub mod solve;
pub mod theory;

pub use cgls::{cgls, CglsConfig};
pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use problems::ProblemInstance;
pub use selection::{IndexSet, LossProfile, SelectionConfig};
pub use solve::{run_method, Method, SolveOptions, SolveReport, SolveState, StopRule, TerminationReason};
pub use theory::BoundCertificate;
