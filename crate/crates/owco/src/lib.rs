//! Numerical toolkit for operator-weighted composition operators on finite
//! discrete measure spaces.
//!
//! The objects live on a functional graph `phi` over vertices `X`, with a
//! weight function attaching one operator of multiplication per vertex. The
//! crate builds these operators concretely, certifies subnormality by
//! constructing a quasinormal extension on an enlarged space, and runs the
//! converse direction: extracting from the iterated norms the measure family
//! any such extension must use, or a Hankel witness showing none exists.
//!
//! Layout:
//!
//! * [`graph`]: functional graphs, fibers, cycles, truncation boundaries.
//! * [`spaces`]: discrete measure spaces, block vectors, the counting
//!   reduction that absorbs vertex masses into the weights.
//! * [`operators`]: the sparse operator representation, adjoints, powers,
//!   quasinormality defects and the polar route.
//! * [`moments`]: moment walks, the Stieltjes half-line test, measure
//!   recovery through Jacobi matrices.
//! * [`extension`]: hypotheses, the density table, the lift and the full
//!   certificate; the converse extractor and classical scalar systems live
//!   in its submodules.
//! * [`gallery`], [`corpus`]: named examples and seeded random instances.
//! * [`scenario`], [`report`], [`runner`]: the JSON surface of the binary.
//!
//! ```
//! use owco::{certify_subnormality, gallery, Verdict};
//!
//! let (spec, theta) = gallery::kary(2, 3, &[1.0, 2.0]).unwrap();
//! let cert = certify_subnormality(&spec, &theta, 1e-9).unwrap();
//! assert_eq!(cert.verdict, Verdict::CertifiedSubnormal);
//! ```

mod error;
mod par;

pub mod corpus;
pub mod extension;
pub mod gallery;
pub mod graph;
pub mod moments;
pub mod operators;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod spaces;

pub use error::{Error, Result};
pub use extension::necessity::{necessity_extract, NecessityOptions, NecessityOutcome};
pub use extension::wco::{wco_reduce, WcoSystem};
pub use extension::{certify_subnormality, SubnormalityCertificate, ThetaFamily, Verdict};
pub use spaces::{GridMeasure, OwcoSpec};
