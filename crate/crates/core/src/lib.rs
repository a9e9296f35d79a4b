//! Parametric I/O lower bounds for affine loop nests.
//!
//! The pipeline is: [`frontend`] parses a loop-nest program, [`soap`] normalizes
//! every statement onto simple-overlap form, [`bounds`] derives tile sizes and a
//! per-statement bound, and [`sdg`] combines statements through the symbolic
//! array graph. [`oracle`] builds concrete CDAGs and pebbles them exactly to
//! check the symbolic bounds on small instances.

pub mod bounds;
pub mod frontend;
pub mod lp;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod sdg;
pub mod soap;
pub mod symbolic;

pub use bounds::{BoundResult, TileSolution};
pub use frontend::{parse_program, AccessInfo, ArrayAccess, Program, Statement};
pub use pipeline::{analyze, analyze_source, Analysis, AnalysisError, AnalysisOptions};
pub use report::Report;
pub use sdg::Sdg;
pub use soap::SoapStatement;
pub use symbolic::{GrowthOrder, SymExpr};
