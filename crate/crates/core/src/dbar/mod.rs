//! One-variable dbar machinery: the punctured Cauchy transform with its
//! near/far split, a discrete `dbar` stencil, weighted minimal-norm solves,
//! the extension operator from a lens, and shell weights.

pub mod cauchy;
pub mod extension;
pub mod hormander;
pub mod shell;
pub mod stencil;

pub use cauchy::{hs_norm, BandOperator, CauchyOperator, KernelSplit};
pub use extension::{ExtensionOperator, ExtensionOptions, ExtensionResult, ExtensionStep};
pub use hormander::{hormander_solve, HormanderOptions, HormanderReport, WeightedDbarProblem};
pub use shell::{shell_weight, ShellWeight};
pub use stencil::{compact_interior, DbarStencil};
