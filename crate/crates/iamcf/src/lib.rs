//! Configuration files, field and table formats, and the verification
//! pipeline around [`iamcf_core`].

pub mod config;
pub mod error;
pub mod io;
pub mod run;
pub mod summary;

pub use config::{Check, RunConfig};
pub use error::{Error, Result};
pub use run::{convergence_study, run, RunReport, StudyTable};
pub use summary::{CheckOutcome, Status};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "IAMCF_OUT";
