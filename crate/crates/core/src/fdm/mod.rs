//! Fast diffeomorphic matching in 3D.
//!
//! A diffeomorphism is built as a composition of Gaussian-weighted local
//! translations `x ↦ x + exp(−ρ²‖x − c‖²)·v` that progressively bend a
//! straight source line onto a demonstrated path.

mod diffeo;
mod fit;
mod io;
mod path;

pub use diffeo::{rho_max, Diffeomorphism, LocalTranslation};
pub use fit::{fit, Correspondence, FitConfig, FitReport};
pub use io::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use path::{
    read_samples_csv, resample, source_line, write_samples_csv, DemonstrationPath, TimedSample,
};
