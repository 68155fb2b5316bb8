//! Multi-domain datasets with ground-truth object identities.
//!
//! Two generator families are provided: a structural causal model with
//! explicit causal (`x_c`) and domain-dependent (`x_a`) features, and rotated
//! procedural glyphs where each rotation angle is one domain.

mod dataset;
mod glyphs;
pub mod io;
mod probe;
mod scm;

pub use dataset::{split, Domain, MultiDomainDataset, Split};
pub use glyphs::{generate_glyphs, render_object, rotate_image, GlyphConfig};
pub use probe::linear_probe;
pub use scm::{generate_scm, separation, ScmConfig, Separation};
