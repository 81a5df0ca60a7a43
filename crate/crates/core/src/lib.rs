//! Structured quantization of probability measures in Wasserstein space.
//!
//! A measure is approximated by pushing the mass of every cell of a Voronoi
//! partition onto a reference measure supported in that cell (a Dirac mass at
//! the site, or the uniform measure on the cell). The partition comes either
//! from a scaled lattice `hΛ` or from an arbitrary separated site set.
//!
//! * [`measure`]: measure representations, moments, sampling, pushforward.
//! * [`lattice`]: lattices, nearest-point decoding, Voronoi cell geometry.
//! * [`quantize`]: approximants, explicit coupling costs, moment inequalities.
//! * [`tail`]: ball projection of non-compact measures and decay checks.
//! * [`ot`]: exact discrete Wasserstein distances.
//! * [`harness`]: sweeps, baselines, slope fits and report output.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod lattice;
pub mod measure;
pub mod ot;
pub mod quadrature;
pub mod quantize;
pub mod spatial;
pub mod tail;

pub use error::{Error, Result};
pub use lattice::{CellId, Lattice, LatticeKind, VoronoiGeometry};
pub use measure::{Atom, DensityMeasure, DiscreteMeasure, Measure, QuadratureSpec};
pub use quantize::{Approximant, ApproximantMode, VoronoiScheme};
