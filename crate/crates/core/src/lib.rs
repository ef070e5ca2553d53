//! Keypoint correspondence matching driven by descriptor-space and
//! keypoint-space context.
//!
//! The crate is organised as a pipeline:
//!
//! * [`blob`] selects candidate matches from a descriptor [`DistanceMatrix`]
//!   (rank pre-filter, greedy many-to-many selection, NNR-like scores with
//!   FGINN, symmetric score combination).
//! * [`dtm`] filters matches by the consistency of Delaunay neighbourhoods in
//!   both images and regrows matches discarded along the way.
//! * [`model`] fits a homography or fundamental matrix on a single top-ranked
//!   sample (1SAC) and provides residuals and patch overlap errors.
//! * [`eval`] classifies matches against ground truth and computes
//!   precision, normalised recall, AP and failure counts.
//!
//! [`io`], [`synth`] and [`pipeline`] provide file formats, a synthetic scene
//! generator and the batch driver used by the `ctxmatch` binary.

pub mod blob;
pub mod distance;
pub mod dtm;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod keypoint;
pub mod matches;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use distance::{compute_distance_matrix, Axis, DistanceMatrix, Metric};
pub use error::{Error, Result};
pub use keypoint::{Ellipse, Keypoint, PairContext};
pub use matches::{Match, MatchSet};
