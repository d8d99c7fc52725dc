//! Velocity-contingent level-of-detail toolkit.
//!
//! The crate covers the whole chain from geometry to statistics: quadric
//! edge-collapse simplification into LOD chains, fixation and head-rotation
//! kinematics, speed-thresholded LOD scheduling, a simulated two-interval
//! forced-choice experiment with the method of constant stimuli, and
//! maximum-likelihood psychometric fitting with cohort statistics.

pub mod corpus;
pub mod deviation;
pub mod error;
pub mod experiment;
pub mod mesh;
pub mod obj;
pub mod kinematics;
pub mod psychofit;
pub mod quadric;
pub mod report;
pub mod scheduler;
pub mod simplify;

pub use error::{Error, Result};
pub use mesh::{TriangleMesh, Vec3};
