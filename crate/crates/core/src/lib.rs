//! Multi-plane model estimation for range data of polyhedral objects.
//!
//! Given a point cloud and a matrix of known angles between the planes of an object,
//! [`pipeline::estimate`] clusters the cloud, assigns clusters to model planes and
//! fits all visible planes jointly so that their mutual angles agree with the model.

pub mod baselines;
pub mod bench;
pub mod constraints;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mcransac;
pub mod normals;
pub mod pcc;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use constraints::{ConstraintFile, ConstraintMatrix};
pub use error::{Error, Result};
pub use geometry::{PlaneModel, PointCloud, UnitVec3, Vec3};
