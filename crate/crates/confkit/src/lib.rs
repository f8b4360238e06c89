//! Conformer ensemble generation and evaluation.
//!
//! The crate generates candidate 3D conformers for small organic molecules
//! with three complementary samplers (uniform torsion driving, distance-bound
//! embedding, force-field minimization), picks cluster representatives with
//! K-means, and scores them against reference ensembles with coverage and
//! matching statistics over optimally aligned heavy-atom RMSD.

pub mod clustering;
pub mod elements;
pub mod forcefield;
pub mod geom3d;
pub mod metrics;
pub mod molio;
pub mod pipeline;
pub mod samplers;
pub(crate) mod seeding;
pub mod toyset;

/// Cartesian point or displacement in Angstrom.
pub type Vec3 = nalgebra::Vector3<f64>;

/// 3x3 real matrix (rotations, inertia-like accumulators).
pub type Mat3 = nalgebra::Matrix3<f64>;
