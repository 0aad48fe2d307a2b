//! Learned low-rank transformations for recognition across visual domains.
//!
//! A linear map `T` (one global map, or one per class) is learned so that
//! transformed samples of the same class form a low-rank matrix while the
//! samples of different classes stay high-rank. Recognition then runs either
//! nearest neighbour on `T y`, or OMP against the low-rank part of each
//! transformed class recovered by robust PCA.
//!
//! Module map:
//! - [`linalg`]: SVD, norms, numerical rank, nuclear-norm subgradients
//! - [`lrt`]: class-based and global objectives, gradients and learners
//! - [`rpca`]: low-rank plus sparse decomposition
//! - [`omp`]: orthogonal matching pursuit
//! - [`classifier`]: NN and low-rank/OMP recognition, accuracy reports
//! - [`dataio`]: image loading, splits, synthetic domain-shift data
//! - [`container`]: binary files for transforms, models and datasets

pub mod classifier;
pub mod container;
pub mod data;
pub mod dataio;
pub mod error;
pub mod linalg;
pub mod lrt;
pub mod omp;
pub mod rpca;
pub mod seed;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use linalg::{Matrix, Threshold, Vector};
pub use lrt::{LearnConfig, LearnTrace, Transform, TransformKind};
