//! Clustering of compositional data through the α-transformation.
//!
//! * [`compositions`]: closure, the power and α-transformations, CLR/ILR and
//!   the Jacobian of the α-transformation.
//! * [`kmeans`]: standardisation and Lloyd's algorithm.
//! * [`validity`]: 33 cluster validity indices and grid selection.
//! * [`gpcm`]: EM for the 14 Gaussian parsimonious clustering models.
//! * [`selection`]: the α-K-means and α-GPCM pipelines.
//! * [`simulation`]: Dirichlet mixtures, ARI/FMI and the simulation study driver.

pub mod compositions;
pub mod error;
pub mod gpcm;
pub mod kmeans;
pub mod seeding;
pub mod selection;
pub mod simulation;
pub mod validity;

pub use error::{Error, Result};
