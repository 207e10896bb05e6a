//! Unit-group actions on tori: reconstruction of the underlying number
//! field from commuting integer matrices, Dirichlet log-lattice geometry,
//! eigenspace dynamics gadgets, homogeneous entropy and Fourier averaging
//! pipelines on finite measures, orbit-density measurement, and minimal
//! norms of ideal residue classes.

pub mod config;
pub mod conjugacy;
pub mod density;
pub mod eigenact;
pub mod entropy;
pub mod fixtures;
pub mod fourier;
pub mod idealmin;
pub mod matrix;
pub mod numfield;
pub mod poly;
pub mod prec;
pub mod unitlog;
