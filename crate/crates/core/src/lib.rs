//! Numerical core for an inverse boundary-value workbench for the magnetic
//! Schrodinger operator
//!
//! ```text
//!   H_{W,q} u = D^2 u + W . D u + D . (W u) + (W^2 + q) u,    D = -i grad,
//! ```
//!
//! on the unit cube, embedded in a periodized computational box. The crate
//! provides the pieces of the reconstruction chain:
//!
//! * grids, fields and box Fourier transforms ([`grid`], [`field`], [`fft`]);
//! * finite-difference calculus and weighted norms ([`ops`], [`norms`]);
//! * boundary meshes, trace bases and fractional boundary norms
//!   ([`boundary`]);
//! * admissible potential generators and gauge tools ([`potentials`]);
//! * the forward Dirichlet solver and discrete Dirichlet-to-Neumann maps
//!   ([`forward`]);
//! * complex geometrical-optics phases and remainders ([`transport`],
//!   [`cgo`]);
//! * boundary-identity estimators for the magnetic field and electric
//!   potential, analytic continuation from a wedge of directions, and
//!   Carleman-weight diagnostics ([`recon`], [`carleman`]);
//! * snapshot serialization for fields and operator matrices ([`snapshot`]).
//!
//! Everything is deterministic for a fixed seed: random draws go through
//! `ChaCha8Rng` and all reductions have a fixed order.

pub mod boundary;
pub mod carleman;
pub mod cgo;
pub mod error;
pub mod fft;
pub mod field;
pub mod forward;
pub mod grid;
pub mod norms;
pub mod ops;
pub mod potentials;
pub mod recon;
pub mod snapshot;
pub mod solver;
pub mod transport;

pub use error::{Error, Result};
