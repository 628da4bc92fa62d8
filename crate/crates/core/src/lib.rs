//! Contact-geometric relaxation toward Legendre submanifolds.
//!
//! The crate is organized around a single Darboux chart `(x, p, z)` with
//! contact form `lambda = dz - p_a dx^a`:
//!
//! - [`chart`]: points, vectors, the contact form and the Reeb field.
//! - [`potential`]: strictly convex generating functions and the numerical
//!   Legendre transform.
//! - [`legendre`]: Legendre submanifolds, deficits and control manifolds.
//! - [`dynamics`]: contact Hamiltonian fields, relaxation flows, RK4
//!   integration and Lyapunov diagnostics.
//! - [`metric`]: the Mrugala metric, its Levi-Civita connection and the
//!   Killing, geodesic, pullback and harmonicity identities.
//! - [`statmech`]: finite exponential families, Fisher metric,
//!   alpha-connections and the two-state master equation.
//! - [`verify`]: seeded identity suites with machine-readable reports.
//! - [`cli`]: configuration and dispatch behind the `contact-relax` binary.

pub mod chart;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod legendre;
pub mod metric;
pub mod numdiff;
pub mod potential;
pub mod statmech;
pub mod verify;

pub use error::{Error, Result};
