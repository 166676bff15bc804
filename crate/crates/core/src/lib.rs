//! Support functions, surface area measures and Brunn-Minkowski functionals on the 2-sphere.
//!
//! The central question: given a continuous `f` on the sphere, is it the support function of
//! a convex body? [`detector`] answers it either by certifying that `Q(f, u)` is positive
//! semi-definite everywhere, or by building a concrete pair of bodies and a `t` for which the
//! functional `F(K) = int f dS_2(K, .)` violates the Brunn-Minkowski inequality.

pub mod bodies;
pub mod calculus;
pub mod detector;
pub mod error;
pub mod function;
pub mod functional;
pub mod measure;
pub mod mollifier;
pub mod planar;
pub mod sawtooth;
pub mod sphere_grid;

pub use error::{Error, Result};
pub use function::{FunctionSpec, Jet, Smoothness, SphericalFunction};
pub use sphere_grid::{
    build_grid, build_icosphere, integrate_sphere, tangent_basis, SphereGrid, TangentFrame, Vec3,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
