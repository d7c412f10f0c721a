//! Design and verification of direction-dependent optical media.
//!
//! The toolkit covers three stages:
//!
//! 1. **Metric design** ([`design`]): build a blended, direction-dependent
//!    length element whose flat regime lets leftward light pass undisturbed
//!    while its transformed regime steers rightward light around a shielded
//!    region.
//! 2. **Material extraction** ([`medium`]): convert the designed metric into
//!    a direction-dependent refractive index and impedance-matched
//!    permittivity/permeability profiles, which reduce to the classical
//!    cylindrical-cloak parameters in the non-directional case.
//! 3. **Ray verification** ([`ray`], [`scenario`]): integrate the geodesics
//!    of the designed metric and measure pass/block/asymmetry behavior of
//!    ray fans.
//!
//! [`field`] holds the underlying metric-field abstraction and its numeric
//! operations; [`validate`] bundles the invariant checks exposed by the
//! command-line driver.

pub mod consts;
pub mod design;
pub mod error;
pub mod fd;
pub mod field;
pub mod linalg;
pub mod medium;
pub mod ray;
pub mod scenario;
pub mod validate;

pub use error::{Error, Result};
pub use fd::FdConfig;
pub use linalg::{Matrix, Vector};
