//! Numerical toolkit for tight surfaces: curvature data of parametric
//! immersions, tightness quadrature, asymptotic-curve tracing and return maps,
//! adapted coordinate charts, and the linearized Gauss-Codazzi system with its
//! symmetrizers, characteristic solver and energy audit.

pub mod adapted;
pub mod asymptotic;
pub mod charts;
pub mod codazzi;
pub mod contour;
pub mod curve;
pub mod error;
pub mod grid;
pub mod integrals;
pub mod invariant;
pub mod numeric;
pub mod prescribed;
pub mod returnmap;
pub mod surface;
pub mod taylor;

pub use error::{Error, Result};
pub use surface::{FormSource, FundamentalData, ParamPoint, Surface};
