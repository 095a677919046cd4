//! Quadrature, Laplace inversion and differentiation shared by the formula modules.

pub mod collocation;
pub mod diff;
pub mod inversion;
pub mod quadrature;
pub mod roots;

pub use collocation::Collocation;
pub use diff::{differentiate, differentiate_with_step, DiffScheme};
pub use inversion::{
    invert_laplace, invert_laplace_real, InversionConfig, InversionMethod, InversionRule,
};
pub use quadrature::{
    integrate, integrate_points, try_integrate, GaussLegendre, QuadValue, Quadrature,
    QuadratureConfig, TailPolicy,
};
