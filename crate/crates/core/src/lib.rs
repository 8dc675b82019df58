//! levylab: a numerical laboratory for periodic homogenization of nonlocal
//! convolution-type operators with heavy-tailed jump kernels.
//!
//! The rescaled operator
//! `L_eps u(x) = eps^{-d-alpha} int p((x-y)/eps) Lambda(x/eps, y/eps) (u(y) - u(x)) dy`
//! is discretized on a periodic torus grid and its resolvent compared, over an
//! eps-sweep, against the constant-coefficient fractional limit whose kernel is
//! `mean(Lambda) k((x-y)/|x-y|) |x-y|^{-d-alpha}`. The crate bundles kernel
//! builders and hypothesis validators, the discrete operator, CG and spectral
//! solvers, and a study harness with diagnostic probes.
//!
//! The numerical core is generic over the scalar type (any [`scalar::Real`],
//! so `f32` or `f64`); the aliases below fix the `f64` instantiation that all
//! documented tolerances assume.

pub mod cli;
pub mod coefficients;
pub mod config;
pub mod discretization;
pub mod geom;
pub mod harness;
pub mod kernels;
pub mod quadrature;
pub mod solvers;
pub mod scalar;

pub use scalar::Real;

/// The working scalar every shipped tolerance is stated for.
pub type Scalar = f64;

pub type Kernel1 = kernels::JumpKernel<Scalar, 1>;
pub type Kernel2 = kernels::JumpKernel<Scalar, 2>;
pub type Coefficient1 = coefficients::PeriodicCoefficient<Scalar, 1>;
pub type Coefficient2 = coefficients::PeriodicCoefficient<Scalar, 2>;
pub type Grid1 = discretization::TorusGrid<Scalar, 1>;
pub type Grid2 = discretization::TorusGrid<Scalar, 2>;
pub type Field1 = discretization::DiscreteField<Scalar, 1>;
pub type Field2 = discretization::DiscreteField<Scalar, 2>;
pub type Stencil1 = discretization::EpsilonStencil<Scalar, 1>;
pub type Stencil2 = discretization::EpsilonStencil<Scalar, 2>;
