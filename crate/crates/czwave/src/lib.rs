//! # czwave
//!
//! A numerical laboratory for bilinear Calderón–Zygmund analysis.
//!
//! The crate constructs continuous wavelet systems over the affine group
//! `Z^d = R^d x (0, inf)`, evaluates trilinear wavelet, paraproduct, and
//! intrinsic forms by quadrature against the invariant measure `dw dt/t`,
//! runs a stopping-time sparse-domination algorithm on dyadic cubes, and
//! checks weighted fractional Leibniz inequalities together with the
//! exponent-sharpness scaling law — all at desk scale, with deterministic
//! seeded experiments.
//!
//! ## Layout
//!
//! * [`grid`] — periodic grids, sampled functions, affine-group grids,
//!   quadrature, convolution, spectral multipliers.
//! * [`wavelet`] — mother wavelets, moment-normalized families, decay/
//!   smoothness norms, wavelet-class dictionaries.
//! * [`transform`] — continuous wavelet analysis/synthesis, the reproducing
//!   identity, the high-low decomposition, averaged wavelets.
//! * [`forms`] — trilinear forms: wavelet forms, paraproducts, intrinsic
//!   maximal forms, and the symbol-decay certificate.
//! * [`sparse`] — dyadic cubes, the stopping-time sparse collection, sparse
//!   form values, domination certificates.
//! * [`weights`] — multilinear Muckenhoupt characteristics, weighted Sobolev
//!   norms, Leibniz-rule and sharpness experiments.
//! * [`expr`], [`config`], [`io`], [`experiments`] — the config-driven
//!   experiment runner behind the `czwave` binary.
//!
//! ## Example
//!
//! ```
//! use czwave::grid::{Grid, SampledFunction};
//!
//! let grid = Grid::new(1, 16.0, 1024)?;
//! let f = SampledFunction::from_fn(grid, "gaussian", |x, _| (-x * x).exp())?;
//! let integral = f.integrate().re;
//! assert!((integral - std::f64::consts::PI.sqrt()).abs() < 1e-10);
//! # Ok::<(), czwave::error::CzError>(())
//! ```

pub mod config;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod fft;
pub mod forms;
pub mod grid;
pub mod io;
pub mod sparse;
pub mod transform;
pub mod wavelet;
pub mod weights;

pub use error::{CzError, Result};
