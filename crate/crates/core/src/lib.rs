//! Numerical laboratory for pseudo-differential operators on periodic grids.
//!
//! Symbols `a(x, xi)` are quantized into dense operator matrices `L0`, the
//! positive operator `L = L0^* L0` generates the contraction semigroup
//! `P_t = exp(-t L)`, and the shear `(x, y) -> (x, y + f(x))` lifts `L` to an
//! operator `L_hat` on a product grid. The crate checks, to machine precision,
//! that the lifted semigroup traced on the graph of `f` reproduces the base
//! semigroup, together with the supporting identities (positivity, shear
//! unitarity, commutation, cutoff convergence, variation of constants).
//!
//! Modules map onto the layers of that construction:
//!
//! * [`grid`] periodic grids, DFT, inner products, Fourier multipliers;
//! * [`symbols`] symbol families, the smooth cutoff, symbol-class estimates;
//! * [`quantization`] `L0`, its adjoint, `L`, integral kernels;
//! * [`semigroup`] eigendecomposition and series semigroups, cutoff sweeps;
//! * [`lift`] shear maps, the lifted operators and their identities;
//! * [`config`] and [`experiments`] the key=value driver and CSV reports.

pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod grid;
pub mod lift;
pub mod operator;
pub mod quantization;
pub mod semigroup;
pub mod symbols;
pub mod trig;

pub use error::{Error, Result};
pub use grid::{make_grid, PeriodicGrid, SpectralVector};
pub use lift::{LiftedField, ShearMap};
pub use operator::{Domain, OperatorMatrix};
pub use semigroup::Method;
pub use symbols::Symbol;
