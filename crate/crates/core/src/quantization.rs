//! Left (Kohn-Nirenberg) quantization of symbols on a periodic grid.
//!
//! `(L0 u)(x_j) = sum_k a(x_j, k/P) u_hat(k) exp(2 pi i k x_j / P)`, so that in
//! the point basis `L0[j, l] = (1/N) sum_k a(x_j, k/P) exp(2 pi i k (x_j - x_l) / P)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{matrix_from_rows, PeriodicGrid};
use crate::operator::{Domain, OperatorMatrix};
use crate::symbols::Symbol;

/// Symbol values `a(x_j, k/P)`, rows indexed by node, columns by frequency index.
fn symbol_table(a: &Symbol, grid: &PeriodicGrid) -> Result<DMatrix<Complex64>> {
    let n = grid.len();
    let freqs = grid.physical_frequencies();
    let mut table = DMatrix::zeros(n, n);
    for j in 0..n {
        let x = grid.node(j);
        for (i, &xi) in freqs.iter().enumerate() {
            let v = a.eval(x, xi);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric(format!(
                    "symbol '{}' is not finite at (x={x}, xi={xi})",
                    a.name()
                )));
            }
            table[(j, i)] = v;
        }
    }
    Ok(table)
}

/// Unnormalised kernel rows: `sum_k a(x_j, k/P) exp(2 pi i k (j - l) / N)`.
fn kernel_sums(a: &Symbol, grid: &PeriodicGrid) -> Result<DMatrix<Complex64>> {
    let n = grid.len();
    let table = symbol_table(a, grid)?;
    let phases = grid.phase_table();
    Ok(matrix_from_rows(n, n, |j| {
        (0..n)
            .map(|l| {
                let d = j as i64 - l as i64;
                (0..n)
                    .map(|i| table[(j, i)] * phases[grid.wrap(grid.frequency(i) * d)])
                    .sum()
            })
            .collect()
    }))
}

/// Point-basis matrix of `L0 = Op(a)`.
pub fn assemble_l0(a: &Symbol, grid: &PeriodicGrid) -> Result<OperatorMatrix> {
    let sums = kernel_sums(a, grid)?;
    let entries = sums / Complex64::new(grid.len() as f64, 0.0);
    OperatorMatrix::new(entries, Domain::Line(*grid), false)
}

/// L2 adjoint. Quadrature weights are uniform, so this is the conjugate transpose.
pub fn adjoint_op(a: &OperatorMatrix) -> OperatorMatrix {
    a.adjoint()
}

/// The positive operator `L = L0^* L0`.
pub fn compose_l(a: &Symbol, grid: &PeriodicGrid) -> Result<OperatorMatrix> {
    let l0 = assemble_l0(a, grid)?;
    compose_from_l0(&l0)
}

pub(crate) fn compose_from_l0(l0: &OperatorMatrix) -> Result<OperatorMatrix> {
    Ok(adjoint_op(l0).compose(l0)?.hermitized())
}

/// Integral kernels of `L0` and `L0^*` for the quadrature `(P/N) sum_l K[j,l] u_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPair {
    pub kernel: DMatrix<Complex64>,
    pub adjoint_kernel: DMatrix<Complex64>,
}

/// `K[j,l] = (1/P) sum_k a(x_j, k/P) exp(2 pi i k (x_j - x_l)/P)` and
/// `K_adj[j,l] = conj(K[l,j])`.
pub fn kernel_pair(a: &Symbol, grid: &PeriodicGrid) -> Result<KernelPair> {
    let kernel = kernel_sums(a, grid)? / Complex64::new(grid.period(), 0.0);
    let adjoint_kernel = kernel.adjoint();
    Ok(KernelPair {
        kernel,
        adjoint_kernel,
    })
}
