//! Dense operator matrices in the point basis of a grid or a product grid.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;

/// Relative tolerance for the Hermitian flag: `||A - A^H||_F <= tol (1 + ||A||_F)`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// The space an operator acts on.
///
/// Product-grid vectors are flattened base-major: index `j * M + q` holds
/// the value at base node `j` and fiber node `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Line(PeriodicGrid),
    Product {
        base: PeriodicGrid,
        fiber: PeriodicGrid,
    },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Line(g) => g.len(),
            Domain::Product { base, fiber } => base.len() * fiber.len(),
        }
    }

    /// Quadrature weight of the discrete L2 inner product.
    pub fn weight(&self) -> f64 {
        match self {
            Domain::Line(g) => g.weight(),
            Domain::Product { base, fiber } => base.weight() * fiber.weight(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<Complex64>,
    domain: Domain,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Wrap a matrix. A `hermitian` claim is verified against [`HERMITIAN_TOL`].
    pub fn new(entries: DMatrix<Complex64>, domain: Domain, hermitian: bool) -> Result<Self> {
        let n = domain.dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::shape(
                format!("{n}x{n}"),
                format!("{}x{}", entries.nrows(), entries.ncols()),
            ));
        }
        let op = Self {
            entries,
            domain,
            hermitian,
        };
        if hermitian {
            let defect = op.hermitian_defect();
            if defect > HERMITIAN_TOL * (1.0 + op.frobenius_norm()) {
                return Err(Error::Contract(format!(
                    "matrix flagged Hermitian has ||A - A^H||_F = {defect:e}"
                )));
            }
        }
        Ok(op)
    }

    pub fn identity(domain: Domain) -> Self {
        let n = domain.dim();
        Self {
            entries: DMatrix::identity(n, n),
            domain,
            hermitian: true,
        }
    }

    pub fn zeros(domain: Domain) -> Self {
        let n = domain.dim();
        Self {
            entries: DMatrix::zeros(n, n),
            domain,
            hermitian: true,
        }
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn weight(&self) -> f64 {
        self.domain.weight()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Replace the entries by `(A + A^H) / 2` and set the Hermitian flag.
    pub fn hermitized(mut self) -> Self {
        let adj = self.entries.adjoint();
        self.entries = (&self.entries + adj) * Complex64::new(0.5, 0.0);
        self.hermitian = true;
        self
    }

    pub fn hermitian_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint()).norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }

    /// Operator 2-norm, the largest singular value.
    pub fn norm2(&self) -> f64 {
        self.entries
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// `min(||A||_1, ||A||_inf, ||A||_F)`, a cheap upper bound on the 2-norm.
    pub fn norm2_upper_bound(&self) -> f64 {
        let n = self.dim();
        let col = (0..n)
            .map(|j| self.entries.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let row = (0..n)
            .map(|i| self.entries.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        col.min(row).min(self.frobenius_norm())
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::shape(
                format!("vector of length {}", self.dim()),
                format!("length {}", v.len()),
            ));
        }
        Ok(&self.entries * v)
    }

    fn check_same_domain(&self, other: &Self) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::shape(
                format!("{:?}", self.domain),
                format!("{:?}", other.domain),
            ));
        }
        Ok(())
    }

    /// Product `self * other`. The result is not flagged Hermitian.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_domain(other)?;
        Ok(Self {
            entries: &self.entries * &other.entries,
            domain: self.domain,
            hermitian: false,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_domain(other)?;
        Ok(Self {
            entries: &self.entries + &other.entries,
            domain: self.domain,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_domain(other)?;
        Ok(Self {
            entries: &self.entries - &other.entries,
            domain: self.domain,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Commutator `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        let ab = self.compose(other)?;
        let ba = other.compose(self)?;
        ab.sub(&ba)
    }

    /// Conjugate transpose; with uniform quadrature weights this is the L2 adjoint.
    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            domain: self.domain,
            hermitian: self.hermitian,
        }
    }

    /// `A ⊗ I_fiber` on the product of this operator's grid with `fiber`.
    pub fn tensor_identity(&self, fiber: &PeriodicGrid) -> Result<Self> {
        let Domain::Line(base) = self.domain else {
            return Err(Error::shape("operator on a line grid", "product-grid operator"));
        };
        Ok(Self {
            entries: self.entries.kronecker(&DMatrix::identity(fiber.len(), fiber.len())),
            domain: Domain::Product {
                base,
                fiber: *fiber,
            },
            hermitian: self.hermitian,
        })
    }

    /// `I_base ⊗ B` for an operator `B` on the fiber grid.
    pub fn identity_tensor(base: &PeriodicGrid, fiber_op: &Self) -> Result<Self> {
        let Domain::Line(fiber) = fiber_op.domain else {
            return Err(Error::shape("operator on a line grid", "product-grid operator"));
        };
        Ok(Self {
            entries: DMatrix::<Complex64>::identity(base.len(), base.len())
                .kronecker(&fiber_op.entries),
            domain: Domain::Product {
                base: *base,
                fiber,
            },
            hermitian: fiber_op.hermitian,
        })
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            entries: &self.entries * s,
            domain: self.domain,
            hermitian: self.hermitian && s.im == 0.0,
        }
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.hermitian {
            return Err(Error::Contract(
                "eigenvalues requested for an operator not flagged Hermitian".into(),
            ));
        }
        let mut ev: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Domain {
        Domain::Line(PeriodicGrid::new(n, 1.0).unwrap())
    }

    #[test]
    fn rejects_wrong_shape() {
        let e = OperatorMatrix::new(DMatrix::zeros(3, 3), line(4), false);
        assert!(matches!(e, Err(Error::Shape { .. })));
    }

    #[test]
    fn rejects_false_hermitian_claim() {
        let mut m = DMatrix::<Complex64>::zeros(4, 4);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            OperatorMatrix::new(m, line(4), true),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn product_domain_weight_and_kron() {
        let base = PeriodicGrid::new(4, 2.0).unwrap();
        let fiber = PeriodicGrid::new(3, 1.5).unwrap();
        let a = OperatorMatrix::identity(Domain::Line(base)).scaled(Complex64::new(2.0, 0.0));
        let k = a.tensor_identity(&fiber).unwrap();
        assert_eq!(k.dim(), 12);
        assert!((k.weight() - 0.5 * 0.5).abs() < 1e-15);
        assert!((k.entries().trace().re - 24.0).abs() < 1e-14);
    }

    #[test]
    fn upper_bound_dominates_two_norm() {
        let m = DMatrix::from_fn(5, 5, |i, j| Complex64::new((i * 3 + j) as f64 % 4.0 - 1.5, j as f64 * 0.1));
        let op = OperatorMatrix::new(m, line(5), false).unwrap();
        assert!(op.norm2_upper_bound() >= op.norm2() * (1.0 - 1e-14));
    }
}
