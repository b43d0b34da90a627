//! The lifted space (base circle) x (fiber circle), the shear
//! `(x, y) -> (x, y + f(x))`, and the shear conjugate ("Ito transform") of
//! base operators together with the identities it satisfies.
//!
//! The shear acts in fiber-Fourier space: fiber mode `eta` over base node
//! `x_j` is multiplied by `exp(2 pi i eta f(x_j) / Y)`. This is the exact shear
//! of the fiber trigonometric interpolant, and is unitary on the product grid.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{
    derivative_matrix, forward_values, fractional_laplacian, inverse_values, l2_norm,
    max_norm, spectral_derivative_real, PeriodicGrid, SpectralVector,
};
use crate::operator::{Domain, OperatorMatrix};
use crate::quantization::{assemble_l0, compose_from_l0, compose_l};
use crate::semigroup::{semigroup_series, HermitianSpectrum, Method};
use crate::symbols::{cutoff_symbol, Symbol};
use crate::trig::TrigPoly;

/// Complex values `v(x_j, y_q)` on base grid x fiber grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    values: DMatrix<Complex64>,
    base: PeriodicGrid,
    fiber: PeriodicGrid,
}

impl LiftedField {
    pub fn new(values: DMatrix<Complex64>, base: PeriodicGrid, fiber: PeriodicGrid) -> Result<Self> {
        if values.nrows() != base.len() || values.ncols() != fiber.len() {
            return Err(Error::shape(
                format!("{}x{}", base.len(), fiber.len()),
                format!("{}x{}", values.nrows(), values.ncols()),
            ));
        }
        Ok(Self {
            values,
            base,
            fiber,
        })
    }

    pub fn from_fn(
        base: PeriodicGrid,
        fiber: PeriodicGrid,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Self {
        let values = DMatrix::from_fn(base.len(), fiber.len(), |j, q| f(base.node(j), fiber.node(q)));
        Self {
            values,
            base,
            fiber,
        }
    }

    /// `v(x, y) = g(x) h(y)` with `g` periodic on the base and `h` on the fiber.
    pub fn separable(base: PeriodicGrid, fiber: PeriodicGrid, g: &TrigPoly, h: &TrigPoly) -> Self {
        let (p, y) = (base.period(), fiber.period());
        Self::from_fn(base, fiber, |xv, yv| {
            Complex64::new(g.eval(xv, p) * h.eval(yv, y), 0.0)
        })
    }

    /// Inverse of [`LiftedField::to_flat`].
    pub fn from_flat(v: &DVector<Complex64>, base: PeriodicGrid, fiber: PeriodicGrid) -> Result<Self> {
        let (n, m) = (base.len(), fiber.len());
        if v.len() != n * m {
            return Err(Error::shape(format!("length {}", n * m), format!("length {}", v.len())));
        }
        Ok(Self {
            values: DMatrix::from_fn(n, m, |j, q| v[j * m + q]),
            base,
            fiber,
        })
    }

    /// Base-major flattening: index `j * M + q`.
    pub fn to_flat(&self) -> DVector<Complex64> {
        let m = self.fiber.len();
        DVector::from_fn(self.base.len() * m, |i, _| self.values[(i / m, i % m)])
    }

    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }

    pub fn base(&self) -> PeriodicGrid {
        self.base
    }

    pub fn fiber(&self) -> PeriodicGrid {
        self.fiber
    }

    pub fn domain(&self) -> Domain {
        Domain::Product {
            base: self.base,
            fiber: self.fiber,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.to_flat(), self.domain().weight())
    }
}

/// Direction of the shear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShearSign {
    /// `v(x, y) -> v(x, y + f(x))`.
    Plus,
    /// `v(x, y) -> v(x, y - f(x))`.
    Minus,
}

impl ShearSign {
    fn as_f64(self) -> f64 {
        match self {
            ShearSign::Plus => 1.0,
            ShearSign::Minus => -1.0,
        }
    }
}

/// Samples of the shear function `f` at base nodes, with the fiber it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct ShearMap {
    f_values: Vec<f64>,
    base: PeriodicGrid,
    fiber: PeriodicGrid,
}

impl ShearMap {
    pub fn new(f_values: Vec<f64>, base: PeriodicGrid, fiber: PeriodicGrid) -> Result<Self> {
        if f_values.len() != base.len() {
            return Err(Error::shape(
                format!("{} samples of f", base.len()),
                format!("{} samples", f_values.len()),
            ));
        }
        if let Some(v) = f_values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("shear function has non-finite value {v}")));
        }
        Ok(Self {
            f_values,
            base,
            fiber,
        })
    }

    pub fn from_trig(f: &TrigPoly, base: PeriodicGrid, fiber: PeriodicGrid) -> Self {
        let f_values = base.nodes().iter().map(|&x| f.eval(x, base.period())).collect();
        Self {
            f_values,
            base,
            fiber,
        }
    }

    pub fn zero(base: PeriodicGrid, fiber: PeriodicGrid) -> Self {
        Self {
            f_values: vec![0.0; base.len()],
            base,
            fiber,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.f_values
    }

    pub fn base(&self) -> PeriodicGrid {
        self.base
    }

    pub fn fiber(&self) -> PeriodicGrid {
        self.fiber
    }

    pub fn domain(&self) -> Domain {
        Domain::Product {
            base: self.base,
            fiber: self.fiber,
        }
    }

    /// `exp(2 pi i eta s f(x_j) / Y)` for fiber frequency index `i`.
    fn phase(&self, j: usize, i: usize, sign: f64) -> Complex64 {
        let eta = self.fiber.frequency(i) as f64;
        Complex64::from_polar(1.0, 2.0 * PI * eta * sign * self.f_values[j] / self.fiber.period())
    }

    /// Fiber multiplier block: `(1/M) sum_eta exp(2 pi i eta shift / Y) exp(2 pi i eta (q - r) / M)`.
    fn shift_block(fiber: &PeriodicGrid, shift: f64) -> DMatrix<Complex64> {
        let m = fiber.len();
        let table = fiber.phase_table();
        let mods: Vec<Complex64> = (0..m)
            .map(|i| {
                Complex64::from_polar(1.0, 2.0 * PI * fiber.frequency(i) as f64 * shift / fiber.period())
            })
            .collect();
        let column: Vec<Complex64> = (0..m)
            .map(|d| {
                mods.iter()
                    .enumerate()
                    .map(|(i, c)| c * table[fiber.wrap(fiber.frequency(i) * d as i64)])
                    .sum::<Complex64>()
                    / m as f64
            })
            .collect();
        DMatrix::from_fn(m, m, |q, r| column[fiber.wrap(q as i64 - r as i64)])
    }

    fn check_field(&self, v: &LiftedField) -> Result<()> {
        if v.base != self.base || v.fiber != self.fiber {
            return Err(Error::shape(
                format!("field on {:?}", self.domain()),
                format!("field on {:?}", v.domain()),
            ));
        }
        Ok(())
    }

    fn check_base_operator(&self, l: &OperatorMatrix) -> Result<()> {
        if l.domain() != Domain::Line(self.base) {
            return Err(Error::shape(
                format!("operator on {:?}", Domain::Line(self.base)),
                format!("operator on {:?}", l.domain()),
            ));
        }
        Ok(())
    }
}

/// Default fiber period: four times the largest `|f|`, so the shear wraps at most once.
pub fn default_fiber_period(f: &TrigPoly, base: &PeriodicGrid) -> f64 {
    let peak = base
        .nodes()
        .iter()
        .map(|&x| f.eval(x, base.period()).abs())
        .fold(0.0, f64::max);
    if peak > 0.0 {
        4.0 * peak
    } else {
        1.0
    }
}

/// Shear a lifted field by `sign * f`.
pub fn shear_apply(v: &LiftedField, f: &ShearMap, sign: ShearSign) -> Result<LiftedField> {
    f.check_field(v)?;
    let s = sign.as_f64();
    let (n, m) = (v.base.len(), v.fiber.len());
    let rows = exec::map_range(n, |j| {
        let row: Vec<Complex64> = v.values.row(j).iter().copied().collect();
        let mut coeffs = forward_values(&row, &v.fiber);
        for (i, c) in coeffs.iter_mut().enumerate() {
            *c *= f.phase(j, i, s);
        }
        inverse_values(&coeffs, &v.fiber)
    });
    let values = DMatrix::from_fn(n, m, |j, q| rows[j][q]);
    LiftedField::new(values, v.base, v.fiber)
}

/// Point-basis matrix of the shear, block diagonal over base nodes.
pub fn shear_matrix(f: &ShearMap, sign: ShearSign) -> OperatorMatrix {
    let (n, m) = (f.base.len(), f.fiber.len());
    let s = sign.as_f64();
    let blocks = exec::map_range(n, |j| ShearMap::shift_block(&f.fiber, s * f.f_values[j]));
    let mut entries = DMatrix::zeros(n * m, n * m);
    for (j, b) in blocks.iter().enumerate() {
        entries.view_mut((j * m, j * m), (m, m)).copy_from(b);
    }
    OperatorMatrix::new(entries, f.domain(), false).expect("shear matrix has product shape")
}

/// Trace of the fiber interpolant on the graph `y = f(x)`.
pub fn graph_trace(v: &LiftedField, f: &ShearMap) -> Result<SpectralVector> {
    f.check_field(v)?;
    let values = exec::map_range(v.base.len(), |j| {
        let row: Vec<Complex64> = v.values.row(j).iter().copied().collect();
        forward_values(&row, &v.fiber)
            .iter()
            .enumerate()
            .map(|(i, c)| c * f.phase(j, i, 1.0))
            .sum::<Complex64>()
    });
    Ok(SpectralVector::point(DVector::from_vec(values)))
}

/// The shear conjugate `L_hat = S_{-f} (L ⊗ I) S_{+f}` of a base operator.
///
/// Entrywise, `L_hat[(j,q),(l,r)] = L[j,l] B_{jl}[q,r]` where `B_{jl}` is the
/// fiber shift by `f(x_l) - f(x_j)`.
pub fn ito_transform(l: &OperatorMatrix, f: &ShearMap) -> Result<OperatorMatrix> {
    f.check_base_operator(l)?;
    let (n, m) = (f.base.len(), f.fiber.len());
    let le = l.entries();
    // one fiber block per (j, l); row block j is assembled independently
    let row_blocks = exec::map_range(n, |j| {
        let mut strip = DMatrix::<Complex64>::zeros(m, n * m);
        for lidx in 0..n {
            let block = ShearMap::shift_block(&f.fiber, f.f_values[lidx] - f.f_values[j]);
            strip
                .view_mut((0, lidx * m), (m, m))
                .copy_from(&(block * le[(j, lidx)]));
        }
        strip
    });
    let mut entries = DMatrix::zeros(n * m, n * m);
    for (j, strip) in row_blocks.iter().enumerate() {
        entries.view_mut((j * m, 0), (m, n * m)).copy_from(strip);
    }
    let op = OperatorMatrix::new(entries, f.domain(), false)?;
    Ok(if l.is_hermitian() { op.hermitized() } else { op })
}

/// Sup and L2 norms of the difference between the two sides of the Ito formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItoResidual {
    pub max: f64,
    pub l2: f64,
}

/// Both semigroups of the Ito formula, prepared once for a symbol and shear.
pub struct ItoFormula {
    shear: ShearMap,
    base_generator: OperatorMatrix,
    lifted_generator: OperatorMatrix,
    route: Route,
}

enum Route {
    Eig {
        base: HermitianSpectrum,
        lifted: HermitianSpectrum,
    },
    Series {
        terms: usize,
    },
}

impl ItoFormula {
    pub fn new(a: &Symbol, f: &ShearMap, method: Method) -> Result<Self> {
        let symbol = match method {
            Method::Eig => a.clone(),
            Method::Series { lambda, .. } => cutoff_symbol(a, lambda)?,
        };
        let l0 = assemble_l0(&symbol, &f.base)?;
        let base_generator = compose_from_l0(&l0)?;
        let lifted_generator = ito_transform(&base_generator, f)?;
        let route = match method {
            // both sides diagonalized through their own factor: L0 on the base
            // grid, its shear conjugate on the product grid
            Method::Eig => Route::Eig {
                base: HermitianSpectrum::from_factor(&l0)?,
                lifted: HermitianSpectrum::from_factor(&ito_transform(&l0, f)?)?,
            },
            Method::Series { terms, .. } => Route::Series { terms },
        };
        Ok(Self {
            shear: f.clone(),
            base_generator,
            lifted_generator,
            route,
        })
    }

    pub fn base_generator(&self) -> &OperatorMatrix {
        &self.base_generator
    }

    pub fn lifted_generator(&self) -> &OperatorMatrix {
        &self.lifted_generator
    }

    /// Eigenvalues of the lifted generator itself, ascending.
    pub fn lifted_eigenvalues(&self) -> Result<Vec<f64>> {
        self.lifted_generator.hermitian_eigenvalues()
    }

    /// Compare `P_t (trace v)` with `trace(P_hat_t v)`.
    pub fn residual(&self, v: &LiftedField, t: f64) -> Result<ItoResidual> {
        let traced = graph_trace(v, &self.shear)?.values;
        let flat = v.to_flat();
        let (left, evolved) = match &self.route {
            Route::Eig { base, lifted } => (base.apply(t, &traced)?, lifted.apply(t, &flat)?),
            Route::Series { terms } => {
                let pb = semigroup_series(&self.base_generator, t, *terms)?.operator;
                let pl = semigroup_series(&self.lifted_generator, t, *terms)?.operator;
                (pb.apply(&traced)?, pl.apply(&flat)?)
            }
        };
        let evolved = LiftedField::from_flat(&evolved, v.base, v.fiber)?;
        let right = graph_trace(&evolved, &self.shear)?.values;
        let diff = left - right;
        Ok(ItoResidual {
            max: max_norm(&diff),
            l2: l2_norm(&diff, v.base.weight()),
        })
    }
}

/// One-shot Ito formula residual; see [`ItoFormula`] for sweeps over `t`.
pub fn ito_residual(
    a: &Symbol,
    f: &ShearMap,
    v: &LiftedField,
    t: f64,
    method: Method,
) -> Result<ItoResidual> {
    f.check_field(v)?;
    ItoFormula::new(a, f, method)?.residual(v, t)
}

/// A base vector field `X = c(x) d/dx` and its lift `X_hat = X + <X, df> d/dy`.
#[derive(Debug, Clone)]
pub struct LiftedVectorField {
    pub base: OperatorMatrix,
    pub lifted: OperatorMatrix,
    /// `c f'` at the base nodes.
    pub fiber_coefficient: Vec<f64>,
}

/// Build `X = diag(c) D_x` and `X_hat = X ⊗ I + diag(c f') ⊗ D_y`.
pub fn lift_vector_field(c: &[f64], f: &ShearMap) -> Result<LiftedVectorField> {
    let (base_grid, fiber_grid) = (f.base, f.fiber);
    if c.len() != base_grid.len() {
        return Err(Error::shape(
            format!("{} coefficients", base_grid.len()),
            format!("{}", c.len()),
        ));
    }
    if let Some(v) = c.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("vector field coefficient {v} is not finite")));
    }
    let n = base_grid.len();
    let dx = derivative_matrix(&base_grid);
    let diag_c = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { c[i] } else { 0.0 }, 0.0)
    });
    let base = OperatorMatrix::new(&diag_c * dx.entries(), Domain::Line(base_grid), false)?;
    let fprime = spectral_derivative_real(&f.f_values, &base_grid);
    let fiber_coefficient: Vec<f64> = c.iter().zip(&fprime).map(|(a, b)| a * b).collect();
    let coef = DMatrix::from_fn(n, n, |i, j| {
        Complex64::new(if i == j { fiber_coefficient[i] } else { 0.0 }, 0.0)
    });
    let dy = derivative_matrix(&fiber_grid);
    let lifted_entries =
        base.tensor_identity(&fiber_grid)?.entries() + coef.kronecker(dy.entries());
    let lifted = OperatorMatrix::new(lifted_entries, f.domain(), false)?;
    Ok(LiftedVectorField {
        base,
        lifted,
        fiber_coefficient,
    })
}

fn vector_field_pair(fields: &[Vec<f64>], f: &ShearMap) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if fields.is_empty() {
        return Err(Error::Config("at least one vector field is required".into()));
    }
    let lifts = fields
        .iter()
        .map(|c| lift_vector_field(c, f))
        .collect::<Result<Vec<_>>>()?;
    let mut base_sq = OperatorMatrix::zeros(Domain::Line(f.base));
    let mut lifted_sq = OperatorMatrix::zeros(f.domain());
    for lv in &lifts {
        base_sq = base_sq.add(&lv.base.compose(&lv.base)?)?;
        lifted_sq = lifted_sq.add(&lv.lifted.compose(&lv.lifted)?)?;
    }
    let conjugated = shear_matrix(f, ShearSign::Minus)
        .compose(&base_sq.tensor_identity(&f.fiber)?)?
        .compose(&shear_matrix(f, ShearSign::Plus))?;
    Ok((conjugated, lifted_sq))
}

/// `||S_{-f} (sum X_i^2 ⊗ I) S_{+f} - sum X_hat_i^2||_F` over the whole product grid.
pub fn vector_field_defect(fields: &[Vec<f64>], f: &ShearMap) -> Result<f64> {
    let (conj, lifted) = vector_field_pair(fields, f)?;
    Ok(conj.sub(&lifted)?.frobenius_norm())
}

/// The same conjugation defect applied to one field `v`, in the discrete L2 norm.
pub fn vector_field_defect_on(fields: &[Vec<f64>], f: &ShearMap, v: &LiftedField) -> Result<f64> {
    f.check_field(v)?;
    let (conj, lifted) = vector_field_pair(fields, f)?;
    let diff = conj.sub(&lifted)?.apply(&v.to_flat())?;
    Ok(l2_norm(&diff, v.domain().weight()))
}

/// The auxiliary operators built from a lifted generator and the fiber power `(-d^2/dy^2)^{m/2}`.
#[derive(Debug, Clone)]
pub struct AuxiliaryOperators {
    /// `L_hat + I ⊗ (-d^2/dy^2)^{m/2}`.
    pub bar_l1: OperatorMatrix,
    /// `L ⊗ I + I ⊗ (-d^2/dy^2)^{m/2}`.
    pub tilde_l: OperatorMatrix,
    /// `||[bar_l1, L_hat]||_F`.
    pub comm_norm: f64,
    /// `||bar_l1 - S_{-f} tilde_l S_{+f}||_F`.
    pub conj_norm: f64,
}

pub fn auxiliary_commutator(
    lifted: &OperatorMatrix,
    order: f64,
    f: &ShearMap,
    l: &OperatorMatrix,
) -> Result<AuxiliaryOperators> {
    f.check_base_operator(l)?;
    if lifted.domain() != f.domain() {
        return Err(Error::shape(
            format!("operator on {:?}", f.domain()),
            format!("operator on {:?}", lifted.domain()),
        ));
    }
    let fiber_power = OperatorMatrix::identity_tensor(&f.base, &fractional_laplacian(order, &f.fiber)?)?;
    let bar_l1 = lifted.add(&fiber_power)?;
    let tilde_l = l.tensor_identity(&f.fiber)?.add(&fiber_power)?;
    let comm_norm = bar_l1.commutator(lifted)?.frobenius_norm();
    let conjugated = shear_matrix(f, ShearSign::Minus)
        .compose(&tilde_l)?
        .compose(&shear_matrix(f, ShearSign::Plus))?;
    let conj_norm = bar_l1.sub(&conjugated)?.frobenius_norm();
    Ok(AuxiliaryOperators {
        bar_l1,
        tilde_l,
        comm_norm,
        conj_norm,
    })
}

/// Lifted semigroups with and without cutoff, prepared for the variation of
/// constants identity
/// `(P_hat_t - P_hat_{lambda,t}) v = int_0^t P_hat_{lambda,t-s} (L_hat_lambda - L_hat) P_hat_s v ds`.
pub struct DuhamelCheck {
    full: HermitianSpectrum,
    cut: HermitianSpectrum,
    generator_gap: OperatorMatrix,
}

impl DuhamelCheck {
    pub fn new(a: &Symbol, f: &ShearMap, lambda: f64) -> Result<Self> {
        let full_gen = ito_transform(&compose_l(a, &f.base)?, f)?;
        let cut_gen = ito_transform(&compose_l(&cutoff_symbol(a, lambda)?, &f.base)?, f)?;
        Ok(Self {
            full: HermitianSpectrum::new(&full_gen)?,
            cut: HermitianSpectrum::new(&cut_gen)?,
            generator_gap: cut_gen.sub(&full_gen)?,
        })
    }

    /// Relative L2 defect of the identity with trapezoid quadrature on `n_steps` panels.
    pub fn residual(&self, v: &LiftedField, t: f64, n_steps: usize) -> Result<f64> {
        if n_steps < 2 {
            return Err(Error::Config(format!("need at least 2 panels, got {n_steps}")));
        }
        let flat = v.to_flat();
        let weight = v.domain().weight();
        let lhs = self.full.apply(t, &flat)? - self.cut.apply(t, &flat)?;
        let h = t / n_steps as f64;
        let nodes = exec::map_range(n_steps + 1, |i| -> Result<DVector<Complex64>> {
            let s = if i == n_steps { t } else { i as f64 * h };
            let inner = self.generator_gap.apply(&self.full.apply(s, &flat)?)?;
            let w = if i == 0 || i == n_steps { 0.5 * h } else { h };
            Ok(self.cut.apply(t - s, &inner)? * Complex64::new(w, 0.0))
        });
        let mut quad = DVector::zeros(flat.len());
        for term in nodes {
            quad += term?;
        }
        let denom = l2_norm(&flat, weight);
        let num = l2_norm(&(lhs - quad), weight);
        Ok(if denom > 0.0 { num / denom } else { num })
    }
}

/// One-shot variation of constants residual; see [`DuhamelCheck`] for sweeps.
pub fn duhamel_residual(
    a: &Symbol,
    f: &ShearMap,
    v: &LiftedField,
    t: f64,
    lambda: f64,
    n_steps: usize,
) -> Result<f64> {
    f.check_field(v)?;
    DuhamelCheck::new(a, f, lambda)?.residual(v, t, n_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::builtin_symbol;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn grids(n: usize, m: usize, y: f64) -> (PeriodicGrid, PeriodicGrid) {
        (PeriodicGrid::new(n, 1.0).unwrap(), PeriodicGrid::new(m, y).unwrap())
    }

    fn random_field(base: PeriodicGrid, fiber: PeriodicGrid, seed: u64) -> LiftedField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TrigPoly::random(&mut rng, 3, 1.0, 0.5);
        let h = TrigPoly::random(&mut rng, 2, 1.0, 0.5);
        LiftedField::separable(base, fiber, &g, &h)
    }

    #[test]
    fn zero_shear_is_identity() {
        let (b, fb) = grids(8, 8, 1.0);
        let v = random_field(b, fb, 1);
        let s = ShearMap::zero(b, fb);
        let w = shear_apply(&v, &s, ShearSign::Plus).unwrap();
        assert!(max_abs(&(w.values() - v.values())) < 1e-13);
    }

    #[test]
    fn fiber_constant_field_is_unchanged() {
        let (b, fb) = grids(8, 8, 2.0);
        let s = ShearMap::from_trig(&TrigPoly::sine(0.3), b, fb);
        let v = LiftedField::from_fn(b, fb, |x, _| Complex64::new((2.0 * PI * x).cos(), 0.0));
        let w = shear_apply(&v, &s, ShearSign::Minus).unwrap();
        assert!(max_abs(&(w.values() - v.values())) < 1e-13);
    }

    #[test]
    fn single_mode_is_modulated() {
        let (b, fb) = grids(8, 8, 2.0);
        let f = TrigPoly::sine(0.4);
        let s = ShearMap::from_trig(&f, b, fb);
        let mode = |x: f64, y: f64| Complex64::from_polar(1.0, 2.0 * PI * y / 2.0) * x.cos();
        let v = LiftedField::from_fn(b, fb, mode);
        let w = shear_apply(&v, &s, ShearSign::Plus).unwrap();
        let expect = LiftedField::from_fn(b, fb, |x, y| mode(x, y + f.eval(x, 1.0)));
        assert!(max_abs(&(w.values() - expect.values())) < 1e-12);
    }

    #[test]
    fn shear_is_unitary_and_inverse_pair() {
        let (b, fb) = grids(8, 8, 1.0);
        let s = ShearMap::from_trig(&TrigPoly::new(vec![0.1, 0.2, -0.3]).unwrap(), b, fb);
        let plus = shear_matrix(&s, ShearSign::Plus);
        let minus = shear_matrix(&s, ShearSign::Minus);
        let id = DMatrix::<Complex64>::identity(64, 64);
        assert!(max_abs(&(plus.entries().adjoint() * plus.entries() - &id)) < 1e-12);
        assert!(max_abs(&(minus.entries() * plus.entries() - &id)) < 1e-12);
        let v = random_field(b, fb, 3);
        let direct = shear_apply(&v, &s, ShearSign::Plus).unwrap().to_flat();
        let via = plus.apply(&v.to_flat()).unwrap();
        assert!((direct - via).camax() < 1e-12);
    }

    #[test]
    fn graph_trace_at_nodes() {
        let (b, fb) = grids(8, 16, 2.0);
        let f = TrigPoly::sine(0.25);
        let s = ShearMap::from_trig(&f, b, fb);
        let v = LiftedField::from_fn(b, fb, |x, y| {
            Complex64::new(1.0 + x, 0.0) * Complex64::from_polar(1.0, 2.0 * PI * y / 2.0)
        });
        let tr = graph_trace(&v, &s).unwrap();
        for (j, x) in b.nodes().into_iter().enumerate() {
            let expect = Complex64::new(1.0 + x, 0.0)
                * Complex64::from_polar(1.0, 2.0 * PI * f.eval(x, 1.0) / 2.0);
            assert!((tr.values[j] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn ito_transform_without_shear_is_tensor() {
        let (b, fb) = grids(8, 4, 1.0);
        let a = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let l = compose_l(&a, &b).unwrap();
        let lh = ito_transform(&l, &ShearMap::zero(b, fb)).unwrap();
        let t = l.tensor_identity(&fb).unwrap();
        assert!(max_abs(&(lh.entries() - t.entries())) < 1e-12);
    }

    #[test]
    fn ito_transform_matches_conjugation() {
        let (b, fb) = grids(8, 8, 1.0);
        let a = builtin_symbol("variable_bessel", &params(&[("m", 1.0), ("beta0", 2.0), ("beta1", 1.0)]))
            .unwrap();
        let l = compose_l(&a, &b).unwrap();
        let s = ShearMap::from_trig(&TrigPoly::sine(0.2), b, fb);
        let lh = ito_transform(&l, &s).unwrap();
        let conj = shear_matrix(&s, ShearSign::Minus)
            .compose(&l.tensor_identity(&fb).unwrap())
            .unwrap()
            .compose(&shear_matrix(&s, ShearSign::Plus))
            .unwrap();
        let scale = lh.frobenius_norm();
        assert!(lh.sub(&conj).unwrap().frobenius_norm() < 1e-12 * scale);
        assert!(lh.is_hermitian());
        // same spectrum as L, each eigenvalue repeated M times
        let mut base: Vec<f64> = l
            .hermitian_eigenvalues()
            .unwrap()
            .into_iter()
            .flat_map(|e| std::iter::repeat(e).take(8))
            .collect();
        base.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let lifted = lh.hermitian_eigenvalues().unwrap();
        let top = base.last().unwrap().abs();
        for (x, y) in base.iter().zip(&lifted) {
            assert!((x - y).abs() < 1e-10 * top);
        }
        assert!(lifted[0] > -1e-10 * top);
    }

    #[test]
    fn ito_residual_small() {
        let (b, fb) = grids(16, 8, 1.0);
        let a = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let s = ShearMap::from_trig(&TrigPoly::sine(0.25), b, fb);
        let v = random_field(b, fb, 7);
        let form = ItoFormula::new(&a, &s, Method::Eig).unwrap();
        assert!(form.residual(&v, 0.0).unwrap().max < 1e-12);
        for t in [0.01, 0.1, 1.0] {
            assert!(form.residual(&v, t).unwrap().max < 1e-9);
        }
        let zero = ShearMap::zero(b, fb);
        assert!(ito_residual(&a, &zero, &v, 0.1, Method::Eig).unwrap().max < 1e-10);
    }

    #[test]
    fn ito_series_agrees_with_eig() {
        let (b, fb) = grids(8, 4, 1.0);
        let a = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let s = ShearMap::from_trig(&TrigPoly::sine(0.25), b, fb);
        let v = random_field(b, fb, 9);
        let lambda = 2.0 * b.max_abs_frequency();
        let r = ito_residual(&a, &s, &v, 0.1, Method::Series { lambda, terms: 20 }).unwrap();
        assert!(r.max < 1e-8);
    }

    #[test]
    fn lifted_vector_field_coefficient() {
        let (b, fb) = grids(16, 8, 1.0);
        let s = ShearMap::from_trig(&TrigPoly::sine(1.0), b, fb);
        let lv = lift_vector_field(&vec![1.0; 16], &s).unwrap();
        for (j, x) in b.nodes().into_iter().enumerate() {
            assert!((lv.fiber_coefficient[j] - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-10);
        }
        assert!(lift_vector_field(&[1.0; 3], &s).is_err());
    }

    #[test]
    fn vector_field_defect_on_band_limited_field() {
        let (b, fb) = grids(16, 16, 1.0);
        let s = ShearMap::from_trig(&TrigPoly::sine(0.1), b, fb);
        let v = LiftedField::from_fn(b, fb, |x, y| {
            Complex64::new((2.0 * PI * x).cos(), 0.0) * Complex64::from_polar(1.0, 2.0 * PI * y)
        });
        let c = vec![1.0; 16];
        let d = vector_field_defect_on(&[c.clone()], &s, &v).unwrap();
        assert!(d < 1e-2 * (2.0 * PI).powi(2));
        assert!(vector_field_defect(&[c], &ShearMap::zero(b, fb)).unwrap() < 1e-9);
    }

    #[test]
    fn auxiliary_without_shear() {
        let (b, fb) = grids(8, 4, 1.0);
        let a = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let l = compose_l(&a, &b).unwrap();
        let s = ShearMap::zero(b, fb);
        let lh = ito_transform(&l, &s).unwrap();
        let aux = auxiliary_commutator(&lh, 1.0, &s, &l).unwrap();
        assert!(aux.bar_l1.sub(&aux.tilde_l).unwrap().frobenius_norm() < 1e-12);
        assert!(aux.conj_norm < 1e-10);
    }

    #[test]
    fn auxiliary_with_shear() {
        let (b, fb) = grids(8, 8, 1.0);
        let a = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let l = compose_l(&a, &b).unwrap();
        let s = ShearMap::from_trig(&TrigPoly::sine(0.2), b, fb);
        let lh = ito_transform(&l, &s).unwrap();
        let aux = auxiliary_commutator(&lh, 1.0, &s, &l).unwrap();
        let scale = aux.bar_l1.frobenius_norm();
        assert!(aux.comm_norm < 1e-10 * scale * scale);
        assert!(aux.conj_norm < 1e-10 * scale);
    }

    #[test]
    fn duhamel_converges_second_order() {
        let b = PeriodicGrid::new(16, 8.0).unwrap();
        let fb = PeriodicGrid::new(8, 1.0).unwrap();
        let a = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let s = ShearMap::from_trig(&TrigPoly::sine(0.2), b, fb);
        let v = random_field(b, fb, 11);
        let check = DuhamelCheck::new(&a, &s, b.max_abs_frequency() / 2.0).unwrap();
        let r8 = check.residual(&v, 0.1, 8).unwrap();
        let r16 = check.residual(&v, 0.1, 16).unwrap();
        assert!(r8 > 0.0 && r16 < r8);
        assert!(r8 / r16 > 3.5, "ratio {}", r8 / r16);
        let exact = duhamel_residual(&a, &s, &v, 0.1, 2.0 * b.max_abs_frequency(), 8).unwrap();
        assert!(exact < 1e-12);
        assert!(check.residual(&v, 0.1, 1).is_err());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let (b, fb) = grids(8, 4, 1.0);
        let other = PeriodicGrid::new(6, 1.0).unwrap();
        let v = LiftedField::from_fn(b, other, |_, _| Complex64::new(1.0, 0.0));
        assert!(shear_apply(&v, &ShearMap::zero(b, fb), ShearSign::Plus).is_err());
    }
}
