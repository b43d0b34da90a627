//! Contraction semigroups `P_t = exp(-t L)` for positive Hermitian generators.
//!
//! Two routes are provided: the Hermitian eigendecomposition (reference) and
//! the truncated exponential series with scaling and squaring.

use nalgebra::{DMatrix, DVector};
use faer::complex_native::c64;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::{l2_norm, max_norm, PeriodicGrid, Representation, SpectralVector};
use crate::operator::{Domain, OperatorMatrix};
use crate::quantization::{assemble_l0, compose_from_l0};
use crate::symbols::{cutoff_symbol, Symbol};

/// Relative size below which negative eigenvalues of a generator are treated
/// as rounding noise of a positive operator and replaced by zero.
pub const NEGATIVE_EIGENVALUE_TOL: f64 = 1e-10;

/// How a semigroup is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Eig,
    /// Series of `exp(-t L_lambda)` truncated after `terms` terms.
    Series { lambda: f64, terms: usize },
}

/// Time and evaluation method of a semigroup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupSpec {
    pub t: f64,
    pub method: Method,
}

impl SemigroupSpec {
    pub fn new(t: f64, method: Method) -> Result<Self> {
        check_time(t)?;
        if let Method::Series { lambda, terms } = method {
            if terms < 1 {
                return Err(Error::Config("series needs at least one term".into()));
            }
            if !(lambda > 0.0) {
                return Err(Error::Config(format!("cutoff lambda must be positive, got {lambda}")));
            }
        }
        Ok(Self { t, method })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("time must be finite and >= 0, got {t}")))
    }
}

/// Eigendecomposition `L = U diag(lambda) U^H` of a Hermitian generator,
/// reusable for any number of times `t`.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
    domain: Domain,
}

impl HermitianSpectrum {
    pub fn new(l: &OperatorMatrix) -> Result<Self> {
        if !l.is_hermitian() {
            return Err(Error::Contract(
                "semigroup generator must be flagged Hermitian".into(),
            ));
        }
        let eig = l.entries().clone().symmetric_eigen();
        let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let scale = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let eigenvalues = raw
            .into_iter()
            .map(|v| {
                if v < 0.0 && v >= -NEGATIVE_EIGENVALUE_TOL * scale {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        Ok(Self {
            eigenvalues,
            eigenvectors: eig.eigenvectors,
            domain: l.domain(),
        })
    }

    /// Spectrum of `L = L0^* L0` from the singular value decomposition of `L0`.
    ///
    /// The eigenvectors are the right singular vectors and the eigenvalues the
    /// squared singular values, so rounding enters at the scale of `|L0|`
    /// instead of `|L0|^2`.
    pub fn from_factor(l0: &OperatorMatrix) -> Result<Self> {
        let entries = l0.entries();
        let n = entries.nrows();
        let m = faer::Mat::<c64>::from_fn(n, n, |i, j| {
            let z = entries[(i, j)];
            c64::new(z.re, z.im)
        });
        let svd = m.svd();
        let (s, v) = (svd.s_diagonal(), svd.v());
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| {
            let z = v.read(i, j);
            Complex64::new(z.re, z.im)
        });
        let eigenvalues: Vec<f64> = (0..n).map(|i| s.read(i).re.powi(2)).collect();
        Ok(Self {
            eigenvalues,
            eigenvectors,
            domain: l0.domain(),
        })
    }

    /// Eigenvalues in solver order (not sorted).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn decay(&self, t: f64) -> DVector<Complex64> {
        DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&v| Complex64::new((-t * v).exp(), 0.0)),
        )
    }

    /// `P_t = U exp(-t Lambda) U^H`.
    pub fn operator(&self, t: f64) -> Result<OperatorMatrix> {
        check_time(t)?;
        let scaled = self.eigenvectors.clone() * DMatrix::from_diagonal(&self.decay(t));
        let entries = scaled * self.eigenvectors.adjoint();
        Ok(OperatorMatrix::new(entries, self.domain, false)?.hermitized())
    }

    /// `P_t v` without forming the matrix.
    pub fn apply(&self, t: f64, v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        check_time(t)?;
        if v.len() != self.eigenvalues.len() {
            return Err(Error::shape(
                format!("vector of length {}", self.eigenvalues.len()),
                format!("length {}", v.len()),
            ));
        }
        let coeffs = self.eigenvectors.ad_mul(v).component_mul(&self.decay(t));
        Ok(&self.eigenvectors * coeffs)
    }
}

/// `exp(-t L)` by Hermitian eigendecomposition.
pub fn semigroup_eig(l: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    HermitianSpectrum::new(l)?.operator(t)
}

/// Result of [`semigroup_series`] with its a-priori error budget.
#[derive(Debug, Clone)]
pub struct SeriesSemigroup {
    pub operator: OperatorMatrix,
    /// Number of squarings `s`; the series is summed at `t / 2^s`.
    pub squarings: u32,
    pub scaled_time: f64,
    /// Upper bound `nu >= ||L||_2` used for scaling and for the bounds.
    pub norm_bound: f64,
    /// `2^s (t_s nu)^(K+1) / (K+1)! * exp(t_s nu)`.
    pub truncation_bound: f64,
    /// Floating-point allowance `4 n eps (K + s + 2) max(1, t nu)`.
    pub rounding_bound: f64,
}

impl SeriesSemigroup {
    /// Bound on `||R - exp(-tL)||_2` including rounding.
    pub fn error_bound(&self) -> f64 {
        self.truncation_bound + self.rounding_bound
    }
}

/// `exp(-t L)` from the truncated series `sum_{n <= K} (-t L)^n / n!` with
/// scaling and squaring: `t` is halved until `t ||L|| <= 1`, the series is
/// summed there and the result squared back.
///
/// The deviation `E = R - I` is carried through the squarings
/// (`E <- 2E + E^2`) so that the identity part does not swamp it.
pub fn semigroup_series(l: &OperatorMatrix, t: f64, terms: usize) -> Result<SeriesSemigroup> {
    check_time(t)?;
    if terms < 1 {
        return Err(Error::Config(format!(
            "series needs at least one term, got {terms}"
        )));
    }
    let n = l.dim();
    let nu = l.norm2_upper_bound();
    let identity = OperatorMatrix::identity(l.domain());
    if t == 0.0 || nu == 0.0 {
        return Ok(SeriesSemigroup {
            operator: identity,
            squarings: 0,
            scaled_time: t,
            norm_bound: nu,
            truncation_bound: 0.0,
            rounding_bound: 0.0,
        });
    }
    let mut squarings = 0u32;
    let mut ts = t;
    while ts * nu > 1.0 {
        ts *= 0.5;
        squarings += 1;
    }
    let x = l.entries() * Complex64::new(ts, 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    // Horner form of exp(-X) - I = (-X)(I + (-X/2)(I + (-X/3)(...)))
    let mut dev = DMatrix::<Complex64>::zeros(n, n);
    for k in (1..=terms).rev() {
        dev = (&x * (&id + &dev)) * Complex64::new(-1.0 / k as f64, 0.0);
    }
    for _ in 0..squarings {
        dev = &dev * Complex64::new(2.0, 0.0) + &dev * &dev;
    }
    let entries = id + dev;
    let mut operator = OperatorMatrix::new(entries, l.domain(), false)?;
    if l.is_hermitian() {
        operator = operator.hermitized();
    }

    let xs = ts * nu;
    let log_fact: f64 = (1..=terms + 1).map(|k| (k as f64).ln()).sum();
    let truncation_bound = (squarings as f64 * std::f64::consts::LN_2
        + (terms + 1) as f64 * xs.ln()
        - log_fact
        + xs)
        .exp();
    let rounding_bound = 4.0
        * n as f64
        * f64::EPSILON
        * (terms as f64 + squarings as f64 + 2.0)
        * (t * nu).max(1.0);
    Ok(SeriesSemigroup {
        operator,
        squarings,
        scaled_time: ts,
        norm_bound: nu,
        truncation_bound,
        rounding_bound,
    })
}

/// Discrete L2 and max norms of a grid function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub max: f64,
}

impl Norms {
    pub fn of(v: &DVector<Complex64>, weight: f64) -> Self {
        Self {
            l2: l2_norm(v, weight),
            max: max_norm(v),
        }
    }
}

/// One row of the cutoff convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffRow {
    pub lambda: f64,
    /// `(L0 - L0_lambda) u`.
    pub l0_diff: Norms,
    /// `(L0^* - L0_lambda^*) u`.
    pub adjoint_diff: Norms,
    /// `(P_t - P_{lambda,t}) u` for each requested `t`, in order.
    pub semigroup_diff: Vec<(f64, Norms)>,
}

/// Measure how the cutoff operators approach the full ones as `lambda` grows.
pub fn cutoff_convergence(
    a: &Symbol,
    grid: &PeriodicGrid,
    lambdas: &[f64],
    u: &SpectralVector,
    times: &[f64],
) -> Result<Vec<CutoffRow>> {
    if lambdas.is_empty() {
        return Err(Error::Config("lambda list is empty".into()));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::Config("lambda values must be positive and finite".into()));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("lambda list must be sorted ascending".into()));
    }
    for &t in times {
        check_time(t)?;
    }
    if u.representation != Representation::Point || u.len() != grid.len() {
        return Err(Error::shape(
            format!("point vector of length {}", grid.len()),
            format!("{:?} vector of length {}", u.representation, u.len()),
        ));
    }
    let weight = grid.weight();
    let l0 = assemble_l0(a, grid)?;
    let l0_adj = l0.adjoint();
    let full = HermitianSpectrum::new(&compose_from_l0(&l0)?)?;
    let full_u = times
        .iter()
        .map(|&t| full.apply(t, &u.values))
        .collect::<Result<Vec<_>>>()?;
    let l0_u = l0.apply(&u.values)?;
    let l0_adj_u = l0_adj.apply(&u.values)?;

    exec::map_slice(lambdas, |&lambda| {
        let cut = assemble_l0(&cutoff_symbol(a, lambda)?, grid)?;
        let cut_spec = HermitianSpectrum::new(&compose_from_l0(&cut)?)?;
        let l0_diff = Norms::of(&(&l0_u - cut.apply(&u.values)?), weight);
        let adjoint_diff = Norms::of(&(&l0_adj_u - cut.adjoint().apply(&u.values)?), weight);
        let semigroup_diff = times
            .iter()
            .zip(&full_u)
            .map(|(&t, pu)| Ok((t, Norms::of(&(pu - cut_spec.apply(t, &u.values)?), weight))))
            .collect::<Result<Vec<_>>>()?;
        Ok(CutoffRow {
            lambda,
            l0_diff,
            adjoint_diff,
            semigroup_diff,
        })
    })
    .into_iter()
    .collect()
}
