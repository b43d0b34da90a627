//! Periodic grids, discrete Fourier analysis and Fourier-multiplier matrices.
//!
//! Conventions used throughout the crate:
//!
//! * nodes `x_j = j P / N`, `j = 0..N`;
//! * integer frequencies `k` in `-floor(N/2) ..= ceil(N/2) - 1`, stored in
//!   natural order (index `i` holds `k = i - floor(N/2)`), physical frequency `k / P`;
//! * forward transform `u_hat(k) = (1/N) sum_j u(x_j) exp(-2 pi i k x_j / P)`,
//!   inverse `u(x_j) = sum_k u_hat(k) exp(2 pi i k x_j / P)`;
//! * inner product `<u, w> = (P/N) sum_j u(x_j) conj(w(x_j))`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::exec;
use crate::operator::{Domain, OperatorMatrix};

/// Equispaced nodes on a circle of length `period`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid {
    n_points: usize,
    period: f64,
}

impl PeriodicGrid {
    pub fn new(n_points: usize, period: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::Config(format!(
                "grid size must be >= 2, got {n_points}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Config(format!(
                "grid period must be positive and finite, got {period}"
            )));
        }
        Ok(Self { n_points, period })
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Node spacing, which is also the quadrature weight.
    pub fn spacing(&self) -> f64 {
        self.period / self.n_points as f64
    }

    pub fn weight(&self) -> f64 {
        self.spacing()
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }

    /// Smallest integer frequency, `-floor(N/2)`.
    pub fn min_frequency(&self) -> i64 {
        -((self.n_points / 2) as i64)
    }

    /// Integer frequency stored at index `i`.
    pub fn frequency(&self, i: usize) -> i64 {
        i as i64 + self.min_frequency()
    }

    /// Storage index of integer frequency `k`, if it belongs to the grid.
    pub fn frequency_index(&self, k: i64) -> Option<usize> {
        let i = k - self.min_frequency();
        (0..self.n_points as i64).contains(&i).then_some(i as usize)
    }

    pub fn frequencies(&self) -> Vec<i64> {
        (0..self.n_points).map(|i| self.frequency(i)).collect()
    }

    /// Physical frequency `k / P` stored at index `i`.
    pub fn physical_frequency(&self, i: usize) -> f64 {
        self.frequency(i) as f64 / self.period
    }

    pub fn physical_frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.physical_frequency(i)).collect()
    }

    /// Largest `|xi|` over the grid frequencies.
    pub fn max_abs_frequency(&self) -> f64 {
        (self.n_points / 2) as f64 / self.period
    }

    /// Sampled Fourier mode `exp(2 pi i k x_j / P)`.
    pub fn mode(&self, k: i64) -> DVector<Complex64> {
        let table = self.phase_table();
        DVector::from_fn(self.n_points, |j, _| table[self.wrap(k * j as i64)])
    }

    /// Sample a function at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> Complex64) -> DVector<Complex64> {
        DVector::from_fn(self.n_points, |j, _| f(self.node(j)))
    }

    /// `exp(2 pi i r / N)` for `r = 0..N`; exact phases for integer products `k * j`.
    pub(crate) fn phase_table(&self) -> Vec<Complex64> {
        let n = self.n_points as f64;
        (0..self.n_points)
            .map(|r| Complex64::from_polar(1.0, 2.0 * PI * r as f64 / n))
            .collect()
    }

    pub(crate) fn wrap(&self, r: i64) -> usize {
        r.rem_euclid(self.n_points as i64) as usize
    }
}

/// Convenience wrapper around [`PeriodicGrid::new`].
pub fn make_grid(n_points: usize, period: f64) -> Result<PeriodicGrid> {
    PeriodicGrid::new(n_points, period)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Point,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Values on a grid, either at the nodes or per frequency (natural order).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    pub values: DVector<Complex64>,
    pub representation: Representation,
}

impl SpectralVector {
    pub fn point(values: DVector<Complex64>) -> Self {
        Self {
            values,
            representation: Representation::Point,
        }
    }

    pub fn fourier(values: DVector<Complex64>) -> Self {
        Self {
            values,
            representation: Representation::Fourier,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        max_norm(&self.values)
    }
}

pub fn max_norm(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Discrete Fourier transform between node values and natural-order coefficients.
pub fn transform(
    u: &SpectralVector,
    direction: Direction,
    grid: &PeriodicGrid,
) -> Result<SpectralVector> {
    let n = grid.len();
    if u.len() != n {
        return Err(Error::shape(format!("length {n}"), format!("length {}", u.len())));
    }
    let expected = match direction {
        Direction::Forward => Representation::Point,
        Direction::Inverse => Representation::Fourier,
    };
    if u.representation != expected {
        return Err(Error::shape(
            format!("{expected:?} representation"),
            format!("{:?} representation", u.representation),
        ));
    }
    let values = match direction {
        Direction::Forward => forward_values(u.values.as_slice(), grid),
        Direction::Inverse => inverse_values(u.values.as_slice(), grid),
    };
    Ok(SpectralVector {
        values: DVector::from_vec(values),
        representation: match direction {
            Direction::Forward => Representation::Fourier,
            Direction::Inverse => Representation::Point,
        },
    })
}

/// Forward transform of raw node values into natural-order coefficients.
pub(crate) fn forward_values(u: &[Complex64], grid: &PeriodicGrid) -> Vec<Complex64> {
    let n = grid.len();
    let mut buf = u.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    (0..n)
        .map(|i| buf[grid.wrap(grid.frequency(i))] * scale)
        .collect()
}

/// Inverse of [`forward_values`].
pub(crate) fn inverse_values(coeffs: &[Complex64], grid: &PeriodicGrid) -> Vec<Complex64> {
    let n = grid.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in coeffs.iter().enumerate() {
        buf[grid.wrap(grid.frequency(i))] = *c;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Discrete L2 inner product `(P/N) sum_j u_j conj(w_j)`.
pub fn inner_product(
    u: &SpectralVector,
    w: &SpectralVector,
    grid: &PeriodicGrid,
) -> Result<Complex64> {
    for v in [u, w] {
        if v.representation != Representation::Point {
            return Err(Error::shape("point representation", "Fourier representation"));
        }
        if v.len() != grid.len() {
            return Err(Error::shape(
                format!("length {}", grid.len()),
                format!("length {}", v.len()),
            ));
        }
    }
    Ok(weighted_dot(&u.values, &w.values, grid.weight()))
}

pub(crate) fn weighted_dot(u: &DVector<Complex64>, w: &DVector<Complex64>, weight: f64) -> Complex64 {
    u.iter().zip(w.iter()).map(|(a, b)| a * b.conj()).sum::<Complex64>() * weight
}

/// Discrete L2 norm with quadrature weight `weight`.
pub fn l2_norm(v: &DVector<Complex64>, weight: f64) -> f64 {
    (v.norm_squared() * weight).sqrt()
}

/// Dense point-basis matrix of the multiplier `g`: `F^-1 diag(g(k/P)) F`.
///
/// The Hermitian flag is set when every multiplier value is real.
pub fn multiplier_matrix(
    g: impl Fn(f64) -> Complex64,
    grid: &PeriodicGrid,
) -> Result<OperatorMatrix> {
    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let xi = grid.physical_frequency(i);
        let gv = g(xi);
        if !(gv.re.is_finite() && gv.im.is_finite()) {
            return Err(Error::Numeric(format!(
                "multiplier is not finite at frequency {xi}"
            )));
        }
        values.push(gv);
    }
    let real = values.iter().all(|z| z.im == 0.0);
    // circulant: entry (j, l) depends on (j - l) mod N only
    let table = grid.phase_table();
    let column: Vec<Complex64> = (0..n)
        .map(|d| {
            values
                .iter()
                .enumerate()
                .map(|(i, gv)| gv * table[grid.wrap(grid.frequency(i) * d as i64)])
                .sum::<Complex64>()
                / n as f64
        })
        .collect();
    let entries = DMatrix::from_fn(n, n, |j, l| column[grid.wrap(j as i64 - l as i64)]);
    let mut op = OperatorMatrix::new(entries, Domain::Line(*grid), false)?;
    if real {
        op = op.hermitized();
    }
    Ok(op)
}

/// Spectral derivative `d/dx`, the multiplier `2 pi i xi`.
pub fn derivative_matrix(grid: &PeriodicGrid) -> OperatorMatrix {
    multiplier_matrix(|xi| Complex64::new(0.0, 2.0 * PI * xi), grid)
        .expect("derivative multiplier is finite")
}

/// Fractional Laplacian power `(-d^2/dx^2)^{m/2}`, the multiplier `(2 pi |xi|)^m`.
pub fn fractional_laplacian(order: f64, grid: &PeriodicGrid) -> Result<OperatorMatrix> {
    multiplier_matrix(
        |xi| {
            let r = 2.0 * PI * xi.abs();
            // 0^0 = 1 so that order 0 gives the identity
            Complex64::new(if r == 0.0 && order != 0.0 { 0.0 } else { r.powf(order) }, 0.0)
        },
        grid,
    )
}

/// Apply `d/dx` to real samples and return the real part.
pub(crate) fn spectral_derivative_real(values: &[f64], grid: &PeriodicGrid) -> Vec<f64> {
    let u: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut coeffs = forward_values(&u, grid);
    for (i, c) in coeffs.iter_mut().enumerate() {
        let k = grid.frequency(i);
        // the unpaired Nyquist mode has no real derivative; drop it
        if grid.len() % 2 == 0 && k == grid.min_frequency() {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::new(0.0, 2.0 * PI * grid.physical_frequency(i));
        }
    }
    inverse_values(&coeffs, grid).into_iter().map(|z| z.re).collect()
}

/// Evaluate `f(i)` for each row index in parallel and stack rows into a matrix.
pub(crate) fn matrix_from_rows(
    rows: usize,
    cols: usize,
    row: impl Fn(usize) -> Vec<Complex64> + Sync + Send,
) -> DMatrix<Complex64> {
    let data = exec::map_range(rows, row);
    DMatrix::from_fn(rows, cols, |i, j| data[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn make_grid_examples() {
        let g = make_grid(4, 1.0).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(g.frequencies(), vec![-2, -1, 0, 1]);
        assert_eq!(make_grid(2, 1.0).unwrap().frequencies(), vec![-1, 0]);
        let g = make_grid(5, 2.0).unwrap();
        assert_eq!(g.frequencies(), vec![-2, -1, 0, 1, 2]);
        assert_relative_eq!(g.spacing(), 0.4);
        assert_eq!(g.frequency_index(2), Some(4));
        assert_eq!(g.frequency_index(3), None);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(matches!(make_grid(1, 1.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(4, 0.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(4, -1.0), Err(Error::Config(_))));
        assert!(matches!(make_grid(4, f64::NAN), Err(Error::Config(_))));
    }

    #[test]
    fn constant_maps_to_zero_mode() {
        let g = make_grid(4, 1.0).unwrap();
        let u = SpectralVector::point(DVector::from_element(4, c(1.0)));
        let uh = transform(&u, Direction::Forward, &g).unwrap();
        assert_eq!(uh.representation, Representation::Fourier);
        for (i, z) in uh.values.iter().enumerate() {
            let expect = if g.frequency(i) == 0 { 1.0 } else { 0.0 };
            assert!((z - c(expect)).norm() < 1e-15);
        }
    }

    #[test]
    fn single_mode_transform() {
        let g = make_grid(4, 1.0).unwrap();
        let u = SpectralVector::point(g.sample(|x| Complex64::from_polar(1.0, 2.0 * PI * x)));
        let uh = transform(&u, Direction::Forward, &g).unwrap();
        for (i, z) in uh.values.iter().enumerate() {
            let expect = if g.frequency(i) == 1 { 1.0 } else { 0.0 };
            assert!((z - c(expect)).norm() < 1e-15, "k={} {z}", g.frequency(i));
        }
    }

    #[test]
    fn transform_checks_shape_and_tag() {
        let g = make_grid(4, 1.0).unwrap();
        let u = SpectralVector::point(DVector::from_element(3, c(1.0)));
        assert!(matches!(
            transform(&u, Direction::Forward, &g),
            Err(Error::Shape { .. })
        ));
        let u = SpectralVector::fourier(DVector::from_element(4, c(1.0)));
        assert!(transform(&u, Direction::Forward, &g).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let g = make_grid(8, 1.0).unwrap();
        let one = SpectralVector::point(DVector::from_element(8, c(1.0)));
        assert_relative_eq!(inner_product(&one, &one, &g).unwrap().re, 1.0, epsilon = 1e-15);
        let e1 = SpectralVector::point(g.mode(1));
        let e2 = SpectralVector::point(g.mode(2));
        assert!(inner_product(&e1, &e2, &g).unwrap().norm() < 1e-14);
        let short = SpectralVector::point(DVector::from_element(4, c(1.0)));
        assert!(inner_product(&one, &short, &g).is_err());
    }

    #[test]
    fn multiplier_examples() {
        let g = make_grid(8, 1.0).unwrap();
        let id = multiplier_matrix(|_| c(1.0), &g).unwrap();
        assert!((id.entries() - DMatrix::identity(8, 8)).norm() < 1e-14);
        assert!(id.is_hermitian());

        let d = derivative_matrix(&g);
        assert!(!d.is_hermitian());
        let s = g.sample(|x| c((2.0 * PI * x).sin()));
        let ds = d.entries() * s;
        let expect = g.sample(|x| c(2.0 * PI * (2.0 * PI * x).cos()));
        assert!((ds - expect).camax() < 1e-12);

        let g4 = make_grid(4, 1.0).unwrap();
        let lap = fractional_laplacian(2.0, &g4).unwrap();
        let mut ev: Vec<f64> = lap.hermitian_eigenvalues().unwrap().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let p2 = 4.0 * PI * PI;
        for (a, b) in ev.iter().zip([0.0, p2, p2, 4.0 * p2]) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn multiplier_rejects_non_finite() {
        let g = make_grid(4, 1.0).unwrap();
        let err = multiplier_matrix(|xi| c(1.0 / xi), &g).unwrap_err();
        assert!(err.to_string().contains("frequency 0"), "{err}");
    }

    #[test]
    fn real_spectral_derivative() {
        let g = make_grid(16, 2.0).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| (PI * x).sin()).collect();
        let df = spectral_derivative_real(&f, &g);
        for (x, d) in g.nodes().iter().zip(df) {
            assert!((d - PI * (PI * x).cos()).abs() < 1e-12);
        }
    }
}
