//! Symbols `a(x, xi)`, the smooth cutoff `a_lambda = phi(xi / lambda) a`, and
//! empirical checks of the symbol-class and ellipticity bounds.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::trig::TrigPoly;

type SymbolFn = dyn Fn(f64, f64) -> Complex64 + Send + Sync;

/// A complex-valued symbol of order `m`, evaluated at position `x` and
/// physical frequency `xi`.
#[derive(Clone)]
pub struct Symbol {
    name: String,
    order: f64,
    params: BTreeMap<String, f64>,
    eval: Arc<SymbolFn>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl Symbol {
    pub fn new(
        name: impl Into<String>,
        order: f64,
        params: BTreeMap<String, f64>,
        eval: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            order,
            params,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    #[inline]
    pub fn eval(&self, x: f64, xi: f64) -> Complex64 {
        (self.eval)(x, xi)
    }
}

/// Built-in families and a one-line description of each.
pub const BUILTIN_SYMBOLS: &[(&str, &str)] = &[
    ("const", "a = c; order 0; params: c"),
    ("derivative", "a = 2 pi i xi; order 1"),
    ("bessel", "a = (1 + (2 pi xi)^2)^(m/2); order m; params: m"),
    (
        "variable_bessel",
        "a = b(x) (1 + (2 pi xi)^2)^(m/2), b = beta0 + beta1 sin(2 pi x / P), beta0 > |beta1|; params: m, beta0, beta1, period",
    ),
    (
        "vector_field",
        "a = c(x) 2 pi i xi with c = c0 + sum a_h cos + b_h sin; order 1; params: c0, a1, b1, ..., period",
    ),
];

fn japanese(xi: f64, m: f64) -> f64 {
    (1.0 + (2.0 * PI * xi).powi(2)).powf(0.5 * m)
}

struct Params<'a> {
    family: &'a str,
    table: &'a BTreeMap<String, f64>,
}

impl Params<'_> {
    fn require(&self, key: &str) -> Result<f64> {
        self.table.get(key).copied().ok_or_else(|| {
            Error::Config(format!("symbol '{}' requires parameter '{key}'", self.family))
        })
    }

    fn allow_only(&self, allowed: impl Fn(&str) -> bool) -> Result<()> {
        for (k, v) in self.table {
            if !allowed(k) {
                return Err(Error::Config(format!(
                    "symbol '{}' does not take parameter '{k}'",
                    self.family
                )));
            }
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "symbol parameter '{k}' is not finite"
                )));
            }
        }
        Ok(())
    }

    fn period(&self) -> Result<f64> {
        let p = self.table.get("period").copied().unwrap_or(1.0);
        if p > 0.0 {
            Ok(p)
        } else {
            Err(Error::Config(format!("symbol period must be positive, got {p}")))
        }
    }
}

/// Parse harmonic keys `c0, a1, b1, a2, ...` into a coefficient list.
fn harmonic_coeffs(table: &BTreeMap<String, f64>) -> Result<TrigPoly> {
    let mut coeffs = vec![table.get("c0").copied().unwrap_or(0.0)];
    let degree = table
        .keys()
        .filter_map(|k| {
            let rest = k.strip_prefix('a').or_else(|| k.strip_prefix('b'))?;
            rest.parse::<usize>().ok()
        })
        .max()
        .unwrap_or(0);
    for h in 1..=degree {
        coeffs.push(table.get(&format!("a{h}")).copied().unwrap_or(0.0));
        coeffs.push(table.get(&format!("b{h}")).copied().unwrap_or(0.0));
    }
    TrigPoly::new(coeffs)
}

fn is_harmonic_key(k: &str) -> bool {
    k == "c0"
        || k.strip_prefix('a')
            .or_else(|| k.strip_prefix('b'))
            .and_then(|r| r.parse::<usize>().ok())
            .is_some_and(|h| h >= 1)
}

/// Construct one of the [`BUILTIN_SYMBOLS`] from its parameter table.
pub fn builtin_symbol(name: &str, params: &BTreeMap<String, f64>) -> Result<Symbol> {
    let p = Params {
        family: name,
        table: params,
    };
    let params = params.clone();
    match name {
        "const" => {
            p.allow_only(|k| k == "c")?;
            let c = p.require("c")?;
            Ok(Symbol::new(name, 0.0, params, move |_, _| Complex64::new(c, 0.0)))
        }
        "derivative" => {
            p.allow_only(|_| false)?;
            Ok(Symbol::new(name, 1.0, params, |_, xi| {
                Complex64::new(0.0, 2.0 * PI * xi)
            }))
        }
        "bessel" => {
            p.allow_only(|k| k == "m")?;
            let m = p.require("m")?;
            Ok(Symbol::new(name, m, params, move |_, xi| {
                Complex64::new(japanese(xi, m), 0.0)
            }))
        }
        "variable_bessel" => {
            p.allow_only(|k| matches!(k, "m" | "beta0" | "beta1" | "period"))?;
            let m = p.require("m")?;
            let b0 = p.require("beta0")?;
            let b1 = p.require("beta1")?;
            let period = p.period()?;
            if b0 <= b1.abs() {
                return Err(Error::Config(format!(
                    "variable_bessel needs beta0 > |beta1|, got beta0={b0}, beta1={b1}"
                )));
            }
            Ok(Symbol::new(name, m, params, move |x, xi| {
                let b = b0 + b1 * (2.0 * PI * x / period).sin();
                Complex64::new(b * japanese(xi, m), 0.0)
            }))
        }
        "vector_field" => {
            p.allow_only(|k| k == "period" || is_harmonic_key(k))?;
            let period = p.period()?;
            let c = harmonic_coeffs(&params)?;
            Ok(Symbol::new(name, 1.0, params, move |x, xi| {
                Complex64::new(0.0, 2.0 * PI * xi * c.eval(x, period))
            }))
        }
        other => Err(Error::Config(format!("unknown symbol '{other}'"))),
    }
}

fn smooth_step_kernel(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth bump: 1 on `|s| <= 1`, 0 on `|s| >= 2`, monotone in between.
pub fn bump_phi(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        return 1.0;
    }
    if s >= 2.0 {
        return 0.0;
    }
    let up = smooth_step_kernel(2.0 - s);
    let down = smooth_step_kernel(s - 1.0);
    up / (up + down)
}

/// `a_lambda(x, xi) = phi(xi / lambda) a(x, xi)`, keeping the order of `a`.
pub fn cutoff_symbol(a: &Symbol, lambda: f64) -> Result<Symbol> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!(
            "cutoff lambda must be positive, got {lambda}"
        )));
    }
    let inner = a.clone();
    let mut params = a.params.clone();
    params.insert("lambda".into(), lambda);
    Ok(Symbol::new(
        format!("cutoff({})", a.name),
        a.order,
        params,
        move |x, xi| inner.eval(x, xi) * bump_phi(xi / lambda),
    ))
}

/// Empirical constants `C_{k,k'}` of the symbol estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolEstimateReport {
    pub constants: BTreeMap<(u32, u32), f64>,
    pub max_order_checked: u32,
    pub sample: String,
}

impl SymbolEstimateReport {
    pub fn constant(&self, k: u32, k_prime: u32) -> Option<f64> {
        self.constants.get(&(k, k_prime)).copied()
    }
}

/// Deepest finite-difference order supported by [`symbol_estimate_report`].
pub const MAX_DIFFERENCE_ORDER: u32 = 3;

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Central difference stencil `delta_h^k`: offsets (in units of h) and weights.
fn central_stencil(k: u32) -> Vec<(f64, f64)> {
    (0..=k)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            (0.5 * k as f64 - i as f64, sign * binomial(k, i))
        })
        .collect()
}

/// Mixed central difference `D_x^k D_xi^kp a` at `(x, xi)`.
fn mixed_difference(a: &Symbol, x: f64, xi: f64, k: u32, kp: u32, hx: f64, hxi: f64) -> Complex64 {
    let sx = central_stencil(k);
    let sxi = central_stencil(kp);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(ox, wx) in &sx {
        for &(oxi, wxi) in &sxi {
            acc += a.eval(x + ox * hx, xi + oxi * hxi) * (wx * wxi);
        }
    }
    acc / (hx.powi(k as i32) * hxi.powi(kp as i32))
}

/// Estimate `C_{k,k'} = max |D_x^k D_xi^k' a| / (1 + xi^2)^((m - k')/2)` over
/// grid nodes and grid frequencies, for all `k <= k_max`, `k' <= kp_max`.
///
/// Derivatives are central differences with `h_x = P / (8N)` and `h_xi = 1/4`.
pub fn symbol_estimate_report(
    a: &Symbol,
    grid: &PeriodicGrid,
    k_max: u32,
    kp_max: u32,
) -> Result<SymbolEstimateReport> {
    if k_max > MAX_DIFFERENCE_ORDER || kp_max > MAX_DIFFERENCE_ORDER {
        return Err(Error::Config(format!(
            "derivative orders are limited to {MAX_DIFFERENCE_ORDER}, got ({k_max}, {kp_max})"
        )));
    }
    let hx = grid.period() / (8.0 * grid.len() as f64);
    let hxi = 0.25;
    let nodes = grid.nodes();
    let freqs = grid.physical_frequencies();
    let mut constants = BTreeMap::new();
    for k in 0..=k_max {
        for kp in 0..=kp_max {
            let mut best = 0.0_f64;
            for &x in &nodes {
                for &xi in &freqs {
                    let d = mixed_difference(a, x, xi, k, kp, hx, hxi);
                    let weight = (1.0 + xi * xi).powf(0.5 * (a.order() - kp as f64));
                    let ratio = d.norm() / weight;
                    if !ratio.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite derivative D_x^{k} D_xi^{kp} a at x={x}, xi={xi}"
                        )));
                    }
                    best = best.max(ratio);
                }
            }
            constants.insert((k, kp), best);
        }
    }
    Ok(SymbolEstimateReport {
        constants,
        max_order_checked: k_max.max(kp_max),
        sample: format!(
            "{} nodes x {} frequencies (P={}, |xi| <= {}), h_x={hx}, h_xi={hxi}",
            nodes.len(),
            freqs.len(),
            grid.period(),
            grid.max_abs_frequency()
        ),
    })
}

/// Largest `C_M` with `inf_x |a(x, xi)| >= C_M |xi|^m` for every grid
/// frequency `|xi| > M`; `+inf` when no grid frequency exceeds `M`.
pub fn ellipticity_constant(a: &Symbol, grid: &PeriodicGrid, threshold: f64) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(Error::Config(format!(
            "ellipticity threshold must be >= 0, got {threshold}"
        )));
    }
    let nodes = grid.nodes();
    let mut best = f64::INFINITY;
    for xi in grid.physical_frequencies() {
        if xi.abs() <= threshold {
            continue;
        }
        let inf_x = nodes
            .iter()
            .map(|&x| a.eval(x, xi).norm())
            .fold(f64::INFINITY, f64::min);
        best = best.min(inf_x / xi.abs().powf(a.order()));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, f64)]) -> BTreeMap<String, f64> {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn builtin_examples() {
        let c = builtin_symbol("const", &params(&[("c", 1.0)])).unwrap();
        assert_eq!(c.order(), 0.0);
        assert_eq!(c.eval(0.3, 7.0), Complex64::new(1.0, 0.0));

        let b = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        for x in [0.0, 0.4, 0.9] {
            assert_eq!(b.eval(x, 0.0), Complex64::new(1.0, 0.0));
        }

        let vb = builtin_symbol(
            "variable_bessel",
            &params(&[("m", 2.0), ("beta0", 2.0), ("beta1", 1.0), ("period", 1.0)]),
        )
        .unwrap();
        let expect = 3.0 * (1.0 + 4.0 * PI * PI);
        assert!((vb.eval(0.25, 1.0).re - expect).abs() < 1e-12 * expect);
        assert_eq!(vb.order(), 2.0);

        let vf = builtin_symbol("vector_field", &params(&[("c0", 1.0), ("b1", 0.5)])).unwrap();
        let got = vf.eval(0.25, 2.0);
        assert!((got - Complex64::new(0.0, 2.0 * PI * 2.0 * 1.5)).norm() < 1e-12);
    }

    #[test]
    fn builtin_errors() {
        assert!(builtin_symbol("nope", &BTreeMap::new()).is_err());
        assert!(builtin_symbol("bessel", &BTreeMap::new()).is_err());
        assert!(builtin_symbol("bessel", &params(&[("m", 1.0), ("q", 2.0)])).is_err());
        let bad = params(&[("m", 2.0), ("beta0", 1.0), ("beta1", 1.0)]);
        assert!(matches!(builtin_symbol("variable_bessel", &bad), Err(Error::Config(_))));
        assert!(builtin_symbol("derivative", &params(&[("m", 1.0)])).is_err());
    }

    #[test]
    fn bump_examples() {
        assert_eq!(bump_phi(0.5), 1.0);
        assert_eq!(bump_phi(3.0), 0.0);
        assert!((bump_phi(1.5) - 0.5).abs() < 1e-15);
        assert!((bump_phi(-1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bump_shape_on_dense_sample() {
        let n = 10_000;
        let mut prev = 1.0;
        for i in 0..=n {
            let s = -3.0 + 6.0 * i as f64 / n as f64;
            let v = bump_phi(s);
            assert!((0.0..=1.0).contains(&v));
            if s.abs() <= 1.0 {
                assert_eq!(v, 1.0);
            }
            if s.abs() >= 2.0 {
                assert_eq!(v, 0.0);
            }
        }
        for i in 0..=n {
            let s = 1.0 + i as f64 / n as f64;
            let v = bump_phi(s);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn cutoff_examples() {
        let b = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let bl = cutoff_symbol(&b, 2.0).unwrap();
        assert_eq!(bl.eval(0.1, 0.0), b.eval(0.1, 0.0));
        let expect = (1.0 + 36.0 * PI * PI).sqrt() * bump_phi(1.5);
        assert!((bl.eval(0.0, 3.0).re - expect).abs() < 1e-13);
        assert_eq!(bl.order(), 1.0);

        let g = PeriodicGrid::new(16, 1.0).unwrap();
        let wide = cutoff_symbol(&b, g.max_abs_frequency()).unwrap();
        for xi in g.physical_frequencies() {
            assert_eq!(wide.eval(0.2, xi), b.eval(0.2, xi));
        }
        assert!(cutoff_symbol(&b, 0.0).is_err());
        assert!(cutoff_symbol(&b, -1.0).is_err());
    }

    #[test]
    fn estimate_const() {
        let c = builtin_symbol("const", &params(&[("c", 1.0)])).unwrap();
        let g = PeriodicGrid::new(8, 1.0).unwrap();
        let r = symbol_estimate_report(&c, &g, 1, 1).unwrap();
        assert!((r.constant(0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(r.constant(0, 1).unwrap() < 1e-12);
        assert!(r.constant(1, 0).unwrap() < 1e-9);
    }

    #[test]
    fn estimate_bessel_and_derivative() {
        let g = PeriodicGrid::new(32, 1.0).unwrap();
        let b = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let r = symbol_estimate_report(&b, &g, 0, 0).unwrap();
        assert!(r.constant(0, 0).unwrap() <= 2.0 * PI + 1.0);

        let d = builtin_symbol("derivative", &BTreeMap::new()).unwrap();
        let r = symbol_estimate_report(&d, &g, 0, 0).unwrap();
        // direct max over grid frequencies
        let oracle = g
            .physical_frequencies()
            .iter()
            .map(|xi| 2.0 * PI * xi.abs() / (1.0 + xi * xi).sqrt())
            .fold(0.0, f64::max);
        assert!((r.constant(0, 0).unwrap() - oracle).abs() < 1e-12);
        assert!(symbol_estimate_report(&d, &g, 4, 0).is_err());
    }

    #[test]
    fn estimates_are_stable_under_refinement() {
        let vb = builtin_symbol(
            "variable_bessel",
            &params(&[("m", 1.0), ("beta0", 2.0), ("beta1", 1.0)]),
        )
        .unwrap();
        let coarse = symbol_estimate_report(&vb, &PeriodicGrid::new(32, 1.0).unwrap(), 2, 2).unwrap();
        let fine = symbol_estimate_report(&vb, &PeriodicGrid::new(64, 1.0).unwrap(), 2, 2).unwrap();
        for (key, c) in &coarse.constants {
            let f = fine.constants[key];
            assert!(c.is_finite() && *c >= 0.0);
            assert!((f - c).abs() <= 0.1 * c.max(f), "{key:?}: {c} vs {f}");
        }
    }

    #[test]
    fn ellipticity_examples() {
        let g = PeriodicGrid::new(16, 1.0).unwrap();
        let d = builtin_symbol("derivative", &BTreeMap::new()).unwrap();
        assert!((ellipticity_constant(&d, &g, 0.0).unwrap() - 2.0 * PI).abs() < 1e-12);
        let b2 = builtin_symbol("bessel", &params(&[("m", 2.0)])).unwrap();
        assert!(ellipticity_constant(&b2, &g, 1.0).unwrap() >= 4.0 * PI * PI);
        let zero = builtin_symbol("const", &params(&[("c", 0.0)])).unwrap();
        assert_eq!(ellipticity_constant(&zero, &g, 0.0).unwrap(), 0.0);
        assert_eq!(ellipticity_constant(&d, &g, 100.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn elliptic_families_have_positive_constant() {
        let b = builtin_symbol("bessel", &params(&[("m", 1.0)])).unwrap();
        let vb = builtin_symbol(
            "variable_bessel",
            &params(&[("m", 2.0), ("beta0", 2.0), ("beta1", 1.0)]),
        )
        .unwrap();
        for n in [4, 8, 16, 32, 64, 128] {
            let g = PeriodicGrid::new(n, 1.0).unwrap();
            assert!(ellipticity_constant(&b, &g, 0.0).unwrap() > 0.0);
            assert!(ellipticity_constant(&vb, &g, 0.0).unwrap() > 0.0);
        }
    }
}
