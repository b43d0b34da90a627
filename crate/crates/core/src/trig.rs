//! Real trigonometric polynomials given by coefficient lists.
//!
//! Coefficients are `[c0, a1, b1, a2, b2, ...]` and describe
//! `c0 + sum_h a_h cos(2 pi h x / P) + b_h sin(2 pi h x / P)`.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    coeffs: Vec<f64>,
}

impl TrigPoly {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Config("trigonometric coefficient list is empty".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::Config(format!("non-finite trigonometric coefficient {c}")));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `amplitude * sin(2 pi x / P)`.
    pub fn sine(amplitude: f64) -> Self {
        Self {
            coeffs: vec![0.0, 0.0, amplitude],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Highest harmonic with a (possibly zero) coefficient slot.
    pub fn degree(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn eval(&self, x: f64, period: f64) -> f64 {
        let mut acc = self.coeffs[0];
        for (h, pair) in self.coeffs[1..].chunks(2).enumerate() {
            let arg = 2.0 * PI * (h + 1) as f64 * x / period;
            acc += pair[0] * arg.cos();
            if let Some(b) = pair.get(1) {
                acc += b * arg.sin();
            }
        }
        acc
    }

    /// Exact derivative in `x`.
    pub fn derivative(&self, x: f64, period: f64) -> f64 {
        let mut acc = 0.0;
        for (h, pair) in self.coeffs[1..].chunks(2).enumerate() {
            let w = 2.0 * PI * (h + 1) as f64 / period;
            acc -= pair[0] * w * (w * x).sin();
            if let Some(b) = pair.get(1) {
                acc += b * w * (w * x).cos();
            }
        }
        acc
    }

    /// Lower bound `c0 - sum |a_h| - sum |b_h|` on the values.
    pub fn lower_bound(&self) -> f64 {
        self.coeffs[0] - self.coeffs[1..].iter().map(|c| c.abs()).sum::<f64>()
    }

    /// Random polynomial with harmonics `1..=degree`, the `h`-th coefficients
    /// uniform in `[-scale / h, scale / h]`, and constant term `constant`.
    pub fn random(rng: &mut impl Rng, degree: usize, scale: f64, constant: f64) -> Self {
        let mut coeffs = vec![constant];
        for h in 1..=degree {
            let s = scale / h as f64;
            coeffs.push(rng.gen_range(-s..=s));
            coeffs.push(rng.gen_range(-s..=s));
        }
        Self { coeffs }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let coeffs = text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad coefficient '{}'", s.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coeffs)
    }
}

impl fmt::Display for TrigPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| format!("{c:?}")).collect();
        write!(f, "{}", parts.join(","))
    }
}
