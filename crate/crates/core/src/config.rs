//! Plain-text `key=value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are dotted
//! (`grid.n`, `symbol.m`, `tol.ito_residual`); every key must be known and
//! appear at most once. Parsing fills in all defaults, so a parsed config
//! serializes to a complete, self-describing document.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::PeriodicGrid;
use crate::lift::default_fiber_period;
use crate::semigroup::Method;
use crate::symbols::{builtin_symbol, Symbol};
use crate::trig::TrigPoly;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    ItoVerify,
    CutoffConvergence,
    Spectrum,
    Duhamel,
    SymbolCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::ItoVerify,
        ExperimentKind::CutoffConvergence,
        ExperimentKind::Spectrum,
        ExperimentKind::Duhamel,
        ExperimentKind::SymbolCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ItoVerify => "ito_verify",
            ExperimentKind::CutoffConvergence => "cutoff_convergence",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Duhamel => "duhamel",
            ExperimentKind::SymbolCheck => "symbol_check",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Eig,
    Series,
}

/// Named tolerances and their defaults.
pub const DEFAULT_TOLERANCES: &[(&str, f64)] = &[
    // residual_max <= tol * max(1, ||v||_inf)
    ("ito_residual", 1e-9),
    // ||A - A^H||_F <= tol * (1 + ||A||_F)
    ("hermitian", 1e-10),
    // min eigenvalue >= -tol * max eigenvalue
    ("positivity", 1e-10),
    // difference norms once the cutoff is inactive
    ("cutoff_zero", 1e-12),
    // residual(n) / residual(2n) for an active cutoff
    ("duhamel_ratio", 3.5),
    ("duhamel_zero", 1e-12),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub symbol_name: String,
    pub symbol_params: BTreeMap<String, f64>,
    pub grid_n: usize,
    pub grid_period: f64,
    pub fiber_m: usize,
    pub fiber_period: f64,
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub f: TrigPoly,
    pub v: TrigPoly,
    pub v_fiber: TrigPoly,
    pub method: MethodKind,
    pub series_k: usize,
    pub series_lambda: f64,
    pub duhamel_steps: Vec<usize>,
    pub estimate_k_max: u32,
    pub estimate_kp_max: u32,
    pub ellipticity_threshold: f64,
    pub samples: usize,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub output_path: String,
}

impl ExperimentConfig {
    pub fn base_grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.grid_n, self.grid_period)
    }

    pub fn fiber_grid(&self) -> Result<PeriodicGrid> {
        PeriodicGrid::new(self.fiber_m, self.fiber_period)
    }

    pub fn symbol(&self) -> Result<Symbol> {
        builtin_symbol(&self.symbol_name, &self.symbol_params)
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances[name]
    }

    pub fn semigroup_method(&self) -> Method {
        match self.method {
            MethodKind::Eig => Method::Eig,
            MethodKind::Series => Method::Series {
                lambda: self.series_lambda,
                terms: self.series_k,
            },
        }
    }

    /// Canonical `key=value` form; [`parse_config`] reads it back to an equal config.
    pub fn serialize(&self) -> String {
        let mut out = Vec::new();
        let mut kv = |k: &str, v: String| out.push(format!("{k}={v}"));
        kv("experiment", self.experiment.to_string());
        kv("symbol.name", self.symbol_name.clone());
        for (k, v) in &self.symbol_params {
            kv(&format!("symbol.{k}"), fmt_f64(*v));
        }
        kv("grid.n", self.grid_n.to_string());
        kv("grid.period", fmt_f64(self.grid_period));
        kv("fiber.m", self.fiber_m.to_string());
        kv("fiber.period", fmt_f64(self.fiber_period));
        kv("times", fmt_list(&self.times));
        kv("lambdas", fmt_list(&self.lambdas));
        kv("f.coeffs", self.f.to_string());
        kv("v.coeffs", self.v.to_string());
        kv("v.fiber_coeffs", self.v_fiber.to_string());
        kv(
            "method",
            match self.method {
                MethodKind::Eig => "eig".into(),
                MethodKind::Series => "series".into(),
            },
        );
        kv("series.k", self.series_k.to_string());
        kv("series.lambda", fmt_f64(self.series_lambda));
        kv(
            "duhamel.steps",
            self.duhamel_steps
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("estimate.k_max", self.estimate_k_max.to_string());
        kv("estimate.kp_max", self.estimate_kp_max.to_string());
        kv("ellipticity.threshold", fmt_f64(self.ellipticity_threshold));
        kv("samples", self.samples.to_string());
        kv("seed", self.seed.to_string());
        for (k, v) in &self.tolerances {
            kv(&format!("tol.{k}"), fmt_f64(*v));
        }
        kv("output.path", self.output_path.clone());
        let mut s = out.join("\n");
        s.push('\n');
        s
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

struct Entry {
    value: String,
    line: usize,
}

struct Raw {
    entries: BTreeMap<String, Entry>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("line {}: cannot parse {key}='{}'", e.line, e.value))
            }),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        let line = self.entries.get(key).map(|e| e.line);
        let v = self.parse::<f64>(key)?;
        match v {
            Some(x) if !x.is_finite() => Err(Error::Config(format!(
                "line {}: {key} must be finite, got {x}",
                line.unwrap_or(0)
            ))),
            other => Ok(other),
        }
    }

    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(e) = self.take(key) else {
            return Ok(None);
        };
        let values = split_list(&e.value)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        Error::Config(format!("line {}: bad number '{s}' in {key}", e.line))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(values))
    }

    fn trig(&mut self, key: &str) -> Result<Option<TrigPoly>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => TrigPoly::parse(&e.value)
                .map(Some)
                .map_err(|err| Error::Config(format!("line {}: {key}: {err}", e.line))),
        }
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

/// Parse and validate a configuration document, filling in defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((k, v)) = trimmed.split_once('=') else {
            return Err(Error::Config(format!("line {line}: expected key=value, got '{trimmed}'")));
        };
        let key = k.trim().to_string();
        if entries.contains_key(&key) {
            return Err(Error::Config(format!("line {line}: duplicate key '{key}'")));
        }
        entries.insert(
            key,
            Entry {
                value: v.trim().to_string(),
                line,
            },
        );
    }
    let mut raw = Raw { entries };

    let experiment: ExperimentKind = raw
        .take("experiment")
        .ok_or_else(|| Error::Config("missing required key 'experiment'".into()))?
        .value
        .parse()?;
    let symbol_name = raw
        .take("symbol.name")
        .ok_or_else(|| Error::Config("missing required key 'symbol.name'".into()))?
        .value;

    let grid_n = raw.parse::<usize>("grid.n")?.unwrap_or(32);
    if grid_n < 2 {
        return Err(Error::Config("grid.n must be ≥ 2".into()));
    }
    let grid_period = raw.float("grid.period")?.unwrap_or(1.0);
    let base = PeriodicGrid::new(grid_n, grid_period)?;
    let fiber_m = raw.parse::<usize>("fiber.m")?.unwrap_or(16);
    if fiber_m < 2 {
        return Err(Error::Config("fiber.m must be ≥ 2".into()));
    }

    let f = raw.trig("f.coeffs")?.unwrap_or_else(|| TrigPoly::sine(0.25));
    let v = match raw.trig("v.coeffs")? {
        Some(p) => p,
        None => TrigPoly::new(vec![1.0, 0.5])?,
    };
    let v_fiber = match raw.trig("v.fiber_coeffs")? {
        Some(p) => p,
        None => TrigPoly::new(vec![0.0, 1.0])?,
    };
    let fiber_period = match raw.float("fiber.period")? {
        Some(y) => y,
        None => default_fiber_period(&f, &base),
    };
    PeriodicGrid::new(fiber_m, fiber_period)?;

    let xi_max = base.max_abs_frequency();
    let times = raw.floats("times")?.unwrap_or_else(|| vec![0.0, 0.01, 0.1, 1.0]);
    if times.iter().any(|t| *t < 0.0) {
        return Err(Error::Config("times must be >= 0".into()));
    }
    let lambdas = match raw.floats("lambdas")? {
        Some(l) => l,
        None => match experiment {
            ExperimentKind::CutoffConvergence => vec![0.25 * xi_max, 0.5 * xi_max, xi_max],
            _ => vec![0.5 * xi_max, xi_max],
        },
    };
    if lambdas.is_empty() || lambdas.iter().any(|l| *l <= 0.0) {
        return Err(Error::Config("lambdas must be a non-empty list of positive values".into()));
    }
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("lambdas must be sorted ascending".into()));
    }

    let method = match raw.take("method") {
        None => MethodKind::Eig,
        Some(e) => match e.value.as_str() {
            "eig" => MethodKind::Eig,
            "series" => MethodKind::Series,
            other => {
                return Err(Error::Config(format!(
                    "line {}: method must be 'eig' or 'series', got '{other}'",
                    e.line
                )))
            }
        },
    };
    let series_k = raw.parse::<usize>("series.k")?.unwrap_or(20);
    if series_k < 1 {
        return Err(Error::Config("series.k must be ≥ 1".into()));
    }
    let series_lambda = raw.float("series.lambda")?.unwrap_or(xi_max);
    if series_lambda <= 0.0 {
        return Err(Error::Config("series.lambda must be positive".into()));
    }
    let duhamel_steps = match raw.take("duhamel.steps") {
        None => vec![8, 16],
        Some(e) => split_list(&e.value)
            .map(|s| {
                s.parse::<usize>().ok().filter(|n| *n >= 2).ok_or_else(|| {
                    Error::Config(format!(
                        "line {}: duhamel.steps entries must be integers ≥ 2, got '{s}'",
                        e.line
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let estimate_k_max = raw.parse::<u32>("estimate.k_max")?.unwrap_or(2);
    let estimate_kp_max = raw.parse::<u32>("estimate.kp_max")?.unwrap_or(2);
    let ellipticity_threshold = raw.float("ellipticity.threshold")?.unwrap_or(0.0);
    let samples = raw.parse::<usize>("samples")?.unwrap_or(0);
    let seed = raw.parse::<u64>("seed")?.unwrap_or(0);
    let output_path = raw
        .take("output.path")
        .map(|e| e.value)
        .unwrap_or_else(|| format!("{experiment}.csv"));

    let mut tolerances: BTreeMap<String, f64> = DEFAULT_TOLERANCES
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    let mut symbol_params = BTreeMap::new();
    let leftover: Vec<String> = raw.entries.keys().cloned().collect();
    for key in leftover {
        let line = raw.entries[&key].line;
        if let Some(name) = key.strip_prefix("tol.") {
            if !tolerances.contains_key(name) {
                return Err(Error::Config(format!("line {line}: unknown tolerance '{key}'")));
            }
            let v = raw.float(&key)?.expect("present");
            tolerances.insert(name.to_string(), v);
        } else if let Some(name) = key.strip_prefix("symbol.") {
            let v = raw.float(&key)?.expect("present");
            symbol_params.insert(name.to_string(), v);
        } else {
            return Err(Error::Config(format!("line {line}: unknown key '{key}'")));
        }
    }
    if matches!(symbol_name.as_str(), "variable_bessel" | "vector_field") {
        symbol_params.entry("period".into()).or_insert(grid_period);
    }
    builtin_symbol(&symbol_name, &symbol_params)?;

    Ok(ExperimentConfig {
        experiment,
        symbol_name,
        symbol_params,
        grid_n,
        grid_period,
        fiber_m,
        fiber_period,
        times,
        lambdas,
        f,
        v,
        v_fiber,
        method,
        series_k,
        series_lambda,
        duhamel_steps,
        estimate_k_max,
        estimate_kp_max,
        ellipticity_threshold,
        samples,
        seed,
        tolerances,
        output_path,
    })
}
