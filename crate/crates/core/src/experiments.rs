//! Experiment orchestration and CSV / manifest emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::grid::SpectralVector;
use crate::lift::{DuhamelCheck, ItoFormula, LiftedField, ShearMap};
use crate::quantization::compose_l;
use crate::semigroup::{cutoff_convergence, Method};
use crate::symbols::{ellipticity_constant, symbol_estimate_report};
use crate::trig::TrigPoly;

/// Conventions every report records, so that numbers can be read without the code.
pub const CONVENTIONS: &[&str] = &[
    "quantization: left (Kohn-Nirenberg), (L0 u)(x) = sum_k a(x, k/P) u_hat(k) exp(2 pi i k x / P)",
    "dft: u_hat(k) = (1/N) sum_j u(x_j) exp(-2 pi i k x_j / P), frequencies -floor(N/2)..ceil(N/2)-1",
    "generator: L = L0^* L0 (positive); semigroup P_t = exp(-t L)",
    "series: sum_{n<=K} (-t L_lambda)^n / n! with scaling and squaring until t nu <= 1, nu = min(||L||_1, ||L||_inf, ||L||_F)",
    "ito formula, eig route: each side diagonalized through the singular value decomposition of its own L0 factor",
    "shear: (S_f v)(x, y) = v(x, y + f(x)) as fiber-Fourier modulation; L_hat = S_{-f} (L (x) I) S_{+f}",
    "graph trace: fiber trigonometric interpolant evaluated at y = f(x)",
    "variation of constants: P_hat_t - P_hat_{lambda,t} = int_0^t P_hat_{lambda,t-s} (L_hat_lambda - L_hat) P_hat_s ds",
    "symbol estimate weight: (1 + xi^2)^((m - k')/2) in place of |xi|^(m - k')",
    "negative generator eigenvalues above -1e-10 * max|eigenvalue| are treated as 0",
];

/// One tolerance check of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value >= limit,
        }
    }
}

/// A table with a header row, written with 17 significant digits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Real(x) => format!("{x:.16e}"),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[idx] {
                    Cell::Int(i) => i as f64,
                    Cell::Real(x) => x,
                })
                .collect(),
        )
    }
}

/// What a run computed, before anything is written to disk.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub outcome: Outcome,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.outcome.passed()
    }
}

/// Compute the experiment described by `config` without touching the filesystem.
pub fn evaluate(config: &ExperimentConfig) -> Result<Outcome> {
    match config.experiment {
        ExperimentKind::ItoVerify => ito_verify(config),
        ExperimentKind::CutoffConvergence => cutoff(config),
        ExperimentKind::Spectrum => spectrum(config),
        ExperimentKind::Duhamel => duhamel(config),
        ExperimentKind::SymbolCheck => symbol_check(config),
    }
}

/// Run an experiment and write its CSV table and manifest.
///
/// With `output_dir`, the file name of `output.path` is placed in that directory.
pub fn run_experiment(config: &ExperimentConfig, output_dir: Option<&Path>) -> Result<RunReport> {
    let outcome = evaluate(config)?;
    let csv_path = resolve_output(config, output_dir);
    let manifest_path = csv_path.with_extension("manifest.txt");
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(&csv_path, outcome.table.to_csv()).map_err(|e| io_error(&csv_path, e))?;
    fs::write(&manifest_path, manifest(config, &outcome)).map_err(|e| io_error(&manifest_path, e))?;
    Ok(RunReport {
        csv_path,
        manifest_path,
        outcome,
    })
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn resolve_output(config: &ExperimentConfig, output_dir: Option<&Path>) -> PathBuf {
    let path = PathBuf::from(&config.output_path);
    match output_dir {
        Some(dir) => dir.join(path.file_name().unwrap_or(path.as_os_str())),
        None => path,
    }
}

/// Manifest text: the resolved config (re-parseable) followed by commented
/// conventions, notes and checks.
pub fn manifest(config: &ExperimentConfig, outcome: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# itolift run manifest (itolift-core {})", env!("CARGO_PKG_VERSION"));
    s.push_str(&config.serialize());
    s.push_str("# conventions\n");
    for c in CONVENTIONS {
        let _ = writeln!(s, "#   {c}");
    }
    if !outcome.notes.is_empty() {
        s.push_str("# notes\n");
        for n in &outcome.notes {
            let _ = writeln!(s, "#   {n}");
        }
    }
    s.push_str("# checks\n");
    for c in &outcome.checks {
        let _ = writeln!(
            s,
            "#   {} {} value={:.16e} limit={:.16e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.limit
        );
    }
    let _ = writeln!(s, "# status={}", if outcome.passed() { "pass" } else { "fail" });
    s
}

fn real(x: f64) -> Cell {
    Cell::Real(x)
}

/// Configured `(f, v)` pair followed by `samples` seeded random band-limited pairs.
fn shear_samples(config: &ExperimentConfig) -> Vec<(TrigPoly, TrigPoly, TrigPoly)> {
    let mut out = vec![(config.f.clone(), config.v.clone(), config.v_fiber.clone())];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.samples {
        let f = TrigPoly::random(&mut rng, 2, config.fiber_period / 8.0, 0.0);
        let v = TrigPoly::random(&mut rng, 3, 0.5, 1.0);
        let w = TrigPoly::random(&mut rng, 2, 1.0, 0.5);
        out.push((f, v, w));
    }
    out
}

fn ito_verify(config: &ExperimentConfig) -> Result<Outcome> {
    let base = config.base_grid()?;
    let fiber = config.fiber_grid()?;
    let a = config.symbol()?;
    let method = config.semigroup_method();
    let mut table = Table::new(&["sample", "t", "residual_max", "residual_l2"]);
    let mut checks = Vec::new();
    for (idx, (f, v, w)) in shear_samples(config).iter().enumerate() {
        let shear = ShearMap::from_trig(f, base, fiber);
        let field = LiftedField::separable(base, fiber, v, w);
        let formula = ItoFormula::new(&a, &shear, method)?;
        let lifted = formula.lifted_generator();
        checks.push(Check::at_most(
            format!("sample {idx}: lifted generator symmetric"),
            lifted.hermitian_defect(),
            config.tolerance("hermitian") * (1.0 + lifted.frobenius_norm()),
        ));
        let ev = formula.lifted_eigenvalues()?;
        let lo = ev.first().copied().unwrap_or(0.0);
        let hi = ev.last().copied().unwrap_or(0.0).max(0.0);
        checks.push(Check::at_least(
            format!("sample {idx}: lifted generator positive"),
            lo,
            -config.tolerance("positivity") * hi,
        ));
        let limit = config.tolerance("ito_residual") * field.max_norm().max(1.0);
        for &t in &config.times {
            let r = formula.residual(&field, t)?;
            table
                .rows
                .push(vec![Cell::Int(idx as i64), real(t), real(r.max), real(r.l2)]);
            checks.push(Check::at_most(
                format!("sample {idx}: ito residual at t={t}"),
                r.max,
                limit,
            ));
        }
    }
    let notes = match method {
        Method::Eig => vec!["method=eig".into()],
        Method::Series { lambda, terms } => vec![format!("method=series lambda={lambda} K={terms}")],
    };
    Ok(Outcome {
        table,
        checks,
        notes,
    })
}

fn cutoff(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.base_grid()?;
    let a = config.symbol()?;
    let u = SpectralVector::point(grid.sample(|x| Complex64::new(config.v.eval(x, grid.period()), 0.0)));
    let rows = cutoff_convergence(&a, &grid, &config.lambdas, &u, &config.times)?;
    let mut header = vec![
        "lambda".to_string(),
        "l0_diff_l2".into(),
        "l0_diff_max".into(),
        "adjoint_diff_l2".into(),
        "adjoint_diff_max".into(),
    ];
    for t in &config.times {
        header.push(format!("semigroup_diff_l2_t={t:?}"));
        header.push(format!("semigroup_diff_max_t={t:?}"));
    }
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let mut checks = Vec::new();
    let xi_max = grid.max_abs_frequency();
    for row in &rows {
        let mut cells = vec![
            real(row.lambda),
            real(row.l0_diff.l2),
            real(row.l0_diff.max),
            real(row.adjoint_diff.l2),
            real(row.adjoint_diff.max),
        ];
        for (_, n) in &row.semigroup_diff {
            cells.push(real(n.l2));
            cells.push(real(n.max));
        }
        if row.lambda >= xi_max {
            let worst = row
                .semigroup_diff
                .iter()
                .map(|(_, n)| n.max)
                .chain([row.l0_diff.max, row.adjoint_diff.max])
                .fold(0.0, f64::max);
            checks.push(Check::at_most(
                format!("inactive cutoff lambda={} leaves operators unchanged", row.lambda),
                worst,
                config.tolerance("cutoff_zero"),
            ));
        }
        table.rows.push(cells);
    }
    Ok(Outcome {
        table,
        checks,
        notes: vec![format!("xi_max={xi_max}")],
    })
}

fn spectrum(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.base_grid()?;
    let l = compose_l(&config.symbol()?, &grid)?;
    let ev = l.hermitian_eigenvalues()?;
    let mut table = Table::new(&["index", "eigenvalue"]);
    for (i, v) in ev.iter().enumerate() {
        table.rows.push(vec![Cell::Int(i as i64), real(*v)]);
    }
    let hi = ev.last().copied().unwrap_or(0.0);
    let checks = vec![
        Check::at_most(
            "generator symmetric",
            l.hermitian_defect(),
            config.tolerance("hermitian") * (1.0 + l.frobenius_norm()),
        ),
        Check::at_least(
            "generator positive",
            ev.first().copied().unwrap_or(0.0),
            -config.tolerance("positivity") * hi.max(0.0),
        ),
    ];
    Ok(Outcome {
        table,
        checks,
        notes: Vec::new(),
    })
}

fn duhamel(config: &ExperimentConfig) -> Result<Outcome> {
    let base = config.base_grid()?;
    let fiber = config.fiber_grid()?;
    let a = config.symbol()?;
    let shear = ShearMap::from_trig(&config.f, base, fiber);
    let field = LiftedField::separable(base, fiber, &config.v, &config.v_fiber);
    let xi_max = base.max_abs_frequency();
    let mut table = Table::new(&["lambda", "t", "n_steps", "residual"]);
    let mut checks = Vec::new();
    for &lambda in &config.lambdas {
        let check = DuhamelCheck::new(&a, &shear, lambda)?;
        for &t in &config.times {
            let residuals = config
                .duhamel_steps
                .iter()
                .map(|&n| check.residual(&field, t, n))
                .collect::<Result<Vec<_>>>()?;
            for (&n, &r) in config.duhamel_steps.iter().zip(&residuals) {
                table
                    .rows
                    .push(vec![real(lambda), real(t), Cell::Int(n as i64), real(r)]);
            }
            if lambda >= xi_max {
                let worst = residuals.iter().copied().fold(0.0, f64::max);
                checks.push(Check::at_most(
                    format!("inactive cutoff lambda={lambda} t={t}: residual vanishes"),
                    worst,
                    config.tolerance("duhamel_zero"),
                ));
            } else if t > 0.0 {
                for (i, j) in doubling_pairs(&config.duhamel_steps) {
                    let ratio = residuals[i] / residuals[j];
                    checks.push(Check::at_least(
                        format!(
                            "lambda={lambda} t={t}: residual ratio {}->{} panels",
                            config.duhamel_steps[i], config.duhamel_steps[j]
                        ),
                        ratio,
                        config.tolerance("duhamel_ratio"),
                    ));
                }
            }
        }
    }
    Ok(Outcome {
        table,
        checks,
        notes: vec![format!("xi_max={xi_max}")],
    })
}

/// Index pairs `(i, j)` with `steps[j] == 2 * steps[i]`.
fn doubling_pairs(steps: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, a) in steps.iter().enumerate() {
        for (j, b) in steps.iter().enumerate() {
            if *b == 2 * a {
                out.push((i, j));
            }
        }
    }
    out
}

fn symbol_check(config: &ExperimentConfig) -> Result<Outcome> {
    let grid = config.base_grid()?;
    let a = config.symbol()?;
    let report = symbol_estimate_report(&a, &grid, config.estimate_k_max, config.estimate_kp_max)?;
    let mut table = Table::new(&["k", "k_prime", "constant"]);
    let mut checks = Vec::new();
    for (&(k, kp), &c) in &report.constants {
        table
            .rows
            .push(vec![Cell::Int(k as i64), Cell::Int(kp as i64), real(c)]);
        checks.push(Check {
            name: format!("C_{{{k},{kp}}} finite and non-negative"),
            value: c,
            limit: 0.0,
            passed: c.is_finite() && c >= 0.0,
        });
    }
    let ell = ellipticity_constant(&a, &grid, config.ellipticity_threshold)?;
    Ok(Outcome {
        table,
        checks,
        notes: vec![
            format!("sample: {}", report.sample),
            format!(
                "ellipticity constant C_M (M={}) = {ell:e}",
                config.ellipticity_threshold
            ),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut t = Table::new(&["i", "x"]);
        t.rows.push(vec![Cell::Int(3), Cell::Real(0.1)]);
        assert_eq!(t.to_csv(), "i,x\n3,1.0000000000000001e-1\n");
    }

    #[test]
    fn doubling_pairs_found() {
        assert_eq!(doubling_pairs(&[8, 16, 32]), vec![(0, 1), (1, 2)]);
        assert!(doubling_pairs(&[8, 12]).is_empty());
    }

    #[test]
    fn spectrum_of_derivative() {
        let c = parse_config("experiment=spectrum\nsymbol.name=derivative\ngrid.n=4").unwrap();
        let out = evaluate(&c).unwrap();
        let ev = out.table.column("eigenvalue").unwrap();
        let p2 = 4.0 * std::f64::consts::PI.powi(2);
        for (a, b) in ev.iter().zip([0.0, p2, p2, 4.0 * p2]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(out.passed());
    }

    #[test]
    fn symbol_check_reports_constants() {
        let c = parse_config("experiment=symbol_check\nsymbol.name=const\nsymbol.c=1\ngrid.n=8").unwrap();
        let out = evaluate(&c).unwrap();
        assert_eq!(out.table.rows.len(), 9);
        assert!(out.passed());
        assert!(out.notes.iter().any(|n| n.contains("ellipticity")));
    }

    #[test]
    fn unwritable_output_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let text = format!(
            "experiment=spectrum\nsymbol.name=derivative\ngrid.n=4\noutput.path={}/sub/out.csv",
            blocker.display()
        );
        let c = parse_config(&text).unwrap();
        assert!(matches!(run_experiment(&c, None), Err(Error::Io { .. })));
    }
}
