//! Command-line front end. Every run writes one CSV report (with a `#` header
//! carrying the command, a config hash and the column schema), and, when an
//! output path is given, a `.meta.json` sidecar with the non-deterministic run
//! metadata.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
//! 4 I/O failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::densities::{parse_density, CatalogDensity};
use crate::dirac::{
    classical_current, conserved_residual, continuity_defect, make_gamma, mass_term, solve_psi, solve_psi_discrete,
    solve_psibar, solve_psibar_discrete, DiracParams, SpinorField,
};
use crate::error::FracError;
use crate::field::{ComplexField, RealField};
use crate::fracops::{caputo_left, caputo_right, rl_left, rl_right, FractionalOrder};
use crate::grid::Grid1D;
use crate::noether::{apply_variation, noether_residual, noether_terms, SymmetryVariation};
use crate::special::gamma_fn;
use crate::variational::{
    action, el_residual, gateaux_derivative_with, solve_dirichlet, AdjointMode, FieldConfiguration, GateauxOptions,
    PerturbationField,
};

/// Smallest accepted number of grid intervals.
pub const MIN_N: usize = 16;
/// Largest accepted number of grid intervals.
pub const MAX_N: usize = 8192;
/// Thread-count fallback when `--threads` is absent.
pub const THREADS_ENV: &str = "FRACFIELD_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] FracError),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Lib(FracError::Config(_) | FracError::Structural(_)) => 2,
            CliError::Lib(FracError::Io(_)) | CliError::Io { .. } => 4,
            CliError::Lib(_) => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(name = "fracfield", version, about = "Fractional derivative, variational and Noether residual experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply one operator to a catalog function and compare with its closed form.
    Deriv(DerivArgs),
    /// Empirical convergence order of one operator under grid doubling.
    Converge(ConvergeArgs),
    /// Compare the Gateaux derivative of the action with the EL residual.
    ElCheck(ElArgs),
    /// Pointwise Noether residual of a catalog density.
    NoetherCheck(NoetherArgs),
    /// Solve the 0+1 dimensional fractional Dirac pair and check the conserved quantity.
    Dirac(DiracArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML file supplying any option below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Data CSV path; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads for node loops (falls back to FRACFIELD_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a matplotlib script next to the output.
    #[arg(long)]
    emit_plot_script: bool,
    /// Grid as `a,b,n` with n intervals.
    #[arg(long)]
    grid: Option<String>,
    /// Derivative order in (0, 1].
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Args)]
struct DerivArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    op: Option<OpArg>,
    /// `monomial:p`, `rmonomial:p` or `const:c`.
    #[arg(long = "fn")]
    function: Option<String>,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    op: Option<OpArg>,
    #[arg(long = "fn")]
    function: Option<String>,
    /// Number of grids; the coarsest is `--grid`, each next one doubles n.
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Debug, Args)]
struct ElArgs {
    #[command(flatten)]
    common: Common,
    /// Catalog density, e.g. `frac-kinetic:0.5`.
    #[arg(long)]
    density: Option<String>,
    /// Shape of the sampled configuration.
    #[arg(long = "fn")]
    function: Option<String>,
    /// Comma-separated finite-difference steps.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct NoetherArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    density: Option<String>,
    /// `phase` or `matrix:<path>` (TOML with `re` and optional `im` rows).
    #[arg(long)]
    symmetry: Option<String>,
    #[arg(long = "fn")]
    function: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Replace the sampled configuration by the discrete EL solution with its boundary values.
    #[arg(long)]
    on_shell: bool,
}

#[derive(Debug, Args)]
struct DiracArgs {
    #[command(flatten)]
    common: Common,
    /// Mass parameter (default 1).
    #[arg(long)]
    mass: Option<f64>,
    /// Initial spinor, e.g. `1,0` or `1+0.5i,-2i`.
    #[arg(long, allow_hyphen_values = true)]
    psi0: Option<String>,
    /// Terminal data for Psibar.
    #[arg(long, allow_hyphen_values = true)]
    psibar_t: Option<String>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Continuum,
    DiscreteExact,
}

impl From<ModeArg> for AdjointMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Continuum => AdjointMode::ContinuumFaithful,
            ModeArg::DiscreteExact => AdjointMode::DiscreteExact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpArg {
    CaputoLeft,
    CaputoRight,
    RlLeft,
    RlRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    /// Discrete L1 / GL sweeps consistent with `--mode`.
    Discrete,
    /// Mittag-Leffler closed forms.
    MittagLeffler,
}

/// Keys accepted in a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    command: Option<String>,
    alpha: Option<f64>,
    grid: Option<String>,
    mode: Option<ModeArg>,
    output: Option<PathBuf>,
    threads: Option<usize>,
    emit_plot_script: Option<bool>,
    op: Option<OpArg>,
    #[serde(rename = "fn")]
    function: Option<String>,
    levels: Option<usize>,
    density: Option<String>,
    symmetry: Option<String>,
    epsilon: Option<f64>,
    epsilons: Option<Vec<f64>>,
    on_shell: Option<bool>,
    mass: Option<f64>,
    psi0: Option<String>,
    psibar_t: Option<String>,
    solver: Option<SolverArg>,
}

/// Uniform grid `[a, b]` with `n` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl GridSpec {
    fn parse(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || usage(format!("grid must be `a,b,n`, got '{s}'"));
        let [a, b, n] = parts[..] else { return Err(bad()) };
        let (a, b) = (a.parse::<f64>().map_err(|_| bad())?, b.parse::<f64>().map_err(|_| bad())?);
        let n = n.parse::<usize>().map_err(|_| bad())?;
        let spec = Self { a, b, n };
        spec.check(n)?;
        Ok(spec)
    }

    fn check(&self, n: usize) -> CliResult<()> {
        if !(MIN_N..=MAX_N).contains(&n) {
            return Err(usage(format!("n must lie in [{MIN_N}, {MAX_N}], got {n}")));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.b > self.a) {
            return Err(usage(format!("grid needs finite a < b, got [{}, {}]", self.a, self.b)));
        }
        Ok(())
    }

    fn with_n(&self, n: usize) -> CliResult<Grid1D> {
        self.check(n)?;
        Ok(Grid1D::new(self.a, self.b, n)?)
    }

    fn build(&self) -> CliResult<Grid1D> {
        self.with_n(self.n)
    }
}

/// The resolved configuration of one run. Everything that can change the data
/// CSV is hashed; output location, thread count and plot emission are not.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub alpha: f64,
    pub grid: GridSpec,
    pub mode: ModeArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op: Option<OpArg>,
    #[serde(rename = "fn", skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub on_shell: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi0: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psibar_t: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverArg>,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
    #[serde(skip)]
    pub emit_plot_script: bool,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn load_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    toml::from_str(&text).map_err(|e| usage(format!("bad config file {}: {e}", path.display())))
}

/// Order from `--alpha` merged with the order embedded in a density name.
fn merge_density(density: Option<String>, alpha: Option<f64>) -> CliResult<(String, f64)> {
    let d = density.ok_or_else(|| usage("missing --density (one of frac-kinetic, complex-scalar, two-sided, dirac)"))?;
    let mut parts = d.splitn(2, ':');
    let family = parts.next().unwrap_or_default().to_string();
    match (parts.next(), alpha) {
        (None, Some(a)) => Ok((format!("{family}:{a}"), a)),
        (None, None) => Err(usage(format!("density '{d}' has no order; add one or pass --alpha"))),
        (Some(rest), a) => {
            let embedded = rest
                .split(':')
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| usage(format!("bad order in density '{d}'")))?;
            if a.is_some_and(|a| a != embedded) {
                return Err(usage(format!("--alpha conflicts with the order in density '{d}'")));
            }
            Ok((d, embedded))
        }
    }
}

fn resolve(cmd: Command) -> CliResult<ExperimentConfig> {
    let (name, common) = match &cmd {
        Command::Deriv(a) => ("deriv", &a.common),
        Command::Converge(a) => ("converge", &a.common),
        Command::ElCheck(a) => ("el-check", &a.common),
        Command::NoetherCheck(a) => ("noether-check", &a.common),
        Command::Dirac(a) => ("dirac", &a.common),
    };
    let file = match &common.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    if let Some(c) = &file.command {
        if c != name {
            return Err(usage(format!("config file is for '{c}' but the command is '{name}'")));
        }
    }
    let default_grid = match name {
        "converge" => "0,1,64",
        "dirac" => "0,1,512",
        "el-check" | "noether-check" => "0,1,128",
        _ => "0,1,256",
    };
    let grid_text = common.grid.clone().or(file.grid.clone()).unwrap_or_else(|| default_grid.into());
    let grid = GridSpec::parse(&grid_text)?;
    let alpha = common.alpha.or(file.alpha);
    let mut cfg = ExperimentConfig {
        command: name.into(),
        alpha: 0.0,
        grid,
        mode: common.mode.or(file.mode).unwrap_or(ModeArg::Continuum),
        op: None,
        function: None,
        levels: None,
        density_name: None,
        symmetry: None,
        epsilon: None,
        epsilons: None,
        on_shell: None,
        mass: None,
        psi0: None,
        psibar_t: None,
        solver: None,
        output_path: common.output.clone().or(file.output.clone()),
        emit_plot_script: common.emit_plot_script || file.emit_plot_script.unwrap_or(false),
        threads: common.threads.or(file.threads),
    };
    let need_alpha = || alpha.ok_or_else(|| usage("missing --alpha"));
    match cmd {
        Command::Deriv(a) => {
            cfg.alpha = need_alpha()?;
            cfg.op = Some(a.op.or(file.op).unwrap_or(OpArg::CaputoLeft));
            cfg.function = Some(a.function.or(file.function).unwrap_or_else(|| "monomial:1".into()));
        }
        Command::Converge(a) => {
            cfg.alpha = need_alpha()?;
            cfg.op = Some(a.op.or(file.op).unwrap_or(OpArg::CaputoLeft));
            cfg.function = Some(a.function.or(file.function).unwrap_or_else(|| "monomial:3".into()));
            let levels = a.levels.or(file.levels).unwrap_or(5);
            if levels < 2 {
                return Err(usage("--levels must be at least 2"));
            }
            let finest = u32::try_from(levels - 1).ok().and_then(|k| cfg.grid.n.checked_mul(1usize.checked_shl(k)?));
            match finest {
                Some(n) if n <= MAX_N => {}
                _ => return Err(usage(format!("finest grid exceeds n = {MAX_N}; lower --levels or n"))),
            }
            cfg.levels = Some(levels);
        }
        Command::ElCheck(a) => {
            let (d, al) = merge_density(a.density.or(file.density), alpha)?;
            cfg.density_name = Some(d);
            cfg.alpha = al;
            cfg.function = Some(a.function.or(file.function).unwrap_or_else(|| "monomial:1".into()));
            let eps = a.epsilons.or(file.epsilons).unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
            if eps.is_empty() {
                return Err(usage("--epsilons needs at least one value"));
            }
            cfg.epsilons = Some(eps);
        }
        Command::NoetherCheck(a) => {
            let (d, al) = merge_density(a.density.or(file.density), alpha)?;
            cfg.density_name = Some(d);
            cfg.alpha = al;
            cfg.function = Some(a.function.or(file.function).unwrap_or_else(|| "monomial:1".into()));
            cfg.symmetry = Some(a.symmetry.or(file.symmetry).unwrap_or_else(|| "phase".into()));
            cfg.epsilon = Some(a.epsilon.or(file.epsilon).unwrap_or(1.0));
            cfg.on_shell = Some(a.on_shell || file.on_shell.unwrap_or(false));
        }
        Command::Dirac(a) => {
            cfg.alpha = need_alpha()?;
            if cfg.grid.a != 0.0 {
                return Err(usage("dirac runs on [0, T]; the grid must start at 0"));
            }
            cfg.mass = Some(a.mass.or(file.mass).unwrap_or(1.0));
            cfg.psi0 = Some(a.psi0.or(file.psi0).unwrap_or_else(|| "1,0".into()));
            cfg.psibar_t = Some(a.psibar_t.or(file.psibar_t).unwrap_or_else(|| "1,0".into()));
            cfg.solver = Some(a.solver.or(file.solver).unwrap_or(SolverArg::Discrete));
        }
    }
    FractionalOrder::new(cfg.alpha).map_err(|e| usage(e.to_string()))?;
    if cfg.emit_plot_script && cfg.output_path.is_none() {
        return Err(usage("--emit-plot-script needs --output"));
    }
    Ok(cfg)
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| usage(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Catalog function used by `deriv`, `converge` and as a configuration shape.
#[derive(Debug, Clone, Copy, PartialEq)]
enum FnSpec {
    /// `(x - a)^p`
    Monomial(f64),
    /// `(b - x)^p`
    RMonomial(f64),
    Const(f64),
}

impl FnSpec {
    fn parse(s: &str) -> CliResult<Self> {
        let (name, arg) = s.split_once(':').ok_or_else(|| usage(format!("function '{s}' must look like monomial:2")))?;
        let v: f64 = arg.trim().parse().map_err(|_| usage(format!("bad parameter in function '{s}'")))?;
        if !v.is_finite() {
            return Err(usage(format!("bad parameter in function '{s}'")));
        }
        match name {
            "monomial" | "rmonomial" if v < 0.0 => Err(usage("monomial powers must be nonnegative")),
            "monomial" => Ok(Self::Monomial(v)),
            "rmonomial" => Ok(Self::RMonomial(v)),
            "const" => Ok(Self::Const(v)),
            _ => Err(usage(format!("unknown function '{name}'; known: monomial, rmonomial, const"))),
        }
    }

    fn eval(self, x: f64, g: &Grid1D) -> f64 {
        match self {
            Self::Monomial(p) => (x - g.a()).powf(p),
            Self::RMonomial(p) => (g.b() - x).powf(p),
            Self::Const(c) => c,
        }
    }

    /// Closed-form derivative at `x`, infinite where it blows up at an endpoint.
    fn oracle(self, op: OpArg, alpha: f64, x: f64, g: &Grid1D) -> CliResult<f64> {
        // Gamma(p + 1) / Gamma(p + 1 - alpha), zero at the pole p + 1 - alpha = 0.
        let coef = |p: f64| -> CliResult<f64> {
            if p + 1.0 - alpha == 0.0 {
                return Ok(0.0);
            }
            Ok(gamma_fn(p + 1.0)? / gamma_fn(p + 1.0 - alpha)?)
        };
        let (dl, dr) = (x - g.a(), g.b() - x);
        match (op, self) {
            (OpArg::CaputoLeft | OpArg::CaputoRight, Self::Const(_)) => Ok(0.0),
            (OpArg::CaputoLeft, Self::Monomial(p)) | (OpArg::CaputoRight, Self::RMonomial(p)) if p == 0.0 => Ok(0.0),
            (OpArg::CaputoLeft | OpArg::RlLeft, Self::Monomial(p)) => Ok(coef(p)? * dl.powf(p - alpha)),
            (OpArg::CaputoRight | OpArg::RlRight, Self::RMonomial(p)) => Ok(coef(p)? * dr.powf(p - alpha)),
            (OpArg::RlLeft, Self::Const(c)) => Ok(c * coef(0.0)? * dl.powf(-alpha)),
            (OpArg::RlRight, Self::Const(c)) => Ok(c * coef(0.0)? * dr.powf(-alpha)),
            _ => Err(usage(format!("no closed form for {op:?} applied to {self:?}; use a left operator with monomial or a right one with rmonomial"))),
        }
    }
}

fn apply_op(op: OpArg, f: &RealField, alpha: FractionalOrder) -> CliResult<RealField> {
    Ok(match op {
        OpArg::CaputoLeft => caputo_left(f, alpha)?,
        OpArg::CaputoRight => caputo_right(f, alpha)?,
        OpArg::RlLeft => rl_left(f, alpha)?,
        OpArg::RlRight => rl_right(f, alpha)?,
    })
}

/// Data of one finished command.
struct Report {
    columns: &'static str,
    rows: String,
    summary: Vec<(&'static str, String)>,
    /// Extra CSVs written next to the output: (suffix, columns, rows).
    siblings: Vec<(&'static str, &'static str, String)>,
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

struct DerivData {
    x: Vec<f64>,
    f: Vec<f64>,
    approx: Vec<f64>,
    oracle: Vec<f64>,
}

fn deriv_data(op: OpArg, fun: FnSpec, alpha: f64, g: Grid1D) -> CliResult<DerivData> {
    let field = RealField::from_fn(g, |x| fun.eval(x, &g))?;
    let approx = apply_op(op, &field, FractionalOrder::new(alpha)?)?;
    let x = g.nodes();
    let oracle = x.iter().map(|&x| fun.oracle(op, alpha, x, &g)).collect::<CliResult<Vec<_>>>()?;
    Ok(DerivData { x, f: field.into_values(), approx: approx.into_values(), oracle })
}

/// Largest error over interior nodes with a finite oracle value.
fn interior_error(d: &DerivData) -> f64 {
    let n = d.x.len();
    (1..n - 1)
        .filter(|&j| d.oracle[j].is_finite())
        .map(|j| (d.approx[j] - d.oracle[j]).abs())
        .fold(0.0, f64::max)
}

fn run_deriv(c: &ExperimentConfig) -> CliResult<Report> {
    let fun = FnSpec::parse(c.function.as_deref().unwrap_or_default())?;
    let d = deriv_data(c.op.expect("resolved"), fun, c.alpha, c.grid.build()?)?;
    let mut rows = String::new();
    for j in 0..d.x.len() {
        let err = (d.approx[j] - d.oracle[j]).abs();
        let _ = writeln!(rows, "{},{},{},{},{}", num(d.x[j]), num(d.f[j]), num(d.approx[j]), num(d.oracle[j]), num(err));
    }
    Ok(Report {
        columns: "x,f,approx,oracle,abs_err",
        rows,
        summary: vec![("interior_max_abs_err", num(interior_error(&d)))],
        siblings: vec![],
    })
}

fn run_converge(c: &ExperimentConfig) -> CliResult<Report> {
    let fun = FnSpec::parse(c.function.as_deref().unwrap_or_default())?;
    let mut rows = String::new();
    let mut prev: Option<f64> = None;
    let mut last_order = f64::NAN;
    for k in 0..c.levels.expect("resolved") {
        let n = c.grid.n << k;
        let g = c.grid.with_n(n)?;
        let err = interior_error(&deriv_data(c.op.expect("resolved"), fun, c.alpha, g)?);
        // Order of the pair (n/2, n): log2(err(n/2) / err(n)).
        let order = prev.map(|p| (p / err).log2());
        let _ = writeln!(rows, "{n},{},{},{}", num(g.h()), num(err), order.map(num).unwrap_or_default());
        if let Some(o) = order {
            last_order = o;
        }
        prev = Some(err);
    }
    Ok(Report {
        columns: "n,h,max_err,observed_order",
        rows,
        summary: vec![("final_observed_order", num(last_order))],
        siblings: vec![],
    })
}

fn density_of(c: &ExperimentConfig) -> CliResult<CatalogDensity> {
    Ok(parse_density(c.density_name.as_deref().unwrap_or_default())?)
}

/// Sampled configuration: the catalog function times a phase `e^{+-i(x-a)}` on
/// conjugate pairs, scaled down for later fields.
fn sample_configuration(d: &CatalogDensity, g: Grid1D, fun: FnSpec) -> CliResult<FieldConfiguration> {
    let nf = d.density.n_fields();
    let pairs = d.density.conjugate_pairs();
    let mut fields: Vec<Option<ComplexField>> = vec![None; nf];
    for (k, &(r, rs)) in pairs.iter().enumerate() {
        let w = 1.0 / (1.0 + k as f64);
        let z = |x: f64| Complex64::from_polar(w * fun.eval(x, &g), x - g.a());
        fields[r] = Some(ComplexField::from_fn(g, z)?);
        fields[rs] = Some(ComplexField::from_fn(g, |x| z(x).conj())?);
    }
    let fields = fields
        .into_iter()
        .enumerate()
        .map(|(r, f)| match f {
            Some(f) => Ok(f),
            None => Ok(ComplexField::from_fn(g, |x| Complex64::new(fun.eval(x, &g) / (1.0 + r as f64), 0.0))?),
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(FieldConfiguration::new(fields)?)
}

fn bubble(g: Grid1D, nf: usize) -> CliResult<PerturbationField> {
    let w = (g.b() - g.a()).powi(2) / 4.0;
    let fields = (0..nf)
        .map(|r| ComplexField::from_fn(g, |x| Complex64::new((x - g.a()) * (g.b() - x) / w * (1.0 + 0.25 * r as f64), 0.0)))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(PerturbationField::new(FieldConfiguration::new(fields)?)?)
}

fn run_el_check(c: &ExperimentConfig) -> CliResult<Report> {
    let d = density_of(c)?;
    let g = c.grid.build()?;
    let cfg = sample_configuration(&d, g, FnSpec::parse(c.function.as_deref().unwrap_or_default())?)?;
    let pert = bubble(g, cfg.n_fields())?;
    let l = d.density.as_ref();
    let inner = el_residual(l, &cfg, c.mode.into())?.weighted_dot(pert.eta())?;
    let mut rows = String::new();
    let mut worst = 0.0f64;
    for &eps in c.epsilons.as_deref().unwrap_or_default() {
        let gd = gateaux_derivative_with(l, &cfg, &pert, GateauxOptions { eps, richardson: true })?;
        let defect = (gd - inner).norm();
        worst = worst.max(defect);
        let _ = writeln!(rows, "{},{},{},{},{},{}", num(eps), num(gd.re), num(inner.re), num(defect), num(gd.im), num(inner.im));
    }
    let s = action(l, &cfg)?.norm();
    Ok(Report {
        columns: "epsilon,gateaux,inner_product,defect,gateaux_im,inner_product_im",
        rows,
        summary: vec![("max_defect", num(worst)), ("action_abs", num(s)), ("relative_defect", num(worst / (1.0 + s)))],
        siblings: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    re: Vec<Vec<f64>>,
    im: Option<Vec<Vec<f64>>>,
}

fn load_generator(path: &Path) -> CliResult<DMatrix<Complex64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let m: MatrixFile = toml::from_str(&text).map_err(|e| usage(format!("bad generator file {}: {e}", path.display())))?;
    let n = m.re.len();
    let im = m.im.unwrap_or_else(|| vec![vec![0.0; n]; n]);
    if n == 0 || im.len() != n || m.re.iter().chain(&im).any(|row| row.len() != n) {
        return Err(usage(format!("generator in {} must be a nonempty square matrix", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| Complex64::new(m.re[i][j], im[i][j])))
}

fn run_noether_check(c: &ExperimentConfig) -> CliResult<Report> {
    let d = density_of(c)?;
    let g = c.grid.build()?;
    let mode: AdjointMode = c.mode.into();
    let l = d.density.as_ref();
    let eps = c.epsilon.expect("resolved");
    let sym = c.symmetry.as_deref().unwrap_or_default();
    let v = match sym.split_once(':') {
        None if sym == "phase" => SymmetryVariation::Phase { epsilon: eps },
        Some(("matrix", path)) => SymmetryVariation::MatrixGenerator { lambda: load_generator(Path::new(path))?, epsilon: eps },
        _ => return Err(usage(format!("symmetry must be `phase` or `matrix:<path>`, got '{sym}'"))),
    };
    let mut cfg = sample_configuration(&d, g, FnSpec::parse(c.function.as_deref().unwrap_or_default())?)?;
    // Fail on an unusable symmetry before an expensive solve.
    apply_variation(&v, &cfg, &l.conjugate_pairs())?;
    if c.on_shell == Some(true) {
        cfg = solve_dirichlet(l, &cfg, mode)?;
    }
    let tau = el_residual(l, &cfg, mode)?.interior_max_abs();
    let r = noether_residual(l, &cfg, &v, mode)?;
    let scale = noether_terms(l, &cfg, &v, mode)?
        .iter()
        .map(|t| t.momentum_times_derivative.max_abs().max(t.outer_momentum_times_variation.max_abs()))
        .fold(0.0, f64::max);
    let imax = r.interior_max_abs();
    let mut rows = String::new();
    let x = g.nodes();
    for (xi, z) in x.iter().zip(r.values()) {
        let _ = writeln!(rows, "{},{},{}", num(*xi), num(z.re), num(z.im));
    }
    Ok(Report {
        columns: "x,residual_re,residual_im",
        rows,
        summary: vec![
            ("interior_max", num(imax)),
            ("scale", num(scale)),
            ("interior_max_rel", num(if scale > 0.0 { imax / scale } else { 0.0 })),
            ("el_residual_interior_max", num(tau)),
        ],
        siblings: vec![],
    })
}

fn parse_spinor(s: &str) -> CliResult<[Complex64; 2]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || usage(format!("spinor must be two complex numbers like `1,0` or `1+0.5i,-2i`, got '{s}'"));
    let [a, b] = parts[..] else { return Err(bad()) };
    Ok([Complex64::from_str(a).map_err(|_| bad())?, Complex64::from_str(b).map_err(|_| bad())?])
}

fn spinor_rows(s: &SpinorField) -> CliResult<String> {
    let mut buf = Vec::new();
    s.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is ascii"))
}

fn run_dirac(c: &ExperimentConfig) -> CliResult<Report> {
    let psi0 = parse_spinor(c.psi0.as_deref().unwrap_or_default())?;
    let psibar_t = parse_spinor(c.psibar_t.as_deref().unwrap_or_default())?;
    let p = DiracParams::new(c.mass.expect("resolved"), FractionalOrder::new(c.alpha)?, c.grid.b, c.grid.n, psi0, psibar_t)?;
    let gamma = make_gamma(1)?;
    let mode: AdjointMode = c.mode.into();
    let (psi, psibar) = match c.solver.expect("resolved") {
        SolverArg::Discrete => (solve_psi_discrete(&p, &gamma)?, solve_psibar_discrete(&p, &gamma, mode)?),
        SolverArg::MittagLeffler => (solve_psi(&p, &gamma)?, solve_psibar(&p, &gamma)?),
    };
    let res = conserved_residual(&psi, &psibar, &p, &gamma, mode)?;
    let j0 = classical_current(&psi, &psibar, &gamma)?.remove(0);
    let scale = mass_term(&psi, &psibar, &p)?.max_abs();
    let imax = res.interior_max_abs();
    let cont = continuity_defect(&j0)?;
    let h = p.grid().h();
    let nodes = p.grid().nodes();
    let mut rows = String::new();
    for ((t, r), q) in nodes.iter().zip(res.values()).zip(j0.values()) {
        let _ = writeln!(rows, "{},{},{},{},{}", num(*t), num(r.re), num(r.im), num(q.re), num(q.im));
    }
    Ok(Report {
        columns: "t,conserved_residual_re,conserved_residual_im,j0_re,j0_im",
        rows,
        summary: vec![
            ("interior_max_residual", num(imax)),
            ("mass_scale", num(scale)),
            ("relative_residual", num(if scale > 0.0 { imax / scale } else { 0.0 })),
            ("continuity_defect", num(cont)),
            ("continuity_ratio", num(cont / (h * j0.max_abs().max(f64::MIN_POSITIVE)))),
        ],
        siblings: vec![
            ("psi", psi.csv_columns(), spinor_rows(&psi)?),
            ("psibar", psibar.csv_columns(), spinor_rows(&psibar)?),
        ],
    })
}

fn header(command: &str, what: &str, hash: &str, columns: &str) -> String {
    format!("# fracfield {command}{what} config_hash={hash}\n# columns={columns}\n{columns}\n")
}

/// `dir/stem.<suffix>` for an output path `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "fracfield".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.into(), source })
}

fn plot_script(command: &str, data: &Path) -> String {
    let name = data.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let png = sibling(data, "png").file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let logy = if command == "converge" { "ax.set_xscale(\"log\")\nax.set_yscale(\"log\")\n" } else { "" };
    format!(
        r##"#!/usr/bin/env python3
# Plots the CSV written by `fracfield {command}`.
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

here = Path(__file__).resolve().parent
data = np.genfromtxt(here / "{name}", delimiter=",", comments="#", skip_header=2, names=True)
cols = data.dtype.names
fig, ax = plt.subplots()
for col in cols[1:]:
    ax.plot(data[cols[0]], np.abs(data[col]) if {abs} else data[col], label=col)
ax.set_xlabel(cols[0])
{logy}ax.legend()
fig.tight_layout()
fig.savefig(here / "{png}", dpi=150)
"##,
        abs = if command == "converge" { "True" } else { "False" },
    )
}

fn execute(cmd: Command) -> CliResult<()> {
    let started = Instant::now();
    let cfg = resolve(cmd)?;
    let threads = match cfg.threads {
        Some(t) => Some(t),
        None => threads_from_env()?,
    };
    if threads == Some(0) {
        return Err(usage("thread count must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| usage(format!("cannot start {threads:?} threads: {e}")))?;
    let report = pool.install(|| match cfg.command.as_str() {
        "deriv" => run_deriv(&cfg),
        "converge" => run_converge(&cfg),
        "el-check" => run_el_check(&cfg),
        "noether-check" => run_noether_check(&cfg),
        _ => run_dirac(&cfg),
    })?;

    let hash = cfg.hash();
    let mut text = header(&cfg.command, "", &hash, report.columns);
    text.push_str(&report.rows);
    for (k, v) in &report.summary {
        let _ = writeln!(text, "# {k}={v}");
    }
    let Some(out) = &cfg.output_path else {
        print!("{text}");
        return Ok(());
    };
    write_file(out, &text)?;
    let mut written = vec![out.display().to_string()];
    for (suffix, cols, rows) in &report.siblings {
        let path = sibling(out, &format!("{suffix}.csv"));
        write_file(&path, &(header(&cfg.command, &format!(" {suffix}"), &hash, cols) + rows))?;
        written.push(path.display().to_string());
    }
    if cfg.emit_plot_script {
        let path = sibling(out, "plot.py");
        write_file(&path, &plot_script(&cfg.command, out))?;
        written.push(path.display().to_string());
    }
    let meta = serde_json::json!({
        "command": cfg.command,
        "config": cfg,
        "config_hash": hash,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": pool.current_num_threads(),
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "finished_unix_seconds": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "files": written,
        "summary": report.summary.iter().map(|(k, v)| (k.to_string(), v.clone())).collect::<std::collections::BTreeMap<_, _>>(),
    });
    let meta_text = serde_json::to_string_pretty(&meta).expect("json") + "\n";
    write_file(&sibling(out, "meta.json"), &meta_text)?;
    for (k, v) in &report.summary {
        println!("{k}={v}");
    }
    Ok(())
}

fn subcommand_usage(args: &[OsString]) -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let name = args.get(1).and_then(|s| s.to_str()).unwrap_or_default().to_string();
    match cmd.find_subcommand_mut(&name) {
        Some(sub) => sub.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if code == 2 {
                eprintln!("{}", subcommand_usage(&args));
            }
            code
        }
    }
}
