//! Command-line front end.
//!
//! Every experiment is one subcommand. A run prints a single summary line to
//! stdout and, with `--out`, writes its table (`--format csv`) or report
//! (`--format json`) to a file. The whole configuration can also be read
//! from a file with `--json-config`, using the serialization of
//! [`RunConfig`].
//!
//! Exit status is 0 on success, 2 for invalid input and 1 when a numerical
//! check fails.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::billiard::{self, Table, Vec2};
use crate::error::{Error, Result};
use crate::heat::{self, HeatMethod};
use crate::kernels::{default_image_count, KernelSpec, TabulatedKernel};
use crate::mercer;
use crate::nystrom;
use crate::quadrature::{Grid, GridKind};
use crate::sturm::{self, sup_diff, SpectralBasis};
use crate::wavetrace;

#[derive(Debug, Parser)]
#[command(name = "tracelab", version, about = "Numerical checks of trace formulas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// Read the run configuration from a JSON file instead of flags.
    #[arg(long, global = true, value_name = "PATH")]
    pub json_config: Option<PathBuf>,

    /// Write the run's table or report here.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// A complete, serializable description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    Green,
    HeatLine,
    HeatCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridChoice {
    Trapezoid,
    Midpoint,
}

impl From<GridChoice> for GridKind {
    fn from(g: GridChoice) -> Self {
        match g {
            GridChoice::Trapezoid => GridKind::UniformTrapezoid,
            GridChoice::Midpoint => GridKind::UniformMidpoint,
        }
    }
}

/// What to do when a discretized kernel has clearly negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndefinitePolicy {
    Warn,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableChoice {
    Rectangle,
    Disc,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Sum of Nyström eigenvalues against the diagonal integral.
    #[command(allow_negative_numbers = true)]
    TraceCheck(TraceCheckArgs),
    /// Leading Nyström eigenpairs of a kernel.
    #[command(allow_negative_numbers = true)]
    Spectrum(SpectrumArgs),
    /// Truncated Mercer expansion of the Green's function on a lattice.
    #[command(allow_negative_numbers = true)]
    Mercer(MercerArgs),
    /// Basel sum from the Green's operator eigenvalues.
    #[command(allow_negative_numbers = true)]
    Basel(BaselArgs),
    /// Direct and spectral solutions of -u'' = f on seeded random data.
    #[command(allow_negative_numbers = true)]
    BvpCompare(BvpArgs),
    /// Theta function and its transformation residual.
    #[command(allow_negative_numbers = true)]
    Theta(ThetaArgs),
    /// Spectral and kernel heat evolution on the circle.
    #[command(allow_negative_numbers = true)]
    HeatCompare(HeatCompareArgs),
    /// Heat trace on the circle computed both ways.
    #[command(allow_negative_numbers = true)]
    HeatTrace(HeatTraceArgs),
    /// One billiard trajectory.
    #[command(allow_negative_numbers = true)]
    Billiard(BilliardArgs),
    /// Closed-orbit lengths of a billiard table.
    #[command(allow_negative_numbers = true)]
    LengthSpectrum(LengthSpectrumArgs),
    /// Smoothed wave trace of a rectangle and its peaks.
    #[command(allow_negative_numbers = true)]
    WaveTrace(WaveTraceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TraceCheck(_) => "trace-check",
            Command::Spectrum(_) => "spectrum",
            Command::Mercer(_) => "mercer",
            Command::Basel(_) => "basel",
            Command::BvpCompare(_) => "bvp-compare",
            Command::Theta(_) => "theta",
            Command::HeatCompare(_) => "heat-compare",
            Command::HeatTrace(_) => "heat-trace",
            Command::Billiard(_) => "billiard",
            Command::LengthSpectrum(_) => "length-spectrum",
            Command::WaveTrace(_) => "wave-trace",
        }
    }
}

/// Values of an argument struct when no flags are given.
fn clap_defaults<T: Args + FromArgMatches>() -> T {
    let cmd = T::augment_args(clap::Command::new("defaults").no_binary_name(true));
    let matches = cmd.get_matches_from(std::iter::empty::<OsString>());
    T::from_arg_matches(&matches).expect("every argument has a default")
}

macro_rules! clap_default {
    ($($t:ty),*) => {
        $(impl Default for $t {
            fn default() -> Self {
                clap_defaults()
            }
        })*
    };
}

clap_default!(
    KernelArgs,
    TraceCheckArgs,
    SpectrumArgs,
    MercerArgs,
    BaselArgs,
    BvpArgs,
    ThetaArgs,
    HeatCompareArgs,
    HeatTraceArgs,
    TableArgs,
    BilliardArgs,
    LengthSpectrumArgs,
    WaveTraceArgs
);

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelChoice::Green)]
    pub kernel: KernelChoice,
    /// Tabulated kernel CSV; its nodes replace `--n` and `--grid`.
    #[arg(long, value_name = "PATH")]
    pub kernel_file: Option<PathBuf>,
    #[arg(long, default_value_t = 401)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = GridChoice::Trapezoid)]
    pub grid: GridChoice,
    /// Time parameter of the heat kernels.
    #[arg(long, default_value_t = 0.1)]
    pub t: f64,
    /// Image count of the periodized heat kernel.
    #[arg(long)]
    pub l_max: Option<usize>,
}

impl KernelArgs {
    fn validate(&self) -> Result<()> {
        if self.kernel_file.is_none() {
            at_least("--n", self.n, 2)?;
        }
        if self.kernel != KernelChoice::Green {
            positive("--t", self.t)?;
        }
        if let Some(l) = self.l_max {
            at_least("--l-max", l, 1)?;
        }
        Ok(())
    }

    fn build(&self) -> Result<(KernelSpec, Grid)> {
        if let Some(path) = &self.kernel_file {
            let k = TabulatedKernel::read_csv(File::open(path)?)?;
            let g = k.grid().clone();
            return Ok((KernelSpec::Tabulated(k), g));
        }
        let g = Grid::new(self.grid.into(), self.n)?;
        let k = match self.kernel {
            KernelChoice::Green => KernelSpec::GreenDirichlet,
            KernelChoice::HeatLine => KernelSpec::heat_line(self.t)?,
            KernelChoice::HeatCircle => match self.l_max {
                Some(l) => KernelSpec::heat_circle_with(self.t, l)?,
                None => KernelSpec::heat_circle(self.t)?,
            },
        };
        Ok((k, g))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    /// Number of eigenpairs to report.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Eigenvalues below `-tol * max |λ|` make the kernel indefinite.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = IndefinitePolicy::Warn)]
    pub indefinite: IndefinitePolicy,
    /// Also write sampled eigenfunctions (`node,f1,…`) here.
    #[arg(long, value_name = "PATH")]
    pub eigenfunctions_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct MercerArgs {
    #[arg(long, default_value_t = 100)]
    pub kmax: usize,
    /// Lattice points per side.
    #[arg(long, default_value_t = 101)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub kmax: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BvpArgs {
    #[arg(long, default_value_t = 1001)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub kmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random modes in the right-hand side.
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ThetaArgs {
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatCompareArgs {
    /// Midpoint grid size.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub t: f64,
    /// Spectral cutoff; defaults to every mode the grid resolves.
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Image count; defaults to the count needed for double precision.
    #[arg(long)]
    pub l_max: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Highest frequency in the random initial data.
    #[arg(long, default_value_t = 8)]
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatTraceArgs {
    #[arg(long, num_args = 1.., default_values_t = [0.05, 0.1, 0.5])]
    pub t: Vec<f64>,
    /// Midpoint grid size for the kernel side.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct TableArgs {
    #[arg(long, value_enum, default_value_t = TableChoice::Rectangle)]
    pub table: TableChoice,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

impl TableArgs {
    fn build(&self) -> Result<Table> {
        match self.table {
            TableChoice::Rectangle => Table::rectangle(self.a, self.b),
            TableChoice::Disc => Table::disc(self.radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BilliardArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value_t = 0.3)]
    pub x: f64,
    #[arg(long, default_value_t = 0.4)]
    pub y: f64,
    /// Initial heading in radians from the x axis.
    #[arg(long, default_value_t = 0.7)]
    pub angle: f64,
    /// Length budget of the trajectory.
    #[arg(long, default_value_t = 20.0)]
    pub l_max: f64,
    /// Closing tolerance on position and direction.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct LengthSpectrumArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value_t = 6.0)]
    pub l_max: f64,
    /// Largest reflection count of disc polygons.
    #[arg(long, default_value_t = billiard::DEFAULT_MAX_BOUNCES)]
    pub max_bounces: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveTraceArgs {
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    /// Mode indices n, m run up to this value.
    #[arg(long, default_value_t = 80)]
    pub modes: u32,
    /// Use every eigenvalue up to this cutoff instead of a mode box.
    #[arg(long)]
    pub mu_max: Option<f64>,
    #[arg(long, default_value_t = 1.5)]
    pub t_min: f64,
    #[arg(long, default_value_t = 6.2)]
    pub t_max: f64,
    #[arg(long, default_value_t = 0.002)]
    pub step: f64,
    /// Half-width in samples of the local-maximum test.
    #[arg(long, default_value_t = 25)]
    pub window: usize,
    /// Largest peak-to-length distance counted as a match.
    #[arg(long, default_value_t = 0.1)]
    pub tol: f64,
}

fn positive(flag: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{flag} must be positive, got {v}")));
    }
    Ok(())
}

fn finite(flag: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(format!("{flag} must be finite, got {v}")));
    }
    Ok(())
}

fn at_least(flag: &str, v: usize, min: usize) -> Result<()> {
    if v < min {
        return Err(Error::invalid(format!("{flag} must be at least {min}, got {v}")));
    }
    Ok(())
}

impl TableArgs {
    fn validate(&self) -> Result<()> {
        match self.table {
            TableChoice::Rectangle => {
                positive("--a", self.a)?;
                positive("--b", self.b)
            }
            TableChoice::Disc => positive("--radius", self.radius),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    /// Checks every parameter against the preconditions of the experiment.
    pub fn validate(&self) -> Result<()> {
        match &self.command {
            Command::TraceCheck(a) => a.kernel.validate(),
            Command::Spectrum(a) => {
                a.kernel.validate()?;
                at_least("--count", a.count, 1)?;
                if a.kernel.kernel_file.is_none() && a.count > a.kernel.n {
                    return Err(Error::invalid(format!("--count {} exceeds --n {}", a.count, a.kernel.n)));
                }
                positive("--tol", a.tol)
            }
            Command::Mercer(a) => {
                at_least("--kmax", a.kmax, 1)?;
                at_least("--n", a.n, 2)
            }
            Command::Basel(a) => at_least("--kmax", a.kmax, 1),
            Command::BvpCompare(a) => {
                at_least("--n", a.n, 5)?;
                at_least("--kmax", a.kmax, 1)?;
                at_least("--modes", a.modes, 1)
            }
            Command::Theta(a) => positive("--s", a.s),
            Command::HeatCompare(a) => {
                at_least("--n", a.n, 3)?;
                positive("--t", a.t)?;
                if let Some(k) = a.kmax {
                    if 2 * k >= a.n {
                        return Err(Error::invalid(format!("--kmax {k} needs --n > {}", 2 * k)));
                    }
                }
                if let Some(l) = a.l_max {
                    at_least("--l-max", l, 1)?;
                }
                if 2 * a.modes >= a.n {
                    return Err(Error::invalid(format!("--modes {} needs --n > {}", a.modes, 2 * a.modes)));
                }
                Ok(())
            }
            Command::HeatTrace(a) => {
                if a.t.is_empty() {
                    return Err(Error::invalid("--t needs at least one value"));
                }
                a.t.iter().try_for_each(|&t| positive("--t", t))?;
                at_least("--n", a.n, 1)
            }
            Command::Billiard(a) => {
                a.table.validate()?;
                finite("--x", a.x)?;
                finite("--y", a.y)?;
                finite("--angle", a.angle)?;
                positive("--l-max", a.l_max)?;
                positive("--tol", a.tol)
            }
            Command::LengthSpectrum(a) => {
                a.table.validate()?;
                positive("--l-max", a.l_max)?;
                at_least("--max-bounces", a.max_bounces, 2)
            }
            Command::WaveTrace(a) => {
                positive("--a", a.a)?;
                positive("--b", a.b)?;
                positive("--sigma", a.sigma)?;
                at_least("--modes", a.modes as usize, 1)?;
                if let Some(mu) = a.mu_max {
                    positive("--mu-max", mu)?;
                }
                finite("--t-min", a.t_min)?;
                finite("--t-max", a.t_max)?;
                if a.t_max < a.t_min {
                    return Err(Error::invalid("--t-max must not be below --t-min"));
                }
                positive("--step", a.step)?;
                at_least("--window", a.window, 1)?;
                positive("--tol", a.tol)
            }
        }
    }
}

/// Writes to `--out` if one was given.
fn emit(out: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if let Some(path) = out {
        let mut w = BufWriter::new(File::create(path)?);
        write(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn write_json(w: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

fn write_rows(w: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    Ok(())
}

fn columns(header: &[&str], nodes: &[f64], cols: &[&[f64]]) -> (Vec<String>, Vec<Vec<String>>) {
    let rows = (0..nodes.len())
        .map(|i| std::iter::once(nodes[i]).chain(cols.iter().map(|c| c[i])).map(|v| v.to_string()).collect())
        .collect();
    (header.iter().map(|s| s.to_string()).collect(), rows)
}

/// Runs one experiment and returns its summary line.
pub fn run(config: &RunConfig) -> Result<String> {
    config.validate()?;
    let (out, format) = (&config.out, config.format);
    match &config.command {
        Command::TraceCheck(a) => {
            let (k, g) = a.kernel.build()?;
            let r = nystrom::trace_formula_check(&k, &g)?;
            emit(out, |w| match format {
                Format::Json => write_json(w, &json!({"kernel": k.name(), "n": g.len(), "check": r})),
                Format::Csv => write_rows(
                    w,
                    &["kernel", "n", "eig_sum", "diag_integral", "residual"],
                    &[vec![
                        k.name().to_string(),
                        g.len().to_string(),
                        r.eig_sum.to_string(),
                        r.diag_integral.to_string(),
                        r.residual.to_string(),
                    ]],
                ),
            })?;
            Ok(format!(
                "trace-check kernel={} n={} eig_sum={} diag_integral={} residual={:.3e}",
                k.name(),
                g.len(),
                r.eig_sum,
                r.diag_integral,
                r.residual
            ))
        }
        Command::Spectrum(a) => {
            let (k, g) = a.kernel.build()?;
            let s = nystrom::operator_spectrum(&k, &g, a.count)?;
            let scale = s.eigenvalues().first().map_or(0.0, |l| l.abs());
            let indefinite = s.min_eigenvalue() < -a.tol * scale;
            if indefinite {
                let msg = format!("kernel {} has eigenvalue {} < 0", k.name(), s.min_eigenvalue());
                match a.indefinite {
                    IndefinitePolicy::Warn => eprintln!("warning: {msg}"),
                    IndefinitePolicy::Fail => return Err(Error::numerical(msg)),
                }
            }
            let basis = SpectralBasis::Dirichlet;
            let is_green = matches!(k, KernelSpec::GreenDirichlet);
            let analytic = |i: usize| basis.lambda(i as i64);
            let analytic_ref: Option<&dyn Fn(usize) -> f64> = if is_green { Some(&analytic) } else { None };
            emit(out, |w| match format {
                Format::Json => {
                    let exact: Option<Vec<f64>> = is_green.then(|| (1..=a.count).map(analytic).collect());
                    write_json(
                        w,
                        &json!({
                            "kernel": k.name(),
                            "n": g.len(),
                            "eigenvalues": s.eigenvalues(),
                            "analytic": exact,
                            "min_eigenvalue": s.min_eigenvalue(),
                        }),
                    )
                }
                Format::Csv => s.write_values_csv(w, analytic_ref),
            })?;
            if let Some(path) = &a.eigenfunctions_out {
                emit(&Some(path.clone()), |w| s.write_eigenfunctions_csv(w))?;
            }
            let mut line = format!(
                "spectrum kernel={} n={} lambda_1={} min_eigenvalue={:.3e}",
                k.name(),
                g.len(),
                s.eigenvalues()[0],
                s.min_eigenvalue()
            );
            if is_green {
                let worst = s
                    .eigenvalues()
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l - analytic(i + 1)).abs() / analytic(i + 1))
                    .fold(0.0, f64::max);
                line.push_str(&format!(" max_rel_error={worst:.3e}"));
            }
            Ok(line)
        }
        Command::Mercer(a) => {
            let r = mercer::mercer_reconstruct(a.kmax, a.n)?;
            emit(out, |w| match format {
                Format::Json => write_json(w, &r),
                Format::Csv => write_rows(
                    w,
                    &["k_max", "sup_error", "tail_bound", "partial_basel", "basel_target"],
                    &[vec![
                        r.k_max.to_string(),
                        r.sup_error.to_string(),
                        r.tail_bound.to_string(),
                        r.partial_basel.to_string(),
                        r.basel_target.to_string(),
                    ]],
                ),
            })?;
            Ok(format!(
                "mercer k_max={} sup_error={:.3e} tail_bound={:.3e} within_bound={}",
                r.k_max,
                r.sup_error,
                r.tail_bound,
                r.sup_error <= r.tail_bound
            ))
        }
        Command::Basel(a) => {
            let r = mercer::basel_via_trace(a.kmax)?;
            emit(out, |w| match format {
                Format::Json => write_json(w, &r),
                Format::Csv => write_rows(
                    w,
                    &["k_max", "lhs", "rhs", "gap"],
                    &[vec![r.k_max.to_string(), r.lhs.to_string(), r.rhs.to_string(), r.gap.to_string()]],
                ),
            })?;
            Ok(format!("basel k_max={} sum={} target={} gap={:.6e}", r.k_max, r.lhs, r.rhs, r.gap))
        }
        Command::BvpCompare(a) => {
            let g = Grid::trapezoid(a.n)?;
            let f = sturm::random_smooth_samples(&g, a.seed, a.modes);
            let direct = sturm::solve_direct(&f, &g)?;
            let spectral = sturm::solve_spectral(&f, &g, a.kmax)?;
            let diff = sup_diff(&direct, &spectral);
            let residual = sturm::residual_check(&direct, &f, &g)?;
            emit(out, |w| match format {
                Format::Json => write_json(
                    w,
                    &json!({"n": a.n, "k_max": a.kmax, "seed": a.seed, "sup_diff": diff, "direct_residual": residual}),
                ),
                Format::Csv => {
                    let (h, rows) =
                        columns(&["node", "f", "u_direct", "u_spectral"], g.nodes(), &[&f, &direct, &spectral]);
                    let h: Vec<&str> = h.iter().map(String::as_str).collect();
                    write_rows(w, &h, &rows)
                }
            })?;
            Ok(format!(
                "bvp-compare n={} k_max={} seed={} sup_diff={:.3e} direct_residual={:.3e}",
                a.n, a.kmax, a.seed, diff, residual
            ))
        }
        Command::Theta(a) => {
            let th = heat::theta(a.s)?;
            let inv = heat::theta(1.0 / a.s)?;
            let residual = heat::theta_transform_residual(a.s)?;
            emit(out, |w| match format {
                Format::Json => write_json(w, &json!({"theta": th, "theta_inverse": inv, "residual": residual})),
                Format::Csv => write_rows(
                    w,
                    &["s", "theta", "theta_inverse", "residual"],
                    &[vec![a.s.to_string(), th.value.to_string(), inv.value.to_string(), residual.to_string()]],
                ),
            })?;
            Ok(format!("theta s={} value={} inverse={} residual={:.3e}", a.s, th.value, inv.value, residual))
        }
        Command::HeatCompare(a) => {
            let g = Grid::midpoint(a.n)?;
            let f = heat::random_trig_samples(&g, a.seed, a.modes);
            let spectral_method = match a.kmax {
                Some(k_max) => HeatMethod::Spectral { k_max },
                None => HeatMethod::full_spectral(&g),
            };
            let l_max = a.l_max.unwrap_or_else(|| default_image_count(a.t));
            let by_modes = heat::heat_evolve(&f, &g, a.t, spectral_method)?;
            let by_kernel = heat::heat_evolve(&f, &g, a.t, HeatMethod::Kernel { l_max })?;
            let diff = sup_diff(&by_modes, &by_kernel);
            emit(out, |w| match format {
                Format::Json => write_json(
                    w,
                    &json!({"n": a.n, "t": a.t, "seed": a.seed, "spectral": spectral_method, "l_max": l_max, "sup_diff": diff}),
                ),
                Format::Csv => {
                    let (h, rows) =
                        columns(&["node", "f", "u_spectral", "u_kernel"], g.nodes(), &[&f, &by_modes, &by_kernel]);
                    let h: Vec<&str> = h.iter().map(String::as_str).collect();
                    write_rows(w, &h, &rows)
                }
            })?;
            Ok(format!("heat-compare n={} t={} seed={} l_max={} sup_diff={:.3e}", a.n, a.t, a.seed, l_max, diff))
        }
        Command::HeatTrace(a) => {
            let g = Grid::midpoint(a.n)?;
            let rows = a.t.iter().map(|&t| heat::heat_trace_check(t, &g)).collect::<Result<Vec<_>>>()?;
            emit(out, |w| match format {
                Format::Json => write_json(w, &rows),
                Format::Csv => heat::write_heat_trace_csv(w, &rows),
            })?;
            let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
            Ok(format!("heat-trace n={} times={} max_residual={:.3e}", a.n, rows.len(), worst))
        }
        Command::Billiard(a) => {
            let table = a.table.build()?;
            let start = Vec2::new(a.x, a.y);
            let dir = Vec2::new(a.angle.cos(), a.angle.sin());
            let traj = billiard::simulate(&table, start, dir, a.l_max)?;
            let closed = billiard::is_closed(&traj, start, dir, a.tol);
            let defect = billiard::reflection_defect(&table, &traj);
            emit(out, |w| match format {
                Format::Json => write_json(
                    w,
                    &json!({"table": table, "trajectory": traj, "closed": closed, "reflection_defect": defect}),
                ),
                Format::Csv => traj.write_csv(w),
            })?;
            let closed = match closed {
                Some(c) => format!("closed_length={} closed_bounces={}", c.length, c.bounces),
                None => "closed=no".to_string(),
            };
            Ok(format!(
                "billiard bounces={} length={} terminated_by={:?} reflection_defect={:.3e} {closed}",
                traj.bounces(),
                traj.total_length,
                traj.terminated_by,
                defect
            ))
        }
        Command::LengthSpectrum(a) => {
            let table = a.table.build()?;
            let s = billiard::length_spectrum_with(&table, a.l_max, a.max_bounces)?;
            emit(out, |w| match format {
                Format::Json => write_json(w, &s),
                Format::Csv => s.write_csv(w),
            })?;
            let first = s.entries.first().map_or("none".to_string(), |e| e.length.to_string());
            Ok(format!("length-spectrum l_max={} lengths={} shortest={first}", a.l_max, s.len()))
        }
        Command::WaveTrace(a) => {
            let spectrum = match a.mu_max {
                Some(mu) => wavetrace::rectangle_spectrum(a.a, a.b, mu)?,
                None => wavetrace::from_mode_box(a.a, a.b, a.modes, a.modes)?,
            };
            let t = wavetrace::time_grid(a.t_min, a.t_max, a.step)?;
            let signal = wavetrace::smoothed_wave_trace(&spectrum, &t, a.sigma)?;
            let peaks = wavetrace::detect_peaks(&signal, a.window)?;
            let lengths = billiard::length_spectrum(&Table::rectangle(a.a, a.b)?, a.t_max)?.within(a.t_min, a.t_max);
            let cmp = wavetrace::compare_lengths(&peaks, &lengths, a.tol)?;
            emit(out, |w| match format {
                Format::Json => write_json(w, &json!({"sigma": a.sigma, "peaks": peaks, "comparison": cmp})),
                Format::Csv => signal.write_csv(w),
            })?;
            Ok(format!(
                "wave-trace a={} b={} sigma={} eigenvalues={} peaks={} matched={} missed={} spurious={}",
                a.a,
                a.b,
                a.sigma,
                spectrum.len(),
                peaks.len(),
                cmp.matched.len(),
                cmp.missed.len(),
                cmp.spurious.len()
            ))
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericalFailure(_) => 1,
        _ => 2,
    }
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    match (cli.command, cli.json_config) {
        (Some(_), Some(_)) => Err(Error::invalid("give either a subcommand or --json-config, not both")),
        (None, None) => Err(Error::invalid("no subcommand given; see --help")),
        (None, Some(path)) => RunConfig::from_json_file(&path),
        (Some(command), None) => Ok(RunConfig { command, out: cli.out, format: cli.format }),
    }
}

/// Parses `args`, runs the experiment and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match resolve(cli).and_then(|c| run(&c)) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
