//! Symmetric kernels on `[0, 1]²`.
//!
//! Built-in kernels are the Dirichlet Green's function of `−u″ = f`, the
//! Gaussian heat kernel on the line, and its 1-periodic sum for the
//! circle. Arbitrary kernels enter as tables sampled on a [`Grid`].

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::quadrature::{parse_f64, Grid};
use crate::sum::CompensatedSum;

/// Target size of the omitted terms when the periodic sum is truncated
/// with the default number of images.
pub const DEFAULT_PERIODIC_TAIL: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    GreenDirichlet,
    HeatLine { t: f64 },
    HeatCircle { t: f64, l_max: usize },
    Tabulated(TabulatedKernel),
}

impl KernelSpec {
    pub fn heat_line(t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(KernelSpec::HeatLine { t })
    }

    /// Periodized heat kernel with the default image count for `t`.
    pub fn heat_circle(t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(KernelSpec::HeatCircle { t, l_max: default_image_count(t) })
    }

    pub fn heat_circle_with(t: f64, l_max: usize) -> Result<Self> {
        check_time(t)?;
        check_images(l_max)?;
        Ok(KernelSpec::HeatCircle { t, l_max })
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::GreenDirichlet => "green",
            KernelSpec::HeatLine { .. } => "heat-line",
            KernelSpec::HeatCircle { .. } => "heat-circle",
            KernelSpec::Tabulated(_) => "tabulated",
        }
    }

    /// Checks the parameters a hand-built variant may have gotten wrong.
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::GreenDirichlet | KernelSpec::Tabulated(_) => Ok(()),
            KernelSpec::HeatLine { t } => check_time(t),
            KernelSpec::HeatCircle { t, l_max } => {
                check_time(t)?;
                check_images(l_max)
            }
        }
    }

    /// Evaluates `k(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        self.validate()?;
        if let KernelSpec::GreenDirichlet = self {
            return eval_green(x, y);
        }
        Ok(self.value(x, y))
    }

    /// Evaluation without argument checks, for callers that validated the
    /// kernel once and only pass grid nodes.
    pub(crate) fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            KernelSpec::GreenDirichlet => green(x, y),
            KernelSpec::HeatLine { t } => heat(*t, x - y),
            KernelSpec::HeatCircle { t, l_max } => heat_periodic(*t, x - y, *l_max),
            KernelSpec::Tabulated(table) => table.eval_flagged(x, y).0,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(())
}

fn check_images(l_max: usize) -> Result<()> {
    if l_max < 1 {
        return Err(Error::invalid("periodic heat kernel needs l_max >= 1"));
    }
    Ok(())
}

fn green(x: f64, y: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    lo * (1.0 - hi)
}

fn heat(t: f64, d: f64) -> f64 {
    (-d * d / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

fn heat_periodic(t: f64, d: f64, l_max: usize) -> f64 {
    // Images are added in symmetric pairs from the far end inward, so that
    // swapping x and y (d → −d) reproduces the same rounding.
    let mut acc = 0.0;
    for l in (1..=l_max).rev() {
        let l = l as f64;
        acc += heat(t, d - l) + heat(t, d + l);
    }
    acc + heat(t, d)
}

/// The Dirichlet Green's function `x(1 − y)` for `x ≤ y`, extended by
/// symmetry.
pub fn eval_green(x: f64, y: f64) -> Result<f64> {
    for v in [x, y] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!(
                "Green's function is defined on [0, 1], got {v}"
            )));
        }
    }
    Ok(green(x, y))
}

/// `e^{−(x−y)²/4t} / √(4πt)`.
pub fn eval_heat(t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    Ok(heat(t, x - y))
}

/// `Σ_{|ℓ| ≤ l_max} K_t(x, y + ℓ)`.
pub fn eval_heat_periodic(t: f64, x: f64, y: f64, l_max: usize) -> Result<f64> {
    check_time(t)?;
    check_images(l_max)?;
    Ok(heat_periodic(t, x - y, l_max))
}

/// Number of images whose omission leaves a tail near
/// [`DEFAULT_PERIODIC_TAIL`]: `⌈1 + 8√t·√(−ln ε)⌉`.
pub fn default_image_count(t: f64) -> usize {
    let eps = DEFAULT_PERIODIC_TAIL;
    (1.0 + 8.0 * t.sqrt() * (-eps.ln()).sqrt()).ceil() as usize
}

/// Upper bound on the images dropped by truncating at `l_max`, valid
/// whenever `|x − y| ≤ 1`.
///
/// Every dropped image sits at distance at least `m ≥ l_max` from `x`, at
/// most two per `m`, so the remainder is below
/// `2 Σ_{m ≥ L} K_t(0, m) ≤ 2 K_t(0, L) (1 + 2t/L)`.
pub fn periodic_tail_bound(t: f64, l_max: usize) -> f64 {
    let l = l_max as f64;
    2.0 * heat(t, l) * (1.0 + 2.0 * t / l)
}

/// `(Kf)(xᵢ) = Σⱼ wⱼ k(xᵢ, xⱼ) fⱼ`.
pub fn apply_kernel(k: &KernelSpec, f: &[f64], g: &Grid) -> Result<Vec<f64>> {
    k.validate()?;
    g.check_len(f, "function")?;
    let nodes = g.nodes();
    let wf: Vec<f64> = g.weights().iter().zip(f).map(|(w, v)| w * v).collect();
    Ok(nodes
        .iter()
        .map(|&x| nodes.iter().zip(&wf).map(|(&y, v)| k.value(x, y) * v).sum())
        .collect())
}

/// `∫₀¹ k(x, x) dx` by the grid's rule.
pub fn diagonal_trace(k: &KernelSpec, g: &Grid) -> Result<f64> {
    k.validate()?;
    Ok(g.nodes()
        .iter()
        .zip(g.weights())
        .map(|(&x, w)| w * k.value(x, x))
        .collect::<CompensatedSum>()
        .value())
}

/// A kernel known only through its values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    grid: Grid,
    values: Vec<f64>,
}

impl TabulatedKernel {
    /// `values` is row-major `n × n`. It is symmetrized on the way in.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * n {
            return Err(Error::invalid(format!(
                "table has {} entries, expected {n}×{n}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "table entry ({}, {}) is not finite",
                i / n,
                i % n
            )));
        }
        let mut sym = values;
        for i in 0..n {
            for j in (i + 1)..n {
                let m = 0.5 * (sym[i * n + j] + sym[j * n + i]);
                sym[i * n + j] = m;
                sym[j * n + i] = m;
            }
        }
        Ok(TabulatedKernel { grid, values: sym })
    }

    /// Samples `k` on every node pair.
    pub fn from_fn(grid: Grid, k: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let nodes = grid.nodes().to_vec();
        let values = nodes
            .iter()
            .flat_map(|&x| nodes.iter().map(move |&y| (x, y)))
            .map(|(x, y)| k(x, y))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `(x, y)` and whether it was interpolated rather than read
    /// directly from the table. Off the node range the nearest edge value
    /// is used.
    pub fn eval_flagged(&self, x: f64, y: f64) -> (f64, bool) {
        let n = self.grid.len();
        let (ix, fx) = self.locate(x);
        let (iy, fy) = self.locate(y);
        let at = |i: usize, j: usize| self.values[i * n + j];
        if fx == 0.0 && fy == 0.0 {
            return (at(ix, iy), false);
        }
        let jx = (ix + 1).min(n - 1);
        let jy = (iy + 1).min(n - 1);
        let v = (1.0 - fx) * ((1.0 - fy) * at(ix, iy) + fy * at(ix, jy))
            + fx * ((1.0 - fy) * at(jx, iy) + fy * at(jx, jy));
        (v, true)
    }

    /// Cell index and fractional offset within it.
    fn locate(&self, x: f64) -> (usize, f64) {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let tol = 1e-14;
        if x <= nodes[0] + tol {
            return (0, 0.0);
        }
        if x >= nodes[n - 1] - tol {
            return (n - 1, 0.0);
        }
        let i = nodes.partition_point(|&v| v <= x) - 1;
        let frac = (x - nodes[i]) / (nodes[i + 1] - nodes[i]);
        if frac <= tol {
            (i, 0.0)
        } else if frac >= 1.0 - tol {
            (i + 1, 0.0)
        } else {
            (i, frac)
        }
    }

    /// CSV with a header row and a leading column of nodes.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let nodes = self.grid.nodes();
        let header: Vec<String> = std::iter::once(String::new())
            .chain(nodes.iter().map(|x| x.to_string()))
            .collect();
        w.write_record(&header)?;
        for (i, x) in nodes.iter().enumerate() {
            let row: Vec<String> = std::iter::once(x.to_string())
                .chain(self.values[i * nodes.len()..(i + 1) * nodes.len()].iter().map(|v| v.to_string()))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut rows = r.records();
        let header = rows
            .next()
            .ok_or_else(|| Error::invalid("kernel CSV is empty"))??;
        let nodes: Vec<f64> = header.iter().skip(1).map(parse_f64).collect::<Result<_>>()?;
        let n = nodes.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.enumerate() {
            let row = row?;
            if row.len() != n + 1 {
                return Err(Error::invalid(format!("kernel CSV row {i} has {} fields", row.len())));
            }
            let x = parse_f64(&row[0])?;
            if i >= n || (x - nodes[i]).abs() > 1e-12 {
                return Err(Error::invalid("kernel CSV row nodes do not match the header"));
            }
            for v in row.iter().skip(1) {
                values.push(parse_f64(v)?);
            }
        }
        let grid = Grid::from_nodes(&nodes)?;
        Self::new(grid, values)
    }
}
