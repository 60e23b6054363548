//! Dense symmetric matrices, Jacobi eigensolvers and the matrix trace
//! identity `Σ λₖ = Σ Aᵢᵢ`.
//!
//! Two solvers are provided. [`jacobi_eigen`] is the classical cyclic
//! two-sided method. [`one_sided_jacobi_eigen`] orthogonalizes the rows of
//! a positively shifted copy and touches memory only along rows, which is
//! what makes matrices with a few thousand rows tractable.
//! [`eigen_decompose`] picks between them by size.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::parse_f64;
use crate::sum::CompensatedSum;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;

/// Above this dimension [`eigen_decompose`] uses the one-sided solver.
pub const TWO_SIDED_MAX_DIM: usize = 128;

/// Gap below which two eigenvalues are treated as one repeated value when
/// ordering eigenvectors.
const TIE_TOL: f64 = 1e-12;

/// A real symmetric matrix stored densely in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
    asymmetry: f64,
}

impl SymMatrix {
    /// Builds `(A + Aᵀ)/2` from a row-major square array and records
    /// `max |Aᵢⱼ − Aⱼᵢ|`.
    pub fn new(n: usize, mut entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "{} entries do not form a {n}×{n} matrix",
                entries.len()
            )));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "matrix entry ({}, {}) is not finite",
                i / n,
                i % n
            )));
        }
        let mut asymmetry: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                asymmetry = asymmetry.max((a - b).abs());
                let m = 0.5 * (a + b);
                entries[i * n + j] = m;
                entries[j * n + i] = m;
            }
        }
        Ok(SymMatrix { n, entries, asymmetry })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix rows must all have the matrix dimension"));
        }
        Self::new(n, rows.concat())
    }

    /// Fills the upper triangle from `f(i, j)` and mirrors it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::new(n, entries)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, entries: vec![0.0; n * n], asymmetry: 0.0 }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            m.entries[i * n + i] = v;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Largest `|Aᵢⱼ − Aⱼᵢ|` of the input before symmetrization.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).collect::<CompensatedSum>().value()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Plain comma-separated rows, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for i in 0..self.n {
            w.write_record(self.row(i).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            rows.push(record.iter().map(parse_f64).collect::<Result<Vec<f64>>>()?);
        }
        Self::from_rows(&rows)
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    sweeps: usize,
}

impl EigenDecomposition {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `vectors()[k]` is the unit eigenvector belonging to `values()[k]`.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Number of Jacobi sweeps the solver ran.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn value_sum(&self) -> f64 {
        self.values.iter().copied().collect::<CompensatedSum>().value()
    }

    /// Writes `k,lambda` rows, `k` counted from 1.
    pub fn write_values_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "lambda"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([(k + 1).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the eigenvector matrix with eigenvector `k` in column `k`.
    pub fn write_vectors_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        let n = self.n();
        for i in 0..n {
            w.write_record(self.vectors.iter().map(|v| v[i].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Dot product over 32 interleaved partial sums with a fixed association
/// order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 32;
    let mut acc = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for i in 0..width {
            acc[i] += acc[i + width];
        }
    }
    let mut s = acc[0];
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// Rotation tangent that annihilates the coupling `apq` between two
/// diagonal values, picking the smaller of the two roots.
fn rotation_tangent(app: f64, aqq: f64, apq: f64) -> f64 {
    let theta = (aqq - app) / (2.0 * apq);
    if theta.abs() > 1e150 {
        return 0.5 / theta;
    }
    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
}

/// Cyclic two-sided Jacobi iteration.
///
/// Sweeps visit the pairs `(p, q)`, `p < q`, in row-major order and stop
/// once the off-diagonal Frobenius norm falls below `tol · ‖A‖_F`.
pub fn jacobi_eigen(a: &SymMatrix, tol: f64) -> Result<EigenDecomposition> {
    check_tol(tol)?;
    let n = a.n;
    let mut m = a.entries.clone();
    let mut vt = SymMatrix::identity(n).entries;
    let norm = a.frobenius_norm();
    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= tol * norm {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::numerical(format!(
                "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps (off-diagonal norm {off:e})"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let t = rotation_tangent(m[p * n + p], m[q * n + q], apq);
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                m[p * n + p] -= t * apq;
                m[q * n + q] += t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[r * n + p];
                    let arq = m[r * n + q];
                    let new_p = arp - s * (arq + tau * arp);
                    let new_q = arq + s * (arp - tau * arq);
                    m[r * n + p] = new_p;
                    m[p * n + r] = new_p;
                    m[r * n + q] = new_q;
                    m[q * n + r] = new_q;
                }
                let (lo, hi) = vt.split_at_mut(q * n);
                let vp = &mut lo[p * n..(p + 1) * n];
                let vq = &mut hi[..n];
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = u - s * (v + tau * u);
                    *y = v + s * (u - tau * v);
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    let vectors = vt.chunks(n.max(1)).take(n).map(|r| r.to_vec()).collect();
    Ok(finish(values, vectors, sweeps))
}

/// One-sided (Hestenes) Jacobi on `A + σI` with `σ` large enough to make the
/// shifted matrix positive definite.
///
/// Pairs of rows are rotated until all rows are mutually orthogonal; the
/// row norms are then the shifted eigenvalues and the normalized rows the
/// eigenvectors. Each sweep first orders the rows by decreasing norm, then
/// visits pairs block by block so that the rows in use stay in cache.
pub fn one_sided_jacobi_eigen(a: &SymMatrix, tol: f64) -> Result<EigenDecomposition> {
    check_tol(tol)?;
    let n = a.n;
    let radius = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if radius == 0.0 {
        let vectors = SymMatrix::identity(n).entries.chunks(n.max(1)).take(n).map(|r| r.to_vec()).collect();
        return Ok(finish(vec![0.0; n], vectors, 0));
    }
    let shift = 1.5 * radius;
    let mut m = a.entries.clone();
    for i in 0..n {
        m[i * n + i] += shift;
    }
    let pair_tol = (0.1 * tol).max(n as f64 * f64::EPSILON);
    const BLOCK: usize = 32;
    let blocks = n.div_ceil(BLOCK);
    let mut norms = vec![0.0; n];
    let mut sweeps = 0;
    loop {
        if sweeps == MAX_SWEEPS {
            return Err(Error::numerical(format!(
                "one-sided Jacobi iteration did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for (i, norm) in norms.iter_mut().enumerate() {
            let r = &m[i * n..(i + 1) * n];
            *norm = dot(r, r);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
        let mut sorted = Vec::with_capacity(n * n);
        for &i in &order {
            sorted.extend_from_slice(&m[i * n..(i + 1) * n]);
        }
        m = sorted;
        norms = order.iter().map(|&i| norms[i]).collect();
        let mut worst: f64 = 0.0;
        for bi in 0..blocks {
            for bj in bi..blocks {
                for p in bi * BLOCK..((bi + 1) * BLOCK).min(n) {
                    let q0 = if bi == bj { p + 1 } else { bj * BLOCK };
                    for q in q0..((bj + 1) * BLOCK).min(n) {
                        let cos = rotate_rows(&mut m, n, &mut norms, p, q, pair_tol);
                        worst = worst.max(cos);
                    }
                }
            }
        }
        if worst < pair_tol {
            break;
        }
    }
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for i in 0..n {
        let r = &m[i * n..(i + 1) * n];
        let len = dot(r, r).sqrt();
        values.push(len - shift);
        vectors.push(r.iter().map(|v| v / len).collect());
    }
    Ok(finish(values, vectors, sweeps))
}

/// Orthogonalizes rows `p < q`; returns their cosine before rotation.
fn rotate_rows(m: &mut [f64], n: usize, norms: &mut [f64], p: usize, q: usize, tol: f64) -> f64 {
    let (alpha, beta) = (norms[p], norms[q]);
    let (lo, hi) = m.split_at_mut(q * n);
    let rp = &mut lo[p * n..(p + 1) * n];
    let rq = &mut hi[..n];
    let gamma = dot(rp, rq);
    let cos = gamma.abs() / (alpha * beta).sqrt();
    if cos < tol {
        return cos;
    }
    let t = rotation_tangent(alpha, beta, gamma);
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = c * t;
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (u, v) = (*x, *y);
        *x = c * u - s * v;
        *y = s * u + c * v;
    }
    norms[p] = alpha - t * gamma;
    norms[q] = beta + t * gamma;
    cos
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Sorts eigenpairs and fixes each eigenvector's sign.
///
/// Values are sorted descending. Within a run of values closer than
/// `TIE_TOL`, eigenvectors whose first nonzero component sits at a higher
/// index come first. Every eigenvector is flipped so that its
/// largest-magnitude component is positive.
fn finish(values: Vec<f64>, mut vectors: Vec<Vec<f64>>, sweeps: usize) -> EigenDecomposition {
    for v in &mut vectors {
        let mut big = 0.0f64;
        for &x in v.iter() {
            if x.abs() > big.abs() {
                big = x;
            }
        }
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let lead = |k: usize| vectors[k].iter().position(|x| x.abs() > 1e-12).unwrap_or(0);
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() {
            let (a, b) = (values[order[end - 1]], values[order[end]]);
            if a - b > TIE_TOL * a.abs().max(1.0) {
                break;
            }
            end += 1;
        }
        order[start..end].sort_by(|&i, &j| lead(j).cmp(&lead(i)).then(values[j].total_cmp(&values[i])));
        start = end;
    }
    let sorted_values = order.iter().map(|&k| values[k]).collect();
    let mut slots: Vec<Option<Vec<f64>>> = vectors.into_iter().map(Some).collect();
    let sorted_vectors = order.iter().map(|&k| slots[k].take().unwrap_or_default()).collect();
    EigenDecomposition { values: sorted_values, vectors: sorted_vectors, sweeps }
}

/// Decomposes `a` with whichever Jacobi variant suits its size.
pub fn eigen_decompose(a: &SymMatrix, tol: f64) -> Result<EigenDecomposition> {
    if a.n <= TWO_SIDED_MAX_DIM {
        jacobi_eigen(a, tol)
    } else {
        one_sided_jacobi_eigen(a, tol)
    }
}

/// Both sides of `Σ λₖ = Σ Aᵢᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceIdentity {
    pub eig_sum: f64,
    pub diag_sum: f64,
    pub residual: f64,
}

pub fn matrix_trace_identity(a: &SymMatrix) -> Result<TraceIdentity> {
    let d = eigen_decompose(a, DEFAULT_TOL)?;
    Ok(trace_identity_from(&d, a))
}

pub(crate) fn trace_identity_from(d: &EigenDecomposition, a: &SymMatrix) -> TraceIdentity {
    let eig_sum = d.value_sum();
    let diag_sum = a.trace();
    TraceIdentity { eig_sum, diag_sum, residual: (eig_sum - diag_sum).abs() }
}

/// `Σₖ λₖ vₖ vₖᵀ`.
pub fn spectral_outer_reconstruction(d: &EigenDecomposition) -> SymMatrix {
    let n = d.n();
    let mut out = vec![0.0; n * n];
    for (lambda, v) in d.values.iter().zip(&d.vectors) {
        for i in 0..n {
            let li = lambda * v[i];
            for j in i..n {
                out[i * n + j] += li * v[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[i * n + j] = out[j * n + i];
        }
    }
    SymMatrix { n, entries: out, asymmetry: 0.0 }
}
