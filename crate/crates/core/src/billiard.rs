//! Specular billiards in rectangles and discs.
//!
//! Trajectories are computed event by event: each segment runs from one
//! boundary hit to the next, found in closed form, so no error accumulates
//! from time stepping. The rectangle occupies `[0, a] × [0, b]`; the disc is
//! centred at the origin.

use std::fmt;
use std::io::Write;
use std::ops::{Add, Mul, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

/// Hits closer than this to a rectangle corner end the trajectory.
pub const CORNER_TOL: f64 = 1e-12;

/// Lengths closer than this are reported as one spectrum entry.
pub const LENGTH_MERGE_TOL: f64 = 1e-9;

/// Default cap on the bounce count of disc polygons in a length spectrum.
pub const DEFAULT_MAX_BOUNCES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        self * (1.0 / self.norm())
    }

    /// Rotation by a quarter turn counterclockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Table {
    Rectangle { a: f64, b: f64 },
    Disc { radius: f64 },
}

struct Hit {
    distance: f64,
    point: Vec2,
    corner: bool,
}

impl Table {
    pub fn rectangle(a: f64, b: f64) -> Result<Self> {
        check_dimension(a, "side a")?;
        check_dimension(b, "side b")?;
        Ok(Table::Rectangle { a, b })
    }

    pub fn disc(radius: f64) -> Result<Self> {
        check_dimension(radius, "radius")?;
        Ok(Table::Disc { radius })
    }

    pub fn unit_square() -> Self {
        Table::Rectangle { a: 1.0, b: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Table::Rectangle { a, b } => {
                check_dimension(a, "side a")?;
                check_dimension(b, "side b")
            }
            Table::Disc { radius } => check_dimension(radius, "radius"),
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn normal_at(&self, p: Vec2) -> Vec2 {
        match *self {
            Table::Rectangle { a, b } => {
                let d = [p.x, a - p.x, p.y, b - p.y];
                let normals = [
                    Vec2::new(-1.0, 0.0),
                    Vec2::new(1.0, 0.0),
                    Vec2::new(0.0, -1.0),
                    Vec2::new(0.0, 1.0),
                ];
                let i = (0..4).min_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs())).unwrap_or(0);
                normals[i]
            }
            Table::Disc { .. } => p.normalized(),
        }
    }

    /// Whether `p` may start a trajectory heading along `dir`: strictly
    /// inside, or on the boundary with `dir` pointing strictly inward.
    fn admits_start(&self, p: Vec2, dir: Vec2) -> bool {
        let tol = 1e-12;
        match *self {
            Table::Rectangle { a, b } => {
                let inside = p.x > 0.0 && p.x < a && p.y > 0.0 && p.y < b;
                if inside {
                    return true;
                }
                let on_x = (p.x == 0.0 && dir.x > tol) || (p.x == a && dir.x < -tol);
                let on_y = (p.y == 0.0 && dir.y > tol) || (p.y == b && dir.y < -tol);
                let within_x = p.x > 0.0 && p.x < a;
                let within_y = p.y > 0.0 && p.y < b;
                (on_x && within_y) || (on_y && within_x)
            }
            Table::Disc { radius } => {
                let r = p.norm();
                r < radius || ((r - radius).abs() <= tol * radius && p.dot(dir) < -tol * radius)
            }
        }
    }

    fn next_hit(&self, p: Vec2, d: Vec2) -> Hit {
        match *self {
            Table::Rectangle { a, b } => {
                let tx = if d.x > 0.0 {
                    (a - p.x) / d.x
                } else if d.x < 0.0 {
                    -p.x / d.x
                } else {
                    f64::INFINITY
                };
                let ty = if d.y > 0.0 {
                    (b - p.y) / d.y
                } else if d.y < 0.0 {
                    -p.y / d.y
                } else {
                    f64::INFINITY
                };
                let (distance, point) = if tx <= ty {
                    let wall = if d.x > 0.0 { a } else { 0.0 };
                    (tx, Vec2::new(wall, (p.y + tx * d.y).clamp(0.0, b)))
                } else {
                    let wall = if d.y > 0.0 { b } else { 0.0 };
                    (ty, Vec2::new((p.x + ty * d.x).clamp(0.0, a), wall))
                };
                let near = |v: f64, hi: f64| v.abs() <= CORNER_TOL || (hi - v).abs() <= CORNER_TOL;
                let corner = near(point.x, a) && near(point.y, b);
                Hit { distance, point, corner }
            }
            Table::Disc { radius } => {
                let half_b = p.dot(d);
                let c = p.dot(p) - radius * radius;
                let disc = (half_b * half_b - c).max(0.0).sqrt();
                let distance = if half_b <= 0.0 { disc - half_b } else { -c / (half_b + disc) };
                let raw = p + d * distance;
                let point = raw * (radius / raw.norm());
                Hit { distance, point, corner: false }
            }
        }
    }

    /// Specular reflection of `d` at boundary point `p`.
    fn reflect(&self, p: Vec2, d: Vec2) -> Vec2 {
        match *self {
            Table::Rectangle { .. } => {
                let n = self.normal_at(p);
                if n.x != 0.0 {
                    Vec2::new(-d.x, d.y)
                } else {
                    Vec2::new(d.x, -d.y)
                }
            }
            Table::Disc { .. } => {
                let n = self.normal_at(p);
                (d - n * (2.0 * d.dot(n))).normalized()
            }
        }
    }
}

fn check_dimension(v: f64, what: &str) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("table {what} must be positive, got {v}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub start: Vec2,
    /// Unit direction of travel.
    pub dir: Vec2,
    pub length: f64,
}

impl Segment {
    pub fn end(&self) -> Vec2 {
        self.start + self.dir * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    LengthBudget,
    CornerHit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    pub total_length: f64,
    pub terminated_by: Termination,
}

impl Trajectory {
    /// Number of reflections, i.e. joins between consecutive segments.
    pub fn bounces(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    pub fn end_point(&self) -> Option<Vec2> {
        self.segments.last().map(|s| s.end())
    }

    /// Writes `segment,start_x,start_y,dir_x,dir_y,length`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["segment", "start_x", "start_y", "dir_x", "dir_y", "length"])?;
        for (i, s) in self.segments.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.start.x.to_string(),
                s.start.y.to_string(),
                s.dir.x.to_string(),
                s.dir.y.to_string(),
                s.length.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Follows a ball from `start` along `dir` until `length_budget` is used up
/// or it runs into a corner.
///
/// `start` must be strictly inside, or on the boundary with `dir` pointing
/// strictly inward. `dir` must have unit length up to `1e-9`; it is
/// renormalized.
pub fn simulate(table: &Table, start: Vec2, dir: Vec2, length_budget: f64) -> Result<Trajectory> {
    table.validate()?;
    if !(length_budget > 0.0 && length_budget.is_finite()) {
        return Err(Error::invalid(format!("length budget must be positive, got {length_budget}")));
    }
    if !dir.norm().is_finite() || (dir.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("direction must be a unit vector, got |dir| = {}", dir.norm())));
    }
    let dir = dir.normalized();
    if !table.admits_start(start, dir) {
        return Err(Error::invalid(format!(
            "start ({}, {}) is not inside the table",
            start.x, start.y
        )));
    }
    let mut segments = Vec::new();
    let mut travelled = 0.0;
    let (mut p, mut d) = (start, dir);
    loop {
        let remaining = length_budget - travelled;
        let hit = table.next_hit(p, d);
        if hit.distance >= remaining {
            segments.push(Segment { start: p, dir: d, length: remaining });
            break;
        }
        segments.push(Segment { start: p, dir: d, length: hit.distance });
        travelled += hit.distance;
        if hit.corner {
            let total_length = segments.iter().map(|s| s.length).sum();
            return Ok(Trajectory { segments, total_length, terminated_by: Termination::CornerHit });
        }
        d = table.reflect(hit.point, d);
        p = hit.point;
    }
    let total_length = segments.iter().map(|s| s.length).sum();
    Ok(Trajectory { segments, total_length, terminated_by: Termination::LengthBudget })
}

/// First return of a trajectory to its initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedOrbit {
    pub length: f64,
    /// Reflections before the return.
    pub bounces: usize,
}

/// Smallest positive distance along `traj` at which the ball is back at
/// `start` moving along `dir`, both within `tol`.
pub fn is_closed(traj: &Trajectory, start: Vec2, dir: Vec2, tol: f64) -> Option<ClosedOrbit> {
    let mut before = 0.0;
    for (i, seg) in traj.segments.iter().enumerate() {
        if (seg.dir - dir).norm() <= tol {
            let w = start - seg.start;
            let s = w.dot(seg.dir);
            let off = (w - seg.dir * s).norm();
            let length = before + s;
            if off <= tol && s >= -tol && s <= seg.length + tol && length > tol {
                return Some(ClosedOrbit { length, bounces: i });
            }
        }
        before += seg.length;
    }
    None
}

/// Largest violation of the reflection law along a trajectory: at every
/// join the tangential part of the direction must be kept and the normal
/// part negated.
pub fn reflection_defect(table: &Table, traj: &Trajectory) -> f64 {
    traj.segments
        .windows(2)
        .map(|w| {
            let n = table.normal_at(w[1].start);
            let t = n.perp();
            let (din, dout) = (w[0].dir, w[1].dir);
            (din.dot(t) - dout.dot(t)).abs().max((din.dot(n) + dout.dot(n)).abs())
        })
        .fold(0.0, f64::max)
}

/// How a closed orbit is labelled in a length spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitLabel {
    /// Rectangle orbit unfolding to the lattice vector `(2pa, 2qb)`.
    Winding { p: u64, q: u64 },
    /// Disc orbit with `n` reflections winding `q` times around the centre.
    Polygon { n: u64, q: u64 },
}

impl fmt::Display for OrbitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitLabel::Winding { p, q } => write!(f, "({p},{q})"),
            OrbitLabel::Polygon { n, q } => write!(f, "n={n} q={q}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthEntry {
    pub length: f64,
    pub labels: Vec<OrbitLabel>,
}

/// Sorted lengths of closed orbits, iterates included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthSpectrum {
    pub entries: Vec<LengthEntry>,
}

impl LengthSpectrum {
    pub fn lengths(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.length).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with `lo ≤ length ≤ hi`.
    pub fn within(&self, lo: f64, hi: f64) -> LengthSpectrum {
        let entries = self.entries.iter().filter(|e| e.length >= lo && e.length <= hi).cloned().collect();
        LengthSpectrum { entries }
    }

    /// Writes `length,descriptor`; merged labels are joined by `;`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["length", "descriptor"])?;
        for e in &self.entries {
            let labels: Vec<String> = e.labels.iter().map(|l| l.to_string()).collect();
            w.write_record([e.length.to_string(), labels.join(";")])?;
        }
        w.flush()?;
        Ok(())
    }

    fn from_raw(mut raw: Vec<(f64, OrbitLabel)>) -> Self {
        raw.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut entries: Vec<LengthEntry> = Vec::new();
        for (length, label) in raw {
            match entries.last_mut() {
                Some(e) if length - e.length <= LENGTH_MERGE_TOL => e.labels.push(label),
                _ => entries.push(LengthEntry { length, labels: vec![label] }),
            }
        }
        LengthSpectrum { entries }
    }
}

/// Closed-orbit lengths up to `l_max`, with disc polygons capped at
/// [`DEFAULT_MAX_BOUNCES`] reflections.
pub fn length_spectrum(table: &Table, l_max: f64) -> Result<LengthSpectrum> {
    length_spectrum_with(table, l_max, DEFAULT_MAX_BOUNCES)
}

/// Closed-orbit lengths up to `l_max`.
///
/// Rectangle: `2√((pa)² + (qb)²)` for integers `p, q ≥ 0` not both zero.
/// Disc: `2nR sin(πq/n)` for `2 ≤ n ≤ max_bounces` and `1 ≤ q ≤ n/2`;
/// `q = n/2` gives the traversals of a diameter. Disc lengths accumulate at
/// `2πqR` as `n` grows, hence the bounce cap.
pub fn length_spectrum_with(table: &Table, l_max: f64, max_bounces: usize) -> Result<LengthSpectrum> {
    table.validate()?;
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err(Error::invalid(format!("l_max must be positive, got {l_max}")));
    }
    let limit = l_max * (1.0 + 1e-12);
    let mut raw = Vec::new();
    match *table {
        Table::Rectangle { a, b } => {
            let p_max = (l_max / (2.0 * a)).floor() as u64 + 1;
            let q_max = (l_max / (2.0 * b)).floor() as u64 + 1;
            for p in 0..=p_max {
                for q in 0..=q_max {
                    if p == 0 && q == 0 {
                        continue;
                    }
                    let length = 2.0 * (p as f64 * a).hypot(q as f64 * b);
                    if length <= limit {
                        raw.push((length, OrbitLabel::Winding { p, q }));
                    }
                }
            }
        }
        Table::Disc { radius } => {
            for n in 2..=max_bounces as u64 {
                for q in 1..=n / 2 {
                    let length = 2.0 * n as f64 * radius * (std::f64::consts::PI * q as f64 / n as f64).sin();
                    if length <= limit {
                        raw.push((length, OrbitLabel::Polygon { n, q }));
                    }
                }
            }
        }
    }
    Ok(LengthSpectrum::from_raw(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn check_trajectory(table: &Table, traj: &Trajectory) {
        for s in &traj.segments {
            assert!((s.dir.norm() - 1.0).abs() < 1e-12);
        }
        for w in traj.segments.windows(2) {
            assert!((w[0].end() - w[1].start).norm() < 1e-12);
        }
        assert!(reflection_defect(table, traj) < 1e-12);
        let sum: f64 = traj.segments.iter().map(|s| s.length).sum();
        assert_eq!(sum, traj.total_length);
    }

    #[test]
    fn vertical_bouncing_ball() {
        let t = Table::unit_square();
        let traj = simulate(&t, Vec2::new(0.5, 0.5), Vec2::new(0.0, 1.0), 3.0).unwrap();
        let lengths: Vec<f64> = traj.segments.iter().map(|s| s.length).collect();
        assert_eq!(lengths, vec![0.5, 1.0, 1.0, 0.5]);
        assert_eq!(traj.segments[1].start, Vec2::new(0.5, 1.0));
        assert_eq!(traj.segments[2].start, Vec2::new(0.5, 0.0));
        assert_eq!(traj.terminated_by, Termination::LengthBudget);
        assert_eq!(traj.total_length, 3.0);
        check_trajectory(&t, &traj);
    }

    #[test]
    fn diagonal_bounces_land_on_walls() {
        let t = Table::unit_square();
        let d = Vec2::new(1.0, 1.0).normalized();
        let traj = simulate(&t, Vec2::new(0.5, 0.25), d, 10.0).unwrap();
        assert!(traj.bounces() > 5);
        for s in &traj.segments[1..] {
            let p = s.start;
            assert!(p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0);
        }
        check_trajectory(&t, &traj);
    }

    #[test]
    fn disc_chords_have_equal_length() {
        let t = Table::disc(1.0).unwrap();
        let phi: f64 = 0.3;
        let hit = Vec2::new(1.0, 0.0);
        let incoming = Vec2::new(phi.cos(), phi.sin());
        let start = hit - incoming * 0.5;
        let traj = simulate(&t, start, incoming, 30.0).unwrap();
        let chord = 2.0 * phi.cos();
        for s in &traj.segments[1..traj.segments.len() - 1] {
            assert!((s.length - chord).abs() < 1e-12);
        }
        check_trajectory(&t, &traj);
    }

    #[test]
    fn corner_hit_terminates() {
        let t = Table::unit_square();
        let traj = simulate(&t, Vec2::new(0.5, 0.5), Vec2::new(1.0, 1.0).normalized(), 10.0).unwrap();
        assert_eq!(traj.terminated_by, Termination::CornerHit);
        assert_eq!(traj.segments.len(), 1);
        assert!((traj.total_length - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn invalid_starts() {
        let t = Table::unit_square();
        let up = Vec2::new(0.0, 1.0);
        assert!(simulate(&t, Vec2::new(1.5, 0.5), up, 1.0).is_err());
        assert!(simulate(&t, Vec2::new(0.5, 1.0), up, 1.0).is_err());
        assert!(simulate(&t, Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0).normalized(), 1.0).is_err());
        assert!(simulate(&t, Vec2::new(0.5, 0.5), Vec2::new(0.0, 2.0), 1.0).is_err());
        assert!(simulate(&t, Vec2::new(0.5, 0.5), up, 0.0).is_err());
        let d = Table::disc(1.0).unwrap();
        assert!(simulate(&d, Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0), 1.0).is_err());
        assert!(simulate(&d, Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0), 1.0).is_ok());
        assert!(Table::rectangle(0.0, 1.0).is_err());
        assert!(Table::disc(-2.0).is_err());
    }

    #[test]
    fn closed_diagonal_orbit() {
        let t = Table::unit_square();
        let start = Vec2::new(0.5, 0.0);
        let d = Vec2::new(1.0, 1.0).normalized();
        let traj = simulate(&t, start, d, 10.0).unwrap();
        let c = is_closed(&traj, start, d, 1e-9).unwrap();
        assert!((c.length - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.bounces, 4);
    }

    #[test]
    fn closed_bouncing_ball() {
        let t = Table::unit_square();
        let start = Vec2::new(0.5, 0.0);
        let up = Vec2::new(0.0, 1.0);
        let traj = simulate(&t, start, up, 5.0).unwrap();
        let c = is_closed(&traj, start, up, 1e-9).unwrap();
        assert_eq!(c.length, 2.0);
    }

    #[test]
    fn irrational_slope_never_closes() {
        let t = Table::unit_square();
        let start = Vec2::new(0.3, 0.4);
        let d = Vec2::new(1.0, 2f64.sqrt()).normalized();
        let traj = simulate(&t, start, d, 50.0).unwrap();
        assert_eq!(traj.terminated_by, Termination::LengthBudget);
        assert!(is_closed(&traj, start, d, 1e-9).is_none());
    }

    #[test]
    fn simulated_orbits_match_spectrum() {
        for &(a, b) in &[(1.0, 1.0), (1.0, 1.3), (2.0, 0.7)] {
            let t = Table::rectangle(a, b).unwrap();
            let spectrum = length_spectrum(&t, 12.0).unwrap().lengths();
            for (p, q) in [(1u64, 0u64), (0, 1), (1, 1), (1, 2), (2, 1), (3, 1), (2, 3)] {
                let d = Vec2::new(p as f64 * a, q as f64 * b).normalized();
                let start = Vec2::new(0.31 * a, 0.47 * b);
                let traj = simulate(&t, start, d, 30.0).unwrap();
                let c = is_closed(&traj, start, d, 1e-9).unwrap();
                let expected = 2.0 * (p as f64 * a).hypot(q as f64 * b);
                assert!((c.length - expected).abs() < 1e-8);
                if c.length <= 12.0 {
                    assert!(spectrum.iter().any(|l| (l - c.length).abs() < 1e-8));
                }
            }
        }
    }

    #[test]
    fn disc_polygons_close() {
        for r in [1.0, 2.5] {
            let t = Table::disc(r).unwrap();
            for n in 2..=6u32 {
                let v = |j: u32| {
                    let a = 2.0 * PI * j as f64 / n as f64;
                    Vec2::new(r * a.cos(), r * a.sin())
                };
                let (v0, v1) = (v(0), v(1));
                let start = (v0 + v1) * 0.5;
                let d = (v1 - v0).normalized();
                let expected = 2.0 * n as f64 * r * (PI / n as f64).sin();
                let traj = simulate(&t, start, d, 3.0 * expected).unwrap();
                let c = is_closed(&traj, start, d, 1e-9).unwrap();
                assert_eq!(c.bounces, n as usize, "n={n}");
                assert!((c.length - expected).abs() < 1e-9, "n={n}");
                check_trajectory(&t, &traj);
            }
        }
    }

    #[test]
    fn reversed_trajectory_retraces() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let tables = [Table::rectangle(1.0, 1.3).unwrap(), Table::disc(1.0).unwrap()];
        for t in &tables {
            for _ in 0..20 {
                let start = match t {
                    Table::Rectangle { a, b } => Vec2::new(rng.gen_range(0.1..0.9) * a, rng.gen_range(0.1..0.9) * b),
                    Table::Disc { radius } => Vec2::new(rng.gen_range(-0.5..0.5) * radius, rng.gen_range(-0.5..0.5) * radius),
                };
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                let d = Vec2::new(phi.cos(), phi.sin());
                let fwd = simulate(t, start, d, 7.3).unwrap();
                let last = fwd.segments.last().unwrap();
                let back = simulate(t, last.end(), last.dir * -1.0, 7.3).unwrap();
                let forward_hits: Vec<Vec2> = fwd.segments[1..].iter().map(|s| s.start).collect();
                let backward_hits: Vec<Vec2> = back.segments[1..].iter().map(|s| s.start).collect();
                assert_eq!(forward_hits.len(), backward_hits.len());
                for (p, q) in forward_hits.iter().rev().zip(&backward_hits) {
                    assert!((*p - *q).norm() < 1e-9);
                }
                assert!((back.end_point().unwrap() - start).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn random_bounces_obey_reflection_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bounces = 0;
        while bounces < 2000 {
            let t = if rng.gen_bool(0.5) {
                Table::rectangle(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)).unwrap()
            } else {
                Table::disc(rng.gen_range(0.5..2.0)).unwrap()
            };
            let start = match t {
                Table::Rectangle { a, b } => Vec2::new(rng.gen_range(0.01..0.99) * a, rng.gen_range(0.01..0.99) * b),
                Table::Disc { radius } => Vec2::new(rng.gen_range(-0.7..0.7) * radius, rng.gen_range(-0.7..0.7) * radius),
            };
            let phi: f64 = rng.gen_range(0.0..2.0 * PI);
            let traj = simulate(&t, start, Vec2::new(phi.cos(), phi.sin()), 40.0).unwrap();
            check_trajectory(&t, &traj);
            bounces += traj.bounces();
        }
    }

    #[test]
    fn unit_square_spectrum() {
        let s = length_spectrum(&Table::unit_square(), 6.0).unwrap();
        let expected = [2.0, 2.0 * 2f64.sqrt(), 4.0, 2.0 * 5f64.sqrt(), 4.0 * 2f64.sqrt(), 6.0];
        let got = s.lengths();
        assert_eq!(got.len(), expected.len(), "{got:?}");
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12);
        }
        assert_eq!(
            s.entries[0].labels,
            vec![OrbitLabel::Winding { p: 0, q: 1 }, OrbitLabel::Winding { p: 1, q: 0 }]
        );
        assert!(length_spectrum(&Table::unit_square(), 1.9).unwrap().is_empty());
    }

    #[test]
    fn disc_spectrum_contains_polygons() {
        let s = length_spectrum(&Table::disc(1.0).unwrap(), 7.0).unwrap().lengths();
        for target in [4.0, 3.0 * 3f64.sqrt(), 4.0 * 2f64.sqrt()] {
            assert!(s.iter().any(|l| (l - target).abs() < 1e-12), "{target}");
        }
        for w in s.windows(2) {
            assert!(w[1] - w[0] > LENGTH_MERGE_TOL);
        }
        assert!(s.iter().all(|&l| l <= 7.0));
    }

    #[test]
    fn csv_exports() {
        let s = length_spectrum(&Table::unit_square(), 2.9).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "length,descriptor\n2,\"(0,1);(1,0)\"\n2.8284271247461903,\"(1,1)\"\n");

        let traj = simulate(&Table::unit_square(), Vec2::new(0.5, 0.5), Vec2::new(0.0, 1.0), 1.0).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("segment,start_x,start_y,dir_x,dir_y,length\n0,0.5,0.5,0,1,0.5\n"));
    }
}
