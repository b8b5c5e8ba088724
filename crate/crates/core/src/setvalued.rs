//! Sets in `ℝ^d` (`d ≤ 3`) for subdifferential estimates.
//!
//! A [`SetRepr`] is a finite point list plus a list of recession directions.
//! For a convex body or cone the set is `conv(points) + cone(recession)`; for a
//! point cloud it is `points + cone(recession)`, with no convexification.
//! Unbounded sets are therefore a bounded truncation plus directions, and every
//! distance or inclusion test works on those two pieces.

use crate::error::{Error, Result};
use crate::measure_space::{AtomFunction, MeasureSpace};
use crate::vecops::{self, direction_grid, dist, dot, grid_pitch, nnls, norm, normalized};
use serde::{Deserialize, Serialize};

const DEDUP_TOL: f64 = 1e-12;
const MEMBER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    PointCloud,
    ConvexBody,
    Cone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRepr {
    pub kind: SetKind,
    pub dim: usize,
    /// Cloud points, or vertices for convex bodies; `[0]` for cones.
    pub points: Vec<Vec<f64>>,
    /// Unit recession directions (cone generators for cones).
    pub recession: Vec<Vec<f64>>,
    pub unbounded: bool,
}

/// Result of a point-in-set test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Membership {
    pub inside: bool,
    /// `-distance`, so IN points have margin 0 and OUT points a negative margin.
    pub margin: f64,
    /// Unit `u` with `⟨u, y⟩ > σ_A(u)` for OUT points of convex sets.
    pub separating_direction: Option<Vec<f64>>,
}

impl SetRepr {
    pub fn empty(dim: usize) -> Self {
        Self {
            kind: SetKind::PointCloud,
            dim,
            points: vec![],
            recession: vec![],
            unbounded: false,
        }
    }

    pub fn point(p: Vec<f64>) -> Self {
        Self {
            kind: SetKind::ConvexBody,
            dim: p.len(),
            points: vec![p],
            recession: vec![],
            unbounded: false,
        }
    }

    pub fn cloud(dim: usize, points: Vec<Vec<f64>>, recession: Vec<Vec<f64>>) -> Self {
        let mut s = Self {
            kind: SetKind::PointCloud,
            dim,
            points,
            recession: unit_dirs(recession),
            unbounded: false,
        };
        s.unbounded = !s.recession.is_empty();
        s.dedup_points();
        s
    }

    /// `conv(points) + cone(recession)`.
    pub fn convex(dim: usize, points: Vec<Vec<f64>>, recession: Vec<Vec<f64>>) -> Self {
        let mut s = Self {
            kind: SetKind::ConvexBody,
            dim,
            points,
            recession: unit_dirs(recession),
            unbounded: false,
        };
        s.unbounded = !s.recession.is_empty();
        s.prune();
        s
    }

    /// Closed interval in `ℝ`; `None` ends are infinite and become recession
    /// directions. Finite ends are kept as vertices.
    pub fn interval(lo: Option<f64>, hi: Option<f64>) -> Self {
        let mut pts = vec![];
        let mut rec = vec![];
        match (lo, hi) {
            (Some(a), Some(b)) => {
                if a > b {
                    return Self::empty(1);
                }
                pts.push(vec![a]);
                pts.push(vec![b]);
            }
            (Some(a), None) => {
                pts.push(vec![a]);
                rec.push(vec![1.0]);
            }
            (None, Some(b)) => {
                pts.push(vec![b]);
                rec.push(vec![-1.0]);
            }
            (None, None) => {
                pts.push(vec![0.0]);
                rec.push(vec![1.0]);
                rec.push(vec![-1.0]);
            }
        }
        Self::convex(1, pts, rec)
    }

    /// Closed convex cone generated by `generators` (zero vectors ignored).
    pub fn cone(dim: usize, generators: Vec<Vec<f64>>) -> Self {
        let mut s = Self {
            kind: SetKind::Cone,
            dim,
            points: vec![vec![0.0; dim]],
            recession: unit_dirs(generators),
            unbounded: false,
        };
        s.recession = prune_cone_generators(dim, s.recession);
        s.unbounded = !s.recession.is_empty();
        s
    }

    /// `{0}` as a cone.
    pub fn origin(dim: usize) -> Self {
        Self::cone(dim, vec![])
    }

    pub fn full_space(dim: usize) -> Self {
        let mut g = vec![];
        for i in 0..dim {
            g.push(vecops::unit(dim, i, 1.0));
            g.push(vecops::unit(dim, i, -1.0));
        }
        Self::cone(dim, g)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `σ_A(u)`; `+∞` when a recession direction has positive pairing with `u`.
    pub fn support(&self, u: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::NEG_INFINITY;
        }
        if self.recession.iter().any(|r| dot(r, u) > 1e-12) {
            return f64::INFINITY;
        }
        self.points.iter().map(|p| dot(p, u)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Support values on the default direction grid of this dimension.
    pub fn support_values(&self) -> Vec<f64> {
        direction_grid(self.dim).iter().map(|u| self.support(u)).collect()
    }

    /// `λ·A` for `λ ≥ 0`; `0·A = {0}` for nonempty `A`.
    pub fn scaled(&self, lambda: f64) -> Self {
        if self.is_empty() {
            return self.clone();
        }
        if lambda == 0.0 {
            return Self::point(vec![0.0; self.dim]);
        }
        let mut s = self.clone();
        s.points = s.points.iter().map(|p| vecops::scale(p, lambda)).collect();
        if lambda < 0.0 {
            s.recession = s.recession.iter().map(|r| vecops::scale(r, -1.0)).collect();
        }
        s
    }

    pub fn translated(&self, v: &[f64]) -> Self {
        let mut s = self.clone();
        if s.kind == SetKind::Cone && !v.iter().all(|x| *x == 0.0) {
            s.kind = SetKind::ConvexBody;
        }
        s.points = s.points.iter().map(|p| vecops::add(p, v)).collect();
        s
    }

    /// Closed convex hull.
    pub fn hull(&self) -> Self {
        match self.kind {
            SetKind::PointCloud => Self::convex(self.dim, self.points.clone(), self.recession.clone()),
            _ => self.clone(),
        }
    }

    /// Drops points outside the ball of radius `cap` (the recession directions
    /// carry the unbounded part).
    pub fn truncated(&self, cap: f64) -> Self {
        let mut s = self.clone();
        s.points.retain(|p| norm(p) <= cap * (1.0 + 1e-12));
        s
    }

    /// Distance from `y` and the nearest point found.
    pub fn distance(&self, y: &[f64]) -> (f64, Vec<f64>) {
        if self.is_empty() {
            return (f64::INFINITY, y.to_vec());
        }
        match self.kind {
            SetKind::PointCloud => {
                let mut best = (f64::INFINITY, y.to_vec());
                for p in &self.points {
                    let q = project_onto_translated_cone(y, p, &self.recession);
                    let d = dist(y, &q);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
                best
            }
            _ => {
                let q = project_onto_convex(y, &self.points, &self.recession);
                (dist(y, &q), q)
            }
        }
    }

    pub fn membership(&self, y: &[f64], tol: f64) -> Membership {
        let (d, q) = self.distance(y);
        let inside = d <= tol;
        let separating_direction = if inside || !d.is_finite() {
            None
        } else {
            normalized(&vecops::sub(y, &q))
        };
        Membership {
            inside,
            margin: -d,
            separating_direction,
        }
    }

    fn dedup_points(&mut self) {
        dedup(&mut self.points);
    }

    fn prune(&mut self) {
        self.recession = prune_cone_generators(self.dim, std::mem::take(&mut self.recession));
        self.unbounded = !self.recession.is_empty();
        dedup(&mut self.points);
        if self.points.len() <= 1 {
            return;
        }
        if self.dim == 1 {
            let plus = self.recession.iter().any(|r| r[0] > 0.0);
            let minus = self.recession.iter().any(|r| r[0] < 0.0);
            let lo = self.points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = self.points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            self.points = match (minus, plus) {
                (true, true) => vec![vec![lo]],
                (false, true) => vec![vec![lo]],
                (true, false) => vec![vec![hi]],
                (false, false) if lo == hi => vec![vec![lo]],
                (false, false) => vec![vec![lo], vec![hi]],
            };
            return;
        }
        if self.points.len() > 64 {
            let grid = direction_grid(self.dim);
            let mut keep = vec![false; self.points.len()];
            for u in &grid {
                if self.recession.iter().any(|r| dot(r, u) > 1e-12) {
                    continue;
                }
                let mut best = 0;
                for (i, p) in self.points.iter().enumerate() {
                    if dot(p, u) > dot(&self.points[best], u) {
                        best = i;
                    }
                }
                keep[best] = true;
            }
            let pts = std::mem::take(&mut self.points);
            self.points = pts.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect();
            if self.points.is_empty() {
                return;
            }
        }
        let mut i = 0;
        while i < self.points.len() && self.points.len() > 1 {
            let others: Vec<Vec<f64>> = self
                .points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| p.clone())
                .collect();
            let q = project_onto_convex(&self.points[i], &others, &self.recession);
            if dist(&q, &self.points[i]) <= 1e-10 * (1.0 + norm(&self.points[i])) {
                self.points.remove(i);
            } else {
                i += 1;
            }
        }
    }
}

fn unit_dirs(dirs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = dirs.iter().filter_map(|d| normalized(d)).collect();
    dedup(&mut out);
    out
}

fn dedup(points: &mut Vec<Vec<f64>>) {
    points.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b) {
            let c = x.total_cmp(y);
            if c != std::cmp::Ordering::Equal {
                return c;
            }
        }
        std::cmp::Ordering::Equal
    });
    points.dedup_by(|a, b| dist(a, b) <= DEDUP_TOL * (1.0 + norm(a)));
}

/// Greedy removal of generators that lie in the cone of the others.
fn prune_cone_generators(dim: usize, gens: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut gens = gens;
    dedup(&mut gens);
    if dim == 1 {
        let plus = gens.iter().any(|g| g[0] > 0.0);
        let minus = gens.iter().any(|g| g[0] < 0.0);
        let mut out = vec![];
        if minus {
            out.push(vec![-1.0]);
        }
        if plus {
            out.push(vec![1.0]);
        }
        return out;
    }
    let mut i = 0;
    while i < gens.len() {
        let others: Vec<Vec<f64>> = gens
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, g)| g.clone())
            .collect();
        let lam = nnls(&others, &gens[i]);
        let mut r = gens[i].clone();
        for (c, l) in others.iter().zip(&lam) {
            r = vecops::axpy(&r, -l, c);
        }
        if norm(&r) <= 1e-9 {
            gens.remove(i);
        } else {
            i += 1;
        }
    }
    gens
}

/// Projection of `y` onto `p + cone(gens)`.
fn project_onto_translated_cone(y: &[f64], p: &[f64], gens: &[Vec<f64>]) -> Vec<f64> {
    if gens.is_empty() {
        return p.to_vec();
    }
    let v = vecops::sub(y, p);
    let lam = nnls(gens, &v);
    let mut q = p.to_vec();
    for (g, l) in gens.iter().zip(&lam) {
        q = vecops::axpy(&q, *l, g);
    }
    q
}

/// Projection of `y` onto `conv(points) + cone(rec)`: nonnegative least
/// squares with a heavily weighted row enforcing `Σλ = 1`, followed by a
/// renormalization of the convex weights.
fn project_onto_convex(y: &[f64], points: &[Vec<f64>], rec: &[Vec<f64>]) -> Vec<f64> {
    if points.len() == 1 {
        return project_onto_translated_cone(y, &points[0], rec);
    }
    let d = y.len();
    if d == 1 {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let lo = if rec.iter().any(|r| r[0] < 0.0) {
            f64::NEG_INFINITY
        } else {
            lo
        };
        let hi = if rec.iter().any(|r| r[0] > 0.0) { f64::INFINITY } else { hi };
        return vec![y[0].clamp(lo, hi)];
    }
    // Center on the first point to keep the weighted row well scaled.
    let base = &points[0];
    let scale = points
        .iter()
        .map(|p| dist(p, base))
        .fold(0.0, f64::max)
        .max(dist(y, base))
        .max(1e-12);
    let m = 1e4 * scale;
    let mut cols = Vec::with_capacity(points.len() + rec.len());
    for p in points {
        let mut c = vecops::sub(p, base);
        c.push(m);
        cols.push(c);
    }
    for r in rec {
        let mut c = r.clone();
        c.push(0.0);
        cols.push(c);
    }
    let mut b = vecops::sub(y, base);
    b.push(m);
    let coef = nnls(&cols, &b);
    if let Some(q) = polish_projection(y, points, rec, &coef) {
        return q;
    }
    let lam_sum: f64 = coef[..points.len()].iter().sum();
    let mut q = base.clone();
    for (k, p) in points.iter().enumerate() {
        if coef[k] > 0.0 {
            q = vecops::axpy(&q, coef[k] / lam_sum.max(1e-300), &vecops::sub(p, base));
        }
    }
    for (k, r) in rec.iter().enumerate() {
        q = vecops::axpy(&q, coef[points.len() + k], r);
    }
    q
}

/// Exact projection on the face selected by the approximate coefficients:
/// least squares over the affine hull of the active points plus the span of the
/// active directions, accepted when it is feasible for that face.
fn polish_projection(y: &[f64], points: &[Vec<f64>], rec: &[Vec<f64>], coef: &[f64]) -> Option<Vec<f64>> {
    let np = points.len();
    let act_p: Vec<usize> = (0..np).filter(|&k| coef[k] > 0.0).collect();
    let act_r: Vec<usize> = (0..rec.len()).filter(|&k| coef[np + k] > 0.0).collect();
    let (&first, rest) = act_p.split_first()?;
    let base = &points[first];
    let mut cols: Vec<Vec<f64>> = rest.iter().map(|&k| vecops::sub(&points[k], base)).collect();
    cols.extend(act_r.iter().map(|&k| rec[k].clone()));
    let z = vecops::least_squares_cols(&cols, &vecops::sub(y, base));
    let lam_rest: f64 = z[..rest.len()].iter().sum();
    if z.iter().any(|&v| v < -1e-12) || lam_rest > 1.0 + 1e-12 {
        return None;
    }
    let mut q = base.clone();
    for (c, l) in cols.iter().zip(&z) {
        q = vecops::axpy(&q, *l, c);
    }
    // the face optimum must also be optimal over the whole set
    let r = vecops::sub(y, &q);
    let tol = 1e-9 * (1.0 + norm(&r)) * (1.0 + norm(y));
    let ok = points.iter().all(|p| dot(&r, &vecops::sub(p, &q)) <= tol) && rec.iter().all(|d| dot(&r, d) <= tol);
    ok.then_some(q)
}

/// `A + B`. Clouds add pairwise; convex bodies and cones add as convex sets.
pub fn minkowski_sum(a: &SetRepr, b: &SetRepr) -> Result<SetRepr> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    if a.is_empty() || b.is_empty() {
        return Ok(SetRepr::empty(a.dim));
    }
    let mut points = Vec::with_capacity(a.points.len() * b.points.len());
    for p in &a.points {
        for q in &b.points {
            points.push(vecops::add(p, q));
        }
    }
    let mut rec = a.recession.clone();
    rec.extend(b.recession.iter().cloned());
    Ok(match (a.kind, b.kind) {
        (SetKind::PointCloud, _) | (_, SetKind::PointCloud) => SetRepr::cloud(a.dim, points, rec),
        (SetKind::Cone, SetKind::Cone) => SetRepr::cone(a.dim, rec),
        _ => SetRepr::convex(a.dim, points, rec),
    })
}

/// Per-atom sets `C(t)`.
pub type SetField = AtomFunction<SetRepr>;

/// `Σ weight(t)·conv C(t)`: the Aumann integral over finitely many atoms.
pub fn aumann_integral(space: &MeasureSpace, field: &SetField) -> Result<SetRepr> {
    let dim = field.0.values().next().map(|s| s.dim).unwrap_or(1);
    let mut acc = SetRepr::point(vec![0.0; dim]);
    for atom in space.atoms() {
        let c = field.get(&atom.tag)?;
        if c.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.dim,
            });
        }
        if atom.weight == 0.0 {
            continue;
        }
        if c.is_empty() {
            return Err(Error::EmptySetValue(atom.tag.clone()));
        }
        acc = minkowski_sum(&acc, &c.hull().scaled(atom.weight))?;
    }
    if acc.kind == SetKind::PointCloud {
        acc = acc.hull();
    }
    Ok(acc)
}

/// Generators of the cone spanned by a set: normalized points plus recession.
fn cone_generators(a: &SetRepr) -> Vec<Vec<f64>> {
    let mut g: Vec<Vec<f64>> = a.points.iter().filter_map(|p| normalized(p)).collect();
    g.extend(a.recession.iter().cloned());
    g
}

/// Negative polar cone `A^- = {y : ⟨y, x⟩ ≤ 0 for all x ∈ A}`.
pub fn polar_cone(a: &SetRepr) -> Result<SetRepr> {
    let dim = a.dim;
    if dim == 0 || dim > 3 {
        return Err(Error::UnsupportedSet(format!("polar cone in dimension {dim}")));
    }
    let gens = cone_generators(a);
    let feasible = |y: &[f64]| gens.iter().all(|g| dot(g, y) <= 1e-12);
    let mut cands: Vec<Vec<f64>> = vec![];
    for i in 0..dim {
        cands.push(vecops::unit(dim, i, 1.0));
        cands.push(vecops::unit(dim, i, -1.0));
    }
    for g in &gens {
        cands.push(vecops::scale(g, -1.0));
        if dim == 2 {
            cands.push(vec![-g[1], g[0]]);
            cands.push(vec![g[1], -g[0]]);
        }
    }
    if dim == 3 {
        let mut extra = gens.clone();
        for i in 0..3 {
            extra.push(vecops::unit(3, i, 1.0));
        }
        for i in 0..extra.len() {
            for j in i + 1..extra.len() {
                if let Some(c) = normalized(&vecops::cross(&extra[i], &extra[j])) {
                    cands.push(vecops::scale(&c, -1.0));
                    cands.push(c);
                }
            }
        }
        for g in &gens {
            // directions in the plane orthogonal to g, on a fine circle
            let basis = vecops::orthogonal_complement(std::slice::from_ref(g), 3);
            for k in 0..72 {
                let t = 2.0 * std::f64::consts::PI * k as f64 / 72.0;
                cands.push(vecops::axpy(&vecops::scale(&basis[0], t.cos()), t.sin(), &basis[1]));
            }
        }
    }
    if !gens.is_empty() {
        cands.extend(direction_grid(dim));
    }
    let kept: Vec<Vec<f64>> = cands.into_iter().filter(|y| feasible(y)).collect();
    Ok(SetRepr::cone(dim, kept))
}

/// `UI(C)`: grid directions `u` with `Σ weight·max(σ_{C(t)}(u), 0) ≤ budget`.
pub fn ui_directions(space: &MeasureSpace, field: &SetField, grid: &[Vec<f64>], budget: f64) -> Result<SetRepr> {
    let dim = grid.first().map(|u| u.len()).unwrap_or(1);
    let mut keep = vec![];
    for u in grid {
        let mut total = 0.0;
        for atom in space.atoms() {
            let c = field.get(&atom.tag)?;
            if atom.weight == 0.0 {
                continue;
            }
            let s = c.support(u).max(0.0);
            total += atom.weight * s;
            if !total.is_finite() {
                break;
            }
        }
        if total <= budget {
            keep.push(u.clone());
        }
    }
    Ok(SetRepr::cone(dim, keep))
}

/// Default grid for [`ui_directions`]: the direction grid of the dimension plus
/// the generators of each `C(t)^-`, so polyhedral boundaries are represented.
pub fn ui_grid(field: &SetField, dim: usize) -> Result<Vec<Vec<f64>>> {
    let mut grid = direction_grid(dim);
    let mut seen: Vec<&SetRepr> = vec![];
    for c in field.0.values() {
        if c.kind == SetKind::Cone && !seen.contains(&c) {
            seen.push(c);
            for g in polar_cone(c)?.recession {
                if !grid.iter().any(|u| vecops::dist(u, &g) < 1e-12) {
                    grid.push(g);
                }
            }
        }
    }
    Ok(grid)
}

/// First atom/element violating `γ⟨c, e⟩ ≥ ‖c‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoleWitness {
    pub tag: String,
    pub element: Vec<f64>,
    /// `γ⟨c, e⟩ − ‖c‖` (negative for a violation).
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoleVerdict {
    pub pass: bool,
    pub witness: Option<SoleWitness>,
}

/// Compact-sole test: every vertex and generator `c` of every `C(t)` satisfies
/// `γ⟨c, e⟩ ≥ ‖c‖`. The inequality is concave in `c`, so extreme elements
/// decide it.
pub fn compact_sole_test(space: &MeasureSpace, field: &SetField, e: &[f64], gamma: f64) -> Result<SoleVerdict> {
    for atom in space.atoms() {
        let c = field.get(&atom.tag)?;
        if c.dim != e.len() {
            return Err(Error::DimensionMismatch {
                expected: c.dim,
                got: e.len(),
            });
        }
        for el in c.points.iter().chain(&c.recession) {
            let slack = gamma * dot(el, e) - norm(el);
            if slack < -1e-12 * (1.0 + norm(el)) {
                return Ok(SoleVerdict {
                    pass: false,
                    witness: Some(SoleWitness {
                        tag: atom.tag.clone(),
                        element: el.clone(),
                        slack,
                    }),
                });
            }
        }
    }
    Ok(SoleVerdict {
        pass: true,
        witness: None,
    })
}

/// Primal test: `e + δ·h ∈ C(t)` for every atom and every unit `h` on the
/// direction grid (plus the coordinate axes).
pub fn compact_sole_primal_test(space: &MeasureSpace, field: &SetField, e: &[f64], delta: f64) -> Result<SoleVerdict> {
    let dim = e.len();
    if dim > 3 {
        return Err(Error::UnsupportedSet(format!("primal sole test in dimension {dim}")));
    }
    let mut dirs = direction_grid(dim);
    for i in 0..dim {
        dirs.push(vecops::unit(dim, i, 1.0));
        dirs.push(vecops::unit(dim, i, -1.0));
    }
    for atom in space.atoms() {
        let c = field.get(&atom.tag)?.hull();
        for h in &dirs {
            let y = vecops::axpy(e, delta, h);
            let m = c.membership(&y, MEMBER_TOL * (1.0 + norm(&y)));
            if !m.inside {
                return Ok(SoleVerdict {
                    pass: false,
                    witness: Some(SoleWitness {
                        tag: atom.tag.clone(),
                        element: y,
                        slack: m.margin,
                    }),
                });
            }
        }
    }
    Ok(SoleVerdict {
        pass: true,
        witness: None,
    })
}

/// Runs the primal test on `C(t)` with `(e, δ)` and the dual test on `C(t)^-`
/// with `(-e, 1/δ)`; for closed convex cones the two agree.
pub fn sole_duality_check(space: &MeasureSpace, field: &SetField, e: &[f64], delta: f64) -> Result<(SoleVerdict, SoleVerdict)> {
    let primal = compact_sole_primal_test(space, field, e, delta)?;
    let mut polar = std::collections::BTreeMap::new();
    for (tag, c) in &field.0 {
        polar.insert(tag.clone(), polar_cone(c)?);
    }
    let minus_e = vecops::scale(e, -1.0);
    let dual = compact_sole_test(space, &AtomFunction(polar), &minus_e, 1.0 / delta)?;
    Ok((primal, dual))
}

/// Hausdorff distance. Bounded parts are compared point-to-set (against the
/// other set including its recession directions); when both sets are
/// unbounded, the gap between their recession cones (unit generators to the
/// other cone) is included. Exactly one unbounded set gives `+∞`.
pub fn hausdorff_distance(a: &SetRepr, b: &SetRepr) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(0.0),
        (true, false) | (false, true) => return Ok(f64::INFINITY),
        _ => {}
    }
    if a.recession.is_empty() != b.recession.is_empty() {
        return Ok(f64::INFINITY);
    }
    let one_side = |x: &SetRepr, y: &SetRepr| x.points.iter().map(|p| y.distance(p).0).fold(0.0, f64::max);
    let rec_side = |x: &SetRepr, y: &SetRepr| {
        x.recession
            .iter()
            .map(|g| dist(g, &project_onto_translated_cone(g, &vec![0.0; g.len()], &y.recession)))
            .fold(0.0, f64::max)
    };
    Ok(one_side(a, b).max(one_side(b, a)).max(rec_side(a, b)).max(rec_side(b, a)))
}

/// Grid pitch for set comparisons in dimension `dim`.
pub fn pitch(dim: usize) -> f64 {
    grid_pitch(dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::make_finite_atoms;

    fn iv(a: f64, b: f64) -> SetRepr {
        SetRepr::interval(Some(a), Some(b))
    }

    #[test]
    fn interval_sum() {
        let s = minkowski_sum(&iv(0.0, 1.0), &iv(2.0, 3.0)).unwrap();
        assert_eq!(hausdorff_distance(&s, &iv(2.0, 4.0)).unwrap(), 0.0);
    }

    #[test]
    fn origin_is_identity() {
        let a = iv(-1.0, 2.0);
        let s = minkowski_sum(&a, &SetRepr::origin(1)).unwrap();
        assert_eq!(hausdorff_distance(&s, &a).unwrap(), 0.0);
    }

    #[test]
    fn cone_absorbs_interval() {
        let s = minkowski_sum(&iv(0.0, 1.0), &SetRepr::cone(1, vec![vec![1.0]])).unwrap();
        assert!(s.unbounded);
        assert_eq!(hausdorff_distance(&s, &SetRepr::interval(Some(0.0), None)).unwrap(), 0.0);
    }

    #[test]
    fn aumann_of_intervals() {
        let sp = make_finite_atoms(&[("a", 1.0), ("b", 1.0)]).unwrap();
        let mut m = std::collections::BTreeMap::new();
        m.insert("a".to_string(), iv(0.0, 1.0));
        m.insert("b".to_string(), iv(2.0, 3.0));
        let s = aumann_integral(&sp, &AtomFunction(m)).unwrap();
        assert_eq!(hausdorff_distance(&s, &iv(2.0, 4.0)).unwrap(), 0.0);
    }

    #[test]
    fn aumann_of_singletons_is_bochner() {
        let sp = make_finite_atoms(&[("a", 0.5), ("b", 2.0)]).unwrap();
        let mut m = std::collections::BTreeMap::new();
        m.insert("a".to_string(), SetRepr::point(vec![1.0, 2.0]));
        m.insert("b".to_string(), SetRepr::point(vec![-1.0, 0.5]));
        let s = aumann_integral(&sp, &AtomFunction(m)).unwrap();
        assert_eq!(s.points.len(), 1);
        assert!(dist(&s.points[0], &[-1.5, 2.0]) < 1e-15);
    }

    #[test]
    fn aumann_rejects_empty_value() {
        let sp = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let f = AtomFunction::constant(&sp, SetRepr::empty(1));
        assert_eq!(aumann_integral(&sp, &f).unwrap_err(), Error::EmptySetValue("a".into()));
    }

    #[test]
    fn polar_of_halfline() {
        let p = polar_cone(&SetRepr::cone(1, vec![vec![1.0]])).unwrap();
        assert_eq!(p.recession, vec![vec![-1.0]]);
    }

    #[test]
    fn polar_of_origin_is_everything() {
        for d in 1..=3 {
            let p = polar_cone(&SetRepr::origin(d)).unwrap();
            assert_eq!(hausdorff_distance(&p, &SetRepr::full_space(d)).unwrap(), 0.0);
        }
    }

    #[test]
    fn bipolar_quadrant() {
        let c = SetRepr::cone(2, vec![vec![1.0, 0.0], vec![1.0, 1.0]]);
        let pp = polar_cone(&polar_cone(&c).unwrap()).unwrap();
        assert!(hausdorff_distance(&pp, &c).unwrap() < 1e-9);
    }

    #[test]
    fn bipolar_three_d() {
        let c = SetRepr::cone(3, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let pp = polar_cone(&polar_cone(&c).unwrap()).unwrap();
        assert!(hausdorff_distance(&pp, &c).unwrap() < 1e-9);
    }

    #[test]
    fn ui_of_constant_halfline_is_its_polar() {
        let sp = make_finite_atoms(&[("a", 1.0), ("b", 3.0)]).unwrap();
        let c = SetRepr::cone(1, vec![vec![1.0]]);
        let f = AtomFunction::constant(&sp, c.clone());
        let ui = ui_directions(&sp, &f, &direction_grid(1), 1e12).unwrap();
        assert_eq!(ui.recession, vec![vec![-1.0]]);
        let back = polar_cone(&ui).unwrap();
        assert_eq!(hausdorff_distance(&back, &c).unwrap(), 0.0);
    }

    #[test]
    fn ui_of_bounded_values_is_everything() {
        let sp = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let f = AtomFunction::constant(&sp, iv(-1.0, 1.0));
        let ui = ui_directions(&sp, &f, &direction_grid(1), 1e12).unwrap();
        assert_eq!(ui.recession.len(), 2);
    }

    #[test]
    fn sole_examples() {
        let sp = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let ray = AtomFunction::constant(&sp, SetRepr::cone(2, vec![vec![1.0, 0.0]]));
        assert!(compact_sole_test(&sp, &ray, &[1.0, 0.0], 1.0).unwrap().pass);
        let line = AtomFunction::constant(&sp, SetRepr::full_space(1));
        let v = compact_sole_test(&sp, &line, &[1.0], 5.0).unwrap();
        assert!(!v.pass);
        assert_eq!(v.witness.unwrap().element, vec![-1.0]);
        let zero = AtomFunction::constant(&sp, SetRepr::origin(2));
        assert!(compact_sole_test(&sp, &zero, &[0.3, -2.0], 0.1).unwrap().pass);
    }

    #[test]
    fn primal_sole_examples() {
        let sp = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let f = AtomFunction::constant(&sp, iv(0.0, 2.0));
        assert!(compact_sole_primal_test(&sp, &f, &[1.0], 1.0).unwrap().pass);
        assert!(!compact_sole_primal_test(&sp, &f, &[1.0], 1.5).unwrap().pass);
    }

    #[test]
    fn hausdorff_examples() {
        assert_eq!(hausdorff_distance(&iv(0.0, 1.0), &iv(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(hausdorff_distance(&iv(0.0, 1.0), &iv(0.0, 2.0)).unwrap(), 1.0);
        let cloud = SetRepr::cloud(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.2, 0.2]],
            vec![],
        );
        let hull_vertices = SetRepr::cloud(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]], vec![]);
        assert_eq!(hausdorff_distance(&cloud.hull(), &hull_vertices.hull()).unwrap(), 0.0);
    }

    #[test]
    fn separating_direction_for_outside_point() {
        let m = SetRepr::interval(Some(0.0), None).membership(&[-0.1], 1e-9);
        assert!(!m.inside);
        assert_eq!(m.separating_direction, Some(vec![-1.0]));
        assert!((m.margin + 0.1).abs() < 1e-15);
    }

    #[test]
    fn triangle_projection() {
        let t = SetRepr::convex(2, vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0]], vec![]);
        let (d, q) = t.distance(&[2.0, 2.0]);
        assert!((d - 2f64.sqrt()).abs() < 1e-8, "{d} {q:?}");
        assert!(t.distance(&[0.5, 0.5]).0 < 1e-9);
    }
}
