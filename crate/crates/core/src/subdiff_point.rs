//! Pointwise subdifferential estimates for extended-real functions on `ℝ^d`.
//!
//! All probing happens at a finite resolution given by a [`ProbeSchedule`]:
//! Fréchet quotients are taken at lengths at most the smallest radius, nearby
//! points for limiting and singular estimates are sampled at the other radii.
//! An accepted candidate is a certificate at that resolution.

use crate::error::{Error, Result};
use crate::setvalued::{minkowski_sum, polar_cone, SetKind, SetRepr};
use crate::vecops::{self, dist, dot, norm, probe_directions};
use serde::{Deserialize, Serialize};

/// Scalar oracle on `ℝ^d`; `+∞` allowed.
pub type ScalarFn<'a> = &'a dyn Fn(&[f64]) -> f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeSchedule {
    /// Strictly decreasing; the last one is the Fréchet probe length, the
    /// others are sampling distances for nearby points.
    pub radii: Vec<f64>,
    /// Probe directions for `d ≥ 2` (`d = 1` always uses `±1`).
    pub directions_per_radius: usize,
    /// `c` in the f-attentive window `|f(x') − f(x)| ≤ c·r`.
    pub f_attentive_tolerance: f64,
    /// Quotients above this count as `+∞`; unbounded sets are truncated here.
    pub value_cap: f64,
    /// Distance within which a subgradient at one radius must reappear at the
    /// next one to count as persistent.
    pub persistence_tolerance: f64,
}

impl Default for ProbeSchedule {
    fn default() -> Self {
        Self {
            radii: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            directions_per_radius: 36,
            f_attentive_tolerance: 10.0,
            value_cap: 100.0,
            persistence_tolerance: 1e-2,
        }
    }
}

impl ProbeSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidArgument("radii must be positive and nonempty".into()));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("radii must be strictly decreasing".into()));
        }
        if self.directions_per_radius == 0 {
            return Err(Error::InvalidArgument("directions_per_radius must be at least 1".into()));
        }
        if !(self.value_cap > 0.0) || !(self.f_attentive_tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "value_cap and f_attentive_tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn probe_radius(&self) -> f64 {
        *self.radii.last().expect("validated schedule")
    }

    fn sampling_radii(&self) -> &[f64] {
        &self.radii[..self.radii.len() - 1]
    }

    fn directions(&self, dim: usize) -> Vec<Vec<f64>> {
        probe_directions(dim, self.directions_per_radius)
    }

    /// Human-readable resolution stamp.
    pub fn resolution(&self) -> String {
        format!(
            "radii={:?}, directions={}, cap={}",
            self.radii, self.directions_per_radius, self.value_cap
        )
    }
}

/// Probe lengths below the probe radius.
const PROBE_SCALES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrechetVerdict {
    pub accept: bool,
    /// `min (f(x+h) − f(x) − ⟨x*, h⟩)/‖h‖` over the probes.
    pub worst_quotient: f64,
    pub worst_probe: Vec<f64>,
    /// Certificate resolution.
    pub resolution: String,
}

fn base_value(func: ScalarFn<'_>, x: &[f64]) -> Result<f64> {
    let fx = func(x);
    if fx.is_nan() {
        return Err(Error::InvalidArgument("function is NaN at the base point".into()));
    }
    if !fx.is_finite() {
        return Err(Error::EmptySubdifferential);
    }
    Ok(fx)
}

/// One-sided difference quotients `(f(x + s u) − f(x))/s` for each probe
/// direction `u`. Quotients at consecutive probe lengths are Richardson
/// extrapolated (`2q(s/2) − q(s)`) to remove the first-order curvature term,
/// then minimized; infinite or capped quotients fall back to the plain minimum.
/// The second component is the rounding slack of the quotients.
fn directional_quotients(
    func: ScalarFn<'_>,
    x: &[f64],
    fx: f64,
    sched: &ProbeSchedule,
    radius: f64,
) -> (Vec<(Vec<f64>, f64)>, f64) {
    let mut scale: f64 = fx.abs() + 1.0;
    let quotients = sched
        .directions(x.len())
        .into_iter()
        .map(|u| {
            let raw: Vec<f64> = PROBE_SCALES
                .iter()
                .map(|k| {
                    let s = radius * k;
                    let v = func(&vecops::axpy(x, s, &u));
                    if v.is_nan() {
                        f64::NEG_INFINITY
                    } else {
                        (v - fx) / s
                    }
                })
                .collect();
            let plain = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let q = if raw.iter().all(|q| q.is_finite()) && plain <= sched.value_cap {
                raw.windows(2).map(|w| 2.0 * w[1] - w[0]).fold(f64::INFINITY, f64::min)
            } else {
                plain
            };
            if q.is_finite() {
                scale = scale.max(q.abs() * (norm(x) + radius));
            }
            (u, q)
        })
        .collect();
    let smallest = radius * PROBE_SCALES[PROBE_SCALES.len() - 1];
    (quotients, 8.0 * f64::EPSILON * scale / smallest)
}

/// Fréchet membership of `cand` at `x`: ACCEPT when every probe quotient
/// `(f(x+h) − f(x) − ⟨cand, h⟩)/‖h‖` is at least `−tol`.
pub fn frechet_membership(
    func: ScalarFn<'_>,
    x: &[f64],
    cand: &[f64],
    sched: &ProbeSchedule,
    tol: f64,
) -> Result<FrechetVerdict> {
    sched.validate()?;
    if cand.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: cand.len(),
        });
    }
    let fx = base_value(func, x)?;
    let r = sched.probe_radius();
    let mut worst = (f64::INFINITY, vec![0.0; x.len()]);
    for u in sched.directions(x.len()) {
        for k in PROBE_SCALES {
            let h = vecops::scale(&u, r * k);
            let v = func(&vecops::add(x, &h));
            let q = if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                (v - fx - dot(cand, &h)) / (r * k)
            };
            if q < worst.0 {
                worst = (q, h);
            }
        }
    }
    Ok(FrechetVerdict {
        accept: worst.0 >= -tol,
        worst_quotient: worst.0,
        worst_probe: worst.1,
        resolution: sched.resolution(),
    })
}

/// `{c : ⟨c, u_k⟩ ≤ q_k}` for the probe quotients, intersected with the box
/// `|c_i| ≤ cap`.
#[derive(Debug, Clone)]
struct Polyhedron {
    dim: usize,
    rows: Vec<(Vec<f64>, f64)>,
    finite_normals: Vec<Vec<f64>>,
}

impl Polyhedron {
    fn from_quotients(dim: usize, quotients: Vec<(Vec<f64>, f64)>, slack: f64, cap: f64) -> Self {
        let mut rows = vec![];
        let mut finite_normals = vec![];
        for (u, q) in quotients {
            if q <= cap {
                finite_normals.push(u.clone());
                rows.push((u, q + slack));
            }
        }
        for i in 0..dim {
            rows.push((vecops::unit(dim, i, 1.0), cap));
            rows.push((vecops::unit(dim, i, -1.0), cap));
        }
        Self {
            dim,
            rows,
            finite_normals,
        }
    }

    fn contains(&self, c: &[f64], tol: f64) -> bool {
        self.rows.iter().all(|(a, b)| dot(a, c) <= b + tol * (1.0 + b.abs()))
    }

    fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let n = self.rows.len();
        let mut out = vec![];
        let mut idx: Vec<usize> = (0..d).collect();
        if n < d {
            return out;
        }
        loop {
            let a: Vec<Vec<f64>> = idx.iter().map(|&i| self.rows[i].0.clone()).collect();
            let b: Vec<f64> = idx.iter().map(|&i| self.rows[i].1).collect();
            let c = vecops::solve(a.clone(), b.clone());
            let consistent = a
                .iter()
                .zip(&b)
                .all(|(row, bi)| (dot(row, &c) - bi).abs() <= 1e-9 * (1.0 + bi.abs()));
            if consistent && c.iter().all(|v| v.is_finite()) && self.contains(&c, 1e-9) {
                out.push(c);
            }
            // next combination
            let mut k = d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if idx[k] < n - d + k {
                    idx[k] += 1;
                    for j in k + 1..d {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// `{v : ⟨u_k, v⟩ ≤ 0}` over the finite probe rows.
    fn recession(&self) -> Result<Vec<Vec<f64>>> {
        if self.finite_normals.is_empty() {
            return Ok(SetRepr::full_space(self.dim).recession);
        }
        Ok(polar_cone(&SetRepr::cone(self.dim, self.finite_normals.clone()))?.recession)
    }

    fn to_set(&self) -> Result<SetRepr> {
        let v = self.vertices();
        if v.is_empty() {
            return Ok(SetRepr::empty(self.dim));
        }
        let rec = self.recession()?;
        let capped: Vec<Vec<f64>> = if rec.is_empty() {
            v
        } else {
            // vertices created only by the cap are implied by the directions
            v.into_iter()
                .filter(|p| {
                    !self
                        .rows
                        .iter()
                        .skip(self.rows.len() - 2 * self.dim)
                        .any(|(a, b)| (dot(a, p) - b).abs() <= 1e-9 * (1.0 + b.abs()))
                })
                .collect()
        };
        if capped.is_empty() {
            // the whole capped body touches the cap; keep its closest point to the origin
            let pts = self.vertices();
            let best = pts.into_iter().min_by(|a, b| norm(a).total_cmp(&norm(b))).expect("nonempty");
            return Ok(SetRepr::convex(self.dim, vec![best], rec));
        }
        Ok(SetRepr::convex(self.dim, capped, rec))
    }
}

fn frechet_polyhedron(func: ScalarFn<'_>, x: &[f64], fx: f64, sched: &ProbeSchedule, radius: f64) -> Polyhedron {
    let (q, slack) = directional_quotients(func, x, fx, sched, radius);
    Polyhedron::from_quotients(x.len(), q, slack, sched.value_cap)
}

/// Fréchet subdifferential estimate: the candidates accepted by
/// [`frechet_membership`] with `tol = 0`, which form the polyhedron cut out by
/// the probe quotients. For `d = 1` this is `[d⁻f(x), d⁺f(x)]`. Quotients
/// above `value_cap` count as `+∞` and produce recession directions.
pub fn frechet_estimate(func: ScalarFn<'_>, x: &[f64], sched: &ProbeSchedule) -> Result<SetRepr> {
    sched.validate()?;
    check_dim(x.len())?;
    let fx = base_value(func, x)?;
    frechet_polyhedron(func, x, fx, sched, sched.probe_radius()).to_set()
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > 3 {
        return Err(Error::UnsupportedSet(format!("set estimates need 1 ≤ d ≤ 3, got {d}")));
    }
    Ok(())
}

/// Fréchet sets at the f-attentive sample points of one sampling radius.
struct Level {
    sets: Vec<SetRepr>,
}

fn sample_levels(func: ScalarFn<'_>, x: &[f64], fx: f64, sched: &ProbeSchedule) -> Result<Vec<Level>> {
    let probe = sched.probe_radius();
    let dirs = sched.directions(x.len());
    let mut levels = vec![];
    for &r in sched.sampling_radii() {
        let mut sets = vec![];
        for u in &dirs {
            let xp = vecops::axpy(x, r, u);
            let fp = func(&xp);
            if !fp.is_finite() || (fp - fx).abs() > sched.f_attentive_tolerance * r {
                continue;
            }
            let s = frechet_polyhedron(func, &xp, fp, sched, probe.min(r / 16.0)).to_set()?;
            if !s.is_empty() {
                sets.push(s);
            }
        }
        levels.push(Level { sets });
    }
    Ok(levels)
}

/// Points standing in for a convex piece inside a cloud: a singleton stays a
/// point, a segment or body is sampled at pitch `max(1e-3, extent/2000)`, and
/// each recession direction extends the sampled part by one unit.
fn discretize_piece(s: &SetRepr) -> Vec<Vec<f64>> {
    if s.points.len() <= 1 && s.recession.is_empty() {
        return s.points.clone();
    }
    let d = s.dim;
    let mut anchors = s.points.clone();
    for p in &s.points {
        for r in &s.recession {
            anchors.push(vecops::add(p, r));
        }
    }
    let lo: Vec<f64> = (0..d)
        .map(|i| anchors.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..d)
        .map(|i| anchors.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let extent = (0..d).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let per_axis = match d {
        1 => 2000,
        2 => 60,
        _ => 16,
    };
    let pitch = (extent / per_axis as f64).max(1e-3);
    let counts: Vec<usize> = (0..d).map(|i| ((hi[i] - lo[i]) / pitch).ceil() as usize + 1).collect();
    let body = SetRepr::convex(d, anchors.clone(), vec![]);
    let mut out = anchors;
    let total: usize = counts.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        let mut p = vec![0.0; d];
        for i in 0..d {
            let k = rem % counts[i];
            rem /= counts[i];
            p[i] = (lo[i] + pitch * k as f64).min(hi[i]);
        }
        if d == 1 || body.distance(&p).0 <= 1e-12 {
            out.push(p);
        }
    }
    out
}

fn union_cloud(dim: usize, pieces: &[SetRepr]) -> SetRepr {
    let mut pts = vec![];
    let mut rec = vec![];
    for p in pieces {
        pts.extend(discretize_piece(p));
        rec.extend(p.recession.iter().cloned());
    }
    SetRepr::cloud(dim, pts, rec)
}

/// Pieces of `level` that reappear (within the persistence tolerance) among
/// the pieces of `previous`.
fn persistent(level: &Level, previous: &Level, tol: f64) -> Vec<SetRepr> {
    level
        .sets
        .iter()
        .filter(|s| s.points.iter().all(|p| previous.sets.iter().any(|t| t.distance(p).0 <= tol)))
        .cloned()
        .collect()
}

/// Limiting subdifferential estimate: Fréchet estimate at `x` united with the
/// persistent Fréchet estimates at f-attentive points of the two smallest
/// sampling radii. Returned as a point cloud.
pub fn limiting_estimate(func: ScalarFn<'_>, x: &[f64], sched: &ProbeSchedule) -> Result<SetRepr> {
    sched.validate()?;
    check_dim(x.len())?;
    let fx = base_value(func, x)?;
    let mut pieces = vec![frechet_polyhedron(func, x, fx, sched, sched.probe_radius()).to_set()?];
    let levels = sample_levels(func, x, fx, sched)?;
    let n = levels.len();
    if n >= 2 {
        pieces.extend(persistent(&levels[n - 1], &levels[n - 2], sched.persistence_tolerance));
        pieces.extend(persistent(&levels[n - 2], &levels[n - 1], sched.persistence_tolerance));
    } else if n == 1 {
        pieces.extend(levels[0].sets.iter().cloned());
    }
    pieces.retain(|p| !p.is_empty());
    Ok(union_cloud(x.len(), &pieces))
}

/// How far the nearby subgradients kept by [`limiting_estimate`] may sit from
/// their limits: the largest distance from a persistent piece at one of the
/// two smallest sampling radii to the nearest piece at the other, scaled by
/// `r_big/(r_big − r_small)` to extrapolate the drift to radius 0 and by 1.25
/// for the width of the probed sets. Kinks give rounding-level values; smooth curvature gives
/// about `1.25·‖∇²f‖·r_big`.
pub fn limiting_resolution(func: ScalarFn<'_>, x: &[f64], sched: &ProbeSchedule) -> Result<f64> {
    sched.validate()?;
    check_dim(x.len())?;
    let fx = base_value(func, x)?;
    let levels = sample_levels(func, x, fx, sched)?;
    let radii = sched.sampling_radii();
    let n = levels.len();
    if n < 2 {
        return Ok(0.0);
    }
    let (big, small) = (radii[n - 2], radii[n - 1]);
    let drift = |a: &Level, b: &Level| {
        persistent(a, b, sched.persistence_tolerance)
            .iter()
            .flat_map(|s| s.points.iter())
            .map(|p| b.sets.iter().map(|t| t.distance(p).0).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let worst = drift(&levels[n - 1], &levels[n - 2]).max(drift(&levels[n - 2], &levels[n - 1]));
    Ok(1.25 * worst * big / (big - small))
}

/// `{1, 1/2, 1/4, ...}` with `n` entries.
pub fn default_lambdas(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5f64.powi(i as i32)).collect()
}

/// Singular subdifferential estimate: the cone generated by the recession
/// directions of the Fréchet estimates at `x` and at nearby f-attentive points,
/// plus the directions of subgradients whose scaled norms `λ_k‖x*_k‖` do not
/// decay along the sampling radii.
pub fn singular_estimate(func: ScalarFn<'_>, x: &[f64], sched: &ProbeSchedule, lambdas: &[f64]) -> Result<SetRepr> {
    sched.validate()?;
    check_dim(x.len())?;
    if lambdas.windows(2).any(|w| w[1] >= w[0]) || lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::InvalidArgument("lambdas must be positive and decreasing".into()));
    }
    let fx = base_value(func, x)?;
    let d = x.len();
    let mut gens: Vec<Vec<f64>> = frechet_polyhedron(func, x, fx, sched, sched.probe_radius())
        .to_set()?
        .recession;
    let levels = sample_levels(func, x, fx, sched)?;
    for l in &levels {
        for s in &l.sets {
            gens.extend(s.recession.iter().cloned());
        }
    }
    // largest subgradient per level, scaled by the matching lambda
    let peaks: Vec<Option<(f64, Vec<f64>)>> = levels
        .iter()
        .zip(lambdas)
        .map(|(l, lam)| {
            l.sets
                .iter()
                .flat_map(|s| s.points.iter())
                .map(|p| (lam * norm(p), p.clone()))
                .max_by(|a, b| a.0.total_cmp(&b.0))
        })
        .collect();
    if peaks.len() >= 3 {
        let tail = &peaks[peaks.len() - 3..];
        if let [Some(a), Some(b), Some(c)] = tail {
            let non_decaying = b.0 >= 0.9 * a.0 && c.0 >= 0.9 * b.0 && c.0 > 0.0;
            let aligned = [&a.1, &b.1].iter().all(|p| {
                vecops::normalized(p)
                    .zip(vecops::normalized(&c.1))
                    .map(|(u, v)| dist(&u, &v) < 0.1)
                    .unwrap_or(false)
            });
            if non_decaying && aligned {
                gens.push(c.1.clone());
            }
        }
    }
    Ok(SetRepr::cone(d, gens))
}

/// Closed convex hull of `limiting + singular`, truncated at `cap`.
pub fn clarke_hull(limiting: &SetRepr, singular: &SetRepr, cap: f64) -> Result<SetRepr> {
    if limiting.dim != singular.dim {
        return Err(Error::DimensionMismatch {
            expected: limiting.dim,
            got: singular.dim,
        });
    }
    if limiting.is_empty() || singular.is_empty() {
        return Ok(SetRepr::empty(limiting.dim));
    }
    let s = minkowski_sum(limiting, singular)?.hull().truncated(cap);
    if s.is_empty() {
        return Ok(SetRepr::empty(limiting.dim));
    }
    let mut s = SetRepr::convex(s.dim, s.points, s.recession);
    s.kind = SetKind::ConvexBody;
    Ok(s)
}

/// All four estimates at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointEstimates {
    pub frechet: SetRepr,
    pub limiting: SetRepr,
    pub singular: SetRepr,
    pub clarke: SetRepr,
    pub resolution: String,
}

pub fn all_estimates(func: ScalarFn<'_>, x: &[f64], sched: &ProbeSchedule) -> Result<PointEstimates> {
    let frechet = frechet_estimate(func, x, sched)?;
    let limiting = limiting_estimate(func, x, sched)?;
    let singular = singular_estimate(func, x, sched, &default_lambdas(sched.radii.len()))?;
    let clarke = clarke_hull(&limiting, &singular, sched.value_cap)?;
    Ok(PointEstimates {
        frechet,
        limiting,
        singular,
        clarke,
        resolution: sched.resolution(),
    })
}

/// Quadratic minorant `f(y) ≥ f(x) + ⟨x*, y − x⟩ − c‖y − x‖²` certified on
/// probes up to `radius`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViscosityFit {
    pub c: f64,
    pub radius: f64,
    pub worst_slack: f64,
}

/// Smallest power-of-two `c` in `[2^-20, 2^40]` for which the quadratic
/// minorant holds on all probes at the schedule's radii up to `radius`.
pub fn fit_viscosity(
    func: ScalarFn<'_>,
    x: &[f64],
    x_star: &[f64],
    sched: &ProbeSchedule,
    radius: f64,
) -> Result<Option<ViscosityFit>> {
    sched.validate()?;
    let fx = base_value(func, x)?;
    let mut probes = vec![];
    let dirs = sched.directions(x.len());
    let mut lengths: Vec<f64> = sched.radii.iter().copied().filter(|r| *r <= radius).collect();
    lengths.push(radius);
    for &r in &lengths {
        for u in &dirs {
            for k in [1.0, 0.5] {
                let h = vecops::scale(u, r * k);
                let v = func(&vecops::add(x, &h));
                probes.push((vecops::norm2(&h), v - fx - dot(x_star, &h)));
            }
        }
    }
    for e in -20..=40 {
        let c = 2f64.powi(e);
        let worst = probes.iter().map(|(h2, g)| g + c * h2).fold(f64::INFINITY, f64::min);
        if worst >= -1e-12 * (1.0 + fx.abs()) {
            return Ok(Some(ViscosityFit {
                c,
                radius,
                worst_slack: worst,
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setvalued::hausdorff_distance;

    fn abs(x: &[f64]) -> f64 {
        x[0].abs()
    }

    #[test]
    fn membership_examples() {
        let s = ProbeSchedule::default();
        assert!(frechet_membership(&abs, &[0.0], &[0.5], &s, 1e-9).unwrap().accept);
        let v = frechet_membership(&abs, &[0.0], &[2.0], &s, 1e-9).unwrap();
        assert!(!v.accept);
        assert!(v.worst_probe[0] > 0.0);
        assert!((v.worst_quotient + 1.0).abs() < 1e-12);
        let sq = |x: &[f64]| x[0] * x[0];
        assert!(frechet_membership(&sq, &[1.0], &[2.0], &s, 1e-4).unwrap().accept);
    }

    #[test]
    fn infinite_base_value_is_empty() {
        let f = |x: &[f64]| if x[0] >= 0.0 { 0.0 } else { f64::INFINITY };
        assert_eq!(
            frechet_estimate(&f, &[-1.0], &ProbeSchedule::default()).unwrap_err(),
            Error::EmptySubdifferential
        );
    }

    #[test]
    fn frechet_examples() {
        let s = ProbeSchedule::default();
        let e = frechet_estimate(&abs, &[0.0], &s).unwrap();
        assert!(hausdorff_distance(&e, &SetRepr::interval(Some(-1.0), Some(1.0))).unwrap() < 1e-2);
        let sq = |x: &[f64]| x[0] * x[0];
        let e = frechet_estimate(&sq, &[1.0], &s).unwrap();
        assert!(hausdorff_distance(&e, &SetRepr::point(vec![2.0])).unwrap() < 1e-3);
        let neg = |x: &[f64]| -x[0].abs();
        assert!(frechet_estimate(&neg, &[0.0], &s).unwrap().is_empty());
    }

    #[test]
    fn limiting_examples() {
        let s = ProbeSchedule::default();
        let neg = |x: &[f64]| -x[0].abs();
        let l = limiting_estimate(&neg, &[0.0], &s).unwrap();
        let expect = SetRepr::cloud(1, vec![vec![-1.0], vec![1.0]], vec![]);
        assert!(hausdorff_distance(&l, &expect).unwrap() < 1e-2);
        let l = limiting_estimate(&abs, &[0.0], &s).unwrap();
        assert!(hausdorff_distance(&l.hull(), &SetRepr::interval(Some(-1.0), Some(1.0))).unwrap() < 1e-2);
    }

    #[test]
    fn singular_examples() {
        let s = ProbeSchedule::default();
        let ind = |x: &[f64]| if x[0] >= 0.0 { 0.0 } else { f64::INFINITY };
        let c = singular_estimate(&ind, &[0.0], &s, &default_lambdas(5)).unwrap();
        assert_eq!(c.recession, vec![vec![-1.0]]);
        let c = singular_estimate(&abs, &[0.0], &s, &default_lambdas(5)).unwrap();
        assert!(c.recession.is_empty());
        let root = |x: &[f64]| x[0].max(0.0).sqrt();
        let c = singular_estimate(&root, &[0.0], &s, &default_lambdas(5)).unwrap();
        assert_eq!(c.recession, vec![vec![1.0]]);
    }

    #[test]
    fn clarke_examples() {
        let two = SetRepr::cloud(1, vec![vec![-1.0], vec![1.0]], vec![]);
        let c = clarke_hull(&two, &SetRepr::origin(1), 100.0).unwrap();
        assert!(hausdorff_distance(&c, &SetRepr::interval(Some(-1.0), Some(1.0))).unwrap() < 1e-12);
        let c = clarke_hull(
            &SetRepr::interval(Some(0.0), Some(1.0)),
            &SetRepr::cone(1, vec![vec![1.0]]),
            100.0,
        )
        .unwrap();
        assert!(c.unbounded);
        assert!(hausdorff_distance(&c, &SetRepr::interval(Some(0.0), None)).unwrap() < 1e-12);
        assert!(clarke_hull(&SetRepr::empty(1), &SetRepr::origin(1), 1.0).unwrap().is_empty());
    }

    #[test]
    fn two_dimensional_norm() {
        let s = ProbeSchedule::default();
        let n = |x: &[f64]| norm(x);
        let e = frechet_estimate(&n, &[0.0, 0.0], &s).unwrap();
        // unit disk, approximated by the probe polygon
        for u in crate::vecops::direction_grid(2).iter().step_by(30) {
            assert!((e.support(u) - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn resolution_tracks_curvature() {
        let sched = ProbeSchedule::default();
        let kink = limiting_resolution(&abs, &[0.0], &sched).unwrap();
        assert!(kink < 1e-7, "{kink}");
        let sq = |x: &[f64]| x[0] * x[0];
        let r = limiting_resolution(&sq, &[0.0], &sched).unwrap();
        assert!((2e-4..4e-4).contains(&r), "{r}");
    }

    #[test]
    fn viscosity_constant_for_root() {
        let root = |x: &[f64]| x[0].max(0.0).sqrt();
        let fit = fit_viscosity(&root, &[1.0], &[0.5], &ProbeSchedule::default(), 0.5)
            .unwrap()
            .unwrap();
        assert!(fit.c >= 0.125 && fit.c <= 0.5, "{fit:?}");
    }
}
