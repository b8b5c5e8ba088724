//! Upper-estimate inclusion checks for the subdifferentials of `E_f`.
//!
//! The checks compare a pointwise estimate of `∂E_f(x)` (the left side) with
//! the set assembled from the per-atom subdifferentials at `x`, the polar of
//! the uniformly integrable directions of a cone field `C`, and `W^⊥`. Every
//! inclusion is tested on sample points with a margin; OUT samples carry a
//! separating direction `u` with `⟨u, y⟩ > σ_RHS(u)`.
//!
//! In `ℝ^d` the intersection over finite-dimensional subspaces `W` is attained
//! by `W = ℝ^d`. Smaller bases are accepted and reported separately.

use crate::bp_sequences::{SeminormSpec, SequenceBundle};
use crate::error::{Error, Result};
use crate::extended::csum;
use crate::integrand::{functional_oracle, integral_value, integrated_gradient, Integrand, SampledFunction};
use crate::measure_space::{AtomFunction, MeasureSpace};
use crate::setvalued::{aumann_integral, minkowski_sum, pitch, polar_cone, ui_directions, ui_grid, SetField, SetRepr};
use crate::subdiff_point::{
    all_estimates, default_lambdas, limiting_estimate, limiting_resolution, singular_estimate, ProbeSchedule,
};
use crate::vecops::{self, dot, norm, probe_directions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Label attached to every report built on a single full basis.
pub const FINITE_DIMENSIONAL_REDUCTION: &str =
    "finite-dimensional reduction: the intersection over subspaces W is taken at W = R^d";

/// Where the left-hand side `E_f` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LhsSource {
    /// Closed form of the continuum functional when available, else the atom sum.
    #[default]
    Reference,
    /// Always the weighted atom sum.
    AtomSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    pub schedule: ProbeSchedule,
    /// Membership tolerance before the direction-grid pitch is added.
    pub tol: f64,
    /// Lengths along recession directions at which unbounded sets are sampled.
    pub ray_lengths: Vec<f64>,
    /// `u` belongs to `UI(C)` when `Σ weight·σ_{C(t)}(u)⁺` is at most this.
    pub ui_budget: f64,
    pub lhs: LhsSource,
    pub seed: u64,
    /// Grid points per line for ball sampling.
    pub line_samples: usize,
    pub random_samples: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            schedule: ProbeSchedule::default(),
            tol: 1e-6,
            ray_lengths: vec![1.0, 10.0],
            ui_budget: 1e12,
            lhs: LhsSource::Reference,
            seed: 0,
            line_samples: 33,
            random_samples: 8,
        }
    }
}

impl EstimateOptions {
    pub fn tolerance(&self, dim: usize) -> f64 {
        self.tol + pitch(dim)
    }
}

/// First violation found by [`hypothesis_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisWitness {
    pub tag: String,
    /// The sampled point `x'`.
    pub point: Vec<f64>,
    /// An element of `∂̂f(t, x')` outside `K(t)𝔹 + C(t)`.
    pub subgradient: Vec<f64>,
    /// `K(t) − dist(subgradient, C(t))`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisVerdict {
    pub pass: bool,
    pub worst_margin: f64,
    /// `Σ weight·K(t)`.
    pub integrated_bound: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub witness: Option<HypothesisWitness>,
}

/// Points of `ball(x, radius)`: `x`, a grid along each axis (1-D: the whole
/// ball) or on shells along probe directions, and seeded random points.
fn ball_samples(x: &[f64], radius: f64, line: usize, random: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = x.len();
    let n = line.max(2);
    let mut pts = vec![x.to_vec()];
    if d == 1 {
        pts.extend((0..=n).map(|k| vec![x[0] - radius + 2.0 * radius * k as f64 / n as f64]));
    } else {
        for level in 0..4 {
            let r = radius * 0.5f64.powi(level);
            for u in probe_directions(d, 16) {
                pts.push(vecops::axpy(x, r, &u));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Some(u) = vecops::normalized(&u) else {
            continue;
        };
        let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
        pts.push(vecops::axpy(x, r, &u));
    }
    pts
}

fn check_point(f: &dyn Integrand, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("point must be finite".into()));
    }
    Ok(())
}

fn frechet_at(f: &dyn Integrand, atom: &crate::Atom, x: &[f64]) -> Result<SetRepr> {
    f.frechet_subdifferential(atom, x)
        .ok_or_else(|| Error::MissingOracle(format!("subdifferential of `{}` at atom `{}`", f.name(), atom.tag)))
}

/// Smallest margin `K − dist(s, C)` over `s ∈ S`, with the element attaining
/// it. Recession directions of `S` outside the recession cone of `C` are
/// followed until they leave `K𝔹 + C`.
fn inclusion_margin(s: &SetRepr, c: &SetRepr, k: f64) -> (f64, Vec<f64>) {
    let mut worst = (f64::INFINITY, vec![0.0; s.dim]);
    for p in &s.points {
        let m = k - c.distance(p).0;
        if m < worst.0 {
            worst = (m, p.clone());
        }
    }
    let rec_c = SetRepr::cone(c.dim, c.recession.clone());
    let base = s.points.first().cloned().unwrap_or_else(|| vec![0.0; s.dim]);
    for r in &s.recession {
        if rec_c.distance(r).0 <= 1e-9 {
            continue;
        }
        let mut t = 1.0;
        loop {
            let y = vecops::axpy(&base, t, r);
            let m = k - c.distance(&y).0;
            if m < 0.0 || t > 1e18 {
                if m < worst.0 {
                    worst = (m, y);
                }
                break;
            }
            t *= 2.0;
        }
    }
    worst
}

/// Checks `∂̂f(t, x') ⊆ K(t)𝔹 + C(t)` for every positive-weight atom and every
/// sampled `x'` in `ball(x, eps)`.
pub fn hypothesis_check(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    eps: f64,
    k: &AtomFunction<f64>,
    field: &SetField,
    opts: &EstimateOptions,
) -> Result<HypothesisVerdict> {
    check_point(f, x)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let samples = ball_samples(x, eps, opts.line_samples, opts.random_samples, opts.seed);
    let mut worst_margin = f64::INFINITY;
    let mut witness = None;
    let mut bound_terms = Vec::with_capacity(space.len());
    let mut tol_max: f64 = 0.0;
    for atom in space.atoms() {
        let kt = *k.get(&atom.tag)?;
        let c = field.get(&atom.tag)?;
        if c.dim != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: c.dim,
            });
        }
        if atom.weight == 0.0 {
            continue;
        }
        if !(kt >= 0.0) {
            return Err(Error::InvalidArgument(format!("K is negative or NaN at atom `{}`", atom.tag)));
        }
        bound_terms.push(atom.weight * kt);
        let tol = 1e-9 * (1.0 + kt);
        tol_max = tol_max.max(tol);
        for xp in &samples {
            let s = frechet_at(f, atom, xp)?;
            if s.is_empty() {
                continue;
            }
            let (m, el) = inclusion_margin(&s, c, kt);
            if m < worst_margin {
                worst_margin = m;
                if m < -tol {
                    witness = Some(HypothesisWitness {
                        tag: atom.tag.clone(),
                        point: xp.clone(),
                        subgradient: el,
                        margin: m,
                    });
                }
            }
        }
    }
    let integrated_bound = csum(bound_terms);
    Ok(HypothesisVerdict {
        pass: witness.is_none() && integrated_bound.is_finite(),
        worst_margin,
        integrated_bound,
        samples: samples.len(),
        tolerance: tol_max,
        witness,
    })
}

/// `K(t)` from the Lipschitz oracle of each atom on `ball(x, radius)`.
pub fn lipschitz_envelope(space: &MeasureSpace, f: &dyn Integrand, x: &[f64], radius: f64) -> Result<AtomFunction<f64>> {
    check_point(f, x)?;
    let mut out = std::collections::BTreeMap::new();
    for atom in space.atoms() {
        let l = f
            .lipschitz_on_ball(atom, x, radius)
            .ok_or_else(|| Error::MissingOracle(format!("Lipschitz constant of `{}` at atom `{}`", f.name(), atom.tag)))?;
        out.insert(atom.tag.clone(), l);
    }
    Ok(AtomFunction(out))
}

/// `K(t) = 1.1·sup dist(∂̂f(t, x'), C(t))` over a dense sample of
/// `ball(x, radius)` (801 points in 1-D), or `+∞` when a subdifferential
/// leaves `C(t)` along a recession direction.
pub fn excess_envelope(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    radius: f64,
    field: &SetField,
) -> Result<AtomFunction<f64>> {
    check_point(f, x)?;
    let samples = ball_samples(x, radius, 800, 0, 0);
    let mut out = std::collections::BTreeMap::new();
    for atom in space.atoms() {
        let c = field.get(&atom.tag)?;
        let rec_c = SetRepr::cone(c.dim, c.recession.clone());
        let mut sup: f64 = 0.0;
        for xp in &samples {
            let s = frechet_at(f, atom, xp)?;
            if s.recession.iter().any(|r| rec_c.distance(r).0 > 1e-9) {
                sup = f64::INFINITY;
                break;
            }
            for p in &s.points {
                sup = sup.max(c.distance(p).0);
            }
        }
        out.insert(atom.tag.clone(), 1.1 * sup);
    }
    Ok(AtomFunction(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubdiffKind {
    Limiting,
    Singular,
    Clarke,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOrigin {
    /// Sampled from the estimate of `∂E_f(x)`.
    Lhs,
    /// Supplied by the caller.
    Candidate,
}

/// Membership of one tested subgradient in one right-hand side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberCheck {
    pub subgradient: Vec<f64>,
    pub origin: SampleOrigin,
    /// Index into the report's bases.
    pub basis: usize,
    pub inside: bool,
    /// `−dist(subgradient, RHS)`.
    pub margin: f64,
    pub separating_direction: Option<Vec<f64>>,
    /// `⟨u, y⟩ − σ_RHS(u)` for the separating direction `u`; positive
    /// re-checks the OUT verdict.
    pub separation_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub kind: SubdiffKind,
    pub point: Vec<f64>,
    pub hypothesis: Option<HypothesisVerdict>,
    pub lhs: SetRepr,
    /// One right-hand side per basis.
    pub estimate_set: Vec<SetRepr>,
    pub intersection_bases: Vec<Vec<Vec<f64>>>,
    pub membership: Vec<MemberCheck>,
    /// `tol + pitch + resolution_slack`.
    pub tolerance: f64,
    /// Drift of the sampled LHS subgradients toward their limits.
    pub resolution_slack: f64,
    /// Every LHS sample is IN every right-hand side.
    pub pass: bool,
    /// The LHS sample with the most negative margin, when `pass` is false.
    pub witness: Option<MemberCheck>,
    pub resolution: String,
    pub reduction: String,
}

impl EstimateReport {
    pub fn with_hypothesis(mut self, h: HypothesisVerdict) -> Self {
        self.hypothesis = Some(h);
        self
    }

    pub fn hypothesis_ok(&self) -> Option<bool> {
        self.hypothesis.as_ref().map(|h| h.pass)
    }

    /// Membership records of one subgradient, across all bases.
    pub fn checks_for(&self, y: &[f64]) -> Vec<&MemberCheck> {
        self.membership
            .iter()
            .filter(|m| vecops::dist(&m.subgradient, y) <= 1e-12)
            .collect()
    }
}

/// Points of `s` plus `p + L·r` for every point `p`, recession `r` and length `L`.
pub fn sample_set(s: &SetRepr, ray_lengths: &[f64]) -> Vec<Vec<f64>> {
    let mut out = s.points.clone();
    for p in &s.points {
        for r in &s.recession {
            for l in ray_lengths {
                out.push(vecops::axpy(p, *l, r));
            }
        }
    }
    out
}

fn lhs_oracle<'a>(space: &'a MeasureSpace, f: &'a dyn Integrand, src: LhsSource) -> Box<dyn Fn(&[f64]) -> f64 + 'a> {
    match src {
        LhsSource::Reference => Box::new(functional_oracle(space, f)),
        LhsSource::AtomSum => Box::new(move |y: &[f64]| integral_value(space, f, y).map_or(f64::NAN, |v| v.value.to_f64())),
    }
}

fn per_atom_field(space: &MeasureSpace, f: &dyn Integrand, x: &[f64], kind: SubdiffKind) -> Result<SetField> {
    let mut out = std::collections::BTreeMap::new();
    for atom in space.atoms() {
        let s = match kind {
            SubdiffKind::Singular => f.singular_subdifferential(atom, x),
            _ => f.limiting_subdifferential(atom, x),
        }
        .ok_or_else(|| Error::MissingOracle(format!("{kind:?} subdifferential of `{}` at atom `{}`", f.name(), atom.tag)))?;
        out.insert(atom.tag.clone(), s);
    }
    Ok(AtomFunction(out))
}

/// `UI(C)^-` on the default grid for the field.
pub fn ui_polar(space: &MeasureSpace, field: &SetField, dim: usize, budget: f64) -> Result<SetRepr> {
    let ui = ui_directions(space, field, &ui_grid(field, dim)?, budget)?;
    polar_cone(&ui)
}

/// `W^⊥` as a cone, from a basis of `W`.
pub fn orthogonal_cone(basis: &SeminormSpec, dim: usize) -> Result<SetRepr> {
    basis.validate()?;
    if basis.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: basis.dim(),
        });
    }
    let q = vecops::orthonormalize(&basis.directions);
    let gens = vecops::orthogonal_complement(&q, dim)
        .into_iter()
        .flat_map(|v| [vecops::scale(&v, -1.0), v])
        .collect();
    Ok(SetRepr::cone(dim, gens))
}

fn check_members(
    samples: &[(Vec<f64>, SampleOrigin)],
    rhs: &[SetRepr],
    tol: f64,
) -> (Vec<MemberCheck>, bool, Option<MemberCheck>) {
    let mut out = vec![];
    let mut witness: Option<MemberCheck> = None;
    for (b, set) in rhs.iter().enumerate() {
        for (y, origin) in samples {
            let m = set.membership(y, tol);
            let gap = m.separating_direction.as_ref().map(|u| dot(u, y) - set.support(u));
            let rec = MemberCheck {
                subgradient: y.clone(),
                origin: *origin,
                basis: b,
                inside: m.inside,
                margin: m.margin,
                separating_direction: m.separating_direction,
                separation_gap: gap,
            };
            if !rec.inside && *origin == SampleOrigin::Lhs && witness.as_ref().is_none_or(|w| rec.margin < w.margin) {
                witness = Some(rec.clone());
            }
            out.push(rec);
        }
    }
    let pass = witness.is_none();
    (out, pass, witness)
}

fn tagged(lhs: &[Vec<f64>], candidates: &[Vec<f64>]) -> Vec<(Vec<f64>, SampleOrigin)> {
    lhs.iter()
        .map(|y| (y.clone(), SampleOrigin::Lhs))
        .chain(candidates.iter().map(|y| (y.clone(), SampleOrigin::Candidate)))
        .collect()
}

fn default_bases(dim: usize, bases: &[SeminormSpec]) -> Vec<SeminormSpec> {
    if bases.is_empty() {
        vec![SeminormSpec::full(dim)]
    } else {
        bases.to_vec()
    }
}

fn empty_report(kind: SubdiffKind, x: &[f64], tol: f64, sched: &ProbeSchedule) -> EstimateReport {
    EstimateReport {
        kind,
        point: x.to_vec(),
        hypothesis: None,
        lhs: SetRepr::empty(x.len()),
        estimate_set: vec![],
        intersection_bases: vec![],
        membership: vec![],
        tolerance: tol,
        resolution_slack: 0.0,
        pass: true,
        witness: None,
        resolution: format!("{}; E_f is +inf at x, both sides empty", sched.resolution()),
        reduction: FINITE_DIMENSIONAL_REDUCTION.into(),
    }
}

#[allow(clippy::too_many_arguments)]
fn upper_estimate(
    kind: SubdiffKind,
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    field: &SetField,
    bases: &[SeminormSpec],
    candidates: &[Vec<f64>],
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    check_point(f, x)?;
    let d = x.len();
    let base_tol = opts.tolerance(d);
    let ef = lhs_oracle(space, f, opts.lhs);
    let fx = ef(x);
    if fx.is_nan() {
        return Err(Error::InvalidArgument("E_f is NaN at x".into()));
    }
    if fx == f64::INFINITY {
        return Ok(empty_report(kind, x, base_tol, &opts.schedule));
    }
    let lhs = match kind {
        SubdiffKind::Limiting => limiting_estimate(&ef, x, &opts.schedule)?,
        SubdiffKind::Singular => singular_estimate(&ef, x, &opts.schedule, &default_lambdas(opts.schedule.radii.len()))?,
        SubdiffKind::Clarke => all_estimates(&ef, x, &opts.schedule)?.clarke,
    };
    let resolution_slack = limiting_resolution(&ef, x, &opts.schedule)?;
    let tol = base_tol + resolution_slack;
    let polar = ui_polar(space, field, d, opts.ui_budget)?;
    let (rhs, used): (Vec<SetRepr>, Vec<SeminormSpec>) = match kind {
        SubdiffKind::Clarke => {
            let lim = aumann_integral(space, &per_atom_field(space, f, x, SubdiffKind::Limiting)?)?;
            let sing = aumann_integral(space, &per_atom_field(space, f, x, SubdiffKind::Singular)?)?;
            let s = minkowski_sum(&minkowski_sum(&lim, &sing)?, &polar)?.hull();
            (vec![s], vec![SeminormSpec::full(d)])
        }
        _ => {
            let base = aumann_integral(space, &per_atom_field(space, f, x, kind)?)?;
            let core = minkowski_sum(&base, &polar)?;
            let used = default_bases(d, bases);
            let rhs = used
                .iter()
                .map(|b| minkowski_sum(&core, &orthogonal_cone(b, d)?))
                .collect::<Result<Vec<_>>>()?;
            (rhs, used)
        }
    };
    let samples = tagged(&sample_set(&lhs, &opts.ray_lengths), candidates);
    let (membership, pass, witness) = check_members(&samples, &rhs, tol);
    let reduction = if used.len() == 1 && used[0].directions.len() == d {
        FINITE_DIMENSIONAL_REDUCTION.to_string()
    } else {
        format!("{FINITE_DIMENSIONAL_REDUCTION}; {} bases checked", used.len())
    };
    Ok(EstimateReport {
        kind,
        point: x.to_vec(),
        hypothesis: None,
        lhs,
        estimate_set: rhs,
        intersection_bases: used.into_iter().map(|b| b.directions).collect(),
        membership,
        tolerance: tol,
        resolution_slack,
        pass,
        witness,
        resolution: opts.schedule.resolution(),
        reduction,
    })
}

/// `∂E_f(x) ⊆ ∫∂f(t, x)dμ + UI(C)^- + W^⊥` on samples, one right-hand side
/// per basis of `W` (default: the full space). `candidates` are extra points
/// tested against the right-hand sides without affecting `pass`.
pub fn limiting_upper_estimate(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    field: &SetField,
    bases: &[SeminormSpec],
    candidates: &[Vec<f64>],
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    upper_estimate(SubdiffKind::Limiting, space, f, x, field, bases, candidates, opts)
}

/// `∂^∞E_f(x) ⊆ ∫∂^∞f(t, x)dμ + UI(C)^- + W^⊥` on samples.
pub fn singular_upper_estimate(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    field: &SetField,
    bases: &[SeminormSpec],
    candidates: &[Vec<f64>],
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    upper_estimate(SubdiffKind::Singular, space, f, x, field, bases, candidates, opts)
}

/// Clarke hull of the `E_f` estimates inside
/// `conv(∫∂f + ∫∂^∞f + UI(C)^-)`, tested on vertices and ray samples.
pub fn clarke_upper_estimate(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    field: &SetField,
    candidates: &[Vec<f64>],
    opts: &EstimateOptions,
) -> Result<EstimateReport> {
    upper_estimate(SubdiffKind::Clarke, space, f, x, field, &[], candidates, opts)
}

/// Hausdorff distance between the limiting right-hand side built from
/// `UI(C)^-` and the one with the constant cone `C` itself.
pub fn constant_cone_reduction_gap(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    cone: &SetRepr,
    opts: &EstimateOptions,
) -> Result<f64> {
    check_point(f, x)?;
    let d = x.len();
    let field = AtomFunction::constant(space, cone.clone());
    let base = aumann_integral(space, &per_atom_field(space, f, x, SubdiffKind::Limiting)?)?;
    let via_ui = minkowski_sum(&base, &ui_polar(space, &field, d, opts.ui_budget)?)?;
    let direct = minkowski_sum(&base, cone)?;
    crate::setvalued::hausdorff_distance(&via_ui, &direct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    NotApplicable,
}

/// Gradient continuity of `E_f` from central differences on lines through `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessCheck {
    pub pass: bool,
    /// Largest gradient change between neighbours on the coarse and fine grids.
    pub coarse_jump: f64,
    pub fine_jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzVerdict {
    pub status: VerdictStatus,
    pub hypothesis: HypothesisVerdict,
    /// Largest difference quotient of `E_f` on `ball(x, eps/2)`.
    pub lipschitz_constant: f64,
    /// `Σ weight·K(t)`.
    pub bound: f64,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    /// Present when every per-atom limiting estimate is a singleton on the samples.
    pub smoothness: Option<SmoothnessCheck>,
}

/// Local Lipschitz verdict for `E_f` when `∂̂f(t, ·) ⊆ K(t)𝔹` on `ball(x, eps)`.
pub fn lipschitz_differentiability_verdict(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    eps: f64,
    k: &AtomFunction<f64>,
    opts: &EstimateOptions,
) -> Result<LipschitzVerdict> {
    check_point(f, x)?;
    let d = x.len();
    let zero = AtomFunction::constant(space, SetRepr::origin(d));
    let hypothesis = hypothesis_check(space, f, x, eps, k, &zero, opts)?;
    let bound = hypothesis.integrated_bound;
    if !hypothesis.pass {
        return Ok(LipschitzVerdict {
            status: VerdictStatus::NotApplicable,
            hypothesis,
            lipschitz_constant: f64::NAN,
            bound,
            worst_pair: None,
            smoothness: None,
        });
    }
    let ef = lhs_oracle(space, f, opts.lhs);
    let pts = ball_samples(x, eps / 2.0, 2 * opts.line_samples, opts.random_samples, opts.seed ^ 0x9e37);
    let vals: Vec<f64> = pts.iter().map(|p| ef(p)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("E_f is not finite on the ball".into()));
    }
    let mut best = (0.0_f64, None);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let h = vecops::dist(&pts[i], &pts[j]);
            if h < 1e-12 {
                continue;
            }
            let q = (vals[i] - vals[j]).abs() / h;
            if q > best.0 {
                best = (q, Some((pts[i].clone(), pts[j].clone())));
            }
        }
    }
    let singletons = space.atoms().iter().filter(|a| a.weight > 0.0).all(|a| {
        pts.iter().all(|p| {
            f.limiting_subdifferential(a, p)
                .is_some_and(|s| s.points.len() == 1 && s.recession.is_empty())
        })
    });
    let smoothness = singletons.then(|| smoothness_check(&*ef, x, eps / 2.0));
    let status = if best.0 <= bound + opts.tol {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    };
    Ok(LipschitzVerdict {
        status,
        hypothesis,
        lipschitz_constant: best.0,
        bound,
        worst_pair: best.1,
        smoothness,
    })
}

fn fd_gradient(ef: &dyn Fn(&[f64]) -> f64, y: &[f64], h: f64) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let e = vecops::unit(y.len(), i, 1.0);
            (ef(&vecops::axpy(y, h, &e)) - ef(&vecops::axpy(y, -h, &e))) / (2.0 * h)
        })
        .collect()
}

/// Neighbour gradient jumps along the coordinate lines through `x` at 32 and
/// 64 cells; continuous gradients halve the jump, kinks keep it.
fn smoothness_check(ef: &dyn Fn(&[f64]) -> f64, x: &[f64], radius: f64) -> SmoothnessCheck {
    let jump = |cells: usize| {
        let step = 2.0 * radius / cells as f64;
        let h = 1e-4 * step;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..x.len() {
            let e = vecops::unit(x.len(), i, 1.0);
            let grads: Vec<Vec<f64>> = (0..=cells)
                .map(|k| fd_gradient(ef, &vecops::axpy(x, -radius + step * k as f64, &e), h))
                .collect();
            for w in grads.windows(2) {
                worst = worst.max(vecops::dist(&w[0], &w[1]));
                scale = scale.max(norm(&w[0]));
            }
        }
        (worst, scale)
    };
    let (coarse, scale) = jump(32);
    let (fine, _) = jump(64);
    SmoothnessCheck {
        pass: fine <= 1e-6 * (1.0 + scale) || fine <= 0.75 * coarse,
        coarse_jump: coarse,
        fine_jump: fine,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterchangeCheck {
    /// Richardson-extrapolated central difference of `E_f`.
    pub finite_difference: Vec<f64>,
    /// `Σ weight·∇f(t, x0)`.
    pub integrated: Vec<f64>,
    pub residual: f64,
    pub step: f64,
    pub pass: bool,
}

/// Compares the derivative of `E_f` with the integrated per-atom gradients.
pub fn gradient_interchange_check(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x0: &[f64],
    opts: &EstimateOptions,
) -> Result<InterchangeCheck> {
    check_point(f, x0)?;
    let integrated = integrated_gradient(space, f, x0)?;
    let ef = lhs_oracle(space, f, opts.lhs);
    let h = 1e-3 * (1.0 + norm(x0));
    let coarse = fd_gradient(&*ef, x0, h);
    let fine = fd_gradient(&*ef, x0, h / 2.0);
    let fd: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
    if fd.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("E_f is not finite around x0".into()));
    }
    let residual = vecops::dist(&fd, &integrated);
    Ok(InterchangeCheck {
        pass: residual <= 1e-5 * (1.0 + norm(&integrated)),
        finite_difference: fd,
        integrated,
        residual,
        step: h,
    })
}

/// `Σ weight·‖x*‖ ≤ (1 + γ‖e‖)·Σ weight·K + γ·Σ weight·⟨x*, e⟩` for selections
/// `x*(t) ∈ K(t)𝔹 + C(t)` when `C` has the compact sole `(e, γ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L1Bound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn l1_bound(space: &MeasureSpace, x_star: &SampledFunction, k: &AtomFunction<f64>, e: &[f64], gamma: f64) -> Result<L1Bound> {
    if x_star.values.len() != space.len() {
        return Err(Error::InvalidArgument("selection does not match the space".into()));
    }
    let mut norms = vec![];
    let mut ks = vec![];
    let mut pairings = vec![];
    for (a, v) in space.atoms().iter().zip(&x_star.values) {
        norms.push(a.weight * norm(v));
        ks.push(a.weight * k.get(&a.tag)?);
        pairings.push(a.weight * dot(v, e));
    }
    let lhs = csum(norms);
    let rhs = (1.0 + gamma * norm(e)) * csum(ks) + gamma * csum(pairings);
    Ok(L1Bound {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9 * (1.0 + rhs.abs()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FatouVerdict {
    pub status: VerdictStatus,
    /// `Σ weight·‖x*_n‖` per entry.
    pub l1_norms: Vec<f64>,
    pub bounded: bool,
    pub residuals_ok: bool,
    /// Directions whose positive pairings with the selections stay in budget.
    pub direction_cone: SetRepr,
    pub estimate_set: Vec<SetRepr>,
    pub membership: Vec<MemberCheck>,
    pub witness: Option<MemberCheck>,
}

/// Residual level the final bundle entry must reach.
pub const BUNDLE_THRESHOLD: f64 = 1e-3;

/// Bounded in `L¹` along the schedule: finite norms and a last norm at most
/// 1.5 times the largest earlier one.
fn l1_bounded(norms: &[f64]) -> bool {
    if norms.iter().any(|v| !v.is_finite()) {
        return false;
    }
    match norms.split_last() {
        Some((last, rest)) if !rest.is_empty() => {
            let prev = rest.iter().copied().fold(0.0, f64::max);
            *last <= 1.5 * prev.max(1e-12)
        }
        _ => true,
    }
}

/// Checks that the limit subgradient of a bundle lies in
/// `∫∂f(t, x)dμ + D^- + W^⊥`, where `D` collects the directions along which
/// the selections' positive parts stay within `10·(1 + sup_n Σ weight·‖x*_n‖)`.
pub fn fatou_bundle_check(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    bundle: &SequenceBundle,
    bases: &[SeminormSpec],
    opts: &EstimateOptions,
) -> Result<FatouVerdict> {
    check_point(f, x)?;
    let d = x.len();
    let l1_norms: Vec<f64> = bundle.entries.iter().map(|e| e.x_star.lp_norm(space, 1.0)).collect();
    let bounded = l1_bounded(&l1_norms);
    let residuals_ok = bundle.entries.last().is_none_or(|e| {
        let r = &e.residuals;
        [r.r_a, r.r_b.0, r.r_b.1, r.r_c, r.r_d, r.r_e]
            .iter()
            .all(|v| *v <= BUNDLE_THRESHOLD)
    });
    let budget = 10.0 * (1.0 + l1_norms.iter().copied().fold(0.0, f64::max));
    let mut grid = vecops::direction_grid(d);
    for i in 0..d {
        grid.push(vecops::unit(d, i, 1.0));
        grid.push(vecops::unit(d, i, -1.0));
    }
    let kept: Vec<Vec<f64>> = grid
        .into_iter()
        .filter(|u| {
            let total = csum(space.atoms().iter().enumerate().map(|(i, a)| {
                let sup = bundle
                    .entries
                    .iter()
                    .map(|e| dot(&e.x_star.values[i], u).max(0.0))
                    .fold(0.0, f64::max);
                a.weight * sup
            }));
            total <= budget
        })
        .collect();
    let direction_cone = SetRepr::cone(d, kept);
    let base = aumann_integral(space, &per_atom_field(space, f, x, SubdiffKind::Limiting)?)?;
    let core = minkowski_sum(&base, &polar_cone(&direction_cone)?)?;
    let rhs = default_bases(d, bases)
        .iter()
        .map(|b| minkowski_sum(&core, &orthogonal_cone(b, d)?))
        .collect::<Result<Vec<_>>>()?;
    let samples = vec![(bundle.target.clone(), SampleOrigin::Lhs)];
    let (membership, inside, witness) = check_members(&samples, &rhs, opts.tolerance(d));
    let status = if !bounded || !residuals_ok {
        VerdictStatus::NotApplicable
    } else if inside {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    };
    Ok(FatouVerdict {
        status,
        l1_norms,
        bounded,
        residuals_ok,
        direction_cone,
        estimate_set: rhs,
        membership,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{catalog, Params};
    use crate::measure_space::{geometric_grid_unit_interval, make_finite_atoms};
    use crate::setvalued::hausdorff_distance;
    use crate::Atom;

    fn halfline() -> SetRepr {
        SetRepr::cone(1, vec![vec![1.0]])
    }

    fn ex(name: &str) -> std::sync::Arc<dyn Integrand> {
        catalog(name, &Params::new()).unwrap()
    }

    fn small_grid() -> MeasureSpace {
        geometric_grid_unit_interval(200, 0.95).unwrap()
    }

    /// `δ_{0}` on the line.
    struct PointIndicator;

    impl Integrand for PointIndicator {
        fn name(&self) -> &str {
            "point_indicator"
        }
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _atom: &Atom, x: &[f64]) -> f64 {
            if x[0] == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        fn frechet_subdifferential(&self, _atom: &Atom, x: &[f64]) -> Option<SetRepr> {
            Some(if x[0] == 0.0 {
                SetRepr::full_space(1)
            } else {
                SetRepr::empty(1)
            })
        }
    }

    #[test]
    fn hypothesis_examples() {
        let space = small_grid();
        let f = ex("example45a");
        let cone = AtomFunction::constant(&space, halfline());
        let k = excess_envelope(&space, f.as_ref(), &[0.0], 0.5, &cone).unwrap();
        let opts = EstimateOptions::default();
        let h = hypothesis_check(&space, f.as_ref(), &[0.0], 0.5, &k, &cone, &opts).unwrap();
        assert!(h.pass, "{h:?}");
        assert!(h.integrated_bound.is_finite());

        let one = make_finite_atoms(&[("t", 1.0)]).unwrap();
        let sq = catalog("norm_power", &Params::new()).unwrap();
        let kq = lipschitz_envelope(&one, sq.as_ref(), &[0.3], 0.2).unwrap();
        let zero = AtomFunction::constant(&one, SetRepr::origin(1));
        assert!(
            hypothesis_check(&one, sq.as_ref(), &[0.3], 0.2, &kq, &zero, &opts)
                .unwrap()
                .pass
        );

        let big = AtomFunction::constant(&one, 1e6);
        let h = hypothesis_check(&one, &PointIndicator, &[0.0], 0.1, &big, &zero, &opts).unwrap();
        assert!(!h.pass);
        let w = h.witness.unwrap();
        assert!(w.subgradient[0].abs() > 1e6 && w.margin < 0.0);
    }

    #[test]
    fn hypothesis_needs_an_oracle() {
        struct Bare;
        impl Integrand for Bare {
            fn name(&self) -> &str {
                "bare"
            }
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, _atom: &Atom, x: &[f64]) -> f64 {
                x[0].abs()
            }
        }
        let one = make_finite_atoms(&[("t", 1.0)]).unwrap();
        let zero = AtomFunction::constant(&one, SetRepr::origin(1));
        let k = AtomFunction::constant(&one, 1.0);
        let err = hypothesis_check(&one, &Bare, &[0.0], 0.1, &k, &zero, &EstimateOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingOracle(_)));
    }

    #[test]
    fn example45a_inclusion_at_zero() {
        let space = small_grid();
        let f = ex("example45a");
        let cone = AtomFunction::constant(&space, halfline());
        let cands = vec![vec![0.0], vec![1.0], vec![10.0], vec![-0.1]];
        let r = limiting_upper_estimate(&space, f.as_ref(), &[0.0], &cone, &[], &cands, &EstimateOptions::default()).unwrap();
        assert!(r.pass, "{:?}", r.witness);
        for y in [0.0, 1.0, 10.0] {
            assert!(r.lhs.membership(&[y], 1e-9).inside);
            let c = r.checks_for(&[y]);
            assert!(c.iter().all(|m| m.inside && m.margin >= -1e-6));
        }
        let out = r.checks_for(&[-0.1]);
        assert!(!out[0].inside);
        assert_eq!(out[0].separating_direction.as_deref(), Some(&[-1.0][..]));
        assert!(out[0].separation_gap.unwrap() > 0.0);

        let s = singular_upper_estimate(&space, f.as_ref(), &[0.0], &cone, &[], &[], &EstimateOptions::default()).unwrap();
        assert!(s.pass && s.lhs.membership(&[10.0], 1e-9).inside);
    }

    #[test]
    fn example45b_counterexample() {
        let space = small_grid();
        let f = ex("example45b");
        let opts = EstimateOptions::default();
        let zero = AtomFunction::constant(&space, SetRepr::origin(1));
        let r = limiting_upper_estimate(&space, f.as_ref(), &[0.0], &zero, &[], &[], &opts).unwrap();
        assert!(!r.pass);
        let w = r.witness.unwrap();
        assert!((w.subgradient[0] - 1.0).abs() < 1e-6, "{w:?}");
        assert!(w.separation_gap.unwrap() > 0.5);

        let cone = AtomFunction::constant(&space, halfline());
        assert!(
            limiting_upper_estimate(&space, f.as_ref(), &[0.0], &cone, &[], &[], &opts)
                .unwrap()
                .pass
        );
        let c = clarke_upper_estimate(&space, f.as_ref(), &[0.0], &cone, &[], &opts).unwrap();
        assert!(c.pass);
        assert!(c.lhs.membership(&[1.0], 1e-9).inside);
    }

    #[test]
    fn example45b_limiting_set_at_zero_is_the_whole_interval() {
        // E_f = max(x, 0) is convex, so the limiting set at 0 is [0, 1], not just its endpoints.
        let space = small_grid();
        let f = ex("example45b");
        let zero = AtomFunction::constant(&space, SetRepr::origin(1));
        let r = limiting_upper_estimate(&space, f.as_ref(), &[0.0], &zero, &[], &[], &EstimateOptions::default()).unwrap();
        let exact = SetRepr::interval(Some(0.0), Some(1.0));
        assert!(hausdorff_distance(&r.lhs.hull(), &exact).unwrap() < 1e-6);
        assert!(r.lhs.membership(&[0.5], 1e-2).inside);
    }

    #[test]
    fn atom_sum_lhs_agrees_with_the_grid() {
        let space = small_grid();
        let f = ex("example45b");
        let zero = AtomFunction::constant(&space, SetRepr::origin(1));
        let opts = EstimateOptions {
            lhs: LhsSource::AtomSum,
            ..Default::default()
        };
        let r = limiting_upper_estimate(&space, f.as_ref(), &[0.0], &zero, &[], &[], &opts).unwrap();
        assert!(r.pass, "{:?} slack {} lhs {:?}", r.witness, r.resolution_slack, r.lhs.points);
    }

    #[test]
    fn lipschitz_verdicts() {
        let space = small_grid();
        let opts = EstimateOptions::default();
        let b = ex("example45b");
        let k = lipschitz_envelope(&space, b.as_ref(), &[0.0], 0.5).unwrap();
        let v = lipschitz_differentiability_verdict(&space, b.as_ref(), &[0.0], 0.5, &k, &opts).unwrap();
        assert_eq!(v.status, VerdictStatus::Pass);
        assert!(v.lipschitz_constant <= 1.0 + 1e-3 && v.lipschitz_constant > 0.99);

        let a = ex("example45a");
        let cone = AtomFunction::constant(&space, halfline());
        let ka = excess_envelope(&space, a.as_ref(), &[0.0], 0.5, &cone).unwrap();
        let v = lipschitz_differentiability_verdict(&space, a.as_ref(), &[0.0], 0.5, &ka, &opts).unwrap();
        assert_eq!(v.status, VerdictStatus::NotApplicable);
        assert!(v.hypothesis.witness.unwrap().subgradient[0] > 0.0);

        let one = make_finite_atoms(&[("t", 1.0)]).unwrap();
        let sq = catalog("norm_power", &Params::new()).unwrap();
        let (x, eps) = (0.0, 0.2);
        let kq = lipschitz_envelope(&one, sq.as_ref(), &[x], eps).unwrap();
        let v = lipschitz_differentiability_verdict(&one, sq.as_ref(), &[x], eps, &kq, &opts).unwrap();
        assert_eq!(v.status, VerdictStatus::Pass);
        assert!(
            (v.lipschitz_constant - (2.0 * x + eps)).abs() < 0.02,
            "{}",
            v.lipschitz_constant
        );
        assert!(v.smoothness.unwrap().pass);
    }

    #[test]
    fn kink_fails_smoothness() {
        let s = smoothness_check(&|y: &[f64]| y[0].max(0.0), &[0.0], 0.25);
        assert!(!s.pass);
        let s = smoothness_check(&|y: &[f64]| y[0] * y[0], &[0.0], 0.25);
        assert!(s.pass);
    }

    #[test]
    fn interchange_examples() {
        let space = geometric_grid_unit_interval(10_000, 0.99).unwrap();
        let f = ex("example45a");
        let opts = EstimateOptions::default();
        let c = gradient_interchange_check(&space, f.as_ref(), &[1.0], &opts).unwrap();
        assert!((c.finite_difference[0] - 0.5).abs() < 1e-4);
        assert!((c.integrated[0] - 0.5).abs() < 1e-4, "{c:?}");

        let one = make_finite_atoms(&[("t", 1.0)]).unwrap();
        let sq = catalog("norm_power", &Params::new()).unwrap();
        let c = gradient_interchange_check(&one, sq.as_ref(), &[0.7], &opts).unwrap();
        assert!(c.pass && (c.integrated[0] - 1.4).abs() < 1e-12);

        let zero = catalog("separable_quadratic", &Params::from_json(r#"{"default_center": 0}"#).unwrap()).unwrap();
        let c = gradient_interchange_check(&one, zero.as_ref(), &[0.0], &opts).unwrap();
        assert!(c.pass && c.finite_difference[0].abs() < 1e-12);

        let abs = catalog("abs_plus_square", &Params::new()).unwrap();
        assert!(matches!(
            gradient_interchange_check(&one, abs.as_ref(), &[0.0], &opts),
            Err(Error::MissingOracle(_))
        ));
    }

    #[test]
    fn infinite_value_is_vacuous() {
        let one = make_finite_atoms(&[("t", 1.0)]).unwrap();
        let f = catalog("indicator_halfline", &Params::new()).unwrap();
        let zero = AtomFunction::constant(&one, SetRepr::origin(1));
        let r = clarke_upper_estimate(&one, f.as_ref(), &[-1.0], &zero, &[], &EstimateOptions::default()).unwrap();
        assert!(r.pass && r.lhs.is_empty() && r.membership.is_empty());
    }

    #[test]
    fn smaller_subspace_widens_the_estimate() {
        let one = make_finite_atoms(&[("t", 1.0)]).unwrap();
        let f = catalog("norm_power", &Params::from_json(r#"{"dim": 2}"#).unwrap()).unwrap();
        let zero = AtomFunction::constant(&one, SetRepr::origin(2));
        let w = SeminormSpec::new(vec![vec![1.0, 0.0]]).unwrap();
        let cands = vec![vec![0.0, 3.0], vec![3.0, 0.0]];
        let r = limiting_upper_estimate(
            &one,
            f.as_ref(),
            &[0.0, 0.0],
            &zero,
            &[SeminormSpec::full(2), w],
            &cands,
            &EstimateOptions::default(),
        )
        .unwrap();
        assert!(r.pass);
        assert_eq!(r.intersection_bases.len(), 2);
        let a = r.checks_for(&[0.0, 3.0]);
        assert!(!a[0].inside && a[1].inside);
        let b = r.checks_for(&[3.0, 0.0]);
        assert!(!b[0].inside && !b[1].inside);
    }

    #[test]
    fn constant_cone_reduction() {
        let one = make_finite_atoms(&[("a", 0.5), ("b", 1.5)]).unwrap();
        let f = catalog("abs_plus_square", &Params::new()).unwrap();
        for cone in [halfline(), SetRepr::origin(1), SetRepr::cone(1, vec![vec![-1.0]])] {
            let g = constant_cone_reduction_gap(&one, f.as_ref(), &[0.0], &cone, &EstimateOptions::default()).unwrap();
            assert!(g <= 1e-9, "{g}");
        }
    }

    #[test]
    fn fatou_examples() {
        let space = make_finite_atoms(&[("a", 0.5), ("b", 0.5)]).unwrap();
        let f = catalog("abs_plus_square", &Params::new()).unwrap();
        let bundle = crate::bp_sequences::theorem33_bundle(&space, f.as_ref(), &[0.0], &Default::default()).unwrap();
        let v = fatou_bundle_check(&space, f.as_ref(), &[0.0], &bundle, &[], &EstimateOptions::default()).unwrap();
        assert_eq!(v.status, VerdictStatus::Pass, "{v:?}");
        assert!(v.bounded && v.residuals_ok);
        assert!(v.estimate_set[0].membership(&[1.0], 1e-9).inside);

        let one = make_finite_atoms(&[("t", 1.0)]).unwrap();
        let sq = catalog("norm_power", &Params::new()).unwrap();
        let b = SequenceBundle::target_only(vec![0.5], vec![1.0]);
        let v = fatou_bundle_check(&one, sq.as_ref(), &[0.5], &b, &[], &EstimateOptions::default()).unwrap();
        assert_eq!(v.status, VerdictStatus::Pass);
        assert!(v.membership[0].margin.abs() < 1e-12);
    }

    #[test]
    fn unbounded_norms_are_not_applicable() {
        assert!(!l1_bounded(&[1.0, 4.0, 16.0]));
        assert!(l1_bounded(&[1.0, 1.2, 1.1]));
        assert!(!l1_bounded(&[1.0, f64::INFINITY]));
    }

    #[test]
    fn l1_bound_on_a_sole() {
        let space = make_finite_atoms(&[("a", 0.5), ("b", 0.5)]).unwrap();
        let k = AtomFunction::constant(&space, 1.0);
        // C = [0, ∞) with sole (e, γ) = (1, 1); selections h + c
        let x_star = SampledFunction::new(&space, vec![vec![-1.0 + 3.0], vec![0.5 + 10.0]]).unwrap();
        let b = l1_bound(&space, &x_star, &k, &[1.0], 1.0).unwrap();
        assert!(b.holds, "{b:?}");
    }
}
