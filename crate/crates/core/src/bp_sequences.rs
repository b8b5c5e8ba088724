//! Borwein-Preiss perturbations and the sequence certificates built on them.
//!
//! The perturbation is produced by iterative re-centering: each step minimizes
//! the objective plus `Σ ηᵢ ρ(·, cᵢ)` over the centers found so far and appends
//! the minimizer as the next center, until the minimizer stops moving.
//!
//! The sequence certificates approximate a point `x` and a subgradient `x*` by
//! functions `x_n(·)` and selections `x*_n(·) ∈ ∂̂f(·, x_n(·))` with residuals
//! that must shrink as the penalty weight `n` grows.

use crate::envelope::{default_schedule, minimize_over_region, Region, SolverOptions};
use crate::error::{Error, Result};
use crate::integrand::{functional_oracle, integral_value, value_gap, Integrand, SampledFunction};
use crate::measure_space::{
    augment_with_penalty_atoms, Atom, ConvexConstraint, MeasureSpace, SmoothFunction, CONSTRAINT_ATOM, SMOOTH_ATOM,
};
use crate::minimize::{minimize_interval, multi_start, SearchBox};
use crate::setvalued::SetRepr;
use crate::subdiff_point::{fit_viscosity, frechet_membership, FrechetVerdict, ProbeSchedule, ScalarFn};
use crate::vecops::{self, dist, dot, norm, probe_directions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `ℓ(z) = ‖z‖^p`.
pub fn ell(z: &[f64], p: f64) -> f64 {
    norm(z).powf(p)
}

/// `∇ℓ(z) = p‖z‖^{p−2} z`, zero at the origin.
pub fn ell_gradient(z: &[f64], p: f64) -> Vec<f64> {
    let n = norm(z);
    if n == 0.0 {
        vec![0.0; z.len()]
    } else {
        vecops::scale(z, p * n.powf(p - 2.0))
    }
}

/// Directions `e_1..e_k` of the seminorm `ρ(v) = max |⟨v, e_i⟩|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormSpec {
    pub directions: Vec<Vec<f64>>,
}

impl SeminormSpec {
    pub fn new(directions: Vec<Vec<f64>>) -> Result<Self> {
        let s = Self { directions };
        s.validate()?;
        Ok(s)
    }

    /// Coordinate directions; `ρ` is then the max-norm.
    pub fn full(dim: usize) -> Self {
        Self {
            directions: (0..dim).map(|i| vecops::unit(dim, i, 1.0)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.directions.first() else {
            return Err(Error::InvalidArgument("seminorm needs at least one direction".into()));
        };
        let d = first.len();
        if let Some(e) = self.directions.iter().find(|e| e.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.len(),
            });
        }
        if vecops::orthonormalize(&self.directions).len() != self.directions.len() {
            return Err(Error::InvalidArgument(
                "seminorm directions must be linearly independent".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.directions.first().map_or(0, Vec::len)
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.directions.iter().map(|e| dot(v, e).abs()).fold(0.0, f64::max)
    }

    /// Orthonormal basis of `span{x, e_1, .., e_k}`.
    pub fn span_with(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut vs = vec![x.to_vec()];
        vs.extend(self.directions.iter().cloned());
        vecops::orthonormalize(&vs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpDiagnostics {
    pub iterations: usize,
    pub epsilon: f64,
    pub eta0: f64,
    /// `ρ(start, y)`, bounded by `ε/η₀`.
    pub start_gap: f64,
    pub start_bound: f64,
    /// `(ρ(cᵢ, y), ε/(2^i η₀))` for the centers after the start.
    pub center_gaps: Vec<(f64, f64)>,
    /// Perturbed value at `y` minus the value at the start; at most 0.
    pub decrease: f64,
    pub bounds_hold: bool,
    /// A probe found a value below `f(start) − ε`.
    pub start_not_eps_min: bool,
    /// The iteration budget ran out before the minimizer settled.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BpResult {
    pub y: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub etas: Vec<f64>,
    pub diagnostics: BpDiagnostics,
}

impl BpResult {
    /// `∇φ(z)` for `φ = Σ ηᵢ‖· − cᵢ‖²`.
    pub fn perturbation_gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; z.len()];
        for (c, eta) in self.centers.iter().zip(&self.etas) {
            g = vecops::axpy(&g, 2.0 * eta, &vecops::sub(z, c));
        }
        g
    }
}

fn box_minimize(
    obj: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    radius: f64,
    starts: &[Vec<f64>],
    grid: usize,
    seed: u64,
) -> (Vec<f64>, f64) {
    let d = center.len();
    let tol = (radius * 1e-11).max(1e-15);
    let mut best = starts
        .iter()
        .map(|s| (s.clone(), obj(s)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or_else(|| (center.to_vec(), obj(center)));
    if radius <= 0.0 {
        return best;
    }
    if d == 1 {
        let g = |s: f64| obj(&[s]);
        let (s, v) = minimize_interval(&g, center[0] - radius, center[0] + radius, grid, tol);
        if v < best.1 {
            best = (vec![s], v);
        }
        let w = (2.0 * radius / grid as f64).max(tol);
        let anchor = best.0[0];
        for st in starts.iter().filter(|st| (st[0] - anchor).abs() > 2.0 * w) {
            let (s, v) = minimize_interval(&g, st[0] - w, st[0] + w, 8, tol);
            if v < best.1 {
                best = (vec![s], v);
            }
        }
    } else {
        let mut all = starts.to_vec();
        all.push(center.to_vec());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            all.push(vecops::axpy(center, radius, &u));
        }
        let lower: Vec<f64> = center.iter().map(|c| c - radius).collect();
        let upper: Vec<f64> = center.iter().map(|c| c + radius).collect();
        if let Some(c) = multi_start(
            obj,
            &all,
            radius,
            (radius * 1e-10).max(1e-14),
            Some(SearchBox {
                lower: &lower,
                upper: &upper,
            }),
        ) {
            if c.1 < best.1 {
                best = c;
            }
        }
    }
    best
}

/// Looks for a value below `f(z) − eps` on a neighbourhood of `z`.
fn eps_min_probe(func: ScalarFn<'_>, z: &[f64], eps: f64, radius: f64, seed: u64) -> Option<Vec<f64>> {
    let fz = func(z);
    let below = |v: f64| v < fz - eps - 1e-12 * (1.0 + fz.abs());
    let d = z.len();
    if d == 1 {
        let n = 800;
        (0..=n)
            .map(|k| vec![z[0] - radius + 2.0 * radius * k as f64 / n as f64])
            .find(|y| below(func(y)))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..4000)
            .map(|_| {
                let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                vecops::axpy(z, radius, &u)
            })
            .find(|y| below(func(y)))
    }
}

/// Borwein-Preiss perturbation with gauge `‖a − b‖²` and weights
/// `ηᵢ = η₀·2^{−i}`. Every iterate stays in the ball of radius `√(ε/η₀)`
/// around `start`, which is where the minimizations search.
pub fn borwein_preiss(
    func: ScalarFn<'_>,
    start: &[f64],
    epsilon: f64,
    eta0: f64,
    i_max: usize,
    opts: &SolverOptions,
) -> Result<BpResult> {
    if !(epsilon > 0.0) || !(eta0 > 0.0) || i_max == 0 {
        return Err(Error::InvalidArgument(
            "borwein_preiss needs epsilon > 0, eta0 > 0, i_max ≥ 1".into(),
        ));
    }
    let f0 = func(start);
    if !f0.is_finite() {
        return Err(Error::Precondition("start value must be finite".into()));
    }
    let window = (epsilon / eta0).sqrt();
    let start_not_eps_min = eps_min_probe(func, start, epsilon, (4.0 * window).max(1.0), opts.seed).is_some();
    let mut centers = vec![start.to_vec()];
    let mut etas = vec![eta0];
    let mut y = start.to_vec();
    let mut partial = true;
    let mut iterations = 0;
    for k in 0..i_max {
        iterations = k + 1;
        let perturbed = |z: &[f64]| {
            let v = func(z);
            if v.is_nan() {
                return f64::INFINITY;
            }
            v + centers
                .iter()
                .zip(&etas)
                .map(|(c, e)| e * vecops::norm2(&vecops::sub(z, c)))
                .sum::<f64>()
        };
        let (y_new, _) = box_minimize(&perturbed, start, window * (1.0 + 1e-9), &[y.clone()], opts.grid, opts.seed);
        let moved = dist(&y_new, &y);
        y = y_new;
        if k > 0 && moved <= 1e-10 * (1.0 + window) {
            partial = false;
            break;
        }
        if k + 1 < i_max {
            centers.push(y.clone());
            etas.push(eta0 * 0.5f64.powi(k as i32 + 1));
        }
    }
    let perturbed_at_y = func(&y)
        + centers
            .iter()
            .zip(&etas)
            .map(|(c, e)| e * vecops::norm2(&vecops::sub(&y, c)))
            .sum::<f64>();
    let slack = 1e-12 * (1.0 + f0.abs());
    let start_gap = vecops::norm2(&vecops::sub(start, &y));
    let start_bound = epsilon / eta0;
    let center_gaps: Vec<(f64, f64)> = centers
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| (vecops::norm2(&vecops::sub(c, &y)), epsilon / (2f64.powi(i as i32) * eta0)))
        .collect();
    let bounds_hold =
        start_gap <= start_bound * (1.0 + 1e-9) + slack && center_gaps.iter().all(|(g, b)| *g <= b * (1.0 + 1e-9) + slack);
    Ok(BpResult {
        y,
        centers,
        etas,
        diagnostics: BpDiagnostics {
            iterations,
            epsilon,
            eta0,
            start_gap,
            start_bound,
            center_gaps,
            decrease: perturbed_at_y - f0,
            bounds_hold,
            start_not_eps_min,
            partial: partial || perturbed_at_y > f0 + slack,
        },
    })
}

/// A Fréchet subgradient near an `ε`-minimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsMinSubgradient {
    pub y: Vec<f64>,
    pub y_star: Vec<f64>,
    /// `‖y − z‖`, at most `lam`.
    pub distance: f64,
    /// `|f(y) − f(z)|`, at most `eps`.
    pub value_change: f64,
    /// `‖y*‖` and its bound `4·eps/lam`.
    pub norm: f64,
    pub norm_bound: f64,
    pub membership: FrechetVerdict,
    pub bp: BpDiagnostics,
    /// Some conclusion failed its numerical check.
    pub flagged: bool,
}

/// Fine probe used for membership certificates of computed selections.
pub fn certificate_schedule() -> ProbeSchedule {
    ProbeSchedule {
        radii: vec![1e-7],
        ..ProbeSchedule::default()
    }
}

const CERTIFICATE_TOL: f64 = 1e-6;

/// From an `eps`-minimum `z` of `f_t`, a point `y` within `lam` of `z` and
/// `y* = −∇φ(y) ∈ ∂̂f_t(y)` with `‖y*‖ ≤ 4·eps/lam`, where
/// `φ = Σ ηᵢ(eps/lam²)‖· − cᵢ‖²` and `ηᵢ = 2^{−i}`.
pub fn subgrad_at_eps_min(f_t: ScalarFn<'_>, z: &[f64], eps: f64, lam: f64, opts: &SolverOptions) -> Result<EpsMinSubgradient> {
    if !(eps > 0.0) || !(lam > 0.0) {
        return Err(Error::InvalidArgument("eps and lam must be positive".into()));
    }
    let fz = f_t(z);
    if !fz.is_finite() {
        return Err(Error::Precondition("f_t(z) must be finite".into()));
    }
    if let Some(w) = eps_min_probe(f_t, z, eps, (4.0 * lam).max(1.0), opts.seed) {
        return Err(Error::Precondition(format!("z is not an eps-minimum: f({w:?}) < f(z) - eps")));
    }
    let bp = borwein_preiss(f_t, z, eps, eps / (lam * lam), 20, opts)?;
    let y_star = vecops::scale(&bp.perturbation_gradient(&bp.y), -1.0);
    let y = bp.y.clone();
    let membership = frechet_membership(f_t, &y, &y_star, &certificate_schedule(), CERTIFICATE_TOL)?;
    let distance = dist(&y, z);
    let value_change = (f_t(&y) - fz).abs();
    let nrm = norm(&y_star);
    let norm_bound = 4.0 * eps / lam;
    let flagged = !membership.accept
        || distance > lam * (1.0 + 1e-9)
        || value_change > eps * (1.0 + 1e-9)
        || nrm > norm_bound + 1e-9
        || bp.diagnostics.partial;
    Ok(EpsMinSubgradient {
        y,
        y_star,
        distance,
        value_change,
        norm: nrm,
        norm_bound,
        membership,
        bp: bp.diagnostics,
        flagged,
    })
}

/// Settings for the sequence certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleOptions {
    /// Exponent of the coupling `ℓ = ‖·‖^p`.
    pub p: f64,
    pub n_schedule: Vec<f64>,
    /// Radius `r ∈ (0, 1)` of the ball `B` around the base point; also `η₀`.
    pub radius: f64,
    pub i_max: usize,
    /// Grid intervals for the per-atom minimizations.
    pub inner_grid: usize,
    /// Grid intervals for the search over `u ∈ B` in `d = 1`.
    pub outer_grid: usize,
    /// Tolerance of the Fréchet precondition on `x*` for `E_f`.
    pub precondition_tol: f64,
    pub solver: SolverOptions,
}

impl Default for BundleOptions {
    fn default() -> Self {
        Self {
            p: 1.5,
            n_schedule: default_schedule(),
            radius: 0.5,
            i_max: 20,
            inner_grid: 64,
            outer_grid: 64,
            precondition_tol: 1e-3,
            solver: SolverOptions::default(),
        }
    }
}

impl BundleOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Error::Config {
            field: field.into(),
            reason: reason.into(),
        };
        if !(self.p > 1.0) {
            return Err(bad("p", "must be > 1"));
        }
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(bad("radius", "must lie in (0, 1)"));
        }
        if self.n_schedule.is_empty()
            || self.n_schedule.iter().any(|n| !(*n > 0.0) || !n.is_finite())
            || self.n_schedule.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(bad("n_schedule", "must be positive and strictly increasing"));
        }
        if self.i_max == 0 || self.inner_grid < 2 || self.outer_grid < 2 {
            return Err(bad("i_max", "i_max ≥ 1 and grids of at least 2 intervals required"));
        }
        Ok(())
    }
}

/// Residuals of one bundle entry. Norms are `L^p`/`L^q` for the robust and
/// seminorm certificates, `L^∞`/`L^1` after the `L^∞` correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    /// Worst negative Fréchet quotient of `x*_n(t)` at `x_n(t)`.
    pub r_a: f64,
    /// `(‖x − y_n‖, ‖x − x_n‖)`.
    pub r_b: (f64, f64),
    /// `‖x*_n‖_q·‖x_n − y_n‖_p`, or `∫‖x*_n‖‖x_n − y_n‖` in the `L^∞` form.
    pub r_c: f64,
    /// `|∫⟨x*_n, x_n − x⟩|`.
    pub r_d: f64,
    /// `ρ(∫x*_n − x*)`.
    pub r_e: f64,
    /// `‖∫x*_n − x*‖`.
    pub r_e_norm: f64,
    /// `∫|f(t, x_n(t)) − f(t, x)|`.
    pub r_f: f64,
}

impl Residuals {
    pub fn columns(&self) -> [(&'static str, f64); 8] {
        [
            ("r_a", self.r_a),
            ("r_b_point", self.r_b.0),
            ("r_b_function", self.r_b.1),
            ("r_c", self.r_c),
            ("r_d", self.r_d),
            ("r_e", self.r_e),
            ("r_e_norm", self.r_e_norm),
            ("r_f", self.r_f),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleEntry {
    pub n: f64,
    pub y: Vec<f64>,
    pub x: SampledFunction,
    pub x_star: SampledFunction,
    pub lambda: Option<f64>,
    /// Optimality gap of the base point for the penalized problem.
    pub eps_n: f64,
    pub bp: BpDiagnostics,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleNorm {
    Lp,
    Linf,
}

/// Dual values at the two appended atoms of the seminorm certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripOff {
    pub smooth_dual: Vec<f64>,
    pub constraint_dual: Vec<f64>,
    /// `‖∫ x̃*_n‖` over the augmented space.
    pub augmented_integral: f64,
    /// `‖∫x̃*‖ + ρ(−x̃*(ω₁) − x*) + ρ(x̃*(ω₂))`, an upper bound for `r_e`.
    pub r_e_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceBundle {
    pub norm: BundleNorm,
    pub p: f64,
    pub base_point: Vec<f64>,
    pub target: Vec<f64>,
    pub seminorm: SeminormSpec,
    pub viscosity_c: Option<f64>,
    pub entries: Vec<BundleEntry>,
    /// Per entry, when the certificate went through the augmented space.
    pub strip_off: Vec<StripOff>,
    pub warnings: Vec<String>,
}

impl SequenceBundle {
    /// A bundle with no entries: certifies `target` at `base_point` with zero slack.
    pub fn target_only(base_point: Vec<f64>, target: Vec<f64>) -> Self {
        let d = base_point.len();
        Self {
            norm: BundleNorm::Lp,
            p: 2.0,
            base_point,
            target,
            seminorm: SeminormSpec::full(d),
            viscosity_c: None,
            entries: vec![],
            strip_off: vec![],
            warnings: vec![],
        }
    }

    /// Values of one residual column along the schedule.
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.residuals.columns().iter().find(|c| c.0 == name).map(|c| c.1))
            .collect()
    }
}

/// Each value is at most its predecessor or at most `floor`.
pub fn nonincreasing(values: &[f64], floor: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) || w[1] <= floor)
}

/// An atom whose variable is restricted to `center + span(basis)`.
#[derive(Clone)]
struct AffineAtom {
    index: usize,
    center: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

/// The penalized problem
/// `φ(w, u) = Σμ f(t, w_t) + nΣμ ℓ(w_t − u) + ℓ(u − x₀) + Σⱼ ηⱼ ρ((w, u), cⱼ)`
/// over `u ∈ ball(x₀, r)` with `ρ((w, u), (w', u')) = Σμ ℓ(w − w') + ℓ(u − u')`.
struct Penalized<'a> {
    space: &'a MeasureSpace,
    f: &'a dyn Integrand,
    x0: &'a [f64],
    p: f64,
    region: Region,
    inner_grid: usize,
    solver: SolverOptions,
    affine: Option<AffineAtom>,
}

#[derive(Clone)]
struct Center {
    eta: f64,
    w: Vec<Vec<f64>>,
    u: Vec<f64>,
}

struct Solution {
    w: Vec<Vec<f64>>,
    u: Vec<f64>,
    value: f64,
}

impl<'a> Penalized<'a> {
    fn atom_objective<'b>(&'b self, i: usize, n: f64, u: &'b [f64], centers: &'b [Center]) -> impl Fn(&[f64]) -> f64 + 'b {
        let atom = &self.space.atoms()[i];
        move |v: &[f64]| {
            let fv = self.f.value(atom, v);
            if fv.is_nan() {
                return f64::INFINITY;
            }
            let mut s = fv + n * ell(&vecops::sub(v, u), self.p);
            for c in centers {
                s += c.eta * ell(&vecops::sub(v, &c.w[i]), self.p);
            }
            s
        }
    }

    fn atom_min(&self, i: usize, n: f64, u: &[f64], centers: &[Center], polish: bool) -> (Vec<f64>, f64) {
        let atom: &Atom = &self.space.atoms()[i];
        let g = self.atom_objective(i, n, u, centers);
        if let Some(aff) = self.affine.as_ref().filter(|a| a.index == i) {
            // search over coordinates in the affine subspace
            let lift = |s: &[f64]| {
                let mut v = aff.center.clone();
                for (b, si) in aff.basis.iter().zip(s) {
                    v = vecops::axpy(&v, *si, b);
                }
                v
            };
            let coords = |v: &[f64]| -> Vec<f64> { aff.basis.iter().map(|b| dot(&vecops::sub(v, &aff.center), b)).collect() };
            let h = |s: &[f64]| g(&lift(s));
            let mut starts = vec![coords(u)];
            starts.extend(centers.iter().map(|c| coords(&c.w[i])));
            let (s, v) = box_minimize(
                &h,
                &vec![0.0; aff.basis.len()],
                1.0,
                &starts,
                self.inner_grid,
                self.solver.seed,
            );
            return (lift(&s), v);
        }
        let mut cands = vec![u.to_vec()];
        cands.extend(centers.iter().map(|c| c.w[i].clone()));
        cands.extend(self.f.minimizer_hint(atom));
        let best = cands
            .iter()
            .map(|c| (c.clone(), g(c)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if !best.1.is_finite() {
            return best;
        }
        let lb = self.f.lower_bound(atom);
        if lb.is_finite() {
            let r = ((best.1 - lb).max(0.0) / n).powf(1.0 / self.p) * (1.0 + 1e-9);
            let starts: Vec<Vec<f64>> = cands.into_iter().filter(|c| dist(c, u) <= r).collect();
            let out = box_minimize(&g, u, r, &starts, self.inner_grid, self.solver.seed);
            let out = if out.1 <= best.1 { out } else { best };
            if polish {
                self.polish(i, n, u, centers, out)
            } else {
                out
            }
        } else {
            let mut r = 1.0;
            loop {
                let out = box_minimize(&g, u, r, &cands, self.inner_grid, self.solver.seed);
                let inner = vecops::sub(&out.0, u).iter().all(|v| v.abs() < 0.99 * r);
                if inner || r > 1e6 {
                    return if out.1 <= best.1 { out } else { best };
                }
                r *= 4.0;
            }
        }
    }

    /// In `d = 1` with a gradient oracle, bisects the derivative of the atom
    /// objective around `found`; value comparisons alone cannot place a
    /// minimizer of a stiff objective to full precision.
    fn polish(&self, i: usize, n: f64, u: &[f64], centers: &[Center], found: (Vec<f64>, f64)) -> (Vec<f64>, f64) {
        if u.len() != 1 {
            return found;
        }
        let atom = &self.space.atoms()[i];
        let slope = |v: f64| -> Option<f64> {
            let mut s = self.f.gradient(atom, &[v])?[0] + n * ell_gradient(&[v - u[0]], self.p)[0];
            for c in centers {
                s += c.eta * ell_gradient(&[v - c.w[i][0]], self.p)[0];
            }
            s.is_finite().then_some(s)
        };
        let v0 = found.0[0];
        if slope(v0) == Some(0.0) {
            return found;
        }
        let mut h = 1e-9 * (1.0 + v0.abs());
        let (mut a, mut b) = (v0 - h, v0 + h);
        let bracket = loop {
            match (slope(a), slope(b)) {
                (Some(sa), Some(sb)) if sa <= 0.0 && sb >= 0.0 => break true,
                (Some(_), Some(_)) if h < 1e-5 * (1.0 + v0.abs()) => {
                    h *= 4.0;
                    a = v0 - h;
                    b = v0 + h;
                }
                _ => break false,
            }
        };
        if !bracket {
            return found;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            match slope(m) {
                Some(s) if s < 0.0 => a = m,
                Some(_) => b = m,
                None => return found,
            }
        }
        let g = self.atom_objective(i, n, u, centers);
        let mag = |v: f64| slope(v).map_or(f64::INFINITY, f64::abs);
        let v = if mag(a) <= mag(b) { a } else { b };
        let gv = g(&[v]);
        if gv <= found.1 + 1e-14 * (1.0 + found.1.abs()) {
            (vec![v], gv)
        } else {
            found
        }
    }

    fn inner(&self, n: f64, u: &[f64], centers: &[Center], polish: bool) -> (Vec<Vec<f64>>, f64) {
        let mut w = Vec::with_capacity(self.space.len());
        let mut terms = Vec::with_capacity(self.space.len());
        for (i, atom) in self.space.atoms().iter().enumerate() {
            if atom.weight == 0.0 {
                w.push(u.to_vec());
                continue;
            }
            let (v, val) = self.atom_min(i, n, u, centers, polish);
            terms.push(atom.weight * val);
            w.push(v);
        }
        let mut total = crate::extended::csum(terms) + ell(&vecops::sub(u, self.x0), self.p);
        for c in centers {
            total += c.eta * ell(&vecops::sub(u, &c.u), self.p);
        }
        (w, total)
    }

    fn solve(&self, n: f64, centers: &[Center]) -> Solution {
        let psi = |u: &[f64]| self.inner(n, u, centers, false).1;
        let mut hints = vec![self.x0.to_vec()];
        hints.extend(centers.iter().map(|c| c.u.clone()));
        let (u, _) = minimize_over_region(&psi, &self.region, &hints, &self.solver);
        let (w, value) = self.inner(n, &u, centers, true);
        Solution { w, u, value }
    }

    fn gauge(&self, a: &Center, w: &[Vec<f64>], u: &[f64]) -> f64 {
        let mut s: f64 = self
            .space
            .atoms()
            .iter()
            .zip(a.w.iter().zip(w))
            .map(|(at, (x, y))| at.weight * ell(&vecops::sub(x, y), self.p))
            .sum();
        s += ell(&vecops::sub(&a.u, u), self.p);
        s
    }

    /// One entry: `ε_n`, the re-centered minimizer and the extracted selections.
    fn entry(&self, n: f64, e_x0: f64, eta0: f64, i_max: usize) -> BundleEntry {
        let plain = self.solve(n, &[]);
        let eps_n = (e_x0 - plain.value).max(self.solver.inner_tol);
        let start = Center {
            eta: eta0,
            w: vec![self.x0.to_vec(); self.space.len()],
            u: self.x0.to_vec(),
        };
        let mut centers = vec![start.clone()];
        let mut sol = self.solve(n, &centers);
        let mut partial = true;
        let mut iterations = 1;
        for k in 1..i_max {
            let prev = Center {
                eta: eta0 * 0.5f64.powi(k as i32),
                w: sol.w.clone(),
                u: sol.u.clone(),
            };
            centers.push(prev.clone());
            let next = self.solve(n, &centers);
            iterations += 1;
            let moved = self.gauge(&prev, &next.w, &next.u);
            sol = next;
            if moved <= 1e-24 {
                partial = false;
                break;
            }
        }
        let d = self.x0.len();
        let mut x_star = Vec::with_capacity(self.space.len());
        for (i, atom) in self.space.atoms().iter().enumerate() {
            if atom.weight == 0.0 {
                x_star.push(vec![0.0; d]);
                continue;
            }
            let wt = &sol.w[i];
            let mut g = vecops::scale(&ell_gradient(&vecops::sub(wt, &sol.u), self.p), n);
            for c in &centers {
                g = vecops::axpy(&g, c.eta, &ell_gradient(&vecops::sub(wt, &c.w[i]), self.p));
            }
            x_star.push(vecops::scale(&g, -1.0));
        }
        let start_gap = self.gauge(&start, &sol.w, &sol.u);
        let center_gaps: Vec<(f64, f64)> = centers
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| (self.gauge(c, &sol.w, &sol.u), eps_n / (2f64.powi(i as i32) * eta0)))
            .collect();
        let slack = 1e-9 * (1.0 + e_x0.abs());
        let bounds_hold = start_gap <= eps_n / eta0 + slack && center_gaps.iter().all(|(g, b)| *g <= b + slack);
        // sol.value already contains the perturbation terms
        let perturbed = sol.value;
        let bp = BpDiagnostics {
            iterations,
            epsilon: eps_n,
            eta0,
            start_gap,
            start_bound: eps_n / eta0,
            center_gaps,
            decrease: perturbed - e_x0,
            bounds_hold,
            start_not_eps_min: false,
            partial: partial || perturbed > e_x0 + slack,
        };
        BundleEntry {
            n,
            y: sol.u,
            x: SampledFunction { values: sol.w },
            x_star: SampledFunction { values: x_star },
            lambda: None,
            eps_n,
            bp,
            residuals: Residuals {
                r_a: 0.0,
                r_b: (0.0, 0.0),
                r_c: 0.0,
                r_d: 0.0,
                r_e: 0.0,
                r_e_norm: 0.0,
                r_f: 0.0,
            },
        }
    }
}

/// Worst negative Fréchet quotient over the atoms of positive weight.
fn membership_slack(space: &MeasureSpace, f: &dyn Integrand, x: &SampledFunction, x_star: &SampledFunction) -> f64 {
    let sched = certificate_schedule();
    let mut worst: f64 = 0.0;
    for (i, atom) in space.atoms().iter().enumerate() {
        if atom.weight == 0.0 {
            continue;
        }
        let ft = |z: &[f64]| f.value(atom, z);
        match frechet_membership(&ft, &x.values[i], &x_star.values[i], &sched, 0.0) {
            Ok(v) => worst = worst.max(-v.worst_quotient),
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

fn residuals(
    space: &MeasureSpace,
    f: &dyn Integrand,
    base: &[f64],
    target: &[f64],
    sem: &SeminormSpec,
    entry: &BundleEntry,
    norm_kind: BundleNorm,
    p: f64,
) -> Residuals {
    let diff = entry.x.minus_constant(base);
    let gap = entry.x.minus_constant(&entry.y);
    let integral = entry.x_star.integral(space);
    let offset = vecops::sub(&integral, target);
    let pairing: f64 = space
        .atoms()
        .iter()
        .zip(entry.x_star.values.iter().zip(&diff.values))
        .map(|(a, (s, v))| a.weight * dot(s, v))
        .sum();
    let (r_b1, r_c) = match norm_kind {
        BundleNorm::Lp => (
            diff.lp_norm(space, p),
            entry.x_star.lp_norm(space, p / (p - 1.0)) * gap.lp_norm(space, p),
        ),
        BundleNorm::Linf => (
            diff.linf_norm(space),
            space
                .atoms()
                .iter()
                .zip(entry.x_star.values.iter().zip(&gap.values))
                .map(|(a, (s, g))| a.weight * norm(s) * norm(g))
                .sum(),
        ),
    };
    Residuals {
        r_a: membership_slack(space, f, &entry.x, &entry.x_star),
        r_b: (dist(base, &entry.y), r_b1),
        r_c,
        r_d: pairing.abs(),
        r_e: sem.eval(&offset),
        r_e_norm: norm(&offset),
        r_f: value_gap(space, f, &entry.x, base).unwrap_or(f64::INFINITY),
    }
}

fn finite_value(space: &MeasureSpace, f: &dyn Integrand, x: &[f64]) -> Result<f64> {
    integral_value(space, f, x)?
        .value
        .finite()
        .ok_or_else(|| Error::Precondition("E_f must be finite at the base point".into()))
}

/// `E_f(x₀ + h) ≥ E_f(x₀)` on probes up to `radius`.
fn local_min_probe(space: &MeasureSpace, f: &dyn Integrand, x0: &[f64], radius: f64) -> Result<()> {
    let e0 = finite_value(space, f, x0)?;
    let tol = 1e-9 * (1.0 + e0.abs());
    for u in probe_directions(x0.len(), 16) {
        for s in [radius, radius / 2.0, 1e-2, 1e-3, 1e-4] {
            let y = vecops::axpy(x0, s.min(radius), &u);
            let v = integral_value(space, f, &y)?.value.to_f64();
            if v < e0 - tol {
                return Err(Error::Precondition(format!(
                    "base point fails the local-minimum probe: E_f({y:?}) = {v} < {e0}"
                )));
            }
        }
    }
    Ok(())
}

fn run_penalized(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x0: &[f64],
    opts: &BundleOptions,
    affine: Option<AffineAtom>,
) -> Result<(Vec<BundleEntry>, Vec<String>)> {
    let e_x0 = finite_value(space, f, x0)?;
    let problem = Penalized {
        space,
        f,
        x0,
        p: opts.p,
        region: Region::Ball {
            center: x0.to_vec(),
            radius: opts.radius,
        },
        inner_grid: opts.inner_grid,
        solver: SolverOptions {
            grid: opts.outer_grid,
            ..opts.solver.clone()
        },
        affine,
    };
    let mut entries = vec![];
    let mut warnings = vec![];
    for &n in &opts.n_schedule {
        let e = problem.entry(n, e_x0, opts.radius, opts.i_max);
        if e.bp.partial {
            warnings.push(format!("n = {n}: re-centering did not settle within {} steps", opts.i_max));
        }
        if !e.bp.bounds_hold {
            warnings.push(format!("n = {n}: perturbation distance bounds not met"));
        }
        entries.push(e);
    }
    let gaps: Vec<f64> = entries.iter().map(|e| e.eps_n).collect();
    if !nonincreasing(&gaps, 10.0 * opts.solver.inner_tol) {
        warnings.push("robustness inconclusive: optimality gaps do not decrease".into());
    }
    Ok((entries, warnings))
}

fn check_point(f: &dyn Integrand, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Sequence certificate at a `p`-robust local minimizer `x0`: `x_n → x0` in
/// `L^p`, `y_n → x0`, `x*_n(t) ∈ ∂̂f(t, x_n(t))`, `‖∫x*_n‖ → 0` and vanishing
/// value gap. The target subgradient is 0.
pub fn theorem33_bundle(space: &MeasureSpace, f: &dyn Integrand, x0: &[f64], opts: &BundleOptions) -> Result<SequenceBundle> {
    opts.validate()?;
    check_point(f, x0)?;
    local_min_probe(space, f, x0, opts.radius)?;
    let (mut entries, warnings) = run_penalized(space, f, x0, opts, None)?;
    let d = x0.len();
    let sem = SeminormSpec::full(d);
    let target = vec![0.0; d];
    for e in &mut entries {
        e.residuals = residuals(space, f, x0, &target, &sem, e, BundleNorm::Lp, opts.p);
    }
    Ok(SequenceBundle {
        norm: BundleNorm::Lp,
        p: opts.p,
        base_point: x0.to_vec(),
        target,
        seminorm: sem,
        viscosity_c: None,
        entries,
        strip_off: vec![],
        warnings,
    })
}

/// Sequence certificate for a Fréchet subgradient `x_star` of `E_f` at `x`,
/// with `ρ(∫x*_n − x*) → 0` for the seminorm `sem`.
///
/// `x` becomes a robust local minimizer of `E_f − φ + δ_K` on a space with two
/// extra atoms, where `φ(y) = ⟨x*, y − x⟩ − c‖y − x‖²` is a fitted quadratic
/// and `K = span{x, eᵢ} ∩ ball(x, 1)`; the robust certificate runs there and the
/// extra atoms are stripped. An integrand with an affine minorant `g` is
/// handled through `h = f − g` with `∇g` added back to every selection.
pub fn theorem34_certificate(
    space: &MeasureSpace,
    f: Arc<dyn Integrand>,
    x: &[f64],
    x_star: &[f64],
    sem: &SeminormSpec,
    opts: &BundleOptions,
) -> Result<SequenceBundle> {
    opts.validate()?;
    check_point(f.as_ref(), x)?;
    check_point(f.as_ref(), x_star)?;
    sem.validate()?;
    if sem.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: sem.dim(),
        });
    }
    if let (Some(g), Some(h)) = (f.minorant(), f.shifted()) {
        let mass = space.total_mass();
        let shifted_target = vecops::axpy(x_star, -mass, &g.slope);
        let mut bundle = theorem34_certificate(space, h, x, &shifted_target, sem, opts)?;
        for e in &mut bundle.entries {
            for (a, s) in space.atoms().iter().zip(e.x_star.values.iter_mut()) {
                if a.weight > 0.0 {
                    *s = vecops::add(s, &g.slope);
                }
            }
            e.residuals = residuals(space, f.as_ref(), x, x_star, sem, e, BundleNorm::Lp, opts.p);
        }
        bundle.target = x_star.to_vec();
        return Ok(bundle);
    }
    let ef = functional_oracle(space, f.as_ref());
    let pre = frechet_membership(&ef, x, x_star, &ProbeSchedule::default(), opts.precondition_tol)?;
    if !pre.accept {
        return Err(Error::Precondition(format!(
            "x_star is not a Fréchet subgradient of E_f at x (worst quotient {:.3e} along {:?})",
            pre.worst_quotient, pre.worst_probe
        )));
    }
    let sum = |y: &[f64]| integral_value(space, f.as_ref(), y).map_or(f64::NAN, |v| v.value.to_f64());
    let fit = fit_viscosity(&sum, x, x_star, &ProbeSchedule::default(), opts.radius)?
        .ok_or_else(|| Error::Precondition("no quadratic minorant with c ≤ 2^40 fits around x".into()))?;
    let phi = SmoothFunction::concave_quadratic(x.to_vec(), x_star.to_vec(), fit.c);
    let basis = sem.span_with(x);
    let constraint = ConvexConstraint::AffineBall {
        center: x.to_vec(),
        basis: basis.clone(),
        radius: 1.0,
    };
    let (aug_space, aug) = augment_with_penalty_atoms(space, phi, constraint)?;
    let aug_f = aug.extend(f.clone());
    let k_index = aug_space.len() - 1;
    let (aug_entries, mut warnings) = run_penalized(
        &aug_space,
        &aug_f,
        x,
        opts,
        Some(AffineAtom {
            index: k_index,
            center: x.to_vec(),
            basis,
        }),
    )?;
    let m = space.len();
    let mut entries = Vec::with_capacity(aug_entries.len());
    let mut strip = Vec::with_capacity(aug_entries.len());
    for e in aug_entries {
        let smooth_dual = e.x_star.values[m].clone();
        let constraint_dual = e.x_star.values[m + 1].clone();
        let augmented_integral = norm(&e.x_star.integral(&aug_space));
        let r_e_bound =
            augmented_integral + sem.eval(&vecops::sub(&vecops::scale(&smooth_dual, -1.0), x_star)) + sem.eval(&constraint_dual);
        let mut stripped = BundleEntry {
            x: SampledFunction {
                values: e.x.values[..m].to_vec(),
            },
            x_star: SampledFunction {
                values: e.x_star.values[..m].to_vec(),
            },
            ..e
        };
        stripped.residuals = residuals(space, f.as_ref(), x, x_star, sem, &stripped, BundleNorm::Lp, opts.p);
        entries.push(stripped);
        strip.push(StripOff {
            smooth_dual,
            constraint_dual,
            augmented_integral,
            r_e_bound,
        });
    }
    let tags = [SMOOTH_ATOM, CONSTRAINT_ATOM];
    warnings.retain(|w| !tags.iter().any(|t| w.contains(t)));
    Ok(SequenceBundle {
        norm: BundleNorm::Lp,
        p: opts.p,
        base_point: x.to_vec(),
        target: x_star.to_vec(),
        seminorm: sem.clone(),
        viscosity_c: Some(fit.c),
        entries,
        strip_off: strip,
        warnings,
    })
}

/// `f + δ_{ball(center, radius)}`.
pub struct BallRestricted {
    base: Arc<dyn Integrand>,
    center: Vec<f64>,
    radius: f64,
}

impl BallRestricted {
    pub fn new(base: Arc<dyn Integrand>, center: Vec<f64>, radius: f64) -> Self {
        Self { base, center, radius }
    }

    fn inside(&self, x: &[f64]) -> bool {
        dist(x, &self.center) <= self.radius
    }
}

impl Integrand for BallRestricted {
    fn name(&self) -> &str {
        "ball_restricted"
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, atom: &Atom, x: &[f64]) -> f64 {
        if self.inside(x) {
            self.base.value(atom, x)
        } else {
            f64::INFINITY
        }
    }

    fn gradient(&self, atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        if dist(x, &self.center) < self.radius {
            self.base.gradient(atom, x)
        } else {
            None
        }
    }

    fn frechet_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        if dist(x, &self.center) < self.radius {
            self.base.frechet_subdifferential(atom, x)
        } else if !self.inside(x) {
            Some(SetRepr::empty(self.dim()))
        } else {
            None
        }
    }

    fn lower_bound(&self, atom: &Atom) -> f64 {
        self.base.lower_bound(atom)
    }

    fn is_convex(&self) -> bool {
        self.base.is_convex()
    }
}

/// Outcome of [`linfty_correction`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinftyCorrection {
    pub entry: BundleEntry,
    pub patched: Vec<String>,
    /// Patched atoms whose subgradient failed its checks.
    pub flagged: Vec<String>,
}

const BOUNDARY_TOL: f64 = 1e-9;

/// Replaces selections at atoms where `x_n(t)` sits on the sphere of radius
/// `eps` around `x` by subgradients near `x` from [`subgrad_at_eps_min`] with
/// `ε(t) = f(t, x)` and `λ = eps/2`, so `‖x*_n(t)‖ ≤ 8ε(t)/eps` there, and
/// recomputes the residuals in `L^∞`/`L^1` form.
pub fn linfty_correction(
    space: &MeasureSpace,
    f: &dyn Integrand,
    x: &[f64],
    x_star: &[f64],
    sem: &SeminormSpec,
    entry: &BundleEntry,
    eps: f64,
    solver: &SolverOptions,
) -> Result<LinftyCorrection> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let mut out = entry.clone();
    let mut patched = vec![];
    let mut flagged = vec![];
    for (i, atom) in space.atoms().iter().enumerate() {
        if atom.weight == 0.0 || (dist(&entry.x.values[i], x) - eps).abs() > BOUNDARY_TOL {
            continue;
        }
        patched.push(atom.tag.clone());
        let level = f.value(atom, x);
        if level == 0.0 {
            out.x.values[i] = x.to_vec();
            out.x_star.values[i] = vec![0.0; x.len()];
            continue;
        }
        let ft = |z: &[f64]| f.value(atom, z);
        match subgrad_at_eps_min(&ft, x, level, eps / 2.0, solver) {
            Ok(s) => {
                if s.flagged || s.norm > 8.0 * level / eps + 1e-9 {
                    flagged.push(atom.tag.clone());
                }
                out.x.values[i] = s.y;
                out.x_star.values[i] = s.y_star;
            }
            Err(_) => flagged.push(atom.tag.clone()),
        }
    }
    out.residuals = residuals(space, f, x, x_star, sem, &out, BundleNorm::Linf, 1.0);
    Ok(LinftyCorrection {
        entry: out,
        patched,
        flagged,
    })
}

/// Certificate with `x_n → x` uniformly: the seminorm certificate for
/// `f + δ_{ball(x, eps)}` followed by [`linfty_correction`] on every entry.
pub fn theorem35_certificate(
    space: &MeasureSpace,
    f: Arc<dyn Integrand>,
    x: &[f64],
    x_star: &[f64],
    sem: &SeminormSpec,
    eps: f64,
    opts: &BundleOptions,
) -> Result<SequenceBundle> {
    let restricted: Arc<dyn Integrand> = Arc::new(BallRestricted::new(f.clone(), x.to_vec(), eps));
    let mut bundle = theorem34_certificate(space, restricted, x, x_star, sem, opts)?;
    for e in &mut bundle.entries {
        let c = linfty_correction(space, f.as_ref(), x, x_star, sem, e, eps, &opts.solver)?;
        if !c.flagged.is_empty() {
            bundle
                .warnings
                .push(format!("n = {}: patch checks failed at {:?}", e.n, c.flagged));
        }
        *e = c.entry;
    }
    bundle.norm = BundleNorm::Linf;
    Ok(bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReverseVerdict {
    pub pass: bool,
    /// Probe with the smallest margin and that margin.
    pub worst_y: Vec<f64>,
    pub worst_margin: f64,
    pub slack_pairing: f64,
    pub slack_seminorm: f64,
    pub probes: usize,
}

/// For convex integrands: checks `⟨x*, y − x⟩ ≤ E_f(y) − E_f(x) + r_d + r_e‖y − x‖`
/// on probes `y` around `x`, with the residuals of the last bundle entry.
/// Convexity is taken from the integrand when declared and otherwise probed on
/// `E_f` along the same lines.
pub fn convex_reverse_check(space: &MeasureSpace, f: &dyn Integrand, bundle: &SequenceBundle) -> Result<ReverseVerdict> {
    let x = &bundle.base_point;
    let x_star = &bundle.target;
    check_point(f, x)?;
    let ef = functional_oracle(space, f);
    let e0 = ef(x);
    if !e0.is_finite() {
        return Err(Error::Precondition("E_f must be finite at x".into()));
    }
    let scales = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0];
    let dirs = probe_directions(x.len(), 16);
    let tol = 1e-9 * (1.0 + e0.abs());
    if !f.is_convex() {
        for u in &dirs {
            for &s in &scales {
                let a = ef(&vecops::axpy(x, s, u));
                let b = ef(&vecops::axpy(x, -s, u));
                let c = ef(&vecops::axpy(x, 2.0 * s, u));
                let mid_ok = e0 <= 0.5 * (a + b) + tol;
                let mid2_ok = a <= 0.5 * (e0 + c) + tol;
                if !(mid_ok && mid2_ok) {
                    return Err(Error::Precondition(format!(
                        "convexity probe failed along {u:?} at scale {s}"
                    )));
                }
            }
        }
    }
    let (slack_pairing, slack_seminorm) = bundle
        .entries
        .last()
        .map_or((0.0, 0.0), |e| (e.residuals.r_d, e.residuals.r_e_norm));
    let mut worst = (x.clone(), f64::INFINITY);
    let mut probes = 0;
    for u in &dirs {
        for &s in &scales {
            let y = vecops::axpy(x, s, u);
            let margin = ef(&y) - e0 + slack_pairing + slack_seminorm * s - dot(x_star, &vecops::sub(&y, x));
            probes += 1;
            if !(margin >= worst.1) {
                worst = (y, margin);
            }
        }
    }
    Ok(ReverseVerdict {
        pass: worst.1 >= -tol,
        worst_y: worst.0,
        worst_margin: worst.1,
        slack_pairing,
        slack_seminorm,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::integrand::Params;
    use crate::measure_space::{geometric_grid_unit_interval, make_finite_atoms};

    fn two_atom_quadratic() -> (MeasureSpace, Arc<dyn Integrand>) {
        let space = make_finite_atoms(&[("a", 1.0), ("b", 1.0)]).unwrap();
        let f = catalog(
            "separable_quadratic",
            &Params::from_json(r#"{"centers": {"a": 0, "b": 1}}"#).unwrap(),
        )
        .unwrap();
        (space, f)
    }

    #[test]
    fn bp_examples() {
        let opts = SolverOptions::default();
        let sq = |z: &[f64]| z[0] * z[0];
        let r = borwein_preiss(&sq, &[0.0], 0.3, 1.0, 20, &opts).unwrap();
        assert!(r.y[0].abs() < 1e-9);
        assert!(r.centers.iter().all(|c| c[0].abs() < 1e-9));
        let abs = |z: &[f64]| z[0].abs();
        let r = borwein_preiss(&abs, &[0.01], 0.01, 1.0, 20, &opts).unwrap();
        assert!(r.y[0] * r.y[0] <= 0.01);
        assert!(r.diagnostics.bounds_hold && !r.diagnostics.partial);
        assert!(r.diagnostics.decrease <= 1e-12);
    }

    #[test]
    fn eps_min_subgradient_examples() {
        let opts = SolverOptions::default();
        let sq = |z: &[f64]| z[0] * z[0];
        let s = subgrad_at_eps_min(&sq, &[0.1], 0.01, 0.2, &opts).unwrap();
        assert!(!s.flagged, "{s:?}");
        assert!(s.y[0].abs() <= 0.3 && (s.y_star[0] - 2.0 * s.y[0]).abs() < 1e-6);
        assert!(s.norm <= 0.2 + 1e-9);
        let zero = |_: &[f64]| 0.0;
        let s = subgrad_at_eps_min(&zero, &[0.4], 0.01, 0.2, &opts).unwrap();
        assert!((s.y[0] - 0.4).abs() < 1e-9 && s.y_star[0].abs() < 1e-9);
        let abs = |z: &[f64]| z[0].abs();
        let s = subgrad_at_eps_min(&abs, &[0.0], 0.05, 0.1, &opts).unwrap();
        assert!(s.y[0].abs() < 1e-9 && !s.flagged);
        // 0.5 is not a 0.01-minimum of z²
        assert!(matches!(
            subgrad_at_eps_min(&sq, &[0.5], 0.01, 0.2, &opts),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn two_atom_bundle_residuals_decrease() {
        let (space, f) = two_atom_quadratic();
        let b = theorem33_bundle(&space, f.as_ref(), &[0.5], &BundleOptions::default()).unwrap();
        assert_eq!(b.entries.len(), 5);
        for col in ["r_a", "r_b_point", "r_b_function", "r_c", "r_e", "r_f"] {
            let v = b.column(col);
            assert!(*v.last().unwrap() < 1e-3, "{col}: {v:?}");
            assert!(nonincreasing(&v, 1e-6), "{col}: {v:?}");
        }
        // ∫x*_n = 2x_n(a) + 2(x_n(b) − 1) up to the perturbation
        let e = b.entries.last().unwrap();
        let closed = 2.0 * e.x.values[0][0] + 2.0 * (e.x.values[1][0] - 1.0);
        assert!((closed - e.x_star.integral(&space)[0]).abs() < 1e-3);
    }

    #[test]
    fn zero_integrand_bundle_is_trivial() {
        let space = make_finite_atoms(&[("a", 1.0), ("b", 2.0)]).unwrap();
        let f = catalog("abs_plus_square", &Params::from_json(r#"{"a": 0, "b": 0}"#).unwrap()).unwrap();
        let b = theorem33_bundle(&space, f.as_ref(), &[0.3], &BundleOptions::default()).unwrap();
        for e in &b.entries {
            assert!(e.x_star.values.iter().all(|v| v[0] == 0.0));
            assert!(e.residuals.columns().iter().all(|c| c.1 < 1e-12), "{:?}", e.residuals);
        }
    }

    #[test]
    fn non_minimum_is_rejected() {
        let (space, f) = two_atom_quadratic();
        assert!(matches!(
            theorem33_bundle(&space, f.as_ref(), &[0.2], &BundleOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn seminorm_certificate_smooth() {
        let (space, f) = two_atom_quadratic();
        // ∇E_f(0.2) = 2·0.2 + 2·(0.2 − 1) = −1.2
        let b = theorem34_certificate(
            &space,
            f.clone(),
            &[0.2],
            &[-1.2],
            &SeminormSpec::full(1),
            &BundleOptions::default(),
        )
        .unwrap();
        let r_e = b.column("r_e");
        assert!(*r_e.last().unwrap() < 1e-3, "{r_e:?}");
        let last = b.entries.last().unwrap();
        assert!(last.x.values.iter().all(|v| (v[0] - 0.2).abs() < 1e-2));
        assert!(b.strip_off.last().unwrap().r_e_bound >= last.residuals.r_e - 1e-12);
        assert!(matches!(
            theorem34_certificate(&space, f, &[0.2], &[0.0], &SeminormSpec::full(1), &BundleOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn minorant_mode_matches_shifted_run() {
        let (space, h) = two_atom_quadratic();
        let f = crate::integrand::with_affine_minorant(h.clone(), vec![0.3], 0.1).unwrap();
        let opts = BundleOptions {
            n_schedule: vec![1.0, 16.0],
            ..BundleOptions::default()
        };
        let sem = SeminormSpec::full(1);
        let a = theorem34_certificate(&space, f, &[0.2], &[-0.6], &sem, &opts).unwrap();
        let b = theorem34_certificate(&space, h, &[0.2], &[-1.2], &sem, &opts).unwrap();
        for (ea, eb) in a.entries.iter().zip(&b.entries) {
            for (sa, sb) in ea.x_star.values.iter().zip(&eb.x_star.values) {
                assert!((sa[0] - sb[0] - 0.3).abs() < 1e-12);
            }
            assert!((ea.residuals.r_e - eb.residuals.r_e).abs() < 1e-12);
        }
    }

    #[test]
    fn linfty_patches() {
        let space = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let sem = SeminormSpec::full(1);
        let entry = |x: f64, s: f64| BundleEntry {
            n: 1.0,
            y: vec![0.0],
            x: SampledFunction { values: vec![vec![x]] },
            x_star: SampledFunction { values: vec![vec![s]] },
            lambda: None,
            eps_n: 0.0,
            bp: BpDiagnostics {
                iterations: 0,
                epsilon: 0.0,
                eta0: 0.0,
                start_gap: 0.0,
                start_bound: 0.0,
                center_gaps: vec![],
                decrease: 0.0,
                bounds_hold: true,
                start_not_eps_min: false,
                partial: false,
            },
            residuals: Residuals {
                r_a: 0.0,
                r_b: (0.0, 0.0),
                r_c: 0.0,
                r_d: 0.0,
                r_e: 0.0,
                r_e_norm: 0.0,
                r_f: 0.0,
            },
        };
        let opts = SolverOptions::default();
        // interior point: unchanged
        let sq = catalog("norm_power", &Params::new()).unwrap();
        let c = linfty_correction(&space, sq.as_ref(), &[0.0], &[0.0], &sem, &entry(0.05, 0.1), 0.1, &opts).unwrap();
        assert!(c.patched.is_empty() && c.entry.x.values[0][0] == 0.05);
        // boundary with f(t, x) = 0
        let c = linfty_correction(&space, sq.as_ref(), &[0.0], &[0.0], &sem, &entry(0.1, 7.0), 0.1, &opts).unwrap();
        assert_eq!(c.entry.x.values[0], vec![0.0]);
        assert_eq!(c.entry.x_star.values[0], vec![0.0]);
        // boundary with f(t, x) = 0.01
        let f = catalog(
            "separable_quadratic",
            &Params::from_json(r#"{"default_center": 0.1}"#).unwrap(),
        )
        .unwrap();
        let c = linfty_correction(&space, f.as_ref(), &[0.0], &[0.0], &sem, &entry(-0.1, 7.0), 0.1, &opts).unwrap();
        assert_eq!(c.patched, vec!["a".to_string()]);
        assert!(c.flagged.is_empty());
        assert!(c.entry.x_star.values[0][0].abs() <= 0.8 + 1e-9);
        assert!((c.entry.x.values[0][0]).abs() <= 0.1);
    }

    #[test]
    fn reverse_check_examples() {
        let (space, f) = two_atom_quadratic();
        let sq = catalog("norm_power", &Params::new()).unwrap();
        let b = theorem33_bundle(&space, sq.as_ref(), &[0.0], &BundleOptions::default()).unwrap();
        assert!(convex_reverse_check(&space, sq.as_ref(), &b).unwrap().pass);
        let _ = f;
        let grid = geometric_grid_unit_interval(200, 0.95).unwrap();
        let g = catalog("example45b", &Params::new()).unwrap();
        let ok = SequenceBundle::target_only(vec![0.0], vec![0.7]);
        assert!(convex_reverse_check(&grid, g.as_ref(), &ok).unwrap().pass);
        let bad = SequenceBundle::target_only(vec![0.0], vec![1.5]);
        let v = convex_reverse_check(&grid, g.as_ref(), &bad).unwrap();
        assert!(!v.pass);
        assert!(v.worst_y[0] > 0.0);
        let neg = catalog("neg_abs_shifted", &Params::new()).unwrap();
        assert!(convex_reverse_check(&space, neg.as_ref(), &SequenceBundle::target_only(vec![0.0], vec![0.0])).is_err());
    }

    #[test]
    fn seminorm_spec_validation() {
        assert!(SeminormSpec::new(vec![vec![1.0, 0.0], vec![2.0, 0.0]]).is_err());
        let s = SeminormSpec::new(vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(s.eval(&[1.0, -1.0]), 0.0);
        assert_eq!(s.span_with(&[1.0, 1.0]).len(), 1);
    }
}
