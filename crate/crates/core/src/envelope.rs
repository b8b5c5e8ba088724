//! p-power proximal envelopes, the pointwise inf/integral interchange, the
//! p-stabilized infimum and robustness verdicts.

use crate::error::{Error, Result};
use crate::extended::csum;
use crate::integrand::{integral_value, Integrand, SampledFunction};
use crate::measure_space::{Atom, MeasureSpace};
use crate::minimize::{minimize_interval, multi_start, SearchBox};
use crate::vecops::{self, norm, probe_directions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Bounded search region `B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } => center.len(),
            Region::Box { lower, .. } => lower.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Ball { center, radius } => {
                if !radius.is_finite() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Precondition("B must be bounded".into()));
                }
                if *radius < 0.0 {
                    return Err(Error::InvalidArgument("empty ball".into()));
                }
            }
            Region::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::DimensionMismatch {
                        expected: lower.len(),
                        got: upper.len(),
                    });
                }
                if lower.iter().chain(upper).any(|v| !v.is_finite()) {
                    return Err(Error::Precondition("B must be bounded".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(Error::InvalidArgument("empty box".into()));
                }
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            Region::Ball { center, .. } => center.clone(),
            Region::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
        }
    }

    /// Radius of a ball around [`Region::center`] containing the region.
    pub fn outer_radius(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => *radius,
            Region::Box { lower, upper } => 0.5 * vecops::dist(lower, upper),
        }
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        match self {
            Region::Ball { center, radius } => {
                let d = vecops::sub(z, center);
                let n = norm(&d);
                if n <= *radius {
                    z.to_vec()
                } else {
                    vecops::axpy(center, radius / n, &d)
                }
            }
            Region::Box { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
        }
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Region::Box { lower, upper } => (lower.clone(), upper.clone()),
        }
    }
}

/// Solver settings shared by the envelope computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Target accuracy of inner minimizations (values).
    pub inner_tol: f64,
    /// Grid intervals for one-dimensional scans.
    pub grid: usize,
    /// Extra random starts for `d ≥ 2`.
    pub random_starts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            inner_tol: 1e-8,
            grid: 200,
            random_starts: 6,
            seed: 0,
        }
    }
}

impl SolverOptions {
    /// Defaults by dimension: `inner_tol` 1e-8 for `d = 1`, 1e-6 otherwise.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            inner_tol: if dim == 1 { 1e-8 } else { 1e-6 },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prox {
    pub argmin: Vec<f64>,
    pub value: f64,
    /// No candidate improved on the center (or the center value was infinite).
    pub flagged: bool,
}

/// `min_z f(z) + weight·‖z − center‖^p` for `f ≥ lower_bound`. Minimizers lie
/// in the ball of radius `((f(center) − lower_bound)/weight)^{1/p}`; that ball
/// is scanned (grid plus golden section in `d = 1`, multi-start coordinate
/// descent otherwise). `hints` are extra start points.
pub fn p_prox(
    f: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    weight: f64,
    p: f64,
    lower_bound: f64,
    hints: &[Vec<f64>],
    opts: &SolverOptions,
) -> Result<Prox> {
    if !(weight > 0.0) || !(p > 1.0) {
        return Err(Error::InvalidArgument("p_prox needs weight > 0 and p > 1".into()));
    }
    let d = center.len();
    let fc = f(center);
    if fc.is_nan() {
        return Err(Error::InvalidArgument("NaN at prox center".into()));
    }
    let obj = |z: &[f64]| {
        let v = f(z);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v + weight * vecops::dist(z, center).powf(p)
        }
    };
    let radius = if fc.is_finite() && lower_bound.is_finite() {
        ((fc - lower_bound).max(0.0) / weight).powf(1.0 / p)
    } else {
        // no a priori bound: search a unit window around the center and hints
        1.0 + hints.iter().map(|h| vecops::dist(h, center)).fold(0.0, f64::max)
    };
    let mut best = (center.to_vec(), obj(center));
    if radius > 0.0 {
        let cand = if d == 1 {
            let g = |s: f64| obj(&[s]);
            let tol = (radius * 1e-11).max(1e-15);
            let (s, v) = minimize_interval(&g, center[0] - radius, center[0] + radius, opts.grid, tol);
            let mut out = (vec![s], v);
            for h in hints {
                if vecops::dist(h, center) <= radius {
                    // refine around the hint as well
                    let w = (radius / opts.grid as f64).max(tol);
                    let (s, v) = minimize_interval(&g, h[0] - w, h[0] + w, 8, tol);
                    if v < out.1 {
                        out = (vec![s], v);
                    }
                }
            }
            out
        } else {
            let mut starts = vec![center.to_vec()];
            starts.extend(hints.iter().filter(|h| h.len() == d).cloned());
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for _ in 0..opts.random_starts {
                let u: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                starts.push(vecops::axpy(center, radius, &u));
            }
            let lower: Vec<f64> = center.iter().map(|c| c - radius).collect();
            let upper: Vec<f64> = center.iter().map(|c| c + radius).collect();
            multi_start(
                &obj,
                &starts,
                radius,
                (radius * 1e-9).max(1e-13),
                Some(SearchBox {
                    lower: &lower,
                    upper: &upper,
                }),
            )
            .expect("at least one start")
        };
        if cand.1 < best.1 {
            best = cand;
        }
    }
    let flagged = !fc.is_finite() || best.0 == center;
    let flagged = flagged && fc != lower_bound;
    Ok(Prox {
        argmin: best.0,
        value: best.1,
        flagged,
    })
}

/// Per-atom prox of an integrand at one atom.
pub fn atom_prox(f: &dyn Integrand, atom: &Atom, center: &[f64], weight: f64, p: f64, opts: &SolverOptions) -> Result<Prox> {
    let ft = |z: &[f64]| f.value(atom, z);
    let hints: Vec<Vec<f64>> = f.minimizer_hint(atom).into_iter().collect();
    p_prox(&ft, center, weight, p, f.lower_bound(atom), &hints, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decoupled {
    pub value: f64,
    /// Per-atom minimizers `w(t)`.
    pub argmins: SampledFunction,
    pub flagged: Vec<String>,
}

/// `Σ_t μ(t)·min_z f(t, z) + weight·‖z − center‖^p`, the infimum over `L^p`
/// of `I_f(w) + weight∫‖w − center‖^p`, computed atom by atom.
pub fn decoupled_infimum(
    space: &MeasureSpace,
    f: &dyn Integrand,
    center: &[f64],
    weight: f64,
    p: f64,
    opts: &SolverOptions,
) -> Result<Decoupled> {
    if center.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: center.len(),
        });
    }
    let mut terms = Vec::with_capacity(space.len());
    let mut argmins = Vec::with_capacity(space.len());
    let mut flagged = vec![];
    for atom in space.atoms() {
        if atom.weight == 0.0 {
            argmins.push(center.to_vec());
            continue;
        }
        let fc = f.value(atom, center);
        if fc.is_nan() {
            return Err(Error::NanValue { tag: atom.tag.clone() });
        }
        if fc == f64::INFINITY {
            return Err(Error::InfiniteValue { tag: atom.tag.clone() });
        }
        let pr = atom_prox(f, atom, center, weight, p, opts)?;
        if pr.flagged {
            flagged.push(atom.tag.clone());
        }
        terms.push(atom.weight * pr.value);
        argmins.push(pr.argmin);
    }
    Ok(Decoupled {
        value: csum(terms),
        argmins: SampledFunction { values: argmins },
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Robust,
    NotRobust,
    Inconclusive,
}

/// Which penalized problem is minimized over `u ∈ B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StabilizationMode {
    /// `inf_u inf_w I_f(w) + n∫‖w − u‖^p`.
    Unanchored,
    /// Adds `‖x₀ − u‖^p`.
    Anchored { x0: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyValue {
    pub n: f64,
    pub value: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustReport {
    pub plain_infimum: f64,
    pub plain_argmin: Vec<f64>,
    pub penalty_values: Vec<PenaltyValue>,
    pub stabilized_estimate: f64,
    pub verdict: Verdict,
    pub gap: f64,
    pub mode: StabilizationMode,
    pub diagnostic: Option<String>,
}

/// `inf_B g` by a scan of the region.
pub(crate) fn minimize_over_region(
    g: &dyn Fn(&[f64]) -> f64,
    region: &Region,
    hints: &[Vec<f64>],
    opts: &SolverOptions,
) -> (Vec<f64>, f64) {
    let d = region.dim();
    let (lo, hi) = region.bounding_box();
    let on_region = |z: &[f64]| g(&region.project(z));
    let mut best = if d == 1 {
        let h = |s: f64| on_region(&[s]);
        let tol = ((hi[0] - lo[0]) * 1e-11).max(1e-15);
        let (s, v) = minimize_interval(&h, lo[0], hi[0], opts.grid, tol);
        (region.project(&[s]), v)
    } else {
        let mut starts = vec![region.center()];
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.random_starts {
            starts.push(lo.iter().zip(&hi).map(|(l, u)| rng.gen_range(*l..=*u)).collect());
        }
        let step = region.outer_radius().max(1e-6);
        let (z, v) = multi_start(
            &on_region,
            &starts,
            step,
            (step * 1e-9).max(1e-13),
            Some(SearchBox { lower: &lo, upper: &hi }),
        )
        .expect("at least one start");
        (region.project(&z), v)
    };
    for h in hints {
        if h.len() == d {
            let z = region.project(h);
            let v = g(&z);
            if v < best.1 {
                best = (z, v);
            }
        }
    }
    best
}

/// Default penalty schedule `{1, 4, 16, 64, 256}`.
pub fn default_schedule() -> Vec<f64> {
    vec![1.0, 4.0, 16.0, 64.0, 256.0]
}

/// Penalty sweep approximating the p-stabilized infimum over `B`, compared
/// against `inf_B E_f`.
///
/// Verdict: robust when the final gap is within `10·inner_tol` or when the gaps
/// decay along the schedule (log-log slope below `−0.1` over the last three
/// entries). A non-decaying gap is reported as inconclusive: in finite
/// dimension every local minimum is robust, so it signals a solver failure.
pub fn stabilized_infimum(
    space: &MeasureSpace,
    f: &dyn Integrand,
    region: &Region,
    p: f64,
    n_schedule: &[f64],
    mode: &StabilizationMode,
    opts: &SolverOptions,
) -> Result<RobustReport> {
    region.validate()?;
    if region.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: region.dim(),
        });
    }
    if n_schedule.is_empty() || n_schedule.windows(2).any(|w| w[1] <= w[0]) || n_schedule[0] <= 0.0 {
        return Err(Error::InvalidArgument("n_schedule must be positive and increasing".into()));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidArgument("p must exceed 1".into()));
    }
    let ef = |z: &[f64]| match integral_value(space, f, z) {
        Ok(v) => v.value.to_f64(),
        Err(_) => f64::NAN,
    };
    let ef_clean = |z: &[f64]| {
        let v = ef(z);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut hints = vec![];
    if let StabilizationMode::Anchored { x0 } = mode {
        hints.push(x0.clone());
    }
    let (plain_argmin, plain) = minimize_over_region(&ef_clean, region, &hints, opts);
    if !plain.is_finite() {
        return Err(Error::Precondition("E_f is infinite on all of B".into()));
    }
    hints.push(plain_argmin.clone());
    let mut penalty_values = Vec::with_capacity(n_schedule.len());
    for &n in n_schedule {
        let phi = |u: &[f64]| {
            let anchor = match mode {
                StabilizationMode::Unanchored => 0.0,
                StabilizationMode::Anchored { x0 } => vecops::dist(x0, u).powf(p),
            };
            match decoupled_infimum(space, f, u, n, p, opts) {
                Ok(d) => d.value + anchor,
                Err(_) => f64::INFINITY,
            }
        };
        let (u, v) = minimize_over_region(&phi, region, &hints, opts);
        penalty_values.push(PenaltyValue { n, value: v, u });
    }
    let stabilized = penalty_values.last().expect("nonempty").value;
    let gap = (stabilized - plain).abs();
    let gaps: Vec<(f64, f64)> = penalty_values.iter().map(|pv| (pv.n, (plain - pv.value).max(0.0))).collect();
    let tol = 10.0 * opts.inner_tol;
    let (verdict, diagnostic) = if gap <= tol {
        (Verdict::Robust, None)
    } else if decaying(&gaps, tol) {
        (
            Verdict::Robust,
            Some(format!("gap {gap:.3e} still decaying along the schedule")),
        )
    } else {
        (
            Verdict::Inconclusive,
            Some(format!(
                "gap {gap:.3e} does not decay; in finite dimension local minima are robust, so this indicates a numerical failure"
            )),
        )
    };
    Ok(RobustReport {
        plain_infimum: plain,
        plain_argmin,
        penalty_values,
        stabilized_estimate: stabilized,
        verdict,
        gap,
        mode: mode.clone(),
        diagnostic,
    })
}

/// Least-squares slope of `log gap` against `log n` over the last three
/// entries is below `−0.1` (gaps under `tol` count as converged).
fn decaying(gaps: &[(f64, f64)], tol: f64) -> bool {
    if gaps.len() < 3 {
        return false;
    }
    let tail = &gaps[gaps.len() - 3..];
    if tail.iter().all(|(_, g)| *g <= tol) {
        return true;
    }
    let pts: Vec<(f64, f64)> = tail.iter().map(|(n, g)| (n.ln(), g.max(tol * 1e-3).ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxx > 0.0 && sxy / sxx < -0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Some positive-measure set of atoms with inf-compact `f(t, ·)`.
    A,
    /// `B` bounded and closed.
    B,
    /// `f(t, ·)` Lipschitz with a q-integrable constant.
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sufficiency {
    pub criterion: Criterion,
    pub pass: bool,
    pub evidence: String,
    /// `Σ μ(t)·K(t)^q` for criterion (c).
    pub integrated_constant: Option<f64>,
}

/// Numerical check of one sufficient condition for `∧_{p,B} E_f = inf_B E_f`.
///
/// (a) probes sublevel sets `{f(t, ·) ≤ f(t, c) + 1}` along rays from the
/// center `c` of `B` out to radius `2^20`; (b) is boundedness of `B`; (c) asks
/// the Lipschitz oracle on the ball that every prox solve can reach and
/// re-checks it on random pairs.
pub fn robustness_sufficiency(
    space: &MeasureSpace,
    f: &dyn Integrand,
    region: &Region,
    criterion: Criterion,
    p: f64,
) -> Result<Sufficiency> {
    region.validate()?;
    let c = region.center();
    let d = f.dim();
    match criterion {
        Criterion::A => {
            let dirs = probe_directions(d, 36);
            for atom in space.atoms().iter().filter(|a| a.weight > 0.0) {
                let level = f.value(atom, &c) + 1.0;
                if !level.is_finite() {
                    continue;
                }
                let bounded = dirs.iter().all(|u| {
                    // find the first radius leaving the sublevel set and check it stays out
                    let vals: Vec<f64> = (0..=20).map(|k| f.value(atom, &vecops::axpy(&c, 2f64.powi(k), u))).collect();
                    match vals.iter().position(|v| *v > level) {
                        Some(k) => vals[k..].iter().all(|v| *v > level),
                        None => false,
                    }
                });
                if bounded {
                    return Ok(Sufficiency {
                        criterion,
                        pass: true,
                        evidence: format!("sublevel sets of f at atom `{}` are bounded on all probe rays", atom.tag),
                        integrated_constant: None,
                    });
                }
            }
            Ok(Sufficiency {
                criterion,
                pass: false,
                evidence: "no positive-weight atom with bounded sampled sublevel sets".into(),
                integrated_constant: None,
            })
        }
        Criterion::B => Ok(Sufficiency {
            criterion,
            pass: true,
            evidence: "B is closed and bounded, hence compact".into(),
            integrated_constant: None,
        }),
        Criterion::C => {
            let q = p / (p - 1.0);
            let reach = region.outer_radius()
                + 1.0
                + space
                    .atoms()
                    .iter()
                    .filter(|a| a.weight > 0.0)
                    .map(|a| (f.value(a, &c) - f.lower_bound(a)).max(0.0).powf(1.0 / p))
                    .filter(|r| r.is_finite())
                    .fold(0.0, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut terms = vec![];
            for atom in space.atoms() {
                let k = f
                    .lipschitz_on_ball(atom, &c, reach)
                    .ok_or_else(|| Error::MissingOracle(format!("Lipschitz constant at atom `{}`", atom.tag)))?;
                if atom.weight == 0.0 {
                    continue;
                }
                for _ in 0..64 {
                    let a: Vec<f64> = (0..d)
                        .map(|i| c[i] + rng.gen_range(-reach..reach) / (d as f64).sqrt())
                        .collect();
                    let b: Vec<f64> = (0..d)
                        .map(|i| c[i] + rng.gen_range(-reach..reach) / (d as f64).sqrt())
                        .collect();
                    let lhs = (f.value(atom, &a) - f.value(atom, &b)).abs();
                    let rhs = k * vecops::dist(&a, &b);
                    if !(lhs <= rhs * (1.0 + 1e-9) + 1e-12) {
                        return Ok(Sufficiency {
                            criterion,
                            pass: false,
                            evidence: format!("Lipschitz bound {k} violated at atom `{}`", atom.tag),
                            integrated_constant: None,
                        });
                    }
                }
                terms.push(atom.weight * k.powf(q));
            }
            let total = csum(terms);
            Ok(Sufficiency {
                criterion,
                pass: total.is_finite(),
                evidence: format!("Lipschitz on the ball of radius {reach:.3} around the center of B"),
                integrated_constant: Some(total),
            })
        }
    }
}
