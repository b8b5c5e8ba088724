//! Normal integrands as oracles, integral evaluation and the built-in catalog.

use crate::error::{Error, Result};
use crate::extended::{ExtReal, IntegralValue, SplitAccumulator};
use crate::measure_space::{Atom, MeasureSpace, Reference};
use crate::setvalued::SetRepr;
use crate::vecops::{self, direction_grid, norm};
use serde::Serialize;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::sync::Arc;

/// `f(t, x)` with values in `[0, +∞]` (or bounded below by an affine minorant)
/// plus whatever analytic information is available.
///
/// Oracles must be pure. `value` may return `f64::INFINITY`; `NaN` is reported
/// as an error by every consumer.
pub trait Integrand: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, atom: &Atom, x: &[f64]) -> f64;

    fn gradient(&self, _atom: &Atom, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Fréchet subdifferential of `f(t, ·)` at `x`.
    fn frechet_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        self.gradient(atom, x).map(SetRepr::point)
    }

    /// Limiting subdifferential of `f(t, ·)` at `x`.
    fn limiting_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        self.frechet_subdifferential(atom, x)
    }

    /// Singular subdifferential of `f(t, ·)` at `x`.
    fn singular_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        self.gradient(atom, x).map(|_| SetRepr::origin(self.dim()))
    }

    /// A point where `f(t, ·)` attains its infimum, if known.
    fn minimizer_hint(&self, _atom: &Atom) -> Option<Vec<f64>> {
        None
    }

    /// A lower bound of `inf_x f(t, x)`.
    fn lower_bound(&self, _atom: &Atom) -> f64 {
        0.0
    }

    /// Lipschitz constant of `f(t, ·)` on `ball(center, radius)`.
    fn lipschitz_on_ball(&self, _atom: &Atom, _center: &[f64], _radius: f64) -> Option<f64> {
        None
    }

    fn is_convex(&self) -> bool {
        false
    }

    /// Affine minorant `g` with `f ≥ g`, when the integrand was built as a tilt.
    fn minorant(&self) -> Option<AffineMinorant> {
        None
    }

    /// `f - g` for the minorant above.
    fn shifted(&self) -> Option<Arc<dyn Integrand>> {
        None
    }

    /// Closed form of `x ↦ ∫_0^1 f(t, x) dt` for integrands defined on `]0, 1]`.
    fn unit_interval_functional(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// `g(t, x) = ⟨slope, x⟩ + offset`, the same on every atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineMinorant {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl AffineMinorant {
    pub fn value(&self, x: &[f64]) -> f64 {
        vecops::dot(&self.slope, x) + self.offset
    }

    /// `sup_u ‖∇g(t, u)‖`.
    pub fn gradient_bound(&self) -> f64 {
        norm(&self.slope)
    }
}

/// One vector of `ℝ^d` per atom, in atom order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    pub values: Vec<Vec<f64>>,
}

impl SampledFunction {
    pub fn new(space: &MeasureSpace, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidArgument(format!(
                "sampled function has {} values for {} atoms",
                values.len(),
                space.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(space: &MeasureSpace, x: &[f64]) -> Self {
        Self {
            values: vec![x.to_vec(); space.len()],
        }
    }

    /// `(Σ weight·‖w(t)‖^p)^{1/p}`.
    pub fn lp_norm(&self, space: &MeasureSpace, p: f64) -> f64 {
        crate::extended::csum(
            space
                .atoms()
                .iter()
                .zip(&self.values)
                .map(|(a, v)| a.weight * norm(v).powf(p)),
        )
        .powf(1.0 / p)
    }

    /// Max of `‖w(t)‖` over positive-weight atoms.
    pub fn linf_norm(&self, space: &MeasureSpace) -> f64 {
        space
            .atoms()
            .iter()
            .zip(&self.values)
            .filter(|(a, _)| a.weight > 0.0)
            .map(|(_, v)| norm(v))
            .fold(0.0, f64::max)
    }

    pub fn minus_constant(&self, x: &[f64]) -> Self {
        Self {
            values: self.values.iter().map(|v| vecops::sub(v, x)).collect(),
        }
    }

    /// `Σ weight·w(t)`.
    pub fn integral(&self, space: &MeasureSpace) -> Vec<f64> {
        let d = self.values.first().map(|v| v.len()).unwrap_or(0);
        (0..d)
            .map(|i| crate::extended::csum(space.atoms().iter().zip(&self.values).map(|(a, v)| a.weight * v[i])))
            .collect()
    }
}

fn eval_ext(f: &dyn Integrand, atom: &Atom, x: &[f64]) -> Result<ExtReal> {
    ExtReal::from_f64(f.value(atom, x)).ok_or_else(|| Error::NanValue { tag: atom.tag.clone() })
}

fn check_dim(f: &dyn Integrand, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `E_f(x) = Σ weight·f(t, x)` with sign-split compensated accumulation.
pub fn integral_value(space: &MeasureSpace, f: &dyn Integrand, x: &[f64]) -> Result<IntegralValue> {
    check_dim(f, x)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("evaluation point must be finite".into()));
    }
    let mut acc = SplitAccumulator::new();
    for atom in space.atoms() {
        acc.add(&atom.tag, atom.weight, eval_ext(f, atom, x)?);
    }
    Ok(acc.finish())
}

/// `I_f(w) = Σ weight·f(t, w(t))`.
pub fn functional_value(space: &MeasureSpace, f: &dyn Integrand, w: &SampledFunction) -> Result<IntegralValue> {
    if w.values.len() != space.len() {
        return Err(Error::InvalidArgument("sampled function does not match the space".into()));
    }
    let mut acc = SplitAccumulator::new();
    for (atom, v) in space.atoms().iter().zip(&w.values) {
        check_dim(f, v)?;
        acc.add(&atom.tag, atom.weight, eval_ext(f, atom, v)?);
    }
    Ok(acc.finish())
}

/// `∫ |f(t, w(t)) − f(t, x)| dμ(t)`.
pub fn value_gap(space: &MeasureSpace, f: &dyn Integrand, w: &SampledFunction, x: &[f64]) -> Result<f64> {
    check_dim(f, x)?;
    let mut terms = Vec::with_capacity(space.len());
    for (atom, v) in space.atoms().iter().zip(&w.values) {
        if atom.weight == 0.0 {
            continue;
        }
        let a = eval_ext(f, atom, v)?;
        let b = eval_ext(f, atom, x)?;
        match (a, b) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => terms.push(atom.weight * (a - b).abs()),
            _ => return Err(Error::InfiniteValue { tag: atom.tag.clone() }),
        }
    }
    Ok(crate::extended::csum(terms))
}

/// `E_f` as a plain scalar oracle: the closed form when the space approximates
/// `]0, 1]` and `f` has one, the atom sum otherwise. Errors map to NaN.
pub fn functional_oracle<'a>(space: &'a MeasureSpace, f: &'a dyn Integrand) -> impl Fn(&[f64]) -> f64 + 'a {
    let closed = space.reference() == Some(Reference::UnitInterval);
    move |x: &[f64]| {
        if closed {
            if let Some(v) = f.unit_interval_functional(x) {
                return v;
            }
        }
        integral_value(space, f, x).map_or(f64::NAN, |v| v.value.to_f64())
    }
}

/// `Σ weight·∇f(t, x)`; fails if an atom of positive weight has no gradient.
pub fn integrated_gradient(space: &MeasureSpace, f: &dyn Integrand, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(f, x)?;
    let d = f.dim();
    let mut parts = vec![Vec::with_capacity(space.len()); d];
    for atom in space.atoms() {
        if atom.weight == 0.0 {
            continue;
        }
        let g = f
            .gradient(atom, x)
            .ok_or_else(|| Error::MissingOracle(format!("gradient at atom `{}`", atom.tag)))?;
        for i in 0..d {
            parts[i].push(atom.weight * g[i]);
        }
    }
    Ok(parts.into_iter().map(crate::extended::csum).collect())
}

/// Catalog parameters: a JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub Map<String, Value>);

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        match serde_json::from_str::<Value>(s) {
            Ok(Value::Object(m)) => Ok(Self(m)),
            Ok(_) => Err(Error::InvalidArgument("parameters must be a JSON object".into())),
            Err(e) => Err(Error::InvalidArgument(format!("parameters: {e}"))),
        }
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        match v {
            Value::Object(m) => Ok(Self(m.clone())),
            Value::Null => Ok(Self::default()),
            _ => Err(Error::InvalidArgument("parameters must be a JSON object".into())),
        }
    }

    fn bad(name: &str, param: &str, reason: &str) -> Error {
        Error::BadParameter {
            name: name.into(),
            param: param.into(),
            reason: reason.into(),
        }
    }

    pub fn f64_or(&self, name: &str, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| Self::bad(name, key, "expected a number")),
        }
    }

    pub fn usize_or(&self, name: &str, key: &str, default: usize) -> Result<usize> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Self::bad(name, key, "expected a nonnegative integer")),
        }
    }

    pub fn vec_or(&self, name: &str, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => parse_vec(v).ok_or_else(|| Self::bad(name, key, "expected a number or array of numbers")),
        }
    }

    /// An object keyed by atom tag whose values broadcast to `dim`.
    fn tagged_vecs(&self, name: &str, key: &str, dim: usize) -> Result<BTreeMap<String, Vec<f64>>> {
        let mut out = BTreeMap::new();
        if let Some(v) = self.0.get(key) {
            let m = v
                .as_object()
                .ok_or_else(|| Self::bad(name, key, "expected an object keyed by atom tag"))?;
            for (tag, c) in m {
                let c = parse_vec(c).ok_or_else(|| Self::bad(name, key, "expected numbers"))?;
                out.insert(tag.clone(), broadcast(name, key, c, dim)?);
            }
        }
        Ok(out)
    }

    fn check_known(&self, name: &str, known: &[&str]) -> Result<()> {
        for k in self.0.keys() {
            if !known.contains(&k.as_str()) {
                return Err(Self::bad(name, k, "unknown parameter"));
            }
        }
        Ok(())
    }
}

fn parse_vec(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::Number(n) => n.as_f64().map(|x| vec![x]),
        Value::Array(a) => a.iter().map(|x| x.as_f64()).collect(),
        _ => None,
    }
}

/// Catalog entry description for listings.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub gradient: bool,
    pub subdifferential: bool,
    pub convex: bool,
    pub closed_form_functional: bool,
    pub defaults: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "example45a",
        formula: "x^{3/2} t^{x-1} for x > 0, else 0 (t in ]0,1])",
        gradient: true,
        subdifferential: true,
        convex: false,
        closed_form_functional: true,
        defaults: "{}",
    },
    CatalogEntry {
        name: "example45b",
        formula: "x^2 t^{x-1} for x > 0, else 0 (t in ]0,1])",
        gradient: true,
        subdifferential: true,
        convex: false,
        closed_form_functional: true,
        defaults: "{}",
    },
    CatalogEntry {
        name: "norm_power",
        formula: "|x|^p",
        gradient: true,
        subdifferential: true,
        convex: true,
        closed_form_functional: false,
        defaults: r#"{"p": 2, "dim": 1}"#,
    },
    CatalogEntry {
        name: "separable_quadratic",
        formula: "|x - c(t)|^2 with c keyed by atom tag",
        gradient: true,
        subdifferential: true,
        convex: true,
        closed_form_functional: false,
        defaults: r#"{"dim": 1, "centers": {}, "default_center": 0}"#,
    },
    CatalogEntry {
        name: "indicator_halfline",
        formula: "0 if x >= lower, +inf otherwise",
        gradient: false,
        subdifferential: true,
        convex: true,
        closed_form_functional: false,
        defaults: r#"{"lower": 0}"#,
    },
    CatalogEntry {
        name: "abs_plus_square",
        formula: "a|x - s(t)| + b|x - s(t)|^2 with s keyed by atom tag",
        gradient: false,
        subdifferential: true,
        convex: true,
        closed_form_functional: false,
        defaults: r#"{"dim": 1, "a": 1, "b": 1, "shift": 0, "shifts": {}}"#,
    },
    CatalogEntry {
        name: "neg_abs_shifted",
        formula: "max(h - |x|, 0)",
        gradient: false,
        subdifferential: true,
        convex: false,
        closed_form_functional: false,
        defaults: r#"{"dim": 1, "height": 1}"#,
    },
];

/// Builds a catalog integrand.
pub fn catalog(name: &str, params: &Params) -> Result<Arc<dyn Integrand>> {
    Ok(match name {
        "example45a" => {
            params.check_known(name, &[])?;
            Arc::new(PowerTimesKernel::new("example45a", 1.5))
        }
        "example45b" => {
            params.check_known(name, &[])?;
            Arc::new(PowerTimesKernel::new("example45b", 2.0))
        }
        "norm_power" => {
            params.check_known(name, &["p", "dim"])?;
            let p = params.f64_or(name, "p", 2.0)?;
            if !(p > 1.0) {
                return Err(Params::bad(name, "p", "must be > 1"));
            }
            let dim = positive_dim(name, params)?;
            Arc::new(NormPower { p, dim })
        }
        "separable_quadratic" => {
            params.check_known(name, &["dim", "centers", "default_center"])?;
            let dim = positive_dim(name, params)?;
            let default_center = params.vec_or(name, "default_center", vec![0.0; dim])?;
            let default_center = broadcast(name, "default_center", default_center, dim)?;
            let centers = params.tagged_vecs(name, "centers", dim)?;
            Arc::new(SeparableQuadratic {
                dim,
                centers,
                default_center,
            })
        }
        "indicator_halfline" => {
            params.check_known(name, &["lower"])?;
            Arc::new(IndicatorHalfline {
                lower: params.f64_or(name, "lower", 0.0)?,
            })
        }
        "abs_plus_square" => {
            params.check_known(name, &["dim", "a", "b", "shift", "shifts"])?;
            let dim = positive_dim(name, params)?;
            let a = params.f64_or(name, "a", 1.0)?;
            let b = params.f64_or(name, "b", 1.0)?;
            if a < 0.0 || b < 0.0 {
                return Err(Params::bad(name, "a", "coefficients must be nonnegative"));
            }
            let shift = broadcast(name, "shift", params.vec_or(name, "shift", vec![0.0])?, dim)?;
            let shifts = params.tagged_vecs(name, "shifts", dim)?;
            Arc::new(AbsPlusSquare {
                dim,
                a,
                b,
                shift,
                shifts,
            })
        }
        "neg_abs_shifted" => {
            params.check_known(name, &["dim", "height"])?;
            let dim = positive_dim(name, params)?;
            let height = params.f64_or(name, "height", 1.0)?;
            if !(height > 0.0) {
                return Err(Params::bad(name, "height", "must be > 0"));
            }
            Arc::new(NegAbsShifted { dim, height })
        }
        other => return Err(Error::UnknownIntegrand(other.to_string())),
    })
}

fn positive_dim(name: &str, params: &Params) -> Result<usize> {
    let d = params.usize_or(name, "dim", 1)?;
    if d == 0 {
        return Err(Params::bad(name, "dim", "must be at least 1"));
    }
    Ok(d)
}

fn broadcast(name: &str, key: &str, v: Vec<f64>, dim: usize) -> Result<Vec<f64>> {
    match v.len() {
        n if n == dim => Ok(v),
        1 => Ok(vec![v[0]; dim]),
        _ => Err(Params::bad(name, key, "length does not match dim")),
    }
}

/// `f + ⟨slope, x⟩ + offset` with the affine part as declared minorant.
pub fn with_affine_minorant(base: Arc<dyn Integrand>, slope: Vec<f64>, offset: f64) -> Result<Arc<dyn Integrand>> {
    if slope.len() != base.dim() {
        return Err(Error::DimensionMismatch {
            expected: base.dim(),
            got: slope.len(),
        });
    }
    Ok(Arc::new(Tilted {
        base,
        g: AffineMinorant { slope, offset },
    }))
}

struct Tilted {
    base: Arc<dyn Integrand>,
    g: AffineMinorant,
}

impl Integrand for Tilted {
    fn name(&self) -> &str {
        self.base.name()
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, atom: &Atom, x: &[f64]) -> f64 {
        self.base.value(atom, x) + self.g.value(x)
    }
    fn gradient(&self, atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        self.base.gradient(atom, x).map(|g| vecops::add(&g, &self.g.slope))
    }
    fn frechet_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        self.base
            .frechet_subdifferential(atom, x)
            .map(|s| s.translated(&self.g.slope))
    }
    fn limiting_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        self.base
            .limiting_subdifferential(atom, x)
            .map(|s| s.translated(&self.g.slope))
    }
    fn singular_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        self.base.singular_subdifferential(atom, x)
    }
    fn lower_bound(&self, _atom: &Atom) -> f64 {
        f64::NEG_INFINITY
    }
    fn lipschitz_on_ball(&self, atom: &Atom, c: &[f64], r: f64) -> Option<f64> {
        self.base.lipschitz_on_ball(atom, c, r).map(|l| l + self.g.gradient_bound())
    }
    fn is_convex(&self) -> bool {
        self.base.is_convex()
    }
    fn minorant(&self) -> Option<AffineMinorant> {
        Some(self.g.clone())
    }
    fn shifted(&self) -> Option<Arc<dyn Integrand>> {
        Some(self.base.clone())
    }
}

/// `x^α t^{x−1}` for `x > 0`, else 0; `α ∈ {3/2, 2}` gives the two examples.
struct PowerTimesKernel {
    name: &'static str,
    alpha: f64,
}

impl PowerTimesKernel {
    fn new(name: &'static str, alpha: f64) -> Self {
        Self { name, alpha }
    }

    fn t(atom: &Atom) -> f64 {
        atom.abscissa.unwrap_or(f64::NAN)
    }
}

impl Integrand for PowerTimesKernel {
    fn name(&self) -> &str {
        self.name
    }
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, atom: &Atom, x: &[f64]) -> f64 {
        let t = Self::t(atom);
        if t.is_nan() {
            return f64::NAN;
        }
        let x = x[0];
        if x > 0.0 {
            x.powf(self.alpha) * t.powf(x - 1.0)
        } else {
            0.0
        }
    }
    fn gradient(&self, atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        let t = Self::t(atom);
        let x = x[0];
        if t.is_nan() {
            return Some(vec![f64::NAN]);
        }
        if x > 0.0 {
            let k = t.powf(x - 1.0);
            Some(vec![
                self.alpha * x.powf(self.alpha - 1.0) * k + x.powf(self.alpha) * t.ln() * k,
            ])
        } else {
            Some(vec![0.0])
        }
    }
    fn minimizer_hint(&self, _atom: &Atom) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }
    fn lipschitz_on_ball(&self, atom: &Atom, c: &[f64], r: f64) -> Option<f64> {
        // |∂f| on [c−r, c+r] ∩ ]0, ∞): sampled densely, with a safety factor.
        let lo = (c[0] - r).max(0.0);
        let hi = c[0] + r;
        if hi <= 0.0 {
            return Some(0.0);
        }
        let n = 400;
        let mut best = 0.0_f64;
        for k in 0..=n {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            if let Some(g) = self.gradient(atom, &[x]) {
                best = best.max(g[0].abs());
            }
        }
        Some(best * 1.05)
    }
    fn unit_interval_functional(&self, x: &[f64]) -> Option<f64> {
        // ∫₀¹ x^α t^{x−1} dt = x^{α−1} for x > 0
        let x = x[0];
        Some(if x > 0.0 { x.powf(self.alpha - 1.0) } else { 0.0 })
    }
}

struct NormPower {
    p: f64,
    dim: usize,
}

impl Integrand for NormPower {
    fn name(&self) -> &str {
        "norm_power"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _atom: &Atom, x: &[f64]) -> f64 {
        if self.p == 2.0 {
            vecops::norm2(x)
        } else {
            norm(x).powf(self.p)
        }
    }
    fn gradient(&self, _atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        let n = norm(x);
        if n == 0.0 {
            return Some(vec![0.0; self.dim]);
        }
        Some(vecops::scale(x, self.p * n.powf(self.p - 2.0)))
    }
    fn minimizer_hint(&self, _atom: &Atom) -> Option<Vec<f64>> {
        Some(vec![0.0; self.dim])
    }
    fn lipschitz_on_ball(&self, _atom: &Atom, c: &[f64], r: f64) -> Option<f64> {
        Some(self.p * (norm(c) + r).powf(self.p - 1.0))
    }
    fn is_convex(&self) -> bool {
        true
    }
}

struct SeparableQuadratic {
    dim: usize,
    centers: BTreeMap<String, Vec<f64>>,
    default_center: Vec<f64>,
}

impl SeparableQuadratic {
    fn center(&self, atom: &Atom) -> &[f64] {
        self.centers.get(&atom.tag).unwrap_or(&self.default_center)
    }
}

impl Integrand for SeparableQuadratic {
    fn name(&self) -> &str {
        "separable_quadratic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, atom: &Atom, x: &[f64]) -> f64 {
        vecops::norm2(&vecops::sub(x, self.center(atom)))
    }
    fn gradient(&self, atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        Some(vecops::scale(&vecops::sub(x, self.center(atom)), 2.0))
    }
    fn minimizer_hint(&self, atom: &Atom) -> Option<Vec<f64>> {
        Some(self.center(atom).to_vec())
    }
    fn lipschitz_on_ball(&self, atom: &Atom, c: &[f64], r: f64) -> Option<f64> {
        Some(2.0 * (vecops::dist(c, self.center(atom)) + r))
    }
    fn is_convex(&self) -> bool {
        true
    }
}

struct IndicatorHalfline {
    lower: f64,
}

impl Integrand for IndicatorHalfline {
    fn name(&self) -> &str {
        "indicator_halfline"
    }
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, _atom: &Atom, x: &[f64]) -> f64 {
        if x[0] >= self.lower {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn frechet_subdifferential(&self, _atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        Some(if x[0] > self.lower {
            SetRepr::point(vec![0.0])
        } else if x[0] == self.lower {
            SetRepr::cone(1, vec![vec![-1.0]])
        } else {
            SetRepr::empty(1)
        })
    }
    fn singular_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        self.frechet_subdifferential(atom, x)
    }
    fn minimizer_hint(&self, _atom: &Atom) -> Option<Vec<f64>> {
        Some(vec![self.lower])
    }
    fn is_convex(&self) -> bool {
        true
    }
}

struct AbsPlusSquare {
    dim: usize,
    a: f64,
    b: f64,
    shift: Vec<f64>,
    shifts: BTreeMap<String, Vec<f64>>,
}

impl AbsPlusSquare {
    fn shift(&self, atom: &Atom) -> &[f64] {
        self.shifts.get(&atom.tag).unwrap_or(&self.shift)
    }
}

impl Integrand for AbsPlusSquare {
    fn name(&self) -> &str {
        "abs_plus_square"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, atom: &Atom, x: &[f64]) -> f64 {
        let d = vecops::sub(x, self.shift(atom));
        self.a * norm(&d) + self.b * vecops::norm2(&d)
    }
    fn gradient(&self, atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        let d = vecops::sub(x, self.shift(atom));
        let n = norm(&d);
        if n == 0.0 && self.a > 0.0 {
            return None;
        }
        let s = if n == 0.0 { 0.0 } else { self.a / n };
        Some(vecops::scale(&d, s + 2.0 * self.b))
    }
    fn frechet_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        match self.gradient(atom, x) {
            Some(g) => Some(SetRepr::point(g)),
            None => Some(ball(self.dim, self.a)),
        }
    }
    fn singular_subdifferential(&self, _atom: &Atom, _x: &[f64]) -> Option<SetRepr> {
        Some(SetRepr::origin(self.dim))
    }
    fn minimizer_hint(&self, atom: &Atom) -> Option<Vec<f64>> {
        Some(self.shift(atom).to_vec())
    }
    fn lipschitz_on_ball(&self, atom: &Atom, c: &[f64], r: f64) -> Option<f64> {
        Some(self.a + 2.0 * self.b * (vecops::dist(c, self.shift(atom)) + r))
    }
    fn is_convex(&self) -> bool {
        true
    }
}

struct NegAbsShifted {
    dim: usize,
    height: f64,
}

impl Integrand for NegAbsShifted {
    fn name(&self) -> &str {
        "neg_abs_shifted"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _atom: &Atom, x: &[f64]) -> f64 {
        (self.height - norm(x)).max(0.0)
    }
    fn gradient(&self, _atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        let n = norm(x);
        if n == 0.0 || n == self.height {
            None
        } else if n > self.height {
            Some(vec![0.0; self.dim])
        } else {
            Some(vecops::scale(x, -1.0 / n))
        }
    }
    fn frechet_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        if let Some(g) = self.gradient(atom, x) {
            return Some(SetRepr::point(g));
        }
        let n = norm(x);
        if n == 0.0 {
            Some(SetRepr::empty(self.dim))
        } else {
            // kink where the cone meets zero: conv{0, -x/|x|}
            Some(SetRepr::convex(
                self.dim,
                vec![vec![0.0; self.dim], vecops::scale(x, -1.0 / n)],
                vec![],
            ))
        }
    }
    fn limiting_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        if norm(x) == 0.0 {
            // unit sphere: -x'/|x'| over nearby x'
            let pts = if self.dim == 1 {
                vec![vec![-1.0], vec![1.0]]
            } else {
                direction_grid(self.dim)
            };
            return Some(SetRepr::cloud(self.dim, pts, vec![]));
        }
        self.frechet_subdifferential(atom, x)
    }
    fn singular_subdifferential(&self, _atom: &Atom, _x: &[f64]) -> Option<SetRepr> {
        Some(SetRepr::origin(self.dim))
    }
    fn minimizer_hint(&self, _atom: &Atom) -> Option<Vec<f64>> {
        let mut v = vec![0.0; self.dim];
        v[0] = self.height;
        Some(v)
    }
    fn lipschitz_on_ball(&self, _atom: &Atom, _c: &[f64], _r: f64) -> Option<f64> {
        Some(1.0)
    }
}

fn ball(dim: usize, r: f64) -> SetRepr {
    if dim == 1 {
        return SetRepr::interval(Some(-r), Some(r));
    }
    SetRepr::convex(dim, direction_grid(dim).iter().map(|u| vecops::scale(u, r)).collect(), vec![])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::{geometric_grid_unit_interval, make_finite_atoms};

    fn p(s: &str) -> Params {
        Params::from_json(s).unwrap()
    }

    fn two_atom_quadratic() -> (MeasureSpace, Arc<dyn Integrand>) {
        let s = make_finite_atoms(&[("1", 1.0), ("2", 1.0)]).unwrap();
        let f = catalog("separable_quadratic", &p(r#"{"centers": {"1": 0, "2": 1}}"#)).unwrap();
        (s, f)
    }

    #[test]
    fn zero_integrand_integrates_to_zero() {
        let s = make_finite_atoms(&[("a", 1.0), ("b", 3.0)]).unwrap();
        let f = catalog("abs_plus_square", &p(r#"{"a": 0, "b": 0}"#)).unwrap();
        assert_eq!(integral_value(&s, f.as_ref(), &[0.3]).unwrap().value, ExtReal::Finite(0.0));
    }

    #[test]
    fn example45a_quarter() {
        let s = geometric_grid_unit_interval(10_000, 0.99).unwrap();
        let f = catalog("example45a", &Params::new()).unwrap();
        let v = integral_value(&s, f.as_ref(), &[0.25]).unwrap().value.finite().unwrap();
        assert!((v - 0.5).abs() <= 1e-3, "{v}");
    }

    #[test]
    fn two_atom_symmetric_value() {
        let (s, f) = two_atom_quadratic();
        let v = integral_value(&s, f.as_ref(), &[0.5]).unwrap();
        assert_eq!(v.value, ExtReal::Finite(0.5));
    }

    #[test]
    fn nan_names_the_atom() {
        // example45a without abscissae evaluates to NaN
        let s = make_finite_atoms(&[("a", 1.0), ("b", 1.0)]).unwrap();
        let f = catalog("example45a", &Params::new()).unwrap();
        assert_eq!(
            integral_value(&s, f.as_ref(), &[0.5]).unwrap_err(),
            Error::NanValue { tag: "a".into() }
        );
    }

    #[test]
    fn functional_value_examples() {
        let (s, f) = two_atom_quadratic();
        let w = SampledFunction::new(&s, vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(functional_value(&s, f.as_ref(), &w).unwrap().value, ExtReal::Finite(0.0));
        let c = SampledFunction::constant(&s, &[0.3]);
        assert_eq!(
            functional_value(&s, f.as_ref(), &c).unwrap().value,
            integral_value(&s, f.as_ref(), &[0.3]).unwrap().value
        );
        let empty = make_finite_atoms::<&str>(&[]).unwrap();
        let w0 = SampledFunction::new(&empty, vec![]).unwrap();
        assert_eq!(functional_value(&empty, f.as_ref(), &w0).unwrap().value, ExtReal::Finite(0.0));
    }

    #[test]
    fn value_gap_examples() {
        let s = make_finite_atoms(&[("a", 1.0), ("b", 1.0)]).unwrap();
        let f = catalog("norm_power", &p(r#"{"p": 2}"#)).unwrap();
        let w = SampledFunction::new(&s, vec![vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(value_gap(&s, f.as_ref(), &w, &[0.0]).unwrap(), 5.0);
        let c = SampledFunction::constant(&s, &[0.7]);
        assert_eq!(value_gap(&s, f.as_ref(), &c, &[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn value_gap_rejects_infinity() {
        let s = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let f = catalog("indicator_halfline", &Params::new()).unwrap();
        let w = SampledFunction::new(&s, vec![vec![-1.0]]).unwrap();
        assert!(matches!(
            value_gap(&s, f.as_ref(), &w, &[0.0]),
            Err(Error::InfiniteValue { .. })
        ));
    }

    #[test]
    fn norm_power_gradient() {
        let f = catalog("norm_power", &p(r#"{"p": 2, "dim": 2}"#)).unwrap();
        let a = Atom::new("a", 1.0);
        assert_eq!(f.gradient(&a, &[1.5, -2.0]).unwrap(), vec![3.0, -4.0]);
    }

    #[test]
    fn example45b_at_one_is_one() {
        let f = catalog("example45b", &Params::new()).unwrap();
        for t in [1e-9, 0.01, 0.5, 1.0] {
            assert!((f.value(&Atom::at("t", 1.0, t), &[1.0]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn example45a_subdifferential_at_zero() {
        let f = catalog("example45a", &Params::new()).unwrap();
        for t in [1e-6, 0.3, 1.0] {
            let s = f.limiting_subdifferential(&Atom::at("t", 1.0, t), &[0.0]).unwrap();
            assert_eq!(s.points, vec![vec![0.0]]);
        }
    }

    #[test]
    fn unknown_name() {
        assert_eq!(
            catalog("nope", &Params::new()).err(),
            Some(Error::UnknownIntegrand("nope".into()))
        );
    }

    #[test]
    fn unknown_parameter() {
        assert!(matches!(
            catalog("norm_power", &p(r#"{"q": 3}"#)),
            Err(Error::BadParameter { .. })
        ));
    }

    #[test]
    fn tilt_declares_minorant() {
        let base = catalog("norm_power", &Params::new()).unwrap();
        let f = with_affine_minorant(base, vec![0.5], -1.0).unwrap();
        let a = Atom::new("a", 1.0);
        let g = f.minorant().unwrap();
        for x in [-3.0, -0.1, 0.0, 2.0] {
            assert!(f.value(&a, &[x]) >= g.value(&[x]));
        }
        assert_eq!(f.shifted().unwrap().value(&a, &[2.0]), 4.0);
    }
}
