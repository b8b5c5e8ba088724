//! Finite measure spaces as weighted atoms, with the two proof-level
//! constructions: appending penalty atoms and renormalizing by a density.

use crate::error::{Error, Result};
use crate::extended::csum;
use crate::integrand::Integrand;
use crate::setvalued::SetRepr;
use crate::vecops;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

/// One atom: an opaque tag, a nonnegative weight and, for quadratures of an
/// interval, the abscissa the atom stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub tag: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abscissa: Option<f64>,
}

impl Atom {
    pub fn new(tag: impl Into<String>, weight: f64) -> Self {
        Self {
            tag: tag.into(),
            weight,
            abscissa: None,
        }
    }

    pub fn at(tag: impl Into<String>, weight: f64, abscissa: f64) -> Self {
        Self {
            tag: tag.into(),
            weight,
            abscissa: Some(abscissa),
        }
    }
}

/// What the atom list approximates, when it approximates something.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Lebesgue measure on `]0, 1]`.
    UnitInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSpace {
    atoms: Vec<Atom>,
    total_mass: f64,
    reference: Option<Reference>,
    /// Mass dropped when a σ-finite space was truncated to finitely many atoms.
    truncated_tail: Option<f64>,
}

impl MeasureSpace {
    /// Builds a space from explicit atoms. Weights must be finite and ≥ 0,
    /// tags unique.
    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(atoms.len());
        for (index, a) in atoms.iter().enumerate() {
            if !a.weight.is_finite() {
                return Err(Error::NonFiniteWeight { index, weight: a.weight });
            }
            if a.weight < 0.0 {
                return Err(Error::NegativeWeight { index, weight: a.weight });
            }
            if !seen.insert(a.tag.as_str()) {
                return Err(Error::DuplicateTag(a.tag.clone()));
            }
        }
        let total_mass = csum(atoms.iter().map(|a| a.weight));
        Ok(Self {
            atoms,
            total_mass,
            reference: None,
            truncated_tail: None,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn reference(&self) -> Option<Reference> {
        self.reference
    }

    pub fn truncated_tail(&self) -> Option<f64> {
        self.truncated_tail
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn atom(&self, tag: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| a.tag == tag)
    }

    /// Replaces one atom by two halves with tags `tag#0`, `tag#1`.
    pub fn split_atom(&self, index: usize) -> Result<Self> {
        let a = self
            .atoms
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("no atom at index {index}")))?;
        let mut atoms = Vec::with_capacity(self.atoms.len() + 1);
        atoms.extend_from_slice(&self.atoms[..index]);
        for k in 0..2 {
            atoms.push(Atom {
                tag: format!("{}#{k}", a.tag),
                weight: a.weight / 2.0,
                abscissa: a.abscissa,
            });
        }
        atoms.extend_from_slice(&self.atoms[index + 1..]);
        let mut s = Self::from_atoms(atoms)?;
        s.reference = self.reference;
        Ok(s)
    }
}

/// `[("a",1),("b",1)]` style constructor.
pub fn make_finite_atoms<S: AsRef<str>>(pairs: &[(S, f64)]) -> Result<MeasureSpace> {
    MeasureSpace::from_atoms(pairs.iter().map(|(t, w)| Atom::new(t.as_ref(), *w)).collect())
}

/// Quadrature of Lebesgue measure on `]0, 1]`: cell `k < n-1` is
/// `[ratio^(k+1), ratio^k]`, the last cell is `[0, ratio^(n-1)]`. Atoms sit at
/// cell midpoints with the cell length as weight.
pub fn geometric_grid_unit_interval(n_cells: usize, ratio: f64) -> Result<MeasureSpace> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::BadRatio(ratio));
    }
    if n_cells == 0 {
        return Err(Error::InvalidArgument("n_cells must be at least 1".into()));
    }
    let mut atoms = Vec::with_capacity(n_cells);
    let mut right = 1.0_f64;
    for k in 0..n_cells {
        let left = if k + 1 == n_cells { 0.0 } else { ratio.powi(k as i32 + 1) };
        atoms.push(Atom::at(format!("g{k}"), right - left, 0.5 * (left + right)));
        right = left;
    }
    Ok(MeasureSpace::from_atoms(atoms)?.with_reference(Reference::UnitInterval))
}

/// Midpoint rule on `]0, 1]` with `n_cells` equal cells.
pub fn uniform_grid_unit_interval(n_cells: usize) -> Result<MeasureSpace> {
    if n_cells == 0 {
        return Err(Error::InvalidArgument("n_cells must be at least 1".into()));
    }
    let h = 1.0 / n_cells as f64;
    let atoms = (0..n_cells)
        .map(|k| Atom::at(format!("u{k}"), h, (k as f64 + 0.5) * h))
        .collect();
    Ok(MeasureSpace::from_atoms(atoms)?.with_reference(Reference::UnitInterval))
}

/// Counting measure on `{1, ..., n}` renormalized by the density `k(i) = decay^i`.
/// The dropped mass `Σ_{i>n} decay^i` is recorded as the truncation tail.
pub fn counting_truncation(n_atoms: usize, decay: f64) -> Result<MeasureSpace> {
    if !(decay > 0.0 && decay < 1.0) {
        return Err(Error::InvalidArgument(format!("decay {decay} is outside (0, 1)")));
    }
    let atoms = (1..=n_atoms)
        .map(|i| Atom::at(format!("n{i}"), decay.powi(i as i32), i as f64))
        .collect();
    let mut s = MeasureSpace::from_atoms(atoms)?;
    s.truncated_tail = Some(decay.powi(n_atoms as i32 + 1) / (1.0 - decay));
    Ok(s)
}

/// Per-atom values keyed by tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomFunction<T>(pub BTreeMap<String, T>);

impl<T: Clone> AtomFunction<T> {
    pub fn constant(space: &MeasureSpace, value: T) -> Self {
        Self(space.atoms().iter().map(|a| (a.tag.clone(), value.clone())).collect())
    }

    pub fn from_fn(space: &MeasureSpace, mut f: impl FnMut(&Atom) -> T) -> Self {
        Self(space.atoms().iter().map(|a| (a.tag.clone(), f(a))).collect())
    }

    pub fn get(&self, tag: &str) -> Result<&T> {
        self.0.get(tag).ok_or_else(|| Error::MissingAtomValue(tag.to_string()))
    }

    /// Checks that every atom of `space` has a value.
    pub fn check_defined_on(&self, space: &MeasureSpace) -> Result<()> {
        for a in space.atoms() {
            self.get(&a.tag)?;
        }
        Ok(())
    }
}

/// A smooth scalar function on `ℝ^d` with its gradient.
#[derive(Clone)]
pub struct SmoothFunction {
    pub dim: usize,
    pub value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub gradient: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl SmoothFunction {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            value: Arc::new(|_| 0.0),
            gradient: Arc::new(move |_| vec![0.0; dim]),
        }
    }

    /// `y ↦ ⟨slope, y - base⟩ - c‖y - base‖²`.
    pub fn concave_quadratic(base: Vec<f64>, slope: Vec<f64>, c: f64) -> Self {
        let dim = base.len();
        let (b1, s1) = (base.clone(), slope.clone());
        Self {
            dim,
            value: Arc::new(move |y| {
                let d = vecops::sub(y, &b1);
                vecops::dot(&s1, &d) - c * vecops::norm2(&d)
            }),
            gradient: Arc::new(move |y| {
                let d = vecops::sub(y, &base);
                slope.iter().zip(&d).map(|(s, di)| s - 2.0 * c * di).collect()
            }),
        }
    }
}

/// Closed convex constraint sets used by the penalty atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexConstraint {
    Whole,
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `(center + span(basis)) ∩ ball(center, radius)`; `basis` is orthonormalized on use.
    AffineBall {
        center: Vec<f64>,
        basis: Vec<Vec<f64>>,
        radius: f64,
    },
}

impl ConvexConstraint {
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            ConvexConstraint::Whole => true,
            ConvexConstraint::Ball { center, radius } => vecops::dist(x, center) <= radius + tol,
            ConvexConstraint::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConvexConstraint::AffineBall { center, basis, radius } => {
                let d = vecops::sub(x, center);
                let q = vecops::orthonormalize(basis);
                let proj = vecops::project_onto_span(&d, &q);
                vecops::dist(&proj, &d) <= tol && vecops::norm(&d) <= radius + tol
            }
        }
    }

    /// Normal cone at `x` (assumed in the set), as a cone in `ℝ^d`.
    pub fn normal_cone(&self, x: &[f64], dim: usize) -> SetRepr {
        let tol = 1e-9;
        match self {
            ConvexConstraint::Whole => SetRepr::origin(dim),
            ConvexConstraint::Ball { center, radius } => {
                let d = vecops::sub(x, center);
                if vecops::norm(&d) >= radius - tol {
                    SetRepr::cone(dim, vec![d])
                } else {
                    SetRepr::origin(dim)
                }
            }
            ConvexConstraint::Box { lower, upper } => {
                let mut gens = Vec::new();
                for i in 0..dim {
                    if x[i] <= lower[i] + tol {
                        gens.push(vecops::unit(dim, i, -1.0));
                    }
                    if x[i] >= upper[i] - tol {
                        gens.push(vecops::unit(dim, i, 1.0));
                    }
                }
                SetRepr::cone(dim, gens)
            }
            ConvexConstraint::AffineBall { center, basis, radius } => {
                let q = vecops::orthonormalize(basis);
                let mut gens = Vec::new();
                for v in vecops::orthogonal_complement(&q, dim) {
                    gens.push(vecops::scale(&v, -1.0));
                    gens.push(v);
                }
                let d = vecops::sub(x, center);
                if vecops::norm(&d) >= radius - tol {
                    gens.push(d);
                }
                SetRepr::cone(dim, gens)
            }
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        if self.contains(x, 1e-12) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Tags of the two atoms appended by [`augment_with_penalty_atoms`].
pub const SMOOTH_ATOM: &str = "omega_smooth";
pub const CONSTRAINT_ATOM: &str = "omega_constraint";

/// Appends two unit atoms: one carrying `-phi`, one carrying the indicator of
/// `constraint`. The returned transformer extends any integrand accordingly, so
/// the extended integral at `x` equals `E_f(x) - phi(x) + δ_K(x)`.
pub fn augment_with_penalty_atoms(
    space: &MeasureSpace,
    phi: SmoothFunction,
    constraint: ConvexConstraint,
) -> Result<(MeasureSpace, PenaltyAugmentation)> {
    for tag in [SMOOTH_ATOM, CONSTRAINT_ATOM] {
        if space.atom(tag).is_some() {
            return Err(Error::DuplicateTag(tag.to_string()));
        }
    }
    let mut atoms = space.atoms().to_vec();
    atoms.push(Atom::new(SMOOTH_ATOM, 1.0));
    atoms.push(Atom::new(CONSTRAINT_ATOM, 1.0));
    let augmented = MeasureSpace::from_atoms(atoms)?;
    Ok((augmented, PenaltyAugmentation { phi, constraint }))
}

#[derive(Clone)]
pub struct PenaltyAugmentation {
    pub phi: SmoothFunction,
    pub constraint: ConvexConstraint,
}

impl PenaltyAugmentation {
    pub fn extend(&self, base: Arc<dyn Integrand>) -> AugmentedIntegrand {
        AugmentedIntegrand {
            base,
            phi: self.phi.clone(),
            constraint: self.constraint.clone(),
        }
    }
}

/// `f` on the original atoms, `-phi` and `δ_K` on the appended ones.
pub struct AugmentedIntegrand {
    base: Arc<dyn Integrand>,
    phi: SmoothFunction,
    constraint: ConvexConstraint,
}

impl Integrand for AugmentedIntegrand {
    fn name(&self) -> &str {
        "augmented"
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, atom: &Atom, x: &[f64]) -> f64 {
        match atom.tag.as_str() {
            SMOOTH_ATOM => -(self.phi.value)(x),
            CONSTRAINT_ATOM => self.constraint.value(x),
            _ => self.base.value(atom, x),
        }
    }

    fn gradient(&self, atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        match atom.tag.as_str() {
            SMOOTH_ATOM => Some(vecops::scale(&(self.phi.gradient)(x), -1.0)),
            CONSTRAINT_ATOM => None,
            _ => self.base.gradient(atom, x),
        }
    }

    fn frechet_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        match atom.tag.as_str() {
            SMOOTH_ATOM => Some(SetRepr::point(vecops::scale(&(self.phi.gradient)(x), -1.0))),
            CONSTRAINT_ATOM => {
                if self.constraint.contains(x, 1e-9) {
                    Some(self.constraint.normal_cone(x, self.dim()))
                } else {
                    Some(SetRepr::empty(self.dim()))
                }
            }
            _ => self.base.frechet_subdifferential(atom, x),
        }
    }

    fn lower_bound(&self, atom: &Atom) -> f64 {
        match atom.tag.as_str() {
            SMOOTH_ATOM => f64::NEG_INFINITY,
            CONSTRAINT_ATOM => 0.0,
            _ => self.base.lower_bound(atom),
        }
    }

    fn minimizer_hint(&self, atom: &Atom) -> Option<Vec<f64>> {
        match atom.tag.as_str() {
            SMOOTH_ATOM | CONSTRAINT_ATOM => None,
            _ => self.base.minimizer_hint(atom),
        }
    }
}

/// Rescales weights by a positive density `k`; the returned transformer divides
/// integrand values by `k`, leaving every integral unchanged.
pub fn renormalize_to_finite(space: &MeasureSpace, density: &AtomFunction<f64>) -> Result<(MeasureSpace, Renormalization)> {
    let mut atoms = Vec::with_capacity(space.len());
    for a in space.atoms() {
        let k = *density.get(&a.tag)?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::NonPositiveDensity {
                tag: a.tag.clone(),
                value: k,
            });
        }
        atoms.push(Atom {
            tag: a.tag.clone(),
            weight: a.weight * k,
            abscissa: a.abscissa,
        });
    }
    let mut out = MeasureSpace::from_atoms(atoms)?;
    out.reference = space.reference;
    out.truncated_tail = space.truncated_tail;
    Ok((
        out,
        Renormalization {
            density: density.clone(),
        },
    ))
}

#[derive(Debug, Clone)]
pub struct Renormalization {
    pub density: AtomFunction<f64>,
}

impl Renormalization {
    pub fn apply(&self, base: Arc<dyn Integrand>) -> RenormalizedIntegrand {
        RenormalizedIntegrand {
            base,
            density: self.density.clone(),
        }
    }
}

/// `f / k` atom by atom.
pub struct RenormalizedIntegrand {
    base: Arc<dyn Integrand>,
    density: AtomFunction<f64>,
}

impl RenormalizedIntegrand {
    fn k(&self, atom: &Atom) -> f64 {
        self.density.get(&atom.tag).copied().unwrap_or(f64::NAN)
    }
}

impl Integrand for RenormalizedIntegrand {
    fn name(&self) -> &str {
        "renormalized"
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, atom: &Atom, x: &[f64]) -> f64 {
        self.base.value(atom, x) / self.k(atom)
    }

    fn gradient(&self, atom: &Atom, x: &[f64]) -> Option<Vec<f64>> {
        let k = self.k(atom);
        self.base.gradient(atom, x).map(|g| vecops::scale(&g, 1.0 / k))
    }

    fn frechet_subdifferential(&self, atom: &Atom, x: &[f64]) -> Option<SetRepr> {
        let k = self.k(atom);
        self.base.frechet_subdifferential(atom, x).map(|s| s.scaled(1.0 / k))
    }

    fn lower_bound(&self, atom: &Atom) -> f64 {
        self.base.lower_bound(atom) / self.k(atom)
    }

    fn minimizer_hint(&self, atom: &Atom) -> Option<Vec<f64>> {
        self.base.minimizer_hint(atom)
    }

    fn is_convex(&self) -> bool {
        self.base.is_convex()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{catalog, integral_value, Params};

    #[test]
    fn two_unit_atoms_have_mass_two() {
        let s = make_finite_atoms(&[("a", 1.0), ("b", 1.0)]).unwrap();
        assert_eq!(s.total_mass(), 2.0);
    }

    #[test]
    fn empty_space_is_valid() {
        let s = make_finite_atoms::<&str>(&[]).unwrap();
        assert_eq!(s.total_mass(), 0.0);
        assert!(s.is_empty());
    }

    #[test]
    fn probability_space() {
        let s = make_finite_atoms(&[("a", 0.25), ("b", 0.75)]).unwrap();
        assert_eq!(s.total_mass(), 1.0);
    }

    #[test]
    fn negative_weight_names_index() {
        let e = make_finite_atoms(&[("a", 1.0), ("b", -0.5)]).unwrap_err();
        assert_eq!(e, Error::NegativeWeight { index: 1, weight: -0.5 });
    }

    #[test]
    fn duplicate_tags_rejected() {
        let e = make_finite_atoms(&[("a", 1.0), ("a", 1.0)]).unwrap_err();
        assert_eq!(e, Error::DuplicateTag("a".into()));
    }

    #[test]
    fn single_cell_grid() {
        let s = geometric_grid_unit_interval(1, 0.5).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.atoms()[0].weight, 1.0);
        assert_eq!(s.atoms()[0].abscissa, Some(0.5));
    }

    #[test]
    fn grid_ratio_outside_unit_interval_rejected() {
        assert_eq!(geometric_grid_unit_interval(10, 1.0).unwrap_err(), Error::BadRatio(1.0));
        assert!(geometric_grid_unit_interval(10, 0.0).is_err());
        assert!(geometric_grid_unit_interval(10, -0.3).is_err());
    }

    #[test]
    fn inverse_square_root_quadrature() {
        // ∫₀¹ t^{-1/2} dt = [2√t]₀¹ = 2
        let s = geometric_grid_unit_interval(10_000, 0.999).unwrap();
        let q = csum(s.atoms().iter().map(|a| a.weight / a.abscissa.unwrap().sqrt()));
        assert!((q - 2.0).abs() <= 1e-2, "quadrature {q}");
    }

    #[test]
    fn augmentation_adds_two_unit_atoms() {
        let s = make_finite_atoms(&[("a", 1.0), ("b", 1.0)]).unwrap();
        let (aug, _) = augment_with_penalty_atoms(&s, SmoothFunction::zero(1), ConvexConstraint::Whole).unwrap();
        assert_eq!(aug.total_mass(), 4.0);
    }

    #[test]
    fn augmentation_tag_collision() {
        let s = make_finite_atoms(&[(SMOOTH_ATOM, 1.0)]).unwrap();
        assert!(matches!(
            augment_with_penalty_atoms(&s, SmoothFunction::zero(1), ConvexConstraint::Whole),
            Err(Error::DuplicateTag(_))
        ));
    }

    #[test]
    fn augmented_square_with_linear_phi() {
        // f = x² on one unit atom, phi = 2x, K = [-1, 1], at x = 1: 1 - 2 + 0
        let s = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let phi = SmoothFunction {
            dim: 1,
            value: Arc::new(|x| 2.0 * x[0]),
            gradient: Arc::new(|_| vec![2.0]),
        };
        let k = ConvexConstraint::Box {
            lower: vec![-1.0],
            upper: vec![1.0],
        };
        let (aug, t) = augment_with_penalty_atoms(&s, phi, k).unwrap();
        let f = catalog("norm_power", &Params::from_json(r#"{"p":2}"#).unwrap()).unwrap();
        let ext = t.extend(f);
        let v = integral_value(&aug, &ext, &[1.0]).unwrap();
        assert_eq!(v.value.finite(), Some(-1.0));
        let outside = integral_value(&aug, &ext, &[1.5]).unwrap();
        assert!(!outside.value.is_finite());
    }

    #[test]
    fn renormalize_two_atoms() {
        let s = make_finite_atoms(&[("a", 1.0), ("b", 1.0)]).unwrap();
        let mut d = BTreeMap::new();
        d.insert("a".to_string(), 2.0);
        d.insert("b".to_string(), 0.5);
        let (r, t) = renormalize_to_finite(&s, &AtomFunction(d)).unwrap();
        let w: Vec<f64> = r.atoms().iter().map(|a| a.weight).collect();
        assert_eq!(w, vec![2.0, 0.5]);
        let f = catalog("norm_power", &Params::from_json(r#"{"p":2}"#).unwrap()).unwrap();
        let g = t.apply(f.clone());
        let x = [0.7];
        let lhs = integral_value(&r, &g, &x).unwrap().value.finite().unwrap();
        let rhs = integral_value(&s, f.as_ref(), &x).unwrap().value.finite().unwrap();
        assert!((lhs - rhs).abs() <= 1e-15);
    }

    #[test]
    fn nonpositive_density_rejected() {
        let s = make_finite_atoms(&[("a", 1.0)]).unwrap();
        let d = AtomFunction::constant(&s, 0.0);
        assert!(matches!(renormalize_to_finite(&s, &d), Err(Error::NonPositiveDensity { .. })));
    }

    #[test]
    fn counting_truncation_reports_tail() {
        let s = counting_truncation(10, 0.5).unwrap();
        assert!((s.truncated_tail().unwrap() - 0.5f64.powi(10)).abs() < 1e-15);
        assert!((s.total_mass() + s.truncated_tail().unwrap() - 1.0).abs() < 1e-15);
    }
}
