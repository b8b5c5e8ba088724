//! Property tests over randomly generated spaces, integrands and sets.

use proptest::prelude::*;
use std::sync::Arc;
use subdiff::bp_sequences::{ell_gradient, SeminormSpec};
use subdiff::envelope::{decoupled_infimum, stabilized_infimum, Region, SolverOptions, StabilizationMode};
use subdiff::estimates::{hypothesis_check, l1_bound, limiting_upper_estimate, EstimateOptions, LhsSource};
use subdiff::extended::{ExtReal, SplitAccumulator};
use subdiff::integrand::{functional_oracle, integral_value, with_affine_minorant, Params};
use subdiff::measure_space::{make_finite_atoms, renormalize_to_finite};
use subdiff::setvalued::{aumann_integral, compact_sole_test, hausdorff_distance, minkowski_sum, pitch, polar_cone, SetField};
use subdiff::subdiff_point::{all_estimates, ProbeSchedule};
use subdiff::vecops::direction_grid;
use subdiff::{catalog, AtomFunction, Integrand, MeasureSpace, SampledFunction, SetRepr};

fn params(json: &str) -> Params {
    Params::from_json(json).unwrap()
}

fn space(weights: &[f64]) -> MeasureSpace {
    let pairs: Vec<(String, f64)> = weights.iter().enumerate().map(|(i, w)| (format!("t{i}"), *w)).collect();
    make_finite_atoms(&pairs).unwrap()
}

/// `abs_plus_square` with one shift per atom.
fn shifted(weights: &[f64], shifts: &[f64], a: f64, b: f64) -> (MeasureSpace, Arc<dyn Integrand>) {
    let sp = space(weights);
    let map: serde_json::Map<String, serde_json::Value> = shifts
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("t{i}"), (*s).into()))
        .collect();
    let p = serde_json::json!({"a": a, "b": b, "shifts": map});
    let f = catalog("abs_plus_square", &Params::from_value(&p).unwrap()).unwrap();
    (sp, f)
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..3.0, 1..5)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn vec2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2)
}

/// Cone spanned by up to three generators of ℝ² inside an open half-plane.
fn pointed_cone_2d() -> impl Strategy<Value = SetRepr> {
    (0.0f64..std::f64::consts::TAU, prop::collection::vec(0.0f64..2.5, 1..4)).prop_map(|(base, offs)| {
        let gens = offs.iter().map(|o| vec![(base + o).cos(), (base + o).sin()]).collect();
        SetRepr::cone(2, gens)
    })
}

fn polytope_2d() -> impl Strategy<Value = SetRepr> {
    prop::collection::vec(vec2(), 1..6).prop_map(|pts| SetRepr::convex(2, pts, vec![]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn splitting_an_atom_keeps_integrals(ws in weights(), x in -4.0f64..4.0, pick in 0usize..8) {
        let shifts: Vec<f64> = (0..ws.len()).map(|i| i as f64 - 1.0).collect();
        let (sp, f) = shifted(&ws, &shifts, 1.0, 0.5);
        // The shift is keyed by tag, so use a tag-independent integrand on the split space.
        let g = catalog("norm_power", &params(r#"{"p": 3}"#)).unwrap();
        let split = sp.split_atom(pick % sp.len()).unwrap();
        let before = integral_value(&sp, g.as_ref(), &[x]).unwrap().value.to_f64();
        let after = integral_value(&split, g.as_ref(), &[x]).unwrap().value.to_f64();
        prop_assert!(close(before, after, 1e-12));
        prop_assert!(close(sp.total_mass(), split.total_mass(), 1e-12));
        prop_assert!(integral_value(&sp, f.as_ref(), &[x]).unwrap().value.is_finite());
    }

    #[test]
    fn renormalization_keeps_integrals(ws in weights(), ks in prop::collection::vec(0.01f64..50.0, 4), x in -4.0f64..4.0) {
        let shifts: Vec<f64> = (0..ws.len()).map(|i| 0.5 * i as f64).collect();
        let (sp, f) = shifted(&ws, &shifts, 0.7, 1.3);
        let density = AtomFunction::from_fn(&sp, |a| ks[a.tag[1..].parse::<usize>().unwrap() % ks.len()]);
        let (sp2, ren) = renormalize_to_finite(&sp, &density).unwrap();
        let g = ren.apply(f.clone());
        let before = integral_value(&sp, f.as_ref(), &[x]).unwrap().value.to_f64();
        let after = integral_value(&sp2, &g, &[x]).unwrap().value.to_f64();
        prop_assert!(close(before, after, 1e-12), "{before} vs {after}");
    }

    #[test]
    fn minorant_lies_below_the_integrand(slope in -2.0f64..2.0, offset in -3.0f64..0.0, x in -5.0f64..5.0) {
        let base = catalog("norm_power", &params(r#"{"p": 2}"#)).unwrap();
        // x² ≥ s·x + o holds whenever o ≤ -s²/4.
        let offset = offset - slope * slope / 4.0;
        let f = with_affine_minorant(base, vec![slope], offset).unwrap();
        let m = f.minorant().unwrap();
        let sp = space(&[1.0]);
        let atom = &sp.atoms()[0];
        prop_assert!(f.value(atom, &[x]) >= m.value(&[x]) - 1e-12);
        let s = f.shifted().unwrap();
        prop_assert!(s.value(atom, &[x]) >= -1e-12);
    }

    #[test]
    fn sign_split_parts_add_up(terms in prop::collection::vec((0.0f64..5.0, -10.0f64..10.0), 1..20)) {
        let mut acc = SplitAccumulator::new();
        for (i, (w, v)) in terms.iter().enumerate() {
            acc.add(&format!("t{i}"), *w, ExtReal::Finite(*v));
        }
        let r = acc.finish();
        prop_assert!(r.positive_part >= 0.0 && r.negative_part <= 0.0);
        let direct: f64 = terms.iter().map(|(w, v)| w * v).sum();
        prop_assert!(close(r.value.to_f64(), direct, 1e-12));
        prop_assert!(close(r.positive_part + r.negative_part, r.value.to_f64(), 1e-15));
    }

    #[test]
    fn infinite_values_only_count_on_positive_weights(w in 0.0f64..2.0) {
        let mut acc = SplitAccumulator::new();
        acc.add("a", 1.0, ExtReal::Finite(2.0));
        acc.add("b", w, ExtReal::PosInf);
        let r = acc.finish();
        if w > 0.0 {
            prop_assert_eq!(r.value, ExtReal::PosInf);
        } else {
            prop_assert_eq!(r.value, ExtReal::Finite(2.0));
            prop_assert!(r.uses_convention());
        }
    }

    #[test]
    fn integrand_gradients_match_finite_differences(ws in weights(), x in 0.2f64..3.0, p in 1.5f64..4.0) {
        let f = catalog("norm_power", &params(&format!(r#"{{"p": {p}}}"#))).unwrap();
        let sp = space(&ws);
        for atom in sp.atoms() {
            let g = f.gradient(atom, &[x]).unwrap()[0];
            let h = 1e-6;
            let fd = (f.value(atom, &[x + h]) - f.value(atom, &[x - h])) / (2.0 * h);
            prop_assert!((g - fd).abs() <= 1e-5 * (1.0 + g.abs()), "{g} vs {fd}");
        }
    }

    #[test]
    fn ell_gradient_norm_is_bracketed(z in prop::collection::vec(-5.0f64..5.0, 1..4), p in 1.1f64..5.0) {
        let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(n > 1e-6);
        let g = ell_gradient(&z, p);
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let base = n.powf(p - 1.0);
        prop_assert!(gn >= base * (1.0 - 1e-12) && gn <= p * base * (1.0 + 1e-12));
    }

    #[test]
    fn support_is_positively_homogeneous(s in polytope_2d(), u in vec2(), lam in 0.01f64..10.0) {
        let scaled: Vec<f64> = u.iter().map(|v| lam * v).collect();
        prop_assert!(close(s.support(&scaled), lam * s.support(&u), 1e-12));
    }

    #[test]
    fn minkowski_support_is_additive(a in polytope_2d(), b in polytope_2d(), u in vec2()) {
        let sum = minkowski_sum(&a, &b).unwrap();
        prop_assert!(close(sum.support(&u), a.support(&u) + b.support(&u), 1e-10));
    }

    #[test]
    fn aumann_integral_is_additive_over_atoms(ws in prop::collection::vec(0.1f64..3.0, 2..4), sets in prop::collection::vec(polytope_2d(), 3)) {
        let sp = space(&ws);
        let field: SetField = AtomFunction::from_fn(&sp, |a| sets[a.tag[1..].parse::<usize>().unwrap() % sets.len()].clone());
        let whole = aumann_integral(&sp, &field).unwrap();
        let mut manual = SetRepr::point(vec![0.0, 0.0]);
        for a in sp.atoms() {
            manual = minkowski_sum(&manual, &field.get(&a.tag).unwrap().scaled(a.weight)).unwrap();
        }
        for u in direction_grid(2) {
            prop_assert!(close(whole.support(&u), manual.support(&u), 1e-10));
        }
    }

    #[test]
    fn bipolar_recovers_the_cone(c in pointed_cone_2d()) {
        let back = polar_cone(&polar_cone(&c).unwrap()).unwrap();
        let h = hausdorff_distance(&c, &back).unwrap();
        prop_assert!(h <= 2.0 * pitch(2), "hausdorff {h}");
    }

    #[test]
    fn sole_bounds_selections(c in pointed_cone_2d(), k in 0.0f64..3.0, coeff in prop::collection::vec(0.0f64..4.0, 3), ball in vec2()) {
        // e = normalized sum of generators; γ from the worst generator.
        let mut e = [0.0, 0.0];
        for g in &c.recession {
            e[0] += g[0];
            e[1] += g[1];
        }
        let en = (e[0] * e[0] + e[1] * e[1]).sqrt();
        prop_assume!(en > 1e-3);
        let e = vec![e[0] / en, e[1] / en];
        let gamma = c.recession.iter().map(|g| 1.0 / (g[0] * e[0] + g[1] * e[1])).fold(1.0, f64::max);
        prop_assume!(gamma.is_finite() && gamma < 1e3);
        let sp = space(&[1.0]);
        let field: SetField = AtomFunction::constant(&sp, c.clone());
        prop_assert!(compact_sole_test(&sp, &field, &e, gamma * (1.0 + 1e-9)).unwrap().pass);
        // x* = ball part (norm ≤ k) + nonnegative combination of generators.
        let bn = (ball[0] * ball[0] + ball[1] * ball[1]).sqrt().max(1e-12);
        let mut x = vec![k * ball[0] / bn, k * ball[1] / bn];
        for (g, a) in c.recession.iter().zip(&coeff) {
            x[0] += a * g[0];
            x[1] += a * g[1];
        }
        let sel = SampledFunction::new(&sp, vec![x]).unwrap();
        let bound = l1_bound(&sp, &sel, &AtomFunction::constant(&sp, k), &e, gamma * (1.0 + 1e-9)).unwrap();
        prop_assert!(bound.holds, "{} > {}", bound.lhs, bound.rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn point_estimates_are_nested(c in -1.0f64..1.0, a in 0.1f64..2.0, b in 0.0f64..2.0, x in -1.5f64..1.5) {
        let f = |z: &[f64]| a * (z[0] - c).abs() + b * (z[0] - c).powi(2);
        let sched = ProbeSchedule::default();
        let est = all_estimates(&f, &[x], &sched).unwrap();
        let tol = 1e-3;
        for y in &est.frechet.points {
            prop_assert!(est.limiting.membership(y, tol).inside);
        }
        for y in &est.limiting.points {
            prop_assert!(est.clarke.membership(y, tol).inside);
        }
        // Convex: the estimate matches a(sign) + 2b(x - c) or [-a, a] at the kink.
        let g = 2.0 * b * (x - c);
        let (lo, hi) = if (x - c).abs() < 1e-9 { (-a, a) } else { let s = a * (x - c).signum() + g; (s, s) };
        let exact = SetRepr::interval(Some(lo), Some(hi));
        prop_assert!(hausdorff_distance(&est.clarke, &exact).unwrap() <= 1e-3);
    }

    #[test]
    fn smooth_points_give_a_single_gradient(a in -2.0f64..2.0, b in 0.1f64..2.0, x in -2.0f64..2.0) {
        let f = |z: &[f64]| a * z[0] + b * z[0] * z[0] + (z[0]).sin();
        // Nearby subgradients drift by about |f''|·r; |f''| ≤ 5 here, so sample down to 1e-6.
        let sched = ProbeSchedule { radii: vec![1e-3, 1e-4, 1e-5, 1e-6, 1e-7], ..ProbeSchedule::default() };
        let est = all_estimates(&f, &[x], &sched).unwrap();
        let g = a + 2.0 * b * x + x.cos();
        for s in [&est.frechet, &est.limiting, &est.clarke] {
            prop_assert!(hausdorff_distance(s, &SetRepr::point(vec![g])).unwrap() <= 1e-4);
        }
        prop_assert!(est.singular.points.iter().all(|p| p[0].abs() <= 1e-4) && est.singular.recession.is_empty());
    }

    #[test]
    fn frechet_estimate_respects_lipschitz_constants(a in 0.1f64..3.0, c in -1.0f64..1.0, x in -2.0f64..2.0) {
        let f = |z: &[f64]| a * (z[0] - c).abs();
        let est = all_estimates(&f, &[x], &ProbeSchedule::default()).unwrap();
        for y in est.limiting.points.iter().chain(&est.frechet.points) {
            prop_assert!(y[0].abs() <= a * (1.0 + 1e-3) + 1e-6);
        }
    }

    #[test]
    fn decoupled_infimum_matches_brute_force(ws in prop::collection::vec(0.1f64..2.0, 1..4), shifts in prop::collection::vec(-2.0f64..2.0, 3), center in -2.0f64..2.0, weight in 0.2f64..4.0) {
        let (sp, f) = shifted(&ws, &shifts, 0.5, 1.0);
        let dec = decoupled_infimum(&sp, f.as_ref(), &[center], weight, 2.0, &SolverOptions::default()).unwrap();
        let mut brute = 0.0;
        for (i, atom) in sp.atoms().iter().enumerate() {
            // The kink at the shift is included; between kinks the grid error is quadratic.
            let g = |z: f64| f.value(atom, &[z]) + weight * (z - center).powi(2);
            let mut best = g(shifts[i]);
            for k in 0..=40_000 {
                best = best.min(g(-6.0 + 12.0 * k as f64 / 40_000.0));
            }
            brute += atom.weight * best;
        }
        prop_assert!(dec.value <= brute + 1e-9, "{} > {brute}", dec.value);
        prop_assert!(brute - dec.value <= 1e-5, "{} vs {brute}", dec.value);
    }

    #[test]
    fn penalty_sweep_is_nondecreasing_and_bounded(ws in prop::collection::vec(0.1f64..2.0, 1..3), shifts in prop::collection::vec(-1.0f64..1.0, 2), center in -1.0f64..1.0) {
        let (sp, f) = shifted(&ws, &shifts, 1.0, 1.0);
        let region = Region::Ball { center: vec![center], radius: 0.75 };
        let opts = SolverOptions::default();
        let rep = stabilized_infimum(&sp, f.as_ref(), &region, 2.0, &[1.0, 4.0, 16.0, 64.0], &StabilizationMode::Unanchored, &opts).unwrap();
        let tol = 10.0 * opts.inner_tol;
        for w in rep.penalty_values.windows(2) {
            prop_assert!(w[1].value >= w[0].value - tol);
        }
        for pv in &rep.penalty_values {
            prop_assert!(pv.value <= rep.plain_infimum + tol);
        }
    }

    #[test]
    fn upper_estimate_is_sound_when_the_hypothesis_holds(ws in prop::collection::vec(0.2f64..2.0, 1..4), shifts in prop::collection::vec(-1.0f64..1.0, 3), x in -1.5f64..1.5) {
        let (sp, f) = shifted(&ws, &shifts, 1.0, 0.5);
        let field: SetField = AtomFunction::constant(&sp, SetRepr::origin(1));
        // Lipschitz constant of a|·| + b|·|² on ball(x, 1) around any shift in [-1, 1].
        let k = AtomFunction::constant(&sp, 1.0 + 2.0 * 0.5 * 4.0);
        let opts = EstimateOptions { lhs: LhsSource::AtomSum, ..EstimateOptions::default() };
        let h = hypothesis_check(&sp, f.as_ref(), &[x], 1.0, &k, &field, &opts).unwrap();
        prop_assert!(h.pass);
        let rep = limiting_upper_estimate(&sp, f.as_ref(), &[x], &field, &[SeminormSpec::full(1)], &[], &opts).unwrap();
        prop_assert!(rep.pass, "{:?}", rep.witness);
    }

    #[test]
    fn out_verdicts_carry_a_separating_direction(x in -1.0f64..1.0, off in 0.05f64..3.0) {
        let (sp, f) = shifted(&[1.0], &[0.0], 1.0, 0.0);
        let field: SetField = AtomFunction::constant(&sp, SetRepr::origin(1));
        let opts = EstimateOptions { lhs: LhsSource::AtomSum, ..EstimateOptions::default() };
        // ∂|·|(x) ⊆ [-1, 1], so anything beyond 1 + off is OUT.
        let cand = vec![vec![1.0 + off], vec![-1.0 - off]];
        let rep = limiting_upper_estimate(&sp, f.as_ref(), &[x], &field, &[SeminormSpec::full(1)], &cand, &opts).unwrap();
        for y in &cand {
            for m in rep.checks_for(y) {
                prop_assert!(!m.inside);
                let u = m.separating_direction.as_ref().unwrap();
                let gap = m.separation_gap.unwrap();
                prop_assert!(gap > 0.0);
                // Re-check: ⟨u, y⟩ exceeds the support of the right-hand side.
                let rhs = &rep.estimate_set[m.basis];
                prop_assert!(u[0] * y[0] - rhs.support(u) > 0.0);
            }
        }
    }
}

#[test]
fn oracle_wrapper_matches_the_integral() {
    let (sp, f) = shifted(&[1.0, 2.0], &[0.0, 1.0], 1.0, 1.0);
    let oracle = functional_oracle(&sp, f.as_ref());
    for x in [-1.0, 0.0, 0.5, 2.0] {
        assert_eq!(oracle(&[x]), integral_value(&sp, f.as_ref(), &[x]).unwrap().value.to_f64());
    }
}
