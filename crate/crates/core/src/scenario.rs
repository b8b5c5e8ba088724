//! Scenario files: parsing, execution, reports and CSV tables.
//!
//! A scenario names a measure space, an integrand and a list of experiments.
//! Each experiment runs one operation and produces a certificate (numbers at a
//! stated resolution) plus verdicts for the expectations attached to it.

use crate::bp_sequences::{nonincreasing, subgrad_at_eps_min, theorem33_bundle, BundleOptions, SeminormSpec};
use crate::envelope::{
    decoupled_infimum, default_schedule, robustness_sufficiency, stabilized_infimum, Criterion, Region, SolverOptions,
    StabilizationMode, Verdict,
};
use crate::error::{Error, Result};
use crate::estimates::{
    clarke_upper_estimate, excess_envelope, fatou_bundle_check, gradient_interchange_check, hypothesis_check,
    limiting_upper_estimate, lipschitz_differentiability_verdict, lipschitz_envelope, singular_upper_estimate, ui_polar,
    EstimateOptions, EstimateReport, SampleOrigin,
};
use crate::integrand::{catalog, integral_value, with_affine_minorant, Integrand, Params, CATALOG};
use crate::measure_space::{
    counting_truncation, geometric_grid_unit_interval, make_finite_atoms, uniform_grid_unit_interval, Atom, AtomFunction,
    MeasureSpace, Reference,
};
use crate::minimize::coordinate_descent;
use crate::setvalued::{hausdorff_distance, pitch, sole_duality_check, SetField, SetRepr};
use crate::subdiff_point::{all_estimates, ProbeSchedule};
use crate::vecops::{self, cross, dot, normalized};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const SCENARIO_SCHEMA: &str = "subdiff-scenario/1";
pub const REPORT_SCHEMA: &str = "subdiff-report/1";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub integrand: Option<IntegrandSpec>,
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Atoms { atoms: Vec<Atom> },
    GeometricGrid { cells: usize, ratio: f64 },
    UniformGrid { cells: usize },
    Counting { atoms: usize, decay: f64 },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<MeasureSpace> {
        match self {
            MeasureSpec::Atoms { atoms } => MeasureSpace::from_atoms(atoms.clone()),
            MeasureSpec::GeometricGrid { cells, ratio } => geometric_grid_unit_interval(*cells, *ratio),
            MeasureSpec::UniformGrid { cells } => uniform_grid_unit_interval(*cells),
            MeasureSpec::Counting { atoms, decay } => counting_truncation(*atoms, *decay),
        }
    }

    /// The same generator with a different cell count, for convergence tables.
    fn refined(&self, cells: usize) -> Option<MeasureSpec> {
        match self {
            MeasureSpec::GeometricGrid { ratio, .. } => Some(MeasureSpec::GeometricGrid { cells, ratio: *ratio }),
            MeasureSpec::UniformGrid { .. } => Some(MeasureSpec::UniformGrid { cells }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandSpec {
    pub name: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub minorant: Option<MinorantSpec>,
}

/// Adds `⟨slope, x⟩ + offset` to the integrand and declares it as minorant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinorantSpec {
    pub slope: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl IntegrandSpec {
    pub fn build(&self) -> Result<Arc<dyn Integrand>> {
        let params = Params::from_value(&self.params).map_err(|e| Error::Config {
            field: "integrand.params".into(),
            reason: e.to_string(),
        })?;
        let base = catalog(&self.name, &params).map_err(|e| match e {
            Error::UnknownIntegrand(n) => Error::Config {
                field: "integrand.name".into(),
                reason: format!("unknown catalog integrand `{n}`; see `subdiff list-catalog`"),
            },
            Error::BadParameter { param, reason, .. } => Error::Config {
                field: format!("integrand.params.{param}"),
                reason,
            },
            other => other,
        })?;
        match &self.minorant {
            Some(m) => with_affine_minorant(base, m.slope.clone(), m.offset).map_err(|e| Error::Config {
                field: "integrand.minorant.slope".into(),
                reason: e.to_string(),
            }),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub id: String,
    pub op: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

/// Assertion on one value of the certificate, addressed by a JSON pointer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub pointer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equals: Option<Value>,
    /// Absolute tolerance for numeric `equals`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Relative paths are resolved against the scenario file's directory.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn config_err(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Parses and validates scenario text. Errors name the offending field.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(if path == "." { "<root>".to_string() } else { path }, e.inner().to_string())
    })?;
    sc.validate()?;
    Ok(sc)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(config_err(
                "schema",
                format!("expected `{SCENARIO_SCHEMA}`, got `{}`", self.schema),
            ));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(config_err("name", "must be nonempty and use only [A-Za-z0-9._-]"));
        }
        let mut ids = BTreeSet::new();
        for (i, ex) in self.experiments.iter().enumerate() {
            let at = |f: &str| format!("experiments[{i}].{f}");
            if ex.id.is_empty() || !ex.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_".contains(c)) {
                return Err(config_err(at("id"), "must be nonempty and use only [A-Za-z0-9_-]"));
            }
            if !ids.insert(ex.id.as_str()) {
                return Err(config_err(at("id"), format!("duplicate id `{}`", ex.id)));
            }
            let info = op_info(&ex.op).ok_or_else(|| config_err(at("op"), format!("unknown op `{}`", ex.op)))?;
            if info.needs_measure && self.measure.is_none() {
                return Err(config_err("measure", format!("op `{}` needs a measure", ex.op)));
            }
            if info.needs_integrand && self.integrand.is_none() {
                return Err(config_err("integrand", format!("op `{}` needs an integrand", ex.op)));
            }
            for (j, e) in ex.expect.iter().enumerate() {
                let at = |f: &str| format!("experiments[{i}].expect[{j}].{f}");
                if !(e.pointer.is_empty() || e.pointer.starts_with('/')) {
                    return Err(config_err(at("pointer"), "a JSON pointer must be empty or start with `/`"));
                }
                if e.equals.is_none() && e.max.is_none() && e.min.is_none() {
                    return Err(config_err(at("pointer"), "needs at least one of equals, max, min"));
                }
                if e.tol.is_some_and(|t| !(t >= 0.0)) {
                    return Err(config_err(at("tol"), "must be nonnegative"));
                }
            }
        }
        Ok(())
    }
}

/// One CSV table produced by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        let io = |e: csv::Error| Error::Io {
            path: self.name.clone(),
            reason: e.to_string(),
        };
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io {
            path: self.name.clone(),
            reason: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn coords(v: &[f64], width: usize) -> Vec<String> {
    (0..width).map(|i| v.get(i).map(|x| num(*x)).unwrap_or_default()).collect()
}

/// Outcome of one expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationVerdict {
    pub pointer: String,
    pub expected: Expectation,
    pub actual: Value,
    pub pass: bool,
    /// Distance to the nearest failing value; negative when failed. `None` for
    /// non-numeric comparisons.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub id: String,
    pub op: String,
    pub resolution: String,
    pub certificate: Value,
    pub verdicts: Vec<ExpectationVerdict>,
    pub tables: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureSummary {
    pub spec: MeasureSpec,
    pub atoms: usize,
    pub total_mass: f64,
    pub reference: Option<Reference>,
    pub truncated_tail: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub scenario: String,
    pub seed: u64,
    pub measure: Option<MeasureSummary>,
    pub integrand: Option<IntegrandSpec>,
    pub experiments: Vec<ExperimentReport>,
    pub failed_expectations: usize,
    pub pass: bool,
}

impl Report {
    /// Pretty JSON with a trailing newline.
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn evaluate(e: &Expectation, cert: &Value) -> ExpectationVerdict {
    let actual = cert.pointer(&e.pointer).cloned().unwrap_or(Value::Null);
    let x = actual.as_f64();
    let mut pass = true;
    let mut margin: Option<f64> = None;
    let mut tighten = |m: f64| {
        margin = Some(margin.map_or(m, |old: f64| old.min(m)));
        m >= 0.0
    };
    if let Some(want) = &e.equals {
        match (want.as_f64(), x) {
            (Some(w), Some(a)) => {
                let m = e.tol.unwrap_or(0.0) - (a - w).abs();
                pass &= tighten(if m.is_nan() { f64::NEG_INFINITY } else { m });
            }
            _ => pass &= *want == actual,
        }
    }
    if let Some(hi) = e.max {
        pass &= tighten(x.map_or(f64::NEG_INFINITY, |a| hi - a));
    }
    if let Some(lo) = e.min {
        pass &= tighten(x.map_or(f64::NEG_INFINITY, |a| a - lo));
    }
    ExpectationVerdict {
        pointer: e.pointer.clone(),
        expected: e.clone(),
        actual,
        pass,
        margin: margin.filter(|m| m.is_finite()),
    }
}

/// Everything an op can read.
struct Ctx<'a> {
    measure: Option<&'a MeasureSpec>,
    space: Option<&'a MeasureSpace>,
    f: Option<&'a Arc<dyn Integrand>>,
    seed: u64,
    index: usize,
}

impl Ctx<'_> {
    fn space(&self) -> Result<&MeasureSpace> {
        self.space.ok_or_else(|| config_err("measure", "missing"))
    }

    fn f(&self) -> Result<&dyn Integrand> {
        Ok(self.arc()?.as_ref())
    }

    fn arc(&self) -> Result<&Arc<dyn Integrand>> {
        self.f.ok_or_else(|| config_err("integrand", "missing"))
    }

    fn params<T: DeserializeOwned>(&self, v: &Value) -> Result<T> {
        let v = if v.is_null() { Value::Object(Map::new()) } else { v.clone() };
        serde_path_to_error::deserialize(v).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                format!("experiments[{}].params", self.index)
            } else {
                format!("experiments[{}].params.{path}", self.index)
            };
            config_err(field, e.inner().to_string())
        })
    }

    fn estimate_options(&self, mut o: EstimateOptions) -> EstimateOptions {
        o.seed = self.seed;
        o
    }
}

struct OpOutput {
    certificate: Value,
    resolution: String,
    tables: Vec<Table>,
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("certificate types serialize")
}

/// Operation registry entry.
#[derive(Debug, Clone, Copy)]
pub struct OpInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static str,
    pub certificate: &'static str,
    pub tables: &'static str,
    pub needs_measure: bool,
    pub needs_integrand: bool,
}

pub const OPS: &[OpInfo] = &[
    OpInfo {
        name: "functional_value",
        summary: "E_f(x) at each point, against the closed form on ]0,1] when the integrand has one.",
        params: "points: [x]; refinements: [cells] (grid measures only)",
        certificate: "values[]: {x, value, reference, error, uses_convention}; max_error",
        tables: "quadrature: cells, x0.., value, reference, error",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "hypothesis_check",
        summary: "Checks dist(∂̂f(t,x'), C(t)) ≤ K(t) on sampled points of ball(x, eps).",
        params: "x; eps; k: {kind: lipschitz | excess {cone} | constant {value}}; cone; options",
        certificate: "pass, worst_margin, integrated_bound, samples, tolerance, witness",
        tables: "none",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "limiting_upper_estimate",
        summary: "Tests that sampled limiting subgradients of E_f at x lie in ∫∂f(t,x) + UI(C)^- + W^⊥.",
        params: "x; cone; bases: [[direction]] (default: coordinate basis); candidates: [y]; hypothesis: {eps, k}; options",
        certificate: "pass, tolerance, resolution_slack, witness, lhs, estimate_set, candidates[]: {subgradient, inside, margin, separating_direction, separation_gap}, hypothesis, reduction",
        tables: "sets: set, kind, role, index, c0, c1, c2",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "singular_upper_estimate",
        summary: "Singular version of limiting_upper_estimate, with per-atom singular subdifferentials.",
        params: "as limiting_upper_estimate",
        certificate: "as limiting_upper_estimate",
        tables: "sets",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "clarke_upper_estimate",
        summary: "Clarke version: hull of the limiting and singular right-hand sides.",
        params: "x; cone; candidates; hypothesis; options",
        certificate: "as limiting_upper_estimate",
        tables: "sets",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "lipschitz_verdict",
        summary: "Lipschitz constant of E_f near x against ΣμK, and a C¹ check when every atom is smooth at x.",
        params: "x; eps; k; options",
        certificate: "status, hypothesis, lipschitz_constant, bound, worst_pair, smoothness",
        tables: "none",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "gradient_interchange",
        summary: "Finite-difference gradient of E_f against the integrated gradient oracle.",
        params: "x; options",
        certificate: "finite_difference, integrated, residual, step, pass",
        tables: "none",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "interchange_identity",
        summary: "Atom-by-atom infimum against brute-force joint minimization on random instances.",
        params: "instances (10); max_atoms (3)",
        certificate: "instances[]: {family, atoms, center, weight, p, decoupled, brute_force, difference}; max_difference",
        tables: "instances: index, family, atoms, center, weight, p, decoupled, brute_force, difference",
        needs_measure: false,
        needs_integrand: false,
    },
    OpInfo {
        name: "bundle",
        summary: "Sequence certificate at a robust local minimizer, with residual trends.",
        params: "x0; options: {p, n_schedule, radius, i_max, inner_grid, outer_grid, precondition_tol, solver}; trend_floor (1e-6)",
        certificate: "final: {residual: value}; max_final; nonincreasing: {residual: bool}; all_nonincreasing; warnings",
        tables: "residuals: n, eps_n, r_a, r_b_point, r_b_function, r_c, r_d, r_e, r_e_norm, r_f",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "eps_min_trials",
        summary: "Randomized trials of the subgradient at an eps-minimum: distance, value change, membership, norm bound.",
        params: "trials (100)",
        certificate: "trials; passed; worst_norm_excess; failures[]",
        tables: "trials: index, family, dim, eps, lam, distance, value_change, norm, norm_bound, membership, pass",
        needs_measure: false,
        needs_integrand: false,
    },
    OpInfo {
        name: "bipolar",
        summary: "Polar of UI(C) against C for constant cone fields.",
        params: "cones: [{dim, generators}]",
        certificate: "cones[]: {dim, generators, hausdorff, pitch, pass}; passed",
        tables: "none",
        needs_measure: false,
        needs_integrand: false,
    },
    OpInfo {
        name: "robustness",
        summary: "Stabilized infimum over a region and one sufficient condition for robustness.",
        params: "region: {kind: ball {center, radius} | box {lower, upper}}; p (2); criterion (c); n_schedule; mode; solver",
        certificate: "sufficiency, plain_infimum, stabilized_estimate, gap, verdict, diagnostic",
        tables: "penalty: n, value, gap, u0..",
        needs_measure: true,
        needs_integrand: true,
    },
    OpInfo {
        name: "p_monotonicity",
        summary: "Robust at the low exponent implies robust at the high one, over catalog integrands.",
        params: "region; n_schedule; low_p (2); high_p (4); integrands (default: whole catalog with defaults)",
        certificate: "entries[]: {name, low, high, gap_low, gap_high, implication}; holds",
        tables: "none",
        needs_measure: true,
        needs_integrand: false,
    },
    OpInfo {
        name: "oracle_equivalence",
        summary: "Pointwise Fréchet, limiting and Clarke estimates at 0 against closed forms for five test functions.",
        params: "tol (1e-2); schedule",
        certificate: "cases[]: {function, kind, hausdorff, pass}; max_hausdorff; pass",
        tables: "none",
        needs_measure: false,
        needs_integrand: false,
    },
    OpInfo {
        name: "sole_duality",
        summary: "Primal and dual compact-sole tests on random simplicial cones, with the exact answer known.",
        params: "instances (20); dims ([2, 3])",
        certificate: "instances[]: {dim, generators, e, delta, expected, primal, dual, agree}; agreements; total",
        tables: "none",
        needs_measure: false,
        needs_integrand: false,
    },
    OpInfo {
        name: "fatou_bundle",
        summary: "Builds a robust-minimum bundle at x and tests its target against the Fatou-type estimate.",
        params: "x; bases; bundle: BundleOptions; options: EstimateOptions",
        certificate: "status, l1_norms, bounded, residuals_ok, direction_cone, estimate_set, membership, witness",
        tables: "none",
        needs_measure: true,
        needs_integrand: true,
    },
];

pub fn op_info(name: &str) -> Option<&'static OpInfo> {
    OPS.iter().find(|o| o.name == name)
}

/// Help text for one operation.
pub fn explain(op: &str) -> Result<String> {
    let o = op_info(op).ok_or_else(|| Error::InvalidArgument(format!("unknown op `{op}`")))?;
    let needs = match (o.needs_measure, o.needs_integrand) {
        (true, true) => "measure, integrand",
        (true, false) => "measure",
        (false, true) => "integrand",
        (false, false) => "nothing",
    };
    Ok(format!(
        "{}\n  {}\n  needs:       {}\n  params:      {}\n  certificate: {}\n  tables:      {}\n",
        o.name, o.summary, needs, o.params, o.certificate, o.tables
    ))
}

/// Catalog table; an empty filter lists every integrand.
pub fn list_catalog(filter: &str) -> String {
    let yn = |b: bool| if b { "yes" } else { "no" };
    let rows: Vec<[String; 7]> = CATALOG
        .iter()
        .filter(|e| filter.is_empty() || e.name.contains(filter))
        .map(|e| {
            [
                e.name.to_string(),
                yn(e.gradient).into(),
                yn(e.subdifferential).into(),
                yn(e.convex).into(),
                yn(e.closed_form_functional).into(),
                e.defaults.to_string(),
                e.formula.to_string(),
            ]
        })
        .collect();
    let header = ["name", "gradient", "subdiff", "convex", "closed_form", "defaults", "formula"].map(String::from);
    let mut widths = header.clone().map(|h| h.chars().count());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |r: &[String; 7]| {
        let cells: Vec<String> = r.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        cells.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    for r in &rows {
        out += &line(r);
    }
    out
}

/// A point as a number (1-D) or a vector.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum PointSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PointSpec {
    fn to_vec(&self) -> Vec<f64> {
        match self {
            PointSpec::Scalar(x) => vec![*x],
            PointSpec::Vector(v) => v.clone(),
        }
    }
}

/// A constant cone field.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum ConeSpec {
    /// `origin`, `halfline`, `neg_halfline` or `full`, in the integrand's dimension.
    Named(String),
    Generators {
        generators: Vec<Vec<f64>>,
    },
}

impl Default for ConeSpec {
    fn default() -> Self {
        ConeSpec::Named("origin".into())
    }
}

impl ConeSpec {
    fn set(&self, dim: usize, field: &str) -> Result<SetRepr> {
        match self {
            ConeSpec::Named(n) => match (n.as_str(), dim) {
                ("origin", _) => Ok(SetRepr::origin(dim)),
                ("full", _) => Ok(SetRepr::full_space(dim)),
                ("halfline", 1) => Ok(SetRepr::cone(1, vec![vec![1.0]])),
                ("neg_halfline", 1) => Ok(SetRepr::cone(1, vec![vec![-1.0]])),
                _ => Err(config_err(field, format!("unknown cone `{n}` in dimension {dim}"))),
            },
            ConeSpec::Generators { generators } => {
                if generators.iter().any(|g| g.len() != dim) {
                    return Err(config_err(field, format!("generators must have dimension {dim}")));
                }
                Ok(SetRepr::cone(dim, generators.clone()))
            }
        }
    }

    fn field(&self, space: &MeasureSpace, dim: usize, at: &str) -> Result<SetField> {
        Ok(AtomFunction::constant(space, self.set(dim, at)?))
    }
}

/// Per-atom constant `K`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum KSpec {
    /// Lipschitz oracle on `ball(x, eps)`.
    Lipschitz,
    /// Excess of `∂̂f(t, ·)` over the given cone on `ball(x, eps)`.
    Excess {
        #[serde(default)]
        cone: ConeSpec,
    },
    Constant {
        value: f64,
    },
}

impl KSpec {
    fn build(&self, ctx: &Ctx<'_>, x: &[f64], eps: f64, at: &str) -> Result<AtomFunction<f64>> {
        let space = ctx.space()?;
        let f = ctx.f()?;
        match self {
            KSpec::Lipschitz => lipschitz_envelope(space, f, x, eps),
            KSpec::Excess { cone } => excess_envelope(space, f, x, eps, &cone.field(space, f.dim(), at)?),
            KSpec::Constant { value } => Ok(AtomFunction::constant(space, *value)),
        }
    }
}

fn check_dim(x: &[f64], dim: usize, field: String) -> Result<()> {
    if x.len() != dim {
        return Err(config_err(field, format!("expected dimension {dim}, got {}", x.len())));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalValueParams {
    points: Vec<PointSpec>,
    #[serde(default)]
    refinements: Vec<usize>,
}

fn op_functional_value(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: FunctionalValueParams = ctx.params(p)?;
    let space = ctx.space()?;
    let f = ctx.f()?;
    let dim = f.dim();
    let points: Vec<Vec<f64>> = prm.points.iter().map(PointSpec::to_vec).collect();
    for (i, x) in points.iter().enumerate() {
        check_dim(x, dim, format!("experiments[{}].params.points[{i}]", ctx.index))?;
    }
    let mut header = vec!["cells".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend(["value", "reference", "error"].map(String::from));
    let mut table = Table {
        name: "quadrature".into(),
        header,
        rows: vec![],
    };
    let reference = |s: &MeasureSpace, x: &[f64]| {
        (s.reference() == Some(Reference::UnitInterval))
            .then(|| f.unit_interval_functional(x))
            .flatten()
    };
    let mut row = |cells: usize, x: &[f64], v: f64, r: Option<f64>| {
        let mut cols = vec![cells.to_string()];
        cols.extend(x.iter().map(|c| num(*c)));
        cols.push(num(v));
        cols.push(r.map(num).unwrap_or_default());
        cols.push(r.map(|r| num((v - r).abs())).unwrap_or_default());
        table.rows.push(cols);
    };
    let mut values = vec![];
    let mut max_error: Option<f64> = None;
    for x in &points {
        let iv = integral_value(space, f, x)?;
        let v = iv.value.to_f64();
        let r = reference(space, x);
        let err = r.map(|r| (v - r).abs());
        if let Some(e) = err {
            max_error = Some(max_error.map_or(e, |m| m.max(e)));
        }
        row(space.len(), x, v, r);
        values.push(json!({
            "x": x,
            "value": v,
            "reference": r,
            "error": err,
            "uses_convention": iv.uses_convention(),
        }));
    }
    for &cells in &prm.refinements {
        let spec = ctx.measure.and_then(|m| m.refined(cells)).ok_or_else(|| {
            config_err(
                format!("experiments[{}].params.refinements", ctx.index),
                "needs a grid measure",
            )
        })?;
        let s = spec.build()?;
        for x in &points {
            let v = integral_value(&s, f, x)?.value.to_f64();
            row(cells, x, v, reference(&s, x));
        }
    }
    Ok(OpOutput {
        certificate: json!({ "values": values, "max_error": max_error }),
        resolution: format!("atoms={}", space.len()),
        tables: vec![table],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisParams {
    x: PointSpec,
    eps: f64,
    k: KSpec,
    #[serde(default)]
    cone: ConeSpec,
    #[serde(default)]
    options: EstimateOptions,
}

fn op_hypothesis(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: HypothesisParams = ctx.params(p)?;
    let space = ctx.space()?;
    let f = ctx.f()?;
    let x = prm.x.to_vec();
    let at = |s: &str| format!("experiments[{}].params.{s}", ctx.index);
    check_dim(&x, f.dim(), at("x"))?;
    let opts = ctx.estimate_options(prm.options);
    let field = prm.cone.field(space, f.dim(), &at("cone"))?;
    let k = prm.k.build(ctx, &x, prm.eps, &at("k.cone"))?;
    let v = hypothesis_check(space, f, &x, prm.eps, &k, &field, &opts)?;
    Ok(OpOutput {
        certificate: to_value(&v),
        resolution: format!("samples={}, tolerance={}", v.samples, v.tolerance),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HypothesisSpec {
    eps: f64,
    k: KSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateParams {
    x: PointSpec,
    #[serde(default)]
    cone: ConeSpec,
    #[serde(default)]
    bases: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    candidates: Vec<PointSpec>,
    #[serde(default)]
    hypothesis: Option<HypothesisSpec>,
    #[serde(default)]
    options: EstimateOptions,
}

fn set_rows(table: &mut Table, label: &str, s: &SetRepr) {
    let kind = to_value(&s.kind).as_str().unwrap_or_default().to_string();
    for (role, vs) in [("point", &s.points), ("recession", &s.recession)] {
        for (i, v) in vs.iter().enumerate() {
            let mut r = vec![label.to_string(), kind.clone(), role.to_string(), i.to_string()];
            r.extend(coords(v, 3));
            table.rows.push(r);
        }
    }
}

fn estimate_certificate(rep: &EstimateReport, candidates: &[Vec<f64>]) -> Value {
    let cands: Vec<Value> = candidates
        .iter()
        .map(|y| {
            let checks = rep.checks_for(y);
            let worst = checks
                .iter()
                .filter(|c| c.origin == SampleOrigin::Candidate)
                .min_by(|a, b| a.margin.total_cmp(&b.margin));
            match worst {
                Some(c) => json!({
                    "subgradient": y,
                    "inside": checks.iter().all(|c| c.inside),
                    "margin": c.margin,
                    "separating_direction": c.separating_direction,
                    "separation_gap": c.separation_gap,
                }),
                None => json!({ "subgradient": y, "inside": Value::Null }),
            }
        })
        .collect();
    let lhs: Vec<_> = rep.membership.iter().filter(|c| c.origin == SampleOrigin::Lhs).collect();
    json!({
        "kind": rep.kind,
        "point": rep.point,
        "pass": rep.pass,
        "tolerance": rep.tolerance,
        "resolution_slack": rep.resolution_slack,
        "lhs_samples": lhs.len(),
        "lhs_worst_margin": lhs.iter().map(|c| c.margin).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v)))),
        "witness": rep.witness,
        "candidates": cands,
        "hypothesis": rep.hypothesis,
        "hypothesis_ok": rep.hypothesis_ok(),
        "lhs": rep.lhs,
        "estimate_set": rep.estimate_set,
        "intersection_bases": rep.intersection_bases,
        "reduction": rep.reduction,
    })
}

fn op_estimate(ctx: &Ctx<'_>, p: &Value, which: &str) -> Result<OpOutput> {
    let prm: EstimateParams = ctx.params(p)?;
    let space = ctx.space()?;
    let f = ctx.f()?;
    let d = f.dim();
    let at = |s: &str| format!("experiments[{}].params.{s}", ctx.index);
    let x = prm.x.to_vec();
    check_dim(&x, d, at("x"))?;
    let candidates: Vec<Vec<f64>> = prm.candidates.iter().map(PointSpec::to_vec).collect();
    for (i, y) in candidates.iter().enumerate() {
        check_dim(y, d, at(&format!("candidates[{i}]")))?;
    }
    let bases = match &prm.bases {
        None => vec![SeminormSpec::full(d)],
        Some(bs) => bs
            .iter()
            .enumerate()
            .map(|(i, b)| SeminormSpec::new(b.clone()).map_err(|e| config_err(at(&format!("bases[{i}]")), e.to_string())))
            .collect::<Result<_>>()?,
    };
    let opts = ctx.estimate_options(prm.options);
    let field = prm.cone.field(space, d, &at("cone"))?;
    let mut rep = match which {
        "limiting" => limiting_upper_estimate(space, f, &x, &field, &bases, &candidates, &opts)?,
        "singular" => singular_upper_estimate(space, f, &x, &field, &bases, &candidates, &opts)?,
        _ => clarke_upper_estimate(space, f, &x, &field, &candidates, &opts)?,
    };
    if let Some(h) = &prm.hypothesis {
        let k = h.k.build(ctx, &x, h.eps, &at("hypothesis.k.cone"))?;
        rep = rep.with_hypothesis(hypothesis_check(space, f, &x, h.eps, &k, &field, &opts)?);
    }
    let mut table = Table::new("sets", &["set", "kind", "role", "index", "c0", "c1", "c2"]);
    set_rows(&mut table, "lhs", &rep.lhs);
    for (i, s) in rep.estimate_set.iter().enumerate() {
        set_rows(&mut table, &format!("estimate{i}"), s);
    }
    Ok(OpOutput {
        certificate: estimate_certificate(&rep, &candidates),
        resolution: rep.resolution.clone(),
        tables: vec![table],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LipschitzParams {
    x: PointSpec,
    eps: f64,
    k: KSpec,
    #[serde(default)]
    options: EstimateOptions,
}

fn op_lipschitz(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: LipschitzParams = ctx.params(p)?;
    let space = ctx.space()?;
    let f = ctx.f()?;
    let x = prm.x.to_vec();
    let at = |s: &str| format!("experiments[{}].params.{s}", ctx.index);
    check_dim(&x, f.dim(), at("x"))?;
    let k = prm.k.build(ctx, &x, prm.eps, &at("k.cone"))?;
    let opts = ctx.estimate_options(prm.options);
    let v = lipschitz_differentiability_verdict(space, f, &x, prm.eps, &k, &opts)?;
    Ok(OpOutput {
        certificate: to_value(&v),
        resolution: format!(
            "line_samples={}, random_samples={}",
            2 * opts.line_samples,
            opts.random_samples
        ),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterchangeParams {
    x: PointSpec,
    #[serde(default)]
    options: EstimateOptions,
}

fn op_gradient_interchange(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: InterchangeParams = ctx.params(p)?;
    let f = ctx.f()?;
    let x = prm.x.to_vec();
    check_dim(&x, f.dim(), format!("experiments[{}].params.x", ctx.index))?;
    let v = gradient_interchange_check(ctx.space()?, f, &x, &ctx.estimate_options(prm.options))?;
    Ok(OpOutput {
        certificate: to_value(&v),
        resolution: format!("step={}", v.step),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityParams {
    #[serde(default = "ten")]
    instances: usize,
    #[serde(default = "three")]
    max_atoms: usize,
}

fn ten() -> usize {
    10
}

fn three() -> usize {
    3
}

struct IdentityInstance {
    family: &'static str,
    space: MeasureSpace,
    f: Arc<dyn Integrand>,
    center: f64,
    weight: f64,
    p: f64,
}

fn identity_instance(rng: &mut ChaCha8Rng, max_atoms: usize) -> Result<IdentityInstance> {
    let m = rng.gen_range(1..=max_atoms.max(1));
    let tags: Vec<String> = (0..m).map(|i| format!("a{i}")).collect();
    let pairs: Vec<(String, f64)> = tags.iter().map(|t| (t.clone(), rng.gen_range(0.2..2.0))).collect();
    let space = make_finite_atoms(&pairs)?;
    let mut shifts = Map::new();
    for t in &tags {
        shifts.insert(t.clone(), json!(rng.gen_range(-2.0..2.0)));
    }
    let (family, params) = match rng.gen_range(0..3) {
        0 => ("separable_quadratic", json!({ "centers": shifts })),
        1 => (
            "abs_plus_square",
            json!({ "a": rng.gen_range(0.0..2.0), "b": rng.gen_range(0.1..2.0), "shifts": shifts }),
        ),
        _ => ("neg_abs_shifted", json!({ "height": rng.gen_range(0.5..2.0) })),
    };
    let f = catalog(family, &Params::from_value(&params)?)?;
    Ok(IdentityInstance {
        family,
        space,
        f,
        center: rng.gen_range(-1.0..1.0),
        weight: rng.gen_range(0.5..8.0),
        p: [1.5, 2.0, 3.0][rng.gen_range(0..3)],
    })
}

/// `min_w Σ μ(t)[f(t, w(t)) + n|w(t) − c|^p]` over the joint vector `w`: a full
/// grid on `[c − 5, c + 5]^m` followed by coordinate descent from its best point.
fn joint_minimum(inst: &IdentityInstance) -> f64 {
    let atoms = inst.space.atoms();
    let m = atoms.len();
    let obj = |w: &[f64]| -> f64 {
        atoms
            .iter()
            .zip(w)
            .map(|(a, z)| a.weight * (inst.f.value(a, &[*z]) + inst.weight * (z - inst.center).abs().powf(inst.p)))
            .sum()
    };
    const N: usize = 60;
    let h = 10.0 / N as f64;
    let mut best = (vec![inst.center; m], f64::INFINITY);
    let mut idx = vec![0usize; m];
    loop {
        let w: Vec<f64> = idx.iter().map(|&k| inst.center - 5.0 + h * k as f64).collect();
        let v = obj(&w);
        if v < best.1 {
            best = (w, v);
        }
        let mut i = 0;
        while i < m && idx[i] == N {
            idx[i] = 0;
            i += 1;
        }
        if i == m {
            break;
        }
        idx[i] += 1;
    }
    coordinate_descent(&obj, &best.0, h, 1e-12, None).1.min(best.1)
}

fn op_interchange_identity(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: IdentityParams = ctx.params(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut table = Table::new(
        "instances",
        &[
            "index",
            "family",
            "atoms",
            "center",
            "weight",
            "p",
            "decoupled",
            "brute_force",
            "difference",
        ],
    );
    let mut rows = vec![];
    let mut worst: f64 = 0.0;
    for i in 0..prm.instances {
        let inst = identity_instance(&mut rng, prm.max_atoms)?;
        let dec = decoupled_infimum(
            &inst.space,
            inst.f.as_ref(),
            &[inst.center],
            inst.weight,
            inst.p,
            &SolverOptions::for_dim(1),
        )?;
        let brute = joint_minimum(&inst);
        let diff = (dec.value - brute).abs();
        worst = worst.max(diff);
        table.rows.push(vec![
            i.to_string(),
            inst.family.into(),
            inst.space.len().to_string(),
            num(inst.center),
            num(inst.weight),
            num(inst.p),
            num(dec.value),
            num(brute),
            num(diff),
        ]);
        rows.push(json!({
            "family": inst.family,
            "atoms": inst.space.len(),
            "center": inst.center,
            "weight": inst.weight,
            "p": inst.p,
            "decoupled": dec.value,
            "brute_force": brute,
            "difference": diff,
            "flagged": dec.flagged,
        }));
    }
    Ok(OpOutput {
        certificate: json!({ "instances": rows, "max_difference": worst }),
        resolution: "joint grid 61^m on [c-5, c+5]^m, coordinate descent to 1e-12".into(),
        tables: vec![table],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleParams {
    x0: PointSpec,
    #[serde(default)]
    options: BundleOptions,
    #[serde(default = "default_floor")]
    trend_floor: f64,
}

fn default_floor() -> f64 {
    1e-6
}

const RESIDUAL_COLUMNS: [&str; 8] = ["r_a", "r_b_point", "r_b_function", "r_c", "r_d", "r_e", "r_e_norm", "r_f"];

fn op_bundle(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let mut prm: BundleParams = ctx.params(p)?;
    let f = ctx.f()?;
    let x0 = prm.x0.to_vec();
    check_dim(&x0, f.dim(), format!("experiments[{}].params.x0", ctx.index))?;
    prm.options.solver.seed = ctx.seed;
    prm.options.validate().map_err(|e| match e {
        Error::Config { field, reason } => config_err(format!("experiments[{}].params.options.{field}", ctx.index), reason),
        other => other,
    })?;
    let b = theorem33_bundle(ctx.space()?, f, &x0, &prm.options)?;
    let mut header = vec!["n", "eps_n"];
    header.extend(RESIDUAL_COLUMNS);
    let mut table = Table::new("residuals", &header);
    for e in &b.entries {
        let mut r = vec![num(e.n), num(e.eps_n)];
        r.extend(e.residuals.columns().iter().map(|c| num(c.1)));
        table.rows.push(r);
    }
    let mut last = BTreeMap::new();
    let mut trend = BTreeMap::new();
    let mut max_final: f64 = 0.0;
    for c in RESIDUAL_COLUMNS {
        let col = b.column(c);
        let v = col.last().copied().unwrap_or(f64::NAN);
        max_final = max_final.max(v.abs());
        last.insert(c, v);
        trend.insert(
            c,
            nonincreasing(&col.iter().map(|v| v.abs()).collect::<Vec<_>>(), prm.trend_floor),
        );
    }
    Ok(OpOutput {
        certificate: json!({
            "base_point": b.base_point,
            "p": b.p,
            "n_schedule": prm.options.n_schedule,
            "final": last,
            "max_final": max_final,
            "nonincreasing": trend,
            "all_nonincreasing": trend.values().all(|t| *t),
            "warnings": b.warnings,
        }),
        resolution: format!(
            "inner_grid={}, outer_grid={}, i_max={}, trend_floor={}",
            prm.options.inner_grid, prm.options.outer_grid, prm.options.i_max, prm.trend_floor
        ),
        tables: vec![table],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialParams {
    #[serde(default = "hundred")]
    trials: usize,
}

fn hundred() -> usize {
    100
}

/// Test functions with known infimum and a point at prescribed excess.
#[derive(Debug, Clone, Copy)]
enum TrialFamily {
    Quadratic { a: f64, s: f64 },
    Abs { a: f64, s: f64 },
    AbsSquare { a: f64, b: f64, s: f64 },
    DoubleWell,
    Norm2 { a: f64, s: [f64; 2] },
    NormSquare2 { a: f64, s: [f64; 2] },
}

impl TrialFamily {
    fn random(rng: &mut ChaCha8Rng, k: usize) -> Self {
        let a = rng.gen_range(0.5..3.0);
        let s = rng.gen_range(-1.0..1.0);
        let s2 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        match k % 6 {
            0 => TrialFamily::Quadratic { a, s },
            1 => TrialFamily::Abs { a, s },
            2 => TrialFamily::AbsSquare {
                a,
                b: rng.gen_range(0.1..2.0),
                s,
            },
            3 => TrialFamily::DoubleWell,
            4 => TrialFamily::Norm2 { a, s: s2 },
            _ => TrialFamily::NormSquare2 { a, s: s2 },
        }
    }

    fn name(&self) -> &'static str {
        match self {
            TrialFamily::Quadratic { .. } => "quadratic",
            TrialFamily::Abs { .. } => "abs",
            TrialFamily::AbsSquare { .. } => "abs_square",
            TrialFamily::DoubleWell => "double_well",
            TrialFamily::Norm2 { .. } => "norm2",
            TrialFamily::NormSquare2 { .. } => "norm_square2",
        }
    }

    fn value(&self, z: &[f64]) -> f64 {
        match *self {
            TrialFamily::Quadratic { a, s } => a * (z[0] - s).powi(2),
            TrialFamily::Abs { a, s } => a * (z[0] - s).abs(),
            TrialFamily::AbsSquare { a, b, s } => a * (z[0] - s).abs() + b * (z[0] - s).powi(2),
            TrialFamily::DoubleWell => (z[0] * z[0] - 1.0).powi(2),
            TrialFamily::Norm2 { a, s } => a * vecops::dist(z, &s),
            TrialFamily::NormSquare2 { a, s } => a * vecops::dist(z, &s).powi(2),
        }
    }

    /// A point where the value exceeds the minimum by `excess`.
    fn point(&self, excess: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let u = [theta.cos(), theta.sin()];
        match *self {
            TrialFamily::Quadratic { a, s } => vec![s + sign * (excess / a).sqrt()],
            TrialFamily::Abs { a, s } => vec![s + sign * excess / a],
            TrialFamily::AbsSquare { a, b, s } => {
                let r = (-a + (a * a + 4.0 * b * excess).sqrt()) / (2.0 * b);
                vec![s + sign * r]
            }
            TrialFamily::DoubleWell => vec![sign * (1.0 + excess.sqrt()).sqrt()],
            TrialFamily::Norm2 { a, s } => {
                let r = excess / a;
                vec![s[0] + r * u[0], s[1] + r * u[1]]
            }
            TrialFamily::NormSquare2 { a, s } => {
                let r = (excess / a).sqrt();
                vec![s[0] + r * u[0], s[1] + r * u[1]]
            }
        }
    }
}

fn op_eps_min_trials(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: TrialParams = ctx.params(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut table = Table::new(
        "trials",
        &[
            "index",
            "family",
            "dim",
            "eps",
            "lam",
            "distance",
            "value_change",
            "norm",
            "norm_bound",
            "membership",
            "pass",
        ],
    );
    let mut passed = 0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut failures = vec![];
    for k in 0..prm.trials {
        let fam = TrialFamily::random(&mut rng, k);
        let eps = 10f64.powf(rng.gen_range(-3.0..-1.0));
        let lam = rng.gen_range(0.05..1.0);
        let z = fam.point(0.9 * eps * rng.gen_range(0.0..1.0), &mut rng);
        let func = |y: &[f64]| fam.value(y);
        let opts = SolverOptions {
            seed: ctx.seed.wrapping_add(k as u64),
            ..SolverOptions::for_dim(z.len())
        };
        let r = subgrad_at_eps_min(&func, &z, eps, lam, &opts)?;
        let ok = r.distance <= lam * (1.0 + 1e-9)
            && r.value_change <= eps * (1.0 + 1e-9)
            && r.membership.accept
            && r.norm <= r.norm_bound + 1e-9;
        passed += ok as usize;
        worst_excess = worst_excess.max(r.norm - r.norm_bound);
        table.rows.push(vec![
            k.to_string(),
            fam.name().into(),
            z.len().to_string(),
            num(eps),
            num(lam),
            num(r.distance),
            num(r.value_change),
            num(r.norm),
            num(r.norm_bound),
            r.membership.accept.to_string(),
            ok.to_string(),
        ]);
        if !ok {
            failures.push(json!({ "index": k, "family": fam.name(), "z": z, "eps": eps, "lam": lam, "result": r }));
        }
    }
    Ok(OpOutput {
        certificate: json!({
            "trials": prm.trials,
            "passed": passed,
            "worst_norm_excess": worst_excess,
            "failures": failures,
        }),
        resolution: "membership probes at radius 1e-7, tolerance 1e-6".into(),
        tables: vec![table],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeInput {
    dim: usize,
    generators: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BipolarParams {
    cones: Vec<ConeInput>,
    #[serde(default = "default_budget")]
    budget: f64,
}

fn default_budget() -> f64 {
    1e12
}

fn two_atoms() -> Result<MeasureSpace> {
    make_finite_atoms(&[("a", 0.5), ("b", 0.5)])
}

fn op_bipolar(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: BipolarParams = ctx.params(p)?;
    let owned;
    let space = match ctx.space {
        Some(s) => s,
        None => {
            owned = two_atoms()?;
            &owned
        }
    };
    let mut out = vec![];
    let mut passed = 0;
    for (i, c) in prm.cones.iter().enumerate() {
        if !(1..=3).contains(&c.dim) || c.generators.iter().any(|g| g.len() != c.dim) {
            return Err(config_err(
                format!("experiments[{}].params.cones[{i}]", ctx.index),
                "dimension must be 1..3 and match every generator",
            ));
        }
        let cone = SetRepr::cone(c.dim, c.generators.clone());
        let field = AtomFunction::constant(space, cone.clone());
        let back = ui_polar(space, &field, c.dim, prm.budget)?;
        let h = hausdorff_distance(&back, &cone)?;
        let ok = h <= pitch(c.dim);
        passed += ok as usize;
        out.push(json!({
            "dim": c.dim,
            "generators": c.generators,
            "polar_of_ui": back,
            "hausdorff": h,
            "pitch": pitch(c.dim),
            "pass": ok,
        }));
    }
    Ok(OpOutput {
        certificate: json!({ "cones": out, "passed": passed }),
        resolution: format!("direction-grid pitch per dimension, budget={}", prm.budget),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RobustnessParams {
    region: Region,
    #[serde(default = "two")]
    p: f64,
    #[serde(default = "criterion_c")]
    criterion: Criterion,
    #[serde(default = "default_schedule")]
    n_schedule: Vec<f64>,
    #[serde(default = "unanchored")]
    mode: StabilizationMode,
    #[serde(default)]
    solver: SolverOptions,
}

fn two() -> f64 {
    2.0
}

fn criterion_c() -> Criterion {
    Criterion::C
}

fn unanchored() -> StabilizationMode {
    StabilizationMode::Unanchored
}

fn op_robustness(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let mut prm: RobustnessParams = ctx.params(p)?;
    let space = ctx.space()?;
    let f = ctx.f()?;
    check_dim(
        &prm.region.center(),
        f.dim(),
        format!("experiments[{}].params.region", ctx.index),
    )?;
    prm.solver.seed = ctx.seed;
    let suff = robustness_sufficiency(space, f, &prm.region, prm.criterion, prm.p)?;
    let rep = stabilized_infimum(space, f, &prm.region, prm.p, &prm.n_schedule, &prm.mode, &prm.solver)?;
    let mut header = vec!["n".to_string(), "value".into(), "gap".into()];
    header.extend((0..f.dim()).map(|i| format!("u{i}")));
    let mut table = Table {
        name: "penalty".into(),
        header,
        rows: vec![],
    };
    for pv in &rep.penalty_values {
        let mut r = vec![num(pv.n), num(pv.value), num(rep.plain_infimum - pv.value)];
        r.extend(pv.u.iter().map(|c| num(*c)));
        table.rows.push(r);
    }
    Ok(OpOutput {
        certificate: json!({
            "sufficiency": suff,
            "plain_infimum": rep.plain_infimum,
            "plain_argmin": rep.plain_argmin,
            "stabilized_estimate": rep.stabilized_estimate,
            "gap": rep.gap,
            "verdict": rep.verdict,
            "mode": rep.mode,
            "diagnostic": rep.diagnostic,
        }),
        resolution: format!(
            "n_schedule={:?}, inner_tol={}, grid={}",
            prm.n_schedule, prm.solver.inner_tol, prm.solver.grid
        ),
        tables: vec![table],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MonotonicityParams {
    region: Region,
    #[serde(default = "default_schedule")]
    n_schedule: Vec<f64>,
    #[serde(default = "two")]
    low_p: f64,
    #[serde(default = "four")]
    high_p: f64,
    #[serde(default)]
    integrands: Option<Vec<IntegrandSpec>>,
}

fn four() -> f64 {
    4.0
}

fn op_p_monotonicity(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: MonotonicityParams = ctx.params(p)?;
    let space = ctx.space()?;
    let specs = prm.integrands.clone().unwrap_or_else(|| {
        CATALOG
            .iter()
            .map(|e| IntegrandSpec {
                name: e.name.into(),
                params: Value::Null,
                minorant: None,
            })
            .collect()
    });
    let opts = SolverOptions {
        seed: ctx.seed,
        ..SolverOptions::default()
    };
    let mut entries = vec![];
    let mut holds = true;
    for (i, spec) in specs.iter().enumerate() {
        let f = spec.build().map_err(|e| match e {
            Error::Config { field, reason } => config_err(
                format!(
                    "experiments[{}].params.integrands[{i}].{}",
                    ctx.index,
                    field.trim_start_matches("integrand.")
                ),
                reason,
            ),
            other => other,
        })?;
        if f.dim() != prm.region.dim() {
            entries.push(json!({ "name": spec.name, "skipped": "dimension differs from the region" }));
            continue;
        }
        let mode = StabilizationMode::Unanchored;
        let lo = stabilized_infimum(space, f.as_ref(), &prm.region, prm.low_p, &prm.n_schedule, &mode, &opts)?;
        let hi = stabilized_infimum(space, f.as_ref(), &prm.region, prm.high_p, &prm.n_schedule, &mode, &opts)?;
        let implication = lo.verdict != Verdict::Robust || hi.verdict == Verdict::Robust;
        holds &= implication;
        entries.push(json!({
            "name": spec.name,
            "low": lo.verdict,
            "high": hi.verdict,
            "gap_low": lo.gap,
            "gap_high": hi.gap,
            "implication": implication,
        }));
    }
    Ok(OpOutput {
        certificate: json!({ "entries": entries, "holds": holds }),
        resolution: format!("n_schedule={:?}, p={} vs {}", prm.n_schedule, prm.low_p, prm.high_p),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleParams {
    #[serde(default = "hundredth")]
    tol: f64,
    #[serde(default)]
    schedule: ProbeSchedule,
}

fn hundredth() -> f64 {
    1e-2
}

fn op_oracle_equivalence(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: OracleParams = ctx.params(p)?;
    let interval = |lo, hi| SetRepr::interval(lo, hi);
    let pm1 = interval(Some(-1.0), Some(1.0));
    let unit = interval(Some(0.0), Some(1.0));
    let zero = SetRepr::point(vec![0.0]);
    let normal = interval(None, Some(0.0));
    type Case = (&'static str, fn(&[f64]) -> f64, [SetRepr; 3]);
    let cases: Vec<Case> = vec![
        ("abs", |x| x[0].abs(), [pm1.clone(), pm1.clone(), pm1.clone()]),
        (
            "neg_abs",
            |x| -x[0].abs(),
            [
                SetRepr::empty(1),
                SetRepr::cloud(1, vec![vec![-1.0], vec![1.0]], vec![]),
                pm1.clone(),
            ],
        ),
        ("positive_part", |x| x[0].max(0.0), [unit.clone(), unit.clone(), unit.clone()]),
        ("square", |x| x[0] * x[0], [zero.clone(), zero.clone(), zero.clone()]),
        (
            "indicator_nonnegative",
            |x| if x[0] >= 0.0 { 0.0 } else { f64::INFINITY },
            [normal.clone(), normal.clone(), normal.clone()],
        ),
    ];
    let mut out = vec![];
    let mut worst: f64 = 0.0;
    for (name, func, expect) in &cases {
        let est = all_estimates(func, &[0.0], &prm.schedule)?;
        for (kind, got, want) in [
            ("frechet", &est.frechet, &expect[0]),
            ("limiting", &est.limiting, &expect[1]),
            ("clarke", &est.clarke, &expect[2]),
        ] {
            let h = hausdorff_distance(got, want)?;
            worst = worst.max(h);
            out.push(json!({ "function": name, "kind": kind, "hausdorff": h, "pass": h <= prm.tol, "estimate": got }));
        }
    }
    Ok(OpOutput {
        certificate: json!({ "cases": out, "max_hausdorff": worst, "pass": worst <= prm.tol }),
        resolution: prm.schedule.resolution(),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SoleParams {
    #[serde(default = "twenty")]
    instances: usize,
    #[serde(default = "two_three")]
    dims: Vec<usize>,
}

fn twenty() -> usize {
    20
}

fn two_three() -> Vec<usize> {
    vec![2, 3]
}

/// Generators of a pointed simplicial cone and the unit inner normals of its facets.
fn simplicial_cone(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    if dim == 2 {
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let b = a + rng.gen_range(0.3..2.8);
        let g = vec![vec![a.cos(), a.sin()], vec![b.cos(), b.sin()]];
        let normals = vec![vec![-a.sin(), a.cos()], vec![b.sin(), -b.cos()]];
        return (g, normals);
    }
    let axis = loop {
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Some(u) = normalized(&v) {
            break u;
        }
    };
    let helper = if axis[0].abs() < 0.9 {
        vec![1.0, 0.0, 0.0]
    } else {
        vec![0.0, 1.0, 0.0]
    };
    let p = normalized(&cross(&axis, &helper)).expect("helper is not parallel to the axis");
    let q = cross(&axis, &p);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let spread = rng.gen_range(0.4..1.2);
    let g: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let t = phase + k as f64 * std::f64::consts::TAU / 3.0 + rng.gen_range(-0.3..0.3);
            let v: Vec<f64> = (0..3).map(|i| axis[i] + spread * (t.cos() * p[i] + t.sin() * q[i])).collect();
            normalized(&v).expect("nonzero generator")
        })
        .collect();
    let normals = (0..3)
        .map(|k| {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let n = normalized(&cross(&g[i], &g[j])).expect("independent generators");
            if dot(&n, &g[k]) < 0.0 {
                vecops::scale(&n, -1.0)
            } else {
                n
            }
        })
        .collect();
    (g, normals)
}

fn op_sole_duality(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let prm: SoleParams = ctx.params(p)?;
    if prm.dims.is_empty() || prm.dims.iter().any(|d| !(2..=3).contains(d)) {
        return Err(config_err(
            format!("experiments[{}].params.dims", ctx.index),
            "dimensions must be 2 or 3",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let space = make_finite_atoms(&[("c", 1.0)])?;
    let mut out = vec![];
    let mut agreements = 0;
    for k in 0..prm.instances {
        let dim = prm.dims[k % prm.dims.len()];
        let (g, normals) = simplicial_cone(&mut rng, dim);
        let mut e = vec![0.0; dim];
        for gi in &g {
            e = vecops::axpy(&e, rng.gen_range(0.2..1.0), gi);
        }
        let depth = normals.iter().map(|n| dot(n, &e)).fold(f64::INFINITY, f64::min);
        let factor = if (k / prm.dims.len()).is_multiple_of(2) { 0.5 } else { 1.5 };
        let delta = factor * depth;
        let field = AtomFunction::constant(&space, SetRepr::cone(dim, g.clone()));
        let (primal, dual) = sole_duality_check(&space, &field, &e, delta)?;
        let expected = factor < 1.0;
        let agree = primal.pass == dual.pass && primal.pass == expected;
        agreements += agree as usize;
        out.push(json!({
            "dim": dim,
            "generators": g,
            "e": e,
            "delta": delta,
            "gamma": 1.0 / delta,
            "depth": depth,
            "expected": expected,
            "primal": primal.pass,
            "dual": dual.pass,
            "agree": agree,
        }));
    }
    Ok(OpOutput {
        certificate: json!({ "instances": out, "agreements": agreements, "total": prm.instances }),
        resolution: "primal on the direction grid plus axes; dual on polar generators".into(),
        tables: vec![],
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FatouParams {
    x: PointSpec,
    #[serde(default)]
    bases: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    bundle: BundleOptions,
    #[serde(default)]
    options: EstimateOptions,
}

fn op_fatou(ctx: &Ctx<'_>, p: &Value) -> Result<OpOutput> {
    let mut prm: FatouParams = ctx.params(p)?;
    let space = ctx.space()?;
    let f = ctx.f()?;
    let d = f.dim();
    let at = |s: &str| format!("experiments[{}].params.{s}", ctx.index);
    let x = prm.x.to_vec();
    check_dim(&x, d, at("x"))?;
    let bases = match &prm.bases {
        None => vec![SeminormSpec::full(d)],
        Some(bs) => bs
            .iter()
            .enumerate()
            .map(|(i, b)| SeminormSpec::new(b.clone()).map_err(|e| config_err(at(&format!("bases[{i}]")), e.to_string())))
            .collect::<Result<_>>()?,
    };
    prm.bundle.solver.seed = ctx.seed;
    let b = theorem33_bundle(space, f, &x, &prm.bundle)?;
    let v = fatou_bundle_check(space, f, &x, &b, &bases, &ctx.estimate_options(prm.options))?;
    Ok(OpOutput {
        certificate: to_value(&v),
        resolution: format!("n_schedule={:?}", prm.bundle.n_schedule),
        tables: vec![],
    })
}

fn dispatch(op: &str, ctx: &Ctx<'_>, params: &Value) -> Result<OpOutput> {
    match op {
        "functional_value" => op_functional_value(ctx, params),
        "hypothesis_check" => op_hypothesis(ctx, params),
        "limiting_upper_estimate" => op_estimate(ctx, params, "limiting"),
        "singular_upper_estimate" => op_estimate(ctx, params, "singular"),
        "clarke_upper_estimate" => op_estimate(ctx, params, "clarke"),
        "lipschitz_verdict" => op_lipschitz(ctx, params),
        "gradient_interchange" => op_gradient_interchange(ctx, params),
        "interchange_identity" => op_interchange_identity(ctx, params),
        "bundle" => op_bundle(ctx, params),
        "eps_min_trials" => op_eps_min_trials(ctx, params),
        "bipolar" => op_bipolar(ctx, params),
        "robustness" => op_robustness(ctx, params),
        "p_monotonicity" => op_p_monotonicity(ctx, params),
        "oracle_equivalence" => op_oracle_equivalence(ctx, params),
        "sole_duality" => op_sole_duality(ctx, params),
        "fatou_bundle" => op_fatou(ctx, params),
        other => Err(config_err("op", format!("unknown op `{other}`"))),
    }
}

/// Runs every experiment in order. Returns the report and the tables keyed by
/// file name; nothing is written.
pub fn execute(sc: &Scenario, seed: u64) -> Result<(Report, Vec<(String, Table)>)> {
    sc.validate()?;
    let space = sc
        .measure
        .as_ref()
        .map(|m| m.build().map_err(|e| config_err("measure", e.to_string())))
        .transpose()?;
    let f = sc.integrand.as_ref().map(IntegrandSpec::build).transpose()?;
    let mut experiments = vec![];
    let mut files = vec![];
    let mut failed = 0;
    for (i, ex) in sc.experiments.iter().enumerate() {
        let ctx = Ctx {
            measure: sc.measure.as_ref(),
            space: space.as_ref(),
            f: f.as_ref(),
            seed: seed.wrapping_add(i as u64),
            index: i,
        };
        log::info!("running `{}` ({})", ex.id, ex.op);
        let out = dispatch(&ex.op, &ctx, &ex.params)?;
        let verdicts: Vec<ExpectationVerdict> = ex.expect.iter().map(|e| evaluate(e, &out.certificate)).collect();
        for v in verdicts.iter().filter(|v| !v.pass) {
            log::warn!("`{}` {}: expected {:?}, got {}", ex.id, v.pointer, v.expected, v.actual);
        }
        failed += verdicts.iter().filter(|v| !v.pass).count();
        let mut names = vec![];
        for t in out.tables {
            let file = format!("{}.{}.{}.csv", sc.name, ex.id, t.name);
            names.push(file.clone());
            files.push((file, t));
        }
        experiments.push(ExperimentReport {
            id: ex.id.clone(),
            op: ex.op.clone(),
            resolution: out.resolution,
            pass: verdicts.iter().all(|v| v.pass),
            certificate: out.certificate,
            verdicts,
            tables: names,
        });
    }
    let measure = match (&sc.measure, &space) {
        (Some(spec), Some(s)) => Some(MeasureSummary {
            spec: spec.clone(),
            atoms: s.len(),
            total_mass: s.total_mass(),
            reference: s.reference(),
            truncated_tail: s.truncated_tail(),
        }),
        _ => None,
    };
    Ok((
        Report {
            schema: REPORT_SCHEMA,
            scenario: sc.name.clone(),
            seed,
            measure,
            integrand: sc.integrand.clone(),
            experiments,
            failed_expectations: failed,
            pass: failed == 0,
        },
        files,
    ))
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the scenario seed.
    pub seed: Option<u64>,
    /// Overrides the scenario output directory.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub report_path: PathBuf,
    pub table_paths: Vec<PathBuf>,
}

impl RunOutcome {
    /// 0 when every expectation holds, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.pass {
            0
        } else {
            2
        }
    }
}

/// Exit code for a failed run (configuration, I/O or runtime error).
pub const ERROR_EXIT: i32 = 1;

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Reads, runs and writes `<out>/<name>.report.json` plus one CSV per table.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let text = std::fs::read_to_string(config_path).map_err(|e| io_err(config_path, e))?;
    let sc = parse_scenario(&text)?;
    let seed = opts.seed.unwrap_or(sc.seed);
    let (report, tables) = execute(&sc, seed)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let out = match (&opts.out_dir, &sc.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) if d.is_relative() => base.join(d),
        (None, Some(d)) => d.clone(),
        (None, None) => PathBuf::from("subdiff-out"),
    };
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let mut table_paths = vec![];
    for (name, t) in &tables {
        let path = out.join(name);
        std::fs::write(&path, t.to_csv()?).map_err(|e| io_err(&path, e))?;
        table_paths.push(path);
    }
    let report_path = out.join(format!("{}.report.json", sc.name));
    std::fs::write(&report_path, report.render()).map_err(|e| io_err(&report_path, e))?;
    Ok(RunOutcome {
        report,
        report_path,
        table_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(body: &str) -> String {
        format!(r#"{{"schema": "subdiff-scenario/1", "name": "t", {body}}}"#)
    }

    #[test]
    fn unknown_integrand_names_the_field() {
        let sc = parse_scenario(&scenario(
            r#""measure": {"kind": "uniform_grid", "cells": 4},
               "integrand": {"name": "nope"},
               "experiments": [{"id": "v", "op": "functional_value", "params": {"points": [0.5]}}]"#,
        ))
        .unwrap();
        match execute(&sc, 0) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "integrand.name"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_a_path() {
        let err = parse_scenario(&scenario(r#""experiments": [{"id": "v", "op": "bipolar", "bogus": 1}]"#)).unwrap_err();
        match err {
            Error::Config { field, reason } => {
                assert!(field.starts_with("experiments[0]"), "{field}");
                assert!(reason.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        let err = parse_scenario(&scenario(r#""experiments": [{"id": "v", "op": "nope"}]"#)).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "experiments[0].op"));
        let err = parse_scenario(r#"{"schema": "other/2", "name": "t", "experiments": []}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "schema"));
    }

    #[test]
    fn missing_integrand_is_reported() {
        let err = parse_scenario(&scenario(
            r#""measure": {"kind": "uniform_grid", "cells": 4},
               "experiments": [{"id": "v", "op": "functional_value", "params": {"points": [0.5]}}]"#,
        ))
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "integrand"));
    }

    #[test]
    fn bad_op_params_are_config_errors() {
        let sc = parse_scenario(&scenario(
            r#""measure": {"kind": "uniform_grid", "cells": 4},
               "integrand": {"name": "norm_power"},
               "experiments": [{"id": "v", "op": "functional_value", "params": {"pts": [0.5]}}]"#,
        ))
        .unwrap();
        match execute(&sc, 0) {
            Err(Error::Config { field, .. }) => assert!(field.starts_with("experiments[0].params"), "{field}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expectations_report_margins() {
        let cert = json!({"a": 1.0, "b": [true], "s": "x"});
        let e = |ptr: &str| Expectation {
            pointer: ptr.into(),
            equals: None,
            tol: None,
            max: None,
            min: None,
        };
        let v = evaluate(
            &Expectation {
                equals: Some(json!(1.1)),
                tol: Some(0.2),
                ..e("/a")
            },
            &cert,
        );
        assert!(v.pass && (v.margin.unwrap() - 0.1).abs() < 1e-12);
        let v = evaluate(
            &Expectation {
                max: Some(0.5),
                ..e("/a")
            },
            &cert,
        );
        assert!(!v.pass && (v.margin.unwrap() + 0.5).abs() < 1e-12);
        let v = evaluate(
            &Expectation {
                equals: Some(json!(true)),
                ..e("/b/0")
            },
            &cert,
        );
        assert!(v.pass && v.margin.is_none());
        let v = evaluate(
            &Expectation {
                min: Some(0.0),
                ..e("/missing")
            },
            &cert,
        );
        assert!(!v.pass && v.actual.is_null());
        let v = evaluate(
            &Expectation {
                equals: Some(json!("x")),
                ..e("/s")
            },
            &cert,
        );
        assert!(v.pass);
    }

    #[test]
    fn value_scenario_end_to_end() {
        let sc = parse_scenario(&scenario(
            r#""measure": {"kind": "geometric_grid", "cells": 10000, "ratio": 0.99},
               "integrand": {"name": "example45a"},
               "experiments": [{"id": "v", "op": "functional_value",
                                "params": {"points": [0.25], "refinements": [2000]},
                                "expect": [{"pointer": "/values/0/value", "equals": 0.5, "tol": 1e-3},
                                           {"pointer": "/max_error", "max": 1e-9}]}]"#,
        ))
        .unwrap();
        let (rep, tables) = execute(&sc, 7).unwrap();
        let ex = &rep.experiments[0];
        assert!(ex.verdicts[0].pass, "{:?}", ex.verdicts);
        assert!(!ex.verdicts[1].pass && ex.verdicts[1].margin.unwrap() < 0.0);
        assert!(!rep.pass && rep.failed_expectations == 1);
        assert_eq!(tables.len(), 1);
        assert_eq!(tables[0].0, "t.v.quadrature.csv");
        let csv = tables[0].1.to_csv().unwrap();
        assert!(csv.starts_with("cells,x0,value,reference,error\n10000,0.25,"));
        assert_eq!(csv.lines().count(), 3);
        let (again, _) = execute(&sc, 7).unwrap();
        assert_eq!(rep.render(), again.render());
    }

    #[test]
    fn catalog_listing() {
        let all = list_catalog("");
        assert!(all.contains("example45a") && all.contains("neg_abs_shifted"));
        assert!(all.lines().next().unwrap().contains("gradient"));
        let some = list_catalog("45");
        assert_eq!(some.lines().count(), 3);
    }

    #[test]
    fn every_op_explains_itself() {
        for o in OPS {
            assert!(explain(o.name).unwrap().starts_with(o.name));
        }
        assert!(explain("nope").is_err());
    }

    #[test]
    fn sole_instances_match_the_exact_answer() {
        let ctx = Ctx {
            measure: None,
            space: None,
            f: None,
            seed: 3,
            index: 0,
        };
        let out = op_sole_duality(&ctx, &json!({"instances": 8})).unwrap();
        assert_eq!(out.certificate["agreements"], json!(8), "{}", out.certificate);
    }

    #[test]
    fn identity_on_a_few_instances() {
        let ctx = Ctx {
            measure: None,
            space: None,
            f: None,
            seed: 11,
            index: 0,
        };
        let out = op_interchange_identity(&ctx, &json!({"instances": 4})).unwrap();
        assert!(
            out.certificate["max_difference"].as_f64().unwrap() <= 1e-6,
            "{}",
            out.certificate
        );
    }
}
