//! Extended reals in `(-∞, +∞]` and compensated accumulation over atoms.
//!
//! Integrals follow the conventions `0·(+∞) = 0` and `+∞ + (−∞) = +∞`. A value
//! that is finite only because a zero-weight atom evaluated to `+∞` is not
//! hidden: the accumulator records the tags where the convention applied.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A value in `(-∞, +∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    /// Converts an oracle output. `NaN` and `-∞` are not values of this type.
    pub fn from_f64(v: f64) -> Option<Self> {
        if v.is_nan() || v == f64::NEG_INFINITY {
            None
        } else if v == f64::INFINITY {
            Some(ExtReal::PosInf)
        } else {
            Some(ExtReal::Finite(v))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Lossy view for numerical routines: `+∞` maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

/// Neumaier compensated sum; the result depends only on the order of `add`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Compensated sum of an iterator of finite reals.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Sign-split accumulator for `Σ weight · value` over atoms.
#[derive(Debug, Clone, Default)]
pub struct SplitAccumulator {
    positive: CompensatedSum,
    negative: CompensatedSum,
    infinite_at: Vec<String>,
    convention_at: Vec<String>,
}

impl SplitAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, tag: &str, weight: f64, value: ExtReal) {
        match value {
            ExtReal::PosInf if weight > 0.0 => self.infinite_at.push(tag.to_string()),
            ExtReal::PosInf => self.convention_at.push(tag.to_string()),
            ExtReal::Finite(v) => {
                let wv = weight * v;
                if wv >= 0.0 {
                    self.positive.add(wv);
                } else {
                    self.negative.add(wv);
                }
            }
        }
    }

    pub fn finish(self) -> IntegralValue {
        let positive = self.positive.value();
        let negative = self.negative.value();
        let value = if self.infinite_at.is_empty() {
            ExtReal::Finite(positive + negative)
        } else {
            ExtReal::PosInf
        };
        IntegralValue {
            value,
            positive_part: positive,
            negative_part: negative,
            infinite_at: self.infinite_at,
            zero_times_infinity_at: self.convention_at,
        }
    }
}

/// Result of an integral with its sign split and convention flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralValue {
    pub value: ExtReal,
    /// Sum of the nonnegative weighted terms.
    pub positive_part: f64,
    /// Sum of the negative weighted terms.
    pub negative_part: f64,
    /// Tags of positive-weight atoms that evaluated to `+∞`.
    pub infinite_at: Vec<String>,
    /// Tags of zero-weight atoms that evaluated to `+∞` and were dropped by `0·∞ = 0`.
    pub zero_times_infinity_at: Vec<String>,
}

impl IntegralValue {
    /// True when the value depends on the `0·∞ = 0` convention.
    pub fn uses_convention(&self) -> bool {
        !self.zero_times_infinity_at.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }

    #[test]
    fn zero_weight_infinity_is_flagged_not_summed() {
        let mut acc = SplitAccumulator::new();
        acc.add("a", 1.0, ExtReal::Finite(2.0));
        acc.add("b", 0.0, ExtReal::PosInf);
        let v = acc.finish();
        assert_eq!(v.value, ExtReal::Finite(2.0));
        assert!(v.uses_convention());
        assert_eq!(v.zero_times_infinity_at, vec!["b".to_string()]);
    }

    #[test]
    fn positive_weight_infinity_dominates_negative_part() {
        let mut acc = SplitAccumulator::new();
        acc.add("a", 1.0, ExtReal::Finite(-5.0));
        acc.add("b", 2.0, ExtReal::PosInf);
        assert_eq!(acc.finish().value, ExtReal::PosInf);
    }

    #[test]
    fn from_f64_rejects_nan() {
        assert!(ExtReal::from_f64(f64::NAN).is_none());
        assert_eq!(ExtReal::from_f64(f64::INFINITY), Some(ExtReal::PosInf));
    }
}
