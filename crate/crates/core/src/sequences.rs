//! Doubling sequences of restart horizons.
//!
//! Two families are supported:
//!
//! * geometric, `T_i = floor(T0 * b^i)`
//! * exponential, `T_i = floor((T0 / a) * a^(b^i))`
//!
//! Terms are clamped to [`SATURATION_CEILING`]. Anything at or above it is
//! reported as [`Term::Saturated`], which compares greater than every finite
//! term. A meta-algorithm only ever needs to know that such a horizon is out
//! of reach.

use std::fmt;

use thiserror::Error;

/// Terms at or above `2^62` are reported as saturated.
pub const SATURATION_CEILING: u64 = 1 << 62;

/// Relative distance under which a float term is snapped to the nearest
/// integer before flooring, so that `200 * 1.5^2` style products that land a
/// few ulps under an integer are not floored one too low.
const SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("first horizon T0 must be at least 1")]
    ZeroFirstHorizon,
    #[error("growth exponent b must be a finite real > 1, got {0}")]
    InvalidGrowth(f64),
    #[error("exponential base a must be a finite real > 1, got {0}")]
    InvalidBase(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    Geometric,
    Exponential,
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKind::Geometric => f.write_str("geometric"),
            SequenceKind::Exponential => f.write_str("exponential"),
        }
    }
}

/// A sequence term: either a finite horizon or the saturation marker.
///
/// The derived ordering puts every `Finite` value below `Saturated`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Finite(u64),
    Saturated,
}

impl Term {
    pub fn finite(self) -> Option<u64> {
        match self {
            Term::Finite(v) => Some(v),
            Term::Saturated => None,
        }
    }

    pub fn is_saturated(self) -> bool {
        matches!(self, Term::Saturated)
    }

    /// `true` iff this term is strictly greater than the finite value `t`.
    pub fn exceeds(self, t: u64) -> bool {
        match self {
            Term::Finite(v) => v > t,
            Term::Saturated => true,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Finite(v) => write!(f, "{v}"),
            Term::Saturated => f.write_str("inf"),
        }
    }
}

/// A non-decreasing diverging sequence of restart horizons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingSequence {
    kind: SequenceKind,
    t0: u64,
    b: f64,
    // Unused (1) for geometric sequences.
    a: f64,
}

impl DoublingSequence {
    pub fn geometric(t0: u64, b: f64) -> Result<Self, SequenceError> {
        check_first_and_growth(t0, b)?;
        Ok(Self {
            kind: SequenceKind::Geometric,
            t0,
            b,
            a: 1.0,
        })
    }

    pub fn exponential(t0: u64, a: f64, b: f64) -> Result<Self, SequenceError> {
        check_first_and_growth(t0, b)?;
        if !(a.is_finite() && a > 1.0) {
            return Err(SequenceError::InvalidBase(a));
        }
        Ok(Self {
            kind: SequenceKind::Exponential,
            t0,
            b,
            a,
        })
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn t0(&self) -> u64 {
        self.t0
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Exponential base, `None` for geometric sequences.
    pub fn a(&self) -> Option<f64> {
        match self.kind {
            SequenceKind::Geometric => None,
            SequenceKind::Exponential => Some(self.a),
        }
    }

    /// The `i`-th horizon `T_i`. The convention `T_{-1} = 0` is not part of
    /// this function; see [`segment_length`](Self::segment_length).
    pub fn term(&self, i: u64) -> Term {
        let ceiling_ln = (SATURATION_CEILING as f64).ln();
        let t0 = self.t0 as f64;
        let value = match self.kind {
            SequenceKind::Geometric => {
                let ln_value = t0.ln() + (i as f64) * self.b.ln();
                if ln_value >= ceiling_ln + 1e-9 {
                    return Term::Saturated;
                }
                t0 * pow_int(self.b, i)
            }
            SequenceKind::Exponential => {
                let tau = t0 / self.a;
                let exponent = pow_int(self.b, i);
                let ln_value = exponent * self.a.ln() + tau.ln();
                if !ln_value.is_finite() || ln_value >= ceiling_ln + 1e-9 {
                    return Term::Saturated;
                }
                tau * self.a.powf(exponent)
            }
        };
        let floored = snap_floor(value);
        if floored >= SATURATION_CEILING as f64 {
            Term::Saturated
        } else {
            Term::Finite(floored as u64)
        }
    }

    /// Length `T_i - T_{i-1}` of segment `i`, with `T_{-1} = 0`.
    pub fn segment_length(&self, i: u64) -> Term {
        let previous = if i == 0 {
            Term::Finite(0)
        } else {
            self.term(i - 1)
        };
        match (self.term(i), previous) {
            (Term::Finite(cur), Term::Finite(prev)) => Term::Finite(cur - prev),
            _ => Term::Saturated,
        }
    }

    /// `L_T = min { i : T_i > T }`, by walking the sequence.
    pub fn last_term_iterative(&self, t: u64) -> u64 {
        let mut i = 0;
        while !self.term(i).exceeds(t) {
            i += 1;
        }
        i
    }

    /// `L_T` from the ceiling/log closed form, corrected against the exact
    /// terms so that it always agrees with [`last_term_iterative`](Self::last_term_iterative).
    pub fn last_term_closed(&self, t: u64) -> u64 {
        if t < self.t0 {
            return 0;
        }
        let ratio = t as f64 / self.t0 as f64;
        let estimate = match self.kind {
            SequenceKind::Geometric => ratio.ln() / self.b.ln(),
            SequenceKind::Exponential => {
                let tau = self.t0 as f64 / self.a;
                let log_a = (t as f64 / tau).ln() / self.a.ln();
                log_a.ln() / self.b.ln()
            }
        };
        let mut l = if estimate.is_finite() && estimate > 0.0 {
            estimate.ceil() as u64
        } else {
            0
        };
        // The float ceiling is off by one exactly at power boundaries, and
        // the floor inside T_i can push it further for very slow growth.
        while !self.term(l).exceeds(t) {
            l += 1;
        }
        while l > 0 && self.term(l - 1).exceeds(t) {
            l -= 1;
        }
        l
    }

    /// Finite terms `T_0, T_1, ...` that are `<= limit`.
    pub fn terms_up_to(&self, limit: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut i = 0;
        while let Term::Finite(v) = self.term(i) {
            if v > limit {
                break;
            }
            if out.last() != Some(&v) {
                out.push(v);
            }
            i += 1;
        }
        out
    }
}

impl fmt::Display for DoublingSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SequenceKind::Geometric => write!(f, "geometric, t0={}, b={}", self.t0, self.b),
            SequenceKind::Exponential => write!(
                f,
                "exponential, t0={}, a={}, b={}",
                self.t0, self.a, self.b
            ),
        }
    }
}

fn check_first_and_growth(t0: u64, b: f64) -> Result<(), SequenceError> {
    if t0 == 0 {
        return Err(SequenceError::ZeroFirstHorizon);
    }
    if !(b.is_finite() && b > 1.0) {
        return Err(SequenceError::InvalidGrowth(b));
    }
    Ok(())
}

fn pow_int(base: f64, exp: u64) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => f64::INFINITY,
    }
}

fn snap_floor(value: f64) -> f64 {
    let nearest = value.round();
    if (value - nearest).abs() <= SNAP_TOLERANCE * nearest.abs().max(1.0) {
        nearest
    } else {
        value.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geo(t0: u64, b: f64) -> DoublingSequence {
        DoublingSequence::geometric(t0, b).unwrap()
    }

    fn exp(t0: u64, a: f64, b: f64) -> DoublingSequence {
        DoublingSequence::exponential(t0, a, b).unwrap()
    }

    #[test]
    fn geometric_terms() {
        assert_eq!(geo(200, 2.0).term(3), Term::Finite(1600));
        assert_eq!(geo(200, 2.0).term(0), Term::Finite(200));
    }

    #[test]
    fn exponential_terms_against_integer_powers() {
        let seq = exp(200, 200.0, 2.0);
        // tau = 1, so T_i = 200^(2^i) exactly while it fits.
        assert_eq!(seq.term(0), Term::Finite(200));
        assert_eq!(seq.term(1), Term::Finite(200u64.pow(2)));
        assert_eq!(seq.term(2), Term::Finite(200u64.pow(4)));
        assert_eq!(seq.term(3), Term::Finite(200u64.pow(8)));
        // 200^16 ~ 6.5e36 overflows the ceiling.
        assert!((16.0 * 200f64.log2()) > 62.0);
        assert_eq!(seq.term(4), Term::Saturated);
        assert_eq!(seq.term(1000), Term::Saturated);
    }

    #[test]
    fn exponential_with_small_base() {
        // tau = 100, T_i = 100 * 2^(2^i)
        let seq = exp(200, 2.0, 2.0);
        let expected = [200u64, 400, 1600, 25_600, 6_553_600];
        for (i, want) in expected.iter().enumerate() {
            assert_eq!(seq.term(i as u64), Term::Finite(*want));
        }
    }

    #[test]
    fn last_terms() {
        assert_eq!(geo(200, 2.0).last_term_iterative(199), 0);
        assert_eq!(geo(200, 2.0).last_term_iterative(45678), 8);
        assert_eq!(exp(200, 200.0, 2.0).last_term_iterative(45678), 2);
        assert_eq!(geo(200, 2.0).last_term_closed(45678), 8);
        assert_eq!(geo(100, 2.0).last_term_closed(100), 1);
        assert_eq!(geo(100, 2.0).last_term_iterative(100), 1);
        assert_eq!(exp(200, 200.0, 2.0).last_term_closed(199), 0);
    }

    #[test]
    fn closed_form_at_exact_powers() {
        let seq = geo(1, 2.0);
        for k in 0..61 {
            let t = 1u64 << k;
            assert_eq!(seq.last_term_closed(t), k + 1, "T = 2^{k}");
            assert_eq!(seq.last_term_iterative(t), k + 1);
        }
    }

    #[test]
    fn slow_growth_needs_more_than_one_correction() {
        // 1.1^i stays below 2 until i = 8, so many terms equal 1.
        let seq = geo(1, 1.1);
        assert_eq!(seq.last_term_iterative(1), 8);
        assert_eq!(seq.last_term_closed(1), 8);
    }

    #[test]
    fn segment_lengths() {
        assert_eq!(geo(200, 2.0).segment_length(0), Term::Finite(200));
        assert_eq!(geo(200, 2.0).segment_length(3), Term::Finite(800));
        // floor(3 * 2.25) - floor(3 * 1.5) = 6 - 4
        assert_eq!(geo(3, 1.5).segment_length(2), Term::Finite(2));
        assert_eq!(exp(200, 200.0, 2.0).segment_length(4), Term::Saturated);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            DoublingSequence::geometric(0, 2.0),
            Err(SequenceError::ZeroFirstHorizon)
        );
        assert!(matches!(
            DoublingSequence::geometric(10, 1.0),
            Err(SequenceError::InvalidGrowth(_))
        ));
        assert!(matches!(
            DoublingSequence::exponential(10, 1.0, 2.0),
            Err(SequenceError::InvalidBase(_))
        ));
        assert!(DoublingSequence::geometric(10, f64::NAN).is_err());
    }

    #[test]
    fn diverges_past_every_bound() {
        for seq in [geo(1, 2.0), geo(1000, 3.0), exp(1, 2.0, 1.1), exp(200, 200.0, 2.0)] {
            for m in [1u64, 1000, 1 << 40, SATURATION_CEILING] {
                assert!((0..=64).any(|i| seq.term(i).exceeds(m)), "{seq} bound {m}");
            }
        }
        // Slow geometric growth still diverges, just later than i = 64.
        let slow = geo(1, 1.1);
        assert!((0..=500).any(|i| slow.term(i).is_saturated()));
    }

    #[test]
    fn terms_up_to_lists_boundaries() {
        assert_eq!(geo(200, 2.0).terms_up_to(1000), vec![200, 400, 800]);
        assert_eq!(exp(200, 200.0, 2.0).terms_up_to(45678), vec![200, 40_000]);
    }

    fn any_sequence() -> impl Strategy<Value = DoublingSequence> {
        prop_oneof![
            (1u64..2000, 1.05f64..4.0).prop_map(|(t0, b)| geo(t0, b)),
            (1u64..2000, 1.1f64..300.0, 1.05f64..3.0).prop_map(|(t0, a, b)| exp(t0, a, b)),
        ]
    }

    proptest! {
        #[test]
        fn last_term_semantics(seq in any_sequence(), t in 1u64..10_000_000) {
            let l = seq.last_term_closed(t);
            prop_assert_eq!(l, seq.last_term_iterative(t));
            prop_assert!(seq.term(l).exceeds(t));
            prop_assert!(l == 0 || !seq.term(l - 1).exceeds(t));
        }

        #[test]
        fn non_decreasing(seq in any_sequence(), i in 0u64..200) {
            prop_assert!(seq.term(i + 1) >= seq.term(i));
        }

        #[test]
        fn geometric_sandwich(t0 in 1u64..5000, b in 1.05f64..4.0, i in 1u64..40) {
            let seq = geo(t0, b);
            if let Term::Finite(len) = seq.segment_length(i) {
                let centre = t0 as f64 * (b - 1.0) * b.powi(i as i32 - 1);
                let len = len as f64;
                prop_assert!(centre - 1.0 - 1e-6 * centre <= len);
                prop_assert!(len <= centre + 1.0 + 1e-6 * centre);
            }
        }
    }
}
