//! Model parameterization.
//!
//! A two-community SBM with community fractions `(p, 1-p)` and connectivity
//! `M = (d/n) (a b; b c)`. The coefficients satisfy the balance constraint
//! `pa + (1-p)b = pb + (1-p)c = 1`, so every vertex has mean degree `d`
//! whatever its community and degrees carry no information. Under that
//! constraint the model is fully described by `(p, d, lambda)` with
//! `lambda = d (1-b)^2`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance used when validating user-supplied `(a, b, c)`.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// Community label. Community 1 is the smaller one (fraction `p <= 1/2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Community {
    One,
    Two,
}

impl Community {
    pub fn index(self) -> usize {
        match self {
            Community::One => 0,
            Community::Two => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Community::One
        } else {
            Community::Two
        }
    }

    pub fn as_u8(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Community::One),
            2 => Ok(Community::Two),
            other => Err(Error::Parse(format!("label must be 1 or 2, got {other}"))),
        }
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Community {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Community {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Community::from_u8(v).map_err(serde::de::Error::custom)
    }
}

/// Validated model parameters. Immutable once built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    p: f64,
    d: f64,
    lambda: f64,
    epsilon: f64,
    a: f64,
    b: f64,
    c: f64,
    h: f64,
}

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0 && p <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in (0, 1/2], got {p}"
        )));
    }
    Ok(())
}

fn check_d(d: f64) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "d must be positive, got {d}"
        )));
    }
    Ok(())
}

impl ModelParams {
    /// Builds the model from `(p, d, lambda)`: `eps = sqrt(lambda/d)`,
    /// `a = 1 + (1-p)/p eps`, `b = 1 - eps`, `c = 1 + p/(1-p) eps`.
    pub fn new(p: f64, d: f64, lambda: f64) -> Result<Self> {
        check_p(p)?;
        check_d(d)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        if lambda > d {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} exceeds d = {d}; b = 1 - sqrt(lambda/d) would be negative"
            )));
        }
        let epsilon = (lambda / d).sqrt();
        let q = 1.0 - p;
        Ok(Self {
            p,
            d,
            lambda,
            epsilon,
            a: 1.0 + q / p * epsilon,
            b: 1.0 - epsilon,
            c: 1.0 + p / q * epsilon,
            h: (p / q).ln(),
        })
    }

    /// Builds the model from explicit affinities, rejecting any `(a, b, c)`
    /// whose rows deviate from the balance constraint by more than
    /// [`BALANCE_TOLERANCE`].
    pub fn from_abc(p: f64, d: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        check_p(p)?;
        check_d(d)?;
        for (name, v) in [("a", a), ("b", b), ("c", c)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        let q = 1.0 - p;
        let row1 = p * a + q * b;
        let row2 = p * b + q * c;
        if (row1 - 1.0).abs() > BALANCE_TOLERANCE || (row2 - 1.0).abs() > BALANCE_TOLERANCE {
            return Err(Error::BalanceViolated {
                row1,
                row2,
                tolerance: BALANCE_TOLERANCE,
            });
        }
        if b > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "b = {b} > 1 describes a disassortative model, which is not supported"
            )));
        }
        let epsilon = 1.0 - b;
        Ok(Self {
            p,
            d,
            lambda: d * epsilon * epsilon,
            epsilon,
            a,
            b,
            c,
            h: (p / q).ln(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Prior log-ratio `log(p / (1-p))`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Prior probability of a community.
    pub fn prior(&self, x: Community) -> f64 {
        match x {
            Community::One => self.p,
            Community::Two => 1.0 - self.p,
        }
    }

    /// Symmetric affinity matrix `(a b; b c)`.
    pub fn affinity(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.b, self.c]]
    }

    /// Edge probabilities `M = (d/n) (a b; b c)` for a graph on `n` vertices.
    pub fn connectivity(&self, n: usize) -> [[f64; 2]; 2] {
        let s = self.d / n as f64;
        [[s * self.a, s * self.b], [s * self.b, s * self.c]]
    }

    /// Transition matrix of the broadcast process: `R = (pa, (1-p)b; pb, (1-p)c)`.
    pub fn transition_matrix(&self) -> TransitionMatrix {
        let q = 1.0 - self.p;
        TransitionMatrix {
            rows: [[self.p * self.a, q * self.b], [self.p * self.b, q * self.c]],
        }
    }
}

/// Flat JSON form of the parameters: either `{p, d, lambda}` or `{p, d, a, b, c}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Lambda {
        p: f64,
        d: f64,
        lambda: f64,
    },
    Affinity {
        p: f64,
        d: f64,
        a: f64,
        b: f64,
        c: f64,
    },
}

impl ParamSpec {
    pub fn resolve(self) -> Result<ModelParams> {
        match self {
            ParamSpec::Lambda { p, d, lambda } => ModelParams::new(p, d, lambda),
            ParamSpec::Affinity { p, d, a, b, c } => ModelParams::from_abc(p, d, a, b, c),
        }
    }
}

impl Serialize for ModelParams {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ParamSpec::Lambda {
            p: self.p,
            d: self.d,
            lambda: self.lambda,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ModelParams {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ParamSpec::deserialize(d)?
            .resolve()
            .map_err(serde::de::Error::custom)
    }
}

/// Row-stochastic 2x2 matrix giving a child's community given its parent's.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub rows: [[f64; 2]; 2],
}

impl TransitionMatrix {
    pub fn get(&self, from: Community, to: Community) -> f64 {
        self.rows[from.index()][to.index()]
    }

    /// Both eigenvalues, largest first, from the closed-form 2x2 solution.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[m00, m01], [m10, m11]] = self.rows;
        let trace = m00 + m11;
        let det = m00 * m11 - m01 * m10;
        let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
        [(trace + disc) / 2.0, (trace - disc) / 2.0]
    }
}

/// Total-variation distance between `Poi(mean1)` and `Poi(mean2)` by direct
/// summation, stopped once both remaining tails are below `1e-12`.
pub fn poisson_tv(mean1: f64, mean2: f64) -> f64 {
    assert!(mean1 > 0.0 && mean2 > 0.0, "Poisson means must be positive");
    let (l1, l2) = (mean1.ln(), mean2.ln());
    let top = mean1.max(mean2);
    let mut cdf1 = 0.0;
    let mut cdf2 = 0.0;
    let mut sum = 0.0;
    let mut log_fact = 0.0;
    let mut k = 0u64;
    loop {
        if k > 0 {
            log_fact += (k as f64).ln();
        }
        let kf = k as f64;
        let p1 = (kf * l1 - mean1 - log_fact).exp();
        let p2 = (kf * l2 - mean2 - log_fact).exp();
        sum += (p1 - p2).abs();
        cdf1 += p1;
        cdf2 += p2;
        if kf > top && 1.0 - cdf1 < 1e-12 && 1.0 - cdf2 < 1e-12 {
            break;
        }
        k += 1;
    }
    (0.5 * sum).min(1.0)
}

/// Overlap achieved by a test with rescaled success probability `psucc`.
pub fn overlap_from_psucc(p: f64, psucc: f64) -> f64 {
    p * (1.0 - p) * psucc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn derive_examples() {
        let m = ModelParams::new(0.5, 100.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.epsilon(), 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(m.a(), 1.1, epsilon = 1e-14);
        assert_abs_diff_eq!(m.b(), 0.9, epsilon = 1e-14);
        assert_abs_diff_eq!(m.c(), 1.1, epsilon = 1e-14);

        let m = ModelParams::new(0.5, 4.0, 0.0).unwrap();
        assert_eq!((m.a(), m.b(), m.c()), (1.0, 1.0, 1.0));

        let m = ModelParams::new(0.25, 400.0, 4.0).unwrap();
        assert_abs_diff_eq!(m.epsilon(), 0.1, epsilon = 1e-14);
        assert_abs_diff_eq!(m.a(), 1.3, epsilon = 1e-14);
        assert_abs_diff_eq!(m.b(), 0.9, epsilon = 1e-14);
        assert_abs_diff_eq!(m.c(), 1.0 + 0.1 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn derive_rejects_bad_input() {
        assert!(ModelParams::new(0.5, 4.0, 5.0).is_err());
        assert!(ModelParams::new(0.6, 4.0, 1.0).is_err());
        assert!(ModelParams::new(0.0, 4.0, 1.0).is_err());
        assert!(ModelParams::new(0.3, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0.3, 4.0, -1.0).is_err());
    }

    #[test]
    fn from_abc_examples() {
        let m = ModelParams::from_abc(0.5, 4.0, 1.5, 0.5, 1.5).unwrap();
        assert_abs_diff_eq!(m.lambda(), 1.0, epsilon = 1e-14);

        let err = ModelParams::from_abc(0.5, 4.0, 2.0, 0.5, 1.5).unwrap_err();
        assert!(matches!(err, Error::BalanceViolated { .. }));

        let m = ModelParams::from_abc(0.25, 100.0, 1.3, 0.9, 31.0 / 30.0).unwrap();
        assert_abs_diff_eq!(m.lambda(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.epsilon(), 0.1, epsilon = 1e-14);
    }

    #[test]
    fn transition_examples() {
        let r = ModelParams::from_abc(0.5, 4.0, 1.5, 0.5, 1.5)
            .unwrap()
            .transition_matrix();
        assert_eq!(r.rows, [[0.75, 0.25], [0.25, 0.75]]);

        let r = ModelParams::new(0.3, 4.0, 0.0).unwrap().transition_matrix();
        assert_abs_diff_eq!(r.rows[0][0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rows[0][1], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rows[1][0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(r.rows[1][1], 0.7, epsilon = 1e-15);

        let r = ModelParams::from_abc(0.25, 100.0, 1.3, 0.9, 31.0 / 30.0)
            .unwrap()
            .transition_matrix();
        assert_abs_diff_eq!(r.rows[0][0], 0.325, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rows[0][1], 0.675, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rows[1][0], 0.225, epsilon = 1e-12);
        assert_abs_diff_eq!(r.rows[1][1], 0.775, epsilon = 1e-12);
        let [l1, l2] = r.eigenvalues();
        assert_abs_diff_eq!(l1, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(l2, 0.1, epsilon = 1e-10);
    }

    #[test]
    fn poisson_tv_examples() {
        assert_eq!(poisson_tv(3.0, 3.0), 0.0);
        // Independent oracle: term-by-term pmf via the recurrence P(k+1) = P(k) m/(k+1).
        let (mut p1, mut p2, mut acc) = ((-1.0f64).exp(), (-2.0f64).exp(), 0.0);
        for k in 0..200 {
            acc += (p1 - p2).abs();
            p1 *= 1.0 / (k as f64 + 1.0);
            p2 *= 2.0 / (k as f64 + 1.0);
        }
        assert_abs_diff_eq!(poisson_tv(1.0, 2.0), 0.5 * acc, epsilon = 1e-12);
        assert_abs_diff_eq!(poisson_tv(0.001, 10.0), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_from_psucc(0.5, 1.0), 0.25);
        assert_eq!(overlap_from_psucc(0.3, 0.0), 0.0);
        assert_abs_diff_eq!(overlap_from_psucc(0.25, 0.4), 0.075, epsilon = 1e-15);
    }

    #[test]
    fn json_forms() {
        let m: ModelParams = serde_json::from_str(r#"{"p":0.25,"d":400,"lambda":4}"#).unwrap();
        assert_abs_diff_eq!(m.a(), 1.3, epsilon = 1e-14);
        let m2: ModelParams =
            serde_json::from_str(r#"{"p":0.5,"d":4,"a":1.5,"b":0.5,"c":1.5}"#).unwrap();
        assert_abs_diff_eq!(m2.lambda(), 1.0, epsilon = 1e-14);
        let s = serde_json::to_string(&m2).unwrap();
        assert_eq!(s, r#"{"p":0.5,"d":4.0,"lambda":1.0}"#);
        assert!(
            serde_json::from_str::<ModelParams>(r#"{"p":0.5,"d":4,"a":2,"b":0.5,"c":1.5}"#)
                .is_err()
        );
    }

    fn valid() -> impl Strategy<Value = (f64, f64, f64)> {
        (1e-3f64..=0.5, 0.1f64..1e3, 0.0f64..=1.0).prop_map(|(p, d, frac)| (p, d, frac * d))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn invariants_hold((p, d, lambda) in valid()) {
            let m = ModelParams::new(p, d, lambda).unwrap();
            prop_assert!((p * m.a() + (1.0 - p) * m.b() - 1.0).abs() <= 1e-12);
            prop_assert!((p * m.b() + (1.0 - p) * m.c() - 1.0).abs() <= 1e-12);
            prop_assert!((d * (1.0 - m.b()).powi(2) - lambda).abs() <= 1e-12 * d.max(1.0));

            let back = ModelParams::from_abc(p, d, m.a(), m.b(), m.c()).unwrap();
            prop_assert!((back.lambda() - lambda).abs() <= 1e-10 * d.max(1.0));
            prop_assert!((back.epsilon() - m.epsilon()).abs() <= 1e-10);

            let r = m.transition_matrix();
            for row in r.rows {
                prop_assert!((row[0] + row[1] - 1.0).abs() <= 1e-12);
            }
            let [l1, l2] = r.eigenvalues();
            prop_assert!((l1 - 1.0).abs() <= 1e-10);
            prop_assert!((l2 - (1.0 - m.b())).abs() <= 1e-10);
        }

        #[test]
        fn poisson_tv_symmetric(m1 in 0.01f64..50.0, m2 in 0.01f64..50.0) {
            let a = poisson_tv(m1, m2);
            let b = poisson_tv(m2, m1);
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
