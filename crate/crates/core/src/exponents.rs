//! Lebesgue/Sobolev exponent calculus and the integrability hypotheses of the
//! renormalization and vacuum theorems.
//!
//! Exponents live in `[1, ∞]`. Infinity is a variant of [`Exponent`], not a
//! float sentinel, and every comparison is carried out on exact rationals so
//! that boundary cases such as `γ = 6/5, q = 2, d = 3` land exactly on the
//! equality they are supposed to satisfy.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("exponent {0} lies outside [1, ∞]")]
    OutOfRange(String),
    #[error("cannot parse exponent from {0:?}")]
    Parse(String),
    #[error("spatial dimension must be at least 2, got {0}")]
    Dimension(u32),
    #[error("γ must exceed 1, got {0}")]
    GammaTooSmall(Exponent),
    #[error("substitute exponent for {0} must be finite")]
    InfiniteSubstitute(&'static str),
    #[error("substitute for {0} is only allowed when the paired exponent is ∞ and the free branch applies")]
    SubstituteNotAllowed(&'static str),
}

/// An integrability exponent in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exponent {
    Finite(Rational),
    Infinite,
}

impl Exponent {
    pub const INF: Exponent = Exponent::Infinite;
    pub const ONE: Exponent = Exponent::Finite(Ratio::new_raw(1, 1));

    pub fn new(value: Rational) -> Result<Self, ExponentError> {
        if value < Rational::one() {
            return Err(ExponentError::OutOfRange(value.to_string()));
        }
        Ok(Exponent::Finite(value))
    }

    pub fn int(n: i64) -> Self {
        Self::new(Rational::from_integer(n)).expect("integer exponent must be >= 1")
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::new(Rational::new(num, den)).expect("rational exponent must be >= 1")
    }

    /// Best rational approximation of a float; `f64::INFINITY` maps to ∞.
    pub fn from_f64(value: f64) -> Result<Self, ExponentError> {
        if value == f64::INFINITY {
            return Ok(Exponent::Infinite);
        }
        let r = Rational::approximate_float(value).ok_or_else(|| ExponentError::Parse(value.to_string()))?;
        Self::new(r)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// `1/q`, with `1/∞ = 0`.
    pub fn recip(&self) -> Rational {
        match self {
            Exponent::Finite(v) => v.recip(),
            Exponent::Infinite => Rational::zero(),
        }
    }

    /// Inverse of [`Exponent::recip`]; `0 ↦ ∞`.
    pub fn from_recip(r: Rational) -> Result<Self, ExponentError> {
        if r.is_zero() {
            Ok(Exponent::Infinite)
        } else if r < Rational::zero() || r > Rational::one() {
            Err(ExponentError::OutOfRange(format!("1/({r})")))
        } else {
            Ok(Exponent::Finite(r.recip()))
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Exponent::Finite(v) => *v.numer() as f64 / *v.denom() as f64,
            Exponent::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(v) => write!(f, "{v}"),
            Exponent::Infinite => write!(f, "∞"),
        }
    }
}

impl FromStr for Exponent {
    type Err = ExponentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => return Ok(Exponent::Infinite),
            _ => {}
        }
        if let Some((n, d)) = t.split_once('/') {
            let n: i64 = n.trim().parse().map_err(|_| ExponentError::Parse(s.into()))?;
            let d: i64 = d.trim().parse().map_err(|_| ExponentError::Parse(s.into()))?;
            if d == 0 {
                return Err(ExponentError::Parse(s.into()));
            }
            return Exponent::new(Rational::new(n, d));
        }
        if let Ok(n) = t.parse::<i64>() {
            return Exponent::new(Rational::from_integer(n));
        }
        let v: f64 = t.parse().map_err(|_| ExponentError::Parse(s.into()))?;
        Exponent::from_f64(v)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Exponent::Infinite => serializer.serialize_str("inf"),
            Exponent::Finite(v) => serializer.serialize_str(&v.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Int(n) => Exponent::new(Rational::from_integer(n)),
            Raw::Float(v) => Exponent::from_f64(v),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// Hölder conjugate `q/(q−1)`, with `1 ↦ ∞` and `∞ ↦ 1`.
pub fn holder_conjugate(q: Exponent) -> Exponent {
    Exponent::from_recip(Rational::one() - q.recip()).expect("conjugate of [1,∞] stays in [1,∞]")
}

/// Result of the Sobolev embedding exponent computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SobolevExponent {
    Exact(Exponent),
    /// Critical case `q = d`: every finite exponent is reachable, none is
    /// distinguished. Callers state the finite exponent they need.
    AnyFinite,
}

/// `q_* = dq/(d−q)` for `q < d`, `∞` for `q > d`, [`SobolevExponent::AnyFinite`] for `q = d`.
pub fn sobolev_star(q: Exponent, d: u32) -> SobolevExponent {
    let dd = Rational::from_integer(d as i64);
    match q {
        Exponent::Infinite => SobolevExponent::Exact(Exponent::Infinite),
        Exponent::Finite(v) if v < dd => SobolevExponent::Exact(Exponent::Finite(dd * v / (dd - v))),
        Exponent::Finite(v) if v > dd => SobolevExponent::Exact(Exponent::Infinite),
        Exponent::Finite(_) => SobolevExponent::AnyFinite,
    }
}

/// The exponents framing one theorem application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExponentTuple {
    /// Time exponent of the velocity.
    pub p: Exponent,
    /// Space (Sobolev) exponent of the velocity.
    pub q: Exponent,
    /// Time exponent of the transported scalar.
    pub alpha: Exponent,
    /// Space exponent of the transported scalar.
    pub beta: Exponent,
    /// Weak-continuity exponent of the density.
    pub gamma: Exponent,
    /// Weak-continuity exponent of the companion solution.
    pub gamma_tilde: Exponent,
    pub d: u32,
}

impl ExponentTuple {
    pub fn new(
        p: Exponent,
        q: Exponent,
        alpha: Exponent,
        beta: Exponent,
        gamma: Exponent,
        gamma_tilde: Exponent,
        d: u32,
    ) -> Result<Self, ExponentError> {
        if d < 2 {
            return Err(ExponentError::Dimension(d));
        }
        Ok(Self { p, q, alpha, beta, gamma, gamma_tilde, d })
    }

    /// Tuple with only `(p, q, α, β)` meaningful; `γ = γ̃ = ∞`.
    pub fn velocity_and_solution(
        p: Exponent,
        q: Exponent,
        alpha: Exponent,
        beta: Exponent,
        d: u32,
    ) -> Result<Self, ExponentError> {
        Self::new(p, q, alpha, beta, Exponent::INF, Exponent::INF, d)
    }

    pub fn q_conj(&self) -> Exponent {
        holder_conjugate(self.q)
    }

    pub fn q_star(&self) -> SobolevExponent {
        sobolev_star(self.q, self.d)
    }

    pub fn q_star_conj(&self) -> SobolevExponent {
        match self.q_star() {
            SobolevExponent::Exact(e) => SobolevExponent::Exact(holder_conjugate(e)),
            SobolevExponent::AnyFinite => SobolevExponent::AnyFinite,
        }
    }

    pub fn integrability(&self) -> Integrability {
        Integrability { alpha: self.alpha, beta: self.beta }
    }
}

/// `L^α(I; L^β(Ω))` class of one scalar solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Integrability {
    pub alpha: Exponent,
    pub beta: Exponent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// The violated condition, written as the hypothesis it negates.
    pub condition: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Admissible,
    Rejected(Violation),
}

impl Verdict {
    pub fn is_admissible(&self) -> bool {
        matches!(self, Verdict::Admissible)
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            Verdict::Admissible => None,
            Verdict::Rejected(v) => Some(v),
        }
    }

    fn reject(condition: &'static str, detail: String) -> Self {
        Verdict::Rejected(Violation { condition, detail })
    }
}

pub const COND_Q_BETA: &str = "(q,β) ≠ (1,∞)";
pub const COND_BETA_Q: &str = "1/β + 1/q ≤ 1";
pub const COND_ALPHA_P: &str = "1/α + 1/p ≤ 1";
pub const COND_GAMMA: &str = "1/γ + 1/q ≤ 1 + 1/d";
pub const COND_Q_BETA_RHO: &str = "(q,β_ρ) ≠ (1,∞)";
pub const COND_Q_BETA_S: &str = "(q,β_s) ≠ (1,∞)";
pub const COND_TIME_SUM: &str = "1/α_ρ + 1/α_s + 1/p ≤ 1";
pub const COND_SPACE_SUM: &str = "1/r_ρ + 1/r_s + 1/q ≤ 1";
pub const COND_T_SUM: &str = "1/t_ρ + 1/t_s + 1/p ≤ 1";

/// The DiPerna–Lions setting: `(q,β) ≠ (1,∞)`, `1/β + 1/q ≤ 1`, `1/α + 1/p ≤ 1`.
/// The first violated condition is reported.
pub fn check_diperna_lions(e: &ExponentTuple) -> Verdict {
    if e.q == Exponent::ONE && e.beta.is_infinite() {
        return Verdict::reject(COND_Q_BETA, "q = 1 and β = ∞".into());
    }
    let space = e.beta.recip() + e.q.recip();
    if space > Rational::one() {
        return Verdict::reject(COND_BETA_Q, format!("1/{} + 1/{} = {}", e.beta, e.q, space));
    }
    let time = e.alpha.recip() + e.p.recip();
    if time > Rational::one() {
        return Verdict::reject(COND_ALPHA_P, format!("1/{} + 1/{} = {}", e.alpha, e.p, time));
    }
    Verdict::Admissible
}

/// `1 < γ ≤ ∞` and `1/γ + 1/q ≤ 1 + 1/d`.
pub fn check_gamma_condition(gamma: Exponent, q: Exponent, d: u32) -> Result<Verdict, ExponentError> {
    if d < 2 {
        return Err(ExponentError::Dimension(d));
    }
    if gamma == Exponent::ONE {
        return Err(ExponentError::GammaTooSmall(gamma));
    }
    let lhs = gamma.recip() + q.recip();
    let rhs = Rational::one() + Rational::new(1, d as i64);
    if lhs <= rhs {
        Ok(Verdict::Admissible)
    } else {
        Ok(Verdict::reject(COND_GAMMA, format!("1/{gamma} + 1/{q} = {lhs} > {rhs}")))
    }
}

/// Optional explicit choices for the free exponents of the product theorem.
/// `None` means "any admissible finite value may be chosen".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProductSubstitutes {
    pub r_rho: Option<Exponent>,
    pub r_s: Option<Exponent>,
    pub t_rho: Option<Exponent>,
    pub t_s: Option<Exponent>,
}

/// Contribution of one exponent to a reciprocal sum: either a fixed
/// reciprocal, or a free finite exponent whose reciprocal can be taken
/// arbitrarily small but positive.
enum Term {
    Fixed(Rational),
    Free,
}

fn substitute_term(
    name: &'static str,
    base: Exponent,
    free_branch: bool,
    chosen: Option<Exponent>,
) -> Result<Term, ExponentError> {
    match (free_branch, chosen) {
        (true, None) => Ok(Term::Free),
        (true, Some(Exponent::Infinite)) => Err(ExponentError::InfiniteSubstitute(name)),
        (true, Some(e)) => Ok(Term::Fixed(e.recip())),
        (false, None) => Ok(Term::Fixed(base.recip())),
        (false, Some(e)) if e == base => Ok(Term::Fixed(base.recip())),
        (false, Some(_)) => Err(ExponentError::SubstituteNotAllowed(name)),
    }
}

/// `fixed + Σ free ≤ 1` is satisfiable iff `fixed ≤ 1` with no free terms,
/// or `fixed < 1` when some reciprocal may be chosen positive but small.
fn sum_satisfiable(terms: &[Term], extra: Rational) -> (bool, Rational) {
    let mut fixed = extra;
    let mut free = 0;
    for t in terms {
        match t {
            Term::Fixed(r) => fixed += *r,
            Term::Free => free += 1,
        }
    }
    let ok = if free == 0 { fixed <= Rational::one() } else { fixed < Rational::one() };
    (ok, fixed)
}

/// Exponent hypotheses of the product theorem (`ρ·s` solves the continuity
/// equation), with the free substitutes chosen optimally.
pub fn check_product_theorem(rho: Integrability, s: Integrability, p: Exponent, q: Exponent) -> Verdict {
    check_product_theorem_with(rho, s, p, q, ProductSubstitutes::default())
        .expect("default substitutes are always allowed")
}

/// As [`check_product_theorem`] with caller-stated finite substitutes.
pub fn check_product_theorem_with(
    rho: Integrability,
    s: Integrability,
    p: Exponent,
    q: Exponent,
    subs: ProductSubstitutes,
) -> Result<Verdict, ExponentError> {
    if q == Exponent::ONE && rho.beta.is_infinite() {
        return Ok(Verdict::reject(COND_Q_BETA_RHO, "q = 1 and β_ρ = ∞".into()));
    }
    if q == Exponent::ONE && s.beta.is_infinite() {
        return Ok(Verdict::reject(COND_Q_BETA_S, "q = 1 and β_s = ∞".into()));
    }
    let one = Exponent::ONE;
    let time = rho.alpha.recip() + s.alpha.recip() + p.recip();
    if time > Rational::one() {
        return Ok(Verdict::reject(COND_TIME_SUM, format!("1/{} + 1/{} + 1/{} = {}", rho.alpha, s.alpha, p, time)));
    }

    let q_gt_one = q != one;
    let r_rho = substitute_term("r_ρ", rho.beta, q_gt_one && rho.beta.is_infinite(), subs.r_rho)?;
    let r_s = substitute_term("r_s", s.beta, q_gt_one && s.beta.is_infinite(), subs.r_s)?;
    let (ok, fixed) = sum_satisfiable(&[r_rho, r_s], q.recip());
    if !ok {
        return Ok(Verdict::reject(COND_SPACE_SUM, format!("fixed part of the sum = {fixed}")));
    }

    let p_gt_one = p != one;
    let t_rho = substitute_term("t_ρ", rho.alpha, p_gt_one && rho.alpha.is_infinite(), subs.t_rho)?;
    let t_s = substitute_term("t_s", s.alpha, p_gt_one && s.alpha.is_infinite(), subs.t_s)?;
    let (ok, fixed) = sum_satisfiable(&[t_rho, t_s], p.recip());
    if !ok {
        return Ok(Verdict::reject(COND_T_SUM, format!("fixed part of the sum = {fixed}")));
    }
    Ok(Verdict::Admissible)
}

/// Declared upper growth of a nonnegative function of `z → ∞`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Growth {
    /// Bounded above.
    Bounded,
    /// `≤ c(1 + z^θ)`.
    Power(Rational),
}

/// Growth metadata carried by a renormalizing function `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GrowthProfile {
    /// Growth of `b(z)`.
    pub value: Growth,
    /// Growth of the positive part of `z b'(z) − b(z)`.
    pub defect: Growth,
    /// `b'` has compact support in `[0, ∞)`.
    pub compact_derivative: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RenormClass {
    /// `b ∈ C¹`, `b' ∈ C_c([0,∞))`.
    Ren,
    /// `b(z) ≤ c(1+z^{γ/q_*'})` and `z b'(z) − b(z) ≤ c(1+z^{γ/q'})`.
    T13,
    /// `b(z) ≤ c(1+z^{γ/q'})`.
    T13Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bound {
    AtMost(Rational),
    Below(Rational),
    Unlimited,
}

impl Bound {
    fn admits(self, g: Growth) -> bool {
        let theta = match g {
            Growth::Bounded => return true,
            Growth::Power(t) => t,
        };
        match self {
            Bound::AtMost(b) => theta <= b,
            Bound::Below(b) => theta < b,
            Bound::Unlimited => true,
        }
    }
}

/// `γ·(1/e')` written as `γ/e'`; `∞·0` is read as 0.
fn gamma_over(gamma: Exponent, conj_recip: Rational) -> Bound {
    match gamma {
        Exponent::Infinite if conj_recip.is_zero() => Bound::AtMost(Rational::zero()),
        Exponent::Infinite => Bound::Unlimited,
        Exponent::Finite(g) => Bound::AtMost(g * conj_recip),
    }
}

/// The renormalizer classes whose growth restrictions the declared growth satisfies.
pub fn classify_renorm_growth(b: &GrowthProfile, e: &ExponentTuple) -> BTreeSet<RenormClass> {
    let mut out = BTreeSet::new();
    if b.compact_derivative {
        out.insert(RenormClass::Ren);
    }
    let q_conj_bound = gamma_over(e.gamma, e.q_conj().recip());
    let q_star_conj_bound = match e.q_star_conj() {
        SobolevExponent::Exact(c) => gamma_over(e.gamma, c.recip()),
        // q_* may be any finite value, so q_*' can be pushed towards 1 but never reach it.
        SobolevExponent::AnyFinite => match e.gamma {
            Exponent::Infinite => Bound::Unlimited,
            Exponent::Finite(g) => Bound::Below(g),
        },
    };
    if q_star_conj_bound.admits(b.value) && q_conj_bound.admits(b.defect) {
        out.insert(RenormClass::T13);
    }
    if q_conj_bound.admits(b.value) {
        out.insert(RenormClass::T13Plus);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn conjugates() {
        assert_eq!(holder_conjugate(Exponent::int(2)), Exponent::int(2));
        assert_eq!(holder_conjugate(Exponent::ONE), Exponent::INF);
        assert_eq!(holder_conjugate(Exponent::INF), Exponent::ONE);
        assert_eq!(holder_conjugate(Exponent::int(3)), Exponent::ratio(3, 2));
    }

    #[test]
    fn sobolev_exponents() {
        assert_eq!(sobolev_star(Exponent::int(2), 3), SobolevExponent::Exact(Exponent::int(6)));
        assert_eq!(sobolev_star(Exponent::int(4), 3), SobolevExponent::Exact(Exponent::INF));
        assert_eq!(sobolev_star(Exponent::int(2), 2), SobolevExponent::AnyFinite);
        assert_eq!(sobolev_star(Exponent::INF, 2), SobolevExponent::Exact(Exponent::INF));
        assert_eq!(sobolev_star(Exponent::ONE, 3), SobolevExponent::Exact(Exponent::ratio(3, 2)));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("6/5".parse::<Exponent>().unwrap(), Exponent::ratio(6, 5));
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::INF);
        assert_eq!("1.5".parse::<Exponent>().unwrap(), Exponent::ratio(3, 2));
        assert!("0.5".parse::<Exponent>().is_err());
        assert!("x".parse::<Exponent>().is_err());
        assert_eq!(Exponent::ratio(6, 5).to_string(), "6/5");
        assert_eq!(Exponent::INF.to_string(), "∞");
    }

    fn dl(p: Exponent, q: Exponent, a: Exponent, b: Exponent) -> Verdict {
        check_diperna_lions(&ExponentTuple::velocity_and_solution(p, q, a, b, 3).unwrap())
    }

    #[test]
    fn diperna_lions_cases() {
        let two = Exponent::int(2);
        let three = Exponent::int(3);
        assert!(dl(two, two, two, two).is_admissible());
        let v = dl(two, Exponent::ONE, two, Exponent::INF);
        assert_eq!(v.violation().unwrap().condition, COND_Q_BETA);
        assert!(dl(two, three, two, two).is_admissible());
        assert!(dl(two, two, three, two).is_admissible());
        let v = dl(two, two, Exponent::ONE, two);
        assert_eq!(v.violation().unwrap().condition, COND_ALPHA_P);
        let v = dl(two, Exponent::ratio(3, 2), two, two);
        assert_eq!(v.violation().unwrap().condition, COND_BETA_Q);
    }

    #[test]
    fn gamma_condition() {
        let v = check_gamma_condition(Exponent::ratio(6, 5), Exponent::int(2), 3).unwrap();
        assert!(v.is_admissible());
        // exactly on the boundary: 5/6 + 1/2 = 4/3
        assert_eq!(r(5, 6) + r(1, 2), Rational::one() + r(1, 3));
        assert!(!check_gamma_condition(Exponent::ratio(59, 50), Exponent::int(2), 3).unwrap().is_admissible());
        assert!(check_gamma_condition(Exponent::INF, Exponent::ONE, 2).unwrap().is_admissible());
        assert!(check_gamma_condition(Exponent::ratio(101, 100), Exponent::int(10), 3).unwrap().is_admissible());
        let v = check_gamma_condition(Exponent::ratio(101, 100), Exponent::ONE, 3).unwrap();
        assert_eq!(v.violation().unwrap().condition, COND_GAMMA);
        assert!(matches!(
            check_gamma_condition(Exponent::ONE, Exponent::int(2), 3),
            Err(ExponentError::GammaTooSmall(_))
        ));
    }

    #[test]
    fn product_theorem_examples() {
        let inf = Integrability { alpha: Exponent::INF, beta: Exponent::INF };
        assert!(check_product_theorem(inf, inf, Exponent::ONE, Exponent::INF).is_admissible());
        let three = Integrability { alpha: Exponent::int(3), beta: Exponent::int(3) };
        assert!(check_product_theorem(three, three, Exponent::int(3), Exponent::int(3)).is_admissible());
        let two = Integrability { alpha: Exponent::int(2), beta: Exponent::int(2) };
        let v = check_product_theorem(two, two, Exponent::int(2), Exponent::int(2));
        assert_eq!(v.violation().unwrap().condition, COND_TIME_SUM);
    }

    #[test]
    fn product_substitutes() {
        let rho = Integrability { alpha: Exponent::INF, beta: Exponent::INF };
        let s = Integrability { alpha: Exponent::INF, beta: Exponent::int(2) };
        // q = 2: fixed part 1/2 + 1/2 = 1 leaves no room for a positive 1/r_ρ
        let v = check_product_theorem(rho, s, Exponent::int(2), Exponent::int(2));
        assert_eq!(v.violation().unwrap().condition, COND_SPACE_SUM);
        // q = 4: 1/r_ρ ≤ 1/4 is available
        let subs = ProductSubstitutes { r_rho: Some(Exponent::int(4)), ..Default::default() };
        assert!(check_product_theorem_with(rho, s, Exponent::int(2), Exponent::int(4), subs).unwrap().is_admissible());
        let subs = ProductSubstitutes { r_rho: Some(Exponent::int(3)), ..Default::default() };
        assert!(!check_product_theorem_with(rho, s, Exponent::int(2), Exponent::int(4), subs).unwrap().is_admissible());
        let subs = ProductSubstitutes { r_rho: Some(Exponent::INF), ..Default::default() };
        assert!(check_product_theorem_with(rho, s, Exponent::int(2), Exponent::int(4), subs).is_err());
        let subs = ProductSubstitutes { r_s: Some(Exponent::int(7)), ..Default::default() };
        assert!(matches!(
            check_product_theorem_with(rho, s, Exponent::int(2), Exponent::int(4), subs),
            Err(ExponentError::SubstituteNotAllowed(_))
        ));
    }

    fn tuple(q: Exponent, gamma: Exponent, d: u32) -> ExponentTuple {
        ExponentTuple::new(Exponent::INF, q, Exponent::INF, Exponent::INF, gamma, Exponent::INF, d).unwrap()
    }

    #[test]
    fn renorm_classes() {
        let e = tuple(Exponent::int(2), Exponent::int(2), 3);
        let trunc = GrowthProfile { value: Growth::Bounded, defect: Growth::Bounded, compact_derivative: true };
        assert_eq!(
            classify_renorm_growth(&trunc, &e),
            [RenormClass::Ren, RenormClass::T13, RenormClass::T13Plus].into_iter().collect()
        );
        // γ/q' = 2/2 = 1; z^1 has defect ≡ 0
        let lin = GrowthProfile { value: Growth::Power(r(1, 1)), defect: Growth::Bounded, compact_derivative: false };
        assert_eq!(classify_renorm_growth(&lin, &e), [RenormClass::T13, RenormClass::T13Plus].into_iter().collect());
        let sq =
            GrowthProfile { value: Growth::Power(r(2, 1)), defect: Growth::Power(r(2, 1)), compact_derivative: false };
        assert!(classify_renorm_growth(&sq, &e).is_empty());
        // θ = γ/q' with θ > 1: γ = 3, q = 2 → θ = 3/2
        let e3 = tuple(Exponent::int(2), Exponent::int(3), 3);
        let pw =
            GrowthProfile { value: Growth::Power(r(3, 2)), defect: Growth::Power(r(3, 2)), compact_derivative: false };
        assert_eq!(classify_renorm_growth(&pw, &e3), [RenormClass::T13, RenormClass::T13Plus].into_iter().collect());
        let pw2 =
            GrowthProfile { value: Growth::Power(r(8, 5)), defect: Growth::Power(r(8, 5)), compact_derivative: false };
        // γ/q_*' = 3·(1 − 1/2 + 1/3) = 5/2 admits value, but γ/q' = 3/2 rejects 8/5
        assert!(classify_renorm_growth(&pw2, &e3).is_empty());
    }

    #[test]
    fn renorm_critical_sobolev_is_strict() {
        let e = tuple(Exponent::int(2), Exponent::int(2), 2);
        let at_gamma =
            GrowthProfile { value: Growth::Power(r(2, 1)), defect: Growth::Bounded, compact_derivative: false };
        assert!(!classify_renorm_growth(&at_gamma, &e).contains(&RenormClass::T13));
        let below =
            GrowthProfile { value: Growth::Power(r(19, 10)), defect: Growth::Bounded, compact_derivative: false };
        assert!(classify_renorm_growth(&below, &e).contains(&RenormClass::T13));
    }

    fn exponent_strategy() -> impl Strategy<Value = Exponent> {
        prop_oneof![
            Just(Exponent::INF),
            (1i64..40, 1i64..20).prop_filter_map("≥ 1", |(n, d)| Exponent::new(Rational::new(n, d)).ok()),
        ]
    }

    proptest! {
        #[test]
        fn conjugate_is_involution(q in exponent_strategy()) {
            prop_assert_eq!(holder_conjugate(holder_conjugate(q)), q);
        }

        #[test]
        fn diperna_lions_monotone(
            p in exponent_strategy(), q in exponent_strategy(),
            a in exponent_strategy(), b in exponent_strategy(),
            bump in 1i64..5,
        ) {
            let base = dl(p, q, a, b);
            prop_assert_eq!(base.clone(), dl(p, q, a, b));
            if base.is_admissible() {
                // enlarging an exponent shrinks its reciprocal
                let grow = |e: Exponent| match e {
                    Exponent::Infinite => Exponent::Infinite,
                    Exponent::Finite(v) => Exponent::Finite(v + Rational::from_integer(bump)),
                };
                prop_assert!(dl(grow(p), q, a, b).is_admissible());
                prop_assert!(dl(p, q, grow(a), b).is_admissible());
                prop_assert!(dl(p, q, a, grow(b)).is_admissible());
                prop_assert!(dl(p, grow(q), a, b).is_admissible());
            }
        }
    }
}
