//! Sparse multivariate polynomials over named variables.
//!
//! Terms are kept in graded lexicographic order (ascending in the map,
//! printed descending), so two equal polynomials always serialize to the
//! same string.

mod compiled;
mod interval;
mod noise;
mod parse;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use compiled::{CompiledPoly, Enclosure};
pub use interval::{covered_by_union, Interval, IntervalBox};
pub use noise::NoiseModel;

/// Slack used for every certified inequality.
pub const EPS_NUM: f64 = 1e-9;

/// Product of variables with positive exponents, sorted by variable name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial(vec![(name.to_string(), 1)])
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, u32)>) -> Self {
        let mut map: BTreeMap<String, u32> = BTreeMap::new();
        for (v, e) in pairs {
            *map.entry(v.into()).or_insert(0) += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn factors(&self) -> &[(String, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, var: &str) -> u32 {
        self.0
            .iter()
            .find(|(v, _)| v == var)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then the exponent of the
    /// alphabetically first variable where the two differ.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, (v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, " * ")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, Monomial::one())
    }

    pub fn var(name: &str) -> Self {
        Self::monomial(1.0, Monomial::var(name))
    }

    pub fn monomial(coef: f64, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if coef != 0.0 {
            terms.insert(m, coef);
        }
        Polynomial { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Polynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if *v == 0.0 {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    /// Terms in ascending graded lexicographic order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&Monomial::one())
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, var: &str) -> u32 {
        self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(v, _)| v.clone()))
            .collect()
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, r: f64) -> Polynomial {
        if r == 0.0 {
            return Polynomial::zero();
        }
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c * r)))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(1.0);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                out = out.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// Evaluate with a lookup function; missing variables are reported by name.
    pub fn eval_with(&self, lookup: impl Fn(&str) -> Option<f64>) -> Result<f64> {
        let mut sum = 0.0;
        for (m, c) in &self.terms {
            let mut t = *c;
            for (v, e) in &m.0 {
                let x = lookup(v).ok_or_else(|| Error::MissingVariable(v.clone()))?;
                t *= x.powi(*e as i32);
            }
            sum += t;
        }
        Ok(sum)
    }

    pub fn eval(&self, point: &HashMap<String, f64>) -> Result<f64> {
        self.eval_with(|v| point.get(v).copied())
    }

    pub fn eval_pairs(&self, point: &[(&str, f64)]) -> Result<f64> {
        self.eval_with(|v| point.iter().find(|(n, _)| *n == v).map(|(_, x)| *x))
    }

    /// Polynomial composition; variables without an entry pass through.
    pub fn substitute(&self, subst: &BTreeMap<String, Polynomial>) -> Polynomial {
        let mut powers: HashMap<(String, u32), Polynomial> = HashMap::new();
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut kept = Vec::new();
            let mut term = Polynomial::constant(*c);
            for (v, e) in &m.0 {
                match subst.get(v) {
                    Some(q) => {
                        let key = (v.clone(), *e);
                        let pw = powers.entry(key).or_insert_with(|| q.pow(*e));
                        term = term.mul(pw);
                    }
                    None => kept.push((v.clone(), *e)),
                }
            }
            if !kept.is_empty() {
                term = term.mul(&Polynomial::monomial(1.0, Monomial(kept)));
            }
            for (tm, tc) in term.terms {
                out.add_term(tm, tc);
            }
        }
        out
    }

    /// Replace every occurrence of noise variables by their raw moments.
    pub fn expectation(&self, noise: &BTreeMap<String, NoiseModel>) -> Result<Polynomial> {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut coef = *c;
            let mut kept = Vec::new();
            for (v, e) in &m.0 {
                match noise.get(v) {
                    Some(model) => coef *= model.moment(*e)?,
                    None => kept.push((v.clone(), *e)),
                }
            }
            out.add_term(Monomial(kept), coef);
        }
        Ok(out)
    }

    /// Monomial-wise interval enclosure with the even-power rule.
    pub fn interval_bound(&self, domain: &IntervalBox) -> Result<Interval> {
        let mut acc = Interval::point(0.0);
        for (m, c) in &self.terms {
            let mut t = Interval::point(*c);
            for (v, e) in &m.0 {
                let iv = domain
                    .get(v)
                    .ok_or_else(|| Error::MissingVariable(v.clone()))?;
                t = t.mul(iv.powi(*e));
            }
            acc = acc.add(t);
        }
        Ok(acc)
    }

    pub fn derivative(&self, var: &str) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(var);
            if e == 0 {
                continue;
            }
            let rest = Monomial::from_pairs(
                m.0.iter()
                    .map(|(v, k)| (v.clone(), if v == var { k - 1 } else { *k })),
            );
            out.add_term(rest, c * e as f64);
        }
        out
    }

    pub fn rename(&self, f: impl Fn(&str) -> String) -> Polynomial {
        Polynomial::from_terms(
            self.terms
                .iter()
                .map(|(m, c)| (Monomial::from_pairs(m.0.iter().map(|(v, e)| (f(v), *e))), *c)),
        )
    }

    /// Largest absolute difference of coefficients against `other`.
    pub fn max_coef_diff(&self, other: &Polynomial) -> f64 {
        self.sub(other)
            .terms
            .values()
            .fold(0.0f64, |a, c| a.max(c.abs()))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_sign_negative();
            let a = c.abs();
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if m.is_one() {
                write!(f, "{a}")?;
            } else if a == 1.0 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a} * {m}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse::parse_polynomial(s)
    }
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl std::ops::Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::add(self, rhs)
    }
}

impl std::ops::Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::sub(self, rhs)
    }
}

impl std::ops::Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::mul(self, rhs)
    }
}

/// Parse a polynomial literal; panics on malformed input. Meant for fixtures and tests.
pub fn poly(s: &str) -> Polynomial {
    s.parse()
        .unwrap_or_else(|e| panic!("bad polynomial literal {s:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Polynomial {
        poly(s)
    }

    #[test]
    fn difference_of_squares() {
        assert_eq!(&p("x + 1") * &p("x - 1"), p("x^2 - 1"));
    }

    #[test]
    fn add_zero_is_identity() {
        let a = p("3 * x * y^2 - 2 * z + 7");
        assert_eq!(a.add(&Polynomial::zero()), a);
    }

    #[test]
    fn scale_room_barrier_term() {
        let got = p("0.7659 * T^2").scale(2.0);
        assert!((got.coefficient(&Monomial::from_pairs([("T", 2)])) - 1.5318).abs() < 1e-15);
        assert_eq!(got.num_terms(), 1);
    }

    #[test]
    fn eval_room_barrier() {
        let b = p("0.7659 * T^2 - 30.24 * T + 298.5");
        let hand = 0.7659 * 400.0 - 30.24 * 20.0 + 298.5;
        let got = b.eval_pairs(&[("T", 20.0)]).unwrap();
        assert!((got - hand).abs() < 1e-12);
        assert!((got - 0.06).abs() < 1e-9);
    }

    #[test]
    fn eval_trivial() {
        assert_eq!(p("5").eval_pairs(&[("q", 1.0)]).unwrap(), 5.0);
        assert_eq!(p("x^2 + y^2").eval_pairs(&[("x", 3.0), ("y", 4.0)]).unwrap(), 25.0);
    }

    #[test]
    fn eval_missing_variable_named() {
        let err = p("x + y").eval_pairs(&[("x", 1.0)]).unwrap_err();
        assert!(err.to_string().contains("`y`"));
    }

    #[test]
    fn substitute_binomial_and_noop() {
        let mut s = BTreeMap::new();
        s.insert("x".to_string(), p("a + b"));
        assert_eq!(p("x^2").substitute(&s), p("a^2 + 2 * a * b + b^2"));
        let mut s = BTreeMap::new();
        s.insert("y".to_string(), p("z"));
        assert_eq!(p("x^2").substitute(&s), p("x^2"));
    }

    #[test]
    fn substitute_room_dynamics() {
        let mut s = BTreeMap::new();
        s.insert("T".to_string(), p("0.93 * T + 6.525 + 0.1 * s"));
        let got = p("T^2").substitute(&s);
        // Cross term 2 * 6.525 * 0.1 = 1.305 (hand expansion).
        let want = p("0.8649 * T^2 + 12.1365 * T + 0.186 * T * s + 1.305 * s + 0.01 * s^2 + 42.575625");
        assert!(got.max_coef_diff(&want) < 1e-12, "{got}");
    }

    #[test]
    fn expectation_examples() {
        let mut noise = BTreeMap::new();
        noise.insert("s".to_string(), NoiseModel::gaussian(0.3));
        let e = p("x^2 + 2 * x * s + s^2")
            .expectation(&noise)
            .unwrap();
        assert!(e.max_coef_diff(&p("x^2 + 0.09")) < 1e-15);
        assert!(p("x * s").expectation(&noise).unwrap().is_zero());
        let mut std = BTreeMap::new();
        std.insert("s".to_string(), NoiseModel::gaussian(1.0));
        assert_eq!(p("s^4").expectation(&std).unwrap(), p("3"));
    }

    #[test]
    fn expectation_order_error() {
        let mut noise = BTreeMap::new();
        noise.insert("s".to_string(), NoiseModel::gaussian(1.0).with_max_order(4));
        let err = p("s^6").expectation(&noise).unwrap_err();
        assert!(matches!(err, Error::MomentOrder { required: 6, available: 4 }));
    }

    #[test]
    fn interval_examples() {
        let b = IntervalBox::new([("x", -1.0, 1.0)]);
        let r = p("x^2").interval_bound(&b).unwrap();
        assert!(r.lo <= 0.0 && r.lo > -1e-12 && r.hi >= 1.0 && r.hi < 1.0 + 1e-12);
        let b = IntervalBox::new([("x", 0.0, 1.0)]);
        let r = p("x - x").interval_bound(&b).unwrap();
        assert!(r.contains(0.0));
    }

    #[test]
    fn interval_room_barrier_against_grid() {
        let b = p("0.7659 * T^2 - 30.24 * T + 298.5");
        let dom = IntervalBox::new([("T", 19.5, 20.0)]);
        let enc = b.interval_bound(&dom).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=10_000 {
            let t = 19.5 + 0.5 * k as f64 / 10_000.0;
            let v = b.eval_pairs(&[("T", t)]).unwrap();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(enc.lo <= lo && enc.hi >= hi);
    }

    #[test]
    fn display_round_trip() {
        for s in [
            "0.7659 * T^2 - 30.24 * T + 298.5",
            "-x^3 * y + 1e-7 * z - 12",
            "0",
            "-1",
            "0.001361 * theta^8 - 0.0001877 * theta^7",
        ] {
            let a = p(s);
            let b: Polynomial = a.to_string().parse().unwrap();
            assert_eq!(a, b, "{s}");
            assert_eq!(a.to_string(), b.to_string());
        }
    }

    #[test]
    fn grlex_order() {
        let t = p("y + x + x^2 + x * y + 1");
        let order: Vec<String> = t.terms().map(|(m, _)| m.to_string()).collect();
        assert_eq!(order, ["1", "y", "x", "x * y", "x^2"]);
        assert_eq!(t.to_string(), "x^2 + x * y + x + y + 1");
    }

    #[test]
    fn derivative_matches_hand() {
        let d = p("3 * x^2 * y + 2 * x - y").derivative("x");
        assert_eq!(d, p("6 * x * y + 2"));
    }
}
