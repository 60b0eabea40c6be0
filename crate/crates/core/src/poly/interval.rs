use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Closed interval with outward-rounded arithmetic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

fn down(x: f64) -> f64 {
    (x - x.abs() * 2.0 * f64::EPSILON).next_down()
}

fn up(x: f64) -> f64 {
    (x + x.abs() * 2.0 * f64::EPSILON).next_up()
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, o: &Interval) -> bool {
        self.lo <= o.lo && o.hi <= self.hi
    }

    pub fn intersect(&self, o: &Interval) -> Option<Interval> {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn add(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo + o.lo), hi: up(self.hi + o.hi) }
    }

    pub fn sub(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo - o.hi), hi: up(self.hi - o.lo) }
    }

    pub fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }

    pub fn scale(self, r: f64) -> Interval {
        let (a, b) = (self.lo * r, self.hi * r);
        Interval { lo: down(a.min(b)), hi: up(a.max(b)) }
    }

    pub fn mul(self, o: Interval) -> Interval {
        if self.lo == self.hi && o.lo == o.hi {
            let v = self.lo * o.lo;
            return Interval { lo: down(v), hi: up(v) };
        }
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: down(lo), hi: up(hi) }
    }

    /// Integer power; even powers of intervals straddling zero start at 0.
    pub fn powi(self, e: u32) -> Interval {
        match e {
            0 => Interval::point(1.0),
            1 => self,
            _ => {
                let a = self.lo.powi(e as i32);
                let b = self.hi.powi(e as i32);
                let slack = |x: f64| x.abs() * e as f64 * f64::EPSILON;
                let (lo, hi) = if e % 2 == 1 || self.lo >= 0.0 {
                    (a, b)
                } else if self.hi <= 0.0 {
                    (b, a)
                } else {
                    (0.0, a.max(b))
                };
                let lo = if lo == 0.0 { 0.0 } else { down(lo - slack(lo)) };
                let lo = if e % 2 == 0 { lo.max(0.0) } else { lo };
                Interval { lo, hi: up(hi + slack(hi)) }
            }
        }
    }

    pub fn max(self, o: Interval) -> Interval {
        Interval { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.names.iter().zip(&self.dims).map(|(n, d)| format!("{n} in {d}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.lo, self.hi].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [lo, hi] = <[f64; 2]>::deserialize(d)?;
        if !(lo <= hi) {
            return Err(serde::de::Error::custom(format!("empty interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }
}

/// Hyperrectangle over named variables; dimension order is the insertion order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct IntervalBox {
    names: Vec<String>,
    dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new<S: Into<String>>(dims: impl IntoIterator<Item = (S, f64, f64)>) -> Self {
        let mut b = IntervalBox::default();
        for (n, lo, hi) in dims {
            b.push(n, Interval::new(lo, hi));
        }
        b
    }

    pub fn from_intervals(names: Vec<String>, dims: Vec<Interval>) -> Self {
        assert_eq!(names.len(), dims.len());
        IntervalBox { names, dims }
    }

    pub fn push(&mut self, name: impl Into<String>, iv: Interval) {
        let name = name.into();
        if let Some(k) = self.names.iter().position(|n| *n == name) {
            self.dims[k] = iv;
        } else {
            self.names.push(name);
            self.dims.push(iv);
        }
    }

    pub fn get(&self, name: &str) -> Option<Interval> {
        self.names.iter().position(|n| n == name).map(|k| self.dims[k])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::mid).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|(iv, v)| iv.contains(*v))
    }

    /// Restriction to the given variables, in the given order.
    pub fn project(&self, vars: &[String]) -> Option<IntervalBox> {
        let mut out = IntervalBox::default();
        for v in vars {
            out.push(v.clone(), self.get(v)?);
        }
        Some(out)
    }

    pub fn rename(&self, f: impl Fn(&str) -> String) -> IntervalBox {
        IntervalBox {
            names: self.names.iter().map(|n| f(n)).collect(),
            dims: self.dims.clone(),
        }
    }

    /// Same variables with interiors overlapping (touching faces do not count).
    pub fn interiors_overlap(&self, o: &IntervalBox) -> bool {
        self.names.iter().zip(&self.dims).all(|(n, a)| match o.get(n) {
            Some(b) => a.lo.max(b.lo) < a.hi.min(b.hi) || (a.width() == 0.0 && b.contains(a.lo)),
            None => true,
        })
    }

    pub fn contains_box(&self, o: &IntervalBox) -> bool {
        self.names
            .iter()
            .zip(&self.dims)
            .all(|(n, a)| o.get(n).is_some_and(|b| a.contains_interval(&b)))
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().map(Interval::width).product()
    }

    /// All 2^d vertices (d ≤ 16 expected).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dims.len();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| if mask >> k & 1 == 1 { self.dims[k].hi } else { self.dims[k].lo })
                    .collect()
            })
            .collect()
    }
}

/// True when `target` lies inside the union of `cover` (all with the same variables).
pub fn covered_by_union(target: &IntervalBox, cover: &[IntervalBox]) -> bool {
    fn go(t: Vec<Interval>, names: &[String], cover: &[Vec<Interval>], depth: usize) -> bool {
        if depth > 64 {
            return false;
        }
        let inside = |c: &Vec<Interval>| c.iter().zip(&t).all(|(a, b)| a.contains_interval(b));
        if cover.iter().any(inside) {
            return true;
        }
        // Split along the first face of an overlapping cover box that cuts t.
        for c in cover {
            let overlaps = c.iter().zip(&t).all(|(a, b)| a.lo <= b.hi && b.lo <= a.hi);
            if !overlaps {
                continue;
            }
            for k in 0..t.len() {
                for cut in [c[k].lo, c[k].hi] {
                    if t[k].lo < cut && cut < t[k].hi {
                        let mut l = t.clone();
                        let mut r = t.clone();
                        l[k].hi = cut;
                        r[k].lo = cut;
                        return go(l, names, cover, depth + 1) && go(r, names, cover, depth + 1);
                    }
                }
            }
        }
        false
    }
    let names = target.names().to_vec();
    let mut cov = Vec::new();
    for c in cover {
        match c.project(&names) {
            Some(p) => cov.push(p.intervals().to_vec()),
            None => return false,
        }
    }
    go(target.intervals().to_vec(), &names, &cov, 0)
}

impl Serialize for IntervalBox {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.dims.len()))?;
        for (n, iv) in self.names.iter().zip(&self.dims) {
            m.serialize_entry(n, iv)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for IntervalBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = IntervalBox;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a map from variable name to [lo, hi]")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut a: A) -> Result<IntervalBox, A::Error> {
                let mut b = IntervalBox::default();
                while let Some((k, v)) = a.next_entry::<String, Interval>()? {
                    b.push(k, v);
                }
                Ok(b)
            }
        }
        d.deserialize_map(V)
    }
}
