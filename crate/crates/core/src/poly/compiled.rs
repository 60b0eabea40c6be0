use super::{Interval, Polynomial};
use crate::error::{Error, Result};

/// Polynomial with variables resolved to positions in a fixed ordering,
/// for hot loops (sampling, branch-and-bound, simulation).
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u32)>)>,
    nvars: usize,
}

impl CompiledPoly {
    pub fn new(p: &Polynomial, vars: &[String]) -> Result<Self> {
        let mut terms = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            let mut f = Vec::with_capacity(m.factors().len());
            for (v, e) in m.factors() {
                let k = vars
                    .iter()
                    .position(|n| n == v)
                    .ok_or_else(|| Error::MissingVariable(v.clone()))?;
                f.push((k, *e));
            }
            terms.push((c, f));
        }
        Ok(CompiledPoly { terms, nvars: vars.len() })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut sum = 0.0;
        for (c, f) in &self.terms {
            let mut t = *c;
            for &(k, e) in f {
                t *= match e {
                    1 => x[k],
                    2 => x[k] * x[k],
                    _ => x[k].powi(e as i32),
                };
            }
            sum += t;
        }
        sum
    }

    pub fn bound(&self, b: &[Interval]) -> Interval {
        let mut acc = Interval::point(0.0);
        for (c, f) in &self.terms {
            let mut t = Interval::point(*c);
            for &(k, e) in f {
                t = t.mul(b[k].powi(e));
            }
            acc = acc.add(t);
        }
        acc
    }

    fn derivative(&self, var: usize) -> CompiledPoly {
        let mut terms = Vec::new();
        for (c, f) in &self.terms {
            if let Some(pos) = f.iter().position(|&(k, _)| k == var) {
                let e = f[pos].1;
                let mut g = f.clone();
                if e == 1 {
                    g.remove(pos);
                } else {
                    g[pos].1 = e - 1;
                }
                terms.push((c * e as f64, g));
            }
        }
        CompiledPoly { terms, nvars: self.nvars }
    }
}

/// Natural interval extension intersected with the mean-value form.
#[derive(Clone, Debug)]
pub struct Enclosure {
    f: CompiledPoly,
    grad: Vec<CompiledPoly>,
}

impl Enclosure {
    pub fn new(p: &Polynomial, vars: &[String]) -> Result<Self> {
        let f = CompiledPoly::new(p, vars)?;
        let grad = (0..vars.len()).map(|k| f.derivative(k)).collect();
        Ok(Enclosure { f, grad })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.f.eval(x)
    }

    pub fn bound(&self, b: &[Interval]) -> Interval {
        let naive = self.f.bound(b);
        let mid: Vec<f64> = b.iter().map(Interval::mid).collect();
        let fm = self.f.eval(&mid);
        let mut mv = Interval::new(fm, fm);
        // Rounding of the point evaluation is absorbed by a small relative pad.
        let pad = fm.abs() * 8.0 * f64::EPSILON * (1 + self.f.terms.len()) as f64;
        mv = Interval::new(mv.lo - pad, mv.hi + pad);
        for (k, g) in self.grad.iter().enumerate() {
            if g.terms.is_empty() || b[k].width() == 0.0 {
                continue;
            }
            let dk = Interval::new(b[k].lo - mid[k], b[k].hi - mid[k]);
            mv = mv.add(g.bound(b).mul(dk));
        }
        naive.intersect(&mv).unwrap_or(naive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::poly;

    #[test]
    fn compiled_matches_symbolic() {
        let p = poly("3 * x^2 * y - 2 * y^3 + x + 0.5");
        let vars = vec!["x".to_string(), "y".to_string()];
        let c = CompiledPoly::new(&p, &vars).unwrap();
        let want = p.eval_pairs(&[("x", 1.3), ("y", -0.7)]).unwrap();
        assert!((c.eval(&[1.3, -0.7]) - want).abs() < 1e-14);
    }

    #[test]
    fn mean_value_tightens_dependency() {
        let p = poly("x^2 - 2 * x");
        let vars = vec!["x".to_string()];
        let e = Enclosure::new(&p, &vars).unwrap();
        let b = [Interval::new(0.9, 1.1)];
        let naive = CompiledPoly::new(&p, &vars).unwrap().bound(&b);
        let tight = e.bound(&b);
        assert!(tight.width() < naive.width());
        assert!(tight.lo <= -1.0 && tight.hi >= -0.99);
    }

    #[test]
    fn unknown_variable_rejected() {
        assert!(CompiledPoly::new(&poly("z"), &["x".to_string()]).is_err());
    }
}
