use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::poly::{CompiledPoly, IntervalBox, Monomial, Polynomial};
use crate::system::{InputSet, Subsystem};

/// All monomials in `vars` of total degree ≤ d, constant first, graded order.
pub fn monomial_basis(vars: &[String], d: u32) -> Vec<Monomial> {
    fn go(vars: &[String], left: u32, acc: &mut Vec<(String, u32)>, out: &mut Vec<Monomial>) {
        let Some((v, rest)) = vars.split_first() else {
            out.push(Monomial::from_pairs(acc.iter().cloned()));
            return;
        };
        for e in 0..=left {
            if e > 0 {
                acc.push((v.clone(), e));
            }
            go(rest, left - e, acc, out);
            if e > 0 {
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(vars, d, &mut Vec::new(), &mut out);
    out.sort();
    out.dedup();
    out
}

/// Affine map between physical coordinates and z ∈ [-1, 1]^n.
#[derive(Clone, Debug)]
pub struct Normalizer {
    pub vars: Vec<String>,
    pub center: Vec<f64>,
    pub half: Vec<f64>,
}

impl Normalizer {
    pub fn new(b: &IntervalBox) -> Self {
        Normalizer {
            vars: b.names().to_vec(),
            center: b.intervals().iter().map(|i| i.mid()).collect(),
            half: b.intervals().iter().map(|i| (i.width() / 2.0).max(f64::MIN_POSITIVE)).collect(),
        }
    }

    pub fn z(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).zip(&self.half).map(|((v, c), h)| (v - c) / h).collect()
    }

    /// z_i as a polynomial in `exprs[i]` (physical).
    fn z_of(&self, exprs: &[Polynomial]) -> BTreeMap<String, Polynomial> {
        self.vars
            .iter()
            .zip(exprs)
            .zip(self.center.iter().zip(&self.half))
            .map(|((v, e), (c, h))| (v.clone(), e.sub(&Polynomial::constant(*c)).scale(1.0 / h)))
            .collect()
    }

    /// Rewrite a polynomial in z over physical variables.
    pub fn to_physical(&self, p: &Polynomial) -> Polynomial {
        let xs: Vec<Polynomial> = self.vars.iter().map(|v| Polynomial::var(v)).collect();
        p.substitute(&self.z_of(&xs))
    }
}

pub fn eval_monomial(m: &Monomial, vars: &[String], z: &[f64]) -> f64 {
    m.factors()
        .iter()
        .map(|(v, e)| z[vars.iter().position(|n| n == v).expect("basis variable")].powi(*e as i32))
        .product()
}

/// Precomputed LP data for one subsystem and template.
pub struct Problem {
    pub norm: Normalizer,
    pub basis: Vec<Monomial>,
    pub ctrl_basis: Vec<Monomial>,
    /// Drift sample layout: states, internal inputs, coupling variables.
    pub sample_box: IntervalBox,
    pub n_states: usize,
    pub n_internal: usize,
    pub inputs: InputSet,
    /// E[m_k(z(f))] over states ++ inputs ++ internal ++ couplings.
    pub e_basis: Vec<CompiledPoly>,
    pub outputs: Vec<CompiledPoly>,
}

impl Problem {
    pub fn new(sub: &Subsystem, barrier_degree: u32, controller_degree: u32) -> Result<Self> {
        let states = sub.state_vars();
        if states.len() != sub.dynamics.len() {
            return Err(Error::Model(format!("subsystem `{}` has mismatched dynamics", sub.name)));
        }
        let norm = Normalizer::new(&sub.states);
        let basis = monomial_basis(&states, barrier_degree);
        let ctrl_basis = match sub.inputs {
            InputSet::Box { .. } if !sub.input_vars().is_empty() => monomial_basis(&states, controller_degree),
            _ => Vec::new(),
        };
        let mut sample_box = sub.states.clone();
        for (n, iv) in sub.internal.names().iter().zip(sub.internal.intervals()) {
            sample_box.push(n.clone(), *iv);
        }
        let cb = sub.coupling_box();
        for (n, iv) in cb.names().iter().zip(cb.intervals()) {
            sample_box.push(n.clone(), *iv);
        }
        let mut all = states.clone();
        all.extend(sub.input_vars());
        all.extend(sub.internal_vars());
        all.extend(sub.coupling_vars());
        let zf = norm.z_of(&sub.dynamics);
        let e_basis = basis
            .iter()
            .map(|m| {
                let p = Polynomial::monomial(1.0, m.clone()).substitute(&zf).expectation(&sub.noise)?;
                CompiledPoly::new(&p, &all)
            })
            .collect::<Result<Vec<_>>>()?;
        let outputs =
            sub.output_coordinates().iter().map(|h| CompiledPoly::new(h, &states)).collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            norm,
            basis,
            ctrl_basis,
            sample_box,
            n_states: states.len(),
            n_internal: sub.internal.dim(),
            inputs: sub.inputs.clone(),
            e_basis,
            outputs,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.vars().len()
    }

    /// m_k(z(x)) for every basis monomial.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let z = self.norm.z(&x[..self.n_states]);
        self.basis.iter().map(|m| eval_monomial(m, &self.norm.vars, &z)).collect()
    }

    pub fn barrier(&self, b: &[f64], x: &[f64]) -> f64 {
        self.features(x).iter().zip(b).map(|(f, c)| f * c).sum()
    }

    /// E[m_k(z(f(x,u,w)))] at a drift sample s = (x, w, φ).
    pub fn drift_features(&self, s: &[f64], u: &[f64]) -> Vec<f64> {
        let mut full = Vec::with_capacity(s.len() + u.len());
        full.extend_from_slice(&s[..self.n_states]);
        full.extend_from_slice(u);
        full.extend_from_slice(&s[self.n_states..]);
        self.e_basis.iter().map(|p| p.eval(&full)).collect()
    }

    pub fn w_sq_max(&self, s: &[f64]) -> f64 {
        s[self.n_states..self.n_states + self.n_internal].iter().map(|w| w * w).fold(0.0, f64::max)
    }

    /// Additive drift residual E[B(f)] − κ̄B − ρ̄‖w‖∞² − c̄ at (s, u).
    pub fn drift_residual(&self, coef: &Coefficients, kappa_bar: f64, s: &[f64], u: &[f64]) -> f64 {
        let e: f64 = self.drift_features(s, u).iter().zip(&coef.b).map(|(f, c)| f * c).sum();
        e - kappa_bar * self.barrier(&coef.b, s) - coef.rho_bar * self.w_sq_max(s) - coef.c_bar
    }

    /// Controller value for coefficient matrix `a` (row per input).
    pub fn controller(&self, a: &[f64], x: &[f64]) -> Vec<f64> {
        let z = self.norm.z(&x[..self.n_states]);
        let feats: Vec<f64> = self.ctrl_basis.iter().map(|m| eval_monomial(m, &self.norm.vars, &z)).collect();
        a.chunks(feats.len().max(1)).map(|row| row.iter().zip(&feats).map(|(c, f)| c * f).sum()).collect()
    }

    pub fn controller_polys(&self, a: &[f64]) -> Vec<Polynomial> {
        let n = self.ctrl_basis.len().max(1);
        a.chunks(n)
            .map(|row| {
                let z = Polynomial::from_terms(self.ctrl_basis.iter().cloned().zip(row.iter().copied()));
                self.norm.to_physical(&z)
            })
            .collect()
    }

    pub fn barrier_poly(&self, b: &[f64]) -> Polynomial {
        self.norm.to_physical(&Polynomial::from_terms(self.basis.iter().cloned().zip(b.iter().copied())))
    }
}

/// LP unknowns of one candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    pub b: Vec<f64>,
    pub eta: f64,
    pub c_bar: f64,
    pub alpha: f64,
    pub rho_bar: f64,
}
