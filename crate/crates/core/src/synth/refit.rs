use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;

use super::problem::{Coefficients, Problem};
use crate::poly::{Interval, IntervalBox};

struct DriftCost<'a> {
    p: &'a Problem,
    coef: &'a Coefficients,
    kappa_bar: f64,
    drift: &'a [Vec<f64>],
    ubox: &'a [Interval],
}

impl DriftCost<'_> {
    fn eval(&self, a: &[f64]) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        let mut excess = 0.0;
        for s in self.drift {
            let u = self.p.controller(a, s);
            for (v, iv) in u.iter().zip(self.ubox) {
                excess += ((iv.lo - v).max(v - iv.hi)).max(0.0) / iv.width().max(1e-12);
            }
            worst = worst.max(self.p.drift_residual(self.coef, self.kappa_bar, s, &u));
        }
        worst + 1e3 * excess
    }
}

impl CostFunction for DriftCost<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, a: &Self::Param) -> Result<f64, argmin::core::Error> {
        Ok(self.eval(a))
    }
}

/// Nelder–Mead on the controller coefficients, minimizing the worst additive
/// drift residual over the samples with the barrier fixed. Inputs leaving U are penalized.
pub fn refit_controller(
    p: &Problem,
    coef: &Coefficients,
    kappa_bar: f64,
    drift: &[Vec<f64>],
    a0: &[f64],
    ubox: &IntervalBox,
    iters: u64,
) -> (Vec<f64>, f64) {
    let cost = DriftCost { p, coef, kappa_bar, drift, ubox: ubox.intervals() };
    let start = cost.eval(a0);
    let per_row = p.ctrl_basis.len().max(1);
    let mut simplex = vec![a0.to_vec()];
    for k in 0..a0.len() {
        let mut v = a0.to_vec();
        v[k] += 0.1 * ubox.intervals()[k / per_row].width().max(1e-6);
        simplex.push(v);
    }
    let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-10) {
        Ok(s) => s,
        Err(_) => return (a0.to_vec(), start),
    };
    let res = Executor::new(cost, solver).configure(|st| st.max_iters(iters)).run();
    match res {
        Ok(r) => {
            let st = r.state();
            match (&st.best_param, st.best_cost) {
                (Some(a), c) if c < start => (a.clone(), c),
                _ => (a0.to_vec(), start),
            }
        }
        Err(_) => (a0.to_vec(), start),
    }
}

/// For finite input sets: per drift sample, the input whose worst residual over
/// the internal-input test points at that state is smallest (lowest index on ties).
pub fn choose_inputs(p: &Problem, coef: &Coefficients, kappa_bar: f64, drift: &[Vec<f64>], values: &[Vec<f64>]) -> Vec<usize> {
    let rest = IntervalBox::from_intervals(
        p.sample_box.names()[p.n_states..].to_vec(),
        p.sample_box.intervals()[p.n_states..].to_vec(),
    );
    let mut tests = rest.corners();
    tests.push(rest.center());
    drift
        .iter()
        .map(|s| {
            let x = &s[..p.n_states];
            let score = |u: &Vec<f64>| {
                let own = p.drift_residual(coef, kappa_bar, s, u);
                tests.iter().fold(own, |m, t| {
                    let mut pt = x.to_vec();
                    pt.extend_from_slice(t);
                    m.max(p.drift_residual(coef, kappa_bar, &pt, u))
                })
            };
            let mut best = (0, f64::INFINITY);
            for (k, u) in values.iter().enumerate() {
                let v = score(u);
                if v < best.1 {
                    best = (k, v);
                }
            }
            best.0
        })
        .collect()
}
