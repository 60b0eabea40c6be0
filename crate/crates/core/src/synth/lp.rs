use microlp::{ComparisonOp, OptimizationDirection, Problem as Lp};
use serde::{Deserialize, Serialize};

use super::problem::{Coefficients, Problem};
use crate::error::{Error, Result};

/// Scenario samples per condition; drift samples are (x, w, φ).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    pub init: Vec<Vec<f64>>,
    pub unsafe_set: Vec<Vec<f64>>,
    pub state: Vec<Vec<f64>>,
    pub drift: Vec<Vec<f64>>,
}

impl Samples {
    pub fn counts(&self) -> [usize; 4] {
        [self.init.len(), self.unsafe_set.len(), self.state.len(), self.drift.len()]
    }
}

/// Fixed quantities of one LP solve.
#[derive(Clone, Debug)]
pub struct LpSettings {
    pub kappa_bar: f64,
    /// ρ̄ ≤ ratio · α keeps the converted gain ratio ρ̂/α̂ below its target.
    pub ratio: f64,
    /// Objective weight of c̄ (η has weight 1).
    pub c_weight: f64,
    /// Unsafe samples must reach 1 + slack.
    pub slack: f64,
    pub eta_max: f64,
    /// Absolute tightening of (5), (6) and the drift rows, covering gaps between samples.
    pub margin: f64,
}

const COEF_BOUND: f64 = 1e6;
const ALPHA_MIN: f64 = 1e-12;
/// Samples enforce B ≥ 2αh² so the returned α holds with room between samples.
const ALPHA_MARGIN: f64 = 2.0;

/// Solve the scenario LP for barrier coefficients and constants with β = 1.
/// `inputs[k]` is the input applied at drift sample k. Returns None when infeasible.
pub fn candidate(p: &Problem, samples: &Samples, inputs: &[Vec<f64>], s: &LpSettings) -> Result<Option<Coefficients>> {
    if samples.init.is_empty() || samples.unsafe_set.is_empty() {
        return Err(Error::Synthesis("need at least one sample in X_0 and in X_u".into()));
    }
    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let b: Vec<_> = p.basis.iter().map(|_| lp.add_var(0.0, (-COEF_BOUND, COEF_BOUND))).collect();
    let eta = lp.add_var(1.0, (0.0, s.eta_max.min(1.0 - 1e-9)));
    let c_bar = lp.add_var(s.c_weight, (0.0, COEF_BOUND));
    let alpha = lp.add_var(0.0, (ALPHA_MIN, COEF_BOUND));
    let rho = lp.add_var(0.0, (0.0, COEF_BOUND));
    let row = |feats: &[f64]| b.iter().copied().zip(feats.iter().copied()).collect::<Vec<_>>();
    for x in &samples.init {
        let mut r = row(&p.features(x));
        r.push((eta, -1.0));
        lp.add_constraint(r.as_slice(), ComparisonOp::Le, -s.margin);
    }
    for x in &samples.unsafe_set {
        lp.add_constraint(row(&p.features(x)).as_slice(), ComparisonOp::Ge, 1.0 + s.slack);
    }
    for x in &samples.state {
        let f = p.features(x);
        for h in &p.outputs {
            let mut r = row(&f);
            r.push((alpha, -ALPHA_MARGIN * h.eval(&x[..p.n_states]).powi(2)));
            lp.add_constraint(r.as_slice(), ComparisonOp::Ge, s.margin);
        }
    }
    for (x, u) in samples.drift.iter().zip(inputs) {
        let e = p.drift_features(x, u);
        let f = p.features(x);
        let feats: Vec<f64> = e.iter().zip(&f).map(|(e, f)| e - s.kappa_bar * f).collect();
        let mut r = row(&feats);
        r.push((rho, -p.w_sq_max(x)));
        r.push((c_bar, -1.0));
        lp.add_constraint(r.as_slice(), ComparisonOp::Le, -s.margin);
    }
    lp.add_constraint(&[(rho, 1.0), (alpha, -s.ratio)], ComparisonOp::Le, 0.0);
    let sol = match lp.solve() {
        Ok(out) => match out.solution() {
            Some(sol) => sol.clone(),
            None => return Ok(None),
        },
        Err(microlp::Error::Infeasible) => return Ok(None),
        Err(e) => return Err(Error::Synthesis(format!("LP solver: {e}"))),
    };
    Ok(Some(Coefficients {
        b: b.iter().map(|v| sol.var_value(*v)).collect(),
        eta: sol.var_value(eta).max(0.0),
        c_bar: sol.var_value(c_bar).max(0.0),
        alpha: sol.var_value(alpha).max(ALPHA_MIN),
        rho_bar: sol.var_value(rho).max(0.0),
    }))
}
