use std::collections::BTreeSet;

use super::bnb::{BnbConfig, BnbOutcome, BoxCheck};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::poly::{CompiledPoly, Enclosure, Interval, Polynomial};
use crate::system::Subsystem;

/// One-step drift inequality E ≤ max{κ̂B, ρ̂·max_j w_j², c} with the input fixed
/// (or already closed through a controller), over states × relevant internal inputs.
pub(crate) struct Drift {
    e: CompiledPoly,
    e_enc: Enclosure,
    b: CompiledPoly,
    d_kappa: Enclosure,
    d_rho: Vec<Enclosure>,
    w_idx: Vec<usize>,
    kappa: f64,
    rho: f64,
    c: f64,
    /// max_j min_{W_j} w_j² over internal inputs that E does not depend on.
    w_floor: f64,
    eps: f64,
}

impl Drift {
    pub(crate) fn new(e: &Polynomial, barrier: &Polynomial, vars: &[String], w_vars: &[String], gains: (f64, f64, f64), w_floor: f64, eps: f64) -> Result<Self> {
        let (kappa, rho, c) = gains;
        let w_idx = w_vars.iter().map(|w| vars.iter().position(|v| v == w).unwrap()).collect();
        let d_rho = w_vars
            .iter()
            .map(|w| Enclosure::new(&e.sub(&Polynomial::var(w).pow(2).scale(rho)), vars))
            .collect::<Result<Vec<_>>>()?;
        Ok(Drift {
            e: CompiledPoly::new(e, vars)?,
            e_enc: Enclosure::new(e, vars)?,
            b: CompiledPoly::new(barrier, vars)?,
            d_kappa: Enclosure::new(&e.sub(&barrier.scale(kappa)), vars)?,
            d_rho,
            w_idx,
            kappa,
            rho,
            c,
            w_floor,
            eps,
        })
    }

    pub(crate) fn holds_on(&self, b: &[Interval]) -> bool {
        if self.d_kappa.bound(b).hi <= self.eps {
            return true;
        }
        let e = self.e_enc.bound(b);
        if e.hi <= self.c + self.eps {
            return true;
        }
        if self.rho > 0.0 {
            let mut wmin = self.w_floor;
            for &k in &self.w_idx {
                wmin = wmin.max(b[k].powi(2).lo);
            }
            if e.hi <= self.rho * wmin + self.eps {
                return true;
            }
            if self.d_rho.iter().any(|d| d.bound(b).hi <= self.eps) {
                return true;
            }
        }
        false
    }

    pub(crate) fn violation(&self, x: &[f64]) -> f64 {
        let e = self.e.eval(x);
        let mut w2 = self.w_floor;
        for &k in &self.w_idx {
            w2 = w2.max(x[k] * x[k]);
        }
        e - (self.kappa * self.b.eval(x)).max(self.rho * w2).max(self.c)
    }

    /// Left and right sides at a point (for reporting).
    pub(crate) fn sides(&self, x: &[f64]) -> (f64, f64) {
        let e = self.e.eval(x);
        (e, e - self.violation(x))
    }
}

impl BoxCheck for Drift {
    fn prove(&self, b: &[Interval]) -> Option<usize> {
        self.holds_on(b).then_some(0)
    }
    fn violation(&self, x: &[f64]) -> f64 {
        Drift::violation(self, x)
    }
}

/// Drift over x for a finite input set: some input must work for all w.
pub(crate) struct FiniteDrift {
    drifts: Vec<Drift>,
    w_root: Vec<Interval>,
    w_grid: Vec<Vec<f64>>,
    /// Fixed input per state cell (verification of a stored table).
    selector: Option<Vec<(Vec<Interval>, usize)>>,
    inner: BnbConfig,
}

fn w_grid(root: &[Interval]) -> Vec<Vec<f64>> {
    let mid: Vec<f64> = root.iter().map(Interval::mid).collect();
    let mut pts = vec![mid.clone()];
    if root.len() <= 6 {
        for mask in 0..(1usize << root.len()) {
            pts.push(root.iter().enumerate().map(|(k, iv)| if mask >> k & 1 == 1 { iv.hi } else { iv.lo }).collect());
        }
    } else {
        for k in 0..root.len() {
            for end in [root[k].lo, root[k].hi] {
                let mut p = mid.clone();
                p[k] = end;
                pts.push(p);
            }
        }
    }
    pts
}

impl FiniteDrift {
    fn cell_input(&self, b: &[Interval]) -> Option<Option<usize>> {
        let sel = self.selector.as_ref()?;
        Some(
            sel.iter()
                .find(|(cell, _)| cell.iter().zip(b).all(|(c, x)| c.contains_interval(x)))
                .map(|(_, u)| *u),
        )
    }

    fn point_input(&self, x: &[f64]) -> Option<Option<usize>> {
        let sel = self.selector.as_ref()?;
        Some(sel.iter().find(|(cell, _)| cell.iter().zip(x).all(|(c, v)| c.contains(*v))).map(|(_, u)| *u))
    }

    fn prove_with(&self, u: usize, b: &[Interval]) -> bool {
        let d = &self.drifts[u];
        let mut root = b.to_vec();
        root.extend_from_slice(&self.w_root);
        if d.holds_on(&root) {
            return true;
        }
        if self.w_root.is_empty() {
            return false;
        }
        let mask: Vec<bool> = (0..root.len()).map(|k| k >= b.len()).collect();
        matches!(self.inner.run(d, root, Some(&mask), false).outcome, BnbOutcome::Verified)
    }

    fn worst_over_w(&self, u: usize, x: &[f64]) -> f64 {
        let mut p = x.to_vec();
        let n = x.len();
        p.extend_from_slice(&self.w_grid[0]);
        let mut worst = f64::NEG_INFINITY;
        for w in &self.w_grid {
            p[n..].copy_from_slice(w);
            worst = worst.max(self.drifts[u].violation(&p));
        }
        worst
    }
}

impl BoxCheck for FiniteDrift {
    fn prove(&self, b: &[Interval]) -> Option<usize> {
        match self.cell_input(b) {
            Some(Some(u)) => self.prove_with(u, b).then_some(u),
            Some(None) => None,
            None => (0..self.drifts.len()).find(|&u| self.prove_with(u, b)),
        }
    }

    fn violation(&self, x: &[f64]) -> f64 {
        match self.point_input(x) {
            Some(Some(u)) => self.worst_over_w(u, x),
            Some(None) => f64::INFINITY,
            None => (0..self.drifts.len()).map(|u| self.worst_over_w(u, x)).fold(f64::INFINITY, f64::min),
        }
    }
}

pub(crate) enum Kind {
    AtLeast { f: Enclosure, bound: f64 },
    AtMost { f: Enclosure, bound: f64 },
    Drift(Box<Drift>),
    FiniteDrift(Box<FiniteDrift>),
}

/// A single verification obligation over a box domain.
pub struct Check {
    pub condition: String,
    pub part: String,
    pub vars: Vec<String>,
    pub root: Vec<Interval>,
    pub(crate) epsilon: f64,
    pub(crate) kind: Kind,
}

impl Check {
    pub(crate) fn at_least(condition: &str, part: String, f: &Polynomial, bound: f64, vars: Vec<String>, root: Vec<Interval>, eps: f64) -> Result<Check> {
        let f = Enclosure::new(f, &vars)?;
        Ok(Check { condition: condition.into(), part, vars, root, epsilon: eps, kind: Kind::AtLeast { f, bound } })
    }

    pub(crate) fn at_most(condition: &str, part: String, f: &Polynomial, bound: f64, vars: Vec<String>, root: Vec<Interval>, eps: f64) -> Result<Check> {
        let f = Enclosure::new(f, &vars)?;
        Ok(Check { condition: condition.into(), part, vars, root, epsilon: eps, kind: Kind::AtMost { f, bound } })
    }

    pub fn is_finite_input(&self) -> bool {
        matches!(self.kind, Kind::FiniteDrift(_))
    }

    /// Left/right sides of a drift inequality at a point (None for other checks).
    pub fn drift_sides(&self, x: &[f64]) -> Option<(f64, f64)> {
        match &self.kind {
            Kind::Drift(d) => Some(d.sides(x)),
            _ => None,
        }
    }
}

impl BoxCheck for Check {
    fn prove(&self, b: &[Interval]) -> Option<usize> {
        match &self.kind {
            Kind::AtLeast { f, bound } => (f.bound(b).lo >= bound - self.epsilon).then_some(0),
            Kind::AtMost { f, bound } => (f.bound(b).hi <= bound + self.epsilon).then_some(0),
            Kind::Drift(d) => d.prove(b),
            Kind::FiniteDrift(d) => d.prove(b),
        }
    }

    fn violation(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::AtLeast { f, bound } => bound - f.eval(x),
            Kind::AtMost { f, bound } => f.eval(x) - bound,
            Kind::Drift(d) => d.violation(x),
            Kind::FiniteDrift(d) => d.violation(x),
        }
    }
}

/// Domain layout for the drift condition of one subsystem.
pub(crate) struct DriftDomain {
    pub vars: Vec<String>,
    pub root: Vec<Interval>,
    pub w_vars: Vec<String>,
    pub w_floor: f64,
}

/// States, then internal inputs and coupling variables that `exprs` depend on.
pub(crate) fn drift_domain(sub: &Subsystem, exprs: &[&Polynomial]) -> Result<DriftDomain> {
    let used: BTreeSet<String> = exprs.iter().flat_map(|e| e.variables()).collect();
    let mut vars = sub.state_vars();
    let mut root: Vec<Interval> = sub.states.intervals().to_vec();
    let mut w_vars = Vec::new();
    let mut w_floor: f64 = 0.0;
    for (name, iv) in sub.internal.names().iter().zip(sub.internal.intervals()) {
        if used.contains(name) {
            vars.push(name.clone());
            root.push(*iv);
            w_vars.push(name.clone());
        } else {
            w_floor = w_floor.max(iv.powi(2).lo);
        }
    }
    let cb = sub.coupling_box();
    for (name, iv) in cb.names().iter().zip(cb.intervals()) {
        if used.contains(name) {
            vars.push(name.clone());
            root.push(*iv);
        }
    }
    if let Some(v) = used.iter().find(|v| !vars.contains(v)) {
        return Err(Error::MissingVariable(format!("{v} (not a state, internal input or coupling variable)")));
    }
    Ok(DriftDomain { vars, root, w_vars, w_floor })
}

pub(crate) fn drift_check(e: &Polynomial, barrier: &Polynomial, sub: &Subsystem, gains: (f64, f64, f64), eps: f64) -> Result<Check> {
    let dom = drift_domain(sub, &[e, barrier])?;
    let d = Drift::new(e, barrier, &dom.vars, &dom.w_vars, gains, dom.w_floor, eps)?;
    Ok(Check {
        condition: "8".into(),
        part: "closed loop".into(),
        vars: dom.vars,
        root: dom.root,
        epsilon: eps,
        kind: Kind::Drift(Box::new(d)),
    })
}

/// Drift over a finite input set. `es[k]` is the expected barrier under input k.
pub(crate) fn finite_drift_check(
    es: &[Polynomial],
    barrier: &Polynomial,
    sub: &Subsystem,
    gains: (f64, f64, f64),
    eps: f64,
    selector: Option<Vec<(Vec<Interval>, usize)>>,
    part: String,
) -> Result<Check> {
    let mut exprs: Vec<&Polynomial> = es.iter().collect();
    exprs.push(barrier);
    let dom = drift_domain(sub, &exprs)?;
    let drifts = es
        .iter()
        .map(|e| Drift::new(e, barrier, &dom.vars, &dom.w_vars, gains, dom.w_floor, eps))
        .collect::<Result<Vec<_>>>()?;
    let n = sub.states.dim();
    let w_root = dom.root[n..].to_vec();
    let inner = BnbConfig { budget: 512, batch: 64, exec: Exec::Sequential, epsilon: eps, ..Default::default() };
    let fd = FiniteDrift { drifts, w_grid: w_grid(&w_root), w_root, selector, inner };
    Ok(Check {
        condition: "8".into(),
        part,
        vars: dom.vars[..n].to_vec(),
        root: dom.root[..n].to_vec(),
        epsilon: eps,
        kind: Kind::FiniteDrift(Box::new(fd)),
    })
}
