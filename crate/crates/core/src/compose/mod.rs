//! Max-type small-gain composition of sub-barrier certificates.

mod karp;

use serde::{Deserialize, Serialize};

pub use karp::{min_mean_cycle, MeanCycle};

use crate::certify::CsbcRecord;
use crate::error::{Error, Result};
use crate::poly::CompiledPoly;
use crate::system::{Interconnection, Quantifier};

/// Sparse gain matrix a_ij: diagonal κ̂_i, off-diagonal ρ̂_i/α̂_j on wired pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainMatrix {
    pub n: usize,
    pub diag: Vec<f64>,
    /// (i, j, a_ij) for i ≠ j, sorted.
    pub off: Vec<(usize, usize, f64)>,
}

impl GainMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.off
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
            .map(|k| self.off[k].2)
            .unwrap_or(0.0)
    }

    /// All positive entries as (i, j, a_ij), diagonal included.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut e: Vec<(usize, usize, f64)> =
            self.diag.iter().enumerate().filter(|(_, a)| **a > 0.0).map(|(i, a)| (i, i, *a)).collect();
        e.extend(self.off.iter().filter(|t| t.2 > 0.0).copied());
        e.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        e
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut off = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, a) in r.iter().enumerate() {
                if i != j && *a > 0.0 {
                    off.push((i, j, *a));
                }
            }
        }
        GainMatrix { n, diag: (0..n).map(|i| rows[i][i]).collect(), off }
    }

    pub fn max_entry(&self) -> f64 {
        self.edges().iter().map(|e| e.2).fold(0.0, f64::max)
    }
}

/// Build the gain matrix of a network whose member i carries certificate `certs[member_cert[i]]`.
pub fn gain_matrix(net: &Interconnection, certs: &[CsbcRecord], member_cert: &[usize]) -> Result<GainMatrix> {
    if member_cert.len() != net.len() {
        return Err(Error::Composition(format!("{} certificate assignments for {} members", member_cert.len(), net.len())));
    }
    let rec = |i: usize| &certs[member_cert[i]];
    let mut off = Vec::new();
    for (i, j) in net.wired_pairs() {
        if i == j {
            continue;
        }
        let alpha = rec(j).alpha.0;
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha of member {j} must be positive for the gain ratio")));
        }
        off.push((i, j, rec(i).rho.0 / alpha));
    }
    off.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok(GainMatrix { n: net.len(), diag: (0..net.len()).map(|i| rec(i).kappa.0).collect(), off })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SmallGain {
    /// Every cycle product is below one; `max_cycle_gain` is the largest cycle geometric mean.
    Holds { max_cycle_gain: f64 },
    Violated { cycle: Vec<usize>, product: f64 },
}

impl SmallGain {
    pub fn holds(&self) -> bool {
        matches!(self, SmallGain::Holds { .. })
    }
}

/// Every directed cycle of positive gains must have product < 1, i.e. the minimum
/// mean cycle of −ln a_ij must be positive.
pub fn small_gain_check(g: &GainMatrix) -> SmallGain {
    let edges: Vec<(usize, usize, f64)> = g.edges().into_iter().map(|(i, j, a)| (i, j, -a.ln())).collect();
    match min_mean_cycle(g.n, &edges) {
        None => SmallGain::Holds { max_cycle_gain: 0.0 },
        Some(mc) if mc.mean > 0.0 => SmallGain::Holds { max_cycle_gain: (-mc.mean).exp() },
        Some(mc) => {
            let k = mc.cycle.len();
            let product = (0..k).map(|t| g.get(mc.cycle[t], mc.cycle[(t + 1) % k])).product();
            SmallGain::Violated { cycle: mc.cycle, product }
        }
    }
}

/// Scaling weights λ with a_ij λ_j / λ_i < 1 on every positive entry.
pub fn solve_scaling(g: &GainMatrix) -> Result<Vec<f64>> {
    if g.max_entry() < 1.0 {
        return Ok(vec![1.0; g.n]);
    }
    let edges = g.edges();
    let logs: Vec<(usize, usize, f64)> = edges.iter().map(|&(i, j, a)| (i, j, -a.ln())).collect();
    let mc = match min_mean_cycle(g.n, &logs) {
        Some(mc) if mc.mean <= 0.0 => {
            return Err(Error::Composition(format!("small-gain condition fails on cycle {:?}", mc.cycle)));
        }
        Some(mc) => mc.mean,
        None => 1.0,
    };
    // Longest-path potentials p_i ≥ p_j + ln a_ij + δ, δ = μ*/2 keeps every cycle negative.
    let delta = mc / 2.0;
    let mut p = vec![0.0f64; g.n];
    for _ in 0..=g.n {
        let mut changed = false;
        for &(i, j, a) in &edges {
            let cand = p[j] + a.ln() + delta;
            if cand > p[i] + 1e-15 {
                p[i] = cand;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda: Vec<f64> = p.iter().map(|v| (v - lo).exp()).collect();
    let worst = composite_kappa(g, &lambda);
    if worst >= 1.0 {
        return Err(Error::Composition(format!("scaling search ended with max a_ij λ_j/λ_i = {worst}")));
    }
    Ok(lambda)
}

/// max over positive entries (diagonal included) of a_ij λ_j / λ_i.
pub fn composite_kappa(g: &GainMatrix, lambda: &[f64]) -> f64 {
    g.edges().iter().map(|&(i, j, a)| a * lambda[j] / lambda[i]).fold(0.0, f64::max)
}

/// Control barrier certificate of the interconnection, B(x) = max_i B_i(x_i)/λ_i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbcRecord {
    pub name: String,
    /// Distinct member certificates.
    pub certs: Vec<CsbcRecord>,
    pub members: Vec<String>,
    /// Index into `certs` per member.
    pub member_cert: Vec<usize>,
    pub lambda: Vec<f64>,
    pub eta: f64,
    pub beta: f64,
    pub c: f64,
    pub kappa: f64,
    #[serde(default)]
    pub unsafe_quantifier: Quantifier,
    /// Composite κ̂ as printed in the source case study, kept for comparison only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference_kappa: Option<f64>,
}

impl CbcRecord {
    pub fn cert(&self, i: usize) -> &CsbcRecord {
        &self.certs[self.member_cert[i]]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Compiled evaluator of B over the global state vector.
    pub fn evaluator(&self, net: &Interconnection) -> Result<CompositeBarrier> {
        let per_cert = self
            .certs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let i = self.member_cert.iter().position(|m| *m == k);
                match i {
                    Some(i) => CompiledPoly::new(&c.barrier, &net.model(i).state_vars()).map(Some),
                    None => Ok(None),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompositeBarrier {
            per_cert: per_cert.into_iter().map(|p| p.unwrap_or_else(|| CompiledPoly::new(&crate::poly::Polynomial::zero(), &[]).unwrap())).collect(),
            member_cert: self.member_cert.clone(),
            lambda: self.lambda.clone(),
            offsets: net.offsets(),
        })
    }
}

pub struct CompositeBarrier {
    per_cert: Vec<CompiledPoly>,
    member_cert: Vec<usize>,
    lambda: Vec<f64>,
    offsets: Vec<usize>,
}

impl CompositeBarrier {
    pub fn member(&self, i: usize, xi: &[f64]) -> f64 {
        self.per_cert[self.member_cert[i]].eval(xi) / self.lambda[i]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.member_cert.len())
            .map(|i| self.member(i, &x[self.offsets[i]..self.offsets[i + 1]]))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Composite constants for given scaling weights; rejects β ≤ η and κ̂ ≥ 1.
pub fn compose_cbc(
    name: &str,
    net: &Interconnection,
    certs: Vec<CsbcRecord>,
    member_cert: Vec<usize>,
    lambda: Vec<f64>,
    unsafe_quantifier: Quantifier,
) -> Result<CbcRecord> {
    let g = gain_matrix(net, &certs, &member_cert)?;
    if lambda.len() != net.len() || lambda.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Composition("scaling weights must be positive, one per member".into()));
    }
    let scaled = |f: fn(&CsbcRecord) -> f64| {
        (0..net.len()).map(|i| f(&certs[member_cert[i]]) / lambda[i]).fold(f64::NEG_INFINITY, f64::max)
    };
    let eta = scaled(|r| r.eta);
    let c = scaled(|r| r.c);
    let beta = match unsafe_quantifier {
        Quantifier::All => scaled(|r| r.beta),
        // A state is unsafe as soon as one member is; every member must reach the level.
        Quantifier::Any => {
            (0..net.len()).map(|i| certs[member_cert[i]].beta / lambda[i]).fold(f64::INFINITY, f64::min)
        }
    };
    let kappa = composite_kappa(&g, &lambda);
    if !(beta > eta) {
        return Err(Error::Composition(format!("beta = {beta} does not exceed eta = {eta}")));
    }
    if !(kappa < 1.0) {
        return Err(Error::Composition(format!("composite kappa = {kappa} is not below 1")));
    }
    Ok(CbcRecord {
        name: name.into(),
        certs,
        members: net.members.iter().map(|m| m.id.clone()).collect(),
        member_cert,
        lambda,
        eta,
        beta,
        c,
        kappa,
        unsafe_quantifier,
        reference_kappa: None,
    })
}

/// Gain matrix, small-gain verdict, scaling and composite certificate in one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub small_gain: SmallGain,
    pub max_gain: f64,
    pub record: CbcRecord,
}

pub fn compose(
    name: &str,
    net: &Interconnection,
    certs: Vec<CsbcRecord>,
    member_cert: Vec<usize>,
    unsafe_quantifier: Quantifier,
) -> Result<Composition> {
    let g = gain_matrix(net, &certs, &member_cert)?;
    let small_gain = small_gain_check(&g);
    if let SmallGain::Violated { cycle, product } = &small_gain {
        return Err(Error::Composition(format!("small-gain condition violated on cycle {cycle:?} (product {product})")));
    }
    let lambda = solve_scaling(&g)?;
    let record = compose_cbc(name, net, certs, member_cert, lambda, unsafe_quantifier)?;
    Ok(Composition { small_gain, max_gain: g.max_entry(), record })
}
