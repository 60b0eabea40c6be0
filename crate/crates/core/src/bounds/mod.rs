//! Closed-form probability bounds for reach-avoid elements and specifications.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::automata::{Decomposition, PartitionKey, ReachElement};
use crate::compose::CbcRecord;
use crate::error::{Error, Result};
use crate::poly::{covered_by_union, IntervalBox};
use crate::system::{Interconnection, LabeledRegions, Quantifier};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// Case split on β ≶ c/κ̂ as stated.
    Theorem,
    /// Product formula regardless of the case.
    PaperCompat,
    /// Smaller of the product formula and, when β > c/κ̂, the geometric one.
    #[default]
    Tightest,
}

impl fmt::Display for BoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundMode::Theorem => "theorem",
            BoundMode::PaperCompat => "paper_compat",
            BoundMode::Tightest => "tightest",
        })
    }
}

impl std::str::FromStr for BoundMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem" => Ok(BoundMode::Theorem),
            "paper_compat" => Ok(BoundMode::PaperCompat),
            "tightest" => Ok(BoundMode::Tightest),
            _ => Err(Error::Domain(format!("unknown bound mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Product,
    Geometric,
    Trivial,
}

/// Value of a finite-horizon bound with the formula that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kushner {
    pub value: f64,
    pub formula: Formula,
    pub flags: Vec<String>,
}

fn check_constants(eta: f64, beta: f64, c: f64) -> Result<()> {
    if !(eta >= 0.0 && beta > eta) {
        return Err(Error::Domain(format!("need 0 <= eta < beta, got eta = {eta}, beta = {beta}")));
    }
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("c must be nonnegative, got {c}")));
    }
    Ok(())
}

/// 1 − (1 − η/β)(1 − c/β)^T.
pub fn product_formula(eta: f64, beta: f64, c: f64, t: usize) -> f64 {
    1.0 - (1.0 - eta / beta) * (1.0 - c / beta).powi(t as i32)
}

/// (η/β)(1 − κ̂)^T + (c/(κ̂β))(1 − (1 − κ̂)^T).
pub fn geometric_formula(eta: f64, beta: f64, c: f64, kappa: f64, t: usize) -> f64 {
    let g = (1.0 - kappa).powi(t as i32);
    eta / beta * g + c / (kappa * beta) * (1.0 - g)
}

pub fn kushner(eta: f64, beta: f64, c: f64, kappa: f64, t: usize, mode: BoundMode) -> Result<Kushner> {
    check_constants(eta, beta, c)?;
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    if t < 1 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let geometric_case = beta > c / kappa;
    let prod = product_formula(eta, beta, c, t);
    let (value, formula) = match mode {
        BoundMode::PaperCompat => (prod, Formula::Product),
        BoundMode::Theorem if geometric_case => (geometric_formula(eta, beta, c, kappa, t), Formula::Geometric),
        BoundMode::Theorem => (prod, Formula::Product),
        BoundMode::Tightest => {
            let geo = geometric_case.then(|| geometric_formula(eta, beta, c, kappa, t));
            match geo {
                Some(g) if g < prod => (g, Formula::Geometric),
                _ => (prod, Formula::Product),
            }
        }
    };
    let mut flags = Vec::new();
    if formula == Formula::Geometric {
        if eta > c / kappa {
            flags.push(format!(
                "geometric case with eta = {eta} > c/kappa = {}: the bound decreases as the horizon grows",
                c / kappa
            ));
        }
        if c == 0.0 {
            flags.push(format!(
                "c = 0: the geometric bound tends to 0, below the infinite-horizon bound eta/beta = {}",
                eta / beta
            ));
        }
    }
    Ok(Kushner { value: value.clamp(0.0, 1.0), formula, flags })
}

/// Upper bound on reaching level β within `t` steps, clamped to [0, 1].
pub fn kushner_bound(eta: f64, beta: f64, c: f64, kappa: f64, t: usize, mode: BoundMode) -> Result<f64> {
    Ok(kushner(eta, beta, c, kappa, t, mode)?.value)
}

/// η/β; only valid for certificates with c = 0.
pub fn infinite_horizon_bound(eta: f64, beta: f64, c: f64) -> Result<f64> {
    if c != 0.0 {
        return Err(Error::Domain(format!("infinite-horizon bound needs c = 0, got {c}")));
    }
    check_constants(eta, beta, c)?;
    Ok((eta / beta).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachStatus {
    Certified,
    Trivial,
}

/// κ_{ϑT_h} for one element with every input that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachBound {
    pub element: ReachElement,
    pub value: f64,
    pub status: ReachStatus,
    pub formula: Formula,
    pub mode: BoundMode,
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constants: Option<Constants>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flags: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub eta: f64,
    pub beta: f64,
    pub c: f64,
    pub kappa: f64,
}

fn check_roles(el: &ReachElement, cbc: &CbcRecord, net: &Interconnection, regions: &LabeledRegions) -> Result<()> {
    let mismatch = |msg: String| Err(Error::RegionMismatch(format!("element {el}, certificate `{}`: {msg}", cbc.name)));
    if cbc.member_cert.len() != net.len() {
        return mismatch(format!("{} members certified, network has {}", cbc.member_cert.len(), net.len()));
    }
    for (symbols, initial) in [(&el.init_symbols, true), (&el.unsafe_symbols, false)] {
        for p in symbols {
            let region = regions
                .region(p)
                .ok_or_else(|| Error::RegionMismatch(format!("element {el}: proposition `{p}` has no region")))?;
            match (initial, region.quantifier, cbc.unsafe_quantifier) {
                (true, Quantifier::Any, _) => {
                    return mismatch(format!("initial region `{p}` must be a product set"));
                }
                (false, Quantifier::Any, Quantifier::All) => {
                    return mismatch(format!("unsafe region `{p}` needs every member to reach beta"));
                }
                _ => {}
            }
        }
        // Each distinct (certificate, target boxes) pair is checked once.
        let mut checked: Vec<(usize, Vec<IntervalBox>)> = Vec::new();
        for i in 0..net.len() {
            let targets = regions.member_boxes(symbols, i)?;
            let key = cbc.member_cert[i];
            if checked.iter().any(|(k, t)| *k == key && *t == targets) {
                continue;
            }
            let cert = cbc.cert(i);
            let cover = if initial { &cert.init } else { &cert.unsafe_set };
            for target in &targets {
                if !covered_by_union(target, cover) {
                    let role = if initial { "initial" } else { "unsafe" };
                    return mismatch(format!("{role} box {target} of member {i} is not covered by the certificate"));
                }
            }
            checked.push((key, targets));
        }
    }
    Ok(())
}

/// Bound for one element; a missing certificate yields the trivial bound 1.
pub fn element_bound(
    el: &ReachElement,
    cbc: Option<&CbcRecord>,
    net: &Interconnection,
    regions: &LabeledRegions,
    mode: BoundMode,
) -> Result<ReachBound> {
    let Some(cbc) = cbc else {
        return Ok(ReachBound {
            element: el.clone(),
            value: 1.0,
            status: ReachStatus::Trivial,
            formula: Formula::Trivial,
            mode,
            horizon: el.horizon,
            certificate: None,
            constants: None,
            flags: vec!["no certificate for this element".into()],
        });
    };
    check_roles(el, cbc, net, regions)?;
    let k = kushner(cbc.eta, cbc.beta, cbc.c, cbc.kappa, el.horizon, mode)?;
    Ok(ReachBound {
        element: el.clone(),
        value: k.value,
        status: ReachStatus::Certified,
        formula: k.formula,
        mode,
        horizon: el.horizon,
        certificate: Some(cbc.name.clone()),
        constants: Some(Constants { eta: cbc.eta, beta: cbc.beta, c: cbc.c, kappa: cbc.kappa }),
        flags: k.flags,
    })
}

/// One run of R^p_M with the bounds of its elements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFactors {
    pub run: String,
    pub elements: Vec<String>,
    pub factors: Vec<f64>,
    pub product: f64,
}

impl RunFactors {
    pub fn new(run: String, elements: Vec<String>, factors: Vec<f64>) -> Self {
        let product = factors.iter().product();
        RunFactors { run, elements, factors, product }
    }
}

/// Σ over runs of Π over elements, clamped to [0, 1].
pub fn violation_bound(runs: &[RunFactors]) -> f64 {
    runs.iter().map(|r| r.factors.iter().product::<f64>()).sum::<f64>().clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionBound {
    pub prop: String,
    pub violation: f64,
    pub lower: f64,
    pub runs: Vec<RunFactors>,
}

pub fn satisfaction_lower_bound(prop: &str, runs: Vec<RunFactors>) -> SatisfactionBound {
    let violation = violation_bound(&runs);
    SatisfactionBound { prop: prop.to_string(), violation, lower: 1.0 - violation, runs }
}

/// Per-element and per-initial-proposition bounds of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mode: BoundMode,
    pub horizon: usize,
    pub elements: Vec<ReachBound>,
    pub satisfaction: Vec<SatisfactionBound>,
    /// Initial propositions whose label alone already violates the specification.
    pub immediate_violation: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub references: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn for_prop(&self, p: &str) -> Option<&SatisfactionBound> {
        self.satisfaction.iter().find(|s| s.prop == p)
    }

    /// Recompute every violation bound from the serialized element table.
    pub fn cross_check(&self) -> Result<()> {
        let table: BTreeMap<String, f64> = self.elements.iter().map(|e| (e.element.to_string(), e.value)).collect();
        for s in &self.satisfaction {
            let mut total = 0.0;
            for r in &s.runs {
                let mut prod = 1.0;
                for e in &r.elements {
                    prod *= table
                        .get(e)
                        .ok_or_else(|| Error::Domain(format!("element {e} missing from the bound table")))?;
                }
                total += prod;
            }
            if total.clamp(0.0, 1.0) != s.violation {
                return Err(Error::Domain(format!("violation bound for `{}` does not match its element table", s.prop)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Bounds for every element and initial proposition; `certs` maps γ keys to composite certificates.
pub fn bound_report(
    decomp: &Decomposition,
    certs: &BTreeMap<PartitionKey, CbcRecord>,
    net: &Interconnection,
    regions: &LabeledRegions,
    mode: BoundMode,
) -> Result<BoundReport> {
    let mut table: BTreeMap<ReachElement, ReachBound> = BTreeMap::new();
    let mut satisfaction = Vec::new();
    let mut immediate = Vec::new();
    for (p, idx) in &decomp.runs_by_prop {
        if idx.iter().any(|&k| decomp.runs[k].states.len() < 3) {
            immediate.push(p.clone());
            continue;
        }
        if idx.is_empty() {
            satisfaction.push(satisfaction_lower_bound(p, Vec::new()));
            continue;
        }
        let mut runs = Vec::new();
        for &k in idx {
            let mut names = Vec::new();
            let mut factors = Vec::new();
            for el in decomp.elements_for(p, k) {
                if !table.contains_key(el) {
                    let cbc = decomp.partition_of(el).and_then(|s| certs.get(&s.key));
                    table.insert(el.clone(), element_bound(el, cbc, net, regions, mode)?);
                }
                names.push(el.to_string());
                factors.push(table[el].value);
            }
            runs.push(RunFactors::new(decomp.runs[k].to_string(), names, factors));
        }
        satisfaction.push(satisfaction_lower_bound(p, runs));
    }
    Ok(BoundReport {
        mode,
        horizon: decomp.horizon,
        elements: table.into_values().collect(),
        satisfaction,
        immediate_violation: immediate,
        references: BTreeMap::new(),
        notes: Vec::new(),
    })
}
