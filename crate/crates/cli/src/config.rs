//! Problem configuration: a JSON object with one entry per section.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use scbc_core::automata::{Dfa, DfaSpec};
use scbc_core::bounds::BoundMode;
use scbc_core::certify::VerifyMode;
use scbc_core::poly::{IntervalBox, NoiseModel};
use scbc_core::sim::Band;
use scbc_core::synth::{CegisConfig, Conversion};
use scbc_core::system::{Interconnection, LabeledRegions, Member, Quantifier, Region, Subsystem, Wire};
use scbc_core::{fixtures, Error, Result};

const REQUIRED: [&str; 6] = ["name", "subsystems", "wiring", "regions", "dfa", "horizon"];
const OPTIONAL: [&str; 7] = ["noise", "templates", "gains", "modes", "seed", "simulation", "cegis"];

/// How members are instantiated from subsystem models and wired together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WiringConfig {
    /// Member i reads member i−1 on `prev` and member i+1 on `next`.
    Ring { model: String, n: usize, prefix: String, prev: String, next: String, output: String },
    /// Member i reads every other member, in index order, on `slots`.
    Full { model: String, n: usize, prefix: String, slots: Vec<String>, output: String },
    Explicit { members: Vec<MemberConfig>, wires: Vec<Wire> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    pub id: String,
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub prop: String,
    #[serde(default)]
    pub quantifier: Quantifier,
    /// Same box for every member.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub same: Option<IntervalBox>,
    /// One box per member.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<IntervalBox>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    pub remainder: String,
    pub regions: Vec<RegionConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Templates {
    pub barrier_degree: u32,
    pub controller_degree: u32,
}

impl Default for Templates {
    fn default() -> Self {
        let d = CegisConfig::default();
        Templates { barrier_degree: d.barrier_degree, controller_degree: d.controller_degree }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    pub kappa_grid: Vec<f64>,
    pub conversions: Vec<Conversion>,
    pub gain_ratio: f64,
}

impl Default for Gains {
    fn default() -> Self {
        let d = CegisConfig::default();
        Gains { kappa_grid: d.kappa_grid, conversions: d.conversions, gain_ratio: d.gain_ratio }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyKind {
    Sampled,
    #[default]
    Rigorous,
}

impl std::str::FromStr for VerifyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" => Ok(VerifyKind::Sampled),
            "rigorous" => Ok(VerifyKind::Rigorous),
            _ => Err(Error::Domain(format!("unknown verify mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Modes {
    pub bound: BoundMode,
    pub verify: VerifyKind,
    /// Sample count of sampled verification.
    pub samples: usize,
}

impl Default for Modes {
    fn default() -> Self {
        Modes { bound: BoundMode::default(), verify: VerifyKind::default(), samples: 100_000 }
    }
}

impl Modes {
    pub fn verify_mode(&self, seed: u64) -> VerifyMode {
        match self.verify {
            VerifyKind::Sampled => VerifyMode::Sampled { samples: self.samples, seed },
            VerifyKind::Rigorous => VerifyMode::rigorous(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_traj: usize,
    /// Two-sided confidence level 1 − δ of the binomial interval.
    pub delta: f64,
    /// Initial propositions to start from (uniform over each product region).
    pub initial: Vec<String>,
    /// Trajectories written to traces/ and plots/.
    pub plot_traj: usize,
    /// Member whose first state coordinate is plotted.
    pub plot_member: usize,
    pub bands: Vec<Band>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { n_traj: 10_000, delta: 0.01, initial: Vec::new(), plot_traj: 10, plot_member: 0, bands: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub name: String,
    pub subsystems: Vec<Subsystem>,
    /// Noise models overriding those of the named subsystem.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub noise: BTreeMap<String, BTreeMap<String, NoiseModel>>,
    pub wiring: WiringConfig,
    pub regions: RegionsConfig,
    pub dfa: DfaSpec,
    /// Horizon M of the specification.
    pub horizon: usize,
    #[serde(default)]
    pub templates: Templates,
    #[serde(default)]
    pub gains: Gains,
    #[serde(default)]
    pub modes: Modes,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub simulation: SimulationConfig,
    /// Remaining synthesis settings (sample counts, rounds, LP safeguards).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cegis: Option<CegisConfig>,
}

fn section<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<Option<T>> {
    obj.get(name)
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| Error::config(name, e.to_string())))
        .transpose()
}

fn required<T: DeserializeOwned>(obj: &Map<String, Value>, name: &str) -> Result<T> {
    section(obj, name)?.ok_or_else(|| Error::config(name, "section is missing"))
}

impl ProblemConfig {
    /// Parse and validate; errors name the offending section.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        let Value::Object(obj) = value else {
            return Err(Error::config("<root>", "expected a JSON object"));
        };
        if let Some(k) = obj.keys().find(|k| !REQUIRED.contains(&k.as_str()) && !OPTIONAL.contains(&k.as_str())) {
            return Err(Error::config(k, "unknown section"));
        }
        let cfg = ProblemConfig {
            name: required(&obj, "name")?,
            subsystems: required(&obj, "subsystems")?,
            noise: section(&obj, "noise")?.unwrap_or_default(),
            wiring: required(&obj, "wiring")?,
            regions: required(&obj, "regions")?,
            dfa: required(&obj, "dfa")?,
            horizon: required(&obj, "horizon")?,
            templates: section(&obj, "templates")?.unwrap_or_default(),
            gains: section(&obj, "gains")?.unwrap_or_default(),
            modes: section(&obj, "modes")?.unwrap_or_default(),
            seed: section(&obj, "seed")?.unwrap_or_default(),
            simulation: section(&obj, "simulation")?.unwrap_or_default(),
            cegis: section(&obj, "cegis")?,
        };
        cfg.build()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    fn model(&self, name: &str, models: &BTreeMap<String, Arc<Subsystem>>) -> Result<Arc<Subsystem>> {
        models.get(name).cloned().ok_or_else(|| Error::config("wiring", format!("unknown subsystem `{name}`")))
    }

    /// Resolve every section into model objects and check cross-references.
    pub fn build(&self) -> Result<Problem> {
        let mut models = BTreeMap::new();
        for s in &self.subsystems {
            let mut s = s.clone();
            if let Some(noise) = self.noise.get(&s.name) {
                s.noise.extend(noise.clone());
            }
            let diags = s.diagnostics();
            if !diags.is_empty() {
                return Err(Error::config("subsystems", format!("`{}`: {}", s.name, diags.join("; "))));
            }
            if models.insert(s.name.clone(), Arc::new(s)).is_some() {
                return Err(Error::config("subsystems", "subsystem names must be unique"));
            }
        }
        if let Some(k) = self.noise.keys().find(|k| !models.contains_key(*k)) {
            return Err(Error::config("noise", format!("unknown subsystem `{k}`")));
        }
        let net = match &self.wiring {
            WiringConfig::Ring { model, n, prefix, prev, next, output } => {
                Interconnection::ring(self.model(model, &models)?, *n, prefix, prev, next, output)
            }
            WiringConfig::Full { model, n, prefix, slots, output } => {
                Interconnection::full(self.model(model, &models)?, *n, prefix, slots, output)
            }
            WiringConfig::Explicit { members, wires } => Interconnection {
                members: members
                    .iter()
                    .map(|m| Ok(Member { id: m.id.clone(), model: self.model(&m.model, &models)? }))
                    .collect::<Result<_>>()?,
                wiring: wires.clone(),
            },
        };
        if net.is_empty() {
            return Err(Error::config("wiring", "the network has no members"));
        }
        let diags = net.validate();
        if !diags.is_empty() {
            let msgs: Vec<String> = diags.iter().take(5).map(|d| d.to_string()).collect();
            return Err(Error::config("wiring", msgs.join("; ")));
        }
        let mut regions = LabeledRegions {
            regions: self
                .regions
                .regions
                .iter()
                .map(|r| {
                    let boxes = match (&r.same, &r.boxes) {
                        (Some(b), None) => vec![b.clone(); net.len()],
                        (None, Some(bs)) => bs.clone(),
                        _ => return Err(Error::config("regions", format!("region `{}` needs exactly one of `box`, `boxes`", r.prop))),
                    };
                    Ok(Region { prop: r.prop.clone(), quantifier: r.quantifier, boxes })
                })
                .collect::<Result<_>>()?,
            remainder: self.regions.remainder.clone(),
        };
        regions.normalize(&net)?;
        let diags = regions.diagnostics(&net);
        if !diags.is_empty() {
            return Err(Error::config("regions", diags.join("; ")));
        }
        let dfa = Dfa::try_from(self.dfa.clone()).map_err(|e| Error::config("dfa", e.to_string()))?;
        let mut props = regions.props();
        let mut alphabet = dfa.alphabet().to_vec();
        props.sort();
        alphabet.sort();
        if props != alphabet {
            return Err(Error::config("dfa", format!("alphabet {alphabet:?} does not match the region labels {props:?}")));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        for p in &self.simulation.initial {
            match regions.region(p) {
                Some(r) if r.quantifier == Quantifier::All => {}
                _ => return Err(Error::config("simulation", format!("initial proposition `{p}` must be a product region"))),
            }
        }
        if self.simulation.plot_member >= net.len() {
            return Err(Error::config("simulation", "plot_member is not a member index"));
        }
        let cegis = self.cegis_config();
        cegis.validate().map_err(|e| Error::config("gains", e.to_string()))?;
        Ok(Problem { net, regions, dfa, cegis })
    }

    pub fn cegis_config(&self) -> CegisConfig {
        let mut c = self.cegis.clone().unwrap_or_default();
        c.barrier_degree = self.templates.barrier_degree;
        c.controller_degree = self.templates.controller_degree;
        c.kappa_grid = self.gains.kappa_grid.clone();
        c.conversions = self.gains.conversions.clone();
        c.gain_ratio = self.gains.gain_ratio;
        c.verify = self.modes.verify_mode(self.seed);
        c.seed = self.seed;
        c
    }
}

/// Resolved problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub net: Interconnection,
    pub regions: LabeledRegions,
    pub dfa: Dfa,
    pub cegis: CegisConfig,
}

fn regions_config(r: &LabeledRegions) -> RegionsConfig {
    RegionsConfig {
        remainder: r.remainder.clone(),
        regions: r
            .regions
            .iter()
            .map(|g| RegionConfig { prop: g.prop.clone(), quantifier: g.quantifier, same: Some(g.boxes[0].clone()), boxes: None })
            .collect(),
    }
}

/// Circular room network with `n` rooms.
pub fn room(n: usize) -> ProblemConfig {
    let model = fixtures::room_subsystem(fixtures::RoomModel::Bilinear);
    ProblemConfig {
        name: format!("room-{n}"),
        subsystems: vec![model.clone()],
        noise: BTreeMap::new(),
        wiring: WiringConfig::Ring {
            model: model.name,
            n,
            prefix: "room".into(),
            prev: "w1".into(),
            next: "w2".into(),
            output: "y".into(),
        },
        regions: regions_config(&fixtures::room_regions(1)),
        dfa: fixtures::room_dfa().into(),
        horizon: 10,
        templates: Templates::default(),
        gains: Gains::default(),
        modes: Modes::default(),
        seed: 0,
        simulation: SimulationConfig {
            initial: vec!["p0".into()],
            bands: vec![Band { lo: 17.0, hi: 23.0, label: "comfort [17, 23]".into() }],
            ..SimulationConfig::default()
        },
        cegis: None,
    }
}

/// All-to-all Kuramoto network with `n` oscillators.
pub fn kuramoto(n: usize) -> ProblemConfig {
    let model = fixtures::kuramoto_subsystem(n);
    let pi = std::f64::consts::PI;
    ProblemConfig {
        name: format!("kuramoto-{n}"),
        subsystems: vec![model.clone()],
        noise: BTreeMap::new(),
        wiring: WiringConfig::Full {
            model: model.name,
            n,
            prefix: "osc".into(),
            slots: fixtures::kuramoto_slots(n),
            output: "y".into(),
        },
        regions: regions_config(&fixtures::kuramoto_regions(1)),
        dfa: fixtures::kuramoto_dfa().into(),
        horizon: 7,
        templates: Templates::default(),
        gains: Gains::default(),
        modes: Modes::default(),
        seed: 0,
        simulation: SimulationConfig {
            initial: vec!["p1".into(), "p4".into()],
            bands: vec![
                Band { lo: 0.0, hi: pi / 15.0, label: "X0".into() },
                Band { lo: 4.0 * pi / 9.0, hi: 5.0 * pi / 9.0, label: "X1".into() },
                Band { lo: 14.0 * pi / 15.0, hi: pi, label: "X2".into() },
            ],
            ..SimulationConfig::default()
        },
        cegis: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_round_trip() {
        for cfg in [room(3), kuramoto(4)] {
            let text = cfg.to_json().unwrap();
            let back = ProblemConfig::from_json(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn missing_dfa_names_the_section() {
        let mut v: Value = serde_json::from_str(&room(2).to_json().unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("dfa");
        match ProblemConfig::from_json(&v.to_string()) {
            Err(Error::Config { section, .. }) => assert_eq!(section, "dfa"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_references_are_reported() {
        let mut cfg = room(2);
        cfg.dfa.alphabet.push("p9".into());
        assert!(matches!(ProblemConfig::from_json(&cfg.to_json().unwrap()), Err(Error::Config { section, .. }) if section == "dfa"));
        let mut cfg = room(2);
        if let WiringConfig::Ring { model, .. } = &mut cfg.wiring {
            *model = "heater".into();
        }
        assert!(matches!(ProblemConfig::from_json(&cfg.to_json().unwrap()), Err(Error::Config { section, .. }) if section == "wiring"));
        let mut v: Value = serde_json::from_str(&room(2).to_json().unwrap()).unwrap();
        v.as_object_mut().unwrap().insert("extra".into(), Value::Null);
        assert!(matches!(ProblemConfig::from_json(&v.to_string()), Err(Error::Config { section, .. }) if section == "extra"));
    }
}
