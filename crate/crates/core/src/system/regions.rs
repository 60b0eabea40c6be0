use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::Interconnection;
use crate::error::{Error, Result};
use crate::poly::IntervalBox;

/// How per-member boxes combine into a global region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    /// Product set: every member inside its box.
    #[default]
    All,
    /// Some member inside its box.
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub prop: String,
    #[serde(default)]
    pub quantifier: Quantifier,
    /// `boxes[i]` is the box for member i, over that member's state variables.
    pub boxes: Vec<IntervalBox>,
}

impl Region {
    fn member_contains(&self, i: usize, xi: &[f64]) -> bool {
        self.boxes[i].contains_point(xi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledRegions {
    pub regions: Vec<Region>,
    pub remainder: String,
}

impl LabeledRegions {
    /// Same box for every member.
    pub fn homogeneous(n: usize, specs: &[(&str, Quantifier, IntervalBox)], remainder: &str) -> Self {
        LabeledRegions {
            regions: specs
                .iter()
                .map(|(p, q, b)| Region { prop: p.to_string(), quantifier: *q, boxes: vec![b.clone(); n] })
                .collect(),
            remainder: remainder.to_string(),
        }
    }

    pub fn props(&self) -> Vec<String> {
        let mut v: Vec<String> = self.regions.iter().map(|r| r.prop.clone()).collect();
        v.push(self.remainder.clone());
        v
    }

    pub fn region(&self, prop: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.prop == prop)
    }

    /// Reorder every box to its member's state-variable order; errors on missing variables.
    pub fn normalize(&mut self, net: &Interconnection) -> Result<()> {
        for r in &mut self.regions {
            if r.boxes.len() != net.len() {
                return Err(Error::config(
                    "regions",
                    format!("region `{}` has {} boxes for {} subsystems", r.prop, r.boxes.len(), net.len()),
                ));
            }
            for (i, b) in r.boxes.iter_mut().enumerate() {
                let vars = net.model(i).state_vars();
                *b = b.project(&vars).ok_or_else(|| {
                    Error::config("regions", format!("region `{}` box {i} does not cover {vars:?}", r.prop))
                })?;
            }
        }
        Ok(())
    }

    /// Region-level problems: boxes outside X, overlapping product regions.
    pub fn diagnostics(&self, net: &Interconnection) -> Vec<String> {
        let mut d = Vec::new();
        let mut names = BTreeSet::new();
        for r in &self.regions {
            if !names.insert(&r.prop) || r.prop == self.remainder {
                d.push(format!("proposition `{}` declared twice", r.prop));
            }
            for (i, b) in r.boxes.iter().enumerate() {
                if i < net.len() && !net.model(i).states.contains_box(b) {
                    d.push(format!("region `{}` box {i} leaves the state box", r.prop));
                }
            }
        }
        for (a, ra) in self.regions.iter().enumerate() {
            for rb in &self.regions[a + 1..] {
                let overlap_at = |i: usize| ra.boxes[i].interiors_overlap(&rb.boxes[i]);
                let n = ra.boxes.len().min(rb.boxes.len());
                let overlaps = match (ra.quantifier, rb.quantifier) {
                    (Quantifier::All, Quantifier::All) => (0..n).all(overlap_at),
                    // With `any` on either side, one shared member suffices; any/any
                    // always overlaps for N ≥ 2 and is settled by list order.
                    (Quantifier::Any, Quantifier::Any) => false,
                    _ => (0..n).any(overlap_at),
                };
                if overlaps {
                    d.push(format!("regions `{}` and `{}` overlap", ra.prop, rb.prop));
                }
            }
        }
        d
    }

    fn first_match<'a>(&'a self, net: &Interconnection, x: &[f64]) -> &'a str {
        let off = net.offsets();
        for r in &self.regions {
            let hit = |i: usize| r.member_contains(i, &x[off[i]..off[i + 1]]);
            let inside = match r.quantifier {
                Quantifier::All => (0..net.len()).all(hit),
                Quantifier::Any => (0..net.len()).any(hit),
            };
            if inside {
                return &r.prop;
            }
        }
        &self.remainder
    }

    /// Labeling function L on X; first match wins on shared boundaries.
    pub fn label<'a>(&'a self, net: &Interconnection, x: &[f64]) -> Result<&'a str> {
        let off = net.offsets();
        for (i, m) in net.members.iter().enumerate() {
            if !m.model.states.contains_point(&x[off[i]..off[i + 1]]) {
                return Err(Error::OutsideDomain(format!("member {} ({})", i, m.id)));
            }
        }
        Ok(self.first_match(net, x))
    }

    /// Like [`label`](Self::label), but states outside X get the remainder proposition.
    pub fn label_or_remainder<'a>(&'a self, net: &Interconnection, x: &[f64]) -> &'a str {
        let off = net.offsets();
        let inside = net
            .members
            .iter()
            .enumerate()
            .all(|(i, m)| m.model.states.contains_point(&x[off[i]..off[i + 1]]));
        if inside {
            self.first_match(net, x)
        } else {
            &self.remainder
        }
    }

    /// L⁻¹ of a symbol set, restricted to member i: the union of its boxes.
    pub fn member_boxes(&self, props: &BTreeSet<String>, i: usize) -> Result<Vec<IntervalBox>> {
        let mut out = Vec::new();
        for p in props {
            if *p == self.remainder {
                return Err(Error::RegionMismatch(format!(
                    "remainder proposition `{p}` has no box representation"
                )));
            }
            let r = self
                .region(p)
                .ok_or_else(|| Error::RegionMismatch(format!("unknown proposition `{p}`")))?;
            out.push(r.boxes[i].clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use crate::fixtures;

    #[test]
    fn room_labels() {
        let net = fixtures::room_network(3, fixtures::RoomModel::Bilinear);
        let regions = fixtures::room_regions(3);
        assert!(regions.diagnostics(&net).is_empty(), "{:?}", regions.diagnostics(&net));
        assert_eq!(regions.label(&net, &[19.7; 3]).unwrap(), "p0");
        assert_eq!(regions.label(&net, &[30.0; 3]).unwrap(), "p2");
        assert_eq!(regions.label(&net, &[22.0; 3]).unwrap(), "p3");
        assert_eq!(regions.label(&net, &[19.7, 10.0, 19.7]).unwrap(), "p1");
        assert!(regions.label(&net, &[60.0, 20.0, 20.0]).is_err());
        assert_eq!(regions.label_or_remainder(&net, &[60.0, 20.0, 20.0]), "p3");
    }

    #[test]
    fn kuramoto_boundary_first_match() {
        let net = fixtures::kuramoto_network(2);
        let regions = fixtures::kuramoto_regions(2);
        assert!(regions.diagnostics(&net).is_empty(), "{:?}", regions.diagnostics(&net));
        let pi = std::f64::consts::PI;
        assert_eq!(regions.label(&net, &[pi, pi]).unwrap(), "p2");
        assert_eq!(regions.label(&net, &[0.5 * pi, 0.5 * pi]).unwrap(), "p1");
        assert_eq!(regions.label(&net, &[0.5 * pi, 1.5 * pi]).unwrap(), "p6");
    }
}
