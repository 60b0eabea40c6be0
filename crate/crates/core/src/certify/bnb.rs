use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par::Exec;
use crate::poly::Interval;

/// A universally quantified inequality over a box domain.
pub trait BoxCheck: Sync {
    /// `Some(tag)` when the inequality provably holds on the whole box; the tag
    /// identifies the disjunct or input that discharged it.
    fn prove(&self, b: &[Interval]) -> Option<usize>;
    /// Amount by which the inequality fails at a point (≤ 0 when it holds).
    fn violation(&self, x: &[f64]) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BnbConfig {
    pub budget: usize,
    /// Minimum box width relative to the root box width, per dimension.
    pub width_floor: f64,
    pub batch: usize,
    pub epsilon: f64,
    #[serde(skip, default)]
    pub exec: Exec,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig { budget: 1_000_000, width_floor: 1e-5, batch: 1024, epsilon: crate::poly::EPS_NUM, exec: Exec::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BnbOutcome {
    Verified,
    Falsified { witness: Vec<f64>, violation: f64 },
    Exhausted { frontier: Vec<Vec<Interval>> },
}

#[derive(Clone, Debug)]
pub struct BnbRun {
    pub outcome: BnbOutcome,
    pub boxes: usize,
    /// Proven boxes with their tags, when recording was requested.
    pub cells: Vec<(Vec<Interval>, usize)>,
}

enum Step {
    Proven(usize),
    Witness(Vec<f64>, f64),
    Floor,
    Split(Vec<Interval>, Vec<Interval>),
}

/// Lexicographic order on points, used to canonicalize witnesses.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn probe_points(b: &[Interval]) -> Vec<Vec<f64>> {
    let mut pts = vec![b.iter().map(Interval::mid).collect::<Vec<_>>()];
    if b.len() <= 3 {
        for mask in 0..(1usize << b.len()) {
            pts.push(b.iter().enumerate().map(|(k, iv)| if mask >> k & 1 == 1 { iv.hi } else { iv.lo }).collect());
        }
    }
    pts
}

impl BnbConfig {
    /// Branch-and-bound over `root`. Only dimensions with `mask[k] == true` are split.
    /// Boxes are processed breadth-first in fixed-size batches, so the verdict and
    /// the reported witness do not depend on the execution mode.
    pub fn run<C: BoxCheck + ?Sized>(&self, check: &C, root: Vec<Interval>, mask: Option<&[bool]>, record: bool) -> BnbRun {
        let dims = root.len();
        let splittable: Vec<bool> = match mask {
            Some(m) => m.to_vec(),
            None => vec![true; dims],
        };
        let root_w: Vec<f64> = root.iter().map(|iv| iv.width()).collect();
        let floor: Vec<f64> = root_w.iter().map(|w| w * self.width_floor).collect();
        let eps = self.epsilon;

        let step = |b: &Vec<Interval>| -> Step {
            if let Some(t) = check.prove(b) {
                return Step::Proven(t);
            }
            let mut worst: Option<(Vec<f64>, f64)> = None;
            for p in probe_points(b) {
                let v = check.violation(&p);
                if v > eps && worst.as_ref().is_none_or(|(w, _)| lex_cmp(&p, w).is_lt()) {
                    worst = Some((p, v));
                }
            }
            if let Some((x, v)) = worst {
                return Step::Witness(x, v);
            }
            let mut best: Option<(usize, f64)> = None;
            for k in 0..dims {
                if !splittable[k] || b[k].width() <= floor[k] {
                    continue;
                }
                let rel = if root_w[k] > 0.0 { b[k].width() / root_w[k] } else { 0.0 };
                if best.is_none_or(|(_, r)| rel > r) {
                    best = Some((k, rel));
                }
            }
            match best {
                None => Step::Floor,
                Some((k, _)) => {
                    let m = b[k].mid();
                    let mut l = b.clone();
                    let mut r = b.clone();
                    l[k] = Interval::new(b[k].lo, m);
                    r[k] = Interval::new(m, b[k].hi);
                    Step::Split(l, r)
                }
            }
        };

        let mut queue = VecDeque::from([root]);
        let mut frontier = Vec::new();
        let mut cells = Vec::new();
        let mut boxes = 0usize;
        while !queue.is_empty() {
            if boxes >= self.budget {
                frontier.extend(queue.drain(..));
                break;
            }
            let take = queue.len().min(self.batch.max(1)).min(self.budget - boxes);
            let items: Vec<Vec<Interval>> = queue.drain(..take).collect();
            boxes += take;
            let steps = self.exec.map(&items, step);
            let mut witnesses: Vec<(Vec<f64>, f64)> = Vec::new();
            for (b, s) in items.into_iter().zip(steps) {
                match s {
                    Step::Proven(t) => {
                        if record {
                            cells.push((b, t));
                        }
                    }
                    Step::Witness(x, v) => witnesses.push((x, v)),
                    Step::Floor => frontier.push(b),
                    Step::Split(l, r) => {
                        queue.push_back(l);
                        queue.push_back(r);
                    }
                }
            }
            if let Some((witness, violation)) = witnesses.into_iter().min_by(|a, b| lex_cmp(&a.0, &b.0)) {
                return BnbRun { outcome: BnbOutcome::Falsified { witness, violation }, boxes, cells };
            }
        }
        let outcome = if frontier.is_empty() { BnbOutcome::Verified } else { BnbOutcome::Exhausted { frontier } };
        BnbRun { outcome, boxes, cells }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRun {
    pub samples: usize,
    pub violations: usize,
    /// Lexicographically smallest violating sample and its violation.
    pub witness: Option<(Vec<f64>, f64)>,
    pub max_violation: f64,
}

/// Uniform sampling of `root` (plus its center); deterministic for a given seed.
pub fn sample_check<C: BoxCheck + ?Sized>(check: &C, root: &[Interval], n: usize, seed: u64, epsilon: f64, exec: Exec) -> SampleRun {
    const CHUNK: usize = 4096;
    let chunks = n.div_ceil(CHUNK).max(1);
    let per_chunk = exec.map_range(chunks, |ci| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64);
        let count = CHUNK.min(n.saturating_sub(ci * CHUNK));
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut max_v = f64::NEG_INFINITY;
        let mut eval = |p: Vec<f64>| {
            let v = check.violation(&p);
            max_v = max_v.max(v);
            if v > epsilon {
                out.push((p, v));
            }
        };
        if ci == 0 {
            eval(root.iter().map(Interval::mid).collect());
        }
        for _ in 0..count {
            let p: Vec<f64> = root
                .iter()
                .map(|iv| if iv.width() > 0.0 { rng.random_range(iv.lo..=iv.hi) } else { iv.lo })
                .collect();
            eval(p);
        }
        (out, max_v)
    });
    let mut violations = 0;
    let mut witness: Option<(Vec<f64>, f64)> = None;
    let mut max_violation = f64::NEG_INFINITY;
    for (vs, m) in per_chunk {
        max_violation = max_violation.max(m);
        violations += vs.len();
        for (p, v) in vs {
            if witness.as_ref().is_none_or(|(w, _)| lex_cmp(&p, w).is_lt()) {
                witness = Some((p, v));
            }
        }
    }
    SampleRun { samples: n + 1, violations, witness, max_violation }
}
