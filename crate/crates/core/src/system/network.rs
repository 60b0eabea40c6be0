use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use super::{Coupling, Interconnection};
use crate::error::{Error, Result};
use crate::poly::{CompiledPoly, NoiseModel};

struct ModelCode {
    dynamics: Vec<CompiledPoly>,
    n_input: usize,
    n_internal: usize,
    noise: Vec<NoiseModel>,
    /// (state index, internal indices) per coupling variable.
    couplings: Vec<(usize, Vec<usize>)>,
    outputs: Vec<Vec<CompiledPoly>>,
    output_names: Vec<String>,
}

struct WireCode {
    slots: Vec<usize>,
    source: usize,
    block: usize,
}

/// Interconnection with all polynomials resolved for fast synchronous stepping.
pub struct CompiledNetwork {
    models: Vec<ModelCode>,
    member_model: Vec<usize>,
    offsets: Vec<usize>,
    wires: Vec<Vec<WireCode>>,
}

impl CompiledNetwork {
    pub fn new(net: &Interconnection) -> Result<Self> {
        let mut models: Vec<ModelCode> = Vec::new();
        let mut by_ptr: HashMap<*const super::Subsystem, usize> = HashMap::new();
        let mut member_model = Vec::with_capacity(net.len());
        for m in &net.members {
            let key = Arc::as_ptr(&m.model);
            let idx = match by_ptr.get(&key) {
                Some(k) => *k,
                None => {
                    let code = compile_model(&m.model)?;
                    models.push(code);
                    by_ptr.insert(key, models.len() - 1);
                    models.len() - 1
                }
            };
            member_model.push(idx);
        }
        let mut wires: Vec<Vec<WireCode>> = (0..net.len()).map(|_| Vec::new()).collect();
        for w in &net.wiring {
            let Some(src) = w.source else { continue };
            let tgt = net.model(w.target);
            let internal = tgt.internal_vars();
            let slots = w
                .inputs
                .iter()
                .map(|v| {
                    internal
                        .iter()
                        .position(|n| n == v)
                        .ok_or_else(|| Error::Model(format!("unknown internal input `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let name = w.output.as_deref().unwrap_or_default();
            let code = &models[member_model[src]];
            let block = code
                .output_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Model(format!("member {src} has no output block `{name}`")))?;
            if code.outputs[block].len() != slots.len() {
                return Err(Error::Model(format!("wire ({},{src}) dimension mismatch", w.target)));
            }
            wires[w.target].push(WireCode { slots, source: src, block });
        }
        Ok(CompiledNetwork { models, member_model, offsets: net.offsets(), wires })
    }

    pub fn state_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn input_dim(&self, member: usize) -> usize {
        self.models[self.member_model[member]].n_input
    }

    /// Internal inputs of every member at state x (synchronous: read from time-k states).
    pub fn internal_inputs(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.member_model.len();
        let mut w: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![0.0; self.models[self.member_model[i]].n_internal])
            .collect();
        for (i, ws) in self.wires.iter().enumerate() {
            for wc in ws {
                let src = &self.models[self.member_model[wc.source]];
                let xs = &x[self.offsets[wc.source]..self.offsets[wc.source + 1]];
                for (slot, h) in wc.slots.iter().zip(&src.outputs[wc.block]) {
                    w[i][*slot] = h.eval(xs);
                }
            }
        }
        w
    }

    /// Per member: internal inputs followed by coupling values, at state x.
    pub fn local_inputs(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut w = self.internal_inputs(x);
        for (i, &mi) in self.member_model.iter().enumerate() {
            let xi = &x[self.offsets[i]..self.offsets[i + 1]];
            let code = &self.models[mi];
            let extra: Vec<f64> = code
                .couplings
                .iter()
                .map(|(s, ins)| ins.iter().map(|&k| (w[i][k] - xi[*s]).sin()).sum())
                .collect();
            w[i].extend(extra);
        }
        w
    }

    /// One synchronous step; `control(i, x_i)` supplies member i's external input.
    pub fn step_with<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        mut control: impl FnMut(usize, &[f64]) -> Vec<f64>,
        rng: &mut R,
    ) -> Vec<f64> {
        let w = self.internal_inputs(x);
        let mut next = vec![0.0; x.len()];
        let mut local = Vec::new();
        for (i, &mi) in self.member_model.iter().enumerate() {
            let code = &self.models[mi];
            let xi = &x[self.offsets[i]..self.offsets[i + 1]];
            let u = control(i, xi);
            debug_assert_eq!(u.len(), code.n_input);
            local.clear();
            local.extend_from_slice(xi);
            local.extend_from_slice(&u);
            local.extend_from_slice(&w[i]);
            for (s, ins) in &code.couplings {
                local.push(ins.iter().map(|&k| (w[i][k] - xi[*s]).sin()).sum());
            }
            for n in &code.noise {
                local.push(n.sample(rng));
            }
            for (k, f) in code.dynamics.iter().enumerate() {
                next[self.offsets[i] + k] = f.eval(&local);
            }
        }
        next
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &[f64], u: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
        self.step_with(x, |i, _| u[i].clone(), rng)
    }
}

fn compile_model(s: &super::Subsystem) -> Result<ModelCode> {
    let vars = s.all_vars();
    let dynamics = s
        .dynamics
        .iter()
        .map(|f| CompiledPoly::new(f, &vars))
        .collect::<Result<Vec<_>>>()?;
    let states = s.state_vars();
    let internal = s.internal_vars();
    let couplings = s
        .couplings
        .iter()
        .map(|c| match c {
            Coupling::SineSum { state, inputs, .. } => {
                let si = states.iter().position(|v| v == state).unwrap_or(0);
                let ks = inputs
                    .iter()
                    .filter_map(|v| internal.iter().position(|n| n == v))
                    .collect();
                (si, ks)
            }
        })
        .collect();
    let outputs = s
        .outputs
        .iter()
        .map(|b| b.exprs.iter().map(|e| CompiledPoly::new(e, &states)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelCode {
        dynamics,
        n_input: s.input_vars().len(),
        n_internal: internal.len(),
        noise: s.noise.values().cloned().collect(),
        couplings,
        outputs,
        output_names: s.outputs.iter().map(|b| b.name.clone()).collect(),
    })
}
