//! Markdown rendering of the aggregated report.

use std::fmt::Write as _;

use crate::pipeline::Report;

fn f(v: f64) -> String {
    format!("{v:.6}")
}

pub fn markdown(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}\n", r.name);
    let _ = writeln!(s, "{} members, horizon M = {}, bound mode `{}`.\n", r.members, r.horizon, r.bound_mode);

    let d = &r.decomposition;
    let _ = writeln!(s, "## Decomposition\n");
    let _ = writeln!(s, "Accepting runs of the complement (R_M): {}\n", if d.runs.is_empty() { "none".into() } else { d.runs.join(", ") });
    let _ = writeln!(s, "| p | runs | elements |\n|---|---|---|");
    for (p, runs) in &d.runs_by_prop {
        let els: Vec<String> = d.elements.get(p).map(|m| m.values().map(|v| v.join(" ")).collect()).unwrap_or_default();
        let _ = writeln!(s, "| {p} | {} | {} |", runs.join(", "), els.join("; "));
    }
    let _ = writeln!(s, "\nPartition sets:\n");
    for t in &d.tasks {
        let init: Vec<&str> = t.init_symbols.iter().map(String::as_str).collect();
        let uns: Vec<&str> = t.unsafe_symbols.iter().map(String::as_str).collect();
        let _ = writeln!(
            s,
            "- {}: elements {}, initial {{{}}}, unsafe {{{}}}, {} certificate(s)",
            t.label,
            t.elements.join(" "),
            init.join(","),
            uns.join(","),
            t.jobs.len()
        );
        if let Some(issue) = &t.issue {
            let _ = writeln!(s, "  - no certificate: {issue}");
        }
    }
    let states: Vec<String> = d.switching.states.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(s, "\nSwitching automaton states: {}\n", states.join(", "));

    let _ = writeln!(s, "## Certificates\n");
    if r.certificates.is_empty() {
        let _ = writeln!(s, "none\n");
    } else {
        let _ = writeln!(s, "| name | members | eta | beta | c | kappa | alpha | rho | verdict | source |\n|---|---|---|---|---|---|---|---|---|---|");
        for c in &r.certificates {
            let verdict = c.verdict.map(|v| format!("{v:?}").to_lowercase()).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {:e} | {:e} | {verdict} | {} |",
                c.name,
                c.members,
                f(c.eta),
                f(c.beta),
                f(c.c),
                f(c.kappa),
                c.alpha,
                c.rho,
                c.provenance
            );
        }
        for c in &r.certificates {
            let _ = writeln!(s, "\n`{}`: B = {}, controller {}", c.name, c.barrier, c.controller);
        }
        let _ = writeln!(s);
    }

    let _ = writeln!(s, "## Composition\n");
    for c in &r.composites {
        let reference = c.reference_kappa.map(|k| format!(" (printed {k})")).unwrap_or_default();
        let _ = writeln!(
            s,
            "- {}: eta {}, beta {}, c {}, kappa {}{reference}, max gain {}, lambda in [{}, {}], small gain {}",
            c.task,
            f(c.eta),
            f(c.beta),
            f(c.c),
            f(c.kappa),
            f(c.max_gain),
            c.lambda_range.0,
            c.lambda_range.1,
            c.small_gain
        );
    }
    if r.composites.is_empty() {
        let _ = writeln!(s, "none");
    }

    let _ = writeln!(s, "\n## Bounds\n");
    match &r.bounds {
        Some(b) => {
            let _ = writeln!(s, "| element | T_h | formula | value |\n|---|---|---|---|");
            for e in &b.elements {
                let _ = writeln!(s, "| {} | {} | {:?} | {} |", e.element, e.horizon, e.formula, f(e.value));
            }
            let _ = writeln!(s, "\n| p | violation bound | satisfaction lower bound |\n|---|---|---|");
            for p in &b.satisfaction {
                let _ = writeln!(s, "| {} | {} | {} |", p.prop, f(p.violation), f(p.lower));
            }
            if !b.immediate_violation.is_empty() {
                let _ = writeln!(s, "\nLabels that violate the specification at k = 0: {}", b.immediate_violation.join(", "));
            }
            for (k, v) in &b.references {
                let _ = writeln!(s, "\nReference value `{k}`: {v}");
            }
            for n in &b.notes {
                let _ = writeln!(s, "\n- {n}");
            }
        }
        None => {
            let _ = writeln!(s, "not computed");
        }
    }

    let _ = writeln!(s, "\n## Simulation\n");
    if r.simulation.is_empty() {
        let _ = writeln!(s, "not run");
    } else {
        let _ = writeln!(s, "| p | n | accepted | estimate | CI | certified lower | covers bound |\n|---|---|---|---|---|---|---|");
        for m in &r.simulation {
            let e = &m.result;
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | [{}, {}] at {} | {} | {} |",
                m.prop,
                e.n,
                e.accepted,
                f(e.estimate),
                f(e.lower),
                f(e.upper),
                e.confidence,
                m.certified_lower.map(f).unwrap_or_else(|| "-".into()),
                m.covers_bound.map(|b| b.to_string()).unwrap_or_else(|| "-".into())
            );
        }
        for m in &r.simulation {
            let _ = writeln!(s, "\n{}: traces `{}`, plot `{}`, {} excursions outside X", m.prop, m.traces, m.plot, m.result.excursions);
        }
    }
    if !r.missing.is_empty() {
        let _ = writeln!(s, "\n## Missing artifacts\n\n{}", r.missing.join(", "));
    }
    let _ = writeln!(s, "\nWall-clock times per stage are in `timing.json`.");
    s
}
