use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::Result;
use crate::system::Interconnection;

/// Horizontal band drawn behind the traces (e.g. a comfort interval).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub label: String,
}

/// `member.var` for every coordinate of the stacked state.
pub fn state_names(net: &Interconnection) -> Vec<String> {
    net.members
        .iter()
        .flat_map(|m| m.model.state_vars().into_iter().map(move |v| format!("{}.{v}", m.id)))
        .collect()
}

/// One row per (trajectory, step, coordinate).
pub fn traces_csv(trajs: &[Trajectory], names: &[String], coords: &[usize]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trajectory", "step", "coordinate", "value", "label"])?;
    for t in trajs {
        for (k, x) in t.states.iter().enumerate() {
            for &c in coords {
                w.write_record([
                    t.index.to_string(),
                    k.to_string(),
                    names[c].clone(),
                    format!("{}", x[c]),
                    t.word[k].clone(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(raw);
    let mut v = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while v <= hi + 1e-9 * step {
        out.push(v);
        v += step;
    }
    out
}

/// Self-contained SVG of coordinate `coord` against the step index.
pub fn traces_svg(trajs: &[Trajectory], coord: usize, name: &str, bands: &[Band], title: &str) -> String {
    let (w, h) = (720.0, 420.0);
    let (ml, mr, mt, mb) = (60.0, 20.0, 40.0, 45.0);
    let steps = trajs.iter().map(|t| t.states.len()).max().unwrap_or(0).max(2);
    let mut ylo = f64::INFINITY;
    let mut yhi = f64::NEG_INFINITY;
    for t in trajs {
        for x in &t.states {
            ylo = ylo.min(x[coord]);
            yhi = yhi.max(x[coord]);
        }
    }
    for b in bands {
        ylo = ylo.min(b.lo);
        yhi = yhi.max(b.hi);
    }
    if !ylo.is_finite() {
        (ylo, yhi) = (0.0, 1.0);
    }
    let pad = ((yhi - ylo) * 0.05).max(1e-6);
    let (ylo, yhi) = (ylo - pad, yhi + pad);
    let px = |k: f64| ml + (w - ml - mr) * k / (steps - 1) as f64;
    let py = |v: f64| mt + (h - mt - mb) * (yhi - v) / (yhi - ylo);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for b in bands {
        let (y0, y1) = (py(b.hi), py(b.lo));
        let _ = writeln!(
            s,
            r##"<rect x="{ml}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="#2ca02c" fill-opacity="0.12"/><text x="{:.2}" y="{:.2}" fill="#2ca02c" text-anchor="end">{}</text>"##,
            w - ml - mr,
            y1 - y0,
            w - mr - 4.0,
            y0 + 14.0,
            escape(&b.label)
        );
    }
    for v in ticks(ylo, yhi, 6) {
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{ml}" x2="{:.2}" y1="{y:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##, w - mr, ml - 6.0, y + 4.0, fmt_tick(v));
    }
    for k in ticks(0.0, (steps - 1) as f64, 10) {
        let x = px(k);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, h - mb + 18.0, fmt_tick(k));
    }
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, w - ml - mr, h - mt - mb);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">step k</text>"#, (w + ml - mr) / 2.0, h - 8.0);
    let _ = writeln!(s, r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#, (h + mt - mb) / 2.0, (h + mt - mb) / 2.0, escape(name));
    for (i, t) in trajs.iter().enumerate() {
        let pts: Vec<String> = t.states.iter().enumerate().map(|(k, x)| format!("{:.2},{:.2}", px(k as f64), py(x[coord]))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, PALETTE[i % PALETTE.len()], pts.join(" "));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
