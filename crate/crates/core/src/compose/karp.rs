/// Minimum mean cycle of a weighted digraph.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanCycle {
    pub mean: f64,
    /// Vertices in edge order: cycle[t] → cycle[t+1] → … → cycle[0].
    pub cycle: Vec<usize>,
}

/// Karp's algorithm with all vertices as sources (equivalent to a zero-weight
/// super source). Edges are (from, to, weight). Returns None for acyclic graphs.
pub fn min_mean_cycle(n: usize, edges: &[(usize, usize, f64)]) -> Option<MeanCycle> {
    if n == 0 || edges.is_empty() {
        return None;
    }
    let inf = f64::INFINITY;
    // d[k][v]: minimum weight of a walk with exactly k edges ending at v.
    let mut d = vec![vec![inf; n]; n + 1];
    let mut parent = vec![vec![usize::MAX; n]; n + 1];
    d[0].iter_mut().for_each(|x| *x = 0.0);
    for k in 1..=n {
        let (prev, cur) = d.split_at_mut(k);
        let prev = &prev[k - 1];
        let cur = &mut cur[0];
        for &(u, v, w) in edges {
            if prev[u] < inf {
                let cand = prev[u] + w;
                if cand < cur[v] {
                    cur[v] = cand;
                    parent[k][v] = u;
                }
            }
        }
    }
    let mut best: Option<(f64, usize)> = None;
    for v in 0..n {
        if d[n][v] == inf {
            continue;
        }
        let mut worst = f64::NEG_INFINITY;
        for k in 0..n {
            if d[k][v] < inf {
                worst = worst.max((d[n][v] - d[k][v]) / (n - k) as f64);
            }
        }
        if best.is_none_or(|(m, _)| worst < m) {
            best = Some((worst, v));
        }
    }
    let (_, v) = best?;
    // Walk back n steps from v; the walk contains a cycle of minimum mean.
    let mut walk = vec![v];
    let mut cur = v;
    for k in (1..=n).rev() {
        cur = parent[k][cur];
        walk.push(cur);
    }
    walk.reverse();
    let weight = |a: usize, b: usize| {
        edges.iter().filter(|e| e.0 == a && e.1 == b).map(|e| e.2).fold(inf, f64::min)
    };
    let mut found: Option<MeanCycle> = None;
    for s in 0..walk.len() {
        for t in s + 1..walk.len() {
            if walk[t] != walk[s] {
                continue;
            }
            let cyc = walk[s..t].to_vec();
            let total: f64 = (0..cyc.len()).map(|q| weight(cyc[q], cyc[(q + 1) % cyc.len()])).sum();
            let mean = total / cyc.len() as f64;
            if found.as_ref().is_none_or(|f| mean < f.mean - 1e-15) {
                found = Some(MeanCycle { mean, cycle: canonical_rotation(cyc) });
            }
            break;
        }
    }
    found
}

fn canonical_rotation(mut c: Vec<usize>) -> Vec<usize> {
    let k = (0..c.len()).min_by_key(|&i| c[i]).unwrap_or(0);
    c.rotate_left(k);
    c
}
