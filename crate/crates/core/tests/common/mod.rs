#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::OnceLock;

use rand::Rng;
use traffic_fw::cost::FlowVector;
use traffic_fw::network::{parse_net, parse_trips, DemandMatrix, Network, NodeId};
use traffic_fw::solver::nfw::HistoryEntry;
use traffic_fw::solver::{solve, SolverConfig};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn fixture_paths(name: &str) -> (PathBuf, PathBuf) {
    let dir = data_dir().join(name);
    (
        dir.join(format!("{name}_net.tntp")),
        dir.join(format!("{name}_trips.tntp")),
    )
}

pub fn load(name: &str) -> (Network, DemandMatrix) {
    let (net, trips) = fixture_paths(name);
    let net = parse_net(&std::fs::read_to_string(net).unwrap()).unwrap();
    let dm = parse_trips(&std::fs::read_to_string(trips).unwrap()).unwrap();
    (net, dm)
}

pub fn sioux_falls() -> &'static (Network, DemandMatrix) {
    static SF: OnceLock<(Network, DemandMatrix)> = OnceLock::new();
    SF.get_or_init(|| load("SiouxFalls"))
}

/// Every simple path from `o` to `d` as edge lists. Nodes below the first
/// thru node may only appear at the ends.
pub fn simple_paths(net: &Network, o: NodeId, d: NodeId) -> Vec<Vec<usize>> {
    fn walk(
        net: &Network,
        at: NodeId,
        d: NodeId,
        seen: &mut Vec<NodeId>,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if at == d {
            out.push(path.clone());
            return;
        }
        if seen.len() > 1 && at < net.first_thru_node() {
            return;
        }
        for (e, edge) in net.edges().iter().enumerate() {
            if edge.tail != at || seen.contains(&edge.head) {
                continue;
            }
            seen.push(edge.head);
            path.push(e);
            walk(net, edge.head, d, seen, path, out);
            path.pop();
            seen.pop();
        }
    }
    let mut out = Vec::new();
    walk(net, o, d, &mut vec![o], &mut Vec::new(), &mut out);
    out
}

pub fn path_cost(path: &[usize], t: &[f64]) -> f64 {
    path.iter().map(|&e| t[e]).sum()
}

/// Minimum of `<t, g>` over all path loadings, by enumeration.
pub fn brute_force_lp(net: &Network, dm: &DemandMatrix, t: &[f64]) -> f64 {
    dm.entries()
        .iter()
        .filter(|p| p.origin != p.destination)
        .map(|p| {
            let best = simple_paths(net, p.origin, p.destination)
                .iter()
                .map(|path| path_cost(path, t))
                .fold(f64::INFINITY, f64::min);
            p.demand * best
        })
        .sum()
}

/// Loads each demand onto one uniformly chosen simple path.
pub fn random_path_loading(net: &Network, dm: &DemandMatrix, rng: &mut impl Rng) -> FlowVector {
    let mut f = vec![0.0; net.edge_count()];
    for p in dm.entries().iter().filter(|p| p.origin != p.destination) {
        let paths = simple_paths(net, p.origin, p.destination);
        for &e in &paths[rng.gen_range(0..paths.len())] {
            f[e] += p.demand;
        }
    }
    FlowVector::new(f)
}

/// Splits each demand over its simple paths with random weights.
pub fn random_feasible_flow(net: &Network, dm: &DemandMatrix, rng: &mut impl Rng) -> FlowVector {
    let mut f = vec![0.0; net.edge_count()];
    for p in dm.entries().iter().filter(|p| p.origin != p.destination) {
        let paths = simple_paths(net, p.origin, p.destination);
        let w: Vec<f64> = paths.iter().map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        for (path, w) in paths.iter().zip(&w) {
            for &e in path {
                f[e] += p.demand * w / total;
            }
        }
    }
    FlowVector::new(f)
}

/// High-accuracy SiouxFalls solve: `(final potential, best lower bound)`.
///
/// Any record's lower bound is valid for the optimum regardless of which
/// algorithm produced it, so the pair brackets the optimal potential.
pub fn sioux_falls_reference() -> (f64, f64) {
    static REF: OnceLock<(f64, f64)> = OnceLock::new();
    *REF.get_or_init(|| {
        let (net, dm) = sioux_falls();
        let config = SolverConfig::nfw(3)
            .with_rgap_tol(1e-12)
            .with_max_iter(20_000);
        let r = solve(net, dm, &config, &mut |_| {}).unwrap();
        let last = r.trace.last().unwrap();
        assert!(r.final_rgap.unwrap() <= 1e-10, "reference solve stalled");
        (last.psi, last.blb)
    })
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Mutually `h`-conjugate directions by Gram-Schmidt in the `h` inner
/// product, with random step sizes.
pub fn conjugate_history(rng: &mut impl Rng, h: &[f64], n: usize) -> VecDeque<HistoryEntry> {
    let hdot = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .zip(h)
            .map(|((x, y), h)| x * y * h)
            .sum::<f64>()
    };
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    while dirs.len() < n {
        let mut v: Vec<f64> = (0..h.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for d in &dirs {
            let c = hdot(&v, d) / hdot(d, d);
            for (v, d) in v.iter_mut().zip(d) {
                *v -= c * d;
            }
        }
        if hdot(&v, &v) > 1e-6 {
            dirs.push(v);
        }
    }
    dirs.into_iter()
        .map(|d| HistoryEntry {
            direction: FlowVector::new(d),
            gamma: rng.gen_range(0.05..0.9),
        })
        .collect()
}

/// Tag balance check for the SVG writer's output. Handles the declaration,
/// comments, self-closing tags and quoted attribute values.
pub fn check_well_formed_xml(text: &str) -> Result<(), String> {
    let mut stack: Vec<&str> = Vec::new();
    let mut rest = text;
    let mut roots = 0;
    while let Some(open) = rest.find('<') {
        if stack.is_empty() && !rest[..open].trim().is_empty() {
            return Err(format!("text outside the root: {:?}", rest[..open].trim()));
        }
        rest = &rest[open..];
        if let Some(body) = rest.strip_prefix("<!--") {
            let end = body.find("-->").ok_or("unterminated comment")?;
            rest = &body[end + 3..];
            continue;
        }
        if let Some(body) = rest.strip_prefix("<?") {
            let end = body.find("?>").ok_or("unterminated declaration")?;
            rest = &body[end + 2..];
            continue;
        }
        let mut quote = None;
        let mut end = None;
        for (i, c) in rest.char_indices().skip(1) {
            match (quote, c) {
                (None, '"' | '\'') => quote = Some(c),
                (Some(q), c) if c == q => quote = None,
                (None, '<') => return Err("'<' inside a tag".into()),
                (None, '>') => {
                    end = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let end = end.ok_or("unterminated tag")?;
        let tag = &rest[1..end];
        rest = &rest[end + 1..];
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(open) if open == name.trim() => {}
                other => return Err(format!("</{name}> closes {other:?}")),
            }
        } else {
            let name = tag
                .split(|c: char| c.is_whitespace() || c == '/')
                .next()
                .unwrap_or("");
            if name.is_empty() {
                return Err("empty tag name".into());
            }
            if stack.is_empty() {
                roots += 1;
            }
            if !tag.ends_with('/') {
                stack.push(name);
            }
        }
    }
    if !stack.is_empty() {
        return Err(format!("unclosed {stack:?}"));
    }
    if !rest.trim().is_empty() || roots != 1 {
        return Err(format!("expected one root element, found {roots}"));
    }
    Ok(())
}
