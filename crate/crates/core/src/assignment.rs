//! Linear subproblem: per-origin shortest-path trees and all-or-nothing loading.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{CostVector, FlowVector};
use crate::network::{DemandMatrix, Network, NodeId, OriginDemand};
use crate::numeric::CompensatedSum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignError {
    #[error("edge {edge}: cost {value} is negative or NaN")]
    InvalidCost { edge: usize, value: f64 },
    #[error("cost vector length {found} does not match edge count {expected}")]
    Shape { expected: usize, found: usize },
    #[error("origin {0} is not a node of the network")]
    UnknownOrigin(NodeId),
    #[error("destination {destination} unreachable from origin {origin}")]
    Unreachable { origin: NodeId, destination: NodeId },
}

/// Shortest paths from one origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPathTree {
    origin: NodeId,
    // index v - 1; infinite when unreachable
    dist: Vec<f64>,
    pred_edge: Vec<Option<usize>>,
    // reachable nodes in the order they were settled
    settled: Vec<NodeId>,
}

impl ShortestPathTree {
    pub fn origin(&self) -> NodeId {
        self.origin
    }

    /// Distance to `node`, `None` when unreachable.
    pub fn dist(&self, node: NodeId) -> Option<f64> {
        let d = self.dist[node as usize - 1];
        d.is_finite().then_some(d)
    }

    /// Edge entering `node` on its shortest path; `None` for the origin and
    /// unreachable nodes.
    pub fn pred_edge(&self, node: NodeId) -> Option<usize> {
        self.pred_edge[node as usize - 1]
    }

    pub fn settled(&self) -> &[NodeId] {
        &self.settled
    }

    /// Edge indices from the origin to `node`, in travel order.
    pub fn path(&self, net: &Network, node: NodeId) -> Option<Vec<usize>> {
        self.dist(node)?;
        let mut edges = Vec::new();
        let mut v = node;
        while let Some(e) = self.pred_edge(v) {
            edges.push(e);
            v = net.edges()[e].tail;
        }
        edges.reverse();
        Some(edges)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Label {
    dist: f64,
    node: NodeId,
}

impl Eq for Label {}

impl Ord for Label {
    // min-heap on (dist, node)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn check_costs(net: &Network, t: &[f64]) -> Result<(), AssignError> {
    if t.len() != net.edge_count() {
        return Err(AssignError::Shape {
            expected: net.edge_count(),
            found: t.len(),
        });
    }
    match t.iter().position(|c| !(*c >= 0.0)) {
        Some(edge) => Err(AssignError::InvalidCost {
            edge,
            value: t[edge],
        }),
        None => Ok(()),
    }
}

fn tree_unchecked(net: &Network, t: &[f64], origin: NodeId) -> ShortestPathTree {
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred_edge: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut settled = Vec::new();
    let mut heap = BinaryHeap::new();

    dist[origin as usize - 1] = 0.0;
    heap.push(Label {
        dist: 0.0,
        node: origin,
    });
    while let Some(Label { dist: du, node: u }) = heap.pop() {
        let ui = u as usize - 1;
        if done[ui] || du > dist[ui] {
            continue;
        }
        done[ui] = true;
        settled.push(u);
        if u != origin && !net.is_thru(u) {
            continue;
        }
        for &e in net.out_edges(u) {
            let v = net.edges()[e].head;
            let vi = v as usize - 1;
            if done[vi] {
                continue;
            }
            let nd = du + t[e];
            if nd < dist[vi] {
                dist[vi] = nd;
                pred_edge[vi] = Some(e);
                heap.push(Label { dist: nd, node: v });
            } else if nd == dist[vi] && pred_edge[vi].is_some_and(|p| e < p) {
                pred_edge[vi] = Some(e);
            }
        }
    }

    ShortestPathTree {
        origin,
        dist,
        pred_edge,
        settled,
    }
}

/// Label-setting shortest paths from `origin` under nonnegative costs `t`.
///
/// Nodes below the network's first thru node are never passed through (except
/// the origin itself). Among equal-cost predecessors the smallest edge index wins.
pub fn shortest_path_tree(
    net: &Network,
    t: &[f64],
    origin: NodeId,
) -> Result<ShortestPathTree, AssignError> {
    check_costs(net, t)?;
    if origin == 0 || origin as usize > net.node_count() {
        return Err(AssignError::UnknownOrigin(origin));
    }
    Ok(tree_unchecked(net, t, origin))
}

/// Result of loading every demand onto its shortest path.
#[derive(Debug, Clone, PartialEq)]
pub struct AonResult {
    pub flow: FlowVector,
    /// `sum d_ij * dist_i(j)`, which equals `<t, flow>`.
    pub lp_value: f64,
}

fn load_origin(
    tree: &ShortestPathTree,
    od: &OriginDemand,
    net: &Network,
    node_load: &mut [f64],
    flow: &mut [f64],
    lp: &mut CompensatedSum,
) -> Result<(), AssignError> {
    for &(dest, demand) in &od.destinations {
        let Some(d) = tree.dist(dest) else {
            return Err(AssignError::Unreachable {
                origin: od.origin,
                destination: dest,
            });
        };
        node_load[dest as usize - 1] += demand;
        lp.add(demand * d);
    }
    // Children are settled after their parents, so a reverse sweep pushes each
    // node's accumulated load onto its entry edge exactly once.
    for &v in tree.settled().iter().rev() {
        let vi = v as usize - 1;
        let load = std::mem::take(&mut node_load[vi]);
        if load == 0.0 {
            continue;
        }
        if let Some(e) = tree.pred_edge(v) {
            flow[e] += load;
            node_load[net.edges()[e].tail as usize - 1] += load;
        }
    }
    Ok(())
}

/// All-or-nothing assignment of `dm` at costs `t`.
///
/// Trees are built in parallel; loading runs in ascending origin order so the
/// result does not depend on the thread count.
pub fn all_or_nothing(
    net: &Network,
    dm: &DemandMatrix,
    t: &CostVector,
) -> Result<AonResult, AssignError> {
    check_costs(net, t)?;
    if let Some(od) = dm
        .by_origin()
        .iter()
        .find(|od| od.origin as usize > net.node_count())
    {
        return Err(AssignError::UnknownOrigin(od.origin));
    }
    let trees: Vec<ShortestPathTree> = dm
        .by_origin()
        .par_iter()
        .map(|od| tree_unchecked(net, t, od.origin))
        .collect();

    let mut flow = vec![0.0; net.edge_count()];
    let mut node_load = vec![0.0; net.node_count()];
    let mut lp = CompensatedSum::new();
    for (tree, od) in trees.iter().zip(dm.by_origin()) {
        if let Some(&(dest, _)) = od
            .destinations
            .iter()
            .find(|(d, _)| *d as usize > net.node_count())
        {
            return Err(AssignError::Unreachable {
                origin: od.origin,
                destination: dest,
            });
        }
        load_origin(tree, od, net, &mut node_load, &mut flow, &mut lp)?;
    }
    Ok(AonResult {
        flow: FlowVector::new(flow),
        lp_value: lp.value(),
    })
}

/// Largest node-balance violation of `flow` against the demand: for each node,
/// |(outflow - inflow) - (demand leaving - demand arriving)|.
pub fn conservation_residual(net: &Network, dm: &DemandMatrix, flow: &[f64]) -> f64 {
    let mut balance = dm.node_balance(net.node_count());
    for (e, f) in net.edges().iter().zip(flow) {
        balance[e.tail as usize - 1] -= f;
        balance[e.head as usize - 1] += f;
    }
    crate::numeric::max_abs(&balance)
}
