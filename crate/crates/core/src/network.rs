//! Road network and origin-destination demand, read from TNTP text files.
//!
//! Node ids are 1-based as in the files. Edge indices are 0-based positions in
//! file order and serve as the coordinate system for every edge-indexed vector.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use thiserror::Error;

use crate::assignment::shortest_path_tree;
use crate::cost::CostVector;

pub type NodeId = u32;

/// Relative deviation between parsed and declared total demand that triggers a warning.
pub const TOTAL_FLOW_WARN_TOLERANCE: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network must have at least one node and one zone")]
    Empty,
    #[error("zone count {zones} exceeds node count {nodes}")]
    TooManyZones { zones: usize, nodes: usize },
    #[error("first thru node {0} must be at least 1")]
    InvalidFirstThruNode(NodeId),
    #[error("edge {edge}: node {node} outside 1..={node_count}")]
    NodeOutOfRange {
        edge: usize,
        node: NodeId,
        node_count: usize,
    },
    #[error("edge {edge}: {field} = {value} is invalid")]
    InvalidParameter {
        edge: usize,
        field: &'static str,
        value: f64,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemandError {
    #[error("zone {zone} outside 1..={zone_count}")]
    UnknownZone { zone: NodeId, zone_count: usize },
    #[error("demand {demand} from {origin} to {destination} is negative or not finite")]
    InvalidDemand {
        origin: NodeId,
        destination: NodeId,
        demand: f64,
    },
}

/// A directed link with BPR delay parameters.
///
/// `bpr_coeff` is the TNTP `b` column and `bpr_power` the `power` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub capacity: f64,
    pub length: f64,
    pub free_flow_time: f64,
    pub bpr_coeff: f64,
    pub bpr_power: f64,
    pub speed: f64,
    pub toll: f64,
    pub link_type: i64,
}

impl Edge {
    /// Edge with the given BPR parameters and zeroed auxiliary columns.
    pub fn bpr(
        tail: NodeId,
        head: NodeId,
        free_flow_time: f64,
        capacity: f64,
        bpr_coeff: f64,
        bpr_power: f64,
    ) -> Self {
        Self {
            tail,
            head,
            capacity,
            length: free_flow_time,
            free_flow_time,
            bpr_coeff,
            bpr_power,
            speed: 0.0,
            toll: 0.0,
            link_type: 1,
        }
    }

    fn check(&self, index: usize, node_count: usize) -> Result<(), NetworkError> {
        for node in [self.tail, self.head] {
            if node == 0 || node as usize > node_count {
                return Err(NetworkError::NodeOutOfRange {
                    edge: index,
                    node,
                    node_count,
                });
            }
        }
        let bad = |field, value: f64| NetworkError::InvalidParameter {
            edge: index,
            field,
            value,
        };
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(bad("capacity", self.capacity));
        }
        if !(self.free_flow_time >= 0.0 && self.free_flow_time.is_finite()) {
            return Err(bad("free_flow_time", self.free_flow_time));
        }
        if !(self.bpr_coeff >= 0.0 && self.bpr_coeff.is_finite()) {
            return Err(bad("b", self.bpr_coeff));
        }
        if !(self.bpr_power >= 0.0 && self.bpr_power.is_finite()) {
            return Err(bad("power", self.bpr_power));
        }
        Ok(())
    }
}

/// Directed road graph with a forward-star index over edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    node_count: usize,
    zone_count: usize,
    first_thru_node: NodeId,
    edges: Vec<Edge>,
    // out_edges[out_offsets[v]..out_offsets[v + 1]] are the edges leaving node v + 1,
    // in increasing edge index.
    out_offsets: Vec<usize>,
    out_edges: Vec<usize>,
}

impl Network {
    pub fn new(
        node_count: usize,
        zone_count: usize,
        first_thru_node: NodeId,
        edges: Vec<Edge>,
    ) -> Result<Self, NetworkError> {
        if node_count == 0 || zone_count == 0 {
            return Err(NetworkError::Empty);
        }
        if zone_count > node_count {
            return Err(NetworkError::TooManyZones {
                zones: zone_count,
                nodes: node_count,
            });
        }
        if first_thru_node == 0 {
            return Err(NetworkError::InvalidFirstThruNode(first_thru_node));
        }
        for (i, e) in edges.iter().enumerate() {
            e.check(i, node_count)?;
        }

        let mut out_offsets = vec![0usize; node_count + 1];
        for e in &edges {
            out_offsets[e.tail as usize] += 1;
        }
        for v in 0..node_count {
            out_offsets[v + 1] += out_offsets[v];
        }
        let mut fill = out_offsets.clone();
        let mut out_edges = vec![0usize; edges.len()];
        for (i, e) in edges.iter().enumerate() {
            let slot = &mut fill[e.tail as usize - 1];
            out_edges[*slot] = i;
            *slot += 1;
        }

        Ok(Self {
            node_count,
            zone_count,
            first_thru_node,
            edges,
            out_offsets,
            out_edges,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn zone_count(&self) -> usize {
        self.zone_count
    }

    pub fn first_thru_node(&self) -> NodeId {
        self.first_thru_node
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Indices of edges leaving `node`, ascending.
    pub fn out_edges(&self, node: NodeId) -> &[usize] {
        let v = node as usize - 1;
        &self.out_edges[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    /// Whether paths may pass through `node` on their way elsewhere.
    pub fn is_thru(&self, node: NodeId) -> bool {
        node >= self.first_thru_node
    }

    /// Free-flow travel times, the cost vector at zero flow.
    pub fn free_flow_costs(&self) -> CostVector {
        CostVector::new(self.edges.iter().map(|e| e.free_flow_time).collect())
    }

    /// Serialize as a TNTP network file. Floats use the shortest round-trip form.
    pub fn to_tntp(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "<NUMBER OF ZONES> {}", self.zone_count);
        let _ = writeln!(out, "<NUMBER OF NODES> {}", self.node_count);
        let _ = writeln!(out, "<FIRST THRU NODE> {}", self.first_thru_node);
        let _ = writeln!(out, "<NUMBER OF LINKS> {}", self.edges.len());
        let _ = writeln!(out, "<END OF METADATA>");
        out.push('\n');
        out.push_str(
            "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n",
        );
        for e in &self.edges {
            let _ = writeln!(
                out,
                "\t{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{:?}\t{}\t;",
                e.tail,
                e.head,
                e.capacity,
                e.length,
                e.free_flow_time,
                e.bpr_coeff,
                e.bpr_power,
                e.speed,
                e.toll,
                e.link_type
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdPair {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand: f64,
}

/// Demands for one origin, destinations in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginDemand {
    pub origin: NodeId,
    pub destinations: Vec<(NodeId, f64)>,
}

/// Origin-destination demand between zones.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    zone_count: usize,
    entries: Vec<OdPair>,
    total_demand: f64,
    declared_total: Option<f64>,
    // Self-demand excluded, origins ascending.
    by_origin: Vec<OriginDemand>,
}

impl DemandMatrix {
    /// Builds a matrix from entries; zero demands are dropped.
    pub fn new(zone_count: usize, entries: Vec<OdPair>) -> Result<Self, DemandError> {
        for p in &entries {
            for zone in [p.origin, p.destination] {
                if zone == 0 || zone as usize > zone_count {
                    return Err(DemandError::UnknownZone { zone, zone_count });
                }
            }
            if !(p.demand >= 0.0 && p.demand.is_finite()) {
                return Err(DemandError::InvalidDemand {
                    origin: p.origin,
                    destination: p.destination,
                    demand: p.demand,
                });
            }
        }
        let entries: Vec<OdPair> = entries.into_iter().filter(|p| p.demand > 0.0).collect();
        let total_demand = crate::numeric::sum(entries.iter().map(|p| p.demand));

        let mut grouped: BTreeMap<NodeId, Vec<(NodeId, f64)>> = BTreeMap::new();
        for p in entries.iter().filter(|p| p.origin != p.destination) {
            grouped
                .entry(p.origin)
                .or_default()
                .push((p.destination, p.demand));
        }
        let by_origin = grouped
            .into_iter()
            .map(|(origin, destinations)| OriginDemand {
                origin,
                destinations,
            })
            .collect();

        Ok(Self {
            zone_count,
            entries,
            total_demand,
            declared_total: None,
            by_origin,
        })
    }

    pub fn zone_count(&self) -> usize {
        self.zone_count
    }

    /// Positive-demand entries in input order, self-demand included.
    pub fn entries(&self) -> &[OdPair] {
        &self.entries
    }

    pub fn total_demand(&self) -> f64 {
        self.total_demand
    }

    pub fn declared_total(&self) -> Option<f64> {
        self.declared_total
    }

    /// Assignable demand grouped by origin, ascending.
    pub fn by_origin(&self) -> &[OriginDemand] {
        &self.by_origin
    }

    /// Relative deviation of the parsed total from the declared one, when it
    /// exceeds [`TOTAL_FLOW_WARN_TOLERANCE`].
    pub fn declared_total_mismatch(&self) -> Option<f64> {
        let declared = self.declared_total?;
        let rel = (self.total_demand - declared).abs() / declared.abs().max(f64::MIN_POSITIVE);
        (rel > TOTAL_FLOW_WARN_TOLERANCE).then_some(rel)
    }

    /// Net demand leaving each node (index `v - 1`): demand originating at `v`
    /// minus demand destined to `v`.
    pub fn node_balance(&self, node_count: usize) -> Vec<f64> {
        let mut balance = vec![0.0; node_count];
        for p in self.entries.iter().filter(|p| p.origin != p.destination) {
            balance[p.origin as usize - 1] += p.demand;
            balance[p.destination as usize - 1] -= p.demand;
        }
        balance
    }
}

#[derive(Default)]
struct Metadata {
    values: BTreeMap<String, (usize, String)>,
    end_line: usize,
}

impl Metadata {
    fn get_usize(&self, key: &str) -> Result<Option<usize>, ParseError> {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<usize>().map(Some).map_err(|_| {
                ParseError::new(*line, format!("<{key}> expects an integer, found {v:?}"))
            }),
        }
    }

    fn require_usize(&self, key: &str) -> Result<usize, ParseError> {
        self.get_usize(key)?
            .ok_or_else(|| ParseError::new(self.end_line, format!("missing <{key}> metadata")))
    }
}

/// Reads the `<KEY> value` header up to `<END OF METADATA>`. Returns the
/// metadata and the remaining (1-based line number, line) pairs.
fn read_metadata(
    text: &str,
) -> Result<(Metadata, impl Iterator<Item = (usize, &str)>), ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut meta = Metadata::default();
    let mut last = 0;
    for (n, raw) in lines.by_ref() {
        last = n;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        let Some(rest) = line.strip_prefix('<') else {
            return Err(ParseError::new(
                n,
                format!("expected metadata line, found {line:?}"),
            ));
        };
        let Some((key, value)) = rest.split_once('>') else {
            return Err(ParseError::new(n, "unterminated metadata tag"));
        };
        let key = key.trim().to_ascii_uppercase();
        if key == "END OF METADATA" {
            meta.end_line = n;
            return Ok((meta, lines));
        }
        meta.values.insert(key, (n, value.trim().to_string()));
    }
    Err(ParseError::new(last + 1, "missing <END OF METADATA>"))
}

fn parse_field<T: std::str::FromStr>(tok: &str, name: &str, line: usize) -> Result<T, ParseError> {
    tok.parse::<T>()
        .map_err(|_| ParseError::new(line, format!("{name}: cannot parse {tok:?}")))
}

fn parse_float(tok: &str, name: &str, line: usize) -> Result<f64, ParseError> {
    let v: f64 = parse_field(tok, name, line)?;
    if !v.is_finite() {
        return Err(ParseError::new(
            line,
            format!("{name}: {tok:?} is not finite"),
        ));
    }
    Ok(v)
}

/// Parses a TNTP `_net.tntp` file.
pub fn parse_net(text: &str) -> Result<Network, ParseError> {
    let (meta, body) = read_metadata(text)?;
    let node_count = meta.require_usize("NUMBER OF NODES")?;
    let zone_count = meta.require_usize("NUMBER OF ZONES")?;
    let link_count = meta.require_usize("NUMBER OF LINKS")?;
    let first_thru_node = meta.get_usize("FIRST THRU NODE")?.unwrap_or(1);
    let first_thru_node = NodeId::try_from(first_thru_node)
        .map_err(|_| ParseError::new(meta.end_line, "<FIRST THRU NODE> out of range"))?;

    let mut edges = Vec::with_capacity(link_count);
    let mut last = meta.end_line;
    for (n, raw) in body {
        last = n;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        let row = line.split(';').next().unwrap_or("");
        let cols: Vec<&str> = row.split_whitespace().collect();
        if cols.len() < 10 {
            return Err(ParseError::new(
                n,
                format!("expected 10 columns, found {}", cols.len()),
            ));
        }
        if edges.len() == link_count {
            return Err(ParseError::new(
                n,
                format!("more link rows than declared <NUMBER OF LINKS> {link_count}"),
            ));
        }
        let link_type = match cols[9].parse::<i64>() {
            Ok(v) => v,
            Err(_) => parse_float(cols[9], "link_type", n)? as i64,
        };
        let edge = Edge {
            tail: parse_field(cols[0], "init_node", n)?,
            head: parse_field(cols[1], "term_node", n)?,
            capacity: parse_float(cols[2], "capacity", n)?,
            length: parse_float(cols[3], "length", n)?,
            free_flow_time: parse_float(cols[4], "free_flow_time", n)?,
            bpr_coeff: parse_float(cols[5], "b", n)?,
            bpr_power: parse_float(cols[6], "power", n)?,
            speed: parse_float(cols[7], "speed", n)?,
            toll: parse_float(cols[8], "toll", n)?,
            link_type,
        };
        edge.check(edges.len(), node_count)
            .map_err(|e| ParseError::new(n, e.to_string()))?;
        edges.push(edge);
    }
    if edges.len() != link_count {
        return Err(ParseError::new(
            last + 1,
            format!(
                "found {} link rows, <NUMBER OF LINKS> declares {link_count}",
                edges.len()
            ),
        ));
    }
    Network::new(node_count, zone_count, first_thru_node, edges)
        .map_err(|e| ParseError::new(meta.end_line, e.to_string()))
}

/// Parses a TNTP `_trips.tntp` file. Zero demands are dropped.
pub fn parse_trips(text: &str) -> Result<DemandMatrix, ParseError> {
    let (meta, body) = read_metadata(text)?;
    let zone_count = meta.require_usize("NUMBER OF ZONES")?;
    let declared_total = match meta.values.get("TOTAL OD FLOW") {
        None => None,
        Some((line, v)) => Some(parse_float(v, "<TOTAL OD FLOW>", *line)?),
    };

    let zone = |tok: &str, line: usize| -> Result<NodeId, ParseError> {
        let z: NodeId = parse_field(tok, "zone", line)?;
        if z == 0 || z as usize > zone_count {
            return Err(ParseError::new(
                line,
                format!("unknown zone id {z} (zones are 1..={zone_count})"),
            ));
        }
        Ok(z)
    };

    let mut entries = Vec::new();
    let mut origin: Option<NodeId> = None;
    for (n, raw) in body {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("Origin") {
            origin = Some(zone(rest.trim(), n)?);
            continue;
        }
        let Some(o) = origin else {
            return Err(ParseError::new(
                n,
                "demand pairs before any `Origin` header",
            ));
        };
        for chunk in line.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let Some((dest, value)) = chunk.split_once(':') else {
                return Err(ParseError::new(
                    n,
                    format!("expected `destination : demand`, found {chunk:?}"),
                ));
            };
            let destination = zone(dest.trim(), n)?;
            let demand = parse_float(value.trim(), "demand", n)?;
            if demand < 0.0 {
                return Err(ParseError::new(
                    n,
                    format!("negative demand {demand} from {o} to {destination}"),
                ));
            }
            if demand > 0.0 {
                entries.push(OdPair {
                    origin: o,
                    destination,
                    demand,
                });
            }
        }
    }

    let mut dm = DemandMatrix::new(zone_count, entries)
        .map_err(|e| ParseError::new(meta.end_line, e.to_string()))?;
    dm.declared_total = declared_total;
    if let Some(rel) = dm.declared_total_mismatch() {
        warn!(
            "parsed total demand {} differs from declared <TOTAL OD FLOW> {} by {:.3}%",
            dm.total_demand,
            declared_total.unwrap_or_default(),
            rel * 100.0
        );
    }
    Ok(dm)
}

/// Findings of [`validate`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// Positive-demand pairs with no path under free-flow costs.
    pub unreachable: Vec<(NodeId, NodeId)>,
    /// Zones referenced by the demand that the network does not define.
    pub unknown_zones: Vec<NodeId>,
    /// Entries with origin equal to destination; never assigned.
    pub self_demand: Vec<OdPair>,
}

impl ValidationReport {
    pub fn is_fatal(&self) -> bool {
        !self.unreachable.is_empty() || !self.unknown_zones.is_empty()
    }

    pub fn into_result(self) -> Result<Self, ValidationError> {
        if self.is_fatal() {
            Err(ValidationError(self))
        } else {
            Ok(self)
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.unreachable.is_empty()
            && self.unknown_zones.is_empty()
            && self.self_demand.is_empty()
        {
            return write!(f, "ok");
        }
        let mut first = true;
        let mut sep = |f: &mut std::fmt::Formatter<'_>| {
            if !std::mem::take(&mut first) {
                writeln!(f)
            } else {
                Ok(())
            }
        };
        for z in &self.unknown_zones {
            sep(f)?;
            write!(f, "error: zone {z} is not a zone of the network")?;
        }
        for (o, d) in &self.unreachable {
            sep(f)?;
            write!(f, "error: destination {d} unreachable from origin {o}")?;
        }
        for p in &self.self_demand {
            sep(f)?;
            write!(
                f,
                "warning: skipped self-demand {} at zone {}",
                p.demand, p.origin
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("validation failed:\n{0}")]
pub struct ValidationError(pub ValidationReport);

/// Checks that every positive demand can be routed at free-flow costs.
pub fn validate(net: &Network, dm: &DemandMatrix) -> ValidationReport {
    let mut report = ValidationReport::default();
    let zones = net.zone_count();
    let mut unknown = std::collections::BTreeSet::new();
    for p in dm.entries() {
        for z in [p.origin, p.destination] {
            if z as usize > zones {
                unknown.insert(z);
            }
        }
        if p.origin == p.destination {
            report.self_demand.push(*p);
        }
    }
    report.unknown_zones = unknown.into_iter().collect();

    let costs = net.free_flow_costs();
    for od in dm.by_origin() {
        if od.origin as usize > zones {
            continue;
        }
        let tree = match shortest_path_tree(net, &costs, od.origin) {
            Ok(t) => t,
            Err(_) => continue,
        };
        for &(dest, _) in &od.destinations {
            if dest as usize <= zones && tree.dist(dest).is_none() {
                report.unreachable.push((od.origin, dest));
            }
        }
    }
    report
}
