//! Multimodal routing graph: demand nodes (one per zone) and transit nodes
//! (one per pattern stop), joined by access, transit and transfer edges.
//!
//! Topology is fixed at build time. Per-period costs live in a separate
//! [`CostOverlay`] so concurrent evaluations never share mutable state.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{ChoiceParams, Scenario, StopId};

/// Frequencies below this count as a removed pattern.
pub const MIN_ACTIVE_FREQ: f64 = 0.1;

const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgeKind {
    AccessWalk,
    AccessFeeder,
    Transit,
    Transfer,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::AccessWalk => "access_walk",
            EdgeKind::AccessFeeder => "access_feeder",
            EdgeKind::Transit => "transit",
            EdgeKind::Transfer => "transfer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    Zone(usize),
    Stop { pattern: usize, stop: StopId, position: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
    /// Routing cost before the per-period overlay.
    pub static_cost_min: f64,
    /// Pattern of the transit-node end (the traversed pattern for transit edges).
    pub pattern: usize,
    /// True when traversing the edge means boarding `pattern`.
    pub boards: bool,
    /// Unweighted minutes: walk, feeder ride or in-vehicle time.
    pub base_time_min: f64,
    /// Feeder ride time for feeder edges, zero otherwise.
    pub ride_min: f64,
}

#[derive(Debug, Clone)]
pub struct MultimodalGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<usize>>,
    zone_connected: Vec<bool>,
    num_patterns: usize,
    transit_edges: Vec<Vec<usize>>,
    feeder_edges: Vec<Vec<usize>>,
}

/// Builds the routing graph. Node count is `|zones| + Σ_p |stops(p)|`.
pub fn build_graph(sc: &Scenario) -> Result<MultimodalGraph> {
    let choice = &sc.choice;
    let num_zones = sc.zones.len();
    let mut nodes: Vec<Node> = (0..num_zones).map(Node::Zone).collect();
    let mut at_stop: BTreeMap<StopId, Vec<(usize, usize)>> = BTreeMap::new();
    let mut edges = Vec::new();
    let mut transit_edges = vec![Vec::new(); sc.patterns.len()];

    for (p, pat) in sc.patterns.iter().enumerate() {
        let first = nodes.len();
        for (position, &stop) in pat.stop_sequence.iter().enumerate() {
            at_stop.entry(stop).or_default().push((p, nodes.len()));
            nodes.push(Node::Stop { pattern: p, stop, position });
        }
        for (i, &seg) in pat.segment_times_min.iter().enumerate() {
            transit_edges[p].push(edges.len());
            edges.push(Edge {
                from: first + i,
                to: first + i + 1,
                kind: EdgeKind::Transit,
                static_cost_min: seg,
                pattern: p,
                boards: false,
                base_time_min: seg,
                ride_min: 0.0,
            });
        }
    }

    for members in at_stop.values() {
        for &(pa, na) in members {
            for &(pb, nb) in members {
                if pa == pb {
                    continue;
                }
                edges.push(Edge {
                    from: na,
                    to: nb,
                    kind: EdgeKind::Transfer,
                    static_cost_min: choice.transfer_penalty_min,
                    pattern: pb,
                    boards: true,
                    base_time_min: 0.0,
                    ride_min: 0.0,
                });
            }
        }
    }

    let mut feeder_edges = vec![Vec::new(); sc.patterns.len()];
    let mut zone_connected = Vec::with_capacity(num_zones);
    for (z, zone) in sc.zones.iter().enumerate() {
        zone_connected.push(zone.is_connected());
        let walks = zone.walk_access.iter().map(|a| (a, EdgeKind::AccessWalk));
        let feeders = zone.feeder_access.iter().map(|a| (a, EdgeKind::AccessFeeder));
        for (link, kind) in walks.chain(feeders) {
            let members = at_stop
                .get(&link.stop)
                .ok_or_else(|| Error::DanglingNode(format!("zone {z} references unknown stop {}", link.stop)))?;
            let (cost, ride) = match kind {
                EdgeKind::AccessWalk => (link.time_min * choice.walk_factor, 0.0),
                _ => (link.time_min, link.time_min),
            };
            for &(p, node) in members {
                for (from, to, boards) in [(z, node, true), (node, z, false)] {
                    if kind == EdgeKind::AccessFeeder {
                        feeder_edges[p].push(edges.len());
                    }
                    edges.push(Edge {
                        from,
                        to,
                        kind,
                        static_cost_min: cost,
                        pattern: p,
                        boards,
                        base_time_min: link.time_min,
                        ride_min: ride,
                    });
                }
            }
        }
    }

    let mut outgoing = vec![Vec::new(); nodes.len()];
    for (i, e) in edges.iter().enumerate() {
        outgoing[e.from].push(i);
    }

    Ok(MultimodalGraph {
        nodes,
        edges,
        outgoing,
        zone_connected,
        num_patterns: sc.patterns.len(),
        transit_edges,
        feeder_edges,
    })
}

impl MultimodalGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_zones(&self) -> usize {
        self.zone_connected.len()
    }

    pub fn num_patterns(&self) -> usize {
        self.num_patterns
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    pub fn is_zone_connected(&self, zone: usize) -> bool {
        self.zone_connected[zone]
    }

    /// Transit edges of a pattern, in stop order.
    pub fn transit_edges(&self, p: usize) -> &[usize] {
        &self.transit_edges[p]
    }

    /// Feeder edges attached to a pattern's stops, both directions.
    pub fn feeder_edges(&self, p: usize) -> &[usize] {
        &self.feeder_edges[p]
    }

    pub fn count_kind(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Edge-list dump: `src,dst,kind,static_cost,pattern`.
    pub fn write_edge_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["src", "dst", "kind", "static_cost", "pattern"])?;
        for e in &self.edges {
            w.write_record([
                e.from.to_string(),
                e.to.to_string(),
                e.kind.as_str().to_string(),
                e.static_cost_min.to_string(),
                e.pattern.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("edge list", e))?;
        Ok(())
    }
}

/// Per-period edge costs for one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CostOverlay {
    /// Weighted routing cost per edge; infinite when the boarded pattern is removed.
    pub cost_min: Vec<f64>,
    /// Unweighted minutes per edge.
    pub time_min: Vec<f64>,
}

/// Expected boarding wait in minutes for a headway-based service.
pub fn boarding_wait_min(freq_per_h: f64) -> f64 {
    60.0 / (2.0 * freq_per_h)
}

/// Builds the period overlay from pattern frequencies and the feeder wait.
pub fn update_costs(g: &MultimodalGraph, freqs: &[f64], wait_min: f64, choice: &ChoiceParams) -> CostOverlay {
    debug_assert_eq!(freqs.len(), g.num_patterns);
    let mut cost_min = Vec::with_capacity(g.edges.len());
    let mut time_min = Vec::with_capacity(g.edges.len());
    for e in &g.edges {
        let f = freqs[e.pattern];
        let removed = f < MIN_ACTIVE_FREQ;
        let mut cost = e.static_cost_min;
        let mut time = e.base_time_min;
        if removed && (e.boards || e.kind == EdgeKind::Transit) {
            cost = f64::INFINITY;
            time = f64::INFINITY;
        } else if e.boards {
            let wait = boarding_wait_min(f);
            cost += choice.wait_factor * wait;
            time += wait;
        }
        if e.kind == EdgeKind::AccessFeeder {
            cost += choice.wait_factor * wait_min;
            time += wait_min;
        }
        cost_min.push(cost);
        time_min.push(time);
    }
    CostOverlay { cost_min, time_min }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PathResult {
    pub reachable: bool,
    pub generalized_cost_min: f64,
    pub journey_time_min: f64,
    /// Patterns ridden, ascending.
    pub patterns_used: Vec<usize>,
    pub links_used: Vec<usize>,
    pub feeder_link_count: u8,
    pub feeder_time_min: f64,
}

impl PathResult {
    pub fn unreachable() -> Self {
        PathResult::default()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Single-origin shortest-path tree over one overlay.
///
/// Zone nodes other than the origin are never expanded, so paths cannot walk
/// through a third zone. Ties are broken towards the lexicographically
/// smallest node sequence.
#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    origin: usize,
    dist: Vec<f64>,
    pred: Vec<Option<usize>>,
}

impl ShortestPathTree {
    pub fn new(g: &MultimodalGraph, overlay: &CostOverlay, origin: usize) -> Self {
        let n = g.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[origin] = 0.0;
        heap.push(Reverse((Dist(0.0), origin)));
        while let Some(Reverse((Dist(d), u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u != origin && matches!(g.nodes[u], Node::Zone(_)) {
                continue;
            }
            for &ei in &g.outgoing[u] {
                let c = overlay.cost_min[ei];
                if !c.is_finite() {
                    continue;
                }
                let v = g.edges[ei].to;
                if done[v] {
                    continue;
                }
                let nd = d + c;
                let old = dist[v];
                let better = if !old.is_finite() || nd < old - TIE_TOL * old.abs().max(1.0) {
                    true
                } else if (nd - old).abs() <= TIE_TOL * old.abs().max(1.0) {
                    let mut candidate = node_path(g, &pred, origin, u);
                    candidate.push(v);
                    candidate < node_path(g, &pred, origin, v)
                } else {
                    false
                };
                if better {
                    dist[v] = nd;
                    pred[v] = Some(ei);
                    heap.push(Reverse((Dist(nd), v)));
                }
            }
        }
        ShortestPathTree { origin, dist, pred }
    }

    pub fn cost_to(&self, node: usize) -> f64 {
        self.dist[node]
    }

    /// Extracts the path to a destination zone.
    pub fn path_to(&self, g: &MultimodalGraph, overlay: &CostOverlay, dest: usize) -> PathResult {
        if dest == self.origin || !self.dist[dest].is_finite() {
            return PathResult::unreachable();
        }
        let mut links = Vec::new();
        let mut v = dest;
        while let Some(ei) = self.pred[v] {
            links.push(ei);
            v = g.edges[ei].from;
        }
        links.reverse();
        let mut patterns = Vec::new();
        let mut feeder_count = 0u8;
        let mut feeder_time = 0.0;
        let mut journey = 0.0;
        for &ei in &links {
            let e = &g.edges[ei];
            journey += overlay.time_min[ei];
            match e.kind {
                EdgeKind::Transit => patterns.push(e.pattern),
                EdgeKind::AccessFeeder => {
                    feeder_count += 1;
                    feeder_time += e.ride_min;
                }
                _ => {}
            }
        }
        patterns.sort_unstable();
        patterns.dedup();
        PathResult {
            reachable: true,
            generalized_cost_min: self.dist[dest],
            journey_time_min: journey,
            patterns_used: patterns,
            links_used: links,
            feeder_link_count: feeder_count,
            feeder_time_min: feeder_time,
        }
    }
}

fn node_path(g: &MultimodalGraph, pred: &[Option<usize>], origin: usize, to: usize) -> Vec<usize> {
    let mut seq = vec![to];
    let mut v = to;
    while v != origin {
        match pred[v] {
            Some(ei) => {
                v = g.edges[ei].from;
                seq.push(v);
            }
            None => break,
        }
    }
    seq.reverse();
    seq
}

/// Shortest path between two zones over a period overlay.
pub fn shortest_path(g: &MultimodalGraph, overlay: &CostOverlay, origin: usize, dest: usize) -> PathResult {
    if !g.is_zone_connected(origin) || !g.is_zone_connected(dest) {
        return PathResult::unreachable();
    }
    ShortestPathTree::new(g, overlay, origin).path_to(g, overlay, dest)
}

/// Link loads for one period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkFlows {
    pub flow_per_h: Vec<f64>,
    /// Peak transit-edge load per pattern.
    pub peak_per_h: Vec<f64>,
    /// Feeder flow summed over each pattern's feeder edges.
    pub feeder_flow_per_h: Vec<f64>,
    /// Σ q·T over feeder edges, in passenger-hours per hour.
    pub feeder_time_pax_h: f64,
}

impl LinkFlows {
    pub fn zero(g: &MultimodalGraph) -> Self {
        LinkFlows {
            flow_per_h: vec![0.0; g.edges.len()],
            peak_per_h: vec![0.0; g.num_patterns],
            feeder_flow_per_h: vec![0.0; g.num_patterns],
            feeder_time_pax_h: 0.0,
        }
    }
}

/// All-or-nothing loading: each OD's full transit demand goes on every edge
/// of its shortest path.
pub fn assign_flows<'a, I>(g: &MultimodalGraph, loads: I) -> LinkFlows
where
    I: IntoIterator<Item = (f64, &'a PathResult)>,
{
    let mut out = LinkFlows::zero(g);
    for (q, path) in loads {
        if q <= 0.0 || !path.reachable {
            continue;
        }
        for &ei in &path.links_used {
            out.flow_per_h[ei] += q;
        }
    }
    for p in 0..g.num_patterns {
        out.peak_per_h[p] = g.transit_edges[p].iter().map(|&ei| out.flow_per_h[ei]).fold(0.0, f64::max);
        out.feeder_flow_per_h[p] = g.feeder_edges[p].iter().map(|&ei| out.flow_per_h[ei]).sum();
    }
    out.feeder_time_pax_h = g
        .edges
        .iter()
        .zip(&out.flow_per_h)
        .filter(|(e, _)| e.kind == EdgeKind::AccessFeeder)
        .map(|(e, q)| q * e.ride_min / 60.0)
        .sum();
    out
}
