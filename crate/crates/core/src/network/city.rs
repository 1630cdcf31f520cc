//! Procedural city layouts.
//!
//! Each block is a 4x4 lattice of road nodes spaced 100 units apart; blocks
//! placed side by side share their border nodes. Nodes of degree three or
//! more become signalized X/T intersections, degree-two nodes are bends that
//! get folded into a single container. A seeded pass prunes some interior
//! edges so that not every crossing is a full X.

use super::{
    infer_next_ways, orient_waypoints, ApproachPair, CityMeta, IntersectionKind, NetworkError,
    Obstacle, ObstacleKind, ObstacleShape, PathContainer, RoadNetwork, SignalSite, StopLine,
    FORMAT_VERSION, MAX_WAYPOINTS,
};
use crate::geom::{Segment, Vec2};
use crate::rng::{stream, Stream};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::str::FromStr;

const BLOCK_NODES: i64 = 4;
const NODE_SPACING: i64 = 100;

/// Lateral offset of a lane from the road centreline (right-hand traffic).
pub const LANE_OFFSET: f64 = 2.0;
pub const ROAD_HALF_WIDTH: f64 = 5.5;
/// Half size of the square intersection box; stop lines sit on its edge.
pub const BOX_HALF: f64 = 10.0;
/// Distance from a node to the first waypoint of an outgoing container.
pub const EXIT_OFFSET: f64 = 11.0;
/// Distance from a node back to the final waypoint of an incoming container.
pub const APPROACH_END: f64 = 11.0;
/// Incoming containers end with a short segment kinked to the right, which
/// puts straight-ahead and right-turn continuations inside the link window
/// and keeps left turns and U-turns out of it.
pub const FINAL_KINK_LEN: f64 = 8.0;
pub const FINAL_KINK_DEG: f64 = 15.0;
/// Curbs stop this far short of every node so turning vehicles clear them.
pub const CURB_GAP: f64 = 30.0;
/// Centerline radius of the arc that rounds a degree-2 bend.
pub const BEND_RADIUS: f64 = 12.0;

const PRUNE_FRACTION: f64 = 0.15;
const BOUNDARY_MARGIN: f64 = 40.0;
const SETBACK_DOWNTOWN: f64 = 12.0;
const SETBACK_OUTER: f64 = 16.0;
const OUTER_BUILDING_PROB: f64 = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CityScale {
    VerySmall,
    Small,
    Medium,
    Large,
}

type Layout = &'static [(f64, f64)];

const VERY_SMALL: &[Layout] = &[&[(0.0, 0.0)]];
const SMALL: &[Layout] = &[&[(0.0, 0.0), (0.0, 300.0)], &[(-150.0, 150.0), (150.0, 150.0)]];
const MEDIUM: &[Layout] = &[
    &[(-150.0, -150.0), (150.0, -150.0), (-150.0, 150.0), (150.0, 150.0)],
    &[(-450.0, 0.0), (-150.0, 0.0), (150.0, 0.0), (450.0, 0.0)],
    &[(0.0, 0.0), (0.0, 300.0), (0.0, 600.0), (300.0, 0.0)],
    &[(-300.0, 0.0), (0.0, 0.0), (300.0, 0.0), (0.0, 300.0)],
];
const LARGE: &[Layout] = &[
    &[(-300.0, -150.0), (0.0, -150.0), (300.0, -150.0), (-300.0, 150.0), (0.0, 150.0), (300.0, 150.0)],
    &[(-150.0, -300.0), (150.0, -300.0), (-150.0, 0.0), (150.0, 0.0), (-150.0, 300.0), (150.0, 300.0)],
    &[(-300.0, 0.0), (0.0, 0.0), (300.0, 0.0), (0.0, 300.0), (0.0, -300.0), (300.0, 300.0)],
    &[(-300.0, -300.0), (0.0, -300.0), (0.0, 0.0), (300.0, 0.0), (300.0, 300.0), (600.0, 300.0)],
];

impl CityScale {
    pub fn dist_center(self) -> f64 {
        match self {
            CityScale::VerySmall => 150.0,
            CityScale::Small => 200.0,
            CityScale::Medium => 300.0,
            CityScale::Large => 350.0,
        }
    }

    pub fn layouts(self) -> &'static [Layout] {
        match self {
            CityScale::VerySmall => VERY_SMALL,
            CityScale::Small => SMALL,
            CityScale::Medium => MEDIUM,
            CityScale::Large => LARGE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CityScale::VerySmall => "very-small",
            CityScale::Small => "small",
            CityScale::Medium => "medium",
            CityScale::Large => "large",
        }
    }
}

impl FromStr for CityScale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "very-small" | "verysmall" => Ok(CityScale::VerySmall),
            "small" => Ok(CityScale::Small),
            "medium" => Ok(CityScale::Medium),
            "large" => Ok(CityScale::Large),
            other => Err(format!("unknown city scale '{other}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CityGenConfig {
    pub scale: CityScale,
    pub dist_center: f64,
    pub seed: u64,
    pub block_layout_index: usize,
}

impl CityGenConfig {
    pub fn new(scale: CityScale, seed: u64, block_layout_index: usize) -> Self {
        Self {
            scale,
            dist_center: scale.dist_center(),
            seed,
            block_layout_index,
        }
    }
}

type Node = (i64, i64);

/// Undirected lattice graph with integer node coordinates.
#[derive(Default)]
struct Graph {
    nodes: BTreeSet<Node>,
    edges: BTreeSet<(Node, Node)>,
}

impl Graph {
    fn add_edge(&mut self, a: Node, b: Node) {
        self.nodes.insert(a);
        self.nodes.insert(b);
        self.edges.insert(if a < b { (a, b) } else { (b, a) });
    }

    fn adjacency(&self) -> BTreeMap<Node, Vec<Node>> {
        let mut adj: BTreeMap<Node, Vec<Node>> = self.nodes.iter().map(|&n| (n, Vec::new())).collect();
        for &(a, b) in &self.edges {
            adj.get_mut(&a).unwrap().push(b);
            adj.get_mut(&b).unwrap().push(a);
        }
        for v in adj.values_mut() {
            v.sort_unstable();
        }
        adj
    }

    fn degree(&self, n: Node) -> usize {
        self.edges.iter().filter(|(a, b)| *a == n || *b == n).count()
    }

    fn connected(&self) -> bool {
        let adj = self.adjacency();
        let Some(&start) = self.nodes.iter().find(|n| !adj[*n].is_empty()) else {
            return true;
        };
        let mut seen = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &m in &adj[&n] {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        adj.iter().all(|(n, nb)| nb.is_empty() || seen.contains(n))
    }
}

fn v(n: Node) -> Vec2 {
    Vec2::new(n.0 as f64, n.1 as f64)
}

fn block_graph(blocks: &[(f64, f64)]) -> Graph {
    let mut g = Graph::default();
    let half = (BLOCK_NODES - 1) * NODE_SPACING / 2;
    for &(bx, bz) in blocks {
        let (bx, bz) = (bx as i64, bz as i64);
        let at = |i: i64, j: i64| (bx - half + i * NODE_SPACING, bz - half + j * NODE_SPACING);
        for i in 0..BLOCK_NODES {
            for j in 0..BLOCK_NODES {
                if i + 1 < BLOCK_NODES {
                    g.add_edge(at(i, j), at(i + 1, j));
                }
                if j + 1 < BLOCK_NODES {
                    g.add_edge(at(i, j), at(i, j + 1));
                }
            }
        }
    }
    g
}

/// Removes up to `PRUNE_FRACTION` of the edges, only between two degree-4
/// nodes and only while the graph stays connected.
fn prune(g: &mut Graph, rng: &mut impl Rng) {
    let target = (g.edges.len() as f64 * PRUNE_FRACTION).round() as usize;
    let mut order: Vec<(Node, Node)> = g.edges.iter().copied().collect();
    order.shuffle(rng);
    let mut removed = 0;
    for e in order {
        if removed == target {
            break;
        }
        if g.degree(e.0) != 4 || g.degree(e.1) != 4 {
            continue;
        }
        g.edges.remove(&e);
        if g.connected() {
            removed += 1;
        } else {
            g.edges.insert(e);
        }
    }
}

pub fn generate_city(config: &CityGenConfig) -> Result<RoadNetwork, NetworkError> {
    let expected = config.scale.dist_center();
    if config.dist_center != expected {
        return Err(NetworkError::InvalidDistCenter {
            scale: config.scale,
            got: config.dist_center,
            expected,
        });
    }
    let layouts = config.scale.layouts();
    let blocks = *layouts
        .get(config.block_layout_index)
        .ok_or(NetworkError::InvalidLayoutIndex {
            scale: config.scale,
            index: config.block_layout_index,
            count: layouts.len(),
        })?;
    let mut rng = stream(config.seed, Stream::NetworkGen);
    let mut g = block_graph(blocks);
    let lattice = g.nodes.clone();
    prune(&mut g, &mut rng);
    let meta = CityMeta {
        scale: config.scale.name().to_string(),
        dist_center: config.dist_center,
        seed: config.seed,
        block_layout_index: config.block_layout_index,
        blocks: blocks.iter().map(|&(x, z)| [x, 0.0, z]).collect(),
    };
    build_network(&g, &lattice, Some(meta), config.dist_center, &mut rng)
}

/// Four X intersections at (+-50, +-50), each with a loop road hanging off
/// its outer corner. Sixteen containers; used for desk-scale training.
pub fn generate_desk_network() -> RoadNetwork {
    let mut g = Graph::default();
    let centres = [(-50, 50), (50, 50), (50, -50), (-50, -50)];
    for i in 0..4 {
        g.add_edge(centres[i], centres[(i + 1) % 4]);
    }
    for &(x, z) in &centres {
        let (sx, sz) = (x.signum() * 100, z.signum() * 100);
        let a = (x, z + sz);
        let b = (x + sx, z + sz);
        let c = (x + sx, z);
        g.add_edge((x, z), a);
        g.add_edge(a, b);
        g.add_edge(b, c);
        g.add_edge(c, (x, z));
    }
    let lattice = g.nodes.clone();
    let mut rng = stream(0, Stream::NetworkGen);
    build_network(&g, &lattice, None, f64::INFINITY, &mut rng).expect("desk layout is well formed")
}

fn build_network(
    g: &Graph,
    lattice: &BTreeSet<Node>,
    meta: Option<CityMeta>,
    dist_center: f64,
    rng: &mut impl Rng,
) -> Result<RoadNetwork, NetworkError> {
    let adj = g.adjacency();
    let deg = |n: &Node| adj[n].len();

    let mut signal_of: BTreeMap<Node, u32> = BTreeMap::new();
    let mut signals = Vec::new();
    for (n, nb) in &adj {
        if nb.len() >= 3 {
            let id = signals.len() as u32;
            signal_of.insert(*n, id);
            signals.push(SignalSite {
                id,
                kind: if nb.len() == 4 { IntersectionKind::X } else { IntersectionKind::T },
                center: v(*n),
            });
        }
    }

    let mut containers = Vec::new();
    for (&start, nb) in &adj {
        if deg(&start) == 2 || nb.is_empty() {
            continue;
        }
        for &first in nb {
            let mut chain = vec![start, first];
            while deg(chain.last().unwrap()) == 2 {
                let cur = *chain.last().unwrap();
                let prev = chain[chain.len() - 2];
                let next = adj[&cur].iter().copied().find(|&m| m != prev).unwrap_or(prev);
                chain.push(next);
            }
            let id = containers.len() as u32;
            containers.push(chain_container(id, &chain, &signal_of, deg(chain.last().unwrap()))?);
        }
    }
    infer_next_ways(&mut containers);

    let (min, max) = g.nodes.iter().fold(
        (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), &n| {
            let p = v(n);
            (Vec2::new(lo.x.min(p.x), lo.z.min(p.z)), Vec2::new(hi.x.max(p.x), hi.z.max(p.z)))
        },
    );
    let min = min - Vec2::new(BOUNDARY_MARGIN, BOUNDARY_MARGIN);
    let max = max + Vec2::new(BOUNDARY_MARGIN, BOUNDARY_MARGIN);
    let world_center = (min + max) * 0.5;
    let half_extent = 0.5 * (max.x - min.x).max(max.z - min.z);

    let mut obstacles = Vec::new();
    let mut push = |kind, shape| {
        let id = obstacles.len() as u32;
        obstacles.push(Obstacle { id, kind, shape });
    };
    for &(a, b) in &g.edges {
        let (pa, pb) = (v(a), v(b));
        let u = (pb - pa).normalized();
        let r = u.right();
        for side in [-1.0, 1.0] {
            let off = r * (side * ROAD_HALF_WIDTH);
            push(
                ObstacleKind::Curb,
                ObstacleShape::Segment(Segment::new(pa + u * CURB_GAP + off, pb - u * CURB_GAP + off)),
            );
        }
    }
    for &(x, z) in lattice {
        let square = [(x, z), (x + NODE_SPACING, z), (x, z + NODE_SPACING), (x + NODE_SPACING, z + NODE_SPACING)];
        if !square.iter().all(|n| lattice.contains(n)) {
            continue;
        }
        let centre = v((x, z)) + Vec2::new(50.0, 50.0);
        let downtown = centre.length() <= dist_center;
        let setback = if downtown { SETBACK_DOWNTOWN } else { SETBACK_OUTER };
        if !downtown && rng.random::<f64>() >= OUTER_BUILDING_PROB {
            continue;
        }
        let lo = v((x, z)) + Vec2::new(setback, setback);
        let hi = v((x + NODE_SPACING, z + NODE_SPACING)) - Vec2::new(setback, setback);
        push(ObstacleKind::Building, ObstacleShape::Rect { min: lo, max: hi });
    }
    let corners = [min, Vec2::new(max.x, min.z), max, Vec2::new(min.x, max.z)];
    for i in 0..4 {
        push(
            ObstacleKind::Boundary,
            ObstacleShape::Segment(Segment::new(corners[i], corners[(i + 1) % 4])),
        );
    }

    Ok(RoadNetwork {
        format_version: FORMAT_VERSION,
        meta,
        world_center,
        half_extent,
        containers,
        signals,
        obstacles,
    })
}

fn chain_container(
    id: u32,
    chain: &[Node],
    signal_of: &BTreeMap<Node, u32>,
    end_degree: usize,
) -> Result<PathContainer, NetworkError> {
    let dir = |a: Node, b: Node| (v(b) - v(a)).normalized();
    let d0 = dir(chain[0], chain[1]);
    let mut pts = vec![v(chain[0]) + d0 * EXIT_OFFSET + d0.right() * LANE_OFFSET];
    let bends = chain.windows(3).filter(|w| dir(w[0], w[1]).dot(dir(w[1], w[2])) < 0.999).count();
    let straight = chain.len() - 2 - bends;
    let with_mid = 3 + straight + 3 * bends <= MAX_WAYPOINTS;
    for w in chain.windows(3) {
        let (d_in, d_out) = (dir(w[0], w[1]), dir(w[1], w[2]));
        let c = v(w[1]);
        if d_in.dot(d_out) >= 0.999 {
            pts.push(c + d_in.right() * LANE_OFFSET);
            continue;
        }
        // quarter arc of the road centerline, sampled at both tangents and the middle
        pts.push(c - d_in * BEND_RADIUS + d_in.right() * LANE_OFFSET);
        if with_mid {
            let centre = c + (d_out - d_in) * BEND_RADIUS;
            let mid = centre + (c - centre).normalized() * BEND_RADIUS;
            pts.push(mid + (d_in + d_out).normalized().right() * LANE_OFFSET);
        }
        pts.push(c + d_out * BEND_RADIUS + d_out.right() * LANE_OFFSET);
    }
    let n = chain.len();
    let end = chain[n - 1];
    let d = dir(chain[n - 2], end);
    let r = d.right();
    let node = v(end);
    let signal = signal_of.get(&end).copied();
    if end_degree >= 2 {
        let kink = FINAL_KINK_LEN * FINAL_KINK_DEG.to_radians().tan();
        pts.push(node - d * (APPROACH_END + FINAL_KINK_LEN) + r * LANE_OFFSET);
        pts.push(node - d * APPROACH_END + r * (LANE_OFFSET + kink));
    } else {
        pts.push(node - d * APPROACH_END + r * LANE_OFFSET);
    }
    let mut c = orient_waypoints(PathContainer::new(id, &pts))?;
    c.stop_line = signal.map(|s| StopLine {
        signal: s,
        pair: if d.x.abs() < 0.5 { ApproachPair::A } else { ApproachPair::B },
        point: node - d * BOX_HALF + r * LANE_OFFSET,
        direction: d,
    });
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn very_small_single_block() {
        let net = generate_city(&CityGenConfig::new(CityScale::VerySmall, 1, 0)).unwrap();
        let meta = net.meta.as_ref().unwrap();
        assert_eq!(meta.blocks, vec![[0.0, 0.0, 0.0]]);
        assert_eq!(meta.dist_center, 150.0);
        assert!(net.validate().is_valid());
    }

    #[test]
    fn small_layout_zero_blocks() {
        let net = generate_city(&CityGenConfig::new(CityScale::Small, 1, 0)).unwrap();
        assert_eq!(net.meta.unwrap().blocks, vec![[0.0, 0.0, 0.0], [0.0, 0.0, 300.0]]);
    }

    #[test]
    fn layout_index_out_of_range() {
        for (scale, count) in [(CityScale::Small, 2), (CityScale::Medium, 4), (CityScale::Large, 4)] {
            let err = generate_city(&CityGenConfig::new(scale, 1, count)).unwrap_err();
            assert!(matches!(err, NetworkError::InvalidLayoutIndex { .. }));
            assert!(generate_city(&CityGenConfig::new(scale, 1, count - 1)).is_ok());
        }
    }

    #[test]
    fn dist_center_must_match_scale() {
        let mut cfg = CityGenConfig::new(CityScale::Medium, 1, 0);
        cfg.dist_center = 150.0;
        assert!(matches!(generate_city(&cfg), Err(NetworkError::InvalidDistCenter { .. })));
    }

    #[test]
    fn desk_network_shape() {
        let net = generate_desk_network();
        assert_eq!(net.signals.len(), 4);
        assert_eq!(net.containers.len(), 16);
        let report = net.validate();
        assert!(report.is_valid());
        assert!(report.dead_ends.is_empty());
        assert!(report.unreachable.is_empty());
    }

    #[test]
    fn straight_and_right_links_only() {
        let net = generate_desk_network();
        for c in &net.containers {
            for &n in &c.next_ways {
                let turn = crate::geom::normalize_deg(net.container(n).first().heading - c.waypoints[c.waypoints.len() - 3].heading);
                assert!(turn < 1e-6 || (turn - 90.0).abs() < 1e-6 || turn > 360.0 - 1e-6, "turn {turn}");
            }
        }
    }
}
