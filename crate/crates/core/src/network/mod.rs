//! Road graph: waypoint containers, their continuation links, signal sites and
//! static obstacles.
//!
//! A [`PathContainer`] is one directed lane polyline. Vehicles follow its
//! waypoints and, past the final one, continue onto one of its `next_ways`.
//! Links are never authored by hand: [`infer_next_ways`] derives them from the
//! geometry of container endpoints.

mod city;
mod spawn;

pub use city::{
    generate_city, generate_desk_network, CityGenConfig, CityScale, APPROACH_END, BOX_HALF,
    BEND_RADIUS, CURB_GAP, EXIT_OFFSET, FINAL_KINK_DEG, FINAL_KINK_LEN, LANE_OFFSET, ROAD_HALF_WIDTH,
};
pub use spawn::{spawn_vehicles, SpawnConfig};

use crate::geom::{normalize_deg, Obb, Segment, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::path::Path;
use thiserror::Error;

pub type ContainerId = u32;
pub type SignalId = u32;
pub type ObstacleId = u32;

/// Continuation candidates must start this far from a container's final waypoint.
pub const LINK_MIN_DISTANCE: f64 = 8.0;
pub const LINK_MAX_DISTANCE: f64 = 35.0;
/// Accepted relative headings: `[LINK_ANGLE_LEFT, 360)` or `[0, LINK_ANGLE_RIGHT]`.
pub const LINK_ANGLE_LEFT: f64 = 340.0;
pub const LINK_ANGLE_RIGHT: f64 = 80.0;

pub const MIN_WAYPOINTS: usize = 2;
pub const MAX_WAYPOINTS: usize = 12;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("container {container}: waypoints {index} and {next} coincide")]
    CoincidentWaypoints {
        container: ContainerId,
        index: usize,
        next: usize,
    },
    #[error("container {0} has fewer than two waypoints")]
    TooFewWaypoints(ContainerId),
    #[error("layout index {index} out of range for {scale:?} ({count} layouts)")]
    InvalidLayoutIndex {
        scale: CityScale,
        index: usize,
        count: usize,
    },
    #[error("dist_center {got} does not match {scale:?} (expected {expected})")]
    InvalidDistCenter {
        scale: CityScale,
        got: f64,
        expected: f64,
    },
    #[error("invalid spawn config: {0}")]
    InvalidSpawnConfig(String),
    #[error("network file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("network file {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported network format version {0}")]
    Version(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: [f64; 3],
    /// Yaw in degrees, clockwise from +z.
    pub heading: f64,
    pub container_id: ContainerId,
}

impl Waypoint {
    pub fn new(container_id: ContainerId, p: Vec2) -> Self {
        Self {
            position: p.to_xyz(),
            heading: 0.0,
            container_id,
        }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::from_xyz(self.position)
    }
}

/// Which pair of opposing approaches a stop line belongs to. Pair `A` carries
/// traffic along the z axis, pair `B` along the x axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApproachPair {
    A,
    B,
}

impl ApproachPair {
    pub fn index(self) -> usize {
        match self {
            ApproachPair::A => 0,
            ApproachPair::B => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopLine {
    pub signal: SignalId,
    pub pair: ApproachPair,
    pub point: Vec2,
    /// Unit travel direction of the approach.
    pub direction: Vec2,
}

impl StopLine {
    /// Signed distance from `p` to the line, positive while still approaching.
    pub fn distance_ahead(&self, p: Vec2) -> f64 {
        (self.point - p).dot(self.direction)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathContainer {
    pub id: ContainerId,
    pub waypoints: Vec<Waypoint>,
    pub next_ways: Vec<ContainerId>,
    /// Stop line guarding the signalized intersection this container feeds.
    pub stop_line: Option<StopLine>,
}

impl PathContainer {
    pub fn new(id: ContainerId, points: &[Vec2]) -> Self {
        Self {
            id,
            waypoints: points.iter().map(|&p| Waypoint::new(id, p)).collect(),
            next_ways: Vec::new(),
            stop_line: None,
        }
    }

    pub fn first(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    pub fn last(&self) -> &Waypoint {
        &self.waypoints[self.waypoints.len() - 1]
    }

    pub fn first_segment_length(&self) -> f64 {
        self.waypoints[0].pos().distance(self.waypoints[1].pos())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntersectionKind {
    X,
    T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSite {
    pub id: SignalId,
    pub kind: IntersectionKind,
    pub center: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObstacleKind {
    Curb,
    Building,
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ObstacleShape {
    Segment(Segment),
    Rect { min: Vec2, max: Vec2 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: ObstacleId,
    pub kind: ObstacleKind,
    pub shape: ObstacleShape,
}

impl Obstacle {
    /// Polygon used by the separating-axis test.
    pub fn polygon(&self) -> Vec<Vec2> {
        match self.shape {
            ObstacleShape::Segment(s) => vec![s.a, s.b],
            ObstacleShape::Rect { min, max } => Obb::axis_aligned(min, max).corners().to_vec(),
        }
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        match self.shape {
            ObstacleShape::Segment(s) => (
                Vec2::new(s.a.x.min(s.b.x), s.a.z.min(s.b.z)),
                Vec2::new(s.a.x.max(s.b.x), s.a.z.max(s.b.z)),
            ),
            ObstacleShape::Rect { min, max } => (min, max),
        }
    }

    pub fn ray_hit(&self, origin: Vec2, dir: Vec2, max_t: f64) -> Option<f64> {
        match self.shape {
            ObstacleShape::Segment(s) => s.ray_hit(origin, dir, max_t),
            ObstacleShape::Rect { min, max } => Obb::axis_aligned(min, max).ray_hit(origin, dir, max_t),
        }
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        match self.shape {
            ObstacleShape::Segment(s) => s.distance_to_point(p),
            ObstacleShape::Rect { min, max } => Obb::axis_aligned(min, max).distance_to_point(p),
        }
    }
}

/// Provenance of a generated city, kept for inspection and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CityMeta {
    pub scale: String,
    pub dist_center: f64,
    pub seed: u64,
    pub block_layout_index: usize,
    pub blocks: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub format_version: u32,
    pub meta: Option<CityMeta>,
    pub world_center: Vec2,
    /// Half of the larger side of the bounding rectangle.
    pub half_extent: f64,
    pub containers: Vec<PathContainer>,
    pub signals: Vec<SignalSite>,
    pub obstacles: Vec<Obstacle>,
}

impl RoadNetwork {
    pub fn container(&self, id: ContainerId) -> &PathContainer {
        &self.containers[id as usize]
    }

    /// Serialized structured-text form (JSON, fields in declaration order).
    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization is infallible")
    }

    pub fn from_text(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        std::fs::write(path, self.to_text()).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: p.clone(),
            source,
        })?;
        let net = Self::from_text(&text).map_err(|source| NetworkError::Parse { path: p, source })?;
        if net.format_version != FORMAT_VERSION {
            return Err(NetworkError::Version(net.format_version));
        }
        Ok(net)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// Points each waypoint at its successor; the last one keeps its predecessor's heading.
pub fn orient_waypoints(mut container: PathContainer) -> Result<PathContainer, NetworkError> {
    let n = container.waypoints.len();
    if n < MIN_WAYPOINTS {
        return Err(NetworkError::TooFewWaypoints(container.id));
    }
    for i in 0..n - 1 {
        let d = container.waypoints[i + 1].pos() - container.waypoints[i].pos();
        if d.length() <= 1e-9 {
            return Err(NetworkError::CoincidentWaypoints {
                container: container.id,
                index: i,
                next: i + 1,
            });
        }
        container.waypoints[i].heading = d.heading();
    }
    container.waypoints[n - 1].heading = container.waypoints[n - 2].heading;
    Ok(container)
}

/// Link acceptance between a container's final waypoint and a candidate's first waypoint.
pub fn accepts_link(last: &Waypoint, candidate: &Waypoint) -> bool {
    let d = last.pos().distance(candidate.pos());
    if !(LINK_MIN_DISTANCE..=LINK_MAX_DISTANCE).contains(&d) {
        return false;
    }
    let rel = normalize_deg(candidate.heading - last.heading);
    rel >= LINK_ANGLE_LEFT || rel <= LINK_ANGLE_RIGHT
}

/// Fills every container's `next_ways` from endpoint geometry.
///
/// First waypoints are bucketed on a grid with cell size equal to the maximum
/// link distance, so each final waypoint only inspects its 3x3 neighbourhood.
pub fn infer_next_ways(containers: &mut [PathContainer]) {
    let cell = LINK_MAX_DISTANCE;
    let key = |p: Vec2| ((p.x / cell).floor() as i64, (p.z / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, c) in containers.iter().enumerate() {
        buckets.entry(key(c.first().pos())).or_default().push(i);
    }
    let links: Vec<Vec<ContainerId>> = containers
        .iter()
        .map(|c| {
            let last = c.last();
            let (kx, kz) = key(last.pos());
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = buckets.get(&(kx + dx, kz + dz)) {
                        for &j in bucket {
                            let cand = &containers[j];
                            if cand.id != c.id && accepts_link(last, cand.first()) {
                                out.push(cand.id);
                            }
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect();
    for (c, l) in containers.iter_mut().zip(links) {
        c.next_ways = l;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub dead_ends: Vec<ContainerId>,
    pub bad_waypoint_counts: Vec<ContainerId>,
    pub off_plane: Vec<ContainerId>,
    pub misoriented: Vec<ContainerId>,
    pub link_violations: Vec<(ContainerId, ContainerId)>,
    pub bad_ids: Vec<ContainerId>,
    /// Containers not reachable from container 0 by following links.
    pub unreachable: Vec<ContainerId>,
}

impl ValidationReport {
    /// Structural validity. Dead ends and unreachable containers are reported
    /// but tolerated.
    pub fn is_valid(&self) -> bool {
        self.bad_waypoint_counts.is_empty()
            && self.off_plane.is_empty()
            && self.misoriented.is_empty()
            && self.link_violations.is_empty()
            && self.bad_ids.is_empty()
    }
}

pub fn validate(net: &RoadNetwork) -> ValidationReport {
    let mut r = ValidationReport::default();
    for (i, c) in net.containers.iter().enumerate() {
        if c.id as usize != i || c.waypoints.iter().any(|w| w.container_id != c.id) {
            r.bad_ids.push(c.id);
        }
        let n = c.waypoints.len();
        if !(MIN_WAYPOINTS..=MAX_WAYPOINTS).contains(&n) {
            r.bad_waypoint_counts.push(c.id);
            continue;
        }
        if c.waypoints.iter().any(|w| w.position[1] != 0.0) {
            r.off_plane.push(c.id);
        }
        let oriented = (0..n - 1).all(|k| {
            let want = (c.waypoints[k + 1].pos() - c.waypoints[k].pos()).heading();
            let diff = normalize_deg(want - c.waypoints[k].heading);
            diff.min(360.0 - diff) <= 1e-6
        });
        if !oriented {
            r.misoriented.push(c.id);
        }
        if c.next_ways.is_empty() {
            r.dead_ends.push(c.id);
        }
        for &nw in &c.next_ways {
            let ok = net
                .containers
                .get(nw as usize)
                .map(|d| d.id != c.id && accepts_link(c.last(), d.first()))
                .unwrap_or(false);
            if !ok {
                r.link_violations.push((c.id, nw));
            }
        }
    }
    if !net.containers.is_empty() && r.bad_ids.is_empty() {
        let mut seen = vec![false; net.containers.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &nw in &net.containers[i].next_ways {
                let j = nw as usize;
                if j < seen.len() && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        r.unreachable = seen
            .iter()
            .enumerate()
            .filter(|(_, s)| !**s)
            .map(|(i, _)| i as ContainerId)
            .collect();
    }
    r
}
