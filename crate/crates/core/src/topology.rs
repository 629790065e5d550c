//! Node geometry and directional neighbourhood queries.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{positive, Error, Result};
use crate::rng::{stream, TAG_TOPOLOGY};
use crate::traffic::TrafficProfile;

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }

    /// Scalar projection of `self - origin` onto the unit vector from
    /// `origin` toward `toward`.
    pub fn projection(&self, origin: &Position, toward: &Position) -> f64 {
        let (ax, ay) = (toward.x - origin.x, toward.y - origin.y);
        let norm = libm::hypot(ax, ay);
        ((self.x - origin.x) * ax + (self.y - origin.y) * ay) / norm
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Source,
    Destination,
    Iu,
    Ris,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// 1-based rank within its kind (`U3`, `R4`); 0 for S and D.
    pub ordinal: u32,
    pub position: Position,
    /// Number of reflecting elements; only meaningful for RISs.
    pub ris_elements: usize,
    /// ON/OFF profile; present for IUs only.
    pub traffic: Option<TrafficProfile>,
}

impl Node {
    /// Short label in route-trace notation: `S`, `D`, `U3`, `R1`.
    pub fn label(&self) -> NodeLabel {
        NodeLabel(self.kind, self.ordinal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeLabel(NodeKind, u32);

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            NodeKind::Source => f.write_str("S"),
            NodeKind::Destination => f.write_str("D"),
            NodeKind::Iu => write!(f, "U{}", self.1),
            NodeKind::Ris => write!(f, "R{}", self.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Arena {
    pub fn contains(&self, p: &Position) -> bool {
        p.is_finite() && p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }
}

/// Immutable node registry plus the common coverage radius `r` shared by
/// IUs and RISs.
#[derive(Debug, Clone)]
pub struct Topology {
    nodes: Vec<Node>,
    coverage_radius: f64,
    arena: Arena,
    source: NodeId,
    destination: NodeId,
}

/// Inputs for [`Topology::generate`].
#[derive(Debug, Clone)]
pub struct TopologySpec {
    pub arena: Arena,
    pub coverage_radius: f64,
    pub source: Position,
    pub destination: Position,
    pub iu_count: usize,
    /// RIS grid pitch; must not exceed the coverage radius.
    pub ris_spacing: f64,
    pub ris_elements: usize,
}

impl Topology {
    /// Builds a topology from explicit nodes. Node ids are reassigned to
    /// their index in `nodes`, and ordinals are renumbered per kind in order.
    pub fn new(arena: Arena, coverage_radius: f64, mut nodes: Vec<Node>) -> Result<Self> {
        positive("coverage radius", coverage_radius)?;
        positive("arena width", arena.width)?;
        positive("arena height", arena.height)?;
        let mut source = None;
        let mut destination = None;
        let (mut ius, mut riss) = (0u32, 0u32);
        for (i, node) in nodes.iter_mut().enumerate() {
            node.id = NodeId(i as u32);
            if !arena.contains(&node.position) {
                return Err(Error::InvalidTopology("node outside the arena"));
            }
            match node.kind {
                NodeKind::Source => {
                    if source.replace(node.id).is_some() {
                        return Err(Error::InvalidTopology("more than one source"));
                    }
                    node.ordinal = 0;
                }
                NodeKind::Destination => {
                    if destination.replace(node.id).is_some() {
                        return Err(Error::InvalidTopology("more than one destination"));
                    }
                    node.ordinal = 0;
                }
                NodeKind::Iu => {
                    if node.traffic.is_none() {
                        return Err(Error::InvalidTopology("IU without a traffic profile"));
                    }
                    ius += 1;
                    node.ordinal = ius;
                }
                NodeKind::Ris => {
                    if node.ris_elements == 0 {
                        return Err(Error::InvalidTopology("RIS with no elements"));
                    }
                    riss += 1;
                    node.ordinal = riss;
                }
            }
        }
        let source = source.ok_or(Error::InvalidTopology("missing source"))?;
        let destination = destination.ok_or(Error::InvalidTopology("missing destination"))?;
        Ok(Self {
            nodes,
            coverage_radius,
            arena,
            source,
            destination,
        })
    }

    /// Places S and D as given, `iu_count` IUs uniformly at random, and RISs
    /// on a square grid of pitch `ris_spacing` offset by half a pitch.
    ///
    /// IUs are drawn sequentially from one stream, so the first `n` IUs of a
    /// larger topology coincide with a smaller one built from the same seed.
    pub fn generate(
        spec: &TopologySpec,
        seed: u64,
        mut profile_for: impl FnMut(usize) -> TrafficProfile,
    ) -> Result<Self> {
        positive("RIS spacing", spec.ris_spacing)?;
        if spec.ris_spacing > spec.coverage_radius {
            return Err(Error::InvalidTopology("RIS spacing exceeds the coverage radius"));
        }
        let mut rng = stream(seed, &[TAG_TOPOLOGY]);
        let mut nodes = Vec::with_capacity(spec.iu_count + 2);
        nodes.push(Node::bare(NodeKind::Source, spec.source));
        nodes.push(Node::bare(NodeKind::Destination, spec.destination));
        for k in 0..spec.iu_count {
            let p = Position::new(
                rng.random::<f64>() * spec.arena.width,
                rng.random::<f64>() * spec.arena.height,
            );
            let mut node = Node::bare(NodeKind::Iu, p);
            node.traffic = Some(profile_for(k));
            nodes.push(node);
        }
        let s = spec.ris_spacing;
        let mut y = s / 2.0;
        while y <= spec.arena.height {
            let mut x = s / 2.0;
            while x <= spec.arena.width {
                let mut node = Node::bare(NodeKind::Ris, Position::new(x, y));
                node.ris_elements = spec.ris_elements;
                nodes.push(node);
                x += s;
            }
            y += s;
        }
        Self::new(spec.arena, spec.coverage_radius, nodes)
    }

    /// Same nodes under a different coverage radius.
    pub fn with_coverage(&self, coverage_radius: f64) -> Result<Self> {
        positive("coverage radius", coverage_radius)?;
        let mut t = self.clone();
        t.coverage_radius = coverage_radius;
        Ok(t)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn coverage_radius(&self) -> f64 {
        self.coverage_radius
    }

    pub fn arena(&self) -> Arena {
        self.arena
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        self.node(a).position.distance(&self.node(b).position)
    }

    pub fn remaining_distance(&self, id: NodeId) -> f64 {
        self.distance(id, self.destination)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Nodes of the given kinds inside the half-disc of radius `r` centred at
    /// `center` and opening toward `target`, in least-remaining-distance
    /// order (ties broken by lower id).
    ///
    /// A node counts when its distance to `center` is at most `r` and its
    /// projection onto the center→target axis is strictly positive; nodes on
    /// the perpendicular through `center` (including `center` itself) are
    /// left out. Returns an empty list when `center == target`.
    pub fn half_circle_scan(
        &self,
        center: Position,
        target: Position,
        kinds: &[NodeKind],
    ) -> Vec<NodeId> {
        if center == target {
            return Vec::new();
        }
        let r = self.coverage_radius;
        let mut found: Vec<(f64, NodeId)> = self
            .nodes
            .iter()
            .filter(|n| kinds.contains(&n.kind))
            .filter(|n| {
                n.position.distance(&center) <= r && n.position.projection(&center, &target) > 0.0
            })
            .map(|n| (n.position.distance(&target), n.id))
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.into_iter().map(|(_, id)| id).collect()
    }
}

impl Node {
    fn bare(kind: NodeKind, position: Position) -> Self {
        Self {
            id: NodeId(0),
            kind,
            ordinal: 0,
            position,
            ris_elements: 0,
            traffic: None,
        }
    }

    pub fn source(position: Position) -> Self {
        Self::bare(NodeKind::Source, position)
    }

    pub fn destination(position: Position) -> Self {
        Self::bare(NodeKind::Destination, position)
    }

    pub fn iu(position: Position, traffic: TrafficProfile) -> Self {
        let mut n = Self::bare(NodeKind::Iu, position);
        n.traffic = Some(traffic);
        n
    }

    pub fn ris(position: Position, elements: usize) -> Self {
        let mut n = Self::bare(NodeKind::Ris, position);
        n.ris_elements = elements;
        n
    }
}

/// Minimum hop count `⌈l / r⌉` between two points `l` apart.
pub fn min_hops(l: f64, r: f64) -> Result<u32> {
    positive("distance", l)?;
    positive("coverage radius", r)?;
    Ok(libm::ceil(l / r) as u32)
}

/// Whole coverage radii already covered between S and an IU: `⌊‖S−U‖ / r⌋`.
pub fn hops_consumed(s_pos: Position, u_pos: Position, r: f64) -> Result<u32> {
    positive("coverage radius", r)?;
    Ok(libm::floor(s_pos.distance(&u_pos) / r) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn profile() -> TrafficProfile {
        TrafficProfile::new(0.02, 0.005, 1e-4).unwrap()
    }

    fn arena() -> Arena {
        Arena {
            width: 400.0,
            height: 400.0,
        }
    }

    fn line_topology(ius: &[(f64, f64)], r: f64) -> Topology {
        let mut nodes = vec![
            Node::source(Position::new(0.0, 0.0)),
            Node::destination(Position::new(400.0, 0.0)),
        ];
        nodes.extend(ius.iter().map(|&(x, y)| Node::iu(Position::new(x, y), profile())));
        Topology::new(arena(), r, nodes).unwrap()
    }

    #[test]
    fn scan_includes_forward_node() {
        let t = line_topology(&[(30.0, 10.0)], 60.0);
        let found = t.half_circle_scan(Position::new(0.0, 0.0), Position::new(400.0, 0.0), &[NodeKind::Iu]);
        assert_eq!(found, vec![NodeId(2)]);
    }

    #[test]
    fn scan_excludes_node_behind() {
        let mut nodes = vec![
            Node::source(Position::new(100.0, 0.0)),
            Node::destination(Position::new(400.0, 0.0)),
            Node::iu(Position::new(90.0, 0.0), profile()),
        ];
        nodes.push(Node::iu(Position::new(100.0, 30.0), profile()));
        let t = Topology::new(arena(), 60.0, nodes).unwrap();
        let found = t.half_circle_scan(Position::new(100.0, 0.0), Position::new(400.0, 0.0), &[NodeKind::Iu]);
        // the second IU sits on the perpendicular axis: zero projection
        assert!(found.is_empty());
    }

    #[test]
    fn scan_orders_by_remaining_distance() {
        let t = line_topology(&[(20.0, 5.0), (40.0, 20.0), (50.0, 0.0)], 60.0);
        let found = t.half_circle_scan(Position::new(0.0, 0.0), Position::new(400.0, 0.0), &[NodeKind::Iu]);
        let xs: Vec<f64> = found.iter().map(|&id| t.node(id).position.x).collect();
        assert_eq!(xs, vec![50.0, 40.0, 20.0]);
    }

    #[test]
    fn scan_ties_break_on_lower_id() {
        let t = line_topology(&[(30.0, -0.0), (30.0, 0.0)], 60.0);
        let found = t.half_circle_scan(Position::new(0.0, 0.0), Position::new(400.0, 0.0), &[NodeKind::Iu]);
        assert_eq!(found, vec![NodeId(2), NodeId(3)]);
    }

    #[test]
    fn scan_finds_destination_within_reach() {
        let t = line_topology(&[], 60.0);
        let found = t.half_circle_scan(
            Position::new(350.0, 0.0),
            Position::new(400.0, 0.0),
            &[NodeKind::Iu, NodeKind::Destination],
        );
        assert_eq!(found, vec![t.destination()]);
    }

    #[test]
    fn min_hops_examples() {
        assert_eq!(min_hops(400.0, 60.0).unwrap(), 7);
        assert_eq!(min_hops(60.0, 60.0).unwrap(), 1);
        assert_eq!(min_hops(61.0, 60.0).unwrap(), 2);
        assert!(min_hops(0.0, 60.0).is_err());
        assert!(min_hops(10.0, -1.0).is_err());
    }

    #[test]
    fn hops_consumed_examples() {
        let s = Position::new(0.0, 0.0);
        assert_eq!(hops_consumed(s, Position::new(120.0, 0.0), 60.0).unwrap(), 2);
        assert_eq!(hops_consumed(s, Position::new(59.0, 0.0), 60.0).unwrap(), 0);
        assert_eq!(hops_consumed(s, Position::new(125.0, 0.0), 60.0).unwrap(), 2);
    }

    #[test]
    fn rejects_two_sources() {
        let nodes = vec![
            Node::source(Position::new(0.0, 0.0)),
            Node::source(Position::new(1.0, 0.0)),
            Node::destination(Position::new(4.0, 0.0)),
        ];
        assert!(Topology::new(arena(), 60.0, nodes).is_err());
    }

    #[test]
    fn rejects_node_outside_arena() {
        let nodes = vec![
            Node::source(Position::new(0.0, 0.0)),
            Node::destination(Position::new(500.0, 0.0)),
        ];
        assert!(Topology::new(arena(), 60.0, nodes).is_err());
    }

    #[test]
    fn rejects_empty_ris() {
        let nodes = vec![
            Node::source(Position::new(0.0, 0.0)),
            Node::destination(Position::new(40.0, 0.0)),
            Node::ris(Position::new(20.0, 0.0), 0),
        ];
        assert!(Topology::new(arena(), 60.0, nodes).is_err());
    }

    #[test]
    fn generated_topologies_nest() {
        let spec = |n| TopologySpec {
            arena: arena(),
            coverage_radius: 60.0,
            source: Position::new(20.0, 200.0),
            destination: Position::new(380.0, 200.0),
            iu_count: n,
            ris_spacing: 50.0,
            ris_elements: 16,
        };
        let small = Topology::generate(&spec(10), 3, |_| profile()).unwrap();
        let big = Topology::generate(&spec(40), 3, |_| profile()).unwrap();
        for k in 0..10 {
            assert_eq!(small.nodes()[k + 2].position, big.nodes()[k + 2].position);
        }
        assert_eq!(small.count(NodeKind::Ris), 64);
        assert_eq!(big.count(NodeKind::Iu), 40);
    }

    #[test]
    fn generate_rejects_sparse_grid() {
        let spec = TopologySpec {
            arena: arena(),
            coverage_radius: 30.0,
            source: Position::new(20.0, 200.0),
            destination: Position::new(380.0, 200.0),
            iu_count: 0,
            ris_spacing: 31.0,
            ris_elements: 16,
        };
        assert!(Topology::generate(&spec, 1, |_| profile()).is_err());
    }
}
