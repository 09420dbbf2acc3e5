//! Square-lattice graphs the walk lives on: the M×N torus and bounded
//! planar grids, with the two rotor routing orders.
//!
//! Coordinate convention: x grows East, y grows North. Vertex ids are
//! row-major, `id = x + width * y`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The four lattice directions with their unit displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn dx(self) -> i64 {
        match self {
            Direction::East => 1,
            Direction::West => -1,
            _ => 0,
        }
    }

    pub fn dy(self) -> i64 {
        match self {
            Direction::North => 1,
            Direction::South => -1,
            _ => 0,
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }

    /// Index in the canonical (clockwise) listing N, E, S, W.
    pub fn index(self) -> usize {
        match self {
            Direction::North => 0,
            Direction::East => 1,
            Direction::South => 2,
            Direction::West => 3,
        }
    }

    /// The next direction a quarter turn clockwise (N→E→S→W→N).
    pub fn clockwise_next(self) -> Direction {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }

    pub fn from_char(c: char) -> Option<Direction> {
        match c {
            'N' => Some(Direction::North),
            'E' => Some(Direction::East),
            'S' => Some(Direction::South),
            'W' => Some(Direction::West),
            _ => None,
        }
    }

    /// Direction of the unit step from `from` to `to`, if they are distinct
    /// points one lattice step apart.
    pub fn between(from: (i64, i64), to: (i64, i64)) -> Option<Direction> {
        Direction::ALL
            .into_iter()
            .find(|d| from.0 + d.dx() == to.0 && from.1 + d.dy() == to.1)
    }
}

/// The order in which a rotor cycles through the outgoing directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutingOrder {
    /// North, East, South, West.
    Clockwise,
    /// North, South, East, West.
    Cross,
}

impl RoutingOrder {
    pub fn sequence(self) -> [Direction; 4] {
        match self {
            RoutingOrder::Clockwise => [
                Direction::North,
                Direction::East,
                Direction::South,
                Direction::West,
            ],
            RoutingOrder::Cross => [
                Direction::North,
                Direction::South,
                Direction::East,
                Direction::West,
            ],
        }
    }

    fn position(self, d: Direction) -> usize {
        let seq = self.sequence();
        seq.iter().position(|&x| x == d).expect("all four present")
    }
}

impl std::fmt::Display for RoutingOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RoutingOrder::Clockwise => write!(f, "clockwise"),
            RoutingOrder::Cross => write!(f, "cross"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Topology {
    /// Periodic M×N lattice; M columns (x), N rows (y).
    Torus { m: usize, n: usize },
    /// Bounded Lx×Ly grid with open boundary.
    Planar { lx: usize, ly: usize },
}

/// An immutable square-lattice graph. Safe to share across threads.
///
/// Neighbor lookups are precomputed; `ABSENT` marks steps that leave a
/// planar grid.
#[derive(Debug, Clone)]
pub struct Lattice {
    topology: Topology,
    width: usize,
    height: usize,
    nbr: Vec<[usize; 4]>,
    deg: Vec<u8>,
}

const ABSENT: usize = usize::MAX;

impl PartialEq for Lattice {
    fn eq(&self, other: &Lattice) -> bool {
        self.topology == other.topology
    }
}

impl Eq for Lattice {}

impl Lattice {
    /// Periodic lattice. Sizes below 3 would create multiple edges between
    /// the same pair of vertices, which the model excludes.
    pub fn torus(m: usize, n: usize) -> Result<Lattice> {
        if m < 3 || n < 3 {
            return Err(Error::TorusTooSmall(m, n));
        }
        Ok(Lattice::build(Topology::Torus { m, n }, m, n))
    }

    /// Bounded grid. Must contain at least one edge.
    pub fn planar(lx: usize, ly: usize) -> Result<Lattice> {
        if lx == 0 || ly == 0 || lx * ly < 2 {
            return Err(Error::GridTooSmall(lx, ly));
        }
        Ok(Lattice::build(Topology::Planar { lx, ly }, lx, ly))
    }

    fn build(topology: Topology, width: usize, height: usize) -> Lattice {
        let count = width * height;
        let mut nbr = vec![[ABSENT; 4]; count];
        let mut deg = vec![0u8; count];
        for v in 0..count {
            let (x, y) = (v % width, v / width);
            for d in Direction::ALL {
                let nx = x as i64 + d.dx();
                let ny = y as i64 + d.dy();
                let w = match topology {
                    Topology::Torus { m, n } => Some(
                        (nx.rem_euclid(m as i64) + (ny.rem_euclid(n as i64)) * m as i64) as usize,
                    ),
                    Topology::Planar { lx, ly } => {
                        if nx < 0 || ny < 0 || nx >= lx as i64 || ny >= ly as i64 {
                            None
                        } else {
                            Some(nx as usize + ny as usize * lx)
                        }
                    }
                };
                if let Some(w) = w {
                    nbr[v][d.index()] = w;
                    deg[v] += 1;
                }
            }
        }
        Lattice {
            topology,
            width,
            height,
            nbr,
            deg,
        }
    }

    pub fn from_topology(t: Topology) -> Result<Lattice> {
        match t {
            Topology::Torus { m, n } => Lattice::torus(m, n),
            Topology::Planar { lx, ly } => Lattice::planar(lx, ly),
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.topology, Topology::Torus { .. })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_vertices(&self) -> usize {
        self.width * self.height
    }

    /// Number of directed edges; on the torus this is 4MN.
    pub fn num_directed_edges(&self) -> usize {
        (0..self.num_vertices()).map(|v| self.out_degree(v)).sum()
    }

    pub fn vertex_id(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        x + self.width * y
    }

    pub fn coords(&self, v: usize) -> (usize, usize) {
        (v % self.width, v / self.width)
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.num_vertices() {
            Ok(())
        } else {
            Err(Error::InvalidVertex(v, self.num_vertices()))
        }
    }

    /// Neighbor of `v` in direction `dir`; `None` when the step leaves a
    /// planar grid. On the torus the step always wraps.
    #[inline]
    pub fn neighbor(&self, v: usize, dir: Direction) -> Option<usize> {
        let w = self.nbr[v][dir.index()];
        (w != ABSENT).then_some(w)
    }

    #[inline]
    pub fn has_direction(&self, v: usize, dir: Direction) -> bool {
        self.nbr[v][dir.index()] != ABSENT
    }

    /// Existing outgoing directions at `v`, in canonical N, E, S, W order.
    pub fn directions(&self, v: usize) -> impl Iterator<Item = Direction> + '_ {
        Direction::ALL
            .into_iter()
            .filter(move |&d| self.has_direction(v, d))
    }

    #[inline]
    pub fn out_degree(&self, v: usize) -> usize {
        self.deg[v] as usize
    }

    /// The next existing direction after `current` in the cyclic routing
    /// sequence, skipping directions absent at boundary vertices.
    pub fn next_direction(
        &self,
        order: RoutingOrder,
        v: usize,
        current: Direction,
    ) -> Result<Direction> {
        if !self.has_direction(v, current) {
            return Err(Error::DirectionUnavailable(current, v));
        }
        let seq = order.sequence();
        let start = order.position(current);
        for k in 1..=4 {
            let d = seq[(start + k) % 4];
            if self.has_direction(v, d) {
                return Ok(d);
            }
        }
        unreachable!("current direction exists, so the scan terminates");
    }
}
