//! The single-chip rotor-router state, the step operator, and detection of
//! the unique cycle through the chip.

use crate::error::{Error, Result};
use crate::lattice::{Direction, Lattice, RoutingOrder, Topology};
use serde::{Deserialize, Serialize};

/// Length-2 cycles are dimers, longer ones contours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CycleKind {
    Dimer,
    Contour,
}

/// Orientation of a contractible contour in the y-North frame. Positive
/// shoelace area is counter-clockwise; dimers and non-contractible torus
/// cycles have no orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Cw,
    Ccw,
    Undefined,
}

/// The unique directed cycle through the chip of a unicycle state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleInfo {
    /// Cycle vertices in traversal order, starting at the chip.
    pub vertices: Vec<usize>,
    pub kind: CycleKind,
    /// Net torus wraps in (x, y); always (0, 0) on a planar grid.
    pub winding: (i64, i64),
    pub orientation: Orientation,
    /// Signed shoelace area (CCW positive); 0 for dimers, meaningful only
    /// when the cycle is contractible.
    pub area: i64,
}

impl CycleInfo {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Rotor configuration plus chip position, the pair (rho, v).
///
/// `unwrapped` accumulates the chip displacement without torus wrapping,
/// for diffusion measurements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotorState {
    pub arrows: Vec<Direction>,
    pub chip: usize,
    pub unwrapped: (i64, i64),
}

impl RotorState {
    /// Validates that every arrow points along an existing outgoing edge.
    pub fn new(lattice: &Lattice, arrows: Vec<Direction>, chip: usize) -> Result<RotorState> {
        if arrows.len() != lattice.num_vertices() {
            return Err(Error::Input(format!(
                "expected {} arrows, got {}",
                lattice.num_vertices(),
                arrows.len()
            )));
        }
        lattice.check_vertex(chip)?;
        for (v, &d) in arrows.iter().enumerate() {
            if !lattice.has_direction(v, d) {
                return Err(Error::DirectionUnavailable(d, v));
            }
        }
        Ok(RotorState {
            arrows,
            chip,
            unwrapped: (0, 0),
        })
    }

    /// One rotor-router step: advance the arrow at the chip to the next
    /// direction in the routing order, then move the chip along the new
    /// arrow. Returns the direction moved.
    #[inline]
    pub fn step(&mut self, lattice: &Lattice, order: RoutingOrder) -> Direction {
        let v = self.chip;
        let next = lattice
            .next_direction(order, v, self.arrows[v])
            .expect("rotor arrows stay on existing edges");
        self.arrows[v] = next;
        self.chip = lattice
            .neighbor(v, next)
            .expect("next_direction yields an existing edge");
        self.unwrapped.0 += next.dx();
        self.unwrapped.1 += next.dy();
        next
    }

    /// O(1) check whether the cycle through the chip is a dimer. Valid for
    /// unicycle states, where the chip lies on the unique cycle.
    #[inline]
    pub fn is_dimer(&self, lattice: &Lattice) -> bool {
        let v = self.chip;
        let w = lattice
            .neighbor(v, self.arrows[v])
            .expect("rotor arrows stay on existing edges");
        lattice.neighbor(w, self.arrows[w]) == Some(v)
    }

    #[inline]
    pub fn cycle_kind(&self, lattice: &Lattice) -> CycleKind {
        if self.is_dimer(lattice) {
            CycleKind::Dimer
        } else {
            CycleKind::Contour
        }
    }

    /// Follows arrows from the chip until first return and classifies the
    /// cycle. Errors if the walk does not close within |V| steps, which
    /// signals a transient or corrupted state.
    pub fn find_cycle(&self, lattice: &Lattice) -> Result<CycleInfo> {
        let cap = lattice.num_vertices();
        let mut vertices = vec![self.chip];
        // Unwrapped walk coordinates, for winding and shoelace.
        let mut pts: Vec<(i64, i64)> = vec![(0, 0)];
        let mut pos = (0i64, 0i64);
        let mut v = self.chip;
        loop {
            let d = self.arrows[v];
            v = lattice
                .neighbor(v, d)
                .ok_or(Error::DirectionUnavailable(d, v))?;
            pos.0 += d.dx();
            pos.1 += d.dy();
            if v == self.chip {
                break;
            }
            if vertices.len() == cap {
                return Err(Error::NotAUnicycle(cap));
            }
            vertices.push(v);
            pts.push(pos);
        }

        let s = vertices.len();
        let kind = if s == 2 {
            CycleKind::Dimer
        } else {
            CycleKind::Contour
        };
        let winding = match lattice.topology() {
            Topology::Torus { m, n } => (pos.0 / m as i64, pos.1 / n as i64),
            Topology::Planar { .. } => (0, 0),
        };

        let (area, orientation) = if winding == (0, 0) && s > 2 {
            let mut twice_area = 0i64;
            for i in 0..s {
                let (x0, y0) = pts[i];
                let (x1, y1) = pts[(i + 1) % s];
                twice_area += x0 * y1 - x1 * y0;
            }
            let area = twice_area / 2;
            let orientation = if area > 0 {
                Orientation::Ccw
            } else {
                Orientation::Cw
            };
            (area, orientation)
        } else {
            (0, Orientation::Undefined)
        };

        Ok(CycleInfo {
            vertices,
            kind,
            winding,
            orientation,
            area,
        })
    }

    /// Full validation of the unicycle property: the arrow functional graph
    /// has exactly one cycle, every vertex reaches it, and the chip lies on
    /// it. O(|V|); `find_cycle` is the cheap path used during tours.
    pub fn is_unicycle(&self, lattice: &Lattice) -> bool {
        let n = lattice.num_vertices();
        let next = |v: usize| -> usize {
            match lattice.neighbor(v, self.arrows[v]) {
                Some(w) => w,
                None => usize::MAX,
            }
        };
        let mut visited = vec![false; n];
        let mut mark = vec![usize::MAX; n];
        let mut on_cycle = vec![false; n];
        let mut cycles = 0usize;
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut v = start;
            while v != usize::MAX && !visited[v] && mark[v] != start {
                mark[v] = start;
                v = next(v);
            }
            if v == usize::MAX {
                return false; // arrow leaves the grid: corrupt state
            }
            if !visited[v] && mark[v] == start {
                // found a fresh cycle through v
                cycles += 1;
                let mut u = v;
                loop {
                    on_cycle[u] = true;
                    visited[u] = true;
                    u = next(u);
                    if u == v {
                        break;
                    }
                }
            }
            let mut u = start;
            while !visited[u] {
                visited[u] = true;
                u = next(u);
            }
        }
        cycles == 1 && on_cycle[self.chip]
    }

    pub fn snapshot(&self, lattice: &Lattice) -> Snapshot {
        Snapshot {
            topology: lattice.topology(),
            arrows: self.arrows.iter().map(|d| d.to_char()).collect(),
            chip: self.chip,
        }
    }
}

/// Flat serializable record of a rotor state, used for golden tests and
/// experiment resume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(flatten)]
    pub topology: Topology,
    /// One of N/E/S/W per vertex, in vertex-id order.
    pub arrows: String,
    pub chip: usize,
}

impl Snapshot {
    pub fn restore(&self) -> Result<(Lattice, RotorState)> {
        let lattice = Lattice::from_topology(self.topology)?;
        let arrows: Option<Vec<Direction>> =
            self.arrows.chars().map(Direction::from_char).collect();
        let arrows = arrows.ok_or_else(|| {
            Error::Snapshot(format!(
                "arrow string contains invalid characters: {}",
                self.arrows
            ))
        })?;
        let state = RotorState::new(&lattice, arrows, self.chip)?;
        Ok((lattice, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::RoutingOrder::{Clockwise, Cross};
    use Direction::*;

    fn torus5() -> Lattice {
        Lattice::torus(5, 5).unwrap()
    }

    /// All arrows North except where overridden; fine for step tests.
    fn state_with(lat: &Lattice, overrides: &[(usize, Direction)], chip: usize) -> RotorState {
        let mut arrows = vec![North; lat.num_vertices()];
        for &(v, d) in overrides {
            arrows[v] = d;
        }
        RotorState::new(lat, arrows, chip).unwrap()
    }

    #[test]
    fn step_follows_routing_order() {
        let lat = torus5();
        let mut st = state_with(&lat, &[(0, North)], 0);
        let moved = st.step(&lat, Clockwise);
        assert_eq!(moved, East);
        assert_eq!(st.arrows[0], East);
        assert_eq!(st.chip, lat.vertex_id(1, 0));
        assert_eq!(st.unwrapped, (1, 0));

        let mut st = state_with(&lat, &[(0, West)], 0);
        assert_eq!(st.step(&lat, Clockwise), North);
        assert_eq!(st.chip, lat.vertex_id(0, 1));

        let mut st = state_with(&lat, &[(0, North)], 0);
        assert_eq!(st.step(&lat, Cross), South);
        assert_eq!(st.chip, lat.vertex_id(0, 4));
        assert_eq!(st.unwrapped, (0, -1));
    }

    #[test]
    fn step_changes_one_arrow() {
        let lat = torus5();
        let mut st = state_with(&lat, &[], 7);
        let before = st.arrows.clone();
        let chip = st.chip;
        st.step(&lat, Clockwise);
        let changed: Vec<usize> = (0..before.len())
            .filter(|&v| before[v] != st.arrows[v])
            .collect();
        assert_eq!(changed, vec![chip]);
    }

    #[test]
    fn find_cycle_dimer() {
        let lat = torus5();
        let v = lat.vertex_id(1, 1);
        let w = lat.vertex_id(2, 1);
        let st = state_with(&lat, &[(v, East), (w, West)], v);
        let c = st.find_cycle(&lat).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.kind, CycleKind::Dimer);
        assert_eq!(c.orientation, Orientation::Undefined);
        assert!(st.is_dimer(&lat));
    }

    #[test]
    fn find_cycle_unit_square_ccw() {
        let lat = torus5();
        // (0,0) -> (1,0) -> (1,1) -> (0,1) -> (0,0)
        let st = state_with(
            &lat,
            &[
                (lat.vertex_id(0, 0), East),
                (lat.vertex_id(1, 0), North),
                (lat.vertex_id(1, 1), West),
                (lat.vertex_id(0, 1), South),
            ],
            0,
        );
        let c = st.find_cycle(&lat).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.kind, CycleKind::Contour);
        assert_eq!(c.winding, (0, 0));
        assert_eq!(c.orientation, Orientation::Ccw);
        assert_eq!(c.area, 1);
    }

    #[test]
    fn find_cycle_noncontractible_loop() {
        let lat = torus5();
        // straight East loop along row y=2
        let overrides: Vec<(usize, Direction)> =
            (0..5).map(|x| (lat.vertex_id(x, 2), East)).collect();
        let st = state_with(&lat, &overrides, lat.vertex_id(0, 2));
        let c = st.find_cycle(&lat).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.kind, CycleKind::Contour);
        assert_eq!(c.winding, (1, 0));
        assert_eq!(c.orientation, Orientation::Undefined);
    }

    #[test]
    fn find_cycle_purity() {
        let lat = torus5();
        let st = state_with(&lat, &[(0, East), (1, West)], 0);
        assert_eq!(st.find_cycle(&lat).unwrap(), st.find_cycle(&lat).unwrap());
    }

    #[test]
    fn is_unicycle_cases() {
        let lat = Lattice::torus(3, 3).unwrap();
        // Spanning tree toward vertex 0 plus an arrow at 0: a unicycle.
        // Tree: everything routes West/South toward (0,0).
        let mut arrows = vec![North; 9];
        for y in 0..3 {
            for x in 0..3 {
                let v = lat.vertex_id(x, y);
                arrows[v] = if x > 0 { West } else { South };
            }
        }
        arrows[0] = East;
        let st = RotorState::new(&lat, arrows.clone(), 0).unwrap();
        assert!(st.is_unicycle(&lat));

        // Chip not on the cycle.
        let st = RotorState::new(&lat, arrows.clone(), lat.vertex_id(2, 2)).unwrap();
        assert!(!st.is_unicycle(&lat));

        // Two disjoint cycles.
        let mut arrows2 = arrows;
        let a = lat.vertex_id(1, 2);
        let b = lat.vertex_id(2, 2);
        arrows2[a] = East;
        arrows2[b] = West;
        let st = RotorState::new(&lat, arrows2, 0).unwrap();
        assert!(!st.is_unicycle(&lat));
    }

    #[test]
    fn snapshot_roundtrip() {
        let lat = Lattice::planar(3, 2).unwrap();
        let mut arrows = Vec::new();
        for v in 0..lat.num_vertices() {
            arrows.push(lat.directions(v).next().unwrap());
        }
        let st = RotorState::new(&lat, arrows, 4).unwrap();
        let snap = st.snapshot(&lat);
        let json = serde_json::to_string(&snap).unwrap();
        let back: Snapshot = serde_json::from_str(&json).unwrap();
        let (lat2, st2) = back.restore().unwrap();
        assert_eq!(lat2, lat);
        assert_eq!(st2.arrows, st.arrows);
        assert_eq!(st2.chip, st.chip);
    }
}
