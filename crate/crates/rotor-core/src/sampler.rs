//! Uniform sampling of unicycles: Wilson's loop-erased random walk sampler
//! for uniform spanning trees, plus a uniform chip arrow.

use crate::error::Result;
use crate::lattice::{Direction, Lattice};
use crate::rotor::RotorState;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reproducible counter-based randomness: identical (seed, stream) pairs
/// yield identical sequences on every platform, and distinct streams are
/// independent by construction of the underlying generator.
pub struct SeededRng {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> SeededRng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        SeededRng { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// Uniform draws from 0..4, unpacking two bits at a time from buffered
/// 64-bit words. Exact (4 divides 2^64) and much cheaper than a generic
/// ranged draw in the Wilson inner loop.
struct QuadDraw {
    bits: u64,
    left: u8,
}

impl QuadDraw {
    fn new() -> QuadDraw {
        QuadDraw { bits: 0, left: 0 }
    }

    #[inline]
    fn next(&mut self, rng: &mut impl RngCore) -> usize {
        if self.left == 0 {
            self.bits = rng.next_u64();
            self.left = 32;
        }
        let r = (self.bits & 3) as usize;
        self.bits >>= 2;
        self.left -= 1;
        r
    }
}

/// A spanning tree oriented toward its root: one parent direction per
/// non-root vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningTree {
    parents: Vec<Direction>,
    root: usize,
}

impl SpanningTree {
    pub fn root(&self) -> usize {
        self.root
    }

    /// Parent direction of `v`; `None` for the root.
    pub fn parent_direction(&self, v: usize) -> Option<Direction> {
        if v == self.root {
            None
        } else {
            Some(self.parents[v])
        }
    }

    pub fn num_edges(&self) -> usize {
        self.parents.len() - 1
    }
}

/// Wilson's algorithm: repeatedly run a simple random walk from the lowest
/// unattached vertex, loop-erase it by next-pointer overwriting, and attach
/// the erased path to the tree. Exactly uniform over spanning trees.
pub fn sample_ust(lattice: &Lattice, root: usize, rng: &mut impl RngCore) -> Result<SpanningTree> {
    lattice.check_vertex(root)?;
    let n = lattice.num_vertices();
    let mut in_tree = vec![false; n];
    in_tree[root] = true;
    let mut next_dir = vec![Direction::North; n];
    let regular = lattice.is_torus();
    let mut quad = QuadDraw::new();

    for start in 0..n {
        if in_tree[start] {
            continue;
        }
        let mut v = start;
        while !in_tree[v] {
            let d = if regular {
                Direction::ALL[quad.next(rng)]
            } else {
                let deg = lattice.out_degree(v);
                let k = rng.random_range(0..deg);
                lattice.directions(v).nth(k).expect("degree counted above")
            };
            next_dir[v] = d;
            v = lattice.neighbor(v, d).expect("chosen among existing edges");
        }
        let mut v = start;
        while !in_tree[v] {
            in_tree[v] = true;
            v = lattice.neighbor(v, next_dir[v]).expect("walked edge");
        }
    }

    Ok(SpanningTree {
        parents: next_dir,
        root,
    })
}

/// A uniform unicycle with the chip at `chip`: a uniform spanning tree
/// rooted at the chip plus a uniformly random outgoing arrow there.
pub fn sample_unicycle(
    lattice: &Lattice,
    chip: usize,
    rng: &mut impl RngCore,
) -> Result<RotorState> {
    let tree = sample_ust(lattice, chip, rng)?;
    let mut arrows = tree.parents;
    let deg = lattice.out_degree(chip);
    let k = rng.random_range(0..deg);
    arrows[chip] = lattice
        .directions(chip)
        .nth(k)
        .expect("degree counted above");
    RotorState::new(lattice, arrows, chip)
}
