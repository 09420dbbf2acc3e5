//! Euler tours and sub-tours: cycle-kind sequences, the contour-dimer
//! balance Delta, pair correlations, mean-square displacement, and the
//! planar contour-reversal experiment.
//!
//! Sequence conventions. A recorded (sub-)tour includes its first state and
//! excludes its terminal state, so a full Euler tour records exactly m
//! states. Reversal reports use the closed convention that also counts the
//! terminal reversed-contour state; that is the convention in which the
//! planar reversal identity Delta = -1 holds.

use crate::error::{Error, Result};
use crate::lattice::{Direction, Lattice, RoutingOrder};
use crate::rotor::{CycleInfo, CycleKind, Orientation, RotorState};
use crate::sampler::{sample_unicycle, SeededRng};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Per-step record of a (sub-)tour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TourLog {
    /// Cycle kind of each recorded state, first state included, terminal
    /// state excluded.
    pub kinds: Vec<CycleKind>,
    /// Squared unwrapped chip displacement after t steps, t = 0..=steps.
    pub r2: Vec<u64>,
    /// Set when a sub-tour hit its step bound before its stop predicate.
    pub truncated: bool,
}

impl TourLog {
    pub fn steps(&self) -> usize {
        self.kinds.len()
    }

    pub fn dimers(&self) -> usize {
        self.kinds
            .iter()
            .filter(|&&k| k == CycleKind::Dimer)
            .count()
    }

    pub fn contours(&self) -> usize {
        self.kinds.len() - self.dimers()
    }

    /// Delta = #contours - #dimers over the recorded states.
    pub fn delta(&self) -> i64 {
        self.contours() as i64 - self.dimers() as i64
    }

    /// Delta(t) for t = 0..=steps; changes by exactly +-1 per state.
    pub fn delta_trajectory(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.kinds.len() + 1);
        let mut d = 0i64;
        out.push(d);
        for &k in &self.kinds {
            d += if k == CycleKind::Contour { 1 } else { -1 };
            out.push(d);
        }
        out
    }
}

/// Counts of successive cycle-kind pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub dd: u64,
    pub dc: u64,
    pub cd: u64,
    pub cc: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.dd + self.dc + self.cd + self.cc
    }

    pub fn merge(self, o: PairCounts) -> PairCounts {
        PairCounts {
            dd: self.dd + o.dd,
            dc: self.dc + o.dc,
            cd: self.cd + o.cd,
            cc: self.cc + o.cc,
        }
    }

    #[inline]
    fn bump(&mut self, a: CycleKind, b: CycleKind) {
        use CycleKind::*;
        match (a, b) {
            (Dimer, Dimer) => self.dd += 1,
            (Dimer, Contour) => self.dc += 1,
            (Contour, Dimer) => self.cd += 1,
            (Contour, Contour) => self.cc += 1,
        }
    }

    /// Relative frequencies (dd, dc, cd, cc).
    pub fn frequencies(&self) -> [f64; 4] {
        let t = self.total() as f64;
        [
            self.dd as f64 / t,
            self.dc as f64 / t,
            self.cd as f64 / t,
            self.cc as f64 / t,
        ]
    }
}

/// Pairing convention: full tours are periodic, so the wrap-around pair
/// (last state, first state) is included; sub-tours use linear pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    Cyclic,
    Linear,
}

/// Empirical pair frequencies over successive states of a log.
pub fn accumulate_pair_correlations(log: &TourLog, mode: PairMode) -> Result<PairCounts> {
    if log.steps() < 2 {
        return Err(Error::Input(format!(
            "pair correlations need at least 2 recorded states, got {}",
            log.steps()
        )));
    }
    let mut counts = PairCounts::default();
    for w in log.kinds.windows(2) {
        counts.bump(w[0], w[1]);
    }
    if mode == PairMode::Cyclic {
        counts.bump(*log.kinds.last().unwrap(), log.kinds[0]);
    }
    Ok(counts)
}

/// Runs the full Euler tour of exactly m = |directed edges| steps and
/// verifies the return invariants: the state closes bit-for-bit, every
/// rotor makes one full turn, and every directed edge is traversed once.
pub fn run_euler_tour(
    state: &mut RotorState,
    lattice: &Lattice,
    order: RoutingOrder,
) -> Result<TourLog> {
    let m = lattice.num_directed_edges();
    let initial_arrows = state.arrows.clone();
    let initial_chip = state.chip;
    let origin = state.unwrapped;

    let n = lattice.num_vertices();
    let mut turns = vec![0u32; n];
    let mut edge_visits = vec![0u32; 4 * n];
    let mut kinds = Vec::with_capacity(m);
    let mut r2 = Vec::with_capacity(m + 1);

    for _ in 0..m {
        kinds.push(state.cycle_kind(lattice));
        let dx = state.unwrapped.0 - origin.0;
        let dy = state.unwrapped.1 - origin.1;
        r2.push((dx * dx + dy * dy) as u64);
        let v = state.chip;
        turns[v] += 1;
        let moved = state.step(lattice, order);
        edge_visits[4 * v + moved.index()] += 1;
    }
    let dx = state.unwrapped.0 - origin.0;
    let dy = state.unwrapped.1 - origin.1;
    r2.push((dx * dx + dy * dy) as u64);

    if state.arrows != initial_arrows || state.chip != initial_chip {
        return Err(Error::TourInvariant(format!(
            "state did not return to the initial unicycle after {m} steps"
        )));
    }
    for v in 0..n {
        if turns[v] as usize != lattice.out_degree(v) {
            return Err(Error::TourInvariant(format!(
                "rotor at vertex {v} advanced {} times, expected {}",
                turns[v],
                lattice.out_degree(v)
            )));
        }
        for d in Direction::ALL {
            let expected = u32::from(lattice.has_direction(v, d));
            if edge_visits[4 * v + d.index()] != expected {
                return Err(Error::TourInvariant(format!(
                    "edge {v}->{d:?} traversed {} times",
                    edge_visits[4 * v + d.index()]
                )));
            }
        }
    }

    Ok(TourLog {
        kinds,
        r2,
        truncated: false,
    })
}

/// Steps until `stop` matches the current state or `max_steps` is reached.
/// The first state is recorded, the stopping state is not. Hitting the
/// bound sets the `truncated` flag rather than failing.
pub fn run_sub_tour(
    state: &mut RotorState,
    lattice: &Lattice,
    order: RoutingOrder,
    mut stop: impl FnMut(&RotorState) -> bool,
    max_steps: usize,
) -> TourLog {
    let origin = state.unwrapped;
    let mut kinds = Vec::new();
    let mut r2 = vec![0u64];
    let mut truncated = false;
    loop {
        if stop(state) {
            break;
        }
        if kinds.len() == max_steps {
            truncated = true;
            break;
        }
        kinds.push(state.cycle_kind(lattice));
        state.step(lattice, order);
        let dx = state.unwrapped.0 - origin.0;
        let dy = state.unwrapped.1 - origin.1;
        r2.push((dx * dx + dy * dy) as u64);
    }
    if kinds.is_empty() {
        r2.truncate(1);
    }
    TourLog {
        kinds,
        r2,
        truncated,
    }
}

/// Arrow configuration equal to `arrows` except that the given cycle is
/// traversed in the opposite direction.
pub fn reversed_arrows(arrows: &[Direction], cycle: &CycleInfo) -> Vec<Direction> {
    let s = cycle.vertices.len();
    let mut out = arrows.to_vec();
    for i in 0..s {
        let v = cycle.vertices[i];
        let w = cycle.vertices[(i + 1) % s];
        out[w] = arrows[v].opposite();
    }
    out
}

/// Steps `state` until its arrows equal `target` and the chip sits at
/// `target_chip`, invoking `on_state` for every state before stepping.
/// Detection is O(1) per step via a running mismatch count.
fn run_to_target(
    state: &mut RotorState,
    lattice: &Lattice,
    order: RoutingOrder,
    target: &[Direction],
    target_chip: usize,
    max_steps: usize,
    mut on_state: impl FnMut(&RotorState),
) -> Result<usize> {
    let mut mismatches = state
        .arrows
        .iter()
        .zip(target)
        .filter(|(a, b)| a != b)
        .count();
    let mut steps = 0usize;
    while mismatches != 0 || state.chip != target_chip {
        if steps == max_steps {
            return Err(Error::ReversalNotReached(max_steps));
        }
        on_state(state);
        let v = state.chip;
        let was_ok = state.arrows[v] == target[v];
        state.step(lattice, order);
        let is_ok = state.arrows[v] == target[v];
        match (was_ok, is_ok) {
            (true, false) => mismatches += 1,
            (false, true) => mismatches -= 1,
            _ => {}
        }
        steps += 1;
    }
    Ok(steps)
}

/// Even-odd ray casting for a lattice point strictly off the polygon.
/// All polygon edges are axis-aligned unit steps, so only vertical edges
/// can cross the horizontal ray.
fn point_in_polygon(p: (i64, i64), poly: &[(i64, i64)]) -> bool {
    let (px, py) = p;
    let mut inside = false;
    for i in 0..poly.len() {
        let (x1, y1) = poly[i];
        let (_, y2) = poly[(i + 1) % poly.len()];
        if (y1 > py) != (y2 > py) && x1 > px {
            inside = !inside;
        }
    }
    inside
}

/// Measurements from one contour reversal on a planar grid.
#[derive(Debug, Clone)]
pub struct ReversalReport {
    /// #contours - #dimers from the initial contour state up to and
    /// including the reversed contour state.
    pub delta: i64,
    pub steps_taken: usize,
    /// Rotor advances per vertex over the run.
    pub rotor_turns: Vec<u32>,
    pub external_changed: bool,
    pub internal_full_rotation: bool,
    pub cycle_reversed: bool,
    /// Enclosed plaquettes of the initial contour.
    pub cycle_area: i64,
    /// Areas of the sub-contours created at the three induction stages;
    /// their sum equals `cycle_area - 1`.
    pub stage_areas: [i64; 3],
}

/// Runs the walk from a clockwise-contour state until the state that
/// differs from the initial one only by the reversed contour, and measures
/// which rotors moved. Requires clockwise routing on a planar grid.
pub fn planar_reversal_experiment(
    lattice: &Lattice,
    state: &RotorState,
    order: RoutingOrder,
) -> Result<ReversalReport> {
    if lattice.is_torus() {
        return Err(Error::Input(
            "reversal experiment runs on planar grids".into(),
        ));
    }
    if order != RoutingOrder::Clockwise {
        return Err(Error::Input(
            "reversal experiment requires clockwise routing".into(),
        ));
    }
    let cycle = state.find_cycle(lattice)?;
    if cycle.kind != CycleKind::Contour || cycle.orientation != Orientation::Cw {
        return Err(Error::Input(
            "reversal experiment requires a clockwise contour through the chip".into(),
        ));
    }

    let target = reversed_arrows(&state.arrows, &cycle);
    let cap = 4 * lattice.num_directed_edges();
    let mut work = state.clone();
    let mut turns = vec![0u32; lattice.num_vertices()];
    let mut delta = 0i64;
    let steps_taken = run_to_target(&mut work, lattice, order, &target, state.chip, cap, |st| {
        turns[st.chip] += 1;
        delta += if st.cycle_kind(lattice) == CycleKind::Contour {
            1
        } else {
            -1
        };
    })?;
    // Closed convention: the terminal reversed contour counts too.
    debug_assert_eq!(work.cycle_kind(lattice), CycleKind::Contour);
    delta += 1;
    let cycle_reversed = work.arrows == target && work.chip == state.chip;

    // Classify vertices against the contour polygon.
    let mut on_cycle = vec![false; lattice.num_vertices()];
    for &v in &cycle.vertices {
        on_cycle[v] = true;
    }
    let poly: Vec<(i64, i64)> = cycle
        .vertices
        .iter()
        .map(|&v| {
            let (x, y) = lattice.coords(v);
            (x as i64, y as i64)
        })
        .collect();
    let mut external_changed = false;
    let mut internal_full_rotation = true;
    for v in 0..lattice.num_vertices() {
        if on_cycle[v] {
            continue;
        }
        let (x, y) = lattice.coords(v);
        if point_in_polygon((x as i64, y as i64), &poly) {
            if turns[v] as usize != lattice.out_degree(v) {
                internal_full_rotation = false;
            }
        } else if turns[v] != 0 || work.arrows[v] != state.arrows[v] {
            external_changed = true;
        }
    }

    let stage_areas = stage_decomposition(lattice, state, order, cap)?;

    Ok(ReversalReport {
        delta,
        steps_taken,
        rotor_turns: turns,
        external_changed,
        internal_full_rotation,
        cycle_reversed,
        cycle_area: cycle.area.abs(),
        stage_areas,
    })
}

/// Replays the reversal stage by stage. The four boundary steps trace the
/// unit square on the interior side of the chip's contour edge; each of the
/// first three either creates a dimer or a sub-contour that is itself
/// reversed before the next boundary step.
fn stage_decomposition(
    lattice: &Lattice,
    state: &RotorState,
    order: RoutingOrder,
    cap: usize,
) -> Result<[i64; 3]> {
    let d = state.arrows[state.chip];
    let a = d.clockwise_next();
    let expected = [a, d, a.opposite(), d.opposite()];
    let mut st = state.clone();
    let mut areas = [0i64; 3];
    for i in 0..3 {
        let moved = st.step(lattice, order);
        if moved != expected[i] {
            return Err(Error::TourInvariant(format!(
                "stage {} boundary step moved {moved:?}, expected {:?}",
                i + 1,
                expected[i]
            )));
        }
        let cyc = st.find_cycle(lattice)?;
        if cyc.kind == CycleKind::Contour {
            areas[i] = cyc.area.abs();
            let sub_target = reversed_arrows(&st.arrows, &cyc);
            let chip = st.chip;
            run_to_target(&mut st, lattice, order, &sub_target, chip, cap, |_| {})?;
        }
    }
    let moved = st.step(lattice, order);
    if moved != expected[3] || st.chip != state.chip {
        return Err(Error::TourInvariant(
            "stage 4 did not return the chip to its origin".into(),
        ));
    }
    Ok(areas)
}

/// Histogram and moments of the full-tour Delta over uniform initial
/// unicycles. Samples are independent seeded streams, so the result does
/// not depend on the parallelism degree.
#[derive(Debug, Clone)]
pub struct DeltaDistribution {
    pub histogram: BTreeMap<i64, u64>,
    pub n: usize,
    pub mean: f64,
    /// Central second moment (variance).
    pub m2: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub min: i64,
    pub max: i64,
}

impl DeltaDistribution {
    fn from_samples(deltas: &[i64]) -> DeltaDistribution {
        let n = deltas.len();
        let nf = n as f64;
        let mut histogram = BTreeMap::new();
        for &d in deltas {
            *histogram.entry(d).or_insert(0u64) += 1;
        }
        let mean = deltas.iter().map(|&d| d as f64).sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0f64, 0.0f64, 0.0f64);
        for &d in deltas {
            let x = d as f64 - mean;
            m2 += x * x;
            m3 += x * x * x;
            m4 += x * x * x * x;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        DeltaDistribution {
            histogram,
            n,
            mean,
            m2,
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
            min: *deltas.iter().min().unwrap(),
            max: *deltas.iter().max().unwrap(),
        }
    }

    /// Standard error of the sample mean.
    pub fn mean_std_error(&self) -> f64 {
        (self.m2 / self.n as f64).sqrt()
    }
}

#[inline]
fn fast_tour_delta(
    state: &mut RotorState,
    lattice: &Lattice,
    order: RoutingOrder,
    steps: usize,
) -> i64 {
    let mut delta = 0i64;
    for _ in 0..steps {
        delta += if state.is_dimer(lattice) { -1 } else { 1 };
        state.step(lattice, order);
    }
    delta
}

/// Full-tour Delta over `n_samples` uniform unicycles with the chip at
/// `chip`; one seeded stream per sample index.
pub fn delta_distribution(
    lattice: &Lattice,
    order: RoutingOrder,
    chip: usize,
    n_samples: usize,
    seed: u64,
) -> Result<DeltaDistribution> {
    if n_samples == 0 {
        return Err(Error::Input("n_samples must be at least 1".into()));
    }
    lattice.check_vertex(chip)?;
    let m = lattice.num_directed_edges();
    let deltas: Vec<i64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|stream| {
            let mut rng = SeededRng::new(seed, stream);
            let mut st = sample_unicycle(lattice, chip, &mut rng).expect("chip validated");
            fast_tour_delta(&mut st, lattice, order, m)
        })
        .collect();
    Ok(DeltaDistribution::from_samples(&deltas))
}

/// Pair-kind counts over `n_tours` full tours (cyclic pairs, m per tour).
pub fn pair_correlation_mc(
    lattice: &Lattice,
    order: RoutingOrder,
    chip: usize,
    n_tours: usize,
    seed: u64,
) -> Result<PairCounts> {
    if n_tours == 0 {
        return Err(Error::Input("n_tours must be at least 1".into()));
    }
    lattice.check_vertex(chip)?;
    let m = lattice.num_directed_edges();
    let counts = (0..n_tours as u64)
        .into_par_iter()
        .map(|stream| {
            let mut rng = SeededRng::new(seed, stream);
            let mut st = sample_unicycle(lattice, chip, &mut rng).expect("chip validated");
            let mut counts = PairCounts::default();
            let first = st.cycle_kind(lattice);
            let mut prev = first;
            st.step(lattice, order);
            for _ in 1..m {
                let k = st.cycle_kind(lattice);
                counts.bump(prev, k);
                prev = k;
                st.step(lattice, order);
            }
            counts.bump(prev, first);
            counts
        })
        .reduce(PairCounts::default, PairCounts::merge);
    Ok(counts)
}

/// Mean of r(t)^2 over tours at each t <= t_max.
#[derive(Debug, Clone)]
pub struct MsdCurve {
    pub mean_r2: Vec<f64>,
    pub n_samples: usize,
}

impl MsdCurve {
    /// Least-squares slope (and intercept) of mean r^2 against t over the
    /// window t1..=t2.
    pub fn fit_slope(&self, t1: usize, t2: usize) -> Result<(f64, f64)> {
        fit_slope(&self.mean_r2, t1, t2)
    }
}

pub fn fit_slope(series: &[f64], t1: usize, t2: usize) -> Result<(f64, f64)> {
    if t1 >= t2 || t2 >= series.len() {
        return Err(Error::Input(format!(
            "bad fit window [{t1}, {t2}] for series of length {}",
            series.len()
        )));
    }
    let n = (t2 - t1 + 1) as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (t, &y) in series.iter().enumerate().take(t2 + 1).skip(t1) {
        let x = t as f64;
        st += x;
        sy += y;
        stt += x * x;
        sty += x * y;
    }
    let denom = n * stt - st * st;
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    Ok((slope, intercept))
}

/// Default fit window for an n x n torus: [1, n]. Beyond t ~ n the walk
/// starts organizing into the Euler tour and the growth of r(t)^2 drifts
/// away from its early-time rate, so the fit stays in the short-time
/// diffusive regime.
pub fn default_msd_window(n: usize) -> (usize, usize) {
    (1, n)
}

/// Averages r(t)^2 over per-tour logs; all logs must reach t_max.
pub fn msd_curve(logs: &[TourLog], t_max: usize) -> Result<MsdCurve> {
    if logs.is_empty() {
        return Err(Error::Input("msd_curve needs at least one tour log".into()));
    }
    for log in logs {
        if log.r2.len() <= t_max {
            return Err(Error::Input(format!(
                "log has only {} recorded displacements, t_max is {t_max}",
                log.r2.len() - 1
            )));
        }
    }
    let mut mean_r2 = vec![0.0f64; t_max + 1];
    for log in logs {
        for (t, v) in mean_r2.iter_mut().enumerate() {
            *v += log.r2[t] as f64;
        }
    }
    let nf = logs.len() as f64;
    mean_r2.iter_mut().for_each(|v| *v /= nf);
    Ok(MsdCurve {
        mean_r2,
        n_samples: logs.len(),
    })
}

/// Monte Carlo mean-square displacement: samples uniform unicycles and
/// averages r(t)^2 over the first t_max tour steps.
pub fn msd_mc(
    lattice: &Lattice,
    order: RoutingOrder,
    chip: usize,
    n_samples: usize,
    t_max: usize,
    seed: u64,
) -> Result<MsdCurve> {
    if n_samples == 0 {
        return Err(Error::Input("n_samples must be at least 1".into()));
    }
    lattice.check_vertex(chip)?;
    let sums: Vec<u64> = (0..n_samples as u64)
        .into_par_iter()
        .fold(
            || vec![0u64; t_max + 1],
            |mut acc, stream| {
                let mut rng = SeededRng::new(seed, stream);
                let mut st = sample_unicycle(lattice, chip, &mut rng).expect("chip validated");
                let origin = st.unwrapped;
                for (t, slot) in acc.iter_mut().enumerate() {
                    let dx = st.unwrapped.0 - origin.0;
                    let dy = st.unwrapped.1 - origin.1;
                    *slot += (dx * dx + dy * dy) as u64;
                    if t < t_max {
                        st.step(lattice, order);
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; t_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(MsdCurve {
        mean_r2: sums.iter().map(|&s| s as f64 / n_samples as f64).collect(),
        n_samples,
    })
}

/// Outcome of one conditioned conjecture sample.
enum ConjectureSample {
    Skipped,
    Accepted {
        second_delta: i64,
        additivity_ok: bool,
        first_delta_theorem: i64,
    },
    ReversalNotFound,
}

/// Evidence report for the second-segment balance on the torus.
#[derive(Debug, Clone)]
pub struct ConjectureReport {
    pub n_attempted: usize,
    pub n_accepted: usize,
    pub n_skipped: usize,
    pub reversal_not_found: usize,
    /// Delta over the segment from the reversed state back to the initial
    /// state (first state included, terminal excluded).
    pub histogram: BTreeMap<i64, u64>,
    pub min_second_delta: Option<i64>,
    pub additivity_violations: usize,
    /// Samples whose closed-convention first-segment Delta was not -1.
    pub first_delta_violations: usize,
}

/// Samples unicycles conditioned on a contractible clockwise contour, splits
/// the Euler tour at the reversed-contour state, and reports the Delta of
/// the second segment. The split is a true partition of the tour, so the
/// two segment Deltas add up to the full-tour Delta exactly.
pub fn conjecture_check(
    lattice: &Lattice,
    order: RoutingOrder,
    chip: usize,
    target_accepted: usize,
    max_attempts: usize,
    seed: u64,
) -> Result<ConjectureReport> {
    if !lattice.is_torus() {
        return Err(Error::Input("conjecture check runs on the torus".into()));
    }
    if order != RoutingOrder::Clockwise {
        return Err(Error::Input(
            "conjecture check requires clockwise routing".into(),
        ));
    }
    lattice.check_vertex(chip)?;
    let m = lattice.num_directed_edges();

    let mut report = ConjectureReport {
        n_attempted: 0,
        n_accepted: 0,
        n_skipped: 0,
        reversal_not_found: 0,
        histogram: BTreeMap::new(),
        min_second_delta: None,
        additivity_violations: 0,
        first_delta_violations: 0,
    };

    const BATCH: usize = 1024;
    let mut next_stream = 0u64;
    while report.n_accepted < target_accepted && report.n_attempted < max_attempts {
        let batch = BATCH.min(max_attempts - report.n_attempted);
        let results: Vec<ConjectureSample> = (next_stream..next_stream + batch as u64)
            .into_par_iter()
            .map(|stream| {
                let mut rng = SeededRng::new(seed, stream);
                let mut st = sample_unicycle(lattice, chip, &mut rng).expect("chip validated");
                let cyc = st
                    .find_cycle(lattice)
                    .expect("sampled states are unicycles");
                if cyc.kind != CycleKind::Contour
                    || cyc.winding != (0, 0)
                    || cyc.orientation != Orientation::Cw
                {
                    return ConjectureSample::Skipped;
                }
                let target = reversed_arrows(&st.arrows, &cyc);
                let mut mismatches = st
                    .arrows
                    .iter()
                    .zip(&target)
                    .filter(|(a, b)| a != b)
                    .count();
                let mut split_at: Option<usize> = None;
                let (mut delta1, mut delta2, mut delta_all) = (0i64, 0i64, 0i64);
                for t in 0..m {
                    if split_at.is_none() && t > 0 && mismatches == 0 && st.chip == chip {
                        split_at = Some(t);
                    }
                    let inc = if st.is_dimer(lattice) { -1 } else { 1 };
                    delta_all += inc;
                    if split_at.is_none() {
                        delta1 += inc;
                    } else {
                        delta2 += inc;
                    }
                    let v = st.chip;
                    let was_ok = st.arrows[v] == target[v];
                    st.step(lattice, order);
                    let is_ok = st.arrows[v] == target[v];
                    match (was_ok, is_ok) {
                        (true, false) => mismatches += 1,
                        (false, true) => mismatches -= 1,
                        _ => {}
                    }
                }
                if split_at.is_none() {
                    return ConjectureSample::ReversalNotFound;
                }
                ConjectureSample::Accepted {
                    second_delta: delta2,
                    additivity_ok: delta1 + delta2 == delta_all,
                    // The terminal reversed-contour state of the first
                    // segment counts in the closed convention.
                    first_delta_theorem: delta1 + 1,
                }
            })
            .collect();
        next_stream += batch as u64;
        report.n_attempted += batch;
        for r in results {
            if report.n_accepted == target_accepted {
                break;
            }
            match r {
                ConjectureSample::Skipped => report.n_skipped += 1,
                ConjectureSample::ReversalNotFound => report.reversal_not_found += 1,
                ConjectureSample::Accepted {
                    second_delta,
                    additivity_ok,
                    first_delta_theorem,
                } => {
                    report.n_accepted += 1;
                    *report.histogram.entry(second_delta).or_insert(0) += 1;
                    report.min_second_delta = Some(match report.min_second_delta {
                        Some(cur) => cur.min(second_delta),
                        None => second_delta,
                    });
                    if !additivity_ok {
                        report.additivity_violations += 1;
                    }
                    if first_delta_theorem != -1 {
                        report.first_delta_violations += 1;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Aggregate result of repeated planar reversal experiments on conditioned
/// samples.
#[derive(Debug, Clone, Default)]
pub struct PlanarCheckSummary {
    pub n_attempted: usize,
    pub n_accepted: usize,
    pub n_skipped: usize,
    pub delta_violations: usize,
    pub external_violations: usize,
    pub internal_violations: usize,
    pub reversal_failures: usize,
    pub stage_sum_violations: usize,
}

impl PlanarCheckSummary {
    pub fn all_passed(&self) -> bool {
        self.delta_violations == 0
            && self.external_violations == 0
            && self.internal_violations == 0
            && self.reversal_failures == 0
            && self.stage_sum_violations == 0
    }
}

/// Samples unicycles on a planar grid conditioned on a clockwise contour
/// and runs the reversal experiment on each.
pub fn planar_reversal_mc(
    lattice: &Lattice,
    chip: usize,
    target_accepted: usize,
    max_attempts: usize,
    seed: u64,
) -> Result<PlanarCheckSummary> {
    if lattice.is_torus() {
        return Err(Error::Input("planar check runs on planar grids".into()));
    }
    lattice.check_vertex(chip)?;
    let mut summary = PlanarCheckSummary::default();
    const BATCH: usize = 256;
    let mut next_stream = 0u64;
    while summary.n_accepted < target_accepted && summary.n_attempted < max_attempts {
        let batch = BATCH.min(max_attempts - summary.n_attempted);
        let results: Vec<Option<ReversalReport>> = (next_stream..next_stream + batch as u64)
            .into_par_iter()
            .map(|stream| {
                let mut rng = SeededRng::new(seed, stream);
                let st = sample_unicycle(lattice, chip, &mut rng).expect("chip validated");
                let cyc = st
                    .find_cycle(lattice)
                    .expect("sampled states are unicycles");
                if cyc.kind != CycleKind::Contour || cyc.orientation != Orientation::Cw {
                    return None;
                }
                Some(
                    planar_reversal_experiment(lattice, &st, RoutingOrder::Clockwise)
                        .expect("preconditions checked"),
                )
            })
            .collect();
        next_stream += batch as u64;
        summary.n_attempted += batch;
        for r in results {
            if summary.n_accepted == target_accepted {
                break;
            }
            match r {
                None => summary.n_skipped += 1,
                Some(rep) => {
                    summary.n_accepted += 1;
                    if rep.delta != -1 {
                        summary.delta_violations += 1;
                    }
                    if rep.external_changed {
                        summary.external_violations += 1;
                    }
                    if !rep.internal_full_rotation {
                        summary.internal_violations += 1;
                    }
                    if !rep.cycle_reversed {
                        summary.reversal_failures += 1;
                    }
                    if rep.stage_areas.iter().sum::<i64>() != rep.cycle_area - 1 {
                        summary.stage_sum_violations += 1;
                    }
                }
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::RoutingOrder::Clockwise;
    use crate::rotor::Snapshot;
    use std::collections::HashSet;
    use Direction::*;

    /// Clockwise unit-square contour spanning PlanarGrid(2,2):
    /// (0,0) -> (0,1) -> (1,1) -> (1,0) -> (0,0).
    fn cw_square_state() -> (Lattice, RotorState) {
        let lat = Lattice::planar(2, 2).unwrap();
        let arrows = vec![North, West, East, South]; // ids 0=(0,0) 1=(1,0) 2=(0,1) 3=(1,1)
        let st = RotorState::new(&lat, arrows, 0).unwrap();
        (lat, st)
    }

    #[test]
    fn euler_tour_closes_on_small_torus() {
        let lat = Lattice::torus(3, 3).unwrap();
        let mut rng = SeededRng::new(5, 0);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let before = st.clone();
        let log = run_euler_tour(&mut st, &lat, Clockwise).unwrap();
        assert_eq!(log.steps(), 36);
        assert_eq!(st.arrows, before.arrows);
        assert_eq!(st.chip, before.chip);
        assert_eq!(log.dimers() + log.contours(), 36);
        assert_eq!(log.r2[0], 0);
    }

    #[test]
    fn euler_tour_states_are_distinct() {
        let lat = Lattice::torus(3, 3).unwrap();
        let mut rng = SeededRng::new(6, 1);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let m = lat.num_directed_edges();
        let mut seen = HashSet::new();
        for _ in 0..m {
            let snap: Snapshot = st.snapshot(&lat);
            assert!(
                seen.insert((snap.arrows, snap.chip)),
                "state repeated early"
            );
            st.step(&lat, Clockwise);
        }
    }

    #[test]
    fn delta_trajectory_steps_by_one() {
        let lat = Lattice::torus(4, 4).unwrap();
        let mut rng = SeededRng::new(8, 0);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let log = run_euler_tour(&mut st, &lat, Clockwise).unwrap();
        let traj = log.delta_trajectory();
        for w in traj.windows(2) {
            assert_eq!((w[1] - w[0]).abs(), 1);
        }
        assert_eq!(*traj.last().unwrap(), log.delta());
    }

    #[test]
    fn sub_tour_base_case() {
        let (lat, st) = cw_square_state();
        let cyc = st.find_cycle(&lat).unwrap();
        assert_eq!(cyc.orientation, Orientation::Cw);
        assert_eq!(cyc.area, -1);
        let target = reversed_arrows(&st.arrows, &cyc);
        let mut work = st.clone();
        let log = run_sub_tour(
            &mut work,
            &lat,
            Clockwise,
            |s| s.arrows == target && s.chip == 0,
            100,
        );
        assert!(!log.truncated);
        assert_eq!(
            log.kinds,
            vec![
                CycleKind::Contour,
                CycleKind::Dimer,
                CycleKind::Dimer,
                CycleKind::Dimer
            ]
        );
        assert_eq!(log.steps(), 4);
        // Closed convention including the terminal contour: Delta = -1.
        assert_eq!(log.delta() + 1, -1);
    }

    #[test]
    fn sub_tour_immediate_stop_is_empty() {
        let (lat, mut st) = cw_square_state();
        let log = run_sub_tour(&mut st, &lat, Clockwise, |_| true, 10);
        assert_eq!(log.steps(), 0);
        assert_eq!(log.delta(), 0);
    }

    #[test]
    fn reversal_experiment_unit_square() {
        let (lat, st) = cw_square_state();
        let rep = planar_reversal_experiment(&lat, &st, Clockwise).unwrap();
        assert_eq!(rep.delta, -1);
        assert_eq!(rep.steps_taken, 4);
        assert!(rep.cycle_reversed);
        assert!(!rep.external_changed);
        assert!(rep.internal_full_rotation);
        assert_eq!(rep.cycle_area, 1);
        assert_eq!(rep.stage_areas, [0, 0, 0]);
    }

    #[test]
    fn reversal_experiment_on_sampled_contours() {
        let lat = Lattice::planar(6, 6).unwrap();
        let chip = lat.vertex_id(3, 3);
        let mut accepted = 0;
        let mut stream = 0;
        while accepted < 25 {
            let mut rng = SeededRng::new(11, stream);
            stream += 1;
            let st = sample_unicycle(&lat, chip, &mut rng).unwrap();
            let cyc = st.find_cycle(&lat).unwrap();
            if cyc.kind != CycleKind::Contour || cyc.orientation != Orientation::Cw {
                continue;
            }
            accepted += 1;
            let rep = planar_reversal_experiment(&lat, &st, Clockwise).unwrap();
            assert_eq!(rep.delta, -1);
            assert!(rep.cycle_reversed);
            assert!(!rep.external_changed);
            assert!(rep.internal_full_rotation);
            assert_eq!(rep.stage_areas.iter().sum::<i64>(), rep.cycle_area - 1);
        }
    }

    #[test]
    fn recurrence_is_preserved() {
        let lat = Lattice::torus(4, 5).unwrap();
        for order in [RoutingOrder::Clockwise, RoutingOrder::Cross] {
            let mut rng = SeededRng::new(13, order as u64);
            let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
            for _ in 0..200 {
                assert!(st.is_unicycle(&lat));
                st.step(&lat, order);
            }
        }
    }

    #[test]
    fn pair_counts_partition_the_tour() {
        let lat = Lattice::torus(4, 4).unwrap();
        let mut rng = SeededRng::new(21, 0);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let log = run_euler_tour(&mut st, &lat, Clockwise).unwrap();
        let linear = accumulate_pair_correlations(&log, PairMode::Linear).unwrap();
        assert_eq!(linear.total() as usize, log.steps() - 1);
        let cyclic = accumulate_pair_correlations(&log, PairMode::Cyclic).unwrap();
        assert_eq!(cyclic.total() as usize, log.steps());
        let f = cyclic.frequencies();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_counts_reject_short_logs() {
        let log = TourLog {
            kinds: vec![CycleKind::Dimer],
            r2: vec![0, 1],
            truncated: false,
        };
        assert!(accumulate_pair_correlations(&log, PairMode::Linear).is_err());
    }

    #[test]
    fn msd_starts_at_zero_and_matches_mc() {
        let lat = Lattice::torus(5, 5).unwrap();
        let mut logs = Vec::new();
        for stream in 0..4 {
            let mut rng = SeededRng::new(31, stream);
            let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
            logs.push(run_euler_tour(&mut st, &lat, Clockwise).unwrap());
        }
        let curve = msd_curve(&logs, 20).unwrap();
        assert_eq!(curve.mean_r2[0], 0.0);
        let mc = msd_mc(&lat, Clockwise, 0, 4, 20, 31).unwrap();
        for t in 0..=20 {
            assert!((curve.mean_r2[t] - mc.mean_r2[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn no_vertex_visited_more_than_four_times_per_tour() {
        let lat = Lattice::torus(5, 4).unwrap();
        let mut rng = SeededRng::new(37, 0);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let mut visits = vec![0u32; lat.num_vertices()];
        for _ in 0..lat.num_directed_edges() {
            visits[st.chip] += 1;
            st.step(&lat, Clockwise);
        }
        assert!(visits.iter().all(|&v| v <= 4));
    }

    #[test]
    fn delta_distribution_mean_is_near_four() {
        let lat = Lattice::torus(6, 6).unwrap();
        let dist = delta_distribution(&lat, Clockwise, 0, 400, 41).unwrap();
        assert!((dist.mean - 4.0).abs() < 4.0 * dist.mean_std_error().max(0.5));
        let total: u64 = dist.histogram.values().sum();
        assert_eq!(total as usize, dist.n);
    }

    #[test]
    fn fit_slope_recovers_linear_series() {
        let series: Vec<f64> = (0..100).map(|t| 2.5 * t as f64 + 3.0).collect();
        let (slope, intercept) = fit_slope(&series, 10, 90).unwrap();
        assert!((slope - 2.5).abs() < 1e-12);
        assert!((intercept - 3.0).abs() < 1e-9);
    }
}
