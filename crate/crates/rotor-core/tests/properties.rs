//! Randomized invariants over small lattices, seeds, and routing orders.

use proptest::prelude::*;
use rotor_core::lattice::{Direction, Lattice, RoutingOrder};
use rotor_core::sampler::{sample_unicycle, sample_ust, SeededRng};
use rotor_core::tour::{accumulate_pair_correlations, fit_slope, run_euler_tour, PairMode};

fn arb_lattice() -> impl Strategy<Value = Lattice> {
    prop_oneof![
        (3usize..7, 3usize..7).prop_map(|(m, n)| Lattice::torus(m, n).unwrap()),
        (1usize..7, 2usize..7).prop_map(|(x, y)| Lattice::planar(x, y).unwrap()),
    ]
}

fn arb_order() -> impl Strategy<Value = RoutingOrder> {
    prop_oneof![Just(RoutingOrder::Clockwise), Just(RoutingOrder::Cross)]
}

proptest! {
    #[test]
    fn sampled_state_is_recurrent_and_stays_recurrent(
        lat in arb_lattice(),
        order in arb_order(),
        seed in any::<u64>(),
        steps in 0usize..200,
    ) {
        let mut rng = SeededRng::new(seed, 0);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        prop_assert!(st.is_unicycle(&lat));
        for _ in 0..steps {
            st.step(&lat, order);
            prop_assert!(st.is_unicycle(&lat));
        }
    }

    #[test]
    fn snapshot_roundtrips_through_json(
        lat in arb_lattice(),
        seed in any::<u64>(),
        stream in 0u64..32,
    ) {
        let mut rng = SeededRng::new(seed, stream);
        let st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let snap = st.snapshot(&lat);
        let json = serde_json::to_string(&snap).unwrap();
        let back: rotor_core::Snapshot = serde_json::from_str(&json).unwrap();
        let (lat2, st2) = back.restore().unwrap();
        prop_assert_eq!(lat2.topology(), lat.topology());
        prop_assert_eq!(st2, st);
    }

    #[test]
    fn euler_tour_closes_for_any_seed(
        m in 3usize..6,
        n in 3usize..6,
        order in arb_order(),
        seed in any::<u64>(),
    ) {
        let lat = Lattice::torus(m, n).unwrap();
        let mut rng = SeededRng::new(seed, 0);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let log = run_euler_tour(&mut st, &lat, order).unwrap();
        prop_assert_eq!(log.steps(), 4 * m * n);
        prop_assert_eq!(log.dimers() + log.contours(), 4 * m * n);
    }

    #[test]
    fn rotor_rotation_is_cyclic(
        lat in arb_lattice(),
        order in arb_order(),
        v_raw in any::<prop::sample::Index>(),
    ) {
        let v = v_raw.index(lat.num_vertices());
        let start = lat.directions(v).next().unwrap();
        let mut d = start;
        for _ in 0..lat.out_degree(v) {
            d = lat.next_direction(order, v, d).unwrap();
        }
        prop_assert_eq!(d, start);
    }

    #[test]
    fn direction_arithmetic(d_idx in 0usize..4) {
        let d = Direction::ALL[d_idx];
        prop_assert_eq!(d.opposite().opposite(), d);
        prop_assert_eq!(d.dx() + d.opposite().dx(), 0);
        prop_assert_eq!(d.dy() + d.opposite().dy(), 0);
        prop_assert_eq!(Direction::between((0, 0), (d.dx(), d.dy())), Some(d));
        prop_assert_eq!(Direction::from_char(d.to_char()), Some(d));
    }

    #[test]
    fn spanning_tree_reaches_root_from_everywhere(
        lat in arb_lattice(),
        seed in any::<u64>(),
        root_raw in any::<prop::sample::Index>(),
    ) {
        let root = root_raw.index(lat.num_vertices());
        let mut rng = SeededRng::new(seed, 0);
        let tree = sample_ust(&lat, root, &mut rng).unwrap();
        prop_assert_eq!(tree.num_edges(), lat.num_vertices() - 1);
        for v in 0..lat.num_vertices() {
            let mut u = v;
            let mut hops = 0;
            while u != root {
                u = lat.neighbor(u, tree.parent_direction(u).unwrap()).unwrap();
                hops += 1;
                prop_assert!(hops < lat.num_vertices(), "cycle in tree");
            }
        }
    }

    #[test]
    fn cyclic_pair_counts_total_the_tour_length(
        m in 3usize..6,
        n in 3usize..6,
        order in arb_order(),
        seed in any::<u64>(),
    ) {
        let lat = Lattice::torus(m, n).unwrap();
        let mut rng = SeededRng::new(seed, 0);
        let mut st = sample_unicycle(&lat, 0, &mut rng).unwrap();
        let log = run_euler_tour(&mut st, &lat, order).unwrap();
        let counts = accumulate_pair_correlations(&log, PairMode::Cyclic).unwrap();
        prop_assert_eq!(counts.total() as usize, log.steps());
        let f = counts.frequencies();
        prop_assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Kind pairs chain: transitions into dimers equal transitions out.
        prop_assert_eq!(counts.dc, counts.cd);
    }

    #[test]
    fn fit_slope_recovers_affine_series(
        slope in -5.0f64..5.0,
        icpt in -5.0f64..5.0,
        len in 4usize..40,
    ) {
        let series: Vec<f64> = (0..len).map(|t| icpt + slope * t as f64).collect();
        let (s, i) = fit_slope(&series, 1, len - 1).unwrap();
        prop_assert!((s - slope).abs() < 1e-9);
        prop_assert!((i - icpt).abs() < 1e-8);
    }
}
