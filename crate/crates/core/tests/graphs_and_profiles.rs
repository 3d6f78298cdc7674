use proptest::prelude::*;
use rewire::{
    check_hypothesis, enumerate_arc_sets, profile_exact, stream, Color, ExpansionHypothesis,
    GraphFile, PhaseGraph, PointerConfig, DEFAULT_PROFILE_BUDGET,
};

/// Minimum boundary over subsets of each exact size, by plain bitmask scan.
fn size_minima(g: &PhaseGraph, kmax: usize) -> Vec<usize> {
    let n = g.n();
    let mut best = vec![usize::MAX; kmax + 1];
    for mask in 1u32..1 << n {
        let k = mask.count_ones() as usize;
        if k > kmax {
            continue;
        }
        let cut = g
            .edges()
            .iter()
            .filter(|e| (mask >> e.u & 1) != (mask >> e.v & 1))
            .count();
        best[k] = best[k].min(cut);
    }
    best
}

#[test]
fn profile_matches_bitmask_scan() {
    for seed in 0..12u64 {
        let n = 6 + (seed as usize % 9);
        let c = PointerConfig::random(n, &mut stream(seed, 3)).unwrap();
        let g = PhaseGraph::from_config(&c, Color::Blue);
        let p = profile_exact(&g, n / 2, DEFAULT_PROFILE_BUDGET).unwrap();
        let best = size_minima(&g, n / 2);
        for k in 1..=n / 2 {
            assert_eq!(p.boundary_at(k), best[k], "n={n} k={k}");
            assert_eq!(p.card(k), best[1..=k].iter().copied().min().unwrap());
            let ratio = (1..=k)
                .map(|j| best[j] as f64 / j as f64)
                .fold(f64::INFINITY, f64::min);
            assert!((p.ratio(k) - ratio).abs() < 1e-12);
            assert_eq!(p.size_witness[k - 1].len(), k);
            assert_eq!(g.edge_boundary(&p.size_witness[k - 1]).unwrap(), best[k]);
        }
    }
}

#[test]
fn ring_plus_pointers_always_meets_the_base_hypothesis() {
    for seed in 0..30u64 {
        let c = PointerConfig::random(12, &mut stream(seed, 0)).unwrap();
        let p = profile_exact(
            &PhaseGraph::from_config(&c, Color::Red),
            6,
            DEFAULT_PROFILE_BUDGET,
        )
        .unwrap();
        assert!(check_hypothesis(&p, &ExpansionHypothesis::new(1.0, 2.0).unwrap()).holds);
    }
}

#[test]
fn hypothesis_reports_a_witness_when_it_fails() {
    // two dense 4-node blocks joined by two edges
    let mut pairs = vec![
        (0, 1),
        (1, 2),
        (2, 3),
        (3, 0),
        (4, 5),
        (5, 6),
        (6, 7),
        (7, 4),
        (0, 4),
        (2, 6),
    ];
    pairs.extend([(1, 3), (5, 7), (1, 3), (5, 7), (0, 2), (4, 6)]);
    let g = PhaseGraph::from_edges(8, &pairs).unwrap();
    let p = profile_exact(&g, 4, DEFAULT_PROFILE_BUDGET).unwrap();
    let check = check_hypothesis(&p, &ExpansionHypothesis::new(1.0, 4.0).unwrap());
    assert!(!check.holds);
    let v = check.first_violation.unwrap();
    assert_eq!(g.edge_boundary(&v.witness).unwrap(), v.boundary);
    assert!((v.boundary as f64) < v.required);
}

#[test]
fn arc_enumeration_produces_distinct_sets_with_the_right_shape() {
    let n = 10;
    for k in 1..=5 {
        for arcs in 1..=k {
            let sets: Vec<Vec<usize>> = enumerate_arc_sets(n, k, arcs).collect();
            let mut sorted = sets.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), sets.len());
            for s in &sets {
                assert_eq!(s.len(), k);
                assert_eq!(rewire::graph::count_arcs(n, s).unwrap(), arcs);
            }
        }
    }
}

#[test]
fn malformed_graph_files_are_rejected() {
    for bad in [
        "red 1 2\n",
        "N 3\nred 1 4\n",
        "N 3\nred 1 2\nred 1 3\n",
        "N 2\nedge 1 2\nred 1 2\n",
        "N x\n",
    ] {
        assert!(GraphFile::parse(bad).is_err(), "{bad:?}");
    }
    let raw = GraphFile::parse("# comment\nN 3\nedge 1 2\nedge 2 3\n").unwrap();
    assert!(matches!(raw, GraphFile::Raw(ref g) if g.edges().len() == 2));
}

proptest! {
    #[test]
    fn pointer_files_round_trip(n in 3usize..40, seed in any::<u64>()) {
        let c = PointerConfig::random(n, &mut stream(seed, 0)).unwrap();
        let back = PointerConfig::from_text(&c.to_text()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn phase_graphs_are_four_regular(n in 3usize..64, seed in any::<u64>()) {
        let c = PointerConfig::random(n, &mut stream(seed, 0)).unwrap();
        for color in [Color::Red, Color::Blue] {
            let g = PhaseGraph::from_config(&c, color);
            prop_assert!(g.is_regular(4));
            prop_assert_eq!(g.edges().len(), 2 * n);
        }
    }
}
