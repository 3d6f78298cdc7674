use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rewire::spectral::{check_collapsed_gap, check_partial_spread, heat_apply};
use rewire::{
    lambda_star, profile_exact, spectral_gap, stream, Color, LaplacianView, MassVector, PhaseGraph,
    PointerConfig, DEFAULT_PROFILE_BUDGET,
};

fn random_graph(n: usize, seed: u64) -> PhaseGraph {
    let mut rng = stream(seed, 0);
    PhaseGraph::from_config(&PointerConfig::random(n, &mut rng).unwrap(), Color::Red)
}

/// Laplacian built straight from the edge list, loops dropped.
fn laplacian_oracle(g: &PhaseGraph) -> DMatrix<f64> {
    let n = g.n();
    let mut l = DMatrix::zeros(n, n);
    for e in g.edges().iter().filter(|e| e.u != e.v) {
        l[(e.u, e.v)] -= 1.0;
        l[(e.v, e.u)] -= 1.0;
        l[(e.u, e.u)] += 1.0;
        l[(e.v, e.v)] += 1.0;
    }
    l
}

fn exp_oracle(l: &DMatrix<f64>, x: &[f64], t: f64) -> Vec<f64> {
    let eig = l.clone().symmetric_eigen();
    let n = x.len();
    let xv = nalgebra::DVector::from_column_slice(x);
    let coeffs = eig.eigenvectors.transpose() * xv;
    let scaled = nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|i| coeffs[i] * (-eig.eigenvalues[i] * t).exp()),
    );
    (eig.eigenvectors * scaled).iter().copied().collect()
}

#[test]
fn gap_matches_dense_eigenvalues() {
    for seed in 0..10 {
        let g = random_graph(12, seed);
        let mut ev: Vec<f64> = laplacian_oracle(&g)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        let gap = spectral_gap(&LaplacianView::from_graph(&g)).unwrap();
        assert!(gap.connected);
        assert!(
            (gap.lambda2 - ev[1]).abs() < 1e-9,
            "seed {seed}: {} vs {}",
            gap.lambda2,
            ev[1]
        );
    }
}

#[test]
fn ring_alone_has_known_gap() {
    // cycle C_n: lambda2 = 2 - 2 cos(2 pi / n)
    for n in [5usize, 8, 13] {
        let g = PhaseGraph::from_edges(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
            .unwrap();
        let gap = spectral_gap(&LaplacianView::from_graph(&g))
            .unwrap()
            .lambda2;
        let want = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((gap - want).abs() < 1e-10);
    }
}

#[test]
fn cheeger_bound_on_profiled_graphs() {
    for seed in 0..15 {
        let g = random_graph(14, seed);
        let profile = profile_exact(&g, 7, DEFAULT_PROFILE_BUDGET).unwrap();
        let lap = LaplacianView::from_graph(&g);
        let gap = spectral_gap(&lap).unwrap().lambda2;
        assert!(gap >= lambda_star(profile.ratio(7), lap.max_degree()) - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uniformization_matches_eigendecomposition(n in 3usize..12, seed in 0u64..1000, t in 0.0f64..20.0, start in 0usize..12) {
        let g = random_graph(n, seed);
        let lap = LaplacianView::from_graph(&g);
        let mut x = vec![0.0; n];
        x[start % n] = 1.0;
        let got = heat_apply(&lap, &x, t).unwrap();
        let want = exp_oracle(&laplacian_oracle(&g), &x, t);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn heat_flow_is_a_markov_semigroup(n in 3usize..12, seed in 0u64..1000, s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let g = random_graph(n, seed);
        let lap = LaplacianView::from_graph(&g);
        let pi0 = MassVector::point_mass(n, 0).unwrap();
        let direct = heat_apply(&lap, &pi0.values, s + t).unwrap();
        let staged = heat_apply(&lap, &heat_apply(&lap, &pi0.values, s).unwrap(), t).unwrap();
        prop_assert!((direct.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(direct.iter().all(|&p| p >= -1e-15));
        for (a, b) in direct.iter().zip(&staged) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn partial_spread_holds_on_random_graphs(n in 6usize..14, seed in 0u64..1000, kf in 0.0f64..1.0, t in 0.0f64..40.0) {
        let g = random_graph(n, seed);
        let profile = profile_exact(&g, n / 2, DEFAULT_PROFILE_BUDGET).unwrap();
        let lap = LaplacianView::from_graph(&g);
        let k = 1 + ((n / 2 - 1) as f64 * kf) as usize;
        for pi0 in [MassVector::point_mass(n, seed as usize % n).unwrap(),
                    MassVector::uniform_on(n, &profile.size_witness[k - 1]).unwrap()] {
            let r = check_partial_spread(&lap, k, profile.ratio(k), &pi0, &[t]).unwrap();
            prop_assert!(r.violations.is_empty(), "{:?}", r.violations);
        }
    }

    #[test]
    fn collapsed_gap_holds_for_random_orderings(n in 6usize..14, seed in 0u64..1000, kf in 0.0f64..1.0) {
        let g = random_graph(n, seed);
        let profile = profile_exact(&g, n / 2, DEFAULT_PROFILE_BUDGET).unwrap();
        let lap = LaplacianView::from_graph(&g);
        let k = 1 + ((n / 2 - 1) as f64 * kf) as usize;
        let mut rng = stream(seed, 1);
        let orderings: Vec<Vec<usize>> = (0..8)
            .map(|_| {
                let mut o: Vec<usize> = (0..n).collect();
                o.shuffle(&mut rng);
                o
            })
            .collect();
        let r = check_collapsed_gap(&lap, k, profile.ratio(k), &orderings).unwrap();
        prop_assert!(r.violations.is_empty());
    }
}
