//! Monte Carlo tests of the interchange dynamics against exact answers:
//! uniformity of the moved permutation, exclusion/heat-kernel duality, the
//! pointer cut after a phase, and the per-node rewiring rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::thresholds::{
    family_envelope, P_VALUE_FLOOR, RATE_REL_TOL, REPLICAS_PER_CELL, SIGMA_ENVELOPE,
};
use crate::error::{Error, Result};
use crate::graph::{membership, Color, PhaseGraph, PointerConfig};
use crate::interchange::{
    poisson_rewiring_tail, run_protocol_from, InterchangeState, ModCounting, SimParams,
};
use crate::rng::stream;
use crate::spectral::{chernoff_tail, heat_apply, LaplacianView};

/// Replicas are processed in blocks of this size; counts are integers, so
/// the merge order cannot change the result.
const BLOCK: usize = 4096;

fn blocks(replicas: usize) -> impl ParallelIterator<Item = std::ops::Range<usize>> {
    (0..replicas.div_ceil(BLOCK))
        .into_par_iter()
        .map(move |b| b * BLOCK..((b + 1) * BLOCK).min(replicas))
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Lexicographic rank of a permutation of `0..n` (Lehmer code).
pub fn permutation_rank(perm: &[usize]) -> usize {
    let n = perm.len();
    let mut rank = 0;
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&x| x < perm[i]).count();
        rank = rank * (n - i) + smaller;
    }
    rank
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson statistic against equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> Result<ChiSquareReport> {
    if counts.len() < 2 {
        return Err(Error::InvalidParameter(
            "chi-square needs at least two cells".into(),
        ));
    }
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = counts.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareReport {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub n: usize,
    pub time: f64,
    pub replicas: usize,
    pub initial: PointerConfig,
    pub counts: Vec<u64>,
    pub chi_square: ChiSquareReport,
    pub passes: bool,
}

/// Runs one blue phase of length `time` from a fixed configuration in
/// `replicas` independent copies and tests the resulting blue permutation
/// for uniformity over all `n!` permutations.
pub fn uniformity_test(
    initial: &PointerConfig,
    time: f64,
    replicas: usize,
    seed: u64,
) -> Result<UniformityReport> {
    let n = initial.n();
    if !(3..=5).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "uniformity test needs 3 <= n <= 5, got {n}"
        )));
    }
    let cells = factorial(n);
    if replicas < REPLICAS_PER_CELL * cells {
        return Err(Error::InvalidParameter(format!(
            "need at least {} replicas for n = {n}, got {replicas}",
            REPLICAS_PER_CELL * cells
        )));
    }
    if !(time >= 0.0 && time.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time must be finite and >= 0, got {time}"
        )));
    }
    let graph = PhaseGraph::from_config(initial, Color::Red);
    let start = initial.blue();
    let counts = blocks(replicas)
        .map(|range| {
            let mut counts = vec![0u64; cells];
            for r in range {
                let mut rng = stream(seed, r as u64);
                let mut state = InterchangeState::new(&graph, start, ModCounting::OwnerOnly)
                    .expect("pointers validated by PointerConfig");
                state.run(time, &mut rng);
                counts[permutation_rank(state.pointers())] += 1;
            }
            counts
        })
        .reduce(|| vec![0u64; cells], add_counts);
    let chi_square = chi_square_uniform(&counts)?;
    let passes = chi_square.p_value > P_VALUE_FLOOR;
    Ok(UniformityReport {
        n,
        time,
        replicas,
        initial: initial.clone(),
        counts,
        chi_square,
        passes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub n: usize,
    pub set_size: usize,
    pub time: f64,
    pub replicas: usize,
    pub empirical: Vec<f64>,
    pub analytic: Vec<f64>,
    pub max_abs_deviation: f64,
    /// Largest `|empirical - analytic| / sigma` over nodes with `sigma > 0`.
    pub max_z: f64,
    /// Per-node z threshold for the test family.
    pub envelope_z: f64,
    pub passes: bool,
}

/// Occupancy of the targets of pointers owned by `owners`, simulated under
/// the interchange dynamics on `graph`, against the heat kernel applied to
/// the initial occupancy indicator. The envelope is family-wise over
/// `family` simultaneous node tests (at least `n`).
pub fn exclusion_duality_test(
    graph: &PhaseGraph,
    pointers: &[usize],
    owners: &[usize],
    time: f64,
    replicas: usize,
    seed: u64,
    family: usize,
) -> Result<DualityReport> {
    let n = graph.n();
    if n > 64 {
        return Err(Error::InvalidParameter(format!(
            "duality test needs n <= 64, got {n}"
        )));
    }
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be >= 1".into()));
    }
    let mut owned = vec![false; n];
    for &o in owners {
        if o >= n || std::mem::replace(&mut owned[o], true) {
            return Err(Error::InvalidSubset(format!(
                "owner set must hold distinct nodes below {n}"
            )));
        }
    }
    InterchangeState::new(graph, pointers, ModCounting::OwnerOnly)?;
    let mut occupancy0 = vec![0.0; n];
    for &o in owners {
        occupancy0[pointers[o]] = 1.0;
    }
    let analytic = heat_apply(&LaplacianView::from_graph(graph), &occupancy0, time)?;

    let counts = blocks(replicas)
        .map(|range| {
            let mut counts = vec![0u64; n];
            for r in range {
                let mut rng = stream(seed, r as u64);
                let mut state = InterchangeState::new(graph, pointers, ModCounting::OwnerOnly)
                    .expect("pointers checked above");
                state.run(time, &mut rng);
                for (i, c) in counts.iter_mut().enumerate() {
                    if owned[state.owner_of(i)] {
                        *c += 1;
                    }
                }
            }
            counts
        })
        .reduce(|| vec![0u64; n], add_counts);

    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / replicas as f64).collect();
    let envelope_z = family_envelope(family.max(n));
    let mut max_abs_deviation: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut passes = true;
    for (e, a) in empirical.iter().zip(&analytic) {
        let dev = (e - a).abs();
        max_abs_deviation = max_abs_deviation.max(dev);
        let sigma = (a.clamp(0.0, 1.0) * (1.0 - a.clamp(0.0, 1.0)) / replicas as f64).sqrt();
        if sigma > 1e-12 {
            let z = dev / sigma;
            max_z = max_z.max(z);
            passes &= z <= envelope_z;
        } else {
            passes &= dev <= 1e-9;
        }
    }
    Ok(DualityReport {
        n,
        set_size: owners.len(),
        time,
        replicas,
        empirical,
        analytic,
        max_abs_deviation,
        max_z,
        envelope_z,
        passes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub r: f64,
    /// Empirical `P(X <= r mu)` with `mu` the exact mean.
    pub frequency: f64,
    pub bound: f64,
    pub sigma: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCutReport {
    pub set: Vec<usize>,
    pub time: f64,
    pub replicas: usize,
    pub gamma: f64,
    pub d: f64,
    /// Pointers from the set landing outside it before the phase.
    pub initial_x: usize,
    /// Empirical mean of `X`, the pointers from the set landing outside it.
    pub mean_x: f64,
    /// Exact `E X` from the heat kernel.
    pub exact_mean_x: f64,
    /// Cut edges among the moved pointers, `2 X` on average.
    pub mean_cut_edges: f64,
    /// `(1/(2 gamma)) min(gamma |S|, 2d)`.
    pub mean_bound: f64,
    pub ratio_to_bound: f64,
    pub tails: Vec<TailCheck>,
    pub passes: bool,
}

/// Runs a blue phase of length `time` from `config` and measures how many of
/// the set's blue pointers leave the set, against the mean lower bound and
/// the Chernoff lower tails `exp(-mu h(r))` at the exact mean `mu`.
#[allow(clippy::too_many_arguments)]
pub fn mean_cut_test(
    config: &PointerConfig,
    set: &[usize],
    time: f64,
    replicas: usize,
    gamma: f64,
    d: f64,
    r_grid: &[f64],
    seed: u64,
) -> Result<MeanCutReport> {
    let n = config.n();
    let inside = membership(n, set)?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be >= 1".into()));
    }
    if !(gamma > 0.0 && d > 0.0) {
        return Err(Error::InvalidParameter(
            "gamma and d must be positive".into(),
        ));
    }
    let graph = PhaseGraph::from_config(config, Color::Red);
    let blue = config.blue();
    let count_x = |ptrs: &[usize]| set.iter().filter(|&&s| !inside[ptrs[s]]).count();
    let initial_x = count_x(blue);

    let mut occupancy0 = vec![0.0; n];
    for &s in set {
        occupancy0[blue[s]] = 1.0;
    }
    let heat = heat_apply(&LaplacianView::from_graph(&graph), &occupancy0, time)?;
    let exact_mean_x: f64 = (0..n).filter(|&i| !inside[i]).map(|i| heat[i]).sum();

    // histogram of X over replicas
    let hist = blocks(replicas)
        .map(|range| {
            let mut h = vec![0u64; set.len() + 1];
            for r in range {
                let mut rng = stream(seed, r as u64);
                let mut state = InterchangeState::new(&graph, blue, ModCounting::OwnerOnly)
                    .expect("valid config");
                state.run(time, &mut rng);
                h[count_x(state.pointers())] += 1;
            }
            h
        })
        .reduce(|| vec![0u64; set.len() + 1], add_counts);

    let mean_x = hist
        .iter()
        .enumerate()
        .map(|(x, &c)| x as f64 * c as f64)
        .sum::<f64>()
        / replicas as f64;
    let mean_bound = (gamma * set.len() as f64).min(2.0 * d) / (2.0 * gamma);
    let mut tails = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let bound = if exact_mean_x > 0.0 {
            chernoff_tail(exact_mean_x, r)?
        } else {
            1.0
        };
        let cutoff = r * exact_mean_x;
        let hits: u64 = hist
            .iter()
            .enumerate()
            .filter(|(x, _)| *x as f64 <= cutoff)
            .map(|(_, &c)| c)
            .sum();
        let frequency = hits as f64 / replicas as f64;
        let sigma = (bound * (1.0 - bound) / replicas as f64).sqrt();
        tails.push(TailCheck {
            r,
            frequency,
            bound,
            sigma,
            passes: frequency <= bound + SIGMA_ENVELOPE * sigma,
        });
    }
    let passes = tails.iter().all(|t| t.passes);
    Ok(MeanCutReport {
        set: set.to_vec(),
        time,
        replicas,
        gamma,
        d,
        initial_x,
        mean_x,
        exact_mean_x,
        mean_cut_edges: 2.0 * mean_x,
        mean_bound,
        ratio_to_bound: mean_x / mean_bound,
        tails,
        passes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewiringReport {
    pub n: usize,
    pub phase_length: f64,
    pub phases: usize,
    pub replicas: usize,
    /// Mean modifications per node per phase.
    pub mean_per_phase: f64,
    pub expected_per_phase: f64,
    pub relative_deviation: f64,
    pub rate_passes: bool,
    /// `tau = phases * phase_length`.
    pub tau: f64,
    pub threshold: f64,
    /// Fraction of (replica, node) pairs with at least `16 tau` modifications.
    pub tail_frequency: f64,
    pub tail_bound: f64,
    pub tail_sigma: f64,
    pub tail_passes: bool,
}

/// Per-node modification counts over `phases` alternating phases, against
/// the rate-8 mean and the Poisson tail at `16 tau`.
pub fn rewiring_test(
    n: usize,
    phase_length: f64,
    phases: usize,
    replicas: usize,
    seed: u64,
) -> Result<RewiringReport> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be >= 1".into()));
    }
    let mut params = SimParams::new(n, phase_length, phases, seed);
    params.counting = ModCounting::OwnerAndEndpoint;
    params.validate()?;
    let tau = phases as f64 * phase_length;
    let threshold = 16.0 * tau;
    let per_replica: Vec<(u64, u64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let initial = PointerConfig::random(n, &mut rng)?;
            let run = run_protocol_from(&params, initial, &mut rng)?;
            let totals = run.total_modifications();
            let sum = totals.iter().sum::<u64>();
            let over = totals.iter().filter(|&&m| m as f64 >= threshold).count() as u64;
            Ok((sum, over))
        })
        .collect::<Result<_>>()?;
    let total: u64 = per_replica.iter().map(|p| p.0).sum();
    let over: u64 = per_replica.iter().map(|p| p.1).sum();
    let samples = (replicas * n) as f64;
    let mean_per_phase = total as f64 / samples / phases as f64;
    let expected_per_phase = 8.0 * phase_length;
    let relative_deviation = (mean_per_phase - expected_per_phase).abs() / expected_per_phase;
    let tail_bound = poisson_rewiring_tail(tau, 2.0)?;
    let tail_frequency = over as f64 / samples;
    let tail_sigma = (tail_bound * (1.0 - tail_bound) / samples).sqrt();
    Ok(RewiringReport {
        n,
        phase_length,
        phases,
        replicas,
        mean_per_phase,
        expected_per_phase,
        relative_deviation,
        rate_passes: relative_deviation <= RATE_REL_TOL,
        tau,
        threshold,
        tail_frequency,
        tail_bound,
        tail_sigma,
        tail_passes: tail_frequency <= tail_bound + SIGMA_ENVELOPE * tail_sigma,
    })
}
