//! Continuous-time interchange dynamics on a phase graph.
//!
//! Every edge of the phase graph carries a unit-rate exponential timer. When
//! the timer of edge `(i, j)` fires, the two moving-colour pointers that end
//! at `i` and at `j` exchange destinations. The engine is Gillespie-style:
//! holding times are exponential with rate `2N` (the number of edge slots)
//! and the firing edge is uniform over the slots, which has the same law as
//! independent per-edge timers.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Color, PhaseGraph, PointerConfig};
use crate::isoperimetry::{profile_exact, IsoProfile, DEFAULT_PROFILE_BUDGET};
use crate::spectral::cramer;

/// How a swap on edge `(i, j)` between pointer owners `n` and `m` is charged
/// to the per-node modification counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModCounting {
    /// Only the owners `n` and `m` (their outgoing pointer moved).
    OwnerOnly,
    /// Owners `n`, `m` and endpoints `i`, `j` (an incoming pointer moved).
    /// Each role is charged separately, giving the rate-8 accounting.
    #[default]
    OwnerAndEndpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewiringStats {
    pub phase_index: usize,
    pub moving_color: Color,
    pub per_node_modifications: Vec<u64>,
    /// Fired timers, self-loop firings included.
    pub total_swaps: u64,
    pub elapsed_time: f64,
}

impl RewiringStats {
    pub fn max_modifications(&self) -> u64 {
        self.per_node_modifications
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
    }

    pub fn mean_modifications(&self) -> f64 {
        let n = self.per_node_modifications.len().max(1);
        self.per_node_modifications.iter().sum::<u64>() as f64 / n as f64
    }
}

/// Moving-colour pointers together with their inverse, mutated one fired
/// edge at a time.
#[derive(Debug, Clone)]
pub struct InterchangeState<'g> {
    graph: &'g PhaseGraph,
    pointers: Vec<usize>,
    owner: Vec<usize>,
    modifications: Vec<u64>,
    swaps: u64,
    counting: ModCounting,
}

impl<'g> InterchangeState<'g> {
    pub fn new(graph: &'g PhaseGraph, pointers: &[usize], counting: ModCounting) -> Result<Self> {
        let n = graph.n();
        if pointers.len() != n {
            return Err(Error::InvalidParameter(format!(
                "graph has {n} nodes but {} pointers were given",
                pointers.len()
            )));
        }
        let mut owner = vec![usize::MAX; n];
        for (src, &dst) in pointers.iter().enumerate() {
            if dst >= n || owner[dst] != usize::MAX {
                return Err(Error::InvalidConfig(
                    "moving pointers are not a permutation".into(),
                ));
            }
            owner[dst] = src;
        }
        Ok(InterchangeState {
            graph,
            pointers: pointers.to_vec(),
            owner,
            modifications: vec![0; n],
            swaps: 0,
            counting,
        })
    }

    /// Fires the timer of edge `edge` (an index into `graph.edges()`).
    pub fn fire(&mut self, edge: usize) {
        let e = self.graph.edges()[edge];
        self.swaps += 1;
        if e.is_loop() {
            return;
        }
        let (i, j) = (e.u, e.v);
        let (a, b) = (self.owner[i], self.owner[j]);
        self.pointers[a] = j;
        self.pointers[b] = i;
        self.owner[i] = b;
        self.owner[j] = a;
        self.modifications[a] += 1;
        self.modifications[b] += 1;
        if self.counting == ModCounting::OwnerAndEndpoint {
            self.modifications[i] += 1;
            self.modifications[j] += 1;
        }
    }

    /// Runs the dynamics for `duration` time units.
    pub fn run<R: Rng + ?Sized>(&mut self, duration: f64, rng: &mut R) {
        let slots = self.graph.edges().len();
        if slots == 0 || duration <= 0.0 {
            return;
        }
        let holding = Exp::new(slots as f64).expect("positive rate");
        let mut clock = holding.sample(rng);
        while clock <= duration {
            let edge = rng.random_range(0..slots);
            self.fire(edge);
            clock += holding.sample(rng);
        }
    }

    pub fn pointers(&self) -> &[usize] {
        &self.pointers
    }

    pub fn owner_of(&self, node: usize) -> usize {
        self.owner[node]
    }

    pub fn modifications(&self) -> &[u64] {
        &self.modifications
    }

    pub fn swaps(&self) -> u64 {
        self.swaps
    }

    pub fn into_pointers(self) -> Vec<usize> {
        self.pointers
    }
}

/// One phase: `moving` pointers walk on the graph formed by the ring and the
/// other colour's pointers for time `duration`.
pub fn simulate_phase<R: Rng + ?Sized>(
    config: &PointerConfig,
    moving: Color,
    duration: f64,
    counting: ModCounting,
    rng: &mut R,
) -> Result<(PointerConfig, RewiringStats)> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "phase length must be finite and >= 0, got {duration}"
        )));
    }
    let graph = PhaseGraph::from_config(config, moving.other());
    let mut state = InterchangeState::new(&graph, config.pointers(moving), counting)?;
    state.run(duration, rng);
    let stats = RewiringStats {
        phase_index: 0,
        moving_color: moving,
        per_node_modifications: state.modifications().to_vec(),
        total_swaps: state.swaps(),
        elapsed_time: duration,
    };
    let mut next = config.clone();
    *next.pointers_mut_unchecked(moving) = state.into_pointers();
    Ok((next, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseLength {
    Fixed(f64),
    /// `T = ln(N)^a`.
    LogPower(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n: usize,
    pub phase_length: PhaseLength,
    pub num_phases: usize,
    pub seed: u64,
    pub counting: ModCounting,
    pub snapshot_profile: bool,
    pub profile_budget: usize,
}

impl SimParams {
    pub fn new(n: usize, phase_length: f64, num_phases: usize, seed: u64) -> Self {
        SimParams {
            n,
            phase_length: PhaseLength::Fixed(phase_length),
            num_phases,
            seed,
            counting: ModCounting::default(),
            snapshot_profile: false,
            profile_budget: DEFAULT_PROFILE_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidParameter(format!(
                "n must be >= 3, got {}",
                self.n
            )));
        }
        if self.num_phases == 0 {
            return Err(Error::InvalidParameter("num_phases must be >= 1".into()));
        }
        match self.phase_length {
            PhaseLength::Fixed(t) if !(t > 0.0 && t.is_finite()) => Err(Error::InvalidParameter(
                format!("phase length must be > 0, got {t}"),
            )),
            PhaseLength::LogPower(a) if !(a > 8.0 && a.is_finite()) => Err(
                Error::InvalidParameter(format!("exponent a must be > 8, got {a}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn phase_time(&self) -> f64 {
        match self.phase_length {
            PhaseLength::Fixed(t) => t,
            PhaseLength::LogPower(a) => (self.n as f64).ln().powf(a),
        }
    }

    /// Colour that moves during phase `f`; phase 0 moves blue.
    pub fn moving_color(phase: usize) -> Color {
        if phase.is_multiple_of(2) {
            Color::Blue
        } else {
            Color::Red
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub stats: RewiringStats,
    /// Profile of the graph the next phase runs on (ring plus the colour
    /// that just moved), when snapshots are enabled and N is within budget.
    pub profile: Option<IsoProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub initial: PointerConfig,
    pub final_config: PointerConfig,
    pub phases: Vec<PhaseRecord>,
}

impl ProtocolRun {
    pub fn total_modifications(&self) -> Vec<u64> {
        let n = self.initial.n();
        let mut totals = vec![0u64; n];
        for p in &self.phases {
            for (t, m) in totals.iter_mut().zip(&p.stats.per_node_modifications) {
                *t += m;
            }
        }
        totals
    }
}

/// Alternating-phase protocol from a uniformly random initial configuration.
pub fn run_protocol<R: Rng + ?Sized>(params: &SimParams, rng: &mut R) -> Result<ProtocolRun> {
    params.validate()?;
    let initial = PointerConfig::random(params.n, rng)?;
    run_protocol_from(params, initial, rng)
}

pub fn run_protocol_from<R: Rng + ?Sized>(
    params: &SimParams,
    initial: PointerConfig,
    rng: &mut R,
) -> Result<ProtocolRun> {
    params.validate()?;
    if initial.n() != params.n {
        return Err(Error::InvalidParameter(format!(
            "initial configuration has {} nodes, params say {}",
            initial.n(),
            params.n
        )));
    }
    let duration = params.phase_time();
    let mut config = initial.clone();
    let mut phases = Vec::with_capacity(params.num_phases);
    let mut clock = 0.0;
    for f in 0..params.num_phases {
        let moving = SimParams::moving_color(f);
        let (next, mut stats) = simulate_phase(&config, moving, duration, params.counting, rng)?;
        clock += duration;
        stats.phase_index = f;
        stats.elapsed_time = clock;
        let profile = if params.snapshot_profile && params.n <= params.profile_budget {
            let g = PhaseGraph::from_config(&next, moving);
            Some(profile_exact(&g, params.n / 2, params.profile_budget)?)
        } else {
            None
        };
        phases.push(PhaseRecord { stats, profile });
        config = next;
    }
    Ok(ProtocolRun {
        initial,
        final_config: config,
        phases,
    })
}

/// Chernoff bound on the upper tail of a Poisson(8τ) count:
/// `P(M ≥ c·8τ) ≤ exp(−8τ·h(c))`. `c = 2` gives the `16τ` threshold.
pub fn poisson_rewiring_tail(tau: f64, threshold_factor: f64) -> Result<f64> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "tau must be > 0, got {tau}"
        )));
    }
    if !(threshold_factor >= 1.0 && threshold_factor.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "threshold factor must be >= 1 for an upper-tail bound, got {threshold_factor}"
        )));
    }
    Ok((-8.0 * tau * cramer(threshold_factor)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn is_perm(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        p.iter()
            .all(|&x| x < p.len() && !std::mem::replace(&mut seen[x], true))
    }

    #[test]
    fn zero_length_phase_is_identity() {
        let mut rng = stream(3, 0);
        let c = PointerConfig::random(7, &mut rng).unwrap();
        let (next, stats) =
            simulate_phase(&c, Color::Blue, 0.0, ModCounting::default(), &mut rng).unwrap();
        assert_eq!(next, c);
        assert_eq!(stats.total_swaps, 0);
        assert!(stats.per_node_modifications.iter().all(|&m| m == 0));
    }

    #[test]
    fn single_fire_transposes_the_two_preimages() {
        // n=3, red = identity so the graph is the triangle plus loops.
        let c = PointerConfig::new(vec![0, 1, 2], vec![1, 2, 0]).unwrap();
        let g = PhaseGraph::from_config(&c, Color::Red);
        let mut st = InterchangeState::new(&g, c.blue(), ModCounting::OwnerAndEndpoint).unwrap();
        // edge 0 is the cycle edge (0, 1); blue preimages: 2 -> 0, 0 -> 1.
        st.fire(0);
        assert_eq!(st.pointers(), &[0, 2, 1]);
        assert!(is_perm(st.pointers()));
        assert_eq!(st.modifications(), &[2, 1, 1]);
    }

    #[test]
    fn loop_fire_counts_swap_but_not_modification() {
        let c = PointerConfig::identity(4).unwrap();
        let g = PhaseGraph::from_config(&c, Color::Red);
        let mut st = InterchangeState::new(&g, c.blue(), ModCounting::default()).unwrap();
        st.fire(4); // first pointer edge, a self-loop
        assert_eq!(st.swaps(), 1);
        assert_eq!(st.pointers(), c.blue());
        assert!(st.modifications().iter().all(|&m| m == 0));
    }

    #[test]
    fn owner_only_counting_charges_two() {
        let c = PointerConfig::new(vec![1, 2, 3, 0], vec![0, 1, 2, 3]).unwrap();
        let g = PhaseGraph::from_config(&c, Color::Red);
        let mut st = InterchangeState::new(&g, c.blue(), ModCounting::OwnerOnly).unwrap();
        st.fire(1);
        assert_eq!(st.modifications().iter().sum::<u64>(), 2);
    }

    #[test]
    fn params_validation() {
        assert!(SimParams::new(8, 1.0, 0, 0).validate().is_err());
        assert!(SimParams::new(8, 0.0, 1, 0).validate().is_err());
        assert!(SimParams::new(2, 1.0, 1, 0).validate().is_err());
        let mut p = SimParams::new(8, 1.0, 1, 0);
        p.phase_length = PhaseLength::LogPower(8.0);
        assert!(p.validate().is_err());
        p.phase_length = PhaseLength::LogPower(9.0);
        assert!(p.validate().is_ok());
        assert!((p.phase_time() - 8f64.ln().powf(9.0)).abs() < 1e-9);
    }

    #[test]
    fn protocol_alternates_colors_and_keeps_bijections() {
        let params = SimParams::new(8, 1.5, 4, 11);
        let mut rng = stream(params.seed, 0);
        let run = run_protocol(&params, &mut rng).unwrap();
        let colors: Vec<Color> = run.phases.iter().map(|p| p.stats.moving_color).collect();
        assert_eq!(
            colors,
            vec![Color::Blue, Color::Red, Color::Blue, Color::Red]
        );
        assert!(is_perm(run.final_config.red()) && is_perm(run.final_config.blue()));
        assert!((run.phases[3].stats.elapsed_time - 6.0).abs() < 1e-12);
    }

    #[test]
    fn protocol_snapshots_profiles() {
        let mut params = SimParams::new(8, 1.0, 2, 5);
        params.snapshot_profile = true;
        let run = run_protocol(&params, &mut stream(5, 0)).unwrap();
        for p in &run.phases {
            let prof = p.profile.as_ref().unwrap();
            assert_eq!(prof.kmax, 4);
            assert!(prof.card(1) >= 2);
        }
    }

    #[test]
    fn rewiring_tail_values() {
        let b = poisson_rewiring_tail(1.0, 2.0).unwrap();
        let expect = (-8.0 * (2.0 * 2f64.ln() - 1.0)).exp();
        assert!((b - expect).abs() < 1e-15);
        assert!((b - 0.0455).abs() < 5e-4);
        assert_eq!(poisson_rewiring_tail(3.0, 1.0).unwrap(), 1.0);
        assert!(poisson_rewiring_tail(1.0, 0.5).is_err());
        assert!(poisson_rewiring_tail(0.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn random_event_streams_preserve_permutations(
            n in 3usize..20,
            seed in any::<u64>(),
            events in proptest::collection::vec(any::<prop::sample::Index>(), 0..200),
        ) {
            let mut rng = stream(seed, 0);
            let c = PointerConfig::random(n, &mut rng).unwrap();
            let g = PhaseGraph::from_config(&c, Color::Red);
            let mut st = InterchangeState::new(&g, c.blue(), ModCounting::default()).unwrap();
            for e in &events {
                st.fire(e.index(g.edges().len()));
            }
            prop_assert!(is_perm(st.pointers()));
            for v in 0..n {
                prop_assert_eq!(st.pointers()[st.owner_of(v)], v);
            }
        }
    }
}
