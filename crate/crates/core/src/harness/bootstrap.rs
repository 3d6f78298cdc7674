//! Phase-by-phase expansion bootstrap: after each phase the new phase graph
//! is profiled exactly and tested against the expansion hypothesis with a
//! doubling saturation level `d_f = 2^(f+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Color, PhaseGraph, PointerConfig};
use crate::interchange::{simulate_phase, ModCounting, SimParams};
use crate::isoperimetry::{
    check_hypothesis, profile_exact, ExpansionHypothesis, HypothesisViolation, IsoProfile,
    DEFAULT_PROFILE_BUDGET,
};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub n: usize,
    pub gamma: f64,
    pub phase_length: f64,
    /// Defaults to `ceil(log2 N)`.
    pub phases: Option<usize>,
    pub seed: u64,
    /// Profile every phase graph; needs `N <= DEFAULT_PROFILE_BUDGET`.
    pub verify: bool,
    pub counting: ModCounting,
}

impl BootstrapParams {
    pub fn new(n: usize, gamma: f64, phase_length: f64, seed: u64) -> Self {
        BootstrapParams {
            n,
            gamma,
            phase_length,
            phases: None,
            seed,
            verify: true,
            counting: ModCounting::default(),
        }
    }

    pub fn phase_count(&self) -> usize {
        self.phases
            .unwrap_or_else(|| (self.n as f64).log2().ceil() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPhase {
    /// `0` is the initial graph; `f > 0` is the graph left by phase `f - 1`.
    pub phase: usize,
    pub d_f: f64,
    pub graph_color: Color,
    pub hypothesis_holds: Option<bool>,
    pub first_violation: Option<HypothesisViolation>,
    /// Modifications during the phase that produced this graph.
    pub max_modifications: u64,
    pub mean_modifications: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub n: usize,
    pub gamma: f64,
    pub phase_length: f64,
    pub seed: u64,
    pub records: Vec<BootstrapPhase>,
    /// Whether the hypothesis held at every checked phase.
    pub chain_holds: Option<bool>,
    pub final_profile: Option<IsoProfile>,
    pub rewiring_totals: Vec<u64>,
    /// `tau = phases * phase_length`.
    pub tau: f64,
    pub max_rewiring: u64,
    pub rewiring_threshold: f64,
    pub rewiring_within_threshold: bool,
}

fn check(
    graph: &PhaseGraph,
    hyp: &ExpansionHypothesis,
) -> Result<(bool, Option<HypothesisViolation>, IsoProfile)> {
    let profile = profile_exact(graph, graph.n() / 2, DEFAULT_PROFILE_BUDGET)?;
    let c = check_hypothesis(&profile, hyp);
    Ok((c.holds, c.first_violation, profile))
}

pub fn run_bootstrap(params: &BootstrapParams) -> Result<BootstrapReport> {
    let n = params.n;
    if n < 3 {
        return Err(Error::InvalidParameter(format!("n must be >= 3, got {n}")));
    }
    if params.verify && n > DEFAULT_PROFILE_BUDGET {
        return Err(Error::BudgetExceeded {
            n,
            budget: DEFAULT_PROFILE_BUDGET,
        });
    }
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be > 0, got {}",
            params.gamma
        )));
    }
    if !(params.phase_length > 0.0 && params.phase_length.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "phase length must be > 0, got {}",
            params.phase_length
        )));
    }
    let phases = params.phase_count();
    let mut rng = stream(params.seed, 0);
    let mut config = PointerConfig::random(n, &mut rng)?;
    let mut records = Vec::with_capacity(phases + 1);
    let mut totals = vec![0u64; n];
    let mut last_profile = None;

    // the first phase moves blue on the ring plus red pointers
    let mut graph_color = SimParams::moving_color(0).other();
    let mut record = BootstrapPhase {
        phase: 0,
        d_f: 2.0,
        graph_color,
        hypothesis_holds: None,
        first_violation: None,
        max_modifications: 0,
        mean_modifications: 0.0,
    };
    for f in 0..=phases {
        if params.verify {
            let hyp = ExpansionHypothesis::new(params.gamma, record.d_f)?;
            let (holds, violation, profile) =
                check(&PhaseGraph::from_config(&config, graph_color), &hyp)?;
            record.hypothesis_holds = Some(holds);
            record.first_violation = violation;
            last_profile = Some(profile);
        }
        records.push(record);
        if f == phases {
            break;
        }
        let moving = SimParams::moving_color(f);
        let (next, stats) = simulate_phase(
            &config,
            moving,
            params.phase_length,
            params.counting,
            &mut rng,
        )?;
        for (t, m) in totals.iter_mut().zip(&stats.per_node_modifications) {
            *t += m;
        }
        config = next;
        graph_color = moving;
        record = BootstrapPhase {
            phase: f + 1,
            d_f: 2f64.powi(f as i32 + 2),
            graph_color,
            hypothesis_holds: None,
            first_violation: None,
            max_modifications: stats.max_modifications(),
            mean_modifications: stats.mean_modifications(),
        };
    }
    let chain_holds = params
        .verify
        .then(|| records.iter().all(|r| r.hypothesis_holds == Some(true)));
    let tau = phases as f64 * params.phase_length;
    let max_rewiring = totals.iter().copied().max().unwrap_or(0);
    let rewiring_threshold = 16.0 * tau;
    Ok(BootstrapReport {
        n,
        gamma: params.gamma,
        phase_length: params.phase_length,
        seed: params.seed,
        records,
        chain_holds,
        final_profile: last_profile,
        rewiring_totals: totals,
        tau,
        max_rewiring,
        rewiring_threshold,
        rewiring_within_threshold: (max_rewiring as f64) <= rewiring_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_levels_double() {
        let r = run_bootstrap(&BootstrapParams::new(10, 0.25, 1.0, 3)).unwrap();
        assert_eq!(r.records.len(), 5);
        for (f, rec) in r.records.iter().enumerate() {
            assert_eq!(rec.phase, f);
            assert_eq!(rec.d_f, 2f64.powi(f as i32 + 1));
        }
        assert_eq!(r.records[0].hypothesis_holds, Some(true));
        assert_eq!(r.records[0].graph_color, Color::Red);
        assert_eq!(r.records[1].graph_color, Color::Blue);
    }

    #[test]
    fn simulation_only_mode_skips_profiles() {
        let mut p = BootstrapParams::new(64, 0.25, 1.0, 1);
        p.verify = false;
        let r = run_bootstrap(&p).unwrap();
        assert!(r.chain_holds.is_none());
        assert!(r.final_profile.is_none());
        assert_eq!(r.records.len(), 7);
        p.verify = true;
        assert!(matches!(
            run_bootstrap(&p),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
