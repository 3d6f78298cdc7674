//! Exact isoperimetric profiles by subset enumeration, the expansion
//! hypothesis predicate, arc-structured subset enumeration and the union
//! bound over arc-structured sets.
//!
//! Two profile variants are kept side by side and never aliased:
//! `phi_card[k] = min_{|S|<=k} |E(S, S^c)|` (cardinality form) and
//! `phi_ratio[k] = min_{|S|<=k} |E(S, S^c)| / |S|` (ratio form).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PhaseGraph;
use crate::spectral::chernoff_tail;

/// Largest N for which `profile_exact` will enumerate all subsets.
pub const DEFAULT_PROFILE_BUDGET: usize = 22;

/// Bits of the subset index fixed per parallel chunk.
const CHUNK_BITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoProfile {
    pub n: usize,
    pub kmax: usize,
    /// `phi_card[k-1]`: minimum boundary over sets of size at most `k`.
    pub phi_card: Vec<usize>,
    /// `phi_ratio[k-1]`: minimum boundary/size over sets of size at most `k`.
    pub phi_ratio: Vec<f64>,
    /// `boundary_at_size[k-1]`: minimum boundary over sets of size exactly `k`.
    pub boundary_at_size: Vec<usize>,
    pub card_witness: Vec<Vec<usize>>,
    pub ratio_witness: Vec<Vec<usize>>,
    pub size_witness: Vec<Vec<usize>>,
}

impl IsoProfile {
    pub fn card(&self, k: usize) -> usize {
        self.phi_card[k - 1]
    }

    pub fn ratio(&self, k: usize) -> f64 {
        self.phi_ratio[k - 1]
    }

    pub fn boundary_at(&self, k: usize) -> usize {
        self.boundary_at_size[k - 1]
    }

    /// Assembles both cumulative variants from exact-size minima and their
    /// witnesses. Ties keep the smaller size.
    pub fn from_size_minima(n: usize, minima: Vec<(usize, Vec<usize>)>) -> Self {
        let kmax = minima.len();
        let mut phi_card = Vec::with_capacity(kmax);
        let mut phi_ratio = Vec::with_capacity(kmax);
        let mut card_witness = Vec::with_capacity(kmax);
        let mut ratio_witness = Vec::with_capacity(kmax);
        let mut best_card: Option<(usize, usize)> = None; // (boundary, size)
        let mut best_ratio: Option<(usize, usize)> = None;
        for (idx, (b, _)) in minima.iter().enumerate() {
            let s = idx + 1;
            if best_card.is_none_or(|(bb, _)| *b < bb) {
                best_card = Some((*b, s));
            }
            // b/s < bb/ss  <=>  b*ss < bb*s
            if best_ratio.is_none_or(|(bb, ss)| b * ss < bb * s) {
                best_ratio = Some((*b, s));
            }
            let (cb, cs) = best_card.unwrap();
            let (rb, rs) = best_ratio.unwrap();
            phi_card.push(cb);
            card_witness.push(minima[cs - 1].1.clone());
            phi_ratio.push(rb as f64 / rs as f64);
            ratio_witness.push(minima[rs - 1].1.clone());
        }
        let (boundary_at_size, size_witness) = minima.into_iter().unzip();
        IsoProfile {
            n,
            kmax,
            phi_card,
            phi_ratio,
            boundary_at_size,
            card_witness,
            ratio_witness,
            size_witness,
        }
    }
}

/// Exact profile for `k = 1..=kmax` by Gray-code enumeration of all subsets
/// with O(degree) boundary updates. Refuses graphs above `budget` nodes.
pub fn profile_exact(graph: &PhaseGraph, kmax: usize, budget: usize) -> Result<IsoProfile> {
    let n = graph.n();
    if n > budget || n > 30 {
        return Err(Error::BudgetExceeded {
            n,
            budget: budget.min(30),
        });
    }
    if kmax == 0 || kmax > n / 2 {
        return Err(Error::InvalidParameter(format!(
            "kmax must be in 1..={}, got {kmax}",
            n / 2
        )));
    }
    let nb = graph.neighbor_lists();
    let top_bits = CHUNK_BITS.min(n - 1);
    let low_bits = n - top_bits;
    let chunks: Vec<Vec<(usize, u32)>> = (0u32..1 << top_bits)
        .into_par_iter()
        .map(|top| enumerate_chunk(graph, &nb, top << low_bits, low_bits, kmax))
        .collect();
    let mut best = vec![(usize::MAX, u32::MAX); kmax];
    for chunk in chunks {
        for (slot, cand) in best.iter_mut().zip(chunk) {
            if cand < *slot {
                *slot = cand;
            }
        }
    }
    let minima = best
        .into_iter()
        .map(|(b, mask)| (b, (0..n).filter(|&i| mask >> i & 1 == 1).collect()))
        .collect();
    Ok(IsoProfile::from_size_minima(n, minima))
}

fn enumerate_chunk(
    graph: &PhaseGraph,
    nb: &[Vec<usize>],
    base: u32,
    low_bits: usize,
    kmax: usize,
) -> Vec<(usize, u32)> {
    let n = graph.n();
    let mut best = vec![(usize::MAX, u32::MAX); kmax];
    let mut inside: Vec<bool> = (0..n).map(|i| base >> i & 1 == 1).collect();
    let mut mask = base;
    let mut size = base.count_ones() as usize;
    let mut boundary = graph.boundary_of(&inside);
    let mut record = |mask: u32, size: usize, boundary: usize| {
        if size >= 1 && size <= kmax && (boundary, mask) < best[size - 1] {
            best[size - 1] = (boundary, mask);
        }
    };
    record(mask, size, boundary);
    for g in 1u64..(1u64 << low_bits) {
        let v = g.trailing_zeros() as usize;
        let linked = nb[v].iter().filter(|&&u| inside[u]).count();
        let outside = nb[v].len() - linked;
        if inside[v] {
            boundary = boundary + linked - outside;
            size -= 1;
        } else {
            boundary = boundary + outside - linked;
            size += 1;
        }
        inside[v] = !inside[v];
        mask ^= 1 << v;
        record(mask, size, boundary);
    }
    best
}

/// Expansion hypothesis `|E(S, S^c)| >= min(gamma |S|, d)` for all
/// `|S| <= N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionHypothesis {
    pub gamma: f64,
    pub d: f64,
    pub beta: Option<f64>,
}

impl ExpansionHypothesis {
    pub fn new(gamma: f64, d: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("d must be > 0, got {d}")));
        }
        Ok(ExpansionHypothesis {
            gamma,
            d,
            beta: None,
        })
    }

    /// `gamma = ln(N)^(-beta)`.
    pub fn from_beta(n: usize, beta: f64, d: f64) -> Result<Self> {
        if !(beta > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "beta must be > 1, got {beta}"
            )));
        }
        let mut h = Self::new((n as f64).ln().powf(-beta), d)?;
        h.beta = Some(beta);
        Ok(h)
    }

    pub fn required(&self, size: usize) -> f64 {
        (self.gamma * size as f64).min(self.d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisViolation {
    pub k: usize,
    pub boundary: usize,
    pub required: f64,
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    pub first_violation: Option<HypothesisViolation>,
}

/// Checks every set size `k <= kmax` against `min(gamma k, d)`, using the
/// exact-size minima of the profile.
pub fn check_hypothesis(profile: &IsoProfile, hyp: &ExpansionHypothesis) -> HypothesisCheck {
    for k in 1..=profile.kmax {
        let boundary = profile.boundary_at(k);
        let required = hyp.required(k);
        if (boundary as f64) < required {
            return HypothesisCheck {
                holds: false,
                first_violation: Some(HypothesisViolation {
                    k,
                    boundary,
                    required,
                    witness: profile.size_witness[k - 1].clone(),
                }),
            };
        }
    }
    HypothesisCheck {
        holds: true,
        first_violation: None,
    }
}

/// All compositions of `total` into `parts` positive integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in 1..=rem.saturating_sub(parts - 1) {
            cur.push(first);
            rec(rem - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if parts >= 1 && total >= parts {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// Size-`k` subsets of the `n`-cycle made of exactly `arcs` maximal runs.
///
/// Each set is generated once, anchored at its smallest run start: run
/// lengths and gap lengths are compositions of `k` and `n - k`, and the last
/// run start must not wrap past node `n - 1`.
pub fn enumerate_arc_sets(n: usize, k: usize, arcs: usize) -> impl Iterator<Item = Vec<usize>> {
    let feasible = arcs >= 1 && k >= 1 && k < n && arcs <= k.min(n - k);
    let runs = if feasible {
        compositions(k, arcs)
    } else {
        Vec::new()
    };
    let gaps = if feasible {
        compositions(n - k, arcs)
    } else {
        Vec::new()
    };
    let combos: Vec<(Vec<usize>, Vec<usize>)> = runs
        .iter()
        .flat_map(|r| gaps.iter().map(move |g| (r.clone(), g.clone())))
        .collect();
    combos.into_iter().flat_map(move |(runs, gaps)| {
        // offset of the last run start relative to the first
        let span: usize = runs[..arcs - 1]
            .iter()
            .zip(&gaps[..arcs - 1])
            .map(|(r, g)| r + g)
            .sum();
        (0..n.saturating_sub(span)).map(move |start| {
            let mut set = Vec::with_capacity(k);
            let mut pos = start;
            for (r, g) in runs.iter().zip(&gaps) {
                set.extend((pos..pos + r).map(|v| v % n));
                pos += r + g;
            }
            set.sort_unstable();
            set
        })
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Closed-form count `(n / arcs) C(k-1, arcs-1) C(n-k-1, arcs-1)` of
/// `arcs`-run subsets of size `k`.
pub fn arc_set_count(n: usize, k: usize, arcs: usize) -> u128 {
    if arcs == 0 || k == 0 || k >= n || arcs > k.min(n - k) {
        return 0;
    }
    n as u128 * binomial(k - 1, arcs - 1) * binomial(n - k - 1, arcs - 1) / arcs as u128
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnionCase {
    /// `k < 2/gamma`: every such set already has boundary at least `gamma k`.
    BelowRange,
    /// `gamma k <= 2d`.
    Linear,
    /// `gamma k > 2d`.
    Saturated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionTerm {
    pub arcs: usize,
    pub threshold: f64,
    pub tail: f64,
    pub term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionBound {
    pub k: usize,
    pub case: UnionCase,
    /// `(2 gamma)^{-1} min(gamma k, 2d)`.
    pub mean: f64,
    /// `min(gamma k, 2d)`.
    pub target: f64,
    pub terms: Vec<UnionTerm>,
    pub total: f64,
}

/// Union bound on the probability that some size-`k` set misses
/// `|E(S, S^c)| >= min(gamma k, 2d)`:
/// `sum_l N^{2l} P(|F| <= min(gamma k, 2d) - 2l)`, with the inner
/// probability bounded by the lower-tail Chernoff bound at mean
/// `(2 gamma)^{-1} min(gamma k, 2d)`.
pub fn union_bound_pk(n: usize, k: usize, gamma: f64, d: f64) -> Result<UnionBound> {
    if n < 2 || k == 0 {
        return Err(Error::InvalidParameter("need n >= 2 and k >= 1".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) || !(d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need gamma in (0,1] and d > 0, got {gamma}, {d}"
        )));
    }
    let gk = gamma * k as f64;
    let target = gk.min(2.0 * d);
    let mean = target / (2.0 * gamma);
    if (k as f64) < 2.0 / gamma {
        return Ok(UnionBound {
            k,
            case: UnionCase::BelowRange,
            mean,
            target,
            terms: vec![],
            total: 0.0,
        });
    }
    let case = if gk <= 2.0 * d {
        UnionCase::Linear
    } else {
        UnionCase::Saturated
    };
    let ln_n = (n as f64).ln();
    let mut terms = Vec::new();
    for arcs in 1..=k {
        let threshold = target - 2.0 * arcs as f64;
        if threshold < 0.0 {
            break;
        }
        let r = threshold / mean;
        let tail = if r >= 1.0 {
            1.0
        } else if r == 0.0 {
            (-mean).exp()
        } else {
            chernoff_tail(mean, r)?
        };
        let term = (2.0 * arcs as f64 * ln_n + tail.ln()).exp();
        terms.push(UnionTerm {
            arcs,
            threshold,
            tail,
            term,
        });
    }
    let total = terms.iter().map(|t| t.term).sum();
    Ok(UnionBound {
        k,
        case,
        mean,
        target,
        terms,
        total,
    })
}
