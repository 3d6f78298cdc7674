//! Laplacian machinery: spectral gaps, the heat kernel, the partial-spread
//! bound, collapsed graphs, the sorted-mass derivative bound, the auxiliary
//! jump process used for large sets, and Chernoff-type tails.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PhaseGraph;

/// Uniformization stops once the remaining Poisson weight is below this.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;

/// Slack allowed before a checked inequality counts as violated.
pub const INEQUALITY_TOLERANCE: f64 = 1e-9;

/// Cramér transform of a unit-mean Poisson variable, `h(x) = x ln x - x + 1`,
/// with `h(0) = 1`.
pub fn cramer(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x * x.ln() - x + 1.0
    }
}

/// Lower-tail Chernoff bound `P(X <= r mu) <= exp(-mu h(r))` for a sum of
/// negatively associated indicators with mean `mu`.
pub fn chernoff_tail(mu: f64, r: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "mean must be > 0, got {mu}"
        )));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "lower-tail ratio must be in (0,1), got {r}"
        )));
    }
    Ok((-mu * cramer(r)).exp())
}

/// Weighted undirected graph seen through its Laplacian `L = D - A`.
/// Self-loops do not enter `L` and are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianView {
    n: usize,
    adjacency: DMatrix<f64>,
    degrees: Vec<f64>,
    max_degree: f64,
}

impl LaplacianView {
    pub fn from_graph(graph: &PhaseGraph) -> Self {
        let n = graph.n();
        let counts = graph.adjacency_counts();
        let adjacency = DMatrix::from_fn(n, n, |i, j| counts[i * n + j] as f64);
        Self::build(adjacency)
    }

    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        if !adjacency.is_square() || adjacency.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "adjacency must be square and nonempty".into(),
            ));
        }
        let n = adjacency.nrows();
        for i in 0..n {
            for j in 0..n {
                let a = adjacency[(i, j)];
                if !(a >= 0.0 && a.is_finite()) || a != adjacency[(j, i)] {
                    return Err(Error::InvalidParameter(format!(
                        "adjacency must be symmetric, finite and nonnegative (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(Self::build(adjacency))
    }

    fn build(mut adjacency: DMatrix<f64>) -> Self {
        let n = adjacency.nrows();
        adjacency.fill_diagonal(0.0);
        let degrees: Vec<f64> = (0..n).map(|i| adjacency.row(i).sum()).collect();
        let max_degree = degrees.iter().copied().fold(0.0, f64::max);
        LaplacianView {
            n,
            adjacency,
            degrees,
            max_degree,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.adjacency[(u, v)]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn max_degree(&self) -> f64 {
        self.max_degree
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency.clone();
        for i in 0..self.n {
            l[(i, i)] = self.degrees[i];
        }
        l
    }

    /// `L x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = self.adjacency.row(i);
                self.degrees[i] * x[i] - row.iter().zip(x).map(|(a, xj)| a * xj).sum::<f64>()
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in 0..self.n {
                if !seen[u] && self.adjacency[(v, u)] > 0.0 {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Eigenvalues of `L` in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub lambda2: f64,
    pub connected: bool,
}

/// Second-smallest Laplacian eigenvalue; exactly 0 for disconnected graphs.
pub fn spectral_gap(lap: &LaplacianView) -> Result<SpectralGap> {
    if lap.n() < 2 {
        return Err(Error::InvalidParameter(
            "spectral gap needs at least 2 nodes".into(),
        ));
    }
    if !lap.is_connected() {
        return Ok(SpectralGap {
            lambda2: 0.0,
            connected: false,
        });
    }
    Ok(SpectralGap {
        lambda2: lap.eigenvalues()[1],
        connected: true,
    })
}

/// `phi^2 / (2 max_degree)`.
pub fn lambda_star(phi_ratio: f64, max_degree: f64) -> f64 {
    phi_ratio * phi_ratio / (2.0 * max_degree)
}

/// Probability vector on the nodes at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassVector {
    pub values: Vec<f64>,
    pub time: f64,
}

impl MassVector {
    pub const NEG_TOL: f64 = 1e-12;
    pub const SUM_TOL: f64 = 1e-10;

    pub fn new(values: Vec<f64>, time: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty mass vector".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= -Self::NEG_TOL)) {
            return Err(Error::InvalidParameter(format!(
                "mass vector has negative entry {v}"
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "mass vector sums to {total}"
            )));
        }
        Ok(MassVector { values, time })
    }

    pub fn point_mass(n: usize, node: usize) -> Result<Self> {
        if node >= n {
            return Err(Error::InvalidParameter(format!(
                "node {node} outside 0..{n}"
            )));
        }
        let mut v = vec![0.0; n];
        v[node] = 1.0;
        Self::new(v, 0.0)
    }

    pub fn uniform_on(n: usize, nodes: &[usize]) -> Result<Self> {
        if nodes.is_empty() || nodes.iter().any(|&v| v >= n) {
            return Err(Error::InvalidParameter(
                "uniform mass needs nodes inside 0..n".into(),
            ));
        }
        let mut v = vec![0.0; n];
        for &i in nodes {
            v[i] += 1.0 / nodes.len() as f64;
        }
        Self::new(v, 0.0)
    }

    /// Node order by decreasing mass, ties broken by ascending index.
    pub fn sorted_order(&self) -> Vec<usize> {
        sorted_order(&self.values)
    }

    /// `pi_(1) >= pi_(2) >= ...`.
    pub fn sorted_desc(&self) -> Vec<f64> {
        self.sorted_order()
            .into_iter()
            .map(|i| self.values[i])
            .collect()
    }

    /// `pi_[m]` for `m = 0..=n`: mass on the `m` heaviest nodes.
    pub fn sorted_prefix(&self) -> Vec<f64> {
        prefix_sums(&self.sorted_desc())
    }
}

pub(crate) fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Sort order that `exp(-sL) values` keeps for all small `s > 0`: entries
/// tied in value are compared on the successive Taylor coefficients
/// `(-L)^j values / j!`, and only then by index.
pub fn right_limit_order(lap: &LaplacianView, values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let tied = |c: &[f64], a: usize, b: usize, tol: f64| (c[a] - c[b]).abs() <= tol;
    let scale = |c: &[f64]| 1e-13 * c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut idx = sorted_order(values);
    let tol0 = scale(values);
    if idx.windows(2).all(|w| !tied(values, w[0], w[1], tol0)) {
        return idx;
    }
    let mut coeffs = vec![values.to_vec()];
    for j in 0..n {
        let next: Vec<f64> = lap
            .apply(&coeffs[j])
            .into_iter()
            .map(|x| -x / (j + 1) as f64)
            .collect();
        coeffs.push(next);
    }
    let tols: Vec<f64> = coeffs.iter().map(|c| scale(c)).collect();
    idx.sort_by(|&a, &b| {
        for (c, &tol) in coeffs.iter().zip(&tols) {
            if !tied(c, a, b, tol) {
                return c[b].total_cmp(&c[a]);
            }
        }
        a.cmp(&b)
    });
    idx
}

pub(crate) fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for x in v {
        acc += x;
        out.push(acc);
    }
    out
}

/// `exp(-t L) x` by uniformization: with `P = I - L / q` and `q` the maximum
/// degree, `exp(-t L) = sum_m e^{-qt} (qt)^m / m! P^m`. The series is cut
/// once the remaining Poisson weight is below `UNIFORMIZATION_TAIL`.
pub fn heat_apply(lap: &LaplacianView, x: &[f64], t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    if x.len() != lap.n() {
        return Err(Error::InvalidParameter(
            "vector length does not match graph".into(),
        ));
    }
    let q = lap.max_degree();
    if t == 0.0 || q == 0.0 {
        return Ok(x.to_vec());
    }
    let qt = q * t;
    let ln_qt = qt.ln();
    let max_terms = (qt + 60.0 * qt.sqrt() + 200.0) as usize;
    let mut term = x.to_vec();
    let mut out = vec![0.0; x.len()];
    let mut log_w = -qt;
    let mut cumulative = 0.0;
    for m in 0..=max_terms {
        if m > 0 {
            log_w += ln_qt - (m as f64).ln();
            let lx = lap.apply(&term);
            for (ti, li) in term.iter_mut().zip(lx) {
                *ti -= li / q;
            }
        }
        let w = log_w.exp();
        cumulative += w;
        for (o, ti) in out.iter_mut().zip(&term) {
            *o += w * ti;
        }
        if m as f64 >= qt && 1.0 - cumulative <= UNIFORMIZATION_TAIL {
            break;
        }
    }
    Ok(out)
}

pub fn heat_kernel(lap: &LaplacianView, pi0: &MassVector, t: f64) -> Result<MassVector> {
    let values = heat_apply(lap, &pi0.values, t)?;
    Ok(MassVector {
        values,
        time: pi0.time + t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadViolation {
    pub s: usize,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub k: usize,
    pub phi_ratio: f64,
    pub lambda_star: f64,
    pub instances: usize,
    pub min_slack: f64,
    pub violations: Vec<SpreadViolation>,
}

/// Checks `pi_[s](t) <= s/(k+1) + sqrt(k+1) exp(-lambda* t)` for every
/// `s <= k` and every `t` in the grid, where `pi(t)` is the heat kernel from
/// `pi0` and `lambda* = phi_ratio^2 / (2 max_degree)`.
pub fn check_partial_spread(
    lap: &LaplacianView,
    k: usize,
    phi_ratio: f64,
    pi0: &MassVector,
    t_grid: &[f64],
) -> Result<SpreadReport> {
    if k == 0 || k > lap.n() / 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..={}",
            lap.n() / 2
        )));
    }
    let ls = lambda_star(phi_ratio, lap.max_degree());
    let kp1 = (k + 1) as f64;
    let mut report = SpreadReport {
        k,
        phi_ratio,
        lambda_star: ls,
        instances: 0,
        min_slack: f64::INFINITY,
        violations: Vec::new(),
    };
    for &t in t_grid {
        let prefix = heat_kernel(lap, pi0, t)?.sorted_prefix();
        let decay = kp1.sqrt() * (-ls * t).exp();
        for s in 1..=k {
            let lhs = prefix[s];
            let rhs = s as f64 / kp1 + decay;
            report.instances += 1;
            report.min_slack = report.min_slack.min(rhs - lhs);
            if lhs > rhs + INEQUALITY_TOLERANCE {
                report.violations.push(SpreadViolation { s, t, lhs, rhs });
            }
        }
    }
    Ok(report)
}

/// Graph on `k + 1` nodes: node `u < k` is `ordering[u]`, node `k` merges
/// every other node. Edges inside the merged block are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedGraph {
    pub ordering: Vec<usize>,
    pub k: usize,
    pub view: LaplacianView,
}

pub fn collapse(lap: &LaplacianView, ordering: &[usize], k: usize) -> Result<CollapsedGraph> {
    let n = lap.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..{n}, got {k}"
        )));
    }
    check_permutation(ordering, n)?;
    let mut a = DMatrix::zeros(k + 1, k + 1);
    for u in 0..k {
        let su = ordering[u];
        for v in 0..k {
            a[(u, v)] = lap.weight(su, ordering[v]);
        }
        let merged: f64 = ordering[k..].iter().map(|&sv| lap.weight(su, sv)).sum();
        a[(u, k)] = merged;
        a[(k, u)] = merged;
    }
    Ok(CollapsedGraph {
        ordering: ordering.to_vec(),
        k,
        view: LaplacianView::build(a),
    })
}

fn check_permutation(ordering: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if ordering.len() != n
        || !ordering
            .iter()
            .all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
    {
        return Err(Error::InvalidParameter(
            "ordering must be a permutation of the nodes".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseViolation {
    pub ordering: Vec<usize>,
    pub lambda2: f64,
    pub lambda_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub k: usize,
    pub lambda_star: f64,
    pub instances: usize,
    /// Smallest `lambda2 / lambda*` seen; infinite when `lambda* = 0`.
    pub min_ratio: f64,
    pub violations: Vec<CollapseViolation>,
}

/// Checks `lambda2(collapsed) >= phi_ratio^2 / (2 max_degree)` for each
/// ordering, with the maximum degree taken in the base graph.
pub fn check_collapsed_gap(
    lap: &LaplacianView,
    k: usize,
    phi_ratio: f64,
    orderings: &[Vec<usize>],
) -> Result<CollapseReport> {
    let ls = lambda_star(phi_ratio, lap.max_degree());
    let mut report = CollapseReport {
        k,
        lambda_star: ls,
        instances: 0,
        min_ratio: f64::INFINITY,
        violations: Vec::new(),
    };
    for ordering in orderings {
        let c = collapse(lap, ordering, k)?;
        let gap = spectral_gap(&c.view)?;
        report.instances += 1;
        if ls > 0.0 {
            report.min_ratio = report.min_ratio.min(gap.lambda2 / ls);
        }
        if gap.lambda2 < ls - INEQUALITY_TOLERANCE {
            report.violations.push(CollapseViolation {
                ordering: ordering.clone(),
                lambda2: gap.lambda2,
                lambda_star: ls,
            });
        }
    }
    Ok(report)
}

/// Orderings that the sorted heat-kernel mass actually passes through:
/// the sort order of `exp(-tL) e_v` for every start node `v` and every `t`.
pub fn sorted_order_candidates(lap: &LaplacianView, t_grid: &[f64]) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for v in 0..lap.n() {
        let pi0 = MassVector::point_mass(lap.n(), v)?;
        for &t in t_grid {
            let order = heat_kernel(lap, &pi0, t)?.sorted_order();
            if !out.contains(&order) {
                out.push(order);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBound {
    /// `d/dt pi_[m]`.
    pub lhs: f64,
    /// `-4 sum_{j=1}^{d_m} (pi_(m-j+1) - pi_(m-j+1+d_m))`.
    pub rhs: f64,
    pub d_m: usize,
}

/// Exact time derivative of the top-`m` mass under `d pi / dt = -L pi`,
/// next to the bound obtained from a cut of at least `min(gamma m, d)` edges
/// and degree at most 4. Ties in the sort are broken by node index.
pub fn sorted_mass_derivative_bound(
    lap: &LaplacianView,
    pi: &[f64],
    m: usize,
    gamma: f64,
    d: f64,
) -> Result<DerivativeBound> {
    let n = lap.n();
    if pi.len() != n || m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!(
            "need m in 1..{n} and a length-{n} vector"
        )));
    }
    let order = sorted_order(pi);
    let mut top = vec![false; n];
    for &i in &order[..m] {
        top[i] = true;
    }
    let mut lhs = 0.0;
    for &i in &order[..m] {
        for j in 0..n {
            if !top[j] {
                lhs += lap.weight(i, j) * (pi[j] - pi[i]);
            }
        }
    }
    let d_m = (((gamma * m as f64).min(d) / 4.0).floor() as usize)
        .min(n - m)
        .min(m);
    let sorted: Vec<f64> = order.iter().map(|&i| pi[i]).collect();
    let rhs = -4.0
        * (1..=d_m)
            .map(|j| sorted[m - j] - sorted[m - j + d_m])
            .sum::<f64>();
    Ok(DerivativeBound { lhs, rhs, d_m })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuProcess {
    pub values: Vec<f64>,
    /// `nu_[i]` for `i = 0..=n`.
    pub prefix: Vec<f64>,
    /// Jump size `floor(d / 4)`.
    pub jump: usize,
    /// Sites (1-based, inclusive) of the window after clipping to `1..=n`.
    pub window: (usize, usize),
    /// Whether the window `[k - 2/3 k_d, k + 2/3 k_d]` stuck out of `1..=n`.
    pub clipped: bool,
    /// `floor(d / 4) = 0`: nothing moves.
    pub degenerate: bool,
}

/// Window sites and jump size for the auxiliary process; sites are 1-based.
pub fn nu_window(n: usize, k: usize, gamma: f64, d: f64) -> Result<(usize, usize, usize, bool)> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k must be in 1..={n}")));
    }
    if !(gamma > 0.0 && d > 0.0) {
        return Err(Error::InvalidParameter(
            "gamma and d must be positive".into(),
        ));
    }
    let jump = (d / 4.0).floor() as usize;
    let half_width = (2.0 / 3.0) * (4.0 / gamma) * d;
    let lo_real = k as f64 - half_width;
    let hi_real = k as f64 + half_width;
    let lo = lo_real.ceil().max(1.0) as usize;
    let hi = (hi_real.floor().min(n as f64)) as usize;
    let clipped = lo_real < 1.0 || hi_real > n as f64;
    Ok((lo, hi, jump, clipped))
}

/// Law at time `t` of the walk started uniform on `1..=k` that jumps by
/// `+-floor(d/4)` at rate 4 whenever both ends of the jump lie in the window
/// `I = [k - (2/3) k_d, k + (2/3) k_d]`, `k_d = 4 d / gamma`.
pub fn aux_nu_process(n: usize, k: usize, gamma: f64, d: f64, t: f64) -> Result<NuProcess> {
    let (lo, hi, jump, clipped) = nu_window(n, k, gamma, d)?;
    let mut init = vec![0.0; n];
    for v in init.iter_mut().take(k) {
        *v = 1.0 / k as f64;
    }
    let degenerate = jump == 0;
    let values = if degenerate {
        init
    } else {
        let mut a = DMatrix::zeros(n, n);
        for i in lo..=hi {
            let j = i + jump;
            if j <= hi {
                a[(i - 1, j - 1)] = 4.0;
                a[(j - 1, i - 1)] = 4.0;
            }
        }
        heat_apply(&LaplacianView::build(a), &init, t)?
    };
    let prefix = prefix_sums(&values);
    Ok(NuProcess {
        values,
        prefix,
        jump,
        window: (lo, hi),
        clipped,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub k: usize,
    pub steps: usize,
    pub step_size: f64,
    /// Largest `pi_(i)(t) - nu_{min(i, k+1)}(t)` seen.
    pub max_excess: f64,
    pub violations: usize,
}

/// Time-stepped check that the sorted law is dominated by the collapsed
/// walk: `pi_(i)(t) <= nu_{min(i, k+1)}(t)`. Both evolve by explicit Euler;
/// the collapsed graph is rebuilt every step from the order `pi` keeps just
/// after the current time, while `nu` keeps its rank-indexed values.
pub fn check_collapsed_domination(
    lap: &LaplacianView,
    k: usize,
    pi0: &MassVector,
    t_end: f64,
    tolerance: f64,
) -> Result<DominationReport> {
    let n = lap.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("k must be in 1..{n}")));
    }
    let q = lap.max_degree().max(1.0);
    let step_size = 1e-3 / q;
    let steps = (t_end / step_size).ceil() as usize;
    let mut pi = pi0.values.clone();
    let order = sorted_order(&pi);
    let mut nu: Vec<f64> = order[..k].iter().map(|&i| pi[i]).collect();
    nu.push(order[k..].iter().map(|&i| pi[i]).sum());
    let mut report = DominationReport {
        k,
        steps,
        step_size,
        max_excess: f64::NEG_INFINITY,
        violations: 0,
    };
    for step in 0..=steps {
        let order = right_limit_order(lap, &pi);
        for (rank, &node) in order.iter().enumerate() {
            let excess = pi[node] - nu[rank.min(k)];
            report.max_excess = report.max_excess.max(excess);
            if excess > tolerance {
                report.violations += 1;
            }
        }
        if step == steps {
            break;
        }
        let collapsed = collapse(lap, &order, k)?;
        let dnu = collapsed.view.apply(&nu);
        let dpi = lap.apply(&pi);
        for (v, dv) in nu.iter_mut().zip(dnu) {
            *v -= step_size * dv;
        }
        for (p, dp) in pi.iter_mut().zip(dpi) {
            *p -= step_size * dp;
        }
    }
    Ok(report)
}
