//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rewire::harness::{
    collapse_campaign, derivative_campaign, exclusion_duality_test, majorization_campaign,
    random_family, rewiring_test, run_bootstrap, spread_campaign, uniformity_test, BootstrapParams,
    ProfiledGraph,
};
use rewire::paths::{default_walks_per_source, hit_probability_check, visit_threshold};
use rewire::{
    arc_set_count, build_path_system, path_length_bound, stream, Color, InterchangeState,
    ModCounting, PathParams, PhaseGraph, PointerConfig,
};

const SEED: u64 = 20_240_611;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("structural invariants", structural),
        ("stationarity", stationarity),
        ("exclusion duality", duality),
        ("rewiring rate", rewiring),
        ("partial spread", partial_spread),
        ("collapsed gap", collapsed_gap),
        ("cheeger sanity", cheeger),
        ("sorted-mass derivative", derivative),
        ("majorization", majorization),
        ("path system", path_system),
        ("arc counting", counting),
        ("bootstrap base case", bootstrap),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = check();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {name}: {verdict} ({:.1}s) {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            out.detail
        );
        if !out.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter()
        .all(|&x| x < p.len() && !std::mem::replace(&mut seen[x], true))
}

fn structural() -> Outcome {
    let sizes = [4usize, 8, 16];
    let sequences = 100_000u64;
    let mut broken = 0u64;
    for s in 0..sequences {
        let n = sizes[(s % 3) as usize];
        let mut rng = stream(SEED, s);
        let mut config = PointerConfig::random(n, &mut rng).unwrap();
        let phases = rng.random_range(1..=4);
        for phase in 0..phases {
            let moving = if phase % 2 == 0 {
                Color::Blue
            } else {
                Color::Red
            };
            let graph = PhaseGraph::from_config(&config, moving.other());
            let mut state =
                InterchangeState::new(&graph, config.pointers(moving), ModCounting::OwnerOnly)
                    .unwrap();
            for _ in 0..rng.random_range(1..=32) {
                state.fire(rng.random_range(0..graph.edges().len()));
            }
            let ptrs = state.pointers().to_vec();
            let inverse_ok = (0..n).all(|a| state.owner_of(ptrs[a]) == a);
            let fixed = config.pointers(moving.other()).to_vec();
            let next = config.with_pointers(moving, ptrs.clone()).unwrap();
            let ok = is_permutation(&ptrs)
                && inverse_ok
                && next.pointers(moving.other()) == fixed.as_slice()
                && PhaseGraph::from_config(&next, moving).is_regular(4)
                && PhaseGraph::from_config(&next, moving.other()).is_regular(4);
            if !ok {
                broken += 1;
            }
            config = next;
        }
    }

    // cut identity against a direct count of crossing edges and arcs
    let mut cut_checks = 0u64;
    let mut cut_broken = 0u64;
    for n in 3..=12usize {
        for c in 0..4u64 {
            let mut rng = stream(SEED ^ 0xC0, (n as u64) << 8 | c);
            let config = PointerConfig::random(n, &mut rng).unwrap();
            for color in [Color::Red, Color::Blue] {
                let graph = PhaseGraph::from_config(&config, color);
                let ptrs = config.pointers(color);
                for mask in 1u32..(1 << n) - 1 {
                    let inside = |v: usize| mask >> v & 1 == 1;
                    let members: Vec<usize> = (0..n).filter(|&v| inside(v)).collect();
                    let ring = (0..n).filter(|&v| inside(v) != inside((v + 1) % n)).count();
                    let pointer = (0..n).filter(|&v| inside(v) != inside(ptrs[v])).count();
                    let arcs = (0..n)
                        .filter(|&v| inside(v) && !inside((v + n - 1) % n))
                        .count();
                    let cut = graph.cut(&members).unwrap();
                    cut_checks += 1;
                    if cut.boundary_total != ring + pointer
                        || cut.boundary_pointer != pointer
                        || cut.arcs != arcs
                        || cut.boundary_total != cut.boundary_pointer + 2 * cut.arcs
                    {
                        cut_broken += 1;
                    }
                }
            }
        }
    }
    Outcome {
        pass: broken == 0 && cut_broken == 0,
        detail: format!(
            "{sequences} sequences, {broken} broken; {cut_checks} cuts, {cut_broken} identity failures"
        ),
    }
}

fn stationarity() -> Outcome {
    let n3 = uniformity_test(&PointerConfig::identity(3).unwrap(), 100.0, 100_000, SEED).unwrap();
    let n4 = uniformity_test(
        &PointerConfig::identity(4).unwrap(),
        100.0,
        1_000_000,
        SEED + 1,
    )
    .unwrap();
    Outcome {
        pass: n3.passes && n4.passes,
        detail: format!(
            "n=3 p={:.4}, n=4 p={:.4}",
            n3.chi_square.p_value, n4.chi_square.p_value
        ),
    }
}

fn duality() -> Outcome {
    let cases: Vec<(usize, usize, f64)> = [8usize, 16]
        .iter()
        .flat_map(|&n| [1, n / 4, n / 2].map(move |s| (n, s)))
        .flat_map(|(n, s)| [0.5, 2.0, 8.0].map(move |t| (n, s, t)))
        .collect();
    let family: usize = cases.iter().map(|c| c.0).sum();
    let mut worst = 0.0f64;
    let mut envelope = 0.0;
    let mut failures = 0;
    for (i, &(n, size, time)) in cases.iter().enumerate() {
        let mut rng = stream(SEED ^ 0xD0, i as u64);
        let config = PointerConfig::random(n, &mut rng).unwrap();
        let graph = PhaseGraph::from_config(&config, Color::Red);
        let mut owners: Vec<usize> = (0..n).collect();
        owners.shuffle(&mut rng);
        owners.truncate(size);
        let r = exclusion_duality_test(
            &graph,
            config.blue(),
            &owners,
            time,
            100_000,
            SEED + i as u64,
            family,
        )
        .unwrap();
        worst = worst.max(r.max_z);
        envelope = r.envelope_z;
        if !r.passes {
            failures += 1;
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!(
            "{} cases, {family} node tests, max z {worst:.2} vs family-wise 3 sigma envelope {envelope:.2}",
            cases.len()
        ),
    }
}

fn rewiring() -> Outcome {
    let rate = rewiring_test(16, 5.0, 4, 100, SEED).unwrap();
    let tails: Vec<_> = [1.0, 5.0]
        .iter()
        .map(|&tau| rewiring_test(16, tau / 2.0, 2, 2_000, SEED + 7).unwrap())
        .collect();
    let tail_text: Vec<String> = tails
        .iter()
        .map(|t| {
            format!(
                "tau={} freq {:.2e} <= {:.2e}",
                t.tau, t.tail_frequency, t.tail_bound
            )
        })
        .collect();
    Outcome {
        pass: rate.rate_passes && tails.iter().all(|t| t.tail_passes),
        detail: format!(
            "mean/phase {:.2} vs {:.0} ({:.1}%), {}",
            rate.mean_per_phase,
            rate.expected_per_phase,
            100.0 * rate.relative_deviation,
            tail_text.join(", ")
        ),
    }
}

/// Uniform random 4-regular multigraph from pairing 4N stubs.
fn configuration_model(n: usize, seed: u64, i: u64) -> PhaseGraph {
    let mut rng = stream(seed, i);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v; 4]).collect();
    stubs.shuffle(&mut rng);
    let pairs: Vec<(usize, usize)> = stubs.chunks(2).map(|p| (p[0], p[1])).collect();
    PhaseGraph::from_edges(n, &pairs).unwrap()
}

fn spectral_family() -> Vec<ProfiledGraph> {
    let mut graphs = Vec::new();
    for (j, n) in [8usize, 12, 16].into_iter().enumerate() {
        graphs.extend(random_family(n, 7, SEED + j as u64).unwrap());
        for i in 0..3 {
            let g = configuration_model(n, SEED ^ 0xCF, (n * 10 + i) as u64);
            graphs.push(ProfiledGraph::new(format!("cm-n{n}-{i}"), g).unwrap());
        }
    }
    graphs
}

const FINE_GRID: [f64; 20] = [
    0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0,
    48.0, 64.0,
];
const GRID: [f64; 10] = [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

fn partial_spread() -> Outcome {
    let graphs = spectral_family();
    let r = spread_campaign(&graphs, None, &FINE_GRID).unwrap();
    Outcome {
        pass: r.instances >= 500 && r.violations.is_empty(),
        detail: format!(
            "{} graphs, {} instances, {} violations, min slack {:.3e}",
            r.graphs,
            r.instances,
            r.violations.len(),
            r.min_slack
        ),
    }
}

fn collapsed_gap() -> Outcome {
    let graphs = spectral_family();
    let r = collapse_campaign(&graphs, None, 50, &GRID, None, SEED).unwrap();
    let small: Vec<ProfiledGraph> = graphs.into_iter().filter(|g| g.n() <= 8).collect();
    let dom = collapse_campaign(&small, None, 0, &[0.0], Some(1.0), SEED)
        .unwrap()
        .domination
        .unwrap();
    Outcome {
        pass: r.instances >= 500 && r.violations.is_empty(),
        detail: format!(
            "{} graphs, {} instances, {} violations, min ratio {:.3}; collapsed-walk domination {} runs, {} failures, max excess {:.1e}",
            r.graphs,
            r.instances,
            r.violations.len(),
            r.min_ratio,
            dom.instances,
            dom.failures.len(),
            dom.max_excess
        ),
    }
}

fn cheeger() -> Outcome {
    let mut graphs = spectral_family();
    graphs.extend(random_family(16, 40, SEED ^ 0xE1).unwrap());
    let r = spread_campaign(&graphs, Some(&[1]), &[0.0]).unwrap();
    Outcome {
        pass: r.cheeger.failures.is_empty(),
        detail: format!(
            "{} graphs, {} failures, min lambda2/bound {:.3}",
            r.cheeger.instances,
            r.cheeger.failures.len(),
            r.cheeger.min_ratio
        ),
    }
}

fn derivative() -> Outcome {
    let graphs = spectral_family();
    let r = derivative_campaign(&graphs, &GRID, 4.0).unwrap();
    Outcome {
        pass: r.instances >= 100 && r.bound_failures.is_empty() && r.consistency_failures.is_empty(),
        detail: format!(
            "{} graphs ({} skipped), {} instances ({} compared), {} bound failures, {} derivative mismatches, max rel err {:.1e}, min slack {:.3e}",
            r.graphs,
            r.skipped.len(),
            r.instances,
            r.compared,
            r.bound_failures.len(),
            r.consistency_failures.len(),
            r.max_relative_error,
            r.min_slack
        ),
    }
}

fn majorization() -> Outcome {
    let mut graphs = random_family(12, 40, SEED ^ 0x12).unwrap();
    graphs.extend(random_family(16, 40, SEED ^ 0x16).unwrap());
    let r = majorization_campaign(&graphs, None, &GRID, 4.0).unwrap();
    Outcome {
        pass: r.instances >= 50 && r.violations.is_empty(),
        detail: format!(
            "{} graphs ({} skipped), {} instances, {} violations, min slack {:.3e}, {} clipped windows",
            r.graphs,
            r.skipped.len(),
            r.instances,
            r.violations.len(),
            r.min_slack,
            r.clipped
        ),
    }
}

fn path_system() -> Outcome {
    let n = 16;
    let graphs = random_family(n, 20, SEED ^ 0xA7).unwrap();
    let mut good = 0;
    let mut premise = 0;
    let mut hit_fail = 0;
    for (i, g) in graphs.iter().enumerate() {
        let path_len = path_length_bound(n, 4.0, g.gamma()).unwrap();
        let params = PathParams {
            path_len,
            walks_per_source: default_walks_per_source(n),
            lazy: false,
            seed: SEED + i as u64,
        };
        let sys = build_path_system(&g.graph, &params).unwrap();
        if sys.coverage == 1.0 && sys.max_node_visits() as f64 <= visit_threshold(n, path_len) {
            good += 1;
        }
        let hit = hit_probability_check(&g.graph, path_len, false);
        if hit.premise_holds {
            premise += 1;
            if !hit.holds {
                hit_fail += 1;
            }
        }
    }
    Outcome {
        pass: good >= 19 && hit_fail == 0,
        detail: format!(
            "{good}/20 covered within visit budget; hit check on {premise}/20 with premise, {hit_fail} failures"
        ),
    }
}

fn counting() -> Outcome {
    let mut cells = 0;
    let mut over = 0;
    let mut mismatch = 0;
    for n in 3..=16usize {
        let half = n / 2;
        let mut counts = vec![vec![0u128; half + 1]; half + 1];
        for mask in 1u32..1 << n {
            let k = mask.count_ones() as usize;
            if k > half {
                continue;
            }
            let arcs = (0..n)
                .filter(|&v| mask >> v & 1 == 1 && mask >> ((v + n - 1) % n) & 1 == 0)
                .count();
            counts[k][arcs] += 1;
        }
        for (k, row) in counts.iter().enumerate().skip(1) {
            for (arcs, &c) in row.iter().enumerate() {
                cells += 1;
                if c > (n as u128).pow(2 * arcs as u32) {
                    over += 1;
                }
                if c != arc_set_count(n, k, arcs) {
                    mismatch += 1;
                }
            }
        }
    }
    Outcome {
        pass: over == 0 && mismatch == 0,
        detail: format!("{cells} (N, k, arcs) cells, {over} above N^(2 arcs), {mismatch} closed-form mismatches"),
    }
}

fn bootstrap() -> Outcome {
    let mut base = 0;
    let mut runs = 0;
    let mut chains = 0;
    let mut reached = Vec::new();
    for (j, n) in [16usize, 22].into_iter().enumerate() {
        for s in 0..100u64 {
            let params = BootstrapParams::new(n, 1.0, 2.0, SEED + 1000 * j as u64 + s);
            let r = run_bootstrap(&params).unwrap();
            runs += 1;
            if r.records[0].hypothesis_holds == Some(true) {
                base += 1;
            }
            if r.chain_holds == Some(true) {
                chains += 1;
            }
            reached.push(
                r.records
                    .iter()
                    .take_while(|p| p.hypothesis_holds == Some(true))
                    .count()
                    - 1,
            );
        }
    }
    let mean_reached = reached.iter().sum::<usize>() as f64 / reached.len() as f64;
    Outcome {
        pass: base == runs,
        detail: format!(
            "phase 0 holds in {base}/{runs}; full chain in {chains}/{runs}; mean last phase held {mean_reached:.2}"
        ),
    }
}

fn cli(args: &[&str], out: &Path, threads: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_rewire"))
        .args(args)
        .args(["--seed", "99", "--threads", threads, "--out"])
        .arg(out)
        .status()
        .map(|s| s.code().is_some_and(|c| c <= 1))
        .unwrap_or(false)
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let runs: [&[&str]; 10] = [
        &["simulate", "--n", "32", "--phases", "4", "--replicas", "3"],
        &["profile", "--random-family", "12", "--witnesses"],
        &["verify-spread", "--random-family", "10", "--seeds", "3"],
        &[
            "verify-collapse",
            "--random-family",
            "10",
            "--seeds",
            "3",
            "--orderings",
            "5",
        ],
        &[
            "verify-majorization",
            "--random-family",
            "12",
            "--seeds",
            "6",
        ],
        &["paths", "--random-family", "16"],
        &["bootstrap", "--n", "16"],
        &[
            "uniformity",
            "--n",
            "3",
            "--replicas",
            "5000",
            "--time",
            "5",
        ],
        &["duality", "--n", "8", "--replicas", "5000"],
        &["meancut", "--n", "8", "--replicas", "5000"],
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut failed = Vec::new();
    for args in runs {
        let a = tmp.path().join(format!("{}-a", args[0]));
        let b = tmp.path().join(format!("{}-b", args[0]));
        if !cli(args, &a, "1") || !cli(args, &b, "4") {
            failed.push(args[0]);
            continue;
        }
        let (ta, tb) = (read_tree(&a), read_tree(&b));
        if ta.is_empty() || ta != tb {
            differing.push(args[0]);
        }
    }
    Outcome {
        pass: differing.is_empty() && failed.is_empty(),
        detail: format!(
            "{} subcommands run twice (1 and 4 threads); differing {differing:?}; errored {failed:?}",
            runs.len()
        ),
    }
}
