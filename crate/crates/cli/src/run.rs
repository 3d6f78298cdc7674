use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use rewire::harness::{
    campaign::ProfiledGraph, collapse_campaign, derivative_campaign, exclusion_duality_test,
    majorization_campaign, mean_cut_test, random_family, run_bootstrap, spread_campaign,
    uniformity_test, BootstrapParams, ExperimentConfig, ExperimentKind, ProfileVariant, Report,
    ReportMeta,
};
use rewire::paths::{default_walks_per_source, hit_probability_check, visit_threshold};
use rewire::{
    build_path_system, mixing_budget, path_length_bound, profile_exact, run_protocol, stream,
    Color, GraphFile, PathParams, PhaseGraph, PhaseLength, PointerConfig, SimParams,
    DEFAULT_PROFILE_BUDGET,
};

use crate::{Format, VERSION};

/// A finished experiment: its JSON result, optional CSV rendering, extra
/// files to write next to the report, and whether anything was violated.
struct Outcome {
    result: Value,
    csv: Option<String>,
    extra: Vec<(String, String)>,
    violation: bool,
}

impl Outcome {
    fn json(result: Value, violation: bool) -> Self {
        Outcome {
            result,
            csv: None,
            extra: Vec::new(),
            violation,
        }
    }
}

pub fn run(config: &ExperimentConfig, format: Format, explicit_gamma: Option<f64>) -> Result<bool> {
    let outcome = match config.experiment {
        ExperimentKind::Simulate => simulate(config)?,
        ExperimentKind::Profile => profile(config)?,
        ExperimentKind::VerifySpread => verify_spread(config)?,
        ExperimentKind::VerifyCollapse => verify_collapse(config)?,
        ExperimentKind::VerifyMajorization => verify_majorization(config)?,
        ExperimentKind::Paths => paths(config, explicit_gamma)?,
        ExperimentKind::Bootstrap => bootstrap(config)?,
        ExperimentKind::Uniformity => uniformity(config)?,
        ExperimentKind::Duality => duality(config)?,
        ExperimentKind::Meancut => meancut(config)?,
    };
    let report = Report {
        meta: ReportMeta::new(VERSION, config)?,
        violation: outcome.violation,
        result: outcome.result,
    };
    let (body, ext) = match format {
        Format::Json => (report.to_json()?, "json"),
        Format::Csv => (
            outcome
                .csv
                .clone()
                .unwrap_or_else(|| flat_csv(&report.result)),
            "csv",
        ),
    };
    match &config.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))?;
            write(&dir.join(format!("{}.{ext}", config.experiment)), &body)?;
            for (name, text) in &outcome.extra {
                write(&dir.join(name), text)?;
            }
        }
        None => print!("{body}"),
    }
    Ok(outcome.violation)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// One header row and one value row from the scalar fields of an object.
fn flat_csv(v: &Value) -> String {
    let Value::Object(map) = v else {
        return format!("value\n{v}\n");
    };
    let scalars: Vec<(&String, String)> = map
        .iter()
        .filter_map(|(k, v)| match v {
            Value::Number(_) | Value::Bool(_) | Value::Null => Some((k, v.to_string())),
            Value::String(s) => Some((k, s.clone())),
            Value::Array(a) if k == "violations" || k == "skipped" => {
                Some((k, a.len().to_string()))
            }
            _ => None,
        })
        .collect();
    let header: Vec<&str> = scalars.iter().map(|(k, _)| k.as_str()).collect();
    let values: Vec<&str> = scalars.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

fn load_graph(config: &ExperimentConfig, path: &Path) -> Result<PhaseGraph> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read graph {}", path.display()))?;
    Ok(GraphFile::parse(&text)?.phase_graph(config.color))
}

fn graph_family(config: &ExperimentConfig) -> Result<Vec<ProfiledGraph>> {
    match &config.graph {
        Some(path) => Ok(vec![ProfiledGraph::new(
            path.display().to_string(),
            load_graph(config, path)?,
        )?]),
        None => Ok(random_family(config.n, config.seeds, config.seed)?),
    }
}

fn ks(config: &ExperimentConfig) -> Option<&[usize]> {
    (!config.k.is_empty()).then_some(config.k.as_slice())
}

fn nodes_1based(v: &[usize]) -> String {
    v.iter()
        .map(|x| (x + 1).to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn simulate(config: &ExperimentConfig) -> Result<Outcome> {
    let mut params = SimParams::new(config.n, config.phase_length, config.phases, config.seed);
    if let Some(a) = config.a_exponent {
        params.phase_length = PhaseLength::LogPower(a);
    }
    params.counting = config.counting;
    params.snapshot_profile = config.snapshot_profile;
    params.validate()?;
    let many = config.replicas > 1;
    let mut csv = String::from(if many { "replica," } else { "" });
    csv.push_str("phase,clock,total_swaps,max_Mn,mean_Mn\n");
    let mut replicas = Vec::with_capacity(config.replicas);
    let mut extra = Vec::new();
    for r in 0..config.replicas {
        let mut rng = stream(config.seed, r as u64);
        let run = run_protocol(&params, &mut rng)?;
        let mut phases = Vec::with_capacity(run.phases.len());
        for p in &run.phases {
            let s = &p.stats;
            if many {
                write!(csv, "{r},")?;
            }
            writeln!(
                csv,
                "{},{},{},{},{}",
                s.phase_index,
                s.elapsed_time,
                s.total_swaps,
                s.max_modifications(),
                s.mean_modifications()
            )?;
            let mut row = json!({
                "phase": s.phase_index,
                "clock": s.elapsed_time,
                "moving_color": s.moving_color,
                "total_swaps": s.total_swaps,
                "max_mn": s.max_modifications(),
                "mean_mn": s.mean_modifications(),
            });
            if let Some(profile) = &p.profile {
                row["profile"] =
                    json!({ "phi_card": profile.phi_card, "phi_ratio": profile.phi_ratio });
            }
            phases.push(row);
        }
        let text = run.final_config.to_text();
        let name = if many {
            format!("final_config_{r}.txt")
        } else {
            "final_config.txt".to_string()
        };
        extra.push((name, text.clone()));
        replicas.push(json!({ "replica": r, "phases": phases, "final_config": text }));
    }
    Ok(Outcome {
        result: json!({
            "n": config.n,
            "phase_length": params.phase_time(),
            "counting": config.counting,
            "replicas": replicas,
        }),
        csv: Some(csv),
        extra,
        violation: false,
    })
}

fn profile(config: &ExperimentConfig) -> Result<Outcome> {
    let graph = single_graph(config)?;
    let kmax = config.kmax.unwrap_or(graph.n() / 2);
    let p = profile_exact(&graph, kmax, DEFAULT_PROFILE_BUDGET)?;
    let (card, ratio) = match config.variant {
        ProfileVariant::Card => (true, false),
        ProfileVariant::Ratio => (false, true),
        ProfileVariant::Both => (true, true),
    };
    let mut header = vec!["k"];
    if card {
        header.push("phi_card");
    }
    if ratio {
        header.push("phi_ratio");
    }
    if config.witnesses {
        header.push("witness");
    }
    let mut csv = header.join(",") + "\n";
    let mut rows = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut cells = vec![k.to_string()];
        let mut row = json!({ "k": k });
        if card {
            cells.push(p.card(k).to_string());
            row["phi_card"] = json!(p.card(k));
        }
        if ratio {
            cells.push(p.ratio(k).to_string());
            row["phi_ratio"] = json!(p.ratio(k));
        }
        if config.witnesses {
            let cw = nodes_1based(&p.card_witness[k - 1]);
            let rw = nodes_1based(&p.ratio_witness[k - 1]);
            let w = match (card, ratio) {
                (true, true) => format!("{cw}|{rw}"),
                (true, false) => cw.clone(),
                _ => rw.clone(),
            };
            cells.push(w);
            if card {
                row["card_witness"] = json!(cw);
            }
            if ratio {
                row["ratio_witness"] = json!(rw);
            }
        }
        csv.push_str(&cells.join(","));
        csv.push('\n');
        rows.push(row);
    }
    Ok(Outcome {
        result: json!({ "n": graph.n(), "kmax": kmax, "rows": rows }),
        csv: Some(csv),
        extra: Vec::new(),
        violation: false,
    })
}

fn verify_spread(config: &ExperimentConfig) -> Result<Outcome> {
    let graphs = graph_family(config)?;
    let r = spread_campaign(&graphs, ks(config), &config.t_grid)?;
    let violation = !r.violations.is_empty() || !r.cheeger.failures.is_empty();
    Ok(Outcome::json(serde_json::to_value(&r)?, violation))
}

fn verify_collapse(config: &ExperimentConfig) -> Result<Outcome> {
    let graphs = graph_family(config)?;
    let r = collapse_campaign(
        &graphs,
        ks(config),
        config.orderings,
        &config.t_grid,
        config.domination_time,
        config.seed,
    )?;
    let violation = !r.violations.is_empty()
        || r.domination
            .as_ref()
            .is_some_and(|d| !d.failures.is_empty());
    Ok(Outcome::json(serde_json::to_value(&r)?, violation))
}

fn verify_majorization(config: &ExperimentConfig) -> Result<Outcome> {
    let graphs = graph_family(config)?;
    let r = majorization_campaign(&graphs, ks(config), &config.t_grid, config.d)?;
    let der = derivative_campaign(&graphs, &config.t_grid, config.d)?;
    let violation = !r.violations.is_empty()
        || !der.bound_failures.is_empty()
        || !der.consistency_failures.is_empty();
    let mut result = serde_json::to_value(&r)?;
    result["derivative"] = serde_json::to_value(&der)?;
    Ok(Outcome::json(result, violation))
}

fn single_graph(config: &ExperimentConfig) -> Result<PhaseGraph> {
    match &config.graph {
        Some(path) => load_graph(config, path),
        None => {
            let mut rng = stream(config.seed, u64::MAX);
            Ok(PhaseGraph::from_config(
                &PointerConfig::random(config.n, &mut rng)?,
                config.color,
            ))
        }
    }
}

fn paths(config: &ExperimentConfig, explicit_gamma: Option<f64>) -> Result<Outcome> {
    let graph = single_graph(config)?;
    let n = graph.n();
    let gamma = match explicit_gamma {
        Some(g) => g,
        None if n <= DEFAULT_PROFILE_BUDGET => {
            profile_exact(&graph, n / 2, DEFAULT_PROFILE_BUDGET)?
                .ratio(n / 2)
                .min(1.0)
        }
        None => config.gamma,
    };
    let path_len = path_length_bound(n, config.d, gamma)?;
    let params = PathParams {
        path_len,
        walks_per_source: config
            .walks_per_source
            .unwrap_or_else(|| default_walks_per_source(n)),
        lazy: config.lazy,
        seed: config.seed,
    };
    let ps = build_path_system(&graph, &params)?;
    let k = ps.congestion();
    let threshold = visit_threshold(n, path_len);
    let max_visits = ps.max_node_visits();
    let hit = (n <= 256).then(|| hit_probability_check(&graph, path_len, config.lazy));
    let budget = if k > 0 {
        Some(mixing_budget(n as f64, path_len as f64, k as f64)?)
    } else {
        None
    };
    let violation = ps.coverage < 1.0
        || (max_visits as f64) > threshold
        || hit.as_ref().is_some_and(|h| h.premise_holds && !h.holds);
    let unreachable: Vec<[usize; 2]> = ps
        .unreachable
        .iter()
        .map(|&(i, j)| [i + 1, j + 1])
        .collect();
    Ok(Outcome::json(
        json!({
            "n": n,
            "gamma": gamma,
            "d": config.d,
            "lazy": config.lazy,
            "walks_per_source": params.walks_per_source,
            "coverage": ps.coverage,
            "K": k,
            "max_node_visits": max_visits,
            "visit_threshold": threshold,
            "delta_path": path_len,
            "mixing_budget_T": budget,
            "unreachable": unreachable,
            "hit_probability": hit,
        }),
        violation,
    ))
}

fn bootstrap(config: &ExperimentConfig) -> Result<Outcome> {
    let mut params = BootstrapParams::new(config.n, config.gamma, config.phase_length, config.seed);
    params.verify = !config.simulation_only;
    params.counting = config.counting;
    if config.phases != ExperimentConfig::default().phases {
        params.phases = Some(config.phases);
    }
    let r = run_bootstrap(&params)?;
    Ok(Outcome::json(serde_json::to_value(&r)?, false))
}

fn uniformity(config: &ExperimentConfig) -> Result<Outcome> {
    let initial = PointerConfig::identity(config.n)?;
    let r = uniformity_test(&initial, config.time, config.replicas, config.seed)?;
    let passes = r.passes;
    Ok(Outcome::json(serde_json::to_value(&r)?, !passes))
}

fn test_config(config: &ExperimentConfig) -> Result<PointerConfig> {
    let mut rng = stream(config.seed, u64::MAX);
    Ok(PointerConfig::random(config.n, &mut rng)?)
}

fn duality(config: &ExperimentConfig) -> Result<Outcome> {
    let pc = test_config(config)?;
    let graph = PhaseGraph::from_config(&pc, Color::Red);
    let owners: Vec<usize> = (0..config.set_size.min(config.n)).collect();
    let r = exclusion_duality_test(
        &graph,
        pc.blue(),
        &owners,
        config.time,
        config.replicas,
        config.seed,
        config.n,
    )?;
    let passes = r.passes;
    Ok(Outcome::json(serde_json::to_value(&r)?, !passes))
}

fn meancut(config: &ExperimentConfig) -> Result<Outcome> {
    let pc = test_config(config)?;
    let set: Vec<usize> = (0..config.set_size).collect();
    let r = mean_cut_test(
        &pc,
        &set,
        config.time,
        config.replicas,
        config.gamma,
        config.d,
        &config.r_grid,
        config.seed,
    )?;
    let passes = r.passes;
    Ok(Outcome::json(serde_json::to_value(&r)?, !passes))
}
