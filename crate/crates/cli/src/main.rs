use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rewire::harness::{ExperimentConfig, ExperimentKind, ProfileVariant};
use rewire::{Color, ModCounting};

mod run;

pub const VERSION: &str = env!("REWIRE_VERSION");

#[derive(Parser, Debug)]
#[command(name = "rewire", version = VERSION, about = "Interchange rewiring experiments and exact expansion checks")]
struct Cli {
    /// Experiment configuration file (flat `key = value`); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for report files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report format; `simulate` and `profile` default to csv, the rest to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the alternating-phase protocol.
    Simulate(SimulateArgs),
    /// Exact isoperimetric profile of a graph file or a seeded random configuration.
    Profile(ProfileArgs),
    /// Partial-spread bound and Cheeger check over a graph family.
    VerifySpread(VerifyArgs),
    /// Collapsed-graph spectral gap over random and sorted orderings.
    VerifyCollapse(CollapseArgs),
    /// Prefix majorization by the auxiliary process and the sorted-mass derivative bound.
    VerifyMajorization(MajorizationArgs),
    /// Random-walk canonical paths, congestion and mixing budget.
    Paths(PathsArgs),
    /// Phase-by-phase expansion bootstrap.
    Bootstrap(BootstrapArgs),
    /// Chi-square test of the moved permutation against uniform.
    Uniformity(UniformityArgs),
    /// Exclusion occupancies against the heat kernel.
    Duality(DualityArgs),
    /// Pointer cut of an arc after a phase, with Chernoff tails.
    Meancut(MeancutArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    phases: Option<usize>,
    #[arg(long, conflicts_with = "a_exponent")]
    phase_length: Option<f64>,
    /// Phase length `ln(N)^a`.
    #[arg(long)]
    a_exponent: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    snapshot_profile: bool,
    #[arg(long, value_enum)]
    counting: Option<CountingArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CountingArg {
    Owner,
    OwnerEndpoint,
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Graph file: `N n` header then `red i j` / `blue i j` or `edge i j` lines.
    #[arg(long, conflicts_with = "random_family")]
    graph: Option<PathBuf>,
    /// Pointer colour whose edges join the ring.
    #[arg(long, value_enum)]
    color: Option<ColorArg>,
    /// Use random configurations on this many nodes.
    #[arg(long, value_name = "N")]
    random_family: Option<usize>,
    /// Number of random graphs.
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ColorArg {
    Red,
    Blue,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long)]
    witnesses: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Card,
    Ratio,
    Both,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Set sizes to check (default: all up to N/2).
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct CollapseArgs {
    #[command(flatten)]
    verify: VerifyArgs,
    /// Random orderings per graph.
    #[arg(long)]
    orderings: Option<usize>,
    /// Also run the time-stepped domination check up to this time.
    #[arg(long)]
    domination_time: Option<f64>,
}

#[derive(Args, Debug)]
struct MajorizationArgs {
    #[command(flatten)]
    verify: VerifyArgs,
    #[arg(long)]
    d: Option<f64>,
}

#[derive(Args, Debug)]
struct PathsArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Expansion parameter; exact `phi_ratio[N/2]` when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    walks_per_source: Option<usize>,
    #[arg(long)]
    lazy: bool,
}

#[derive(Args, Debug)]
struct BootstrapArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    phase_length: Option<f64>,
    #[arg(long)]
    phases: Option<usize>,
    /// Skip the exact profiles; any N.
    #[arg(long)]
    simulation_only: bool,
}

#[derive(Args, Debug)]
struct UniformityArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args, Debug)]
struct DualityArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    set_size: Option<usize>,
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    replicas: Option<usize>,
}

#[derive(Args, Debug)]
struct MeancutArgs {
    #[command(flatten)]
    duality: DualityArgs,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl GraphArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        if self.graph.is_some() {
            c.graph = self.graph;
        }
        if self.random_family.is_some() {
            c.graph = None;
        }
        set(&mut c.n, self.random_family);
        set(&mut c.seeds, self.seeds);
        set(
            &mut c.color,
            self.color.map(|col| match col {
                ColorArg::Red => Color::Red,
                ColorArg::Blue => Color::Blue,
            }),
        );
    }
}

impl VerifyArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        self.graph.apply(c);
        set(&mut c.k, self.k);
        set(&mut c.t_grid, self.t_grid);
    }
}

impl DualityArgs {
    fn apply(self, c: &mut ExperimentConfig) {
        set(&mut c.n, self.n);
        set(&mut c.set_size, self.set_size);
        set(&mut c.time, self.time);
        set(&mut c.replicas, self.replicas);
    }
}

impl Cmd {
    fn kind(&self) -> ExperimentKind {
        match self {
            Cmd::Simulate(_) => ExperimentKind::Simulate,
            Cmd::Profile(_) => ExperimentKind::Profile,
            Cmd::VerifySpread(_) => ExperimentKind::VerifySpread,
            Cmd::VerifyCollapse(_) => ExperimentKind::VerifyCollapse,
            Cmd::VerifyMajorization(_) => ExperimentKind::VerifyMajorization,
            Cmd::Paths(_) => ExperimentKind::Paths,
            Cmd::Bootstrap(_) => ExperimentKind::Bootstrap,
            Cmd::Uniformity(_) => ExperimentKind::Uniformity,
            Cmd::Duality(_) => ExperimentKind::Duality,
            Cmd::Meancut(_) => ExperimentKind::Meancut,
        }
    }

    /// Flags given on the command line override the configuration.
    fn apply(self, c: &mut ExperimentConfig) -> Option<f64> {
        let mut paths_gamma = None;
        match self {
            Cmd::Simulate(a) => {
                set(&mut c.n, a.n);
                set(&mut c.phases, a.phases);
                if a.phase_length.is_some() {
                    c.a_exponent = None;
                }
                set(&mut c.phase_length, a.phase_length);
                if a.a_exponent.is_some() {
                    c.a_exponent = a.a_exponent;
                }
                set(&mut c.replicas, a.replicas);
                c.snapshot_profile |= a.snapshot_profile;
                set(
                    &mut c.counting,
                    a.counting.map(|m| match m {
                        CountingArg::Owner => ModCounting::OwnerOnly,
                        CountingArg::OwnerEndpoint => ModCounting::OwnerAndEndpoint,
                    }),
                );
            }
            Cmd::Profile(a) => {
                a.graph.apply(c);
                if a.kmax.is_some() {
                    c.kmax = a.kmax;
                }
                set(
                    &mut c.variant,
                    a.variant.map(|v| match v {
                        VariantArg::Card => ProfileVariant::Card,
                        VariantArg::Ratio => ProfileVariant::Ratio,
                        VariantArg::Both => ProfileVariant::Both,
                    }),
                );
                c.witnesses |= a.witnesses;
            }
            Cmd::VerifySpread(a) => a.apply(c),
            Cmd::VerifyCollapse(a) => {
                a.verify.apply(c);
                set(&mut c.orderings, a.orderings);
                if a.domination_time.is_some() {
                    c.domination_time = a.domination_time;
                }
            }
            Cmd::VerifyMajorization(a) => {
                a.verify.apply(c);
                set(&mut c.d, a.d);
            }
            Cmd::Paths(a) => {
                a.graph.apply(c);
                paths_gamma = a.gamma;
                set(&mut c.gamma, a.gamma);
                set(&mut c.d, a.d);
                if a.walks_per_source.is_some() {
                    c.walks_per_source = a.walks_per_source;
                }
                c.lazy |= a.lazy;
            }
            Cmd::Bootstrap(a) => {
                set(&mut c.n, a.n);
                set(&mut c.gamma, a.gamma);
                set(&mut c.phase_length, a.phase_length);
                set(&mut c.phases, a.phases);
                c.simulation_only |= a.simulation_only;
            }
            Cmd::Uniformity(a) => {
                set(&mut c.n, a.n);
                set(&mut c.time, a.time);
                set(&mut c.replicas, a.replicas);
            }
            Cmd::Duality(a) => a.apply(c),
            Cmd::Meancut(a) => {
                a.duality.apply(c);
                set(&mut c.gamma, a.gamma);
                set(&mut c.d, a.d);
                set(&mut c.r_grid, a.r_grid);
            }
        }
        paths_gamma
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(violation) => ExitCode::from(u8::from(violation)),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let kind = cli.command.kind();
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
            let mut c = ExperimentConfig::parse(&text)?;
            c.experiment = kind;
            c
        }
        None => ExperimentConfig::for_experiment(kind),
    };
    set(&mut config.seed, cli.seed);
    if cli.out.is_some() {
        config.out = cli.out;
    }
    let explicit_gamma = cli.command.apply(&mut config);
    config.validate()?;
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()?;
    }
    let format = cli.format.unwrap_or(match kind {
        ExperimentKind::Simulate | ExperimentKind::Profile => Format::Csv,
        _ => Format::Json,
    });
    run::run(&config, format, explicit_gamma)
}
