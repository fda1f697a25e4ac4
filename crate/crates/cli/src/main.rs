mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spd_transport::eval::{ClassifierKind, Method};
use spd_transport::io::{Encoding, HubChoice, RunConfig};
use spd_transport::{Error, Result};

use run::Invocation;

/// Riemannian domain adaptation of SPD covariance datasets.
#[derive(Parser, Debug)]
#[command(name = "spd-transport", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root under which run directories are created.
    #[arg(long, global = true, env = "SPD_TRANSPORT_OUTPUT")]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Fail when a Riemannian mean hits its iteration cap.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true, value_enum)]
    encoding: Option<EncodingArg>,
    #[arg(long, global = true, value_enum)]
    hub: Option<HubArg>,
    /// Mean stopping tolerance on the tangent gradient norm.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    /// Comma-separated: baseline, mean_transport, parallel_transport.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, global = true, value_enum)]
    classifier: Option<ClassifierArg>,
    /// LDA covariance shrinkage in [0, 1].
    #[arg(long, global = true, default_value_t = 0.1)]
    shrinkage: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncodingArg {
    Csv,
    Binary,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HubArg {
    MeanOfMeans,
    Identity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClassifierArg {
    NearestCentroid,
    Lda,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Transport every domain to a common hub and write the artifacts.
    Adapt { dataset: PathBuf },
    /// Leave-one-domain-out accuracy of each method.
    Evaluate { dataset: PathBuf },
    /// Re-check the invariants of saved adaptation artifacts.
    Verify {
        artifacts: PathBuf,
        /// Dataset the artifacts were computed from (default: read from the
        /// artifacts' manifest).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Second artifacts directory on the same dataset; checks that both
        /// induce the same maps between domains.
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Two-dimensional PCA embedding of one method's features.
    Embed {
        dataset: PathBuf,
        #[arg(long, default_value = "parallel_transport")]
        method: Method,
    },
    /// Rerun the pipeline recorded in a manifest and check that every
    /// output is byte-identical.
    Replay { manifest: PathBuf },
}

#[derive(Subcommand, Debug)]
enum Simulate {
    /// Two batches of phase-shifted oscillators under different mixings.
    Toy(ToyArgs),
    /// Multi-class data under per-domain congruences.
    Multidomain(MultiArgs),
}

#[derive(Args, Debug)]
struct ToyArgs {
    #[arg(long)]
    n_series: Option<usize>,
    /// Samples per series.
    #[arg(long = "t")]
    samples: Option<usize>,
    #[arg(long)]
    f0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phase_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    phase_max: Option<f64>,
}

#[derive(Args, Debug)]
struct MultiArgs {
    #[arg(long)]
    domains: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    class_spread: Option<f64>,
    #[arg(long)]
    noise_level: Option<f64>,
    #[arg(long)]
    domain_shift: Option<f64>,
    #[arg(long)]
    base_condition: Option<f64>,
}

fn build_config(g: &GlobalArgs, command: &Command) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v;
            }
        };
    }
    set!(cfg.seed, g.seed);
    set!(cfg.mean.epsilon, g.epsilon);
    set!(cfg.mean.max_iterations, g.max_iterations);
    set!(cfg.methods, g.methods.clone());
    if g.workers.is_some() {
        cfg.workers = g.workers;
    }
    if g.output_dir.is_some() {
        cfg.output_dir = g.output_dir.clone();
    }
    cfg.strict |= g.strict;
    if let Some(e) = g.encoding {
        cfg.encoding = match e {
            EncodingArg::Csv => Encoding::Csv,
            EncodingArg::Binary => Encoding::Binary,
        };
    }
    if let Some(h) = g.hub {
        cfg.hub = match h {
            HubArg::MeanOfMeans => HubChoice::MeanOfMeans,
            HubArg::Identity => HubChoice::Identity,
        };
    }
    if let Some(c) = g.classifier {
        cfg.classifier = match c {
            ClassifierArg::NearestCentroid => ClassifierKind::NearestCentroid,
            ClassifierArg::Lda => ClassifierKind::Lda { shrinkage: g.shrinkage },
        };
    }
    match command {
        Command::Simulate(Simulate::Toy(a)) => {
            set!(cfg.toy.n_series, a.n_series);
            set!(cfg.toy.samples, a.samples);
            set!(cfg.toy.f0, a.f0);
            set!(cfg.toy.phase_range.0, a.phase_min);
            set!(cfg.toy.phase_range.1, a.phase_max);
        }
        Command::Simulate(Simulate::Multidomain(a)) => {
            let m = &mut cfg.multidomain;
            set!(m.n_domains, a.domains);
            set!(m.n_classes, a.classes);
            set!(m.dim, a.dim);
            set!(m.per_class, a.per_class);
            set!(m.class_spread, a.class_spread);
            set!(m.noise_level, a.noise_level);
            set!(m.domain_shift, a.domain_shift);
            set!(m.base_condition, a.base_condition);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn invocation(command: Command) -> Invocation {
    match command {
        Command::Simulate(Simulate::Toy(_)) => Invocation::SimulateToy,
        Command::Simulate(Simulate::Multidomain(_)) => Invocation::SimulateMultidomain,
        Command::Adapt { dataset } => Invocation::Adapt { dataset },
        Command::Evaluate { dataset } => Invocation::Evaluate { dataset },
        Command::Verify {
            artifacts,
            dataset,
            compare,
        } => Invocation::Verify {
            artifacts,
            dataset,
            compare,
        },
        Command::Embed { dataset, method } => Invocation::Embed { dataset, method },
        Command::Replay { manifest } => Invocation::Replay { manifest },
    }
}

fn set_workers(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn main_inner() -> Result<()> {
    let cli = Cli::parse();
    let cfg = build_config(&cli.global, &cli.command)?;
    set_workers(cfg.workers)?;
    let run_dir = run::execute(invocation(cli.command), cfg)?;
    println!("{}", run_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("spd-transport").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_defaults() {
        let cli = parse(&[
            "simulate", "toy", "--seed", "7", "--n-series", "20", "--t", "300", "--f0", "5",
            "--phase-min", "-1.0",
        ]);
        let cfg = build_config(&cli.global, &cli.command).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!((cfg.toy.n_series, cfg.toy.samples, cfg.toy.f0), (20, 300, 5.0));
        assert_eq!(cfg.toy.phase_range.0, -1.0);
    }

    #[test]
    fn methods_and_classifier_flags() {
        let cli = parse(&[
            "evaluate", "data", "--methods", "baseline,parallel_transport", "--classifier", "lda",
            "--shrinkage", "0.3", "--hub", "identity",
        ]);
        let cfg = build_config(&cli.global, &cli.command).unwrap();
        assert_eq!(cfg.methods, vec![Method::Baseline, Method::ParallelTransport]);
        assert_eq!(cfg.classifier, ClassifierKind::Lda { shrinkage: 0.3 });
        assert_eq!(cfg.hub, HubChoice::Identity);
    }

    #[test]
    fn invalid_values_are_rejected_before_running() {
        let cli = parse(&["simulate", "multidomain", "--dim", "1"]);
        assert!(matches!(build_config(&cli.global, &cli.command), Err(Error::InvalidParameter(_))));
        let cli = parse(&["adapt", "x", "--epsilon=-1"]);
        assert!(build_config(&cli.global, &cli.command).is_err());
    }
}
