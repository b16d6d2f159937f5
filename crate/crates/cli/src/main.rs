use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ofl_core::arrival::{ArrivalModel, ArrivalSampler, Arrivals, DEFAULT_INTERLEAVER};
use ofl_core::harness::{self, EstimateReport, ExperimentSpec, InstanceSource, OptMode, SweepAxis};
use ofl_core::instance::{generate, load_instance};
use ofl_core::offline::{self, default_candidates, DEFAULT_BUDGET};
use ofl_core::rng::trial_rng;
use ofl_core::{run_fotakis, run_rofl, GeneratorParams, Instance, OfflineError, OpeningRule, Point, TieBreak};

#[derive(Parser)]
#[command(name = "ofl", version, about = "Online facility location experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated instance as JSON.
    Gen {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve an instance offline and print the solution as JSON.
    Opt {
        #[command(flatten)]
        source: SourceArgs,
        /// JSON array of extra candidate facility descriptors.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run one trial and print its trace as JSON.
    Run {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        algo: AlgoArgs,
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate expected cost and competitive ratio.
    Estimate(EstimateArgs),
    /// Estimate over a grid of q, rho or k values.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        estimate: EstimateArgs,
    },
}

#[derive(Args)]
struct FamilyArgs {
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct SourceArgs {
    /// Instance JSON file.
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,
    #[command(flatten)]
    family: FamilyArgs,
}

#[derive(Args)]
struct AlgoArgs {
    #[arg(long, value_enum, default_value_t = Rule::Clamped)]
    rule: Rule,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long, value_enum, default_value_t = Tie::Lowest)]
    tie_break: Tie,
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long, value_enum, default_value_t = Order::Uniform)]
    order: Order,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    interleaver: Option<String>,
    /// Demands per trial for i.i.d. arrivals (defaults to n of subset_iid).
    #[arg(long)]
    draws: Option<usize>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Experiment JSON file; replaces the instance, rule and order flags.
    #[arg(long, conflicts_with_all = ["instance", "family"])]
    experiment: Option<PathBuf>,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    algo: AlgoArgs,
    #[command(flatten)]
    order: OrderArgs,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    opt: Option<Opt>,
    #[arg(long)]
    instrument: bool,
    /// Bound to check; repeatable. Defaults to the bounds of the order model.
    #[arg(long = "bound")]
    bounds: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Star,
    Clique,
    #[value(name = "subset_iid", alias = "subset-iid")]
    SubsetIid,
    Fotakis,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Clamped,
    Piecewise,
    Fotakis,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tie {
    Lowest,
    Adversarial,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Order {
    Adversarial,
    Uniform,
    Iid,
    Partial,
    PartialRand,
}

#[derive(Clone, Copy, ValueEnum)]
enum Opt {
    Exact,
    Analytic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Q,
    Rho,
    K,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage(msg: impl Display) -> Failure {
    Failure::Usage(msg.to_string())
}

fn runtime(msg: impl Display) -> Failure {
    Failure::Runtime(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen { family, output } => {
            let params = family.params()?.ok_or_else(|| usage("gen needs --family"))?;
            let instance = generate(params).map_err(usage)?;
            emit(output.as_deref(), instance.to_json().into_bytes())
        }
        Command::Opt {
            source,
            candidates,
            output,
        } => {
            let instance = source.resolve()?;
            let solution = match candidates {
                None => offline::solve_default(&instance),
                Some(path) => {
                    let extra: Vec<Point> =
                        serde_json::from_str(&read(&path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
                    let mut all = default_candidates(&instance);
                    all.extend(extra);
                    offline::solve_exact(&instance, &all, DEFAULT_BUDGET)
                }
            }
            .map_err(|e| runtime(format!("{e}; pass an instance with fewer candidates")))?;
            emit(output.as_deref(), json(&solution))
        }
        Command::Run {
            source,
            algo,
            order,
            seed,
            output,
        } => {
            let instance = source.resolve()?;
            let rule = algo.rule()?;
            let model = order.model(&instance)?;
            // same randomness as trial 0 of an estimate with this seed
            let mut rng = trial_rng(seed, 0);
            let sampler = ArrivalSampler::new(&instance, &model).map_err(runtime)?;
            let (instance, order) = match sampler.sample(&mut rng) {
                Arrivals::Order(o) => (instance, o),
                Arrivals::Sampled(points) => {
                    let n = points.len();
                    (instance.with_demands(points).map_err(runtime)?, (0..n).collect())
                }
            };
            let record = match rule {
                OpeningRule::FotakisPotential => run_fotakis(&instance, &order, algo.tie_break()),
                _ => run_rofl(&instance, &order, rule, &mut rng),
            }
            .map_err(runtime)?;
            emit(output.as_deref(), json(&record))
        }
        Command::Estimate(args) => {
            let spec = args.spec()?;
            let report = args.pool(|| harness::estimate(&spec))?.map_err(runtime)?;
            args.write(&[report])
        }
        Command::Sweep { axis, values, estimate } => {
            let axis = parse_axis(axis, &values)?;
            let spec = estimate.spec()?;
            let reports = estimate.pool(|| harness::sweep(&spec, &axis))?.map_err(runtime)?;
            estimate.write(&reports)
        }
    }
}

fn parse_axis(axis: Axis, values: &[String]) -> Result<SweepAxis, Failure> {
    fn parse<T: std::str::FromStr>(values: &[String]) -> Result<Vec<T>, Failure> {
        values
            .iter()
            .map(|v| v.trim().parse().map_err(|_| usage(format!("bad sweep value {v:?}"))))
            .collect()
    }
    Ok(match axis {
        Axis::Q => SweepAxis::Q(parse(values)?),
        Axis::Rho => SweepAxis::Rho(parse(values)?),
        Axis::K => SweepAxis::K(parse(values)?),
    })
}

impl FamilyArgs {
    fn params(&self) -> Result<Option<GeneratorParams>, Failure> {
        let need =
            |v: Option<usize>, flag: &str, fam: &str| v.ok_or_else(|| usage(format!("--family {fam} needs --{flag}")));
        Ok(Some(match self.family {
            None => return Ok(None),
            Some(Family::Star) => GeneratorParams::Star {
                k: need(self.k, "k", "star")?,
            },
            Some(Family::Clique) => GeneratorParams::Clique {
                delta: self.delta.ok_or_else(|| usage("--family clique needs --delta"))?,
                k: need(self.k, "k", "clique")?,
            },
            Some(Family::SubsetIid) => GeneratorParams::SubsetIid {
                n: need(self.n, "n", "subset_iid")?,
            },
            Some(Family::Fotakis) => GeneratorParams::Fotakis {
                n: need(self.n, "n", "fotakis")?,
            },
        }))
    }
}

impl SourceArgs {
    fn source(&self) -> Result<InstanceSource, Failure> {
        match (&self.instance, self.family.params()?) {
            (Some(path), None) => Ok(InstanceSource::Given(Box::new(load(path)?))),
            (None, Some(params)) => Ok(InstanceSource::Generator(params)),
            _ => Err(usage("give --instance or --family")),
        }
    }

    fn resolve(&self) -> Result<Instance, Failure> {
        match self.source()? {
            InstanceSource::Given(i) => Ok(*i),
            InstanceSource::Generator(p) => generate(p).map_err(usage),
        }
    }
}

impl AlgoArgs {
    fn rule(&self) -> Result<OpeningRule, Failure> {
        let rule = match self.rule {
            Rule::Clamped => OpeningRule::clamped(self.q),
            Rule::Piecewise => OpeningRule::piecewise(self.q),
            Rule::Fotakis => OpeningRule::FotakisPotential,
        };
        rule.validate().map_err(usage)?;
        Ok(rule)
    }

    fn tie_break(&self) -> TieBreak {
        match self.tie_break {
            Tie::Lowest => TieBreak::LowestDescriptor,
            Tie::Adversarial => TieBreak::AdversarialSubset,
        }
    }
}

impl OrderArgs {
    fn model(&self, instance: &Instance) -> Result<ArrivalModel, Failure> {
        let interleaver = || {
            self.interleaver
                .clone()
                .unwrap_or_else(|| DEFAULT_INTERLEAVER.to_string())
        };
        let rho = || self.rho.ok_or_else(|| usage("partial orders need --rho"));
        if self.rho.is_some() && !matches!(self.order, Order::Partial | Order::PartialRand) {
            return Err(usage("--rho only applies to --order partial or partial-rand"));
        }
        Ok(match self.order {
            Order::Adversarial => ArrivalModel::Adversarial {
                order: (0..instance.demands().len()).collect(),
            },
            Order::Uniform => ArrivalModel::UniformRandom,
            Order::Iid => {
                let n = match (self.draws, instance.family()) {
                    (Some(n), _) => n,
                    (None, Some(GeneratorParams::SubsetIid { n })) => n,
                    _ => return Err(usage("--order iid needs --draws")),
                };
                ArrivalModel::Iid { distribution: None, n }
            }
            Order::Partial => ArrivalModel::PartialRandom {
                rho: rho()?,
                adversarial_subsets: None,
                interleaver: interleaver(),
            },
            Order::PartialRand => ArrivalModel::PartialRandomRandomAdv {
                rho: rho()?,
                interleaver: interleaver(),
            },
        })
    }
}

impl EstimateArgs {
    fn spec(&self) -> Result<ExperimentSpec, Failure> {
        let mut spec = match &self.experiment {
            Some(path) => {
                let doc =
                    harness::parse_experiment(&read(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
                let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
                doc.into_spec(&|p: &str| {
                    load(&base.join(p)).map_err(|f| match f {
                        Failure::Usage(m) | Failure::Runtime(m) => ofl_core::HarnessError::Spec(m),
                    })
                })
                .map_err(runtime)?
            }
            None => {
                let source = self.source.source()?;
                let instance = match &source {
                    InstanceSource::Given(i) => (**i).clone(),
                    InstanceSource::Generator(p) => generate(*p).map_err(usage)?,
                };
                let mut spec = ExperimentSpec::new(source, self.order.model(&instance)?, self.algo.rule()?);
                spec.tie_break = self.algo.tie_break();
                if self.opt.is_none() && exact_over_budget(&instance, &spec.arrival) {
                    spec.opt_mode = OptMode::Analytic;
                }
                spec
            }
        };
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(o) = self.opt {
            spec.opt_mode = match o {
                Opt::Exact => OptMode::Exact,
                Opt::Analytic => OptMode::Analytic,
            };
        }
        spec.instrumentation |= self.instrument;
        if !self.bounds.is_empty() {
            spec.bounds = Some(self.bounds.clone());
        }
        if let Some(path) = &self.output {
            spec.id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or(spec.id);
        }
        if spec.trials == 0 {
            return Err(usage("--trials must be at least 1"));
        }
        Ok(spec)
    }

    fn pool<T: Send>(&self, work: impl FnOnce() -> T + Send) -> Result<T, Failure> {
        match self.threads {
            None => Ok(work()),
            Some(0) => Err(usage("--threads must be at least 1")),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(runtime)?;
                Ok(pool.install(work))
            }
        }
    }

    fn write(&self, reports: &[EstimateReport]) -> Result<(), Failure> {
        let bytes = match self.format {
            Format::Csv => {
                let mut buf = Vec::new();
                harness::write_csv(&mut buf, reports).map_err(runtime)?;
                buf
            }
            Format::Json if reports.len() == 1 => json(&reports[0]),
            Format::Json => json(&reports),
        };
        emit(self.output.as_deref(), bytes)
    }
}

/// Without `--opt`, instances too large for the exact solver fall back to
/// their recorded optimum bound.
fn exact_over_budget(instance: &Instance, arrival: &ArrivalModel) -> bool {
    !matches!(arrival, ArrivalModel::Iid { .. })
        && matches!(
            offline::solve_default(instance),
            Err(OfflineError::BudgetExceeded { .. })
        )
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Instance, Failure> {
    load_instance(&read(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn json<T: serde::Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

/// Writes to stdout, or atomically to `path` so no partial file is left.
fn emit(path: Option<&Path>, bytes: Vec<u8>) -> Result<(), Failure> {
    let Some(path) = path else {
        return std::io::stdout().write_all(&bytes).map_err(runtime);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: &dyn Display| runtime(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| fail(&e))?;
    tmp.write_all(&bytes).map_err(|e| fail(&e))?;
    tmp.persist(path).map_err(|e| fail(&e.error))?;
    Ok(())
}
