use std::collections::BTreeMap;
use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tmplan_core::exact::{exact_plan, ExactOptions, ExactStatus, DEFAULT_NODE_BUDGET};
use tmplan_core::experiments::{hybrid_sweep, tradeoff_sweep, RowStatus};
use tmplan_core::milp::{build_milp, export_lp, MilpOptions};
use tmplan_core::resource::{parse_catalog, parse_fixing};
use tmplan_core::sim::{nanos, run_measurement, schedule_backup, SimConfig, TimingModel};
use tmplan_core::sndlib::convert_sndlib;
use tmplan_core::traffic::DEFAULT_RATE_RANGE;
use tmplan_core::{
    gen_traffic, greedy_plan, parse_topology, shortest_paths, DeploymentPlan, GreedyOptions, MeasurePoint, Resource,
    ResourceCatalog, RoutingMatrix, Topology,
};

/// Plans SDN node upgrades and backup links that make every ingress-egress
/// flow of an OSPF network measurable, and checks plans in a simulator.
#[derive(Parser)]
#[command(name = "tmplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a topology, route all flows and print its size.
    Validate(Input),
    /// Greedy deployment plan.
    PlanGreedy {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        fixing: Fixing,
        /// Stop once at most this many flows are undetermined.
        #[arg(long, default_value_t = 0)]
        phi_min: usize,
        /// Stop after this many chosen resources.
        #[arg(long)]
        max_steps: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Minimum-cost deployment plan.
    PlanExact {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        fixing: Fixing,
        #[command(flatten)]
        search: Search,
        /// Require exactly this many backup link pairs.
        #[arg(long)]
        links: Option<usize>,
        /// Reject plans costing more than this.
        #[arg(long)]
        cost_bound: Option<f64>,
        /// Also write the MILP model to this file.
        #[arg(long)]
        export_lp: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Write the placement MILP in LP format.
    ExportLp {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        fixing: Fixing,
        /// Require exactly this many backup link pairs.
        #[arg(long)]
        links: Option<usize>,
        #[command(flatten)]
        out: Output,
    },
    /// Plan, then simulate counter polling and reconstruct the traffic matrix.
    Simulate {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        fixing: Fixing,
        #[arg(long, value_enum, default_value_t = Planner::Greedy)]
        planner: Planner,
        #[command(flatten)]
        search: Search,
        /// Device timing preset: ideal, hp-switch, netgear-switch, slow-agent or fast-agent.
        #[arg(long, default_value = "ideal")]
        timing: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Backup link slot length in seconds.
        #[arg(long, default_value_t = 10.0)]
        t_meas: f64,
        /// Monitoring interval in seconds; by default just long enough for
        /// the busiest backup link.
        #[arg(long)]
        t_global: Option<f64>,
        /// Lowest generated flow rate in bit/s.
        #[arg(long, default_value_t = DEFAULT_RATE_RANGE.0)]
        rate_min: f64,
        /// Highest generated flow rate in bit/s.
        #[arg(long, default_value_t = DEFAULT_RATE_RANGE.1)]
        rate_max: f64,
        /// Header overhead per counted byte, e.g. 0.0257.
        #[arg(long, default_value_t = 0.0)]
        overhead: f64,
        #[command(flatten)]
        out: Output,
    },
    /// Minimum SDN nodes for every number of backup link pairs.
    Sweep {
        topology: PathBuf,
        /// Link counts to solve, `a..b` inclusive; by default all.
        #[arg(long, value_parser = parse_range)]
        k: Option<RangeInclusive<usize>>,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        timing: WallTime,
        #[command(flatten)]
        out: Output,
    },
    /// Fix the first k greedy choices and complete each plan exactly.
    HybridSweep {
        #[command(flatten)]
        input: Input,
        /// Prefix lengths to solve, `a..b` inclusive; by default all.
        #[arg(long, value_parser = parse_range)]
        k: Option<RangeInclusive<usize>>,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        timing: WallTime,
        #[command(flatten)]
        out: Output,
    },
    /// Convert an SNDlib network (XML or native) to the topology format.
    ConvertSndlib {
        input: PathBuf,
        /// Output file; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// Topology file.
    topology: PathBuf,
    /// Resource catalog; unit costs and no limits without one.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

#[derive(Args)]
struct Fixing {
    /// Comma-separated `node:<id>` or `link:<a>:<b>`, each optionally `=0` or `=1`.
    #[arg(long)]
    fixed: Option<String>,
}

#[derive(Args)]
struct Search {
    /// Search node budget for the exact planner.
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct WallTime {
    /// Leave out the seconds column so output is reproducible byte for byte.
    #[arg(long)]
    no_wall_time: bool,
}

#[derive(Args)]
struct Output {
    /// Directory for the output files; the main table goes to stdout without one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Planner {
    Greedy,
    Exact,
}

impl Planner {
    fn as_str(self) -> &'static str {
        match self {
            Planner::Greedy => "greedy",
            Planner::Exact => "exact",
        }
    }
}

/// How a successful run ended.
enum Status {
    Done,
    /// Outputs were written but the plan or sweep is not fully solved.
    Incomplete(String),
}

fn parse_range(s: &str) -> Result<RangeInclusive<usize>, String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let k = num(s)?;
            (k, k)
        }
    };
    if a > b {
        return Err(format!("empty range `{s}`"));
    }
    Ok(a..=b)
}

/// `# key=value` lines describing the effective configuration.
#[derive(Default)]
struct Echo(Vec<(String, String)>);

impl Echo {
    fn new(command: &str) -> Self {
        let mut e = Echo::default();
        e.add("tool", format!("tmplan {}", env!("CARGO_PKG_VERSION")));
        e.add("command", command);
        e
    }

    fn add(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    fn opt(&mut self, key: &str, value: Option<impl ToString>) -> &mut Self {
        let v = value.map_or_else(|| "none".to_string(), |v| v.to_string());
        self.add(key, v)
    }

    fn lines(&self) -> Vec<String> {
        self.0.iter().map(|(k, v)| format!("{k}={v}")).collect()
    }

    fn header(&self) -> String {
        self.lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}

struct Loaded {
    topology: Topology,
    routing: RoutingMatrix,
    catalog: ResourceCatalog,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_topology(path: &Path) -> Result<Topology> {
    parse_topology(&read(path)?).with_context(|| path.display().to_string())
}

fn load(input: &Input, echo: &mut Echo) -> Result<Loaded> {
    let topology = load_topology(&input.topology)?;
    let catalog = match &input.catalog {
        Some(p) => parse_catalog(&topology, &read(p)?).with_context(|| p.display().to_string())?,
        None => ResourceCatalog::uniform(&topology),
    };
    let routing = shortest_paths(&topology)?.with_flow_attributes(|f| catalog.apply_to_flow(f));
    echo.add("topology", input.topology.display())
        .opt("catalog", input.catalog.as_ref().map(|p| p.display()));
    Ok(Loaded {
        topology,
        routing,
        catalog,
    })
}

fn load_fixing(t: &Topology, fixing: &Fixing, echo: &mut Echo) -> Result<BTreeMap<Resource, bool>> {
    let fixed = match &fixing.fixed {
        Some(s) => parse_fixing(t, s).context("--fixed")?,
        None => BTreeMap::new(),
    };
    let canonical: Vec<String> = fixed
        .iter()
        .map(|(r, v)| format!("{}={}", r.spec(t), u8::from(*v)))
        .collect();
    echo.add(
        "fixed",
        if canonical.is_empty() {
            "none".into()
        } else {
            canonical.join(",")
        },
    );
    Ok(fixed)
}

/// Writes `name` into the output directory, or prints it to stdout when
/// there is none and the file is the main table.
fn emit(out: &Output, name: &str, main: bool, echo: &Echo, body: &str) -> Result<()> {
    let text = format!("{}{body}", echo.header());
    match &out.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None if main => {
            print!("{text}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn plan_summary(plan: &DeploymentPlan, echo: &mut Echo) {
    echo.add("resources", plan.len())
        .add("total_cost", plan.total_cost)
        .add("undetermined", plan.assignment.undetermined_count());
}

fn plan_problem(plan: &DeploymentPlan, phi_min: usize) -> Option<String> {
    if plan.limits_violated {
        Some(format!(
            "catalog limits leave {} flows undetermined",
            plan.assignment.undetermined_count()
        ))
    } else if plan.stalled {
        Some(format!("no resource determines the remaining {} flows", plan.residual))
    } else if plan.residual > phi_min {
        Some(format!("{} flows left undetermined", plan.residual))
    } else {
        None
    }
}

fn greedy_options(fixed: &BTreeMap<Resource, bool>, phi_min: usize, max_steps: Option<usize>) -> GreedyOptions {
    GreedyOptions {
        phi_min,
        preset: fixed.iter().filter(|(_, &v)| v).map(|(&r, _)| r).collect(),
        excluded: fixed.iter().filter(|(_, &v)| !v).map(|(&r, _)| r).collect(),
        max_steps,
    }
}

fn write_plan(out: &Output, echo: &Echo, l: &Loaded, plan: &DeploymentPlan) -> Result<()> {
    emit(out, "plan.csv", true, echo, &plan.to_csv(&l.routing))?;
    emit(out, "assignment.csv", false, echo, &plan.assignment_csv(&l.routing))
}

fn milp_model(l: &Loaded, fixed: BTreeMap<Resource, bool>, links: Option<usize>, echo: &Echo) -> String {
    let mut m = build_milp(
        &l.routing,
        &l.catalog,
        &MilpOptions {
            fixed,
            link_cardinality: links,
        },
    );
    m.comments.extend(echo.lines());
    export_lp(&m)
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Validate(input) => {
            let l = load(&input, &mut Echo::default())?;
            println!("{}", l.topology);
            Ok(Status::Done)
        }

        Command::PlanGreedy {
            input,
            fixing,
            phi_min,
            max_steps,
            out,
        } => {
            let mut echo = Echo::new("plan-greedy");
            let l = load(&input, &mut echo)?;
            let fixed = load_fixing(&l.topology, &fixing, &mut echo)?;
            echo.add("phi_min", phi_min).opt("max_steps", max_steps);
            let plan = greedy_plan(&l.routing, &l.catalog, &greedy_options(&fixed, phi_min, max_steps));
            plan_summary(&plan, &mut echo);
            // a step limit is a requested stop, like the threshold
            let problem =
                plan_problem(&plan, phi_min).filter(|_| plan.limits_violated || plan.stalled || max_steps.is_none());
            echo.add("status", if problem.is_some() { "incomplete" } else { "ok" });
            write_plan(&out, &echo, &l, &plan)?;
            Ok(problem.map_or(Status::Done, Status::Incomplete))
        }

        Command::PlanExact {
            input,
            fixing,
            search,
            links,
            cost_bound,
            export_lp,
            out,
        } => {
            let mut echo = Echo::new("plan-exact");
            let l = load(&input, &mut echo)?;
            let fixed = load_fixing(&l.topology, &fixing, &mut echo)?;
            echo.add("budget", search.budget)
                .opt("links", links)
                .opt("cost_bound", cost_bound);
            if let Some(path) = &export_lp {
                let text = milp_model(&l, fixed.clone(), links, &echo);
                fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
            }
            let opts = ExactOptions {
                fixed,
                cost_bound,
                node_budget: search.budget,
                link_cardinality: links,
            };
            match exact_plan(&l.routing, &l.catalog, &opts) {
                Ok(outcome) => {
                    plan_summary(&outcome.plan, &mut echo);
                    echo.add("search_nodes", outcome.search_nodes);
                    let status = match outcome.status {
                        ExactStatus::Optimal => Status::Done,
                        ExactStatus::BudgetExceeded => Status::Incomplete(format!(
                            "search budget of {} nodes exceeded; best plan found written",
                            search.budget
                        )),
                    };
                    echo.add(
                        "status",
                        match outcome.status {
                            ExactStatus::Optimal => "optimal",
                            ExactStatus::BudgetExceeded => "budget-exceeded",
                        },
                    );
                    write_plan(&out, &echo, &l, &outcome.plan)?;
                    Ok(status)
                }
                Err(e) => {
                    echo.add("status", "infeasible");
                    emit(&out, "plan.csv", true, &echo, "step,kind,resource,phi,residual,cost\n")?;
                    Ok(Status::Incomplete(e.to_string()))
                }
            }
        }

        Command::ExportLp {
            input,
            fixing,
            links,
            out,
        } => {
            let mut echo = Echo::new("export-lp");
            let l = load(&input, &mut echo)?;
            let fixed = load_fixing(&l.topology, &fixing, &mut echo)?;
            echo.opt("links", links);
            let text = milp_model(&l, fixed, links, &echo);
            emit(&out, "model.lp", true, &Echo::default(), &text)?;
            Ok(Status::Done)
        }

        Command::Simulate {
            input,
            fixing,
            planner,
            search,
            timing,
            seed,
            t_meas,
            t_global,
            rate_min,
            rate_max,
            overhead,
            out,
        } => {
            let mut echo = Echo::new("simulate");
            let l = load(&input, &mut echo)?;
            let fixed = load_fixing(&l.topology, &fixing, &mut echo)?;
            let timing = TimingModel::preset(&timing)?;
            let valid = |x: f64| x.is_finite() && x > 0.0;
            if !valid(t_meas) || t_global.is_some_and(|g| !valid(g) || g < t_meas) {
                bail!("need 0 < t-meas <= t-global");
            }
            let plan = match planner {
                Planner::Greedy => greedy_plan(&l.routing, &l.catalog, &greedy_options(&fixed, 0, None)),
                Planner::Exact => {
                    let opts = ExactOptions {
                        fixed,
                        node_budget: search.budget,
                        ..Default::default()
                    };
                    exact_plan(&l.routing, &l.catalog, &opts)?.plan
                }
            };
            let a = &plan.assignment;
            let busiest = l
                .topology
                .dir_links()
                .map(|d| a.measured_at(MeasurePoint::Backup(d)).len())
                .max()
                .unwrap_or(0)
                .max(1);
            let t_meas_ns = nanos(t_meas);
            let t_global_ns = t_global.map_or(busiest as u64 * t_meas_ns, nanos);
            echo.add("planner", planner.as_str())
                .add("timing", &timing.name)
                .add("seed", seed)
                .add("t_meas_s", t_meas)
                .add("t_global_s", t_global_ns as f64 / 1e9)
                .add("rate_min_bps", rate_min)
                .add("rate_max_bps", rate_max)
                .add("overhead", overhead);
            let sched = schedule_backup(&l.topology, a, t_meas_ns, t_global_ns)?;
            let tm = gen_traffic(l.routing.flow_count(), rate_min, rate_max, seed)?;
            let cfg = SimConfig { timing, seed, overhead };
            let report = run_measurement(&l.routing, &tm, a, &sched, &cfg)?;
            plan_summary(&plan, &mut echo);
            echo.add("unknown", report.unknown_count())
                .add("max_rel_error", report.max_rel_error());
            emit(&out, "reconstruction.csv", true, &echo, &report.to_csv(&l.routing))?;
            let label = |f| l.topology.flow_label(l.routing.flow(f));
            emit(&out, "schedule.csv", false, &echo, &sched.to_csv(&l.topology, label))?;
            write_plan(&out, &echo, &l, &plan)?;
            Ok(if report.is_complete() {
                Status::Done
            } else {
                Status::Incomplete(format!("{} flows not reconstructed", report.unknown_count()))
            })
        }

        Command::Sweep {
            topology,
            k,
            search,
            timing,
            out,
        } => {
            let mut echo = Echo::new("sweep");
            let t = load_topology(&topology)?;
            let r = shortest_paths(&t)?;
            let ks = k.unwrap_or(0..=t.link_count());
            echo.add("topology", topology.display())
                .add("k", format!("{}..{}", ks.start(), ks.end()))
                .add("budget", search.budget);
            let res = tradeoff_sweep(&r, ks, search.budget);
            let unsolved = res.rows.iter().filter(|r| r.status != RowStatus::Optimal).count();
            echo.add("monotone", res.is_monotone());
            emit(&out, "sweep.csv", true, &echo, &res.to_csv(!timing.no_wall_time))?;
            Ok(if unsolved == 0 {
                Status::Done
            } else {
                Status::Incomplete(format!("{unsolved} rows not solved to optimality"))
            })
        }

        Command::HybridSweep {
            input,
            k,
            search,
            timing,
            out,
        } => {
            let mut echo = Echo::new("hybrid-sweep");
            let l = load(&input, &mut echo)?;
            let k_text = k.as_ref().map(|k| format!("{}..{}", k.start(), k.end()));
            echo.opt("k", k_text).add("budget", search.budget);
            let res = hybrid_sweep(&l.routing, &l.catalog, k, search.budget);
            let unsolved = res.rows.iter().filter(|r| r.status != RowStatus::Optimal).count();
            echo.add("greedy_resources", res.greedy_len);
            emit(&out, "hybrid.csv", true, &echo, &res.to_csv(!timing.no_wall_time))?;
            Ok(if unsolved == 0 {
                Status::Done
            } else {
                Status::Incomplete(format!("{unsolved} rows not solved to optimality"))
            })
        }

        Command::ConvertSndlib { input, out } => {
            let native = convert_sndlib(&read(&input)?).with_context(|| input.display().to_string())?;
            let mut echo = Echo::new("convert-sndlib");
            echo.add("source", input.display());
            let text = format!("{}{native}", echo.header());
            match out {
                Some(p) => fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(Status::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Incomplete(why)) => {
            eprintln!("incomplete: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
