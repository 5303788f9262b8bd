use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coordfree::datalog::{builtin, builtin_names, classify_program, parse_program, Query};
use coordfree::eval_query;
use coordfree::monocheck::{classify_query, Bounds};
use coordfree::netmodel::{
    compatible_policy, ConstantAssignment, DistributionPolicy, ModelTag, NetworkGraph, NodeId,
    PolicySpec,
};
use coordfree::relcore::{adom, Fact, Instance};
use coordfree::scenario::{make_protocol, validate_pairing, Scenario};
use coordfree::simulator::{
    check_coordination_free, explore_schedules, indistinguishability, run, run_heartbeat_only,
    RunMode,
};

#[derive(Parser)]
#[command(
    name = "coordfree",
    version,
    about = "Monotonicity classes and coordination-free transducer networks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scheduler seed (overrides the scenario).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    max_steps: Option<u64>,
    #[arg(long, global = true)]
    fairness_bound: Option<u32>,
    /// Write the run trace to this file.
    #[arg(long, global = true)]
    trace_out: Option<PathBuf>,
    /// Succeed only if a property violation is found.
    #[arg(long, global = true)]
    expect_refuted: bool,
}

#[derive(Args)]
struct QueryArgs {
    /// Datalog program file.
    program: Option<PathBuf>,
    /// Bundled query: tc, asym, remark33 or winmove.
    #[arg(long, conflicts_with = "program")]
    builtin: Option<String>,
}

impl QueryArgs {
    fn load(&self) -> Result<Query> {
        match (&self.program, &self.builtin) {
            (Some(path), None) => {
                let text = read(path)?;
                let p = parse_program(&text).with_context(|| path.display().to_string())?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "program".into());
                Ok(Query::from_program(name, p))
            }
            (None, Some(name)) => Ok(builtin(name)?),
            _ => bail!(
                "give a program file or --builtin ({})",
                builtin_names().join(", ")
            ),
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Input instance file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Inline input facts, e.g. "e(a,b). e(b,c)."
    #[arg(long, conflicts_with = "input")]
    facts: Option<String>,
}

impl InputArgs {
    fn load(&self) -> Result<Option<Instance>> {
        Ok(match (&self.input, &self.facts) {
            (Some(path), _) => {
                Some(Instance::parse(&read(path)?).with_context(|| path.display().to_string())?)
            }
            (None, Some(text)) => Some(Instance::parse(text)?),
            (None, None) => None,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Program class and bounded monotonicity verdicts.
    Classify {
        #[command(flatten)]
        query: QueryArgs,
        /// Checker bounds `domain,facts,fresh`.
        #[arg(long, default_value = "3,3,1")]
        bounds: Bounds,
    },
    /// Evaluate a query on an instance.
    Eval {
        #[command(flatten)]
        query: QueryArgs,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Execute a scenario file.
    Run { scenario: PathBuf },
    /// Protocol experiments: witnesses, indistinguishability, schedule search.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Args)]
struct ProtocolArgs {
    /// t_mono, t_adom or t_repl.
    #[arg(long)]
    protocol: String,
    /// Bundled query name.
    #[arg(long = "query")]
    query: String,
    /// Model tag; defaults to the protocol's natural model.
    #[arg(long)]
    model: Option<ModelTag>,
}

impl ProtocolArgs {
    fn model(&self) -> ModelTag {
        self.model.unwrap_or(match self.protocol.as_str() {
            "t_adom" => ModelTag::N1,
            "t_repl" => ModelTag::N2,
            _ => ModelTag::N0,
        })
    }
}

#[derive(Subcommand)]
enum Experiment {
    /// All-on-one-node witnesses under heartbeat-only execution.
    CfCheck {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[command(flatten)]
        input: InputArgs,
        /// Largest network size (line, star and complete graphs).
        #[arg(long, default_value_t = 3)]
        max_nodes: u32,
    },
    /// The two-scenario indistinguishability experiment.
    Indist {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[command(flatten)]
        input: InputArgs,
        /// The fact held by the second node.
        #[arg(long)]
        fact: Fact,
        #[arg(long, default_value_t = 8)]
        rounds: u32,
    },
    /// Exhaustive schedule exploration up to a depth.
    Explore {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 2)]
        nodes: u32,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Policy as JSON, e.g. '{"kind":"hash"}'.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, default_value_t = 200_000)]
        budget: usize,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn print_facts(label: &str, inst: &Instance) {
    println!("{label}:");
    for f in inst {
        println!("  {f}");
    }
}

/// Sample inputs for experiments run without `--input`.
fn default_inputs(query: &str) -> Vec<Instance> {
    let texts: &[&str] = match query {
        "winmove" => &[
            "move(a,b). move(b,c).",
            "move(a,b). move(b,a). move(b,c).",
            "move(a,b). move(b,c). move(c,d). move(d,a). move(c,e).",
        ],
        _ => &[
            "e(a,b).",
            "e(a,b). e(b,c). e(c,b).",
            "e(a,b). e(b,a). e(b,c). e(c,d). e(d,d).",
        ],
    };
    texts
        .iter()
        .map(|t| Instance::parse(t).expect("bundled"))
        .collect()
}

fn networks(max: u32) -> Result<Vec<NetworkGraph>> {
    let mut out = vec![NetworkGraph::single()];
    for n in 2..=max {
        out.push(NetworkGraph::line(n)?);
        out.push(NetworkGraph::star(n)?);
        out.push(NetworkGraph::complete(n)?);
    }
    Ok(out)
}

/// Constants spread round-robin over the nodes.
fn round_robin(input: &Instance, graph: &NetworkGraph) -> DistributionPolicy {
    let nodes: Vec<NodeId> = graph.nodes().collect();
    let map: BTreeMap<_, _> = adom(input)
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, [nodes[i % nodes.len()]].into_iter().collect()))
        .collect();
    compatible_policy(ConstantAssignment {
        map,
        ..ConstantAssignment::all_on(nodes[0])
    })
}

/// Whether a property violation was found.
type Found = bool;

fn classify(query: &QueryArgs, bounds: Bounds) -> Result<Found> {
    let q = query.load()?;
    match q.program() {
        Some(p) => println!("query={} program_class={}", q.name(), classify_program(p)),
        None => println!("query={} program_class=builtin", q.name()),
    }
    let report = classify_query(&q, bounds)?;
    print!("{}", report.to_text());
    Ok(report.verdicts.iter().any(|v| !v.holds()) || !report.inconsistencies.is_empty())
}

fn eval_cmd(query: &QueryArgs, input: &InputArgs) -> Result<Found> {
    let q = query.load()?;
    let i = input
        .load()?
        .ok_or_else(|| anyhow!("give --input or --facts"))?;
    print!("{}", eval_query(&q, &i)?.to_text());
    Ok(false)
}

fn run_cmd(path: &Path, g: &Global) -> Result<Found> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = g.seed {
        s.config.seed = seed;
    }
    if let Some(m) = g.max_steps {
        s.config.max_steps = m;
    }
    if let Some(k) = g.fairness_bound {
        s.config.fairness_bound = k;
    }
    s.config.validate()?;
    let expected = eval_query(&s.query, &s.input)?;
    println!(
        "scenario={} protocol={} model={} seed={} mode={}",
        path.display(),
        s.protocol.name(),
        s.model,
        s.config.seed,
        s.config.mode
    );
    let p = s.protocol.as_ref();
    let result = match s.config.mode {
        RunMode::FairRandom => run(p, &s.graph, &s.input, &s.policy, &s.config)?,
        RunMode::HeartbeatOnly => {
            run_heartbeat_only(p, &s.graph, &s.input, &s.policy, s.config.rounds)?
        }
        RunMode::Exhaustive { depth } => {
            let rep = explore_schedules(
                p,
                &s.graph,
                &s.input,
                &s.policy,
                depth,
                200_000,
                s.config.max_steps,
            )?;
            for o in &rep.outputs {
                println!("output={}", o.to_inline());
            }
            println!("expected={}", expected.to_inline());
            println!("branches={} agree={}", rep.branches, rep.agree());
            return Ok(!rep.agree());
        }
    };
    print_facts("output", &result.output);
    let matches = result.output == expected;
    println!(
        "converged={} steps={} rounds={} deliveries={} matches_oracle={}",
        result.converged, result.steps_taken, result.rounds, result.deliveries, matches
    );
    if let Some(out) = &g.trace_out {
        fs::write(out, result.trace_text())
            .with_context(|| format!("cannot write {}", out.display()))?;
        println!("trace={}", out.display());
    }
    let settled = match s.config.mode {
        RunMode::HeartbeatOnly => result.heartbeat_fixpoint,
        _ => result.converged,
    };
    Ok(!settled || !matches)
}

fn experiment(e: &Experiment) -> Result<Found> {
    match e {
        Experiment::CfCheck {
            proto,
            input,
            max_nodes,
        } => {
            let q = builtin(&proto.query)?;
            let p = make_protocol(&proto.protocol, q.clone())?;
            let inputs = match input.load()? {
                Some(i) => vec![i],
                None => default_inputs(&proto.query),
            };
            let model = proto.model();
            let v =
                check_coordination_free(p.as_ref(), &q, model, &inputs, &networks(*max_nodes)?)?;
            println!(
                "experiment=cf-check protocol={} query={} model={} runs={} witnessed={}",
                p.name(),
                q.name(),
                model,
                v.runs,
                v.computes()
            );
            for f in &v.failures {
                println!(
                    "failure {} observed={} expected={}",
                    f.label,
                    f.observed.to_inline(),
                    f.expected.to_inline()
                );
            }
            Ok(!v.computes())
        }
        Experiment::Indist {
            proto,
            input,
            fact,
            rounds,
        } => {
            let q = builtin(&proto.query)?;
            let p = make_protocol(&proto.protocol, q.clone())?;
            let i = input
                .load()?
                .ok_or_else(|| anyhow!("give --input or --facts"))?;
            let model = proto.model();
            let r = indistinguishability(p.as_ref(), &q, &i, fact, model, *rounds)?;
            println!(
                "experiment=indist protocol={} query={} model={} fact={}",
                p.name(),
                q.name(),
                model,
                fact
            );
            let per_round: Vec<&str> = r
                .states_equal_per_round
                .iter()
                .map(|b| if *b { "1" } else { "0" })
                .collect();
            println!(
                "states_equal={} per_round={}",
                r.states_equal(),
                per_round.join("")
            );
            println!("scenario1_output={}", r.scenario1_output.to_inline());
            println!("scenario2_n0_output={}", r.scenario2_n0_output.to_inline());
            println!("expected={}", r.expected.to_inline());
            println!("spurious_output={}", r.spurious_output.to_inline());
            Ok(!r.spurious_output.is_empty())
        }
        Experiment::Explore {
            proto,
            input,
            nodes,
            depth,
            policy,
            budget,
        } => {
            let q = builtin(&proto.query)?;
            let p = make_protocol(&proto.protocol, q.clone())?;
            let i = match input.load()? {
                Some(i) => i,
                None => default_inputs(&proto.query).swap_remove(1),
            };
            let graph = NetworkGraph::line(*nodes)?;
            let pol = match policy {
                Some(json) => serde_json::from_str::<PolicySpec>(json)
                    .context("bad --policy")?
                    .build(&graph)?,
                None if proto.protocol == "t_repl" => round_robin(&i, &graph),
                None => DistributionPolicy::Hash { nodes: *nodes },
            };
            validate_pairing(&proto.protocol, proto.model(), &pol)?;
            let rep = explore_schedules(p.as_ref(), &graph, &i, &pol, *depth, *budget, 100_000)?;
            println!(
                "experiment=explore protocol={} query={} nodes={} depth={} branches={} agree={}",
                p.name(),
                q.name(),
                nodes,
                depth,
                rep.branches,
                rep.agree()
            );
            for o in &rep.outputs {
                println!("output={}", o.to_inline());
            }
            Ok(!rep.agree())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let found = match &cli.command {
        Command::Classify { query, bounds } => classify(query, *bounds),
        Command::Eval { query, input } => eval_cmd(query, input),
        Command::Run { scenario } => run_cmd(scenario, &cli.global),
        Command::Experiment(e) => experiment(e),
    };
    match found {
        Ok(found) => {
            if found != cli.global.expect_refuted {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
