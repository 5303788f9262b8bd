//! Deterministic, seeded execution of transducer networks.
//!
//! The fair-random scheduler proceeds in rounds. Each round draws from one
//! ChaCha generator in this order: a shuffle of the node order; then, per
//! node, one coin per buffered message (in buffer order) deciding delivery,
//! a shuffle of the chosen messages, and one coin deciding the heartbeat.
//! Messages older than the fairness bound and overdue heartbeats are forced
//! regardless of the coins.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datalog::{eval_query, Query, QueryError};
use crate::netmodel::{
    compatible_policy, distribute, isolation_assignment, isolation_policy, DistributionPolicy,
    ModelTag, NetError, NetworkGraph, NodeId, PolicyOracle,
};
use crate::relcore::{adom, Fact, Instance};
use crate::transducer::{
    state_equal, step, Protocol, StepInput, StepOutput, SystemInfo, TransducerError,
    TransducerState,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("{node}: {source}")]
    Transducer {
        node: NodeId,
        source: TransducerError,
    },
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("schedule budget of {budget} branches exceeded after exploring {explored} ({fraction:.3} of the known tree)")]
    Budget {
        budget: usize,
        explored: usize,
        fraction: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    FairRandom,
    HeartbeatOnly,
    Exhaustive { depth: usize },
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunMode::FairRandom => f.write_str("fair-random"),
            RunMode::HeartbeatOnly => f.write_str("heartbeat-only"),
            RunMode::Exhaustive { depth } => write!(f, "exhaustive({depth})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// Every buffered fact is delivered, and every node heartbeats, within
    /// this many rounds.
    pub fairness_bound: u32,
    pub max_steps: u64,
    pub mode: RunMode,
    /// Round limit for heartbeat-only runs.
    pub rounds: u32,
    /// Populate the global active domain system relation (model N3).
    pub global_adom: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            fairness_bound: 4,
            max_steps: 200_000,
            mode: RunMode::FairRandom,
            rounds: 1_000,
            global_adom: false,
        }
    }
}

impl RunConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        RunConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.fairness_bound == 0 {
            return Err(SimError::Config("fairness bound must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(SimError::Config("max steps must be at least 1".into()));
        }
        if self.rounds == 0 {
            return Err(SimError::Config("rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Heartbeat,
    Deliver(Fact),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub round: u32,
    pub node: NodeId,
    pub kind: EventKind,
    pub sent: usize,
    pub emitted: Instance,
    /// Rounds the delivered fact spent in the buffer.
    pub waited: u32,
}

fn fact_list(inst: &Instance) -> String {
    if inst.is_empty() {
        return "-".into();
    }
    inst.iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (ev, fact) = match &self.kind {
            EventKind::Heartbeat => ("hb", "-".to_string()),
            EventKind::Deliver(m) => ("dv", m.to_string()),
        };
        write!(
            f,
            "step={} node={} ev={} fact={} sent={} emit={}",
            self.step,
            self.node,
            ev,
            fact,
            self.sent,
            fact_list(&self.emitted)
        )
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub output: Instance,
    pub converged: bool,
    pub steps_taken: u64,
    pub rounds: u32,
    pub deliveries: u64,
    /// Heartbeat-only runs: every node reached its heartbeat fixpoint.
    pub heartbeat_fixpoint: bool,
    pub node_output: BTreeMap<NodeId, Instance>,
    pub trace: Vec<TraceEvent>,
}

impl RunResult {
    /// One line per event and a final result line.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out.push_str(&format!(
            "result converged={} steps={}\n",
            self.converged, self.steps_taken
        ));
        out
    }

    /// Emitted facts outside `expected`.
    pub fn unsound(&self, expected: &Instance) -> Instance {
        self.output.difference(expected)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    /// Replay label: setup and seed or schedule.
    pub label: String,
    pub observed: Instance,
    pub expected: Instance,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Verdict {
    pub runs: usize,
    pub failures: Vec<Failure>,
}

impl Verdict {
    pub fn computes(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
struct Buffered {
    fact: Fact,
    round: u32,
}

/// Complete state of a running network.
#[derive(Clone, Debug)]
pub struct NetworkState {
    graph: NetworkGraph,
    nodes: Vec<TransducerState>,
    buffers: Vec<Vec<Buffered>>,
    neighbors: Vec<Vec<NodeId>>,
    step: u64,
    round: u32,
    deliveries: u64,
    trace: Vec<TraceEvent>,
}

impl NetworkState {
    /// Distributes `input` and initializes every node.
    pub fn new(
        protocol: &dyn Protocol,
        graph: &NetworkGraph,
        input: &Instance,
        policy: &DistributionPolicy,
        global_adom: bool,
    ) -> Result<Self, SimError> {
        policy.validate(graph)?;
        let shares = distribute(input, policy, graph)?;
        let policy = Arc::new(policy.clone());
        let all: Vec<NodeId> = graph.nodes().collect();
        let global = global_adom.then(|| adom(input));
        let nodes = shares
            .into_iter()
            .map(|(id, share)| {
                let system = SystemInfo {
                    id,
                    all: all.clone(),
                    oracle: PolicyOracle::new(policy.clone(), id),
                    global_adom: global.clone(),
                };
                TransducerState::new(protocol, system, share)
            })
            .collect();
        Ok(NetworkState {
            graph: graph.clone(),
            nodes,
            buffers: vec![Vec::new(); all.len()],
            neighbors: all.iter().map(|n| graph.neighbors(*n)).collect(),
            step: 0,
            round: 0,
            deliveries: 0,
            trace: Vec::new(),
        })
    }

    pub fn node(&self, n: NodeId) -> &TransducerState {
        &self.nodes[n.index()]
    }

    pub fn output(&self) -> Instance {
        self.nodes
            .iter()
            .flat_map(|s| s.emitted.iter().cloned())
            .collect()
    }

    pub fn buffers_empty(&self) -> bool {
        self.buffers.iter().all(Vec::is_empty)
    }

    pub fn buffer(&self, n: NodeId) -> impl Iterator<Item = &Fact> {
        self.buffers[n.index()].iter().map(|b| &b.fact)
    }

    fn transition(
        &self,
        protocol: &dyn Protocol,
        n: NodeId,
        input: &StepInput,
    ) -> Result<StepOutput, SimError> {
        step(protocol, &self.nodes[n.index()], input)
            .map_err(|source| SimError::Transducer { node: n, source })
    }

    /// Heartbeat of `n` would change nothing.
    pub fn at_fixpoint(&self, protocol: &dyn Protocol, n: NodeId) -> Result<bool, SimError> {
        Ok(self
            .transition(protocol, n, &StepInput::Heartbeat)?
            .is_noop())
    }

    pub fn quiescent(&self, protocol: &dyn Protocol) -> Result<bool, SimError> {
        if !self.buffers_empty() {
            return Ok(false);
        }
        for n in self.graph.nodes() {
            if !self.at_fixpoint(protocol, n)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn apply(&mut self, n: NodeId, kind: EventKind, waited: u32, out: StepOutput) {
        self.step += 1;
        self.nodes[n.index()].apply(&out);
        for &m in &self.neighbors[n.index()] {
            for f in &out.messages {
                self.buffers[m.index()].push(Buffered {
                    fact: f.clone(),
                    round: self.round,
                });
            }
        }
        self.trace.push(TraceEvent {
            step: self.step,
            round: self.round,
            node: n,
            kind,
            sent: out.messages.len() * self.neighbors[n.index()].len(),
            emitted: out.new_output,
            waited,
        });
    }

    fn heartbeat(&mut self, protocol: &dyn Protocol, n: NodeId) -> Result<bool, SimError> {
        let out = self.transition(protocol, n, &StepInput::Heartbeat)?;
        let noop = out.is_noop();
        self.apply(n, EventKind::Heartbeat, 0, out);
        Ok(!noop)
    }

    /// Delivers `b`, already taken out of `n`'s buffer.
    fn deliver(&mut self, protocol: &dyn Protocol, n: NodeId, b: Buffered) -> Result<(), SimError> {
        let input = StepInput::Deliver(b.fact.clone());
        let out = self.transition(protocol, n, &input)?;
        self.deliveries += 1;
        let waited = self.round - b.round;
        self.apply(n, EventKind::Deliver(b.fact), waited, out);
        Ok(())
    }

    fn result(self, converged: bool, heartbeat_fixpoint: bool) -> RunResult {
        RunResult {
            output: self.output(),
            converged,
            steps_taken: self.step,
            rounds: self.round,
            deliveries: self.deliveries,
            heartbeat_fixpoint,
            node_output: self
                .nodes
                .iter()
                .map(|s| (s.node(), s.emitted.clone()))
                .collect(),
            trace: self.trace,
        }
    }

    /// Canonical key for schedule exploration: per-node memory and output
    /// plus each buffer as a sorted bag.
    fn key(&self) -> Vec<(Instance, Instance, Vec<Fact>)> {
        self.nodes
            .iter()
            .zip(&self.buffers)
            .map(|(s, b)| {
                let mut bag: Vec<Fact> = b.iter().map(|x| x.fact.clone()).collect();
                bag.sort();
                (s.memory.clone(), s.emitted.clone(), bag)
            })
            .collect()
    }
}

/// A fair-random run to quiescence or `max_steps`.
pub fn run(
    protocol: &dyn Protocol,
    graph: &NetworkGraph,
    input: &Instance,
    policy: &DistributionPolicy,
    cfg: &RunConfig,
) -> Result<RunResult, SimError> {
    cfg.validate()?;
    let mut net = NetworkState::new(protocol, graph, input, policy, cfg.global_adom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.fairness_bound;
    let mut last_hb = vec![0u32; graph.size()];
    let mut order: Vec<NodeId> = graph.nodes().collect();
    loop {
        if net.quiescent(protocol)? {
            return Ok(net.result(true, true));
        }
        net.round += 1;
        let round = net.round;
        order.shuffle(&mut rng);
        for &n in &order {
            let mut chosen: Vec<usize> = Vec::new();
            for (i, b) in net.buffers[n.index()].iter().enumerate() {
                let coin = rng.gen_bool(0.5);
                if coin || round - b.round + 1 >= k {
                    chosen.push(i);
                }
            }
            chosen.shuffle(&mut rng);
            let mut slots: Vec<Option<Buffered>> = std::mem::take(&mut net.buffers[n.index()])
                .into_iter()
                .map(Some)
                .collect();
            let picked: Vec<Buffered> = chosen.iter().filter_map(|&i| slots[i].take()).collect();
            net.buffers[n.index()] = slots.into_iter().flatten().collect();
            for b in picked {
                if net.step >= cfg.max_steps {
                    return Ok(net.result(false, false));
                }
                net.deliver(protocol, n, b)?;
            }
            let coin = rng.gen_bool(0.5);
            if coin || round - last_hb[n.index()] >= k {
                if net.step >= cfg.max_steps {
                    return Ok(net.result(false, false));
                }
                net.heartbeat(protocol, n)?;
                last_hb[n.index()] = round;
            }
        }
    }
}

/// Round-robin heartbeats only; sends accumulate but are never delivered.
pub fn run_heartbeat_only(
    protocol: &dyn Protocol,
    graph: &NetworkGraph,
    input: &Instance,
    policy: &DistributionPolicy,
    rounds: u32,
) -> Result<RunResult, SimError> {
    if rounds == 0 {
        return Err(SimError::Config("rounds must be at least 1".into()));
    }
    let mut net = NetworkState::new(protocol, graph, input, policy, false)?;
    let mut fixpoint = false;
    while net.round < rounds {
        net.round += 1;
        let mut changed = false;
        for n in graph.nodes() {
            changed |= net.heartbeat(protocol, n)?;
        }
        if !changed {
            fixpoint = true;
            break;
        }
    }
    let converged = fixpoint && net.buffers_empty();
    Ok(net.result(converged, fixpoint))
}

/// Input/network/policy/seed sweep against the oracle evaluation.
pub fn check_computes(
    protocol: &dyn Protocol,
    query: &Query,
    inputs: &[Instance],
    networks: &[NetworkGraph],
    policies: &dyn Fn(&NetworkGraph, &Instance) -> Vec<DistributionPolicy>,
    seeds: &[u64],
    cfg: &RunConfig,
) -> Result<Verdict, SimError> {
    let mut verdict = Verdict::default();
    for input in inputs {
        let expected = eval_query(query, input)?;
        for graph in networks {
            for (pi, policy) in policies(graph, input).iter().enumerate() {
                for &seed in seeds {
                    let r = run(protocol, graph, input, policy, &cfg.with_seed(seed))?;
                    verdict.runs += 1;
                    if !r.converged || r.output != expected {
                        verdict.failures.push(Failure {
                            label: format!(
                                "input={} graph={} policy#{} seed={} converged={}",
                                input.to_inline(),
                                graph,
                                pi,
                                seed,
                                r.converged
                            ),
                            observed: r.output,
                            expected: expected.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(verdict)
}

/// Tests the all-on-one-node witness policy of `model` under heartbeat-only
/// execution.
pub fn check_coordination_free(
    protocol: &dyn Protocol,
    query: &Query,
    model: ModelTag,
    inputs: &[Instance],
    networks: &[NetworkGraph],
) -> Result<Verdict, SimError> {
    let policy = model.single_node_policy(NodeId(0));
    let mut verdict = Verdict::default();
    for input in inputs {
        let expected = eval_query(query, input)?;
        for graph in networks {
            let r = run_heartbeat_only(protocol, graph, input, &policy, 10_000)?;
            verdict.runs += 1;
            if !r.heartbeat_fixpoint || r.deliveries != 0 || r.output != expected {
                verdict.failures.push(Failure {
                    label: format!(
                        "input={} graph={} rounds={} fixpoint={}",
                        input.to_inline(),
                        graph,
                        r.rounds,
                        r.heartbeat_fixpoint
                    ),
                    observed: r.output,
                    expected,
                });
                break;
            }
        }
    }
    Ok(verdict)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndistReport {
    pub states_equal_per_round: Vec<bool>,
    /// Scenario 1 output (single node, input `I`).
    pub scenario1_output: Instance,
    /// What `n0` emits in scenario 2.
    pub scenario2_n0_output: Instance,
    /// `Q(I ∪ {f})`.
    pub expected: Instance,
    pub spurious_output: Instance,
}

impl IndistReport {
    pub fn states_equal(&self) -> bool {
        self.states_equal_per_round.iter().all(|b| *b)
    }
}

/// Runs the two-scenario experiment: `n0` alone with `I`, against `n0`
/// holding `I` beside `n1` holding `f`, both heartbeat-only.
pub fn indistinguishability(
    protocol: &dyn Protocol,
    query: &Query,
    input: &Instance,
    f: &Fact,
    model: ModelTag,
    rounds: u32,
) -> Result<IndistReport, SimError> {
    let (n0, n1) = (NodeId(0), NodeId(1));
    let policy2 = match model {
        ModelTag::N1 => {
            if input.contains(f) {
                return Err(SimError::Precondition(format!(
                    "`{f}` is already in the input"
                )));
            }
            let base = adom(input);
            if !f.constants().any(|c| !base.contains(c)) {
                return Err(SimError::Precondition(format!(
                    "`{f}` has no constant outside the input's active domain"
                )));
            }
            isolation_policy(f, n0, n1)?
        }
        ModelTag::N2 => compatible_policy(isolation_assignment(input, f, n0, n1)?),
        other => {
            return Err(SimError::Precondition(format!(
                "indistinguishability is defined for N1 and N2, not {other}"
            )))
        }
    };
    let policy1 = model.single_node_policy(n0);
    let g1 = NetworkGraph::single();
    let g2 = NetworkGraph::line(2)?;
    let full = input.with(f.clone());
    let mut s1 = NetworkState::new(protocol, &g1, input, &policy1, false)?;
    let mut s2 = NetworkState::new(protocol, &g2, &full, &policy2, false)?;
    let mut equal = Vec::new();
    for _ in 0..rounds {
        s1.round += 1;
        s2.round += 1;
        s1.heartbeat(protocol, n0)?;
        s2.heartbeat(protocol, n0)?;
        s2.heartbeat(protocol, n1)?;
        equal.push(state_equal(s1.node(n0), s2.node(n0)));
    }
    let expected = eval_query(query, &full)?;
    let n0_out = s2.node(n0).emitted.clone();
    Ok(IndistReport {
        states_equal_per_round: equal,
        scenario1_output: s1.output(),
        spurious_output: n0_out.difference(&expected),
        scenario2_n0_output: n0_out,
        expected,
    })
}

#[derive(Clone, Debug)]
pub struct ExploreReport {
    /// Distinct schedule prefixes completed.
    pub branches: usize,
    pub outputs: BTreeSet<Instance>,
    pub verdict: Verdict,
}

impl ExploreReport {
    pub fn agree(&self) -> bool {
        self.outputs.len() <= 1 && self.verdict.computes()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Choice {
    Heartbeat(NodeId),
    Deliver(NodeId, Fact),
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Heartbeat(n) => write!(f, "{n}:hb"),
            Choice::Deliver(n, m) => write!(f, "{n}:{m}"),
        }
    }
}

fn choices(net: &NetworkState) -> Vec<Choice> {
    let mut out = Vec::new();
    for n in net.graph.nodes() {
        out.push(Choice::Heartbeat(n));
        let distinct: BTreeSet<&Fact> = net.buffer(n).collect();
        out.extend(distinct.into_iter().map(|m| Choice::Deliver(n, m.clone())));
    }
    out
}

fn take(net: &mut NetworkState, protocol: &dyn Protocol, c: &Choice) -> Result<(), SimError> {
    match c {
        Choice::Heartbeat(n) => {
            net.heartbeat(protocol, *n)?;
        }
        Choice::Deliver(n, m) => {
            let i = net.buffers[n.index()]
                .iter()
                .position(|b| &b.fact == m)
                .expect("choice comes from the buffer");
            let b = net.buffers[n.index()].remove(i);
            net.deliver(protocol, *n, b)?;
        }
    }
    Ok(())
}

/// Fixed fair completion: rounds of FIFO delivery then a heartbeat, in node
/// order, until quiescence.
fn complete_fairly(
    mut net: NetworkState,
    protocol: &dyn Protocol,
    max_steps: u64,
) -> Result<(bool, Instance), SimError> {
    let start = net.step;
    loop {
        if net.quiescent(protocol)? {
            return Ok((true, net.output()));
        }
        if net.step - start >= max_steps {
            return Ok((false, net.output()));
        }
        net.round += 1;
        for n in net.graph.nodes().collect::<Vec<_>>() {
            for b in std::mem::take(&mut net.buffers[n.index()]) {
                net.deliver(protocol, n, b)?;
            }
            net.heartbeat(protocol, n)?;
        }
    }
}

/// Enumerates every choice sequence of length `depth` (merging prefixes
/// that reach identical network states) and completes each fairly.
pub fn explore_schedules(
    protocol: &dyn Protocol,
    graph: &NetworkGraph,
    input: &Instance,
    policy: &DistributionPolicy,
    depth: usize,
    budget: usize,
    max_steps: u64,
) -> Result<ExploreReport, SimError> {
    let expected = eval_query(protocol.query(), input)?;
    let root = NetworkState::new(protocol, graph, input, policy, false)?;
    let mut report = ExploreReport {
        branches: 0,
        outputs: BTreeSet::new(),
        verdict: Verdict::default(),
    };
    let mut visited = HashSet::new();
    // (state, depth, schedule)
    let mut stack = vec![(root, 0usize, Vec::<Choice>::new())];
    while let Some((net, d, sched)) = stack.pop() {
        if !visited.insert((d, net.key())) {
            continue;
        }
        let next = if d < depth { choices(&net) } else { Vec::new() };
        if next.is_empty() || net.quiescent(protocol)? {
            if report.branches >= budget {
                let explored = report.branches;
                let frontier = stack.len() + 1;
                return Err(SimError::Budget {
                    budget,
                    explored,
                    fraction: explored as f64 / (explored + frontier) as f64,
                });
            }
            report.branches += 1;
            report.verdict.runs += 1;
            let (converged, output) = complete_fairly(net, protocol, max_steps)?;
            if !converged || output != expected {
                report.verdict.failures.push(Failure {
                    label: format!(
                        "schedule={} converged={converged}",
                        sched
                            .iter()
                            .map(|c| c.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    ),
                    observed: output.clone(),
                    expected: expected.clone(),
                });
            }
            report.outputs.insert(output);
            continue;
        }
        for c in next.into_iter().rev() {
            let mut child = net.clone();
            child.round += 1;
            take(&mut child, protocol, &c)?;
            let mut s = sched.clone();
            s.push(c);
            stack.push((child, d + 1, s));
        }
    }
    Ok(report)
}
