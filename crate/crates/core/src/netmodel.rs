//! Network graphs, partitioning policies for the distribution models
//! N0–N3, and the policy oracle a node uses to ask "would this fact be
//! allocated to me?".

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relcore::{adom, Constant, Fact, Instance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The node id as a constant (`n0`, `n1`, ...), for message payloads.
    pub fn as_constant(self) -> Constant {
        Constant::new(self.to_string())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("network must have at least one node")]
    Empty,
    #[error("edge {0}-{1} references a node outside the network")]
    UnknownNode(NodeId, NodeId),
    #[error("self-loop on {0}")]
    SelfLoop(NodeId),
    #[error("network graph is not connected")]
    Disconnected,
    #[error("policy assigns `{fact}` to node {node} outside the network")]
    NodeOutsideNetwork { fact: String, node: NodeId },
    #[error("policy assigns `{0}` to no node")]
    EmptyAssignment(String),
    #[error("{asker} cannot construct `{fact}`: constant `{missing}` is not known")]
    Unconstructible {
        asker: NodeId,
        fact: String,
        missing: Constant,
    },
    #[error("fact `{fact}` shares constant `{shared}` with the base instance")]
    SharedConstant { fact: String, shared: Constant },
    #[error("fact `{0}` is nullary")]
    NullaryFact(String),
    #[error("nodes must differ")]
    SameNode,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
}

/// A connected undirected graph over nodes `n0..n(k-1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NetworkGraph {
    size: u32,
    edges: BTreeSet<(NodeId, NodeId)>,
}

impl NetworkGraph {
    pub fn new(size: u32, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self, NetError> {
        if size == 0 {
            return Err(NetError::Empty);
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            let (a, b) = (NodeId(a), NodeId(b));
            if a.0 >= size || b.0 >= size {
                return Err(NetError::UnknownNode(a, b));
            }
            if a == b {
                return Err(NetError::SelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let g = NetworkGraph { size, edges: set };
        if !g.is_connected() {
            return Err(NetError::Disconnected);
        }
        Ok(g)
    }

    pub fn single() -> Self {
        NetworkGraph {
            size: 1,
            edges: BTreeSet::new(),
        }
    }

    pub fn line(size: u32) -> Result<Self, NetError> {
        Self::new(size, (1..size).map(|i| (i - 1, i)))
    }

    pub fn star(size: u32) -> Result<Self, NetError> {
        Self::new(size, (1..size).map(|i| (0, i)))
    }

    pub fn complete(size: u32) -> Result<Self, NetError> {
        Self::new(
            size,
            (0..size).flat_map(|a| (a + 1..size).map(move |b| (a, b))),
        )
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.size).map(NodeId)
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, n: NodeId) -> bool {
        n.0 < self.size
    }

    pub fn neighbors(&self, n: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == n {
                    Some(b)
                } else if b == n {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    fn is_connected(&self) -> bool {
        let mut seen = BTreeSet::from([NodeId(0)]);
        let mut queue = VecDeque::from([NodeId(0)]);
        while let Some(n) = queue.pop_front() {
            for m in self.neighbors(n) {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        seen.len() == self.size()
    }
}

impl fmt::Display for NetworkGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} nodes [", self.size)?;
        for (i, (a, b)) in self.edges.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}-{b}")?;
        }
        f.write_str("]")
    }
}

pub type NodeSet = BTreeSet<NodeId>;

/// `F : dom → 2^N \ {∅}` with a default for unmapped constants and a fixed
/// home for nullary facts.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstantAssignment {
    pub map: BTreeMap<Constant, NodeSet>,
    pub default: NodeSet,
    pub nullary_home: NodeId,
}

impl ConstantAssignment {
    /// Every constant on `node`.
    pub fn all_on(node: NodeId) -> Self {
        ConstantAssignment {
            map: BTreeMap::new(),
            default: NodeSet::from([node]),
            nullary_home: node,
        }
    }

    pub fn nodes_of(&self, c: &Constant) -> &NodeSet {
        self.map.get(c).unwrap_or(&self.default)
    }

    /// Does `node` own constant `c`?
    pub fn owns(&self, node: NodeId, c: &Constant) -> bool {
        self.nodes_of(c).contains(&node)
    }
}

/// A total map from the Herbrand base of the input schema to non-empty
/// node sets, kept as rules plus finite overrides.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DistributionPolicy {
    SingleNode(NodeId),
    /// Each fact goes to `fnv1a(text) mod nodes`.
    Hash {
        nodes: u32,
    },
    Explicit {
        default: NodeSet,
        overrides: BTreeMap<Fact, NodeSet>,
    },
    ConstantMap(ConstantAssignment),
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl DistributionPolicy {
    /// The node set a fact is (or would be) placed on.
    pub fn assign(&self, fact: &Fact) -> NodeSet {
        match self {
            DistributionPolicy::SingleNode(n) => NodeSet::from([*n]),
            DistributionPolicy::Hash { nodes } => {
                let h = fnv1a(fact.to_string().as_bytes());
                NodeSet::from([NodeId((h % u64::from((*nodes).max(1))) as u32)])
            }
            DistributionPolicy::Explicit { default, overrides } => {
                overrides.get(fact).unwrap_or(default).clone()
            }
            DistributionPolicy::ConstantMap(f) => compatible_assign(f, fact),
        }
    }

    pub fn is_constant_map(&self) -> bool {
        matches!(self, DistributionPolicy::ConstantMap(_))
    }

    /// Checks that the policy's explicit node sets lie in the network.
    pub fn validate(&self, graph: &NetworkGraph) -> Result<(), NetError> {
        let check = |what: &str, set: &NodeSet| -> Result<(), NetError> {
            if set.is_empty() {
                return Err(NetError::EmptyAssignment(what.to_string()));
            }
            match set.iter().find(|n| !graph.contains(**n)) {
                Some(&node) => Err(NetError::NodeOutsideNetwork {
                    fact: what.to_string(),
                    node,
                }),
                None => Ok(()),
            }
        };
        match self {
            DistributionPolicy::SingleNode(n) => check("*", &NodeSet::from([*n])),
            DistributionPolicy::Hash { nodes } => {
                if *nodes == 0 || *nodes as usize > graph.size() {
                    Err(NetError::NodeOutsideNetwork {
                        fact: "*".into(),
                        node: NodeId(nodes.saturating_sub(1)),
                    })
                } else {
                    Ok(())
                }
            }
            DistributionPolicy::Explicit { default, overrides } => {
                check("*", default)?;
                overrides
                    .iter()
                    .try_for_each(|(f, s)| check(&f.to_string(), s))
            }
            DistributionPolicy::ConstantMap(f) => {
                check("*", &f.default)?;
                check("nullary", &NodeSet::from([f.nullary_home]))?;
                f.map.iter().try_for_each(|(c, s)| check(c.as_str(), s))
            }
        }
    }
}

fn compatible_assign(f: &ConstantAssignment, fact: &Fact) -> NodeSet {
    if fact.is_nullary() {
        return NodeSet::from([f.nullary_home]);
    }
    fact.constants()
        .flat_map(|c| f.nodes_of(c).iter().copied())
        .collect()
}

/// The N2-compatible policy `P(R(c1..cn)) = F(c1) ∪ ... ∪ F(cn)`; nullary
/// facts go to `nullary_home`.
pub fn compatible_policy(f: ConstantAssignment) -> DistributionPolicy {
    DistributionPolicy::ConstantMap(f)
}

/// Places each fact on every node of its assigned set. Every node of the
/// graph gets an entry, possibly empty.
pub fn distribute(
    inst: &Instance,
    policy: &DistributionPolicy,
    graph: &NetworkGraph,
) -> Result<BTreeMap<NodeId, Instance>, NetError> {
    let mut out: BTreeMap<NodeId, Instance> = graph.nodes().map(|n| (n, Instance::new())).collect();
    for fact in inst {
        let nodes = policy.assign(fact);
        if nodes.is_empty() {
            return Err(NetError::EmptyAssignment(fact.to_string()));
        }
        for n in nodes {
            out.get_mut(&n)
                .ok_or_else(|| NetError::NodeOutsideNetwork {
                    fact: fact.to_string(),
                    node: n,
                })?
                .insert(fact.clone());
        }
    }
    Ok(out)
}

/// "Is `asker` ∈ P(f)?", answerable only when every constant of `f` is
/// known to the asker.
pub fn oracle_query(
    policy: &DistributionPolicy,
    asker: NodeId,
    fact: &Fact,
    known: &BTreeSet<Constant>,
) -> Result<bool, NetError> {
    if let Some(missing) = fact.constants().find(|c| !known.contains(*c)) {
        return Err(NetError::Unconstructible {
            asker,
            fact: fact.to_string(),
            missing: missing.clone(),
        });
    }
    Ok(policy.assign(fact).contains(&asker))
}

/// A node's handle on the policy oracle; answers self-membership only.
#[derive(Clone, Debug)]
pub struct PolicyOracle {
    policy: Arc<DistributionPolicy>,
    node: NodeId,
}

impl PolicyOracle {
    pub fn new(policy: Arc<DistributionPolicy>, node: NodeId) -> Self {
        PolicyOracle { policy, node }
    }

    pub fn is_mine(&self, fact: &Fact, known: &BTreeSet<Constant>) -> Result<bool, NetError> {
        oracle_query(&self.policy, self.node, fact, known)
    }
}

/// Every ground atom on `n0` except `f`, which goes to `n1` only.
pub fn isolation_policy(f: &Fact, n0: NodeId, n1: NodeId) -> Result<DistributionPolicy, NetError> {
    if n0 == n1 {
        return Err(NetError::SameNode);
    }
    Ok(DistributionPolicy::Explicit {
        default: NodeSet::from([n0]),
        overrides: BTreeMap::from([(f.clone(), NodeSet::from([n1]))]),
    })
}

/// `F` mapping `adom(I)` to `n0` and the constants of `f` to `n1`, so that
/// the compatible policy puts `I` wholly on `n0` and `f` wholly on `n1`.
pub fn isolation_assignment(
    inst: &Instance,
    f: &Fact,
    n0: NodeId,
    n1: NodeId,
) -> Result<ConstantAssignment, NetError> {
    if n0 == n1 {
        return Err(NetError::SameNode);
    }
    if f.is_nullary() {
        return Err(NetError::NullaryFact(f.to_string()));
    }
    let base = adom(inst);
    if let Some(shared) = f.constants().find(|c| base.contains(*c)) {
        return Err(NetError::SharedConstant {
            fact: f.to_string(),
            shared: shared.clone(),
        });
    }
    let mut map: BTreeMap<Constant, NodeSet> =
        base.into_iter().map(|c| (c, NodeSet::from([n0]))).collect();
    for c in f.constants() {
        map.insert(c.clone(), NodeSet::from([n1]));
    }
    Ok(ConstantAssignment {
        map,
        default: NodeSet::from([n0]),
        nullary_home: n0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    N0,
    N1,
    N2,
    N3,
}

impl ModelTag {
    /// The all-on-one-node policy in this model's policy family.
    pub fn single_node_policy(self, node: NodeId) -> DistributionPolicy {
        match self {
            ModelTag::N2 => DistributionPolicy::ConstantMap(ConstantAssignment::all_on(node)),
            _ => DistributionPolicy::SingleNode(node),
        }
    }

    pub fn admits(self, policy: &DistributionPolicy) -> bool {
        self != ModelTag::N2 || policy.is_constant_map()
    }

    pub fn grants_global_adom(self) -> bool {
        self == ModelTag::N3
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ModelTag {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N0" | "n0" => Ok(ModelTag::N0),
            "N1" | "n1" => Ok(ModelTag::N1),
            "N2" | "n2" => Ok(ModelTag::N2),
            "N3" | "n3" => Ok(ModelTag::N3),
            other => Err(NetError::UnknownModel(other.to_string())),
        }
    }
}

/// Serialized policy fragment of a scenario file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    SingleNode {
        #[serde(default)]
        node: u32,
    },
    Hash,
    Explicit {
        default: Vec<u32>,
        #[serde(default)]
        overrides: Vec<OverrideSpec>,
    },
    ConstantMap {
        #[serde(rename = "F", default)]
        f: BTreeMap<String, Vec<u32>>,
        default: Vec<u32>,
        #[serde(default)]
        nullary_home: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideSpec {
    pub fact: String,
    pub nodes: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicySpecError {
    #[error("bad fact in policy override: {0}")]
    Fact(#[from] crate::relcore::FactParseError),
    #[error(transparent)]
    Net(#[from] NetError),
}

fn node_set(ids: &[u32]) -> NodeSet {
    ids.iter().copied().map(NodeId).collect()
}

impl PolicySpec {
    pub fn build(&self, graph: &NetworkGraph) -> Result<DistributionPolicy, PolicySpecError> {
        let policy = match self {
            PolicySpec::SingleNode { node } => DistributionPolicy::SingleNode(NodeId(*node)),
            PolicySpec::Hash => DistributionPolicy::Hash {
                nodes: graph.size() as u32,
            },
            PolicySpec::Explicit { default, overrides } => DistributionPolicy::Explicit {
                default: node_set(default),
                overrides: overrides
                    .iter()
                    .map(|o| Ok((o.fact.parse::<Fact>()?, node_set(&o.nodes))))
                    .collect::<Result<_, PolicySpecError>>()?,
            },
            PolicySpec::ConstantMap {
                f,
                default,
                nullary_home,
            } => DistributionPolicy::ConstantMap(ConstantAssignment {
                map: f
                    .iter()
                    .map(|(c, ns)| (Constant::new(c), node_set(ns)))
                    .collect(),
                default: node_set(default),
                nullary_home: NodeId(*nullary_home),
            }),
        };
        policy.validate(graph)?;
        Ok(policy)
    }
}
