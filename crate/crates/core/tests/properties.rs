use std::collections::BTreeSet;

use proptest::prelude::*;

use coordfree::datalog::{
    builtin, eval, eval_via_complement, eval_with, parse_program, winmove, EvalStrategy,
};
use coordfree::netmodel::{
    compatible_policy, distribute, ConstantAssignment, DistributionPolicy, NetworkGraph, NodeId,
};
use coordfree::simulator::{run, RunConfig};
use coordfree::transducer::{make_t_adom, make_t_mono, make_t_repl};
use coordfree::{adom, eval_query, Constant, Fact, Instance};

const NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];

fn binary(rel: &'static str, max: usize) -> impl Strategy<Value = Instance> {
    prop::collection::vec((0..NAMES.len(), 0..NAMES.len()), 0..=max).prop_map(move |pairs| {
        pairs
            .into_iter()
            .map(|(x, y)| Fact::make(rel, &[NAMES[x], NAMES[y]]))
            .collect()
    })
}

fn edges(max: usize) -> impl Strategy<Value = Instance> {
    binary("e", max)
}

fn with_flags(max: usize) -> impl Strategy<Value = Instance> {
    (
        edges(max),
        prop::collection::vec(0..NAMES.len(), 0..3),
        any::<bool>(),
    )
        .prop_map(|(mut i, flags, off)| {
            for x in flags {
                i.insert(Fact::make("flag", &[NAMES[x]]));
            }
            if off {
                i.insert(Fact::make("off", &[]));
            }
            i
        })
}

fn rename(i: &Instance, suffix: &str) -> Instance {
    i.iter()
        .map(|f| {
            Fact::new(
                f.relation(),
                f.args()
                    .iter()
                    .map(|c| Constant::new(format!("{}{suffix}", c.as_str())))
                    .collect(),
            )
        })
        .collect()
}

const CORPUS: [&str; 4] = [
    include_str!("../corpus/tc.dl"),
    include_str!("../corpus/remark33.dl"),
    include_str!("../corpus/semipositive/unflagged_reach.dl"),
    include_str!("../corpus/semipositive/sources.dl"),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn naive_and_semi_naive_agree(i in with_flags(7)) {
        for text in CORPUS {
            let p = parse_program(text).unwrap();
            let i = i.restrict_to(p.edb());
            prop_assert_eq!(
                eval_with(&p, &i, EvalStrategy::Naive).unwrap(),
                eval_with(&p, &i, EvalStrategy::SemiNaive).unwrap()
            );
        }
    }

    #[test]
    fn complement_route_matches_on_larger_instances(i in with_flags(8)) {
        for text in [
            include_str!("../corpus/semipositive/unflagged_reach.dl"),
            include_str!("../corpus/semipositive/gate.dl"),
            include_str!("../corpus/semipositive/open_triangle.dl"),
        ] {
            let p = parse_program(text).unwrap();
            let i = i.restrict_to(p.edb());
            prop_assert_eq!(eval(&p, &i).unwrap(), eval_via_complement(&p, &i).unwrap());
        }
    }

    #[test]
    fn positive_programs_are_monotone(i in edges(6), j in edges(3)) {
        let q = builtin("tc").unwrap();
        let small = eval_query(&q, &i).unwrap();
        let large = eval_query(&q, &i.union(&j)).unwrap();
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn winmove_splits_over_disjoint_domains(i in binary("move", 6), j in binary("move", 6)) {
        let j = rename(&j, "x");
        prop_assert!(adom(&i).is_disjoint(&adom(&j)));
        prop_assert_eq!(winmove(&i.union(&j)), winmove(&i).union(&winmove(&j)));
    }

    #[test]
    fn winmove_ignores_facts_with_new_constants_only(i in binary("move", 6), j in binary("move", 4)) {
        // weak-adom-monotone: adding a disjoint component never retracts a win
        let j = rename(&j, "y");
        prop_assert!(winmove(&i).is_subset(&winmove(&i.union(&j))));
    }

    #[test]
    fn instance_text_roundtrip(i in with_flags(8)) {
        prop_assert_eq!(Instance::parse(&i.to_text()).unwrap(), i);
    }

    #[test]
    fn distribution_covers_input(i in edges(8), nodes in 1u32..5) {
        let g = NetworkGraph::complete(nodes).unwrap();
        for policy in [
            DistributionPolicy::Hash { nodes },
            DistributionPolicy::SingleNode(NodeId(nodes - 1)),
        ] {
            let shares = distribute(&i, &policy, &g).unwrap();
            let union: Instance = shares.values().flat_map(|s| s.iter().cloned()).collect();
            prop_assert_eq!(union, i.clone());
        }
    }

    #[test]
    fn compatible_policy_places_facts_on_owners(i in edges(8), seed in 0usize..100) {
        let nodes: Vec<NodeId> = (0..3).map(NodeId).collect();
        let map = adom(&i)
            .into_iter()
            .enumerate()
            .map(|(k, c)| (c, BTreeSet::from([nodes[(k + seed) % 3]])))
            .collect();
        let f = ConstantAssignment { map, ..ConstantAssignment::all_on(nodes[0]) };
        let shares = distribute(&i, &compatible_policy(f.clone()), &NetworkGraph::line(3).unwrap()).unwrap();
        for fact in &i {
            for c in fact.constants() {
                for n in f.nodes_of(c) {
                    prop_assert!(shares[n].contains(fact));
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mono_runs_are_confluent_and_correct(i in edges(6), seed in any::<u64>(), nodes in 1u32..4) {
        let q = builtin("tc").unwrap();
        let p = make_t_mono(q.clone());
        let g = NetworkGraph::star(nodes).unwrap();
        let r = run(&p, &g, &i, &DistributionPolicy::Hash { nodes }, &RunConfig::default().with_seed(seed)).unwrap();
        prop_assert!(r.converged);
        prop_assert_eq!(r.output, eval_query(&q, &i).unwrap());
    }

    #[test]
    fn adom_protocol_is_sound_under_replicated_explicit_policies(
        i in edges(6),
        placement in prop::collection::vec(1u8..8, 25),
        seed in any::<u64>(),
    ) {
        // each fact over a..e lands on a random non-empty subset of 3 nodes
        let mut overrides = std::collections::BTreeMap::new();
        let mut k = 0;
        for x in NAMES {
            for y in NAMES {
                let bits = placement[k % placement.len()];
                k += 1;
                let set: BTreeSet<NodeId> = (0..3).filter(|b| bits & (1 << b) != 0).map(NodeId).collect();
                overrides.insert(Fact::make("e", &[x, y]), set);
            }
        }
        let policy = DistributionPolicy::Explicit { default: BTreeSet::from([NodeId(0)]), overrides };
        let q = builtin("asym").unwrap();
        let p = make_t_adom(q.clone());
        let r = run(&p, &NetworkGraph::line(3).unwrap(), &i, &policy, &RunConfig::default().with_seed(seed)).unwrap();
        let expected = eval_query(&q, &i).unwrap();
        prop_assert!(r.converged);
        // every prefix of the trace stays inside the final answer
        let mut seen = Instance::new();
        for e in &r.trace {
            seen.extend(e.emitted.iter().cloned());
            prop_assert!(seen.is_subset(&expected));
        }
        prop_assert_eq!(r.output, expected);
    }

    #[test]
    fn repl_protocol_under_random_constant_maps(
        i in binary("move", 6),
        owners in prop::collection::vec(1u8..8, 5),
        seed in any::<u64>(),
    ) {
        let map = NAMES
            .iter()
            .zip(&owners)
            .map(|(c, bits)| {
                let set: BTreeSet<NodeId> = (0..3).filter(|b| bits & (1 << b) != 0).map(NodeId).collect();
                (Constant::new(c), set)
            })
            .collect();
        let f = ConstantAssignment { map, ..ConstantAssignment::all_on(NodeId(2)) };
        let q = builtin("winmove").unwrap();
        let p = make_t_repl(q.clone());
        let r = run(&p, &NetworkGraph::complete(3).unwrap(), &i, &compatible_policy(f), &RunConfig::default().with_seed(seed)).unwrap();
        prop_assert!(r.converged);
        prop_assert_eq!(r.output, eval_query(&q, &i).unwrap());
    }
}
