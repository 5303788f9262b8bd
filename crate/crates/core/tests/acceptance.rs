//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coordfree::datalog::{
    builtin, classify_program, complement, eval, eval_via_complement, parse_program, positivize,
    ProgramClass,
};
use coordfree::monocheck::{check_adom_monotone, classify_query, Bounds, MonoClass};
use coordfree::netmodel::{
    compatible_policy, ConstantAssignment, DistributionPolicy, ModelTag, NetworkGraph, NodeId,
    NodeSet,
};
use coordfree::relcore::{adom, enumerate_instances};
use coordfree::simulator::{
    check_computes, check_coordination_free, explore_schedules, indistinguishability, run,
    RunConfig, SimError, Verdict,
};
use coordfree::transducer::{make_t_adom, make_t_mono, make_t_repl, Protocol};
use coordfree::{eval_query, Constant, Fact, Instance, Query};

type Outcome = Result<String, String>;

fn inst(s: &str) -> Instance {
    s.parse().expect("test instance")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(started: Instant, limit: Duration) -> Result<(), String> {
    let t = started.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

/// Runs executed by criteria 4 to 7, with any facts emitted outside the
/// oracle result.
#[derive(Default)]
struct Monitor {
    runs: usize,
    unsound: Vec<String>,
}

impl Monitor {
    /// Records constructibility violations; every error fails its criterion.
    fn fail(&mut self, what: &str, e: SimError) -> String {
        if let SimError::Transducer { source, .. } = &e {
            if source.is_constructibility_violation() {
                self.unsound.push(format!("{what}: {e}"));
            }
        }
        format!("{what}: {e}")
    }

    fn absorb(&mut self, what: &str, v: &Verdict) {
        self.runs += v.runs;
        for f in &v.failures {
            let extra = f.observed.difference(&f.expected);
            if !extra.is_empty() {
                self.unsound
                    .push(format!("{what} {}: {}", f.label, extra.to_inline()));
            }
        }
    }
}

// --- criterion 1 --------------------------------------------------------

/// Base `e(x,y)` with `x ≠ y` and addition `e(y,z)` for a new `z`.
fn is_path_extension(base: &Instance, addition: &Instance) -> bool {
    let (Some(b), Some(a)) = (base.iter().next(), addition.iter().next()) else {
        return false;
    };
    let (x, y) = (&b.args()[0], &b.args()[1]);
    base.len() == 1
        && addition.len() == 1
        && b.relation() == "e"
        && a.relation() == "e"
        && x != y
        && &a.args()[0] == y
        && a.args()[1] != *x
        && a.args()[1] != *y
}

fn criterion1() -> Outcome {
    let started = Instant::now();
    let q = builtin("remark33").map_err(|e| e.to_string())?;
    let p = q.program().ok_or("remark33 is not a program")?;
    let one = eval_query(&q, &inst("e(a,b).")).map_err(|e| e.to_string())?;
    ensure(one == inst("answer()."), || {
        format!("Q({{e(a,b)}}) = {}", one.to_inline())
    })?;
    let two = eval_query(&q, &inst("e(a,b). e(b,c).")).map_err(|e| e.to_string())?;
    ensure(two.is_empty(), || {
        format!("Q({{e(a,b),e(b,c)}}) = {}", two.to_inline())
    })?;
    let class = classify_program(p);
    ensure(class == ProgramClass::Stratified, || {
        format!("classified {class}")
    })?;
    let v = check_adom_monotone(&q, Bounds::new(3, 3, 1)).map_err(|e| e.to_string())?;
    let cex = v.counterexample().ok_or("adom-monotonicity not refuted")?;
    ensure(is_path_extension(&cex.base, &cex.addition), || {
        format!(
            "counterexample {} + {} is not a renaming of e(a,b) + e(b,c)",
            cex.base.to_inline(),
            cex.addition.to_inline()
        )
    })?;
    within(started, Duration::from_secs(1))?;
    Ok(format!(
        "counterexample {} + {}",
        cex.base.to_inline(),
        cex.addition.to_inline()
    ))
}

// --- criterion 2 --------------------------------------------------------

const SEMIPOSITIVE: [(&str, &str); 6] = [
    ("asym", include_str!("../corpus/semipositive/asym.dl")),
    ("sources", include_str!("../corpus/semipositive/sources.dl")),
    (
        "only_in_r",
        include_str!("../corpus/semipositive/only_in_r.dl"),
    ),
    (
        "open_triangle",
        include_str!("../corpus/semipositive/open_triangle.dl"),
    ),
    (
        "unflagged_reach",
        include_str!("../corpus/semipositive/unflagged_reach.dl"),
    ),
    ("gate", include_str!("../corpus/semipositive/gate.dl")),
];

fn criterion2() -> Outcome {
    let started = Instant::now();
    let mut checked = 0usize;
    for (name, text) in SEMIPOSITIVE {
        let p = parse_program(text).map_err(|e| format!("{name}: {e}"))?;
        ensure(classify_program(&p) == ProgramClass::SemiPositive, || {
            format!("{name} is not semi-positive")
        })?;
        let pos = positivize(&p).map_err(|e| format!("{name}: {e}"))?;
        for i in enumerate_instances(p.edb(), 3, 4) {
            let direct = eval(&p, &i).map_err(|e| format!("{name}: {e}"))?;
            let full = i.union(&complement(&i, p.edb()));
            let via = eval(&pos, &full)
                .map_err(|e| format!("{name}: {e}"))?
                .restrict_to(&p.output_schema());
            ensure(direct == via, || {
                format!("{name} diverges on {}", i.to_inline())
            })?;
            let lib = eval_via_complement(&p, &i).map_err(|e| format!("{name}: {e}"))?;
            ensure(direct == lib, || format!("{name}: library route diverges"))?;
            checked += 1;
        }
        let q = Query::from_program(name, p);
        let v = check_adom_monotone(&q, Bounds::new(3, 4, 1)).map_err(|e| e.to_string())?;
        ensure(v.holds(), || format!("{name}: {}", v.to_text()))?;
    }
    within(started, Duration::from_secs(60))?;
    Ok(format!(
        "{} programs, {checked} instances",
        SEMIPOSITIVE.len()
    ))
}

// --- criterion 3 --------------------------------------------------------

fn criterion3() -> Outcome {
    let started = Instant::now();
    let b = Bounds::new(3, 3, 2);
    let report = |name: &str| {
        let q = builtin(name).map_err(|e| e.to_string())?;
        let r = classify_query(&q, b).map_err(|e| e.to_string())?;
        ensure(r.inconsistencies.is_empty(), || {
            format!("{name}: {:?}", r.inconsistencies)
        })?;
        Ok::<_, String>(r)
    };
    let expect =
        |name: &str, class: MonoClass, holds: bool, r: &coordfree::monocheck::ClassReport| {
            ensure(r.holds(class) == holds, || {
                format!(
                    "{name}: {class} expected {}",
                    if holds { "holds" } else { "refuted" }
                )
            })
        };
    let tc = report("tc")?;
    for c in MonoClass::ALL {
        expect("tc", c, true, &tc)?;
    }
    let asym = report("asym")?;
    expect("asym", MonoClass::Monotone, false, &asym)?;
    expect("asym", MonoClass::AdomMonotone, true, &asym)?;
    let wm = report("winmove")?;
    expect("winmove", MonoClass::AdomMonotone, false, &wm)?;
    expect("winmove", MonoClass::WeakAdomMonotone, true, &wm)?;
    expect("winmove", MonoClass::WeakAdomInstance, true, &wm)?;
    let cex = wm
        .verdict(MonoClass::AdomMonotone)
        .counterexample()
        .expect("refuted");
    let renamed = cex.base.len() == 1 && cex.addition.len() == 1 && {
        let b = cex.base.iter().next().unwrap();
        let a = cex.addition.iter().next().unwrap();
        b.args()[0] != b.args()[1]
            && a.args()[0] == b.args()[1]
            && !adom(&cex.base).contains(&a.args()[1])
    };
    ensure(renamed, || {
        format!(
            "winmove witness {} + {} is not a renaming of move(a,b) + move(b,c)",
            cex.base.to_inline(),
            cex.addition.to_inline()
        )
    })?;
    let r33 = report("remark33")?;
    expect("remark33", MonoClass::WeakAdomMonotone, false, &r33)?;
    let w = r33
        .verdict(MonoClass::WeakAdomMonotone)
        .counterexample()
        .expect("refuted");
    let f = w.addition.iter().next().expect("one fact");
    ensure(f.args().len() == 2 && f.args()[0] == f.args()[1], || {
        format!("remark33 weak witness {f} is not a self-loop")
    })?;
    within(started, Duration::from_secs(120))?;
    Ok(format!("{:.1}s", started.elapsed().as_secs_f64()))
}

// --- shared setups for 4 to 8 --------------------------------------------

fn networks() -> Vec<NetworkGraph> {
    let mut out = vec![NetworkGraph::single()];
    for n in 2..=4 {
        out.push(NetworkGraph::line(n).unwrap());
        out.push(NetworkGraph::star(n).unwrap());
        out.push(NetworkGraph::complete(n).unwrap());
    }
    out
}

fn nodes(g: &NetworkGraph) -> Vec<NodeId> {
    g.nodes().collect()
}

fn set(ns: impl IntoIterator<Item = NodeId>) -> NodeSet {
    ns.into_iter().collect()
}

fn constant_maps(g: &NetworkGraph, i: &Instance) -> Vec<ConstantAssignment> {
    let ns = nodes(g);
    let k = ns.len();
    let last = ns[k - 1];
    let consts: Vec<Constant> = adom(i).into_iter().collect();
    let by = |f: &dyn Fn(usize) -> NodeSet| -> BTreeMap<Constant, NodeSet> {
        consts
            .iter()
            .enumerate()
            .map(|(j, c)| (c.clone(), f(j)))
            .collect()
    };
    vec![
        ConstantAssignment::all_on(ns[0]),
        ConstantAssignment::all_on(last),
        ConstantAssignment {
            map: by(&|j| set([ns[j % k]])),
            default: set([ns[0]]),
            nullary_home: last,
        },
        ConstantAssignment {
            map: by(&|j| set([ns[j % k], ns[(j + 1) % k]])),
            default: set([last]),
            nullary_home: ns[0],
        },
        ConstantAssignment {
            map: by(&|j| set([ns[(k - 1 + j * 3) % k]])),
            default: set(ns.iter().copied()),
            nullary_home: ns[k / 2],
        },
    ]
}

fn arbitrary_policies(g: &NetworkGraph, i: &Instance) -> Vec<DistributionPolicy> {
    let ns = nodes(g);
    let k = ns.len();
    let spread = i
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mut s = set([ns[j % k]]);
            if j % 3 == 0 {
                s.insert(ns[k - 1]);
            }
            (f.clone(), s)
        })
        .collect();
    vec![
        DistributionPolicy::SingleNode(ns[0]),
        DistributionPolicy::SingleNode(ns[k - 1]),
        DistributionPolicy::Hash { nodes: k as u32 },
        DistributionPolicy::Explicit {
            default: set(ns.iter().copied()),
            overrides: BTreeMap::new(),
        },
        DistributionPolicy::Explicit {
            default: set([ns[0]]),
            overrides: spread,
        },
        compatible_policy(constant_maps(g, i).swap_remove(2)),
    ]
}

fn compatible_policies(g: &NetworkGraph, i: &Instance) -> Vec<DistributionPolicy> {
    constant_maps(g, i)
        .into_iter()
        .map(compatible_policy)
        .collect()
}

struct Pair {
    label: &'static str,
    protocol: Box<dyn Protocol>,
    model: ModelTag,
    inputs: Vec<Instance>,
    compatible_only: bool,
}

fn pairs() -> Vec<Pair> {
    vec![
        Pair {
            label: "t_mono/tc",
            protocol: Box::new(make_t_mono(builtin("tc").unwrap())),
            model: ModelTag::N0,
            inputs: vec![
                inst("e(a,b). e(b,c). e(c,d)."),
                inst("e(a,b). e(b,a). e(c,c). e(d,a)."),
                inst("e(a,b). e(b,c). e(c,a). e(c,d). e(d,e). e(e,f). e(f,d). e(g,a)."),
            ],
            compatible_only: false,
        },
        Pair {
            label: "t_adom/asym",
            protocol: Box::new(make_t_adom(builtin("asym").unwrap())),
            model: ModelTag::N1,
            inputs: vec![
                inst("e(a,b). e(b,c). e(c,b)."),
                inst("e(a,a). e(a,b). e(b,a). e(c,d)."),
                inst("e(a,b). e(b,a). e(b,c). e(c,d). e(d,c). e(d,e). e(e,a). e(f,f)."),
            ],
            compatible_only: false,
        },
        Pair {
            label: "t_repl/winmove",
            protocol: Box::new(make_t_repl(builtin("winmove").unwrap())),
            model: ModelTag::N2,
            inputs: vec![
                inst("move(a,b). move(b,c)."),
                inst("move(a,b). move(b,a). move(b,c)."),
                inst(
                    "move(a,b). move(b,c). move(c,d). move(d,e). move(a,f). \
                     move(f,a). move(e,g). move(g,e).",
                ),
            ],
            compatible_only: true,
        },
    ]
}

const SEEDS: std::ops::Range<u64> = 1..11;

// --- criterion 4 --------------------------------------------------------

fn criterion4(mon: &mut Monitor) -> Outcome {
    let started = Instant::now();
    let seeds: Vec<u64> = SEEDS.collect();
    let graphs = networks();
    let mut summary = Vec::new();
    for pair in pairs() {
        let gen: &dyn Fn(&NetworkGraph, &Instance) -> Vec<DistributionPolicy> =
            if pair.compatible_only {
                &compatible_policies
            } else {
                &arbitrary_policies
            };
        let v = check_computes(
            pair.protocol.as_ref(),
            pair.protocol.query(),
            &pair.inputs,
            &graphs,
            gen,
            &seeds,
            &RunConfig::default(),
        )
        .map_err(|e| mon.fail(pair.label, e))?;
        mon.absorb(pair.label, &v);
        if let Some(f) = v.failures.first() {
            return Err(format!(
                "{}: {} failures, first {}: got {} want {}",
                pair.label,
                v.failures.len(),
                f.label,
                f.observed.to_inline(),
                f.expected.to_inline()
            ));
        }
        summary.push(format!("{} {} runs", pair.label, v.runs));
    }
    within(started, Duration::from_secs(300))?;
    Ok(summary.join(", "))
}

// --- criterion 5 --------------------------------------------------------

fn criterion5(mon: &mut Monitor) -> Outcome {
    let graphs = networks();
    let mut total = 0;
    for pair in pairs() {
        let v = check_coordination_free(
            pair.protocol.as_ref(),
            pair.protocol.query(),
            pair.model,
            &pair.inputs,
            &graphs,
        )
        .map_err(|e| mon.fail(pair.label, e))?;
        mon.absorb(pair.label, &v);
        if let Some(f) = v.failures.first() {
            return Err(format!("{}: {}", pair.label, f.label));
        }
        total += v.runs;
    }
    Ok(format!("{total} heartbeat-only witnesses"))
}

// --- criterion 6 --------------------------------------------------------

fn criterion6(mon: &mut Monitor) -> Outcome {
    let q = builtin("remark33").unwrap();
    let i = inst("e(a,b).");
    let cases: [(Box<dyn Protocol>, &str, ModelTag); 2] = [
        (Box::new(make_t_adom(q.clone())), "e(b,c)", ModelTag::N1),
        (Box::new(make_t_repl(q.clone())), "e(c,c)", ModelTag::N2),
    ];
    for (p, f, model) in cases {
        let f: Fact = f.parse().unwrap();
        let r = indistinguishability(p.as_ref(), &q, &i, &f, model, 8)
            .map_err(|e| mon.fail("run", e))?;
        mon.runs += 2;
        ensure(r.states_equal(), || {
            format!("{model}: states differ {:?}", r.states_equal_per_round)
        })?;
        ensure(r.spurious_output == inst("answer()."), || {
            format!("{model}: spurious {}", r.spurious_output.to_inline())
        })?;
    }
    // control: an adom-monotone query gains nothing spurious
    let asym = builtin("asym").unwrap();
    let r = indistinguishability(
        &make_t_adom(asym.clone()),
        &asym,
        &i,
        &"e(c,d)".parse().unwrap(),
        ModelTag::N1,
        8,
    )
    .map_err(|e| mon.fail("run", e))?;
    ensure(r.states_equal() && r.spurious_output.is_empty(), || {
        "asym control produced spurious output".into()
    })?;
    Ok("N1 and N2 reproduce spurious answer()".into())
}

// --- criterion 7 --------------------------------------------------------

fn criterion7(mon: &mut Monitor) -> Outcome {
    let g = NetworkGraph::line(2).unwrap();
    let setups: Vec<(Box<dyn Protocol>, Instance, DistributionPolicy)> = vec![
        (
            Box::new(make_t_mono(builtin("tc").unwrap())),
            inst("e(a,b). e(b,c). e(c,a)."),
            DistributionPolicy::Hash { nodes: 2 },
        ),
        (
            Box::new(make_t_adom(builtin("asym").unwrap())),
            inst("e(a,b). e(b,a). e(b,c)."),
            DistributionPolicy::Hash { nodes: 2 },
        ),
        (
            Box::new(make_t_repl(builtin("winmove").unwrap())),
            inst("move(a,b). move(b,c). move(c,d)."),
            compatible_policy(ConstantAssignment {
                map: [("a", 0), ("b", 1), ("c", 0), ("d", 1)]
                    .into_iter()
                    .map(|(c, n)| (Constant::new(c), set([NodeId(n)])))
                    .collect(),
                default: set([NodeId(0)]),
                nullary_home: NodeId(0),
            }),
        ),
    ];
    let mut summary = Vec::new();
    for (p, i, policy) in setups {
        let name = p.name().to_string();
        let rep = explore_schedules(p.as_ref(), &g, &i, &policy, 4, 200_000, 100_000)
            .map_err(|e| mon.fail(&name, e))?;
        mon.absorb(&name, &rep.verdict);
        ensure(rep.agree(), || {
            format!(
                "{name}: {} distinct outputs across branches",
                rep.outputs.len()
            )
        })?;
        let mut outputs = Vec::new();
        for seed in SEEDS {
            let cfg = RunConfig::default().with_seed(seed);
            let a = run(p.as_ref(), &g, &i, &policy, &cfg).map_err(|e| mon.fail("run", e))?;
            let b = run(p.as_ref(), &g, &i, &policy, &cfg).map_err(|e| mon.fail("run", e))?;
            mon.runs += 2;
            ensure(a.trace_text() == b.trace_text(), || {
                format!("{name}: seed {seed} trace not replayable")
            })?;
            ensure(a.converged, || {
                format!("{name}: seed {seed} did not converge")
            })?;
            outputs.push(a.output);
        }
        ensure(outputs.windows(2).all(|w| w[0] == w[1]), || {
            format!("{name}: seeds disagree")
        })?;
        summary.push(format!("{name} {} branches", rep.branches));
    }
    Ok(summary.join(", "))
}

fn main() -> ExitCode {
    let names = [
        "one-edge goldens",
        "complement identity over semi-positive corpus",
        "hierarchy strictness witnesses",
        "distributed computation",
        "coordination-freeness witnesses",
        "indistinguishability",
        "nondeterminism robustness",
        "soundness monitors",
    ];
    let (r1, r2, r3, (r4, r5, r6, r7, mon)) = std::thread::scope(|s| {
        let h1 = s.spawn(criterion1);
        let h2 = s.spawn(criterion2);
        let h3 = s.spawn(criterion3);
        let h4 = s.spawn(|| {
            let mut mon = Monitor::default();
            let r4 = criterion4(&mut mon);
            let r5 = criterion5(&mut mon);
            let r6 = criterion6(&mut mon);
            let r7 = criterion7(&mut mon);
            (r4, r5, r6, r7, mon)
        });
        (
            h1.join().unwrap(),
            h2.join().unwrap(),
            h3.join().unwrap(),
            h4.join().unwrap(),
        )
    });
    // constructibility violations surface as errors from the runs above
    let r8 = if mon.unsound.is_empty() {
        Ok(format!("{} runs monitored", mon.runs))
    } else {
        Err(mon.unsound.join("; "))
    };
    let results = [r1, r2, r3, r4, r5, r6, r7, r8];
    let mut failed = 0;
    for (n, (name, r)) in names.iter().zip(&results).enumerate() {
        match r {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({why})", n + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
