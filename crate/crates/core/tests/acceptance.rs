//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see details.

use std::time::Instant;

use minimax_mdp::ext::Fin;
use minimax_mdp::mdp::{check_feasible, oracle_feasible};
use minimax_mdp::multiphase::changing::example_two_phase;
use minimax_mdp::oracle::{
    changing_cost_case, changing_cost_check, greedy_audit, minimax_game, monotone_case, multiphase_case, pwl_case,
    random_mdp, rmowp_case, rrawp_case, run_seeds, scale_linear_case, Failure, Sampler, DEFAULT_NODE_CAP,
};
use minimax_mdp::rmowp::{
    adversary_search, cr_star, example_three_day, three_day_switching_policy, Metric, SequenceFamily,
};
use minimax_mdp::rrawp::{example_unit_boxes, leontief_cr_star};
use minimax_mdp::scalar::{q, qi};

/// Criteria expected to fail; each has a recorded counterexample.
const KNOWN_FAILING: &[u32] = &[10];

struct Outcome {
    pass: bool,
    summary: String,
    failures: Vec<Failure>,
}

fn from_failures(cases: u64, failures: Vec<Failure>) -> Outcome {
    let bad: std::collections::BTreeSet<u64> = failures.iter().map(|f| f.seed).collect();
    Outcome { pass: failures.is_empty(), summary: format!("{}/{cases} cases clean", cases - bad.len() as u64), failures }
}

fn criterion_1() -> Outcome {
    let r = run_seeds("feasibility", 1000, |seed| {
        let mdp = random_mdp(&Sampler::new(seed));
        let fast = check_feasible(&mdp).is_feasible();
        let (slow, _) = oracle_feasible(&mdp);
        if fast == slow {
            Vec::new()
        } else {
            vec![Failure {
                seed,
                check: "verdict".into(),
                detail: format!("checker {fast}, oracle {slow}"),
                instance: serde_json::to_value(mdp.to_json()).unwrap(),
            }]
        }
    });
    let feasible = (0..1000).filter(|&s| check_feasible(&random_mdp(&Sampler::new(s))).is_feasible()).count();
    let mut out = from_failures(r.cases, r.failures);
    out.summary = format!("{}; {feasible} feasible, {} infeasible", out.summary, 1000 - feasible);
    out
}

fn criterion_2() -> Outcome {
    let mut audited = 0u64;
    let mut failures = Vec::new();
    for seed in 0..1000 {
        let mdp = random_mdp(&Sampler::new(seed));
        if !oracle_feasible(&mdp).0 {
            continue;
        }
        audited += 1;
        let detail = match greedy_audit(&mdp, DEFAULT_NODE_CAP) {
            Ok(None) => continue,
            Ok(Some(p)) => p,
            Err(e) => e.to_string(),
        };
        failures.push(Failure {
            seed,
            check: "greedy".into(),
            detail,
            instance: serde_json::to_value(mdp.to_json()).unwrap(),
        });
    }
    from_failures(audited, failures)
}

fn criterion_3() -> Outcome {
    let r = run_seeds("rmowp", 200, |s| rmowp_case(s, DEFAULT_NODE_CAP));
    from_failures(r.cases, r.failures)
}

fn criterion_4() -> Outcome {
    let three_day = example_three_day();
    let mut notes = Vec::new();
    let mut pass = true;
    match adversary_search(&three_day, &three_day_switching_policy(), &qi(1), Metric::Cr, SequenceFamily::SingleSwitching, DEFAULT_NODE_CAP) {
        Ok(r) => {
            let vals: Vec<_> = r.per_sequence.iter().map(|s| s.value.clone()).collect();
            let want = vec![Fin(q(2, 3)), Fin(q(7, 10)), Fin(q(7, 10)), Fin(q(7, 10))];
            pass &= r.value == Fin(q(2, 3)) && vals == want;
            notes.push(format!("switching family worst {}", r.value));
        }
        Err(e) => {
            pass = false;
            notes.push(e.to_string());
        }
    }
    let star = cr_star(&three_day);
    let game = minimax_game(&three_day, &q(1, 2), Metric::Cr, DEFAULT_NODE_CAP);
    match (&star, &game) {
        (Ok(s), Ok(Fin(g))) => {
            // the grid game restricts both players; one grid step of slack
            pass &= *s == q(1, 2) && (g - s) <= q(1, 4) && (s - g) <= q(1, 4);
            notes.push(format!("unrestricted optimum {s}, grid game {g}"));
        }
        _ => {
            pass = false;
            notes.push(format!("{star:?} / {game:?}"));
        }
    }
    Outcome { pass, summary: notes.join("; "), failures: Vec::new() }
}

fn criterion_5() -> Outcome {
    let r = run_seeds("scale-linear", 50, |s| scale_linear_case(s, 100));
    from_failures(r.cases, r.failures)
}

fn criterion_6() -> Outcome {
    let r = run_seeds("rrawp", 50, rrawp_case);
    let mut out = from_failures(r.cases, r.failures);
    let unit = leontief_cr_star(&example_unit_boxes(qi(2)));
    out.pass &= unit == Ok(q(3, 4));
    out.summary = format!("{}; unit boxes give {unit:?}", out.summary);
    out
}

fn criterion_7() -> Outcome {
    let r = run_seeds("pwl", 100, |s| pwl_case(s, 500));
    from_failures(r.cases, r.failures)
}

fn criterion_8() -> Outcome {
    let r = run_seeds("multiphase", 100, multiphase_case);
    from_failures(r.cases, r.failures)
}

fn criterion_9() -> Outcome {
    let mut failures = changing_cost_check(u64::MAX, &example_two_phase());
    failures.extend(run_seeds("changing", 20, changing_cost_case).failures);
    from_failures(21, failures)
}

fn criterion_10() -> Outcome {
    let r = run_seeds("monotone", 500, |s| monotone_case(s, DEFAULT_NODE_CAP));
    let mut by_check = std::collections::BTreeMap::new();
    for f in &r.failures {
        *by_check.entry(f.check.clone()).or_insert(0u32) += 1;
    }
    let mut out = from_failures(r.cases, r.failures);
    out.summary = format!("{}; violations by check {by_check:?}", out.summary);
    out
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (1, "feasibility checker matches the interval oracle", criterion_1),
        (2, "greedy policy is safe on every path", criterion_2),
        (3, "ordering closed forms match the reduction", criterion_3),
        (4, "three-day switching example", criterion_4),
        (5, "scale-linear closed forms", criterion_5),
        (6, "Leontief closed form", criterion_6),
        (7, "range-max decomposition", criterion_7),
        (8, "phase reduction", criterion_8),
        (9, "changing costs and PTAS", criterion_9),
        (10, "monotonicity battery", criterion_10),
    ];
    let mut unexpected = Vec::new();
    for (n, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} {n:>2} {name}: {} [{:.1?}]", o.summary, t.elapsed());
        for f in o.failures.iter().take(3) {
            println!("       seed {} {}: {}", f.seed, f.check, f.detail);
            println!("       instance {}", f.instance);
        }
        if !o.pass && !KNOWN_FAILING.contains(&n) {
            unexpected.push(n);
        }
        if o.pass && KNOWN_FAILING.contains(&n) {
            println!("       expected a failure here; the known-failure list is stale");
            unexpected.push(n);
        }
    }
    if !KNOWN_FAILING.is_empty() {
        println!("known failures: {KNOWN_FAILING:?} (more supply can lower the optimal ratio)");
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected results for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
