use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use minimax_mdp::error::Error;
use minimax_mdp::io::{read_json, write_atomic};
use minimax_mdp::mdp::{
    check_feasible, for_each_path, greedy_policy, simulate, FiniteMinimaxMdp, GreedyPolicy, GreedyPolicyJson,
    MdpJson, Verdict,
};
use minimax_mdp::multiphase::changing::{ptas_solve, solve_changing_cost_cr, ChangingCostJson};
use minimax_mdp::multiphase::{check_feasible_multiphase, MultiPhaseJson};
use minimax_mdp::oracle::{cross_check, node_cap_from_env, Suite};
use minimax_mdp::rmowp::{
    build_reduction_mdp, cr_policy, cr_star_detail, regret_policy, regret_star_detail, scale_linear_cr_star,
    RmowpInstance, RmowpJson, Threshold,
};
use minimax_mdp::rrawp::{check_cr_feasible, grid_cr_star, leontief_cr_star, RrawpJson, Utility};
use minimax_mdp::scalar::{parse_q, q, to_decimal, Q};

#[derive(Parser)]
#[command(name = "minimax-mdp", version, about = "Feasibility and robust policies for minimax-MDPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output format for results on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide feasibility of a finite minimax-MDP.
    Feasible(InstanceArg),
    /// Export the greedy policy of a feasible minimax-MDP.
    Policy {
        #[command(flatten)]
        inst: InstanceArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll a policy file along one path, or along every path.
    Simulate {
        #[command(flatten)]
        inst: InstanceArg,
        #[arg(long)]
        policy: PathBuf,
        /// Comma-separated state ids, one per time.
        #[arg(long)]
        path: Option<String>,
    },
    /// Multi-period ordering with prediction intervals.
    Rmowp {
        #[arg(value_enum)]
        metric: RmowpMetric,
        #[command(flatten)]
        inst: InstanceArg,
        #[arg(long)]
        policy_out: Option<PathBuf>,
        /// Re-check the optimum through the finite reduction.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value = "1/4")]
        grid: String,
    },
    /// Two-sector resource allocation.
    Rrawp {
        #[arg(value_enum)]
        what: RrawpCmd,
        #[command(flatten)]
        inst: InstanceArg,
        /// Decide a single ratio instead of optimizing.
        #[arg(long, conflicts_with = "optimal")]
        phi: Option<String>,
        #[arg(long)]
        optimal: bool,
        /// θ-grid step; non-Leontief utilities always use it.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value = "1/1048576")]
        tol: String,
    },
    /// Multi-phase instances.
    Multiphase {
        #[command(subcommand)]
        what: MultiCmd,
    },
    /// Randomized cross-checks against brute-force oracles.
    Oracle {
        #[command(subcommand)]
        what: OracleCmd,
    },
    /// Sweep one component of an ordering instance and tabulate the optimum.
    Sensitivity {
        #[command(flatten)]
        inst: InstanceArg,
        #[arg(long, value_enum)]
        metric: SweepMetric,
        #[arg(long, value_enum)]
        field: SweepField,
        /// 1-based day.
        #[arg(long)]
        day: usize,
        /// Comma-separated rationals; may be empty.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArg {
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RmowpMetric {
    Regret,
    Cr,
    ScaleCr,
}

#[derive(Clone, Copy, ValueEnum)]
enum RrawpCmd {
    Cr,
}

#[derive(Subcommand)]
enum MultiCmd {
    /// Optimal competitive ratio under changing costs.
    Cr {
        #[command(flatten)]
        inst: InstanceArg,
        #[arg(long, default_value = "1/1048576")]
        tol: String,
    },
    /// Approximation by cost rounding.
    Ptas {
        #[command(flatten)]
        inst: InstanceArg,
        #[arg(long, default_value = "1/10")]
        eps: String,
    },
    /// Feasibility of a finite multi-phase instance by phase reduction.
    Check(InstanceArg),
}

#[derive(Subcommand)]
enum OracleCmd {
    Run {
        /// `all` or a comma-separated list of suites.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Node cap for exhaustive searches.
        #[arg(long, env = "MINIMAX_MDP_NODE_CAP")]
        node_cap: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMetric {
    Regret,
    Cr,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepField {
    Delta,
    V,
}

/// Successful run; `false` means a mathematically infeasible verdict.
type Outcome = anyhow::Result<bool>;

fn rational(s: &str, what: &str) -> anyhow::Result<Q> {
    parse_q(s).with_context(|| format!("bad {what} {s:?}"))
}

fn positive(s: &str, what: &str) -> anyhow::Result<Q> {
    let x = rational(s, what)?;
    if x <= Q::from_integer(0.into()) {
        bail!("{what} must be positive, got {s}");
    }
    Ok(x)
}

fn qv(x: &Q) -> Value {
    json!({ "exact": x.to_string(), "decimal": to_decimal(x, 12) })
}

fn emit(format: Format, v: &Value) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(v).expect("serializable")),
        Format::Csv => {
            println!("key,value");
            if let Value::Object(m) = v {
                for (k, x) in m {
                    let cell = match x {
                        Value::Object(o) if o.contains_key("exact") => o["exact"].as_str().unwrap_or("").to_string(),
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    println!("{k},\"{}\"", cell.replace('"', "\"\""));
                }
            }
        }
    }
}

fn load_mdp(path: &Path) -> anyhow::Result<FiniteMinimaxMdp<Q>> {
    let j: MdpJson = read_json(path)?;
    Ok(FiniteMinimaxMdp::from_json(&j)?)
}

fn load_rmowp(path: &Path) -> anyhow::Result<RmowpJson> {
    Ok(read_json(path)?)
}

fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Feasible => json!({ "verdict": "feasible" }),
        Verdict::Infeasible { alpha, state_id, .. } => {
            json!({ "verdict": "infeasible", "alpha": alpha, "state": state_id })
        }
    }
}

fn feasible(format: Format, inst: &Path) -> Outcome {
    let mdp = load_mdp(inst)?;
    let v = check_feasible(&mdp);
    emit(format, &verdict_json(&v));
    Ok(v.is_feasible())
}

fn policy(format: Format, inst: &Path, out: &Path) -> Outcome {
    let mdp = load_mdp(inst)?;
    let v = check_feasible(&mdp);
    if !v.is_feasible() {
        emit(format, &verdict_json(&v));
        return Ok(false);
    }
    let pol = greedy_policy(&mdp)?;
    write_atomic(out, &serde_json::to_string_pretty(&pol.to_json(&mdp))?)?;
    emit(format, &json!({ "verdict": "feasible", "policy": out.display().to_string() }));
    Ok(true)
}

fn simulate_cmd(format: Format, inst: &Path, policy: &Path, path: Option<&str>) -> Outcome {
    let mdp = load_mdp(inst)?;
    let pj: GreedyPolicyJson = read_json(policy)?;
    let pol = GreedyPolicy::from_json(&pj, &mdp)?;
    let mut paths = Vec::new();
    match path {
        Some(p) => {
            let ids: Vec<&str> = p.split(',').map(str::trim).collect();
            if ids.len() != mdp.horizon() {
                bail!("path needs {} state ids, got {}", mdp.horizon(), ids.len());
            }
            let idx = ids.iter().enumerate().map(|(k, id)| mdp.state_index(k + 1, id)).collect::<Result<Vec<_>, _>>()?;
            paths.push(idx);
        }
        None => {
            for_each_path(&mdp, node_cap_from_env(), |p| paths.push(p.to_vec()))?;
        }
    }
    let mut runs = Vec::new();
    let mut clean = true;
    for p in &paths {
        let tr = simulate(&mdp, &pol, p)?;
        clean &= tr.is_feasible();
        let states: Vec<String> =
            tr.steps.iter().enumerate().map(|(k, (s, _))| mdp.states(k + 1)[*s].clone()).collect();
        runs.push(json!({
            "path": states,
            "inventory": tr.steps.iter().map(|(_, x)| x.to_string()).collect::<Vec<_>>(),
            "actions": tr.actions.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "violations": tr.violations.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>(),
        }));
    }
    match format {
        Format::Json => emit(format, &json!({ "feasible": clean, "trajectories": runs })),
        Format::Csv => {
            println!("path,inventory,actions,violations");
            for r in &runs {
                let join = |k: &str| {
                    r[k].as_array().map(|a| a.iter().filter_map(Value::as_str).collect::<Vec<_>>().join(" ")).unwrap_or_default()
                };
                println!("{},{},{},{}", join("path"), join("inventory"), join("actions"), r["violations"].as_array().map_or(0, Vec::len));
            }
        }
    }
    Ok(clean)
}

fn verify_threshold(inst: &RmowpInstance, th: Threshold, grid: &Q) -> anyhow::Result<bool> {
    let mdp = build_reduction_mdp(inst, &th, grid, node_cap_from_env())?;
    Ok(check_feasible(&mdp).is_feasible())
}

fn rmowp(format: Format, metric: RmowpMetric, inst: &Path, policy_out: Option<&Path>, verify: bool, grid: &str) -> Outcome {
    let j = load_rmowp(inst)?;
    let grid = positive(grid, "grid step")?;
    let mut out = serde_json::Map::new();
    match metric {
        RmowpMetric::ScaleCr => {
            let inst = j.scale_linear()?;
            out.insert("phi_star".into(), qv(&scale_linear_cr_star(&inst)?));
            if policy_out.is_some() || verify {
                bail!("--policy-out and --verify apply to regular instances only");
            }
        }
        RmowpMetric::Regret | RmowpMetric::Cr => {
            let inst = j.regular()?;
            let (value, day, pre, pol, th) = if let RmowpMetric::Regret = metric {
                let (g, day, pre) = regret_star_detail(&inst)?;
                (g.clone(), day, pre, regret_policy(&inst)?, Threshold::Regret(g))
            } else {
                let (f, day, pre) = cr_star_detail(&inst)?;
                (f.clone(), day, pre, cr_policy(&inst)?, Threshold::Cr(f))
            };
            let key = if let RmowpMetric::Regret = metric { "gamma_star" } else { "phi_star" };
            out.insert(key.into(), qv(&value));
            out.insert("bottleneck_day".into(), json!(day));
            out.insert("policy_scale".into(), qv(&pol.scale.0));
            out.insert("policy_offset".into(), qv(&pol.offset.0));
            if let Some(ct) = &pre.clamped_to {
                out.insert("clamped_to_supply".into(), qv(ct));
            }
            if pre.delta_changed {
                out.insert("delta_normalized".into(), json!(true));
            }
            if let Some(p) = policy_out {
                write_atomic(p, &serde_json::to_string_pretty(&pol)?)?;
                out.insert("policy".into(), json!(p.display().to_string()));
            }
            if verify {
                out.insert("reduction_feasible_at_optimum".into(), json!(verify_threshold(&inst, th, &grid)?));
            }
        }
    }
    emit(format, &Value::Object(out));
    Ok(true)
}

fn rrawp(format: Format, inst: &Path, phi: Option<&str>, grid: Option<&str>, tol: &str) -> Outcome {
    let j: RrawpJson = read_json(inst)?;
    let inst = j.instance()?;
    let tol = positive(tol, "tolerance")?;
    let grid = grid.map(|g| positive(g, "grid step")).transpose()?;
    if let Some(phi) = phi {
        let phi = rational(phi, "ratio")?;
        let v = check_cr_feasible(&inst, &phi, grid.as_ref())?;
        emit(format, &json!({ "phi": qv(&phi), "feasible": v.is_feasible(), "detail": format!("{v:?}") }));
        return Ok(v.is_feasible());
    }
    let (phi, method) = match (&inst.utility, &grid) {
        (Utility::Leontief, None) => (leontief_cr_star(&inst)?, "closed form"),
        (_, g) => (grid_cr_star(&inst, g.as_ref().unwrap_or(&q(1, 32)), &tol)?, "grid bisection"),
    };
    emit(format, &json!({ "phi_star": qv(&phi), "method": method }));
    Ok(true)
}

fn multiphase(format: Format, what: &MultiCmd) -> Outcome {
    match what {
        MultiCmd::Cr { inst, tol } => {
            let j: ChangingCostJson = read_json(&inst.instance)?;
            let (phi, pol) = solve_changing_cost_cr(&j.instance()?, &positive(tol, "tolerance")?)?;
            emit(format, &json!({ "phi_star": qv(&phi), "policy_phi": qv(&pol.phi) }));
        }
        MultiCmd::Ptas { inst, eps } => {
            let j: ChangingCostJson = read_json(&inst.instance)?;
            let (phi, _) = ptas_solve(&j.instance()?, &positive(eps, "epsilon")?)?;
            emit(format, &json!({ "phi": qv(&phi), "eps": eps }));
        }
        MultiCmd::Check(inst) => {
            let j: MultiPhaseJson = read_json(&inst.instance)?;
            let v = check_feasible_multiphase(&j.instance()?)?;
            emit(format, &verdict_json(&v));
            return Ok(v.is_feasible());
        }
    }
    Ok(true)
}

fn oracle(format: Format, suite: &str, seeds: u64, out: Option<&Path>, cap: Option<u64>) -> Outcome {
    let suites = Suite::parse_list(suite)?;
    let report = cross_check(&suites, seeds, cap.unwrap_or_else(node_cap_from_env));
    if let Some(p) = out {
        write_atomic(p, &serde_json::to_string_pretty(&report)?)?;
    }
    let mut summary = serde_json::Map::new();
    for s in &report.suites {
        summary.insert(s.suite.clone(), json!(format!("{}/{} passed", s.passed, s.cases)));
    }
    emit(format, &Value::Object(summary));
    if !report.ok() {
        bail!("{} suite(s) reported failures", report.suites.iter().filter(|s| !s.ok()).count());
    }
    Ok(true)
}

fn sensitivity(
    inst: &Path,
    metric: SweepMetric,
    field: SweepField,
    day: usize,
    values: &str,
    out: Option<&Path>,
) -> Outcome {
    let base = load_rmowp(inst)?.regular()?;
    if day == 0 || day > base.t {
        bail!("day must lie in 1..={}", base.t);
    }
    let mut csv = String::from("value,optimum,optimum_decimal,bottleneck_day,note\n");
    for raw in values.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let x = rational(raw, "sweep value")?;
        let mut inst = base.clone();
        match field {
            SweepField::Delta => inst.delta[day - 1] = x.clone(),
            SweepField::V => inst.v[day - 1] = x.clone(),
        }
        let res = match metric {
            SweepMetric::Regret => regret_star_detail(&inst),
            SweepMetric::Cr => cr_star_detail(&inst),
        };
        match res {
            Ok((v, d, _)) => {
                csv.push_str(&format!("{x},{v},{},{d},\n", to_decimal(&v, 12)));
            }
            Err(e @ (Error::Invalid(_) | Error::Precondition(_))) => {
                csv.push_str(&format!("{x},,,,\"skipped: {}\"\n", e.to_string().replace('"', "'")));
            }
            Err(e) => return Err(e.into()),
        }
    }
    match out {
        Some(p) => write_atomic(p, &csv)?,
        None => print!("{csv}"),
    }
    Ok(true)
}

fn run(cli: Cli) -> Outcome {
    let f = cli.format;
    match &cli.cmd {
        Cmd::Feasible(i) => feasible(f, &i.instance),
        Cmd::Policy { inst, out } => policy(f, &inst.instance, out),
        Cmd::Simulate { inst, policy, path } => simulate_cmd(f, &inst.instance, policy, path.as_deref()),
        Cmd::Rmowp { metric, inst, policy_out, verify, grid } => {
            rmowp(f, *metric, &inst.instance, policy_out.as_deref(), *verify, grid)
        }
        Cmd::Rrawp { what: RrawpCmd::Cr, inst, phi, optimal: _, grid, tol } => {
            rrawp(f, &inst.instance, phi.as_deref(), grid.as_deref(), tol)
        }
        Cmd::Multiphase { what } => multiphase(f, what),
        Cmd::Oracle { what: OracleCmd::Run { suite, seeds, out, node_cap } } => {
            oracle(f, suite, *seeds, out.as_deref(), *node_cap)
        }
        Cmd::Sensitivity { inst, metric, field, day, values, out } => {
            sensitivity(&inst.instance, *metric, *field, *day, values, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
