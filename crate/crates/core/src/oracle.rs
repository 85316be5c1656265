//! Independent checkers: seeded instance generators, brute-force game
//! oracles and the cross-checking driver behind `oracle run`.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bisect::bisect;
use crate::error::{precondition, Error, Result};
use crate::ext::{Ext, Fin, NegInf, PosInf};
use crate::mdp::{
    check_feasible, check_feasible_fast, for_each_path, greedy_policy, oracle_feasible, simulate, star_bounds,
    FiniteMinimaxMdp, MdpParts,
};
use crate::multiphase::changing::{
    build_changing_cost_glinear, cost_grid, ptas_round_costs, ptas_solve, solve_changing_cost_cr, ChangingCostInstance,
    ChangingCostJson,
};
use crate::multiphase::glinear::reduce_last_phase_glinear;
use crate::multiphase::{check_feasible_multiphase, MultiPhaseInstance, MultiPhaseJson};
use crate::polygon::{Polygon, Point};
use crate::pwl::{range_max_decompose, range_max_oracle, Pwl};
use crate::rmowp::{
    build_reduction_mdp, cr_at, cr_star, grid_points, regret_at, regret_star, Metric, RmowpInstance, RmowpJson,
    Threshold,
};
use crate::rrawp::{grid_cr_star, leontief_cr_star, RrawpInstance, RrawpJson, Utility};
use crate::scalar::{q, qi, Q};

pub const DEFAULT_NODE_CAP: u64 = 10_000_000;

/// `MINIMAX_MDP_NODE_CAP` if set and numeric, else [`DEFAULT_NODE_CAP`].
pub fn node_cap_from_env() -> u64 {
    std::env::var("MINIMAX_MDP_NODE_CAP")
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|x| *x >= 1.0)
        .map_or(DEFAULT_NODE_CAP, |x| x as u64)
}

/// Generator settings; everything drawn from it is a function of `seed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sampler {
    pub seed: u64,
    pub max_t: usize,
    pub max_s: usize,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { seed, max_t: 6, max_s: 5 }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn pick<R: Rng>(rng: &mut R, lo: i64, hi: i64, den: i64) -> Q {
    q(rng.gen_range(lo..=hi), den)
}

// ---------------------------------------------------------------------------
// Finite minimax-MDPs.
// ---------------------------------------------------------------------------

/// Random instance with `2 ≤ T ≤ max_t`, up to `max_s` states per time and
/// half-integer bounds; intermediate bounds are often infinite.
pub fn random_mdp(s: &Sampler) -> FiniteMinimaxMdp<Q> {
    let mut rng = s.rng();
    let n = rng.gen_range(2..=s.max_t.max(2));
    let counts: Vec<usize> =
        (0..n).map(|t| if t == 0 { 1 } else { rng.gen_range(1..=s.max_s.max(1)) }).collect();
    let ids: Vec<Vec<String>> =
        counts.iter().enumerate().map(|(t, &c)| (0..c).map(|i| format!("t{}s{i}", t + 1)).collect()).collect();
    let mut succ = Vec::with_capacity(n - 1);
    let mut u = Vec::with_capacity(n - 1);
    let mut v = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        let next: Vec<usize> = (0..counts[t + 1]).collect();
        let mut out = Vec::with_capacity(counts[t]);
        let mut ut = Vec::with_capacity(counts[t]);
        let mut vt = Vec::with_capacity(counts[t]);
        for _ in 0..counts[t] {
            let k = rng.gen_range(1..=next.len());
            let mut kids: Vec<usize> = next.choose_multiple(&mut rng, k).copied().collect();
            kids.sort_unstable();
            out.push(kids);
            let lo = pick(&mut rng, -1, 1, 2);
            vt.push(&lo + pick(&mut rng, 0, 4, 2));
            ut.push(lo);
        }
        succ.push(out);
        u.push(ut);
        v.push(vt);
    }
    let mut l = vec![vec![Ext::zero()]];
    let mut r = vec![vec![Ext::zero()]];
    for &c in &counts[1..] {
        let mut lt = Vec::with_capacity(c);
        let mut rt = Vec::with_capacity(c);
        for _ in 0..c {
            let roll = rng.gen_range(0..10);
            let lo = pick(&mut rng, -2, 8, 2);
            let hi = &lo + pick(&mut rng, 0, 4, 2);
            let (a, b) = match roll {
                0..=3 => (NegInf, PosInf),
                4 => (NegInf, Fin(hi)),
                5 => (Fin(lo), PosInf),
                _ => (Fin(lo), Fin(hi)),
            };
            lt.push(a);
            rt.push(b);
        }
        l.push(lt);
        r.push(rt);
    }
    FiniteMinimaxMdp::new(MdpParts { ids, initial: 0, succ, u, v, l, r }).expect("generator builds valid instances")
}

/// The future-imposed check with the condition at `α = 1` left out; a
/// deliberately broken variant for exercising the cross-checker.
pub fn verdict_without_first_condition(mdp: &FiniteMinimaxMdp<Q>) -> bool {
    let sb = star_bounds(mdp);
    let reach = mdp.reachable();
    for alpha in 2..=mdp.horizon() {
        for (s, _) in reach[alpha - 2].iter().enumerate().filter(|(_, &on)| on) {
            if sb.r_bracket(alpha - 1, s) < sb.l_bracket(alpha - 1, s) {
                return false;
            }
        }
    }
    true
}

/// Exhaustive replay of the greedy policy over every environment path:
/// `None` when clean, else a description of the first problem.
pub fn greedy_audit(mdp: &FiniteMinimaxMdp<Q>, cap: u64) -> Result<Option<String>> {
    let pol = greedy_policy(mdp)?;
    let sb = star_bounds(mdp);
    let mut problem = None;
    for_each_path(mdp, cap, |path| {
        if problem.is_some() {
            return;
        }
        let tr = match simulate(mdp, &pol, path) {
            Ok(tr) => tr,
            Err(e) => {
                problem = Some(e.to_string());
                return;
            }
        };
        if !tr.is_feasible() {
            problem = Some(format!("path {path:?}: {:?}", tr.violations[0]));
            return;
        }
        for (k, (s, x)) in tr.steps.iter().enumerate() {
            let t = k + 1;
            let xe = Fin(x.clone());
            if &xe < sb.l_star(t, *s) || &xe > sb.r_star(t, *s) {
                problem = Some(format!("path {path:?}: inventory {x} at time {t} leaves the star bounds"));
                return;
            }
        }
    })?;
    Ok(problem)
}

// ---------------------------------------------------------------------------
// Ordering game.
// ---------------------------------------------------------------------------

/// A decision point of the ordering game: the interval revealed before day
/// `day` (as grid indices) and the inventory so far.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameNode {
    pub day: usize,
    pub lo: usize,
    pub hi: usize,
    pub x: Q,
}

/// Value of the ordering game with demands, interval endpoints and orders
/// all on the grid of step `grid`: smallest worst-case regret, or largest
/// worst-case ratio.
pub fn minimax_game(inst: &RmowpInstance, grid: &Q, metric: Metric, cap: u64) -> Result<Ext<Q>> {
    inst.validate()?;
    let pts = grid_points(&inst.d_lo0, &inst.d_hi0, grid)?;
    let actions: Vec<Vec<Q>> = inst.v.iter().map(|v| grid_points(&Q::zero(), v, grid)).collect::<Result<_>>()?;
    let mut game = Game { inst, pts: &pts, actions: &actions, metric, memo: HashMap::new(), cap, nodes: 0 };
    game.adversary(&GameNode { day: 1, lo: 0, hi: pts.len() - 1, x: Q::zero() })
}

struct Game<'a> {
    inst: &'a RmowpInstance,
    pts: &'a [Q],
    actions: &'a [Vec<Q>],
    metric: Metric,
    memo: HashMap<GameNode, Ext<Q>>,
    cap: u64,
    nodes: u64,
}

impl Game<'_> {
    /// `true` when `a` is worse for the decision-maker than `b`.
    fn worse(&self, a: &Ext<Q>, b: &Ext<Q>) -> bool {
        match self.metric {
            Metric::Regret => a > b,
            Metric::Cr => a < b,
        }
    }

    /// Adversary to move: pick the next interval, or the demand after day T.
    fn adversary(&mut self, node: &GameNode) -> Result<Ext<Q>> {
        if let Some(v) = self.memo.get(node) {
            return Ok(v.clone());
        }
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::NodeCap { cap: self.cap });
        }
        let mut worst: Option<Ext<Q>> = None;
        if node.day > self.inst.t {
            for d in &self.pts[node.lo..=node.hi] {
                let v = match self.metric {
                    Metric::Regret => Fin(regret_at(self.inst, &node.x, d)),
                    Metric::Cr => cr_at(self.inst, &node.x, d),
                };
                if worst.as_ref().is_none_or(|w| self.worse(&v, w)) {
                    worst = Some(v);
                }
            }
        } else {
            let bound = &self.inst.delta[node.day - 1];
            for e in node.lo..=node.hi {
                for f in e..=node.hi {
                    if &self.pts[f] - &self.pts[e] > *bound {
                        break;
                    }
                    let v = self.decide(node.day, e, f, &node.x)?;
                    if worst.as_ref().is_none_or(|w| self.worse(&v, w)) {
                        worst = Some(v);
                    }
                }
            }
        }
        let v = worst.ok_or_else(|| precondition("no adversary move on the grid"))?;
        self.memo.insert(node.clone(), v.clone());
        Ok(v)
    }

    fn decide(&mut self, day: usize, lo: usize, hi: usize, x: &Q) -> Result<Ext<Q>> {
        let mut best: Option<Ext<Q>> = None;
        for a in self.actions[day - 1].clone() {
            let v = self.adversary(&GameNode { day: day + 1, lo, hi, x: x + a })?;
            if best.as_ref().is_none_or(|b| self.worse(b, &v)) {
                best = Some(v);
            }
        }
        Ok(best.expect("action grid contains 0"))
    }
}

// ---------------------------------------------------------------------------
// Application generators.
// ---------------------------------------------------------------------------

/// Ordering instance with every number on the 1/4 grid, `T ≤ max_t`.
pub fn random_rmowp<R: Rng>(rng: &mut R, max_t: usize) -> RmowpInstance {
    let t = rng.gen_range(1..=max_t.max(1));
    let lo = pick(rng, 0, 8, 4);
    let width = pick(rng, 0, 12, 4);
    let c = pick(rng, 1, 8, 4);
    let p = &c + pick(rng, 1, 8, 4);
    RmowpInstance {
        t,
        d_hi0: &lo + &width,
        d_lo0: lo,
        delta: (0..t).map(|_| pick(rng, 0, 12, 4)).collect(),
        c,
        p,
        v: (0..t).map(|_| pick(rng, 0, 8, 4)).collect(),
    }
}

/// Leontief instance on the 1/4 grid with one to three periods.
pub fn random_rrawp<R: Rng>(rng: &mut R) -> RrawpInstance {
    let t = rng.gen_range(1..=3);
    let boxes = [0, 1].map(|_| {
        let lo = pick(rng, 2, 8, 4);
        let hi = &lo + pick(rng, 0, 4, 4);
        (lo, hi)
    });
    let mut d = (pick(rng, 0, 4, 4), pick(rng, 0, 4, 4));
    let mut delta = Vec::with_capacity(t);
    for _ in 0..t {
        delta.push(d.clone());
        d = (&d.0 * q(rng.gen_range(0..=4), 4), &d.1 * q(rng.gen_range(0..=4), 4));
    }
    RrawpInstance { t, boxes, delta, v: (0..t).map(|_| pick(rng, 1, 12, 4)).collect(), utility: Utility::Leontief }
}

/// Random scale-linear instance satisfying the validator.
pub fn random_scale_linear<R: Rng>(rng: &mut R) -> crate::rmowp::ScaleLinearInstance {
    loop {
        let t = rng.gen_range(1..=4);
        let lo = pick(rng, 0, 8, 4);
        let hi = &lo + pick(rng, 1, 16, 4);
        let mut a: Vec<Q> = (0..t).map(|_| pick(rng, 0, 4, 8)).collect();
        let mut b: Vec<Q> = (0..t).map(|_| pick(rng, 0, 8, 4)).collect();
        a.sort_by(|x, y| y.cmp(x));
        b.sort_by(|x, y| y.cmp(x));
        let c = pick(rng, 1, 8, 4);
        let inst = crate::rmowp::ScaleLinearInstance {
            t,
            d_lo0: lo,
            d_hi0: hi,
            a,
            b,
            p: &c + pick(rng, 1, 8, 4),
            c,
            v: (0..t).map(|_| pick(rng, 0, 8, 4)).collect(),
        };
        if inst.validate().is_ok() {
            return inst;
        }
    }
}

/// Random continuous piecewise-linear function: finite support `[x0, xn]`
/// or, with `extend`, unbounded.
pub fn random_pwl<R: Rng>(rng: &mut R, nonincreasing: bool, extend: bool) -> Pwl {
    let n = rng.gen_range(2..=5);
    let mut x = pick(rng, -8, 0, 2);
    let mut y = pick(rng, -8, 8, 2);
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        pts.push((x.clone(), y.clone()));
        x += pick(rng, 1, 6, 2);
        y = if nonincreasing { y - pick(rng, 0, 6, 2) } else { y + pick(rng, -6, 6, 2) };
    }
    Pwl::from_points(&pts, extend).expect("increasing abscissae")
}

/// Multi-phase instance at the `T = 4`, two-states-per-time scale: `K = 2`,
/// half-integer data, one to three rows per state at the horizon.
pub fn random_multiphase<R: Rng>(rng: &mut R) -> MultiPhaseInstance {
    let n = rng.gen_range(3..=4);
    let tau1 = rng.gen_range(2..n);
    let counts: Vec<usize> = (0..n).map(|t| if t == 0 { 1 } else { rng.gen_range(1..=2) }).collect();
    let ids = counts.iter().enumerate().map(|(t, &c)| (0..c).map(|i| format!("t{}s{i}", t + 1)).collect()).collect();
    let mut succ = Vec::new();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for t in 0..n - 1 {
        let next: Vec<usize> = (0..counts[t + 1]).collect();
        succ.push(
            (0..counts[t])
                .map(|_| {
                    let k = rng.gen_range(1..=next.len());
                    let mut kids: Vec<usize> = next.choose_multiple(rng, k).copied().collect();
                    kids.sort_unstable();
                    kids
                })
                .collect(),
        );
        let (ut, vt): (Vec<Q>, Vec<Q>) = (0..counts[t])
            .map(|_| {
                let lo = pick(rng, 0, 1, 2);
                let hi = &lo + pick(rng, 0, 4, 2);
                (lo, hi)
            })
            .unzip();
        u.push(ut);
        v.push(vt);
    }
    let nonzero = |rng: &mut R| {
        let w = pick(rng, 1, 2, 1);
        if rng.gen_bool(0.5) {
            w
        } else {
            -w
        }
    };
    let mid_rows = (0..counts[tau1 - 1])
        .map(|_| {
            (0..rng.gen_range(0..=1))
                .map(|_| {
                    let w1 = nonzero(rng);
                    vec![pick(rng, -4, 4, 2), w1, Q::zero()]
                })
                .collect()
        })
        .collect();
    let end_rows = (0..counts[n - 1])
        .map(|_| {
            (0..rng.gen_range(1..=3))
                .map(|_| {
                    let w2 = nonzero(rng);
                    vec![pick(rng, -6, 6, 2), pick(rng, -2, 2, 1), w2]
                })
                .collect()
        })
        .collect();
    MultiPhaseInstance { tau: vec![1, tau1, n], ids, initial: 0, succ, u, v, rows: vec![mid_rows, end_rows] }
}

/// Two-phase changing-cost instance with data on the 1/2 grid.
pub fn random_changing_cost<R: Rng>(rng: &mut R) -> ChangingCostInstance {
    let t = rng.gen_range(2..=3);
    let tau1 = rng.gen_range(2..=t);
    let lo = pick(rng, 0, 4, 2);
    let halves = rng.gen_range(1..=4);
    let width = q(halves, 2);
    let delta = (0..t).map(|_| pick(rng, 0, halves, 2)).collect();
    let g1 = pick(rng, 1, 4, 2);
    let g2 = &g1 + pick(rng, 1, 4, 2);
    let p = &g2 + pick(rng, 1, 4, 2);
    ChangingCostInstance {
        t,
        k: 2,
        tau: vec![1, tau1, t + 1],
        d_hi0: &lo + &width,
        d_lo0: lo,
        delta,
        gamma: vec![g1, g2],
        p,
        v: (0..t).map(|_| pick(rng, 1, 4, 2)).collect(),
    }
}

// ---------------------------------------------------------------------------
// Polygon oracles.
// ---------------------------------------------------------------------------

fn unit(v: usize) -> Point {
    if v == 1 {
        (Q::one(), Q::zero())
    } else {
        (Q::zero(), Q::one())
    }
}

fn clip_rows(mut poly: Polygon, rows: &[Vec<Q>]) -> Polygon {
    for r in rows {
        let b = r.get(2).cloned().unwrap_or_else(Q::zero);
        poly = poly.clip(&r[1], &b, &r[0]);
    }
    poly
}

/// Backward induction over exact feasible inventory polygons, for `K ≤ 2`.
pub fn multiphase_game_oracle(inst: &MultiPhaseInstance) -> Result<bool> {
    inst.validate(false)?;
    if inst.k() > 2 {
        return Err(precondition("the polygon oracle handles at most two phases"));
    }
    let n = inst.horizon();
    let reach: Q = inst
        .u
        .iter()
        .zip(&inst.v)
        .map(|(us, vs)| us.iter().chain(vs).map(|x| x.abs()).max().unwrap_or_else(Q::zero))
        .sum();
    let m = reach + Q::one();
    let rows_at = |t: usize, s: usize| -> &[Vec<Q>] {
        match (1..=inst.k()).find(|&v| inst.tau[v] == t) {
            Some(v) => &inst.rows[v - 1][s],
            None => &[],
        }
    };
    let mut x: Vec<Polygon> =
        (0..inst.ids[n - 1].len()).map(|s| clip_rows(Polygon::square(&-m.clone(), &m), rows_at(n, s))).collect();
    for t in (1..n).rev() {
        let dir = unit(inst.phase_of(t));
        let back = (-dir.0.clone(), -dir.1.clone());
        x = (0..inst.ids[t - 1].len())
            .map(|s| {
                let mut acc = Polygon::square(&-m.clone(), &m);
                for &j in &inst.succ[t - 1][s] {
                    acc = acc.intersect(&x[j]);
                }
                let swept = acc.sweep(&back, &inst.u[t - 1][s], &inst.v[t - 1][s]);
                clip_rows(swept, rows_at(t, s))
            })
            .collect();
    }
    Ok(x[inst.initial].contains(&(Q::zero(), Q::zero())))
}

/// Changing-cost feasibility at `Φ` with interval left endpoints on the grid
/// `s₀ + step·ℤ`; a weaker adversary, so it accepts every `Φ` the exact
/// check accepts. Two phases at most.
pub fn changing_cost_grid_feasible(inst: &ChangingCostInstance, phi: &Q, step: &Q) -> Result<bool> {
    inst.validate()?;
    let inst = inst.merged();
    if inst.k > 2 {
        return Err(precondition("the polygon oracle handles at most two phases"));
    }
    let delta = inst.full_delta();
    let rs = inst.r_sharp()?.scale(phi)?;
    let m = inst.v.iter().sum::<Q>() + Q::one();
    let box_ = Polygon::square(&-m.clone(), &m);
    let gamma = |v: usize| inst.gamma.get(v - 1).cloned().unwrap_or_else(Q::zero);
    let on_grid = |lo: &Q, hi: &Q| -> Vec<Q> {
        let mut out = Vec::new();
        let mut s = lo.clone();
        while s <= *hi {
            out.push(s.clone());
            s += step;
        }
        out
    };
    let a1 = &inst.p - gamma(1);
    let a2 = if inst.k == 2 { &inst.p - gamma(2) } else { Q::zero() };
    // at time T + 1 the state is the demand itself
    let mut layer: BTreeMap<Q, Polygon> = BTreeMap::new();
    let all = on_grid(&inst.d_lo0, &inst.d_hi0);
    for d in &all {
        let target = rs.eval(d).expect_finite("hindsight")?;
        let poly = box_
            .clip(&gamma(1), &gamma(2), &(&target - &inst.p * d))
            .clip(&-a1.clone(), &-a2.clone(), &target);
        layer.insert(d.clone(), poly);
    }
    for day in (1..=inst.t).rev() {
        let dir = unit(inst.phase_of(day));
        let back = (-dir.0.clone(), -dir.1.clone());
        let width = &delta[day] - &delta[day + 1];
        let mut next = BTreeMap::new();
        for s in &all {
            let mut acc = box_.clone();
            for (_, poly) in layer.range(s.clone()..=s + &width) {
                acc = acc.intersect(poly);
            }
            next.insert(s.clone(), acc.sweep(&back, &Q::zero(), &inst.v[day - 1]));
        }
        layer = next;
    }
    let first = &delta[0] - &delta[1];
    let origin = (Q::zero(), Q::zero());
    Ok(layer.range(inst.d_lo0.clone()..=&inst.d_lo0 + first).all(|(_, poly)| poly.contains(&origin)))
}

/// Largest grid-feasible `Φ` within `tol`; never below the exact optimum.
pub fn changing_cost_oracle(inst: &ChangingCostInstance, step: &Q, tol: &Q) -> Result<Q> {
    let feasible = |phi: &Q| changing_cost_grid_feasible(inst, phi, step);
    if feasible(&Q::one())? {
        return Ok(Q::one());
    }
    Ok(bisect(Q::one(), Q::zero(), tol, feasible)?.1)
}

// ---------------------------------------------------------------------------
// Per-seed checks.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub seed: u64,
    pub check: String,
    pub detail: String,
    /// Instance dump that replays the failure.
    pub instance: serde_json::Value,
}

fn fail(seed: u64, check: &str, detail: impl Into<String>, instance: serde_json::Value) -> Failure {
    Failure { seed, check: check.into(), detail: detail.into(), instance }
}

fn dump<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).unwrap_or(serde_json::Value::Null)
}

fn seeded(salt: u64, seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ seed)
}

/// Verdict agreement (`verdict`), then greedy replay (`greedy`) when feasible.
/// With `mutant`, the broken checker replaces the real one.
pub fn feasibility_case(seed: u64, mutant: bool, cap: u64) -> Vec<Failure> {
    let mdp = random_mdp(&Sampler::new(seed));
    let fast = if mutant { verdict_without_first_condition(&mdp) } else { check_feasible(&mdp).is_feasible() };
    let (oracle, _) = oracle_feasible(&mdp);
    let mut out = Vec::new();
    if fast != oracle {
        out.push(fail(seed, "verdict", format!("checker says {fast}, oracle says {oracle}"), dump(&mdp.to_json())));
    }
    if oracle && !mutant {
        match greedy_audit(&mdp, cap) {
            Ok(None) => {}
            Ok(Some(p)) => out.push(fail(seed, "greedy", p, dump(&mdp.to_json()))),
            Err(e) => out.push(fail(seed, "greedy", e.to_string(), dump(&mdp.to_json()))),
        }
    }
    out
}

/// Reduction plus bisection against the closed forms, both metrics.
pub fn rmowp_case(seed: u64, cap: u64) -> Vec<Failure> {
    let mut rng = seeded(3, seed);
    let inst = random_rmowp(&mut rng, 5);
    let step = q(1, 4);
    let tol = q(1, 64);
    let dumped = dump(&RmowpJson::from_regular(&inst));
    let mut out = Vec::new();
    let run = || -> Result<Vec<(String, String)>> {
        let mut bad = Vec::new();
        let feas = |th: Threshold| -> Result<bool> {
            Ok(check_feasible_fast(&build_reduction_mdp(&inst, &th, &step, cap)?).is_feasible())
        };
        let gamma = regret_star(&inst)?;
        let top = &inst.p * (&inst.d_hi0 - &inst.d_lo0 + inst.v.iter().sum::<Q>()) + Q::one();
        let (_, good) = bisect(Q::zero(), top, &tol, |g| feas(Threshold::Regret(g.clone())))?;
        let exact_ok = feas(Threshold::Regret(gamma.clone()))?
            && (gamma.is_zero() || !feas(Threshold::Regret(&gamma - &tol))?);
        if (&good - &gamma).abs() > step || !exact_ok {
            bad.push(("regret".into(), format!("closed form {gamma}, reduction bracket top {good}, exact {exact_ok}")));
        }
        let phi = cr_star(&inst)?;
        let lowest = feas(Threshold::Cr(Q::zero()))?;
        if lowest {
            let (_, good) = if feas(Threshold::Cr(Q::one()))? {
                (Q::one(), Q::one())
            } else {
                bisect(Q::one(), Q::zero(), &tol, |f| feas(Threshold::Cr(f.clone())))?
            };
            let exact_ok = feas(Threshold::Cr(phi.clone()))? && (phi == Q::one() || !feas(Threshold::Cr(&phi + &tol))?);
            if (&good - &phi).abs() > step || !exact_ok {
                bad.push(("cr".into(), format!("closed form {phi}, reduction bracket bottom {good}, exact {exact_ok}")));
            }
        } else {
            bad.push(("cr".into(), "ratio 0 is infeasible".into()));
        }
        Ok(bad)
    };
    match run() {
        Ok(bad) => out.extend(bad.into_iter().map(|(c, d)| fail(seed, &c, d, dumped.clone()))),
        Err(e) => out.push(fail(seed, "error", e.to_string(), dumped)),
    }
    out
}

/// Closed-form Leontief ratio against grid bisection (`θ`-step `2⁻⁵`).
pub fn rrawp_case(seed: u64) -> Vec<Failure> {
    let mut rng = seeded(5, seed);
    let inst = random_rrawp(&mut rng);
    let dumped = dump(&RrawpJson::from_instance(&inst));
    let run = || -> Result<Option<String>> {
        let exact = leontief_cr_star(&inst)?;
        let grid = grid_cr_star(&inst, &q(1, 32), &q(1, 1024))?;
        Ok(((&exact - &grid).abs() > q(1, 16)).then(|| format!("closed form {exact}, grid {grid}")))
    };
    match run() {
        Ok(None) => Vec::new(),
        Ok(Some(d)) => vec![fail(seed, "leontief", d, dumped)],
        Err(e) => vec![fail(seed, "error", e.to_string(), dumped)],
    }
}

/// Closed-form `g_τ` against the day-by-day recursion at `points` grid
/// points per `τ`, and the closed-form ratio against a `2⁻⁶` grid search.
pub fn scale_linear_case(seed: u64, points: usize) -> Vec<Failure> {
    let mut rng = seeded(19, seed);
    let inst = random_scale_linear(&mut rng);
    let dumped = serde_json::json!({
        "T": inst.t, "d0": [inst.d_lo0.to_string(), inst.d_hi0.to_string()],
        "a": inst.a.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "b": inst.b.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "c": inst.c.to_string(), "p": inst.p.to_string(),
        "V": inst.v.iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    let run = || -> Result<Vec<(String, String)>> {
        let mut bad = Vec::new();
        let width = &inst.d_hi0 - &inst.d_lo0;
        for tau in 1..=inst.t {
            for i in 0..points {
                let e = &inst.d_lo0 + &width * q(i as i64, points as i64 - 1);
                let (g, r) = (crate::rmowp::scale_linear_g(&inst, tau, &e)?, crate::rmowp::scale_linear_recursion(&inst, tau, &e)?);
                if g != r {
                    bad.push(("g".into(), format!("tau {tau}, e = {e}: closed form {g}, recursion {r}")));
                    break;
                }
            }
        }
        let star = crate::rmowp::scale_linear_cr_star(&inst)?;
        let step = q(1, 64);
        let mut best = Q::one();
        for e in grid_points(&inst.d_lo0, &inst.d_hi0, &step)? {
            for tau in 1..=inst.t {
                let g = crate::rmowp::scale_linear_recursion(&inst, tau, &e)?;
                best = std::cmp::min(best, crate::rmowp::scale_linear_ratio(&inst, tau, &e, &g));
            }
        }
        if best < star || &best - &star > step {
            bad.push(("cr".into(), format!("closed form {star}, grid search {best}")));
        }
        Ok(bad)
    };
    match run() {
        Ok(bad) => bad.into_iter().map(|(c, d)| fail(seed, &c, d, dumped.clone())).collect(),
        Err(e) => vec![fail(seed, "error", e.to_string(), dumped)],
    }
}

/// Envelope equality at `probes` points, piece counts and the Lipschitz
/// bound for one random `(g, f, Δ, h)`.
pub fn pwl_case(seed: u64, probes: usize) -> Vec<Failure> {
    let mut rng = seeded(7, seed);
    let extend = rng.gen_bool(0.5);
    let g = random_pwl(&mut rng, false, extend);
    let f_extend = extend || rng.gen_bool(0.5);
    let f = random_pwl(&mut rng, true, f_extend);
    let delta = pick(&mut rng, 1, 8, 2);
    let h = std::cmp::min(pick(&mut rng, 1, 8, 2), delta.clone());
    let dumped = serde_json::json!({
        "g": dump(&g.to_json()), "f": dump(&f.to_json()), "delta": delta.to_string(), "h": h.to_string()
    });
    let mut out = Vec::new();
    let ws = match range_max_decompose(&g, &f, &delta, &h) {
        Ok(ws) => ws,
        Err(e) => return vec![fail(seed, "error", e.to_string(), dumped)],
    };
    let k = g.lipschitz_constant().unwrap_or_else(|_| Q::zero()) + qi(4) * f.lipschitz_constant().unwrap_or_else(|_| Q::zero());
    for (i, w) in ws.iter().enumerate() {
        if w.defined_piece_count() > 12 {
            out.push(fail(seed, "pieces", format!("output {i} has {} pieces", w.defined_piece_count()), dumped.clone()));
        }
        if w.lipschitz_constant().map_or(true, |l| l > k) {
            out.push(fail(seed, "lipschitz", format!("output {i} is steeper than {k}"), dumped.clone()));
        }
    }
    let mut xs: Vec<Q> = g.finite_breakpoints().into_iter().chain(f.finite_breakpoints()).collect();
    xs.sort();
    let (lo, hi) = match (xs.first(), xs.last()) {
        (Some(a), Some(b)) => (a - qi(2) * &delta, b + qi(2) * &delta),
        _ => (qi(-4), qi(4)),
    };
    let step = (&hi - &lo) / qi(probes as i64 - 1);
    let env = |x: &Q| ws.iter().map(|w| w.eval(x)).fold(NegInf, Ext::max);
    let mut prev: Option<(Q, Q)> = None;
    for i in 0..probes {
        let x = &lo + &step * qi(i as i64);
        let want = range_max_oracle(&g, &f, &delta, &h, &x);
        let got = env(&x);
        if want != got {
            out.push(fail(seed, "envelope", format!("x = {x}: oracle {want:?}, envelope {got:?}"), dumped.clone()));
            break;
        }
        if let Fin(v) = &got {
            if let Some((px, pv)) = &prev {
                if (v - pv).abs() > &k * (&x - px) {
                    out.push(fail(seed, "lipschitz", format!("envelope jumps between {px} and {x}"), dumped.clone()));
                    break;
                }
            }
            prev = Some((x.clone(), v.clone()));
        } else {
            prev = None;
        }
    }
    out
}

/// Phase reduction against the polygon game (`finite`), and G-linear
/// closure on a random changing-cost build (`closure`).
pub fn multiphase_case(seed: u64) -> Vec<Failure> {
    let mut rng = seeded(11, seed);
    let inst = random_multiphase(&mut rng);
    let dumped = dump(&MultiPhaseJson::from_instance(&inst));
    let mut out = Vec::new();
    match (check_feasible_multiphase(&inst), multiphase_game_oracle(&inst)) {
        (Ok(v), Ok(o)) if v.is_feasible() == o => {}
        (Ok(v), Ok(o)) => out.push(fail(seed, "finite", format!("reduction says {}, game says {o}", v.is_feasible()), dumped)),
        (Err(e), _) | (_, Err(e)) => out.push(fail(seed, "finite", e.to_string(), dumped)),
    }
    let cc = random_changing_cost(&mut rng);
    let phi = q(rng.gen_range(1..=16), 16);
    let dumped = dump(&ChangingCostJson::from_instance(&cc));
    let chain = || -> Result<()> {
        let mut g = build_changing_cost_glinear(&cc.merged(), &phi)?;
        while g.k() > 0 {
            g = reduce_last_phase_glinear(&g)?;
            g.validate()?;
        }
        Ok(())
    };
    if let Err(e) = chain() {
        out.push(fail(seed, "closure", format!("phi = {phi}: {e}"), dumped));
    }
    out
}

/// Exact solver against the grid oracle, PTAS sandwich and rounding bounds.
pub fn changing_cost_case(seed: u64) -> Vec<Failure> {
    let mut rng = seeded(13, seed);
    let inst = random_changing_cost(&mut rng);
    changing_cost_check(seed, &inst)
}

pub fn changing_cost_check(seed: u64, inst: &ChangingCostInstance) -> Vec<Failure> {
    let dumped = dump(&ChangingCostJson::from_instance(inst));
    let tol = q(1, 1 << 12);
    let slack = q(1, 16);
    let eps = q(1, 4);
    let run = || -> Result<Vec<(String, String)>> {
        let mut bad = Vec::new();
        let (phi, _) = solve_changing_cost_cr(inst, &tol)?;
        let oracle = changing_cost_oracle(inst, &q(1, 4), &tol)?;
        if oracle < &phi - &tol || oracle > &phi + &slack + &tol {
            bad.push(("oracle".into(), format!("solver {phi}, grid oracle {oracle}")));
        }
        let (approx, _) = ptas_solve(inst, &eps)?;
        if approx > &phi + &tol || approx < &phi - &eps - &tol {
            bad.push(("ptas".into(), format!("solver {phi}, ptas {approx}")));
        }
        let delta = &eps / qi(5);
        let rounded = ptas_round_costs(inst, &delta)?;
        let grid = cost_grid(&inst.gamma[0], &inst.gamma[inst.k - 1], &inst.p, &delta)?;
        let one = Q::one() + &delta;
        for (g, h) in inst.gamma.iter().zip(&rounded.gamma) {
            let ok = grid.contains(h)
                && h <= g
                && *g <= &one * h
                && (&inst.p - h) / &one <= &inst.p - g
                && &inst.p - g <= &inst.p - h;
            if !ok {
                bad.push(("rounding".into(), format!("cost {g} snapped to {h}")));
            }
        }
        Ok(bad)
    };
    match run() {
        Ok(bad) => bad.into_iter().map(|(c, d)| fail(seed, &c, d, dumped.clone())).collect(),
        Err(e) => vec![fail(seed, "error", e.to_string(), dumped)],
    }
}

/// Ordered pairs for the monotonicity battery: one more error (regret up,
/// ratio down), more supply (ratio up), and threshold monotonicity of the
/// reduction's verdict.
pub fn monotone_case(seed: u64, cap: u64) -> Vec<Failure> {
    let mut rng = seeded(17, seed);
    let inst = random_rmowp(&mut rng, 3);
    let mut wider = inst.clone();
    let day = rng.gen_range(0..inst.t);
    wider.delta[day] += pick(&mut rng, 1, 4, 4);
    let mut richer = inst.clone();
    richer.v[day] += pick(&mut rng, 1, 4, 4);
    let (a, b) = (pick(&mut rng, 0, 8, 4), pick(&mut rng, 0, 8, 4));
    let (g0, g1) = if a <= b { (a, b) } else { (b, a) };
    let dumped = dump(&RmowpJson::from_regular(&inst));
    let run = || -> Result<Vec<(String, String)>> {
        let mut bad = Vec::new();
        let d = day + 1;
        let (g, gw) = (regret_star(&inst)?, regret_star(&wider)?);
        if gw < g {
            bad.push(("regret-delta".into(), format!("raising delta on day {d}: {g} -> {gw}")));
        }
        let (f, fw, fr) = (cr_star(&inst)?, cr_star(&wider)?, cr_star(&richer)?);
        if fw > f {
            bad.push(("cr-delta".into(), format!("raising delta on day {d}: {f} -> {fw}")));
        }
        if fr < f {
            bad.push(("cr-supply".into(), format!("raising V on day {d}: {f} -> {fr}")));
        }
        let step = q(1, 2);
        let feas = |th: Threshold| -> Result<bool> {
            Ok(check_feasible_fast(&build_reduction_mdp(&inst, &th, &step, cap)?).is_feasible())
        };
        if feas(Threshold::Regret(g0.clone()))? && !feas(Threshold::Regret(g1.clone()))? {
            bad.push(("threshold".into(), format!("regret feasible at {g0} but not {g1}")));
        }
        let (f0, f1) = (&g0 / qi(2), &g1 / qi(2));
        if feas(Threshold::Cr(f1.clone()))? && !feas(Threshold::Cr(f0.clone()))? {
            bad.push(("threshold".into(), format!("ratio feasible at {f1} but not {f0}")));
        }
        Ok(bad)
    };
    match run() {
        Ok(bad) => bad.into_iter().map(|(c, d)| fail(seed, &c, d, dumped.clone())).collect(),
        Err(e) => vec![fail(seed, "error", e.to_string(), dumped)],
    }
}

// ---------------------------------------------------------------------------
// Driver.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Feasibility,
    Rmowp,
    Rrawp,
    Pwl,
    Multiphase,
    Changing,
    Monotone,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Feasibility, Suite::Rmowp, Suite::Rrawp, Suite::Pwl, Suite::Multiphase, Suite::Changing, Suite::Monotone];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Feasibility => "feasibility",
            Suite::Rmowp => "rmowp",
            Suite::Rrawp => "rrawp",
            Suite::Pwl => "pwl",
            Suite::Multiphase => "multiphase",
            Suite::Changing => "changing",
            Suite::Monotone => "monotone",
        }
    }

    /// `all` expands to every suite.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(Suite::ALL);
                continue;
            }
            let found = Suite::ALL.iter().find(|x| x.name() == part).ok_or_else(|| {
                Error::Parse(format!("unknown suite {part:?}; expected all or one of feasibility, rmowp, rrawp, pwl, multiphase, changing, monotone"))
            })?;
            out.push(*found);
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn run_seed(&self, seed: u64, cap: u64) -> Vec<Failure> {
        match self {
            Suite::Feasibility => feasibility_case(seed, false, cap),
            Suite::Rmowp => rmowp_case(seed, cap),
            Suite::Rrawp => rrawp_case(seed),
            Suite::Pwl => pwl_case(seed, 500),
            Suite::Multiphase => multiphase_case(seed),
            Suite::Changing => changing_cost_case(seed),
            Suite::Monotone => monotone_case(seed, cap),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: u64,
    pub passed: u64,
    pub failures: Vec<Failure>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Default)]
pub struct Report {
    pub suites: Vec<SuiteReport>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.suites.iter().all(SuiteReport::ok)
    }
}

/// Runs `f` on seeds `0..seeds` in parallel; the result is in seed order.
pub fn run_seeds(name: &str, seeds: u64, f: impl Fn(u64) -> Vec<Failure> + Sync) -> SuiteReport {
    let per: Vec<Vec<Failure>> = (0..seeds).into_par_iter().map(&f).collect();
    let passed = per.iter().filter(|v| v.is_empty()).count() as u64;
    SuiteReport { suite: name.into(), cases: seeds, passed, failures: per.into_iter().flatten().collect() }
}

pub fn cross_check(suites: &[Suite], seeds: u64, cap: u64) -> Report {
    Report { suites: suites.iter().map(|s| run_seeds(s.name(), seeds, |seed| s.run_seed(seed, cap))).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiphase::changing::example_two_phase;
    use crate::rmowp::example_two_day;

    #[test]
    fn generators_are_deterministic() {
        let a = random_mdp(&Sampler::new(0));
        let b = random_mdp(&Sampler::new(0));
        assert_eq!(serde_json::to_string(&a.to_json()).unwrap(), serde_json::to_string(&b.to_json()).unwrap());
        let mut r1 = seeded(1, 9);
        let mut r2 = seeded(1, 9);
        assert_eq!(random_multiphase(&mut r1), random_multiphase(&mut r2));
    }

    #[test]
    fn both_verdicts_are_common() {
        let feasible = (0..1000).filter(|&s| check_feasible(&random_mdp(&Sampler::new(s))).is_feasible()).count();
        assert!((50..=950).contains(&feasible), "{feasible} feasible of 1000");
    }

    #[test]
    fn game_values_on_the_two_day_instance() {
        let two_day = example_two_day();
        assert_eq!(minimax_game(&two_day, &q(1, 2), Metric::Regret, DEFAULT_NODE_CAP).unwrap(), Fin(q(1, 2)));
        let Fin(v) = minimax_game(&two_day, &q(1, 4), Metric::Cr, DEFAULT_NODE_CAP).unwrap() else { panic!() };
        assert!((v - q(2, 3)).abs() <= q(1, 8));
    }

    #[test]
    fn node_cap_is_enforced() {
        assert!(matches!(minimax_game(&example_two_day(), &q(1, 4), Metric::Cr, 3), Err(Error::NodeCap { cap: 3 })));
    }

    #[test]
    fn static_order_without_errors() {
        let mut two_day = example_two_day();
        two_day.d_hi0 = two_day.d_lo0.clone();
        two_day.delta = vec![qi(0), qi(0)];
        assert_eq!(minimax_game(&two_day, &q(1, 2), Metric::Regret, DEFAULT_NODE_CAP).unwrap(), Fin(qi(0)));
    }

    #[test]
    fn mutant_misses_the_first_condition() {
        // the initial state already needs more than the horizon allows
        let mut p = random_mdp(&Sampler::new(1)).into_parts();
        p.succ = vec![vec![vec![0]]];
        p.ids.truncate(2);
        p.ids[1].truncate(1);
        p.u = vec![vec![qi(0)]];
        p.v = vec![vec![qi(1)]];
        p.l = vec![vec![Ext::zero()], vec![Fin(qi(2))]];
        p.r = vec![vec![Ext::zero()], vec![Fin(qi(3))]];
        let mdp = FiniteMinimaxMdp::new(p).unwrap();
        assert!(!check_feasible(&mdp).is_feasible());
        assert!(verdict_without_first_condition(&mdp));
        let caught = (0..300).any(|s| !feasibility_case(s, true, DEFAULT_NODE_CAP).is_empty());
        assert!(caught);
    }

    #[test]
    fn polygon_oracle_matches_two_phase() {
        let inst = crate::multiphase::tests::two_phase(qi(1), qi(2));
        assert!(multiphase_game_oracle(&inst).unwrap());
        assert!(!multiphase_game_oracle(&crate::multiphase::tests::two_phase(qi(2), qi(2))).unwrap());
    }

    #[test]
    fn changing_cost_oracle_is_an_upper_bound() {
        let mut inst = example_two_phase();
        inst.d_lo0 = qi(1);
        inst.d_hi0 = qi(3);
        let (phi, _) = solve_changing_cost_cr(&inst, &q(1, 4096)).unwrap();
        let o = changing_cost_oracle(&inst, &q(1, 4), &q(1, 4096)).unwrap();
        assert!(o >= &phi - q(1, 4096) && o <= phi + q(1, 16), "{o}");
    }

    #[test]
    fn suite_names_parse() {
        assert_eq!(Suite::parse_list("all").unwrap().len(), 7);
        assert_eq!(Suite::parse_list("rmowp,feasibility").unwrap(), vec![Suite::Feasibility, Suite::Rmowp]);
        assert!(Suite::parse_list("nope").is_err());
        assert!(cross_check(&[], 10, 10).suites.is_empty());
    }

    #[test]
    fn few_seeds_of_every_suite_pass() {
        let r = cross_check(&Suite::ALL, 4, DEFAULT_NODE_CAP);
        for s in &r.suites {
            // more supply can lower the optimal ratio; see the test below
            let real: Vec<_> = s.failures.iter().filter(|f| f.check != "cr-supply").collect();
            assert!(real.is_empty(), "{}: {:?}", s.suite, real);
        }
        assert!((0..4).all(|s| scale_linear_case(s, 20).is_empty()));
    }

    #[test]
    fn more_supply_can_lower_the_ratio() {
        let inst = RmowpInstance {
            t: 2,
            d_lo0: q(7, 4),
            d_hi0: q(9, 2),
            delta: vec![q(3, 4), q(7, 4)],
            c: qi(2),
            p: q(15, 4),
            v: vec![q(3, 2), q(1, 2)],
        };
        let mut richer = inst.clone();
        richer.v[0] += q(1, 4);
        assert_eq!(cr_star(&inst).unwrap(), q(105, 113));
        assert_eq!(cr_star(&richer).unwrap(), q(105, 121));
        // the grid game agrees on the direction
        let game = |i: &RmowpInstance| minimax_game(i, &q(1, 4), Metric::Cr, DEFAULT_NODE_CAP).unwrap();
        assert!(game(&richer) < game(&inst));
    }
}
