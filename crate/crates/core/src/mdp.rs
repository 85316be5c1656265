//! Finite-state minimax-MDP kernel.
//!
//! Times are 1-based in the public API (`t ∈ 1..=T`); states at time `t` are
//! addressed by their index in [`FiniteMinimaxMdp::states`].

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::ext::{Ext, Fin, NegInf, PosInf};
use crate::io::{ExtRat, Rat};
use crate::scalar::{Scalar, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMinimaxMdp<T: Scalar = Q> {
    ids: Vec<Vec<String>>,
    initial: usize,
    succ: Vec<Vec<Vec<usize>>>,
    u: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    l: Vec<Vec<Ext<T>>>,
    r: Vec<Vec<Ext<T>>>,
}

/// Raw per-time data; index `k` of every vector refers to time `k + 1`.
#[derive(Clone, Debug)]
pub struct MdpParts<T> {
    pub ids: Vec<Vec<String>>,
    pub initial: usize,
    pub succ: Vec<Vec<Vec<usize>>>,
    pub u: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub l: Vec<Vec<Ext<T>>>,
    pub r: Vec<Vec<Ext<T>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    /// First violated future-imposed condition. For `alpha == 1` the state is
    /// `s_1`; otherwise it is the state at time `alpha − 1`.
    Infeasible { alpha: usize, state: usize, state_id: String },
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Verdict::Feasible)
    }
}

impl<T: Scalar> FiniteMinimaxMdp<T> {
    pub fn new(p: MdpParts<T>) -> Result<Self> {
        let n = p.ids.len();
        if n == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if p.succ.len() != n - 1 || p.u.len() != n - 1 || p.v.len() != n - 1 {
            return Err(invalid("transitions and action bounds need T-1 entries"));
        }
        if p.l.len() != n || p.r.len() != n {
            return Err(invalid("inventory bounds need T entries"));
        }
        for (k, ids) in p.ids.iter().enumerate() {
            let t = k + 1;
            if ids.is_empty() {
                return Err(invalid(format!("time {t} has no states")));
            }
            if p.l[k].len() != ids.len() || p.r[k].len() != ids.len() {
                return Err(invalid(format!("time {t}: inventory bounds do not match state count")));
            }
            if k + 1 < n {
                if p.succ[k].len() != ids.len() || p.u[k].len() != ids.len() || p.v[k].len() != ids.len() {
                    return Err(invalid(format!("time {t}: per-state data does not match state count")));
                }
                for (s, out) in p.succ[k].iter().enumerate() {
                    if out.is_empty() {
                        return Err(invalid(format!("F_{t}({}) is empty", ids[s])));
                    }
                    if let Some(bad) = out.iter().find(|&&j| j >= p.ids[k + 1].len()) {
                        return Err(invalid(format!("F_{t}({}) names unknown state {bad}", ids[s])));
                    }
                    if p.u[k][s] > p.v[k][s] {
                        return Err(invalid(format!("U_{t}({}) > V_{t}({})", ids[s], ids[s])));
                    }
                }
            }
        }
        if p.initial >= p.ids[0].len() {
            return Err(invalid("initial state out of range"));
        }
        let zero = Ext::zero();
        if p.l[0][p.initial] != zero || p.r[0][p.initial] != zero {
            return Err(invalid("L_1(s_1) and R_1(s_1) must both be 0"));
        }
        Ok(FiniteMinimaxMdp { ids: p.ids, initial: p.initial, succ: p.succ, u: p.u, v: p.v, l: p.l, r: p.r })
    }

    pub fn into_parts(self) -> MdpParts<T> {
        MdpParts { ids: self.ids, initial: self.initial, succ: self.succ, u: self.u, v: self.v, l: self.l, r: self.r }
    }

    pub fn horizon(&self) -> usize {
        self.ids.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn states(&self, t: usize) -> &[String] {
        &self.ids[t - 1]
    }

    pub fn state_count(&self, t: usize) -> usize {
        self.ids[t - 1].len()
    }

    pub fn succ(&self, t: usize, s: usize) -> &[usize] {
        &self.succ[t - 1][s]
    }

    pub fn u(&self, t: usize, s: usize) -> &T {
        &self.u[t - 1][s]
    }

    pub fn v(&self, t: usize, s: usize) -> &T {
        &self.v[t - 1][s]
    }

    pub fn l(&self, t: usize, s: usize) -> &Ext<T> {
        &self.l[t - 1][s]
    }

    pub fn r(&self, t: usize, s: usize) -> &Ext<T> {
        &self.r[t - 1][s]
    }

    pub fn state_index(&self, t: usize, id: &str) -> Result<usize> {
        self.ids[t - 1]
            .iter()
            .position(|x| x == id)
            .ok_or_else(|| invalid(format!("unknown state {id:?} at time {t}")))
    }

    /// States reachable at `beta` from `s` at `alpha`, as a membership mask.
    pub fn reach_mask(&self, alpha: usize, beta: usize, s: usize) -> Result<Vec<bool>> {
        let t_max = self.horizon();
        if alpha < 1 || alpha > beta || beta > t_max {
            return Err(precondition(format!("need 1 <= alpha <= beta <= T, got {alpha}, {beta}")));
        }
        if s >= self.state_count(alpha) {
            return Err(invalid(format!("unknown state index {s} at time {alpha}")));
        }
        let mut cur = vec![false; self.state_count(alpha)];
        cur[s] = true;
        for t in alpha..beta {
            let mut next = vec![false; self.state_count(t + 1)];
            for (i, _) in cur.iter().enumerate().filter(|(_, &on)| on) {
                for &j in self.succ(t, i) {
                    next[j] = true;
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    /// `F_{α→β}(s)` as sorted indices.
    pub fn reach(&self, alpha: usize, beta: usize, s: usize) -> Result<Vec<usize>> {
        Ok(self
            .reach_mask(alpha, beta, s)?
            .into_iter()
            .enumerate()
            .filter_map(|(i, on)| on.then_some(i))
            .collect())
    }

    /// States reachable from `s_1` at every time.
    pub fn reachable(&self) -> Vec<Vec<bool>> {
        (1..=self.horizon()).map(|b| self.reach_mask(1, b, self.initial).unwrap()).collect()
    }
}

// ---------------------------------------------------------------------------
// DP tables.
// ---------------------------------------------------------------------------

/// Claim-1 tables. `cu[a][s][k][sb]` is `U_{α→α+k}(s, s_b)` with `α = a+1`,
/// `None` when `s_b` is unreachable; likewise `cv`. `r_to[a][s][k]` is
/// `R_{α+k⇝α}(s)`.
#[derive(Clone, Debug)]
pub struct DpTables<T: Scalar = Q> {
    pub cu: Vec<Vec<Vec<Vec<Option<T>>>>>,
    pub cv: Vec<Vec<Vec<Vec<Option<T>>>>>,
    pub r_to: Vec<Vec<Vec<Ext<T>>>>,
    pub l_to: Vec<Vec<Vec<Ext<T>>>>,
    pub star: StarBounds<T>,
}

/// `R_{⋆⇝t}` and `L_{⋆⇝t}` per time and state (0-based time index).
#[derive(Clone, Debug, PartialEq)]
pub struct StarBounds<T: Scalar = Q> {
    pub r_star: Vec<Vec<Ext<T>>>,
    pub l_star: Vec<Vec<Ext<T>>>,
    succ: Vec<Vec<Vec<usize>>>,
}

impl<T: Scalar> StarBounds<T> {
    pub fn r_star(&self, t: usize, s: usize) -> &Ext<T> {
        &self.r_star[t - 1][s]
    }

    pub fn l_star(&self, t: usize, s: usize) -> &Ext<T> {
        &self.l_star[t - 1][s]
    }

    /// `R_{⋆⇝t→[t+1]}(s) = min_{s′ ∈ F_t(s)} R_{⋆⇝t+1}(s′)`, for `t < T`.
    pub fn r_bracket(&self, t: usize, s: usize) -> Ext<T> {
        self.succ[t - 1][s].iter().map(|&j| self.r_star[t][j].clone()).fold(PosInf, Ext::min)
    }

    pub fn l_bracket(&self, t: usize, s: usize) -> Ext<T> {
        self.succ[t - 1][s].iter().map(|&j| self.l_star[t][j].clone()).fold(NegInf, Ext::max)
    }

    /// Future-imposed conditions in witness order.
    pub fn verdict(&self, mdp: &FiniteMinimaxMdp<T>) -> Verdict {
        let s1 = mdp.initial();
        if self.r_star(1, s1) < self.l_star(1, s1) {
            return Verdict::Infeasible { alpha: 1, state: s1, state_id: mdp.states(1)[s1].clone() };
        }
        let reach = mdp.reachable();
        for alpha in 2..=mdp.horizon() {
            for (s, _) in reach[alpha - 2].iter().enumerate().filter(|(_, &on)| on) {
                if self.r_bracket(alpha - 1, s) < self.l_bracket(alpha - 1, s) {
                    return Verdict::Infeasible { alpha, state: s, state_id: mdp.states(alpha - 1)[s].clone() };
                }
            }
        }
        Verdict::Feasible
    }
}

/// Cumulative action bounds and future-imposed tables by the forward DP.
pub fn dp_tables<T: Scalar>(mdp: &FiniteMinimaxMdp<T>) -> DpTables<T> {
    let n = mdp.horizon();
    let mut cu = Vec::with_capacity(n);
    let mut cv = Vec::with_capacity(n);
    let mut r_to = Vec::with_capacity(n);
    let mut l_to = Vec::with_capacity(n);
    for a in 1..=n {
        let mut cu_a = Vec::new();
        let mut cv_a = Vec::new();
        let mut r_a = Vec::new();
        let mut l_a = Vec::new();
        for s in 0..mdp.state_count(a) {
            let mut up: Vec<Option<T>> = vec![None; mdp.state_count(a)];
            let mut vp: Vec<Option<T>> = vec![None; mdp.state_count(a)];
            up[s] = Some(T::zero());
            vp[s] = Some(T::zero());
            let mut rows_u = vec![up.clone()];
            let mut rows_v = vec![vp.clone()];
            for b in a..n {
                let mut nu: Vec<Option<T>> = vec![None; mdp.state_count(b + 1)];
                let mut nv: Vec<Option<T>> = vec![None; mdp.state_count(b + 1)];
                for sb in 0..mdp.state_count(b) {
                    let (Some(x), Some(y)) = (&up[sb], &vp[sb]) else { continue };
                    let xu = x.clone() + mdp.u(b, sb).clone();
                    let yv = y.clone() + mdp.v(b, sb).clone();
                    for &j in mdp.succ(b, sb) {
                        nu[j] = Some(match nu[j].take() {
                            Some(o) => T::max_of(o, xu.clone()),
                            None => xu.clone(),
                        });
                        nv[j] = Some(match nv[j].take() {
                            Some(o) => T::min_of(o, yv.clone()),
                            None => yv.clone(),
                        });
                    }
                }
                rows_u.push(nu.clone());
                rows_v.push(nv.clone());
                up = nu;
                vp = nv;
            }
            let mut rs = Vec::new();
            let mut ls = Vec::new();
            for (k, (ru, rv)) in rows_u.iter().zip(&rows_v).enumerate() {
                let b = a + k;
                let mut rb = PosInf;
                let mut lb = NegInf;
                for sb in 0..mdp.state_count(b) {
                    if let (Some(x), Some(y)) = (&ru[sb], &rv[sb]) {
                        rb = rb.min(mdp.r(b, sb).sub_fin(x));
                        lb = lb.max(mdp.l(b, sb).sub_fin(y));
                    }
                }
                rs.push(rb);
                ls.push(lb);
            }
            cu_a.push(rows_u);
            cv_a.push(rows_v);
            r_a.push(rs);
            l_a.push(ls);
        }
        cu.push(cu_a);
        cv.push(cv_a);
        r_to.push(r_a);
        l_to.push(l_a);
    }
    let r_star = r_to
        .iter()
        .map(|per_s| per_s.iter().map(|row| row.iter().cloned().fold(PosInf, Ext::min)).collect())
        .collect();
    let l_star = l_to
        .iter()
        .map(|per_s| per_s.iter().map(|row| row.iter().cloned().fold(NegInf, Ext::max)).collect())
        .collect();
    let star = StarBounds { r_star, l_star, succ: mdp.succ.clone() };
    DpTables { cu, cv, r_to, l_to, star }
}

/// `R_{⋆⇝t}` / `L_{⋆⇝t}` by the backward recursion
/// `R_{⋆⇝t}(s) = min(R_t(s), min_{s′} R_{⋆⇝t+1}(s′) − U_t(s))`.
pub fn star_bounds<T: Scalar>(mdp: &FiniteMinimaxMdp<T>) -> StarBounds<T> {
    let n = mdp.horizon();
    let mut r_star = vec![Vec::new(); n];
    let mut l_star = vec![Vec::new(); n];
    r_star[n - 1] = mdp.r[n - 1].clone();
    l_star[n - 1] = mdp.l[n - 1].clone();
    for t in (1..n).rev() {
        let mut rs = Vec::with_capacity(mdp.state_count(t));
        let mut ls = Vec::with_capacity(mdp.state_count(t));
        for s in 0..mdp.state_count(t) {
            let rn = mdp.succ(t, s).iter().map(|&j| r_star[t][j].clone()).fold(PosInf, Ext::min);
            let ln = mdp.succ(t, s).iter().map(|&j| l_star[t][j].clone()).fold(NegInf, Ext::max);
            rs.push(mdp.r(t, s).clone().min(rn.sub_fin(mdp.u(t, s))));
            ls.push(mdp.l(t, s).clone().max(ln.sub_fin(mdp.v(t, s))));
        }
        r_star[t - 1] = rs;
        l_star[t - 1] = ls;
    }
    StarBounds { r_star, l_star, succ: mdp.succ.clone() }
}

/// Feasibility via the future-imposed conditions, using the full DP tables.
pub fn check_feasible<T: Scalar>(mdp: &FiniteMinimaxMdp<T>) -> Verdict {
    dp_tables(mdp).star.verdict(mdp)
}

/// Same verdict as [`check_feasible`], from the backward recursion only.
pub fn check_feasible_fast<T: Scalar>(mdp: &FiniteMinimaxMdp<T>) -> Verdict {
    star_bounds(mdp).verdict(mdp)
}

// ---------------------------------------------------------------------------
// Policies and simulation.
// ---------------------------------------------------------------------------

pub trait Policy<T> {
    /// Action at time `t` in state `s` with inventory `x`.
    fn action(&self, t: usize, s: usize, x: &T) -> T;
}

impl<T, F: Fn(usize, usize, &T) -> T> Policy<T> for F {
    fn action(&self, t: usize, s: usize, x: &T) -> T {
        self(t, s, x)
    }
}

/// `π_t(s, x) = min{V_t(s), R_{⋆⇝t→[t+1]}(s) − x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyPolicy<T: Scalar = Q> {
    /// Per time `1..T−1` and state: `(cap V_t(s), target R_{⋆⇝t→[t+1]}(s))`.
    pub table: Vec<Vec<(T, Ext<T>)>>,
}

impl<T: Scalar> Policy<T> for GreedyPolicy<T> {
    fn action(&self, t: usize, s: usize, x: &T) -> T {
        let (cap, target) = &self.table[t - 1][s];
        match target {
            Fin(r) => T::min_of(cap.clone(), r.clone() - x.clone()),
            PosInf => cap.clone(),
            NegInf => cap.clone() - cap.clone(),
        }
    }
}

/// `π_t(s, x) = max{U_t(s), L_{⋆⇝t→[t+1]}(s) − x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MirrorPolicy<T: Scalar = Q> {
    pub table: Vec<Vec<(T, Ext<T>)>>,
}

impl<T: Scalar> Policy<T> for MirrorPolicy<T> {
    fn action(&self, t: usize, s: usize, x: &T) -> T {
        let (floor, target) = &self.table[t - 1][s];
        match target {
            Fin(l) => T::max_of(floor.clone(), l.clone() - x.clone()),
            _ => floor.clone(),
        }
    }
}

pub fn greedy_policy<T: Scalar>(mdp: &FiniteMinimaxMdp<T>) -> Result<GreedyPolicy<T>> {
    let sb = star_bounds(mdp);
    if let Verdict::Infeasible { alpha, state_id, .. } = sb.verdict(mdp) {
        return Err(Error::Infeasible(format!("future-imposed condition fails at alpha={alpha}, state {state_id}")));
    }
    let table = (1..mdp.horizon())
        .map(|t| (0..mdp.state_count(t)).map(|s| (mdp.v(t, s).clone(), sb.r_bracket(t, s))).collect())
        .collect();
    Ok(GreedyPolicy { table })
}

pub fn mirror_policy<T: Scalar>(mdp: &FiniteMinimaxMdp<T>) -> Result<MirrorPolicy<T>> {
    let sb = star_bounds(mdp);
    if let Verdict::Infeasible { alpha, state_id, .. } = sb.verdict(mdp) {
        return Err(Error::Infeasible(format!("future-imposed condition fails at alpha={alpha}, state {state_id}")));
    }
    let table = (1..mdp.horizon())
        .map(|t| (0..mdp.state_count(t)).map(|s| (mdp.u(t, s).clone(), sb.l_bracket(t, s))).collect())
        .collect();
    Ok(MirrorPolicy { table })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation<T> {
    Action { t: usize, action: T, lo: T, hi: T },
    Inventory { t: usize, x: T, lo: Ext<T>, hi: Ext<T> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Scalar = Q> {
    pub start: usize,
    /// `(state index, inventory)` at times `start..=T`.
    pub steps: Vec<(usize, T)>,
    pub actions: Vec<T>,
    pub violations: Vec<Violation<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Rolls `policy` along `path` (one state index per time, starting at `s_1`).
pub fn simulate<T: Scalar, P: Policy<T> + ?Sized>(
    mdp: &FiniteMinimaxMdp<T>,
    policy: &P,
    path: &[usize],
) -> Result<Trajectory<T>> {
    let n = mdp.horizon();
    if path.len() != n || path[0] != mdp.initial() {
        return Err(precondition("path must list one state per time starting at s_1"));
    }
    for t in 1..n {
        if !mdp.succ(t, path[t - 1]).contains(&path[t]) {
            return Err(precondition(format!("path leaves F_{t} at time {t}")));
        }
    }
    let mut x = T::zero();
    let mut steps = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n - 1);
    let mut violations = Vec::new();
    for t in 1..=n {
        let s = path[t - 1];
        let xe = Fin(x.clone());
        if &xe < mdp.l(t, s) || &xe > mdp.r(t, s) {
            violations.push(Violation::Inventory { t, x: x.clone(), lo: mdp.l(t, s).clone(), hi: mdp.r(t, s).clone() });
        }
        steps.push((s, x.clone()));
        if t < n {
            let a = policy.action(t, s, &x);
            if &a < mdp.u(t, s) || &a > mdp.v(t, s) {
                violations.push(Violation::Action { t, action: a.clone(), lo: mdp.u(t, s).clone(), hi: mdp.v(t, s).clone() });
            }
            x = x + a.clone();
            actions.push(a);
        }
    }
    Ok(Trajectory { start: 1, steps, actions, violations })
}

/// Calls `visit` on every compatible environment path from `s_1`; stops with
/// an error after `cap` paths.
pub fn for_each_path<T: Scalar>(
    mdp: &FiniteMinimaxMdp<T>,
    cap: u64,
    mut visit: impl FnMut(&[usize]),
) -> Result<u64> {
    let n = mdp.horizon();
    let mut path = vec![mdp.initial()];
    let mut count = 0u64;
    fn rec<T: Scalar>(
        mdp: &FiniteMinimaxMdp<T>,
        n: usize,
        path: &mut Vec<usize>,
        count: &mut u64,
        cap: u64,
        visit: &mut dyn FnMut(&[usize]),
    ) -> Result<()> {
        if path.len() == n {
            *count += 1;
            if *count > cap {
                return Err(Error::NodeCap { cap });
            }
            visit(path);
            return Ok(());
        }
        let t = path.len();
        let s = path[t - 1];
        for &j in mdp.succ(t, s) {
            path.push(j);
            rec(mdp, n, path, count, cap, visit)?;
            path.pop();
        }
        Ok(())
    }
    rec(mdp, n, &mut path, &mut count, cap, &mut visit)?;
    Ok(count)
}

// ---------------------------------------------------------------------------
// Interval-DP oracle.
// ---------------------------------------------------------------------------

/// `[lo, hi]`, empty when `lo > hi` or either end is an infinity on the
/// wrong side.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval<T> {
    pub lo: Ext<T>,
    pub hi: Ext<T>,
}

impl<T: Scalar> Interval<T> {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || matches!(self.lo, PosInf) || matches!(self.hi, NegInf)
    }

    pub fn contains(&self, x: &T) -> bool {
        let xe = Fin(x.clone());
        !self.is_empty() && self.lo <= xe && xe <= self.hi
    }
}

/// Per `(t, state)` set of inventories from which a feasible continuation
/// exists (0-based time index).
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleIntervalMap<T: Scalar = Q> {
    pub x: Vec<Vec<Interval<T>>>,
}

impl<T: Scalar> FeasibleIntervalMap<T> {
    pub fn at(&self, t: usize, s: usize) -> &Interval<T> {
        &self.x[t - 1][s]
    }
}

/// Independent backward interval DP; feasible iff `0 ∈ X_1(s_1)`.
pub fn oracle_feasible<T: Scalar>(mdp: &FiniteMinimaxMdp<T>) -> (bool, FeasibleIntervalMap<T>) {
    let n = mdp.horizon();
    let mut x: Vec<Vec<Interval<T>>> = vec![Vec::new(); n];
    x[n - 1] = (0..mdp.state_count(n))
        .map(|s| Interval { lo: mdp.l(n, s).clone(), hi: mdp.r(n, s).clone() })
        .collect();
    for t in (1..n).rev() {
        let mut row = Vec::with_capacity(mdp.state_count(t));
        for s in 0..mdp.state_count(t) {
            // the action is fixed before the successor is revealed
            let mut lo_next = NegInf;
            let mut hi_next = PosInf;
            for &j in mdp.succ(t, s) {
                lo_next = lo_next.max(x[t][j].lo.clone());
                hi_next = hi_next.min(x[t][j].hi.clone());
            }
            let common = Interval { lo: lo_next, hi: hi_next };
            row.push(if common.is_empty() {
                Interval { lo: PosInf, hi: NegInf }
            } else {
                Interval {
                    lo: mdp.l(t, s).clone().max(common.lo.sub_fin(mdp.v(t, s))),
                    hi: mdp.r(t, s).clone().min(common.hi.sub_fin(mdp.u(t, s))),
                }
            });
        }
        x[t - 1] = row;
    }
    let map = FeasibleIntervalMap { x };
    let ok = map.at(1, mdp.initial()).contains(&T::zero());
    (ok, map)
}

// ---------------------------------------------------------------------------
// JSON.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct TransitionJson {
    pub from: String,
    pub to: Vec<String>,
}

/// State ids must be unique across all times.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct MdpJson {
    #[serde(rename = "T")]
    pub t: usize,
    pub states: Vec<Vec<String>>,
    pub initial: String,
    pub transitions: Vec<TransitionJson>,
    #[serde(rename = "U", default)]
    pub u: BTreeMap<String, String>,
    #[serde(rename = "V", default)]
    pub v: BTreeMap<String, String>,
    #[serde(rename = "L", default)]
    pub l: BTreeMap<String, String>,
    #[serde(rename = "R", default)]
    pub r: BTreeMap<String, String>,
}

impl<T: Scalar> FiniteMinimaxMdp<T> {
    pub fn from_json(j: &MdpJson) -> Result<Self> {
        let mut problems = Vec::new();
        if j.states.len() != j.t {
            problems.push(format!("T = {} but {} state sets given", j.t, j.states.len()));
        }
        let mut where_is: HashMap<&str, (usize, usize)> = HashMap::new();
        for (k, ids) in j.states.iter().enumerate() {
            for (i, id) in ids.iter().enumerate() {
                if where_is.insert(id.as_str(), (k, i)).is_some() {
                    problems.push(format!("duplicate state id {id:?}"));
                }
            }
        }
        let n = j.states.len();
        let mut succ: Vec<Vec<Vec<usize>>> =
            (0..n.saturating_sub(1)).map(|k| vec![Vec::new(); j.states[k].len()]).collect();
        for tr in &j.transitions {
            match where_is.get(tr.from.as_str()) {
                None => problems.push(format!("transition from unknown state {:?}", tr.from)),
                Some(&(k, _)) if k + 1 >= n => problems.push(format!("transition from final-time state {:?}", tr.from)),
                Some(&(k, i)) => {
                    for to in &tr.to {
                        match where_is.get(to.as_str()) {
                            Some(&(k2, i2)) if k2 == k + 1 => succ[k][i].push(i2),
                            _ => problems.push(format!("{:?} -> {:?} does not reach the next time", tr.from, to)),
                        }
                    }
                    succ[k][i].sort_unstable();
                    succ[k][i].dedup();
                }
            }
        }
        let parse = |m: &BTreeMap<String, String>, id: &str, dflt: Option<&str>, what: &str, problems: &mut Vec<String>| -> Ext<T> {
            match m.get(id).map(String::as_str).or(dflt) {
                Some(s) => Ext::parse(s).unwrap_or_else(|e| {
                    problems.push(format!("{what}[{id}]: {e}"));
                    Ext::zero()
                }),
                None => {
                    problems.push(format!("{what}[{id}] missing"));
                    Ext::zero()
                }
            }
        };
        let fin = |e: Ext<T>, what: &str, id: &str, problems: &mut Vec<String>| -> T {
            e.finite().cloned().unwrap_or_else(|| {
                problems.push(format!("{what}[{id}] must be finite"));
                T::zero()
            })
        };
        let mut u = Vec::new();
        let mut v = Vec::new();
        let mut l = Vec::new();
        let mut r = Vec::new();
        for (k, ids) in j.states.iter().enumerate() {
            let first = k == 0;
            let dl = if first { "0" } else { "-inf" };
            let dr = if first { "0" } else { "inf" };
            l.push(ids.iter().map(|id| parse(&j.l, id, Some(dl), "L", &mut problems)).collect());
            r.push(ids.iter().map(|id| parse(&j.r, id, Some(dr), "R", &mut problems)).collect());
            if k + 1 < n {
                u.push(ids.iter().map(|id| {
                    let e = parse(&j.u, id, Some("0"), "U", &mut problems);
                    fin(e, "U", id, &mut problems)
                }).collect());
                v.push(ids.iter().map(|id| {
                    let e = parse(&j.v, id, None, "V", &mut problems);
                    fin(e, "V", id, &mut problems)
                }).collect());
            }
        }
        let initial = match where_is.get(j.initial.as_str()) {
            Some(&(0, i)) => i,
            _ => {
                problems.push(format!("initial state {:?} is not at time 1", j.initial));
                0
            }
        };
        if !problems.is_empty() {
            return Err(invalid(problems.join("; ")));
        }
        FiniteMinimaxMdp::new(MdpParts { ids: j.states.clone(), initial, succ, u, v, l, r })
    }

    pub fn to_json(&self) -> MdpJson {
        let mut transitions = Vec::new();
        let mut u = BTreeMap::new();
        let mut v = BTreeMap::new();
        let mut l = BTreeMap::new();
        let mut r = BTreeMap::new();
        for t in 1..=self.horizon() {
            for (s, id) in self.states(t).iter().enumerate() {
                l.insert(id.clone(), self.l(t, s).to_string());
                r.insert(id.clone(), self.r(t, s).to_string());
                if t < self.horizon() {
                    u.insert(id.clone(), self.u(t, s).to_string());
                    v.insert(id.clone(), self.v(t, s).to_string());
                    transitions.push(TransitionJson {
                        from: id.clone(),
                        to: self.succ(t, s).iter().map(|&j| self.states(t + 1)[j].clone()).collect(),
                    });
                }
            }
        }
        MdpJson {
            t: self.horizon(),
            states: self.ids.clone(),
            initial: self.ids[0][self.initial].clone(),
            transitions,
            u,
            v,
            l,
            r,
        }
    }
}

/// One row of a greedy policy file: on day `t` in `state`, order
/// `min(cap, target − x)`.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct PolicyEntryJson {
    pub t: usize,
    pub state: String,
    pub cap: Rat,
    pub target: ExtRat,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct GreedyPolicyJson {
    pub entries: Vec<PolicyEntryJson>,
}

impl GreedyPolicy<Q> {
    pub fn to_json(&self, mdp: &FiniteMinimaxMdp<Q>) -> GreedyPolicyJson {
        let mut entries = Vec::new();
        for (k, row) in self.table.iter().enumerate() {
            for (s, (cap, target)) in row.iter().enumerate() {
                entries.push(PolicyEntryJson {
                    t: k + 1,
                    state: mdp.states(k + 1)[s].clone(),
                    cap: Rat(cap.clone()),
                    target: ExtRat(target.clone()),
                });
            }
        }
        GreedyPolicyJson { entries }
    }

    /// Every non-final state of `mdp` needs exactly one entry.
    pub fn from_json(j: &GreedyPolicyJson, mdp: &FiniteMinimaxMdp<Q>) -> Result<Self> {
        let mut table: Vec<Vec<Option<(Q, Ext<Q>)>>> =
            (1..mdp.horizon()).map(|t| vec![None; mdp.state_count(t)]).collect();
        let mut problems = Vec::new();
        for e in &j.entries {
            if e.t == 0 || e.t >= mdp.horizon() {
                problems.push(format!("entry for {} has time {} outside 1..T-1", e.state, e.t));
                continue;
            }
            match mdp.state_index(e.t, &e.state) {
                Ok(s) if table[e.t - 1][s].is_some() => problems.push(format!("duplicate entry for {}", e.state)),
                Ok(s) => table[e.t - 1][s] = Some((e.cap.0.clone(), e.target.0.clone())),
                Err(err) => problems.push(err.to_string()),
            }
        }
        for (k, row) in table.iter().enumerate() {
            for (s, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    problems.push(format!("no entry for state {}", mdp.states(k + 1)[s]));
                }
            }
        }
        if !problems.is_empty() {
            return Err(invalid(problems.join("; ")));
        }
        Ok(GreedyPolicy { table: table.into_iter().map(|r| r.into_iter().flatten().collect()).collect() })
    }
}
