//! Robust multi-period ordering with prediction intervals.
//!
//! Days `1..=T` are preparation days; demand `d` is revealed on day `T+1`.
//! On day `t` the decision-maker sees an interval `[d̲_t, d̄_t] ∋ d` and orders
//! `a_t ∈ [0, V_t]`.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Error, Result};
use crate::ext::{Ext, Fin, NegInf, PosInf};
use crate::io::{rats, to_rats, Rat};
use crate::mdp::{FiniteMinimaxMdp, MdpParts};
use crate::scalar::{qi, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct RmowpInstance {
    pub t: usize,
    pub d_lo0: Q,
    pub d_hi0: Q,
    pub delta: Vec<Q>,
    pub c: Q,
    pub p: Q,
    pub v: Vec<Q>,
}

/// What the closed-form solvers changed before applying the formulas.
#[derive(Clone, Debug, PartialEq)]
pub struct Preprocessing {
    pub original_d0: (Q, Q),
    pub original_delta: Vec<Q>,
    /// `Some(ΣV)` when the initial interval was clamped to the total supply.
    pub clamped_to: Option<Q>,
    pub delta_changed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Regret,
    Cr,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Threshold {
    Regret(Q),
    Cr(Q),
}

/// Running minimum of `delta`, capped by the initial width.
pub fn normalize_delta(width: &Q, delta: &[Q]) -> Vec<Q> {
    let mut cur = width.clone();
    delta
        .iter()
        .map(|d| {
            if *d < cur {
                cur = d.clone();
            }
            cur.clone()
        })
        .collect()
}

impl RmowpInstance {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.t == 0 {
            bad.push("T must be at least 1".to_string());
        }
        if self.delta.len() != self.t || self.v.len() != self.t {
            bad.push(format!("delta and V need {} entries", self.t));
        }
        if self.d_lo0.is_negative() || self.d_lo0 > self.d_hi0 {
            bad.push("need 0 <= d_lo0 <= d_hi0".into());
        }
        if self.delta.iter().any(Signed::is_negative) {
            bad.push("delta entries must be non-negative".into());
        }
        if self.v.iter().any(Signed::is_negative) {
            bad.push("V entries must be non-negative".into());
        }
        if !self.c.is_positive() || self.p <= self.c {
            bad.push("need 0 < c < p".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }

    pub fn total_supply(&self) -> Q {
        self.v.iter().fold(Q::zero(), |a, b| a + b)
    }

    /// `Σ_{s>t} V_s` for day `t` (1-based).
    pub fn supply_after(&self, t: usize) -> Q {
        self.v[t..].iter().fold(Q::zero(), |a, b| a + b)
    }

    /// Same instance with `delta` replaced by its running minimum (no clamp).
    pub fn with_nested_delta(&self) -> RmowpInstance {
        let mut out = self.clone();
        out.delta = normalize_delta(&(&self.d_hi0 - &self.d_lo0), &self.delta);
        out
    }

    /// Clamps both interval ends to `ΣV`, then normalizes `delta`.
    pub fn preprocess(&self) -> Result<(RmowpInstance, Preprocessing)> {
        self.validate()?;
        let total = self.total_supply();
        let mut out = self.clone();
        let mut clamped_to = None;
        if self.d_hi0 > total {
            clamped_to = Some(total.clone());
            out.d_hi0 = total.clone();
            if out.d_lo0 > total {
                out.d_lo0 = total;
            }
        }
        out.delta = normalize_delta(&(&out.d_hi0 - &out.d_lo0), &self.delta);
        let pre = Preprocessing {
            original_d0: (self.d_lo0.clone(), self.d_hi0.clone()),
            original_delta: self.delta.clone(),
            clamped_to,
            delta_changed: out.delta != self.delta,
        };
        Ok((out, pre))
    }
}

/// `(p−c)·min(ΣV, d)`.
pub fn hindsight_profit(inst: &RmowpInstance, d: &Q) -> Q {
    let total = inst.total_supply();
    (&inst.p - &inst.c) * if *d < total { d.clone() } else { total }
}

pub fn profit(inst: &RmowpInstance, x: &Q, d: &Q) -> Q {
    let sold = if d < x { d.clone() } else { x.clone() };
    &inst.p * sold - &inst.c * x
}

pub fn regret_at(inst: &RmowpInstance, x: &Q, d: &Q) -> Q {
    hindsight_profit(inst, d) - profit(inst, x, d)
}

/// Competitive ratio at demand `d`; for `d = 0` the limit `d → 0⁺`.
pub fn cr_at(inst: &RmowpInstance, x: &Q, d: &Q) -> Ext<Q> {
    if d.is_positive() {
        Fin(profit(inst, x, d) / hindsight_profit(inst, d))
    } else if x.is_zero() {
        Fin(Q::zero())
    } else {
        NegInf
    }
}

/// Optimal robust regret and the day attaining the inner maximum.
pub fn regret_star_detail(inst: &RmowpInstance) -> Result<(Q, usize, Preprocessing)> {
    let (n, pre) = inst.preprocess()?;
    let (best, day) = (1..=n.t)
        .map(|t| (&n.delta[t - 1] - n.supply_after(t), t))
        .fold(None::<(Q, usize)>, |acc, (v, t)| match acc {
            Some((b, d)) if b >= v => Some((b, d)),
            _ => Some((v, t)),
        })
        .expect("T >= 1");
    let gamma = &n.c * (&n.p - &n.c) / &n.p * best;
    Ok((if gamma.is_negative() { Q::zero() } else { gamma }, day, pre))
}

pub fn regret_star(inst: &RmowpInstance) -> Result<Q> {
    regret_star_detail(inst).map(|r| r.0)
}

/// Optimal robust competitive ratio, capped at 1, and the minimizing day.
/// Terms with a zero denominator are skipped.
pub fn cr_star_detail(inst: &RmowpInstance) -> Result<(Q, usize, Preprocessing)> {
    let (n, pre) = inst.preprocess()?;
    let mut best = Q::one();
    let mut day = 0;
    for t in 1..=n.t {
        let den = &n.p * &n.d_lo0 + &n.c * &n.delta[t - 1];
        if den.is_zero() {
            continue;
        }
        let v = (&n.p * &n.d_lo0 + &n.c * n.supply_after(t)) / den;
        if v < best {
            best = v;
            day = t;
        }
    }
    Ok((best, day, pre))
}

pub fn cr_star(inst: &RmowpInstance) -> Result<Q> {
    cr_star_detail(inst).map(|r| r.0)
}

// ---------------------------------------------------------------------------
// Policies.
// ---------------------------------------------------------------------------

/// Ordering rule on day `t` given the revealed interval and inventory.
pub trait OrderPolicy {
    fn order(&self, t: usize, interval: &(Q, Q), x: &Q) -> Q;
}

impl<F: Fn(usize, &(Q, Q), &Q) -> Q> OrderPolicy for F {
    fn order(&self, t: usize, interval: &(Q, Q), x: &Q) -> Q {
        self(t, interval, x)
    }
}

/// `a_t = clamp(scale·d̲_t + offset − x_t, 0, V_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetPolicy {
    pub scale: Rat,
    pub offset: Rat,
    #[serde(rename = "V")]
    pub v: Vec<Rat>,
}

impl TargetPolicy {
    pub fn target(&self, lo: &Q) -> Q {
        &self.scale.0 * lo + &self.offset.0
    }
}

impl OrderPolicy for TargetPolicy {
    fn order(&self, t: usize, interval: &(Q, Q), x: &Q) -> Q {
        clamp(self.target(&interval.0) - x, &Q::zero(), &self.v[t - 1].0)
    }
}

pub(crate) fn clamp(a: Q, lo: &Q, hi: &Q) -> Q {
    if a < *lo {
        lo.clone()
    } else if a > *hi {
        hi.clone()
    } else {
        a
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub day: usize,
    pub interval: (Rat, Rat),
    pub order: Rat,
}

/// Explicit `(day, interval) → order` table; unknown keys order `default`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TablePolicy {
    pub entries: Vec<TableEntry>,
    pub default: Rat,
}

impl TablePolicy {
    pub fn new(entries: &[(usize, (Q, Q), Q)]) -> Self {
        TablePolicy {
            entries: entries
                .iter()
                .map(|(day, (lo, hi), a)| TableEntry {
                    day: *day,
                    interval: (Rat(lo.clone()), Rat(hi.clone())),
                    order: Rat(a.clone()),
                })
                .collect(),
            default: Rat(Q::zero()),
        }
    }
}

impl OrderPolicy for TablePolicy {
    fn order(&self, t: usize, interval: &(Q, Q), _x: &Q) -> Q {
        self.entries
            .iter()
            .find(|e| e.day == t && e.interval.0 .0 == interval.0 && e.interval.1 .0 == interval.1)
            .map_or_else(|| self.default.0.clone(), |e| e.order.0.clone())
    }
}

/// `π_t = min{V_t, Γ*/c + d̲_t − x_t}`, clamped at 0.
pub fn regret_policy(inst: &RmowpInstance) -> Result<TargetPolicy> {
    let gamma = regret_star(inst)?;
    Ok(TargetPolicy { scale: Rat(Q::one()), offset: Rat(gamma / &inst.c), v: to_rats(&inst.v) })
}

/// `π_t = min{V_t, d̲_t·((1−Φ*)p + Φ*c)/c − x_t}`, clamped at 0.
pub fn cr_policy(inst: &RmowpInstance) -> Result<TargetPolicy> {
    let phi = cr_star(inst)?;
    cr_policy_at(inst, &phi)
}

pub fn cr_policy_at(inst: &RmowpInstance, phi: &Q) -> Result<TargetPolicy> {
    inst.validate()?;
    let scale = ((Q::one() - phi) * &inst.p + phi * &inst.c) / &inst.c;
    Ok(TargetPolicy { scale: Rat(scale), offset: Rat(Q::zero()), v: to_rats(&inst.v) })
}

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSequence {
    pub intervals: Vec<(Q, Q)>,
}

impl PredictionSequence {
    /// Nesting and length bounds against the instance's original data.
    pub fn validate(&self, inst: &RmowpInstance) -> Result<()> {
        if self.intervals.len() != inst.t {
            return Err(invalid(format!("need {} intervals", inst.t)));
        }
        let mut prev = (inst.d_lo0.clone(), inst.d_hi0.clone());
        for (k, (lo, hi)) in self.intervals.iter().enumerate() {
            if lo > hi || *lo < prev.0 || *hi > prev.1 {
                return Err(invalid(format!("interval of day {} is not nested", k + 1)));
            }
            if hi - lo > inst.delta[k] {
                return Err(invalid(format!("interval of day {} exceeds its error bound", k + 1)));
            }
            prev = (lo.clone(), hi.clone());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub actions: Vec<Q>,
    pub x_final: Q,
    pub profit: Q,
    pub regret: Q,
    /// `None` when the hindsight profit is 0.
    pub cr: Option<Q>,
    /// Days whose action left `[0, V_t]`.
    pub violations: Vec<usize>,
}

pub fn evaluate<P: OrderPolicy + ?Sized>(
    inst: &RmowpInstance,
    policy: &P,
    seq: &PredictionSequence,
    d: &Q,
) -> Result<Evaluation> {
    inst.validate()?;
    seq.validate(inst)?;
    let last = seq.intervals.last().expect("T >= 1");
    if *d < last.0 || *d > last.1 {
        return Err(precondition("demand outside the final interval"));
    }
    let (actions, x, violations) = roll(inst, policy, &seq.intervals);
    let pr = profit(inst, &x, d);
    let h = hindsight_profit(inst, d);
    let cr = if h.is_zero() { None } else { Some(&pr / &h) };
    Ok(Evaluation { regret: &h - &pr, actions, x_final: x, profit: pr, cr, violations })
}

fn roll<P: OrderPolicy + ?Sized>(inst: &RmowpInstance, policy: &P, seq: &[(Q, Q)]) -> (Vec<Q>, Q, Vec<usize>) {
    let mut x = Q::zero();
    let mut actions = Vec::with_capacity(seq.len());
    let mut violations = Vec::new();
    for (k, iv) in seq.iter().enumerate() {
        let a = policy.order(k + 1, iv, &x);
        if a.is_negative() || a > inst.v[k] {
            violations.push(k + 1);
        }
        x += &a;
        actions.push(a);
    }
    (actions, x, violations)
}

// ---------------------------------------------------------------------------
// Adversary search.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceFamily {
    /// All regular sequences with endpoints on the grid.
    Grid,
    /// The `T+1` single-switching sequences.
    SingleSwitching,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceValue {
    pub seq: Vec<(Q, Q)>,
    pub x_final: Q,
    pub value: Ext<Q>,
    pub worst_d: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryResult {
    /// Largest regret or smallest competitive ratio found.
    pub value: Ext<Q>,
    pub worst: SequenceValue,
    /// Every sequence examined, for the single-switching family only.
    pub per_sequence: Vec<SequenceValue>,
    pub sequences_examined: u64,
}

/// Grid `{lo, hi} ∪ {k·step : lo < k·step < hi}`, sorted.
pub fn grid_points(lo: &Q, hi: &Q, step: &Q) -> Result<Vec<Q>> {
    if !step.is_positive() {
        return Err(precondition("grid step must be positive"));
    }
    let mut pts = vec![lo.clone()];
    let mut k: num_bigint::BigInt = (lo / step).floor().to_integer() + 1;
    loop {
        let x = Q::from_integer(k.clone()) * step;
        if x >= *hi {
            break;
        }
        if x > *lo {
            pts.push(x);
        }
        k += 1;
    }
    if hi > lo {
        pts.push(hi.clone());
    }
    Ok(pts)
}

/// `P^(k)`: shrink from the left for days `≤ k`, from the right afterwards.
pub fn single_switching(inst: &RmowpInstance, k: usize) -> Vec<(Q, Q)> {
    let n = inst.with_nested_delta();
    let mut prev = (n.d_lo0.clone(), n.d_hi0.clone());
    (1..=n.t)
        .map(|t| {
            let dt = &n.delta[t - 1];
            let next = if t <= k { (&prev.1 - dt, prev.1.clone()) } else { (prev.0.clone(), &prev.0 + dt) };
            prev = next.clone();
            next
        })
        .collect()
}

/// Exact worst case over `d` in the final interval for a fixed order total.
pub fn worst_demand(inst: &RmowpInstance, x: &Q, lo: &Q, hi: &Q, metric: Metric) -> (Ext<Q>, Q) {
    let total = inst.total_supply();
    let mut cands = vec![lo.clone(), hi.clone()];
    for c in [x.clone(), total] {
        if c > *lo && c < *hi {
            cands.push(c);
        }
    }
    let mut best: Option<(Ext<Q>, Q)> = None;
    for d in cands {
        let v = match metric {
            Metric::Regret => Fin(regret_at(inst, x, &d)),
            Metric::Cr => cr_at(inst, x, &d),
        };
        let better = match (&best, metric) {
            (None, _) => true,
            (Some((b, _)), Metric::Regret) => v > *b,
            (Some((b, _)), Metric::Cr) => v < *b,
        };
        if better {
            best = Some((v, d));
        }
    }
    best.expect("at least one candidate")
}

pub fn adversary_search<P: OrderPolicy + ?Sized>(
    inst: &RmowpInstance,
    policy: &P,
    grid_step: &Q,
    metric: Metric,
    family: SequenceFamily,
    node_cap: u64,
) -> Result<AdversaryResult> {
    inst.validate()?;
    let n = inst.with_nested_delta();
    let score = |seq: Vec<(Q, Q)>| -> SequenceValue {
        let (_, x, _) = roll(inst, policy, &seq);
        let last = seq.last().expect("T >= 1").clone();
        let (value, worst_d) = worst_demand(inst, &x, &last.0, &last.1, metric);
        SequenceValue { seq, x_final: x, value, worst_d }
    };
    let worse = |a: &SequenceValue, b: &SequenceValue| match metric {
        Metric::Regret => a.value > b.value,
        Metric::Cr => a.value < b.value,
    };
    match family {
        SequenceFamily::SingleSwitching => {
            let per: Vec<SequenceValue> = (0..=n.t).map(|k| score(single_switching(inst, k))).collect();
            let mut worst = per[0].clone();
            for s in &per[1..] {
                if worse(s, &worst) {
                    worst = s.clone();
                }
            }
            Ok(AdversaryResult { value: worst.value.clone(), worst, per_sequence: per, sequences_examined: n.t as u64 + 1 })
        }
        SequenceFamily::Grid => {
            let pts = grid_points(&n.d_lo0, &n.d_hi0, grid_step)?;
            let mut worst: Option<SequenceValue> = None;
            let mut count = 0u64;
            let mut seq = Vec::with_capacity(n.t);
            let mut stack_err = None;
            dfs(&n, &pts, 0, pts.len() - 1, &mut seq, &mut |s: &[(Q, Q)]| {
                count += 1;
                if count > node_cap {
                    stack_err = Some(Error::NodeCap { cap: node_cap });
                    return false;
                }
                let sv = score(s.to_vec());
                if worst.as_ref().is_none_or(|w| worse(&sv, w)) {
                    worst = Some(sv);
                }
                true
            });
            if let Some(e) = stack_err {
                return Err(e);
            }
            let worst = worst.ok_or_else(|| precondition("no grid sequence exists"))?;
            Ok(AdversaryResult { value: worst.value.clone(), worst, per_sequence: Vec::new(), sequences_examined: count })
        }
    }
}

fn dfs(
    n: &RmowpInstance,
    pts: &[Q],
    i: usize,
    j: usize,
    seq: &mut Vec<(Q, Q)>,
    visit: &mut dyn FnMut(&[(Q, Q)]) -> bool,
) -> bool {
    let t = seq.len();
    if t == n.t {
        return visit(seq);
    }
    for e in i..=j {
        for f in e..=j {
            if &pts[f] - &pts[e] > n.delta[t] {
                break;
            }
            seq.push((pts[e].clone(), pts[f].clone()));
            let go = dfs(n, pts, e, f, seq, visit);
            seq.pop();
            if !go {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Reduction to a finite minimax-MDP.
// ---------------------------------------------------------------------------

/// Grid reduction with everything but the terminal bounds fixed.
/// MDP time `k` is day `k − 1`; environment states are grid intervals on
/// days `0..=T` and grid demands on day `T+1`.
#[derive(Clone, Debug)]
pub struct ReductionSkeleton {
    pub inst: RmowpInstance,
    pub points: Vec<Q>,
    /// Interval states per day `0..=T`, as point-index pairs.
    pub intervals: Vec<Vec<(usize, usize)>>,
    /// Point indices of the day-`T+1` demand states.
    pub demands: Vec<usize>,
    succ: Vec<Vec<Vec<usize>>>,
}

impl ReductionSkeleton {
    pub fn new(inst: &RmowpInstance, grid_step: &Q, node_cap: u64) -> Result<Self> {
        let (n, _) = inst.preprocess()?;
        let points = grid_points(&n.d_lo0, &n.d_hi0, grid_step)?;
        let last = points.len() - 1;
        let mut intervals = vec![vec![(0usize, last)]];
        let mut succ = Vec::with_capacity(n.t + 1);
        let mut edges = 0u64;
        for t in 1..=n.t {
            let mut index: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::new();
            let mut out = Vec::with_capacity(intervals[t - 1].len());
            for &(i, j) in &intervals[t - 1] {
                let mut kids = Vec::new();
                for e in i..=j {
                    for f in e..=j {
                        if &points[f] - &points[e] > n.delta[t - 1] {
                            break;
                        }
                        let id = *index.entry((e, f)).or_insert_with(|| {
                            next.push((e, f));
                            next.len() - 1
                        });
                        kids.push(id);
                    }
                }
                edges += kids.len() as u64;
                if edges > node_cap {
                    return Err(Error::NodeCap { cap: node_cap });
                }
                out.push(kids);
            }
            succ.push(out);
            intervals.push(next);
        }
        let mut demands: Vec<usize> = intervals[n.t].iter().flat_map(|&(i, j)| i..=j).collect();
        demands.sort_unstable();
        demands.dedup();
        let pos: HashMap<usize, usize> = demands.iter().enumerate().map(|(k, &d)| (d, k)).collect();
        succ.push(intervals[n.t].iter().map(|&(i, j)| (i..=j).map(|d| pos[&d]).collect()).collect());
        Ok(ReductionSkeleton { inst: n, points, intervals, demands, succ })
    }

    pub fn state_count(&self) -> usize {
        self.intervals.iter().map(Vec::len).sum::<usize>() + self.demands.len()
    }

    pub fn interval(&self, day: usize, s: usize) -> (Q, Q) {
        let (i, j) = self.intervals[day][s];
        (self.points[i].clone(), self.points[j].clone())
    }

    pub fn terminal_bounds(&self, th: &Threshold, d: &Q) -> (Q, Q) {
        let (c, p) = (&self.inst.c, &self.inst.p);
        match th {
            Threshold::Regret(g) => (d - g / (p - c), d + g / c),
            Threshold::Cr(phi) => (d * phi, d * ((Q::one() - phi) * p + phi * c) / c),
        }
    }

    pub fn mdp(&self, th: &Threshold) -> Result<FiniteMinimaxMdp<Q>> {
        let n = &self.inst;
        let t_end = n.t + 1;
        let mut ids = Vec::with_capacity(t_end + 1);
        for (day, ivs) in self.intervals.iter().enumerate() {
            ids.push(
                ivs.iter()
                    .map(|&(i, j)| format!("{day}:[{},{}]", self.points[i], self.points[j]))
                    .collect::<Vec<_>>(),
            );
        }
        ids.push(self.demands.iter().map(|&k| format!("d={}", self.points[k])).collect());
        let mut u = Vec::with_capacity(t_end);
        let mut v = Vec::with_capacity(t_end);
        for day in 0..t_end {
            let cap = if day == 0 { Q::zero() } else { n.v[day - 1].clone() };
            u.push(vec![Q::zero(); self.intervals[day].len()]);
            v.push(vec![cap; self.intervals[day].len()]);
        }
        let mut l = vec![vec![Ext::zero()]];
        let mut r = vec![vec![Ext::zero()]];
        for day in 1..=n.t {
            l.push(vec![NegInf; self.intervals[day].len()]);
            r.push(vec![PosInf; self.intervals[day].len()]);
        }
        let (tl, tr): (Vec<_>, Vec<_>) = self
            .demands
            .iter()
            .map(|&k| {
                let (lo, hi) = self.terminal_bounds(th, &self.points[k]);
                (Fin(lo), Fin(hi))
            })
            .unzip();
        l.push(tl);
        r.push(tr);
        FiniteMinimaxMdp::new(MdpParts { ids, initial: 0, succ: self.succ.clone(), u, v, l, r })
    }
}

pub fn build_reduction_mdp(inst: &RmowpInstance, th: &Threshold, grid_step: &Q, node_cap: u64) -> Result<FiniteMinimaxMdp<Q>> {
    ReductionSkeleton::new(inst, grid_step, node_cap)?.mdp(th)
}

// ---------------------------------------------------------------------------
// Scale-linear predictions: interval length on day t is a_t·d̄_{t−1} + b_t.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleLinearInstance {
    pub t: usize,
    pub d_lo0: Q,
    pub d_hi0: Q,
    pub a: Vec<Q>,
    pub b: Vec<Q>,
    pub c: Q,
    pub p: Q,
    pub v: Vec<Q>,
}

impl ScaleLinearInstance {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.t == 0 || self.a.len() != self.t || self.b.len() != self.t || self.v.len() != self.t {
            bad.push(format!("a, b and V need T = {} entries", self.t));
        } else {
            let nonincreasing = |x: &[Q]| x.windows(2).all(|w| w[1] <= w[0]);
            if self.a.iter().chain(&self.b).any(Signed::is_negative) {
                bad.push("a and b must be non-negative".into());
            }
            if !nonincreasing(&self.a) || !nonincreasing(&self.b) {
                bad.push("a and b must be non-increasing".into());
            }
            if &self.d_hi0 - &self.d_lo0 < &self.a[0] * &self.d_hi0 + &self.b[0] {
                bad.push("need d_hi0 - d_lo0 >= a_1*d_hi0 + b_1".into());
            }
        }
        if self.d_lo0.is_negative() || self.d_lo0 > self.d_hi0 {
            bad.push("need 0 <= d_lo0 <= d_hi0".into());
        }
        if self.v.iter().any(Signed::is_negative) {
            bad.push("V entries must be non-negative".into());
        }
        if !self.c.is_positive() || self.p <= self.c {
            bad.push("need 0 < c < p".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }

    /// `d̄₀(1 − a_t) − b_t`, the left endpoint from which day `t` can keep `d̄₀`.
    pub fn breakpoint(&self, t: usize) -> Q {
        &self.d_hi0 * (Q::one() - &self.a[t - 1]) - &self.b[t - 1]
    }

    fn supply_after(&self, t: usize) -> Q {
        self.v[t..].iter().fold(Q::zero(), |a, b| a + b)
    }
}

/// Largest right endpoint reachable at day `τ` with left endpoint `e`, by the
/// day-by-day recursion `f_i = min(d̄₀, e + a_i·f_{i−1} + b_i)`, `f_0 = d̄₀`.
pub fn scale_linear_recursion(inst: &ScaleLinearInstance, tau: usize, e: &Q) -> Result<Q> {
    inst.validate()?;
    check_tau_e(inst, tau, e)?;
    let mut f = inst.d_hi0.clone();
    for i in 1..=tau {
        let cand = e + &inst.a[i - 1] * &f + &inst.b[i - 1];
        f = if cand < inst.d_hi0 { cand } else { inst.d_hi0.clone() };
    }
    Ok(f)
}

fn check_tau_e(inst: &ScaleLinearInstance, tau: usize, e: &Q) -> Result<()> {
    if tau == 0 || tau > inst.t {
        return Err(precondition(format!("tau must lie in 1..={}", inst.t)));
    }
    if *e < inst.d_lo0 || *e > inst.d_hi0 {
        return Err(precondition("e must lie in the initial interval"));
    }
    Ok(())
}

/// Closed form of the same quantity: on the region of the smallest `t ≤ τ`
/// with `e ≤ d̄₀(1−a_t) − b_t`, `g_τ(e) = e·D₁(τ, t+1) + D₂(τ, t)`; `d̄₀` if
/// no such `t` exists.
pub fn scale_linear_g(inst: &ScaleLinearInstance, tau: usize, e: &Q) -> Result<Q> {
    inst.validate()?;
    check_tau_e(inst, tau, e)?;
    let Some(t) = (1..=tau).find(|&t| *e <= inst.breakpoint(t)) else {
        return Ok(inst.d_hi0.clone());
    };
    let a = |j: usize| &inst.a[j - 1];
    let prod = |from: usize| (from..=tau).fold(Q::one(), |acc, j| acc * a(j));
    let d1 = (t + 1..=tau).fold(Q::one(), |acc, i| acc + prod(i));
    let mut d2 = &inst.d_hi0 * prod(t) + &inst.b[tau - 1];
    for i in t..tau {
        d2 += &inst.b[i - 1] * prod(i + 1);
    }
    Ok(e * d1 + d2)
}

/// `(cΣ_{i>τ}V_i + p·e) / ((p−c)·e + c·g_τ(e))`, with `0/0` read as 1.
pub fn scale_linear_ratio(inst: &ScaleLinearInstance, tau: usize, e: &Q, g: &Q) -> Q {
    let num = &inst.c * inst.supply_after(tau) + &inst.p * e;
    let den = (&inst.p - &inst.c) * e + &inst.c * g;
    if den.is_zero() {
        Q::one()
    } else {
        num / den
    }
}

/// Minimum of the ratio over `τ` and the candidate left endpoints, capped at 1.
pub fn scale_linear_cr_star(inst: &ScaleLinearInstance) -> Result<Q> {
    inst.validate()?;
    let mut best = Q::one();
    for tau in 1..=inst.t {
        let mut cands = vec![inst.d_lo0.clone()];
        for t in 1..=tau {
            let e = inst.breakpoint(t);
            if e >= inst.d_lo0 && e <= inst.d_hi0 {
                cands.push(e);
            }
        }
        for e in cands {
            let g = scale_linear_g(inst, tau, &e)?;
            let r = scale_linear_ratio(inst, tau, &e, &g);
            if r < best {
                best = r;
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// JSON.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmowpJson {
    #[serde(rename = "T")]
    pub t: usize,
    pub d0: (Rat, Rat),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<Rat>>,
    pub c: Rat,
    pub p: Rat,
    #[serde(rename = "V")]
    pub v: Vec<Rat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Rat>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Rat>>,
}

impl RmowpJson {
    pub fn regular(&self) -> Result<RmowpInstance> {
        let delta = self.delta.as_ref().ok_or_else(|| invalid("missing field delta"))?;
        let inst = RmowpInstance {
            t: self.t,
            d_lo0: self.d0.0 .0.clone(),
            d_hi0: self.d0.1 .0.clone(),
            delta: rats(delta),
            c: self.c.0.clone(),
            p: self.p.0.clone(),
            v: rats(&self.v),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn scale_linear(&self) -> Result<ScaleLinearInstance> {
        let (Some(a), Some(b)) = (&self.a, &self.b) else {
            return Err(invalid("scale-linear instances need fields a and b"));
        };
        let inst = ScaleLinearInstance {
            t: self.t,
            d_lo0: self.d0.0 .0.clone(),
            d_hi0: self.d0.1 .0.clone(),
            a: rats(a),
            b: rats(b),
            c: self.c.0.clone(),
            p: self.p.0.clone(),
            v: rats(&self.v),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_regular(inst: &RmowpInstance) -> Self {
        RmowpJson {
            t: inst.t,
            d0: (Rat(inst.d_lo0.clone()), Rat(inst.d_hi0.clone())),
            delta: Some(to_rats(&inst.delta)),
            c: Rat(inst.c.clone()),
            p: Rat(inst.p.clone()),
            v: to_rats(&inst.v),
            a: None,
            b: None,
        }
    }
}

/// The two-day instance with `[1,4]`, `Δ = (3,1)`, `c = 1`, `p = 2`, `V = (2,2)`.
pub fn example_two_day() -> RmowpInstance {
    RmowpInstance { t: 2, d_lo0: qi(1), d_hi0: qi(4), delta: vec![qi(3), qi(1)], c: qi(1), p: qi(2), v: vec![qi(2), qi(2)] }
}

/// The three-day instance with `[1,7]`, `Δ = (5,4,1)`, `c = 1`, `p = 2`,
/// `V = (4,2,1)`.
pub fn example_three_day() -> RmowpInstance {
    RmowpInstance {
        t: 3,
        d_lo0: qi(1),
        d_hi0: qi(7),
        delta: vec![qi(5), qi(4), qi(1)],
        c: qi(1),
        p: qi(2),
        v: vec![qi(4), qi(2), qi(1)],
    }
}

/// Policy that beats 2/3 against every single-switching sequence of
/// [`example_three_day`].
pub fn three_day_switching_policy() -> TablePolicy {
    let r = |n: i64, d: i64| crate::scalar::q(n, d);
    TablePolicy::new(&[
        (1, (qi(1), qi(6)), r(4, 3)),
        (2, (qi(1), qi(5)), qi(0)),
        (3, (qi(1), qi(2)), qi(0)),
        (1, (qi(2), qi(7)), r(13, 5)),
        (2, (qi(2), qi(6)), qi(0)),
        (2, (qi(3), qi(7)), r(13, 10)),
        (3, (qi(2), qi(3)), qi(0)),
        (3, (qi(3), qi(4)), qi(0)),
        (3, (qi(6), qi(7)), qi(1)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::check_feasible_fast;
    use crate::scalar::q;

    const CAP: u64 = 10_000_000;

    #[test]
    fn hindsight_examples() {
        let inst = RmowpInstance { t: 2, d_lo0: qi(0), d_hi0: qi(5), delta: vec![qi(1), qi(1)], c: qi(1), p: qi(2), v: vec![qi(2), qi(2)] };
        assert_eq!(hindsight_profit(&inst, &qi(0)), qi(0));
        assert_eq!(hindsight_profit(&inst, &qi(3)), qi(3));
        assert_eq!(hindsight_profit(&inst, &qi(9)), qi(4));
    }

    #[test]
    fn closed_forms_on_the_two_day_instance() {
        let two_day = example_two_day();
        assert_eq!(regret_star(&two_day).unwrap(), q(1, 2));
        assert_eq!(cr_star(&two_day).unwrap(), q(2, 3));
        let pi = regret_policy(&two_day).unwrap();
        assert_eq!(pi.order(1, &(qi(1), qi(4)), &qi(0)), q(3, 2));
        let pi = cr_policy(&two_day).unwrap();
        assert_eq!(pi.order(1, &(qi(1), qi(4)), &qi(0)), q(4, 3));
        assert_eq!(pi.order(1, &(qi(1), qi(4)), &qi(2)), qi(0));
    }

    #[test]
    fn perfect_predictions() {
        let mut two_day = example_two_day();
        two_day.delta = vec![qi(0), qi(0)];
        assert_eq!(regret_star(&two_day).unwrap(), qi(0));
        assert_eq!(cr_star(&two_day).unwrap(), qi(1));
    }

    #[test]
    fn regret_is_homogeneous_in_prices() {
        let mut two_day = example_two_day();
        let base = regret_star(&two_day).unwrap();
        two_day.c = qi(3);
        two_day.p = qi(6);
        assert_eq!(regret_star(&two_day).unwrap(), base * qi(3));
    }

    #[test]
    fn three_day_formula_value() {
        assert_eq!(cr_star(&example_three_day()).unwrap(), q(1, 2));
    }

    #[test]
    fn three_day_single_switching() {
        let three_day = example_three_day();
        assert_eq!(single_switching(&three_day, 0), vec![(qi(1), qi(6)), (qi(1), qi(5)), (qi(1), qi(2))]);
        assert_eq!(single_switching(&three_day, 3), vec![(qi(2), qi(7)), (qi(3), qi(7)), (qi(6), qi(7))]);
        let r = adversary_search(&three_day, &three_day_switching_policy(), &qi(1), Metric::Cr, SequenceFamily::SingleSwitching, CAP).unwrap();
        let vals: Vec<_> = r.per_sequence.iter().map(|s| s.value.clone()).collect();
        assert_eq!(vals, vec![Fin(q(2, 3)), Fin(q(7, 10)), Fin(q(7, 10)), Fin(q(7, 10))]);
        assert_eq!(r.value, Fin(q(2, 3)));
    }

    #[test]
    fn evaluate_examples() {
        let three_day = example_three_day();
        let seq = PredictionSequence { intervals: single_switching(&three_day, 1) };
        let ev = evaluate(&three_day, &three_day_switching_policy(), &seq, &qi(2)).unwrap();
        assert_eq!(ev.cr, Some(q(7, 10)));
        let zero = |_: usize, _: &(Q, Q), _: &Q| Q::zero();
        let two_day = RmowpInstance { d_lo0: qi(0), ..example_two_day() };
        let seq = PredictionSequence { intervals: vec![(qi(0), qi(3)), (qi(0), qi(1))] };
        let ev = evaluate(&two_day, &zero, &seq, &qi(0)).unwrap();
        assert_eq!((ev.profit, ev.regret, ev.cr), (qi(0), qi(0), None));
        let all = |_: usize, _: &(Q, Q), _: &Q| qi(2);
        let seq = PredictionSequence { intervals: vec![(qi(1), qi(4)), (qi(3), qi(4))] };
        let ev = evaluate(&example_two_day(), &all, &seq, &qi(4)).unwrap();
        assert_eq!((ev.regret, ev.cr), (qi(0), Some(qi(1))));
    }

    #[test]
    fn adversary_respects_guarantees_on_the_two_day_instance() {
        let two_day = example_two_day();
        let r = adversary_search(&two_day, &regret_policy(&two_day).unwrap(), &q(1, 2), Metric::Regret, SequenceFamily::Grid, CAP).unwrap();
        assert!(r.value <= Fin(q(1, 2)));
        let r = adversary_search(&two_day, &cr_policy(&two_day).unwrap(), &q(1, 4), Metric::Cr, SequenceFamily::Grid, CAP).unwrap();
        assert!(r.value >= Fin(q(2, 3)));
    }

    #[test]
    fn reduction_thresholds_on_the_two_day_instance() {
        let two_day = example_two_day();
        let feas = |th: Threshold, g: Q| check_feasible_fast(&build_reduction_mdp(&two_day, &th, &g, CAP).unwrap()).is_feasible();
        assert!(feas(Threshold::Regret(q(1, 2)), q(1, 2)));
        assert!(!feas(Threshold::Regret(q(1, 4)), q(1, 2)));
        assert!(feas(Threshold::Regret(qi(100)), q(1, 2)));
        assert!(feas(Threshold::Cr(q(2, 3)), q(1, 4)));
        assert!(!feas(Threshold::Cr(q(3, 4)), q(1, 4)));
    }

    #[test]
    fn scale_linear_examples() {
        let inst = ScaleLinearInstance { t: 1, d_lo0: qi(0), d_hi0: qi(8), a: vec![q(1, 2)], b: vec![qi(0)], c: qi(1), p: qi(2), v: vec![qi(8)] };
        assert_eq!(scale_linear_g(&inst, 1, &qi(2)).unwrap(), qi(6));
        assert_eq!(scale_linear_g(&inst, 1, &qi(6)).unwrap(), qi(8));
        let inst = ScaleLinearInstance { d_lo0: qi(1), ..inst };
        assert_eq!(scale_linear_cr_star(&inst).unwrap(), q(1, 3));
    }

    #[test]
    fn scale_linear_reduces_to_regular() {
        let two_day = example_two_day();
        let sl = ScaleLinearInstance {
            t: 2,
            d_lo0: two_day.d_lo0.clone(),
            d_hi0: two_day.d_hi0.clone(),
            a: vec![qi(0), qi(0)],
            b: two_day.delta.clone(),
            c: two_day.c.clone(),
            p: two_day.p.clone(),
            v: two_day.v.clone(),
        };
        for k in 0..=12 {
            let e = qi(1) + q(k, 4);
            let g = scale_linear_g(&sl, 2, &e).unwrap();
            let want = std::cmp::min(qi(4), &e + qi(1));
            assert_eq!(g, want);
        }
        assert_eq!(scale_linear_cr_star(&sl).unwrap(), cr_star(&two_day).unwrap());
    }

    #[test]
    fn preprocessing_clamps_and_records() {
        let inst = RmowpInstance { t: 2, d_lo0: qi(0), d_hi0: qi(10), delta: vec![qi(3), qi(5)], c: qi(1), p: qi(2), v: vec![qi(2), qi(2)] };
        let (n, pre) = inst.preprocess().unwrap();
        assert_eq!(n.d_hi0, qi(4));
        assert_eq!(n.delta, vec![qi(3), qi(3)]);
        assert_eq!(pre.clamped_to, Some(qi(4)));
        assert!(pre.delta_changed);
    }

    #[test]
    fn json_round_trip() {
        let two_day = example_two_day();
        let j = RmowpJson::from_regular(&two_day);
        let text = serde_json::to_string(&j).unwrap();
        let back: RmowpJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.regular().unwrap(), two_day);
    }
}
