//! Multi-period ordering where the unit cost steps up between phases.
//!
//! Day `t` in phase `v` (`τ_{v−1} ≤ t < τ_v`) orders at cost `γ_v`. The
//! competitive-ratio problem at a fixed `Φ` is a monotonous G-linear
//! instance; the optimal `Φ` is found by bisection.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::glinear::{check_glinear, GLinearInstance, MAX_L_PIECES};
use crate::bisect::bisect;
use crate::error::{invalid, precondition, Result};
use crate::io::{rats, to_rats, Rat};
use crate::pwl::{range_max_cells, Pwl};
use crate::rmowp::{clamp, normalize_delta, PredictionSequence};
use crate::scalar::{ceil_log, qi, simplest_between, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct ChangingCostInstance {
    pub t: usize,
    pub k: usize,
    /// `τ₀ = 1 < … < τ_K = T + 1`.
    pub tau: Vec<usize>,
    pub d_lo0: Q,
    pub d_hi0: Q,
    pub delta: Vec<Q>,
    pub gamma: Vec<Q>,
    pub p: Q,
    pub v: Vec<Q>,
}

impl ChangingCostInstance {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let (t, k) = (self.t, self.k);
        if t == 0 || k == 0 {
            bad.push("T and K must be positive".to_string());
        }
        if self.tau.len() != k + 1
            || self.tau.first() != Some(&1)
            || self.tau.last() != Some(&(t + 1))
            || self.tau.windows(2).any(|w| w[0] >= w[1])
        {
            bad.push(format!("tau must increase strictly from 1 to T + 1 = {}", t + 1));
        }
        if self.delta.len() != t || self.delta.iter().any(Signed::is_negative) {
            bad.push(format!("need {t} non-negative error bounds"));
        }
        if self.v.len() != t || self.v.iter().any(Signed::is_negative) {
            bad.push(format!("need {t} non-negative supplies"));
        }
        if self.d_lo0.is_negative() || self.d_lo0 > self.d_hi0 {
            bad.push("d0 must satisfy 0 <= lo <= hi".into());
        }
        if self.gamma.len() != k || self.gamma.windows(2).any(|w| w[0] > w[1]) {
            bad.push(format!("need {k} non-decreasing costs"));
        } else {
            if !self.gamma[0].is_positive() {
                bad.push("the first cost must be positive".into());
            }
            if self.gamma[k - 1] >= self.p {
                bad.push("every cost must be below the price".into());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }

    pub fn phase_of(&self, day: usize) -> usize {
        (1..=self.k).find(|&v| day < self.tau[v]).expect("day within the horizon")
    }

    pub fn cost(&self, day: usize) -> &Q {
        &self.gamma[self.phase_of(day) - 1]
    }

    /// Adjacent phases with equal cost fused.
    pub fn merged(&self) -> Self {
        let mut tau = vec![1];
        let mut gamma = vec![self.gamma[0].clone()];
        for v in 1..self.k {
            if self.gamma[v] != self.gamma[v - 1] {
                tau.push(self.tau[v]);
                gamma.push(self.gamma[v].clone());
            }
        }
        tau.push(self.t + 1);
        ChangingCostInstance { k: gamma.len(), tau, gamma, ..self.clone() }
    }

    /// `Δ_0..Δ_{T+1}` with `Δ_0` the initial width, running minima in
    /// between and `Δ_{T+1} = 0`.
    pub fn full_delta(&self) -> Vec<Q> {
        let w = &self.d_hi0 - &self.d_lo0;
        let mut out = vec![w.clone()];
        out.extend(normalize_delta(&w, &self.delta));
        out.push(Q::zero());
        out
    }

    /// Best profit with the demand known up front.
    pub fn hindsight(&self, d: &Q) -> Q {
        let mut before = Q::zero();
        let mut total = Q::zero();
        for day in 1..=self.t {
            let vt = &self.v[day - 1];
            let left = d - &before;
            if left.is_positive() {
                total += (&self.p - self.cost(day)) * if left < *vt { left } else { vt.clone() };
            }
            before += vt;
        }
        total
    }

    /// The hindsight profit as a function of demand, extended linearly to
    /// the left of 0 and flat past the total supply.
    pub fn r_sharp(&self) -> Result<Pwl> {
        let mut pts = vec![(Q::zero(), Q::zero())];
        let mut s = Q::zero();
        for vt in &self.v {
            s += vt;
            if s > pts[pts.len() - 1].0 {
                pts.push((s.clone(), self.hindsight(&s)));
            }
        }
        let last = pts[pts.len() - 1].clone();
        pts.push((last.0 + Q::one(), last.1));
        Pwl::from_points(&pts, true)
    }
}

/// The instance at ratio `Φ` as a monotonous G-linear instance over the
/// left endpoint of full-length prediction intervals.
pub fn build_changing_cost_glinear(inst: &ChangingCostInstance, phi: &Q) -> Result<GLinearInstance> {
    inst.validate()?;
    if phi.is_negative() || *phi > Q::one() {
        return Err(precondition("the ratio must lie in [0, 1]"));
    }
    if inst.gamma.windows(2).any(|w| w[0] == w[1]) {
        return Err(precondition("merge phases with equal cost first"));
    }
    let target = inst.r_sharp()?.scale(phi)?;
    let l = if target.defined_piece_count() > MAX_L_PIECES {
        range_max_cells(&target, &Pwl::constant(Q::zero()), &Q::zero(), &Q::zero())?
    } else {
        vec![target.clone()]
    };
    let r1 = Pwl::linear(inst.p.clone(), Q::zero()).add(&target.scale(&qi(-1))?);
    let q = GLinearInstance {
        t: inst.t,
        tau: inst.tau.clone(),
        v: inst.v.clone(),
        delta: inst.full_delta(),
        s0: inst.d_lo0.clone(),
        a: vec![inst.gamma.iter().map(|g| &inst.p - g).collect(); l.len()],
        l,
        b: inst.gamma.clone(),
        g: r1.defined_piece_count(),
        r1,
    };
    q.validate()?;
    Ok(q)
}

/// Orders up to the cap `Σ_j γ_j·x_j ≤ p·s − Φ·R♯(s)` at the left endpoint
/// `s` of the smallest full-length interval covering the current one.
#[derive(Clone, Debug, PartialEq)]
pub struct ChangingCostPolicy {
    pub phi: Q,
    pub tau: Vec<usize>,
    pub gamma: Vec<Q>,
    pub v: Vec<Q>,
    pub delta: Vec<Q>,
    pub d_lo0: Q,
    pub r1: Pwl,
}

impl ChangingCostPolicy {
    pub fn new(inst: &ChangingCostInstance, phi: &Q) -> Result<Self> {
        let g = build_changing_cost_glinear(inst, phi)?;
        Ok(ChangingCostPolicy {
            phi: phi.clone(),
            tau: inst.tau.clone(),
            gamma: inst.gamma.clone(),
            v: inst.v.clone(),
            delta: g.delta,
            d_lo0: inst.d_lo0.clone(),
            r1: g.r1,
        })
    }

    /// Orders for every day of `seq`.
    pub fn actions(&self, seq: &PredictionSequence) -> Result<Vec<Q>> {
        let mut x = vec![Q::zero(); self.gamma.len()];
        let mut s = self.d_lo0.clone();
        let mut out = Vec::with_capacity(seq.intervals.len());
        for (k, (_, hi)) in seq.intervals.iter().enumerate() {
            let day = k + 1;
            let cand = hi - &self.delta[day];
            if cand > s {
                s = cand;
            }
            let ph = (1..self.tau.len()).find(|&v| day < self.tau[v]).ok_or_else(|| invalid("sequence too long"))?;
            let cap = self.r1.eval(&s).expect_finite("order cap")?;
            let used: Q = (0..ph - 1).map(|j| &self.gamma[j] * &x[j]).sum();
            let room = (cap - used) / &self.gamma[ph - 1] - &x[ph - 1];
            let a = clamp(room, &Q::zero(), &self.v[day - 1]);
            x[ph - 1] += &a;
            out.push(a);
        }
        Ok(out)
    }
}

/// Optimal ratio within `tol`, snapped to the simplest rational in the final
/// bracket when that rational is still feasible.
pub fn solve_changing_cost_cr(inst: &ChangingCostInstance, tol: &Q) -> Result<(Q, ChangingCostPolicy)> {
    if !tol.is_positive() {
        return Err(precondition("tolerance must be positive"));
    }
    inst.validate()?;
    let prep = inst.merged();
    let feasible = |phi: &Q| check_glinear(&build_changing_cost_glinear(&prep, phi)?);
    let phi = if feasible(&Q::one())? {
        Q::one()
    } else {
        let (bad, good) = bisect(Q::one(), Q::zero(), tol, feasible)?;
        let simple = simplest_between(&good, &bad);
        if simple != bad && feasible(&simple)? {
            simple
        } else {
            good
        }
    };
    let policy = ChangingCostPolicy::new(&prep, &phi)?;
    Ok((phi, policy))
}

/// `{γ₁(1+δ)^{i−1}} ∪ {p − (p−γ_K)(1+δ)^{N+1−i}}` for `i = 1..N`, sorted.
pub fn cost_grid(gamma1: &Q, gamma_k: &Q, p: &Q, delta: &Q) -> Result<Vec<Q>> {
    if !delta.is_positive() || !gamma1.is_positive() || gamma_k >= p || gamma1 > gamma_k {
        return Err(precondition("cost grid needs delta > 0 and 0 < gamma_1 <= gamma_K < p"));
    }
    let base = Q::one() + delta;
    let n = 3 + ceil_log(&base, &((p - gamma1) / (p - gamma_k))).max(ceil_log(&base, &(gamma_k / gamma1)));
    let mut grid = Vec::with_capacity(2 * n as usize);
    let mut pow = Q::one();
    let mut pows = Vec::with_capacity(n as usize + 1);
    for _ in 0..=n {
        pows.push(pow.clone());
        pow *= &base;
    }
    for i in 1..=n as usize {
        grid.push(gamma1 * &pows[i - 1]);
        grid.push(p - (p - gamma_k) * &pows[n as usize + 1 - i]);
    }
    grid.sort();
    grid.dedup();
    Ok(grid)
}

/// Every cost snapped down to the grid.
pub fn ptas_round_costs(inst: &ChangingCostInstance, delta: &Q) -> Result<ChangingCostInstance> {
    inst.validate()?;
    let k = inst.k;
    let grid = cost_grid(&inst.gamma[0], &inst.gamma[k - 1], &inst.p, delta)?;
    let gamma = inst
        .gamma
        .iter()
        .map(|g| grid.iter().filter(|x| *x <= g).max().cloned().expect("gamma_1 lies on the grid"))
        .collect();
    Ok(ChangingCostInstance { gamma, ..inst.clone() })
}

/// Solves the rounded instance at tolerance `ε/5` and reports its ratio
/// minus `3ε/5`; the policy is used unchanged on the original costs.
pub fn ptas_solve(inst: &ChangingCostInstance, eps: &Q) -> Result<(Q, ChangingCostPolicy)> {
    if !eps.is_positive() {
        return Err(precondition("epsilon must be positive"));
    }
    let delta = eps / qi(5);
    let rounded = ptas_round_costs(inst, &delta)?;
    let (phi, policy) = solve_changing_cost_cr(&rounded, &delta)?;
    let lowered = phi - qi(3) * &delta;
    Ok((if lowered.is_negative() { Q::zero() } else { lowered }, policy))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChangingEvaluation {
    pub actions: Vec<Q>,
    pub x_final: Q,
    pub profit: Q,
    pub hindsight: Q,
    /// `None` when the hindsight profit is 0.
    pub cr: Option<Q>,
    /// Days whose action left `[0, V_t]`.
    pub violations: Vec<usize>,
}

fn check_sequence(inst: &ChangingCostInstance, seq: &PredictionSequence, d: &Q) -> Result<()> {
    if seq.intervals.len() != inst.t {
        return Err(invalid(format!("need {} intervals", inst.t)));
    }
    let mut prev = (inst.d_lo0.clone(), inst.d_hi0.clone());
    for (k, (lo, hi)) in seq.intervals.iter().enumerate() {
        if lo > hi || *lo < prev.0 || *hi > prev.1 {
            return Err(invalid(format!("interval of day {} is not nested", k + 1)));
        }
        if hi - lo > inst.delta[k] {
            return Err(invalid(format!("interval of day {} exceeds its error bound", k + 1)));
        }
        prev = (lo.clone(), hi.clone());
    }
    if *d < prev.0 || *d > prev.1 {
        return Err(invalid("demand outside the last interval"));
    }
    Ok(())
}

/// Profit `p·min(d, X) − Σ c_t·a_t` of explicit `actions`.
pub fn evaluate_actions(inst: &ChangingCostInstance, actions: &[Q], d: &Q) -> ChangingEvaluation {
    let mut x = Q::zero();
    let mut spent = Q::zero();
    let mut violations = Vec::new();
    for (k, a) in actions.iter().enumerate() {
        if a.is_negative() || *a > inst.v[k] {
            violations.push(k + 1);
        }
        x += a;
        spent += inst.cost(k + 1) * a;
    }
    let sold = if *d < x { d.clone() } else { x.clone() };
    let profit = &inst.p * sold - spent;
    let hindsight = inst.hindsight(d);
    let cr = (!hindsight.is_zero()).then(|| &profit / &hindsight);
    ChangingEvaluation { actions: actions.to_vec(), x_final: x, profit, hindsight, cr, violations }
}

pub fn changing_cost_evaluate(
    inst: &ChangingCostInstance,
    policy: &ChangingCostPolicy,
    seq: &PredictionSequence,
    d: &Q,
) -> Result<ChangingEvaluation> {
    inst.validate()?;
    check_sequence(inst, seq, d)?;
    Ok(evaluate_actions(inst, &policy.actions(seq)?, d))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangingCostJson {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub tau: Vec<usize>,
    pub d0: (Rat, Rat),
    pub delta: Vec<Rat>,
    pub gamma: Vec<Rat>,
    pub p: Rat,
    #[serde(rename = "V")]
    pub v: Vec<Rat>,
}

impl ChangingCostJson {
    pub fn instance(&self) -> Result<ChangingCostInstance> {
        let inst = ChangingCostInstance {
            t: self.t,
            k: self.k,
            tau: self.tau.clone(),
            d_lo0: self.d0.0 .0.clone(),
            d_hi0: self.d0.1 .0.clone(),
            delta: rats(&self.delta),
            gamma: rats(&self.gamma),
            p: self.p.0.clone(),
            v: rats(&self.v),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_instance(inst: &ChangingCostInstance) -> Self {
        ChangingCostJson {
            t: inst.t,
            k: inst.k,
            tau: inst.tau.clone(),
            d0: (Rat(inst.d_lo0.clone()), Rat(inst.d_hi0.clone())),
            delta: to_rats(&inst.delta),
            gamma: to_rats(&inst.gamma),
            p: Rat(inst.p.clone()),
            v: to_rats(&inst.v),
        }
    }
}

/// Two days, one per phase: `γ = (1, 2)`, `p = 3`, `V = (1, 1)`,
/// `d₀ = [0, 2]`, `Δ = (2, 1)`.
pub fn example_two_phase() -> ChangingCostInstance {
    ChangingCostInstance {
        t: 2,
        k: 2,
        tau: vec![1, 2, 3],
        d_lo0: qi(0),
        d_hi0: qi(2),
        delta: vec![qi(2), qi(1)],
        gamma: vec![qi(1), qi(2)],
        p: qi(3),
        v: vec![qi(1), qi(1)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rmowp::{cr_star, RmowpInstance};
    use crate::scalar::q;

    #[test]
    fn hindsight_values() {
        let inst = example_two_phase();
        assert_eq!(inst.hindsight(&q(3, 2)), q(5, 2));
        assert_eq!(inst.hindsight(&qi(0)), qi(0));
        let r = inst.r_sharp().unwrap();
        for d in [qi(0), q(1, 2), qi(1), q(3, 2), qi(2), qi(5)] {
            assert_eq!(r.eval(&d), crate::Ext::Fin(inst.hindsight(&d)));
        }
    }

    #[test]
    fn validation_rejects_bad_costs() {
        let mut inst = example_two_phase();
        inst.gamma = vec![qi(0), qi(2)];
        assert!(inst.validate().is_err());
        inst.gamma = vec![qi(1), qi(3)];
        assert!(inst.validate().is_err());
        inst.gamma = vec![qi(2), qi(1)];
        assert!(inst.validate().is_err());
    }

    #[test]
    fn equal_costs_merge() {
        let mut inst = example_two_phase();
        inst.gamma = vec![qi(1), qi(1)];
        let m = inst.merged();
        assert_eq!((m.k, m.tau.clone()), (1, vec![1, 3]));
        assert!(build_changing_cost_glinear(&inst, &q(1, 2)).is_err());
        assert!(build_changing_cost_glinear(&m, &q(1, 2)).is_ok());
    }

    #[test]
    fn no_uncertainty_is_fully_competitive() {
        let mut inst = example_two_phase();
        inst.d_hi0 = qi(0);
        inst.d_lo0 = qi(0);
        let (phi, _) = solve_changing_cost_cr(&inst, &q(1, 1024)).unwrap();
        assert_eq!(phi, qi(1));
        inst.d_lo0 = q(3, 2);
        inst.d_hi0 = q(3, 2);
        let (phi, _) = solve_changing_cost_cr(&inst, &q(1, 1024)).unwrap();
        assert_eq!(phi, qi(1));
    }

    #[test]
    fn single_cost_matches_closed_form() {
        let inst = ChangingCostInstance {
            t: 2,
            k: 1,
            tau: vec![1, 3],
            d_lo0: qi(1),
            d_hi0: qi(4),
            delta: vec![qi(3), qi(1)],
            gamma: vec![qi(1)],
            p: qi(2),
            v: vec![qi(2), qi(2)],
        };
        let r = RmowpInstance {
            t: 2,
            d_lo0: qi(1),
            d_hi0: qi(4),
            delta: vec![qi(3), qi(1)],
            c: qi(1),
            p: qi(2),
            v: vec![qi(2), qi(2)],
        };
        let (phi, _) = solve_changing_cost_cr(&inst, &q(1, 1 << 20)).unwrap();
        assert_eq!(phi, cr_star(&r).unwrap());
        assert_eq!(phi, q(2, 3));
    }

    #[test]
    fn policy_meets_its_ratio_on_endpoint_sequences() {
        let mut inst = example_two_phase();
        inst.d_lo0 = qi(1);
        inst.d_hi0 = qi(3);
        let (phi, pol) = solve_changing_cost_cr(&inst, &q(1, 1 << 16)).unwrap();
        assert!(phi.is_positive() && phi < qi(1), "{phi}");
        let steps: Vec<Q> = (4..=12).map(|i| q(i, 4)).collect();
        for s2 in steps.iter().filter(|x| **x <= qi(2)) {
            for d in steps.iter().filter(|x| *x >= s2 && **x <= s2 + qi(1)) {
                let seq = PredictionSequence { intervals: vec![(qi(1), qi(3)), (s2.clone(), s2 + qi(1))] };
                let ev = changing_cost_evaluate(&inst, &pol, &seq, d).unwrap();
                assert!(ev.violations.is_empty());
                let cr = ev.cr.unwrap();
                assert!(cr >= phi, "d = {d}: {cr} < {phi}");
            }
        }
    }

    #[test]
    fn zero_demand_in_reach_forces_zero_ratio() {
        // any order loses money if demand can still be 0 at the end
        let (phi, pol) = solve_changing_cost_cr(&example_two_phase(), &q(1, 1024)).unwrap();
        assert_eq!(phi, qi(0));
        let seq = PredictionSequence { intervals: vec![(qi(0), qi(2)), (qi(0), qi(1))] };
        assert_eq!(pol.actions(&seq).unwrap(), vec![qi(0), qi(0)]);
    }

    #[test]
    fn grid_size_and_snapping_bounds() {
        let grid = cost_grid(&qi(1), &qi(2), &qi(3), &qi(1)).unwrap();
        // N = 4: {1, 2, 4, 8} ∪ {3 − 2^4, 3 − 2^3, 3 − 2^2, 3 − 2}
        assert_eq!(grid, vec![qi(-13), qi(-5), qi(-1), qi(1), qi(2), qi(4), qi(8)]);
        let mut inst = example_two_phase();
        inst.gamma = vec![qi(1), q(7, 4)];
        let d = q(1, 4);
        let r = ptas_round_costs(&inst, &d).unwrap();
        for (g, h) in inst.gamma.iter().zip(&r.gamma) {
            assert!(h <= g && *g <= (qi(1) + &d) * h);
            assert!((&inst.p - h) / (qi(1) + &d) <= &inst.p - g && &inst.p - g <= &inst.p - h);
        }
        let on_grid = ptas_round_costs(&example_two_phase(), &qi(1)).unwrap();
        assert_eq!(on_grid.gamma, example_two_phase().gamma);
    }

    #[test]
    fn order_nothing_earns_nothing() {
        let inst = example_two_phase();
        let ev = evaluate_actions(&inst, &[qi(0), qi(0)], &qi(1));
        assert_eq!((ev.profit, ev.cr), (qi(0), Some(qi(0))));
    }

    #[test]
    fn json_round_trip() {
        let inst = example_two_phase();
        let text = serde_json::to_string(&ChangingCostJson::from_instance(&inst)).unwrap();
        let back: ChangingCostJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.instance().unwrap(), inst);
    }
}
