//! Monotonous G-linear instances: multi-phase problems whose environment is
//! one scalar (the left endpoint of a full-length prediction interval) and
//! whose terminal constraints are piecewise linear in it.
//!
//! Times run `0..=T+1`; day `t ∈ 1..=T` acts on coordinate `v` when
//! `τ_{v−1} ≤ t < τ_v`. From state `s` at time `t` the next state lies in
//! `[s, s + Δ_t − Δ_{t+1}]`. At time `τ_K` the state must satisfy
//! `Σ_j A_ij·x_j ≥ L_i(s)` for every row `i` and `Σ_j B_j·x_j ≤ R₁(s)`.

use num_traits::{Signed, Zero};

use crate::error::{invalid, precondition, Result};
use crate::ext::Fin;
use crate::pwl::{range_max_cells, Pwl};
use crate::scalar::Q;

/// Most pieces a `≥` right-hand side may have.
pub const MAX_L_PIECES: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct GLinearInstance {
    pub t: usize,
    /// `τ₀ = 1 < … < τ_K = T + 1`.
    pub tau: Vec<usize>,
    /// `V_t` at index `t − 1`.
    pub v: Vec<Q>,
    /// `Δ_0..Δ_{T+1}`, non-increasing, `Δ_{T+1} = 0`.
    pub delta: Vec<Q>,
    pub s0: Q,
    pub a: Vec<Vec<Q>>,
    pub l: Vec<Pwl>,
    pub b: Vec<Q>,
    pub r1: Pwl,
    /// Piece budget for `R₁`.
    pub g: usize,
}

impl GLinearInstance {
    pub fn k(&self) -> usize {
        self.tau.len() - 1
    }

    /// The four structural conditions plus shape checks on the schedule.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let k = self.tau.len().saturating_sub(1);
        if self.tau.first() != Some(&1) || self.tau.windows(2).any(|w| w[0] >= w[1]) {
            bad.push("tau must start at 1 and increase strictly".to_string());
        }
        if k > 0 && self.tau[k] > self.t + 1 {
            bad.push("tau ends past T + 1".into());
        }
        if self.v.len() != self.t || self.v.iter().any(Signed::is_negative) {
            bad.push(format!("need {} non-negative supplies", self.t));
        }
        if self.delta.len() != self.t + 2
            || self.delta.windows(2).any(|w| w[1] > w[0])
            || self.delta.last().is_some_and(|d| !d.is_zero())
        {
            bad.push("delta must have T + 2 non-increasing entries ending in 0".into());
        }
        if self.b.len() != k || (k > 0 && (!self.b[0].is_positive() || self.b.windows(2).any(|w| w[0] >= w[1]))) {
            bad.push("B must be strictly increasing with B_1 > 0".into());
        }
        if self.a.len() != self.l.len() {
            bad.push("one right-hand function per A row".into());
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != k || (k > 0 && (!row[k - 1].is_positive() || row.windows(2).any(|w| w[0] <= w[1]))) {
                bad.push(format!("A row {i} must be strictly decreasing with a positive last entry"));
            }
        }
        for (i, f) in self.l.iter().enumerate() {
            if !f.is_continuous() || f.defined_piece_count() > MAX_L_PIECES {
                bad.push(format!("L_{i} must be continuous with at most {MAX_L_PIECES} pieces"));
            }
        }
        if !self.r1.is_nondecreasing() || self.r1.defined_piece_count() > self.g {
            bad.push(format!("R_1 must be non-decreasing and continuous with at most {} pieces", self.g));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }

    /// `Σ_{t=from}^{to−1} V_t`.
    fn supply(&self, from: usize, to: usize) -> Q {
        (from..to).map(|t| self.v[t - 1].clone()).sum()
    }
}

/// Compiles the last phase into rows at `τ_{K−1}`. The B row and `R₁` carry
/// over truncated; every A row yields one family from its own slack and
/// one per day of the last phase from its clash with the B row.
pub fn reduce_last_phase_glinear(q: &GLinearInstance) -> Result<GLinearInstance> {
    q.validate()?;
    let k = q.k();
    if k == 0 {
        return Err(precondition("nothing left to reduce"));
    }
    let (a, b) = (q.tau[k - 1], q.tau[k]);
    let window = &q.delta[a] - &q.delta[b];
    let zero = Pwl::constant(Q::zero());
    let bk = &q.b[k - 1];
    let neg_r = q.r1.scale(&-(Q::from_integer(1.into()) / bk))?;

    let mut rows: Vec<(Vec<Q>, Pwl)> = Vec::new();
    let mut push = |coef: Vec<Q>, f: Pwl| {
        if f.defined_piece_count() == 0 {
            return;
        }
        if !rows.iter().any(|(c, g)| *c == coef && *g == f) {
            rows.push((coef, f));
        }
    };
    for (row, l) in q.a.iter().zip(&q.l) {
        let aik = &row[k - 1];
        let slack = aik * q.supply(a, b);
        for cell in range_max_cells(l, &zero, &window, &window)? {
            push(row[..k - 1].to_vec(), cell.add_const(&-slack.clone()));
        }
        let g = l.scale(&(Q::from_integer(1.into()) / aik))?;
        let coef: Vec<Q> = (0..k - 1).map(|j| &row[j] / aik - &q.b[j] / bk).collect();
        for alpha in a + 1..=b {
            let h = &q.delta[alpha - 1] - &q.delta[b];
            let rest = q.supply(alpha, b);
            for cell in range_max_cells(&g, &neg_r, &window, &h)? {
                push(coef.clone(), cell.add_const(&-rest.clone()));
            }
        }
    }
    let (a_rows, l) = rows.into_iter().unzip();
    let out = GLinearInstance {
        t: q.t,
        tau: q.tau[..k].to_vec(),
        v: q.v.clone(),
        delta: q.delta.clone(),
        s0: q.s0.clone(),
        a: a_rows,
        l,
        b: q.b[..k - 1].to_vec(),
        r1: q.r1.clone(),
        g: q.g,
    };
    out.validate()?;
    Ok(out)
}

/// Feasibility of a phase-free instance: every state reachable on day 1
/// must satisfy the rows with `x = 0`.
pub fn final_check(q: &GLinearInstance) -> Result<bool> {
    if q.k() != 0 {
        return Err(precondition("final check needs every phase reduced"));
    }
    let hi = &q.s0 + &q.delta[0] - &q.delta[1];
    if q.r1.eval(&q.s0) < Fin(Q::zero()) {
        return Ok(false);
    }
    Ok(q.l.iter().all(|f| f.max_on(&q.s0, &hi) <= Fin(Q::zero())))
}

/// Reduces phase by phase, then runs [`final_check`].
pub fn check_glinear(q: &GLinearInstance) -> Result<bool> {
    let mut cur = q.clone();
    while cur.k() > 0 {
        cur = reduce_last_phase_glinear(&cur)?;
    }
    final_check(&cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    /// One phase over days 1..=2, supplies 1 each, state window 1.
    fn single(lo: Q, hi: Q) -> GLinearInstance {
        GLinearInstance {
            t: 2,
            tau: vec![1, 3],
            v: vec![qi(1), qi(1)],
            delta: vec![qi(1), qi(1), qi(1), qi(0)],
            s0: qi(0),
            a: vec![vec![qi(1)]],
            l: vec![Pwl::linear(qi(0), lo)],
            b: vec![qi(1)],
            r1: Pwl::linear(qi(0), hi),
            g: 1,
        }
    }

    #[test]
    fn constant_bounds_match_supply() {
        assert!(check_glinear(&single(qi(1), qi(2))).unwrap());
        assert!(check_glinear(&single(qi(2), qi(2))).unwrap());
        assert!(!check_glinear(&single(q(5, 2), qi(3))).unwrap());
        assert!(!check_glinear(&single(qi(1), q(1, 2))).unwrap());
    }

    #[test]
    fn state_dependent_bounds() {
        // x ≥ s and x ≤ s + 1/2 with s revealed on day 2: the first unit has
        // to be committed before the state moves.
        let mut inst = single(qi(0), qi(0));
        inst.l = vec![Pwl::linear(qi(1), qi(0))];
        inst.r1 = Pwl::linear(qi(1), q(1, 2));
        inst.delta = vec![qi(1), qi(1), qi(0), qi(0)];
        // the state is revealed before the second order: fine
        assert!(check_glinear(&inst).unwrap());
        inst.delta = vec![qi(1), qi(1), qi(1), qi(0)];
        // terminal state anywhere in [0, 1] after both orders: x must track s
        // within 1/2, but x is chosen before s is known
        assert!(!check_glinear(&inst).unwrap());
    }

    #[test]
    fn reduction_output_is_valid_and_without_a_rows_keeps_b() {
        let mut inst = single(qi(1), qi(2));
        inst.a.clear();
        inst.l.clear();
        let red = reduce_last_phase_glinear(&inst).unwrap();
        assert!(red.a.is_empty() && red.b.is_empty());
        assert_eq!(red.r1, inst.r1);
        assert!(final_check(&red).unwrap());
    }

    #[test]
    fn zero_window_shifts_rows() {
        let mut inst = single(qi(0), qi(5));
        inst.delta = vec![qi(0); 4];
        inst.l = vec![Pwl::linear(qi(1), qi(1))];
        let red = reduce_last_phase_glinear(&inst).unwrap();
        for f in &red.l {
            for x in [qi(-2), qi(0), q(3, 2)] {
                let shifted = Pwl::linear(qi(1), qi(1)).add_const(&qi(-2)).eval(&x);
                assert!(f.eval(&x) <= shifted);
            }
        }
        assert!(red.l.iter().any(|f| f.eval(&qi(0)) == Fin(qi(-1))));
    }

    #[test]
    fn validator_rejects_bad_shapes() {
        let mut inst = single(qi(1), qi(2));
        inst.b = vec![qi(0)];
        assert!(inst.validate().is_err());
        let mut inst = single(qi(1), qi(2));
        inst.r1 = Pwl::linear(qi(-1), qi(0));
        assert!(inst.validate().is_err());
        let mut inst = single(qi(1), qi(2));
        inst.delta = vec![qi(0), qi(1), qi(0), qi(0)];
        assert!(inst.validate().is_err());
    }
}
