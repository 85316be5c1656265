//! Multi-phase minimax-MDPs.
//!
//! The inventory is a vector `x ∈ ℝ^K`; during phase `v` (times
//! `τ_{v−1} ≤ t < τ_v`) actions move coordinate `v` only. At time `τ_v` the
//! state `s` carries rows `W₀ + Σ_j W_j·x_j ≤ 0`.

pub mod changing;
pub mod glinear;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};
use crate::ext::{Ext, Fin, NegInf, PosInf};
use crate::io::{rats, to_rats, Rat};
use crate::mdp::{check_feasible, FiniteMinimaxMdp, MdpParts, Verdict};
use crate::scalar::Q;

/// `[W₀, W₁, …, W_K]` meaning `W₀ + Σ_j W_j·x_j ≤ 0`.
pub type Row = Vec<Q>;

#[derive(Clone, Debug, PartialEq)]
pub struct MultiPhaseInstance {
    /// `τ₀ = 1 < τ₁ < … < τ_K = T`.
    pub tau: Vec<usize>,
    pub ids: Vec<Vec<String>>,
    pub initial: usize,
    /// Index `k` refers to time `k + 1`, for times `1..T`.
    pub succ: Vec<Vec<Vec<usize>>>,
    pub u: Vec<Vec<Q>>,
    pub v: Vec<Vec<Q>>,
    /// `rows[v−1][s]`: rows of state `s` at time `τ_v`, each of length `K+1`.
    pub rows: Vec<Vec<Vec<Row>>>,
}

impl MultiPhaseInstance {
    pub fn k(&self) -> usize {
        self.tau.len() - 1
    }

    pub fn horizon(&self) -> usize {
        self.ids.len()
    }

    /// Phase whose actions are taken at time `t < T`.
    pub fn phase_of(&self, t: usize) -> usize {
        (1..=self.k()).find(|&v| t < self.tau[v]).expect("t below the horizon")
    }

    /// Structural checks plus, for user input, `W_{i,v} ≠ 0` and zero
    /// entries beyond column `v` for rows at `τ_v`.
    pub fn validate(&self, strict: bool) -> Result<()> {
        let mut bad = Vec::new();
        let n = self.horizon();
        let k = self.tau.len().saturating_sub(1);
        if k == 0 || self.tau[0] != 1 || self.tau[k] != n || self.tau.windows(2).any(|w| w[0] >= w[1]) {
            bad.push(format!("tau must be strictly increasing from 1 to T = {n}"));
        }
        if self.succ.len() + 1 != n || self.u.len() + 1 != n || self.v.len() + 1 != n {
            bad.push("transitions and action bounds need T-1 entries".into());
        }
        if self.rows.len() != k {
            bad.push(format!("need constraint rows for {k} phase boundaries"));
        }
        if !bad.is_empty() {
            return Err(invalid(bad.join("; ")));
        }
        if self.initial >= self.ids[0].len() {
            bad.push("initial state out of range".into());
        }
        for t in 1..n {
            let cnt = self.ids[t - 1].len();
            if self.succ[t - 1].len() != cnt || self.u[t - 1].len() != cnt || self.v[t - 1].len() != cnt {
                bad.push(format!("time {t}: per-state data does not match state count"));
                continue;
            }
            for s in 0..cnt {
                let out = &self.succ[t - 1][s];
                if out.is_empty() || out.iter().any(|&j| j >= self.ids[t].len()) {
                    bad.push(format!("time {t}: bad successor list for {}", self.ids[t - 1][s]));
                }
                if self.u[t - 1][s] > self.v[t - 1][s] {
                    bad.push(format!("time {t}: U > V at {}", self.ids[t - 1][s]));
                }
            }
        }
        for v in 1..=k {
            let at = self.tau[v];
            if self.rows[v - 1].len() != self.ids[at - 1].len() {
                bad.push(format!("rows at time {at} do not match the state count"));
                continue;
            }
            for (s, rows) in self.rows[v - 1].iter().enumerate() {
                for r in rows {
                    if r.len() != k + 1 {
                        bad.push(format!("row at time {at}, state {} needs {} entries", self.ids[at - 1][s], k + 1));
                    } else if strict && (r[v].is_zero() || r[v + 1..].iter().any(|w| !w.is_zero())) {
                        bad.push(format!(
                            "row at time {at}, state {} must have a nonzero coefficient {v} and none after it",
                            self.ids[at - 1][s]
                        ));
                    }
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }

    /// For every state reachable at `to` from `(from, s)`: the largest total
    /// `U` and the smallest total `V` over compatible paths.
    pub fn cumulative(&self, from: usize, s: usize, to: usize) -> BTreeMap<usize, (Q, Q)> {
        let mut cur: BTreeMap<usize, (Q, Q)> = BTreeMap::from([(s, (Q::zero(), Q::zero()))]);
        for t in from..to {
            let mut next: BTreeMap<usize, (Q, Q)> = BTreeMap::new();
            for (&st, (cu, cv)) in &cur {
                let (nu, nv) = (cu + &self.u[t - 1][st], cv + &self.v[t - 1][st]);
                for &j in &self.succ[t - 1][st] {
                    next.entry(j)
                        .and_modify(|(bu, bv)| {
                            if nu > *bu {
                                *bu = nu.clone();
                            }
                            if nv < *bv {
                                *bv = nv.clone();
                            }
                        })
                        .or_insert_with(|| (nu.clone(), nv.clone()));
                }
            }
            cur = next;
        }
        cur
    }
}

/// True when the row can never hold (`0·x + W₀ ≤ 0` with `W₀ > 0`) or
/// always holds (`W₀ ≤ 0`); `None` otherwise.
fn constant_row(r: &Row) -> Option<bool> {
    r[1..].iter().all(Zero::is_zero).then(|| !r[0].is_positive())
}

fn push_row(out: &mut Vec<Row>, r: Row) {
    if constant_row(&r) == Some(true) {
        return;
    }
    if !out.contains(&r) {
        out.push(r);
    }
}

/// Compiles the last phase into rows at `τ_{K−1}` on coordinates `1..K−1`.
/// Rows with a zero last coefficient carry over unchanged.
pub fn reduce_last_phase_finite(inst: &MultiPhaseInstance) -> Result<MultiPhaseInstance> {
    inst.validate(false)?;
    let k = inst.k();
    if k < 2 {
        return Err(precondition("reduction needs K >= 2; convert K = 1 instances with to_mdp"));
    }
    let (a, b) = (inst.tau[k - 1], inst.tau[k]);
    let last = &inst.rows[k - 1];
    let mut cum_cache: HashMap<(usize, usize), BTreeMap<usize, (Q, Q)>> = HashMap::new();
    let mut cum = |t: usize, s: usize| cum_cache.entry((t, s)).or_insert_with(|| inst.cumulative(t, s, b)).clone();

    let mut new_rows = Vec::with_capacity(inst.ids[a - 1].len());
    for s in 0..inst.ids[a - 1].len() {
        let mut out: Vec<Row> = Vec::new();
        for r in &inst.rows[k - 2][s] {
            push_row(&mut out, r[..k].to_vec());
        }
        for (sb, (cu, cv)) in cum(a, s) {
            for r in &last[sb] {
                let w = &r[k];
                let mut nr = r[..k].to_vec();
                if w.is_positive() {
                    nr[0] += w * &cu;
                } else if w.is_negative() {
                    nr[0] += w * &cv;
                }
                push_row(&mut out, nr);
            }
        }
        for alpha in a + 1..=b {
            let parents: Vec<usize> = inst.cumulative(a, s, alpha - 1).into_keys().collect();
            let mut pairs = BTreeSet::new();
            for p in parents {
                let kids = &inst.succ[alpha - 2][p];
                for &x in kids {
                    for &y in kids {
                        pairs.insert((x, y));
                    }
                }
            }
            for (sa, sa2) in pairs {
                let lower = cum(alpha, sa);
                let upper = cum(alpha, sa2);
                for (sb, (_, cv)) in &lower {
                    for ri in last[*sb].iter().filter(|r| r[k].is_negative()) {
                        for (sb2, (cu, _)) in &upper {
                            for rj in last[*sb2].iter().filter(|r| r[k].is_positive()) {
                                let (wi, wj) = (&ri[k], &rj[k]);
                                let mut nr: Row = (0..k).map(|j| &ri[j] * wj - wi * &rj[j]).collect();
                                nr[0] += wj * wi * (cv - cu);
                                push_row(&mut out, nr);
                            }
                        }
                    }
                }
            }
        }
        new_rows.push(out);
    }
    let mut rows: Vec<Vec<Vec<Row>>> = inst.rows[..k - 1]
        .iter()
        .map(|per| per.iter().map(|rs| rs.iter().map(|r| r[..k].to_vec()).collect()).collect())
        .collect();
    rows[k - 2] = new_rows;
    Ok(MultiPhaseInstance {
        tau: inst.tau[..k].to_vec(),
        ids: inst.ids[..a].to_vec(),
        initial: inst.initial,
        succ: inst.succ[..a - 1].to_vec(),
        u: inst.u[..a - 1].to_vec(),
        v: inst.v[..a - 1].to_vec(),
        rows,
    })
}

/// Single-phase instance as a minimax-MDP: rows become `L_T`, `R_T`; a state
/// with an unsatisfiable constant row gets the empty interval `[+∞, −∞]`.
pub fn to_mdp(inst: &MultiPhaseInstance) -> Result<FiniteMinimaxMdp<Q>> {
    inst.validate(false)?;
    if inst.k() != 1 {
        return Err(precondition("to_mdp needs K = 1"));
    }
    let n = inst.horizon();
    let mut l: Vec<Vec<Ext<Q>>> = inst.ids.iter().map(|ids| vec![NegInf; ids.len()]).collect();
    let mut r: Vec<Vec<Ext<Q>>> = inst.ids.iter().map(|ids| vec![PosInf; ids.len()]).collect();
    l[0][inst.initial] = Ext::zero();
    r[0][inst.initial] = Ext::zero();
    for (s, rows) in inst.rows[0].iter().enumerate() {
        for row in rows {
            let (w0, w1) = (&row[0], &row[1]);
            let bound = || Fin(-w0 / w1);
            if w1.is_positive() {
                r[n - 1][s] = r[n - 1][s].clone().min(bound());
            } else if w1.is_negative() {
                l[n - 1][s] = l[n - 1][s].clone().max(bound());
            } else if w0.is_positive() {
                l[n - 1][s] = PosInf;
                r[n - 1][s] = NegInf;
            }
        }
    }
    FiniteMinimaxMdp::new(MdpParts {
        ids: inst.ids.clone(),
        initial: inst.initial,
        succ: inst.succ.clone(),
        u: inst.u.clone(),
        v: inst.v.clone(),
        l,
        r,
    })
}

/// Reduces phase by phase down to one, then checks the resulting MDP.
pub fn check_feasible_multiphase(inst: &MultiPhaseInstance) -> Result<Verdict> {
    inst.validate(true)?;
    let mut cur = inst.clone();
    while cur.k() > 1 {
        cur = reduce_last_phase_finite(&cur)?;
    }
    Ok(check_feasible(&to_mdp(&cur)?))
}

// ---------------------------------------------------------------------------
// JSON.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowsJson {
    pub state: String,
    pub rows: Vec<Vec<Rat>>,
}

/// Transitions and action bounds use the minimax-MDP layout; `constraints`
/// lists rows per phase boundary `τ_1..τ_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiPhaseJson {
    pub tau: Vec<usize>,
    pub states: Vec<Vec<String>>,
    pub initial: String,
    pub transitions: Vec<crate::mdp::TransitionJson>,
    #[serde(rename = "U", default)]
    pub u: std::collections::BTreeMap<String, Rat>,
    #[serde(rename = "V")]
    pub v: std::collections::BTreeMap<String, Rat>,
    pub constraints: Vec<Vec<RowsJson>>,
}

impl MultiPhaseJson {
    pub fn instance(&self) -> Result<MultiPhaseInstance> {
        let n = self.states.len();
        if n == 0 {
            return Err(invalid("no states"));
        }
        let index: Vec<HashMap<&str, usize>> =
            self.states.iter().map(|ids| ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()).collect();
        let find = |t: usize, id: &str| {
            index[t - 1].get(id).copied().ok_or_else(|| invalid(format!("unknown state {id} at time {t}")))
        };
        let time_of = |id: &str| -> Result<usize> {
            (1..=n).find(|&t| index[t - 1].contains_key(id)).ok_or_else(|| invalid(format!("unknown state {id}")))
        };
        let mut succ: Vec<Vec<Vec<usize>>> = self.states[..n - 1].iter().map(|ids| vec![Vec::new(); ids.len()]).collect();
        for tr in &self.transitions {
            let t = time_of(&tr.from)?;
            if t == n {
                return Err(invalid(format!("state {} at the horizon has transitions", tr.from)));
            }
            let s = find(t, &tr.from)?;
            for to in &tr.to {
                succ[t - 1][s].push(find(t + 1, to)?);
            }
        }
        let mut u = Vec::with_capacity(n - 1);
        let mut v = Vec::with_capacity(n - 1);
        for ids in &self.states[..n - 1] {
            u.push(ids.iter().map(|id| self.u.get(id).map_or_else(Q::zero, |r| r.0.clone())).collect());
            v.push(
                ids.iter()
                    .map(|id| self.v.get(id).map(|r| r.0.clone()).ok_or_else(|| invalid(format!("missing V for {id}"))))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let mut rows = Vec::with_capacity(self.constraints.len());
        for (k, per) in self.constraints.iter().enumerate() {
            let at = *self.tau.get(k + 1).ok_or_else(|| invalid("more constraint blocks than phases"))?;
            if at == 0 || at > n {
                return Err(invalid("tau out of range"));
            }
            let mut block = vec![Vec::new(); self.states[at - 1].len()];
            for entry in per {
                let s = find(at, &entry.state)?;
                block[s] = entry.rows.iter().map(|r| rats(r)).collect();
            }
            rows.push(block);
        }
        let inst = MultiPhaseInstance { tau: self.tau.clone(), ids: self.states.clone(), initial: find(1, &self.initial)?, succ, u, v, rows };
        inst.validate(true)?;
        Ok(inst)
    }

    pub fn from_instance(inst: &MultiPhaseInstance) -> Self {
        let mut transitions = Vec::new();
        let mut u = std::collections::BTreeMap::new();
        let mut v = std::collections::BTreeMap::new();
        for t in 1..inst.horizon() {
            for (s, id) in inst.ids[t - 1].iter().enumerate() {
                transitions.push(crate::mdp::TransitionJson {
                    from: id.clone(),
                    to: inst.succ[t - 1][s].iter().map(|&j| inst.ids[t][j].clone()).collect(),
                });
                u.insert(id.clone(), Rat(inst.u[t - 1][s].clone()));
                v.insert(id.clone(), Rat(inst.v[t - 1][s].clone()));
            }
        }
        let constraints = inst
            .rows
            .iter()
            .enumerate()
            .map(|(k, per)| {
                per.iter()
                    .enumerate()
                    .filter(|(_, rs)| !rs.is_empty())
                    .map(|(s, rs)| RowsJson {
                        state: inst.ids[inst.tau[k + 1] - 1][s].clone(),
                        rows: rs.iter().map(|r| to_rats(r)).collect(),
                    })
                    .collect()
            })
            .collect();
        MultiPhaseJson {
            tau: inst.tau.clone(),
            states: inst.ids.clone(),
            initial: inst.ids[0][inst.initial].clone(),
            transitions,
            u,
            v,
            constraints,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    fn ids(t: usize, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{t}s{i}")).collect()
    }

    /// `T = 4`, `τ = (1, 3, 4)`, two states per time after the first, complete
    /// transitions; one `≥` and one `≤` terminal row per final state.
    pub(crate) fn two_phase(lo: Q, hi: Q) -> MultiPhaseInstance {
        let all = |n: usize, m: usize| vec![(0..m).collect::<Vec<_>>(); n];
        MultiPhaseInstance {
            tau: vec![1, 3, 4],
            ids: vec![ids(1, 1), ids(2, 2), ids(3, 2), ids(4, 2)],
            initial: 0,
            succ: vec![all(1, 2), all(2, 2), all(2, 2)],
            u: vec![vec![qi(0)], vec![qi(0), qi(0)], vec![qi(0), qi(0)]],
            v: vec![vec![qi(1)], vec![qi(1), qi(2)], vec![qi(1), qi(2)]],
            rows: vec![
                vec![vec![vec![qi(-3), qi(1), qi(0)]], vec![]],
                vec![
                    vec![vec![lo.clone(), qi(-1), qi(-1)], vec![-hi.clone(), qi(1), qi(1)]],
                    vec![vec![lo + qi(1), qi(-1), qi(-1)], vec![-hi - qi(1), qi(1), qi(1)]],
                ],
            ],
        }
    }

    #[test]
    fn reduce_then_check_small_cases() {
        // x1 + x2 must land in [lo, hi] in state 0 and [lo+1, hi+1] in state 1,
        // fixed before the final state is revealed.
        assert!(check_feasible_multiphase(&two_phase(qi(1), qi(2))).unwrap().is_feasible());
        assert!(!check_feasible_multiphase(&two_phase(qi(2), qi(2))).unwrap().is_feasible());
        assert!(!check_feasible_multiphase(&two_phase(qi(6), qi(7))).unwrap().is_feasible());
    }

    #[test]
    fn coupling_free_rows_match_direct_check() {
        let mut inst = two_phase(qi(0), qi(0));
        inst.rows[0] = vec![vec![], vec![]];
        // state 0: 1/2 ≤ x2 ≤ 2; state 1: x2 ≥ 1
        inst.rows[1] = vec![vec![vec![q(1, 2), qi(0), qi(-1)], vec![qi(-2), qi(0), qi(1)]], vec![vec![qi(1), qi(0), qi(-1)]]];
        let red = reduce_last_phase_finite(&inst).unwrap();
        assert!(red.rows[0].iter().flatten().all(|r| r[1].is_zero()));
        assert!(check_feasible_multiphase(&inst).unwrap().is_feasible());
        inst.rows[1][1] = vec![vec![qi(3), qi(0), qi(-1)]];
        let red = reduce_last_phase_finite(&inst).unwrap();
        assert!(red.rows[0].iter().flatten().any(|r| constant_row(r) == Some(false)));
        assert!(!check_feasible_multiphase(&inst).unwrap().is_feasible());
    }

    #[test]
    fn empty_last_phase_keeps_prefix() {
        let mut inst = two_phase(qi(0), qi(0));
        inst.rows[1] = vec![vec![], vec![]];
        let red = reduce_last_phase_finite(&inst).unwrap();
        assert_eq!(red.rows[0][0], vec![vec![qi(-3), qi(1)]]);
        assert!(red.rows[0][1].is_empty());
        assert_eq!(red.horizon(), 3);
    }

    #[test]
    fn validation_rejects_zero_coefficients() {
        let mut inst = two_phase(qi(1), qi(2));
        inst.rows[1][0][0][2] = qi(0);
        assert!(inst.validate(true).is_err());
        assert!(inst.validate(false).is_ok());
        assert!(reduce_last_phase_finite(&MultiPhaseInstance { tau: vec![1, 4], rows: vec![inst.rows[1].clone()], ..inst }).is_err());
    }

    #[test]
    fn json_round_trip() {
        let inst = two_phase(qi(1), qi(2));
        let j = MultiPhaseJson::from_instance(&inst);
        let text = serde_json::to_string(&j).unwrap();
        let back: MultiPhaseJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.instance().unwrap(), inst);
    }
}
