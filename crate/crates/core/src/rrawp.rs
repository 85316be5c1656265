//! Robust two-sector resource allocation with interval predictions of the
//! utility parameters.
//!
//! Each period `t` splits `V_t` units: `a_t ∈ [0, V_t]` go to sector 1 and the
//! rest to sector 2. With `x` the cumulative sector-1 amount and `V = ΣV_t`,
//! the final utility is `u(x, V − x; θ)`.

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, precondition, Result};
use crate::io::{rats, to_rats, Rat};
use crate::rmowp::grid_points;
use crate::scalar::{mid, qi, sqrt_approx, Q};

/// Utility families with declared monotonicity and budget-line concavity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Utility {
    /// `min(x/θ₁, y/θ₂)`.
    Leontief,
    /// `x/θ₁ + y/θ₂`.
    Linear,
    /// `min_k (α_k·x/θ₁ + β_k·y/θ₂ + γ_k)` with `α_k, β_k ≥ 0`; grid methods only.
    CustomGrid { pieces: Vec<(Rat, Rat, Rat)> },
}

impl Utility {
    pub fn eval(&self, x: &Q, y: &Q, th: &(Q, Q)) -> Q {
        let (a, b) = (x / &th.0, y / &th.1);
        match self {
            Utility::Leontief => std::cmp::min(a, b),
            Utility::Linear => a + b,
            Utility::CustomGrid { pieces } => pieces
                .iter()
                .map(|(al, be, ga)| &al.0 * &a + &be.0 * &b + &ga.0)
                .min()
                .expect("validated non-empty"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RrawpInstance {
    pub t: usize,
    pub boxes: [(Q, Q); 2],
    /// `delta[t−1] = (Δ_{t,1}, Δ_{t,2})`.
    pub delta: Vec<(Q, Q)>,
    pub v: Vec<Q>,
    pub utility: Utility,
}

impl RrawpInstance {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.t == 0 || self.delta.len() != self.t || self.v.len() != self.t {
            bad.push(format!("delta and V need T = {} entries (T >= 1)", self.t));
        }
        for (i, (lo, hi)) in self.boxes.iter().enumerate() {
            if !lo.is_positive() || lo > hi {
                bad.push(format!("box {} must satisfy 0 < lo <= hi", i + 1));
            }
        }
        let comp = |i: usize, d: &(Q, Q)| if i == 0 { d.0.clone() } else { d.1.clone() };
        for i in 0..2 {
            let col: Vec<Q> = self.delta.iter().map(|d| comp(i, d)).collect();
            if col.iter().any(Signed::is_negative) || col.windows(2).any(|w| w[1] > w[0]) {
                bad.push(format!("delta for dimension {} must be non-negative and non-increasing", i + 1));
            }
        }
        if self.v.iter().any(Signed::is_negative) {
            bad.push("V entries must be non-negative".into());
        }
        if let Utility::CustomGrid { pieces } = &self.utility {
            if pieces.is_empty() || pieces.iter().any(|(a, b, _)| a.0.is_negative() || b.0.is_negative()) {
                bad.push("custom utility needs at least one piece with non-negative x and y weights".into());
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(invalid(bad.join("; ")))
        }
    }

    pub fn total(&self) -> Q {
        self.v.iter().fold(Q::zero(), |a, b| a + b)
    }

    fn supply_after(&self, tau: usize) -> Q {
        self.v[tau..].iter().fold(Q::zero(), |a, b| a + b)
    }

    /// `Δ_τ` capped by the box widths; larger errors add no pairs.
    fn effective_delta(&self, tau: usize) -> (Q, Q) {
        let (d1, d2) = &self.delta[tau - 1];
        let w1 = &self.boxes[0].1 - &self.boxes[0].0;
        let w2 = &self.boxes[1].1 - &self.boxes[1].0;
        (std::cmp::min(d1.clone(), w1), std::cmp::min(d2.clone(), w2))
    }

    fn in_box(&self, th: &(Q, Q)) -> bool {
        th.0 >= self.boxes[0].0 && th.0 <= self.boxes[0].1 && th.1 >= self.boxes[1].0 && th.1 <= self.boxes[1].1
    }

    fn u(&self, x: &Q, th: &(Q, Q)) -> Q {
        self.utility.eval(x, &(self.total() - x), th)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceInterval {
    pub lo: Q,
    pub hi: Q,
}

/// Default tolerance for the generic searches.
pub fn default_tol() -> Q {
    Q::new(1.into(), num_bigint::BigInt::one() << 40usize)
}

/// Concavity along the chord through `l < m < r`, with slack for `Q` ties.
fn chord_ok(l: (&Q, &Q), m: (&Q, &Q), r: (&Q, &Q)) -> bool {
    let chord = (l.1 * (r.0 - m.0) + r.1 * (m.0 - l.0)) / (r.0 - l.0);
    *m.1 >= chord
}

/// Maximizer and maximum of `x ↦ u(x, V−x; θ)` up to `tol` in `x`.
fn argmax(inst: &RrawpInstance, th: &(Q, Q), tol: &Q) -> Result<(Q, Q)> {
    let total = inst.total();
    let (mut l, mut r) = (Q::zero(), total.clone());
    let (mut ul, mut ur) = (inst.u(&l, th), inst.u(&r, th));
    while &r - &l > *tol {
        let m1 = (&l * qi(2) + &r) / qi(3);
        let m2 = (&l + &r * qi(2)) / qi(3);
        let (u1, u2) = (inst.u(&m1, th), inst.u(&m2, th));
        if !chord_ok((&l, &ul), (&m1, &u1), (&r, &ur)) || !chord_ok((&l, &ul), (&m2, &u2), (&r, &ur)) {
            return Err(precondition(format!(
                "utility is not concave along the budget line at theta = ({}, {}) near x = {}",
                th.0, th.1, m1
            )));
        }
        if u1 < u2 {
            l = m1;
            ul = u1;
        } else {
            r = m2;
            ur = u2;
        }
    }
    let m = mid(&l, &r);
    let um = inst.u(&m, th);
    let best = [(l, ul), (m, um), (r, ur)].into_iter().max_by(|a, b| a.1.cmp(&b.1)).expect("non-empty");
    Ok(best)
}

/// `sup_{0≤x≤V} u(x, V−x; θ)`; exact for Leontief and linear utilities.
pub fn hindsight_opt(inst: &RrawpInstance, th: &(Q, Q), tol: &Q) -> Result<Q> {
    if !tol.is_positive() {
        return Err(precondition("tolerance must be positive"));
    }
    if !inst.in_box(th) {
        return Err(precondition("theta outside the initial box"));
    }
    let total = inst.total();
    match inst.utility {
        Utility::Leontief => Ok(total / (&th.0 + &th.1)),
        Utility::Linear => Ok(std::cmp::max(inst.u(&Q::zero(), th), inst.u(&total, th))),
        Utility::CustomGrid { .. } => argmax(inst, th, tol).map(|r| r.1),
    }
}

/// `{x ∈ [0,V] : u(x, V−x; θ) ≥ Φ·opt(θ)}`.
pub fn acceptance_interval(inst: &RrawpInstance, th: &(Q, Q), phi: &Q, tol: &Q) -> Result<AcceptanceInterval> {
    if !phi.is_positive() || *phi > Q::one() {
        return Err(precondition("need 0 < phi <= 1"));
    }
    let total = inst.total();
    if let Utility::Leontief = inst.utility {
        if !inst.in_box(th) {
            return Err(precondition("theta outside the initial box"));
        }
        let s = &th.0 + &th.1;
        return Ok(AcceptanceInterval {
            lo: &total * phi * &th.0 / &s,
            hi: &total - &total * phi * &th.1 / &s,
        });
    }
    let opt = hindsight_opt(inst, th, tol)?;
    let target = phi * opt;
    let xstar = match inst.utility {
        Utility::Linear => {
            if inst.u(&Q::zero(), th) >= inst.u(&total, th) {
                Q::zero()
            } else {
                total.clone()
            }
        }
        _ => argmax(inst, th, tol)?.0,
    };
    let ok = |x: &Q| inst.u(x, th) >= target;
    let edge = |from: Q| -> Q {
        if ok(&from) {
            return from;
        }
        let (mut bad, mut good) = (from, xstar.clone());
        while (&good - &bad).abs() > *tol {
            let m = mid(&bad, &good);
            if ok(&m) {
                good = m;
            } else {
                bad = m;
            }
        }
        good
    };
    Ok(AcceptanceInterval { lo: edge(Q::zero()), hi: edge(total.clone()) })
}

// ---------------------------------------------------------------------------
// Leontief closed form.
// ---------------------------------------------------------------------------

/// `1 + base·(s − 1)²/den` with `s = √(1 + step/base)`: the interior maximum of
/// the two-point objective along one box edge.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryValue {
    pub base: Q,
    pub step: Q,
    pub den: Q,
}

impl StationaryValue {
    fn radicand(&self) -> Q {
        Q::one() + &self.step / &self.base
    }

    /// Rational upper bound within about `2^{-bits}`.
    pub fn upper(&self, bits: u32) -> Q {
        let r = self.radicand();
        let s = sqrt_approx(&r, bits) + Q::new(1.into(), r.denom() * (num_bigint::BigInt::one() << bits as usize));
        let e = s - Q::one();
        Q::one() + &self.base * &e * &e / &self.den
    }

    /// Exact test of `value ≤ c`.
    pub fn at_most(&self, c: &Q) -> bool {
        // (s−1)² ≤ (c−1)·den/base  ⟺  2s ≥ r + 1 − (c−1)·den/base
        let r = self.radicand();
        let m = &r + Q::one() - (c - Q::one()) * &self.den / &self.base;
        !m.is_positive() || qi(4) * &r >= &m * &m
    }
}

/// Candidate maxima of the two-point objective for one `τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LeontiefCandidates {
    /// `V / (V + Σ_{t>τ} V_t)`.
    pub weight: Q,
    pub corners: Vec<Q>,
    pub stationary: Option<StationaryValue>,
}

fn two_point(th1: &Q, th2: &Q, d1: &Q, d2: &Q) -> Q {
    th2 / (th1 + th2) + (th1 + d1) / (th1 + th2 + d1 - d2)
}

pub fn leontief_candidates(inst: &RrawpInstance, tau: usize) -> Result<LeontiefCandidates> {
    inst.validate()?;
    if !matches!(inst.utility, Utility::Leontief) {
        return Err(precondition("closed form requires a Leontief utility"));
    }
    if tau == 0 || tau > inst.t {
        return Err(precondition(format!("tau must lie in 1..={}", inst.t)));
    }
    let total = inst.total();
    let weight = if total.is_zero() { Q::one() } else { &total / (&total + inst.supply_after(tau)) };
    let (d1, d2) = inst.effective_delta(tau);
    let (lo1, hi1) = (&inst.boxes[0].0, &inst.boxes[0].1 - &d1);
    let (lo2, hi2) = (&inst.boxes[1].0 + &d2, inst.boxes[1].1.clone());
    let corners = vec![
        two_point(lo1, &lo2, &d1, &d2),
        two_point(lo1, &hi2, &d1, &d2),
        two_point(&hi1, &lo2, &d1, &d2),
    ];
    // With Δ₁ = Δ₂ both edge functions are monotone, so the corners suffice.
    let stationary = if d1 > d2 {
        // Edge θ₁ = θ̲₁: f'(θ₂) = θ̲₁/(θ̲₁+θ₂)² − (θ̲₁+Δ₁)/(θ̲₁+Δ₁+θ₂−Δ₂)².
        let fp = |t2: &Q| {
            let a = lo1 + t2;
            let b = lo1 + &d1 + t2 - &d2;
            lo1 / (&a * &a) - (lo1 + &d1) / (&b * &b)
        };
        (fp(&lo2).is_positive() && fp(&hi2).is_negative())
            .then(|| StationaryValue { base: lo1.clone(), step: d1.clone(), den: &d1 - &d2 })
    } else if d2 > d1 {
        // Edge θ₂ = θ̲₂+Δ₂: f'(θ₁) = −A/(θ₁+A)² + θ̲₂/(θ₁+Δ₁+θ̲₂)².
        let base = inst.boxes[1].0.clone();
        let fp = |t1: &Q| {
            let a = t1 + &lo2;
            let b = t1 + &d1 + &base;
            -&lo2 / (&a * &a) + &base / (&b * &b)
        };
        (fp(lo1).is_positive() && fp(&hi1).is_negative())
            .then(|| StationaryValue { base: base.clone(), step: d2.clone(), den: &d2 - &d1 })
    } else {
        None
    };
    Ok(LeontiefCandidates { weight, corners, stationary })
}

/// `min(1, min_τ 1/f_τ)`, as a rational lower bound within about `2^{-bits}`
/// (exact when no interior stationary point is active).
pub fn leontief_cr_star_bits(inst: &RrawpInstance, bits: u32) -> Result<Q> {
    let mut best = Q::one();
    for tau in 1..=inst.t {
        let c = leontief_candidates(inst, tau)?;
        let mut f = c.corners.iter().max().expect("three corners").clone();
        if let Some(s) = &c.stationary {
            f = std::cmp::max(f, s.upper(bits));
        }
        let f = &c.weight * f;
        if f.is_positive() && f.recip() < best {
            best = f.recip();
        }
    }
    Ok(best)
}

pub fn leontief_cr_star(inst: &RrawpInstance) -> Result<Q> {
    leontief_cr_star_bits(inst, 64)
}

// ---------------------------------------------------------------------------
// Feasibility.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub enum RrawpVerdict {
    Feasible,
    /// The pair `(θ, θ′)` is reported by the grid check only.
    Infeasible { tau: usize, pair: Option<((Q, Q), (Q, Q))> },
}

impl RrawpVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, RrawpVerdict::Feasible)
    }
}

/// Checks `R(θ) + Σ_{t>τ}V_t ≥ L(θ′)` for all `τ` and `|θ_i − θ′_i| ≤ Δ_{τ,i}`.
/// Leontief utilities are checked exactly when `grid` is `None`; otherwise
/// `θ, θ′` range over the grid with the given step.
pub fn check_cr_feasible(inst: &RrawpInstance, phi: &Q, grid: Option<&Q>) -> Result<RrawpVerdict> {
    inst.validate()?;
    if !phi.is_positive() || *phi > Q::one() {
        return Err(precondition("need 0 < phi <= 1"));
    }
    match (grid, &inst.utility) {
        (None, Utility::Leontief) => {
            let inv = phi.recip();
            for tau in 1..=inst.t {
                let c = leontief_candidates(inst, tau)?;
                let limit = &inv / &c.weight;
                let corner_ok = c.corners.iter().all(|v| *v <= limit);
                let interior_ok = c.stationary.as_ref().is_none_or(|s| s.at_most(&limit));
                if !(corner_ok && interior_ok) {
                    return Ok(RrawpVerdict::Infeasible { tau, pair: None });
                }
            }
            Ok(RrawpVerdict::Feasible)
        }
        (None, _) => Err(precondition("a theta grid is required for non-Leontief utilities")),
        (Some(step), _) => check_on_grid(inst, phi, step),
    }
}

fn check_on_grid(inst: &RrawpInstance, phi: &Q, step: &Q) -> Result<RrawpVerdict> {
    let g1 = grid_points(&inst.boxes[0].0, &inst.boxes[0].1, step)?;
    let g2 = grid_points(&inst.boxes[1].0, &inst.boxes[1].1, step)?;
    let tol = default_tol();
    let mut lo = vec![vec![Q::zero(); g2.len()]; g1.len()];
    let mut hi = lo.clone();
    for (i, a) in g1.iter().enumerate() {
        for (j, b) in g2.iter().enumerate() {
            let iv = acceptance_interval(inst, &(a.clone(), b.clone()), phi, &tol)?;
            lo[i][j] = iv.lo;
            hi[i][j] = iv.hi;
        }
    }
    for tau in 1..=inst.t {
        let (d1, d2) = &inst.delta[tau - 1];
        let rest = inst.supply_after(tau);
        for i in 0..g1.len() {
            for j in 0..g2.len() {
                let need = &hi[i][j] + &rest;
                for (i2, a2) in g1.iter().enumerate() {
                    if (a2 - &g1[i]).abs() > *d1 {
                        continue;
                    }
                    for (j2, b2) in g2.iter().enumerate() {
                        if (b2 - &g2[j]).abs() <= *d2 && lo[i2][j2] > need {
                            let th = (g1[i].clone(), g2[j].clone());
                            return Ok(RrawpVerdict::Infeasible { tau, pair: Some((th, (a2.clone(), b2.clone()))) });
                        }
                    }
                }
            }
        }
    }
    Ok(RrawpVerdict::Feasible)
}

/// Largest `Φ` passing the grid check, by bisection to `tol`.
pub fn grid_cr_star(inst: &RrawpInstance, step: &Q, tol: &Q) -> Result<Q> {
    let feasible = |phi: &Q| check_cr_feasible(inst, phi, Some(step)).map(|v| v.is_feasible());
    if feasible(&Q::one())? {
        return Ok(Q::one());
    }
    if !feasible(tol)? {
        return Ok(Q::zero());
    }
    Ok(crate::bisect::bisect(Q::one(), tol.clone(), tol, feasible)?.1)
}

// ---------------------------------------------------------------------------
// Policy and simulation.
// ---------------------------------------------------------------------------

/// `π_t(boxes, x) = min{V_t, min_{θ ∈ boxes} R(θ) − x}`, clamped at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct CrPolicy {
    pub inst: RrawpInstance,
    pub phi: Q,
    /// Grid step for the inner minimum of non-Leontief utilities.
    pub step: Q,
}

impl CrPolicy {
    pub fn target(&self, boxes: &[(Q, Q); 2]) -> Result<Q> {
        let tol = default_tol();
        match self.inst.utility {
            // R is increasing in θ₁ and decreasing in θ₂.
            Utility::Leontief => {
                Ok(acceptance_interval(&self.inst, &(boxes[0].0.clone(), boxes[1].1.clone()), &self.phi, &tol)?.hi)
            }
            _ => {
                let mut best: Option<Q> = None;
                for a in grid_points(&boxes[0].0, &boxes[0].1, &self.step)? {
                    for b in grid_points(&boxes[1].0, &boxes[1].1, &self.step)? {
                        let r = acceptance_interval(&self.inst, &(a.clone(), b), &self.phi, &tol)?.hi;
                        if best.as_ref().is_none_or(|x| r < *x) {
                            best = Some(r);
                        }
                    }
                }
                Ok(best.expect("grid is non-empty"))
            }
        }
    }

    pub fn action(&self, t: usize, boxes: &[(Q, Q); 2], x: &Q) -> Result<Q> {
        let a = self.target(boxes)? - x;
        Ok(crate::rmowp::clamp(a, &Q::zero(), &self.inst.v[t - 1]))
    }
}

pub fn cr_policy(inst: &RrawpInstance, phi: &Q) -> Result<CrPolicy> {
    inst.validate()?;
    if !phi.is_positive() || *phi > Q::one() {
        return Err(precondition("need 0 < phi <= 1"));
    }
    Ok(CrPolicy { inst: inst.clone(), phi: phi.clone(), step: Q::new(1.into(), 32.into()) })
}

/// Checks nesting and per-dimension error bounds of a box sequence.
pub fn validate_sequence(inst: &RrawpInstance, seq: &[[(Q, Q); 2]]) -> Result<()> {
    if seq.len() != inst.t {
        return Err(invalid(format!("need {} box pairs", inst.t)));
    }
    let mut prev = inst.boxes.clone();
    for (k, bx) in seq.iter().enumerate() {
        for i in 0..2 {
            let (lo, hi) = &bx[i];
            let d = if i == 0 { &inst.delta[k].0 } else { &inst.delta[k].1 };
            if lo > hi || *lo < prev[i].0 || *hi > prev[i].1 || hi - lo > *d {
                return Err(invalid(format!("box {} of period {} is not a valid refinement", i + 1, k + 1)));
            }
        }
        prev = bx.clone();
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub actions: Vec<Q>,
    pub x: Q,
    pub utility: Q,
    pub opt: Q,
}

/// Rolls `policy` along `seq` and scores the final split at `θ`.
pub fn simulate(policy: &CrPolicy, seq: &[[(Q, Q); 2]], th: &(Q, Q)) -> Result<Outcome> {
    let inst = &policy.inst;
    validate_sequence(inst, seq)?;
    let last = seq.last().expect("T >= 1");
    if th.0 < last[0].0 || th.0 > last[0].1 || th.1 < last[1].0 || th.1 > last[1].1 {
        return Err(precondition("theta outside the final boxes"));
    }
    let mut x = Q::zero();
    let mut actions = Vec::with_capacity(seq.len());
    for (k, bx) in seq.iter().enumerate() {
        let a = policy.action(k + 1, bx, &x)?;
        x += &a;
        actions.push(a);
    }
    Ok(Outcome { utility: inst.u(&x, th), opt: hindsight_opt(inst, th, &default_tol())?, actions, x })
}

/// Random regular box sequence with endpoints on the grid of `step`.
pub fn random_sequence<R: Rng>(inst: &RrawpInstance, step: &Q, rng: &mut R) -> Result<Vec<[(Q, Q); 2]>> {
    let mut prev = inst.boxes.clone();
    let mut out = Vec::with_capacity(inst.t);
    for k in 0..inst.t {
        let mut next = prev.clone();
        for i in 0..2 {
            let d = if i == 0 { &inst.delta[k].0 } else { &inst.delta[k].1 };
            let pts = grid_points(&prev[i].0, &prev[i].1, step)?;
            let a = rng.gen_range(0..pts.len());
            let fits: Vec<usize> = (a..pts.len()).take_while(|&b| &pts[b] - &pts[a] <= *d).collect();
            let b = fits[rng.gen_range(0..fits.len())];
            next[i] = (pts[a].clone(), pts[b].clone());
        }
        out.push(next.clone());
        prev = next;
    }
    Ok(out)
}

/// Random three-point midpoint tests along the budget line. Returns the first
/// violation as `(θ, l, r)`.
pub fn spot_check_concavity<R: Rng>(inst: &RrawpInstance, trials: usize, rng: &mut R) -> Option<((Q, Q), Q, Q)> {
    let total = inst.total();
    let pick = |rng: &mut R, lo: &Q, hi: &Q| lo + (hi - lo) * Q::new(rng.gen_range(0..=64).into(), 64.into());
    for _ in 0..trials {
        let th = (pick(rng, &inst.boxes[0].0, &inst.boxes[0].1), pick(rng, &inst.boxes[1].0, &inst.boxes[1].1));
        let l = pick(rng, &Q::zero(), &total);
        let r = pick(rng, &Q::zero(), &total);
        let m = mid(&l, &r);
        if inst.u(&m, &th) * qi(2) < inst.u(&l, &th) + inst.u(&r, &th) {
            return Some((th, l, r));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// JSON.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrawpJson {
    #[serde(rename = "T")]
    pub t: usize,
    pub boxes: Vec<(Rat, Rat)>,
    pub delta: Vec<(Rat, Rat)>,
    #[serde(rename = "V")]
    pub v: Vec<Rat>,
    pub utility: Utility,
}

impl RrawpJson {
    pub fn instance(&self) -> Result<RrawpInstance> {
        if self.boxes.len() != 2 {
            return Err(invalid("exactly two boxes are supported"));
        }
        let pair = |p: &(Rat, Rat)| (p.0 .0.clone(), p.1 .0.clone());
        let inst = RrawpInstance {
            t: self.t,
            boxes: [pair(&self.boxes[0]), pair(&self.boxes[1])],
            delta: self.delta.iter().map(pair).collect(),
            v: rats(&self.v),
            utility: self.utility.clone(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn from_instance(inst: &RrawpInstance) -> Self {
        let pair = |p: &(Q, Q)| (Rat(p.0.clone()), Rat(p.1.clone()));
        RrawpJson {
            t: inst.t,
            boxes: inst.boxes.iter().map(pair).collect(),
            delta: inst.delta.iter().map(pair).collect(),
            v: to_rats(&inst.v),
            utility: inst.utility.clone(),
        }
    }
}

/// One period, boxes `[1,2]²`, `Δ = (1,1)`.
pub fn example_unit_boxes(v: Q) -> RrawpInstance {
    RrawpInstance {
        t: 1,
        boxes: [(qi(1), qi(2)), (qi(1), qi(2))],
        delta: vec![(qi(1), qi(1))],
        v: vec![v],
        utility: Utility::Leontief,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn point(th: (i64, i64), v: Vec<Q>, utility: Utility) -> RrawpInstance {
        RrawpInstance {
            t: v.len(),
            boxes: [(qi(th.0), qi(th.0)), (qi(th.1), qi(th.1))],
            delta: vec![(qi(0), qi(0)); v.len()],
            v,
            utility,
        }
    }

    #[test]
    fn hindsight_examples() {
        let tol = default_tol();
        assert_eq!(hindsight_opt(&point((1, 1), vec![qi(2)], Utility::Leontief), &(qi(1), qi(1)), &tol).unwrap(), qi(1));
        assert_eq!(hindsight_opt(&point((1, 3), vec![qi(8)], Utility::Leontief), &(qi(1), qi(3)), &tol).unwrap(), qi(2));
        assert_eq!(hindsight_opt(&point((1, 1), vec![qi(5)], Utility::Linear), &(qi(1), qi(1)), &tol).unwrap(), qi(5));
    }

    #[test]
    fn acceptance_examples() {
        let tol = default_tol();
        let i = point((1, 1), vec![qi(2)], Utility::Leontief);
        assert_eq!(acceptance_interval(&i, &(qi(1), qi(1)), &qi(1), &tol).unwrap(), AcceptanceInterval { lo: qi(1), hi: qi(1) });
        let i = point((1, 3), vec![qi(8)], Utility::Leontief);
        assert_eq!(acceptance_interval(&i, &(qi(1), qi(3)), &q(1, 2), &tol).unwrap(), AcceptanceInterval { lo: qi(1), hi: qi(5) });
        assert!(acceptance_interval(&i, &(qi(1), qi(3)), &q(3, 2), &tol).is_err());
    }

    #[test]
    fn generic_search_matches_leontief() {
        let tol = q(1, 1 << 30);
        let lp = RrawpInstance { utility: Utility::CustomGrid { pieces: vec![(Rat(qi(1)), Rat(qi(0)), Rat(qi(0))), (Rat(qi(0)), Rat(qi(1)), Rat(qi(0)))] }, ..point((1, 3), vec![qi(8)], Utility::Leontief) };
        let opt = hindsight_opt(&lp, &(qi(1), qi(3)), &tol).unwrap();
        assert!((opt - qi(2)).abs() <= q(1, 1 << 20));
        let iv = acceptance_interval(&lp, &(qi(1), qi(3)), &q(1, 2), &tol).unwrap();
        assert!((iv.lo - qi(1)).abs() <= q(1, 1 << 20) && (iv.hi - qi(5)).abs() <= q(1, 1 << 20));
    }

    #[test]
    fn unit_box_ratio() {
        let unit_boxes = example_unit_boxes(qi(1));
        assert_eq!(leontief_cr_star(&unit_boxes).unwrap(), q(3, 4));
        assert!(check_cr_feasible(&unit_boxes, &q(3, 4), None).unwrap().is_feasible());
        assert!(!check_cr_feasible(&unit_boxes, &(q(3, 4) + q(1, 1 << 20)), None).unwrap().is_feasible());
        assert!(check_cr_feasible(&unit_boxes, &q(3, 4), Some(&q(1, 32))).unwrap().is_feasible());
        assert!(!check_cr_feasible(&unit_boxes, &q(4, 5), Some(&q(1, 32))).unwrap().is_feasible());
    }

    #[test]
    fn degenerate_ratios() {
        assert_eq!(leontief_cr_star(&point((1, 1), vec![qi(1), qi(1)], Utility::Leontief)).unwrap(), qi(1));
        let c = leontief_candidates(&point((1, 1), vec![qi(1), qi(1)], Utility::Leontief), 1).unwrap();
        assert_eq!(&c.weight * &c.corners[0], q(2, 3));
        let i = point((2, 5), vec![qi(3)], Utility::Leontief);
        assert!(check_cr_feasible(&i, &qi(1), None).unwrap().is_feasible());
    }

    #[test]
    fn stationary_point_matches_dense_search() {
        // Δ₁ > Δ₂ with a wide θ₂ range activates the interior candidate.
        let inst = RrawpInstance {
            t: 1,
            boxes: [(qi(1), qi(9)), (qi(1), qi(40))],
            delta: vec![(qi(8), qi(0))],
            v: vec![qi(1)],
            utility: Utility::Leontief,
        };
        let c = leontief_candidates(&inst, 1).unwrap();
        let s = c.stationary.clone().expect("interior candidate");
        let upper = s.upper(64);
        let mut dense = Q::zero();
        for k in 0..=390 {
            let t2 = qi(1) + q(k, 10);
            dense = std::cmp::max(dense, two_point(&qi(1), &t2, &qi(8), &qi(0)));
        }
        assert!(dense <= upper && &upper - &dense < q(1, 1000), "{dense} vs {upper}");
        assert!(s.at_most(&upper) && !s.at_most(&(&upper - q(1, 1 << 40))));
        let phi = leontief_cr_star(&inst).unwrap();
        assert!(check_cr_feasible(&inst, &phi, None).unwrap().is_feasible());
        assert!(!check_cr_feasible(&inst, &(&phi + q(1, 1 << 30)), None).unwrap().is_feasible());
    }

    #[test]
    fn policy_examples() {
        let i = point((1, 1), vec![qi(2)], Utility::Leontief);
        let pi = cr_policy(&i, &qi(1)).unwrap();
        assert_eq!(pi.action(1, &i.boxes, &qi(0)).unwrap(), qi(1));
        assert_eq!(pi.action(1, &i.boxes, &qi(1)).unwrap(), qi(0));
        let unit_boxes = example_unit_boxes(qi(4));
        let pi = cr_policy(&unit_boxes, &q(3, 4)).unwrap();
        assert_eq!(pi.action(1, &unit_boxes.boxes, &qi(0)).unwrap(), qi(2));
    }

    #[test]
    fn simulated_guarantee_holds() {
        let inst = RrawpInstance {
            t: 3,
            boxes: [(qi(1), qi(3)), (qi(2), qi(3))],
            delta: vec![(qi(1), qi(1)), (q(1, 2), q(1, 2)), (q(1, 4), qi(0))],
            v: vec![qi(2), qi(1), qi(1)],
            utility: Utility::Leontief,
        };
        let phi = leontief_cr_star(&inst).unwrap();
        let pi = cr_policy(&inst, &phi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let seq = random_sequence(&inst, &q(1, 4), &mut rng).unwrap();
            let last = seq.last().unwrap();
            for th in [(last[0].0.clone(), last[1].0.clone()), (last[0].1.clone(), last[1].1.clone()), (last[0].0.clone(), last[1].1.clone())] {
                let out = simulate(&pi, &seq, &th).unwrap();
                assert!(out.utility >= &phi * &out.opt, "{seq:?} {th:?}");
            }
        }
        assert!(spot_check_concavity(&inst, 200, &mut rng).is_none());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"T":1,"boxes":[[1,2],[1,2]],"delta":[[1,1]],"V":[1],"utility":{"kind":"leontief"}}"#;
        let j: RrawpJson = serde_json::from_str(text).unwrap();
        assert_eq!(j.instance().unwrap(), example_unit_boxes(qi(1)));
        let back: RrawpJson = serde_json::from_str(&serde_json::to_string(&j).unwrap()).unwrap();
        assert_eq!(back, j);
    }
}
