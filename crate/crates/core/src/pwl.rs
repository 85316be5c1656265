//! Exact piecewise-linear functions of one variable.
//!
//! A [`Pwl`] is a list of strictly increasing breakpoints with one line per
//! gap. A line whose intercept is `−∞` marks a gap where the function is
//! undefined; outside the first/last breakpoint the value is `−∞` as well.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::ext::{Ext, Fin, NegInf, PosInf};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Line<T> {
    pub slope: T,
    /// `NegInf` marks a piece on which the function is `−∞`.
    pub icept: Ext<T>,
}

impl<T: Scalar> Line<T> {
    pub fn new(slope: T, icept: T) -> Self {
        Line { slope, icept: Fin(icept) }
    }

    fn undefined() -> Self {
        Line { slope: T::zero(), icept: NegInf }
    }

    pub fn is_defined(&self) -> bool {
        self.icept.is_finite()
    }

    /// Value at a finite point.
    pub fn at(&self, x: &T) -> Ext<T> {
        self.icept.add_fin(&(self.slope.clone() * x.clone()))
    }

    /// Value at an extended point; at `±∞` this is the limit.
    pub fn at_ext(&self, x: &Ext<T>) -> Ext<T> {
        match (x, &self.icept) {
            (_, NegInf) => NegInf,
            (Fin(v), _) => self.at(v),
            (inf, Fin(b)) => {
                if self.slope.is_zero() {
                    Fin(b.clone())
                } else if (self.slope.is_positive()) == matches!(inf, PosInf) {
                    PosInf
                } else {
                    NegInf
                }
            }
            (_, PosInf) => PosInf,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pwl<T = crate::scalar::Q> {
    bps: Vec<Ext<T>>,
    lines: Vec<Line<T>>,
}

fn probe_between<T: Scalar>(u: &Ext<T>, v: &Ext<T>) -> T {
    match (u, v) {
        (Fin(a), Fin(b)) => (a.clone() + b.clone()) / T::ratio(2, 1),
        (NegInf, Fin(b)) => b.clone() - T::one(),
        (Fin(a), PosInf) => a.clone() + T::one(),
        _ => T::zero(),
    }
}

impl<T: Scalar> Pwl<T> {
    pub fn new(bps: Vec<Ext<T>>, lines: Vec<Line<T>>) -> Result<Self> {
        if bps.len() < 2 || lines.len() + 1 != bps.len() {
            return Err(precondition("need n+1 breakpoints for n pieces, n >= 1"));
        }
        for w in bps.windows(2) {
            if w[0] >= w[1] {
                return Err(precondition("breakpoints must be strictly increasing"));
            }
        }
        if matches!(bps[0], PosInf) || matches!(bps[bps.len() - 1], NegInf) {
            return Err(precondition("support bounds out of order"));
        }
        if lines.iter().any(|l| matches!(l.icept, PosInf)) {
            return Err(precondition("+inf intercepts are not allowed"));
        }
        Ok(Pwl { bps, lines })
    }

    /// `slope·x + icept` on all of ℝ.
    pub fn linear(slope: T, icept: T) -> Self {
        Pwl { bps: vec![NegInf, PosInf], lines: vec![Line::new(slope, icept)] }
    }

    pub fn constant(c: T) -> Self {
        Self::linear(T::zero(), c)
    }

    /// The function that is `−∞` everywhere.
    pub fn neg_inf() -> Self {
        Pwl { bps: vec![NegInf, PosInf], lines: vec![Line::undefined()] }
    }

    /// Linear interpolation through `pts` (x strictly increasing). With
    /// `extend`, the first and last segments continue to `∓∞`.
    pub fn from_points(pts: &[(T, T)], extend: bool) -> Result<Self> {
        if pts.len() < 2 {
            return Err(precondition("need at least two points"));
        }
        let mut bps = Vec::with_capacity(pts.len());
        let mut lines = Vec::with_capacity(pts.len() - 1);
        for (k, w) in pts.windows(2).enumerate() {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if x0 >= x1 {
                return Err(precondition("points must have increasing x"));
            }
            let s = (y1.clone() - y0.clone()) / (x1.clone() - x0.clone());
            let b = y0.clone() - s.clone() * x0.clone();
            if k == 0 {
                bps.push(if extend { NegInf } else { Fin(x0.clone()) });
            } else {
                bps.push(Fin(x0.clone()));
            }
            lines.push(Line::new(s, b));
        }
        let last = pts[pts.len() - 1].0.clone();
        bps.push(if extend { PosInf } else { Fin(last) });
        Ok(Pwl { bps, lines }.merged())
    }

    pub fn breakpoints(&self) -> &[Ext<T>] {
        &self.bps
    }

    pub fn lines(&self) -> &[Line<T>] {
        &self.lines
    }

    pub fn piece_count(&self) -> usize {
        self.lines.len()
    }

    /// Number of pieces on which the function is finite.
    pub fn defined_piece_count(&self) -> usize {
        self.lines.iter().filter(|l| l.is_defined()).count()
    }

    /// `(lo, hi, line)` triples.
    pub fn pieces(&self) -> impl Iterator<Item = (&Ext<T>, &Ext<T>, &Line<T>)> {
        self.lines.iter().enumerate().map(move |(k, l)| (&self.bps[k], &self.bps[k + 1], l))
    }

    /// Hull of the pieces where the function is finite.
    pub fn support(&self) -> Option<(Ext<T>, Ext<T>)> {
        let first = self.lines.iter().position(|l| l.is_defined())?;
        let last = self.lines.iter().rposition(|l| l.is_defined())?;
        Some((self.bps[first].clone(), self.bps[last + 1].clone()))
    }

    /// Finite breakpoints, in order.
    pub fn finite_breakpoints(&self) -> Vec<T> {
        self.bps.iter().filter_map(|b| b.finite().cloned()).collect()
    }

    pub fn eval(&self, x: &T) -> Ext<T> {
        let n = self.lines.len();
        let xe = Fin(x.clone());
        if xe < self.bps[0] || xe > self.bps[n] {
            return NegInf;
        }
        // first index k with bps[k] >= x
        let k = self.bps.partition_point(|b| b < &xe);
        if k < self.bps.len() && self.bps[k] == xe {
            let left = if k > 0 { self.lines[k - 1].at(x) } else { NegInf };
            let right = if k < n { self.lines[k].at(x) } else { NegInf };
            left.max(right)
        } else {
            self.lines[k - 1].at(x)
        }
    }

    /// Evaluation at an extended point; `±∞` yields the limit of the end piece.
    pub fn eval_ext(&self, x: &Ext<T>) -> Ext<T> {
        match x {
            Fin(v) => self.eval(v),
            NegInf => {
                if matches!(self.bps[0], NegInf) {
                    self.lines[0].at_ext(x)
                } else {
                    NegInf
                }
            }
            PosInf => {
                let n = self.lines.len();
                if matches!(self.bps[n], PosInf) {
                    self.lines[n - 1].at_ext(x)
                } else {
                    NegInf
                }
            }
        }
    }

    /// No undefined piece strictly inside the support, and matching limits
    /// at every interior breakpoint.
    pub fn is_continuous(&self) -> bool {
        let Some((lo, hi)) = self.support() else {
            return true;
        };
        for k in 0..self.lines.len() {
            let inside = self.bps[k] >= lo && self.bps[k + 1] <= hi;
            if inside && !self.lines[k].is_defined() {
                return false;
            }
        }
        for k in 1..self.lines.len() {
            if let Fin(x) = &self.bps[k] {
                let (a, b) = (&self.lines[k - 1], &self.lines[k]);
                if a.is_defined() && b.is_defined() && a.at(x) != b.at(x) {
                    return false;
                }
            }
        }
        true
    }

    /// Every slope ≤ 0 and no upward jumps.
    pub fn is_nonincreasing(&self) -> bool {
        self.is_continuous()
            && self.lines.iter().filter(|l| l.is_defined()).all(|l| !l.slope.is_positive())
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.is_continuous()
            && self.lines.iter().filter(|l| l.is_defined()).all(|l| !l.slope.is_negative())
    }

    /// Maximum absolute slope over the defined pieces.
    pub fn lipschitz_constant(&self) -> Result<T> {
        if !self.is_continuous() {
            return Err(Error::Arithmetic("unbounded slope: value jumps inside the support".into()));
        }
        Ok(self
            .lines
            .iter()
            .filter(|l| l.is_defined())
            .map(|l| l.slope.abs())
            .fold(T::zero(), T::max_of))
    }

    /// Adjacent pieces with the same line are fused.
    pub fn merged(mut self) -> Self {
        let mut bps = vec![self.bps[0].clone()];
        let mut lines: Vec<Line<T>> = Vec::new();
        for (k, l) in self.lines.drain(..).enumerate() {
            let same = lines.last().is_some_and(|p| {
                p.icept == l.icept && (p.slope == l.slope || !l.is_defined())
            });
            if same {
                *bps.last_mut().unwrap() = self.bps[k + 1].clone();
            } else {
                lines.push(l);
                bps.push(self.bps[k + 1].clone());
            }
        }
        // trim undefined pieces at either end
        while lines.len() > 1 && !lines[0].is_defined() {
            lines.remove(0);
            bps.remove(0);
        }
        while lines.len() > 1 && !lines[lines.len() - 1].is_defined() {
            lines.pop();
            bps.pop();
        }
        Pwl { bps, lines }
    }

    /// `c·f` for `c > 0`, or for any `c` when `f` has no undefined piece.
    pub fn scale(&self, c: &T) -> Result<Self> {
        if c.is_zero() {
            return Ok(Pwl { bps: self.bps.clone(), lines: self.lines.iter().map(|l| {
                if l.is_defined() { Line::new(T::zero(), T::zero()) } else { l.clone() }
            }).collect() }.merged());
        }
        if c.is_negative() && self.lines.iter().any(|l| !l.is_defined()) {
            return Err(precondition("negative scaling of a partial function"));
        }
        let lines = self
            .lines
            .iter()
            .map(|l| match &l.icept {
                Fin(b) => Line::new(l.slope.clone() * c.clone(), b.clone() * c.clone()),
                _ => l.clone(),
            })
            .collect();
        Ok(Pwl { bps: self.bps.clone(), lines })
    }

    pub fn add_const(&self, c: &T) -> Self {
        let lines = self
            .lines
            .iter()
            .map(|l| Line { slope: l.slope.clone(), icept: l.icept.add_fin(c) })
            .collect();
        Pwl { bps: self.bps.clone(), lines }
    }

    /// Pointwise sum; `−∞` wherever either operand is.
    pub fn add(&self, other: &Self) -> Self {
        let cuts = merge_cuts(&[self, other]);
        let mut bps = vec![cuts[0].clone()];
        let mut lines = Vec::new();
        for w in cuts.windows(2) {
            let m = probe_between(&w[0], &w[1]);
            let a = self.line_at(&m);
            let b = other.line_at(&m);
            let l = match (a, b) {
                (Some(a), Some(b)) => match (&a.icept, &b.icept) {
                    (Fin(x), Fin(y)) => {
                        Line::new(a.slope.clone() + b.slope.clone(), x.clone() + y.clone())
                    }
                    _ => Line::undefined(),
                },
                _ => Line::undefined(),
            };
            lines.push(l);
            bps.push(w[1].clone());
        }
        Pwl { bps, lines }.merged()
    }

    /// Line governing a point that is not a breakpoint.
    fn line_at(&self, x: &T) -> Option<&Line<T>> {
        let xe = Fin(x.clone());
        let n = self.lines.len();
        if xe < self.bps[0] || xe > self.bps[n] {
            return None;
        }
        let k = self.bps.partition_point(|b| b < &xe);
        Some(&self.lines[if k == 0 { 0 } else { k - 1 }])
    }

    /// Restriction to `[lo, hi]`, `−∞` elsewhere.
    pub fn restrict(&self, lo: &Ext<T>, hi: &Ext<T>) -> Result<Self> {
        if lo >= hi {
            return Err(precondition("empty restriction"));
        }
        let window = Pwl { bps: vec![lo.clone(), hi.clone()], lines: vec![Line::new(T::zero(), T::zero())] };
        Ok(self.add(&window))
    }

    /// Maximum over `[lo, hi]` (finite, `lo ≤ hi`).
    pub fn max_on(&self, lo: &T, hi: &T) -> Ext<T> {
        let mut best = self.eval(lo).max(self.eval(hi));
        for b in &self.bps {
            if let Fin(x) = b {
                if x > lo && x < hi {
                    best = best.max(self.eval(x));
                }
            }
        }
        best
    }

    /// Minimum over `[lo, hi]` (finite, `lo ≤ hi`); `−∞` if undefined anywhere there.
    pub fn min_on(&self, lo: &T, hi: &T) -> Ext<T> {
        let mut pts = vec![lo.clone(), hi.clone()];
        let mut probes = Vec::new();
        for b in &self.bps {
            if let Fin(x) = b {
                if x > lo && x < hi {
                    pts.push(x.clone());
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in pts.windows(2) {
            probes.push(probe_between(&Fin(w[0].clone()), &Fin(w[1].clone())));
        }
        pts.into_iter().chain(probes).map(|x| self.eval(&x)).fold(PosInf, Ext::min)
    }
}

fn merge_cuts<T: Scalar>(fs: &[&Pwl<T>]) -> Vec<Ext<T>> {
    let mut cuts: Vec<Ext<T>> = vec![NegInf, PosInf];
    for f in fs {
        for b in &f.bps {
            if b.is_finite() {
                cuts.push(b.clone());
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts
}

/// Upper envelope of lines on `(u, v)`, as `(x_from, line)` runs in order.
fn lines_envelope<T: Scalar>(mut ls: Vec<Line<T>>, u: &Ext<T>, v: &Ext<T>) -> Vec<(Ext<T>, Line<T>)> {
    ls.sort_by(|a, b| {
        a.slope
            .partial_cmp(&b.slope)
            .unwrap()
            .then(a.icept.partial_cmp(&b.icept).unwrap())
    });
    // keep the highest intercept per slope
    let mut uniq: Vec<Line<T>> = Vec::new();
    for l in ls {
        if let Some(last) = uniq.last() {
            if last.slope == l.slope {
                uniq.pop();
            }
        }
        uniq.push(l);
    }
    let b = |l: &Line<T>| l.icept.finite().unwrap().clone();
    // x where line p meets line q (p.slope < q.slope)
    let meet = |p: &Line<T>, q: &Line<T>| (b(p) - b(q)) / (q.slope.clone() - p.slope.clone());
    let mut hull: Vec<Line<T>> = Vec::new();
    for l in uniq {
        while hull.len() >= 2 {
            let n = hull.len();
            if meet(&hull[n - 2], &l) <= meet(&hull[n - 2], &hull[n - 1]) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    let mut out: Vec<(Ext<T>, Line<T>)> = Vec::new();
    for k in 0..hull.len() {
        let from = if k == 0 { NegInf } else { Fin(meet(&hull[k - 1], &hull[k])) };
        let to = if k + 1 == hull.len() { PosInf } else { Fin(meet(&hull[k], &hull[k + 1])) };
        // clip to (u, v)
        let lo = from.max(u.clone());
        let hi = to.min(v.clone());
        if lo < hi {
            out.push((lo, hull[k].clone()));
        }
    }
    if out.is_empty() {
        // (u, v) falls exactly on a crossing; pick the line best at the probe
        let m = probe_between(u, v);
        let best = hull
            .into_iter()
            .max_by(|p, q| p.at(&m).partial_cmp(&q.at(&m)).unwrap())
            .unwrap();
        out.push((u.clone(), best));
    }
    out
}

/// Pointwise maximum of `fs`.
pub fn upper_envelope<T: Scalar>(fs: &[Pwl<T>]) -> Result<Pwl<T>> {
    if fs.is_empty() {
        return Err(precondition("upper_envelope of an empty list"));
    }
    let refs: Vec<&Pwl<T>> = fs.iter().collect();
    let cuts = merge_cuts(&refs);
    let mut bps = vec![cuts[0].clone()];
    let mut lines = Vec::new();
    for w in cuts.windows(2) {
        let (u, v) = (&w[0], &w[1]);
        let m = probe_between(u, v);
        let active: Vec<Line<T>> = fs
            .iter()
            .filter_map(|f| f.line_at(&m))
            .filter(|l| l.is_defined())
            .cloned()
            .collect();
        if active.is_empty() {
            lines.push(Line::undefined());
            bps.push(v.clone());
            continue;
        }
        let runs = lines_envelope(active, u, v);
        for (k, (_, l)) in runs.iter().enumerate() {
            lines.push(l.clone());
            let end = if k + 1 < runs.len() { runs[k + 1].0.clone() } else { v.clone() };
            bps.push(end);
        }
    }
    Ok(Pwl { bps, lines }.merged())
}

// ---------------------------------------------------------------------------
// Range-max decomposition.
// ---------------------------------------------------------------------------

/// `w(x) = max { g(y) + f(z) : y, z ∈ [x, x+Δ], |y − z| ≤ h }` by exhaustive
/// candidate enumeration. Independent of [`range_max_decompose`]; used as its
/// oracle.
pub fn range_max_oracle<T: Scalar>(g: &Pwl<T>, f: &Pwl<T>, delta: &T, h: &T, x: &T) -> Ext<T> {
    let lo = x.clone();
    let hi = x.clone() + delta.clone();
    let inside = |v: &T| v >= &lo && v <= &hi;
    let mut ys = vec![lo.clone(), hi.clone()];
    ys.extend(g.finite_breakpoints().into_iter().filter(|v| inside(v)));
    let mut zs = vec![lo.clone(), hi.clone()];
    zs.extend(f.finite_breakpoints().into_iter().filter(|v| inside(v)));
    let mut pairs: Vec<(T, T)> = Vec::new();
    for y in &ys {
        for z in &zs {
            pairs.push((y.clone(), z.clone()));
        }
        pairs.push((y.clone(), y.clone() - h.clone()));
        pairs.push((y.clone(), y.clone() + h.clone()));
    }
    for z in &zs {
        pairs.push((z.clone() - h.clone(), z.clone()));
        pairs.push((z.clone() + h.clone(), z.clone()));
    }
    let mut best = NegInf;
    for (y, z) in pairs {
        if !inside(&y) || !inside(&z) || (y.clone() - z.clone()).abs() > *h {
            continue;
        }
        if let Ok(v) = g.eval(&y).add(&f.eval(&z)) {
            best = best.max(v);
        }
    }
    best
}

/// Affine map `k·x + c` with `k ∈ {0, 1}` in practice.
#[derive(Clone, Debug)]
struct Aff<T> {
    k: T,
    c: T,
}

/// One `(g piece, f piece)` cell of the decomposition.
struct Cell<T> {
    a: Ext<T>,
    b: Ext<T>,
    c: Ext<T>,
    d: Ext<T>,
    gl: Line<T>,
    fl: Line<T>,
}

impl<T: Scalar> Cell<T> {
    /// Exact cell value `ŵ(x)` (vertex enumeration of the 2-D LP), `None` if
    /// the cell is infeasible at `x`.
    fn value(&self, delta: &T, h: &T, x: &T) -> Option<T> {
        let xe = Fin(x.clone());
        let xd = Fin(x.clone() + delta.clone());
        let yl = self.a.clone().max(xe.clone());
        let yh = self.b.clone().min(xd.clone());
        let zl = self.c.clone().max(xe);
        let zh = self.d.clone().min(xd);
        let (yl, yh, zl, zh) = (yl.finite()?.clone(), yh.finite()?.clone(), zl.finite()?.clone(), zh.finite()?.clone());
        if yl > yh || zl > zh {
            return None;
        }
        let cand_y = [yl.clone(), yh.clone()];
        let cand_z = [zl.clone(), zh.clone()];
        let mut best: Option<T> = None;
        let mut try_pt = |y: T, z: T| {
            if y < yl || y > yh || z < zl || z > zh || (y.clone() - z.clone()).abs() > *h {
                return;
            }
            let v = self.gl.slope.clone() * y
                + self.gl.icept.finite().unwrap().clone()
                + self.fl.slope.clone() * z
                + self.fl.icept.finite().unwrap().clone();
            if best.as_ref().is_none_or(|b| &v > b) {
                best = Some(v);
            }
        };
        for y in &cand_y {
            for z in &cand_z {
                try_pt(y.clone(), z.clone());
            }
            try_pt(y.clone(), y.clone() - h.clone());
            try_pt(y.clone(), y.clone() + h.clone());
        }
        for z in &cand_z {
            try_pt(z.clone() - h.clone(), z.clone());
            try_pt(z.clone() + h.clone(), z.clone());
        }
        best
    }

    /// All `x` at which the ordering of the vertex coordinates can change.
    fn events(&self, delta: &T, h: &T) -> Vec<T> {
        let (one, zero) = (T::one(), T::zero());
        let mut atoms: Vec<Aff<T>> = vec![
            Aff { k: one.clone(), c: zero.clone() },
            Aff { k: one.clone(), c: delta.clone() },
        ];
        let mut z_atoms: Vec<Aff<T>> = atoms.clone();
        for e in [&self.a, &self.b] {
            if let Fin(v) = e {
                atoms.push(Aff { k: zero.clone(), c: v.clone() });
            }
        }
        for e in [&self.c, &self.d] {
            if let Fin(v) = e {
                z_atoms.push(Aff { k: zero.clone(), c: v.clone() });
            }
        }
        // express everything on the y axis: z-atoms shifted by ±h
        let mut all = atoms.clone();
        for za in &z_atoms {
            all.push(za.clone());
            all.push(Aff { k: za.k.clone(), c: za.c.clone() + h.clone() });
            all.push(Aff { k: za.k.clone(), c: za.c.clone() - h.clone() });
        }
        for ya in &atoms {
            all.push(Aff { k: ya.k.clone(), c: ya.c.clone() + h.clone() });
            all.push(Aff { k: ya.k.clone(), c: ya.c.clone() - h.clone() });
        }
        let mut xs = Vec::new();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let dk = all[i].k.clone() - all[j].k.clone();
                if !dk.is_zero() {
                    xs.push((all[j].c.clone() - all[i].c.clone()) / dk);
                }
            }
        }
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        xs.dedup();
        xs
    }

    /// `ŵ` on its domain as a concave Pwl, or `None` for an empty cell. A
    /// single-point domain comes back as a one-point list.
    fn hat(&self, delta: &T, h: &T) -> Option<CellHat<T>> {
        let ev = self.events(delta, h);
        let one = T::one();
        if ev.is_empty() {
            // no structural change anywhere: affine on ℝ or empty
            let v0 = self.value(delta, h, &T::zero())?;
            let v1 = self.value(delta, h, &one)?;
            return Some(CellHat::Fn(Pwl::linear(v1 - v0.clone(), v0)));
        }
        let pts: Vec<(T, T)> = ev
            .iter()
            .filter_map(|x| self.value(delta, h, x).map(|v| (x.clone(), v)))
            .collect();
        let first_ev = ev[0].clone();
        let last_ev = ev[ev.len() - 1].clone();
        let left_out = first_ev.clone() - one.clone();
        let right_out = last_ev.clone() + one.clone();
        let left_open = self.value(delta, h, &left_out);
        let right_open = self.value(delta, h, &right_out);
        if pts.is_empty() {
            // infeasible at every event; feasibility can only persist on an
            // unbounded side, which would make the first/last event feasible
            return None;
        }
        let mut full: Vec<(T, T)> = pts;
        let extend_left = left_open.is_some();
        let extend_right = right_open.is_some();
        if full.len() == 1 && !extend_left && !extend_right {
            return Some(CellHat::Point(full[0].0.clone(), full[0].1.clone()));
        }
        if extend_left {
            full.insert(0, (left_out, left_open.unwrap()));
        }
        if extend_right {
            full.push((right_out, right_open.unwrap()));
        }
        let mut p = Pwl::from_points(&full, false).ok()?;
        if extend_left {
            p.bps[0] = NegInf;
        }
        if extend_right {
            let n = p.bps.len() - 1;
            p.bps[n] = PosInf;
        }
        Some(CellHat::Fn(p.merged()))
    }
}

enum CellHat<T> {
    Point(T, T),
    Fn(Pwl<T>),
}

/// Extends `ŵ` beyond its domain with slope `±k`, clipped to `[glo, ghi]`.
fn extend_hat<T: Scalar>(hat: CellHat<T>, k: &T, glo: &Ext<T>, ghi: &Ext<T>) -> Pwl<T> {
    let (lo, hi, core) = match hat {
        CellHat::Point(x, v) => ((x.clone(), v.clone()).into(), (x, v).into(), None),
        CellHat::Fn(p) => {
            let n = p.bps.len() - 1;
            let end = |b: &Ext<T>| b.finite().map(|x| (x.clone(), p.eval(x).finite().unwrap().clone()));
            (end(&p.bps[0]), end(&p.bps[n]), Some(p))
        }
    };
    let mut bps: Vec<Ext<T>> = Vec::new();
    let mut lines: Vec<Line<T>> = Vec::new();
    if let Some((l, vl)) = &lo {
        if glo < &Fin(l.clone()) {
            // ŵ(l) − k·(l − x)
            bps.push(glo.clone());
            lines.push(Line::new(k.clone(), vl.clone() - k.clone() * l.clone()));
        }
    }
    match core {
        Some(p) => {
            bps.extend(p.bps);
            lines.extend(p.lines);
        }
        None => bps.push(Fin(lo.as_ref().unwrap().0.clone())),
    }
    if let Some((r, vr)) = &hi {
        if ghi > &Fin(r.clone()) {
            // ŵ(r) − k·(x − r)
            lines.push(Line::new(-k.clone(), vr.clone() + k.clone() * r.clone()));
            bps.push(ghi.clone());
        }
    }
    Pwl { bps, lines }.merged()
}

/// Decomposition of the window-max `w` into per-cell functions.
///
/// `g` is continuous, `f` continuous and non-increasing, `Δ > 0`, `h > 0`.
/// Each output has at most 12 pieces and `max_i w_i = w` on the domain of
/// `w`; outside that domain every output is `−∞`.
pub fn range_max_decompose<T: Scalar>(g: &Pwl<T>, f: &Pwl<T>, delta: &T, h: &T) -> Result<Vec<Pwl<T>>> {
    if !delta.is_positive() || !h.is_positive() {
        return Err(precondition("range_max_decompose needs delta > 0 and h > 0"));
    }
    range_max_cells(g, f, delta, h)
}

/// As [`range_max_decompose`] but also accepts `Δ = 0` and/or `h = 0`.
pub fn range_max_cells<T: Scalar>(g: &Pwl<T>, f: &Pwl<T>, delta: &T, h: &T) -> Result<Vec<Pwl<T>>> {
    if delta.is_negative() || h.is_negative() {
        return Err(precondition("negative window or band"));
    }
    if !g.is_continuous() || !f.is_continuous() {
        return Err(precondition("g and f must be continuous"));
    }
    if !f.is_nonincreasing() {
        return Err(precondition("f must be non-increasing"));
    }
    let h = T::min_of(h.clone(), delta.clone());
    let k = g.lipschitz_constant()? + T::ratio(4, 1) * f.lipschitz_constant()?;
    let mut hats = Vec::new();
    for (a, b, gl) in g.pieces().filter(|p| p.2.is_defined()) {
        for (c, d, fl) in f.pieces().filter(|p| p.2.is_defined()) {
            let cell = Cell { a: a.clone(), b: b.clone(), c: c.clone(), d: d.clone(), gl: gl.clone(), fl: fl.clone() };
            if let Some(hat) = cell.hat(delta, &h) {
                hats.push(hat);
            }
        }
    }
    // global domain: hull of the cell domains
    let mut glo: Option<Ext<T>> = None;
    let mut ghi: Option<Ext<T>> = None;
    for hat in &hats {
        let (lo, hi) = match hat {
            CellHat::Point(x, _) => (Fin(x.clone()), Fin(x.clone())),
            CellHat::Fn(p) => (p.bps[0].clone(), p.bps[p.bps.len() - 1].clone()),
        };
        glo = Some(glo.map_or(lo.clone(), |g: Ext<T>| g.min(lo)));
        ghi = Some(ghi.map_or(hi.clone(), |g: Ext<T>| g.max(hi)));
    }
    let (Some(glo), Some(ghi)) = (glo, ghi) else {
        return Ok(Vec::new());
    };
    if glo == ghi {
        return Err(precondition("the window maximum is finite at a single point only"));
    }
    Ok(hats.into_iter().map(|hat| extend_hat(hat, &k, &glo, &ghi)).collect())
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct PwlJson {
    pub breakpoints: Vec<String>,
    pub slopes: Vec<String>,
    pub intercepts: Vec<String>,
}

impl<T: Scalar> Pwl<T> {
    pub fn to_json(&self) -> PwlJson {
        PwlJson {
            breakpoints: self.bps.iter().map(|b| b.to_string()).collect(),
            slopes: self.lines.iter().map(|l| l.slope.to_string()).collect(),
            intercepts: self.lines.iter().map(|l| l.icept.to_string()).collect(),
        }
    }

    pub fn from_json(j: &PwlJson) -> Result<Self> {
        if j.slopes.len() != j.intercepts.len() {
            return Err(precondition("slopes and intercepts differ in length"));
        }
        let bps = j.breakpoints.iter().map(|s| Ext::parse(s)).collect::<Result<Vec<_>>>()?;
        let mut lines = Vec::new();
        for (s, b) in j.slopes.iter().zip(&j.intercepts) {
            let slope = T::parse_scalar(s)?;
            let icept = Ext::parse(b)?;
            lines.push(Line { slope, icept });
        }
        Pwl::new(bps, lines)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi, Q};

    fn ident_0_10() -> Pwl<Q> {
        Pwl::from_points(&[(qi(0), qi(0)), (qi(10), qi(10))], false).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = ident_0_10();
        assert_eq!(f.eval(&qi(3)), Fin(qi(3)));
        assert_eq!(f.eval(&qi(11)), NegInf);
        let tent = Pwl::from_points(&[(qi(0), qi(0)), (qi(2), qi(2)), (qi(4), qi(0))], false).unwrap();
        assert_eq!(tent.eval(&qi(3)), Fin(qi(1)));
        assert_eq!(tent.eval(&qi(2)), Fin(qi(2)));
    }

    #[test]
    fn envelope_examples() {
        let x = Pwl::from_points(&[(qi(0), qi(0)), (qi(4), qi(4))], false).unwrap();
        let two = Pwl::from_points(&[(qi(0), qi(2)), (qi(4), qi(2))], false).unwrap();
        let e = upper_envelope(&[x.clone(), two.clone()]).unwrap();
        assert_eq!(e.piece_count(), 2);
        assert_eq!(e.breakpoints()[1], Fin(qi(2)));
        assert_eq!(e.eval(&qi(1)), Fin(qi(2)));
        assert_eq!(e.eval(&qi(3)), Fin(qi(3)));
        assert_eq!(upper_envelope(std::slice::from_ref(&x)).unwrap(), x);
        assert_eq!(upper_envelope(&[Pwl::neg_inf(), x.clone()]).unwrap(), x);
        let rev = upper_envelope(&[two, x]).unwrap();
        assert_eq!(rev, e);
        assert_eq!(upper_envelope(&[e.clone(), e.clone()]).unwrap(), e);
    }

    #[test]
    fn envelope_of_disjoint_supports_has_a_gap() {
        let a = Pwl::from_points(&[(qi(0), qi(1)), (qi(1), qi(1))], false).unwrap();
        let b = Pwl::from_points(&[(qi(2), qi(5)), (qi(3), qi(5))], false).unwrap();
        let e = upper_envelope(&[a, b]).unwrap();
        assert_eq!(e.eval(&q(3, 2)), NegInf);
        assert_eq!(e.eval(&q(5, 2)), Fin(qi(5)));
        assert!(!e.is_continuous());
    }

    #[test]
    fn lipschitz_examples() {
        assert_eq!(ident_0_10().lipschitz_constant().unwrap(), qi(1));
        assert_eq!(Pwl::constant(qi(5)).lipschitz_constant().unwrap(), qi(0));
        let p = Pwl::from_points(&[(qi(0), qi(0)), (qi(1), qi(2)), (qi(2), qi(-1))], true).unwrap();
        assert_eq!(p.lipschitz_constant().unwrap(), qi(3));
    }

    #[test]
    fn decompose_constants() {
        let ws = range_max_decompose(&Pwl::constant(qi(5)), &Pwl::constant(qi(-2)), &qi(1), &qi(1)).unwrap();
        assert_eq!(ws.len(), 1);
        assert_eq!(ws[0], Pwl::constant(qi(3)));
    }

    #[test]
    fn decompose_identity_pair() {
        let g = ident_0_10();
        let f = Pwl::from_points(&[(qi(0), qi(0)), (qi(10), qi(-10))], false).unwrap();
        let ws = range_max_decompose(&g, &f, &qi(2), &qi(1)).unwrap();
        let env = upper_envelope(&ws).unwrap();
        for k in 0..=64 {
            let x = q(k, 8);
            assert_eq!(env.eval(&x), Fin(qi(1)), "x = {x}");
        }
    }

    #[test]
    fn decompose_window_of_increasing_function() {
        let g = ident_0_10();
        let ws = range_max_decompose(&g, &Pwl::constant(qi(0)), &qi(2), &qi(2)).unwrap();
        let env = upper_envelope(&ws).unwrap();
        for k in -16..=80 {
            let x = q(k, 8);
            let expect = Q::min_of(x.clone() + qi(2), qi(10));
            assert_eq!(env.eval(&x), Fin(expect), "x = {x}");
        }
        assert_eq!(env.eval(&qi(-3)), NegInf);
    }

    #[test]
    fn decompose_rejects_bad_input() {
        let g = Pwl::constant(qi(1));
        let up = Pwl::linear(qi(1), qi(0));
        assert!(range_max_decompose(&g, &up, &qi(1), &qi(1)).is_err());
        assert!(range_max_decompose(&g, &g, &qi(0), &qi(1)).is_err());
        assert!(range_max_decompose(&g, &g, &qi(1), &qi(0)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = Pwl::from_points(&[(qi(0), qi(0)), (q(1, 2), qi(3)), (qi(4), qi(1))], true).unwrap();
        let j = p.to_json();
        assert_eq!(Pwl::<Q>::from_json(&j).unwrap(), p);
    }
}
