//! Exact convex polygons in the plane, possibly degenerate (segment, point)
//! or empty. Used by the multi-phase oracles.

use num_traits::{Signed, Zero};

use crate::scalar::Q;

pub type Point = (Q, Q);

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Polygon {
    /// Hull vertices in counter-clockwise order without collinear points.
    verts: Vec<Point>,
}

fn cross(o: &Point, a: &Point, b: &Point) -> Q {
    (&a.0 - &o.0) * (&b.1 - &o.1) - (&a.1 - &o.1) * (&b.0 - &o.0)
}

/// Andrew's monotone chain; collinear and duplicate points are dropped.
pub fn hull(mut pts: Vec<Point>) -> Polygon {
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return Polygon { verts: pts };
    }
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive() {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive() {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Polygon { verts: lower }
}

impl Polygon {
    pub fn empty() -> Self {
        Polygon { verts: Vec::new() }
    }

    /// Axis-aligned box `[lo, hi]²`.
    pub fn square(lo: &Q, hi: &Q) -> Self {
        hull(vec![
            (lo.clone(), lo.clone()),
            (hi.clone(), lo.clone()),
            (hi.clone(), hi.clone()),
            (lo.clone(), hi.clone()),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.verts
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self.verts.len() {
            0 => false,
            1 => self.verts[0] == *p,
            2 => on_segment(&self.verts[0], &self.verts[1], p),
            n => (0..n).all(|i| !cross(&self.verts[i], &self.verts[(i + 1) % n], p).is_negative()),
        }
    }

    /// `{p ∈ self : a·p.0 + b·p.1 + c ≤ 0}`.
    pub fn clip(&self, a: &Q, b: &Q, c: &Q) -> Polygon {
        let val = |p: &Point| a * &p.0 + b * &p.1 + c;
        let n = self.verts.len();
        let mut out = Vec::new();
        for i in 0..n {
            let p = &self.verts[i];
            let q = &self.verts[(i + 1) % n];
            let (vp, vq) = (val(p), val(q));
            if !vp.is_positive() {
                out.push(p.clone());
            }
            if (vp.is_positive() && vq.is_negative()) || (vp.is_negative() && vq.is_positive()) {
                let t = &vp / (&vp - &vq);
                out.push((&p.0 + (&q.0 - &p.0) * &t, &p.1 + (&q.1 - &p.1) * &t));
            }
        }
        hull(out)
    }

    pub fn intersect(&self, other: &Polygon) -> Polygon {
        if self.is_empty() || other.is_empty() {
            return Polygon::empty();
        }
        let mut pts: Vec<Point> = self.verts.iter().filter(|p| other.contains(p)).cloned().collect();
        pts.extend(other.verts.iter().filter(|p| self.contains(p)).cloned());
        for (a0, a1) in self.edges() {
            for (b0, b1) in other.edges() {
                if let Some(p) = segment_crossing(a0, a1, b0, b1) {
                    pts.push(p);
                }
            }
        }
        hull(pts)
    }

    /// Minkowski sum with the segment `{t·d : t ∈ [lo, hi]}`.
    pub fn sweep(&self, d: &Point, lo: &Q, hi: &Q) -> Polygon {
        let shift = |k: &Q| self.verts.iter().map(|p| (&p.0 + &d.0 * k, &p.1 + &d.1 * k)).collect::<Vec<_>>();
        let mut pts = shift(lo);
        pts.extend(shift(hi));
        hull(pts)
    }

    fn edges(&self) -> Vec<(&Point, &Point)> {
        let n = self.verts.len();
        match n {
            0 | 1 => Vec::new(),
            2 => vec![(&self.verts[0], &self.verts[1])],
            _ => (0..n).map(|i| (&self.verts[i], &self.verts[(i + 1) % n])).collect(),
        }
    }
}

fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
    cross(a, b, p).is_zero()
        && p.0 >= std::cmp::min(a.0.clone(), b.0.clone())
        && p.0 <= std::cmp::max(a.0.clone(), b.0.clone())
        && p.1 >= std::cmp::min(a.1.clone(), b.1.clone())
        && p.1 <= std::cmp::max(a.1.clone(), b.1.clone())
}

/// Unique crossing point of two non-parallel closed segments.
fn segment_crossing(a0: &Point, a1: &Point, b0: &Point, b1: &Point) -> Option<Point> {
    let r = (&a1.0 - &a0.0, &a1.1 - &a0.1);
    let s = (&b1.0 - &b0.0, &b1.1 - &b0.1);
    let den = &r.0 * &s.1 - &r.1 * &s.0;
    if den.is_zero() {
        return None;
    }
    let w = (&b0.0 - &a0.0, &b0.1 - &a0.1);
    let t = (&w.0 * &s.1 - &w.1 * &s.0) / &den;
    let u = (&w.0 * &r.1 - &w.1 * &r.0) / &den;
    let unit = |x: &Q| !x.is_negative() && *x <= Q::from_integer(1.into());
    (unit(&t) && unit(&u)).then(|| (&a0.0 + &r.0 * &t, &a0.1 + &r.1 * &t))
}
