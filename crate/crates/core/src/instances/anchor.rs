//! Concave inverse demand pinned down by value/slope anchors.
//!
//! Between two consecutive anchors the interpolant consists of two quadratic
//! pieces that meet at a point where the slope equals the secant slope of the
//! segment. Both pieces are concave and the joint is C¹. When the secant
//! coincides with one of the endpoint slopes the corresponding piece has zero
//! width and the interpolant is linear with a kink at that anchor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance within which a query point is treated as the anchor itself.
const SNAP_TOL: f64 = 1e-12;
/// Relative slack on the secant-slope feasibility check.
const SECANT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub q: f64,
    pub v: f64,
    pub s: f64,
}

impl Anchor {
    pub fn new(q: f64, v: f64, s: f64) -> Self {
        Anchor { q, v, s }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Piece {
    start: f64,
    end: f64,
    v0: f64,
    s0: f64,
    curvature: f64,
}

impl Piece {
    fn value(&self, q: f64) -> f64 {
        let d = q - self.start;
        self.v0 + self.s0 * d + 0.5 * self.curvature * d * d
    }

    fn slope(&self, q: f64) -> f64 {
        self.s0 + self.curvature * (q - self.start)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Anchor>", into = "Vec<Anchor>")]
pub struct ConcaveAnchorPrice {
    anchors: Vec<Anchor>,
    pieces: Vec<Piece>,
}

impl TryFrom<Vec<Anchor>> for ConcaveAnchorPrice {
    type Error = Error;

    fn try_from(anchors: Vec<Anchor>) -> Result<Self> {
        ConcaveAnchorPrice::new(anchors)
    }
}

impl From<ConcaveAnchorPrice> for Vec<Anchor> {
    fn from(price: ConcaveAnchorPrice) -> Self {
        price.anchors
    }
}

impl ConcaveAnchorPrice {
    pub fn new(anchors: Vec<Anchor>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidAnchors(
                "at least one anchor is required".into(),
            ));
        }
        for a in &anchors {
            if !(a.q.is_finite() && a.v.is_finite() && a.s.is_finite()) {
                return Err(Error::InvalidAnchors(format!("non-finite anchor {a:?}")));
            }
            if a.q < 0.0 {
                return Err(Error::InvalidAnchors(format!("negative quantity in {a:?}")));
            }
        }

        let mut pieces = Vec::with_capacity(2 * anchors.len());
        for (k, pair) in anchors.windows(2).enumerate() {
            let (lo, hi) = (pair[0], pair[1]);
            let h = hi.q - lo.q;
            if h <= 0.0 {
                return Err(Error::InvalidAnchors(format!(
                    "anchor quantities must be strictly increasing (index {})",
                    k + 1
                )));
            }
            if hi.s >= lo.s {
                return Err(Error::InvalidAnchors(format!(
                    "slopes must be strictly decreasing (index {})",
                    k + 1
                )));
            }
            let secant = (hi.v - lo.v) / h;
            let slack = SECANT_TOL * (1.0 + lo.s.abs().max(hi.s.abs()));
            if secant > lo.s + slack || secant < hi.s - slack {
                return Err(Error::InvalidAnchors(format!(
                    "secant slope {secant} outside [{}, {}] between anchors {k} and {}",
                    hi.s,
                    lo.s,
                    k + 1
                )));
            }

            // Joining at fraction `beta` of the segment makes the joint slope equal the secant.
            let beta = ((secant - hi.s) / (lo.s - hi.s)).clamp(0.0, 1.0);
            let join = lo.q + beta * h;
            let left_width = beta * h;
            let right_width = h - left_width;
            if left_width > 0.0 {
                pieces.push(Piece {
                    start: lo.q,
                    end: join,
                    v0: lo.v,
                    s0: lo.s,
                    curvature: (secant - lo.s) / left_width,
                });
            }
            if right_width > 0.0 {
                pieces.push(Piece {
                    start: join,
                    end: hi.q,
                    v0: lo.v + 0.5 * (lo.s + secant) * left_width,
                    s0: secant,
                    curvature: (hi.s - secant) / right_width,
                });
            }
        }

        Ok(ConcaveAnchorPrice { anchors, pieces })
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    fn snapped(&self, q: f64) -> Option<&Anchor> {
        let idx = self.anchors.partition_point(|a| a.q < q);
        [idx.checked_sub(1), Some(idx)]
            .into_iter()
            .flatten()
            .filter_map(|i| self.anchors.get(i))
            .find(|a| (a.q - q).abs() <= SNAP_TOL * a.q.abs().max(1.0))
    }

    fn piece(&self, q: f64) -> Option<&Piece> {
        let idx = self.pieces.partition_point(|p| p.end < q);
        self.pieces.get(idx).filter(|p| p.start <= q)
    }

    /// Price at total quantity `q`; anchors are reproduced exactly.
    pub fn value(&self, q: f64) -> f64 {
        if let Some(a) = self.snapped(q) {
            return a.v;
        }
        let first = self.anchors[0];
        let last = self.anchors[self.anchors.len() - 1];
        if q < first.q {
            return first.v + first.s * (q - first.q);
        }
        if q > last.q {
            return last.v + last.s * (q - last.q);
        }
        match self.piece(q) {
            Some(p) => p.value(q),
            None => last.v,
        }
    }

    /// Derivative of the price at `q`. At an anchor this is the anchor slope.
    pub fn slope(&self, q: f64) -> f64 {
        if let Some(a) = self.snapped(q) {
            return a.s;
        }
        let first = self.anchors[0];
        let last = self.anchors[self.anchors.len() - 1];
        if q < first.q {
            return first.s;
        }
        if q > last.q {
            return last.s;
        }
        match self.piece(q) {
            Some(p) => p.slope(q),
            None => last.s,
        }
    }

    /// The same curve moved up by `delta` (a price shock).
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        ConcaveAnchorPrice::new(
            self.anchors
                .iter()
                .map(|a| Anchor::new(a.q, a.v + delta, a.s))
                .collect(),
        )
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        ConcaveAnchorPrice::new(
            self.anchors
                .iter()
                .map(|a| Anchor::new(a.q, a.v * alpha, a.s * alpha))
                .collect(),
        )
    }

    /// True when every joint between pieces has matching one-sided slopes.
    pub fn is_smooth(&self) -> bool {
        self.anchors.windows(2).all(|pair| {
            let secant = (pair[1].v - pair[0].v) / (pair[1].q - pair[0].q);
            secant < pair[0].s && secant > pair[1].s
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_shock_curve(k: f64) -> ConcaveAnchorPrice {
        ConcaveAnchorPrice::new(vec![
            Anchor::new(1.0, 1.0, -1.0),
            Anchor::new(1.0 + 1.0 / k, 1.0 - 2.0 / k, -k),
        ])
        .unwrap()
    }

    #[test]
    fn anchors_are_reproduced_exactly() {
        let p = small_shock_curve(4.0);
        assert_eq!(p.value(1.0), 1.0);
        assert_eq!(p.slope(1.0), -1.0);
        assert_eq!(p.value(1.25), 0.5);
        assert_eq!(p.slope(1.25), -4.0);
    }

    #[test]
    fn joint_slope_is_the_secant() {
        let p = small_shock_curve(4.0);
        // secant -2 sits in [-4, -1]; beta = (-2 + 4) / 3
        let join = 1.0 + (2.0 / 3.0) * 0.25;
        assert!((p.slope(join) + 2.0).abs() < 1e-12);
        let left = p.slope(join - 1e-9);
        let right = p.slope(join + 1e-9);
        assert!((left - right).abs() < 1e-6);
        assert!(p.is_smooth());
    }

    #[test]
    fn linear_extension_outside_anchor_range() {
        let p = small_shock_curve(4.0);
        assert!((p.value(0.5) - 1.5).abs() < 1e-15);
        assert!((p.value(1.5) - (0.5 - 4.0 * 0.25)).abs() < 1e-15);
        assert_eq!(p.slope(3.0), -4.0);
    }

    #[test]
    fn rejects_non_concave_anchors() {
        let err = ConcaveAnchorPrice::new(vec![
            Anchor::new(0.0, 1.0, -2.0),
            Anchor::new(1.0, 0.0, -1.0),
        ]);
        assert!(err.is_err());
        let err = ConcaveAnchorPrice::new(vec![
            Anchor::new(0.0, 1.0, -1.0),
            Anchor::new(1.0, 1.5, -2.0),
        ]);
        assert!(err.is_err());
        let err = ConcaveAnchorPrice::new(vec![
            Anchor::new(1.0, 1.0, -1.0),
            Anchor::new(1.0, 0.0, -2.0),
        ]);
        assert!(err.is_err());
    }

    #[test]
    fn secant_on_boundary_gives_kinked_interpolant() {
        let p = ConcaveAnchorPrice::new(vec![
            Anchor::new(0.0, 1.0, -0.5),
            Anchor::new(1.0, 0.0, -1.0),
        ])
        .unwrap();
        assert!(!p.is_smooth());
        assert_eq!(p.slope(0.0), -0.5);
        assert!((p.slope(0.5) + 1.0).abs() < 1e-15);
        assert!((p.value(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shift_moves_values_only() {
        let p = small_shock_curve(8.0).shifted(0.375).unwrap();
        assert_eq!(p.value(1.0), 1.375);
        assert_eq!(p.slope(1.0), -1.0);
    }
}
