//! Planar helpers for ground-node layouts: centroids, convex hulls and the
//! minimum enclosing circle.

use crate::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Self) -> Self {
        let half = T::lit(0.5);
        Self::new((self.x + other.x) * half, (self.y + other.y) * half)
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

/// Arithmetic mean of the points. Panics on an empty slice.
pub fn mean<T: Scalar>(pts: &[Point<T>]) -> Point<T> {
    assert!(!pts.is_empty(), "mean of no points");
    let n = T::lit(pts.len() as f64);
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(a, b), p| (a + p.x, b + p.y));
    Point::new(sx / n, sy / n)
}

fn cross<T: Scalar>(o: Point<T>, a: Point<T>, b: Point<T>) -> T {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull in counter-clockwise order (Andrew's monotone chain).
/// Collinear boundary points are dropped.
pub fn convex_hull<T: Scalar>(pts: &[Point<T>]) -> Vec<Point<T>> {
    let mut p = pts.to_vec();
    p.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<Point<T>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point<T>>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= T::zero() {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

/// Area centroid of the convex hull of `pts`; falls back to [`mean`] when
/// the hull has no area.
pub fn polygon_centroid<T: Scalar>(pts: &[Point<T>]) -> Point<T> {
    let hull = convex_hull(pts);
    if hull.len() < 3 {
        return mean(pts);
    }
    let (mut a2, mut cx, mut cy) = (T::zero(), T::zero(), T::zero());
    for i in 0..hull.len() {
        let p = hull[i];
        let q = hull[(i + 1) % hull.len()];
        let c = p.x * q.y - q.x * p.y;
        a2 = a2 + c;
        cx = cx + (p.x + q.x) * c;
        cy = cy + (p.y + q.y) * c;
    }
    let scale = pts.iter().fold(T::zero(), |m, p| m.max(p.x.abs()).max(p.y.abs())).max(T::one());
    if a2.abs() <= T::epsilon() * scale * scale * T::lit(16.0) {
        return mean(pts);
    }
    let six_a = a2 * T::lit(3.0);
    Point::new(cx / six_a, cy / six_a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle<T> {
    pub center: Point<T>,
    pub radius: T,
}

impl<T: Scalar> Circle<T> {
    fn contains(&self, p: Point<T>) -> bool {
        let tol = T::lit(1e-9) * self.radius.max(T::one());
        self.center.distance(p) <= self.radius + tol
    }

    fn from_two(a: Point<T>, b: Point<T>) -> Self {
        let center = a.midpoint(b);
        Self { center, radius: center.distance(a) }
    }

    /// Circumcircle, or the widest two-point circle when the points are collinear.
    fn from_three(a: Point<T>, b: Point<T>, c: Point<T>) -> Self {
        let d = T::lit(2.0) * cross(a, b, c);
        if d.abs() <= T::epsilon() {
            let cands = [Self::from_two(a, b), Self::from_two(a, c), Self::from_two(b, c)];
            return cands.into_iter().fold(cands[0], |m, c| if c.radius > m.radius { c } else { m });
        }
        let (bx, by) = (b.x - a.x, b.y - a.y);
        let (cx, cy) = (c.x - a.x, c.y - a.y);
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = Point::new(a.x + ux, a.y + uy);
        Self { center, radius: ux.hypot(uy) }
    }
}

/// Smallest circle containing every point (Welzl's incremental form).
pub fn min_enclosing_circle<T: Scalar>(pts: &[Point<T>]) -> Circle<T> {
    assert!(!pts.is_empty(), "enclosing circle of no points");
    let mut circle = Circle { center: pts[0], radius: T::zero() };
    for i in 1..pts.len() {
        if circle.contains(pts[i]) {
            continue;
        }
        circle = Circle { center: pts[i], radius: T::zero() };
        for j in 0..i {
            if circle.contains(pts[j]) {
                continue;
            }
            circle = Circle::from_two(pts[i], pts[j]);
            for k in 0..j {
                if !circle.contains(pts[k]) {
                    circle = Circle::from_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    circle
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    #[test]
    fn right_triangle_circumcenter_is_hypotenuse_midpoint() {
        let c = min_enclosing_circle(&[p(0., 0.), p(200., 0.), p(0., 200.)]);
        assert!((c.center.x - 100.).abs() < 1e-9 && (c.center.y - 100.).abs() < 1e-9);
        assert!((c.radius - 100. * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn triangle_centroid() {
        let c = polygon_centroid(&[p(0., 0.), p(200., 0.), p(0., 200.)]);
        assert!((c.x - 200. / 3.).abs() < 1e-9 && (c.y - 200. / 3.).abs() < 1e-9);
    }

    #[test]
    fn hull_drops_interior_points() {
        let h = convex_hull(&[p(0., 0.), p(2., 0.), p(1., 1.), p(2., 2.), p(0., 2.), p(1., 0.)]);
        assert_eq!(h.len(), 4);
    }

    #[test]
    fn collinear_points_fall_back_to_mean() {
        let pts = [p(0., 0.), p(1., 1.), p(4., 4.)];
        let c = polygon_centroid(&pts);
        assert!((c.x - 5. / 3.).abs() < 1e-12);
        let mec = min_enclosing_circle(&pts);
        assert!((mec.center.x - 2.).abs() < 1e-12 && (mec.radius - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let c = min_enclosing_circle(&[Point::new(0f32, 0.), Point::new(2., 0.)]);
        assert!((c.center.x - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn enclosing_circle_contains_all_and_is_tight(
            pts in prop::collection::vec((0.0..200.0f64, 0.0..200.0f64), 1..12)
        ) {
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| p(x, y)).collect();
            let c = min_enclosing_circle(&pts);
            for q in &pts {
                prop_assert!(c.center.distance(*q) <= c.radius + 1e-7);
            }
            // no brute-force candidate circle through 2 or 3 points is smaller and still encloses
            let n = pts.len();
            let encloses = |cc: &Circle<f64>| pts.iter().all(|q| cc.center.distance(*q) <= cc.radius + 1e-7);
            for i in 0..n {
                for j in i + 1..n {
                    let c2 = Circle::from_two(pts[i], pts[j]);
                    if encloses(&c2) { prop_assert!(c.radius <= c2.radius + 1e-7); }
                    for k in j + 1..n {
                        let c3 = Circle::from_three(pts[i], pts[j], pts[k]);
                        if encloses(&c3) { prop_assert!(c.radius <= c3.radius + 1e-7); }
                    }
                }
            }
        }
    }
}
