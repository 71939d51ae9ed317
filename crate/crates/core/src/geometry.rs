//! Smooth closed curves, their uniform-parameter quadrature grids, and
//! placement of a reference inclusion as `z0 + eps * B`.

use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Shape family of a reference curve. All parametrizations are counter-clockwise
/// on `t in [0, 2pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    Circle { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// `(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`.
    Kite,
}

/// A smooth closed curve `center + scale * x_ref(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curve {
    kind: CurveKind,
    center: Point,
    scale: f64,
}

impl Curve {
    pub fn new(kind: CurveKind, center: Point, scale: f64) -> Result<Self> {
        match kind {
            CurveKind::Circle { radius } if !(radius > 0.0) => {
                return Err(Error::Geometry(format!("non-positive radius {radius}")))
            }
            CurveKind::Ellipse { a, b } if !(a > 0.0 && b > 0.0) => {
                return Err(Error::Geometry(format!("non-positive semi-axes ({a}, {b})")))
            }
            _ => {}
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Geometry(format!("non-positive scale {scale}")));
        }
        if !(center.x.is_finite() && center.y.is_finite()) {
            return Err(Error::Geometry("non-finite center".into()));
        }
        Ok(Self {
            kind,
            center,
            scale,
        })
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(CurveKind::Circle { radius }, Point::zeros(), 1.0)
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(CurveKind::Ellipse { a, b }, Point::zeros(), 1.0)
    }

    pub fn kite() -> Self {
        Self {
            kind: CurveKind::Kite,
            center: Point::zeros(),
            scale: 1.0,
        }
    }

    pub fn with_center(mut self, center: Point) -> Self {
        self.center = center;
        self
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn reference(&self, t: f64) -> [Point; 3] {
        let (s, c) = t.sin_cos();
        match self.kind {
            CurveKind::Circle { radius: r } => [
                Point::new(r * c, r * s),
                Point::new(-r * s, r * c),
                Point::new(-r * c, -r * s),
            ],
            CurveKind::Ellipse { a, b } => [
                Point::new(a * c, b * s),
                Point::new(-a * s, b * c),
                Point::new(-a * c, -b * s),
            ],
            CurveKind::Kite => {
                let (s2, c2) = (2.0 * t).sin_cos();
                [
                    Point::new(c + 0.65 * c2 - 0.65, 1.5 * s),
                    Point::new(-s - 1.3 * s2, 1.5 * c),
                    Point::new(-c - 2.6 * c2, -1.5 * s),
                ]
            }
        }
    }

    pub fn position(&self, t: f64) -> Point {
        self.center + self.reference(t)[0] * self.scale
    }

    pub fn derivative(&self, t: f64) -> Point {
        self.reference(t)[1] * self.scale
    }

    pub fn second_derivative(&self, t: f64) -> Point {
        self.reference(t)[2] * self.scale
    }

    /// Largest distance from the center to the curve, sampled.
    pub fn max_radius(&self) -> f64 {
        (0..512)
            .map(|m| (self.position(2.0 * PI * m as f64 / 512.0) - self.center).norm())
            .fold(0.0, f64::max)
    }
}

/// `D = z0 + eps * B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InclusionPlacement {
    pub reference: Curve,
    pub z0: Point,
    pub epsilon: f64,
}

impl InclusionPlacement {
    pub fn place(&self) -> Result<Curve> {
        place(self)
    }
}

/// Positions `z0 + eps * x_B(t)`; normals are unchanged and Jacobians scale by `eps`.
pub fn place(inclusion: &InclusionPlacement) -> Result<Curve> {
    let eps = inclusion.epsilon;
    if !(eps > 0.0) {
        return Err(Error::Geometry(format!("non-positive epsilon {eps}")));
    }
    let b = &inclusion.reference;
    Curve::new(b.kind, inclusion.z0 + b.center * eps, b.scale * eps)
}

/// Uniform-parameter trapezoid grid on a curve.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    curve: Curve,
    params: Vec<f64>,
    points: Vec<Point>,
    velocity: Vec<Point>,
    acceleration: Vec<Point>,
    normals: Vec<Point>,
    jacobians: Vec<f64>,
    weights: Vec<f64>,
}

/// Samples `curve` at `t_m = 2 pi m / n`. `n` must be even and at least 16.
pub fn sample_grid(curve: &Curve, n: usize) -> Result<BoundaryGrid> {
    if n % 2 != 0 {
        return Err(Error::GridSize {
            n,
            reason: "node count must be even",
        });
    }
    if n < 16 {
        return Err(Error::GridSize {
            n,
            reason: "node count must be at least 16",
        });
    }
    BoundaryGrid::build(curve, n)
}

impl BoundaryGrid {
    pub fn new(curve: &Curve, n: usize) -> Result<Self> {
        sample_grid(curve, n)
    }

    // Refinement used by near-boundary evaluation; no minimum size check.
    pub(crate) fn build(curve: &Curve, n: usize) -> Result<Self> {
        let h = 2.0 * PI / n as f64;
        let params: Vec<f64> = (0..n).map(|m| h * m as f64).collect();
        let points: Vec<Point> = params.iter().map(|&t| curve.position(t)).collect();
        let velocity: Vec<Point> = params.iter().map(|&t| curve.derivative(t)).collect();
        let acceleration: Vec<Point> = params.iter().map(|&t| curve.second_derivative(t)).collect();
        let jacobians: Vec<f64> = velocity.iter().map(|v| v.norm()).collect();
        if jacobians.iter().any(|&j| !(j > 0.0)) {
            return Err(Error::Geometry("degenerate parametrization".into()));
        }
        let normals = velocity
            .iter()
            .zip(&jacobians)
            .map(|(v, &j)| Point::new(v.y / j, -v.x / j))
            .collect();
        let weights = jacobians.iter().map(|&j| h * j).collect();
        Ok(Self {
            curve: *curve,
            params,
            points,
            velocity,
            acceleration,
            normals,
            jacobians,
            weights,
        })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn velocity(&self) -> &[Point] {
        &self.velocity
    }

    pub fn acceleration(&self) -> &[Point] {
        &self.acceleration
    }

    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn jacobians(&self) -> &[f64] {
        &self.jacobians
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Signed curvature at node `m` (positive on convex arcs).
    pub fn curvature(&self, m: usize) -> f64 {
        let v = self.velocity[m];
        let a = self.acceleration[m];
        (v.x * a.y - v.y * a.x) / self.jacobians[m].powi(3)
    }

    /// Largest arclength spacing between neighbouring nodes.
    pub fn max_spacing(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Distance from `x` to the nearest node.
    pub fn node_distance(&self, x: &Point) -> f64 {
        self.points
            .iter()
            .map(|p| (p - x).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Parameter of the closest curve point and the distance to it.
    ///
    /// Starts from the nearest node and polishes with Newton steps on
    /// `(x(t) - x) . x'(t) = 0`, each step clamped to one grid cell.
    pub fn closest_point(&self, x: &Point) -> (f64, f64) {
        let (m, _) = self
            .points
            .iter()
            .enumerate()
            .map(|(m, p)| (m, (p - x).norm_squared()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let h = 2.0 * PI / self.len() as f64;
        let mut t = self.params[m];
        for _ in 0..20 {
            let d = self.curve.position(t) - x;
            let v = self.curve.derivative(t);
            let f = d.dot(&v);
            let df = v.norm_squared() + d.dot(&self.curve.second_derivative(t));
            if df <= 0.0 {
                break;
            }
            let step = (f / df).clamp(-h, h);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        (t, (self.curve.position(t) - x).norm())
    }

    /// Distance from `x` to the curve.
    pub fn distance(&self, x: &Point) -> f64 {
        self.closest_point(x).1
    }

    /// Inside test: winding number against the nodal polygon, decided by the
    /// normal direction at the closest curve point when `x` is within a few cells.
    pub fn contains(&self, x: &Point) -> bool {
        if self.node_distance(x) < 4.0 * self.max_spacing() {
            let (t, _) = self.closest_point(x);
            let v = self.curve.derivative(t);
            let normal = Point::new(v.y, -v.x);
            return (x - self.curve.position(t)).dot(&normal) < 0.0;
        }
        let n = self.points.len();
        let mut winding = 0.0;
        for m in 0..n {
            let a = self.points[m] - x;
            let b = self.points[(m + 1) % n] - x;
            winding += (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
        }
        winding.abs() > PI
    }
}

/// Fails if any two curves come within `min_gap` of each other or one lies inside another.
pub fn check_disjoint(grids: &[BoundaryGrid], min_gap: f64) -> Result<()> {
    for i in 0..grids.len() {
        for j in (i + 1)..grids.len() {
            let (gi, gj) = (&grids[i], &grids[j]);
            let gap = gi
                .points()
                .iter()
                .map(|p| gj.node_distance(p))
                .fold(f64::INFINITY, f64::min);
            if !(gap > min_gap) || gj.contains(&gi.points()[0]) || gi.contains(&gj.points()[0]) {
                return Err(Error::NotDisjoint(i, j));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_perimeter_and_weights() {
        let g = sample_grid(&Curve::circle(1.0).unwrap(), 64).unwrap();
        for &w in g.weights() {
            assert_relative_eq!(w, 2.0 * PI / 64.0, epsilon = 1e-15);
        }
        assert_relative_eq!(g.perimeter(), 2.0 * PI, max_relative = 1e-10);
        let g3 = sample_grid(&Curve::circle(3.0).unwrap(), 32).unwrap();
        assert!(g3.jacobians().iter().all(|&j| (j - 3.0).abs() < 1e-14));
    }

    #[test]
    fn ellipse_parametrization_and_perimeter() {
        let e = Curve::ellipse(1.0, 0.6).unwrap();
        let t: f64 = 0.7;
        assert_relative_eq!(e.position(t), Point::new(t.cos(), 0.6 * t.sin()));
        let coarse = sample_grid(&e, 128).unwrap().perimeter();
        let fine = sample_grid(&e, 512).unwrap().perimeter();
        assert!((coarse - fine).abs() <= 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Curve::ellipse(0.0, 1.0).is_err());
        assert!(Curve::circle(-1.0).is_err());
        let c = Curve::circle(1.0).unwrap();
        assert!(sample_grid(&c, 15).is_err());
        assert!(sample_grid(&c, 14).is_err());
        assert!(sample_grid(&c, 17).is_err());
    }

    #[test]
    fn normals_are_unit_and_outward() {
        for curve in [
            Curve::circle(1.0).unwrap(),
            Curve::ellipse(1.0, 0.6).unwrap(),
            Curve::kite(),
        ] {
            let g = sample_grid(&curve, 128).unwrap();
            for (x, n) in g.points().iter().zip(g.normals()) {
                assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-14);
                assert!((x - curve.center()).dot(n) > 0.0);
            }
        }
    }

    #[test]
    fn placement() {
        let b = Curve::circle(1.0).unwrap();
        let d = place(&InclusionPlacement {
            reference: b,
            z0: Point::zeros(),
            epsilon: 0.1,
        })
        .unwrap();
        let g = sample_grid(&d, 64).unwrap();
        assert!(g.points().iter().all(|p| (p.norm() - 0.1).abs() < 1e-15));

        let shifted = place(&InclusionPlacement {
            reference: b,
            z0: Point::new(2.0, 1.0),
            epsilon: 1.0,
        })
        .unwrap();
        let gs = sample_grid(&shifted, 64).unwrap();
        assert!(gs
            .points()
            .iter()
            .all(|p| ((p - Point::new(2.0, 1.0)).norm() - 1.0).abs() < 1e-14));

        let kite = Curve::kite();
        let half = place(&InclusionPlacement {
            reference: kite,
            z0: Point::new(0.3, -0.2),
            epsilon: 0.5,
        })
        .unwrap();
        let full = sample_grid(&kite, 128).unwrap();
        let gh = sample_grid(&half, 128).unwrap();
        assert_relative_eq!(gh.perimeter(), 0.5 * full.perimeter(), max_relative = 1e-14);
        // sample(place(B)) is the affine image of sample(B), normals unchanged.
        for m in 0..128 {
            let expected = Point::new(0.3, -0.2) + full.points()[m] * 0.5;
            assert!((gh.points()[m] - expected).norm() < 1e-15);
            assert!((gh.normals()[m] - full.normals()[m]).norm() < 1e-15);
            assert_relative_eq!(gh.jacobians()[m], 0.5 * full.jacobians()[m], max_relative = 1e-14);
        }
        assert!(place(&InclusionPlacement {
            reference: b,
            z0: Point::zeros(),
            epsilon: 0.0
        })
        .is_err());
    }

    #[test]
    fn kite_quadrature_converges_spectrally() {
        let kite = Curve::kite();
        let integrand = |g: &BoundaryGrid| -> f64 {
            g.points()
                .iter()
                .zip(g.weights())
                .map(|(p, w)| (1.0 + p.x * p.x + (0.5 * p.y).sin()) * w)
                .sum()
        };
        for n in [160usize, 192, 224] {
            let reference = integrand(&sample_grid(&kite, 4 * n).unwrap());
            let err = (integrand(&sample_grid(&kite, n).unwrap()) - reference).abs();
            // Floor at a few ulps of the integral itself.
            let floor = 16.0 * f64::EPSILON * reference.abs();
            assert!(err < (n as f64).powi(-6) + floor, "n = {n}: err = {err:e}");
        }
    }

    #[test]
    fn disjointness() {
        let a = sample_grid(&Curve::circle(0.5).unwrap().with_center(Point::new(-1.0, 0.0)), 64).unwrap();
        let b = sample_grid(&Curve::circle(0.5).unwrap().with_center(Point::new(1.0, 0.0)), 64).unwrap();
        assert!(check_disjoint(&[a.clone(), b], 0.0).is_ok());
        let c = sample_grid(&Curve::circle(0.2).unwrap().with_center(Point::new(-1.0, 0.0)), 64).unwrap();
        assert!(check_disjoint(&[a.clone(), c], 0.0).is_err());
        let d = sample_grid(&Curve::circle(0.6).unwrap().with_center(Point::new(0.0, 0.0)), 64).unwrap();
        assert!(check_disjoint(&[a, d], 0.0).is_err());
    }

    #[test]
    fn curvature_of_circle() {
        let g = sample_grid(&Curve::circle(2.0).unwrap(), 32).unwrap();
        for m in 0..32 {
            assert_relative_eq!(g.curvature(m), 0.5, epsilon = 1e-14);
        }
    }
}
