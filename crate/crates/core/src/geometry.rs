//! Planar geometry: SE(2) poses, object footprints, workspace containment and
//! the two-phase (bounding disc, then separating axis) collision checker.
//!
//! Curved footprints are checked through a fixed-resolution inscribed polygon
//! while their cached area and perimeter are those of the exact shape.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on separating-axis projections and workspace bounds.
pub const EPS: f64 = 1e-9;

/// Vertex count of the polygon standing in for ellipses and discs.
pub const CURVE_SEGMENTS: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counterclockwise rotation by `theta` radians.
    pub fn rotate(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// An object pose `(x, y, theta)` with `theta` kept in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Position within `tol` on both axes and heading within `tol` radians
    /// (measured around the circle).
    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        let dtheta = (self.theta - other.theta).abs();
        (self.x - other.x).abs() <= tol
            && (self.y - other.y).abs() <= tol
            && dtheta.min(TAU - dtheta) <= tol
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }
}

impl From<[f64; 3]> for Pose {
    fn from(a: [f64; 3]) -> Self {
        Pose::new(a[0], a[1], a[2])
    }
}

fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Axis-aligned rectangle `[0, width] x [0, height]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "h")]
    pub height: f64,
}

impl Workspace {
    pub fn new(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
            return Err(Error::Domain(format!(
                "workspace dimensions must be positive, got {width} x {height}"
            )));
        }
        Ok(Workspace { width, height })
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace {
            width: 10.0,
            height: 10.0,
        }
    }
}

/// Exact description of a footprint in its body frame.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Rectangle of the given side lengths, centered at the body origin.
    Rect { width: f64, height: f64 },
    /// Ellipse with semi-axis `a` along body x and `b` along body y.
    Ellipse { a: f64, b: f64 },
    Disc { radius: f64 },
    /// Convex polygon, vertices counterclockwise in the body frame.
    Polygon { vertices: Vec<Point> },
}

/// An object's 2D footprint together with its derived quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct Footprint {
    shape: Shape,
    outline: Vec<Point>,
    area: f64,
    perimeter: f64,
    bounding_radius: f64,
}

impl Footprint {
    pub fn new(shape: Shape) -> Result<Self> {
        let positive = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{what} must be positive, got {v}")))
            }
        };
        let (outline, area, perimeter) = match &shape {
            Shape::Rect { width, height } => {
                positive(*width, "rectangle width")?;
                positive(*height, "rectangle height")?;
                let (hw, hh) = (width / 2.0, height / 2.0);
                let outline = vec![
                    Point::new(-hw, -hh),
                    Point::new(hw, -hh),
                    Point::new(hw, hh),
                    Point::new(-hw, hh),
                ];
                (outline, width * height, 2.0 * (width + height))
            }
            Shape::Ellipse { a, b } => {
                positive(*a, "ellipse semi-axis")?;
                positive(*b, "ellipse semi-axis")?;
                (
                    curve_outline(*a, *b),
                    PI * a * b,
                    ellipse_perimeter(*a, *b),
                )
            }
            Shape::Disc { radius } => {
                positive(*radius, "disc radius")?;
                (
                    curve_outline(*radius, *radius),
                    PI * radius * radius,
                    TAU * radius,
                )
            }
            Shape::Polygon { vertices } => {
                check_convex_ccw(vertices)?;
                (
                    vertices.clone(),
                    polygon_area(vertices),
                    polygon_perimeter(vertices),
                )
            }
        };
        let bounding_radius = outline.iter().map(|p| p.norm()).fold(0.0, f64::max);
        Ok(Footprint {
            shape,
            outline,
            area,
            perimeter,
            bounding_radius,
        })
    }

    pub fn rect(width: f64, height: f64) -> Result<Self> {
        Footprint::new(Shape::Rect { width, height })
    }

    pub fn square(side: f64) -> Result<Self> {
        Footprint::rect(side, side)
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Footprint::new(Shape::Ellipse { a, b })
    }

    pub fn disc(radius: f64) -> Result<Self> {
        Footprint::new(Shape::Disc { radius })
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self> {
        Footprint::new(Shape::Polygon { vertices })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Body-frame convex polygon used for collision tests.
    pub fn outline(&self) -> &[Point] {
        &self.outline
    }

    /// Exact area of the shape.
    pub fn area(&self) -> f64 {
        self.area
    }

    /// Exact perimeter of the shape.
    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// Radius of the smallest origin-centered disc containing the outline.
    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    /// Smallest distance from the body origin to an outline edge line. No
    /// pose whose center is closer than this to the workspace boundary can
    /// be inside the workspace, whatever the heading.
    pub fn inner_margin(&self) -> f64 {
        let n = self.outline.len();
        (0..n)
            .map(|i| {
                let a = self.outline[i];
                let b = self.outline[(i + 1) % n];
                (b - a).cross(Point::new(0.0, 0.0) - a) / (b - a).norm()
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Long-to-short side (or semi-axis) ratio; 1 for discs and polygons.
    pub fn aspect_ratio(&self) -> f64 {
        match self.shape {
            Shape::Rect { width, height } => width.max(height) / width.min(height),
            Shape::Ellipse { a, b } => a.max(b) / a.min(b),
            Shape::Disc { .. } | Shape::Polygon { .. } => 1.0,
        }
    }

    /// Same shape uniformly scaled by `factor` in linear size.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let shape = match &self.shape {
            Shape::Rect { width, height } => Shape::Rect {
                width: width * factor,
                height: height * factor,
            },
            Shape::Ellipse { a, b } => Shape::Ellipse {
                a: a * factor,
                b: b * factor,
            },
            Shape::Disc { radius } => Shape::Disc {
                radius: radius * factor,
            },
            Shape::Polygon { vertices } => Shape::Polygon {
                vertices: vertices.iter().map(|&v| v * factor).collect(),
            },
        };
        Footprint::new(shape)
    }
}

fn curve_outline(a: f64, b: f64) -> Vec<Point> {
    (0..CURVE_SEGMENTS)
        .map(|k| {
            let t = TAU * k as f64 / CURVE_SEGMENTS as f64;
            Point::new(a * t.cos(), b * t.sin())
        })
        .collect()
}

/// Ramanujan's second approximation of an ellipse perimeter.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let h = ((a - b) / (a + b)).powi(2);
    PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
}

pub fn polygon_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

pub fn polygon_perimeter(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| (vertices[(i + 1) % n] - vertices[i]).norm())
        .sum()
}

fn check_convex_ccw(vertices: &[Point]) -> Result<()> {
    let n = vertices.len();
    if n < 3 {
        return Err(Error::Domain(format!(
            "polygon needs at least 3 vertices, got {n}"
        )));
    }
    if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
        return Err(Error::Domain("polygon vertex is not finite".into()));
    }
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        if (b - a).cross(c - b) <= EPS {
            return Err(Error::Domain(format!(
                "polygon is not strictly convex and counterclockwise at vertex {}",
                (i + 1) % n
            )));
        }
    }
    // a star polygon has all left turns but winds more than once
    let winding: f64 = (0..n)
        .map(|i| {
            let e0 = vertices[(i + 1) % n] - vertices[i];
            let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            e0.cross(e1).atan2(e0.dot(e1))
        })
        .sum();
    if (winding - TAU).abs() > 1e-6 {
        return Err(Error::Domain("polygon winds more than once".into()));
    }
    Ok(())
}

/// World-frame outline of `footprint` placed at `pose`, vertex order preserved.
pub fn transform(footprint: &Footprint, pose: &Pose) -> Vec<Point> {
    let (s, c) = pose.theta.sin_cos();
    footprint
        .outline
        .iter()
        .map(|v| Point::new(pose.x + c * v.x - s * v.y, pose.y + s * v.x + c * v.y))
        .collect()
}

/// Bounding-disc test. `false` guarantees the placed footprints are disjoint.
pub fn broad_phase_overlap(
    fp_a: &Footprint,
    pose_a: &Pose,
    fp_b: &Footprint,
    pose_b: &Pose,
) -> bool {
    let reach = fp_a.bounding_radius + fp_b.bounding_radius;
    let dx = pose_a.x - pose_b.x;
    let dy = pose_a.y - pose_b.y;
    dx * dx + dy * dy <= reach * reach
}

/// Separating-axis test on two convex world-frame polygons. Touching
/// boundaries do not count as an overlap.
pub fn polygons_overlap(a: &[Point], b: &[Point]) -> bool {
    !has_separating_axis(a, b) && !has_separating_axis(b, a)
}

fn has_separating_axis(edges_of: &[Point], other: &[Point]) -> bool {
    let n = edges_of.len();
    (0..n).any(|i| {
        let edge = edges_of[(i + 1) % n] - edges_of[i];
        let axis = Point::new(-edge.y, edge.x);
        let len = axis.norm();
        if len == 0.0 {
            return false;
        }
        let axis = axis * (1.0 / len);
        let (min_a, max_a) = project(edges_of, axis);
        let (min_b, max_b) = project(other, axis);
        max_a <= min_b + EPS || max_b <= min_a + EPS
    })
}

fn project(poly: &[Point], axis: Point) -> (f64, f64) {
    poly.iter()
        .map(|p| p.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        })
}

/// Narrow phase only: separating-axis test on the placed outlines.
pub fn collide_narrow(fp_a: &Footprint, pose_a: &Pose, fp_b: &Footprint, pose_b: &Pose) -> bool {
    polygons_overlap(&transform(fp_a, pose_a), &transform(fp_b, pose_b))
}

/// Two-phase collision check: bounding discs first, then separating axes.
pub fn collide(fp_a: &Footprint, pose_a: &Pose, fp_b: &Footprint, pose_b: &Pose) -> bool {
    broad_phase_overlap(fp_a, pose_a, fp_b, pose_b) && collide_narrow(fp_a, pose_a, fp_b, pose_b)
}

/// Every outline vertex lies inside the workspace rectangle.
pub fn in_workspace(footprint: &Footprint, pose: &Pose, ws: &Workspace) -> bool {
    transform(footprint, pose).iter().all(|p| {
        p.x >= -EPS && p.x <= ws.width + EPS && p.y >= -EPS && p.y <= ws.height + EPS
    })
}

/// Area of the region of disc centers at which a disc of radius `disc_radius`
/// overlaps `footprint`: `S_P + π r² + r C_P`.
pub fn minkowski_area(footprint: &Footprint, disc_radius: f64) -> Result<f64> {
    if !(disc_radius >= 0.0 && disc_radius.is_finite()) {
        return Err(Error::Domain(format!(
            "disc radius must be nonnegative, got {disc_radius}"
        )));
    }
    Ok(footprint.area + PI * disc_radius * disc_radius + disc_radius * footprint.perimeter)
}

/// Probability that a disc of radius `disc_radius`, placed uniformly with its
/// whole body in the workspace, overlaps `footprint` placed away from the
/// boundary. Clamped to `[0, 1]`.
pub fn collision_probability(footprint: &Footprint, disc_radius: f64, ws: &Workspace) -> Result<f64> {
    let area = minkowski_area(footprint, disc_radius)?;
    let free = (ws.height - 2.0 * disc_radius) * (ws.width - 2.0 * disc_radius);
    if 2.0 * disc_radius >= ws.width.min(ws.height) {
        return Err(Error::Domain(format!(
            "disc diameter {} does not fit in a {} x {} workspace",
            2.0 * disc_radius,
            ws.width,
            ws.height
        )));
    }
    Ok((area / free).clamp(0.0, 1.0))
}
