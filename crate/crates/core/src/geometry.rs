//! Quadric-of-revolution mirrors and the perspective camera that looks at them.
//!
//! The mirror is `Ω(r) = x² + y² + A z² + B z − C = 0`, symmetric about the
//! z-axis. Rigs are kept in canonical coordinates where the camera center has
//! `c = [0, c₂, c₃]` with `c₂ ≥ 0`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::search;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Unit line direction. Lines are unoriented, so `s` and `-s` describe the
/// same bundle of parallel lines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction(Vec3);

impl Direction {
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n < 1e-300 {
            return Err(Error::InvalidInput(format!("direction {v:?} is zero or not finite")));
        }
        Ok(Direction(v / n))
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::new(Vec3::new(x, y, z))
    }

    pub fn vec(&self) -> Vec3 {
        self.0
    }

    pub fn flipped(&self) -> Self {
        Direction(-self.0)
    }

    /// Angle between the two lines, ignoring orientation, in radians.
    pub fn line_angle(&self, other: &Direction) -> f64 {
        line_angle(&self.0, &other.0)
    }
}

/// Angle in `[0, π/2]` between the lines spanned by `a` and `b`.
pub fn line_angle(a: &Vec3, b: &Vec3) -> f64 {
    let cross = a.cross(b).norm();
    let dot = a.dot(b).abs();
    cross.atan2(dot)
}

/// Coefficients of the quadric of revolution, plus an optional z-window that
/// selects the physical part of the surface (e.g. one sheet of a
/// two-sheet hyperboloid).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MirrorShape {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
}

impl MirrorShape {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidInput("mirror coefficients must be finite".into()));
        }
        let shape = MirrorShape { a, b, c, z_min: None, z_max: None };
        if !shape.is_non_empty() {
            return Err(Error::EmptySurface { a, b, c });
        }
        Ok(shape)
    }

    /// Sphere of the given radius centered at the origin (A = 1, B = 0).
    pub fn spherical(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("sphere radius must be positive".into()));
        }
        Self::new(1.0, 0.0, radius * radius)
    }

    /// Ellipsoid of revolution `x² + y² + A z² = C` with `A > 0`.
    pub fn ellipsoid(a: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && c > 0.0) {
            return Err(Error::InvalidInput("ellipsoid needs A > 0 and C > 0".into()));
        }
        Self::new(a, 0.0, c)
    }

    /// `x² + y² + B z = 0` (A = 0, C = 0): the "ellipsoid axial" row of the
    /// degree table, geometrically a paraboloid.
    pub fn paraboloid(b: f64) -> Result<Self> {
        if b == 0.0 {
            return Err(Error::InvalidInput("paraboloid needs B != 0".into()));
        }
        Self::new(0.0, b, 0.0)
    }

    /// Cone `x² + y² + A z² = 0` with `A < 0` (B = 0, C = 0).
    pub fn conical(a: f64) -> Result<Self> {
        if !(a < 0.0) {
            return Err(Error::InvalidInput("cone needs A < 0".into()));
        }
        Self::new(a, 0.0, 0.0)
    }

    /// Cylinder `x² + y² = C` (A = 0, B = 0).
    pub fn cylindrical(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("cylinder radius must be positive".into()));
        }
        Self::new(0.0, 0.0, radius * radius)
    }

    /// Two-sheet hyperboloid `(z − z0)²/a² − ρ²/b² = 1`. Only the sheet on the
    /// requested side is kept; `rim` bounds how far the sheet extends from
    /// its vertex.
    pub fn hyperboloid(semi_a: f64, semi_b: f64, z0: f64, upper_sheet: bool, rim: f64) -> Result<Self> {
        if !(semi_a > 0.0 && semi_b > 0.0 && rim > 0.0) {
            return Err(Error::InvalidInput("hyperboloid semi-axes and rim must be positive".into()));
        }
        let k = semi_b * semi_b / (semi_a * semi_a);
        let shape = Self::new(-k, 2.0 * k * z0, k * z0 * z0 - semi_b * semi_b)?;
        Ok(if upper_sheet {
            shape.with_window(Some(z0 + semi_a - 1e-9), Some(z0 + semi_a + rim))
        } else {
            shape.with_window(Some(z0 - semi_a - rim), Some(z0 - semi_a + 1e-9))
        })
    }

    pub fn with_window(mut self, z_min: Option<f64>, z_max: Option<f64>) -> Self {
        self.z_min = z_min;
        self.z_max = z_max;
        self
    }

    fn is_non_empty(&self) -> bool {
        // Need some z with C - A z² - B z >= 0.
        if self.a > 0.0 {
            self.c + self.b * self.b / (4.0 * self.a) >= 0.0
        } else if self.a < 0.0 || self.b != 0.0 {
            true
        } else {
            self.c >= 0.0
        }
    }

    pub fn eval(&self, r: &Vec3) -> f64 {
        r.x * r.x + r.y * r.y + self.a * r.z * r.z + self.b * r.z - self.c
    }

    /// Squared radius of the mirror's cross-section at height `z`.
    pub fn radius_sq(&self, z: f64) -> f64 {
        self.c - self.a * z * z - self.b * z
    }

    /// Half-gradient `[x, y, A z + B/2]`.
    pub fn gradient(&self, r: &Vec3) -> Vec3 {
        Vec3::new(r.x, r.y, self.a * r.z + 0.5 * self.b)
    }

    pub fn in_window(&self, z: f64) -> bool {
        const SLACK: f64 = 1e-12;
        self.z_min.is_none_or(|lo| z >= lo - SLACK) && self.z_max.is_none_or(|hi| z <= hi + SLACK)
    }

    /// Characteristic length used to scale tolerances.
    pub fn scale(&self) -> f64 {
        1.0_f64.max(self.c.abs().sqrt()).max(self.b.abs())
    }

    /// Points where the surface meets the symmetry axis (inside the window).
    pub fn axis_points(&self) -> Vec<f64> {
        let mut zs = Vec::new();
        // A z² + B z − C = 0
        if self.a.abs() > 1e-300 {
            let disc = self.b * self.b + 4.0 * self.a * self.c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let q = -0.5 * (self.b + self.b.signum_or_one() * sq);
                if q != 0.0 {
                    zs.push(q / self.a);
                    zs.push(-self.c / q);
                } else {
                    zs.push(0.0);
                }
            }
        } else if self.b.abs() > 1e-300 {
            zs.push(self.c / self.b);
        }
        zs.retain(|z| self.in_window(*z));
        zs.sort_by(|a, b| a.total_cmp(b));
        zs.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        zs
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidInput("intrinsics need positive finite focal lengths".into()));
        }
        Ok(Intrinsics { fx, fy, cx, cy })
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Intrinsics { fx: 500.0, fy: 500.0, cx: 320.0, cy: 320.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Pixel { u, v }
    }

    pub fn distance(&self, other: &Pixel) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// A point on the mirror surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MirrorPoint {
    pub r: Vec3,
}

impl MirrorPoint {
    /// Validates that `r` lies on the surface within `1e-9` (relative to `1 + |r|²`).
    pub fn on(shape: &MirrorShape, r: Vec3) -> Result<Self> {
        let tol = 1e-9 * (1.0 + r.norm_squared());
        let res = shape.eval(&r);
        if !(res.abs() <= tol) {
            return Err(Error::InvalidInput(format!("point {r:?} is off the mirror (Ω = {res:e})")));
        }
        Ok(MirrorPoint { r })
    }

    pub fn new_unchecked(r: Vec3) -> Self {
        MirrorPoint { r }
    }
}

/// Line in Plücker coordinates: unit direction `s` and moment `m = q × s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlueckerLine {
    pub s: Vec3,
    pub m: Vec3,
}

impl PlueckerLine {
    pub fn new(s: Vec3, m: Vec3) -> Result<Self> {
        if ((s.norm() - 1.0).abs() > 1e-12) || s.dot(&m).abs() > 1e-12 * (1.0 + m.norm()) {
            return Err(Error::InvalidInput("Plücker coordinates violate |s| = 1, <s, m> = 0".into()));
        }
        Ok(PlueckerLine { s, m })
    }

    pub fn through(q: &Vec3, dir: &Vec3) -> Result<Self> {
        let s = Direction::new(*dir)?.vec();
        Ok(PlueckerLine { s, m: q.cross(&s) })
    }

    /// Point on the line closest to the origin.
    pub fn closest_to_origin(&self) -> Vec3 {
        self.s.cross(&self.m)
    }

    pub fn point_at(&self, lambda: f64) -> Vec3 {
        self.closest_to_origin() + lambda * self.s
    }

    pub fn distance_to(&self, p: &Vec3) -> f64 {
        (p.cross(&self.s) - self.m).norm()
    }

    /// Parameter of the orthogonal projection of `p` onto the line.
    pub fn project_param(&self, p: &Vec3) -> f64 {
        (p - self.closest_to_origin()).dot(&self.s)
    }

    /// The same line expressed in a frame where `X' = R X + t`.
    pub fn transformed(&self, rot: &Mat3, t: &Vec3) -> Self {
        let s = rot * self.s;
        PlueckerLine { s, m: rot * self.m + t.cross(&s) }
    }
}

/// Orthonormal pinhole frame: `w` is the viewing axis, `u`/`v` the image axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraFrame {
    pub u: Vec3,
    pub v: Vec3,
    pub w: Vec3,
}

/// Mirror, camera center and pinhole intrinsics in canonical coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraRig {
    pub shape: MirrorShape,
    pub center: Vec3,
    pub intrinsics: Intrinsics,
    /// Rotation about z that took the raw camera center to canonical form.
    pub world_rotation: Mat3,
    pub frame: CameraFrame,
}

impl CameraRig {
    pub fn c2(&self) -> f64 {
        self.center.y
    }

    pub fn c3(&self) -> f64 {
        self.center.z
    }

    pub fn is_axial(&self) -> bool {
        self.center.y.abs() <= 1e-12 * self.scale()
    }

    pub fn scale(&self) -> f64 {
        self.shape.scale().max(self.center.norm())
    }

    /// Same mirror and intrinsics, camera moved to `raw_center`.
    pub fn with_center(&self, raw_center: Vec3) -> Result<CameraRig> {
        canonicalize_rig(self.shape, raw_center, self.intrinsics)
    }
}

/// Rotate the world about the mirror axis so the camera center becomes
/// `[0, c₂, c₃]` with `c₂ ≥ 0`.
pub fn canonicalize_rig(shape: MirrorShape, raw_center: Vec3, intrinsics: Intrinsics) -> Result<CameraRig> {
    if !raw_center.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("camera center must be finite".into()));
    }
    let theta = raw_center.x.atan2(raw_center.y);
    let (sin, cos) = if raw_center.x == 0.0 && raw_center.y >= 0.0 { (0.0, 1.0) } else { theta.sin_cos() };
    let rot = Mat3::new(cos, -sin, 0.0, sin, cos, 0.0, 0.0, 0.0, 1.0);
    let mut center = rot * raw_center;
    center.x = 0.0;
    let omega = shape.eval(&center);
    if omega.abs() <= 1e-12 * (1.0 + center.norm_squared()) {
        return Err(Error::CenterOnMirror);
    }
    let frame = camera_frame(&shape, &center);
    Ok(CameraRig { shape, center, intrinsics, world_rotation: rot, frame })
}

fn camera_frame(shape: &MirrorShape, center: &Vec3) -> CameraFrame {
    let target = shape
        .axis_points()
        .into_iter()
        .map(|z| Vec3::new(0.0, 0.0, z))
        .min_by(|a, b| (a - center).norm().total_cmp(&(b - center).norm()))
        .unwrap_or_else(Vec3::zeros);
    let mut w = target - center;
    if w.norm() < 1e-9 {
        w = Vec3::new(0.0, 0.0, if center.z > 0.0 { -1.0 } else { 1.0 });
    }
    let w = w.normalize();
    let mut u = Vec3::x() - w * w.x;
    if u.norm() < 1e-6 {
        u = Vec3::y() - w * w.y;
    }
    let u = u.normalize();
    let v = w.cross(&u);
    CameraFrame { u, v, w }
}

/// `Ω(r)`.
pub fn mirror_eval(shape: &MirrorShape, r: &Vec3) -> f64 {
    shape.eval(r)
}

/// Unnormalized mirror normal `[x, y, A z + B/2]`; fails at a cone apex.
pub fn mirror_normal(shape: &MirrorShape, r: &Vec3) -> Result<Vec3> {
    let n = shape.gradient(r);
    if n.norm() <= 1e-14 * (1.0 + r.norm()) {
        return Err(Error::DegenerateNormal([r.x, r.y, r.z]));
    }
    Ok(n)
}

/// Intersection of the normal line through `r` with the mirror axis, `r − n(r)`.
pub fn axis_point(shape: &MirrorShape, r: &Vec3) -> Vec3 {
    Vec3::new(0.0, 0.0, r.z - shape.a * r.z - 0.5 * shape.b)
}

/// Mirror reflection of `d_in` about the plane with normal `n`, unit length.
pub fn reflect_direction(n: &Vec3, d_in: &Vec3) -> Result<Vec3> {
    let nn = n.norm_squared();
    if nn <= 1e-300 {
        return Err(Error::InvalidInput("zero normal".into()));
    }
    if d_in.norm_squared() <= 1e-300 {
        return Err(Error::InvalidInput("zero incident direction".into()));
    }
    let d = nn * d_in - 2.0 * n.dot(d_in) * n;
    Ok(d.normalize())
}

/// Direction into the scene of the camera ray reflected at `r`.
pub fn scene_direction_at(rig: &CameraRig, r: &Vec3) -> Result<Vec3> {
    let n = mirror_normal(&rig.shape, r)?;
    let d_in = r - rig.center;
    reflect_direction(&n, &d_in)
}

/// Reflection quantities as polynomials in `(y, z)` after replacing `x²`
/// through the mirror equation. With `d̃ = r − c` and `n` the half-gradient:
/// `h = ‖n‖²`, `g = ⟨d̃, n⟩`, and the unnormalized reflected ray is
/// `d = h d̃ − 2 g n = [x (h − 2g), d2, d3]`.
#[derive(Clone, Copy, Debug)]
pub struct ReducedReflection {
    pub x_sq: f64,
    pub h: f64,
    pub g: f64,
    pub d2: f64,
    pub d3: f64,
}

impl ReducedReflection {
    /// Coefficient of `x` in `d1`.
    pub fn d1_over_x(&self) -> f64 {
        self.h - 2.0 * self.g
    }
}

pub fn reduced_reflection(rig: &CameraRig, y: f64, z: f64) -> ReducedReflection {
    let s = &rig.shape;
    let (c2, c3) = (rig.c2(), rig.c3());
    let x_sq = s.radius_sq(z) - y * y;
    let m = s.a * z + 0.5 * s.b;
    let h = x_sq + y * y + m * m;
    let g = x_sq + y * (y - c2) + m * (z - c3);
    let d2 = h * (y - c2) - 2.0 * g * y;
    let d3 = h * (z - c3) - 2.0 * g * m;
    ReducedReflection { x_sq, h, g, d2, d3 }
}

/// Positive ray parameters (ascending) where `origin + t·dir` meets the
/// windowed mirror.
pub fn ray_mirror_hits(shape: &MirrorShape, origin: &Vec3, dir: &Vec3) -> Vec<f64> {
    let qa = dir.x * dir.x + dir.y * dir.y + shape.a * dir.z * dir.z;
    let qb = 2.0 * (origin.x * dir.x + origin.y * dir.y + shape.a * origin.z * dir.z) + shape.b * dir.z;
    let qc = shape.eval(origin);
    let mut ts = Vec::with_capacity(2);
    let lin_scale = qb.abs() + qc.abs();
    if qa.abs() <= 1e-14 * (lin_scale + dir.norm_squared()) {
        if qb.abs() > 1e-300 {
            ts.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let q = -0.5 * (qb + qb.signum_or_one() * disc.sqrt());
            ts.push(q / qa);
            if q != 0.0 {
                ts.push(qc / q);
            }
        }
    }
    ts.retain(|t| t.is_finite() && *t > 0.0 && shape.in_window(origin.z + t * dir.z));
    ts.sort_by(|a, b| a.total_cmp(b));
    ts
}

/// A surface point is visible when it is in the window, faces the camera,
/// lies in front of the pinhole and nothing on the mirror occludes it.
pub fn is_visible(rig: &CameraRig, r: &Vec3) -> bool {
    if !rig.shape.in_window(r.z) {
        return false;
    }
    let to_cam = rig.center - r;
    let n = rig.shape.gradient(r);
    let nn = n.norm();
    let dist = to_cam.norm();
    if nn <= 1e-14 || dist <= 1e-14 {
        return false;
    }
    if n.dot(&to_cam) <= 1e-12 * nn * dist {
        return false;
    }
    if (r - rig.center).dot(&rig.frame.w) <= 1e-12 * dist {
        return false;
    }
    let seg = r - rig.center;
    !ray_mirror_hits(&rig.shape, &rig.center, &seg).into_iter().any(|t| t < 1.0 - 1e-7)
}

/// Pinhole image of a mirror point.
pub fn project_to_pixel(rig: &CameraRig, r: &Vec3) -> Result<Pixel> {
    let d = r - rig.center;
    let depth = d.dot(&rig.frame.w);
    if depth <= 1e-12 * d.norm().max(1e-300) {
        return Err(Error::BehindCamera);
    }
    let k = &rig.intrinsics;
    Ok(Pixel {
        u: k.fx * d.dot(&rig.frame.u) / depth + k.cx,
        v: k.fy * d.dot(&rig.frame.v) / depth + k.cy,
    })
}

/// Unit direction of the camera ray through a pixel, in rig coordinates.
pub fn pixel_ray(rig: &CameraRig, px: &Pixel) -> Vec3 {
    let k = &rig.intrinsics;
    let f = &rig.frame;
    (f.u * ((px.u - k.cx) / k.fx) + f.v * ((px.v - k.cy) / k.fy) + f.w).normalize()
}

/// First mirror point hit by the camera ray through `px`.
pub fn pixel_to_mirror(rig: &CameraRig, px: &Pixel) -> Result<MirrorPoint> {
    if !px.is_finite() {
        return Err(Error::InvalidInput("pixel must be finite".into()));
    }
    let dir = pixel_ray(rig, px);
    let t = ray_mirror_hits(&rig.shape, &rig.center, &dir)
        .into_iter()
        .find(|t| *t > 1e-12)
        .ok_or(Error::RayMissesMirror)?;
    Ok(MirrorPoint { r: rig.center + t * dir })
}

/// Backproject a pixel into the scene ray it observes.
pub fn pixel_to_plucker(rig: &CameraRig, px: &Pixel) -> Result<PlueckerLine> {
    let r = pixel_to_mirror(rig, px)?.r;
    let s = scene_direction_at(rig, &r)?;
    Ok(PlueckerLine { s, m: r.cross(&s) })
}

/// All reflection points (with pixels) through which the camera sees `p`.
pub fn forward_project(rig: &CameraRig, p: &Vec3) -> Result<Vec<(MirrorPoint, Pixel)>> {
    if !p.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("scene point must be finite".into()));
    }
    if (p - rig.center).norm() <= 1e-12 * rig.scale() {
        // The camera center images itself only along a retro-reflected ray,
        // i.e. at visible points whose normal passes through c.
        return retro_points(rig);
    }
    let pts = search::reflection_points(rig, p);
    let out: Vec<_> = pts
        .into_iter()
        .filter_map(|r| project_to_pixel(rig, &r).ok().map(|px| (MirrorPoint { r }, px)))
        .collect();
    if out.is_empty() {
        Err(Error::NoSolution)
    } else {
        Ok(out)
    }
}

fn retro_points(rig: &CameraRig) -> Result<Vec<(MirrorPoint, Pixel)>> {
    let pts = search::retro_reflection_points(rig);
    let out: Vec<_> = pts
        .into_iter()
        .filter_map(|r| project_to_pixel(rig, &r).ok().map(|px| (MirrorPoint { r }, px)))
        .collect();
    if out.is_empty() {
        Err(Error::NoSolution)
    } else {
        Ok(out)
    }
}

/// Reflection point for `p` found by local refinement from a nearby seed.
pub fn forward_project_near(rig: &CameraRig, p: &Vec3, seed: &Vec3) -> Option<MirrorPoint> {
    search::refine_reflection(rig, p, seed).map(|r| MirrorPoint { r })
}
