//! Vanishing points of a direction on the mirror, the inverse map from a
//! mirror point back to its direction, and the central unified-sphere
//! baseline.
//!
//! A point `r` is a vanishing point of the direction `s` when the camera ray
//! reflected at `r` is parallel to `s`. Two scalar conditions capture this:
//! the plane through `c`, `r` and the axis point `k(r)` contains `s`
//! (`x κ₁ + κ₃ = 0`), and the first component of `d × s` vanishes (`κ₉ = 0`).

use crate::error::{Error, Result};
use crate::geometry::{
    is_visible, line_angle, project_to_pixel, reduced_reflection, scene_direction_at, CameraRig, Direction,
    MirrorPoint, Pixel, Vec3,
};
use crate::poly::{
    interpolate_coeffs, linear_elimination, poly_compose_resultant, real_roots, sylvester_resultant, BivariatePoly,
    MonomialBasis2, Polynomial, QuadraticInY, TRIM_REL,
};
use crate::search::{grid_search, Target};

/// Reflected directions closer than this to `±s` count as parallel.
pub const PARALLEL_TOL: f64 = 1e-6;

/// `x κ₁(z) + κ₃(y, z) = 0`, the limit of the reflection-plane condition for
/// a point at infinity along `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneConstraint {
    /// `[κ₁⁰, κ₁¹]` with `κ₁ = κ₁⁰ + κ₁¹ z`.
    pub kappa1: [f64; 2],
    /// Coefficients of `[yz, y, z, 1]`.
    pub kappa3: [f64; 4],
}

impl PlaneConstraint {
    pub fn kappa1_at(&self, z: f64) -> f64 {
        self.kappa1[0] + self.kappa1[1] * z
    }

    pub fn kappa3_at(&self, y: f64, z: f64) -> f64 {
        let k = &self.kappa3;
        k[0] * y * z + k[1] * y + k[2] * z + k[3]
    }

    pub fn eval(&self, r: &Vec3) -> f64 {
        r.x * self.kappa1_at(r.z) + self.kappa3_at(r.y, r.z)
    }

    /// Gradient with respect to `(x, y, z)`.
    pub fn gradient(&self, r: &Vec3) -> Vec3 {
        let k = &self.kappa3;
        Vec3::new(self.kappa1_at(r.z), k[0] * r.z + k[1], r.x * self.kappa1[1] + k[0] * r.y + k[2])
    }

    pub fn max_abs(&self) -> f64 {
        self.kappa1.iter().chain(&self.kappa3).fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

pub fn plane_constraint(rig: &CameraRig, s: &Direction) -> PlaneConstraint {
    let (a, b) = (rig.shape.a, rig.shape.b);
    let (c2, c3) = (rig.c2(), rig.c3());
    let [s1, s2, s3]: [f64; 3] = s.vec().into();
    PlaneConstraint {
        kappa1: [2.0 * s3 * c2 - 2.0 * s2 * c3 - b * s2, 2.0 * s2 * (1.0 - a)],
        kappa3: [s1 * (2.0 * a - 2.0), s1 * (b + 2.0 * c3), -2.0 * a * s1 * c2, -b * s1 * c2],
    }
}

/// Basis `{y², yz², yz, y, z³, z², z, 1}` of `κ₉`.
pub fn kappa9_basis() -> MonomialBasis2 {
    MonomialBasis2::new(vec![(2, 0), (1, 2), (1, 1), (1, 0), (0, 3), (0, 2), (0, 1), (0, 0)]).expect("unique")
}

/// Basis `{y²z², y²z, y², yz², yz, y, z⁴, z³, z², z, 1}` of `κ₁₀`.
pub fn kappa10_basis() -> MonomialBasis2 {
    MonomialBasis2::new(vec![
        (2, 2),
        (2, 1),
        (2, 0),
        (1, 2),
        (1, 1),
        (1, 0),
        (0, 4),
        (0, 3),
        (0, 2),
        (0, 1),
        (0, 0),
    ])
    .expect("unique")
}

fn fit(basis: MonomialBasis2, f: impl Fn(f64, f64) -> f64) -> Result<BivariatePoly> {
    let nodes = basis.chebyshev_nodes(0.0);
    interpolate_coeffs(f, &basis, &nodes)
}

/// `κ₉ = s₃ d₂ − s₂ d₃`, the x-component of `d × s` with `x²` eliminated.
/// It does not involve `x`, so it is a polynomial in `(y, z)` alone.
pub fn kappa9(rig: &CameraRig, s: &Direction) -> Result<BivariatePoly> {
    let s = s.vec();
    fit(kappa9_basis(), |y, z| {
        let red = reduced_reflection(rig, y, z);
        s.z * red.d2 - s.y * red.d3
    })
}

/// `κ₁₀ = κ₃² + (y² + A z² + B z − C) κ₁²`: the plane constraint with `x`
/// isolated and squared.
pub fn kappa10(rig: &CameraRig, s: &Direction) -> Result<BivariatePoly> {
    let pc = plane_constraint(rig, s);
    let sh = rig.shape;
    fit(kappa10_basis(), |y, z| {
        let k1 = pc.kappa1_at(z);
        let k3 = pc.kappa3_at(y, z);
        k3 * k3 + (y * y + sh.a * z * z + sh.b * z - sh.c) * k1 * k1
    })
}

/// `d₂` and `d₃` as polynomials; both vanish at the vanishing points of `±x̂`,
/// where `κ₉` is identically zero.
fn d2_d3(rig: &CameraRig) -> Result<(BivariatePoly, BivariatePoly)> {
    let d2 = fit(kappa9_basis(), |y, z| reduced_reflection(rig, y, z).d2)?;
    let d3 = fit(kappa9_basis(), |y, z| reduced_reflection(rig, y, z).d3)?;
    Ok((d2, d3))
}

/// How `y` was eliminated to obtain `κ₁₆`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EliminationRoute {
    /// Solve `κ₉` for `y` and square out the radical.
    Radical,
    /// Sylvester determinant; used when the `y²` coefficient of `κ₉` is small.
    Sylvester,
    /// `κ₉` is linear in `y` (camera on the axis).
    Linear,
    /// `s = ±x̂`: `d₂ = d₃ = 0` eliminated instead of `κ₉, κ₁₀`.
    AlongX,
}

/// Relative size of the `y²` coefficient of `κ₉` below which the radical
/// route loses accuracy.
const RADICAL_MIN_REL: f64 = 1e-3;

/// The univariate polynomial in `z` whose real roots contain the heights of
/// all vanishing points (plus extraneous roots from squaring), normalized to
/// unit max coefficient.
pub fn kappa16(rig: &CameraRig, s: &Direction) -> Result<(Polynomial, EliminationRoute)> {
    let k9 = kappa9(rig, s)?;
    let k10 = kappa10(rig, s)?;
    let scale = rig.scale();
    let (poly, route) = if k9.max_abs() <= 1e-12 * scale.powi(3) {
        let (d2, d3) = d2_d3(rig)?;
        // d3 has no y² term; eliminate y between d3 (linear) and d2.
        let q3 = d3.as_quadratic_in_y()?;
        let q4 = d2.as_quadratic_in_y()?;
        (linear_elimination(&q4, &q3), EliminationRoute::AlongX)
    } else {
        let q3 = k9.as_quadratic_in_y()?;
        let q4 = k10.as_quadratic_in_y()?;
        let a_rel = q3.a.max_abs() / q3.max_abs();
        if a_rel >= RADICAL_MIN_REL {
            (poly_compose_resultant(&q4, &q3)?, EliminationRoute::Radical)
        } else if a_rel > TRIM_REL {
            (sylvester_resultant(&q4, &q3), EliminationRoute::Sylvester)
        } else {
            let q3 = QuadraticInY { a: Polynomial::zero(), ..q3 };
            (linear_elimination(&q4, &q3), EliminationRoute::Linear)
        }
    };
    let m = poly.max_abs();
    if m == 0.0 {
        return Err(Error::ZeroPolynomial);
    }
    Ok((poly.scale(1.0 / m), route))
}

/// Vanishing points of one direction.
#[derive(Clone, Debug, PartialEq)]
pub struct VanishingPointSet {
    pub points: Vec<MirrorPoint>,
    pub pixels: Vec<Pixel>,
    pub direction: Direction,
    /// True when the solutions form a continuum; `points` then holds
    /// representatives only.
    pub degenerate_flag: bool,
    pub route: Option<EliminationRoute>,
}

/// Keeps candidates whose reflected ray is parallel to `±s` and whose normal
/// faces the camera.
pub fn filter_valid(rig: &CameraRig, candidates: &[MirrorPoint], s: &Direction) -> Vec<MirrorPoint> {
    candidates
        .iter()
        .filter(|p| {
            let Ok(d) = scene_direction_at(rig, &p.r) else {
                return false;
            };
            let facing = rig.shape.gradient(&p.r).dot(&(rig.center - p.r)) > 0.0;
            facing && line_angle(&d, &s.vec()) < PARALLEL_TOL
        })
        .copied()
        .collect()
}

enum SecondRow<'a> {
    Kappa9(&'a BivariatePoly),
    AlongX(&'a BivariatePoly, &'a BivariatePoly),
}

/// Gauss-Newton polish of a candidate on `Ω = 0`, `κ₉ = 0` (or `d₂ = d₃ = 0`)
/// and the plane constraint, using exact polynomial derivatives.
fn polish(rig: &CameraRig, pc: &PlaneConstraint, row: &SecondRow, r0: Vec3) -> Vec3 {
    let sh = rig.shape;
    let pc_scale = pc.max_abs().max(f64::MIN_POSITIVE);
    let eval = |r: &Vec3| -> (Vec<f64>, Vec<Vec3>) {
        let mut f = vec![sh.eval(r)];
        let mut j = vec![2.0 * sh.gradient(r)];
        let mut push_poly = |p: &BivariatePoly| {
            let w = 1.0 / p.max_abs().max(f64::MIN_POSITIVE);
            let (gy, gz) = p.gradient(r.y, r.z);
            f.push(w * p.eval(r.y, r.z));
            j.push(Vec3::new(0.0, w * gy, w * gz));
        };
        match row {
            SecondRow::Kappa9(k9) => push_poly(k9),
            SecondRow::AlongX(d2, d3) => {
                push_poly(d2);
                push_poly(d3);
            }
        }
        if !matches!(row, SecondRow::AlongX(..)) {
            f.push(pc.eval(r) / pc_scale);
            j.push(pc.gradient(r) / pc_scale);
        }
        (f, j)
    };
    let norm = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = r0;
    let (mut f, mut jac) = eval(&r);
    for _ in 0..12 {
        let n = f.len();
        let jm = nalgebra::DMatrix::from_fn(n, 3, |i, k| jac[i][k]);
        let fv = nalgebra::DVector::from_column_slice(&f);
        let Ok(step) = jm.svd(true, true).solve(&(-fv), 1e-13) else {
            break;
        };
        let rn = r + Vec3::new(step[0], step[1], step[2]);
        let (fnew, jnew) = eval(&rn);
        if norm(&fnew) >= norm(&f) {
            break;
        }
        r = rn;
        f = fnew;
        jac = jnew;
    }
    r
}

fn in_range(rig: &CameraRig, z: f64) -> bool {
    let tol = 1e-9 * rig.shape.scale().powi(2);
    rig.shape.in_window(z) && rig.shape.radius_sq(z) >= -tol
}

fn push_unique(out: &mut Vec<MirrorPoint>, r: Vec3, tol: f64) {
    if !out.iter().any(|q| (q.r - r).norm() < tol) {
        out.push(MirrorPoint { r });
    }
}

/// Representatives for an axial camera and `s ∥ z`: the apex (retro-
/// reflection along the axis) and the ring where the reflected ray is
/// vertical, `(h − 2g)(z) = 0`.
fn axial_representatives(rig: &CameraRig, s: &Direction) -> Vec<MirrorPoint> {
    let sh = rig.shape;
    let mut cands: Vec<MirrorPoint> = sh
        .axis_points()
        .into_iter()
        .map(|z| MirrorPoint { r: Vec3::new(0.0, 0.0, z) })
        .collect();
    // h − 2g at y = 0 is a quadratic in z.
    let f = |z: f64| reduced_reflection(rig, 0.0, z).d1_over_x();
    let c0 = f(0.0);
    let c1 = 0.5 * (f(1.0) - f(-1.0));
    let c2 = 0.5 * (f(1.0) + f(-1.0)) - c0;
    if let Ok(zs) = real_roots(&Polynomial::new(vec![c0, c1, c2]), 1e-9) {
        for z in zs {
            let rho_sq = sh.radius_sq(z);
            if rho_sq > 0.0 && in_range(rig, z) {
                cands.push(MirrorPoint { r: Vec3::new(0.0, rho_sq.sqrt(), z) });
            }
        }
    }
    filter_valid(rig, &cands, s).into_iter().filter(|p| is_visible(rig, &p.r)).collect()
}

/// All visible vanishing points of direction `s` on the mirror.
pub fn vps_from_direction(rig: &CameraRig, s: &Direction) -> Result<VanishingPointSet> {
    let pc = plane_constraint(rig, s);
    let scale = rig.scale();
    if pc.max_abs() <= 1e-12 * scale {
        let points = axial_representatives(rig, s);
        let pixels = points.iter().filter_map(|p| project_to_pixel(rig, &p.r).ok()).collect();
        return Ok(VanishingPointSet { points, pixels, direction: *s, degenerate_flag: true, route: None });
    }

    // With the camera on the axis the problem is invariant under rotations
    // about z. Directions with s₁ = 0 or s₂ = 0 make κ₉ and κ₁₀ share a
    // factor, so solve for a rotated copy at azimuth 45° and rotate back.
    let horiz = s.vec().x.hypot(s.vec().y);
    let (route, raw) = if rig.is_axial() && horiz > 1e-12 {
        let psi = std::f64::consts::FRAC_PI_4 - s.vec().y.atan2(s.vec().x);
        let (sin, cos) = psi.sin_cos();
        let rot = nalgebra::Matrix3::new(cos, -sin, 0.0, sin, cos, 0.0, 0.0, 0.0, 1.0);
        let s_rot = Direction::new(rot * s.vec())?;
        let (route, pts) = candidates_for(rig, &s_rot)?;
        (route, pts.into_iter().map(|p| MirrorPoint { r: rot.transpose() * p.r }).collect::<Vec<_>>())
    } else {
        candidates_for(rig, s)?
    };

    let mut points = Vec::new();
    for p in filter_valid(rig, &raw, s) {
        if rig.shape.eval(&p.r).abs() <= 1e-9 * (1.0 + p.r.norm_squared()) && is_visible(rig, &p.r) {
            push_unique(&mut points, p.r, 1e-9 * scale);
        }
    }
    points.sort_by(|a, b| a.r.z.total_cmp(&b.r.z).then(a.r.y.total_cmp(&b.r.y)).then(a.r.x.total_cmp(&b.r.x)));
    let pixels = points.iter().map(|p| project_to_pixel(rig, &p.r)).collect::<Result<Vec<_>>>()?;
    Ok(VanishingPointSet { points, pixels, direction: *s, degenerate_flag: false, route: Some(route) })
}

fn y_roots(q: &QuadraticInY, z: f64, linear: bool) -> Vec<f64> {
    let (a, b, c) = (q.a.eval(z), q.b.eval(z), q.c.eval(z));
    let size = a.abs() + b.abs() + c.abs();
    let mut ys = Vec::with_capacity(2);
    if linear || a.abs() <= 1e-12 * size {
        if b.abs() > 1e-9 * size {
            ys.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        let sq = disc.max(0.0).sqrt();
        let q = -0.5 * (b + if b < 0.0 { -sq } else { sq });
        if q != 0.0 {
            ys.push(q / a);
            ys.push(c / q);
        } else {
            ys.push(0.0);
        }
    }
    ys
}

/// Roots of `κ₁₆` lifted to polished surface points (not yet filtered).
fn candidates_for(rig: &CameraRig, s: &Direction) -> Result<(EliminationRoute, Vec<MirrorPoint>)> {
    let pc = plane_constraint(rig, s);
    let scale = rig.scale();
    let (k16, route) = kappa16(rig, s)?;
    let k9 = kappa9(rig, s)?;
    let pair = if route == EliminationRoute::AlongX { Some(d2_d3(rig)?) } else { None };
    let (q3, q4) = match &pair {
        Some((d2, d3)) => (d3.as_quadratic_in_y()?, d2.as_quadratic_in_y()?),
        None => (k9.as_quadratic_in_y()?, kappa10(rig, s)?.as_quadratic_in_y()?),
    };
    let linear = matches!(route, EliminationRoute::Linear | EliminationRoute::AlongX);
    let row = match &pair {
        Some((d2, d3)) => SecondRow::AlongX(d2, d3),
        None => SecondRow::Kappa9(&k9),
    };

    let zs = real_roots(&k16, 1e-5)?;
    let mut candidates = Vec::new();
    for z in zs.into_iter().filter(|z| in_range(rig, *z)) {
        // y from the first equation, and from the second one in case the
        // first does not depend on y at this height.
        let mut ys = y_roots(&q3, z, linear);
        ys.extend(y_roots(&q4, z, false));
        for y in ys {
            let x_sq = rig.shape.radius_sq(z) - y * y;
            if x_sq < -1e-9 * scale * scale {
                continue;
            }
            let x = x_sq.max(0.0).sqrt();
            for xs in [x, -x] {
                let r = polish(rig, &pc, &row, Vec3::new(xs, y, z));
                if r.iter().all(|v| v.is_finite()) {
                    candidates.push(MirrorPoint { r });
                }
                if x == 0.0 {
                    break;
                }
            }
        }
    }

    Ok((route, candidates))
}

/// The two unit directions (`s`, `−s`) whose vanishing point is `r`, with
/// the first one oriented along the reflected ray.
///
/// With `a₁ = −d₃`, `a₂ = d₂` the row `κ₉ = a₁ s₂ + a₂ s₃ = 0` fixes the
/// ratio of `s₂` and `s₃`; squaring the plane constraint
/// `s₁ β + x (γ₂ s₂ + γ₃ s₃) = 0` and using `s₁² = 1 − s₂² − s₃²` gives a
/// quadratic for the remaining scale. The sign of `s₁` comes from the
/// unsquared plane row.
pub fn direction_from_vp(rig: &CameraRig, r: &MirrorPoint) -> Result<(Direction, Direction)> {
    let p = MirrorPoint::on(&rig.shape, r.r)?;
    let geo = scene_direction_at(rig, &p.r)?;
    let s = cascade(rig, &p.r).filter(|s| line_angle(s, &geo) < 1e-9).unwrap_or(geo);
    let s = if s.dot(&geo) < 0.0 { -s } else { s };
    let s = Direction::new(s)?;
    Ok((s, s.flipped()))
}

/// Closed-form inverse; `None` at points where the rows degenerate.
pub fn cascade(rig: &CameraRig, r: &Vec3) -> Option<Vec3> {
    let sh = rig.shape;
    let (c2, c3) = (rig.c2(), rig.c3());
    let (x, y, z) = (r.x, r.y, r.z);
    let red = reduced_reflection(rig, y, z);
    let a1 = -red.d3;
    let a2 = red.d2;
    let beta = (2.0 * sh.a - 2.0) * y * z + (sh.b + 2.0 * c3) * y - 2.0 * sh.a * c2 * z - sh.b * c2;
    let g2 = 2.0 * (1.0 - sh.a) * z - 2.0 * c3 - sh.b;
    let g3 = 2.0 * c2;
    let amax = a1.abs().max(a2.abs());
    let size = red.h.abs().max(1e-300) * (1.0 + r.norm() + rig.center.norm());
    if amax <= 1e-12 * size {
        return Some(Vec3::x());
    }
    let b1 = beta * beta;
    let b2 = -x * x * g2 * g2;
    let b3 = -2.0 * x * x * g2 * g3;
    let b4 = -x * x * g3 * g3;
    let (s2, s3) = if a2.abs() >= a1.abs() {
        let rho = -a1 / a2;
        let den = b2 + b3 * rho + b4 * rho * rho - b1 - b1 * rho * rho;
        if den.abs() <= 1e-14 * (b1.abs() + b2.abs() + b3.abs() + b4.abs()) {
            return None;
        }
        let s2_sq = -b1 / den;
        if !(-1e-12..=1.0 + 1e-12).contains(&s2_sq) {
            return None;
        }
        let s2 = s2_sq.max(0.0).sqrt();
        (s2, rho * s2)
    } else {
        let sigma = -a2 / a1;
        let den = b2 * sigma * sigma + b3 * sigma + b4 - b1 * sigma * sigma - b1;
        if den.abs() <= 1e-14 * (b1.abs() + b2.abs() + b3.abs() + b4.abs()) {
            return None;
        }
        let s3_sq = -b1 / den;
        if !(-1e-12..=1.0 + 1e-12).contains(&s3_sq) {
            return None;
        }
        let s3 = s3_sq.max(0.0).sqrt();
        (sigma * s3, s3)
    };
    let s1_sq = 1.0 - s2 * s2 - s3 * s3;
    if s1_sq < -1e-12 {
        return None;
    }
    let s1_mag = s1_sq.max(0.0).sqrt();
    let lin = x * (g2 * s2 + g3 * s3);
    // s1 β + lin = 0 picks the sign of s1.
    let s1 = if beta.abs() > 1e-14 * size { -lin / beta } else if lin.abs() <= 1e-12 * size { s1_mag } else { return None };
    let s1 = s1.signum() * s1_mag;
    Some(Vec3::new(s1, s2, s3).normalize())
}

/// Brute-force vanishing points: dense surface grid, local minima of the
/// alignment angle, then 3D Gauss-Newton on the reflection condition.
pub fn vp_oracle(rig: &CameraRig, s: &Direction) -> Vec<MirrorPoint> {
    vp_oracle_with(rig, s, 200, 200)
}

pub fn vp_oracle_with(rig: &CameraRig, s: &Direction, n_theta: usize, n_phi: usize) -> Vec<MirrorPoint> {
    grid_search(rig, &Target::Direction(s.vec()), n_theta, n_phi, 1e-6 * rig.scale())
        .into_iter()
        .map(|r| MirrorPoint { r })
        .collect()
}

/// Sphere-model parameters of a central catadioptric rig (camera at one
/// focus of an ellipsoid or two-sheet hyperboloid).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnifiedModel {
    /// Effective single viewpoint (the other focus).
    pub viewpoint: Vec3,
    pub xi: f64,
    pub gamma: f64,
    /// Sign applied to the axial component of the unit direction.
    pub axis_sign: f64,
    /// Numerical eccentricity and semi-latus rectum of the conic about the viewpoint.
    pub eccentricity: f64,
    pub semi_latus: f64,
    /// `+1` if the mirror vertex nearest the viewpoint is above it.
    pub vertex_side: f64,
}

impl UnifiedModel {
    /// Validates that `rig` is central and derives the model.
    pub fn from_rig(rig: &CameraRig) -> Result<Self> {
        let sh = rig.shape;
        if sh.a == 0.0 {
            return Err(Error::RigNotCentral("paraboloid and cylinder mirrors need an orthographic camera".into()));
        }
        let z0 = -sh.b / (2.0 * sh.a);
        let k = sh.c + sh.b * sh.b / (4.0 * sh.a);
        let a_sq = k / sh.a;
        let b_sq = k.abs();
        let (e, eps) = if sh.a < 0.0 {
            if k >= 0.0 {
                return Err(Error::RigNotCentral("hyperboloid has one sheet".into()));
            }
            let e = (a_sq + b_sq).sqrt();
            (e, e / a_sq.sqrt())
        } else {
            if sh.a >= 1.0 {
                return Err(Error::RigNotCentral("ellipsoid is not prolate".into()));
            }
            let e = (a_sq - b_sq).sqrt();
            (e, e / a_sq.sqrt())
        };
        let tol = 1e-9 * rig.scale();
        let a = a_sq.sqrt();
        let foci = [z0 + e, z0 - e];
        let Some(cam) = foci.iter().position(|f| rig.c2().abs() <= tol && (rig.c3() - f).abs() <= tol) else {
            return Err(Error::RigNotCentral(format!(
                "camera center {:?} is not at a focus (z = {:.6} or {:.6})",
                rig.center, foci[0], foci[1]
            )));
        };
        let fz = foci[1 - cam];
        let viewpoint = Vec3::new(0.0, 0.0, fz);
        // Vertex of the sheet (or end of the ellipsoid) closest to the viewpoint.
        let vertex = if fz >= z0 { z0 + a } else { z0 - a };
        let vertex_side = if vertex >= fz { 1.0 } else { -1.0 };
        let semi_latus = b_sq / a;
        let w = rig.frame.w;
        if w.x.abs() > 1e-12 || w.y.abs() > 1e-12 {
            return Err(Error::RigNotCentral("camera does not look along the mirror axis".into()));
        }
        let omega = w.z.signum();
        let delta = (viewpoint - rig.center).dot(&w);
        let kk = delta * eps * vertex_side + semi_latus * omega;
        Ok(UnifiedModel {
            viewpoint,
            xi: delta / kk.abs(),
            gamma: semi_latus / kk.abs(),
            axis_sign: kk.signum(),
            eccentricity: eps,
            semi_latus,
            vertex_side,
        })
    }

    /// Mirror point hit by the ray from the viewpoint along unit `u`, if any.
    pub fn surface_point(&self, u: &Vec3) -> Option<Vec3> {
        let den = 1.0 + self.eccentricity * self.vertex_side * u.z;
        if den <= 1e-12 {
            return None;
        }
        Some(self.viewpoint + u * (self.semi_latus / den))
    }

    /// Sphere-model image of the unit direction `u` (oriented).
    pub fn project(&self, rig: &CameraRig, u: &Vec3) -> Option<Pixel> {
        let zs = self.axis_sign * u.z;
        let den = self.xi + zs;
        if den <= 1e-12 {
            return None;
        }
        let k = &rig.intrinsics;
        Some(Pixel {
            u: k.fx * self.gamma * u.dot(&rig.frame.u) / den + k.cx,
            v: k.fy * self.gamma * u.dot(&rig.frame.v) / den + k.cy,
        })
    }

    /// Images of both orientations of `s` that land on the visible mirror.
    pub fn vanishing_points(&self, rig: &CameraRig, s: &Direction) -> Vec<(MirrorPoint, Pixel)> {
        let mut out = Vec::new();
        for u in [s.vec(), -s.vec()] {
            let Some(r) = self.surface_point(&u) else { continue };
            if !is_visible(rig, &r) {
                continue;
            }
            if let Some(px) = self.project(rig, &u) {
                out.push((MirrorPoint { r }, px));
            }
        }
        out
    }
}

/// Vanishing points of `s` in a central rig through the unified sphere model.
pub fn central_vp(rig: &CameraRig, s: &Direction) -> Result<Vec<(MirrorPoint, Pixel)>> {
    let model = UnifiedModel::from_rig(rig)?;
    Ok(model.vanishing_points(rig, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonicalize_rig, Intrinsics, MirrorShape};

    fn rig(shape: MirrorShape, c: [f64; 3]) -> CameraRig {
        canonicalize_rig(shape, Vec3::from(c), Intrinsics::default()).unwrap()
    }

    fn sphere_axial() -> CameraRig {
        rig(MirrorShape::spherical(1.0).unwrap(), [0.0, 0.0, 3.0])
    }

    fn dir(x: f64, y: f64, z: f64) -> Direction {
        Direction::from_xyz(x, y, z).unwrap()
    }

    /// Closed form of κ₉ expanded by hand from `s₃ d₂ − s₂ d₃`.
    fn kappa9_closed(a: f64, b: f64, c: f64, c2: f64, c3: f64, s2: f64, s3: f64) -> [f64; 8] {
        [
            2.0 * c2 * s3,
            a * s3 * (a - 1.0),
            -a * (-b * s3 + 2.0 * c2 * s2 - 2.0 * c3 * s3),
            -(-b * b * s3 + 4.0 * b * c2 * s2 - 4.0 * b * c3 * s3 + 4.0 * c * s3) / 4.0,
            -a * s2 * (a - 1.0),
            -a * a * c2 * s3 - a * a * c3 * s2 - 2.0 * a * b * s2 + a * c2 * s3 - a * c3 * s2 + b * s2,
            -(4.0 * a * b * c2 * s3 + 4.0 * a * b * c3 * s2 - 8.0 * a * c * s2 + 3.0 * b * b * s2 - 4.0 * b * c2 * s3
                + 4.0 * b * c3 * s2
                + 4.0 * c * s2)
                / 4.0,
            -(b * b * c2 * s3 + b * b * c3 * s2 - 4.0 * b * c * s2 + 4.0 * c * c2 * s3 - 4.0 * c * c3 * s2) / 4.0,
        ]
    }

    #[test]
    fn plane_constraint_examples() {
        let r = rig(MirrorShape::spherical(1.0).unwrap(), [0.0, 0.0, 5.0]);
        let pc = plane_constraint(&r, &dir(0.0, 1.0, 0.0));
        assert_eq!(pc.kappa1, [-10.0, 0.0]);
        assert_eq!(pc.kappa3, [0.0; 4]);

        let r = sphere_axial();
        let pc = plane_constraint(&r, &dir(1.0, 0.0, 0.0));
        assert_eq!(pc.kappa1, [0.0, 0.0]);
        assert_eq!(pc.kappa3, [0.0, 6.0, 0.0, 0.0]);

        let pc = plane_constraint(&r, &dir(0.0, 0.0, 1.0));
        assert_eq!(pc.max_abs(), 0.0);
    }

    #[test]
    fn plane_constraint_is_the_triple_product() {
        let r = rig(MirrorShape::new(0.6, 0.4, 1.5).unwrap(), [0.0, 0.7, 2.2]);
        let s = dir(0.3, -0.5, 0.8);
        let pc = plane_constraint(&r, &s);
        let p = Vec3::new(0.4, -0.3, 0.9);
        let k = crate::geometry::axis_point(&r.shape, &p);
        let det = nalgebra::Matrix3::from_columns(&[p - r.center, k - r.center, s.vec()]).determinant();
        assert!((pc.eval(&p) + 2.0 * det).abs() < 1e-12);
    }

    #[test]
    fn kappa9_matches_closed_form() {
        let r = rig(MirrorShape::new(0.6, 0.4, 1.5).unwrap(), [0.0, 0.7, 2.2]);
        let s = dir(0.3, -0.5, 0.8);
        let k9 = kappa9(&r, &s).unwrap();
        let want = kappa9_closed(0.6, 0.4, 1.5, 0.7, 2.2, s.vec().y, s.vec().z);
        for (g, w) in k9.coeffs.iter().zip(want) {
            assert!((g - w).abs() < 1e-12 * (1.0 + w.abs()), "{g} vs {w}");
        }
    }

    #[test]
    fn kappa10_structure_without_kappa1() {
        let r = sphere_axial();
        let k10 = kappa10(&r, &dir(1.0, 0.0, 0.0)).unwrap();
        assert!(k10.coeff(1, 2).abs() < 1e-12);
        assert!(k10.coeff(2, 1).abs() < 1e-12);
    }

    #[test]
    fn apex_is_degenerate_representative() {
        let set = vps_from_direction(&sphere_axial(), &dir(0.0, 0.0, 1.0)).unwrap();
        assert!(set.degenerate_flag);
        assert_eq!(set.points.len(), 1);
        assert!((set.points[0].r - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn axial_sphere_x_direction_points_lie_in_symmetry_plane() {
        let set = vps_from_direction(&sphere_axial(), &dir(1.0, 0.0, 0.0)).unwrap();
        assert!(!set.points.is_empty());
        for p in &set.points {
            assert!(p.r.y.abs() < 1e-9);
        }
    }

    #[test]
    fn axial_sphere_diagonal_direction_has_two_points() {
        let r = sphere_axial();
        let s = dir(1.0, 0.0, 1.0);
        let set = vps_from_direction(&r, &s).unwrap();
        assert_eq!(set.points.len(), 2);
        let oracle = vp_oracle(&r, &s);
        assert_eq!(oracle.len(), 2);
        for p in &set.points {
            assert!(oracle.iter().any(|q| (q.r - p.r).norm() < 1e-6));
        }
    }

    #[test]
    fn inverse_round_trip_general() {
        let r = rig(MirrorShape::new(0.6, 0.4, 1.5).unwrap(), [0.0, 0.7, 2.6]);
        let s = dir(0.3, -0.5, 0.8);
        let set = vps_from_direction(&r, &s).unwrap();
        assert!(!set.points.is_empty());
        for p in &set.points {
            let (d, _) = direction_from_vp(&r, p).unwrap();
            assert!(d.line_angle(&s) < 1e-8);
            let c = cascade(&r, &p.r).unwrap();
            assert!(line_angle(&c, &s.vec()) < 1e-8);
        }
    }

    #[test]
    fn inverse_examples() {
        let r = sphere_axial();
        let (d, m) = direction_from_vp(&r, &MirrorPoint { r: Vec3::new(0.0, 0.0, 1.0) }).unwrap();
        assert!((d.vec() - Vec3::z()).norm() < 1e-12);
        assert!((m.vec() + Vec3::z()).norm() < 1e-12);
        let p = Vec3::new(0.6, 0.0, 0.8);
        let (d, _) = direction_from_vp(&r, &MirrorPoint { r: p }).unwrap();
        assert!(d.vec().y.abs() < 1e-12);
        assert!(direction_from_vp(&r, &MirrorPoint { r: Vec3::new(0.5, 0.0, 0.5) }).is_err());
    }

    #[test]
    fn filter_rejects_anti_facing_point() {
        let r = sphere_axial();
        let back = MirrorPoint { r: Vec3::new(0.0, 0.0, -1.0) };
        assert!(filter_valid(&r, &[back], &dir(0.0, 0.0, 1.0)).is_empty());
        let apex = MirrorPoint { r: Vec3::new(0.0, 0.0, 1.0) };
        assert_eq!(filter_valid(&r, &[apex], &dir(0.0, 0.0, 1.0)).len(), 1);
    }

    #[test]
    fn central_hyperbolic_agrees_with_general_solver() {
        let sh = MirrorShape::new(-1.0, 2.0, 0.0).unwrap().with_window(Some(-3.0), Some(1.0));
        let r = rig(sh, [0.0, 0.0, 1.0 + 2f64.sqrt()]);
        let model = UnifiedModel::from_rig(&r).unwrap();
        assert!((model.viewpoint.z - (1.0 - 2f64.sqrt())).abs() < 1e-12);
        let s = dir(0.4, 0.3, -0.6);
        let central = central_vp(&r, &s).unwrap();
        let general = vps_from_direction(&r, &s).unwrap();
        assert_eq!(central.len(), general.points.len());
        for (p, px) in &central {
            assert!(r.shape.eval(&p.r).abs() < 1e-12);
            assert!(general.pixels.iter().any(|g| g.distance(px) < 1e-6));
        }
        let axis = central_vp(&r, &dir(0.0, 0.0, 1.0)).unwrap();
        assert!(axis.iter().any(|(_, px)| (px.u - 320.0).abs() < 1e-9 && (px.v - 320.0).abs() < 1e-9));
        assert!(matches!(central_vp(&sphere_axial(), &s), Err(Error::RigNotCentral(_))));
    }
}
