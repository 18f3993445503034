//! Brute-force surface search and local least-squares refinement.
//!
//! These routines do not use any of the polynomial machinery; they exist so
//! that analytic results can be checked against plain geometry.

use nalgebra::{DMatrix, DVector, Matrix4x3, Vector4};

use crate::geometry::{is_visible, scene_direction_at, CameraRig, MirrorShape, Vec3};

/// Options for [`levenberg_marquardt`].
#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when the sum of squared residuals drops below this.
    pub cost_tol: f64,
    /// Stop when the relative step is below this.
    pub step_tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 100, cost_tol: 1e-28, step_tol: 1e-15, fd_step: 1e-7 }
    }
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
}

/// Damped Gauss-Newton with a central-difference Jacobian. The residual
/// function may return `None` to reject a trial point.
pub fn levenberg_marquardt<F>(f: F, x0: DVector<f64>, opts: &LmOptions) -> Option<LmOutcome>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let mut x = x0;
    let mut r = f(&x)?;
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    let n = x.len();
    let mut iterations = 0;
    while iterations < opts.max_iter && cost > opts.cost_tol {
        iterations += 1;
        let mut jac = DMatrix::zeros(r.len(), n);
        for i in 0..n {
            let h = opts.fd_step * x[i].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (Some(fp), Some(fm)) = (f(&xp), f(&xm)) else {
                return Some(LmOutcome { x, cost, iterations });
            };
            jac.set_column(i, &((fp - fm) / (2.0 * h)));
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for i in 0..n {
                lhs[(i, i)] += mu * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = lhs.lu().solve(&(-&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let xn = &x + &step;
            if let Some(rn) = f(&xn) {
                let cn = rn.norm_squared();
                if cn < cost {
                    let small = step.norm() <= opts.step_tol * (1.0 + x.norm());
                    x = xn;
                    r = rn;
                    cost = cn;
                    mu = (mu / 3.0).max(1e-15);
                    improved = true;
                    if small {
                        return Some(LmOutcome { x, cost, iterations });
                    }
                    break;
                }
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Some(LmOutcome { x, cost, iterations })
}

/// What the reflected ray at a surface point should line up with.
#[derive(Clone, Copy, Debug)]
pub enum Target {
    /// An unoriented direction: the reflected ray must be parallel to `±s`.
    Direction(Vec3),
    /// A scene point: the reflected ray must head towards it.
    Point(Vec3),
}

impl Target {
    fn direction_at(&self, r: &Vec3) -> Vec3 {
        match self {
            Target::Direction(s) => *s,
            Target::Point(p) => p - r,
        }
    }

    fn oriented(&self) -> bool {
        matches!(self, Target::Point(_))
    }
}

/// Height range that the surface grid covers.
pub fn z_range(rig: &CameraRig) -> (f64, f64) {
    let s = &rig.shape;
    let extent = 10.0 * rig.scale();
    let (mut lo, mut hi) = (rig.c3() - extent, rig.c3() + extent);
    if s.a > 0.0 {
        let z0 = -s.b / (2.0 * s.a);
        let half = ((s.c + s.b * s.b / (4.0 * s.a)) / s.a).max(0.0).sqrt();
        lo = z0 - half;
        hi = z0 + half;
    }
    if let Some(zl) = s.z_min {
        lo = lo.max(zl);
    }
    if let Some(zh) = s.z_max {
        hi = hi.min(zh);
    }
    (lo, hi)
}

/// Regular `(θ, φ)` grid on the surface with `z = mid − half·cos θ`, which
/// concentrates nodes near the poles of closed surfaces.
pub struct SurfaceGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub points: Vec<Option<Vec3>>,
}

impl SurfaceGrid {
    pub fn new(shape: &MirrorShape, range: (f64, f64), n_theta: usize, n_phi: usize) -> Self {
        let mid = 0.5 * (range.0 + range.1);
        let half = 0.5 * (range.1 - range.0);
        let mut points = Vec::with_capacity(n_theta * n_phi);
        for i in 0..n_theta {
            let theta = std::f64::consts::PI * i as f64 / (n_theta - 1).max(1) as f64;
            let z = mid - half * theta.cos();
            let rho_sq = shape.radius_sq(z);
            for j in 0..n_phi {
                if rho_sq < 0.0 {
                    points.push(None);
                    continue;
                }
                let phi = std::f64::consts::TAU * j as f64 / n_phi as f64;
                let rho = rho_sq.sqrt();
                points.push(Some(Vec3::new(rho * phi.cos(), rho * phi.sin(), z)));
            }
        }
        SurfaceGrid { n_theta, n_phi, points }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<Vec3> {
        self.points[i * self.n_phi + j]
    }

    /// Indices of strict-or-equal local minima of `score` (φ is periodic).
    pub fn local_minima(&self, score: &[f64], gate: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                let v = score[i * self.n_phi + j];
                if !(v <= gate) {
                    continue;
                }
                let mut is_min = true;
                'nb: for di in -1i64..=1 {
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= self.n_theta as i64 {
                        continue;
                    }
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let jj = (j as i64 + dj).rem_euclid(self.n_phi as i64) as usize;
                        if score[ii as usize * self.n_phi + jj] < v {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
                if is_min {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Angle between the reflected ray at `r` and the target (unoriented for
/// directions, oriented for points); `None` if the reflection is undefined.
pub fn alignment_angle(rig: &CameraRig, r: &Vec3, target: &Target) -> Option<f64> {
    let d = scene_direction_at(rig, r).ok()?;
    let t = target.direction_at(r);
    let tn = t.norm();
    if tn <= 1e-300 {
        return None;
    }
    let t = t / tn;
    let cross = d.cross(&t).norm();
    let dot = d.dot(&t);
    Some(if target.oriented() { cross.atan2(dot) } else { cross.atan2(dot.abs()) })
}

fn residual(rig: &CameraRig, r: &Vec3, target: &Target) -> Option<Vector4<f64>> {
    let n = rig.shape.gradient(r);
    let nn = n.norm();
    if nn <= 1e-14 {
        return None;
    }
    let d = scene_direction_at(rig, r).ok()?;
    let t = target.direction_at(r);
    let tn = t.norm();
    if tn <= 1e-300 {
        return None;
    }
    let cr = d.cross(&(t / tn));
    Some(Vector4::new(rig.shape.eval(r) / (2.0 * nn), cr.x, cr.y, cr.z))
}

/// Gauss-Newton on `[Ω/|∇Ω|; d̂ × t̂] = 0` in 3D starting at `seed`.
/// Returns the converged point if it is visible and satisfies the
/// orientation requirement of the target.
pub fn refine_point(rig: &CameraRig, target: &Target, seed: &Vec3) -> Option<Vec3> {
    let mut r = *seed;
    let scale = rig.scale();
    let h = 1e-7 * scale;
    let mut f = residual(rig, &r, target)?;
    for _ in 0..60 {
        if f.norm() < 1e-15 {
            break;
        }
        let mut jac = Matrix4x3::zeros();
        for k in 0..3 {
            let mut rp = r;
            let mut rm = r;
            rp[k] += h;
            rm[k] -= h;
            let fp = residual(rig, &rp, target)?;
            let fm = residual(rig, &rm, target)?;
            jac.set_column(k, &((fp - fm) / (2.0 * h)));
        }
        let svd = jac.svd(true, true);
        let step = svd.solve(&(-f), 1e-12).ok()?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let rn = r + step * lambda;
            if let Some(fnew) = residual(rig, &rn, target) {
                if fnew.norm() < f.norm() {
                    r = rn;
                    f = fnew;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted || (step * lambda).norm() < 1e-16 * scale {
            break;
        }
    }
    // Final projection keeps |Ω| at round-off.
    for _ in 0..3 {
        let n = 2.0 * rig.shape.gradient(&r);
        let nn = n.norm_squared();
        if nn <= 1e-300 {
            break;
        }
        r -= n * (rig.shape.eval(&r) / nn);
    }
    let f = residual(rig, &r, target)?;
    if f.norm() > 1e-10 || rig.shape.eval(&r).abs() > 1e-12 * (1.0 + r.norm_squared()) {
        return None;
    }
    if target.oriented() {
        let d = scene_direction_at(rig, &r).ok()?;
        if d.dot(&target.direction_at(&r)) <= 0.0 {
            return None;
        }
    }
    if !is_visible(rig, &r) {
        return None;
    }
    Some(r)
}

/// Grid search over the visible surface followed by local refinement; merges
/// solutions closer than `merge_tol`.
pub fn grid_search(rig: &CameraRig, target: &Target, n_theta: usize, n_phi: usize, merge_tol: f64) -> Vec<Vec3> {
    let grid = SurfaceGrid::new(&rig.shape, z_range(rig), n_theta, n_phi);
    let score: Vec<f64> = grid
        .points
        .iter()
        .map(|p| match p {
            Some(r) if is_visible(rig, r) => alignment_angle(rig, r, target).unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        })
        .collect();
    let mut found: Vec<Vec3> = Vec::new();
    for (i, j) in grid.local_minima(&score, 0.5) {
        let seed = grid.get(i, j).expect("minimum on a valid node");
        if let Some(r) = refine_point(rig, target, &seed) {
            if !found.iter().any(|q| (q - r).norm() < merge_tol) {
                found.push(r);
            }
        }
    }
    found.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.y.total_cmp(&b.y)).then(a.x.total_cmp(&b.x)));
    found
}

/// Fermat-path reflection points for the scene point `p`.
pub fn reflection_points(rig: &CameraRig, p: &Vec3) -> Vec<Vec3> {
    grid_search(rig, &Target::Point(*p), 160, 160, 1e-7 * rig.scale())
}

/// Points whose reflected ray returns to the camera center.
pub fn retro_reflection_points(rig: &CameraRig) -> Vec<Vec3> {
    grid_search(rig, &Target::Point(rig.center), 160, 160, 1e-7 * rig.scale())
}

pub fn refine_reflection(rig: &CameraRig, p: &Vec3, seed: &Vec3) -> Option<Vec3> {
    refine_point(rig, &Target::Point(*p), seed)
}

/// Move `r` onto the mirror along the gradient (foot-point iteration).
pub fn project_onto_surface(shape: &MirrorShape, r: &Vec3) -> Vec3 {
    let mut q = *r;
    for _ in 0..50 {
        let g = 2.0 * shape.gradient(&q);
        let gg = g.norm_squared();
        let om = shape.eval(&q);
        if gg <= 1e-300 {
            break;
        }
        let step = g * (om / gg);
        q -= step;
        if step.norm() <= 1e-17 * (1.0 + q.norm()) {
            break;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonicalize_rig, Intrinsics};

    fn sphere_rig(c: Vec3) -> CameraRig {
        canonicalize_rig(MirrorShape::spherical(1.0).unwrap(), c, Intrinsics::default()).unwrap()
    }

    #[test]
    fn lm_solves_rosenbrock_residuals() {
        let f = |x: &DVector<f64>| Some(DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]));
        let out = levenberg_marquardt(f, DVector::from_vec(vec![-1.2, 1.0]), &LmOptions::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn apex_reflects_axis_direction() {
        let rig = sphere_rig(Vec3::new(0.0, 0.0, 3.0));
        let pts = reflection_points(&rig, &Vec3::new(0.0, 0.0, 10.0));
        assert_eq!(pts.len(), 1);
        assert!((pts[0] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-9);
    }

    #[test]
    fn projection_lands_on_surface() {
        let shape = MirrorShape::new(0.5, 0.2, 1.0).unwrap();
        let q = project_onto_surface(&shape, &Vec3::new(0.9, 0.1, 0.4));
        assert!(shape.eval(&q).abs() < 1e-14);
    }

    #[test]
    fn grid_minima_wrap_in_phi() {
        let shape = MirrorShape::spherical(1.0).unwrap();
        let g = SurfaceGrid::new(&shape, (-1.0, 1.0), 5, 8);
        let mut score = vec![1.0; 40];
        score[2 * 8 + 7] = 0.0;
        assert_eq!(g.local_minima(&score, 0.5), vec![(2, 7)]);
    }
}
