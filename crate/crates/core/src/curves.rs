//! Vanishing curves: the locus on the mirror of the vanishing points of all
//! directions perpendicular to a plane normal `n`.
//!
//! A surface point belongs to the curve exactly when its reflected ray is
//! perpendicular to `n`, i.e. `Γ(r) = ⟨d(r), n⟩ = 0` with the unnormalized
//! reflected ray `d = [x (h − 2g), d₂, d₃]`. Hence `Γ = κ₂₀ x + κ₂₁` with
//! `κ₂₀ = n₁ (h − 2g)` of degree 2 and `κ₂₁ = n₂ d₂ + n₃ d₃` of degree 3.

use crate::error::{Error, Result};
use crate::geometry::{is_visible, CameraRig, Direction, MirrorPoint, Vec3};
use crate::poly::{interpolate_coeffs, BivariatePoly, MonomialBasis2};
use crate::search::{z_range, SurfaceGrid};
use crate::vanishing::vps_from_direction;

/// Orthonormal pair spanning the plane perpendicular to `n`. The first is the
/// best conditioned of `n × x̂`, `n × ŷ`, `n × ẑ`; the second is `n × s1`.
pub fn perpendicular_basis(n: &Direction) -> (Direction, Direction) {
    let nv = n.vec();
    let cands = [nv.cross(&Vec3::x()), nv.cross(&Vec3::y()), nv.cross(&Vec3::z())];
    let first = (0..3).max_by(|a, b| cands[*a].norm().total_cmp(&cands[*b].norm())).expect("three candidates");
    let s1 = cands[first].normalize();
    let s2 = nv.cross(&s1).normalize();
    (Direction::new(s1).expect("unit"), Direction::new(s2).expect("unit"))
}

/// `Γ(r) = κ₂₀(y, z) x + κ₂₁(y, z)`, scaled so the largest coefficient is 1.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaSurface {
    pub normal: Direction,
    pub kappa20: BivariatePoly,
    pub kappa21: BivariatePoly,
    /// Number of in-plane directions whose vanishing points were checked.
    pub certified_directions: usize,
}

impl GammaSurface {
    pub fn eval(&self, r: &Vec3) -> f64 {
        self.kappa20.eval(r.y, r.z) * r.x + self.kappa21.eval(r.y, r.z)
    }

    pub fn gradient(&self, r: &Vec3) -> Vec3 {
        let (ay, az) = self.kappa20.gradient(r.y, r.z);
        let (by, bz) = self.kappa21.gradient(r.y, r.z);
        Vec3::new(self.kappa20.eval(r.y, r.z), ay * r.x + by, az * r.x + bz)
    }
}

/// Fits `κ₂₀`, `κ₂₁` and certifies them on the vanishing points of 24
/// in-plane directions.
pub fn gamma_surface(rig: &CameraRig, n: &Direction) -> Result<GammaSurface> {
    let nv = n.vec();
    let b2 = MonomialBasis2::total_degree(2);
    let b3 = MonomialBasis2::total_degree(3);
    let reduced = |y, z| crate::geometry::reduced_reflection(rig, y, z);
    let k20 = interpolate_coeffs(|y, z| nv.x * reduced(y, z).d1_over_x(), &b2, &b2.chebyshev_nodes(0.0))?;
    let k21 = interpolate_coeffs(
        |y, z| {
            let r = reduced(y, z);
            nv.y * r.d2 + nv.z * r.d3
        },
        &b3,
        &b3.chebyshev_nodes(0.0),
    )?;
    let m = k20.max_abs().max(k21.max_abs());
    if m <= 1e-14 * rig.scale().powi(3) {
        return Err(Error::DegenerateDirection);
    }
    let scale = |p: BivariatePoly| BivariatePoly { coeffs: p.coeffs.iter().map(|c| c / m).collect(), basis: p.basis };
    let mut surface =
        GammaSurface { normal: *n, kappa20: scale(k20), kappa21: scale(k21), certified_directions: 0 };

    let (s1, s2) = perpendicular_basis(n);
    let mut certified = 0;
    for k in 0..24 {
        // α sweeps the full circle of in-plane directions (affine in α up to
        // normalization, so a tangent parameterization is equivalent).
        let ang = std::f64::consts::PI * (k as f64 + 0.5) / 24.0;
        let s = Direction::new(s1.vec() * ang.cos() + s2.vec() * ang.sin())?;
        let Ok(set) = vps_from_direction(rig, &s) else { continue };
        if set.degenerate_flag {
            continue;
        }
        for p in &set.points {
            let g = surface.eval(&p.r);
            if g.abs() > 1e-7 {
                return Err(Error::ResidualTooLarge { residual: g.abs(), tolerance: 1e-7 });
            }
        }
        certified += 1;
    }
    surface.certified_directions = certified;
    Ok(surface)
}

/// One connected piece of a traced curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveBranch {
    pub samples: Vec<MirrorPoint>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VanishingCurve {
    pub normal: Direction,
    pub branches: Vec<CurveBranch>,
    pub arc_step: f64,
}

impl VanishingCurve {
    pub fn samples(&self) -> impl Iterator<Item = &MirrorPoint> {
        self.branches.iter().flat_map(|b| b.samples.iter())
    }

    pub fn len(&self) -> usize {
        self.branches.iter().map(|b| b.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn closed(&self) -> bool {
        !self.branches.is_empty() && self.branches.iter().all(|b| b.closed)
    }

    /// Distance from `p` to the sampled polyline.
    pub fn polyline_distance(&self, p: &Vec3) -> f64 {
        let mut best = f64::INFINITY;
        for b in &self.branches {
            let pts = &b.samples;
            let mut segs: Vec<(Vec3, Vec3)> = pts.windows(2).map(|w| (w[0].r, w[1].r)).collect();
            if b.closed && pts.len() > 2 {
                segs.push((pts[pts.len() - 1].r, pts[0].r));
            }
            if pts.len() == 1 {
                best = best.min((pts[0].r - p).norm());
            }
            for (a, c) in segs {
                let ab = c - a;
                let t = ((p - a).dot(&ab) / ab.norm_squared().max(1e-300)).clamp(0.0, 1.0);
                best = best.min((a + ab * t - p).norm());
            }
        }
        best
    }

    /// Nearest sample to `p`.
    pub fn nearest_sample(&self, p: &Vec3) -> Option<Vec3> {
        self.samples().map(|s| s.r).min_by(|a, b| (a - p).norm().total_cmp(&(b - p).norm()))
    }
}

/// Newton projection onto `{Ω = 0, Γ = 0}` with the minimum-norm step.
fn correct(rig: &CameraRig, gamma: &GammaSurface, r0: Vec3) -> Option<Vec3> {
    let sh = rig.shape;
    let mut r = r0;
    for _ in 0..30 {
        let f = nalgebra::Vector2::new(sh.eval(&r), gamma.eval(&r));
        let g1 = 2.0 * sh.gradient(&r);
        let g2 = gamma.gradient(&r);
        if f.amax() < 1e-15 {
            return Some(r);
        }
        let j = nalgebra::Matrix2x3::from_rows(&[g1.transpose(), g2.transpose()]);
        let jjt = j * j.transpose();
        let w = jjt.try_inverse()? * f;
        let step = j.transpose() * w;
        r -= step;
        if !r.iter().all(|v| v.is_finite()) {
            return None;
        }
        if step.norm() < 1e-16 * (1.0 + r.norm()) {
            break;
        }
    }
    let ok = sh.eval(&r).abs() < 1e-12 && gamma.eval(&r).abs() < 1e-12;
    ok.then_some(r)
}

fn tangent(rig: &CameraRig, gamma: &GammaSurface, r: &Vec3) -> Option<Vec3> {
    let t = rig.shape.gradient(r).cross(&gamma.gradient(r));
    let n = t.norm();
    (n > 1e-14).then(|| t / n)
}

/// Cap on samples per branch.
const MAX_SAMPLES: usize = 200_000;

/// March along the curve from `start` in direction `sign`; stops at the
/// visibility boundary or when the branch closes on itself.
fn march(rig: &CameraRig, gamma: &GammaSurface, start: Vec3, sign: f64, step: f64) -> (Vec<Vec3>, bool) {
    let mut out = vec![start];
    let mut r = start;
    let Some(mut t_prev) = tangent(rig, gamma, &r).map(|t| t * sign) else {
        return (out, false);
    };
    let mut travelled = 0.0;
    while out.len() < MAX_SAMPLES {
        let mut h = step;
        let mut next = None;
        for _ in 0..30 {
            let pred = r + t_prev * h;
            if let Some(q) = correct(rig, gamma, pred) {
                if let Some(tq) = tangent(rig, gamma, &q) {
                    let tq = if tq.dot(&t_prev) < 0.0 { -tq } else { tq };
                    let dist = (q - r).norm();
                    if dist <= step * 1.05 && dist > 0.3 * h && tq.dot(&t_prev) > 0.95 {
                        next = Some((q, tq));
                        break;
                    }
                }
            }
            h *= 0.5;
        }
        let Some((q, tq)) = next else { return (out, false) };
        if !is_visible(rig, &q) {
            return (out, false);
        }
        travelled += (q - r).norm();
        if travelled > 3.0 * step && (q - start).norm() < 0.9 * step {
            return (out, true);
        }
        out.push(q);
        r = q;
        t_prev = tq;
    }
    (out, false)
}

/// Traces every branch of the vanishing curve of `n` over the visible
/// mirror with samples spaced at most `arc_step` apart.
pub fn trace_vanishing_curve(rig: &CameraRig, n: &Direction, arc_step: f64) -> Result<VanishingCurve> {
    if !(arc_step > 0.0 && arc_step.is_finite()) {
        return Err(Error::InvalidInput("arc step must be positive".into()));
    }
    let gamma = gamma_surface(rig, n)?;
    trace_with_surface(rig, &gamma, arc_step)
}

pub fn trace_with_surface(rig: &CameraRig, gamma: &GammaSurface, arc_step: f64) -> Result<VanishingCurve> {
    let grid = SurfaceGrid::new(&rig.shape, z_range(rig), 120, 120);
    let vis: Vec<Option<(Vec3, f64)>> = grid
        .points
        .iter()
        .map(|p| p.filter(|r| is_visible(rig, r)).map(|r| (r, gamma.eval(&r))))
        .collect();
    let mut seeds = Vec::new();
    for i in 0..grid.n_theta {
        for j in 0..grid.n_phi {
            let Some((a, ga)) = vis[i * grid.n_phi + j] else { continue };
            let nbrs = [(i + 1, j), (i, (j + 1) % grid.n_phi)];
            for (ii, jj) in nbrs {
                if ii >= grid.n_theta {
                    continue;
                }
                let Some((b, gb)) = vis[ii * grid.n_phi + jj] else { continue };
                if ga == 0.0 || ga.signum() != gb.signum() {
                    let t = ga / (ga - gb);
                    seeds.push(a + (b - a) * if t.is_finite() { t } else { 0.5 });
                }
            }
        }
    }

    let mut branches: Vec<CurveBranch> = Vec::new();
    let cover = |branches: &[CurveBranch], p: &Vec3| {
        branches.iter().any(|b| b.samples.iter().any(|s| (s.r - p).norm() < 2.0 * arc_step.max(1e-3)))
    };
    for seed in seeds {
        let Some(start) = correct(rig, gamma, seed) else { continue };
        if !is_visible(rig, &start) || cover(&branches, &start) {
            continue;
        }
        let (fwd, closed) = march(rig, gamma, start, 1.0, arc_step);
        let samples: Vec<Vec3> = if closed {
            fwd
        } else {
            let (mut back, _) = march(rig, gamma, start, -1.0, arc_step);
            back.reverse();
            back.pop();
            back.extend(fwd);
            back
        };
        branches.push(CurveBranch { samples: samples.into_iter().map(|r| MirrorPoint { r }).collect(), closed });
    }
    if branches.is_empty() {
        return Err(Error::EmptyCurve);
    }
    Ok(VanishingCurve { normal: gamma.normal, branches, arc_step })
}

/// Membership test: on the mirror, on `Γ = 0` and facing the camera.
pub fn on_curve(rig: &CameraRig, n: &Direction, r: &Vec3, tol: f64) -> Result<bool> {
    let gamma = gamma_surface(rig, n)?;
    Ok(on_curve_with(rig, &gamma, r, tol))
}

pub fn on_curve_with(rig: &CameraRig, gamma: &GammaSurface, r: &Vec3, tol: f64) -> bool {
    let facing = rig.shape.gradient(r).dot(&(rig.center - r)) > 0.0;
    rig.shape.eval(r).abs() < tol && gamma.eval(r).abs() < tol && facing
}

/// Distance from `p` to the curve after sliding the nearest sample along the
/// curve to the foot of the perpendicular.
pub fn refined_distance(rig: &CameraRig, gamma: &GammaSurface, curve: &VanishingCurve, p: &Vec3) -> f64 {
    let Some(mut q) = curve.nearest_sample(p) else { return f64::INFINITY };
    for _ in 0..20 {
        let Some(t) = tangent(rig, gamma, &q) else { break };
        let moved = q + t * t.dot(&(p - q));
        match correct(rig, gamma, moved) {
            Some(qn) => {
                let done = (qn - q).norm() < 1e-15;
                q = qn;
                if done {
                    break;
                }
            }
            None => break,
        }
    }
    (q - p).norm().min(curve.polyline_distance(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonicalize_rig, scene_direction_at, Intrinsics, MirrorShape};

    fn sphere_axial() -> CameraRig {
        canonicalize_rig(MirrorShape::spherical(1.0).unwrap(), Vec3::new(0.0, 0.0, 3.0), Intrinsics::default())
            .unwrap()
    }

    #[test]
    fn basis_is_perpendicular_and_independent() {
        for n in [Vec3::z(), Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.3, -0.2, 0.9)] {
            let n = Direction::new(n).unwrap();
            let (a, b) = perpendicular_basis(&n);
            assert!(a.vec().dot(&n.vec()).abs() < 1e-12);
            assert!(b.vec().dot(&n.vec()).abs() < 1e-12);
            assert!(a.vec().cross(&b.vec()).norm() > 0.5);
        }
    }

    #[test]
    fn axis_normal_gives_horizontal_circle() {
        let rig = sphere_axial();
        let n = Direction::new(Vec3::z()).unwrap();
        let g = gamma_surface(&rig, &n).unwrap();
        for (k, (i, _)) in g.kappa20.basis.terms().iter().enumerate() {
            if *i > 0 {
                assert!(g.kappa20.coeffs[k].abs() < 1e-9);
            }
        }
        for (k, (i, _)) in g.kappa21.basis.terms().iter().enumerate() {
            if *i > 0 {
                assert!(g.kappa21.coeffs[k].abs() < 1e-9);
            }
        }
        let curve = trace_vanishing_curve(&rig, &n, 0.01).unwrap();
        assert_eq!(curve.branches.len(), 1);
        assert!(curve.closed());
        let z0 = curve.branches[0].samples[0].r.z;
        // Independent 1D search on the profile x = sin θ, z = cos θ for a
        // horizontal reflected ray.
        let f = |th: f64| {
            let r = Vec3::new(th.sin(), 0.0, th.cos());
            scene_direction_at(&rig, &r).unwrap().z
        };
        let (mut lo, mut hi) = (1e-3, 1.2);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((z0 - lo.cos()).abs() < 1e-9);
        for s in curve.samples() {
            assert!((s.r.z - z0).abs() < 1e-9);
        }
    }

    #[test]
    fn traced_samples_satisfy_both_equations() {
        let rig = canonicalize_rig(
            MirrorShape::new(0.6, 0.2, 1.0).unwrap(),
            Vec3::new(0.0, 0.4, 2.5),
            Intrinsics::default(),
        )
        .unwrap();
        let n = Direction::from_xyz(0.2, 0.5, 0.8).unwrap();
        let g = gamma_surface(&rig, &n).unwrap();
        assert!(g.certified_directions > 0);
        let curve = trace_with_surface(&rig, &g, 0.02).unwrap();
        for s in curve.samples() {
            assert!(rig.shape.eval(&s.r).abs() < 1e-9);
            assert!(g.eval(&s.r).abs() < 1e-9);
            assert!(on_curve_with(&rig, &g, &s.r, 1e-9));
            assert!(!on_curve_with(&rig, &g, &(s.r + Vec3::new(1e-3, 0.0, 0.0)), 1e-9));
        }
        for b in &curve.branches {
            for w in b.samples.windows(2) {
                assert!((w[1].r - w[0].r).norm() <= 0.02 * 1.05);
            }
        }
    }
}
