//! Rotation and translation from vanishing points and line images.
//!
//! Conventions: a world point `X` has camera coordinates `R X + t`, and
//! directions map as `s_cam = R s_world`.

use nalgebra::{DMatrix, DVector, Matrix3, SVD};

use crate::error::{Error, Result};
use crate::geometry::{
    pixel_to_mirror, pixel_to_plucker, project_to_pixel, CameraRig, Direction, Mat3, MirrorPoint, Pixel,
    PlueckerLine, Vec3,
};
use crate::search::refine_reflection;
use crate::vanishing::direction_from_vp;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionCorrespondence {
    /// Direction seen by the camera; its sign may be wrong.
    pub cam_dir: Direction,
    pub world_dir: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineCorrespondence {
    pub world_line: PlueckerLine,
    /// Backprojected rays of pixels on the image of `world_line`.
    pub measured_rays: Vec<PlueckerLine>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub r: Mat3,
    pub t: Vec3,
}

/// Rotation minimizing `Σ ‖R wᵢ − cᵢ‖²` (SVD with determinant correction).
fn procrustes(world: &[Vec3], cam: &[Vec3]) -> Mat3 {
    let mut h = Matrix3::zeros();
    for (w, c) in world.iter().zip(cam) {
        h += c * w.transpose();
    }
    let svd = SVD::new(h, true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let d = (u * vt).determinant().signum();
    u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d })) * vt
}

fn residual(r: &Mat3, world: &[Vec3], cam: &[Vec3]) -> f64 {
    world.iter().zip(cam).map(|(w, c)| (r * w - c).norm_squared()).sum()
}

/// Procrustes over `world`/`cam` pairs, adding the cross product when only
/// two pairs are given.
fn solve_signed(world: &[Vec3], cam: &[Vec3]) -> Mat3 {
    if world.len() == 2 {
        let w = [world[0], world[1], world[0].cross(&world[1]).normalize()];
        let c = [cam[0], cam[1], cam[0].cross(&cam[1]).normalize()];
        procrustes(&w, &c)
    } else {
        procrustes(world, cam)
    }
}

/// Rotation aligning world directions to camera directions. The sign of each
/// camera direction is chosen by exhaustive search (N ≤ 4) or greedy flips
/// (N > 4); ties keep the signs as given.
pub fn rotation_procrustes(corr: &[DirectionCorrespondence]) -> Result<Mat3> {
    if corr.len() < 2 {
        return Err(Error::InvalidInput("need at least two direction correspondences".into()));
    }
    let world: Vec<Vec3> = corr.iter().map(|c| c.world_dir.vec()).collect();
    let cam: Vec<Vec3> = corr.iter().map(|c| c.cam_dir.vec()).collect();
    let spread = |v: &[Vec3]| {
        let mut m = 0.0f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                m = m.max(v[i].cross(&v[j]).norm());
            }
        }
        m
    };
    if spread(&world) < 1e-9 || spread(&cam) < 1e-9 {
        return Err(Error::AllParallel);
    }
    let n = corr.len();
    let with_signs = |mask: u32| -> Vec<Vec3> {
        cam.iter().enumerate().map(|(i, c)| if mask >> i & 1 == 1 { -c } else { *c }).collect()
    };
    let eval = |mask: u32| {
        let c = with_signs(mask);
        let r = solve_signed(&world, &c);
        (residual(&r, &world, &c), r)
    };
    let (mut best_res, mut best_r) = eval(0);
    if n <= 4 {
        for mask in 1..(1u32 << n) {
            let (res, r) = eval(mask);
            if res < best_res - 1e-12 * (1.0 + best_res) {
                best_res = res;
                best_r = r;
            }
        }
    } else {
        let mut mask = 0u32;
        loop {
            let mut improved = false;
            for i in 0..n.min(31) {
                let trial = mask ^ (1 << i);
                let (res, r) = eval(trial);
                if res < best_res - 1e-12 * (1.0 + best_res) {
                    best_res = res;
                    best_r = r;
                    mask = trial;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
    }
    Ok(best_r)
}

/// Row `aᵀ t = b` contributed by one ray `(s, m)` meeting the world line
/// `(š, m̌)`: `a = (R š) × s`, `b = −(⟨R š, m⟩ + ⟨R m̌, s⟩)`.
pub fn translation_row(r: &Mat3, world: &PlueckerLine, ray: &PlueckerLine) -> (Vec3, f64) {
    let rs = r * world.s;
    let rm = r * world.m;
    (rs.cross(&ray.s), -(rs.dot(&ray.m) + rm.dot(&ray.s)))
}

/// Stacked system `A t = b` for all rays.
pub fn translation_system(r: &Mat3, lines: &[LineCorrespondence]) -> (DMatrix<f64>, DVector<f64>) {
    let rows: Vec<(Vec3, f64)> =
        lines.iter().flat_map(|l| l.measured_rays.iter().map(move |ray| translation_row(r, &l.world_line, ray))).collect();
    let a = DMatrix::from_fn(rows.len(), 3, |i, k| rows[i].0[k]);
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    (a, b)
}

/// Least-squares translation `t = A⁺ b`.
pub fn translation_from_lines(r: &Mat3, lines: &[LineCorrespondence]) -> Result<Vec3> {
    if lines.iter().any(|l| l.measured_rays.is_empty()) {
        return Err(Error::InvalidInput("every line needs at least one measured ray".into()));
    }
    let (a, b) = translation_system(r, lines);
    if a.nrows() < 3 {
        return Err(Error::RankDeficient(format!("{} constraint rows for 3 unknowns", a.nrows())));
    }
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-9 * smax) {
        return Err(Error::RankDeficient(format!("singular values {:?}", sv.as_slice())));
    }
    let t = svd.solve(&b, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(Vec3::new(t[0], t[1], t[2]))
}

/// Pixels on the image of a known world line.
#[derive(Clone, Debug, PartialEq)]
pub struct LinePixels {
    pub world_line: PlueckerLine,
    pub pixels: Vec<Pixel>,
}

/// Full pose from vanishing points of known world directions plus pixels of
/// known world lines.
pub fn absolute_pose(
    rig: &CameraRig,
    vps: &[(MirrorPoint, Direction)],
    line_pixels: &[LinePixels],
) -> Result<Pose> {
    let corr = vps
        .iter()
        .map(|(p, w)| Ok(DirectionCorrespondence { cam_dir: direction_from_vp(rig, p)?.0, world_dir: *w }))
        .collect::<Result<Vec<_>>>()?;
    let r = rotation_procrustes(&corr)?;
    let lines = line_pixels
        .iter()
        .map(|lp| {
            let rays = lp.pixels.iter().map(|px| pixel_to_plucker(rig, px)).collect::<Result<Vec<_>>>()?;
            Ok(LineCorrespondence { world_line: lp.world_line, measured_rays: rays })
        })
        .collect::<Result<Vec<_>>>()?;
    let t = translation_from_lines(&r, &lines)?;
    Ok(Pose { r, t })
}

/// Rotation taking view-1 coordinates to view-2 coordinates from matched
/// vanishing points.
pub fn relative_rotation(rig: &CameraRig, vp_matches: &[(MirrorPoint, MirrorPoint)]) -> Result<Mat3> {
    let corr = vp_matches
        .iter()
        .map(|(a, b)| {
            Ok(DirectionCorrespondence { cam_dir: direction_from_vp(rig, b)?.0, world_dir: direction_from_vp(rig, a)?.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    rotation_procrustes(&corr)
}

/// Lines meeting all `rays`, from the null space of the incidence system.
/// Axial rigs always admit the mirror axis as a second solution, so when the
/// null space is two-dimensional both roots of the Plücker quadric are kept.
pub fn line_candidates_from_rays(rays: &[PlueckerLine]) -> Result<Vec<PlueckerLine>> {
    if rays.len() < 4 {
        return Err(Error::InvalidInput("need at least four rays to determine a line".into()));
    }
    // ⟨s, mᵢ⟩ + ⟨m, sᵢ⟩ = 0 for the unknown line (s, m).
    let a = DMatrix::from_fn(rays.len(), 6, |i, k| if k < 3 { rays[i].m[k] } else { rays[i].s[k - 3] });
    let eig = (a.transpose() * &a).symmetric_eigen();
    let mut idx: Vec<usize> = (0..6).collect();
    idx.sort_by(|i, j| eig.eigenvalues[*i].total_cmp(&eig.eigenvalues[*j]));
    let sv = |k: usize| eig.eigenvalues[idx[k]].max(0.0).sqrt();
    if sv(2) <= 1e-9 * sv(5) {
        return Err(Error::RankDeficient("rays do not determine a line".into()));
    }
    let vec_of = |k: usize| -> [f64; 6] { std::array::from_fn(|c| eig.eigenvectors[(c, idx[k])]) };
    let mut raw: Vec<[f64; 6]> = Vec::new();
    if rays.len() >= 5 && sv(1) > 1e-6 * sv(5) {
        raw.push(vec_of(0));
    } else {
        let (v5, v6) = (vec_of(0), vec_of(1));
        let dot = |p: &[f64; 6], q: &[f64; 6]| p[0] * q[3] + p[1] * q[4] + p[2] * q[5];
        let qa = dot(&v6, &v6);
        let qb = dot(&v5, &v6) + dot(&v6, &v5);
        let qc = dot(&v5, &v5);
        let disc = qb * qb - 4.0 * qa * qc;
        if qa.abs() > 1e-14 && disc >= 0.0 {
            for sign in [1.0, -1.0] {
                let mu = (-qb + sign * disc.sqrt()) / (2.0 * qa);
                raw.push(std::array::from_fn(|c| v5[c] + mu * v6[c]));
            }
        } else if qb.abs() > 1e-14 {
            let mu = -qc / qb;
            raw.push(std::array::from_fn(|c| v5[c] + mu * v6[c]));
        }
        if qc.abs() < 1e-12 {
            raw.push(v5);
        }
        if qa.abs() < 1e-12 {
            raw.push(v6);
        }
    }
    let out: Vec<PlueckerLine> = raw
        .into_iter()
        .filter_map(|v| {
            let s = Vec3::new(v[0], v[1], v[2]);
            let n = s.norm();
            if n < 1e-12 {
                return None;
            }
            let s = s / n;
            let m = Vec3::new(v[3], v[4], v[5]) / n;
            Some(PlueckerLine { s, m: m - s * s.dot(&m) })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::RankDeficient("no real line through the rays".into()));
    }
    Ok(out)
}

/// Initial line for [`fit_line_to_pixels`]: the incidence candidate with the
/// smallest reprojection error.
pub fn init_line(rig: &CameraRig, pixels: &[Pixel]) -> Result<PlueckerLine> {
    let rays = pixels.iter().map(|px| pixel_to_plucker(rig, px)).collect::<Result<Vec<_>>>()?;
    let cands = line_candidates_from_rays(&rays)?;
    let seeds: Vec<Vec3> = pixels.iter().map(|px| pixel_to_mirror(rig, px).map(|p| p.r)).collect::<Result<_>>()?;
    let score = |line: &PlueckerLine| -> f64 {
        let mut c = 0.0;
        for ((ray, px), seed) in rays.iter().zip(pixels).zip(&seeds) {
            let p = line.point_at(line_param_closest(line, ray));
            let proj = refine_reflection(rig, &p, seed).and_then(|r| project_to_pixel(rig, &r).ok());
            match proj {
                Some(q) => c += q.distance(px).powi(2),
                None => return f64::INFINITY,
            }
        }
        c
    };
    let mut best = cands[0];
    let mut best_score = score(&best);
    for c in &cands[1..] {
        let sc = score(c);
        if sc < best_score {
            best = *c;
            best_score = sc;
        }
    }
    Ok(best)
}

/// Parameter along `ray` (from its closest-to-origin point) of the point
/// closest to `line`.
fn ray_param_closest(ray: &PlueckerLine, line: &PlueckerLine) -> f64 {
    let p1 = ray.closest_to_origin();
    let p2 = line.closest_to_origin();
    let (d1, d2) = (ray.s, line.s);
    let w = p1 - p2;
    let b = d1.dot(&d2);
    let den = 1.0 - b * b;
    if den < 1e-14 {
        return 0.0;
    }
    (b * d2.dot(&w) - d1.dot(&w)) / den
}

/// Options for [`fit_line_to_pixels`].
#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Stop once the RMS pixel residual is below this.
    pub rms_threshold: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { rms_threshold: 0.25, max_iter: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub line: PlueckerLine,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct LineParams {
    s0: Vec3,
    q0: Vec3,
    e1: Vec3,
    e2: Vec3,
}

impl LineParams {
    fn new(line: &PlueckerLine) -> Self {
        let s0 = line.s;
        let helper = if s0.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = s0.cross(&helper).normalize();
        let e2 = s0.cross(&e1);
        LineParams { s0, q0: line.closest_to_origin(), e1, e2 }
    }

    fn line(&self, p: &[f64]) -> (Vec3, Vec3) {
        let s = (self.s0 + self.e1 * p[0] + self.e2 * p[1]).normalize();
        let q = self.q0 + self.e1 * p[2] + self.e2 * p[3];
        (s, q)
    }
}

/// Iteratively refines a 3D line so that the forward projections of points on
/// it land on the observed pixels. Unknowns are four line parameters and one
/// position along the line per pixel; the Jacobian is by finite differences,
/// exploiting that each pixel residual depends only on its own position.
pub fn fit_line_to_pixels(rig: &CameraRig, pixels: &[Pixel], init: &PlueckerLine, opts: &FitOptions) -> Result<LineFit> {
    let m = pixels.len();
    if m < 4 {
        return Err(Error::InvalidInput("need at least four pixels".into()));
    }
    let rays = pixels.iter().map(|px| pixel_to_plucker(rig, px)).collect::<Result<Vec<_>>>()?;
    let mut seeds: Vec<Vec3> = pixels.iter().map(|px| pixel_to_mirror(rig, px).map(|p| p.r)).collect::<Result<_>>()?;
    let flagged = |line: PlueckerLine, rms: f64, it: usize| Ok(LineFit { line, rms, iterations: it, converged: false });

    let mut base = LineParams::new(init);
    let mut lambdas: Vec<f64> = rays.iter().map(|ray| line_param_closest(init, ray)).collect();

    let project = |s: &Vec3, q: &Vec3, lambda: f64, seed: &Vec3| -> Option<(Pixel, Vec3)> {
        let p = q + s * lambda;
        let r = refine_reflection(rig, &p, seed)?;
        Some((project_to_pixel(rig, &r).ok()?, r))
    };
    let residuals = |base: &LineParams, lp: &[f64], lambdas: &[f64], seeds: &[Vec3]| -> Option<(Vec<f64>, Vec<Vec3>)> {
        let (s, q) = base.line(lp);
        let mut out = Vec::with_capacity(2 * m);
        let mut pts = Vec::with_capacity(m);
        for i in 0..m {
            let (px, r) = project(&s, &q, lambdas[i], &seeds[i])?;
            out.push(px.u - pixels[i].u);
            out.push(px.v - pixels[i].v);
            pts.push(r);
        }
        Some((out, pts))
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let rms_of = |c: f64| (c / m as f64).sqrt();

    let zero = [0.0; 4];
    let Some((mut res, pts)) = residuals(&base, &zero, &lambdas, &seeds) else {
        return flagged(*init, f64::INFINITY, 0);
    };
    seeds = pts;
    let mut c = cost(&res);
    let mut mu = 1e-3;
    let scale = rig.scale();
    let h_line = 1e-7;
    let h_pos = 1e-7 * scale;
    let current_line = |base: &LineParams| PlueckerLine { s: base.s0, m: base.q0.cross(&base.s0) };

    for it in 0..opts.max_iter {
        if it > 0 && rms_of(c) < 1e-9 {
            return Ok(LineFit { line: current_line(&base), rms: rms_of(c), iterations: it, converged: true });
        }
        let n = 4 + m;
        let mut jac = DMatrix::zeros(2 * m, n);
        for k in 0..4 {
            let mut lp = zero;
            lp[k] = h_line;
            let mut ln = zero;
            ln[k] = -h_line;
            let (Some((rp, _)), Some((rn, _))) =
                (residuals(&base, &lp, &lambdas, &seeds), residuals(&base, &ln, &lambdas, &seeds))
            else {
                return flagged(current_line(&base), rms_of(c), it);
            };
            for row in 0..2 * m {
                jac[(row, k)] = (rp[row] - rn[row]) / (2.0 * h_line);
            }
        }
        let (s, q) = base.line(&zero);
        for i in 0..m {
            let (Some((pp, _)), Some((pn, _))) =
                (project(&s, &q, lambdas[i] + h_pos, &seeds[i]), project(&s, &q, lambdas[i] - h_pos, &seeds[i]))
            else {
                return flagged(current_line(&base), rms_of(c), it);
            };
            jac[(2 * i, 4 + i)] = (pp.u - pn.u) / (2.0 * h_pos);
            jac[(2 * i + 1, 4 + i)] = (pp.v - pn.v) / (2.0 * h_pos);
        }
        let line_rank = jac.columns(0, 4).into_owned().svd(false, false).singular_values;
        if line_rank.min() <= 1e-12 * line_rank.max().max(1e-300) {
            return flagged(current_line(&base), rms_of(c), it);
        }
        let rv = DVector::from_column_slice(&res);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * rv;
        let mut accepted = false;
        for _ in 0..25 {
            let mut lhs = jtj.clone();
            for d in 0..n {
                lhs[(d, d)] += mu * (jtj[(d, d)] + 1e-12);
            }
            let Some(step) = lhs.lu().solve(&(-&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let lp = [step[0], step[1], step[2], step[3]];
            let new_l: Vec<f64> = (0..m).map(|i| lambdas[i] + step[4 + i]).collect();
            if let Some((rn, pts)) = residuals(&base, &lp, &new_l, &seeds) {
                let cn = cost(&rn);
                if cn < c {
                    // Re-base the line on the accepted parameters.
                    let (s_new, q_new) = base.line(&lp);
                    let new_line = PlueckerLine { s: s_new, m: q_new.cross(&s_new) };
                    let new_base = LineParams::new(&new_line);
                    lambdas = (0..m).map(|i| (q_new + s_new * new_l[i] - new_base.q0).dot(&s_new)).collect();
                    base = new_base;
                    seeds = pts;
                    let rel = (c - cn) / c.max(1e-300);
                    res = rn;
                    c = cn;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    if rms_of(c) < opts.rms_threshold && (rel < 1e-10 || rms_of(c) < 1e-9) {
                        return Ok(LineFit {
                            line: current_line(&base),
                            rms: rms_of(c),
                            iterations: it + 1,
                            converged: true,
                        });
                    }
                    if rel < 1e-12 {
                        return Ok(LineFit {
                            line: current_line(&base),
                            rms: rms_of(c),
                            iterations: it + 1,
                            converged: true,
                        });
                    }
                    break;
                }
            }
            mu *= 4.0;
        }
        if !accepted {
            // No descent direction left: converged to a local minimum.
            let rms = rms_of(c);
            return Ok(LineFit { line: current_line(&base), rms, iterations: it, converged: true });
        }
    }
    flagged(current_line(&base), rms_of(c), opts.max_iter)
}

/// Parameter along `line` of the point closest to `ray`.
fn line_param_closest(line: &PlueckerLine, ray: &PlueckerLine) -> f64 {
    ray_param_closest(line, ray)
}
