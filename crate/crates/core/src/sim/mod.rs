//! Synthetic scenes, noise models, error metrics and experiment sweeps.

pub mod config;
pub mod output;
pub mod sweep;

use nalgebra::{Unit, UnitQuaternion};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::curves::perpendicular_basis;
use crate::error::{Error, Result};
use crate::geometry::{
    canonicalize_rig, forward_project, forward_project_near, mirror_eval, project_to_pixel, CameraRig, Direction,
    Intrinsics, Mat3, MirrorPoint, MirrorShape, Pixel, PlueckerLine, Vec3,
};
use crate::pose::Pose;
use crate::search::project_onto_surface;

pub use config::{ConfigFile, RigSpec};
pub use output::{emit_outputs, write_csv, write_svg};
pub use sweep::{linear_fit, run_sweep, Experiment, LevelStats, NoiseKind, SweepConfig, SweepResult};

/// Built-in simulation rigs. Dimensions are in mirror units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Unit sphere, camera at (0, 0.2, 3).
    Spherical,
    /// `x² + y² + 0.5 z² = 1`, camera at (0, 0.2, 3).
    Ellipsoidal,
    /// Lower sheet of `(z − 1)² − ρ² = 1` cut at z = −2, camera at
    /// (0, 0.3, 2.2), away from the focus.
    Hyperbolic,
    /// Same mirror with the camera on the outer focus (0, 0, 1 + √2).
    CentralHyperbolic,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Spherical, Preset::Ellipsoidal, Preset::Hyperbolic, Preset::CentralHyperbolic];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Spherical => "spherical",
            Preset::Ellipsoidal => "ellipsoidal",
            Preset::Hyperbolic => "hyperbolic",
            Preset::CentralHyperbolic => "central-hyperbolic",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn spec(&self) -> RigSpec {
        let hyperbolic = || MirrorShape::hyperboloid(1.0, 1.0, 1.0, false, 2.0).expect("valid hyperboloid");
        let (shape, center) = match self {
            Preset::Spherical => (MirrorShape::spherical(1.0).expect("valid"), Vec3::new(0.0, 0.2, 3.0)),
            Preset::Ellipsoidal => (MirrorShape::ellipsoid(0.5, 1.0).expect("valid"), Vec3::new(0.0, 0.2, 3.0)),
            Preset::Hyperbolic => (hyperbolic(), Vec3::new(0.0, 0.3, 2.2)),
            Preset::CentralHyperbolic => (hyperbolic(), Vec3::new(0.0, 0.0, 1.0 + 2f64.sqrt())),
        };
        RigSpec { name: self.name().to_string(), shape, center, intrinsics: Intrinsics::default() }
    }

    pub fn rig(&self) -> CameraRig {
        self.spec().rig().expect("presets are valid rigs")
    }
}

/// Random stream for one trial; independent of scheduling.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Direction {
    loop {
        let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        if let Ok(d) = Direction::new(v) {
            return d;
        }
    }
}

/// Uniformly distributed rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let q = nalgebra::Quaternion::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    *UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix()
}

pub fn rotation_about(axis: &Vec3, angle: f64) -> Mat3 {
    *nalgebra::Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).matrix()
}

/// `count` lines sharing `direction`, offset uniformly over a square of half
/// width `spread` in the perpendicular plane.
pub fn gen_parallel_bundle<R: Rng + ?Sized>(
    direction: &Direction,
    count: usize,
    spread: f64,
    rng: &mut R,
) -> Vec<PlueckerLine> {
    let (e1, e2) = perpendicular_basis(direction);
    let s = direction.vec();
    (0..count)
        .map(|_| {
            let a = rng.random_range(-1.0..=1.0) * spread;
            let b = rng.random_range(-1.0..=1.0) * spread;
            let q = e1.vec() * a + e2.vec() * b;
            PlueckerLine { s, m: q.cross(&s) }
        })
        .collect()
}

/// Rotates `s` about a uniformly random perpendicular axis by an angle drawn
/// from a normal distribution with standard deviation `sigma_deg` degrees.
pub fn perturb_direction<R: Rng + ?Sized>(s: &Direction, sigma_deg: f64, rng: &mut R) -> Direction {
    let (e1, e2) = perpendicular_basis(s);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let z: f64 = rng.sample(StandardNormal);
    let axis = e1.vec() * phi.cos() + e2.vec() * phi.sin();
    let angle = (sigma_deg * z).to_radians();
    Direction::new(rotation_about(&axis, angle) * s.vec()).expect("rotation keeps unit norm")
}

pub fn perturb_pixel<R: Rng + ?Sized>(px: &Pixel, sigma: f64, rng: &mut R) -> Pixel {
    let du: f64 = rng.sample(StandardNormal);
    let dv: f64 = rng.sample(StandardNormal);
    Pixel::new(px.u + sigma * du, px.v + sigma * dv)
}

/// Gaussian noise on a mirror point followed by the nearest-point correction
/// back onto the surface.
pub fn perturb_mirror_point<R: Rng + ?Sized>(shape: &MirrorShape, r: &MirrorPoint, sigma: f64, rng: &mut R) -> MirrorPoint {
    let d = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    if sigma == 0.0 {
        return *r;
    }
    MirrorPoint::new_unchecked(project_onto_surface(shape, &(r.r + d * sigma)))
}

pub fn metric_vp_distance(r_gt: &Vec3, r: &Vec3) -> f64 {
    (r_gt - r).norm()
}

/// Mean over ground-truth points of the distance to the nearest estimate.
pub fn metric_vp_set_distance(gt: &[Vec3], est: &[Vec3]) -> Option<f64> {
    if gt.is_empty() || est.is_empty() {
        return None;
    }
    let sum: f64 = gt
        .iter()
        .map(|g| est.iter().map(|e| metric_vp_distance(g, e)).fold(f64::INFINITY, f64::min))
        .sum();
    Some(sum / gt.len() as f64)
}

/// Frobenius norm of `R_gt − R`.
pub fn metric_rotation(r_gt: &Mat3, r: &Mat3) -> f64 {
    (r_gt - r).norm()
}

/// Lines of one shared direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub direction: Direction,
    pub lines: Vec<PlueckerLine>,
}

/// Synthetic world with a known camera pose. Lines are in world coordinates.
#[derive(Clone, Debug)]
pub struct Scene {
    pub rig: CameraRig,
    pub bundles: Vec<Bundle>,
    pub pose: Pose,
}

impl Scene {
    /// Random pose and `n_bundles` bundles whose camera-frame lines pass
    /// within `spread` of points at distance 3–6 from the mirror along
    /// directions that are imaged by the rig.
    pub fn random<R: Rng + ?Sized>(
        rig: &CameraRig,
        n_bundles: usize,
        lines_per_bundle: usize,
        spread: f64,
        rng: &mut R,
    ) -> Result<Scene> {
        let r = random_rotation(rng);
        let t = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let mut bundles = Vec::with_capacity(n_bundles);
        for _ in 0..n_bundles {
            let mut tries = 0;
            loop {
                tries += 1;
                if tries > 200 {
                    return Err(Error::NoSolution);
                }
                let dir_cam = random_direction(rng);
                let lines_cam: Vec<PlueckerLine> = gen_parallel_bundle(&dir_cam, lines_per_bundle, spread, rng);
                let anchor = random_direction(rng).vec() * rng.random_range(3.0..6.0);
                let lines_cam: Vec<PlueckerLine> = lines_cam
                    .iter()
                    .map(|l| PlueckerLine { s: l.s, m: (l.closest_to_origin() + anchor).cross(&l.s) })
                    .collect();
                if !lines_cam.iter().all(|l| forward_project(rig, &l.closest_to_origin()).is_ok_and(|v| !v.is_empty())) {
                    continue;
                }
                // World line = inverse pose applied to the camera-frame line.
                let rt = r.transpose();
                let lines: Vec<PlueckerLine> = lines_cam.iter().map(|l| l.transformed(&rt, &(-(rt * t)))).collect();
                let direction = Direction::new(rt * dir_cam.vec()).expect("unit");
                bundles.push(Bundle { direction, lines });
                break;
            }
        }
        Ok(Scene { rig: rig.clone(), bundles, pose: Pose { r, t } })
    }

    pub fn camera_line(&self, world: &PlueckerLine) -> PlueckerLine {
        world.transformed(&self.pose.r, &self.pose.t)
    }
}

/// Pixels of `count` points spaced `step` apart along a camera-frame line,
/// centred on its closest point to the origin. Reflection points are tracked
/// continuously so all pixels belong to one image branch.
pub fn line_pixels(rig: &CameraRig, line: &PlueckerLine, count: usize, step: f64) -> Result<Vec<Pixel>> {
    let start = line.point_at(0.0);
    let first = forward_project(rig, &start)?;
    let (first_r, first_px) = first.first().copied().ok_or(Error::NoSolution)?;
    let half = (count as f64 - 1.0) / 2.0;
    let mut out = vec![first_px; count];
    let mid = half.floor() as usize;
    let mut walk = |indices: &mut dyn Iterator<Item = usize>| -> Result<()> {
        let mut seed = first_r.r;
        for i in indices {
            let p = line.point_at((i as f64 - mid as f64) * step);
            let r = forward_project_near(rig, &p, &seed).ok_or(Error::NoSolution)?;
            out[i] = project_to_pixel(rig, &r.r)?;
            seed = r.r;
        }
        Ok(())
    };
    walk(&mut (mid..count))?;
    walk(&mut (0..mid).rev())?;
    Ok(out)
}

/// `|Ω|` at a point, for checks on perturbed mirror points.
pub fn surface_residual(shape: &MirrorShape, r: &MirrorPoint) -> f64 {
    mirror_eval(shape, &r.r).abs()
}

/// Mirror families covered by [`random_rig`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RigFamily {
    Spherical,
    Ellipsoidal,
    Hyperbolic,
}

impl RigFamily {
    pub const ALL: [RigFamily; 3] = [RigFamily::Spherical, RigFamily::Ellipsoidal, RigFamily::Hyperbolic];
}

/// Random rig of the given family with the camera outside the mirror, either
/// on the axis or displaced from it by a random azimuth and offset.
pub fn random_rig<R: Rng + ?Sized>(family: RigFamily, axial: bool, rng: &mut R) -> Result<CameraRig> {
    let (shape, top, size) = match family {
        RigFamily::Spherical => {
            let r = rng.random_range(0.5..2.0);
            (MirrorShape::spherical(r)?, r, r)
        }
        RigFamily::Ellipsoidal => {
            let a: f64 = rng.random_range(0.3..3.0);
            let c: f64 = rng.random_range(0.5..2.0);
            let h = (c / a).sqrt();
            (MirrorShape::ellipsoid(a, c)?, h, h.max(c.sqrt()))
        }
        RigFamily::Hyperbolic => {
            let sa: f64 = rng.random_range(0.5..1.5);
            let sb = rng.random_range(0.5..1.5);
            let z0 = rng.random_range(0.0..1.0);
            (MirrorShape::hyperboloid(sa, sb, z0, false, 2.0)?, z0 - sa, sa.max(sb))
        }
    };
    let z = top + size * rng.random_range(0.5..2.5);
    let (x, y) = if axial {
        (0.0, 0.0)
    } else {
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let rho = size * rng.random_range(0.1..1.0);
        (rho * phi.cos(), rho * phi.sin())
    };
    canonicalize_rig(shape, Vec3::new(x, y, z), Intrinsics::default())
}

/// Rig drawn from a family, axial flag and direction chosen by the stream.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<(CameraRig, Direction)> {
    let family = RigFamily::ALL[rng.random_range(0..RigFamily::ALL.len())];
    let axial = rng.random_bool(0.5);
    let rig = random_rig(family, axial, rng)?;
    Ok((rig, random_direction(rng)))
}

/// Symmetric Hausdorff distance between point sets; zero for two empty sets.
pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one_way = |p: &[Vec3], q: &[Vec3]| {
        p.iter().map(|x| q.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleReport {
    pub trials: usize,
    /// Instances skipped because the direction is degenerate for the rig.
    pub degenerate: usize,
    pub errors: usize,
    pub mismatches: usize,
    pub max_hausdorff: f64,
}

/// Compares the algebraic solver against the brute-force search on random
/// instances. A mismatch is a Hausdorff distance of `tol` or more.
pub fn oracle_check(trials: usize, seed: u64, tol: f64) -> OracleReport {
    use rayon::prelude::*;
    let outcomes: Vec<Option<Option<f64>>> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k as u64);
            let Ok((rig, s)) = random_instance(&mut rng) else { return None };
            match crate::vanishing::vps_from_direction(&rig, &s) {
                Ok(set) if set.degenerate_flag => Some(None),
                Ok(set) => {
                    let ours: Vec<Vec3> = set.points.iter().map(|p| p.r).collect();
                    let oracle: Vec<Vec3> = crate::vanishing::vp_oracle(&rig, &s).iter().map(|p| p.r).collect();
                    Some(Some(hausdorff(&ours, &oracle)))
                }
                Err(_) => None,
            }
        })
        .collect();
    let mut report = OracleReport { trials, degenerate: 0, errors: 0, mismatches: 0, max_hausdorff: 0.0 };
    for o in outcomes {
        match o {
            None => report.errors += 1,
            Some(None) => report.degenerate += 1,
            Some(Some(h)) => {
                if !(h < tol) {
                    report.mismatches += 1;
                }
                report.max_hausdorff = report.max_hausdorff.max(h);
            }
        }
    }
    report
}
