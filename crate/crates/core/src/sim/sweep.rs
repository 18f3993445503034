//! Noise sweeps over the five estimation experiments.

use rand::Rng;
use rayon::prelude::*;

use super::{
    line_pixels, metric_rotation, metric_vp_set_distance, perturb_direction, perturb_pixel, random_direction,
    random_rotation, trial_rng,
};
use crate::error::{Error, Result};
use crate::geometry::{line_angle, pixel_to_mirror, pixel_to_plucker, CameraRig, Direction, Mat3, Pixel, PlueckerLine, Vec3};
use crate::pose::{rotation_procrustes, translation_from_lines, DirectionCorrespondence, LineCorrespondence};
use crate::vanishing::{direction_from_vp, vps_from_direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    /// Perturb the direction, recompute its vanishing points; error in mirror units.
    VpFromDir,
    /// Perturb the vanishing-point pixel, invert; error is the angle in radians.
    DirFromVp,
    /// Rotation from three noisy vanishing points; Frobenius error.
    AbsRotation,
    /// Translation from two noisy line images with the estimated rotation;
    /// Euclidean error in mirror units.
    AbsTranslation,
    /// Rotation between two views from noisy matched vanishing points;
    /// Frobenius error.
    RelativeRotation,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::VpFromDir,
        Experiment::DirFromVp,
        Experiment::AbsRotation,
        Experiment::AbsTranslation,
        Experiment::RelativeRotation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::VpFromDir => "vp-from-dir",
            Experiment::DirFromVp => "dir-from-vp",
            Experiment::AbsRotation => "abs-rotation",
            Experiment::AbsTranslation => "abs-translation",
            Experiment::RelativeRotation => "relative-rotation",
        }
    }

    pub fn from_name(name: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn noise_kind(&self) -> NoiseKind {
        match self {
            Experiment::VpFromDir => NoiseKind::DirectionAngleDeg,
            _ => NoiseKind::PixelGaussian,
        }
    }

    /// 0–5° in half degrees for direction noise, 0–10 px otherwise.
    pub fn default_levels(&self) -> Vec<f64> {
        match self.noise_kind() {
            NoiseKind::DirectionAngleDeg => (0..=10).map(|i| i as f64 * 0.5).collect(),
            NoiseKind::PixelGaussian => (0..=10).map(|i| i as f64).collect(),
        }
    }

    pub fn error_label(&self) -> &'static str {
        match self {
            Experiment::VpFromDir => "vanishing point distance",
            Experiment::DirFromVp => "direction angle (rad)",
            Experiment::AbsRotation | Experiment::RelativeRotation => "rotation error (Frobenius)",
            Experiment::AbsTranslation => "translation error",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    DirectionAngleDeg,
    PixelGaussian,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::DirectionAngleDeg => "direction-angle",
            NoiseKind::PixelGaussian => "pixel",
        }
    }

    pub fn from_name(name: &str) -> Option<NoiseKind> {
        [NoiseKind::DirectionAngleDeg, NoiseKind::PixelGaussian].into_iter().find(|k| k.name() == name)
    }

    pub fn unit(&self) -> &'static str {
        match self {
            NoiseKind::DirectionAngleDeg => "deg",
            NoiseKind::PixelGaussian => "px",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub preset: String,
    pub rig: CameraRig,
    pub noise_kind: NoiseKind,
    pub levels: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(preset: impl Into<String>, rig: CameraRig, experiment: Experiment) -> Self {
        SweepConfig {
            preset: preset.into(),
            rig,
            noise_kind: experiment.noise_kind(),
            levels: experiment.default_levels(),
            trials: 100,
            seed: 0,
        }
    }

    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput("noise levels must be finite and non-negative".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("noise levels must be strictly ascending".into()));
        }
        if self.noise_kind != experiment.noise_kind() {
            return Err(Error::InvalidInput(format!(
                "experiment {} uses {} noise, config has {}",
                experiment.name(),
                experiment.noise_kind().name(),
                self.noise_kind.name()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelStats {
    pub noise_level: f64,
    pub median: f64,
    pub mean: f64,
    pub q25: f64,
    pub q75: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub experiment: Experiment,
    pub preset: String,
    pub noise_kind: NoiseKind,
    pub trials: usize,
    pub rows: Vec<LevelStats>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(noise_level: f64, outcomes: &[Result<f64>]) -> LevelStats {
    let mut ok: Vec<f64> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).filter(|v| v.is_finite()).collect();
    let failures = outcomes.len() - ok.len();
    ok.sort_by(f64::total_cmp);
    let mean = if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 };
    LevelStats {
        noise_level,
        median: quantile(&ok, 0.5),
        mean,
        q25: quantile(&ok, 0.25),
        q75: quantile(&ok, 0.75),
        failures,
    }
}

/// Runs every level of the sweep. Trial `k` draws its scene and its noise
/// from the stream `(seed, k)` at every level, so levels differ only in the
/// noise magnitude. Trials run in parallel; aggregation is order-independent.
pub fn run_sweep(config: &SweepConfig, experiment: Experiment) -> Result<SweepResult> {
    config.validate(experiment)?;
    let rows = config
        .levels
        .iter()
        .map(|&level| {
            let outcomes: Vec<Result<f64>> = (0..config.trials)
                .into_par_iter()
                .map(|k| {
                    let mut rng = trial_rng(config.seed, k as u64);
                    run_trial(&config.rig, experiment, level, &mut rng)
                })
                .collect();
            summarize(level, &outcomes)
        })
        .collect();
    Ok(SweepResult {
        experiment,
        preset: config.preset.clone(),
        noise_kind: config.noise_kind,
        trials: config.trials,
        rows,
    })
}

const MAX_DRAWS: usize = 200;

/// Random direction with at least one visible vanishing point, together with
/// that point's pixel.
fn visible_direction<R: Rng + ?Sized>(
    rig: &CameraRig,
    rng: &mut R,
    also: impl Fn(&Direction) -> bool,
) -> Result<(Direction, Pixel)> {
    for _ in 0..MAX_DRAWS {
        let s = random_direction(rng);
        if !also(&s) {
            continue;
        }
        if let Some(px) = first_vp_pixel(rig, &s) {
            return Ok((s, px));
        }
    }
    Err(Error::NoSolution)
}

fn first_vp_pixel(rig: &CameraRig, s: &Direction) -> Option<Pixel> {
    vps_from_direction(rig, s).ok()?.pixels.first().copied()
}

/// Direction recovered from a noisy vanishing-point pixel.
fn direction_from_noisy_pixel<R: Rng + ?Sized>(rig: &CameraRig, px: &Pixel, sigma: f64, rng: &mut R) -> Result<Direction> {
    let noisy = perturb_pixel(px, sigma, rng);
    let r = pixel_to_mirror(rig, &noisy)?;
    Ok(direction_from_vp(rig, &r)?.0)
}

fn noisy_rotation<R: Rng + ?Sized>(rig: &CameraRig, r_gt: &Mat3, sigma: f64, rng: &mut R) -> Result<Mat3> {
    let mut corr = Vec::with_capacity(3);
    for _ in 0..3 {
        let (cam, px) = visible_direction(rig, rng, |_| true)?;
        let world = Direction::new(r_gt.transpose() * cam.vec())?;
        corr.push((world, px));
    }
    let corr = corr
        .iter()
        .map(|(w, px)| Ok(DirectionCorrespondence { cam_dir: direction_from_noisy_pixel(rig, px, sigma, rng)?, world_dir: *w }))
        .collect::<Result<Vec<_>>>()?;
    rotation_procrustes(&corr)
}

pub fn run_trial<R: Rng + ?Sized>(rig: &CameraRig, experiment: Experiment, level: f64, rng: &mut R) -> Result<f64> {
    match experiment {
        Experiment::VpFromDir => {
            let (s, _) = visible_direction(rig, rng, |_| true)?;
            let gt: Vec<Vec3> = vps_from_direction(rig, &s)?.points.iter().map(|p| p.r).collect();
            let noisy = perturb_direction(&s, level, rng);
            let est: Vec<Vec3> = vps_from_direction(rig, &noisy)?.points.iter().map(|p| p.r).collect();
            metric_vp_set_distance(&gt, &est).ok_or(Error::NoSolution)
        }
        Experiment::DirFromVp => {
            let (s, px) = visible_direction(rig, rng, |_| true)?;
            let est = direction_from_noisy_pixel(rig, &px, level, rng)?;
            Ok(line_angle(&est.vec(), &s.vec()))
        }
        Experiment::AbsRotation => {
            let r_gt = random_rotation(rng);
            let r = noisy_rotation(rig, &r_gt, level, rng)?;
            Ok(metric_rotation(&r_gt, &r))
        }
        Experiment::AbsTranslation => {
            let r_gt = random_rotation(rng);
            let t_gt = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let mut lines = Vec::with_capacity(2);
            for _ in 0..2 {
                let (cam_line, pixels) = visible_line(rig, rng)?;
                // World line mapping to `cam_line` under (R, t).
                let rt = r_gt.transpose();
                let world_line = cam_line.transformed(&rt, &(-(rt * t_gt)));
                lines.push((world_line, pixels));
            }
            let r = noisy_rotation(rig, &r_gt, level, rng)?;
            let corr = lines
                .iter()
                .map(|(wl, pixels)| {
                    // Noisy pixels that fall off the mirror image are discarded.
                    let rays: Vec<PlueckerLine> = pixels
                        .iter()
                        .map(|px| perturb_pixel(px, level, rng))
                        .collect::<Vec<_>>()
                        .iter()
                        .filter_map(|px| pixel_to_plucker(rig, px).ok())
                        .collect();
                    if rays.is_empty() {
                        return Err(Error::NoSolution);
                    }
                    Ok(LineCorrespondence { world_line: *wl, measured_rays: rays })
                })
                .collect::<Result<Vec<_>>>()?;
            let t = translation_from_lines(&r, &corr)?;
            Ok((t - t_gt).norm())
        }
        Experiment::RelativeRotation => {
            let r_rel = random_rotation(rng);
            let mut corr = Vec::with_capacity(3);
            for _ in 0..3 {
                let (s1, px1) = visible_direction(rig, rng, |s| first_vp_pixel(rig, &rotated(&r_rel, s)).is_some())?;
                let px2 = first_vp_pixel(rig, &rotated(&r_rel, &s1)).ok_or(Error::NoSolution)?;
                corr.push((px1, px2));
            }
            let corr = corr
                .iter()
                .map(|(p1, p2)| {
                    let d1 = direction_from_noisy_pixel(rig, p1, level, rng)?;
                    let d2 = direction_from_noisy_pixel(rig, p2, level, rng)?;
                    Ok(DirectionCorrespondence { cam_dir: d2, world_dir: d1 })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(metric_rotation(&r_rel, &rotation_procrustes(&corr)?))
        }
    }
}

fn rotated(r: &Mat3, s: &Direction) -> Direction {
    Direction::new(r * s.vec()).expect("rotation keeps unit norm")
}

/// Camera-frame line through a random point 1.5–2.5 units from the mirror
/// centre, imaged at 60 points spaced 0.1 apart.
fn visible_line<R: Rng + ?Sized>(rig: &CameraRig, rng: &mut R) -> Result<(PlueckerLine, Vec<Pixel>)> {
    for _ in 0..MAX_DRAWS {
        let anchor = random_direction(rng).vec() * rng.random_range(1.5..2.5);
        let dir = random_direction(rng).vec();
        let line = PlueckerLine::through(&anchor, &dir)?;
        if let Ok(px) = line_pixels(rig, &line, 60, 0.1) {
            return Ok((line, px));
        }
    }
    Err(Error::NoSolution)
}

/// Least-squares line `y = a + b x` and its coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}
