//! TOML configuration for rigs, sweeps and pose scenes.
//!
//! ```toml
//! [mirror]
//! A = 0.0
//! B = 0.0
//! C = 1.0
//!
//! [camera]
//! cx_world = 0.0
//! cy_world = 0.2
//! cz_world = 3.0
//! fx = 500.0
//! fy = 500.0
//! cx = 320.0
//! cy = 320.0
//!
//! [noise]
//! kind = "pixel"
//! levels = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
//! trials = 100
//! seed = 7
//! ```
//!
//! `[mirror]` may instead name a built-in rig with `preset = "spherical"`,
//! or `preset = "all"` to sweep every built-in rig.

use serde::Deserialize;

use super::sweep::{Experiment, NoiseKind, SweepConfig};
use super::Preset;
use crate::error::{Error, Result};
use crate::geometry::{canonicalize_rig, CameraRig, Intrinsics, MirrorShape, Pixel, PlueckerLine, Vec3};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorSection {
    pub preset: Option<String>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub cx_world: Option<f64>,
    pub cy_world: Option<f64>,
    pub cz_world: Option<f64>,
    pub fx: Option<f64>,
    pub fy: Option<f64>,
    pub cx: Option<f64>,
    pub cy: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: Option<String>,
    pub levels: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub mirror: MirrorSection,
    #[serde(default)]
    pub camera: CameraSection,
    #[serde(default)]
    pub noise: NoiseSection,
}

/// Mirror, raw camera position and intrinsics before canonicalization.
#[derive(Clone, Debug, PartialEq)]
pub struct RigSpec {
    pub name: String,
    pub shape: MirrorShape,
    pub center: Vec3,
    pub intrinsics: Intrinsics,
}

impl RigSpec {
    pub fn rig(&self) -> Result<CameraRig> {
        canonicalize_rig(self.shape, self.center, self.intrinsics)
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Rigs described by the file: one custom rig, one preset, or all presets.
    /// Camera keys given alongside a preset override its values.
    pub fn rigs(&self) -> Result<Vec<RigSpec>> {
        let m = &self.mirror;
        let base: Vec<RigSpec> = match (&m.preset, m.a, m.b, m.c) {
            (Some(p), None, None, None) if p == "all" => Preset::ALL.iter().map(|p| p.spec()).collect(),
            (Some(p), None, None, None) => {
                vec![Preset::from_name(p).ok_or_else(|| Error::Config(format!("unknown preset {p:?}")))?.spec()]
            }
            (None, Some(a), Some(b), Some(c)) => {
                let shape = MirrorShape::new(a, b, c)?.with_window(m.z_min, m.z_max);
                let center = Vec3::new(
                    self.camera.cx_world.ok_or_else(|| missing("camera.cx_world"))?,
                    self.camera.cy_world.ok_or_else(|| missing("camera.cy_world"))?,
                    self.camera.cz_world.ok_or_else(|| missing("camera.cz_world"))?,
                );
                vec![RigSpec { name: "custom".into(), shape, center, intrinsics: Intrinsics::default() }]
            }
            (None, None, None, None) => return Err(missing("mirror")),
            _ => return Err(Error::Config("[mirror] needs either preset or all of A, B, C".into())),
        };
        base.into_iter()
            .map(|mut spec| {
                let cam = &self.camera;
                if let (Some(x), Some(y), Some(z)) = (cam.cx_world, cam.cy_world, cam.cz_world) {
                    spec.center = Vec3::new(x, y, z);
                }
                let d = spec.intrinsics;
                spec.intrinsics = Intrinsics::new(
                    cam.fx.unwrap_or(d.fx),
                    cam.fy.unwrap_or(d.fy),
                    cam.cx.unwrap_or(d.cx),
                    cam.cy.unwrap_or(d.cy),
                )?;
                Ok(spec)
            })
            .collect()
    }

    /// One sweep configuration per rig.
    pub fn sweep_configs(&self, experiment: Experiment) -> Result<Vec<SweepConfig>> {
        let kind = match &self.noise.kind {
            Some(k) => NoiseKind::from_name(k).ok_or_else(|| Error::Config(format!("unknown noise kind {k:?}")))?,
            None => experiment.noise_kind(),
        };
        self.rigs()?
            .into_iter()
            .map(|spec| {
                let cfg = SweepConfig {
                    preset: spec.name.clone(),
                    rig: spec.rig()?,
                    noise_kind: kind,
                    levels: self.noise.levels.clone().unwrap_or_else(|| experiment.default_levels()),
                    trials: self.noise.trials.unwrap_or(100),
                    seed: self.noise.seed.unwrap_or(0),
                };
                cfg.validate(experiment)?;
                Ok(cfg)
            })
            .collect()
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing {key}"))
}

/// Known world direction with the pixel of its vanishing point.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDirection {
    pub world: [f64; 3],
    pub pixel: [f64; 2],
}

/// Known world line with pixels on its image.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneLine {
    pub point: [f64; 3],
    pub direction: [f64; 3],
    pub pixels: Vec<[f64; 2]>,
}

/// Input of the `pose` command: a rig plus observations.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSceneFile {
    #[serde(default)]
    pub mirror: MirrorSection,
    #[serde(default)]
    pub camera: CameraSection,
    #[serde(default)]
    pub directions: Vec<SceneDirection>,
    #[serde(default)]
    pub lines: Vec<SceneLine>,
}

impl PoseSceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn rig(&self) -> Result<CameraRig> {
        let cfg = ConfigFile { mirror: self.mirror.clone(), camera: self.camera.clone(), noise: NoiseSection::default() };
        let spec = cfg.rigs()?;
        if spec.len() != 1 {
            return Err(Error::Config("pose scene needs exactly one rig".into()));
        }
        spec[0].rig()
    }

    pub fn world_lines(&self) -> Result<Vec<(PlueckerLine, Vec<Pixel>)>> {
        self.lines
            .iter()
            .map(|l| {
                let line = PlueckerLine::through(&Vec3::from(l.point), &Vec3::from(l.direction))?;
                Ok((line, l.pixels.iter().map(|p| Pixel::new(p[0], p[1])).collect()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"
[mirror]
A = 0.0
B = 0.0
C = 1.0

[camera]
cx_world = 0.0
cy_world = 0.2
cz_world = 3.0
fx = 500.0
fy = 500.0
cx = 320.0
cy = 320.0

[noise]
kind = "pixel"
levels = [0, 1, 2]
trials = 5
seed = 7
"#;
        let cfg = ConfigFile::parse(text).unwrap();
        let sweeps = cfg.sweep_configs(Experiment::DirFromVp).unwrap();
        assert_eq!(sweeps.len(), 1);
        assert_eq!(sweeps[0].levels, vec![0.0, 1.0, 2.0]);
        assert_eq!(sweeps[0].seed, 7);
        assert!(cfg.sweep_configs(Experiment::VpFromDir).is_err());
    }

    #[test]
    fn presets_and_errors() {
        let all = ConfigFile::parse("[mirror]\npreset = \"all\"\n").unwrap();
        assert_eq!(all.rigs().unwrap().len(), 4);
        assert!(ConfigFile::parse("[mirror]\npreset = \"nope\"\n").unwrap().rigs().is_err());
        assert!(ConfigFile::parse("[mirror]\nA = 1.0\n").unwrap().rigs().is_err());
        assert!(ConfigFile::parse("[mirror]\nD = 1.0\n").is_err());
    }
}
