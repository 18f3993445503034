use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catvp::curves::trace_vanishing_curve;
use catvp::geometry::{project_to_pixel, CameraRig, Direction, MirrorPoint, Vec3};
use catvp::pose::absolute_pose;
use catvp::pose::LinePixels;
use catvp::sim::config::PoseSceneFile;
use catvp::sim::{emit_outputs, oracle_check, run_sweep, ConfigFile, Experiment, Preset};
use catvp::vanishing::{direction_from_vp, vps_from_direction};
use catvp::{Error, ErrorKind};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

/// Vanishing points, vanishing curves and pose for quadric-mirror cameras.
///
/// Vectors are given and reported in the world frame of the rig; the mirror
/// axis is z.
#[derive(Parser)]
#[command(name = "catvp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Vanishing points of a 3D direction.
    Vp {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        dir: Vec3,
        /// Preset name or path to a rig config file.
        #[arg(long, default_value = "spherical")]
        rig: String,
    },
    /// Direction imaged at a mirror point.
    Direction {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        point: Vec3,
        #[arg(long, default_value = "spherical")]
        rig: String,
    },
    /// Vanishing curve of all directions perpendicular to a normal.
    Curve {
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        normal: Vec3,
        #[arg(long, default_value = "spherical")]
        rig: String,
        /// Arc-length spacing of the samples.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Absolute pose from vanishing points and line pixels in a scene file.
    Pose {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Noise sweep; writes one CSV per rig and an SVG plot.
    Sweep {
        #[arg(long)]
        experiment: String,
        /// Config file; the built-in rigs and defaults are used without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Compares the algebraic solver with brute-force search.
    OracleCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected three comma-separated numbers, got {}", parts.len())),
    }
}

fn load_rig(arg: &str) -> catvp::Result<CameraRig> {
    if let Some(p) = Preset::from_name(arg) {
        return Ok(p.rig());
    }
    let path = Path::new(arg);
    if !path.exists() {
        let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
        return Err(Error::InvalidInput(format!("{arg:?} is neither a preset ({}) nor a file", names.join(", "))));
    }
    let rigs = ConfigFile::load(path)?.rigs()?;
    match rigs.as_slice() {
        [one] => one.rig(),
        _ => Err(Error::Config("rig file must describe exactly one rig".into())),
    }
}

/// World-frame vectors to the canonical frame and back.
fn to_canon(rig: &CameraRig, v: &Vec3) -> Vec3 {
    rig.world_rotation * v
}

fn to_world(rig: &CameraRig, v: &Vec3) -> Vec3 {
    rig.world_rotation.transpose() * v
}

fn v3(v: &Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

fn run(cli: Cli) -> catvp::Result<Value> {
    match cli.command {
        Command::Vp { dir, rig } => {
            let rig = load_rig(&rig)?;
            let s = Direction::new(to_canon(&rig, &dir))?;
            let set = vps_from_direction(&rig, &s)?;
            let points: Vec<Value> = set
                .points
                .iter()
                .zip(&set.pixels)
                .map(|(p, px)| json!({ "point": v3(&to_world(&rig, &p.r)), "pixel": [px.u, px.v] }))
                .collect();
            Ok(json!({
                "direction": v3(&dir.normalize()),
                "degenerate": set.degenerate_flag,
                "route": set.route.map(|r| format!("{r:?}")),
                "vanishing_points": points,
            }))
        }
        Command::Direction { point, rig } => {
            let rig = load_rig(&rig)?;
            let r = MirrorPoint::on(&rig.shape, to_canon(&rig, &point))?;
            let (s, _) = direction_from_vp(&rig, &r)?;
            let px = project_to_pixel(&rig, &r.r)?;
            Ok(json!({ "direction": v3(&to_world(&rig, &s.vec())), "pixel": [px.u, px.v] }))
        }
        Command::Curve { normal, rig, step } => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::InvalidInput("step must be positive".into()));
            }
            let rig = load_rig(&rig)?;
            let n = Direction::new(to_canon(&rig, &normal))?;
            let curve = trace_vanishing_curve(&rig, &n, step)?;
            let branches: Vec<Value> = curve
                .branches
                .iter()
                .map(|b| {
                    let pts: Vec<Value> = b.samples.iter().map(|p| v3(&to_world(&rig, &p.r))).collect();
                    json!({ "closed": b.closed, "points": pts })
                })
                .collect();
            Ok(json!({ "normal": v3(&normal.normalize()), "step": step, "branches": branches }))
        }
        Command::Pose { scene } => {
            let text = std::fs::read_to_string(&scene).map_err(|e| Error::Io(format!("{}: {e}", scene.display())))?;
            let file = PoseSceneFile::parse(&text)?;
            let rig = file.rig()?;
            let canon_vps = file
                .directions
                .iter()
                .map(|d| {
                    let px = catvp::Pixel::new(d.pixel[0], d.pixel[1]);
                    let r = catvp::geometry::pixel_to_mirror(&rig, &px)?;
                    Ok((r, Direction::new(Vec3::from(d.world))?))
                })
                .collect::<catvp::Result<Vec<_>>>()?;
            let lines: Vec<LinePixels> = file
                .world_lines()?
                .into_iter()
                .map(|(world_line, pixels)| LinePixels { world_line, pixels })
                .collect();
            let pose = absolute_pose(&rig, &canon_vps, &lines)?;
            // Camera coordinates are reported in the rig's world frame.
            let back = rig.world_rotation.transpose();
            let r = back * pose.r;
            let t = back * pose.t;
            let rows: Vec<Value> = (0..3).map(|i| json!([r[(i, 0)], r[(i, 1)], r[(i, 2)]])).collect();
            Ok(json!({ "rotation": rows, "translation": v3(&t) }))
        }
        Command::Sweep { experiment, config, out_dir } => {
            let exp = Experiment::from_name(&experiment).ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::InvalidInput(format!("unknown experiment {experiment:?}; expected one of {}", names.join(", ")))
            })?;
            let cfg = match config {
                Some(p) => ConfigFile::load(&p)?,
                None => ConfigFile::parse("[mirror]\npreset = \"all\"\n")?,
            };
            let results = cfg
                .sweep_configs(exp)?
                .iter()
                .map(|c| run_sweep(c, exp))
                .collect::<catvp::Result<Vec<_>>>()?;
            let paths = emit_outputs(&results, &out_dir, exp.name())?;
            let failures: usize = results.iter().flat_map(|r| r.rows.iter().map(|row| row.failures)).sum();
            Ok(json!({
                "experiment": exp.name(),
                "outputs": paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
                "failed_trials": failures,
            }))
        }
        Command::OracleCheck { trials, seed } => {
            let rep = oracle_check(trials, seed, 1e-6);
            let out = json!({
                "trials": rep.trials,
                "degenerate": rep.degenerate,
                "errors": rep.errors,
                "mismatches": rep.mismatches,
                "max_hausdorff": rep.max_hausdorff,
            });
            if rep.errors > 0 || rep.mismatches > 0 {
                let _ = writeln!(std::io::stdout(), "{out:#}");
                return Err(Error::Numerical(format!("{} errors, {} mismatches", rep.errors, rep.mismatches)));
            }
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(v) => {
            // A closed pipe (e.g. `| head`) is not an error worth a panic.
            let _ = writeln!(std::io::stdout(), "{v:#}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Validation | ErrorKind::Io => ExitCode::from(2),
                ErrorKind::Numerical => ExitCode::from(3),
            }
        }
    }
}
