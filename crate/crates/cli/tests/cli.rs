use std::process::{Command, Output};

use catvp::geometry::{project_to_pixel, scene_direction_at, Direction, PlueckerLine, Vec3};
use catvp::sim::{line_pixels, random_direction, random_rotation, trial_rng, Preset};
use catvp::vanishing::vps_from_direction;
use rand::Rng;
use serde_json::Value;

fn catvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catvp")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn vec3(v: &Value) -> Vec3 {
    Vec3::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap(), v[2].as_f64().unwrap())
}

#[test]
fn vp_then_direction_round_trips() {
    let out = json(&catvp(&["vp", "--dir", "0.3,-0.5,0.8", "--rig", "ellipsoidal"]));
    let vps = out["vanishing_points"].as_array().unwrap();
    assert!(!vps.is_empty());
    let s = Vec3::new(0.3, -0.5, 0.8).normalize();
    for vp in vps {
        let p = vec3(&vp["point"]);
        let arg = format!("{},{},{}", p.x, p.y, p.z);
        let back = json(&catvp(&["direction", "--point", &arg, "--rig", "ellipsoidal"]));
        let d = vec3(&back["direction"]);
        assert!(d.cross(&s).norm() < 1e-8, "{d:?} vs {s:?}");
        assert!((back["pixel"][0].as_f64().unwrap() - vp["pixel"][0].as_f64().unwrap()).abs() < 1e-6);
    }
}

#[test]
fn curve_points_lie_on_the_mirror() {
    let out = json(&catvp(&["curve", "--normal", "0,1,1", "--rig", "spherical", "--step", "0.02"]));
    let branches = out["branches"].as_array().unwrap();
    assert!(!branches.is_empty());
    for b in branches {
        for p in b["points"].as_array().unwrap() {
            assert!((vec3(p).norm() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn invalid_input_exits_with_2() {
    assert_eq!(catvp(&["vp", "--dir", "0,0,0"]).status.code(), Some(2));
    assert_eq!(catvp(&["vp", "--dir", "1,2"]).status.code(), Some(2));
    assert_eq!(catvp(&["vp", "--dir", "1,0,0", "--rig", "no-such-rig"]).status.code(), Some(2));
    assert_eq!(catvp(&["sweep", "--experiment", "nope"]).status.code(), Some(2));
    assert_eq!(catvp(&["curve", "--normal", "0,0,1", "--step", "-1"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[mirror]\nD = 1.0\n").unwrap();
    let out = catvp(&["sweep", "--experiment", "abs-rotation", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn pose_without_lines_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    let rig = Preset::Spherical.rig();
    let mut text = String::from("[mirror]\npreset = \"spherical\"\n");
    for s in [Vec3::new(1.0, 0.2, 0.1), Vec3::new(-0.2, 1.0, 0.3), Vec3::new(0.1, -0.3, 1.0)] {
        let p = vps_from_direction(&rig, &Direction::new(s).unwrap()).unwrap().pixels[0];
        text += &format!("\n[[directions]]\nworld = [{}, {}, {}]\npixel = [{}, {}]\n", s.x, s.y, s.z, p.u, p.v);
    }
    std::fs::write(&scene, text).unwrap();
    assert_eq!(catvp(&["pose", "--scene", scene.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn pose_recovers_a_synthetic_scene() {
    let rig = Preset::Spherical.rig();
    assert!((rig.world_rotation - catvp::geometry::Mat3::identity()).norm() < 1e-15);
    let mut rng = trial_rng(77, 0);
    let r_gt = random_rotation(&mut rng);
    let t_gt = Vec3::new(0.3, -0.2, 0.4);
    let rt = r_gt.transpose();
    let mut text = String::from("[mirror]\npreset = \"spherical\"\n");
    let mut n = 0;
    while n < 3 {
        let cam = random_direction(&mut rng);
        let Some(p) = vps_from_direction(&rig, &cam).unwrap().points.first().copied() else { continue };
        let world = rt * scene_direction_at(&rig, &p.r).unwrap();
        let px = project_to_pixel(&rig, &p.r).unwrap();
        text += &format!("\n[[directions]]\nworld = [{}, {}, {}]\npixel = [{}, {}]\n", world.x, world.y, world.z, px.u, px.v);
        n += 1;
    }
    let mut n = 0;
    while n < 2 {
        let anchor = random_direction(&mut rng).vec() * rng.random_range(1.5..3.0);
        let cam_line = PlueckerLine::through(&anchor, &random_direction(&mut rng).vec()).unwrap();
        let Ok(px) = line_pixels(&rig, &cam_line, 4, 0.7) else { continue };
        let wl = cam_line.transformed(&rt, &(-(rt * t_gt)));
        let q = wl.closest_to_origin();
        let pix: Vec<String> = px.iter().map(|p| format!("[{}, {}]", p.u, p.v)).collect();
        text += &format!(
            "\n[[lines]]\npoint = [{}, {}, {}]\ndirection = [{}, {}, {}]\npixels = [{}]\n",
            q.x,
            q.y,
            q.z,
            wl.s.x,
            wl.s.y,
            wl.s.z,
            pix.join(", ")
        );
        n += 1;
    }
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene.toml");
    std::fs::write(&scene, text).unwrap();
    let out = json(&catvp(&["pose", "--scene", scene.to_str().unwrap()]));
    let rows = out["rotation"].as_array().unwrap();
    for i in 0..3 {
        assert!((vec3(&rows[i]) - r_gt.row(i).transpose()).norm() < 1e-6);
    }
    assert!((vec3(&out["translation"]) - t_gt).norm() < 1e-5);
}
