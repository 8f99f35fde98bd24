#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use lift3d_core::io::{write_obj, write_xyz};
use lift3d_core::{PointCloud, Pose, RotationMatrix, TriangleMesh};
use lift3d_render::io::{write_mask, write_pointmap, write_rgb};
use lift3d_render::{rasterize, BinaryMask, Camera, Pointmap, RgbImage};
use nalgebra::{Point3, Vector3};
use serde_json::{json, Value};

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn lift3d(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("lift3d").chain(args.iter().copied());
    let code = lift3d_cli::run(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn json_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

pub fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn schema_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(name)
}

/// Panics with the validation errors if `value` does not match the shipped
/// schema `name`.
pub fn assert_schema(name: &str, value: &Value) {
    let schema = read_json(&schema_path(name));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{value}");
}

pub fn write_mesh(dir: &Path, name: &str, mesh: &TriangleMesh) -> String {
    write_obj(mesh, fs::File::create(dir.join(name)).unwrap()).unwrap();
    name.to_string()
}

pub fn write_cloud(dir: &Path, name: &str, cloud: &PointCloud) -> PathBuf {
    let p = dir.join(name);
    write_xyz(cloud, fs::File::create(&p).unwrap()).unwrap();
    p
}

pub fn write_lines(dir: &Path, name: &str, lines: &[Value]) -> PathBuf {
    let p = dir.join(name);
    let text: String = lines.iter().map(|v| format!("{v}\n")).collect();
    fs::write(&p, text).unwrap();
    p
}

pub fn box_mesh(hx: f64, hy: f64, hz: f64) -> TriangleMesh {
    TriangleMesh::cuboid(Point3::new(-hx, -hy, -hz), Point3::new(hx, hy, hz))
}

pub fn pose(axis: [f64; 3], angle: f64, t: [f64; 3], s: f64) -> Pose {
    Pose::new(RotationMatrix::from_axis_angle(&Vector3::from(axis), angle), Vector3::from(t), Vector3::repeat(s)).unwrap()
}

pub fn pose_json(p: &Pose) -> Value {
    serde_json::to_value(p).unwrap()
}

pub fn camera() -> Camera {
    Camera::centered(80.0, 64, 64).unwrap()
}

pub fn camera_json() -> Value {
    serde_json::to_value(camera()).unwrap()
}

/// Fast shape-metric settings for tests.
pub fn write_config(dir: &Path) -> PathBuf {
    let p = dir.join("config.json");
    let c = json!({
        "shape": {"n_points": 3000, "emd_subsample": 128, "voxel_resolution": 24, "coarse_points": 200},
        "layout": {"n_points": 1000}
    });
    fs::write(&p, c.to_string()).unwrap();
    p
}

pub fn background(dir: &Path) -> String {
    let c = camera();
    let img =
        RgbImage::new(c.width(), c.height(), (0..c.width() * c.height()).map(|i| [(i % 97) as u8, (i % 53) as u8, 90]).collect()).unwrap();
    write_rgb(dir.join("bg.png"), &img).unwrap();
    "bg.png".into()
}

/// A ground plane that recedes toward the top of the image: depth falls
/// from 6 at the top row to 3 at the bottom.
pub fn floor_pointmap(dir: &Path) -> (String, Pointmap) {
    let c = camera();
    let h = c.height() as f64;
    let pm = Pointmap::from_depth(&c, |_, y| 6.0 - 3.0 * y as f64 / (h - 1.0));
    write_pointmap(dir.join("floor.bin"), &pm).unwrap();
    ("floor.bin".into(), pm)
}

pub fn mask_file(dir: &Path, name: &str, mask: &BinaryMask) -> String {
    write_mask(dir.join(name), mask).unwrap();
    name.into()
}

pub fn silhouette(mesh: &TriangleMesh, p: &Pose) -> BinaryMask {
    rasterize(mesh, p, &camera()).mask
}

/// Every file under `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}
