use lift3d_core::geom::rotation::random_rotation;
use lift3d_core::rng::seeded;
use lift3d_core::{Pose, TriangleMesh};
use lift3d_refine::{accept_refinement, mask_iou_2d, refine_layout, RefineConfig};
use lift3d_render::{rasterize, BinaryMask, Camera};
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;
use rand::Rng;

fn camera() -> Camera {
    Camera::centered(120.0, 128, 128).unwrap()
}

/// Random convex instance: a cuboid or a sphere, a random rotation, and an
/// initial pose shifted by 10 px in a random image direction.
fn instance(seed: u64) -> (TriangleMesh, Pose, Pose) {
    let mut rng = seeded(seed);
    let mesh = if seed % 4 == 3 {
        TriangleMesh::uv_sphere(0.5, 12, 24)
    } else {
        let h = Vector3::new(rng.random_range(0.3..0.7), rng.random_range(0.3..0.7), rng.random_range(0.3..0.7));
        TriangleMesh::cuboid(Point3::from(-h), Point3::from(h))
    };
    let z = rng.random_range(4.0..6.0);
    let truth = Pose::new(random_rotation(&mut rng), Vector3::new(0.0, 0.0, z), Vector3::repeat(1.0)).unwrap();
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let shift = 10.0 * z / camera().fx();
    let init = truth.with_translation(truth.translation() + Vector3::new(angle.cos(), angle.sin(), 0.0) * shift).unwrap();
    (mesh, truth, init)
}

#[test]
fn recovers_shifted_convex_meshes() {
    let cam = camera();
    let mut recovered = 0;
    for seed in 0..20 {
        let (mesh, truth, init) = instance(seed);
        let target = rasterize(&mesh, &truth, &cam).mask;
        let r = refine_layout(&mesh, &init, &target, &cam, &RefineConfig::default()).unwrap();
        assert!(r.trace.len() <= 500);
        assert!(r.iou >= r.initial_iou);
        if r.iou >= 0.95 {
            recovered += 1;
        }
    }
    assert!(recovered >= 18, "{recovered}/20");
}

#[test]
fn padding_outside_the_object_does_not_change_the_result() {
    let cam = camera();
    let (mesh, truth, init) = instance(5);
    let target = rasterize(&mesh, &truth, &cam).mask;
    // widen the canvas by padding on the right and bottom; the object is far from the edges
    let wide = Camera::new(cam.fx(), cam.fy(), cam.cx(), cam.cy(), 160, 150).unwrap();
    let padded = BinaryMask::from_fn(160, 150, |x, y| x < 128 && y < 128 && target.get(x, y));
    let config = RefineConfig { max_evaluations: 120, ..Default::default() };
    let a = refine_layout(&mesh, &init, &target, &cam, &config).unwrap();
    let b = refine_layout(&mesh, &init, &padded, &wide, &config).unwrap();
    assert_eq!(a.pose, b.pose);
    assert_eq!(a.iou, b.iou);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn acceptance_never_lowers_iou(seed in 0u64..1_000_000, dx in -0.8f64..0.8, dy in -0.8f64..0.8, ds in 0.5f64..1.5) {
        let cam = camera();
        let (mesh, truth, init) = instance(seed);
        let target = rasterize(&mesh, &truth, &cam).mask;
        let candidate = Pose::new(
            *init.rotation(),
            init.translation() + Vector3::new(dx, dy, 0.0),
            init.scale() * ds,
        ).unwrap();
        let kept = accept_refinement(&init, &candidate, &mesh, &target, &cam).unwrap();
        let iou = |p: &Pose| mask_iou_2d(&rasterize(&mesh, p, &cam).mask, &target).unwrap();
        prop_assert!(iou(&kept) >= iou(&init));
        prop_assert!(kept == init || iou(&kept) > iou(&init));
    }
}
