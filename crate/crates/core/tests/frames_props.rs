use std::f64::consts::{PI, TAU};

use daa_core::frames::{
    camera_to_ned, camera_unproject, default_rig, los_angle_alpha, ned_to_spherical, project_to_camera, spherical_to_ned,
    wrap_angle, NedVector, PixelPoint, SphericalTrack,
};
use proptest::prelude::*;

fn ned() -> impl Strategy<Value = NedVector<f64>> {
    (-1e4f64..1e4, -1e4f64..1e4, -1e4f64..1e4)
        .prop_filter("nonzero", |(n, e, d)| n.abs() + e.abs() + d.abs() > 1e-3)
        .prop_map(|(n, e, d)| NedVector::new(n, e, d))
}

fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn spherical_round_trip(p in ned()) {
        let s = ned_to_spherical(&p).unwrap();
        let q = spherical_to_ned(&s);
        let err = (q - p).norm();
        prop_assert!(err <= 1e-9 * p.norm(), "err {err} for {p:?}");
    }
}

proptest! {
    #[test]
    fn range_is_the_euclidean_norm(p in ned()) {
        let s = ned_to_spherical(&p).unwrap();
        let norm = (p.north * p.north + p.east * p.east + p.down * p.down).sqrt();
        prop_assert!((s.range - norm).abs() <= 4.0 * f64::EPSILON * norm);
    }

    #[test]
    fn spherical_angles_round_trip(r in 0.1f64..1e4, az in -PI..PI, el in -1.5f64..1.5) {
        let az = wrap_angle(az);
        let s = ned_to_spherical(&spherical_to_ned(&SphericalTrack { range: r, azimuth: az, elevation: el })).unwrap();
        prop_assert!((s.range - r).abs() <= 1e-9 * r);
        prop_assert!(angle_diff(s.azimuth, az) < 1e-9);
        prop_assert!((s.elevation - el).abs() < 1e-9);
    }

    #[test]
    fn wrap_is_idempotent_and_periodic(a in -1e3f64..1e3, k in -20i32..20) {
        let w = wrap_angle(a);
        prop_assert!(w > -PI && w <= PI);
        prop_assert_eq!(wrap_angle(w), w);
        let shifted = wrap_angle(a + f64::from(k) * TAU);
        prop_assert!(angle_diff(shifted, w) < 1e-9);
    }

    #[test]
    fn alpha_is_bearing_plus_pi(theta in -10.0f64..10.0) {
        let alpha = los_angle_alpha(theta);
        prop_assert!(angle_diff(alpha - theta, PI) < 1e-12);
    }

    #[test]
    fn pixel_unproject_project_round_trip(
        cam_idx in 0usize..6,
        fu in 0.0f64..=1.0,
        fv in 0.0f64..=1.0,
        range in 1.0f64..2000.0,
        heading in -PI..PI,
    ) {
        let rig = default_rig::<f64>();
        let cam = &rig[cam_idx];
        let px = PixelPoint { u: fu * f64::from(cam.width), v: fv * f64::from(cam.height) };
        let p = camera_to_ned(&camera_unproject(&px, range, cam).unwrap(), cam, heading);
        prop_assert!((p.norm() - range).abs() <= 1e-9 * range);
        let (back, visible) = project_to_camera(&p, cam, heading);
        prop_assert!(visible);
        prop_assert!((back.u - px.u).abs() < 1e-6 && (back.v - px.v).abs() < 1e-6, "{back:?} vs {px:?}");
    }

    #[test]
    fn f32_round_trip(n in -1e3f32..1e3, e in -1e3f32..1e3, d in -1e3f32..1e3) {
        prop_assume!(n.abs() + e.abs() + d.abs() > 1.0);
        let p = NedVector::new(n, e, d);
        let q = spherical_to_ned(&ned_to_spherical(&p).unwrap());
        prop_assert!((q - p).norm() <= 1e-5 * p.norm());
    }
}
