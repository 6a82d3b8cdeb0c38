//! Invariants checked over randomly generated inputs.

use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;

use nullspace_lfd::fdm::{fit, rho_max, FitConfig, LocalTranslation};
use nullspace_lfd::interaction::{damping_matrix, principal_frame};
use nullspace_lfd::robot::{dyn_consistent_projector, DampingPolicy};
use nullspace_lfd::{JointVector, RobotModel};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-range..range).prop_map(Vector3::from)
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(1.0), 0.0..std::f64::consts::PI).prop_map(|(axis, angle)| {
        let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis.normalize() };
        Rotation3::new(axis * angle).into_inner()
    })
}

fn posture() -> impl Strategy<Value = JointVector> {
    (prop::array::uniform7(-1.2..1.2f64), -2.0..-0.5f64).prop_map(|(mut q, elbow)| {
        q[3] = elbow;
        JointVector::from_row_slice(&q)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn capped_translation_is_invertible_with_positive_jacobian(
        direction in vec3(0.3).prop_filter("nonzero", |v| v.norm() > 1e-3),
        fraction in 0.01..0.99f64,
        center in vec3(0.5),
        probe in vec3(0.6),
    ) {
        let tr = LocalTranslation { rho: fraction * rho_max(&direction), center, direction };
        prop_assert!(tr.jacobian(&probe).determinant() > 0.0);
        let back = tr.invert(&tr.apply(&probe)).unwrap();
        prop_assert!((back - probe).norm() < 1e-10);
    }

    #[test]
    fn fitted_maps_respect_the_cap_and_round_trip(
        bend in vec3(0.05),
        wiggle in 0.0..0.03f64,
        probe in 0.0..1.0f64,
    ) {
        let n = 60;
        let source: Vec<_> = (0..n).map(|i| Vector3::new(0.2 * i as f64 / (n - 1) as f64, 0.0, 0.0)).collect();
        let target: Vec<_> = source
            .iter()
            .map(|x| {
                let s = x.x / 0.2;
                x + bend * (std::f64::consts::PI * s).sin() + Vector3::new(0.0, wiggle * (6.0 * s).sin(), 0.0)
            })
            .collect();
        let config = FitConfig { translations: 30, ..FitConfig::default() };
        let (phi, report) = fit(&source, &target, &config).unwrap();
        prop_assert!(phi.respects_rho_cap());
        prop_assert!(report.objective.windows(2).all(|w| w[1] <= w[0]));
        let x = Vector3::new(0.2 * probe, 0.01, -0.01);
        prop_assert!((phi.inverse(&phi.apply(&x)).unwrap() - x).norm() < 1e-9);
        prop_assert!(phi.jacobian_of(&x).determinant() > 0.0);
    }

    #[test]
    fn damping_has_the_prescribed_principal_values(
        u in rotation(),
        xi in prop::array::uniform3(0.0..200.0f64),
    ) {
        let d = damping_matrix(&u, &Vector3::from(xi));
        prop_assert!((d - d.transpose()).amax() == 0.0);
        for (c, x) in xi.iter().enumerate() {
            prop_assert!((d * u.column(c) - u.column(c) * *x).amax() < 1e-10);
        }
    }

    #[test]
    fn principal_frame_is_orthonormal_and_led_by_star(star in vec3(1.0), prev in rotation()) {
        prop_assume!(star.norm() > 1e-6);
        let u = principal_frame(&star, &prev, 1e-8);
        prop_assert!((u.transpose() * u - Matrix3::identity()).amax() < 1e-12);
        prop_assert!((u.column(0) - star.normalize()).norm() < 1e-12);
    }

    #[test]
    fn projector_identities(q in posture()) {
        let model = RobotModel::lwr_like();
        let j = model.jacobian(&q);
        let n = model.nullspace_projector(&j, &DampingPolicy::default());
        prop_assert!((j * n).amax() < 1e-9);
        prop_assert!((n * n - n).amax() < 1e-9);
        let dc = dyn_consistent_projector(&model, &q).unwrap();
        let jv = model.translational_jacobian(&q);
        prop_assert!((jv * dc.mass_inv * dc.projector).amax() < 1e-8);
        prop_assert!((dc.projector * dc.projector - dc.projector).amax() < 1e-8);
    }
}
