use std::f64::consts::TAU;

use calderon_core::domains::{beurling_ahlfors_extension, CircleHomeomorphism, ConformalChart};
use calderon_core::dtn::{disc_dtn_isotropic, hilbert_matrix, transform_dtn, BoundaryReparam, DtnMatrix};
use calderon_core::field_algebra::{
    mu1_of, mu2_of, mu_from_nu_of, nu_from_mu_of, nu_to_sigma_of, sigma_to_nu_of, Composed,
    PushForward, RadialShear, RealLinearMap,
};
use calderon_core::io::{read_dtn_csv, write_dtn_csv, DtnHeader};
use calderon_core::{ConductivityModel, PlanarMap, SymTensor, TensorField};
use num_complex::Complex64;
use proptest::prelude::*;

fn spd() -> impl Strategy<Value = SymTensor> {
    (0.1f64..10.0, 0.1f64..10.0, 0.0..TAU).prop_map(|(l1, l2, a)| {
        let (c, s) = (a.cos(), a.sin());
        SymTensor::new(l1 * c * c + l2 * s * s, (l1 - l2) * c * s, l1 * s * s + l2 * c * c)
    })
}

fn point(radius: f64) -> impl Strategy<Value = Complex64> {
    (0.0..radius, 0.0..TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn small_coefficient() -> impl Strategy<Value = Complex64> {
    (0.0..0.8f64, 0.0..TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

proptest! {
    #[test]
    fn coefficients_agree_and_round_trip(t in spd()) {
        let (n1, n2) = sigma_to_nu_of(&t).unwrap();
        let (m1, m2) = (mu1_of(&t).unwrap(), mu2_of(&t).unwrap());
        let (k1, k2) = nu_from_mu_of(m1, m2).unwrap();
        prop_assert!((k1 - n1).norm() < 1e-12 && (k2 - n2).abs() < 1e-12);
        prop_assert!(nu_to_sigma_of(n1, n2).unwrap().max_abs_diff(&t) < 1e-10 * t.trace().max(1.0));
        let (b1, b2) = mu_from_nu_of(n1, n2).unwrap();
        prop_assert!((b1 - m1).norm() < 1e-10 && (b2 - m2).abs() < 1e-10);
    }

    #[test]
    fn anisotropic_part_is_bounded_by_eigenvalue_ratio(t in spd()) {
        let (a, b) = t.eigenvalues();
        let k = (a.max(b) / a.min(b)).sqrt();
        let m1 = mu1_of(&t).unwrap().norm();
        prop_assert!(m1 < 1.0);
        prop_assert!((m1 - (k - 1.0) / (k + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn pushforward_composes(t in spd(), c1 in small_coefficient(), c2 in small_coefficient(), z in point(0.9), beta in -2.0..2.0f64) {
        let sigma = ConductivityModel::Constant { tensor: t, radius: 10.0 };
        let f = RealLinearMap::beltrami(c1);
        let g = Composed { outer: RadialShear { beta }, inner: RealLinearMap::beltrami(c2) };
        let both = Composed { outer: g, inner: f };
        let y = both.apply(z);
        let once = PushForward::new(&sigma, both).tensor_at(y);
        let twice = PushForward::new(PushForward::new(&sigma, f), g).tensor_at(y);
        prop_assert!(once.max_abs_diff(&twice) < 1e-9 * t.trace());
        prop_assert!((once.det() - t.det()).abs() < 1e-9 * t.det().max(1.0));
    }

    #[test]
    fn charts_round_trip(z in point(5.0)) {
        for chart in [ConformalChart::HalfPlane, ConformalChart::Exterior] {
            let z = z + Complex64::new(0.01, 0.02);
            let back = chart.unmap(chart.map(z));
            prop_assert!((back - z).norm() < 1e-10 * (1.0 + z.norm_sqr()));
        }
    }

    #[test]
    fn real_line_goes_to_unit_circle(x in -100.0..100.0f64) {
        let w = ConformalChart::HalfPlane.map(Complex64::new(x, 0.0));
        prop_assert!((w.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extension_commutes_with_rotation(eps in -0.15..0.15f64, a in 0.0..TAU, z in point(0.98)) {
        let f = move |t: f64| t + eps * (2.0 * t).sin();
        let base = beurling_ahlfors_extension(&CircleHomeomorphism::from_fn(f).unwrap()).unwrap();
        let turned = beurling_ahlfors_extension(&CircleHomeomorphism::from_fn(move |t| f(t) + a).unwrap()).unwrap();
        let want = base.apply(z) * Complex64::from_polar(1.0, a);
        prop_assert!((turned.apply(z) - want).norm() < 1e-6);
    }

    #[test]
    fn reparam_inverse_undoes_map(eps in -0.3..0.3f64, shift in -1.0..1.0f64, s in 0.0..TAU) {
        let h = BoundaryReparam::from_fn(1024, |t| t + shift + eps * t.sin()).unwrap();
        let back = h.inverse().unwrap().eval(h.eval(s));
        let d = (back - s).rem_euclid(TAU);
        prop_assert!(d.min(TAU - d) < 1e-6);
    }

    #[test]
    fn rotation_keeps_entry_sizes(alpha in 0.0..TAU, seed in prop::collection::vec(-1.0..1.0f64, 25)) {
        let mut lambda = DtnMatrix::zeros(2);
        for m in -2i64..=2 {
            for n in -2i64..=2 {
                let k = ((m + 2) * 5 + n + 2) as usize;
                lambda.set(m, n, Complex64::new(seed[k], seed[24 - k]));
            }
        }
        let turned = transform_dtn(&lambda, &BoundaryReparam::rotation(alpha, 512), 2).unwrap();
        for m in -2i64..=2 {
            for n in -2i64..=2 {
                let want = if m == 0 || n == 0 { 0.0 } else { lambda.get(m, n).norm() };
                prop_assert!((turned.get(m, n).norm() - want).abs() < 1e-9);
            }
            if m != 0 {
                prop_assert!((turned.get(m, m) - lambda.get(m, m)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn hilbert_of_constant_conductivity_squares_to_minus_one(c in 0.1..10.0f64, n in 1i64..12) {
        let h = hilbert_matrix(&disc_dtn_isotropic(c, 12));
        let hh = hilbert_matrix(&disc_dtn_isotropic(1.0 / c, 12));
        let v: Complex64 = (-12i64..=12).map(|j| hh.get(n, j) * h.get(j, n)).sum();
        prop_assert!((v + 1.0).norm() < 1e-12);
    }

    #[test]
    fn dtn_csv_round_trips(c in 0.1..10.0f64, h in 0.005..0.1f64, modes in 1usize..10) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dtn.csv");
        let lambda = DtnMatrix::diagonal(modes, |n| c * n.abs() as f64 + 1.0 / 3.0);
        let header = DtnHeader { sigma: format!("constant {c} 0 {c}"), modes, h };
        write_dtn_csv(&path, &lambda, &header).unwrap();
        let (back, head) = read_dtn_csv(&path).unwrap();
        prop_assert_eq!(back.matrix(), lambda.matrix());
        prop_assert_eq!(head, header);
    }
}
