use approx::assert_relative_eq;
use cavityqed::geometry::{AtomSpec, CavitySpec, PhysicalConstants};
use cavityqed::kernel::*;
use cavityqed::modes::{quantize_exact, QuantizeOptions};
use cavityqed::quadrature::integrate;
use cavityqed::special::{purcell_parabolic_semiclassical, purcell_parabolic_term, s_integral};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// `2 pi sum_pol |kappa|^2 delta(omega_k - omega)` over the plane-wave continuum, with the
/// polar integral done numerically: `(omega / (2 eps0 hbar)) D^2 k^2 / ((2 pi)^2 c) int sin^3`.
fn continuum_rate(omega: f64, dipole: f64, k: &PhysicalConstants<f64>) -> f64 {
    let kk = omega / k.c;
    let polar = integrate(|th: f64| th.sin().powi(3), 0.0, PI, 16, 8);
    let density = kk * kk / k.c / (8.0 * PI.powi(3));
    2.0 * PI * density * omega / (2.0 * k.epsilon0 * k.hbar) * dipole * dipole * 2.0 * PI * polar
}

fn free_atom(omega: f64) -> AtomSpec<f64> {
    AtomSpec { focus_index: 1, position: [0.0; 3], transition_frequency: omega, dipole_magnitude: 1.0 }
}

#[test]
fn free_space_rate_matches_the_continuum_integral() {
    let k = PhysicalConstants::natural();
    assert_relative_eq!(continuum_rate(1.0, 1.0, &k), 1.0 / (3.0 * PI), max_relative = 1e-12);
    assert_relative_eq!(gamma_free(&free_atom(1.0), &k), continuum_rate(1.0, 1.0, &k), max_relative = 1e-12);
    let si = PhysicalConstants::si();
    let w = 2.0 * PI * 3.0e14;
    assert_relative_eq!(gamma_free_at(w, 1e-29, &si), continuum_rate(w, 1e-29, &si), max_relative = 1e-12);
}

#[test]
fn free_space_rate_scales_with_frequency_cubed_and_dipole_squared() {
    let k = PhysicalConstants::natural();
    assert_relative_eq!(gamma_free_at(2.0, 1.0, &k), 8.0 * gamma_free_at(1.0, 1.0, &k), max_relative = 1e-14);
    assert_relative_eq!(gamma_free_at(1.0, 3.0, &k), 9.0 * gamma_free_at(1.0, 1.0, &k), max_relative = 1e-14);
}

#[test]
fn dense_continuum_basis_gives_the_free_rate() {
    let k = PhysicalConstants::natural();
    let atom = free_atom(1.0);
    let km = free_space_basis(&atom, &k, 0.4, 1e-4).unwrap();
    let eps = 10.0 * 1e-4;
    let p = purcell_pole(&km, 0, eps, 0.05).unwrap();
    assert!((p.ratio - 1.0).abs() < 0.02, "ratio {}", p.ratio);
    let t1 = km.kernel_t1(0, 0, Complex64::new(eps, -1.0)).unwrap();
    assert!(t1.re.abs() <= 0.05 * km.gamma_free / 2.0, "T1 {t1}");
}

fn ellipsoid_kernel() -> &'static KernelMatrix {
    static K: OnceLock<KernelMatrix> = OnceLock::new();
    K.get_or_init(|| {
        let cav = CavitySpec::prolate(4.0, 3.0).unwrap();
        let k = PhysicalConstants::natural();
        let basis = quantize_exact(&cav, &k, (4.0, 6.0), &QuantizeOptions::default()).unwrap();
        let atoms = [AtomSpec::at_focus(&cav, 1, 5.0, 0.1).unwrap(), AtomSpec::at_focus(&cav, 2, 5.0, 0.1).unwrap()];
        KernelMatrix::new(&basis, &atoms, None).unwrap()
    })
}

#[test]
fn single_mode_arithmetic() {
    let k = PhysicalConstants::natural();
    let km = KernelMatrix::from_couplings(vec![1.0], vec![vec![coupling(1.0, 1.0, 1.0, &k)]], &[free_atom(1.0)], k, (0.5, 1.5), None).unwrap();
    let a = km.a(0, 0, Complex64::new(1.0, 0.0)).unwrap();
    assert_relative_eq!(a.re, 0.25, max_relative = 1e-14);
    assert_relative_eq!(a.im, -0.25, max_relative = 1e-14);
}

#[test]
fn kernel_decays_like_inverse_s() {
    let km = ellipsoid_kernel();
    let weight: f64 = km.couplings[0].iter().map(|x| x * x).sum();
    let s = Complex64::new(1e6, 0.0);
    let a = km.a(0, 0, s).unwrap();
    assert_relative_eq!((a * s).re, weight, max_relative = 1e-4);
}

#[test]
fn kernel_refuses_poles() {
    let km = ellipsoid_kernel();
    let s = Complex64::new(0.0, -km.frequencies[3]);
    assert!(km.a(0, 0, s).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric_between_foci(re in 1e-3f64..2.0, im in -8.0f64..8.0) {
        let km = ellipsoid_kernel();
        let s = Complex64::new(re, im);
        let (a12, a21) = (km.a(0, 1, s).unwrap(), km.a(1, 0, s).unwrap());
        prop_assert_eq!(a12, a21);
        prop_assert_eq!(km.kernel_t1(0, 1, s).unwrap(), a12);
    }

    #[test]
    fn kernel_respects_reality(re in 1e-3f64..2.0, im in -8.0f64..8.0) {
        // only positive frequencies enter, so the reflection is s -> -conj(s)
        let km = ellipsoid_kernel();
        let s = Complex64::new(re, im);
        let (a, b) = (km.a(0, 0, s).unwrap(), km.a(0, 0, -s.conj()).unwrap());
        prop_assert!((a + b.conj()).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn local_spectral_density_is_positive(eps in 1e-4f64..1.0, w in 4.0f64..6.0, atom in 0usize..2) {
        let km = ellipsoid_kernel();
        prop_assert!(km.a(atom, atom, Complex64::new(eps, -w)).unwrap().re > 0.0);
    }

    #[test]
    fn pole_rate_is_finite_and_positive(eps in 1e-3f64..0.5) {
        let km = ellipsoid_kernel();
        let g = km.pole_rate(0, eps).unwrap();
        prop_assert!(g.is_finite() && g > 0.0);
    }

    #[test]
    fn purcell_series_is_cauchy(u in 0.3f64..40.0) {
        let a = purcell_parabolic_semiclassical(u, 1).unwrap();
        let b = purcell_parabolic_semiclassical(u, a.terms + 200).unwrap();
        prop_assert!((a.ratio - b.ratio).abs() <= 1e-9 * b.ratio.abs());
        prop_assert!(b.ratio > 0.0);
    }

    #[test]
    fn purcell_terms_stay_under_their_envelope(u in 0.3f64..40.0, m in 1usize..40) {
        let s = s_integral(u).unwrap();
        let x = 2.0 * m as f64 * s;
        // (x coth x - 1)/sinh^2 x <= 4 (x + 1) e^{-2x}
        prop_assert!(purcell_parabolic_term(u, s, m).abs() <= 24.0 * (x + 1.0) * (-2.0 * x).exp() + 1e-300);
    }
}
