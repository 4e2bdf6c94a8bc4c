use cavityqed::dynamics::*;
use cavityqed::geometry::{AtomSpec, CavitySpec, PhysicalConstants};
use cavityqed::kernel::{free_space_basis, KernelMatrix, Taper};
use cavityqed::modes::{quantize_exact, QuantizeOptions};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::OnceLock;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn scalar_inverse(f: impl Fn(Complex64) -> Complex64 + Sync, dt: f64, n: usize) -> Vec<Complex64> {
    let opts = InversionOptions { y_min: 1000.0, edge_tol: 1e-6, ..Default::default() };
    let (v, change) = invert_rotating(|s| Ok([f(s), Complex64::new(0.0, 0.0)]), dt, n, &opts).unwrap();
    assert!(change <= 1e-4);
    v.iter().map(|x| x[0]).collect()
}

#[test]
fn inverts_a_simple_pole() {
    let (a, b) = (0.5, 1.0);
    let dt = 0.05;
    let n = (10.0 / a / dt) as usize + 1;
    // 1/(s+a) = 1/(s+b) + (b-a)/(s+b)^2 + remainder decaying like s^-3
    let v = scalar_inverse(|s| 1.0 / (s + a) - 1.0 / (s + b) - (b - a) / ((s + b) * (s + b)), dt, n);
    for (k, z) in v.iter().enumerate() {
        let t = k as f64 * dt;
        let got = z.re + (1.0 + (b - a) * t) * (-b * t).exp();
        assert!((got - (-a * t).exp()).abs() < 1e-6 && z.im.abs() < 1e-6, "t={t}: {got}");
    }
}

#[test]
fn inverts_a_double_pole() {
    let (a, b) = (0.5, 1.0);
    let dt = 0.05;
    let n = (10.0 / a / dt) as usize + 1;
    let v = scalar_inverse(|s| 1.0 / ((s + a) * (s + a)) - 1.0 / ((s + b) * (s + b)), dt, n);
    for (k, z) in v.iter().enumerate() {
        let t = k as f64 * dt;
        assert!((z.re + t * (-b * t).exp() - t * (-a * t).exp()).abs() < 1e-6, "t={t}");
    }
}

#[test]
fn delayed_exponential_switches_on_at_the_delay() {
    let (a, b, tau) = (0.5, 1.0, 3.0);
    let dt = 0.05;
    let n = 401;
    let v = scalar_inverse(
        |s| (-s * tau).exp() * (1.0 / (s + a) - 1.0 / (s + b) - (b - a) / ((s + b) * (s + b))),
        dt,
        n,
    );
    let signal: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let u = k as f64 * dt - tau;
            z.re + if u >= 0.0 { (1.0 + (b - a) * u) * (-b * u).exp() } else { 0.0 }
        })
        .collect();
    for (k, x) in signal.iter().enumerate() {
        let u = k as f64 * dt - tau;
        let want = if u >= 0.0 { (-a * u).exp() } else { 0.0 };
        assert!((x - want).abs() < 1e-5, "t={}: {x} vs {want}", k as f64 * dt);
    }
    let onset = signal.iter().position(|&x| x > 0.5).unwrap() as f64 * dt;
    assert!((onset - tau).abs() <= dt, "onset {onset}");
}

#[test]
fn undecayed_contour_data_is_rejected() {
    let g = ContourGrid { gamma: 0.1, center: 0.0, dy: 0.05, n: 256 };
    let v: Vec<Complex64> = g.points().iter().map(|s| 1.0 / (s + 0.5)).collect();
    assert!(inverse_laplace(&g, &v, 16).is_err());
}

fn atom(w: f64) -> AtomSpec<f64> {
    AtomSpec { focus_index: 1, position: [0.0; 3], transition_frequency: w, dipole_magnitude: 1.0 }
}

fn kernel_from(freqs: Vec<f64>, couplings: Vec<Vec<f64>>, atoms: usize) -> KernelMatrix {
    let a: Vec<AtomSpec<f64>> = (0..atoms).map(|_| atom(1.0)).collect();
    KernelMatrix::from_couplings(freqs, couplings, &a, PhysicalConstants::natural(), (0.5, 1.5), None).unwrap()
}

#[test]
fn laplace_solve_trivial_kernels() {
    let s: Vec<Complex64> = (0..5).map(|j| Complex64::new(0.3, -2.0 + j as f64)).collect();
    // vanishing couplings: free evolution
    let km = kernel_from(vec![0.9, 1.1], vec![vec![0.0, 0.0]], 1);
    for (x, b) in s.iter().zip(laplace_solve(&km, Initial::Atom(1), &s).unwrap()) {
        assert!((b[0] - 1.0 / (x + I)).norm() < 1e-14);
    }
    // a single mode far below: A is nearly constant; compare with the exact 2x2 elimination
    let kap = 0.02;
    let km = kernel_from(vec![1.0], vec![vec![kap]], 1);
    for (x, b) in s.iter().zip(laplace_solve(&km, Initial::Atom(1), &s).unwrap()) {
        let want = 1.0 / (x + I + kap * kap / (x + I));
        assert!((b[0] - want).norm() < 1e-12 * want.norm());
    }
}

#[test]
fn symmetric_start_stays_symmetric() {
    let km = kernel_from(vec![0.8, 1.0, 1.3], vec![vec![0.1, -0.2, 0.05], vec![0.1, -0.2, 0.05]], 2);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let init = Initial::Amplitudes([Complex64::new(h, 0.0), Complex64::new(h, 0.0)]);
    let s: Vec<Complex64> = (0..9).map(|j| Complex64::new(0.2, -2.0 + 0.5 * j as f64)).collect();
    for b in laplace_solve(&km, init, &s).unwrap() {
        assert!((b[0] - b[1]).norm() <= 1e-14 * b[0].norm());
    }
}

fn ellipsoid_kernel() -> &'static KernelMatrix {
    static K: OnceLock<KernelMatrix> = OnceLock::new();
    K.get_or_init(|| {
        let cav = CavitySpec::prolate(4.0, 3.0).unwrap();
        let k = PhysicalConstants::natural();
        let basis = quantize_exact(&cav, &k, (3.0, 7.0), &QuantizeOptions::default()).unwrap();
        let atoms = [AtomSpec::at_focus(&cav, 1, 5.0, 0.15).unwrap(), AtomSpec::at_focus(&cav, 2, 5.0, 0.15).unwrap()];
        // Gamma_free ~ 0.3, Gamma tau ~ 3; the taper keeps the couplings smooth inside the window
        KernelMatrix::new(&basis, &atoms, Some(Taper { center: 5.0, inner: 1.0, outer: 1.9 })).unwrap()
    })
}

#[test]
fn neumann_partial_sums_converge_monotonically() {
    let km = ellipsoid_kernel();
    let s: Vec<Complex64> = (0..6).map(|j| Complex64::new(2.0, -5.0 + 0.3 * j as f64)).collect();
    let exact = laplace_solve(km, Initial::Atom(1), &s).unwrap();
    let terms = neumann_expand(km, Initial::Atom(1), &s, 8).unwrap();
    assert_eq!(terms.len(), 9);
    let half = 0.5 * km.gamma_free;
    for (j, x) in s.iter().enumerate() {
        let lead = terms[0].laplace_value[j][0];
        assert!((lead - 1.0 / (x + half + I * km.omega_eg())).norm() < 1e-14);
        let mut partial = [Complex64::new(0.0, 0.0); 2];
        let mut last = f64::INFINITY;
        for t in &terms {
            partial[0] += t.laplace_value[j][0];
            partial[1] += t.laplace_value[j][1];
            let res = (partial[0] - exact[j][0]).norm() + (partial[1] - exact[j][1]).norm();
            assert!(res < last || res < 1e-15, "order {}: residual {res} after {last}", t.order);
            last = res;
        }
    }
}

#[test]
fn exchanging_the_atoms_swaps_the_populations() {
    let km = ellipsoid_kernel();
    let t: Vec<f64> = (0..=120).map(|i| i as f64 * 0.25).collect();
    let a = evolve_exact(km, Initial::Atom(1), &t, &EvolveOptions::default()).unwrap();
    let b = evolve_exact(km, Initial::Atom(2), &t, &EvolveOptions::default()).unwrap();
    for n in 0..t.len() {
        assert!((a.p1[n] - b.p2[n]).abs() < 1e-12 && (a.p2[n] - b.p1[n]).abs() < 1e-12);
    }
}

#[test]
fn exact_propagation_conserves_the_norm() {
    let km = ellipsoid_kernel();
    let t: Vec<f64> = (0..=1200).map(|i| i as f64 * 0.025).collect();
    let tr = evolve_exact(km, Initial::Atom(1), &t, &EvolveOptions { keep_photons: true, ..Default::default() }).unwrap();
    assert_eq!((tr.p1[0], tr.p2[0]), (1.0, 0.0));
    assert!(tr.photon_amplitudes.as_ref().unwrap()[0].iter().all(|f| f.norm() == 0.0));
    assert!(tr.max_norm_drift() <= 1e-6, "drift {}", tr.max_norm_drift());
    assert!(tr.p1.iter().chain(&tr.p2).all(|p| (0.0..=1.0 + 1e-9).contains(p)));
    let rec = reconstruct_photon_amplitudes(&tr, km).unwrap();
    let stored = tr.photon_amplitudes.as_ref().unwrap();
    let scale = stored.iter().flatten().map(|f| f.norm()).fold(0.0, f64::max);
    let err = rec.iter().flatten().zip(stored.iter().flatten()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err <= 1e-4 * scale, "photon reconstruction off by {err:e}");
    for (n, f) in stored.iter().enumerate() {
        let photons: f64 = f.iter().map(|x| x.norm_sqr()).sum();
        assert!((photons - (1.0 - tr.p1[n] - tr.p2[n])).abs() < 1e-6);
    }
}

#[test]
fn laplace_inversion_agrees_with_exact_propagation() {
    let km = ellipsoid_kernel();
    let t: Vec<f64> = (0..=400).map(|i| i as f64 * 0.1).collect();
    let ex = evolve_exact(km, Initial::Atom(1), &t, &EvolveOptions::default()).unwrap();
    let opts = InversionOptions { y_min: 200.0, ..Default::default() };
    let (lp, _) = laplace_trajectory(km, Initial::Atom(1), &t, &opts).unwrap();
    for (x, y) in [(&ex.b1, &lp.b1), (&ex.b2, &lp.b2)] {
        let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = x.iter().zip(y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 0.01 * scale, "engines differ by {err:e} of {scale:e}");
    }
}

#[test]
fn dense_continuum_decays_exponentially() {
    let mut a = atom(1.0);
    a.dipole_magnitude = 0.3;
    let k = PhysicalConstants::natural();
    let km = free_space_basis(&a, &k, 0.3, 0.002).unwrap();
    let g = km.gamma_free;
    let t: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05 / g).collect();
    let tr = evolve_exact(&km, Initial::Atom(1), &t, &EvolveOptions::default()).unwrap();
    for (n, &tn) in t.iter().enumerate() {
        let want = (-g * tn).exp();
        assert!((tr.p1[n] - want).abs() <= 0.03 * want, "t Gamma = {}: {} vs {want}", g * tn, tr.p1[n]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn populations_ignore_a_global_phase(theta in 0.0f64..6.283) {
        let km = kernel_from(vec![0.95, 1.05], vec![vec![0.03, 0.04]], 1);
        let t: Vec<f64> = (0..=40).map(|i| i as f64).collect();
        let a = evolve_exact(&km, Initial::Atom(1), &t, &EvolveOptions::default()).unwrap();
        let b = evolve_exact(&km, Initial::Amplitudes([Complex64::from_polar(1.0, theta), Complex64::new(0.0, 0.0)]), &t, &EvolveOptions::default()).unwrap();
        for n in 0..t.len() {
            prop_assert!((a.p1[n] - b.p1[n]).abs() < 1e-12);
        }
    }
}
