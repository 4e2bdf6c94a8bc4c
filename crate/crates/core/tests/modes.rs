use cavityqed::geometry::{CavitySpec, PhysicalConstants};
use cavityqed::modes::*;
use cavityqed::quadrature::composite_gauss;
use std::collections::BTreeMap;

use std::sync::OnceLock;
const PROBES: [[f64; 2]; 6] = [[0.3, 0.0], [0.7, 1.1], [1.2, -0.8], [0.5, -1.6], [1.6, 0.4], [0.25, 1.9]];

fn ellipsoid() -> CavitySpec<f64> {
    CavitySpec::prolate(2.0, 1.5).unwrap()
}

fn opts(resolution: Option<f64>) -> QuantizeOptions {
    QuantizeOptions { profile_resolution: resolution, ..QuantizeOptions::default() }
}

/// Small exact basis with tabulated profiles, shared by the field-level checks.
fn basis() -> &'static ModeBasis {
    static B: OnceLock<ModeBasis> = OnceLock::new();
    B.get_or_init(|| quantize_exact(&ellipsoid(), &PhysicalConstants::natural(), (2.0, 3.5), &opts(Some(0.05))).unwrap())
}

/// Gauss rule over the ellipse `(rho, z)` cross-section, weights include `2 pi rho`.
fn volume_rule(cavity: &CavitySpec<f64>, panels: usize) -> Vec<([f64; 3], f64)> {
    let a = cavity.semi_major_axis().unwrap();
    let b = cavity.semi_minor_axis().unwrap();
    let (zs, wz) = composite_gauss(8, panels, -a, a);
    let mut out = Vec::new();
    for (z, wz) in zs.iter().zip(&wz) {
        let rmax = b * (1.0 - (z / a).powi(2)).max(0.0).sqrt() * (1.0 - 1e-12);
        let (rs, wr) = composite_gauss(8, panels, 0.0, rmax);
        for (r, wr) in rs.iter().zip(&wr) {
            out.push(([*r, 0.0, *z], wz * wr * 2.0 * std::f64::consts::PI * r));
        }
    }
    out
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[test]
fn basis_is_sorted_and_nonempty() {
    let b = basis();
    assert!(b.len() >= 4, "only {} modes", b.len());
    b.check_sorted_distinct(1e-9).unwrap();
    assert!(b.modes.iter().all(|m| m.normalization > 0.0 && m.profile.is_some()));
}

#[test]
fn modes_are_normalized_and_orthogonal() {
    let cav = ellipsoid();
    let rule = volume_rule(&cav, 12);
    let modes: Vec<&Mode> = basis().modes.iter().take(6).collect();
    let fields: Vec<Vec<[f64; 3]>> = modes
        .iter()
        .map(|m| mode_field_at_points(m, &cav, &rule.iter().map(|x| x.0).collect::<Vec<_>>()).unwrap())
        .collect();
    for i in 0..modes.len() {
        for j in 0..=i {
            let s: f64 = rule.iter().enumerate().map(|(q, (_, w))| w * dot(fields[i][q], fields[j][q])).sum();
            if i == j {
                assert!((s - 1.0).abs() < 1e-6, "mode {i}: norm {s}");
            } else {
                assert!(s.abs() < 1e-4, "modes {i},{j}: overlap {s}");
            }
        }
    }
}

/// `(E_rho, E_z)` in the `x = rho, y = 0` half-plane.
fn field_rz(m: &Mode, cav: &CavitySpec<f64>, rho: f64, z: f64) -> [f64; 2] {
    let e = mode_field_at(m, cav, [rho, 0.0, z]).unwrap();
    [e[0], e[2]]
}

/// Fourth-order central differences of `(E_rho, E_z)` in `rho` and `z`.
fn derivatives(m: &Mode, cav: &CavitySpec<f64>, rho: f64, z: f64, h: f64) -> ([[f64; 2]; 3], [[f64; 2]; 3]) {
    let c1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
    let c2 = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
    let mut dr = [[0.0; 2]; 3];
    let mut dz = [[0.0; 2]; 3];
    for (k, off) in (-2..=2).enumerate() {
        let o = off as f64 * h;
        let er = field_rz(m, cav, rho + o, z);
        let ez = field_rz(m, cav, rho, z + o);
        for c in 0..2 {
            if off == 0 {
                dr[0][c] = er[c];
                dz[0][c] = ez[c];
            }
            dr[1][c] += c1[k] * er[c] / h;
            dr[2][c] += c2[k] * er[c] / (h * h);
            dz[1][c] += c1[k] * ez[c] / h;
            dz[2][c] += c2[k] * ez[c] / (h * h);
        }
    }
    (dr, dz)
}

#[test]
fn modes_solve_the_vector_helmholtz_equation() {
    let cav = ellipsoid();
    for m in &basis().modes {
        let k2 = m.wavenumber * m.wavenumber;
        let scale = PROBES.iter().map(|p| field_rz(m, &cav, p[0], p[1])).map(|e| e[0].hypot(e[1])).fold(0.0, f64::max);
        for p in PROBES {
            let (rho, h) = (p[0], 1e-2 / m.wavenumber);
            let (dr, dz) = derivatives(m, &cav, rho, p[1], h);
            let e = dr[0];
            // Cartesian components of an axisymmetric field: (E_rho cos phi, E_rho sin phi, E_z).
            let lap_rho = dr[2][0] + dr[1][0] / rho - e[0] / (rho * rho) + dz[2][0];
            let lap_z = dr[2][1] + dr[1][1] / rho + dz[2][1];
            let res = (lap_rho + k2 * e[0]).hypot(lap_z + k2 * e[1]) / (k2 * scale);
            assert!(res < 1e-6, "{:?} at {p:?}: residual {res:e}", m.quantum_numbers);
            let div = (dr[1][0] + e[0] / rho + dz[1][1]) / (m.wavenumber * scale);
            assert!(div.abs() < 1e-6, "{:?} at {p:?}: divergence {div:e}", m.quantum_numbers);
        }
    }
}

#[test]
fn tangential_field_vanishes_on_the_wall() {
    let cav = ellipsoid();
    let a = cav.semi_major_axis().unwrap();
    let b = cav.semi_minor_axis().unwrap();
    for m in &basis().modes {
        let scale = PROBES.iter().map(|p| field_rz(m, &cav, p[0], p[1])).map(|e| e[0].hypot(e[1])).fold(0.0, f64::max);
        for j in 1..12 {
            let th = std::f64::consts::PI * j as f64 / 12.0;
            let s = 1.0 - 1e-10;
            let (rho, z) = (b * th.sin() * s, a * th.cos() * s);
            let e = field_rz(m, &cav, rho, z);
            // Tangent of the ellipse (b sin th, a cos th) is (b cos th, -a sin th).
            let (tr, tz) = (b * th.cos(), -a * th.sin());
            let et = (e[0] * tr + e[1] * tz) / tr.hypot(tz);
            assert!(et.abs() < 1e-6 * scale, "{:?} at theta {th}: tangential {et:e}", m.quantum_numbers);
        }
    }
}

#[test]
fn focal_field_is_axial_and_matches_the_stored_coupling() {
    let cav = ellipsoid();
    for m in &basis().modes {
        for focus in 0..2 {
            let p = cav.focus(focus + 1).unwrap();
            let e = mode_field_at(m, &cav, p).unwrap();
            assert!(e[0].hypot(e[1]) <= 1e-10 * e[2].abs().max(1e-300));
            let g = m.focal_coupling[focus];
            assert!((e[2] - g).abs() <= 1e-6 * g.abs().max(1e-3), "{:?} focus {focus}: {} vs {g}", m.quantum_numbers, e[2]);
            assert_eq!(m.focal_coupling[1], m.parity * m.focal_coupling[0]);
        }
    }
}

const WKB_WINDOW: (f64, f64) = (6.0, 6.6);

fn wkb_pair() -> &'static (ModeBasis, ModeBasis) {
    static P: OnceLock<(ModeBasis, ModeBasis)> = OnceLock::new();
    P.get_or_init(|| {
        let cav = CavitySpec::prolate(4.0, 3.0).unwrap();
        let k = PhysicalConstants::natural();
        let o = QuantizeOptions { check_completeness: false, ..opts(None) };
        (quantize_exact(&cav, &k, WKB_WINDOW, &o).unwrap(), quantize_wkb(&cav, &k, WKB_WINDOW, &o).unwrap())
    })
}

fn per_channel(b: &ModeBasis) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for mode in &b.modes {
        *m.entry(mode.quantum_numbers.channel).or_insert(0) += 1;
    }
    m
}

#[test]
fn wkb_frequencies_track_exact_ones() {
    let (exact, wkb) = wkb_pair();
    assert_eq!(wkb.provenance, Provenance::Wkb);
    let mut checked = 0;
    for m in exact.modes.iter().filter(|m| m.quantum_numbers.longitudinal >= 5) {
        let Some(w) = wkb.modes.iter().find(|w| w.quantum_numbers == m.quantum_numbers) else { continue };
        let rel = (w.frequency / m.frequency - 1.0).abs();
        assert!(rel <= 0.02, "{:?}: {} vs {}", m.quantum_numbers, w.frequency, m.frequency);
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} comparable modes");
}

#[test]
fn wkb_counts_match_exact_per_channel() {
    let (exact, wkb) = wkb_pair();
    let (e, w) = (per_channel(exact), per_channel(wkb));
    for (ch, n) in &e {
        let nw = *w.get(ch).unwrap_or(&0);
        assert!(n.abs_diff(nw) <= 1, "channel {ch}: exact {n}, wkb {nw}");
    }
}

#[test]
fn frequencies_scale_inversely_with_size() {
    let k = PhysicalConstants::natural();
    let o = opts(None);
    let small = quantize_exact(&ellipsoid(), &k, (2.0, 3.5), &o).unwrap();
    let big = quantize_exact(&ellipsoid().scaled(2.0), &k, (1.0, 1.75), &o).unwrap();
    assert_eq!(small.len(), big.len());
    for (a, b) in small.modes.iter().zip(&big.modes) {
        assert_eq!(a.quantum_numbers, b.quantum_numbers);
        assert!((a.frequency - 2.0 * b.frequency).abs() < 1e-9 * a.frequency);
    }
}

#[test]
fn widening_the_window_adds_modes() {
    let k = PhysicalConstants::natural();
    let counts: Vec<usize> = [2.5, 3.0, 3.5, 4.0]
        .iter()
        .map(|&hi| quantize_exact(&ellipsoid(), &k, (2.0, hi), &opts(None)).unwrap().len())
        .collect();
    assert!(counts.windows(2).all(|w| w[1] > w[0]), "{counts:?}");
}

#[test]
fn paraboloid_modes_are_normalized() {
    let cav = CavitySpec::parabolic(1.0, 12.0).unwrap();
    let basis = quantize_exact(&cav, &PhysicalConstants::natural(), (3.0, 3.6), &opts(Some(0.05))).unwrap();
    assert!(basis.len() >= 3);
    let sys = cav.system();
    let (xi_c, eta0) = (cav.xi_boundary(), cav.eta_boundary());
    // xi = s^2, eta = t^2 removes the square-root endpoints of the metric
    let (ss, ws) = composite_gauss(8, 40, 0.0, xi_c.sqrt() * (1.0 - 1e-12));
    let (ts, wt) = composite_gauss(8, 12, 0.0, eta0.sqrt() * (1.0 - 1e-12));
    let mut rule = Vec::new();
    for (s, ws) in ss.iter().zip(&ws) {
        for (t, wt) in ts.iter().zip(&wt) {
            let (xi, eta) = (s * s, t * t);
            let h = sys.scale_factors(xi, eta);
            let (rho, z) = sys.to_cylindrical(xi, eta);
            rule.push(([rho, 0.0, z], ws * wt * 4.0 * s * t * h[0] * h[1] * h[2] * 2.0 * std::f64::consts::PI));
        }
    }
    let pts: Vec<[f64; 3]> = rule.iter().map(|r| r.0).collect();
    for m in basis.modes.iter().take(4) {
        let e = mode_field_at_points(m, &cav, &pts).unwrap();
        let n: f64 = e.iter().zip(&rule).map(|(e, r)| r.1 * dot(*e, *e)).sum();
        assert!((n - 1.0).abs() < 1e-6, "{:?}: norm {n}", m.quantum_numbers);
    }
}

/// Chebyshev points on `[0, len]` and the differentiation matrix there.
fn chebyshev(n: usize, len: f64) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    use std::f64::consts::PI;
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |i: usize| if i == 0 || i == n { 2.0 } else { 1.0 };
    let mut d = nalgebra::DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * s / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let row: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -row;
    }
    // x in [-1, 1] maps to t = len (1 - x) / 2
    let t = x.iter().map(|x| 0.5 * len * (1.0 - x)).collect();
    (t, d * (-2.0 / len))
}

fn real_eigenvalues(m: nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.complex_eigenvalues().iter().filter(|z| z.im.abs() < 1e-8 * z.re.abs().max(1.0)).map(|z| z.re).collect();
    v.sort_by(f64::total_cmp);
    v
}

#[test]
fn ground_channel_matches_dense_collocation() {
    let cav = ellipsoid();
    let c0 = 0.5 * 2.0;
    let n = 64;
    assert!(basis().modes.iter().any(|m| m.quantum_numbers.channel == 0));
    for m in basis().modes.iter().filter(|m| m.quantum_numbers.channel == 0) {
        let k = m.wavenumber;
        let lam = m.separation_constant;
        let odes = separated_odes(&cav, k, 0.0).unwrap();

        // angular factor over the whole eta range: p y'' + 2 p' y' + (r0 + lambda) y = 0 is regular at both ends
        let (t, d) = chebyshev(n, 2.0 * odes.eta.length);
        let (p, r) = (odes.eta.p, odes.eta.r);
        let mut a = nalgebra::DMatrix::zeros(n + 1, n + 1);
        let d2 = &d * &d;
        for i in 0..=n {
            let ti = t[i];
            let (pv, dp, rv) = (p[1] * ti + p[2] * ti * ti, p[1] + 2.0 * p[2] * ti, r[0] + r[1] * ti + r[2] * ti * ti);
            for j in 0..=n {
                a[(i, j)] = -(pv * d2[(i, j)] + 2.0 * dp * d[(i, j)]);
            }
            a[(i, i)] -= rv;
        }
        let lams = real_eigenvalues(a);
        assert!((lams[0] - lam).abs() <= 1e-6 * lam.abs(), "k {k}: angular {} vs {lam}", lams[0]);

        // radial factor at that lambda: p y'' + 2 p' y' + (2 - lambda) y = -c^2 (1 + t)^2 y, wall d(p y)/dt = 0
        let odes = separated_odes(&cav, k, lam).unwrap();
        let len = odes.xi.length;
        let (t, d) = chebyshev(n, len);
        let p = odes.xi.p;
        let d2 = &d * &d;
        let mut a = nalgebra::DMatrix::zeros(n + 1, n + 1);
        let mut b = nalgebra::DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            let ti = t[i];
            let (pv, dp) = (p[1] * ti + p[2] * ti * ti, p[1] + 2.0 * p[2] * ti);
            if i == n {
                // t[n] = len is the wall
                for j in 0..=n {
                    a[(i, j)] = pv * d[(i, j)];
                }
                a[(i, i)] += dp;
                continue;
            }
            for j in 0..=n {
                a[(i, j)] = -(pv * d2[(i, j)] + 2.0 * dp * d[(i, j)]);
            }
            a[(i, i)] -= 2.0 - lam;
            b[(i, i)] = (1.0 + ti).powi(2);
        }
        // eliminate the wall row, leaving B^-1 A on the interior
        let w = a.row(n).clone_owned();
        let mut red = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                red[(i, j)] = (a[(i, j)] - a[(i, n)] * w[j] / w[n]) / b[(i, i)];
            }
        }
        let c2 = (k * c0).powi(2);
        let best = real_eigenvalues(red).into_iter().min_by(|x, y| (x - c2).abs().total_cmp(&(y - c2).abs())).unwrap();
        let k_dense = best.sqrt() / c0;
        assert!((k_dense - k).abs() <= 1e-6 * k, "radial: {k_dense} vs {k}");
    }
}
