//! Radial dipole integrals checked against direct numerical integration of
//! the Coulomb radial equation and against exact hydrogen values.

use rydberg_core::levels::{radial_matrix_element, QuantumDefectModel, RydbergLevel};

/// Radial function `u(r) = r R(r)` on the log grid `r = e^t`, integrated inwards
/// with Numerov at the quantum-defect energy and cut well inside the inner turning point.
fn numerov(n_star: f64, l: u32, t: &[f64], h: f64) -> Vec<f64> {
    let l = l as f64;
    let e = -0.5 / (n_star * n_star);
    let g: Vec<f64> = t
        .iter()
        .map(|&ti| {
            let r = ti.exp();
            (l + 0.5).powi(2) + 2.0 * r * r * (-1.0 / r - e)
        })
        .collect();
    let f: Vec<f64> = g.iter().map(|gi| 1.0 - h * h * gi / 12.0).collect();
    let mut w = vec![0.0; t.len()];
    w[0] = 1e-30;
    w[1] = 1e-30 * (h * g[0].max(0.0).sqrt()).exp();
    for i in 1..t.len() - 1 {
        w[i + 1] = ((12.0 - 10.0 * f[i]) * w[i] - f[i - 1] * w[i - 1]) / f[i + 1];
    }
    let r_inner = n_star * n_star * (1.0 - (1.0 - l * (l + 1.0) / (n_star * n_star)).max(0.0).sqrt());
    t.iter()
        .zip(&w)
        .map(|(&ti, &wi)| {
            let r = ti.exp();
            if r > 0.5 * r_inner { wi * (ti / 2.0).exp() } else { 0.0 }
        })
        .collect()
}

fn numerov_radial(a: (f64, u32), b: (f64, u32)) -> f64 {
    let h = 0.005;
    let n_max = a.0.max(b.0);
    let r_max = 2.0 * n_max * (n_max + 15.0);
    let (t_hi, t_lo) = (r_max.ln(), 0.2f64.ln());
    let steps = ((t_hi - t_lo) / h) as usize;
    let t: Vec<f64> = (0..steps).map(|k| t_hi - k as f64 * h).collect();
    let ua = numerov(a.0, a.1, &t, h);
    let ub = numerov(b.0, b.1, &t, h);
    let mut na = 0.0;
    let mut nb = 0.0;
    let mut ab = 0.0;
    for k in 0..t.len() {
        let r = t[k].exp();
        na += ua[k] * ua[k] * r;
        nb += ub[k] * ub[k] * r;
        ab += ua[k] * ub[k] * r * r;
    }
    (ab / (na * nb).sqrt()).abs()
}

#[test]
fn hydrogen_same_n_closed_form() {
    let n = 10.0_f64;
    let want = 1.5 * n * (n * n - 4.0).sqrt();
    let got = numerov_radial((n, 1), (n, 2));
    assert!((got / want - 1.0).abs() < 1e-3, "{got} vs {want}");
}

#[test]
fn hydrogen_exact_integrals() {
    let h = QuantumDefectModel::hydrogenic(3.289_841_960_250_8e15, 3);
    for ((n1, l1, n2, l2), exact) in [((10, 1, 11, 2), 45.566_517), ((15, 0, 16, 1), 84.907_770)] {
        let a = RydbergLevel::nlj(n1, l1, if l1 == 0 { 1 } else { 2 * l1 as i32 + 1 }).unwrap();
        let b = RydbergLevel::nlj(n2, l2, 2 * l2 as i32 + 1).unwrap();
        let semi = radial_matrix_element(&a, &b, &h).unwrap();
        let num = numerov_radial((n1 as f64, l1), (n2 as f64, l2));
        assert!((num / exact - 1.0).abs() < 1e-3, "numerov {num} vs {exact}");
        assert!((semi / exact - 1.0).abs() < 0.10, "semiclassical {semi} vs {exact}");
    }
}

#[test]
fn rubidium_forster_channel_integrals() {
    let qd = QuantumDefectModel::rb87();
    let d = RydbergLevel::nlj(43, 2, 5).unwrap();
    for target in [RydbergLevel::nlj(45, 1, 3).unwrap(), RydbergLevel::nlj(41, 3, 7).unwrap(), RydbergLevel::nlj(41, 3, 5).unwrap()] {
        let semi = radial_matrix_element(&d, &target, &qd).unwrap();
        let num = numerov_radial((qd.n_star(&d).unwrap(), 2), (qd.n_star(&target).unwrap(), target.l));
        assert!((semi / num - 1.0).abs() < 0.05, "{target}: semiclassical {semi} vs numerov {num}");
    }
}
