use bergman_web::demo::{hankel_spectrum, kernel_diagonal, shell_profile};
use std::f64::consts::PI;

#[test]
fn disc_spectrum_of_conj_z_matches_closed_form() {
    let s = hankel_spectrum("conj(z)", 8, 64, 0.0).unwrap();
    assert_eq!(s.len(), 9);
    for (n, v) in s.iter().enumerate() {
        let exact = 1.0 / (((n + 1) * (n + 2)) as f64).sqrt();
        assert!((v - exact).abs() < 1e-3 * exact, "n={n}: {v} vs {exact}");
    }
}

#[test]
fn lens_spectrum_is_below_the_disc_spectrum() {
    let disc = hankel_spectrum("conj(z)", 6, 64, 0.0).unwrap();
    let lens = hankel_spectrum("conj(z)", 6, 64, 0.7).unwrap();
    assert!(!lens.is_empty());
    assert!(lens[0] < disc[0]);
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(hankel_spectrum("conj(z", 4, 64, 0.0).is_err());
    assert!(hankel_spectrum("conj(z)", 99, 64, 0.0).is_err());
    assert!(hankel_spectrum("conj(z)", 4, 64, 3.0).is_err());
    assert!(kernel_diagonal(4, 1).is_err());
    assert!(shell_profile(0.0, 0.5, 10).is_err());
}

#[test]
fn kernel_diagonal_matches_the_truncated_series() {
    let grid = 9;
    let k = kernel_diagonal(5, grid).unwrap();
    assert_eq!(k.len(), grid * grid);
    assert!(k[0].is_nan());
    // center pixel is z = 0, where K_N = 1/pi
    assert!((k[4 * grid + 4] - 1.0 / PI).abs() < 1e-9);
    // (row 4, col 6) is z = 0.5
    let exact: f64 = (0..=5).map(|n| (n + 1) as f64 * 0.25f64.powi(n) / PI).sum();
    assert!((k[4 * grid + 6] - exact).abs() < 1e-8 * exact);
}

#[test]
fn shell_profile_is_bounded_inside_and_sharp_on_the_shell() {
    let eps = 0.1;
    let p = shell_profile(eps, 0.5, 101).unwrap();
    assert_eq!(p.len(), 3 * 101 + 1);
    let delta = *p.last().unwrap();
    assert!(delta > 0.0 && delta <= 0.5);
    for t in p[..303].chunks(3) {
        let (d, psi, eps_hess) = (t[0], t[1], t[2]);
        if d <= 0.5 {
            assert!((-1.0..=0.0).contains(&psi));
        } else {
            assert!(psi > 0.0);
        }
        if d >= 0.5 - delta && d <= 0.5 {
            assert!(eps_hess >= 1.0);
        }
    }
}
