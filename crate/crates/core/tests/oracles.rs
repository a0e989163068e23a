//! Independent oracles for pipeline-level behaviour: Monte-Carlo areas,
//! closed-form spectra, tensor factorization and two-resolution agreement.

use bergman_core::bergman::{DegreeCap, DEFAULT_THRESHOLD};
use bergman_core::dbar::{compact_interior, CauchyOperator, DbarStencil};
use bergman_core::diagnostics::{certificate, essential_norm_proxy, TruncationFamily};
use bergman_core::domain::flood_fill_connected;
use bergman_core::experiment::{run_extend, run_hormander, run_localize, run_prop1, ExperimentConfig};
use bergman_core::hankel::HankelAssembler;
use bergman_core::{build_lattice_quadrature, build_quadrature, gram, orthonormalize, Complex64, Domain, MonomialBasis, Symbol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::parse(text).unwrap()
}

fn conj_z_closed_form(n: usize) -> f64 {
    1.0 / (((n + 1) * (n + 2)) as f64).sqrt()
}

fn sigma(report: &Value, member: usize) -> Vec<f64> {
    report["spectra"][member]["singular_values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect()
}

#[test]
fn lens_area_matches_rejection_sampling() {
    let lens = Domain::lens(Domain::unit_disc(), Complex64::new(1.0, 0.0), 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // bounding box of B(1, 1) ∩ D is [0, 1] x [-1, 1]
    let samples = 10_000_000;
    let hits = (0..samples)
        .filter(|_| lens.contains_planar(Complex64::new(rng.gen::<f64>(), rng.gen_range(-1.0..1.0))))
        .count();
    let monte_carlo = 2.0 * hits as f64 / samples as f64;
    // two unit circles at distance 1 overlap in 2π/3 - √3/2
    let exact = 2.0 * std::f64::consts::PI / 3.0 - 3f64.sqrt() / 2.0;
    assert!((monte_carlo - exact).abs() < 2e-3, "{monte_carlo} vs {exact}");
    let area = build_quadrature(&lens, 64).unwrap().total_weight();
    assert!((area - monte_carlo).abs() < 0.02 * monte_carlo, "{area} vs {monte_carlo}");
}

#[test]
fn thin_lens_is_connected_at_high_resolution() {
    let lens = Domain::lens(Domain::unit_disc(), Complex64::new(1.0, 0.0), 0.5).unwrap();
    assert!(flood_fill_connected(&lens, 512).unwrap());
}

#[test]
fn lens_basis_is_orthonormal_with_bounded_rank() {
    let lens = Domain::lens(Domain::unit_disc(), Complex64::new(1.0, 0.0), 0.7).unwrap();
    let rule = build_quadrature(&lens, 128).unwrap();
    let basis = MonomialBasis::for_rule(&rule, DegreeCap::Single(20)).unwrap();
    let g = gram(&basis, &rule).unwrap();
    let q = orthonormalize(&g, DEFAULT_THRESHOLD).unwrap();
    assert!(q.retained_rank <= 21);
    let id = q.transform.adjoint() * &g.entries * &q.transform;
    for i in 0..id.nrows() {
        for j in 0..id.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((id[(i, j)] - target).norm() < 1e-8);
        }
    }
}

#[test]
fn bidisc_spectrum_has_w_degree_multiplicity() {
    let rule = build_quadrature(&Domain::bidisc(1.0, 1.0).unwrap(), 16).unwrap();
    let cap = DegreeCap::PerVariable(4, 4);
    let assembler = HankelAssembler::new(rule, cap, 2, DEFAULT_THRESHOLD).unwrap();
    let s = assembler.spectrum(&Symbol::parse("conj(z)").unwrap(), cap).unwrap();
    assert_eq!(s.len(), 25);
    for (k, v) in s.singular_values.iter().enumerate() {
        let exact = conj_z_closed_form(k / 5);
        assert!((v - exact).abs() < 0.02 * exact, "sigma_{k} = {v}, expected {exact}");
    }
}

#[test]
fn tail_proxy_and_certificate_rank_follow_the_closed_form() {
    let rule = build_quadrature(&Domain::unit_disc(), 128).unwrap();
    let assembler = HankelAssembler::new(rule, DegreeCap::Single(30), 2, DEFAULT_THRESHOLD).unwrap();
    let symbol = Symbol::parse("conj(z)").unwrap();
    let spectra: Vec<_> = [10, 20, 30].iter().map(|&n| assembler.spectrum(&symbol, DegreeCap::Single(n)).unwrap()).collect();
    let rows = essential_norm_proxy(&TruncationFamily::new(spectra).unwrap(), 5).unwrap();
    for r in rows {
        assert!((r.sigma_k - 1.0 / 42f64.sqrt()).abs() < 0.02 / 42f64.sqrt());
    }
    let cert = certificate(&assembler.gram_for(&symbol, DegreeCap::Single(20)).unwrap(), 0.05).unwrap();
    // sigma_18 = 1/sqrt(380) > 0.05 >= sigma_19 = 1/sqrt(420)
    assert_eq!(cert.rank, 19);
    assert!(!cert.degenerate);
}

#[test]
fn lens_spectra_agree_across_resolutions() {
    let run = |res: u32| {
        run_localize(&cfg(&format!("lens_center = 1\nlens_radius = 0.7\ndegree_caps = 4, 6, 10\nresolution = {res}\n"))).unwrap()
    };
    let (coarse, fine) = (run(128), run(256));
    let (a, b) = (sigma(&coarse.record.payload["lens"], 2), sigma(&fine.record.payload["lens"], 2));
    for (x, y) in a.iter().zip(&b).take(8) {
        assert!((x - y).abs() <= 0.05 * y, "{x} vs {y}");
    }
    // the disc side against the closed form
    for (n, s) in sigma(&fine.record.payload["omega"], 2).iter().enumerate() {
        assert!((s - conj_z_closed_form(n)).abs() < 0.01 * conj_z_closed_form(n));
    }
}

#[test]
fn bump_away_from_the_lens_restricts_to_zero() {
    let out = run_localize(&cfg("lens_center = 1\nlens_radius = 0.7\nsymbol = bump(-0.5, 0.3)\ndegree_caps = 4, 6, 8\nresolution = 64\n"))
        .unwrap();
    let lens = &out.record.payload["lens"];
    assert!(sigma(lens, 2).iter().all(|&s| s < 1e-8));
    assert_eq!(lens["verdict"]["label"], "CompactConsistent");
    assert!(sigma(&out.record.payload["omega"], 2)[0] > 1e-3);
}

#[test]
fn annulus_conj_z_is_compact_consistent_at_two_resolutions() {
    let run = |res: u32| {
        run_prop1(&cfg(&format!("domain = annulus\ninner_radius = 0.5\ndegree_caps = 4, 8, 12\nresolution = {res}\n"))).unwrap()
    };
    let (coarse, fine) = (run(128), run(256));
    for out in [&coarse, &fine] {
        assert_eq!(out.record.payload["family"]["verdict"]["label"], "CompactConsistent");
    }
    let (a, b) = (sigma(&coarse.record.payload["family"], 2), sigma(&fine.record.payload["family"], 2));
    for (x, y) in a.iter().zip(&b).take(10) {
        assert!((x - y).abs() <= 0.05 * y, "{x} vs {y}");
    }
}

#[test]
fn cauchy_residual_for_linear_data_decreases_with_resolution() {
    // g = d|z|^2/dconj(z) = z
    let mut last = f64::INFINITY;
    for res in [64, 128, 256] {
        let rule = build_lattice_quadrature(&Domain::unit_disc(), res).unwrap();
        let op = CauchyOperator::new(&rule, None).unwrap();
        let stencil = DbarStencil::new(&rule).unwrap();
        let g = rule.planar_nodes();
        let du = stencil.apply(&op.solve(&g));
        let defect: Vec<Complex64> = du.iter().zip(&g).map(|(a, b)| a - b).collect();
        let r = rule.masked_norm(&defect, &stencil.interior_within(&compact_interior(&rule, 0.1)));
        assert!(r < last, "residual {r} at {res} is not below {last}");
        last = r;
    }
}

#[test]
fn heavier_weight_shrinks_the_weighted_norm_where_psi_is_positive() {
    let out = run_hormander(&cfg("weight = quadratic\nrhs = bump(0.5, 0.3)\nweight_scales = 0, 4\nresolution = 128\n")).unwrap();
    let reports = out.record.payload["reports"].as_array().unwrap();
    let lhs: Vec<f64> = reports.iter().map(|r| r["lhs"].as_f64().unwrap()).collect();
    assert!(lhs[1] <= lhs[0], "{lhs:?}");
    for r in reports {
        assert!(r["lhs"].as_f64().unwrap() <= 1.1 * r["rhs"].as_f64().unwrap());
    }
}

#[test]
fn extension_trend_agrees_across_resolutions() {
    for res in [128, 256] {
        let out = run_extend(&cfg(&format!("function = 1/(1.1 - z)\nresolution = {res}\n"))).unwrap();
        let errors: Vec<f64> = out.record.payload["sweep"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["achieved_error"].as_f64().unwrap())
            .collect();
        assert_eq!(errors.len(), 5);
        assert!(errors.windows(2).all(|w| w[1] <= 1.1 * w[0]), "resolution {res}: {errors:?}");
        assert!(errors[4] < 0.1 * errors[0]);
    }
}
