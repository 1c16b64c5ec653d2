//! Quick cross-cutting sanity checks wiring the modules together.

use toricg2::ansatz::{
    build_structure, build_structure_poly, elliptic_residual, poincare_potential,
    torsion_residual, Box4, ConnectionPotential, PolyMat3, VField,
};
use toricg2::forms::{hodge, metric_from_three_form, FrameMetric, KForm};
use toricg2::g2::{g2_basis, phi0, star_phi0, G2Point};
use toricg2::models;
use toricg2::poly::Poly;

fn unit_box() -> Box4 {
    Box4 {
        lo: [-1.0, -1.0, -1.0, -1.0],
        hi: [1.0, 1.0, 1.0, 1.0],
    }
}

#[test]
fn phi0_metric_is_identity() {
    let (g, vol) = metric_from_three_form(&phi0()).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g.components[(i, j)] - want).abs() < 1e-12, "{i}{j}");
        }
    }
    assert!((vol.coeff(&[1, 2, 3, 4, 5, 6, 7]) - 1.0).abs() < 1e-12);
    let h = hodge(&phi0(), &g, &vol).unwrap();
    assert!(h.sub(&star_phi0()).max_abs() < 1e-12);
}

#[test]
fn g2_basis_has_dimension_14() {
    let at = G2Point::standard();
    let basis = g2_basis(&at).unwrap();
    assert_eq!(basis.len(), 14);
}

#[test]
fn constant_v_structure_is_standard_like() {
    let v = VField::constant(nalgebra::Matrix3::identity(), unit_box());
    let a = ConnectionPotential::zero();
    let (phi, sphi, g) = build_structure(&v, &a, &[0.0; 4]).unwrap();
    // metric block form: identity
    for i in 0..7 {
        for j in 0..7 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - want).abs() < 1e-12);
        }
    }
    // phi is a definite G2 form whose recovered metric matches g
    let (gr, vol) = metric_from_three_form(&phi).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            assert!(
                (gr.components[(i, j)] - g[(i, j)]).abs() < 1e-9,
                "g mismatch at {i}{j}: {} vs {}",
                gr.components[(i, j)],
                g[(i, j)]
            );
        }
    }
    // built *phi agrees with the Hodge dual of phi
    let h = hodge(&phi, &gr, &vol).unwrap();
    assert!(
        h.sub(&sphi).max_abs() < 1e-9,
        "star mismatch {:e}",
        h.sub(&sphi).max_abs()
    );
}

#[test]
fn mu_dep_example_is_a_solution() {
    // V = diag(mu, mu, mu) with A_i = nu_j d nu_k so that dA_i = dnu_j ^ dnu_k
    let mu = Poly::var(3);
    let v = VField::polynomial(
        PolyMat3::diag([mu.clone(), mu.clone(), mu]),
        Box4 {
            lo: [-1.0, -1.0, -1.0, 0.5],
            hi: [1.0, 1.0, 1.0, 2.0],
        },
    );
    let mut a = ConnectionPotential::zero();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        a.a[i][k] = Poly::var(j);
    }
    let x = [0.0, 0.0, 0.0, 1.0];
    assert!(elliptic_residual(&v, &x).amax() < 1e-14);
    let (_, _, g) = build_structure(&v, &a, &x).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - want).abs() < 1e-12, "{i}{j} -> {}", g[(i, j)]);
        }
    }
    let grid = v.domain.grid(4);
    let (dphi, dsphi) = torsion_residual(&v, &a, &grid).unwrap();
    assert!(dphi < 1e-12, "dphi = {dphi:e}");
    assert!(dsphi < 1e-12, "dstarphi = {dsphi:e}");
    // the numerically built forms agree with the polynomial ones
    let (pp, ps) = build_structure_poly(v.as_polynomial().unwrap(), &a);
    let (np, ns, _) = build_structure(&v, &a, &[0.3, -0.2, 0.1, 1.3]).unwrap();
    assert!(pp.at(&[0.3, -0.2, 0.1, 1.3]).sub(&np).max_abs() < 1e-12);
    assert!(ps.at(&[0.3, -0.2, 0.1, 1.3]).sub(&ns).max_abs() < 1e-12);
}

#[test]
fn poly_ex_is_a_solution_with_poincare_potential() {
    let mut m = PolyMat3::zero();
    let mut v11 = Poly::zero();
    v11.add_term([0, 0, 0, 5], 2.0);
    v11.add_term([0, 0, 2, 2], -15.0);
    v11.add_term([0, 2, 0, 0], -5.0);
    let mut v22 = Poly::zero();
    v22.add_term([0, 0, 0, 3], 1.0);
    v22.add_term([0, 0, 2, 0], -3.0);
    m.set(0, 0, v11);
    m.set(1, 1, v22);
    m.set(2, 2, Poly::var(3));
    let v = VField::polynomial(
        m,
        Box4 {
            lo: [-0.1, -0.1, -0.1, 1.1],
            hi: [0.1, 0.1, 0.1, 1.5],
        },
    );
    let grid = v.domain.grid(4);
    v.check_positive(&grid).unwrap();
    let a = poincare_potential(&v, &v.domain.center()).unwrap();
    let (dphi, dsphi) = torsion_residual(&v, &a, &grid).unwrap();
    assert!(dphi < 1e-8, "dphi = {dphi:e}");
    assert!(dsphi < 1e-8, "dstarphi = {dsphi:e}");
}

#[test]
fn bs_form_recovers_positive_metric_and_gram_matches() {
    let eps = 1.0;
    let r = (4.0f64 * eps).cbrt() + 0.7;
    let p = models::Quat::new(0.3, -0.5, 0.2, 0.9).normalize();
    let q = models::Quat::new(-0.1, 0.4, 0.8, 0.2).normalize();
    let pt = models::QuatPair::new(p, q, r, eps).unwrap();
    let b = models::bs_frame_b(&pt).unwrap();
    let vinv = models::bs_vinv(&pt).unwrap();
    let scale = vinv.amax();
    assert!(
        (b - vinv).amax() / scale < 1e-8,
        "B = {b}, Vinv = {vinv}"
    );
}

#[test]
fn bs_differential_identities() {
    let eps = 1.0;
    let r = (4.0f64 * eps).cbrt() + 0.9;
    let p = models::Quat::new(0.2, 0.7, -0.3, 0.1).normalize();
    let q = models::Quat::new(0.9, 0.1, 0.2, -0.3).normalize();
    let pt = models::QuatPair::new(p, q, r, eps).unwrap();
    let dir = models::BsDirection {
        dr: 0.4,
        dp: [0.3, -0.2, 0.5],
        dq: [-0.1, 0.6, 0.2],
    };
    let res = models::bs_mmm_differential_check(&pt, &dir);
    assert!(res < 1e-6, "residual {res:e}");
}

#[test]
fn kform_metric_identity_frame() {
    let g = FrameMetric::identity(7);
    let vol = KForm::monomial(7, &[1, 2, 3, 4, 5, 6, 7], 1.0);
    let w = hodge(&KForm::monomial(7, &[1], 1.0), &g, &vol).unwrap();
    assert!((w.coeff(&[2, 3, 4, 5, 6, 7]) - 1.0).abs() < 1e-14);
}
