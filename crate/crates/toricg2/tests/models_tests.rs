//! Catalogued models: flat spaces, invariant-ring relations, trivalent graphs,
//! the nearly Kahler S^3 x S^3, the cone and Bryant-Salamon structures, and
//! the Stenzel quadric.

use proptest::prelude::*;
use toricg2::forms::{coframe_d, hodge, metric_from_three_form};
use toricg2::models::{
    b_c3, bs_frame_b, bs_graph, bs_mmm, bs_mmm_differential_check, bs_vinv, cone_mmm,
    flat_graph_c3, flat_graph_t2rc2, hopf, mmm_c3, mmm_t2rc2, nk_mmm_tilde, nk_psi, nk_psi_hat,
    nk_sigma, phi_bs, phi_cone, quadric_mmm, rho_inverse, rho_representative, sigma_relations_4d,
    sigma_relations_6d, star_phi_bs, star_phi_cone, stenzel_f_u, u_fields, v_c3, BsDirection,
    FlatC3Point, FlatT2RC2Point, ModelsError, Quat, QuatPair, C64,
};

const SQRT3: f64 = 1.732050807568877293527446341505872367_f64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

// ---------------------------------------------------------------------------
// Flat S^1 x C^3.
// ---------------------------------------------------------------------------

#[test]
fn flat_c3_moment_map_oracles() {
    let m = mmm_c3(&FlatC3Point {
        x: 0.0,
        z: [c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
    });
    assert_eq!(m, [-1.0, 0.0, 0.0, 0.0]);
    let m = mmm_c3(&FlatC3Point {
        x: 0.0,
        z: [c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)],
    });
    for (got, want) in m.iter().zip(&[0.0, 0.0, 0.0, 1.0]) {
        assert!((got - want).abs() < 1e-15);
    }
}

#[test]
fn flat_c3_gram_matrix_oracle() {
    let pt = FlatC3Point {
        x: 0.0,
        z: [c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)],
    };
    let b = b_c3(&pt);
    let want = [[1.0, 0.0, 0.0], [0.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(b[(i, j)], want[i][j]);
        }
    }
    // V = B^{-1}
    let v = v_c3(&pt).unwrap();
    assert!((b * v - nalgebra::Matrix3::identity()).amax() < 1e-14);
}

#[test]
fn flat_c3_rank_drops_on_singular_orbits() {
    // two coordinates zero: the torus stabilizer jumps and B degenerates
    let pt = FlatC3Point {
        x: 0.0,
        z: [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
    };
    let b = b_c3(&pt);
    assert_eq!(b.svd(false, false).rank(1e-12), 2);
    assert!(matches!(v_c3(&pt), Err(ModelsError::SingularOrbit)));
}

#[test]
fn rho_inverse_oracle() {
    // nu = (-1, 0, 0), mu = 0: t(t)(t) = 1 gives t = 1 and moduli (1, 1, 1)
    let orbit = rho_inverse(&[-1.0, 0.0, 0.0], 0.0);
    for m in orbit.moduli {
        assert!((m - 1.0).abs() < 1e-12);
    }
    assert!((orbit.product - c(1.0, 0.0)).norm() < 1e-12);
    let rep = rho_representative(&orbit);
    assert!(mmm_c3(&rep)
        .iter()
        .zip(&[-1.0, 0.0, 0.0, 0.0])
        .all(|(a, b)| (a - b).abs() < 1e-12));
}

proptest! {
    #[test]
    fn rho_inverse_is_a_section_of_the_moment_map(
        nu in prop::array::uniform3(-3.0f64..3.0),
        mu in -3.0f64..3.0,
    ) {
        let rep = rho_representative(&rho_inverse(&nu, mu));
        let m = mmm_c3(&rep);
        let scale = 1.0 + nu.iter().fold(mu.abs(), |a, v| a.max(v.abs()));
        prop_assert!((m[0] - nu[0]).abs() < 1e-9 * scale);
        prop_assert!((m[1] - nu[1]).abs() < 1e-9 * scale);
        prop_assert!((m[2] - nu[2]).abs() < 1e-9 * scale);
        prop_assert!((m[3] - mu).abs() < 1e-9 * scale);
    }

    #[test]
    fn flat_c3_map_is_torus_invariant(
        zr in prop::array::uniform3(-2.0f64..2.0),
        zi in prop::array::uniform3(-2.0f64..2.0),
        th in prop::array::uniform2(-3.0f64..3.0),
    ) {
        // the stabilizer torus acts by phases summing to zero
        let z = [c(zr[0], zi[0]), c(zr[1], zi[1]), c(zr[2], zi[2])];
        let ph = [th[0], th[1], -th[0] - th[1]];
        let zt = [0, 1, 2].map(|i| z[i] * C64::from_polar(1.0, ph[i]));
        let a = mmm_c3(&FlatC3Point { x: 0.0, z });
        let b = mmm_c3(&FlatC3Point { x: 0.0, z: zt });
        for k in 0..4 {
            prop_assert!((a[k] - b[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn sigma_relations_hold_identically(
        zr in prop::array::uniform4(-2.0f64..2.0),
        zi in prop::array::uniform4(-2.0f64..2.0),
    ) {
        let (r4, s4) = sigma_relations_4d(c(zr[0], zi[0]), c(zr[1], zi[1]));
        prop_assert!(r4.abs() < 1e-12 * 100.0);
        prop_assert!(s4 >= 0.0);
        let (r6, s6) = sigma_relations_6d(c(zr[1], zi[1]), c(zr[2], zi[2]), c(zr[3], zi[3]));
        prop_assert!(r6.abs() < 1e-10 * 100.0);
        prop_assert!(s6 >= -1e-14);
    }

    #[test]
    fn t2rc2_sphere_identity(
        zr in -2.0f64..2.0, zi in -2.0f64..2.0,
        wr in -2.0f64..2.0, wi in -2.0f64..2.0,
        u in -2.0f64..2.0,
    ) {
        let pt = FlatT2RC2Point { x: 0.1, y: -0.2, u, z: c(zr, zi), w: c(wr, wi) };
        let m = mmm_t2rc2(&pt);
        let rhs = 0.25 * (pt.z.norm_sqr() + pt.w.norm_sqr()).powi(2);
        prop_assert!((m[3] * m[3] + m[0] * m[0] + m[1] * m[1] - rhs).abs() < 1e-12 * (1.0 + rhs));
        prop_assert!((m[2] - u).abs() == 0.0);
    }
}

// ---------------------------------------------------------------------------
// Trivalent graphs.
// ---------------------------------------------------------------------------

#[test]
fn graphs_satisfy_their_invariants() {
    flat_graph_c3().check_invariants().unwrap();
    flat_graph_t2rc2().check_invariants().unwrap();
    bs_graph(1.0).check_invariants().unwrap();
    bs_graph(0.3).check_invariants().unwrap();
}

#[test]
fn bs_graph_vertex_offsets() {
    for eps in [1.0, 2.5] {
        let g = bs_graph(eps);
        let k = 2.0 * eps / (3.0 * SQRT3);
        assert_eq!(g.vertices.len(), 2);
        let mut offsets: Vec<f64> = g.vertices.iter().map(|v| v[2]).collect();
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(offsets, vec![-k, k]);
        for v in &g.vertices {
            assert_eq!((v[0], v[1], v[3]), (0.0, 0.0, 0.0));
        }
    }
}

#[test]
fn graph_json_is_well_formed() {
    let j = flat_graph_c3().to_json();
    assert!(j.get("vertices").is_some());
    assert!(j.get("edges").is_some());
}

// ---------------------------------------------------------------------------
// Nearly Kahler S^3 x S^3, the cone, and Bryant-Salamon.
// ---------------------------------------------------------------------------

#[test]
fn nearly_kahler_structure_equations() {
    // d sigma = 3 psi and d psi-hat = -2 sigma ^ sigma, at several radii
    let dsigma = coframe_d(&nk_sigma());
    let want = nk_psi().scale(3.0);
    let dpsihat = coframe_d(&nk_psi_hat());
    let s = nk_sigma();
    let want2 = s.wedge(&s).scale(-2.0);
    for r in [0.7, 1.0, 1.9] {
        assert!(dsigma.at(r).sub(&want.at(r)).max_abs() < 1e-14);
        assert!(dpsihat.at(r).sub(&want2.at(r)).max_abs() < 1e-14);
    }
}

#[test]
fn cone_and_bs_forms_are_closed_and_coclosed() {
    for r in [1.2, 1.8] {
        assert!(coframe_d(&phi_cone()).max_abs_at(r) < 1e-13);
        assert!(coframe_d(&star_phi_cone()).max_abs_at(r) < 1e-13);
        for eps in [1.0, 0.4] {
            assert!(coframe_d(&phi_bs(eps)).max_abs_at(r) < 1e-13);
            assert!(coframe_d(&star_phi_bs(eps)).max_abs_at(r) < 1e-13);
        }
    }
}

#[test]
fn dual_four_forms_match_the_hodge_star() {
    // the listed *phi really is the Hodge dual of phi in the recovered metric
    for (phi, sphi, r) in [
        (phi_cone(), star_phi_cone(), 1.3),
        (phi_bs(1.0), star_phi_bs(1.0), 1.9),
    ] {
        let p = phi.at(r);
        let (g, vol) = metric_from_three_form(&p).unwrap();
        let h = hodge(&p, &g, &vol).unwrap();
        assert!(h.sub(&sphi.at(r)).max_abs() < 1e-12);
    }
}

#[test]
fn hopf_and_moment_map_oracles() {
    assert_eq!(hopf(Quat::ONE), [1.0, 0.0, 0.0]);
    // conj(j) i j = -i
    assert_eq!(hopf(Quat::J), [-1.0, 0.0, 0.0]);
    let (nu, mu) = nk_mmm_tilde(Quat::ONE, Quat::ONE);
    let want = 2.0 / (9.0 * SQRT3);
    for v in nu {
        assert!((v - want).abs() < 1e-14);
    }
    assert_eq!(mu, 0.0);
}

#[test]
fn cone_moment_maps_scale_the_link_maps() {
    // (nu, mu) on the cone are (r^3 nu-tilde, r^4 mu-tilde / 2)
    let p = Quat::new(0.3, -0.5, 0.2, 0.9).normalize();
    let q = Quat::new(-0.1, 0.4, 0.8, 0.2).normalize();
    for r in [0.8, 1.7] {
        let pt = QuatPair::new(p, q, r, 0.0).unwrap();
        let m = cone_mmm(&pt);
        let (nu, mu) = nk_mmm_tilde(p, q);
        for i in 0..3 {
            assert!((m[i] - r.powi(3) * nu[i]).abs() < 1e-13);
        }
        assert!((m[3] - 0.5 * r.powi(4) * mu).abs() < 1e-13);
    }
}

#[test]
fn bs_moment_maps_reduce_to_the_cone() {
    let p = Quat::new(0.6, 0.1, -0.4, 0.2).normalize();
    let q = Quat::new(0.2, -0.3, 0.5, 0.7).normalize();
    let pt = QuatPair::new(p, q, 1.4, 0.0).unwrap();
    assert_eq!(bs_mmm(&pt), cone_mmm(&pt));
}

#[test]
fn bs_gram_matches_closed_form_inverse_away_from_the_zero_section() {
    let eps = 1.0;
    let p = Quat::new(0.3, 0.7, -0.1, 0.5).normalize();
    let q = Quat::new(-0.6, 0.2, 0.4, 0.3).normalize();
    for r in [(4.0f64 * eps).cbrt() + 0.1, 2.3, 3.0] {
        let pt = QuatPair::new(p, q, r, eps).unwrap();
        let b = bs_frame_b(&pt).unwrap();
        let vinv = bs_vinv(&pt).unwrap();
        assert!((b - vinv).amax() / vinv.amax() < 1e-8, "r = {r}");
    }
}

#[test]
fn bs_vinv_rejects_the_degenerate_radius() {
    let pt = QuatPair::new(Quat::ONE, Quat::ONE, 1.0, 1.0).unwrap();
    assert!(matches!(bs_vinv(&pt), Err(ModelsError::DegenerateRadius)));
}

#[test]
fn quat_pair_requires_unit_quaternions_and_positive_radius() {
    assert!(QuatPair::new(Quat::new(2.0, 0.0, 0.0, 0.0), Quat::ONE, 1.0, 1.0).is_err());
    assert!(QuatPair::new(Quat::ONE, Quat::ONE, -1.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hopf_lands_on_the_unit_sphere(v in prop::array::uniform4(-1.0f64..1.0)) {
        let n = Quat::new(v[0], v[1], v[2], v[3]).norm();
        prop_assume!(n > 0.1);
        let p = Quat::new(v[0], v[1], v[2], v[3]).normalize();
        let h = hopf(p);
        let len: f64 = h.iter().map(|x| x * x).sum();
        prop_assert!((len - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bs_differentials_hold_in_random_directions(
        pv in prop::array::uniform4(-1.0f64..1.0),
        qv in prop::array::uniform4(-1.0f64..1.0),
        dir in prop::array::uniform7(-1.0f64..1.0),
        r_off in 0.1f64..1.5,
    ) {
        prop_assume!(Quat::new(pv[0], pv[1], pv[2], pv[3]).norm() > 0.1);
        prop_assume!(Quat::new(qv[0], qv[1], qv[2], qv[3]).norm() > 0.1);
        let eps = 1.0;
        let pt = QuatPair::new(
            Quat::new(pv[0], pv[1], pv[2], pv[3]).normalize(),
            Quat::new(qv[0], qv[1], qv[2], qv[3]).normalize(),
            (4.0f64 * eps).cbrt() + r_off,
            eps,
        ).unwrap();
        let d = BsDirection { dr: dir[0], dp: [dir[1], dir[2], dir[3]], dq: [dir[4], dir[5], dir[6]] };
        prop_assert!(bs_mmm_differential_check(&pt, &d) < 1e-6);
    }
}

// ---------------------------------------------------------------------------
// The Stenzel quadric.
// ---------------------------------------------------------------------------

#[test]
fn quadric_moment_map_oracle() {
    let z = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
    let m = quadric_mmm(&z, 0.7).unwrap();
    assert_eq!(m, [0.5, 0.0, 0.0, 0.0]);
    // a torus rotation in the (z0, z1) and (z2, z3) planes preserves the map
    let th = 0.37f64;
    let rot = |a: C64, b: C64| (a * c(th.cos(), 0.0) - b * c(th.sin(), 0.0),
                                a * c(th.sin(), 0.0) + b * c(th.cos(), 0.0));
    let (r0, r1) = rot(z[0], z[1]);
    let (r2, r3) = rot(z[2], z[3]);
    let m2 = quadric_mmm(&[r0, r1, r2, r3], 0.7).unwrap();
    for k in 0..4 {
        assert!((m[k] - m2[k]).abs() < 1e-12);
    }
}

#[test]
fn quadric_rejects_points_off_the_variety() {
    let z = [c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
    assert!(matches!(
        quadric_mmm(&z, 1.0),
        Err(ModelsError::NotOnQuadric(_))
    ));
}

#[test]
fn stenzel_radial_derivative_is_monotone_from_zero() {
    assert_eq!(stenzel_f_u(0.0, 1.0), 0.0);
    let mut prev = 0.0;
    for i in 1..20 {
        let v = stenzel_f_u(0.2 * i as f64, 1.0);
        assert!(v > prev);
        prev = v;
    }
    // first integral: d/du (f_u^3) = 3 k sinh^2 u
    let (u, k, h) = (1.1f64, 0.8f64, 1e-6);
    let lhs = (stenzel_f_u(u + h, k).powi(3) - stenzel_f_u(u - h, k).powi(3)) / (2.0 * h);
    assert!((lhs - 3.0 * k * u.sinh().powi(2)).abs() < 1e-6);
}

#[test]
fn torus_generators_are_tangent_and_independent_generically() {
    let p = Quat::new(0.4, 0.2, -0.7, 0.1).normalize();
    let q = Quat::new(0.1, 0.9, 0.2, -0.3).normalize();
    let u = u_fields(p, q);
    // no radial components
    for f in &u {
        assert_eq!(f[0], 0.0);
    }
    let m = nalgebra::DMatrix::from_fn(3, 7, |i, j| u[i][j]);
    assert_eq!(m.svd(false, false).rank(1e-9), 3);
}
