//! Acceptance suite: ten numbered end-to-end criteria, each printing a single
//! PASS/FAIL line (run with --nocapture to see them all).

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use toricg2::ansatz::{
    build_structure, div_residual, elliptic_residual, gl3_point_map, gl3_transform,
    metric_sample, poincare_potential, torsion_residual, Box4, ConnectionPotential, PolyMat3,
    VField,
};
use toricg2::forms::metric_from_three_form;
use toricg2::geometry::{holonomy_span_rank, riemann, MetricSampler};
use toricg2::models::{
    bs_frame_b, bs_graph, bs_mmm_differential_check, bs_vinv, flat_graph_c3, flat_graph_t2rc2,
    mmm_c3, mmm_t2rc2, rho_inverse, rho_representative, sigma_relations_4d, sigma_relations_6d,
    BsDirection, FlatT2RC2Point, Quat, QuatPair, C64,
};
use toricg2::pde::{hierarchy_solve, poly_div_residual, potential_to_v};
use toricg2::poly::Poly;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n:2} [{name}]: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} [{name}] failed: {detail}");
}

fn examples() -> [(&'static str, VField, ConnectionPotential); 2] {
    let mu_dep = common::mu_dep();
    let mu_dep_a = common::mu_dep_potential();
    let quintic = common::quintic_diag();
    let quintic_a = poincare_potential(&quintic, &quintic.domain.center()).unwrap();
    [
        ("mu-linear", mu_dep, mu_dep_a),
        ("quintic", quintic, quintic_a),
    ]
}

#[test]
fn criterion_01_torsion_free_certification() {
    let start = Instant::now();
    let mut worst_alg = 0.0f64;
    let mut worst_tor = 0.0f64;
    for (_, v, a) in examples() {
        let grid = v.domain.grid(5);
        for x in &grid {
            worst_alg = worst_alg.max(div_residual(&v, x).amax());
            worst_alg = worst_alg.max(elliptic_residual(&v, x).amax());
        }
        let (dphi, dsphi) = torsion_residual(&v, &a, &grid).unwrap();
        worst_tor = worst_tor.max(dphi).max(dsphi);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "torsion-free",
        worst_alg < 1e-10 && worst_tor < 1e-8 && secs < 10.0,
        &format!("residuals {worst_alg:.2e}, torsion {worst_tor:.2e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_02_holonomy_span_rank() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_gap = f64::INFINITY;
    let mut ranks_ok = true;
    for (_, v, a) in examples() {
        let s = MetricSampler::from_vfield(&v, &a);
        for _ in 0..10 {
            let u: [f64; 4] = [0; 4].map(|_| 0.15 + 0.7 * rng.gen::<f64>());
            let x4 = v.domain.sample(&u);
            let x7 = [0.0, 0.0, 0.0, x4[0], x4[1], x4[2], x4[3]];
            let curv = riemann(&s, &x7, 1e-4).unwrap();
            let (rank, gap) = holonomy_span_rank(&curv, 1e-6);
            ranks_ok &= rank == 14;
            min_gap = min_gap.min(gap);
        }
    }
    // flat comparison point: constant V has no curvature at all
    let flat = VField::constant(nalgebra::Matrix3::identity(), common::quintic_box());
    let s = MetricSampler::from_vfield(&flat, &ConnectionPotential::zero());
    let curv = riemann(&s, &[0.0, 0.0, 0.0, 0.02, -0.04, 0.01, 1.3], 1e-4).unwrap();
    let (flat_rank, _) = holonomy_span_rank(&curv, 1e-6);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        2,
        "holonomy rank",
        ranks_ok && min_gap >= 1e3 && flat_rank == 0 && secs < 60.0,
        &format!("rank 14 at 20 points, min gap {min_gap:.2e}, flat rank {flat_rank}, {secs:.1}s"),
    );
}

#[test]
fn criterion_03_ricci_flatness() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for (_, v, a) in examples() {
        let s = MetricSampler::from_vfield(&v, &a);
        for _ in 0..3 {
            let u: [f64; 4] = [0; 4].map(|_| 0.15 + 0.7 * rng.gen::<f64>());
            let x4 = v.domain.sample(&u);
            let curv = riemann(&s, &[0.0, 0.0, 0.0, x4[0], x4[1], x4[2], x4[3]], 1e-4).unwrap();
            worst = worst.max(curv.norm_ricci / curv.norm_r);
        }
    }
    verdict(
        3,
        "Ricci-flat",
        worst < 1e-4,
        &format!("max |Ricci|/|R| = {worst:.2e}"),
    );
}

#[test]
fn criterion_04_metric_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dom = Box4 {
        lo: [-0.2, -0.2, -0.2, 1.0],
        hi: [0.2, 0.2, 0.2, 2.0],
    };
    let mut worst = 0.0f64;
    for _ in 0..5 {
        // a random solution: V0 + mu V1 with V0, V1 positive semidefinite is
        // nu-independent, hence solves the full system for any symmetric data
        let rnd = |rng: &mut ChaCha8Rng| {
            nalgebra::Matrix3::<f64>::from_fn(|_, _| rng.gen_range(-1.0..1.0))
        };
        let b0 = rnd(&mut rng);
        let b1 = rnd(&mut rng);
        let v0 = b0 * b0.transpose() + nalgebra::Matrix3::identity() * 0.5;
        let v1 = b1 * b1.transpose() * 0.3;
        let v = toricg2::pde::linear_in_mu(&v0, &v1, dom);
        v.check_positive(&dom.grid(3)).unwrap();
        let a = poincare_potential(&v, &dom.center()).unwrap();
        for _ in 0..100 {
            let u: [f64; 4] = [0; 4].map(|_| rng.gen::<f64>());
            let x = dom.sample(&u);
            let (phi, _, g) = build_structure(&v, &a, &x).unwrap();
            let (gr, _) = metric_from_three_form(&phi).unwrap();
            for i in 0..7 {
                for j in 0..7 {
                    worst = worst.max((gr.components[(i, j)] - g[(i, j)]).abs());
                }
            }
        }
    }
    verdict(
        4,
        "metric consistency",
        worst < 1e-9,
        &format!("max |g(phi) - g| = {worst:.2e} over 5 fields x 100 points"),
    );
}

#[test]
fn criterion_05_flat_model_section_and_sphere_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rt = 0.0f64;
    for _ in 0..1000 {
        let nu: [f64; 3] = [0; 3].map(|_| rng.gen_range(-3.0..3.0));
        let mu: f64 = rng.gen_range(-3.0..3.0);
        let m = mmm_c3(&rho_representative(&rho_inverse(&nu, mu)));
        let scale = 1.0 + nu.iter().fold(mu.abs(), |a, v| a.max(v.abs()));
        for (got, want) in m.iter().zip(nu.iter().chain(std::iter::once(&mu))) {
            worst_rt = worst_rt.max((got - want).abs() / scale);
        }
    }
    let mut worst_sphere = 0.0f64;
    for _ in 0..1000 {
        let pt = FlatT2RC2Point {
            x: rng.gen_range(-1.0..1.0),
            y: rng.gen_range(-1.0..1.0),
            u: rng.gen_range(-2.0..2.0),
            z: C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
            w: C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)),
        };
        let m = mmm_t2rc2(&pt);
        let rhs = 0.25 * (pt.z.norm_sqr() + pt.w.norm_sqr()).powi(2);
        worst_sphere = worst_sphere.max((m[3] * m[3] + m[0] * m[0] + m[1] * m[1] - rhs).abs());
    }
    verdict(
        5,
        "flat-model section",
        worst_rt < 1e-9 && worst_sphere < 1e-12,
        &format!("roundtrip {worst_rt:.2e}, sphere identity {worst_sphere:.2e}"),
    );
}

#[test]
fn criterion_06_invariant_ring_relations() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut slack_ok = true;
    let rc = |rng: &mut ChaCha8Rng| C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    for _ in 0..1000 {
        let (r4, s4) = sigma_relations_4d(rc(&mut rng), rc(&mut rng));
        worst = worst.max(r4.abs());
        slack_ok &= s4 >= 0.0;
        let (r6, s6) = sigma_relations_6d(rc(&mut rng), rc(&mut rng), rc(&mut rng));
        worst = worst.max(r6.abs());
        slack_ok &= s6 >= -1e-14;
    }
    verdict(
        6,
        "invariant-ring relations",
        worst < 1e-12 && slack_ok,
        &format!("max residual {worst:.2e}"),
    );
}

#[test]
fn criterion_07_bryant_salamon_cross_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let eps = 1.0;
    let rq = |rng: &mut ChaCha8Rng| {
        Quat::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize()
    };
    let mut worst_gram = 0.0f64;
    for _ in 0..20 {
        let r = (4.0f64 * eps).cbrt() + 0.2 + 2.0 * rng.gen::<f64>();
        let pt = QuatPair::new(rq(&mut rng), rq(&mut rng), r, eps).unwrap();
        let b = bs_frame_b(&pt).unwrap();
        let vinv = bs_vinv(&pt).unwrap();
        worst_gram = worst_gram.max((b - vinv).amax() / vinv.amax());
    }
    let mut worst_diff = 0.0f64;
    for _ in 0..10 {
        let r = (4.0f64 * eps).cbrt() + 0.2 + 2.0 * rng.gen::<f64>();
        let pt = QuatPair::new(rq(&mut rng), rq(&mut rng), r, eps).unwrap();
        for _ in 0..50 {
            let dir = BsDirection {
                dr: rng.gen_range(-1.0..1.0),
                dp: [0; 3].map(|_| rng.gen_range(-1.0..1.0)),
                dq: [0; 3].map(|_| rng.gen_range(-1.0..1.0)),
            };
            worst_diff = worst_diff.max(bs_mmm_differential_check(&pt, &dir));
        }
    }
    verdict(
        7,
        "Bryant-Salamon",
        worst_gram < 1e-8 && worst_diff < 1e-6,
        &format!("Gram vs closed-form inverse {worst_gram:.2e}, differentials {worst_diff:.2e}"),
    );
}

#[test]
fn criterion_08_graph_suite() {
    const SQRT3: f64 = 1.732050807568877293527446341505872367_f64;
    let mut vertices_ok = true;
    for eps in [1.0, 0.5, 2.0] {
        let g = bs_graph(eps);
        let k = 2.0 * eps / (3.0 * SQRT3);
        let mut offsets: Vec<f64> = g.vertices.iter().map(|v| v[2]).collect();
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vertices_ok &= offsets == vec![-k, k]
            && g.vertices.iter().all(|v| v[0] == 0.0 && v[1] == 0.0 && v[3] == 0.0);
    }
    let invariants_ok = flat_graph_c3().check_invariants().is_ok()
        && flat_graph_t2rc2().check_invariants().is_ok()
        && bs_graph(1.0).check_invariants().is_ok()
        && bs_graph(0.5).check_invariants().is_ok();
    verdict(
        8,
        "graph suite",
        vertices_ok && invariants_ok,
        &format!("vertex offsets exact: {vertices_ok}, invariants: {invariants_ok}"),
    );
}

#[test]
fn criterion_09_solver_regeneration() {
    let families = hierarchy_solve(5);
    let quintic = common::quintic_diag_mat();
    let hit = families.iter().any(|t| {
        common::proportional(&t.v11, quintic.entry(0, 0))
            && common::proportional(&t.v22, quintic.entry(1, 1))
            && common::proportional(&t.v33, quintic.entry(2, 2))
    });
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut div_exact = true;
    for _ in 0..50 {
        let mut a = PolyMat3::zero();
        for i in 0..3 {
            for j in i..3 {
                let mut p = Poly::zero();
                for _ in 0..8 {
                    let e = [0; 4].map(|_| rng.gen_range(0u8..2));
                    if e.iter().map(|&v| v as u32).sum::<u32>() <= 3 {
                        p.add_term(e, rng.gen_range(-3.0..3.0));
                    }
                }
                a.set(i, j, p);
            }
        }
        let v = potential_to_v(
            &a,
            Box4 {
                lo: [-1.0; 4],
                hi: [1.0; 4],
            },
        );
        div_exact &= poly_div_residual(v.as_polynomial().unwrap())
            .iter()
            .all(|p| p.is_zero());
    }
    verdict(
        9,
        "solver regeneration",
        hit && div_exact,
        &format!(
            "quintic triple in {}-element basis: {hit}, 50 potentials divergence-exact: {div_exact}",
            families.len()
        ),
    );
}

#[test]
fn criterion_10_gl3_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let v = common::quintic_diag();
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 10 {
        let mut g = nalgebra::Matrix3::<f64>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let det = g.determinant();
        if det.abs() < 0.1 {
            continue;
        }
        // normalize to |det| = 1: a well-conditioned representative of the ray
        g /= det.abs().cbrt();
        done += 1;
        let v2 = gl3_transform(&v, &g).unwrap();
        for x in v.domain.grid(3) {
            let y = gl3_point_map(&g, &x);
            worst = worst.max(div_residual(&v2, &y).amax());
            worst = worst.max(elliptic_residual(&v2, &y).amax());
        }
    }
    verdict(
        10,
        "GL(3,R) equivariance",
        worst < 1e-8,
        &format!("max residual on image grids {worst:.2e} over 10 transforms"),
    );
}

// keep the metric-sampling helper exercised alongside the criteria
#[test]
fn metric_sample_agrees_with_build_structure() {
    let v = common::quintic_diag();
    let a = poincare_potential(&v, &v.domain.center()).unwrap();
    let x = [0.02, -0.05, 0.03, 1.3];
    let g1 = metric_sample(&v, &a, &x).unwrap();
    let (_, _, g2) = build_structure(&v, &a, &x).unwrap();
    assert!((g1 - g2).amax() < 1e-14);
}
