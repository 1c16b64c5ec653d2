//! Shared fixtures for the integration tests: the two catalogued polynomial
//! solutions and small comparison helpers.

#![allow(dead_code)]

use toricg2::ansatz::{Box4, ConnectionPotential, PolyMat3, VField};
use toricg2::poly::Poly;

/// V = mu * Id on a box with mu bounded away from zero.
pub fn mu_dep() -> VField {
    let mu = Poly::var(3);
    VField::polynomial(
        PolyMat3::diag([mu.clone(), mu.clone(), mu]),
        Box4 {
            lo: [-1.0, -1.0, -1.0, 0.5],
            hi: [1.0, 1.0, 1.0, 2.0],
        },
    )
}

/// Exact connection potential for `mu_dep`: A_i = nu_j d nu_k, so that
/// dA_i = dnu_j ^ dnu_k.
pub fn mu_dep_potential() -> ConnectionPotential {
    let mut a = ConnectionPotential::zero();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        a.a[i][k] = Poly::var(j);
    }
    a
}

/// The quintic diagonal solution
/// V = diag(2 mu^5 - 15 mu^2 nu3^2 - 5 nu2^2, mu^3 - 3 nu3^2, mu)
/// on a box where it stays positive definite.
pub fn quintic_diag() -> VField {
    VField::polynomial(quintic_diag_mat(), quintic_box())
}

pub fn quintic_diag_mat() -> PolyMat3 {
    let mut v11 = Poly::zero();
    v11.add_term([0, 0, 0, 5], 2.0);
    v11.add_term([0, 0, 2, 2], -15.0);
    v11.add_term([0, 2, 0, 0], -5.0);
    let mut v22 = Poly::zero();
    v22.add_term([0, 0, 0, 3], 1.0);
    v22.add_term([0, 0, 2, 0], -3.0);
    let mut m = PolyMat3::zero();
    m.set(0, 0, v11);
    m.set(1, 1, v22);
    m.set(2, 2, Poly::var(3));
    m
}

pub fn quintic_box() -> Box4 {
    Box4 {
        lo: [-0.1, -0.1, -0.1, 1.1],
        hi: [0.1, 0.1, 0.1, 1.5],
    }
}

/// True iff a = s * b for some nonzero scalar s, up to 1e-9 relative error.
pub fn proportional(a: &Poly, b: &Poly) -> bool {
    let (ea, ca) = match a.leading() {
        Some(x) => x,
        None => return b.is_zero(),
    };
    let (eb, cb) = match b.leading() {
        Some(x) => x,
        None => return false,
    };
    if ea != eb {
        return false;
    }
    let s = ca / cb;
    a.sub(&b.scale(s)).max_abs_coeff() <= 1e-9 * ca.abs().max(1.0)
}
