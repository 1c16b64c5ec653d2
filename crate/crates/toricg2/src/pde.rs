//! Constructive solvers for the torsion-free system: divergence-free V fields
//! from a symmetric potential, polynomial solutions of the diagonal elliptic
//! hierarchy, the linear-in-mu family, and the classifier for the diagonal
//! (orthogonal Killing fields) dichotomy.

use crate::ansatz::{Box4, PolyMat3, VField, VKind};
use crate::poly::{Expo, Poly};
use nalgebra::{DMatrix, Matrix3};
use thiserror::Error;

pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("V field is not diagonal (max off-diagonal {0:.3e})")]
    NotDiagonal(f64),
}

fn cyc(i: usize) -> (usize, usize, usize) {
    (i, (i + 1) % 3, (i + 2) % 3)
}

/// Divergence-free V from a symmetric potential A:
/// V_ii = d^2 A_jj / d nu_k^2 + d^2 A_kk / d nu_j^2 - 2 d^2 A_jk / d nu_j d nu_k,
/// V_ij = d^2 A_ik / d nu_j d nu_k + d^2 A_jk / d nu_k d nu_i
///        - d^2 A_ij / d nu_k^2 - d^2 A_kk / d nu_i d nu_j,
/// (ijk) cyclic of (123). Any mu-dependence of A passes through untouched.
/// The output satisfies sum_i dV_ij / d nu_i = 0 exactly at the coefficient level.
pub fn potential_to_v(a: &PolyMat3, domain: Box4) -> VField {
    let d2 = |p: &Poly, x: usize, y: usize| p.partial(x).partial(y);
    let mut v = PolyMat3::zero();
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        let vii = d2(a.entry(j, j), k, k)
            .add(&d2(a.entry(k, k), j, j))
            .sub(&d2(a.entry(j, k), j, k).scale(2.0));
        v.set(i, i, vii);
        let vij = d2(a.entry(i, k), j, k)
            .add(&d2(a.entry(j, k), k, i))
            .sub(&d2(a.entry(i, j), k, k))
            .sub(&d2(a.entry(k, k), i, j));
        v.set(i, j, vij);
    }
    VField::polynomial(v, domain)
}

/// Divergence residual of a polynomial matrix, kept exactly as polynomials.
pub fn poly_div_residual(v: &PolyMat3) -> [Poly; 3] {
    [0, 1, 2].map(|j| {
        let mut s = Poly::zero();
        for i in 0..3 {
            s = s.add(&v.entry(i, j).partial(i));
        }
        s
    })
}

// ---------------------------------------------------------------------------
// Polynomial kernels of linear differential operators.
// ---------------------------------------------------------------------------

/// All monomials in the given variables with total degree <= max_degree, in
/// ascending graded lexicographic order.
fn monomials(vars: &[usize], max_degree: u32) -> Vec<[u8; 4]> {
    let mut out = vec![[0u8; 4]];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for m in &out {
            for &v in vars {
                let mut e = *m;
                e[v] += 1;
                next.push(e);
            }
        }
        out.extend(next);
    }
    out.sort_by(|a, b| Expo(*a).cmp(&Expo(*b)));
    out.dedup();
    out
}

/// Basis of the kernel of a linear operator on polynomials in `vars` of total
/// degree <= max_degree, canonicalized by reduced row echelon form over the
/// monomials in descending graded lexicographic order (deterministic output).
pub fn kernel_basis(
    op: impl Fn(&Poly) -> Poly,
    vars: &[usize],
    max_degree: u32,
) -> Vec<Poly> {
    let cols = monomials(vars, max_degree);
    let mut row_index = std::collections::BTreeMap::new();
    let mut images = Vec::with_capacity(cols.len());
    for m in &cols {
        let img = op(&Poly::monomial(*m, 1.0));
        for (e, _) in img.terms() {
            let n = row_index.len();
            row_index.entry(Expo(e)).or_insert(n);
        }
        images.push(img);
    }
    let nrows = row_index.len().max(1);
    let mut mat = DMatrix::zeros(nrows, cols.len());
    for (c, img) in images.iter().enumerate() {
        for (e, coef) in img.terms() {
            mat[(row_index[&Expo(e)], c)] = coef;
        }
    }
    let null = nullspace(&mat);
    // canonicalize: RREF with monomials ordered descending (leading term first)
    let mut basis_mat = DMatrix::zeros(null.len().max(1), cols.len());
    for (r, vec) in null.iter().enumerate() {
        for c in 0..cols.len() {
            // column c of basis_mat corresponds to cols[cols.len()-1-c]
            basis_mat[(r, cols.len() - 1 - c)] = vec[c];
        }
    }
    rref(&mut basis_mat);
    let mut out = Vec::new();
    for r in 0..null.len() {
        let mut p = Poly::zero();
        let mut maxc = 0.0f64;
        for c in 0..cols.len() {
            maxc = maxc.max(basis_mat[(r, c)].abs());
        }
        if maxc == 0.0 {
            continue;
        }
        for c in 0..cols.len() {
            let coef = basis_mat[(r, c)];
            if coef.abs() > 1e-9 * maxc {
                p.add_term(cols[cols.len() - 1 - c], snap(coef));
            }
        }
        out.push(p);
    }
    out
}

/// Snap values that are within 1e-9 of an integer to that integer (the solves
/// here have small rational solutions; this removes elimination round-off).
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

fn rref(m: &mut DMatrix<f64>) {
    let (nr, nc) = m.shape();
    let mut pivot_row = 0;
    for col in 0..nc {
        if pivot_row >= nr {
            break;
        }
        // partial pivot
        let mut best = pivot_row;
        for r in pivot_row..nr {
            if m[(r, col)].abs() > m[(best, col)].abs() {
                best = r;
            }
        }
        let scale = m.row(pivot_row).amax().max(m[(best, col)].abs());
        if m[(best, col)].abs() <= 1e-10 * scale.max(1e-300) {
            continue;
        }
        m.swap_rows(pivot_row, best);
        let p = m[(pivot_row, col)];
        for c in 0..nc {
            m[(pivot_row, c)] /= p;
        }
        for r in 0..nr {
            if r != pivot_row {
                let f = m[(r, col)];
                if f != 0.0 {
                    for c in 0..nc {
                        m[(r, c)] -= f * m[(pivot_row, c)];
                    }
                }
            }
        }
        pivot_row += 1;
    }
}

/// Nullspace basis of a matrix by reduced row echelon form: one vector per free
/// column, deterministic in the column order.
fn nullspace(mat: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let mut m = mat.clone();
    let (nr, nc) = m.shape();
    let scale = m.amax().max(1e-300);
    let tol = 1e-10 * scale;
    let mut pivots: Vec<(usize, usize)> = Vec::new(); // (row, col)
    let mut pivot_row = 0;
    for col in 0..nc {
        if pivot_row >= nr {
            break;
        }
        let mut best = pivot_row;
        for r in pivot_row..nr {
            if m[(r, col)].abs() > m[(best, col)].abs() {
                best = r;
            }
        }
        if m[(best, col)].abs() <= tol {
            continue;
        }
        m.swap_rows(pivot_row, best);
        let p = m[(pivot_row, col)];
        for c in 0..nc {
            m[(pivot_row, c)] /= p;
        }
        for r in 0..nr {
            if r != pivot_row {
                let f = m[(r, col)];
                if f != 0.0 {
                    for c in 0..nc {
                        m[(r, c)] -= f * m[(pivot_row, c)];
                    }
                }
            }
        }
        pivots.push((pivot_row, col));
        pivot_row += 1;
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in 0..nc {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![0.0; nc];
        v[free] = 1.0;
        for &(r, c) in &pivots {
            v[c] = -m[(r, free)];
        }
        basis.push(v);
    }
    basis
}

// ---------------------------------------------------------------------------
// The diagonal elliptic hierarchy.
// ---------------------------------------------------------------------------

/// A polynomial solution of the hierarchy
/// d^2 V11/d mu^2 + V22 d^2 V11/d nu2^2 + V33 d^2 V11/d nu3^2 = 0,
/// d^2 V22/d mu^2 + V33 d^2 V22/d nu3^2 = 0, d^2 V33/d mu^2 = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyTriple {
    pub v11: Poly,
    pub v22: Poly,
    pub v33: Poly,
}

impl HierarchyTriple {
    pub fn to_vfield(&self, domain: Box4) -> VField {
        VField::polynomial(
            PolyMat3::diag([self.v11.clone(), self.v22.clone(), self.v33.clone()]),
            domain,
        )
    }
}

/// Enumerate polynomial solutions of the hierarchy up to the given total degree.
/// The hierarchy is nonlinear only through the lower stages, so each stage is
/// solved as a linear kernel problem with the previous stages' outputs fixed:
/// stage 1 picks V33 from the at-most-linear-in-mu basis {1, mu}; stage 2
/// computes the kernel basis of V22 -> V22_mumu + V33 V22_nu3nu3 over
/// polynomials in (nu3, mu); stage 3, for each stage-2 basis element, the
/// kernel of V11 -> V11_mumu + V22 V11_nu2nu2 + V33 V11_nu3nu3 over (nu2, nu3, mu).
pub fn hierarchy_solve(max_degree: u32) -> Vec<HierarchyTriple> {
    assert!(max_degree >= 1);
    const NU2: usize = 1;
    const NU3: usize = 2;
    const MU: usize = 3;
    let mut out = Vec::new();
    for v33 in [Poly::constant(1.0), Poly::var(MU)] {
        let stage2 = kernel_basis(
            |p: &Poly| {
                p.partial(MU)
                    .partial(MU)
                    .add(&v33.mul(&p.partial(NU3).partial(NU3)))
            },
            &[NU3, MU],
            max_degree,
        );
        for v22 in &stage2 {
            let stage3 = kernel_basis(
                |p: &Poly| {
                    p.partial(MU)
                        .partial(MU)
                        .add(&v22.mul(&p.partial(NU2).partial(NU2)))
                        .add(&v33.mul(&p.partial(NU3).partial(NU3)))
                },
                &[NU2, NU3, MU],
                max_degree,
            );
            for v11 in stage3 {
                out.push(HierarchyTriple {
                    v11,
                    v22: v22.clone(),
                    v33: v33.clone(),
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Linear-in-mu family.
// ---------------------------------------------------------------------------

/// V = V0 + mu V1: nu-independent, hence divergence-free with Q(dV) = 0, and
/// L(V) = d^2 V/d mu^2 = 0, so both residuals vanish identically.
pub fn linear_in_mu(v0: &Mat3, v1: &Mat3, domain: Box4) -> VField {
    let mut m = PolyMat3::zero();
    for i in 0..3 {
        for j in i..3 {
            let mut p = Poly::constant(v0[(i, j)]);
            p.add_term([0, 0, 0, 1], v1[(i, j)]);
            m.set(i, j, p);
        }
    }
    VField::polynomial(m, domain)
}

/// Open mu-intervals on which V0 + mu V1 is positive definite, found from the
/// real roots of det(V0 + mu V1) (cubic in mu) and a definiteness test on each
/// gap. Unbounded ends are reported as +-infinity.
pub fn mu_positivity_intervals(v0: &Mat3, v1: &Mat3) -> Vec<(f64, f64)> {
    // det(V0 + mu V1) as a polynomial in mu
    let entry = |i: usize, j: usize| {
        let mut p = Poly::constant(v0[(i, j)]);
        p.add_term([0, 0, 0, 1], v1[(i, j)]);
        p
    };
    let mut m = PolyMat3::zero();
    for i in 0..3 {
        for j in i..3 {
            m.set(i, j, entry(i, j));
        }
    }
    let det = crate::ansatz::poly_det3(&m);
    let mut coef = [0.0f64; 4];
    for (e, c) in det.terms() {
        coef[e[3] as usize] += c;
    }
    let mut roots: Vec<f64> = real_roots_cubic(coef);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (a.abs().max(1.0)));
    let mut bounds = vec![f64::NEG_INFINITY];
    bounds.extend(roots.iter().copied());
    bounds.push(f64::INFINITY);
    let is_pos = |mu: f64| {
        let v = v0 + v1 * mu;
        v[(0, 0)] > 0.0
            && (v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)]) > 0.0
            && v.determinant() > 0.0
    };
    let mut out = Vec::new();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mid = if lo.is_infinite() && hi.is_infinite() {
            0.0
        } else if lo.is_infinite() {
            hi - 1.0
        } else if hi.is_infinite() {
            lo + 1.0
        } else {
            0.5 * (lo + hi)
        };
        if is_pos(mid) {
            out.push((lo, hi));
        }
    }
    out
}

/// Real roots of c0 + c1 x + c2 x^2 + c3 x^3 in closed form (Cardano with the
/// trigonometric branch for three real roots), polished by Newton steps.
fn real_roots_cubic(c: [f64; 4]) -> Vec<f64> {
    let mut coef: Vec<f64> = c.to_vec();
    while coef.len() > 1 && coef.last().map(|v| v.abs()) == Some(0.0) {
        coef.pop();
    }
    let mut roots = match coef.len() - 1 {
        0 => vec![],
        1 => vec![-coef[0] / coef[1]],
        2 => {
            let (a, b, cc) = (coef[2], coef[1], coef[0]);
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                vec![]
            } else {
                let s = disc.sqrt();
                vec![(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
            }
        }
        _ => {
            // normalize to x^3 + a2 x^2 + a1 x + a0 and depress with x = y - a2/3
            let (a2, a1, a0) = (coef[2] / coef[3], coef[1] / coef[3], coef[0] / coef[3]);
            let p = a1 - a2 * a2 / 3.0;
            let q = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + a0;
            let shift = -a2 / 3.0;
            let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
            let scale = 1.0 + p.abs().max(q.abs());
            if disc > 1e-14 * scale * scale {
                // one real root
                let s = disc.sqrt();
                let y = (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt();
                vec![y + shift]
            } else if disc > -1e-14 * scale * scale {
                // repeated roots (triple root when p = q = 0)
                if p.abs() < 1e-14 * scale {
                    vec![shift]
                } else {
                    vec![3.0 * q / p + shift, -1.5 * q / p + shift]
                }
            } else {
                // three distinct real roots
                let m = 2.0 * (-p / 3.0).sqrt();
                let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
                let theta = arg.acos() / 3.0;
                (0..3)
                    .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
                    .collect()
            }
        }
    };
    // Newton polish against the original coefficients
    let f = |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    let fp = |x: f64| c[1] + x * (2.0 * c[2] + x * 3.0 * c[3]);
    for r in &mut roots {
        for _ in 0..3 {
            let d = fp(*r);
            if d.abs() > 1e-300 {
                let step = f(*r) / d;
                if step.is_finite() {
                    *r -= step;
                }
            }
        }
    }
    roots
}

// ---------------------------------------------------------------------------
// Diagonal (orthogonal Killing fields) classifier.
// ---------------------------------------------------------------------------

/// Which branch of the diagonal dichotomy a V field falls into, with the index
/// relabeling (a permutation of (1,2,3)) realizing the pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DiagonalCase {
    /// V_aa(mu, nu_b), V_bb(mu, nu_c), V_cc(mu, nu_a), each at most linear in
    /// its nu variable.
    CaseI { perm: [usize; 3] },
    /// V_cc(mu), V_bb(nu_c, mu), V_aa(nu_b, nu_c, mu): the elliptic hierarchy.
    Hierarchy { perm: [usize; 3] },
}

#[derive(Debug, Clone)]
pub struct OrthogonalReport {
    /// max over the grid of |dV_ii/d nu_i| (the divergence-free condition).
    pub div_max: f64,
    /// max residual of the three diagonal second-order equations.
    pub second_order_max: f64,
    /// max of the pairwise products dV_ii/d nu_j * dV_jj/d nu_i, i != j.
    pub first_order_max: f64,
    /// first matching dependence pattern over all 6 relabelings, if any
    /// (requires polynomial kind; None for callable fields).
    pub case: Option<DiagonalCase>,
}

/// Evaluate the diagonal-ansatz equations on a grid and classify the variable
/// dependence pattern of a diagonal V field.
pub fn orthogonal_ansatz_check(
    v: &VField,
    grid: &[[f64; 4]],
) -> Result<OrthogonalReport, PdeError> {
    // diagonality
    let mut off = 0.0f64;
    match &v.kind {
        VKind::Polynomial(p) => {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        off = off.max(p.entry(i, j).max_abs_coeff());
                    }
                }
            }
        }
        VKind::Callable(_) => {
            for x in grid {
                let m = v.value(x);
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            off = off.max(m[(i, j)].abs());
                        }
                    }
                }
            }
        }
    }
    if off > 1e-12 {
        return Err(PdeError::NotDiagonal(off));
    }

    let mut div_max = 0.0f64;
    let mut second = 0.0f64;
    let mut first = 0.0f64;
    for x in grid {
        let m = v.value(x);
        let d: [Mat3; 3] = [0, 1, 2].map(|a| v.d1(x, a));
        for i in 0..3 {
            let (_, j, k) = cyc(i);
            div_max = div_max.max(d[i][(i, i)].abs());
            let r = v.d2(x, 3, 3)[(i, i)]
                + m[(j, j)] * v.d2(x, j, j)[(i, i)]
                + m[(k, k)] * v.d2(x, k, k)[(i, i)];
            second = second.max(r.abs());
            for jj in 0..3 {
                if jj != i {
                    first = first.max((d[jj][(i, i)] * d[i][(jj, jj)]).abs());
                }
            }
        }
    }

    let case = v.as_polynomial().and_then(classify_diagonal);
    Ok(OrthogonalReport {
        div_max,
        second_order_max: second,
        first_order_max: first,
        case,
    })
}

fn depends_on(p: &Poly, var: usize) -> bool {
    p.terms().any(|(e, _)| e[var] > 0)
}

fn degree_in(p: &Poly, var: usize) -> u8 {
    p.terms().map(|(e, _)| e[var]).max().unwrap_or(0)
}

fn classify_diagonal(m: &PolyMat3) -> Option<DiagonalCase> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let d = |i: usize| m.entry(i, i);
    // case (i): V_aa(mu, nu_b), V_bb(mu, nu_c), V_cc(mu, nu_a), at most linear
    // in the nu variable
    for perm in PERMS {
        let [a, b, c] = perm;
        let ok = !depends_on(d(a), a)
            && !depends_on(d(a), c)
            && degree_in(d(a), b) <= 1
            && !depends_on(d(b), b)
            && !depends_on(d(b), a)
            && degree_in(d(b), c) <= 1
            && !depends_on(d(c), c)
            && !depends_on(d(c), b)
            && degree_in(d(c), a) <= 1;
        if ok {
            return Some(DiagonalCase::CaseI {
                perm: [a + 1, b + 1, c + 1],
            });
        }
    }
    // hierarchy: V_cc(mu), V_bb(nu_c, mu), V_aa(nu_b, nu_c, mu)
    for perm in PERMS {
        let [a, b, c] = perm;
        let ok = !depends_on(d(c), 0)
            && !depends_on(d(c), 1)
            && !depends_on(d(c), 2)
            && !depends_on(d(b), a)
            && !depends_on(d(b), b)
            && !depends_on(d(a), a);
        if ok {
            return Some(DiagonalCase::Hierarchy {
                perm: [a + 1, b + 1, c + 1],
            });
        }
    }
    None
}
