//! The Gibbons-Hawking-type ansatz: a symmetric positive 3x3 matrix field V on a
//! box in R^4 (coordinates nu1, nu2, nu3, mu) determines a G2-structure on
//! T^3 x U. This module builds (phi, *phi, g) on the coordinate coframe
//! (dt1, dt2, dt3, dnu1, dnu2, dnu3, dmu), evaluates the torsion-free residuals
//! (divergence-free and second-order elliptic system), derives the curvature
//! matrices Z and W and the connection curvature omega, produces local connection
//! potentials, and applies GL(3,R) changes of torus basis.

use crate::forms::KForm;
use crate::poly::Poly;
use nalgebra::{Matrix3, SMatrix, Vector3};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

pub type Mat3 = Matrix3<f64>;
pub type MetricSample = SMatrix<f64, 7, 7>;

#[derive(Debug, Error)]
pub enum AnsatzError {
    #[error("V is not positive definite at ({0:?})")]
    NotPositiveDefinite([f64; 4]),
    #[error("2-form is not closed (max |d omega| = {0:.3e})")]
    NotClosed(f64),
    #[error("singular change-of-basis matrix")]
    SingularTransform,
    #[error("connection potential inconsistent with curvature of V (defect {0:.3e})")]
    InconsistentPotential(f64),
    #[error("operation requires a polynomial V field")]
    NotPolynomial,
}

/// Closed coordinate box in (nu1, nu2, nu3, mu).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Box4 {
    pub lo: [f64; 4],
    pub hi: [f64; 4],
}

impl Box4 {
    pub fn center(&self) -> [f64; 4] {
        let mut c = [0.0; 4];
        for i in 0..4 {
            c[i] = 0.5 * (self.lo[i] + self.hi[i]);
        }
        c
    }

    /// Uniform grid with `res` samples per axis (res >= 2 includes both faces).
    pub fn grid(&self, res: usize) -> Vec<[f64; 4]> {
        assert!(res >= 2);
        let mut pts = Vec::with_capacity(res.pow(4));
        let step = |i: usize, k: usize| {
            self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (res - 1) as f64
        };
        for a in 0..res {
            for b in 0..res {
                for c in 0..res {
                    for d in 0..res {
                        pts.push([step(0, a), step(1, b), step(2, c), step(3, d)]);
                    }
                }
            }
        }
        pts
    }

    pub fn sample(&self, u: &[f64; 4]) -> [f64; 4] {
        let mut x = [0.0; 4];
        for i in 0..4 {
            x[i] = self.lo[i] + (self.hi[i] - self.lo[i]) * u[i];
        }
        x
    }
}

/// Symmetric 3x3 matrix of polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMat3 {
    entries: [[Poly; 3]; 3],
}

impl PolyMat3 {
    pub fn zero() -> Self {
        PolyMat3 {
            entries: Default::default(),
        }
    }

    /// Build from the upper triangle (11, 12, 13, 22, 23, 33).
    pub fn from_upper(u: [Poly; 6]) -> Self {
        let [a11, a12, a13, a22, a23, a33] = u;
        PolyMat3 {
            entries: [
                [a11.clone(), a12.clone(), a13.clone()],
                [a12, a22.clone(), a23.clone()],
                [a13, a23, a33],
            ],
        }
    }

    pub fn diag(d: [Poly; 3]) -> Self {
        let [a, b, c] = d;
        PolyMat3::from_upper([a, Poly::zero(), Poly::zero(), b, Poly::zero(), c])
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Poly) {
        self.entries[i][j] = p.clone();
        self.entries[j][i] = p;
    }

    pub fn eval(&self, x: &[f64; 4]) -> Mat3 {
        Mat3::from_fn(|i, j| self.entries[i][j].eval(x))
    }

    pub fn map(&self, f: impl Fn(&Poly) -> Poly) -> PolyMat3 {
        PolyMat3 {
            entries: [0, 1, 2].map(|i| [0, 1, 2].map(|j| f(&self.entries[i][j]))),
        }
    }

    pub fn max_degree(&self) -> u32 {
        let mut d = 0;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max(self.entries[i][j].degree());
            }
        }
        d
    }
}

type CallableV = Arc<dyn Fn(&[f64; 4]) -> Mat3 + Send + Sync>;

#[derive(Clone)]
pub enum VKind {
    Polynomial(PolyMat3),
    Callable(CallableV),
}

/// The unknown of the ansatz: V = B^{-1} as a function of (nu, mu), with access
/// to exact 2-jets (polynomial kind) or central-difference 2-jets (callable kind).
#[derive(Clone)]
pub struct VField {
    pub kind: VKind,
    pub domain: Box4,
}

fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

impl VField {
    pub fn polynomial(m: PolyMat3, domain: Box4) -> Self {
        VField {
            kind: VKind::Polynomial(m),
            domain,
        }
    }

    pub fn callable(
        f: impl Fn(&[f64; 4]) -> Mat3 + Send + Sync + 'static,
        domain: Box4,
    ) -> Self {
        VField {
            kind: VKind::Callable(Arc::new(f)),
            domain,
        }
    }

    pub fn constant(m: Mat3, domain: Box4) -> Self {
        let mut p = PolyMat3::zero();
        for i in 0..3 {
            for j in i..3 {
                p.set(i, j, Poly::constant(m[(i, j)]));
            }
        }
        VField::polynomial(p, domain)
    }

    pub fn as_polynomial(&self) -> Option<&PolyMat3> {
        match &self.kind {
            VKind::Polynomial(p) => Some(p),
            VKind::Callable(_) => None,
        }
    }

    pub fn value(&self, x: &[f64; 4]) -> Mat3 {
        match &self.kind {
            VKind::Polynomial(p) => p.eval(x),
            VKind::Callable(f) => f(x),
        }
    }

    /// First partial derivative in direction `a` (0..=2 nu, 3 mu).
    pub fn d1(&self, x: &[f64; 4], a: usize) -> Mat3 {
        match &self.kind {
            VKind::Polynomial(p) => p.map(|q| q.partial(a)).eval(x),
            VKind::Callable(f) => {
                let h = fd_step(x[a]);
                let mut xp = *x;
                let mut xm = *x;
                xp[a] += h;
                xm[a] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            }
        }
    }

    pub fn d2(&self, x: &[f64; 4], a: usize, b: usize) -> Mat3 {
        match &self.kind {
            VKind::Polynomial(p) => p.map(|q| q.partial(a).partial(b)).eval(x),
            VKind::Callable(f) => {
                if a == b {
                    let h = fd_step(x[a]);
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[a] += h;
                    xm[a] -= h;
                    (f(&xp) + f(&xm) - 2.0 * f(x)) / (h * h)
                } else {
                    let ha = fd_step(x[a]);
                    let hb = fd_step(x[b]);
                    let mut xpp = *x;
                    let mut xpm = *x;
                    let mut xmp = *x;
                    let mut xmm = *x;
                    xpp[a] += ha;
                    xpp[b] += hb;
                    xpm[a] += ha;
                    xpm[b] -= hb;
                    xmp[a] -= ha;
                    xmp[b] += hb;
                    xmm[a] -= ha;
                    xmm[b] -= hb;
                    (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * ha * hb)
                }
            }
        }
    }

    pub fn is_positive_at(&self, x: &[f64; 4]) -> bool {
        let m = self.value(x);
        // leading principal minors
        m[(0, 0)] > 0.0
            && (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]) > 0.0
            && m.determinant() > 0.0
    }

    pub fn check_positive(&self, pts: &[[f64; 4]]) -> Result<(), AnsatzError> {
        for x in pts {
            if !self.is_positive_at(x) {
                return Err(AnsatzError::NotPositiveDefinite(*x));
            }
        }
        Ok(())
    }
}

pub fn det3(m: &Mat3) -> f64 {
    m.determinant()
}

/// Adjugate via Cayley-Hamilton: adj(M) = M^2 - tr(M) M + s I,
/// s = ((tr M)^2 - tr(M^2)) / 2; satisfies M adj(M) = det(M) I.
pub fn adj3(m: &Mat3) -> Mat3 {
    let t = m.trace();
    let m2 = m * m;
    let s = 0.5 * (t * t - m2.trace());
    m2 - m * t + Mat3::identity() * s
}

/// Value, first and second partials of adj(V) at a point, derived from the jets
/// of V by differentiating the Cayley-Hamilton expression.
pub struct AdjJet {
    pub value: Mat3,
    pub d1: [Mat3; 4],
    pub d2: [[Mat3; 4]; 4],
}

pub fn adj_jet(v: &VField, x: &[f64; 4]) -> AdjJet {
    let m = v.value(x);
    let dm: [Mat3; 4] = [0, 1, 2, 3].map(|a| v.d1(x, a));
    let t = m.trace();
    let value = adj3(&m);
    let d1 = [0, 1, 2, 3].map(|a| {
        let da = &dm[a];
        let dt = da.trace();
        let ds = t * dt - (m * da).trace();
        da * m + m * da - m * dt - da * t + Mat3::identity() * ds
    });
    let mut d2 = [[Mat3::zeros(); 4]; 4];
    for a in 0..4 {
        for b in a..4 {
            let dab = v.d2(x, a, b);
            let (da, db) = (&dm[a], &dm[b]);
            let (dta, dtb) = (da.trace(), db.trace());
            let dtab = dab.trace();
            let dsab = dta * dtb + t * dtab - (da * db + m * dab).trace();
            let val = da * db
                + db * da
                + dab * m
                + m * dab
                - db * dta
                - da * dtb
                - m * dtab
                - dab * t
                + Mat3::identity() * dsab;
            d2[a][b] = val;
            d2[b][a] = val;
        }
    }
    AdjJet { value, d1, d2 }
}

fn cyc(i: usize) -> (usize, usize, usize) {
    (i, (i + 1) % 3, (i + 2) % 3)
}

/// Z from the closedness equations: z_i^l = d adj(V)_{kl}/d nu_j - d adj(V)_{jl}/d nu_k,
/// (ijk) cyclic of (123). Returned with the lower index as row: Z[(i, l)] = z_i^l.
pub fn z_of(v: &VField, x: &[f64; 4]) -> Mat3 {
    let aj = adj_jet(v, x);
    let mut z = Mat3::zeros();
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        for l in 0..3 {
            z[(i, l)] = aj.d1[j][(k, l)] - aj.d1[k][(j, l)];
        }
    }
    z
}

/// The rewriting of Z valid where the divergence-free condition holds:
/// z_l^i = sum_a (dV_{jl}/d nu_a V_{ka} - dV_{kl}/d nu_a V_{ja}), (ijk) cyclic.
/// Returned in the same layout as [`z_of`]: Z[(l, i)] = z_l^i.
pub fn z_alt(v: &VField, x: &[f64; 4]) -> Mat3 {
    let m = v.value(x);
    let dm: [Mat3; 4] = [0, 1, 2, 3].map(|a| v.d1(x, a));
    let mut z = Mat3::zeros();
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        for l in 0..3 {
            let mut s = 0.0;
            for a in 0..3 {
                s += dm[a][(j, l)] * m[(k, a)] - dm[a][(k, l)] * m[(j, a)];
            }
            z[(l, i)] = s;
        }
    }
    z
}

/// The curvature coefficients of the torus bundle, collected as two matrices.
pub struct CurvatureMatrices {
    pub z: Mat3,
    pub w: Mat3,
}

pub fn curvature_matrices(v: &VField, x: &[f64; 4]) -> CurvatureMatrices {
    CurvatureMatrices {
        z: z_of(v, x),
        w: w_of(v, x),
    }
}

/// W = dV/d mu; symmetric since V is.
pub fn w_of(v: &VField, x: &[f64; 4]) -> Mat3 {
    v.d1(x, 3)
}

/// Divergence residual: component j is sum_i dV_{ij}/d nu_i.
pub fn div_residual(v: &VField, x: &[f64; 4]) -> Vector3<f64> {
    let dm: [Mat3; 3] = [0, 1, 2].map(|a| v.d1(x, a));
    Vector3::from_fn(|j, _| (0..3).map(|i| dm[i][(i, j)]).sum())
}

/// Residual of the second-order system L(V) + Q(dV):
/// L(V)_{ij} = d^2 V_{ij}/d mu^2 + sum_{a,b} V_{ab} d^2 V_{ij}/d nu_a d nu_b,
/// Q(dV)_{ij} = - sum_{a,b} dV_{ia}/d nu_b dV_{jb}/d nu_a.
pub fn elliptic_residual(v: &VField, x: &[f64; 4]) -> Mat3 {
    let m = v.value(x);
    let dm: [Mat3; 3] = [0, 1, 2].map(|a| v.d1(x, a));
    let mut res = v.d2(x, 3, 3);
    for a in 0..3 {
        for b in 0..3 {
            res += v.d2(x, a, b) * m[(a, b)];
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            let mut q = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    q += dm[b][(i, a)] * dm[a][(j, b)];
                }
            }
            res[(i, j)] -= q;
        }
    }
    res
}

// ---------------------------------------------------------------------------
// Forms on the base R^4 and on the 7-dimensional coordinate coframe, with
// polynomial or numeric coefficients.
// ---------------------------------------------------------------------------

/// A form with polynomial coefficients. `base_offset` tells which frame index
/// carries the first base variable nu1: 0 for forms on R^4 itself (frame
/// indices 1..4 = dnu1, dnu2, dnu3, dmu), 3 for the 7-frame
/// (dt1, dt2, dt3, dnu1, dnu2, dnu3, dmu).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyForm {
    pub dim: usize,
    pub degree: usize,
    pub base_offset: usize,
    pub coeffs: BTreeMap<u8, Poly>,
}

impl PolyForm {
    pub fn zero(dim: usize, degree: usize, base_offset: usize) -> Self {
        PolyForm {
            dim,
            degree,
            base_offset,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn monomial(dim: usize, base_offset: usize, indices: &[usize], p: Poly) -> Self {
        let mut mask = 0u8;
        for &i in indices {
            assert!((1..=dim).contains(&i));
            assert_eq!(mask & (1 << (i - 1)), 0);
            mask |= 1 << (i - 1);
        }
        let mut f = PolyForm::zero(dim, indices.len(), base_offset);
        if !p.is_zero() {
            f.coeffs.insert(mask, p);
        }
        f
    }

    pub fn add_term(&mut self, mask: u8, p: &Poly, s: f64) {
        if p.is_zero() || s == 0.0 {
            return;
        }
        let e = self
            .coeffs
            .entry(mask)
            .or_insert_with(Poly::zero);
        *e = e.add(&p.scale(s));
        if e.is_zero() {
            self.coeffs.remove(&mask);
        }
    }

    pub fn add(&self, other: &PolyForm) -> PolyForm {
        assert_eq!(self.degree, other.degree);
        let mut f = self.clone();
        for (&m, p) in &other.coeffs {
            f.add_term(m, p, 1.0);
        }
        f
    }

    pub fn scale(&self, s: f64) -> PolyForm {
        let mut f = PolyForm::zero(self.dim, self.degree, self.base_offset);
        for (&m, p) in &self.coeffs {
            f.add_term(m, p, s);
        }
        f
    }

    pub fn wedge(&self, other: &PolyForm) -> PolyForm {
        assert_eq!(self.dim, other.dim);
        let deg = self.degree + other.degree;
        if deg > self.dim {
            return PolyForm::zero(self.dim, self.dim, self.base_offset);
        }
        let mut f = PolyForm::zero(self.dim, deg, self.base_offset);
        for (&ma, pa) in &self.coeffs {
            for (&mb, pb) in &other.coeffs {
                if ma & mb != 0 {
                    continue;
                }
                f.add_term(ma | mb, &pa.mul(pb), crate::forms::merge_sign(ma, mb));
            }
        }
        f
    }

    /// Exterior derivative; coefficients depend on (nu, mu) only, whose
    /// coframe indices start at `base_offset + 1`.
    pub fn d(&self) -> PolyForm {
        let mut out = PolyForm::zero(self.dim, (self.degree + 1).min(self.dim), self.base_offset);
        for (&m, p) in &self.coeffs {
            for v in 0..4 {
                let frame = self.base_offset + v; // 0-based frame position
                let bit = 1u8 << frame;
                if m & bit != 0 {
                    continue;
                }
                let dp = p.partial(v);
                if dp.is_zero() {
                    continue;
                }
                out.add_term(bit | m, &dp, crate::forms::merge_sign(bit, m));
            }
        }
        out
    }

    pub fn at(&self, x: &[f64; 4]) -> KForm {
        let mut f = KForm::zero(self.dim, self.degree);
        for (&m, p) in &self.coeffs {
            f.add_term(m, p.eval(x));
        }
        f
    }

    pub fn max_abs_at(&self, x: &[f64; 4]) -> f64 {
        self.coeffs
            .values()
            .fold(0.0, |acc, p| acc.max(p.eval(x).abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .values()
            .fold(0.0, |acc, p| acc.max(p.max_abs_coeff()))
    }
}

/// Three 1-forms A_i on R^4 with polynomial coefficients; theta_i = dt_i + A_i.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionPotential {
    /// a[i][c] is the coefficient of (dnu1, dnu2, dnu3, dmu)[c] in A_i.
    pub a: [[Poly; 4]; 3],
}

impl ConnectionPotential {
    pub fn zero() -> Self {
        ConnectionPotential {
            a: Default::default(),
        }
    }

    pub fn one_form(&self, i: usize) -> PolyForm {
        let mut f = PolyForm::zero(4, 1, 0);
        for c in 0..4 {
            f.add_term(1u8 << c, &self.a[i][c], 1.0);
        }
        f
    }

    /// dA_i as polynomial 2-forms on R^4.
    pub fn curvature(&self) -> [PolyForm; 3] {
        [0, 1, 2].map(|i| self.one_form(i).d())
    }
}

/// The connection curvature omega_l = sum_cyc (z_l^i dnu_i dmu + w_l^i dnu_j dnu_k),
/// evaluated from the 2-jet of V at a point (2-form on R^4, frame dnu1..dmu).
pub fn omega_of(v: &VField, x: &[f64; 4]) -> [KForm; 3] {
    let z = z_of(v, x);
    let w = w_of(v, x);
    [0, 1, 2].map(|l| {
        let mut f = KForm::zero(4, 2);
        for i in 0..3 {
            let (_, j, k) = cyc(i);
            // dnu_i ^ dmu
            f = f.add(&KForm::monomial(4, &[i + 1, 4], z[(l, i)]));
            // dnu_j ^ dnu_k (ordered, with sign)
            let (lo, hi, sgn) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
            f = f.add(&KForm::monomial(4, &[lo + 1, hi + 1], sgn * w[(l, i)]));
        }
        f
    })
}

/// d(omega_l) at a point, computed from the exact 2-jet of V (3-forms on R^4).
/// Vanishing of all three is equivalent to the second-order system.
pub fn d_omega_of(v: &VField, x: &[f64; 4]) -> [KForm; 3] {
    let aj = adj_jet(v, x);
    // dz[a][(i,l)] = d z_i^l / d x_a
    let mut dz = [Mat3::zeros(); 4];
    for a in 0..4 {
        for i in 0..3 {
            let (_, j, k) = cyc(i);
            for l in 0..3 {
                dz[a][(i, l)] = aj.d2[a][j][(k, l)] - aj.d2[a][k][(j, l)];
            }
        }
    }
    // dw[a] = d (dV/dmu) / d x_a
    let dw: [Mat3; 4] = [0, 1, 2, 3].map(|a| v.d2(x, a, 3));
    [0, 1, 2].map(|l| {
        let mut f = KForm::zero(4, 3);
        for i in 0..3 {
            let (_, j, k) = cyc(i);
            for a in 0..3 {
                // d z_l^i/d nu_a dnu_a ^ dnu_i ^ dmu
                if a != i {
                    let (lo, hi, sgn) = if a < i { (a, i, 1.0) } else { (i, a, -1.0) };
                    f = f.add(&KForm::monomial(
                        4,
                        &[lo + 1, hi + 1, 4],
                        sgn * dz[a][(l, i)],
                    ));
                }
            }
            // d w_l^i terms against dnu_j ^ dnu_k
            let (lo, hi, base_sgn) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
            // dnu_i direction (the only nu missing from dnu_j ^ dnu_k)
            let mut idx = [i + 1, lo + 1, hi + 1];
            let mut sgn = base_sgn;
            // sort the three indices, tracking the permutation sign
            for p in 0..3 {
                for q in (p + 1)..3 {
                    if idx[p] > idx[q] {
                        idx.swap(p, q);
                        sgn = -sgn;
                    }
                }
            }
            f = f.add(&KForm::monomial(4, &idx, sgn * dw[i][(l, i)]));
            // dmu ^ dnu_j ^ dnu_k
            f = f.add(&KForm::monomial(4, &[lo + 1, hi + 1, 4], base_sgn * dw[3][(l, i)]));
        }
        f
    })
}

// ---------------------------------------------------------------------------
// Building the G2-structure.
// ---------------------------------------------------------------------------

/// Coframe index (1-based, 7-frame) of dnu_a for a = 0..2, and of dmu for a = 3.
fn base_idx(a: usize) -> usize {
    4 + a
}

fn theta_form(a: &ConnectionPotential, i: usize) -> PolyForm {
    let mut f = PolyForm::monomial(7, 3, &[i + 1], Poly::constant(1.0));
    for c in 0..4 {
        f.add_term(1u8 << (3 + c), &a.a[i][c], 1.0);
    }
    f
}

/// phi and *phi with polynomial coefficients on the 7-frame, for polynomial V.
/// Uses the adjugate-free rewriting of *phi so that both are exactly polynomial.
pub fn build_structure_poly(
    vp: &PolyMat3,
    a: &ConnectionPotential,
) -> (PolyForm, PolyForm) {
    // polynomial det and adjugate
    let det = poly_det3(vp);
    let adj = poly_adj3(vp);
    let theta: [PolyForm; 3] = [0, 1, 2].map(|i| theta_form(a, i));
    let dnu: [PolyForm; 3] =
        [0, 1, 2].map(|i| PolyForm::monomial(7, 3, &[base_idx(i)], Poly::constant(1.0)));
    let dmu = PolyForm::monomial(7, 3, &[base_idx(3)], Poly::constant(1.0));

    // phi = -det(V) dnu_123 + dmu ^ dnu^t adj(V) theta + sum_cyc theta_ij ^ dnu_k
    let mut phi = PolyForm::monomial(7, 3, &[4, 5, 6], det.scale(-1.0));
    for p in 0..3 {
        for q in 0..3 {
            let term = dmu.wedge(&dnu[p]).wedge(&theta[q]);
            let mut scaled = PolyForm::zero(7, 3, 3);
            for (&m, c) in &term.coeffs {
                scaled.add_term(m, &c.mul(adj.entry(p, q)), 1.0);
            }
            phi = phi.add(&scaled);
        }
    }
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        phi = phi.add(&theta[i].wedge(&theta[j]).wedge(&dnu[k]));
    }

    // *phi = theta_123 ^ dmu - sum_cyc sum_cyc V_{ip} dnu_jk ^ theta_qr
    //        + det(V) dmu ^ sum_cyc theta_i ^ dnu_jk
    let mut sphi = theta[0].wedge(&theta[1]).wedge(&theta[2]).wedge(&dmu);
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        for p in 0..3 {
            let (_, q, r) = cyc(p);
            let term = dnu[j].wedge(&dnu[k]).wedge(&theta[q]).wedge(&theta[r]);
            let mut scaled = PolyForm::zero(7, 4, 3);
            for (&m, c) in &term.coeffs {
                scaled.add_term(m, &c.mul(vp.entry(i, p)), -1.0);
            }
            sphi = sphi.add(&scaled);
        }
    }
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        let term = dmu.wedge(&theta[i]).wedge(&dnu[j]).wedge(&dnu[k]);
        let mut scaled = PolyForm::zero(7, 4, 3);
        for (&m, c) in &term.coeffs {
            scaled.add_term(m, &c.mul(&det), 1.0);
        }
        sphi = sphi.add(&scaled);
    }
    (phi, sphi)
}

pub fn poly_det3(m: &PolyMat3) -> Poly {
    let e = |i: usize, j: usize| m.entry(i, j);
    let mut d = Poly::zero();
    d = d.add(&e(0, 0).mul(&e(1, 1).mul(e(2, 2)).sub(&e(1, 2).mul(e(2, 1)))));
    d = d.sub(&e(0, 1).mul(&e(1, 0).mul(e(2, 2)).sub(&e(1, 2).mul(e(2, 0)))));
    d = d.add(&e(0, 2).mul(&e(1, 0).mul(e(2, 1)).sub(&e(1, 1).mul(e(2, 0)))));
    d
}

pub fn poly_adj3(m: &PolyMat3) -> PolyMat3 {
    let e = |i: usize, j: usize| m.entry(i, j).clone();
    let mut out = PolyMat3::zero();
    for i in 0..3 {
        for j in i..3 {
            // adj(M)_{ij} = cofactor_{ji}; for symmetric M this is symmetric.
            let (_, p, q) = cyc(j);
            let (_, r, s) = cyc(i);
            let c = e(p, r).mul(&e(q, s)).sub(&e(p, s).mul(&e(q, r)));
            out.set(i, j, c);
        }
    }
    out
}

/// Numeric phi, *phi and metric at a point, for any V kind.
pub fn build_structure(
    v: &VField,
    a: &ConnectionPotential,
    x: &[f64; 4],
) -> Result<(KForm, KForm, MetricSample), AnsatzError> {
    if !v.is_positive_at(x) {
        return Err(AnsatzError::NotPositiveDefinite(*x));
    }
    let m = v.value(x);
    let det = m.determinant();
    let adj = adj3(&m);
    let av: [[f64; 4]; 3] = [0, 1, 2].map(|i| [0, 1, 2, 3].map(|c| a.a[i][c].eval(x)));

    let theta: [KForm; 3] = [0, 1, 2].map(|i| {
        let mut f = KForm::monomial(7, &[i + 1], 1.0);
        for c in 0..4 {
            f = f.add(&KForm::monomial(7, &[base_idx(c)], av[i][c]));
        }
        f
    });
    let dnu: [KForm; 3] = [0, 1, 2].map(|i| KForm::monomial(7, &[base_idx(i)], 1.0));
    let dmu = KForm::monomial(7, &[base_idx(3)], 1.0);
    let w = |a: &KForm, b: &KForm| crate::forms::wedge(a, b).expect("same frame");

    let mut phi = KForm::monomial(7, &[4, 5, 6], -det);
    for p in 0..3 {
        for q in 0..3 {
            phi = phi.add(&w(&w(&dmu, &dnu[p]), &theta[q]).scale(adj[(p, q)]));
        }
    }
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        phi = phi.add(&w(&w(&theta[i], &theta[j]), &dnu[k]));
    }

    let mut sphi = w(&w(&w(&theta[0], &theta[1]), &theta[2]), &dmu);
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        for p in 0..3 {
            let (_, q, r) = cyc(p);
            sphi = sphi.add(
                &w(&w(&w(&dnu[j], &dnu[k]), &theta[q]), &theta[r]).scale(-m[(i, p)]),
            );
        }
        sphi = sphi.add(&w(&w(&w(&dmu, &theta[i]), &dnu[j]), &dnu[k]).scale(det));
    }

    // g = (1/det V) theta^t adj(V) theta + dnu^t adj(V) dnu + det(V) dmu^2
    // on coordinates: g = P^t Q P with P mapping coordinate components to
    // (theta_1..3, dnu_1..3, dmu) components.
    let mut p_mat = MetricSample::identity();
    for i in 0..3 {
        for c in 0..4 {
            p_mat[(i, 3 + c)] = av[i][c];
        }
    }
    let mut q_mat = MetricSample::zeros();
    for i in 0..3 {
        for j in 0..3 {
            q_mat[(i, j)] = adj[(i, j)] / det;
            q_mat[(3 + i, 3 + j)] = adj[(i, j)];
        }
    }
    q_mat[(6, 6)] = det;
    let g = p_mat.transpose() * q_mat * p_mat;
    Ok((phi, sphi, g))
}

/// Metric of the ansatz at a point (no potential needed: A only shears the
/// coframe, and the block formula already accounts for it when A = 0 ... so this
/// returns the A-dependent coordinate metric).
pub fn metric_sample(
    v: &VField,
    a: &ConnectionPotential,
    x: &[f64; 4],
) -> Result<MetricSample, AnsatzError> {
    Ok(build_structure(v, a, x)?.2)
}

/// Max-norms of (d phi, d *phi) over a set of base points. Exact coefficient
/// differentiation for polynomial V (with polynomial A); central differences of
/// the built coefficients otherwise.
pub fn torsion_residual(
    v: &VField,
    a: &ConnectionPotential,
    grid: &[[f64; 4]],
) -> Result<(f64, f64), AnsatzError> {
    // The potential must reproduce the connection curvature of V.
    let da = a.curvature();
    let mut defect = 0.0f64;
    for x in grid.iter().take(8) {
        let om = omega_of(v, x);
        for l in 0..3 {
            defect = defect.max(da[l].at(x).sub(&om[l]).max_abs());
        }
    }
    if defect > 1e-6 {
        return Err(AnsatzError::InconsistentPotential(defect));
    }

    match &v.kind {
        VKind::Polynomial(vp) => {
            let (phi, sphi) = build_structure_poly(vp, a);
            let (dphi, dsphi) = (phi.d(), sphi.d());
            let mut r1 = 0.0f64;
            let mut r2 = 0.0f64;
            for x in grid {
                r1 = r1.max(dphi.max_abs_at(x));
                r2 = r2.max(dsphi.max_abs_at(x));
            }
            Ok((r1, r2))
        }
        VKind::Callable(_) => {
            let mut r1 = 0.0f64;
            let mut r2 = 0.0f64;
            for x in grid {
                let (r1x, r2x) = numeric_d_norms(v, a, x)?;
                r1 = r1.max(r1x);
                r2 = r2.max(r2x);
            }
            Ok((r1, r2))
        }
    }
}

fn numeric_d_norms(
    v: &VField,
    a: &ConnectionPotential,
    x: &[f64; 4],
) -> Result<(f64, f64), AnsatzError> {
    // d(coefficient) by central differences in the four base directions; the
    // t-directions never appear.
    let mut dphi = KForm::zero(7, 4);
    let mut dsphi = KForm::zero(7, 5);
    for c in 0..4 {
        let h = fd_step(x[c]);
        let mut xp = *x;
        let mut xm = *x;
        xp[c] += h;
        xm[c] -= h;
        let (pp, sp, _) = build_structure(v, a, &xp)?;
        let (pm, sm, _) = build_structure(v, a, &xm)?;
        let dxc = KForm::monomial(7, &[base_idx(c)], 1.0 / (2.0 * h));
        dphi = dphi.add(&crate::forms::wedge(&dxc, &pp.sub(&pm)).expect("frame"));
        dsphi = dsphi.add(&crate::forms::wedge(&dxc, &sp.sub(&sm)).expect("frame"));
    }
    Ok((dphi.max_abs(), dsphi.max_abs()))
}

/// Primitive of a closed polynomial 2-form on a star-shaped box via the Poincare
/// homotopy formula centered at `center`.
pub fn poincare_primitive(
    omega: &PolyForm,
    center: &[f64; 4],
) -> Result<[Poly; 4], AnsatzError> {
    assert_eq!(omega.dim, 4);
    assert_eq!(omega.degree, 2);
    let d = omega.d();
    // coefficient arithmetic in d leaves roundoff residue on exact forms, so
    // the closedness gate is relative to the coefficient scale
    let tol = 1e-12 * (1.0 + omega.max_abs_coeff());
    if d.max_abs_coeff() > tol {
        return Err(AnsatzError::NotClosed(d.max_abs_coeff()));
    }
    // Work in shifted coordinates y = x - center: p(y + center) = p.shift(center).
    let shift_in = *center;
    let mut a_shifted: [Poly; 4] = Default::default();
    for (&m, p) in &omega.coeffs {
        // identify the two frame indices a < b
        let a_i = m.trailing_zeros() as usize;
        let b_i = (m & (m - 1)).trailing_zeros() as usize;
        let p_y = p.shift(&shift_in); // coefficient as a polynomial in y
        for (e, c) in p_y.terms() {
            let deg: u32 = e.iter().map(|&v| v as u32).sum();
            let f = c / (deg as f64 + 2.0);
            // contribution f * (y_a y^e dy_b - y_b y^e dy_a)
            let mut ea = e;
            ea[a_i] += 1;
            a_shifted[b_i].add_term(ea, f);
            let mut eb = e;
            eb[b_i] += 1;
            a_shifted[a_i].add_term(eb, -f);
        }
    }
    // shift back: y = x - center
    let back = [-center[0], -center[1], -center[2], -center[3]];
    Ok(a_shifted.map(|p| p.shift(&back)))
}

/// Connection potential with dA_l equal to the connection curvature omega_l of a
/// polynomial solution V, gauge-fixed by the homotopy formula at the box center.
pub fn poincare_potential(v: &VField, center: &[f64; 4]) -> Result<ConnectionPotential, AnsatzError> {
    let vp = v.as_polynomial().ok_or(AnsatzError::NotPolynomial)?;
    let omega = omega_poly(vp);
    let mut a = ConnectionPotential::zero();
    for l in 0..3 {
        a.a[l] = poincare_primitive(&omega[l], center)?;
    }
    Ok(a)
}

/// The connection curvature as polynomial 2-forms, for polynomial V.
pub fn omega_poly(vp: &PolyMat3) -> [PolyForm; 3] {
    let adj = poly_adj3(vp);
    // z_i^l as polynomials
    let mut z: [[Poly; 3]; 3] = Default::default();
    for i in 0..3 {
        let (_, j, k) = cyc(i);
        for l in 0..3 {
            z[i][l] = adj.entry(k, l).partial(j).sub(&adj.entry(j, l).partial(k));
        }
    }
    let w = vp.map(|p| p.partial(3));
    [0, 1, 2].map(|l| {
        let mut f = PolyForm::zero(4, 2, 0);
        for i in 0..3 {
            let (_, j, k) = cyc(i);
            f.add_term((1 << i) | (1 << 3), &z[l][i], 1.0);
            let (lo, hi, sgn) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
            f.add_term((1 << lo) | (1 << hi), w.entry(l, i), sgn);
        }
        f
    })
}

/// GL(3,R) change of torus basis: V'(nu', mu') = G^{-t} V(nu, mu) G^{-1} with
/// nu = G^t nu' / det G and mu = mu' / det G. Polynomial fields stay polynomial.
pub fn gl3_transform(v: &VField, g: &Mat3) -> Result<VField, AnsatzError> {
    let det = g.determinant();
    if det == 0.0 {
        return Err(AnsatzError::SingularTransform);
    }
    let ginv = g.try_inverse().ok_or(AnsatzError::SingularTransform)?;
    // x = S x' with S linear: nu_i = sum_j G_{ji} nu'_j / det, mu = mu' / det.
    let mut s = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = g[(j, i)] / det;
        }
    }
    s[3][3] = 1.0 / det;
    let domain = transform_box(&v.domain, g);
    match &v.kind {
        VKind::Polynomial(p) => {
            let subbed = p.map(|q| q.substitute_linear(&s));
            let mut out = PolyMat3::zero();
            for i in 0..3 {
                for j in i..3 {
                    let mut e = Poly::zero();
                    for a in 0..3 {
                        for b in 0..3 {
                            e = e.add(&subbed.entry(a, b).scale(ginv[(a, i)] * ginv[(b, j)]));
                        }
                    }
                    out.set(i, j, e);
                }
            }
            Ok(VField::polynomial(out, domain))
        }
        VKind::Callable(f) => {
            let f = f.clone();
            let ginv_t = ginv.transpose();
            Ok(VField::callable(
                move |xp: &[f64; 4]| {
                    let mut x = [0.0; 4];
                    for i in 0..4 {
                        for j in 0..4 {
                            x[i] += s[i][j] * xp[j];
                        }
                    }
                    ginv_t * f(&x) * ginv
                },
                domain,
            ))
        }
    }
}

/// Image of a point under the coordinate change of [`gl3_transform`]:
/// nu' = det(G) G^{-t} nu, mu' = det(G) mu.
pub fn gl3_point_map(g: &Mat3, x: &[f64; 4]) -> [f64; 4] {
    let det = g.determinant();
    let ginv_t = g.try_inverse().expect("invertible").transpose();
    let nu = Vector3::new(x[0], x[1], x[2]);
    let nup = ginv_t * nu * det;
    [nup[0], nup[1], nup[2], det * x[3]]
}

fn transform_box(b: &Box4, g: &Mat3) -> Box4 {
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [f64::NEG_INFINITY; 4];
    for corner in 0..16 {
        let x = [
            if corner & 1 != 0 { b.hi[0] } else { b.lo[0] },
            if corner & 2 != 0 { b.hi[1] } else { b.lo[1] },
            if corner & 4 != 0 { b.hi[2] } else { b.lo[2] },
            if corner & 8 != 0 { b.hi[3] } else { b.lo[3] },
        ];
        let y = gl3_point_map(g, &x);
        for i in 0..4 {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
    }
    Box4 { lo, hi }
}

// ---------------------------------------------------------------------------
// JSON serialization of polynomial V fields.
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct VFieldJson {
    vars: Vec<String>,
    entries: BTreeMap<String, Vec<([u8; 4], f64)>>,
    domain: Box4,
}

pub fn vfield_to_json(v: &VField) -> Result<serde_json::Value, AnsatzError> {
    let p = v.as_polynomial().ok_or(AnsatzError::NotPolynomial)?;
    let mut entries = BTreeMap::new();
    for i in 0..3 {
        for j in i..3 {
            let terms: Vec<([u8; 4], f64)> = p.entry(i, j).terms().collect();
            entries.insert(format!("{}{}", i + 1, j + 1), terms);
        }
    }
    let doc = VFieldJson {
        vars: crate::poly::VAR_NAMES.iter().map(|s| s.to_string()).collect(),
        entries,
        domain: v.domain,
    };
    Ok(serde_json::to_value(doc).expect("serializable"))
}

pub fn vfield_from_json(value: &serde_json::Value) -> Result<VField, serde_json::Error> {
    let doc: VFieldJson = serde_json::from_value(value.clone())?;
    let mut m = PolyMat3::zero();
    for (key, terms) in &doc.entries {
        let bytes = key.as_bytes();
        let (i, j) = (
            (bytes[0] - b'1') as usize,
            (bytes[1] - b'1') as usize,
        );
        let mut p = Poly::zero();
        for (e, c) in terms {
            p.add_term(*e, *c);
        }
        m.set(i.min(j), i.max(j), p);
    }
    Ok(VField::polynomial(m, doc.domain))
}
