//! Exterior-calculus kernel: alternating k-forms over a frame of dimension <= 8.
//!
//! Index subsets are encoded as bitmasks (bit i-1 set <=> index i present, indices
//! 1-based as in the `e^{123}` notation), which makes all permutation-sign
//! bookkeeping exact. Coefficients are `f64`; every operation is a pure function.

use nalgebra::DMatrix;
use std::collections::BTreeMap;
use thiserror::Error;

pub const MAX_DIM: usize = 8;

#[derive(Debug, Error)]
pub enum FormsError {
    #[error("frame dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid degree {degree} for dimension {dim}")]
    BadDegree { degree: usize, dim: usize },
    #[error("metric is degenerate or not positive definite")]
    DegenerateMetric,
    #[error("three-form is not of G2 type: recovered bilinear form not positive")]
    NotG2,
    #[error("unsupported frame dimension {0} (must be 1..=8)")]
    BadDimension(usize),
}

/// An alternating k-form; `coeffs` maps index bitmasks (popcount == degree) to
/// real coefficients. Zero coefficients may be dropped at any time.
#[derive(Debug, Clone, PartialEq)]
pub struct KForm {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<u8, f64>,
}

/// Sign of merging two disjoint ascending index sets: (-1)^{#inversions} where an
/// inversion is a pair (i in a, j in b) with i > j.
pub(crate) fn merge_sign(a: u8, b: u8) -> f64 {
    let mut inv = 0u32;
    let mut bb = b;
    while bb != 0 {
        let j = bb.trailing_zeros();
        // indices of a strictly above j
        inv += (a >> (j + 1)).count_ones();
        bb &= bb - 1;
    }
    if inv % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn mask_indices(mask: u8) -> Vec<usize> {
    (0..8).filter(|i| mask & (1 << i) != 0).collect()
}

impl KForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dim out of range");
        assert!(degree <= dim, "degree out of range");
        KForm {
            dim,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// `c * e^{i1 .. ik}` with 1-based, strictly increasing indices.
    pub fn monomial(dim: usize, indices: &[usize], c: f64) -> Self {
        let mut mask = 0u8;
        for &i in indices {
            assert!((1..=dim).contains(&i), "index out of range");
            assert!(mask & (1 << (i - 1)) == 0, "repeated index");
            mask |= 1 << (i - 1);
        }
        let mut f = KForm::zero(dim, indices.len());
        if c != 0.0 {
            f.coeffs.insert(mask, c);
        }
        f
    }

    pub fn from_mask_coeffs(dim: usize, degree: usize, it: impl IntoIterator<Item = (u8, f64)>) -> Self {
        let mut f = KForm::zero(dim, degree);
        for (m, c) in it {
            debug_assert_eq!(m.count_ones() as usize, degree);
            f.add_term(m, c);
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeff(&self, indices: &[usize]) -> f64 {
        let mut mask = 0u8;
        let mut sign = 1.0;
        // allow unsorted index lists for convenience; repeated index gives 0
        let mut idx: Vec<usize> = indices.to_vec();
        for i in 0..idx.len() {
            for j in (i + 1)..idx.len() {
                if idx[i] == idx[j] {
                    return 0.0;
                }
                if idx[i] > idx[j] {
                    idx.swap(i, j);
                    sign = -sign;
                }
            }
        }
        for &i in &idx {
            mask |= 1 << (i - 1);
        }
        sign * self.coeffs.get(&mask).copied().unwrap_or(0.0)
    }

    pub fn coeff_mask(&self, mask: u8) -> f64 {
        self.coeffs.get(&mask).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u8, f64)> + '_ {
        self.coeffs.iter().map(|(&m, &c)| (m, c))
    }

    pub(crate) fn add_term(&mut self, mask: u8, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.coeffs.entry(mask).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.coeffs.remove(&mask);
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut f = KForm::zero(self.dim, self.degree);
        for (&m, &c) in &self.coeffs {
            f.add_term(m, c * s);
        }
        f
    }

    pub fn add(&self, other: &KForm) -> KForm {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.degree, other.degree);
        let mut f = self.clone();
        for (&m, &c) in &other.coeffs {
            f.add_term(m, c);
        }
        f
    }

    pub fn sub(&self, other: &KForm) -> KForm {
        self.add(&other.scale(-1.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }
}

/// Graded-anticommutative wedge product. Degrees exceeding the frame dimension
/// give the zero form (of clamped degree) rather than an error.
pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm, FormsError> {
    if a.dim != b.dim {
        return Err(FormsError::DimensionMismatch(a.dim, b.dim));
    }
    let deg = a.degree + b.degree;
    if deg > a.dim {
        return Ok(KForm::zero(a.dim, a.dim));
    }
    let mut f = KForm::zero(a.dim, deg);
    for (&ma, &ca) in &a.coeffs {
        for (&mb, &cb) in &b.coeffs {
            if ma & mb != 0 {
                continue;
            }
            f.add_term(ma | mb, ca * cb * merge_sign(ma, mb));
        }
    }
    Ok(f)
}

/// Interior product X -| a (contraction in the first slot).
pub fn contract(x: &[f64], a: &KForm) -> Result<KForm, FormsError> {
    if x.len() != a.dim {
        return Err(FormsError::DimensionMismatch(x.len(), a.dim));
    }
    if a.degree == 0 {
        return Err(FormsError::BadDegree {
            degree: 0,
            dim: a.dim,
        });
    }
    let mut f = KForm::zero(a.dim, a.degree - 1);
    for (&m, &c) in &a.coeffs {
        let mut rem = m;
        while rem != 0 {
            let p = rem.trailing_zeros() as u8;
            rem &= rem - 1;
            let xi = x[p as usize];
            if xi == 0.0 {
                continue;
            }
            // ordinal of p within m (number of smaller indices present)
            let ord = (m & ((1u8 << p) - 1)).count_ones();
            let sign = if ord % 2 == 0 { 1.0 } else { -1.0 };
            f.add_term(m & !(1 << p), sign * xi * c);
        }
    }
    Ok(f)
}

/// A (pseudo-)Riemannian metric on the frame; positive definiteness is required
/// where documented (Hodge star, metric recovery).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetric {
    pub dim: usize,
    pub components: DMatrix<f64>,
}

impl FrameMetric {
    pub fn new(components: DMatrix<f64>) -> Self {
        let dim = components.nrows();
        assert_eq!(components.ncols(), dim);
        FrameMetric { dim, components }
    }

    pub fn identity(dim: usize) -> Self {
        FrameMetric {
            dim,
            components: DMatrix::identity(dim, dim),
        }
    }

    fn inverse(&self) -> Result<DMatrix<f64>, FormsError> {
        self.components
            .clone()
            .try_inverse()
            .ok_or(FormsError::DegenerateMetric)
    }
}

/// Gram matrix of two k-index sets under the inverse metric:
/// <e^I, e^J> = det( g^{i_a j_b} ).
fn grammian(ginv: &DMatrix<f64>, mi: u8, mj: u8) -> f64 {
    let ii = mask_indices(mi);
    let jj = mask_indices(mj);
    let k = ii.len();
    debug_assert_eq!(k, jj.len());
    if k == 0 {
        return 1.0;
    }
    let m = DMatrix::from_fn(k, k, |a, b| ginv[(ii[a], jj[b])]);
    m.determinant()
}

/// Pointwise inner product of same-degree forms under `g`.
pub fn inner(a: &KForm, b: &KForm, g: &FrameMetric) -> Result<f64, FormsError> {
    if a.dim != b.dim || a.dim != g.dim {
        return Err(FormsError::DimensionMismatch(a.dim, b.dim.min(g.dim)));
    }
    assert_eq!(a.degree, b.degree);
    let ginv = g.inverse()?;
    let mut s = 0.0;
    for (&mi, &ci) in &a.coeffs {
        for (&mj, &cj) in &b.coeffs {
            s += ci * cj * grammian(&ginv, mi, mj);
        }
    }
    Ok(s)
}

/// Hodge star characterized by a ^ *b = <a, b> vol for all a of the same degree.
pub fn hodge(b: &KForm, g: &FrameMetric, vol: &KForm) -> Result<KForm, FormsError> {
    let n = b.dim;
    if g.dim != n || vol.dim != n {
        return Err(FormsError::DimensionMismatch(g.dim, n));
    }
    assert_eq!(vol.degree, n);
    let full: u8 = if n == 8 { 0xff } else { (1u8 << n) - 1 };
    let vol_c = vol.coeff_mask(full);
    if vol_c == 0.0 {
        return Err(FormsError::DegenerateMetric);
    }
    let ginv = g.inverse()?;
    let k = b.degree;
    let mut out = KForm::zero(n, n - k);
    // Iterate over all degree-k masks J: coefficient of *b on the complement of J
    // is vol_c * sign(J, J^c)^{-1} * <e^J, b>.
    for mj in 0u16..(1u16 << n) {
        let mj = mj as u8;
        if mj.count_ones() as usize != k {
            continue;
        }
        let mut s = 0.0;
        for (&mi, &ci) in &b.coeffs {
            s += ci * grammian(&ginv, mj, mi);
        }
        if s == 0.0 {
            continue;
        }
        let comp = full & !mj;
        let sgn = merge_sign(mj, comp);
        out.add_term(comp, vol_c * s / sgn);
    }
    Ok(out)
}

/// Recover the metric and volume from a G2 three-form in dimension 7 via
/// b_ij = coefficient of (E_i -| phi) ^ (E_j -| phi) ^ phi on e^{1..7}.
/// Then b = 6 g (det g)^{1/2}, so det b = 6^7 (det g)^{9/2} and
/// g = b / (6 s), vol = s e^{1..7} with s = (det b / 6^7)^{1/9}.
pub fn metric_from_three_form(phi: &KForm) -> Result<(FrameMetric, KForm), FormsError> {
    let n = phi.dim;
    if n != 7 || phi.degree != 3 {
        return Err(FormsError::BadDegree {
            degree: phi.degree,
            dim: n,
        });
    }
    let full: u8 = (1u8 << 7) - 1;
    let mut contractions = Vec::with_capacity(7);
    for i in 0..7 {
        let mut x = [0.0; 7];
        x[i] = 1.0;
        contractions.push(contract(&x, phi)?);
    }
    let mut b = DMatrix::zeros(7, 7);
    for i in 0..7 {
        for j in i..7 {
            let w = wedge(&wedge(&contractions[i], &contractions[j])?, phi)?;
            let v = w.coeff_mask(full);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let det_b = b.determinant();
    if det_b == 0.0 {
        return Err(FormsError::NotG2);
    }
    // The form fixes its own orientation: s is negative when the given frame
    // order is negatively oriented for phi, and g = b/(6s) stays positive.
    let s = det_b.signum() * (det_b.abs() / 6f64.powi(7)).powf(1.0 / 9.0);
    let g = FrameMetric::new(b / (6.0 * s));
    if g.components.clone().cholesky().is_none() {
        return Err(FormsError::NotG2);
    }
    let vol = KForm::monomial(7, &[1, 2, 3, 4, 5, 6, 7], s);
    Ok((g, vol))
}

// ---------------------------------------------------------------------------
// Structure frame {dr, e1, e2, e3, f1, f2, f3} with de^i = 2 e^{jk},
// df^i = 2 f^{jk}, d(dr) = 0, and polynomial-in-r coefficients.
// ---------------------------------------------------------------------------

/// Polynomial in the radial variable r, coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct RPoly(pub Vec<f64>);

impl RPoly {
    pub fn constant(c: f64) -> Self {
        RPoly(vec![c])
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    pub fn deriv(&self) -> RPoly {
        if self.0.len() <= 1 {
            return RPoly(vec![]);
        }
        RPoly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| (i as f64 + 1.0) * c)
                .collect(),
        )
    }

    fn add_scaled(&mut self, other: &RPoly, s: f64) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (i, c) in other.0.iter().enumerate() {
            self.0[i] += s * c;
        }
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

/// A form on the structure frame with `RPoly` coefficients. Frame indices:
/// 1 = dr, 2..4 = e^1..e^3, 5..7 = f^1..f^3.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureForm {
    pub degree: usize,
    pub coeffs: BTreeMap<u8, RPoly>,
}

pub const FRAME_DR: usize = 1;

impl StructureForm {
    pub fn zero(degree: usize) -> Self {
        StructureForm {
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn monomial(indices: &[usize], p: RPoly) -> Self {
        let mut mask = 0u8;
        for &i in indices {
            assert!((1..=7).contains(&i));
            assert!(mask & (1 << (i - 1)) == 0);
            mask |= 1 << (i - 1);
        }
        let mut f = StructureForm::zero(indices.len());
        if !p.is_zero() {
            f.coeffs.insert(mask, p);
        }
        f
    }

    pub fn from_kform(k: &KForm) -> Self {
        assert_eq!(k.dim, 7);
        let mut f = StructureForm::zero(k.degree);
        for (m, c) in k.terms() {
            f.coeffs.insert(m, RPoly::constant(c));
        }
        f
    }

    pub fn add_term(&mut self, mask: u8, p: &RPoly, s: f64) {
        let e = self.coeffs.entry(mask).or_insert_with(|| RPoly(vec![]));
        e.add_scaled(p, s);
        if e.is_zero() {
            self.coeffs.remove(&mask);
        }
    }

    pub fn add(&self, other: &StructureForm) -> StructureForm {
        assert_eq!(self.degree, other.degree);
        let mut f = self.clone();
        for (m, p) in &other.coeffs {
            f.add_term(*m, p, 1.0);
        }
        f
    }

    pub fn scale(&self, s: f64) -> StructureForm {
        let mut f = StructureForm::zero(self.degree);
        for (m, p) in &self.coeffs {
            f.add_term(*m, p, s);
        }
        f
    }

    pub fn wedge(&self, other: &StructureForm) -> StructureForm {
        let deg = self.degree + other.degree;
        if deg > 7 {
            return StructureForm::zero(7);
        }
        let mut f = StructureForm::zero(deg);
        for (&ma, pa) in &self.coeffs {
            for (&mb, pb) in &other.coeffs {
                if ma & mb != 0 {
                    continue;
                }
                let mut prod = RPoly(vec![0.0; pa.0.len() + pb.0.len()]);
                for (i, ca) in pa.0.iter().enumerate() {
                    for (j, cb) in pb.0.iter().enumerate() {
                        prod.0[i + j] += ca * cb;
                    }
                }
                f.add_term(ma | mb, &prod, merge_sign(ma, mb));
            }
        }
        f
    }

    /// Evaluate the coefficients at a given r, producing a numeric `KForm`.
    pub fn at(&self, r: f64) -> KForm {
        let mut f = KForm::zero(7, self.degree);
        for (&m, p) in &self.coeffs {
            f.add_term(m, p.eval(r));
        }
        f
    }

    pub fn max_abs_at(&self, r: f64) -> f64 {
        self.at(r).max_abs()
    }
}

/// d of a single frame covector: d(dr) = 0, de^i = 2 e^{jk}, df^i = 2 f^{jk}.
fn d_basis(index1: usize) -> StructureForm {
    match index1 {
        1 => StructureForm::zero(2),
        2..=4 => {
            let i = index1 - 2; // 0-based within the e-triple
            let j = 2 + (i + 1) % 3;
            let k = 2 + (i + 2) % 3;
            StructureForm::monomial(&[j.min(k), j.max(k)], RPoly::constant(if j < k { 2.0 } else { -2.0 }))
        }
        5..=7 => {
            let i = index1 - 5;
            let j = 5 + (i + 1) % 3;
            let k = 5 + (i + 2) % 3;
            StructureForm::monomial(&[j.min(k), j.max(k)], RPoly::constant(if j < k { 2.0 } else { -2.0 }))
        }
        _ => panic!("unsupported frame index"),
    }
}

/// Exterior derivative over the structure frame: structure constants plus
/// d(coefficient) ^ form, where coefficients depend on r only (frame index 1).
pub fn coframe_d(a: &StructureForm) -> StructureForm {
    let mut out = StructureForm::zero(a.degree + 1);
    for (&m, p) in &a.coeffs {
        // dc/dr dr ^ e^I
        let dp = p.deriv();
        if !dp.is_zero() && m & 1 == 0 {
            let sgn = merge_sign(1, m);
            out.add_term(1 | m, &dp, sgn);
        }
        // c * d(e^I) = c * sum_a (-1)^{a-1} d(e^{i_a}) ^ e^{I \ i_a}
        let idx = mask_indices(m);
        for (a_pos, &i0) in idx.iter().enumerate() {
            let dei = d_basis(i0 + 1);
            if dei.coeffs.is_empty() {
                continue;
            }
            let rest_mask = m & !(1u8 << i0);
            let sign_a = if a_pos % 2 == 0 { 1.0 } else { -1.0 };
            for (&md, pd) in &dei.coeffs {
                if md & rest_mask != 0 {
                    continue;
                }
                let mut prod = RPoly(vec![0.0; p.0.len() + pd.0.len()]);
                for (i, ca) in p.0.iter().enumerate() {
                    for (j, cb) in pd.0.iter().enumerate() {
                        prod.0[i + j] += ca * cb;
                    }
                }
                out.add_term(md | rest_mask, &prod, sign_a * merge_sign(md, rest_mask));
            }
        }
    }
    out
}
