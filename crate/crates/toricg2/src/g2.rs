//! Pointwise G2 algebra: the canonical three- and four-forms, the induced cross
//! product, and membership in the 14-dimensional stabilizer algebra inside so(7).

use crate::forms::{contract, metric_from_three_form, wedge, FormsError, FrameMetric, KForm};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum G2Error {
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error("matrix is not skew-adjoint with respect to the metric (defect {0:.3e})")]
    NotSkew(f64),
    #[error("derivation action has unexpected nullity {0} (want 14); malformed three-form?")]
    BadNullity(usize),
}

/// The canonical G2 three-form
/// phi0 = e^{123} - e^1(e^{45}+e^{67}) - e^2(e^{46}+e^{75}) - e^3(e^{47}+e^{56}).
pub fn phi0() -> KForm {
    let mut f = KForm::zero(7, 3);
    for (idx, c) in [
        ([1usize, 2, 3], 1.0),
        ([1, 4, 5], -1.0),
        ([1, 6, 7], -1.0),
        ([2, 4, 6], -1.0),
        ([2, 7, 5], -1.0),
        ([3, 4, 7], -1.0),
        ([3, 5, 6], -1.0),
    ] {
        f = f.add(&{
            let mut t = KForm::zero(7, 3);
            // normalize index order through coeff-style sign handling
            let mut v = idx;
            let mut sign = 1.0;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if v[i] > v[j] {
                        v.swap(i, j);
                        sign = -sign;
                    }
                }
            }
            t = t.add(&KForm::monomial(7, &v, sign * c));
            t
        });
    }
    f
}

/// The dual four-form
/// *phi0 = e^{4567} - e^{23}(e^{45}+e^{67}) - e^{31}(e^{46}+e^{75}) - e^{12}(e^{47}+e^{56}).
pub fn star_phi0() -> KForm {
    let mut f = KForm::zero(7, 4);
    for (idx, c) in [
        ([4usize, 5, 6, 7], 1.0),
        ([2, 3, 4, 5], -1.0),
        ([2, 3, 6, 7], -1.0),
        ([3, 1, 4, 6], -1.0),
        ([3, 1, 7, 5], -1.0),
        ([1, 2, 4, 7], -1.0),
        ([1, 2, 5, 6], -1.0),
    ] {
        let mut v = idx;
        let mut sign = 1.0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                if v[i] > v[j] {
                    v.swap(i, j);
                    sign = -sign;
                }
            }
        }
        f = f.add(&KForm::monomial(7, &v, sign * c));
    }
    f
}

/// A point of G2 data: a definite three-form with its recovered metric and volume.
#[derive(Debug, Clone)]
pub struct G2Point {
    pub phi: KForm,
    pub g: FrameMetric,
    pub vol: KForm,
}

impl G2Point {
    pub fn from_phi(phi: KForm) -> Result<Self, G2Error> {
        let (g, vol) = metric_from_three_form(&phi)?;
        Ok(G2Point { phi, g, vol })
    }

    pub fn standard() -> Self {
        G2Point::from_phi(phi0()).expect("phi0 is a G2 form")
    }
}

/// Cross product: the unique vector with g(X x Y, Z) = phi(X, Y, Z) for all Z.
pub fn cross(x: &[f64], y: &[f64], at: &G2Point) -> Result<Vec<f64>, G2Error> {
    let one_form = contract(y, &contract(x, &at.phi)?)?;
    // Raise the index: solve g v = w where w_i = phi(X, Y, E_i).
    let w = DVector::from_fn(7, |i, _| one_form.coeff(&[i + 1]));
    let v = at
        .g
        .components
        .clone()
        .lu()
        .solve(&w)
        .ok_or(FormsError::DegenerateMetric)?;
    Ok(v.iter().copied().collect())
}

/// Three-form measuring the derivation action of an endomorphism A on phi:
/// rho(X,Y,Z) = phi(AX,Y,Z) + phi(X,AY,Z) + phi(X,Y,AZ).
pub fn derivation_action(a: &DMatrix<f64>, phi: &KForm) -> KForm {
    let mut rho = KForm::zero(7, 3);
    // rho = sum_i eta^i ^ (E_i -| phi) with eta^i = e^i o A = sum_m A_{i m} e^m.
    for i in 0..7 {
        let mut x = [0.0; 7];
        x[i] = 1.0;
        let ci = contract(&x, phi).expect("degree 3 contraction");
        for j in 0..7 {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            let ej = KForm::monomial(7, &[j + 1], aij);
            rho = rho.add(&wedge(&ej, &ci).expect("same frame"));
        }
    }
    rho
}

fn skew_defect(a: &DMatrix<f64>, g: &FrameMetric) -> f64 {
    let m = a.transpose() * &g.components + &g.components * a;
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// True iff A (skew-adjoint w.r.t. at.g) annihilates phi as a derivation, up to tol.
pub fn in_g2(a: &DMatrix<f64>, at: &G2Point, tol: f64) -> Result<bool, G2Error> {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    let defect = skew_defect(a, &at.g);
    if defect > 1e-8 * scale {
        return Err(G2Error::NotSkew(defect));
    }
    Ok(derivation_action(a, &at.phi).max_abs() <= tol * scale)
}

/// Basis of the stabilizer algebra: the 14-dimensional nullspace of the
/// derivation action restricted to g-skew endomorphisms.
pub fn g2_basis(at: &G2Point) -> Result<Vec<DMatrix<f64>>, G2Error> {
    // Parametrize g-skew endomorphisms as A = g^{-1} K with K antisymmetric.
    let ginv = at
        .g
        .components
        .clone()
        .try_inverse()
        .ok_or(FormsError::DegenerateMetric)?;
    let mut params = Vec::with_capacity(21);
    for i in 0..7 {
        for j in (i + 1)..7 {
            let mut k = DMatrix::zeros(7, 7);
            k[(i, j)] = 1.0;
            k[(j, i)] = -1.0;
            params.push(&ginv * k);
        }
    }
    // Columns: flattened derivation-action three-forms over all 35 index triples.
    let mut masks = Vec::new();
    for m in 0u16..(1u16 << 7) {
        if (m as u8).count_ones() == 3 {
            masks.push(m as u8);
        }
    }
    let mut mat = DMatrix::zeros(masks.len(), params.len());
    for (c, a) in params.iter().enumerate() {
        let rho = derivation_action(a, &at.phi);
        for (r, &m) in masks.iter().enumerate() {
            mat[(r, c)] = rho.coeff_mask(m);
        }
    }
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-9 * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let nullity = params.len() - rank;
    if nullity != 14 {
        return Err(G2Error::BadNullity(nullity));
    }
    let vt = svd.v_t.expect("requested");
    let mut basis = Vec::with_capacity(14);
    for r in rank..params.len() {
        let mut a = DMatrix::zeros(7, 7);
        for (c, p) in params.iter().enumerate() {
            a += p * vt[(r, c)];
        }
        basis.push(a);
    }
    Ok(basis)
}
