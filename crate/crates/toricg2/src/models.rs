//! Explicit toric G2 models: the flat S^1 x C^3 and (T^2 x R) x C^2 structures
//! with their multi-moment maps and orbit-space inverses, the invariant-ring
//! relations cutting out the orbit spaces, the nearly Kahler S^3 x S^3 with the
//! cone and Bryant-Salamon structures over it, the Stenzel quadric, and the
//! trivalent graphs traced by the singular orbits.

use crate::forms::{
    coframe_d, contract, metric_from_three_form, FormsError, KForm, RPoly, StructureForm,
};
use nalgebra::{Complex, Matrix3};
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type Mat3 = Matrix3<f64>;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Error)]
pub enum ModelsError {
    #[error("quaternion is not unit length (|1 - |p|| = {0:.3e})")]
    NotUnit(f64),
    #[error("singular orbit: at least two coordinates vanish")]
    SingularOrbit,
    #[error("point is not on the complex quadric (defect {0:.3e})")]
    NotOnQuadric(f64),
    #[error("radius must be positive")]
    BadRadius,
    #[error("r^3 = eps: the closed-form inverse matrix is undefined there")]
    DegenerateRadius,
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error("graph invariant violated: {0}")]
    BadGraph(String),
}

// ---------------------------------------------------------------------------
// Quaternions.
// ---------------------------------------------------------------------------

/// Quaternion w + x i + y j + z k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const ONE: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quat = Quat::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quat = Quat::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quat = Quat::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn conj(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Quat {
        Quat::new(s * self.w, s * self.x, s * self.y, s * self.z)
    }

    pub fn normalize(self) -> Quat {
        self.scale(1.0 / self.norm())
    }

    /// exp of the imaginary quaternion (a1 i + a2 j + a3 k); a unit quaternion.
    pub fn exp_im(a: [f64; 3]) -> Quat {
        let t = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        if t == 0.0 {
            return Quat::ONE;
        }
        let s = t.sin() / t;
        Quat::new(t.cos(), s * a[0], s * a[1], s * a[2])
    }
}

/// Hopf coefficients of a unit quaternion: the components of the imaginary
/// quaternion conj(p) i p on the basis (i, j, k).
pub fn hopf(p: Quat) -> [f64; 3] {
    let h = p.conj().mul(Quat::I).mul(p);
    [h.x, h.y, h.z]
}

// ---------------------------------------------------------------------------
// Flat models.
// ---------------------------------------------------------------------------

/// Point of the flat model S^1 x C^3.
#[derive(Debug, Clone, Copy)]
pub struct FlatC3Point {
    pub x: f64,
    pub z: [C64; 3],
}

/// Point of the flat model (T^2 x R) x C^2.
#[derive(Debug, Clone, Copy)]
pub struct FlatT2RC2Point {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub z: C64,
    pub w: C64,
}

/// Multi-moment map of the flat S^1 x C^3 model, returned as (nu1, nu2, nu3, mu).
pub fn mmm_c3(pt: &FlatC3Point) -> [f64; 4] {
    let prod = pt.z[0] * pt.z[1] * pt.z[2];
    let nu1_imu = -prod.conj();
    [
        nu1_imu.re,
        0.5 * (pt.z[1].norm_sqr() - pt.z[2].norm_sqr()),
        -0.5 * (pt.z[0].norm_sqr() - pt.z[2].norm_sqr()),
        nu1_imu.im,
    ]
}

/// The Gram matrix B of the torus generators for the flat S^1 x C^3 model.
pub fn b_c3(pt: &FlatC3Point) -> Mat3 {
    let (m1, m2, m3) = (
        pt.z[0].norm_sqr(),
        pt.z[1].norm_sqr(),
        pt.z[2].norm_sqr(),
    );
    Mat3::new(1.0, 0.0, 0.0, 0.0, m1 + m3, m3, 0.0, m3, m2 + m3)
}

/// V = B^{-1} of the flat model in closed form.
pub fn v_c3(pt: &FlatC3Point) -> Result<Mat3, ModelsError> {
    let (m1, m2, m3) = (
        pt.z[0].norm_sqr(),
        pt.z[1].norm_sqr(),
        pt.z[2].norm_sqr(),
    );
    let a = m1 * m2 + m3 * m1 + m2 * m3;
    if a == 0.0 {
        return Err(ModelsError::SingularOrbit);
    }
    Ok(Mat3::new(
        1.0,
        0.0,
        0.0,
        0.0,
        (m2 + m3) / a,
        -m3 / a,
        0.0,
        -m3 / a,
        (m1 + m3) / a,
    ))
}

/// Orbit invariants recovered by inverting the multi-moment map.
#[derive(Debug, Clone, Copy)]
pub struct RhoOrbit {
    /// (|z1|^2, |z2|^2, |z3|^2)
    pub moduli: [f64; 3],
    /// z1 z2 z3
    pub product: C64,
}

/// Invert mmm_c3 on orbit invariants: solve t(t-a)(t-b) = c with a = 2 nu3,
/// b = -2 nu2, c = mu^2 + nu1^2 for the unique root t >= max{0, a, b} by
/// bisection-safeguarded Newton; the moduli are (t - 2 nu3, t + 2 nu2, t) and
/// z1 z2 z3 = i mu - nu1.
pub fn rho_inverse(nu: &[f64; 3], mu: f64) -> RhoOrbit {
    let a = 2.0 * nu[2];
    let b = -2.0 * nu[1];
    let c = mu * mu + nu[0] * nu[0];
    let x = 0.0f64.max(a).max(b);
    let f = |t: f64| t * (t - a) * (t - b) - c;
    let fp = |t: f64| (t - a) * (t - b) + t * (t - b) + t * (t - a);
    // degenerate orbits: the root sits exactly at the lower bracket end
    if f(x) >= 0.0 {
        return RhoOrbit {
            moduli: [x - a, x - b, x],
            product: C64::new(-nu[0], mu),
        };
    }
    // bracket: f(x) <= 0; grow the upper end until f >= 0
    let mut lo = x;
    let mut hi = x + 1.0f64.max(c.cbrt());
    while f(hi) < 0.0 {
        hi = x + 2.0 * (hi - x);
    }
    let mut t = hi;
    let scale = hi.abs().max(1.0);
    for _ in 0..200 {
        let ft = f(t);
        if ft > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let dft = fp(t);
        let mut next = if dft != 0.0 { t - ft / dft } else { 0.5 * (lo + hi) };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-12 * scale.max(t.abs()) {
            t = next;
            break;
        }
        t = next;
    }
    // polish: two unguarded Newton steps push the residual to roundoff, which
    // matters when one of the moduli t - a, t - b is tiny
    for _ in 0..2 {
        let dft = fp(t);
        if dft != 0.0 {
            t -= f(t) / dft;
        }
    }
    RhoOrbit {
        moduli: [t - a, t - b, t],
        product: C64::new(-nu[0], mu),
    }
}

/// A concrete point of S^1 x C^3 realizing the given orbit invariants.
pub fn rho_representative(orbit: &RhoOrbit) -> FlatC3Point {
    let m: [f64; 3] = orbit.moduli.map(|v| v.max(0.0));
    let z1 = C64::new(m[0].sqrt(), 0.0);
    let z2 = C64::new(m[1].sqrt(), 0.0);
    // |z3| comes from the modulus invariant; the phase from the product (z1 and
    // z2 are real positive). Dividing by z1 z2 instead would amplify the root
    // solve's roundoff when one modulus is tiny.
    let z3 = if orbit.product.norm() > 0.0 {
        C64::from_polar(m[2].sqrt(), orbit.product.arg())
    } else {
        C64::new(m[2].sqrt(), 0.0)
    };
    FlatC3Point {
        x: 0.0,
        z: [z1, z2, z3],
    }
}

/// Multi-moment map of the flat (T^2 x R) x C^2 model: mu = (|z|^2 - |w|^2)/2,
/// nu1 + i nu2 = zw, nu3 = u. Returned as (nu1, nu2, nu3, mu).
pub fn mmm_t2rc2(pt: &FlatT2RC2Point) -> [f64; 4] {
    let zw = pt.z * pt.w;
    [
        zw.re,
        zw.im,
        pt.u,
        0.5 * (pt.z.norm_sqr() - pt.w.norm_sqr()),
    ]
}

/// Residual of the 4d invariant-ring relation sigma1^2 + sigma2^2 + sigma3^2 =
/// sigma4^2 and the inequality slack sigma4 >= 0.
pub fn sigma_relations_4d(z: C64, w: C64) -> (f64, f64) {
    let s12 = z * w;
    let s3 = 0.5 * (z.norm_sqr() - w.norm_sqr());
    let s4 = 0.5 * (z.norm_sqr() + w.norm_sqr());
    (
        s12.re * s12.re + s12.im * s12.im + s3 * s3 - s4 * s4,
        s4,
    )
}

/// Residual of the 6d relation sigma1^2 + sigma2^2 = sigma5 (sigma5 + 2 sigma3)
/// (sigma5 - 2 sigma4) and the slack sigma5 - max{0, -2 sigma3, 2 sigma4}.
pub fn sigma_relations_6d(z1: C64, z2: C64, z3: C64) -> (f64, f64) {
    let s12 = -(z1 * z2 * z3).conj();
    let s3 = 0.5 * (z2.norm_sqr() - z3.norm_sqr());
    let s4 = 0.5 * (z3.norm_sqr() - z1.norm_sqr());
    let s5 = z3.norm_sqr();
    (
        s12.re * s12.re + s12.im * s12.im - s5 * (s5 + 2.0 * s3) * (s5 - 2.0 * s4),
        s5 - 0.0f64.max(-2.0 * s3).max(2.0 * s4),
    )
}

// ---------------------------------------------------------------------------
// Trivalent graphs in R^4.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GraphEdge {
    pub from: Option<usize>,
    pub to: Option<usize>,
    /// integral slope, pointing from `from` towards `to` when both exist
    pub slope: [i64; 4],
    pub ray: bool,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GraphR4 {
    pub vertices: Vec<[f64; 4]>,
    pub edges: Vec<GraphEdge>,
}

impl GraphR4 {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }

    /// Lemma-level invariants: every vertex trivalent with outgoing integral
    /// slopes summing to zero; finite edges collinear with their slope; every
    /// connected component contained in a single {mu = const} slice.
    pub fn check_invariants(&self) -> Result<(), ModelsError> {
        let n = self.vertices.len();
        let mut incid = vec![Vec::new(); n];
        for (e_idx, e) in self.edges.iter().enumerate() {
            if e.ray != (e.from.is_some() ^ e.to.is_some()) {
                return Err(ModelsError::BadGraph(format!(
                    "edge {e_idx}: ray flag disagrees with endpoints"
                )));
            }
            if let Some(v) = e.from {
                incid[v].push((e_idx, 1i64));
            }
            if let Some(v) = e.to {
                incid[v].push((e_idx, -1i64));
            }
            if e.slope[3] != 0 {
                return Err(ModelsError::BadGraph(format!(
                    "edge {e_idx}: slope leaves the mu = const slice"
                )));
            }
            if let (Some(a), Some(b)) = (e.from, e.to) {
                let d: Vec<f64> = (0..4)
                    .map(|c| self.vertices[b][c] - self.vertices[a][c])
                    .collect();
                // d must be a positive multiple of slope
                let sl: Vec<f64> = e.slope.iter().map(|&s| s as f64).collect();
                let slen: f64 = sl.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dlen: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if slen == 0.0 || dlen == 0.0 {
                    return Err(ModelsError::BadGraph(format!("edge {e_idx}: zero length")));
                }
                for c in 0..4 {
                    if (d[c] / dlen - sl[c] / slen).abs() > 1e-10 {
                        return Err(ModelsError::BadGraph(format!(
                            "edge {e_idx}: endpoints not collinear with slope"
                        )));
                    }
                }
            }
        }
        for (v, inc) in incid.iter().enumerate() {
            if inc.len() != 3 {
                return Err(ModelsError::BadGraph(format!(
                    "vertex {v} has valence {}",
                    inc.len()
                )));
            }
            let mut sum = [0i64; 4];
            for &(e_idx, orient) in inc {
                for c in 0..4 {
                    sum[c] += orient * self.edges[e_idx].slope[c];
                }
            }
            if sum != [0; 4] {
                return Err(ModelsError::BadGraph(format!(
                    "vertex {v}: outgoing slopes sum to {sum:?}"
                )));
            }
        }
        // component-wise mu-coplanarity (slopes already have zero mu part)
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        for e in &self.edges {
            if let (Some(a), Some(b)) = (e.from, e.to) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        for v in 0..n {
            let r = find(&mut parent, v);
            if (self.vertices[v][3] - self.vertices[r][3]).abs() > 1e-12 {
                return Err(ModelsError::BadGraph(format!(
                    "vertex {v} leaves its component's mu slice"
                )));
            }
        }
        Ok(())
    }
}

/// Graph of the flat S^1 x C^3 model: one trivalent vertex at the origin with
/// the images of the three coordinate axes as rays.
pub fn flat_graph_c3() -> GraphR4 {
    GraphR4 {
        vertices: vec![[0.0; 4]],
        edges: vec![
            GraphEdge {
                from: Some(0),
                to: None,
                slope: [0, 0, -1, 0],
                ray: true,
            },
            GraphEdge {
                from: Some(0),
                to: None,
                slope: [0, 1, 0, 0],
                ray: true,
            },
            GraphEdge {
                from: Some(0),
                to: None,
                slope: [0, -1, 1, 0],
                ray: true,
            },
        ],
    }
}

/// Graph of the flat (T^2 x R) x C^2 model: a single line in the nu3 direction.
pub fn flat_graph_t2rc2() -> GraphR4 {
    GraphR4 {
        vertices: vec![],
        edges: vec![GraphEdge {
            from: None,
            to: None,
            slope: [0, 0, 1, 0],
            ray: false,
        }],
    }
}

/// Graph of the Bryant-Salamon manifold: vertices at (0,0,+-k,0) with
/// k = 2 eps / (3 sqrt 3), four rays, and the finite segment joining the
/// vertices. The segment's integral slope is (0,0,2,0): the stabilizer circle
/// along it is generated by -u1 - u2, so the lattice length of the nu3 step is
/// doubled, which is exactly what makes the slopes at each vertex sum to zero.
pub fn bs_graph(eps: f64) -> GraphR4 {
    let k = 2.0 * eps / (3.0 * SQRT3);
    let ray = |from: usize, slope: [i64; 4]| GraphEdge {
        from: Some(from),
        to: None,
        slope,
        ray: true,
    };
    GraphR4 {
        vertices: vec![[0.0, 0.0, k, 0.0], [0.0, 0.0, -k, 0.0]],
        edges: vec![
            ray(0, [1, 1, 1, 0]),
            ray(0, [-1, -1, 1, 0]),
            ray(1, [1, -1, -1, 0]),
            ray(1, [-1, 1, -1, 0]),
            GraphEdge {
                from: Some(0),
                to: Some(1),
                slope: [0, 0, -2, 0],
                ray: false,
            },
        ],
    }
}

// ---------------------------------------------------------------------------
// Nearly Kahler S^3 x S^3, the cone, and Bryant-Salamon.
// ---------------------------------------------------------------------------

/// (r, (p, q), eps): a point of R_+ x S^3 x S^3 with the Bryant-Salamon
/// parameter (eps = 0 gives the cone).
#[derive(Debug, Clone, Copy)]
pub struct QuatPair {
    pub p: Quat,
    pub q: Quat,
    pub r: f64,
    pub eps: f64,
}

impl QuatPair {
    pub fn new(p: Quat, q: Quat, r: f64, eps: f64) -> Result<Self, ModelsError> {
        for u in [p, q] {
            let d = (u.norm() - 1.0).abs();
            if d > 1e-12 {
                return Err(ModelsError::NotUnit(d));
            }
        }
        if r <= 0.0 {
            return Err(ModelsError::BadRadius);
        }
        Ok(QuatPair { p, q, r, eps })
    }
}

/// sigma = (2/(3 sqrt 3)) sum e^i f^i on the frame (dr, e^1..e^3, f^1..f^3).
pub fn nk_sigma() -> StructureForm {
    let c = 2.0 / (3.0 * SQRT3);
    let mut f = StructureForm::zero(2);
    for i in 0..3 {
        f = f.add(&StructureForm::monomial(
            &[2 + i, 5 + i],
            RPoly::constant(c),
        ));
    }
    f
}

fn cyc3(i: usize) -> (usize, usize, usize) {
    (i, (i + 1) % 3, (i + 2) % 3)
}

/// psi = (4/(9 sqrt 3)) (e^{23} f^1 + e^{31} f^2 + e^{12} f^3 - e^1 f^{23} - ...).
pub fn nk_psi() -> StructureForm {
    let c = 4.0 / (9.0 * SQRT3);
    let mut f = StructureForm::zero(3);
    for i in 0..3 {
        let (_, j, k) = cyc3(i);
        // e^{jk} ^ f^i, indices already sorted when j < k; track the sign.
        let sgn = if j < k { 1.0 } else { -1.0 };
        let (lo, hi) = (j.min(k), j.max(k));
        f = f.add(&StructureForm::monomial(
            &[2 + lo, 2 + hi, 5 + i],
            RPoly::constant(sgn * c),
        ));
        f = f.add(&StructureForm::monomial(
            &[2 + i, 5 + lo, 5 + hi],
            RPoly::constant(-sgn * c),
        ));
    }
    f
}

/// psi-hat = (4/27)(-2 e^{123} - 2 f^{123} + e^1 f^{23} + ... + e^{23} f^1 + ...).
pub fn nk_psi_hat() -> StructureForm {
    let c = 4.0 / 27.0;
    let mut f = StructureForm::monomial(&[2, 3, 4], RPoly::constant(-2.0 * c));
    f = f.add(&StructureForm::monomial(&[5, 6, 7], RPoly::constant(-2.0 * c)));
    for i in 0..3 {
        let (_, j, k) = cyc3(i);
        let sgn = if j < k { 1.0 } else { -1.0 };
        let (lo, hi) = (j.min(k), j.max(k));
        f = f.add(&StructureForm::monomial(
            &[2 + i, 5 + lo, 5 + hi],
            RPoly::constant(sgn * c),
        ));
        f = f.add(&StructureForm::monomial(
            &[2 + lo, 2 + hi, 5 + i],
            RPoly::constant(sgn * c),
        ));
    }
    f
}

/// Frame components of the torus generators at (p, q) on the 7-frame
/// (d/dr, E_1..E_3, F_1..F_3).
pub fn u_fields(p: Quat, q: Quat) -> [[f64; 7]; 3] {
    let hp = hopf(p);
    let hq = hopf(q);
    [
        [0.0, hp[0], hp[1], -hp[2], 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, hq[0], hq[1], -hq[2]],
        [0.0, -1.0, 0.0, 0.0, -1.0, 0.0, 0.0],
    ]
}

/// Nearly Kahler multi-moment maps on S^3 x S^3: nu-tilde_i = sigma(U_j, U_k)/3
/// and mu-tilde = psi-hat(U_1, U_2, U_3)/2, evaluated by frame contraction.
pub fn nk_mmm_tilde(p: Quat, q: Quat) -> ([f64; 3], f64) {
    let sigma = nk_sigma().at(1.0);
    let psihat = nk_psi_hat().at(1.0);
    let u = u_fields(p, q);
    let pair = |a: usize, b: usize| -> f64 {
        contract(&u[b], &contract(&u[a], &sigma).expect("deg 2"))
            .expect("deg 1")
            .coeff_mask(0)
    };
    let nu = [pair(1, 2) / 3.0, pair(2, 0) / 3.0, pair(0, 1) / 3.0];
    let mu = contract(
        &u[2],
        &contract(&u[1], &contract(&u[0], &psihat).expect("deg 3")).expect("deg 2"),
    )
    .expect("deg 1")
    .coeff_mask(0)
        / 2.0;
    (nu, mu)
}

/// phi of the cone over nearly Kahler S^3 x S^3: d(r^3 sigma / 3).
pub fn phi_cone() -> StructureForm {
    let sigma3 = scale_rpoly(&nk_sigma(), &RPoly(vec![0.0, 0.0, 0.0, 1.0 / 3.0]));
    coframe_d(&sigma3)
}

/// *phi of the cone: r^3 psi-hat ^ dr + r^4 sigma^2 / 2.
pub fn star_phi_cone() -> StructureForm {
    let dr = StructureForm::monomial(&[1], RPoly::constant(1.0));
    let a = scale_rpoly(&nk_psi_hat(), &RPoly(vec![0.0, 0.0, 0.0, 1.0])).wedge(&dr);
    let s = nk_sigma();
    let b = scale_rpoly(&s.wedge(&s), &RPoly(vec![0.0, 0.0, 0.0, 0.0, 0.5]));
    a.add(&b)
}

fn scale_rpoly(f: &StructureForm, p: &RPoly) -> StructureForm {
    let mut out = StructureForm::zero(f.degree);
    for (&m, c) in &f.coeffs {
        let mut prod = RPoly(vec![0.0; c.0.len() + p.0.len()]);
        for (i, ca) in c.0.iter().enumerate() {
            for (j, cb) in p.0.iter().enumerate() {
                prod.0[i + j] += ca * cb;
            }
        }
        out.add_term(m, &prod, 1.0);
    }
    out
}

/// phi of the Bryant-Salamon structure:
/// -(4/(3 sqrt 3)) eps (e^{123} - f^{123}) + d((r^3 - eps) sigma / 3).
pub fn phi_bs(eps: f64) -> StructureForm {
    let c = -4.0 * eps / (3.0 * SQRT3);
    let mut f = StructureForm::monomial(&[2, 3, 4], RPoly::constant(c));
    f = f.add(&StructureForm::monomial(&[5, 6, 7], RPoly::constant(-c)));
    let inner = scale_rpoly(
        &nk_sigma(),
        &RPoly(vec![-eps / 3.0, 0.0, 0.0, 1.0 / 3.0]),
    );
    f.add(&coframe_d(&inner))
}

/// *phi of the Bryant-Salamon structure:
/// (4/9) eps dr ^ (e^{123} + f^{123}) + (r^3 - eps) psi-hat ^ dr
/// + r (r^3 - 4 eps) sigma^2 / 2.
pub fn star_phi_bs(eps: f64) -> StructureForm {
    let c = 4.0 * eps / 9.0;
    let mut f = StructureForm::monomial(&[1, 2, 3, 4], RPoly::constant(c));
    f = f.add(&StructureForm::monomial(&[1, 5, 6, 7], RPoly::constant(c)));
    let dr = StructureForm::monomial(&[1], RPoly::constant(1.0));
    f = f.add(&scale_rpoly(&nk_psi_hat(), &RPoly(vec![-eps, 0.0, 0.0, 1.0])).wedge(&dr));
    let s = nk_sigma();
    f.add(&scale_rpoly(
        &s.wedge(&s),
        &RPoly(vec![0.0, -2.0 * eps, 0.0, 0.0, 0.5]),
    ))
}

/// Multi-moment maps of the cone, (nu1, nu2, nu3, mu).
pub fn cone_mmm(pt: &QuatPair) -> [f64; 4] {
    bs_values(pt.r, pt.p, pt.q, 0.0)
}

/// Multi-moment maps of the Bryant-Salamon manifold, (nu1, nu2, nu3, mu).
pub fn bs_mmm(pt: &QuatPair) -> [f64; 4] {
    bs_values(pt.r, pt.p, pt.q, pt.eps)
}

fn bs_values(r: f64, p: Quat, q: Quat, eps: f64) -> [f64; 4] {
    let hp = hopf(p);
    let hq = hopf(q);
    let r3 = r * r * r;
    let c = 2.0 / (9.0 * SQRT3);
    [
        c * (r3 - 4.0 * eps) * hq[0],
        c * (r3 - 4.0 * eps) * hp[0],
        c * (r3 - eps) * (hp[0] * hq[0] + hp[1] * hq[1] + hp[2] * hq[2]),
        (2.0 / 27.0) * r * (r3 - 4.0 * eps) * (hp[1] * hq[2] - hp[2] * hq[1]),
    ]
}

/// Closed-form inverse of V for Bryant-Salamon, evaluated via bs_mmm.
pub fn bs_vinv(pt: &QuatPair) -> Result<Mat3, ModelsError> {
    let r = pt.r;
    let r3 = r * r * r;
    if r3 == pt.eps {
        return Err(ModelsError::DegenerateRadius);
    }
    let nu = bs_mmm(pt);
    let d1 = 4.0 * (r3 - pt.eps) / (9.0 * r);
    let d3 = 4.0 * (r3 - 4.0 * pt.eps) / (9.0 * r);
    let s = SQRT3 / r;
    let a12 = -s * (2.0 * pt.eps + r3) / (r3 - pt.eps) * nu[2];
    let a13 = -s * nu[1];
    let a23 = -s * nu[0];
    Ok(Mat3::new(d1, a12, a13, a12, d1, a23, a13, a23, d3))
}

/// Gram matrix of the torus generators in the Bryant-Salamon metric, with the
/// metric recovered from phi_BS on the (dr, e, f) frame (never assumed
/// orthonormal).
pub fn bs_frame_b(pt: &QuatPair) -> Result<Mat3, ModelsError> {
    let phi = phi_bs(pt.eps).at(pt.r);
    let (g, _vol) = metric_from_three_form(&phi)?;
    let u = u_fields(pt.p, pt.q);
    let mut b = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for a in 0..7 {
                for c in 0..7 {
                    s += u[i][a] * g.components[(a, c)] * u[j][c];
                }
            }
            b[(i, j)] = s;
        }
    }
    Ok(b)
}

/// A tangent direction at (r, (p, q)): radial speed plus imaginary-quaternion
/// velocities for right-translation curves on each sphere factor.
#[derive(Debug, Clone, Copy)]
pub struct BsDirection {
    pub dr: f64,
    pub dp: [f64; 3],
    pub dq: [f64; 3],
}

/// Check d nu_i = (U_j wedge U_k) -| phi and d mu = (U_1 wedge U_2 wedge U_3) -| *phi
/// for the Bryant-Salamon structure: central-difference derivative of bs_mmm
/// along the curve through pt with velocity dir, against frame contraction.
/// Returns the max absolute difference over the four multi-moment components.
pub fn bs_mmm_differential_check(pt: &QuatPair, dir: &BsDirection) -> f64 {
    let h = 1e-5;
    let curve = |s: f64| {
        bs_values(
            pt.r + s * dir.dr,
            pt.p.mul(Quat::exp_im([s * dir.dp[0], s * dir.dp[1], s * dir.dp[2]])),
            pt.q.mul(Quat::exp_im([s * dir.dq[0], s * dir.dq[1], s * dir.dq[2]])),
            pt.eps,
        )
    };
    let (fp, fm) = (curve(h), curve(-h));
    let (fp2, fm2) = (curve(0.5 * h), curve(-0.5 * h));
    let mut lhs = [0.0; 4];
    for c in 0..4 {
        let dh = (fp[c] - fm[c]) / (2.0 * h);
        let dh2 = (fp2[c] - fm2[c]) / h;
        lhs[c] = (4.0 * dh2 - dh) / 3.0;
    }

    // Velocity in the frame (d/dr, E, F): E_3 = (-pk, 0), so the k-component
    // enters with a flipped sign; same for F_3.
    let gamma = [
        dir.dr, dir.dp[0], dir.dp[1], -dir.dp[2], dir.dq[0], dir.dq[1], -dir.dq[2],
    ];
    let phi = phi_bs(pt.eps).at(pt.r);
    let sphi = star_phi_bs(pt.eps).at(pt.r);
    let u = u_fields(pt.p, pt.q);
    let tri = |a: &[f64; 7], b: &[f64; 7], form: &KForm| -> KForm {
        contract(b, &contract(a, form).expect("contract")).expect("contract")
    };
    let mut rhs = [0.0; 4];
    for i in 0..3 {
        let (_, j, k) = cyc3(i);
        rhs[i] = contract(&gamma, &tri(&u[j], &u[k], &phi))
            .expect("contract")
            .coeff_mask(0);
    }
    rhs[3] = contract(&gamma, &contract(&u[2], &tri(&u[0], &u[1], &sphi)).expect("contract"))
        .expect("contract")
        .coeff_mask(0);

    (0..4).fold(0.0f64, |acc, c| acc.max((lhs[c] - rhs[c]).abs()))
}

// ---------------------------------------------------------------------------
// The Stenzel quadric.
// ---------------------------------------------------------------------------

/// Multi-moment maps of S^1 x Q for the quadric Q = {sum z_j^2 = 1}:
/// nu1 + i mu = (conj(z0)^2 + conj(z1)^2)/2, nu2 = -f'(|z|^2) Im(z2 conj(z3)),
/// nu3 = f'(|z|^2) Im(z0 conj(z1)). The caller supplies f'(|z|^2) (for instance
/// from [`stenzel_f_u`]). Returned as (nu1, nu2, nu3, mu).
pub fn quadric_mmm(z: &[C64; 4], f_prime: f64) -> Result<[f64; 4], ModelsError> {
    let defect = (z.iter().map(|v| v * v).sum::<C64>() - C64::new(1.0, 0.0)).norm();
    if defect > 1e-10 {
        return Err(ModelsError::NotOnQuadric(defect));
    }
    let nu1_imu = 0.5 * (z[0].conj() * z[0].conj() + z[1].conj() * z[1].conj());
    Ok([
        nu1_imu.re,
        -f_prime * (z[2] * z[3].conj()).im,
        f_prime * (z[0] * z[1].conj()).im,
        nu1_imu.im,
    ])
}

/// f_u for the Stenzel potential, from the exact first integral of
/// ((f_u)^3)_u = 3 k sinh^2 u with f_u(0) = 0:
/// (f_u)^3 = (3k/2)(sinh u cosh u - u).
pub fn stenzel_f_u(u: f64, k: f64) -> f64 {
    (1.5 * k * (u.sinh() * u.cosh() - u)).cbrt()
}
