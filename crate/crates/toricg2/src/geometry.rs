//! Finite-difference Riemannian geometry of the ansatz metric on T^3 x U:
//! Christoffel symbols, curvature endomorphisms, Ricci, and the rank of the span
//! of the curvature operators (a lower bound for the holonomy algebra, equal to
//! 14 = dim g2 at generic points of an irreducible torsion-free structure).

use crate::ansatz::{metric_sample, AnsatzError, ConnectionPotential, MetricSample, VField};
use crate::forms::KForm;
use crate::g2::derivation_action;
use nalgebra::DMatrix;
use std::sync::Arc;

pub type Mat7 = MetricSample;

/// Samples the coordinate metric at points of T^3 x U. Coordinates are ordered
/// (t1, t2, t3, nu1, nu2, nu3, mu); the metric never depends on the first three.
#[derive(Clone)]
pub struct MetricSampler {
    f: Arc<dyn Fn(&[f64; 7]) -> Result<Mat7, AnsatzError> + Send + Sync>,
    /// Directions along which the metric is constant (skipped in differencing).
    pub invariant_dirs: [bool; 7],
}

impl MetricSampler {
    pub fn from_vfield(v: &VField, a: &ConnectionPotential) -> Self {
        let v = v.clone();
        let a = a.clone();
        MetricSampler {
            f: Arc::new(move |x: &[f64; 7]| {
                metric_sample(&v, &a, &[x[3], x[4], x[5], x[6]])
            }),
            invariant_dirs: [true, true, true, false, false, false, false],
        }
    }

    pub fn new(
        f: impl Fn(&[f64; 7]) -> Result<Mat7, AnsatzError> + Send + Sync + 'static,
        invariant_dirs: [bool; 7],
    ) -> Self {
        MetricSampler {
            f: Arc::new(f),
            invariant_dirs,
        }
    }

    pub fn at(&self, x: &[f64; 7]) -> Result<Mat7, AnsatzError> {
        (self.f)(x)
    }
}

/// Central difference with one step of Richardson extrapolation (ratio 2):
/// D = (4 D_{h/2} - D_h) / 3, eliminating the O(h^2) error term.
fn richardson_d1<E>(
    mut eval: impl FnMut(f64) -> Result<Mat7, E>,
    h: f64,
) -> Result<Mat7, E> {
    let central = |e: &mut dyn FnMut(f64) -> Result<Mat7, E>, s: f64| -> Result<Mat7, E> {
        Ok((e(s)? - e(-s)?) / (2.0 * s))
    };
    let dh = central(&mut eval, h)?;
    let dh2 = central(&mut eval, h * 0.5)?;
    Ok((dh2 * 4.0 - dh) / 3.0)
}

/// Christoffel symbols at x: `gamma[i][(k, j)]` = Gamma^k_{ij}.
pub struct Christoffel(pub [Mat7; 7]);

pub fn christoffel(
    s: &MetricSampler,
    x: &[f64; 7],
    h: f64,
) -> Result<Christoffel, AnsatzError> {
    let g = s.at(x)?;
    let ginv = g.try_inverse().ok_or(AnsatzError::NotPositiveDefinite([
        x[3], x[4], x[5], x[6],
    ]))?;
    let mut dg = [Mat7::zeros(); 7];
    for l in 0..7 {
        if s.invariant_dirs[l] {
            continue;
        }
        dg[l] = richardson_d1(
            |step: f64| {
                let mut y = *x;
                y[l] += step;
                s.at(&y)
            },
            h,
        )?;
    }
    let mut gamma = [Mat7::zeros(); 7];
    for i in 0..7 {
        for j in 0..7 {
            for k in 0..7 {
                let mut sum = 0.0;
                for l in 0..7 {
                    sum += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma[i][(k, j)] = 0.5 * sum;
            }
        }
    }
    Ok(Christoffel(gamma))
}

/// Curvature data at a point: the endomorphisms Omega_{ij} = R(e_i, e_j) with
/// the convention R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_{[X,Y]}Z
/// (coordinate frames commute, so the last term drops), the Ricci tensor
/// Ric_{jk} = sum_i (Omega_{ij})^i_k, and Frobenius norms of both.
pub struct CurvatureData {
    pub point: [f64; 7],
    pub g: Mat7,
    /// omega[i][j] = Omega_{ij} (antisymmetric in i, j).
    pub omega: Vec<Vec<Mat7>>,
    pub ricci: Mat7,
    pub norm_r: f64,
    pub norm_ricci: f64,
}

pub fn riemann(s: &MetricSampler, x: &[f64; 7], h: f64) -> Result<CurvatureData, AnsatzError> {
    let g = s.at(x)?;
    let gamma0 = christoffel(s, x, h)?;
    // dgamma[a][i] = d Gamma_i / d x_a (as the matrix (Gamma_i)^k_j).
    let mut dgamma: Vec<[Mat7; 7]> = vec![[Mat7::zeros(); 7]; 7];
    for a in 0..7 {
        if s.invariant_dirs[a] {
            continue;
        }
        for i in 0..7 {
            dgamma[a][i] = richardson_d1(
                |step: f64| {
                    let mut y = *x;
                    y[a] += step;
                    christoffel(s, &y, h).map(|c| c.0[i])
                },
                h,
            )?;
        }
    }
    let mut omega = vec![vec![Mat7::zeros(); 7]; 7];
    for i in 0..7 {
        for j in (i + 1)..7 {
            let o = dgamma[i][j] - dgamma[j][i] + gamma0.0[i] * gamma0.0[j]
                - gamma0.0[j] * gamma0.0[i];
            omega[i][j] = o;
            omega[j][i] = -o;
        }
    }
    let mut ricci = Mat7::zeros();
    for j in 0..7 {
        for k in 0..7 {
            let mut sum = 0.0;
            for i in 0..7 {
                sum += omega[i][j][(i, k)];
            }
            ricci[(j, k)] = sum;
        }
    }
    let mut norm_r = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            norm_r += omega[i][j].norm_squared();
        }
    }
    Ok(CurvatureData {
        point: *x,
        g,
        omega,
        ricci,
        norm_r: norm_r.sqrt(),
        norm_ricci: ricci.norm(),
    })
}

/// Rank of the span of the 21 curvature endomorphisms Omega_{ij} (i < j), as
/// elements of so(7) flattened to vectors, with the singular-value gap across
/// the cutoff. Returns (rank, gap); gap is infinite when the trailing singular
/// values vanish identically.
pub fn holonomy_span_rank(curv: &CurvatureData, rel_cutoff: f64) -> (usize, f64) {
    let mut rows = DMatrix::zeros(21, 49);
    let mut r = 0;
    for i in 0..7 {
        for j in (i + 1)..7 {
            // lower the first index so each operator is an honest 2-form
            let k = curv.g * curv.omega[i][j];
            for a in 0..7 {
                for b in 0..7 {
                    rows[(r, 7 * a + b)] = k[(a, b)];
                }
            }
            r += 1;
        }
    }
    let svd = rows.svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return (0, f64::INFINITY);
    }
    let cutoff = rel_cutoff * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let gap = if rank == 0 || rank >= svd.singular_values.len() {
        f64::INFINITY
    } else {
        let below = svd.singular_values[rank];
        if below == 0.0 {
            f64::INFINITY
        } else {
            svd.singular_values[rank - 1] / below
        }
    };
    (rank, gap)
}

/// Maximal relative defect of the curvature endomorphisms as derivations of phi:
/// zero (up to differencing error) exactly when the curvature lies in g2.
pub fn curvature_in_g2(curv: &CurvatureData, phi: &KForm) -> f64 {
    let scale = curv
        .omega
        .iter()
        .flatten()
        .fold(0.0f64, |acc, m| acc.max(m.amax()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..7 {
        for j in (i + 1)..7 {
            let a = DMatrix::from_fn(7, 7, |p, q| curv.omega[i][j][(p, q)]);
            worst = worst.max(derivation_action(&a, phi).max_abs());
        }
    }
    worst / scale
}
