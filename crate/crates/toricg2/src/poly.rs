//! Polynomials in the four base coordinates (nu1, nu2, nu3, mu), with graded
//! lexicographic monomial order for deterministic iteration and basis output.

use std::collections::BTreeMap;

pub const NVARS: usize = 4;
pub const VAR_NAMES: [&str; 4] = ["nu1", "nu2", "nu3", "mu"];

/// Monomial exponents, ordered by total degree then lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expo(pub [u8; 4]);

impl Expo {
    pub fn total(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }
}

impl Ord for Expo {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Expo {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<Expo, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Poly::zero();
        p.add_term([0; 4], c);
        p
    }

    /// The coordinate variable: 0..=2 are nu1..nu3, 3 is mu.
    pub fn var(i: usize) -> Self {
        assert!(i < NVARS);
        let mut e = [0u8; 4];
        e[i] = 1;
        Poly::monomial(e, 1.0)
    }

    pub fn monomial(exps: [u8; 4], c: f64) -> Self {
        let mut p = Poly::zero();
        p.add_term(exps, c);
        p
    }

    pub fn add_term(&mut self, exps: [u8; 4], c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(Expo(exps)).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&Expo(exps));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = ([u8; 4], f64)> + '_ {
        self.terms.iter().map(|(e, &c)| (e.0, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.total()).max().unwrap_or(0)
    }

    pub fn leading(&self) -> Option<([u8; 4], f64)> {
        self.terms.iter().next_back().map(|(e, &c)| (e.0, c))
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, c) in other.terms() {
            p.add_term(e, c);
        }
        p
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut p = Poly::zero();
        for (e, c) in self.terms() {
            p.add_term(e, c * s);
        }
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut p = Poly::zero();
        for (ea, ca) in self.terms() {
            for (eb, cb) in other.terms() {
                let mut e = [0u8; 4];
                for i in 0..4 {
                    e[i] = ea[i] + eb[i];
                }
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn partial(&self, var: usize) -> Poly {
        assert!(var < NVARS);
        let mut p = Poly::zero();
        for (e, c) in self.terms() {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e;
            e2[var] -= 1;
            p.add_term(e2, c * e[var] as f64);
        }
        p
    }

    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        let mut s = 0.0;
        for (e, c) in self.terms() {
            let mut t = c;
            for i in 0..4 {
                for _ in 0..e[i] {
                    t *= x[i];
                }
            }
            s += t;
        }
        s
    }

    /// Substitute x_i -> sum_j m[i][j] x_j (a linear change of coordinates).
    pub fn substitute_linear(&self, m: &[[f64; 4]; 4]) -> Poly {
        let images: Vec<Poly> = (0..4)
            .map(|i| {
                let mut p = Poly::zero();
                for j in 0..4 {
                    let mut e = [0u8; 4];
                    e[j] = 1;
                    p.add_term(e, m[i][j]);
                }
                p
            })
            .collect();
        self.substitute(&images)
    }

    /// Substitute x_i -> x_i + c_i.
    pub fn shift(&self, c: &[f64; 4]) -> Poly {
        let images: Vec<Poly> = (0..4)
            .map(|i| {
                let mut p = Poly::var(i);
                p.add_term([0; 4], c[i]);
                p
            })
            .collect();
        self.substitute(&images)
    }

    pub fn substitute(&self, images: &[Poly]) -> Poly {
        assert_eq!(images.len(), 4);
        let mut out = Poly::zero();
        for (e, c) in self.terms() {
            let mut t = Poly::constant(c);
            for i in 0..4 {
                for _ in 0..e[i] {
                    t = t.mul(&images[i]);
                }
            }
            out = out.add(&t);
        }
        out
    }
}
