//! Gauss-Legendre quadrature, Legendre functions of the first and second
//! kind, endpoint-clustered parameter maps, and a small polynomial root
//! finder.  These are the building blocks of the Cauchy-kernel collocation
//! in [`crate::cauchy`].

use crate::{c64, C64};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn rule_cache() -> &'static Mutex<HashMap<usize, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached n-point Gauss-Legendre rule.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    assert!(n >= 1, "quadrature rule needs at least one node");
    let mut cache = rule_cache().lock().unwrap();
    if let Some(r) = cache.get(&n) {
        return Arc::clone(r);
    }
    let r = Arc::new(build_gauss_legendre(n));
    cache.insert(n, Arc::clone(&r));
    r
}

/// Value and derivative of the Legendre polynomial P_n at x.
pub fn legendre_p_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut pm, mut p) = (1.0f64, x);
    for k in 1..n {
        let kf = k as f64;
        let pn = ((2.0 * kf + 1.0) * x * p - kf * pm) / (kf + 1.0);
        pm = p;
        p = pn;
    }
    // derivative from the standard relation (1-x^2) P_n' = n (P_{n-1} - x P_n)
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (pm - x * p) / (1.0 - x * x)
    } else {
        0.0
    };
    (p, dp)
}

fn build_gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_p_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_p_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_p_pair(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    GaussRule { nodes, weights }
}

/// P_0..P_kmax at real x.
pub fn legendre_p_row(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax == 0 {
        return out;
    }
    out.push(x);
    for k in 1..kmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// P_0..P_kmax at complex u.
pub fn legendre_p_row_complex(kmax: usize, u: C64) -> Vec<C64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(c64(1.0, 0.0));
    if kmax == 0 {
        return out;
    }
    out.push(u);
    for k in 1..kmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * u * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Side of a boundary-value limit onto (-1, 1), in the parameter plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImSide {
    /// Limit from Im u > 0.
    Upper,
    /// Limit from Im u < 0.
    Lower,
}

/// Bernstein-ellipse radius of u relative to [-1, 1]: |u + sqrt(u^2-1)|
/// with the branch that makes the modulus >= 1.
pub fn bernstein_radius(u: C64) -> f64 {
    let s = (u * u - c64(1.0, 0.0)).sqrt();
    (u + s).norm().max((u - s).norm())
}

/// Q_0..Q_kmax at complex u off [-1, 1].
///
/// Forward recurrence is used when the growth of the dominant solution over
/// kmax steps stays small; otherwise Miller's backward recurrence with a
/// buffer, normalized by the closed-form Q_0.
pub fn legendre_q_row_complex(kmax: usize, u: C64) -> Vec<C64> {
    let one = c64(1.0, 0.0);
    let q0 = 0.5 * ((u + one) / (u - one)).ln();
    if kmax == 0 {
        return vec![q0];
    }
    let rho = bernstein_radius(u);
    let growth = rho.powi(kmax as i32);
    if growth < 1e4 {
        // forward recurrence, stable here
        let mut out = Vec::with_capacity(kmax + 1);
        out.push(q0);
        out.push(u * q0 - one);
        for k in 1..kmax {
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0) * u * out[k] - kf * out[k - 1]) / (kf + 1.0);
            out.push(next);
        }
        out
    } else {
        // Miller backward recurrence: Q is the minimal solution away from the
        // segment, so downward recursion purges the P contamination at rate
        // rho^2 per step.
        let buffer = ((46.0 / rho.ln()).ceil() as usize).clamp(8, 4096);
        let top = kmax + buffer;
        let mut q_above = c64(0.0, 0.0);
        let mut q_here = c64(1.0, 0.0);
        let mut out = vec![c64(0.0, 0.0); kmax + 1];
        for k in (1..=top).rev() {
            let kf = k as f64;
            // downward form of (k+1) Q_{k+1} = (2k+1) u Q_k - k Q_{k-1}
            let q_below = ((2.0 * kf + 1.0) * u * q_here - (kf + 1.0) * q_above) / kf;
            q_above = q_here;
            q_here = q_below;
            if k <= kmax + 1 {
                let idx = k - 1;
                out[idx] = q_here;
                if idx < kmax {
                    out[idx + 1] = q_above;
                }
            }
            // keep magnitudes in a range where complex division stays safe
            let mag = q_here.norm();
            if mag > 1e100 {
                let scale = c64(1e-100, 0.0);
                q_here *= scale;
                q_above *= scale;
                for e in out.iter_mut() {
                    *e *= scale;
                }
            }
        }
        let norm = q0 / out[0];
        for e in out.iter_mut() {
            *e *= norm;
        }
        out
    }
}

/// Q_0..Q_kmax boundary values Q_k(x +- i0) on (-1, 1):
/// Q_k(x +- i0) = Q_k(x) -+ i pi/2 P_k(x), with Q_k(x) the real principal
/// value branch.
pub fn legendre_q_row_sided(kmax: usize, x: f64, side: ImSide) -> Vec<C64> {
    debug_assert!(x > -1.0 && x < 1.0);
    let p = legendre_p_row(kmax, x);
    let mut q_real = Vec::with_capacity(kmax + 1);
    q_real.push(0.5 * ((1.0 + x) / (1.0 - x)).ln());
    if kmax >= 1 {
        q_real.push(x * q_real[0] - 1.0);
        for k in 1..kmax {
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0) * x * q_real[k] - kf * q_real[k - 1]) / (kf + 1.0);
            q_real.push(next);
        }
    }
    let s = match side {
        ImSide::Upper => -1.0,
        ImSide::Lower => 1.0,
    };
    q_real
        .iter()
        .zip(p.iter())
        .map(|(&q, &pk)| c64(q, s * PI / 2.0 * pk))
        .collect()
}

/// Polynomial map of [-1, 1] onto a complex segment with endpoint clustering.
///
/// The parameter density is (1+u)^(pl-1) (1-u)^(pr-1), so nodes cluster with
/// exponent `pl` at the start point and `pr` at the end point.  The map is a
/// polynomial, which keeps the Cauchy kernel's partial-fraction structure
/// exact after root finding.
#[derive(Debug, Clone)]
pub struct ClusterMap {
    pub a: C64,
    pub b: C64,
    pub pl: u32,
    pub pr: u32,
    /// g(u) coefficients, ascending powers; g(-1) = 0, g(1) = 1.
    pub g: Vec<f64>,
    /// g'(u) coefficients, ascending powers.
    pub dg: Vec<f64>,
}

impl ClusterMap {
    pub fn new(a: C64, b: C64, pl: u32, pr: u32) -> Self {
        assert!((1..=4).contains(&pl) && (1..=4).contains(&pr));
        // density (1+u)^(pl-1) (1-u)^(pr-1), expanded in ascending powers
        let mut dens = vec![0.0f64];
        dens[0] = 1.0;
        for _ in 0..pl - 1 {
            dens = poly_mul(&dens, &[1.0, 1.0]);
        }
        for _ in 0..pr - 1 {
            dens = poly_mul(&dens, &[1.0, -1.0]);
        }
        // antiderivative from -1
        let mut integ = vec![0.0; dens.len() + 1];
        for (k, &c) in dens.iter().enumerate() {
            integ[k + 1] = c / (k as f64 + 1.0);
        }
        let at = |p: &[f64], x: f64| p.iter().rev().fold(0.0, |acc, &c| acc * x + c);
        let lower = at(&integ, -1.0);
        integ[0] -= lower;
        let total = at(&integ, 1.0);
        let g: Vec<f64> = integ.iter().map(|c| c / total).collect();
        let dg: Vec<f64> = dens.iter().map(|c| c / total).collect();
        ClusterMap { a, b, pl, pr, g, dg }
    }

    /// Map value s(u) = a + (b-a) g(u).
    pub fn s(&self, u: f64) -> C64 {
        let g = eval_poly_real(&self.g, u);
        self.a + (self.b - self.a) * g
    }

    /// Map derivative s'(u) = (b-a) g'(u).
    pub fn ds(&self, u: f64) -> C64 {
        (self.b - self.a) * eval_poly_real(&self.dg, u)
    }

    /// Coefficients (ascending) of the polynomial s(u) - zeta.
    pub fn shifted_poly(&self, zeta: C64) -> Vec<C64> {
        let d = self.b - self.a;
        let mut out: Vec<C64> = self.g.iter().map(|&c| d * c).collect();
        out[0] += self.a - zeta;
        out
    }

    /// Map value at a complex parameter.
    pub fn s_c(&self, u: C64) -> C64 {
        self.a + (self.b - self.a) * eval_real_poly_c(&self.g, u)
    }

    /// Map derivative at a complex parameter.
    pub fn ds_c(&self, u: C64) -> C64 {
        (self.b - self.a) * eval_real_poly_c(&self.dg, u)
    }

    /// Degree of the map polynomial s(u).
    pub fn degree(&self) -> usize {
        self.g.len() - 1
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn eval_real_poly_c(p: &[f64], u: C64) -> C64 {
    p.iter().rev().fold(c64(0.0, 0.0), |acc, &c| acc * u + c)
}

pub fn eval_poly_real(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_poly_complex(p: &[C64], x: C64) -> C64 {
    p.iter().rev().fold(c64(0.0, 0.0), |acc, &c| acc * x + c)
}

/// All complex roots of a polynomial (ascending coefficients) by the
/// Weierstrass-Durand-Kerner iteration with a deterministic start.
///
/// Intended for the small (degree <= 8) maps used by the contour pieces;
/// clustered near-multiple roots converge linearly but remain accurate
/// enough for the kernel splitting, which only needs root locations to a
/// few ulps times the cluster conditioning.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    // strip trailing (leading-degree) zeros
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return vec![];
    }
    let lead = c[n];
    let monic: Vec<C64> = c.iter().map(|&a| a / lead).collect();
    // Cauchy bound for the start radius
    let bound = 1.0
        + monic[..n]
            .iter()
            .map(|a| a.norm())
            .fold(0.0f64, f64::max);
    let seed = c64(0.4, 0.9);
    let mut z: Vec<C64> = (0..n)
        .map(|k| bound * seed.powu(k as u32 + 1) / seed.norm().powi(k as i32))
        .collect();
    for _ in 0..400 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let p = eval_poly_complex(&monic, z[i]);
            let mut denom = c64(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // perturb coincident iterates
                z[i] += c64(1e-12, 1e-12);
                moved = f64::MAX;
                continue;
            }
            let dz = p / denom;
            z[i] -= dz;
            moved = moved.max(dz.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}
