//! Spectral-line broadening profiles and their Cauchy-type transforms.
//!
//! A profile is a nonnegative unit-mass density n over the detuning axis,
//! supported on [-L, L] (compact variants) or decaying at infinity.  The
//! pipeline consumes it only through a handful of integral transforms:
//!
//! * the Cauchy transform C(z) = int n(s)/(s - z) ds and its derivative,
//! * the sided boundary values on the support,
//! * the phase-kernel moments int n(s)/((s-l)^2 + v^2) ds and the two
//!   moments that build int n(s)/(s - z)^2 ds.
//!
//! Compact profiles are represented by Legendre coefficients of n(L u) on
//! [-1, 1]; the transforms then reduce to evaluations of Legendre functions
//! of the second kind, which makes the boundary-value jump of the transform
//! exactly (pi i / 2) n by construction.  Unbounded profiles use windowed
//! subtraction quadrature instead.

use crate::error::{Error, Result};
use crate::quad::{
    gauss_legendre, legendre_p_row, legendre_q_row_complex, legendre_q_row_sided, ImSide,
};
use crate::{c64, C64};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Mass mismatch tolerated before `make_profile` rejects (or rescales).
pub const MASS_TOL: f64 = 1e-8;
/// Endpoint values above this fraction of the peak are rejected for
/// table and user-supplied profiles.
pub const ENDPOINT_TOL: f64 = 1e-6;

#[derive(Clone)]
pub enum BroadeningProfile {
    /// Uniform density 1/(2L) on [-L, L].  The closed-form transform case;
    /// exempt from the endpoint-vanishing requirement.
    Box { lambda: f64 },
    /// (1 + cos(pi s / L)) / (2 L) on [-L, L].
    RaisedCosine { lambda: f64 },
    /// Piecewise-linear interpolation of (s, n(s)) samples on [-L, L].
    Table {
        lambda: f64,
        samples: Vec<(f64, f64)>,
    },
    /// Smooth density on the whole axis, negligible beyond |s| > width.
    Unbounded {
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        width: f64,
    },
}

impl fmt::Debug for BroadeningProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BroadeningProfile::Box { lambda } => write!(f, "Box {{ lambda: {lambda} }}"),
            BroadeningProfile::RaisedCosine { lambda } => {
                write!(f, "RaisedCosine {{ lambda: {lambda} }}")
            }
            BroadeningProfile::Table { lambda, samples } => {
                write!(f, "Table {{ lambda: {lambda}, samples: {} }}", samples.len())
            }
            BroadeningProfile::Unbounded { width, .. } => {
                write!(f, "Unbounded {{ width: {width} }}")
            }
        }
    }
}

impl BroadeningProfile {
    /// Uniform profile on [-lambda, lambda].
    pub fn box_profile(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::config("box profile needs a positive finite half-width"));
        }
        Ok(BroadeningProfile::Box { lambda })
    }

    /// Raised-cosine profile on [-lambda, lambda].
    pub fn raised_cosine(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::config(
                "raised-cosine profile needs a positive finite half-width",
            ));
        }
        Ok(BroadeningProfile::RaisedCosine { lambda })
    }

    /// Piecewise-linear profile from samples.  Samples must be sorted,
    /// nonnegative, span [-lambda, lambda], and vanish at the endpoints.
    /// If `rescale` is set, a unit-mass defect is repaired by scaling;
    /// otherwise any defect beyond `MASS_TOL` is an error.
    pub fn table(lambda: f64, samples: Vec<(f64, f64)>, rescale: bool) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::config("table profile needs a positive finite half-width"));
        }
        if samples.len() < 4 {
            return Err(Error::config("table profile needs at least 4 samples"));
        }
        let mut peak = 0.0f64;
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::config("table profile samples must be strictly increasing in s"));
            }
        }
        for &(s, v) in &samples {
            if s < -lambda - 1e-12 || s > lambda + 1e-12 {
                return Err(Error::config("table profile sample outside [-lambda, lambda]"));
            }
            if v < 0.0 {
                return Err(Error::config("table profile has a negative density sample"));
            }
            peak = peak.max(v);
        }
        if peak == 0.0 {
            return Err(Error::config("table profile is identically zero"));
        }
        let first = samples.first().unwrap();
        let last = samples.last().unwrap();
        if (first.0 + lambda).abs() > 1e-9 * lambda || (last.0 - lambda).abs() > 1e-9 * lambda {
            return Err(Error::config("table profile samples must span [-lambda, lambda]"));
        }
        if first.1 > ENDPOINT_TOL * peak || last.1 > ENDPOINT_TOL * peak {
            return Err(Error::config(
                "table profile must vanish at the support endpoints",
            ));
        }
        // trapezoid mass of the interpolant
        let mut mass = 0.0;
        for w in samples.windows(2) {
            mass += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        }
        let defect = (mass - 1.0).abs();
        let samples = if defect <= MASS_TOL {
            samples
        } else if rescale {
            samples.into_iter().map(|(s, v)| (s, v / mass)).collect()
        } else {
            return Err(Error::config(format!(
                "table profile mass {mass} deviates from 1 beyond tolerance; pass rescale to repair"
            )));
        };
        Ok(BroadeningProfile::Table { lambda, samples })
    }

    /// Profile from a callable on the whole axis, treated as negligible
    /// beyond |s| > width.  Checked for nonnegativity, decay at the window
    /// edge, and unit mass (rescaled if requested).
    pub fn unbounded(
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        width: f64,
        rescale: bool,
    ) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::config("unbounded profile needs a positive window width"));
        }
        let f = Arc::new(density);
        let rule = gauss_legendre(64);
        let mut mass = 0.0;
        let mut peak = 0.0f64;
        let panels = 16;
        for p in 0..panels {
            let a = -width + 2.0 * width * p as f64 / panels as f64;
            let b = a + 2.0 * width / panels as f64;
            for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * u;
                let v = f(s);
                if v < 0.0 {
                    return Err(Error::config("unbounded profile is negative inside the window"));
                }
                peak = peak.max(v);
                mass += 0.5 * (b - a) * w * v;
            }
        }
        if peak == 0.0 {
            return Err(Error::config("unbounded profile is identically zero"));
        }
        if f(width).abs() > ENDPOINT_TOL * peak || f(-width).abs() > ENDPOINT_TOL * peak {
            return Err(Error::config(
                "unbounded profile does not decay below tolerance at the window edge",
            ));
        }
        let defect = (mass - 1.0).abs();
        if defect <= MASS_TOL {
            Ok(BroadeningProfile::Unbounded { density: f, width })
        } else if rescale {
            let g = Arc::clone(&f);
            Ok(BroadeningProfile::Unbounded {
                density: Arc::new(move |s| g(s) / mass),
                width,
            })
        } else {
            Err(Error::config(format!(
                "unbounded profile mass {mass} deviates from 1 beyond tolerance; pass rescale to repair"
            )))
        }
    }

    /// Half-width of the support; None for unbounded profiles.
    pub fn support(&self) -> Option<f64> {
        match self {
            BroadeningProfile::Box { lambda }
            | BroadeningProfile::RaisedCosine { lambda }
            | BroadeningProfile::Table { lambda, .. } => Some(*lambda),
            BroadeningProfile::Unbounded { .. } => None,
        }
    }

    /// Density value n(s).
    pub fn density(&self, s: f64) -> f64 {
        match self {
            BroadeningProfile::Box { lambda } => {
                if s.abs() <= *lambda {
                    0.5 / lambda
                } else {
                    0.0
                }
            }
            BroadeningProfile::RaisedCosine { lambda } => {
                if s.abs() <= *lambda {
                    (1.0 + (PI * s / lambda).cos()) / (2.0 * lambda)
                } else {
                    0.0
                }
            }
            BroadeningProfile::Table { samples, .. } => {
                let n = samples.len();
                if s < samples[0].0 || s > samples[n - 1].0 {
                    return 0.0;
                }
                let idx = samples.partition_point(|&(x, _)| x <= s);
                if idx == 0 {
                    return samples[0].1;
                }
                if idx >= n {
                    return samples[n - 1].1;
                }
                let (x0, y0) = samples[idx - 1];
                let (x1, y1) = samples[idx];
                y0 + (y1 - y0) * (s - x0) / (x1 - x0)
            }
            BroadeningProfile::Unbounded { density, width } => {
                if s.abs() > *width {
                    0.0
                } else {
                    density(s)
                }
            }
        }
    }
}

/// The phase-kernel moments at (lambda, nu):
///
/// * `pi_m`: int n(s) / ((s-l)^2 + v^2) ds
/// * `i1`:   int n(s) ((s-l)^2 - v^2) / ((s-l)^2 + v^2)^2 ds
/// * `i2`:   int n(s) (s-l) / ((s-l)^2 + v^2)^2 ds
///
/// so that int n(s)/(s - (l + i v))^2 ds = i1 + 2 i v i2.
#[derive(Debug, Clone, Copy)]
pub struct KernelMoments {
    pub pi_m: f64,
    pub i1: f64,
    pub i2: f64,
}

/// Precomputed transform apparatus for one profile.
#[derive(Debug, Clone)]
pub struct BroadeningTransform {
    profile: BroadeningProfile,
    /// Legendre coefficients of n(L u) on [-1, 1] (compact profiles only).
    coeffs: Vec<f64>,
}

impl BroadeningTransform {
    pub fn new(profile: BroadeningProfile) -> Self {
        let coeffs = match &profile {
            BroadeningProfile::Box { lambda } => vec![0.5 / lambda],
            BroadeningProfile::RaisedCosine { lambda } => {
                let l = *lambda;
                legendre_analyze(|u| (1.0 + (PI * u).cos()) / (2.0 * l), 256, 96)
            }
            BroadeningProfile::Table { lambda, .. } => {
                let l = *lambda;
                let p = profile.clone();
                legendre_analyze(move |u| p.density(l * u), 512, 200)
            }
            BroadeningProfile::Unbounded { .. } => Vec::new(),
        };
        BroadeningTransform { profile, coeffs }
    }

    pub fn profile(&self) -> &BroadeningProfile {
        &self.profile
    }

    pub fn support(&self) -> Option<f64> {
        self.profile.support()
    }

    pub fn density(&self, s: f64) -> f64 {
        self.profile.density(s)
    }

    /// Cauchy transform C(z) = int n(s)/(s - z) ds for z off the closed
    /// support (either Im z != 0 or Re z outside it).
    pub fn cauchy(&self, z: C64) -> C64 {
        match &self.profile {
            BroadeningProfile::Unbounded { .. } => self.cauchy_unbounded(z),
            _ => {
                let l = self.support().unwrap();
                let zh = z / l;
                let q = legendre_q_row_complex(self.coeffs.len() - 1, zh);
                -2.0 * self
                    .coeffs
                    .iter()
                    .zip(q.iter())
                    .map(|(&c, &qk)| c * qk)
                    .sum::<C64>()
            }
        }
    }

    /// Boundary values C(l +- i0) on the support interior.
    pub fn cauchy_sided(&self, lambda: f64, side: ImSide) -> C64 {
        match &self.profile {
            BroadeningProfile::Unbounded { .. } => {
                let pv = self.cauchy_pv_unbounded(lambda);
                let s = match side {
                    ImSide::Upper => 1.0,
                    ImSide::Lower => -1.0,
                };
                pv + c64(0.0, s * PI) * self.density(lambda)
            }
            _ => {
                let l = self.support().unwrap();
                debug_assert!(lambda.abs() < l, "sided transform needs |lambda| < support");
                let q = legendre_q_row_sided(self.coeffs.len() - 1, lambda / l, side);
                -2.0 * self
                    .coeffs
                    .iter()
                    .zip(q.iter())
                    .map(|(&c, &qk)| c * qk)
                    .sum::<C64>()
            }
        }
    }

    /// Derivative C'(z) = int n(s)/(s - z)^2 ds, z off the closed support.
    pub fn cauchy_prime(&self, z: C64) -> C64 {
        match &self.profile {
            BroadeningProfile::Unbounded { .. } => self.cauchy_prime_unbounded(z),
            _ => {
                let l = self.support().unwrap();
                let zh = z / l;
                let kmax = self.coeffs.len() - 1;
                let q = legendre_q_row_complex(kmax, zh);
                // Q_k'(z) = k (z Q_k - Q_{k-1}) / (z^2 - 1), Q_0' = 1/(1-z^2)
                let one = c64(1.0, 0.0);
                let denom = zh * zh - one;
                let mut acc = self.coeffs[0] * (-one / denom);
                for k in 1..=kmax {
                    let dq = k as f64 * (zh * q[k] - q[k - 1]) / denom;
                    acc += self.coeffs[k] * dq;
                }
                -2.0 * acc / l
            }
        }
    }

    /// eta(z) = z + C(z)/4.
    pub fn eta(&self, z: C64) -> C64 {
        z + 0.25 * self.cauchy(z)
    }

    /// Boundary values eta(l +- i0); the jump is exactly (pi i / 2) n(l).
    pub fn eta_sided(&self, lambda: f64, side: ImSide) -> C64 {
        c64(lambda, 0.0) + 0.25 * self.cauchy_sided(lambda, side)
    }

    /// Principal-value part of eta on the support (the average of the two
    /// sided values).
    pub fn eta_principal(&self, lambda: f64) -> f64 {
        let up = self.eta_sided(lambda, ImSide::Upper);
        let dn = self.eta_sided(lambda, ImSide::Lower);
        0.5 * (up + dn).re
    }

    /// Kernel moments at (lambda, nu), nu >= 0.  For nu = 0 and lambda
    /// inside the closed support the Poisson moment diverges and is
    /// reported as +infinity.
    pub fn kernel_moments(&self, lambda: f64, nu: f64) -> KernelMoments {
        assert!(nu >= 0.0, "kernel moments need nu >= 0");
        let inside = match self.support() {
            Some(l) => lambda.abs() <= l,
            None => true,
        };
        if nu == 0.0 {
            if inside {
                return KernelMoments {
                    pi_m: f64::INFINITY,
                    i1: f64::NAN,
                    i2: f64::NAN,
                };
            }
            let z = c64(lambda, 0.0);
            let cp = self.cauchy_prime(z);
            let i2 = self.third_moment_axis(lambda);
            return KernelMoments {
                pi_m: cp.re,
                i1: cp.re,
                i2,
            };
        }
        let z = c64(lambda, nu);
        let c = self.cauchy(z);
        let cp = self.cauchy_prime(z);
        KernelMoments {
            pi_m: c.im / nu,
            i1: cp.re,
            i2: cp.im / (2.0 * nu),
        }
    }

    /// int n(s)/(s - lambda)^3 ds for real lambda off the closed support,
    /// via a central difference of C'.
    fn third_moment_axis(&self, lambda: f64) -> f64 {
        let h = 1e-5 * (1.0 + lambda.abs());
        let a = self.cauchy_prime(c64(lambda + h, 0.0));
        let b = self.cauchy_prime(c64(lambda - h, 0.0));
        // C''(l)/2 = int n/(s-l)^3
        0.5 * ((a - b).re / (2.0 * h))
    }

    // ---- unbounded-profile quadrature paths ----

    fn window(&self) -> f64 {
        match &self.profile {
            BroadeningProfile::Unbounded { width, .. } => *width,
            _ => unreachable!(),
        }
    }

    fn cauchy_unbounded(&self, z: C64) -> C64 {
        let w = self.window();
        if z.im.abs() >= 0.3 || z.re.abs() > w + 0.5 {
            // pole comfortably away from the integration window
            return self.plain_cauchy_panels(z, w);
        }
        // windowed subtraction around l0 = Re z
        let l0 = z.re;
        let n0 = self.density(l0);
        let (a, b) = (l0 - 1.0, l0 + 1.0);
        let closed = ((c64(b, 0.0) - z) / (c64(a, 0.0) - z)).ln();
        let mut acc = n0 * closed;
        // inside the window: (n(s) - n0)/(s - z), clustered toward l0
        acc += self.panel_cauchy(|s| self.density(s) - n0, a, l0, z, 3, 64, true);
        acc += self.panel_cauchy(|s| self.density(s) - n0, l0, b, z, 3, 64, false);
        // outside the window: plain
        if a > -w {
            acc += self.smooth_cauchy_panels(-w, a, z, 6);
        }
        if b < w {
            acc += self.smooth_cauchy_panels(b, w, z, 6);
        }
        acc
    }

    fn cauchy_pv_unbounded(&self, l0: f64) -> C64 {
        let w = self.window();
        let n0 = self.density(l0);
        let (a, b) = (l0 - 1.0, l0 + 1.0);
        // p.v. of the window term is log of the half-width ratio, zero here
        let z = c64(l0, 0.0);
        let mut acc = c64(0.0, 0.0);
        acc += self.panel_cauchy(|s| self.density(s) - n0, a, l0, z, 3, 64, true);
        acc += self.panel_cauchy(|s| self.density(s) - n0, l0, b, z, 3, 64, false);
        if a > -w {
            acc += self.smooth_cauchy_panels(-w, a, z, 6);
        }
        if b < w {
            acc += self.smooth_cauchy_panels(b, w, z, 6);
        }
        acc
    }

    fn cauchy_prime_unbounded(&self, z: C64) -> C64 {
        let w = self.window();
        if z.im.abs() >= 0.3 || z.re.abs() > w + 0.5 {
            let rule = gauss_legendre(64);
            let panels = 16;
            let mut acc = c64(0.0, 0.0);
            for p in 0..panels {
                let a = -w + 2.0 * w * p as f64 / panels as f64;
                let b = a + 2.0 * w / panels as f64;
                for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
                    let s = 0.5 * (a + b) + 0.5 * (b - a) * u;
                    let d = c64(s, 0.0) - z;
                    acc += 0.5 * (b - a) * wq * self.density(s) / (d * d);
                }
            }
            return acc;
        }
        // second-order subtraction around l0
        let l0 = z.re;
        let n0 = self.density(l0);
        let h = 1e-5;
        let n1 = (self.density(l0 + h) - self.density(l0 - h)) / (2.0 * h);
        let (a, b) = (l0 - 1.0, l0 + 1.0);
        let za = c64(a, 0.0) - z;
        let zb = c64(b, 0.0) - z;
        // int 1/(s-z)^2 = 1/(a-z) - 1/(b-z); int (s-l0)/(s-z)^2 over window
        let m0 = za.inv() - zb.inv();
        let m1 = (zb / za).ln() + (z - c64(l0, 0.0)) * m0;
        let mut acc = n0 * m0 + n1 * m1;
        let f = |s: f64| self.density(s) - n0 - n1 * (s - l0);
        acc += self.panel_cauchy2(f, a, l0, z, 3, 64, true);
        acc += self.panel_cauchy2(f, l0, b, z, 3, 64, false);
        if a > -w {
            acc += self.smooth_cauchy2_panels(-w, a, z, 6);
        }
        if b < w {
            acc += self.smooth_cauchy2_panels(b, w, z, 6);
        }
        acc
    }

    fn plain_cauchy_panels(&self, z: C64, w: f64) -> C64 {
        self.smooth_cauchy_panels(-w, w, z, 16)
    }

    fn smooth_cauchy_panels(&self, a: f64, b: f64, z: C64, panels: usize) -> C64 {
        let rule = gauss_legendre(48);
        let mut acc = c64(0.0, 0.0);
        for p in 0..panels {
            let pa = a + (b - a) * p as f64 / panels as f64;
            let pb = a + (b - a) * (p + 1) as f64 / panels as f64;
            for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
                let s = 0.5 * (pa + pb) + 0.5 * (pb - pa) * u;
                acc += 0.5 * (pb - pa) * wq * self.density(s) / (c64(s, 0.0) - z);
            }
        }
        acc
    }

    fn smooth_cauchy2_panels(&self, a: f64, b: f64, z: C64, panels: usize) -> C64 {
        let rule = gauss_legendre(48);
        let mut acc = c64(0.0, 0.0);
        for p in 0..panels {
            let pa = a + (b - a) * p as f64 / panels as f64;
            let pb = a + (b - a) * (p + 1) as f64 / panels as f64;
            for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
                let s = 0.5 * (pa + pb) + 0.5 * (pb - pa) * u;
                let d = c64(s, 0.0) - z;
                acc += 0.5 * (pb - pa) * wq * self.density(s) / (d * d);
            }
        }
        acc
    }

    /// Quadrature of f(s)/(s-z) over [a, b] with power clustering toward
    /// the end shared with the subtraction point.
    #[allow(clippy::too_many_arguments)]
    fn panel_cauchy(
        &self,
        f: impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        z: C64,
        power: i32,
        n: usize,
        cluster_right: bool,
    ) -> C64 {
        let rule = gauss_legendre(n);
        let mut acc = c64(0.0, 0.0);
        for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
            // map with density ~ (1 -+ u)^(power-1) toward the clustered end
            let t = if cluster_right {
                1.0 - ((1.0 - u) / 2.0).powi(power)
            } else {
                ((1.0 + u) / 2.0).powi(power)
            };
            let dt = if cluster_right {
                (power as f64) * ((1.0 - u) / 2.0).powi(power - 1) / 2.0
            } else {
                (power as f64) * ((1.0 + u) / 2.0).powi(power - 1) / 2.0
            };
            let s = a + (b - a) * t;
            acc += wq * dt * (b - a) * f(s) / (c64(s, 0.0) - z);
        }
        acc
    }

    #[allow(clippy::too_many_arguments)]
    fn panel_cauchy2(
        &self,
        f: impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        z: C64,
        power: i32,
        n: usize,
        cluster_right: bool,
    ) -> C64 {
        let rule = gauss_legendre(n);
        let mut acc = c64(0.0, 0.0);
        for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
            let t = if cluster_right {
                1.0 - ((1.0 - u) / 2.0).powi(power)
            } else {
                ((1.0 + u) / 2.0).powi(power)
            };
            let dt = if cluster_right {
                (power as f64) * ((1.0 - u) / 2.0).powi(power - 1) / 2.0
            } else {
                (power as f64) * ((1.0 + u) / 2.0).powi(power - 1) / 2.0
            };
            let s = a + (b - a) * t;
            let d = c64(s, 0.0) - z;
            acc += wq * dt * (b - a) * f(s) / (d * d);
        }
        acc
    }
}

/// Legendre coefficients of f on [-1, 1] through degree kmax, by Gauss
/// quadrature with nquad nodes, truncated where they stop mattering.
fn legendre_analyze(f: impl Fn(f64) -> f64, nquad: usize, kmax: usize) -> Vec<f64> {
    let rule = gauss_legendre(nquad);
    let mut coeffs = vec![0.0f64; kmax + 1];
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        let p = legendre_p_row(kmax, u);
        let fv = f(u);
        for k in 0..=kmax {
            coeffs[k] += w * fv * p[k];
        }
    }
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c *= (2.0 * k as f64 + 1.0) / 2.0;
    }
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut keep = coeffs.len();
    while keep > 1 && coeffs[keep - 1].abs() < 1e-15 * scale {
        keep -= 1;
    }
    coeffs.truncate(keep);
    coeffs
}
