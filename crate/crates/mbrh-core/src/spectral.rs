//! Spectral data attached to the periodic boundary pumping.
//!
//! The boundary envelope A0 exp(i w0 t) pins a complex endpoint
//! E = -w0/2 + i A0/2, and the scattering theory lives on the vertical
//! segment between E and its conjugate.  This module evaluates the branch
//! functions cut along that segment, the scattering coefficient r, and the
//! pumped background state the medium relaxes to behind the wavefront.

use crate::broadening::BroadeningTransform;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::{c64, C64, I, Side};

/// Endpoint E = -w0/2 + i A0/2 of the spectral segment [E, conj E].
pub fn endpoint_from_boundary(a0: f64, omega0: f64) -> Result<C64> {
    if !(a0 > 0.0) || !a0.is_finite() {
        return Err(Error::config("boundary amplitude must be positive and finite"));
    }
    if !omega0.is_finite() {
        return Err(Error::config("boundary frequency must be finite"));
    }
    Ok(c64(-0.5 * omega0, 0.5 * a0))
}

/// Branch data at a point: the segment-cut square root w, the quartic
/// root kappa of (z - conj E)/(z - E), and a = (kappa + 1/kappa)/2,
/// b = (kappa - 1/kappa)/2.
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    pub w: C64,
    pub kappa: C64,
    pub a: C64,
    pub b: C64,
}

/// Square root of (z - Re E)^2 + (Im E)^2 cut along the segment,
/// normalized to behave like z - Re E at infinity.
fn w_cut(e: C64, z: C64) -> C64 {
    let d = z - c64(e.re, 0.0);
    if z.im == 0.0 {
        // exact real-axis form; signum(+0.0) = 1 picks the east value at Re E
        let dr = z.re - e.re;
        return c64(dr.signum() * (dr * dr + e.im * e.im).sqrt(), 0.0);
    }
    d * (1.0 + c64(e.im * e.im, 0.0) / (d * d)).sqrt()
}

/// Principal fourth root of (z - conj E)/(z - E), cut along the segment.
fn kappa_cut(e: C64, z: C64) -> C64 {
    let ratio = (z - e.conj()) / (z - e);
    (0.25 * ratio.ln()).exp()
}

/// Branch data at z.  Pass a side to evaluate on the segment itself
/// (z = Re E + i nu with |nu| < Im E); the segment is oriented downward,
/// so Left is the east side.
pub fn eval_branch(e: C64, z: C64, side: Option<Side>) -> Branch {
    let c = e.im;
    let (w, kappa) = match side {
        None => (w_cut(e, z), kappa_cut(e, z)),
        Some(s) => {
            let nu = z.im;
            debug_assert!(nu.abs() < c, "segment evaluation needs |Im z| < Im E");
            let root = (c * c - nu * nu).sqrt();
            let g = ((c + nu) / (c - nu)).powf(0.25);
            let k_east = g * c64(0.5f64.sqrt(), 0.5f64.sqrt());
            match s {
                Side::Left => (c64(root, 0.0), k_east),
                Side::Right => (c64(-root, 0.0), -I * k_east),
            }
        }
    };
    let a = 0.5 * (kappa + kappa.inv());
    let b = 0.5 * (kappa - kappa.inv());
    Branch { w, kappa, a, b }
}

/// Scattering coefficient r(z) = i (w(z) - (z - Re E)) / Im E, cut along
/// the segment; r = b/a off the cut, |r| < 1 on the real axis, |r| = 1 on
/// the segment sides.
pub fn eval_scattering(e: C64, z: C64, side: Option<Side>) -> C64 {
    let c = e.im;
    match side {
        None => I * (w_cut(e, z) - (z - c64(e.re, 0.0))) / c,
        Some(s) => {
            let nu = z.im;
            debug_assert!(nu.abs() < c, "segment evaluation needs |Im z| < Im E");
            let root = (c * c - nu * nu).sqrt();
            match s {
                Side::Left => c64(nu, root) / c,
                Side::Right => c64(nu, -root) / c,
            }
        }
    }
}

/// Jump h(nu) = r_right - r_left = -2 i sqrt((Im E)^2 - nu^2) / Im E
/// across the segment at height nu.
pub fn segment_jump(e: C64, nu: f64) -> C64 {
    let c = e.im;
    debug_assert!(nu.abs() < c);
    c64(0.0, -2.0 * (c * c - nu * nu).sqrt() / c)
}

/// Square root of (s - Re E)^2 + (Im E)^2 on the real axis, the positive
/// branch used by the background state.
pub fn w_inf(e: C64, s: f64) -> f64 {
    let d = s - e.re;
    (d * d + e.im * e.im).sqrt()
}

/// The pumped background the medium settles into behind the wavefront:
/// field A0 exp(i(w0 t + 2 b0 x)), population -(s - Re E)/w_inf(s), and
/// polarization i (Im E)/w_inf(s) carrying the field's phase.
#[derive(Debug, Clone, Copy)]
pub struct Background {
    pub e: C64,
    pub a0: f64,
    pub omega0: f64,
    pub beta0: f64,
}

/// Compute the background state; beta0 = Re E + (1/4) int n(s)/w_inf(s) ds
/// sets the spatial wavenumber of the pumped field.
pub fn background_fields(transform: &BroadeningTransform, a0: f64, omega0: f64) -> Result<Background> {
    let e = endpoint_from_boundary(a0, omega0)?;
    let integral = match transform.support() {
        Some(l) => match transform.profile() {
            crate::broadening::BroadeningProfile::Table { samples, .. } => {
                // panel per sample interval; the integrand kinks at samples
                let rule = gauss_legendre(16);
                let mut acc = 0.0;
                for win in samples.windows(2) {
                    let (a, b) = (win[0].0, win[1].0);
                    for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
                        let s = 0.5 * (a + b) + 0.5 * (b - a) * u;
                        acc += 0.5 * (b - a) * wq * transform.density(s) / w_inf(e, s);
                    }
                }
                acc
            }
            _ => {
                let rule = gauss_legendre(400);
                let mut acc = 0.0;
                for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
                    let s = l * u;
                    acc += l * wq * transform.density(s) / w_inf(e, s);
                }
                acc
            }
        },
        None => {
            let w = match transform.profile() {
                crate::broadening::BroadeningProfile::Unbounded { width, .. } => *width,
                _ => unreachable!(),
            };
            let rule = gauss_legendre(64);
            let panels = 16;
            let mut acc = 0.0;
            for p in 0..panels {
                let a = -w + 2.0 * w * p as f64 / panels as f64;
                let b = a + 2.0 * w / panels as f64;
                for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
                    let s = 0.5 * (a + b) + 0.5 * (b - a) * u;
                    acc += 0.5 * (b - a) * wq * transform.density(s) / w_inf(e, s);
                }
            }
            acc
        }
    };
    Ok(Background {
        e,
        a0,
        omega0,
        beta0: e.re + 0.25 * integral,
    })
}

impl Background {
    /// Population inversion component of the background state.
    pub fn population(&self, s: f64) -> f64 {
        -(s - self.e.re) / w_inf(self.e, s)
    }

    /// Polarization amplitude before the traveling phase factor.
    pub fn polarization_amplitude(&self, s: f64) -> C64 {
        I * self.e.im / w_inf(self.e, s)
    }

    /// Background field envelope at (t, x).
    pub fn field(&self, t: f64, x: f64) -> C64 {
        self.a0 * (I * (self.omega0 * t + 2.0 * self.beta0 * x)).exp()
    }

    /// Background polarization at (t, x, s).
    pub fn polarization(&self, t: f64, x: f64, s: f64) -> C64 {
        self.polarization_amplitude(s) * (I * (self.omega0 * t + 2.0 * self.beta0 * x)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broadening::BroadeningProfile;
    use std::f64::consts::FRAC_1_SQRT_2;

    const E: C64 = C64::new(-0.5, 0.5);

    #[test]
    fn endpoint_reference() {
        let e = endpoint_from_boundary(1.0, 1.0).unwrap();
        assert_eq!(e, c64(-0.5, 0.5));
        assert!(endpoint_from_boundary(0.0, 1.0).is_err());
        assert!(endpoint_from_boundary(-1.0, 1.0).is_err());
    }

    #[test]
    fn scattering_at_segment_midpoint_is_i() {
        // real-axis evaluation at Re E picks the east value exactly
        let r = eval_scattering(E, c64(E.re, 0.0), None);
        assert_eq!(r, I);
    }

    #[test]
    fn real_axis_w_matches_signed_root() {
        for &l in &[-3.0, -0.6, -0.500001, -0.499999, 0.0, 2.5] {
            let w = eval_branch(E, c64(l, 0.0), None).w;
            let d = l - E.re;
            let expect = d.signum() * (d * d + 0.25).sqrt();
            assert!((w - c64(expect, 0.0)).norm() < 1e-14 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn scattering_is_contractive_on_axis_unimodular_on_segment() {
        for &l in &[-4.0, -1.0, -0.2, 0.0, 3.0] {
            let r = eval_scattering(E, c64(l, 0.0), None);
            assert!(r.norm() < 1.0);
            assert!(r.re.abs() < 1e-15, "r is purely imaginary on the axis: {r}");
        }
        for &nu in &[-0.45, -0.2, 0.0, 0.3, 0.49] {
            let z = c64(E.re, nu);
            for side in [Side::Left, Side::Right] {
                let r = eval_scattering(E, z, Some(side));
                assert!((r.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scattering_equals_b_over_a() {
        for &z in &[
            c64(0.7, 0.4),
            c64(-2.0, -1.3),
            c64(-0.5, 0.6),
            c64(-0.45, 0.1),
            c64(1e3, 1.0),
        ] {
            let br = eval_branch(E, z, None);
            let r = eval_scattering(E, z, None);
            assert!(
                (r - br.b / br.a).norm() < 1e-12 * (1.0 + r.norm()),
                "z={z}: r={r} b/a={}",
                br.b / br.a
            );
        }
    }

    #[test]
    fn branch_identity_a2_minus_b2() {
        for &z in &[c64(0.7, 0.4), c64(-2.0, -1.3), c64(-0.5, 0.6), c64(-0.49, 0.001)] {
            let br = eval_branch(E, z, None);
            let v = br.a * br.a - br.b * br.b;
            assert!((v - c64(1.0, 0.0)).norm() < 1e-13);
        }
        for side in [Side::Left, Side::Right] {
            let br = eval_branch(E, c64(E.re, 0.23), Some(side));
            let v = br.a * br.a - br.b * br.b;
            assert!((v - c64(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn kappa_segment_values() {
        let br = eval_branch(E, c64(E.re, 0.0), Some(Side::Left));
        assert!((br.kappa - c64(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
        let bw = eval_branch(E, c64(E.re, 0.0), Some(Side::Right));
        assert!((bw.kappa + I * br.kappa).norm() < 1e-15);
    }

    #[test]
    fn segment_values_are_off_segment_limits() {
        for &nu in &[-0.3, 0.0, 0.2, 0.45] {
            let east = eval_branch(E, c64(E.re + 1e-9, nu), None);
            let west = eval_branch(E, c64(E.re - 1e-9, nu), None);
            let l = eval_branch(E, c64(E.re, nu), Some(Side::Left));
            let r = eval_branch(E, c64(E.re, nu), Some(Side::Right));
            assert!((east.w - l.w).norm() < 1e-7, "nu={nu}");
            assert!((west.w - r.w).norm() < 1e-7, "nu={nu}");
            assert!((east.kappa - l.kappa).norm() < 1e-7, "nu={nu}");
            assert!((west.kappa - r.kappa).norm() < 1e-7, "nu={nu}");
            let re = eval_scattering(E, c64(E.re + 1e-9, nu), None);
            let rl = eval_scattering(E, c64(E.re, nu), Some(Side::Left));
            assert!((re - rl).norm() < 1e-7, "nu={nu}");
        }
    }

    #[test]
    fn segment_jump_closed_form() {
        assert!((segment_jump(E, 0.0) + 2.0 * I).norm() < 1e-15);
        for &nu in &[-0.4, 0.1, 0.3] {
            let h = segment_jump(E, nu);
            let l = eval_scattering(E, c64(E.re, nu), Some(Side::Left));
            let r = eval_scattering(E, c64(E.re, nu), Some(Side::Right));
            assert!((h - (r - l)).norm() < 1e-14);
        }
    }

    #[test]
    fn branch_asymptotics_at_infinity() {
        // w ~ z - Re E, kappa -> 1, a -> 1, b ~ Im E/(2z) -> 0, r -> 0
        let z = c64(2e6, 1e6);
        let br = eval_branch(E, z, None);
        assert!((br.w - (z - c64(E.re, 0.0))).norm() / z.norm() < 1e-6);
        assert!((br.kappa - c64(1.0, 0.0)).norm() < 1e-6);
        assert!(eval_scattering(E, z, None).norm() < 1e-6);
    }

    #[test]
    fn beta0_box_reference() {
        let t = BroadeningTransform::new(BroadeningProfile::box_profile(1.0).unwrap());
        let bg = background_fields(&t, 1.0, 1.0).unwrap();
        let expect = -0.5 + ((3.0f64).asinh() + (1.0f64).asinh()) / 8.0;
        assert!((bg.beta0 - expect).abs() < 1e-14, "{} vs {expect}", bg.beta0);
        assert!((bg.beta0 + 0.16252249421854876).abs() < 1e-14);
    }

    #[test]
    fn background_is_on_bloch_sphere() {
        let t = BroadeningTransform::new(BroadeningProfile::raised_cosine(1.0).unwrap());
        let bg = background_fields(&t, 1.0, 1.0).unwrap();
        for &s in &[-0.9, -0.5, 0.0, 0.3, 5.0] {
            let n = bg.population(s);
            let p = bg.polarization_amplitude(s);
            assert!((n * n + p.norm_sqr() - 1.0).abs() < 1e-14);
        }
        assert!((bg.population(1e8) + 1.0).abs() < 1e-7);
    }

    #[test]
    fn background_satisfies_bloch_equation() {
        // d/dt rho + 2 i s rho = N * field  at several (t, x, s)
        let t = BroadeningTransform::new(BroadeningProfile::box_profile(1.0).unwrap());
        let bg = background_fields(&t, 1.0, 1.0).unwrap();
        for &(tt, xx, s) in &[(0.3, 1.1, 0.4), (2.0, 0.0, -0.7), (0.0, 3.0, 0.9)] {
            let rho_t = I * bg.omega0 * bg.polarization(tt, xx, s);
            let lhs = rho_t + 2.0 * I * s * bg.polarization(tt, xx, s);
            let rhs = bg.population(s) * bg.field(tt, xx);
            assert!((lhs - rhs).norm() < 1e-13, "s={s}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn background_satisfies_field_equation() {
        // dE/dt + dE/dx = int n(s) rho(s) ds
        let t = BroadeningTransform::new(BroadeningProfile::raised_cosine(1.0).unwrap());
        let bg = background_fields(&t, 1.0, 1.0).unwrap();
        let (tt, xx) = (0.7, 1.9);
        let lhs = I * (bg.omega0 + 2.0 * bg.beta0) * bg.field(tt, xx);
        let rule = gauss_legendre(400);
        let mut rhs = c64(0.0, 0.0);
        for (&u, &wq) in rule.nodes.iter().zip(&rule.weights) {
            rhs += wq * t.density(u) * bg.polarization(tt, xx, u);
        }
        assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn kappa_value_on_upper_axis() {
        // at z = Re E + i Im E scaled out, compare against direct principal root
        let z = c64(0.25, 1.5);
        let k = eval_branch(E, z, None).kappa;
        let ratio = (z - E.conj()) / (z - E);
        let direct = ratio.powf(0.25);
        assert!((k - direct).norm() < 1e-14);
    }

    #[test]
    fn w_is_even_under_conjugation() {
        // schwarz symmetry: w(conj z) = conj(w(z)), kappa(conj z) = conj(1/kappa(z))...
        // w inherits realness of its defining data
        for &z in &[c64(0.3, 0.8), c64(-1.2, -0.4)] {
            let w1 = eval_branch(E, z, None).w;
            let w2 = eval_branch(E, z.conj(), None).w;
            assert!((w2 - w1.conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn background_phase_sign_in_pi_over_4_window() {
        // beta0 stays real and below Re E + mass/4 upper bound
        let t = BroadeningTransform::new(BroadeningProfile::box_profile(1.0).unwrap());
        let bg = background_fields(&t, 1.0, 1.0).unwrap();
        // w_inf >= Im E, so the integral is at most mass/(Im E)
        assert!(bg.beta0 > E.re && bg.beta0 < E.re + 0.25 / E.im);
    }
}
