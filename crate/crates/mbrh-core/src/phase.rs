//! Phase function theta(z; t, x) = t z - x eta(z) and its geometry.
//!
//! The exponential factors exp(+-2 i theta) drive every jump matrix, so
//! deformation choices reduce to the sign structure of Re(i theta).  Off
//! the axis Re(i theta) = nu (x - t) + (x/4) Im C(l + i nu) with C the
//! profile's Cauchy transform, so the zero set at fixed (t, x) is a level
//! line of the Poisson-kernel moment, and the points where it meets the
//! real axis are the stationary points of theta.

use crate::broadening::BroadeningTransform;
use crate::error::{Error, Result};
use crate::quad::ImSide;
use crate::{c64, C64};

/// theta(z) = t z - x eta(z), z off the closed support of the profile.
pub fn theta(tr: &BroadeningTransform, z: C64, t: f64, x: f64) -> C64 {
    t * z - x * tr.eta(z)
}

/// Boundary values of theta on the profile support.
pub fn theta_sided(tr: &BroadeningTransform, lambda: f64, side: ImSide, t: f64, x: f64) -> C64 {
    t * c64(lambda, 0.0) - x * tr.eta_sided(lambda, side)
}

/// Re(i theta) at lambda + i nu, the decay exponent scale of the jump
/// factors; exp(2 i theta) has modulus exp(2 Re(i theta))... the value
/// returned here is Re(i theta) itself.
pub fn re_i_theta(tr: &BroadeningTransform, lambda: f64, nu: f64, t: f64, x: f64) -> f64 {
    if nu == 0.0 {
        return 0.0;
    }
    let c = tr.cauchy(c64(lambda, nu));
    nu * (x - t) + 0.25 * x * c.im
}

/// Sign of Re(i theta) with a small dead band around zero.
pub fn signature_at(tr: &BroadeningTransform, lambda: f64, nu: f64, t: f64, x: f64) -> i8 {
    let v = re_i_theta(tr, lambda, nu, t, x);
    let scale = 1.0 + nu.abs() * (x.abs() + t.abs());
    if v.abs() <= 1e-12 * scale {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Height nu(lambda) >= 0 of the upper branch of the level line
/// Re(i theta) = 0 at abscissa lambda, for t > x > 0.  Returns 0 where the
/// line has collapsed onto the axis (beyond the stationary points).
pub fn level_line(tr: &BroadeningTransform, t: f64, x: f64, lambda: f64) -> Result<f64> {
    if !(t > x) || !(x > 0.0) {
        return Err(Error::config("level line needs t > x > 0"));
    }
    let target = 4.0 * (t - x) / x;
    // Poisson moment decreases monotonically in nu from its axis value
    let mut hi = 1.0;
    while tr.kernel_moments(lambda, hi).pi_m >= target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::numerical("level line bracket expansion failed"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if tr.kernel_moments(lambda, mid).pi_m >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Real stationary points of theta outside the profile support, where
/// t - x eta'(lambda) = 0.  None on a side where the moment integral
/// cannot reach the required level (smoothly vanishing profiles).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPair {
    pub left: Option<f64>,
    pub right: Option<f64>,
}

pub fn stationary_points(tr: &BroadeningTransform, t: f64, x: f64) -> Result<StationaryPair> {
    if !(x > 0.0) || !t.is_finite() {
        return Err(Error::config("stationary points need x > 0 and finite t"));
    }
    let target = 4.0 * (t - x) / x;
    if target <= 0.0 {
        return Ok(StationaryPair {
            left: None,
            right: None,
        });
    }
    let l = tr.support().unwrap_or_else(|| match tr.profile() {
        crate::broadening::BroadeningProfile::Unbounded { width, .. } => *width,
        _ => unreachable!(),
    });
    let moment = |lam: f64| tr.kernel_moments(lam, 0.0).i1;
    let right = bisect_outward(|d| moment(l + d), target, l);
    let left = bisect_outward(|d| moment(-l - d), target, l);
    Ok(StationaryPair {
        left: left.map(|d| -l - d),
        right: right.map(|d| l + d),
    })
}

/// Find d > 0 with f(d) = target for f positive and decreasing; None if
/// already below target arbitrarily close to the support edge.
fn bisect_outward(f: impl Fn(f64) -> f64, target: f64, scale: f64) -> Option<f64> {
    let d0 = 1e-12 * scale.max(1.0);
    if f(d0) <= target {
        return None;
    }
    let mut hi = scale.max(1.0);
    while f(hi) >= target {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = d0;
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::broadening::BroadeningProfile;
    use std::f64::consts::PI;

    fn box_tr() -> BroadeningTransform {
        BroadeningTransform::new(BroadeningProfile::box_profile(1.0).unwrap())
    }

    fn rc_tr() -> BroadeningTransform {
        BroadeningTransform::new(BroadeningProfile::raised_cosine(1.0).unwrap())
    }

    #[test]
    fn re_i_theta_matches_direct_theta() {
        let tr = box_tr();
        let (t, x) = (1.7, 0.9);
        for &(l, nu) in &[(0.3, 0.8), (-1.5, 0.2), (0.0, -0.6), (2.0, 0.01)] {
            let direct = (crate::I * theta(&tr, c64(l, nu), t, x)).re;
            let v = re_i_theta(&tr, l, nu, t, x);
            assert!((v - direct).abs() < 1e-12 * (1.0 + direct.abs()), "{v} vs {direct}");
        }
    }

    #[test]
    fn theta_jump_on_support() {
        let tr = rc_tr();
        let (t, x) = (0.4, 1.3);
        for &l in &[-0.6, 0.0, 0.52] {
            let jump = theta_sided(&tr, l, ImSide::Upper, t, x)
                - theta_sided(&tr, l, ImSide::Lower, t, x);
            let expect = -x * c64(0.0, PI / 2.0) * tr.density(l);
            assert!((jump - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn upper_half_plane_sign_when_t_below_x() {
        // for t < x the decay exponent keeps the sign of nu everywhere
        let tr = box_tr();
        let (t, x) = (0.5, 1.25);
        for &(l, nu) in &[(0.0, 0.4), (1.8, 1.0), (-0.7, 0.03), (3.0, 2.0)] {
            assert_eq!(signature_at(&tr, l, nu, t, x), 1, "l={l} nu={nu}");
            assert_eq!(signature_at(&tr, l, -nu, t, x), -1);
        }
        assert_eq!(signature_at(&tr, 0.3, 0.0, t, x), 0);
    }

    #[test]
    fn box_level_line_against_closed_form() {
        // box Poisson moment: (1/(2 L nu)) (atan((L-l)/nu) + atan((L+l)/nu))
        let tr = box_tr();
        let (t, x) = (2.0, 1.0);
        let target = 4.0 * (t - x) / x;
        for &l in &[0.0, 0.5, -0.8, 1.05] {
            let nu = level_line(&tr, t, x, l).unwrap();
            let closed = |v: f64| (((1.0 - l) / v).atan() + ((1.0 + l) / v).atan()) / (2.0 * v);
            // reference root by bisection on the closed form
            let (mut lo, mut hi) = (1e-12, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if closed(mid) >= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let expect = 0.5 * (lo + hi);
            assert!((nu - expect).abs() < 1e-9, "l={l}: {nu} vs {expect}");
        }
    }

    #[test]
    fn level_line_collapses_at_stationary_points() {
        let tr = box_tr();
        // xi = x/(4(t-x)) = 3 puts the box stationary points at +-2
        let (t, x) = (2.6, 2.4);
        let sp = stationary_points(&tr, t, x).unwrap();
        let r = sp.right.unwrap();
        let l = sp.left.unwrap();
        assert!((r - 2.0).abs() < 1e-9, "right {r}");
        assert!((l + 2.0).abs() < 1e-9, "left {l}");
        // just outside: collapsed; just inside: strictly positive
        assert!(level_line(&tr, t, x, r + 1e-3).unwrap() < 2e-2);
        assert!(level_line(&tr, t, x, r - 1e-3).unwrap() > 0.0);
        // the line height at the stationary point itself is ~0
        assert!(level_line(&tr, t, x, r).unwrap() < 1e-4);
    }

    #[test]
    fn raised_cosine_loses_stationary_points_at_small_xi() {
        // the rc edge moment is finite, so a high enough level has no root
        let tr = rc_tr();
        let (t, x) = (10.1, 0.1); // target = 400
        let sp = stationary_points(&tr, t, x).unwrap();
        assert_eq!(sp.right, None);
        assert_eq!(sp.left, None);
        // while the box profile still has them at the same (t, x)
        let sb = stationary_points(&box_tr(), t, x).unwrap();
        assert!(sb.right.is_some() && sb.left.is_some());
    }

    #[test]
    fn stationary_points_absent_for_causal_region() {
        let tr = box_tr();
        let sp = stationary_points(&tr, 0.5, 1.0).unwrap();
        assert_eq!(sp, StationaryPair { left: None, right: None });
    }

    #[test]
    fn level_line_positive_inside_support() {
        // inside the support the axis value is infinite, so nu > 0 strictly
        for tr in [box_tr(), rc_tr()] {
            let (t, x) = (1.5, 1.0);
            for &l in &[-0.9, -0.2, 0.0, 0.6] {
                let nu = level_line(&tr, t, x, l).unwrap();
                assert!(nu > 1e-6, "l={l} nu={nu}");
                // and the decay exponent really vanishes there
                let v = re_i_theta(&tr, l, nu, t, x);
                assert!(v.abs() < 1e-10 * (1.0 + nu * (t + x)), "residual {v}");
            }
        }
    }

    #[test]
    fn level_line_symmetric_for_even_profiles() {
        let tr = rc_tr();
        let (t, x) = (1.8, 0.7);
        for &l in &[0.3, 0.9, 1.4] {
            let a = level_line(&tr, t, x, l).unwrap();
            let b = level_line(&tr, t, x, -l).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn precondition_errors() {
        let tr = box_tr();
        assert!(level_line(&tr, 1.0, 1.0, 0.0).is_err());
        assert!(level_line(&tr, 0.5, 1.0, 0.0).is_err());
        assert!(stationary_points(&tr, 1.0, -1.0).is_err());
    }

    #[test]
    fn box_stationary_point_scaling() {
        // lambda* = sqrt(1 + xi) for the unit box at several xi
        let tr = box_tr();
        for &xi in &[0.25, 1.0, 3.75] {
            // choose x = 1, t = 1 + 1/(4 xi)
            let (x, t) = (1.0, 1.0 + 1.0 / (4.0 * xi));
            let sp = stationary_points(&tr, t, x).unwrap();
            let expect = (1.0 + xi).sqrt();
            assert!((sp.right.unwrap() - expect).abs() < 1e-9, "xi={xi}");
        }
    }
}
