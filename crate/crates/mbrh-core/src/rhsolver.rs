//! Jump matrices, the scalar detachment factor, and the collocation solver
//! for the matrix Riemann-Hilbert problem of the attenuator.
//!
//! Orientation convention everywhere: the + side of a contour piece is the
//! left side as seen walking along its orientation, and boundary values
//! satisfy M_minus = M_plus J.  The solver writes M = I + C[mu] with density
//! mu = (I + W)(I - J) on the contour, collocates W at the quadrature nodes
//! through the sided Cauchy weights, and solves the resulting dense linear
//! system.  Deformed variants (rotated tails, detached branches with the
//! scalar factor, open curves) carry region maps that translate the solved
//! matrix back to the undeformed solution at any off-contour point.

use std::f64::consts::PI;

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::SpSolver;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::broadening::BroadeningTransform;
use crate::cauchy::CauchyEngine;
use crate::contour::{
    build_deformed_contour, build_sigma, build_sigma_rotated, discretize, Contour,
    DeformationMode, Discretization, LensShape, PieceRole,
};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::phase::{level_line, stationary_points, theta, theta_sided};
use crate::quad::{gauss_legendre, ClusterMap, ImSide};
use crate::spectral::{eval_branch, eval_scattering, segment_jump};
use crate::{c64, C64, I, Side};

type FaerC64 = faer::complex_native::c64;

#[inline]
fn fc(z: C64) -> FaerC64 {
    FaerC64::new(z.re, z.im)
}

#[inline]
fn cf(z: FaerC64) -> C64 {
    C64::new(z.re, z.im)
}

/// Window breaks (offsets from the detachment abscissa) of the panelled part
/// of the scalar-factor rays; the remainder is folded by a rational map.
const DELTA_WINDOW_BREAKS: [f64; 4] = [0.0, 2.0, 10.0, 50.0];
const DELTA_WINDOW_NODES: usize = 48;
const DELTA_TAIL_NODES: usize = 64;

/// Scalar factor removing the off-band axis jump of the detached-branch
/// deformation.  It solves the scalar jump d_plus = d_minus (1 - r^2) on
/// the rays (-inf, lambda1] and [lambda2, +inf), tends to 1 at infinity,
/// and is evaluated through the same collocation engine as the matrix
/// problem, so boundary values on the rays come out with the same accuracy
/// as off-ray values.
pub struct DeltaScalar {
    lambda1: f64,
    lambda2: f64,
    engine: CauchyEngine,
    /// Per window panel: map derivative times density at the nodes.
    window_mf: Vec<Vec<C64>>,
    /// Rational-map tails: (fold point, density at the folded nodes).
    tails: [DeltaTail; 2],
    hat1: C64,
}

struct DeltaTail {
    fold: f64,
    fv: Vec<f64>,
}

/// ln(1 - r(s)^2) on the real axis; real and nonnegative since r is purely
/// imaginary there.
fn ray_density(e: C64, s: f64) -> f64 {
    let r = eval_scattering(e, c64(s, 0.0), None);
    (1.0 - (r * r).re).ln()
}

impl DeltaScalar {
    pub fn new(e: C64, lambda1: f64, lambda2: f64) -> Result<DeltaScalar> {
        if !(e.im > 0.0) {
            return Err(Error::config("branch endpoint must lie in the upper half-plane"));
        }
        if !(lambda1 < e.re && e.re < lambda2) {
            return Err(Error::config(
                "detachment abscissas must bracket the branch abscissa",
            ));
        }
        let mut maps = Vec::new();
        for k in 0..DELTA_WINDOW_BREAKS.len() - 1 {
            let (lo, hi) = (DELTA_WINDOW_BREAKS[k], DELTA_WINDOW_BREAKS[k + 1]);
            maps.push(ClusterMap::new(
                c64(lambda1 - hi, 0.0),
                c64(lambda1 - lo, 0.0),
                1,
                1,
            ));
        }
        for k in 0..DELTA_WINDOW_BREAKS.len() - 1 {
            let (lo, hi) = (DELTA_WINDOW_BREAKS[k], DELTA_WINDOW_BREAKS[k + 1]);
            maps.push(ClusterMap::new(
                c64(lambda2 + lo, 0.0),
                c64(lambda2 + hi, 0.0),
                1,
                1,
            ));
        }
        let engine = CauchyEngine::from_maps(
            maps.iter().cloned().map(|m| (m, DELTA_WINDOW_NODES)).collect(),
        );
        let rule = gauss_legendre(DELTA_WINDOW_NODES);
        let mut window_mf = Vec::new();
        let mut f_int = c64(0.0, 0.0);
        for map in &maps {
            let mut mf = Vec::with_capacity(rule.nodes.len());
            for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
                let m = map.ds(u);
                let f = ray_density(e, map.s(u).re);
                mf.push(m * f);
                f_int += w * m * f;
            }
            window_mf.push(mf);
        }
        // fold s = fold / v, v in (0, 1]; the folded density vanishes
        // quadratically at v = 0 and is analytic on the closed interval
        let span = DELTA_WINDOW_BREAKS[DELTA_WINDOW_BREAKS.len() - 1];
        let tail_rule = gauss_legendre(DELTA_TAIL_NODES);
        let mut tails = Vec::new();
        for fold in [lambda1 - span, lambda2 + span] {
            let mut fv = Vec::with_capacity(tail_rule.nodes.len());
            for &un in &tail_rule.nodes {
                let v = 0.5 * (un + 1.0);
                fv.push(ray_density(e, fold / v));
            }
            // moment of the folded tail: int f ds = int f(fold/v) |fold| / v^2 dv
            for ((&un, &wn), &f) in tail_rule.nodes.iter().zip(&tail_rule.weights).zip(&fv) {
                let v = 0.5 * (un + 1.0);
                f_int += 0.5 * wn * f * fold.abs() / (v * v);
            }
            tails.push(DeltaTail { fold, fv });
        }
        let tails = match <[DeltaTail; 2]>::try_from(tails) {
            Ok(t) => t,
            Err(_) => unreachable!(),
        };
        // delta(z) = 1 + hat1 / z + O(1/z^2)
        let hat1 = -f_int / (2.0 * PI * I);
        Ok(DeltaScalar {
            lambda1,
            lambda2,
            engine,
            window_mf,
            tails,
            hat1,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    /// Coefficient of 1/z in the expansion of delta at infinity; purely
    /// imaginary since the ray density is real.
    pub fn moment(&self) -> C64 {
        self.hat1
    }

    fn tail_log(&self, z: C64) -> C64 {
        let rule = gauss_legendre(DELTA_TAIL_NODES);
        let mut acc = c64(0.0, 0.0);
        for tail in &self.tails {
            let s0 = tail.fold;
            for ((&un, &wn), &f) in rule.nodes.iter().zip(&rule.weights).zip(&tail.fv) {
                let v = 0.5 * (un + 1.0);
                // kernel of int_{tail} f(s)/(s-z) ds after folding
                acc += 0.5 * wn * f * s0.abs() / (v * (s0 - v * z));
            }
        }
        acc / (2.0 * PI * I)
    }

    /// log delta(z) for z off the two rays.
    pub fn log_value(&self, z: C64) -> C64 {
        let mut acc = c64(0.0, 0.0);
        for (k, mf) in self.window_mf.iter().enumerate() {
            let wts = self.engine.weights(k, z);
            for (om, v) in wts.iter().zip(mf) {
                acc += om * v;
            }
        }
        acc + self.tail_log(z)
    }

    pub fn value(&self, z: C64) -> C64 {
        self.log_value(z).exp()
    }

    /// Boundary value of delta on a ray, from above (`ImSide::Upper`) or
    /// below.  The point must fall in the panelled part of the ray.
    pub fn sided(&self, lambda: f64, side: ImSide) -> Result<C64> {
        let span = DELTA_WINDOW_BREAKS[DELTA_WINDOW_BREAKS.len() - 1];
        let on_left = lambda > self.lambda1 - span && lambda < self.lambda1;
        let on_right = lambda > self.lambda2 && lambda < self.lambda2 + span;
        if !on_left && !on_right {
            return Err(Error::config(format!(
                "sided scalar-factor value needs a point inside the panelled rays, got {lambda}"
            )));
        }
        let cside = match side {
            ImSide::Upper => Side::Left,
            ImSide::Lower => Side::Right,
        };
        let mut acc = c64(0.0, 0.0);
        for (k, mf) in self.window_mf.iter().enumerate() {
            let map = &self.engine.panels[k].map;
            let (a, b) = (map.a.re, map.b.re);
            let wts = if lambda > a && lambda < b {
                let u0 = invert_real_map(map, lambda);
                self.engine.weights_sided(k, u0, cside)
            } else {
                self.engine.weights(k, c64(lambda, 0.0))
            };
            for (om, v) in wts.iter().zip(mf) {
                acc += om * v;
            }
        }
        Ok((acc + self.tail_log(c64(lambda, 0.0))).exp())
    }
}

/// Parameter of a point on a chord map with real endpoints, by bisection on
/// the real part (monotone along the chord) with Newton polish.
fn invert_real_map(map: &ClusterMap, target: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    if map.s(lo).re > map.s(hi).re {
        std::mem::swap(&mut lo, &mut hi);
    }
    for _ in 0..70 {
        let mid = 0.5 * (lo + hi);
        if map.s(mid).re <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-14 {
            break;
        }
    }
    let mut u = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = map.ds(u).re;
        if d.abs() > 1e-300 {
            let step = (map.s(u).re - target) / d;
            if step.is_finite() && step.abs() < 0.5 {
                u -= step;
            }
        }
    }
    u.clamp(-1.0 + 1e-12, 1.0 - 1e-12)
}

/// How to pose and solve the problem at one (t, x).
#[derive(Debug, Clone, PartialEq)]
pub enum SolveStrategy {
    /// Explicit triangular solution, valid up to the wave front (t <= x).
    ClosedForm,
    /// Undeformed contour (axis plus branch segment), truncated at the
    /// radius; usable at any (t, x) with algebraic truncation error.
    Sigma,
    /// Undeformed band with the far axis rotated into decaying rays;
    /// spectrally accurate for t <= x with compact support.
    Rotated { junction: f64 },
    /// Detached branches with the scalar factor; for t > x with a
    /// compactly supported profile.
    Lens { lambda1: f64, lambda2: f64 },
    /// Open curve pair enclosing the axis; for t > x with an unbounded
    /// profile (the curves swallow both the axis and the segment jump).
    Open,
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    /// Quadrature budget per logical contour piece.
    pub nodes_per_piece: usize,
    /// Cut radius for unbounded pieces.
    pub truncation_radius: f64,
    /// Extra node-clustering exponent applied at singular endpoints.
    pub clustering: u32,
    /// Angle of the rotated tails off the axis.
    pub tail_angle: f64,
    /// Geometry of the deformed contours.
    pub shape: LensShape,
    /// Upper bound on the 1-norm condition estimate of the collocation
    /// matrix; beyond it the solve reports a numerical error.
    pub cond_limit: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            nodes_per_piece: 128,
            truncation_radius: 60.0,
            clustering: 2,
            tail_angle: std::f64::consts::FRAC_PI_4,
            shape: LensShape::default(),
            cond_limit: 1e12,
        }
    }
}

/// Default detachment abscissas: clear of the support, the branch endpoint,
/// and the stationary abscissas, with a margin that grows towards the wave
/// front where the oscillatory region widens.
pub fn default_detachment(
    tr: &BroadeningTransform,
    e: C64,
    t: f64,
    x: f64,
) -> Result<(f64, f64)> {
    let supp = tr
        .support()
        .ok_or_else(|| Error::config("detachment abscissas need a compactly supported profile"))?;
    if !(t > x && x >= 0.0) {
        return Err(Error::config("detachment applies past the wave front (t > x >= 0)"));
    }
    let mut reach = supp.max(e.norm());
    if x > 0.0 {
        let stat = stationary_points(tr, t, x)?;
        if let Some(l) = stat.left {
            reach = reach.max(l.abs());
        }
        if let Some(r) = stat.right {
            reach = reach.max(r.abs());
        }
        let xi = x / (4.0 * (t - x));
        reach += 2.0 * 2.0f64.max(xi.sqrt());
    } else {
        reach += 4.0;
    }
    Ok((-reach, reach))
}

/// Default junction for the rotated-tail contour.
pub fn default_junction(tr: &BroadeningTransform, e: C64) -> f64 {
    let reach = match tr.support() {
        Some(l) => l,
        None => match tr.profile() {
            crate::broadening::BroadeningProfile::Unbounded { width, .. } => *width,
            _ => 1.0,
        },
    };
    reach.max(e.re.abs()) + 2.0
}

/// Strategy selector used by the reconstruction pipeline.
pub fn choose_strategy(tr: &BroadeningTransform, e: C64, t: f64, x: f64) -> Result<SolveStrategy> {
    if t <= x {
        return Ok(SolveStrategy::ClosedForm);
    }
    if tr.support().is_some() {
        let (l1, l2) = default_detachment(tr, e, t, x)?;
        Ok(SolveStrategy::Lens { lambda1: l1, lambda2: l2 })
    } else {
        Ok(SolveStrategy::Open)
    }
}

/// Phase boundary values on the axis from above and below.  Off the support
/// of a compact profile the phase is continuous and both sides coincide.
fn axis_theta_pair(tr: &BroadeningTransform, l: f64, t: f64, x: f64) -> (C64, C64) {
    let inside = match tr.support() {
        Some(supp) => l.abs() < supp,
        None => true,
    };
    if inside {
        (
            theta_sided(tr, l, ImSide::Upper, t, x),
            theta_sided(tr, l, ImSide::Lower, t, x),
        )
    } else {
        let th = theta(tr, c64(l, 0.0), t, x);
        (th, th)
    }
}

/// Jump matrix of the chosen problem at a point of a given role.
///
/// `delta` is present exactly for the detached-branch variant, where the
/// axis, segment, and branch entries carry powers of the scalar factor.
fn jump_at(
    tr: &BroadeningTransform,
    e: C64,
    t: f64,
    x: f64,
    role: PieceRole,
    s: C64,
    delta: Option<&DeltaScalar>,
) -> Mat2 {
    let one = c64(1.0, 0.0);
    let d2 = delta.map(|d| {
        let v = d.value(s);
        v * v
    });
    match role {
        PieceRole::Axis => {
            let l = s.re;
            let r = eval_scattering(e, c64(l, 0.0), None);
            let n = tr.density(l);
            let q = (-PI * n * x).exp();
            let (thp, thm) = axis_theta_pair(tr, l, t, x);
            let ep = (-2.0 * I * thp).exp();
            let em = (2.0 * I * thm).exp();
            let (up, lo) = match d2 {
                Some(d2) => (-r * ep / d2, r * em * d2),
                None => (-r * ep, r * em),
            };
            Mat2::new(one - r * r * q, up, lo, one)
        }
        PieceRole::SegmentUpper => {
            let h = segment_jump(e, s.im);
            let th = theta(tr, s, t, x);
            let v = h * (-2.0 * I * th).exp();
            Mat2::upper(match d2 {
                Some(d2) => v / d2,
                None => v,
            })
        }
        PieceRole::SegmentLower => {
            let h = segment_jump(e, s.im);
            let th = theta(tr, s, t, x);
            let v = h * (2.0 * I * th).exp();
            Mat2::lower(match d2 {
                Some(d2) => v * d2,
                None => v,
            })
        }
        PieceRole::LensUpper => {
            let ab = I * e.im / (2.0 * eval_branch(e, s, None).w);
            let th = theta(tr, s, t, x);
            let d2 = d2.expect("detached branches occur only with the scalar factor");
            Mat2::lower(ab * d2 * (2.0 * I * th).exp())
        }
        PieceRole::LensLower => {
            let ab = I * e.im / (2.0 * eval_branch(e, s, None).w);
            let th = theta(tr, s, t, x);
            let d2 = d2.expect("detached branches occur only with the scalar factor");
            Mat2::upper(-ab / d2 * (-2.0 * I * th).exp())
        }
        PieceRole::OpenUpper => {
            let r = eval_scattering(e, s, None);
            let th = theta(tr, s, t, x);
            Mat2::upper(-r * (-2.0 * I * th).exp())
        }
        PieceRole::OpenLower => {
            let r = eval_scattering(e, s, None);
            let th = theta(tr, s, t, x);
            Mat2::lower(r * (2.0 * I * th).exp())
        }
        PieceRole::TailUpperRight | PieceRole::TailUpperLeft => {
            let r = eval_scattering(e, s, None);
            let th = theta(tr, s, t, x);
            let beta = -r * (-2.0 * I * th).exp();
            Mat2::upper(if role == PieceRole::TailUpperRight { beta } else { -beta })
        }
        PieceRole::TailLowerRight | PieceRole::TailLowerLeft => {
            let r = eval_scattering(e, s, None);
            let th = theta(tr, s, t, x);
            let gamma = r * (2.0 * I * th).exp();
            Mat2::lower(if role == PieceRole::TailLowerRight { gamma } else { -gamma })
        }
    }
}

/// Region bookkeeping of the deformed variants, for translating the solved
/// matrix back to the undeformed solution.
enum Geometry {
    Sigma,
    Rotated { junction: f64, angle: f64 },
    Lens { lambda1: f64, lambda2: f64, opening: f64 },
    Open { upper: Vec<(f64, f64)> },
}

struct NumericData {
    disc: Discretization,
    engine: CauchyEngine,
    jumps: Vec<Mat2>,
    v: Vec<Mat2>,
    geometry: Geometry,
    delta: Option<DeltaScalar>,
}

enum Repr {
    Closed,
    Numeric(Box<NumericData>),
}

/// Solved Riemann-Hilbert problem at one (t, x).
pub struct RhSolution<'a> {
    pub strategy: SolveStrategy,
    pub t: f64,
    pub x: f64,
    pub e: C64,
    /// 1-norm condition estimate of the collocation matrix (1 for the
    /// closed form).
    pub cond_estimate: f64,
    /// Relative residual of the solved linear system (0 for the closed
    /// form).
    pub linear_residual: f64,
    tr: &'a BroadeningTransform,
    repr: Repr,
}

/// Explicit solution up to the wave front: upper triangular in the upper
/// half-plane, lower triangular in the lower one.  At a real argument the
/// value from above is returned.
pub fn closed_form_m(tr: &BroadeningTransform, e: C64, t: f64, x: f64, z: C64) -> Mat2 {
    if z.im > 0.0 {
        let r = eval_scattering(e, z, None);
        let th = theta(tr, z, t, x);
        Mat2::upper(r * (-2.0 * I * th).exp())
    } else if z.im < 0.0 {
        let r = eval_scattering(e, z, None);
        let th = theta(tr, z, t, x);
        Mat2::lower(r * (2.0 * I * th).exp())
    } else {
        let r = eval_scattering(e, c64(z.re, 0.0), None);
        let th = axis_theta_pair(tr, z.re, t, x).0;
        Mat2::upper(r * (-2.0 * I * th).exp())
    }
}

fn support_breaks(tr: &BroadeningTransform) -> Vec<f64> {
    match tr.support() {
        Some(l) => vec![-l, l],
        None => Vec::new(),
    }
}

fn level_samples(
    tr: &BroadeningTransform,
    t: f64,
    x: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(2 * n);
    for k in 0..n {
        let lam = lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let nu = level_line(tr, t, x, lam)?;
        out.push((lam, nu));
        out.push((lam, -nu));
    }
    Ok(out)
}

pub fn solve<'a>(
    tr: &'a BroadeningTransform,
    e: C64,
    t: f64,
    x: f64,
    strategy: SolveStrategy,
    params: &SolveParams,
) -> Result<RhSolution<'a>> {
    if !(e.im > 0.0) {
        return Err(Error::config("branch endpoint must lie in the upper half-plane"));
    }
    if !t.is_finite() || !x.is_finite() || x < 0.0 {
        return Err(Error::config("evaluation point needs finite t and x >= 0"));
    }
    let (contour, geometry, delta) = match &strategy {
        SolveStrategy::ClosedForm => {
            if t > x {
                return Err(Error::config(
                    "closed form is the solution only up to the wave front (t <= x)",
                ));
            }
            return Ok(RhSolution {
                strategy,
                t,
                x,
                e,
                cond_estimate: 1.0,
                linear_residual: 0.0,
                tr,
                repr: Repr::Closed,
            });
        }
        SolveStrategy::Sigma => (
            build_sigma(e)?.with_axis_breakpoints(&support_breaks(tr)),
            Geometry::Sigma,
            None,
        ),
        SolveStrategy::Rotated { junction } => {
            let supp = tr.support().ok_or_else(|| {
                Error::config("rotated tails need a compactly supported profile")
            })?;
            if t > x {
                return Err(Error::config(
                    "rotated tails decay only up to the wave front (t <= x)",
                ));
            }
            if *junction <= supp {
                return Err(Error::config(format!(
                    "axis junction {junction} must clear the support radius {supp}"
                )));
            }
            (
                build_sigma_rotated(e, *junction, params.tail_angle)?
                    .with_axis_breakpoints(&support_breaks(tr)),
                Geometry::Rotated {
                    junction: *junction,
                    angle: params.tail_angle,
                },
                None,
            )
        }
        SolveStrategy::Lens { lambda1, lambda2 } => {
            let supp = tr.support().ok_or_else(|| {
                Error::config("detached branches need a compactly supported profile")
            })?;
            if !(t > x && x >= 0.0) {
                return Err(Error::config(
                    "detached-branch deformation applies past the wave front (t > x >= 0)",
                ));
            }
            if !(*lambda2 > supp && *lambda1 < -supp) {
                return Err(Error::config(format!(
                    "detachment abscissas [{lambda1}, {lambda2}] must clear the support \
                     [-{supp}, {supp}]"
                )));
            }
            // At the medium boundary the phase has no oscillatory region and
            // the clearance check is vacuous.
            let samples = if x > 0.0 {
                let stat = stationary_points(tr, t, x)?;
                let lo = stat.left.unwrap_or(-supp);
                let hi = stat.right.unwrap_or(supp);
                level_samples(tr, t, x, lo, hi, 33)?
            } else {
                Vec::new()
            };
            let contour = build_deformed_contour(
                DeformationMode::Finite,
                e,
                *lambda1,
                *lambda2,
                &samples,
                &params.shape,
            )?
            .with_axis_breakpoints(&support_breaks(tr));
            let d = DeltaScalar::new(e, *lambda1, *lambda2)?;
            (
                contour,
                Geometry::Lens {
                    lambda1: *lambda1,
                    lambda2: *lambda2,
                    opening: params.shape.opening,
                },
                Some(d),
            )
        }
        SolveStrategy::Open => {
            if !(t > x && x > 0.0) {
                return Err(Error::config(
                    "open-curve deformation applies past the wave front (t > x > 0)",
                ));
            }
            let reach = match tr.support() {
                Some(l) => l,
                None => match tr.profile() {
                    crate::broadening::BroadeningProfile::Unbounded { width, .. } => *width,
                    _ => 1.0,
                },
            };
            let w = 3.0 * reach.max(1.0);
            let samples = level_samples(tr, t, x, e.re - w, e.re + w, 41)?;
            let contour =
                build_deformed_contour(DeformationMode::Infinite, e, -1.0, 1.0, &samples, &params.shape)?;
            let upper = polyline_breakpoints(&contour)?;
            (contour, Geometry::Open { upper }, None)
        }
    };
    let disc = discretize(
        &contour,
        params.nodes_per_piece,
        params.truncation_radius,
        params.clustering,
    )?;
    let engine = CauchyEngine::new(&disc);
    let mut jumps = Vec::with_capacity(disc.total_nodes);
    for piece in &disc.pieces {
        for &s in &piece.s {
            jumps.push(jump_at(tr, e, t, x, piece.role, s, delta.as_ref()));
        }
    }
    let (v, cond_estimate, linear_residual) =
        solve_linear(&disc, &engine, &jumps, params.cond_limit)?;
    Ok(RhSolution {
        strategy,
        t,
        x,
        e,
        cond_estimate,
        linear_residual,
        tr,
        repr: Repr::Numeric(Box::new(NumericData {
            disc,
            engine,
            jumps,
            v,
            geometry,
            delta,
        })),
    })
}

/// Breakpoints (abscissa, height) of the upper open curve, ascending.
fn polyline_breakpoints(contour: &Contour) -> Result<Vec<(f64, f64)>> {
    let piece = contour
        .pieces
        .iter()
        .find(|p| p.family == crate::contour::PieceFamily::OpenUpper)
        .ok_or_else(|| Error::config("open-curve contour lacks its upper curve"))?;
    let mut pts = Vec::with_capacity(piece.chords.len() + 1);
    for (k, ch) in piece.chords.iter().enumerate() {
        if k == 0 {
            pts.push((ch.a.re, ch.a.im));
        }
        pts.push((ch.b.re, ch.b.im));
    }
    Ok(pts)
}

fn polyline_height(upper: &[(f64, f64)], lambda: f64) -> f64 {
    match upper.first() {
        None => 0.0,
        Some(&(l0, h0)) => {
            if lambda <= l0 {
                return h0;
            }
            for pair in upper.windows(2) {
                let (la, ha) = pair[0];
                let (lb, hb) = pair[1];
                if lambda <= lb {
                    if lb == la {
                        return hb;
                    }
                    return ha + (hb - ha) * (lambda - la) / (lb - la);
                }
            }
            upper.last().map(|&(_, h)| h).unwrap_or(0.0)
        }
    }
}

/// Assembles and solves the collocated singular integral equation
/// V_i - m_i sum_j Omega_ij V_j D_j = m_i sum_j Omega_ij m_j D_j,
/// with D = I - J and V = m W, returning (V, condition estimate,
/// relative linear residual).
fn solve_linear(
    disc: &Discretization,
    engine: &CauchyEngine,
    jumps: &[Mat2],
    cond_limit: f64,
) -> Result<(Vec<Mat2>, f64, f64)> {
    let n = disc.total_nodes;
    let mut offsets = Vec::with_capacity(disc.pieces.len());
    let mut node_m = Vec::with_capacity(n);
    {
        let mut off = 0;
        for piece in &disc.pieces {
            offsets.push(off);
            off += piece.n();
            node_m.extend(piece.m.iter().copied());
        }
    }
    let d: Vec<Mat2> = jumps.iter().map(|j| Mat2::identity() - *j).collect();

    // sided Cauchy weights row per collocation node
    let mut omega = vec![c64(0.0, 0.0); n * n];
    for (kp, piece) in disc.pieces.iter().enumerate() {
        for (jn, (&u, &s)) in piece.u.iter().zip(&piece.s).enumerate() {
            let i = offsets[kp] + jn;
            for (kq, _) in disc.pieces.iter().enumerate() {
                let wts = if kq == kp {
                    engine.weights_sided(kq, u, Side::Left)
                } else {
                    engine.weights(kq, s)
                };
                let base = i * n + offsets[kq];
                omega[base..base + wts.len()].copy_from_slice(&wts);
            }
        }
    }

    let dim = 2 * n;
    let mut flat = vec![c64(0.0, 0.0); dim * dim];
    for i in 0..n {
        let mi = node_m[i];
        for j in 0..n {
            let g = mi * omega[i * n + j];
            let dj = &d[j];
            // A[(i,c),(j,b)] = delta - m_i Omega_ij D_j[b,c]
            for cc in 0..2 {
                for bb in 0..2 {
                    let mut v = -g * dj.at(bb, cc);
                    if i == j && cc == bb {
                        v += 1.0;
                    }
                    flat[(2 * i + cc) * dim + (2 * j + bb)] = v;
                }
            }
        }
    }
    let mut rhs = faer::Mat::<FaerC64>::zeros(dim, 2);
    for i in 0..n {
        let mi = node_m[i];
        let mut acc = Mat2::zero();
        for j in 0..n {
            acc = acc + d[j].scale(mi * omega[i * n + j] * node_m[j]);
        }
        for a in 0..2 {
            for cc in 0..2 {
                rhs.write(2 * i + cc, a, fc(acc.at(a, cc)));
            }
        }
    }
    let a_mat = faer::Mat::<FaerC64>::from_fn(dim, dim, |i, j| fc(flat[i * dim + j]));

    let mut norm1 = 0.0f64;
    for j in 0..dim {
        let mut col = 0.0;
        for i in 0..dim {
            col += flat[i * dim + j].norm();
        }
        norm1 = norm1.max(col);
    }

    let lu = PartialPivLu::new(a_mat.as_ref());
    let sol = lu.solve(rhs.as_ref());

    // relative residual of the solved system
    let prod = &a_mat * &sol;
    let mut res = 0.0f64;
    let mut bnorm = 0.0f64;
    for i in 0..dim {
        for k in 0..2 {
            res = res.max(cf(prod.read(i, k) - rhs.read(i, k)).norm());
            bnorm = bnorm.max(cf(rhs.read(i, k)).norm());
        }
    }
    let linear_residual = if bnorm > 0.0 { res / bnorm } else { res };
    if !linear_residual.is_finite() {
        return Err(Error::numerical("collocation solve produced non-finite values"));
    }

    let inv_norm1 = hager_inverse_norm1(&lu, dim);
    let cond = norm1 * inv_norm1;
    if cond > cond_limit {
        return Err(Error::numerical(format!(
            "collocation matrix condition estimate {cond:.3e} exceeds limit {cond_limit:.3e}"
        )));
    }

    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        v.push(Mat2::new(
            cf(sol.read(2 * j, 0)),
            cf(sol.read(2 * j + 1, 0)),
            cf(sol.read(2 * j, 1)),
            cf(sol.read(2 * j + 1, 1)),
        ));
    }
    Ok((v, cond, linear_residual))
}

/// Hager-style 1-norm estimate of the inverse through a handful of solves.
fn hager_inverse_norm1(lu: &PartialPivLu<FaerC64>, dim: usize) -> f64 {
    let mut x = faer::Mat::<FaerC64>::from_fn(dim, 1, |_, _| fc(c64(1.0 / dim as f64, 0.0)));
    let mut est = 0.0f64;
    let mut last_pick = usize::MAX;
    for _ in 0..5 {
        let mut y = x.clone();
        lu.solve_in_place(y.as_mut());
        let ynorm: f64 = (0..dim).map(|i| cf(y.read(i, 0)).norm()).sum();
        if ynorm > est {
            est = ynorm;
        }
        let mut xi = faer::Mat::<FaerC64>::from_fn(dim, 1, |i, _| {
            let v = cf(y.read(i, 0));
            let a = v.norm();
            fc(if a == 0.0 { c64(1.0, 0.0) } else { v / a })
        });
        lu.solve_conj_transpose_in_place(xi.as_mut());
        let mut zmax = 0.0;
        let mut pick = 0;
        for i in 0..dim {
            let a = cf(xi.read(i, 0)).norm();
            if a > zmax {
                zmax = a;
                pick = i;
            }
        }
        let zx: f64 = (0..dim)
            .map(|i| (cf(xi.read(i, 0)).conj() * cf(x.read(i, 0))).re)
            .sum();
        if zmax <= zx.abs() + 1e-14 * est.max(1.0) || pick == last_pick {
            break;
        }
        last_pick = pick;
        x = faer::Mat::<FaerC64>::from_fn(dim, 1, |i, _| {
            fc(if i == pick { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
        });
    }
    est
}

impl NumericData {
    /// I + sum_j Omega_j (V_j + m_j I) D_j with plain weights at z, or
    /// sided weights on one panel.
    fn raw_value(&self, z: C64, sided: Option<(usize, f64, Side)>) -> Mat2 {
        let mut acc = Mat2::identity();
        let mut off = 0;
        for (k, piece) in self.disc.pieces.iter().enumerate() {
            let wts = match sided {
                Some((kk, u0, side)) if kk == k => self.engine.weights_sided(k, u0, side),
                _ => self.engine.weights(k, z),
            };
            for (j, om) in wts.iter().enumerate() {
                let g = off + j;
                let mu = (self.v[g] + Mat2::identity().scale(piece.m[j]))
                    * (Mat2::identity() - self.jumps[g]);
                acc = acc + mu.scale(*om);
            }
            off += piece.n();
        }
        acc
    }

    fn axis_panel_containing(&self, lambda: f64) -> Option<(usize, f64)> {
        for (k, piece) in self.disc.pieces.iter().enumerate() {
            if piece.role != PieceRole::Axis {
                continue;
            }
            let (a, b) = (piece.map.a.re, piece.map.b.re);
            let (lo, hi) = (a.min(b), a.max(b));
            if lambda > lo && lambda < hi {
                return Some((k, invert_real_map(&piece.map, lambda)));
            }
        }
        None
    }
}

impl<'a> RhSolution<'a> {
    /// Broadening transform this solution was built against.
    pub fn transform(&self) -> &'a BroadeningTransform {
        self.tr
    }

    /// The undeformed solution at an off-contour point: the solved matrix
    /// with the region factors of the deformation unwound.
    pub fn eval(&self, z: C64) -> Mat2 {
        let nd = match &self.repr {
            Repr::Closed => return closed_form_m(self.tr, self.e, self.t, self.x, z),
            Repr::Numeric(nd) => nd,
        };
        let raw = nd.raw_value(z, None);
        let (t, x, e) = (self.t, self.x, self.e);
        match &nd.geometry {
            Geometry::Sigma => raw,
            Geometry::Rotated { junction, angle } => {
                let (j, al) = (*junction, *angle);
                let in_ur = z.im > 0.0 && arg_in(z - c64(j, 0.0), 0.0, al);
                let in_ul = z.im > 0.0 && arg_in(z - c64(-j, 0.0), PI - al, PI);
                let in_lr = z.im < 0.0 && arg_in(z - c64(j, 0.0), -al, 0.0);
                let in_ll = z.im < 0.0 && arg_in(z - c64(-j, 0.0), -PI, -PI + al);
                if in_ur || in_ul {
                    let r = eval_scattering(e, z, None);
                    let th = theta(self.tr, z, t, x);
                    raw * Mat2::upper(r * (-2.0 * I * th).exp())
                } else if in_lr || in_ll {
                    let r = eval_scattering(e, z, None);
                    let th = theta(self.tr, z, t, x);
                    raw * Mat2::lower(r * (2.0 * I * th).exp())
                } else {
                    raw
                }
            }
            Geometry::Lens { lambda1, lambda2, opening } => {
                let al = *opening;
                let delta = nd.delta.as_ref().expect("detached branches carry the scalar factor");
                let in_u = (z.im > 0.0 && arg_in(z - c64(*lambda2, 0.0), 0.0, al))
                    || (z.im > 0.0 && arg_in(z - c64(*lambda1, 0.0), PI - al, PI));
                let in_l = (z.im < 0.0 && arg_in(z - c64(*lambda2, 0.0), -al, 0.0))
                    || (z.im < 0.0 && arg_in(z - c64(*lambda1, 0.0), -PI, -PI + al));
                let dv = delta.value(z);
                let undone = if in_u {
                    let ab = I * e.im / (2.0 * eval_branch(e, z, None).w);
                    let th = theta(self.tr, z, t, x);
                    raw * Mat2::lower(-ab * dv * dv * (2.0 * I * th).exp())
                } else if in_l {
                    let ab = I * e.im / (2.0 * eval_branch(e, z, None).w);
                    let th = theta(self.tr, z, t, x);
                    raw * Mat2::upper(-ab / (dv * dv) * (-2.0 * I * th).exp())
                } else {
                    raw
                };
                undone * Mat2::diag_pow(dv.inv())
            }
            Geometry::Open { upper } => {
                let h = polyline_height(upper, z.re);
                if z.im > 0.0 && z.im < h {
                    let r = eval_scattering(e, z, None);
                    let th = theta(self.tr, z, t, x);
                    raw * Mat2::upper(r * (-2.0 * I * th).exp())
                } else if z.im < 0.0 && z.im > -h {
                    let r = eval_scattering(e, z, None);
                    let th = theta(self.tr, z, t, x);
                    raw * Mat2::lower(r * (2.0 * I * th).exp())
                } else {
                    raw
                }
            }
        }
    }

    /// Boundary value M_plus on the real axis, where the density matrix is
    /// reconstructed.  The abscissa must lie inside the axis coverage of
    /// the contour (between the junctions or detachment abscissas).
    pub fn boundary_value_support(&self, lambda: f64) -> Result<Mat2> {
        let nd = match &self.repr {
            Repr::Closed => {
                let r = eval_scattering(self.e, c64(lambda, 0.0), None);
                let th = axis_theta_pair(self.tr, lambda, self.t, self.x).0;
                return Ok(Mat2::upper(r * (-2.0 * I * th).exp()));
            }
            Repr::Numeric(nd) => nd,
        };
        match &nd.geometry {
            Geometry::Open { .. } => {
                let raw = nd.raw_value(c64(lambda, 0.0), None);
                let r = eval_scattering(self.e, c64(lambda, 0.0), None);
                let th = axis_theta_pair(self.tr, lambda, self.t, self.x).0;
                Ok(raw * Mat2::upper(r * (-2.0 * I * th).exp()))
            }
            _ => {
                let (k, u0) = nd.axis_panel_containing(lambda).ok_or_else(|| {
                    Error::config(format!(
                        "abscissa {lambda} is outside the axis coverage of the contour"
                    ))
                })?;
                let raw = nd.raw_value(c64(lambda, 0.0), Some((k, u0, Side::Left)));
                match &nd.geometry {
                    Geometry::Lens { .. } => {
                        let dv = nd
                            .delta
                            .as_ref()
                            .expect("detached branches carry the scalar factor")
                            .value(c64(lambda, 0.0));
                        Ok(raw * Mat2::diag_pow(dv.inv()))
                    }
                    _ => Ok(raw),
                }
            }
        }
    }

    /// Coefficient of 1/z in M at infinity.
    pub fn moment(&self) -> Mat2 {
        let nd = match &self.repr {
            Repr::Closed => return Mat2::zero(),
            Repr::Numeric(nd) => nd,
        };
        let mut acc = Mat2::zero();
        let mut off = 0;
        for piece in &nd.disc.pieces {
            for j in 0..piece.n() {
                let g = off + j;
                let mu = (nd.v[g] + Mat2::identity().scale(piece.m[j]))
                    * (Mat2::identity() - nd.jumps[g]);
                acc = acc + mu.scale(c64(piece.w[j], 0.0));
            }
            off += piece.n();
        }
        let mut m = acc.scale(I / (2.0 * PI));
        if let Some(delta) = &nd.delta {
            m = m + Mat2::sigma3().scale(-delta.moment());
        }
        m
    }

    /// Field envelope carried by the solution, -4i times the upper-right
    /// moment entry.
    pub fn field(&self) -> C64 {
        -4.0 * I * self.moment().at(0, 1)
    }

    /// Largest jump defect max |M_minus - M_plus J| / (1 + |J|) over
    /// held-out probe points drawn between the collocation nodes.
    pub fn jump_residual(&self, probes_per_piece: usize, seed: u64) -> f64 {
        let nd = match &self.repr {
            Repr::Closed => return 0.0,
            Repr::Numeric(nd) => nd,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for (k, piece) in nd.disc.pieces.iter().enumerate() {
            for _ in 0..probes_per_piece {
                let q: f64 = rng.gen();
                let u0 = -1.0 + 2.0 * (0.05 + 0.90 * q);
                let s = piece.map.s(u0);
                let jm = jump_at(self.tr, self.e, self.t, self.x, piece.role, s, nd.delta.as_ref());
                let mp = nd.raw_value(s, Some((k, u0, Side::Left)));
                let mm = nd.raw_value(s, Some((k, u0, Side::Right)));
                let res = (mm - mp * jm).norm_max() / (1.0 + jm.norm_max());
                worst = worst.max(res);
            }
        }
        worst
    }
}

fn arg_in(z: C64, lo: f64, hi: f64) -> bool {
    let a = z.arg();
    a > lo && a < hi
}
