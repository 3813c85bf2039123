//! Contour geometry for the Riemann-Hilbert problems.
//!
//! Three families of contours are built here: the undeformed cross (the real
//! axis together with the vertical branch segment), the deformed contours
//! used past the wave front, and a rotated-tail variant of the cross whose
//! truncated axis ends continue into the half-planes where the triangular
//! jump factors decay.  [`discretize`] turns any of them into clustered
//! Gauss-Legendre panels ready for the collocation solver.

use crate::quad::{gauss_legendre, ClusterMap};
use crate::{c64, C64, Error, Result};

/// Classification of a logical contour piece before subdivision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceFamily {
    /// Part of the real axis.
    Axis,
    /// The vertical branch segment joining the endpoint to its conjugate.
    Segment,
    /// Detached branch of the deformed contour in the upper half-plane.
    LensUpper,
    /// Mirror branch in the lower half-plane.
    LensLower,
    /// Open curve above the axis (unbounded-support deformation).
    OpenUpper,
    /// Its mirror below the axis.
    OpenLower,
    /// Rotated continuation of the truncated axis, by quadrant.
    TailUpperRight,
    TailLowerRight,
    TailUpperLeft,
    TailLowerLeft,
}

/// Jump-rule tag carried by a discretized panel.  Identical to the family
/// except that the branch segment resolves into its upper and lower halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceRole {
    Axis,
    SegmentUpper,
    SegmentLower,
    LensUpper,
    LensLower,
    OpenUpper,
    OpenLower,
    TailUpperRight,
    TailLowerRight,
    TailUpperLeft,
    TailLowerLeft,
}

/// One straight oriented chord.  Unbounded ends extend the line through
/// `a`..`b` beyond the marked endpoint; they are cut at the truncation
/// radius during discretization.
#[derive(Debug, Clone)]
pub struct Chord {
    pub a: C64,
    pub b: C64,
    pub unbounded_start: bool,
    pub unbounded_end: bool,
    /// The jump tends to the identity along every unbounded direction.
    pub decays: bool,
    /// Node-clustering exponents (1..=4) at the start and end.
    pub cl_start: u32,
    pub cl_end: u32,
    /// Inverse-fourth-root endpoint singularity markers.
    pub sing_start: bool,
    pub sing_end: bool,
}

impl Chord {
    fn finite(a: C64, b: C64, cl_start: u32, cl_end: u32) -> Self {
        Chord {
            a,
            b,
            unbounded_start: false,
            unbounded_end: false,
            decays: true,
            cl_start,
            cl_end,
            sing_start: false,
            sing_end: false,
        }
    }

    fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// A logical contour piece: one jump-rule family realized by one or more
/// chords listed in orientation order.
#[derive(Debug, Clone)]
pub struct LogicalPiece {
    pub family: PieceFamily,
    pub chords: Vec<Chord>,
}

/// Oriented contour with junction bookkeeping.
#[derive(Debug, Clone)]
pub struct Contour {
    pub pieces: Vec<LogicalPiece>,
    /// Points where pieces meet or cross; collocation nodes keep clear of
    /// these and chords are split there.
    pub intersections: Vec<C64>,
    /// The contour is invariant under complex conjugation.
    pub symmetric: bool,
    /// Extra abscissas at which axis pieces are split (support endpoints of
    /// a compactly supported weight, for instance).
    pub axis_breakpoints: Vec<f64>,
}

impl Contour {
    /// Returns the contour with additional axis split abscissas.
    pub fn with_axis_breakpoints(mut self, pts: &[f64]) -> Self {
        self.axis_breakpoints.extend_from_slice(pts);
        self.axis_breakpoints
            .sort_by(|p, q| p.partial_cmp(q).unwrap());
        self.axis_breakpoints.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
        self
    }
}

/// Which deformation of the jump contour to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeformationMode {
    /// Compact support: detached branches leave the axis at two abscissas
    /// and the stretch between them keeps its jump.
    Finite,
    /// Unbounded support: a single open curve above the axis and its mirror
    /// image carry the whole jump.
    Infinite,
}

/// Shape controls for the deformed contours.
#[derive(Debug, Clone)]
pub struct LensShape {
    /// Angle (radians, measured from the positive real direction) at which
    /// the detached branches leave the axis.
    pub opening: f64,
    /// Margin factor by which the open curve clears the branch endpoint.
    pub clearance: f64,
    /// Height floor for the far reaches of the open curve.
    pub floor: f64,
}

impl Default for LensShape {
    fn default() -> Self {
        LensShape {
            opening: 5.0 * std::f64::consts::PI / 12.0,
            clearance: 0.5,
            floor: 2e-3,
        }
    }
}

fn ensure_upper(e: C64) -> Result<()> {
    if !(e.im > 0.0) {
        return Err(Error::config(format!(
            "branch endpoint must lie in the open upper half-plane, got {e}"
        )));
    }
    Ok(())
}

fn segment_piece(e: C64) -> LogicalPiece {
    let mut ch = Chord::finite(e, e.conj(), 4, 4);
    ch.sing_start = true;
    ch.sing_end = true;
    LogicalPiece {
        family: PieceFamily::Segment,
        chords: vec![ch],
    }
}

/// Undeformed contour: the full real axis, oriented left to right, and the
/// branch segment from the endpoint down to its conjugate.
pub fn build_sigma(e: C64) -> Result<Contour> {
    ensure_upper(e)?;
    let axis = Chord {
        a: c64(-1.0, 0.0),
        b: c64(1.0, 0.0),
        unbounded_start: true,
        unbounded_end: true,
        decays: true,
        cl_start: 1,
        cl_end: 1,
        sing_start: false,
        sing_end: false,
    };
    Ok(Contour {
        pieces: vec![
            LogicalPiece {
                family: PieceFamily::Axis,
                chords: vec![axis],
            },
            segment_piece(e),
        ],
        intersections: vec![c64(e.re, 0.0)],
        symmetric: true,
        axis_breakpoints: Vec::new(),
    })
}

/// Undeformed contour with the axis cut at `junction` on both sides and
/// continued by four rays rotated into the half-planes, at `tail_angle`
/// radians from the axis.  On the rays the factored jump decays, so the
/// truncation error of the discretized system is spectrally small instead
/// of polynomial in the truncation radius.
pub fn build_sigma_rotated(e: C64, junction: f64, tail_angle: f64) -> Result<Contour> {
    ensure_upper(e)?;
    if !(junction > e.re.abs()) {
        return Err(Error::config(format!(
            "axis junction {junction} must lie beyond the branch abscissa {}",
            e.re
        )));
    }
    if !(tail_angle > 0.05 && tail_angle < 1.55) {
        return Err(Error::config(format!(
            "tail angle {tail_angle} out of range (0.05, 1.55)"
        )));
    }
    let dir = C64::from_polar(1.0, tail_angle);
    let tail = |foot: f64, d: C64, family: PieceFamily| LogicalPiece {
        family,
        chords: vec![Chord {
            a: c64(foot, 0.0),
            b: c64(foot, 0.0) + d,
            unbounded_start: false,
            unbounded_end: true,
            decays: true,
            cl_start: 2,
            cl_end: 1,
            sing_start: false,
            sing_end: false,
        }],
    };
    Ok(Contour {
        pieces: vec![
            LogicalPiece {
                family: PieceFamily::Axis,
                chords: vec![Chord::finite(c64(-junction, 0.0), c64(junction, 0.0), 2, 2)],
            },
            segment_piece(e),
            tail(junction, dir, PieceFamily::TailUpperRight),
            tail(junction, dir.conj(), PieceFamily::TailLowerRight),
            tail(-junction, -dir.conj(), PieceFamily::TailUpperLeft),
            tail(-junction, -dir, PieceFamily::TailLowerLeft),
        ],
        intersections: vec![c64(e.re, 0.0), c64(-junction, 0.0), c64(junction, 0.0)],
        symmetric: true,
        axis_breakpoints: Vec::new(),
    })
}

/// Deformed contour for points past the wave front.
///
/// `Finite` mode keeps the axis stretch `[lambda1, lambda2]` and the branch
/// segment, and attaches four detached branches leaving the axis at the two
/// detachment abscissas.  `Infinite` mode returns a single open curve above
/// the axis (bulging over the branch endpoint) together with its conjugate
/// mirror.  `level_line` carries samples of the boundary of the oscillatory
/// region, symmetric about the axis; it is used to validate the detachment
/// abscissas and to size the open curve.
pub fn build_deformed_contour(
    mode: DeformationMode,
    e: C64,
    lambda1: f64,
    lambda2: f64,
    level_line: &[(f64, f64)],
    shape: &LensShape,
) -> Result<Contour> {
    ensure_upper(e)?;
    let p = e.re;
    let c = e.im;
    match mode {
        DeformationMode::Finite => {
            if !(lambda1 < p && p < lambda2) {
                return Err(Error::config(format!(
                    "detachment abscissas must bracket the branch abscissa: \
                     {lambda1} < {p} < {lambda2} fails"
                )));
            }
            if !(shape.opening > 0.2 && shape.opening < 1.55) {
                return Err(Error::config(format!(
                    "opening angle {} out of range (0.2, 1.55)",
                    shape.opening
                )));
            }
            if !level_line.is_empty() {
                let lmax = level_line.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
                let lmin = level_line.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
                if lambda2 <= lmax || lambda1 >= lmin {
                    return Err(Error::config(format!(
                        "detachment abscissas [{lambda1}, {lambda2}] must clear the \
                         oscillatory region [{lmin}, {lmax}]"
                    )));
                }
            }
            let up = C64::from_polar(1.0, shape.opening);
            let l1 = c64(lambda1, 0.0);
            let l2 = c64(lambda2, 0.0);
            let branch = |a: C64, b: C64, unb_start: bool, family: PieceFamily| LogicalPiece {
                family,
                chords: vec![Chord {
                    a,
                    b,
                    unbounded_start: unb_start,
                    unbounded_end: !unb_start,
                    decays: true,
                    cl_start: if unb_start { 1 } else { 2 },
                    cl_end: if unb_start { 2 } else { 1 },
                    sing_start: false,
                    sing_end: false,
                }],
            };
            Ok(Contour {
                pieces: vec![
                    LogicalPiece {
                        family: PieceFamily::Axis,
                        chords: vec![Chord::finite(l1, l2, 2, 2)],
                    },
                    segment_piece(e),
                    // left pair, oriented into the foot
                    branch(l1 - up.conj(), l1, true, PieceFamily::LensUpper),
                    branch(l1 - up, l1, true, PieceFamily::LensLower),
                    // right pair, oriented out of the foot
                    branch(l2, l2 + up, false, PieceFamily::LensUpper),
                    branch(l2, l2 + up.conj(), false, PieceFamily::LensLower),
                ],
                intersections: vec![c64(p, 0.0), l1, l2],
                symmetric: true,
                axis_breakpoints: Vec::new(),
            })
        }
        DeformationMode::Infinite => {
            if level_line.is_empty() {
                return Err(Error::config(
                    "unbounded-support deformation needs level-line samples",
                ));
            }
            let scale = level_line
                .iter()
                .map(|s| s.0.abs().max(s.1.abs()))
                .fold(1.0, f64::max);
            for &(l, v) in level_line {
                let mirrored = level_line
                    .iter()
                    .any(|&(lm, vm)| (lm - l).abs() < 1e-9 * scale && (vm + v).abs() < 1e-9 * scale);
                if !mirrored {
                    return Err(Error::config(format!(
                        "level-line sample ({l}, {v}) has no mirror image"
                    )));
                }
            }
            if !(shape.floor > 0.0 && shape.floor < c) {
                return Err(Error::config(format!(
                    "curve height floor {} must lie in (0, {c})",
                    shape.floor
                )));
            }
            let gamma_top = level_line.iter().map(|s| s.1).fold(0.0f64, f64::max);
            let w_b = c.max(1.0);
            let mut bump = c + shape.clearance * c.max(1.0);
            if gamma_top > 1.3 * c {
                bump = bump.min(c + 0.6 * (gamma_top - c));
            }
            bump = bump.max(c + 2.0 * shape.floor);
            let run = 2.0f64.max(w_b);
            let fl = p - w_b - run;
            let fr = p + w_b + run;
            let h = shape.floor;
            let upper = vec![
                Chord {
                    a: c64(fl - 1.0, h),
                    b: c64(fl, h),
                    unbounded_start: true,
                    unbounded_end: false,
                    decays: true,
                    cl_start: 1,
                    cl_end: 2,
                    sing_start: false,
                    sing_end: false,
                },
                Chord::finite(c64(fl, h), c64(p - w_b, bump), 2, 2),
                Chord::finite(c64(p - w_b, bump), c64(p + w_b, bump), 2, 2),
                Chord::finite(c64(p + w_b, bump), c64(fr, h), 2, 2),
                Chord {
                    a: c64(fr, h),
                    b: c64(fr + 1.0, h),
                    unbounded_start: false,
                    unbounded_end: true,
                    decays: true,
                    cl_start: 2,
                    cl_end: 1,
                    sing_start: false,
                    sing_end: false,
                },
            ];
            let lower: Vec<Chord> = upper
                .iter()
                .map(|ch| Chord {
                    a: ch.a.conj(),
                    b: ch.b.conj(),
                    ..ch.clone()
                })
                .collect();
            Ok(Contour {
                pieces: vec![
                    LogicalPiece {
                        family: PieceFamily::OpenUpper,
                        chords: upper,
                    },
                    LogicalPiece {
                        family: PieceFamily::OpenLower,
                        chords: lower,
                    },
                ],
                intersections: Vec::new(),
                symmetric: true,
                axis_breakpoints: Vec::new(),
            })
        }
    }
}

/// One discretized panel: a clustered map over [-1, 1] with Gauss-Legendre
/// nodes, the mapped points, and the map derivative at the nodes.
#[derive(Debug, Clone)]
pub struct QuadPiece {
    pub map: ClusterMap,
    pub role: PieceRole,
    /// Index of the logical piece this panel came from.
    pub group: usize,
    pub u: Vec<f64>,
    pub s: Vec<C64>,
    pub w: Vec<f64>,
    /// Map derivative s'(u) at the nodes; the panel measure is w * m.
    pub m: Vec<C64>,
    pub sing_start: bool,
    pub sing_end: bool,
}

impl QuadPiece {
    pub fn n(&self) -> usize {
        self.u.len()
    }
}

/// A discretized contour.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub pieces: Vec<QuadPiece>,
    pub total_nodes: usize,
}

impl Discretization {
    /// Integral of f over the whole discretized contour.
    pub fn integrate<F: FnMut(C64) -> C64>(&self, mut f: F) -> C64 {
        let mut acc = c64(0.0, 0.0);
        for p in &self.pieces {
            for j in 0..p.n() {
                acc += p.w[j] * p.m[j] * f(p.s[j]);
            }
        }
        acc
    }
}

/// Cuts unbounded chord ends at the circle |z| = radius.
fn truncate_chord(ch: &Chord, radius: f64) -> Result<Chord> {
    if !ch.unbounded_start && !ch.unbounded_end {
        return Ok(ch.clone());
    }
    if !ch.decays {
        return Err(Error::config(
            "cannot truncate a piece whose jump does not decay",
        ));
    }
    let d = ch.b - ch.a;
    let alpha = d.norm_sqr();
    let beta = (ch.a * d.conj()).re;
    let gamma = ch.a.norm_sqr() - radius * radius;
    let disc = beta * beta - alpha * gamma;
    if disc <= 0.0 {
        return Err(Error::config(format!(
            "truncation radius {radius} does not reach the unbounded piece"
        )));
    }
    let sd = disc.sqrt();
    let mut out = ch.clone();
    if ch.unbounded_start {
        let s_lo = (-beta - sd) / alpha;
        if !(s_lo < 0.0) {
            return Err(Error::config(format!(
                "truncation radius {radius} is smaller than the finite part of a piece"
            )));
        }
        out.a = ch.a + s_lo * d;
        out.unbounded_start = false;
    }
    if ch.unbounded_end {
        let s_hi = (-beta + sd) / alpha;
        if !(s_hi > 1.0) {
            return Err(Error::config(format!(
                "truncation radius {radius} is smaller than the finite part of a piece"
            )));
        }
        out.b = ch.a + s_hi * d;
        out.unbounded_end = false;
    }
    Ok(out)
}

/// Splits a chord at interior intersection points and (for axis pieces)
/// at the registered axis breakpoints.  Interior cut ends get clustering
/// exponent 3; original ends keep their markers.
fn split_chord(ch: &Chord, family: PieceFamily, contour: &Contour) -> Vec<Chord> {
    let d = ch.b - ch.a;
    let len = d.norm();
    let len2 = d.norm_sqr();
    let mut cuts: Vec<f64> = Vec::new();
    let mut candidates: Vec<C64> = contour.intersections.clone();
    if family == PieceFamily::Axis {
        candidates.extend(contour.axis_breakpoints.iter().map(|&x| c64(x, 0.0)));
    }
    for q in candidates {
        let s = ((q - ch.a) * d.conj()).re / len2;
        if s > 1e-9 && s < 1.0 - 1e-9 && (q - (ch.a + s * d)).norm() < 1e-9 * len {
            cuts.push(s);
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-12);
    if cuts.is_empty() {
        return vec![ch.clone()];
    }
    let mut bounds = vec![0.0];
    bounds.extend(cuts);
    bounds.push(1.0);
    let mut out = Vec::with_capacity(bounds.len() - 1);
    for k in 0..bounds.len() - 1 {
        let first = k == 0;
        let last = k == bounds.len() - 2;
        out.push(Chord {
            a: ch.a + bounds[k] * d,
            b: ch.a + bounds[k + 1] * d,
            unbounded_start: false,
            unbounded_end: false,
            decays: true,
            cl_start: if first { ch.cl_start } else { 3 },
            cl_end: if last { ch.cl_end } else { 3 },
            sing_start: first && ch.sing_start,
            sing_end: last && ch.sing_end,
        });
    }
    out
}

/// Distributes the per-piece node budget over sub-chords.  Half the budget
/// is shared equally (solution layers concentrate at sub-chord ends, however
/// short the sub-chord), half proportionally to the square root of each
/// length (longer stretches carry more oscillation); at least two nodes per
/// sub-chord.
fn allocate_nodes(budget: usize, subs: &[Chord]) -> Result<Vec<usize>> {
    let k = subs.len();
    if budget < 2 * k {
        return Err(Error::config(format!(
            "node budget {budget} too small for {k} sub-chords"
        )));
    }
    let roots: Vec<f64> = subs.iter().map(|c| c.length().sqrt()).collect();
    let root_total: f64 = roots.iter().sum();
    let weights: Vec<f64> = roots
        .iter()
        .map(|w| 0.5 / k as f64 + 0.5 * w / root_total)
        .collect();
    let total: f64 = weights.iter().sum();
    let mut alloc: Vec<usize> = weights
        .iter()
        .map(|w| ((budget as f64) * w / total).floor().max(2.0) as usize)
        .collect();
    let mut frac: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| ((budget as f64) * w / total, i))
        .map(|(r, i)| (r - r.floor(), i))
        .collect();
    frac.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap());
    let mut idx = 0;
    while alloc.iter().sum::<usize>() < budget {
        alloc[frac[idx % k].1] += 1;
        idx += 1;
    }
    while alloc.iter().sum::<usize>() > budget {
        let i = (0..k).max_by_key(|&i| alloc[i]).unwrap();
        alloc[i] -= 1;
    }
    Ok(alloc)
}

fn resolve_role(family: PieceFamily, midpoint: C64) -> PieceRole {
    match family {
        PieceFamily::Axis => PieceRole::Axis,
        PieceFamily::Segment => {
            if midpoint.im > 0.0 {
                PieceRole::SegmentUpper
            } else {
                PieceRole::SegmentLower
            }
        }
        PieceFamily::LensUpper => PieceRole::LensUpper,
        PieceFamily::LensLower => PieceRole::LensLower,
        PieceFamily::OpenUpper => PieceRole::OpenUpper,
        PieceFamily::OpenLower => PieceRole::OpenLower,
        PieceFamily::TailUpperRight => PieceRole::TailUpperRight,
        PieceFamily::TailLowerRight => PieceRole::TailLowerRight,
        PieceFamily::TailUpperLeft => PieceRole::TailUpperLeft,
        PieceFamily::TailLowerLeft => PieceRole::TailLowerLeft,
    }
}

/// Discretizes a contour.  Each logical piece receives `nodes_per_piece`
/// nodes, shared among its sub-chords after splitting at intersections and
/// axis breakpoints.  Unbounded chords are cut at `truncation_radius`.
/// `clustering` is the exponent used at endpoints marked singular (the
/// inverse-fourth-root branch ends want 4).
pub fn discretize(
    contour: &Contour,
    nodes_per_piece: usize,
    truncation_radius: f64,
    clustering: u32,
) -> Result<Discretization> {
    if nodes_per_piece == 0 {
        return Err(Error::config("nodes_per_piece must be positive"));
    }
    if !(truncation_radius > 0.0) {
        return Err(Error::config("truncation radius must be positive"));
    }
    if !(1..=4).contains(&clustering) {
        return Err(Error::config("clustering exponent must lie in 1..=4"));
    }
    let mut pieces = Vec::new();
    let mut total = 0usize;
    for (gi, lp) in contour.pieces.iter().enumerate() {
        let mut subs: Vec<Chord> = Vec::new();
        for ch in &lp.chords {
            let cut = truncate_chord(ch, truncation_radius)?;
            subs.extend(split_chord(&cut, lp.family, contour));
        }
        let alloc = allocate_nodes(nodes_per_piece, &subs)?;
        for (ch, &n) in subs.iter().zip(alloc.iter()) {
            let pl = if ch.sing_start {
                ch.cl_start.max(clustering)
            } else {
                ch.cl_start
            };
            let pr = if ch.sing_end {
                ch.cl_end.max(clustering)
            } else {
                ch.cl_end
            };
            let map = ClusterMap::new(ch.a, ch.b, pl, pr);
            let rule = gauss_legendre(n);
            let u = rule.nodes.clone();
            let w = rule.weights.clone();
            let s: Vec<C64> = u.iter().map(|&x| map.s(x)).collect();
            let m: Vec<C64> = u.iter().map(|&x| map.ds(x)).collect();
            let role = resolve_role(lp.family, map.s(0.0));
            pieces.push(QuadPiece {
                map,
                role,
                group: gi,
                u,
                s,
                w,
                m,
                sing_start: ch.sing_start,
                sing_end: ch.sing_end,
            });
            total += n;
        }
    }
    Ok(Discretization {
        pieces,
        total_nodes: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e_std() -> C64 {
        c64(-0.5, 0.5)
    }

    fn fake_level_line(extent: f64, height: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for k in 0..41 {
            let l = -extent + 2.0 * extent * (k as f64) / 40.0;
            let v = height * (1.0 - (l / extent).powi(2)).max(0.0).sqrt();
            out.push((l, v));
            out.push((l, -v));
        }
        out
    }

    #[test]
    fn sigma_layout() {
        let ct = build_sigma(e_std()).unwrap();
        assert_eq!(ct.pieces.len(), 2);
        assert_eq!(ct.pieces[0].family, PieceFamily::Axis);
        assert_eq!(ct.pieces[1].family, PieceFamily::Segment);
        let seg = &ct.pieces[1].chords[0];
        assert_eq!(seg.a, e_std());
        assert_eq!(seg.b, e_std().conj());
        assert!(seg.sing_start && seg.sing_end);
        assert_eq!(ct.intersections, vec![c64(-0.5, 0.0)]);
        assert!(ct.symmetric);

        let ct2 = build_sigma(c64(0.0, 1.0)).unwrap();
        assert_eq!(ct2.intersections, vec![c64(0.0, 0.0)]);
    }

    #[test]
    fn sigma_rejects_lower_half() {
        assert!(build_sigma(c64(-0.5, -0.1)).is_err());
        assert!(build_sigma(c64(0.3, 0.0)).is_err());
    }

    #[test]
    fn finite_deformed_layout() {
        let ll = fake_level_line(2.0f64.sqrt(), 1.0);
        let ct = build_deformed_contour(
            DeformationMode::Finite,
            e_std(),
            -3.0,
            3.0,
            &ll,
            &LensShape::default(),
        )
        .unwrap();
        assert_eq!(ct.pieces.len(), 6);
        let fam = |f: PieceFamily| ct.pieces.iter().filter(|p| p.family == f).count();
        assert_eq!(fam(PieceFamily::Axis), 1);
        assert_eq!(fam(PieceFamily::Segment), 1);
        assert_eq!(fam(PieceFamily::LensUpper), 2);
        assert_eq!(fam(PieceFamily::LensLower), 2);
        assert_eq!(ct.intersections.len(), 3);
        for p in &ct.pieces {
            match p.family {
                PieceFamily::LensUpper | PieceFamily::LensLower => {
                    let ch = &p.chords[0];
                    assert!(ch.unbounded_start ^ ch.unbounded_end);
                    assert!(ch.decays);
                }
                _ => {}
            }
        }
        // upper-left branch is oriented into its foot, upper-right out of it
        let ups: Vec<&Chord> = ct
            .pieces
            .iter()
            .filter(|p| p.family == PieceFamily::LensUpper)
            .map(|p| &p.chords[0])
            .collect();
        assert!(ups.iter().any(|ch| ch.b == c64(-3.0, 0.0) && ch.a.im > 0.0));
        assert!(ups.iter().any(|ch| ch.a == c64(3.0, 0.0) && ch.b.im > 0.0));
    }

    #[test]
    fn finite_rejects_foot_inside_level_line() {
        let ll = fake_level_line(2.0f64.sqrt(), 1.0);
        for l2 in [1.0, 1.41] {
            let r = build_deformed_contour(
                DeformationMode::Finite,
                e_std(),
                -3.0,
                l2,
                &ll,
                &LensShape::default(),
            );
            assert!(r.is_err(), "lambda2 = {l2} should be rejected");
        }
        assert!(build_deformed_contour(
            DeformationMode::Finite,
            e_std(),
            -1.5,
            1.5,
            &ll,
            &LensShape::default(),
        )
        .is_ok());
    }

    #[test]
    fn infinite_layout_and_symmetry_check() {
        let ll = fake_level_line(3.0, 1.2);
        let ct = build_deformed_contour(
            DeformationMode::Infinite,
            e_std(),
            0.0,
            0.0,
            &ll,
            &LensShape::default(),
        )
        .unwrap();
        assert_eq!(ct.pieces.len(), 2);
        assert_eq!(ct.pieces[0].family, PieceFamily::OpenUpper);
        assert_eq!(ct.pieces[1].family, PieceFamily::OpenLower);
        assert_eq!(ct.pieces[0].chords.len(), 5);
        assert!(ct.pieces[0].chords[0].unbounded_start);
        assert!(ct.pieces[0].chords[4].unbounded_end);
        // the curve clears the branch endpoint
        let bump = ct.pieces[0].chords[2].a.im;
        assert!(bump > e_std().im);
        // every upper chord mirrors a lower one
        for (up, lo) in ct.pieces[0].chords.iter().zip(&ct.pieces[1].chords) {
            assert_eq!(up.a.conj(), lo.a);
            assert_eq!(up.b.conj(), lo.b);
        }

        let mut asym = fake_level_line(3.0, 1.2);
        asym.retain(|s| s.1 >= 0.0);
        let r = build_deformed_contour(
            DeformationMode::Infinite,
            e_std(),
            0.0,
            0.0,
            &asym,
            &LensShape::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn discretize_sigma_counts_and_weights() {
        let ct = build_sigma(e_std()).unwrap();
        let d = discretize(&ct, 64, 50.0, 4).unwrap();
        assert_eq!(d.total_nodes, 128);
        // axis split at -0.5, segment split at -0.5
        let axis: Vec<&QuadPiece> = d.pieces.iter().filter(|p| p.group == 0).collect();
        let seg: Vec<&QuadPiece> = d.pieces.iter().filter(|p| p.group == 1).collect();
        assert_eq!(axis.len(), 2);
        assert_eq!(seg.len(), 2);
        assert_eq!(axis.iter().map(|p| p.n()).sum::<usize>(), 64);
        assert_eq!(seg.iter().map(|p| p.n()).sum::<usize>(), 64);
        assert_eq!(seg[0].role, PieceRole::SegmentUpper);
        assert_eq!(seg[1].role, PieceRole::SegmentLower);
        // panel measure integrates 1 exactly per sub-chord
        for p in &d.pieces {
            let sum: C64 = (0..p.n()).map(|j| p.w[j] * p.m[j]).sum();
            let exact = p.map.b - p.map.a;
            assert!((sum - exact).norm() < 1e-12 * exact.norm().max(1.0));
        }
        // truncation hit the requested radius
        let left = axis[0].map.a;
        let right = axis[1].map.b;
        assert!((left.norm() - 50.0).abs() < 1e-9);
        assert!((right.norm() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn discretize_respects_axis_breakpoints() {
        let ct = build_sigma(e_std())
            .unwrap()
            .with_axis_breakpoints(&[-1.0, 1.0]);
        let d = discretize(&ct, 64, 50.0, 4).unwrap();
        let axis: Vec<&QuadPiece> = d.pieces.iter().filter(|p| p.group == 0).collect();
        assert_eq!(axis.len(), 4);
        assert_eq!(axis.iter().map(|p| p.n()).sum::<usize>(), 64);
        assert_eq!(d.total_nodes, 128);
        let ends: Vec<f64> = axis.iter().map(|p| p.map.b.re).collect();
        assert!((ends[0] + 1.0).abs() < 1e-12);
        assert!((ends[1] + 0.5).abs() < 1e-12);
        assert!((ends[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discretize_rejects_small_radius() {
        let ct = build_sigma_rotated(e_std(), 5.0, 1.0).unwrap();
        assert!(discretize(&ct, 32, 3.0, 4).is_err());
        assert!(discretize(&ct, 32, 8.0, 4).is_ok());
    }

    #[test]
    fn nodes_keep_clear_of_intersections() {
        let ll = fake_level_line(2.0f64.sqrt(), 1.0);
        let variants = vec![
            build_sigma(e_std()).unwrap(),
            build_sigma_rotated(e_std(), 6.0, 1.0).unwrap(),
            build_deformed_contour(
                DeformationMode::Finite,
                e_std(),
                -3.0,
                3.0,
                &ll,
                &LensShape::default(),
            )
            .unwrap(),
            build_deformed_contour(
                DeformationMode::Infinite,
                e_std(),
                0.0,
                0.0,
                &ll,
                &LensShape::default(),
            )
            .unwrap(),
        ];
        for ct in &variants {
            let d = discretize(ct, 48, 40.0, 4).unwrap();
            for p in &d.pieces {
                for s in &p.s {
                    for q in &ct.intersections {
                        assert!((s - q).norm() > 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn node_sets_close_under_conjugation() {
        let ll = fake_level_line(2.0f64.sqrt(), 1.0);
        let variants = vec![
            build_sigma(e_std()).unwrap(),
            build_sigma_rotated(e_std(), 6.0, 1.0).unwrap(),
            build_deformed_contour(
                DeformationMode::Finite,
                e_std(),
                -3.0,
                3.0,
                &ll,
                &LensShape::default(),
            )
            .unwrap(),
            build_deformed_contour(
                DeformationMode::Infinite,
                e_std(),
                0.0,
                0.0,
                &ll,
                &LensShape::default(),
            )
            .unwrap(),
        ];
        for ct in &variants {
            assert!(ct.symmetric);
            let d = discretize(ct, 40, 30.0, 4).unwrap();
            let nodes: Vec<C64> = d.pieces.iter().flat_map(|p| p.s.clone()).collect();
            for s in &nodes {
                let target = s.conj();
                let best = nodes
                    .iter()
                    .map(|t| (t - target).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    best < 1e-9 * s.norm().max(1.0),
                    "no conjugate partner for {s} (best {best:.3e})"
                );
            }
        }
    }

    #[test]
    fn doubling_nodes_improves_cauchy_residual() {
        let ct = build_sigma(e_std()).unwrap();
        let z0 = c64(0.3, 0.7);
        let exact_for = |d: &Discretization| -> C64 {
            d.pieces
                .iter()
                .map(|p| ((p.map.b - z0) / (p.map.a - z0)).ln())
                .sum()
        };
        let resid = |n: usize| -> f64 {
            let d = discretize(&ct, n, 50.0, 4).unwrap();
            let num = d.integrate(|s| 1.0 / (s - z0));
            (num - exact_for(&d)).norm()
        };
        let r24 = resid(24);
        let r48 = resid(48);
        assert!(
            r48 <= 0.5 * r24,
            "doubling nodes should at least halve the residual: {r24:.3e} -> {r48:.3e}"
        );
        let r96 = resid(96);
        assert!(r96 <= 0.5 * r48);
        assert!(r96 < 1e-4, "r96 = {r96:.3e}");
    }

    #[test]
    fn lens_truncation_geometry() {
        let ll = fake_level_line(2.0f64.sqrt(), 1.0);
        let ct = build_deformed_contour(
            DeformationMode::Finite,
            e_std(),
            -3.0,
            3.0,
            &ll,
            &LensShape::default(),
        )
        .unwrap();
        let d = discretize(&ct, 32, 40.0, 4).unwrap();
        for p in d.pieces.iter().filter(|p| {
            matches!(p.role, PieceRole::LensUpper | PieceRole::LensLower)
        }) {
            let far = if p.map.a.im.abs() > p.map.b.im.abs() {
                p.map.a
            } else {
                p.map.b
            };
            let foot = if far == p.map.a { p.map.b } else { p.map.a };
            assert!((far.norm() - 40.0).abs() < 1e-9);
            assert!(foot.im.abs() < 1e-12);
        }
    }
}
