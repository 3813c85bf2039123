//! Physical fields from solved Riemann-Hilbert data: the envelope E(t,x),
//! the density matrix F(t,x,lambda) with population and polarization
//! entries, the Cauchy transform G of F, and residual diagnostics against
//! the Maxwell-Bloch equations in matrix form and the zero-curvature
//! condition of the associated linear pair.

use crate::broadening::{BroadeningProfile, BroadeningTransform};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::quad::{gauss_legendre, ImSide};
use crate::rhsolver::{choose_strategy, solve, RhSolution, SolveParams, SolveStrategy};
use crate::{c64, C64, I};

/// Half of the junction dodge width, as a fraction of the local scale; see
/// [`density_matrix_continuous`].
const DODGE_FRACTION: f64 = 0.02;

/// Interpolation sample offset, as a fraction of the local scale.
const SAMPLE_FRACTION: f64 = 0.04;

/// Coupling matrix of the envelope, [[0, E/2], [-conj(E)/2, 0]].
/// Anti-Hermitian for any envelope value.
pub fn field_coupling(envelope: C64) -> Mat2 {
    Mat2::new(
        c64(0.0, 0.0),
        0.5 * envelope,
        -0.5 * envelope.conj(),
        c64(0.0, 0.0),
    )
}

/// Coupling matrix recovered from the moment matrix, -i [sigma3, m].
pub fn coupling_from_moment(m: &Mat2) -> Mat2 {
    let s3 = Mat2::sigma3();
    (s3 * *m - *m * s3).scale(-I)
}

/// Moment matrix and envelope of a solved instance.  The moment comes from
/// the contour integral of the solved data, so no large-z limit is taken;
/// the envelope is -4i times the upper-right entry.
pub fn extract_field(sol: &RhSolution) -> (Mat2, C64) {
    let m = sol.moment();
    (m, -4.0 * I * m.at(0, 1))
}

/// Density matrix sample at one detuning.
#[derive(Debug, Clone, Copy)]
pub struct DensityPoint {
    /// Hermitian traceless matrix [[N, rho], [conj(rho), -N]].
    pub f: Mat2,
    /// Population inversion, the (1,1) entry.
    pub n: f64,
    /// Polarization, the (1,2) entry.
    pub rho: C64,
    /// Max-entry distance between the raw conjugation result and its
    /// Hermitian part; a solver-accuracy diagnostic.
    pub hermitian_drift: f64,
    /// |det + 1| of the raw conjugation result.
    pub det_drift: f64,
}

fn hermitian_traceless_part(f: &Mat2) -> (f64, C64) {
    let n = 0.5 * (f.at(0, 0) - f.at(1, 1)).re;
    let rho = 0.5 * (f.at(0, 1) + f.at(1, 0).conj());
    (n, rho)
}

fn density_from_raw(raw: &Mat2) -> DensityPoint {
    let (n, rho) = hermitian_traceless_part(raw);
    let f = Mat2::new(c64(n, 0.0), rho, rho.conj(), c64(-n, 0.0));
    DensityPoint {
        f,
        n,
        rho,
        hermitian_drift: (*raw - f).norm_max(),
        det_drift: (raw.det() + c64(1.0, 0.0)).norm(),
    }
}

/// Density matrix at a real detuning away from the junction Re E:
/// F = -W sigma3 W^{-1} with W = M+(t,x,.) exp(-i lambda t sigma3)
/// M+(0,x,.)^{-1}, projected onto its Hermitian traceless part.
///
/// `now` is the solved instance at the evaluation point, `start` the solved
/// instance at time zero and the same depth.  At t = 0 the two factors
/// cancel and -sigma3 is returned exactly.
pub fn density_matrix(now: &RhSolution, start: &RhSolution, lambda: f64) -> Result<DensityPoint> {
    if now.x != start.x {
        return Err(Error::config(
            "density matrix needs both time slices at the same depth",
        ));
    }
    if start.t != 0.0 {
        return Err(Error::config("reference instance must be at time zero"));
    }
    if now.t == 0.0 {
        return Ok(DensityPoint {
            f: -Mat2::sigma3(),
            n: -1.0,
            rho: c64(0.0, 0.0),
            hermitian_drift: 0.0,
            det_drift: 0.0,
        });
    }
    let mt = now.boundary_value_support(lambda)?;
    let m0 = start.boundary_value_support(lambda)?;
    let d0 = m0.det();
    if (d0 - c64(1.0, 0.0)).norm() > 0.5 {
        return Err(Error::numerical(format!(
            "reference boundary value at detuning {lambda} has det {d0}, expected 1"
        )));
    }
    let rot = Mat2::diag_pow((-I * lambda * now.t).exp());
    let w = mt * rot * m0.inv();
    let raw = -(w * Mat2::sigma3() * w.inv());
    Ok(density_from_raw(&raw))
}

fn junction_scale(tr: &BroadeningTransform, e: C64) -> f64 {
    let edge = match tr.support() {
        Some(l) => (l - e.re.abs()).max(0.1 * l),
        None => e.im,
    };
    e.im.min(edge)
}

/// Density matrix with the junction detuning filled in: within a small dodge
/// of Re E the sample is cubically interpolated from four flanking samples,
/// since the boundary values remain bounded but lose accuracy at the point
/// where the branch segment meets the axis.
pub fn density_matrix_continuous(
    now: &RhSolution,
    start: &RhSolution,
    lambda: f64,
) -> Result<DensityPoint> {
    let p = now.e.re;
    let scale = junction_scale(now_transform(now), now.e);
    if (lambda - p).abs() >= DODGE_FRACTION * scale {
        return density_matrix(now, start, lambda);
    }
    let h = SAMPLE_FRACTION * scale;
    let abscissas = [p - 2.0 * h, p - h, p + h, p + 2.0 * h];
    let mut samples = Vec::with_capacity(4);
    for &s in &abscissas {
        samples.push(density_matrix(now, start, s)?);
    }
    let mut raw = Mat2::zero();
    let mut hermitian_drift = 0.0f64;
    let mut det_drift = 0.0f64;
    for (k, dp) in samples.iter().enumerate() {
        let mut l = 1.0;
        for (j, &sj) in abscissas.iter().enumerate() {
            if j != k {
                l *= (lambda - sj) / (abscissas[k] - sj);
            }
        }
        raw = raw + dp.f.scale(c64(l, 0.0));
        hermitian_drift = hermitian_drift.max(dp.hermitian_drift);
        det_drift = det_drift.max(dp.det_drift);
    }
    let (n, rho) = hermitian_traceless_part(&raw);
    // the flanking samples sit on the unit sphere but their cubic
    // combination does not; project the fill back onto it
    let len = (n * n + rho.norm_sqr()).sqrt();
    if len < 0.5 {
        return Err(Error::numerical(
            "junction interpolation collapsed below half the unit sphere",
        ));
    }
    let (n, rho) = (n / len, rho / len);
    let f = Mat2::new(c64(n, 0.0), rho, rho.conj(), c64(-n, 0.0));
    Ok(DensityPoint {
        f,
        n,
        rho,
        hermitian_drift,
        det_drift,
    })
}

fn now_transform<'a>(sol: &'a RhSolution) -> &'a BroadeningTransform {
    sol.transform()
}

/// Shared detuning quadrature for the density grid and the broadening
/// integrals: composite Gauss-Legendre panels over the (windowed) support,
/// split at the junction abscissa Re E where the density matrix is only
/// continuous.
#[derive(Debug, Clone)]
pub struct LambdaGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Panel boundaries, one more entry than panels.
    breaks: Vec<f64>,
    /// Nodes per panel.
    counts: Vec<usize>,
}

/// Builds the shared detuning grid with `nodes_per_panel` Gauss-Legendre
/// nodes on each panel.
pub fn lambda_grid(tr: &BroadeningTransform, e: C64, nodes_per_panel: usize) -> LambdaGrid {
    let reach = match tr.profile() {
        BroadeningProfile::Unbounded { width, .. } => *width,
        _ => tr.support().expect("compact profiles have a support bound"),
    };
    let mut breaks = vec![-reach];
    if e.re > -reach && e.re < reach {
        breaks.push(e.re);
    }
    breaks.push(reach);
    let rule = gauss_legendre(nodes_per_panel);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut counts = Vec::new();
    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            nodes.push(mid + half * u);
            weights.push(half * w);
        }
        counts.push(nodes_per_panel);
    }
    LambdaGrid {
        nodes,
        weights,
        breaks,
        counts,
    }
}

impl LambdaGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reach(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// Panel index and flat node range of the panel containing `lambda`.
    fn panel_of(&self, lambda: f64) -> Option<(usize, std::ops::Range<usize>)> {
        let mut start = 0;
        for (k, win) in self.breaks.windows(2).enumerate() {
            let end = start + self.counts[k];
            if lambda >= win[0] && lambda <= win[1] {
                return Some((k, start..end));
            }
            start = end;
        }
        None
    }
}

/// Cauchy transform of the density grid,
/// G(z) = (1/4) int F(s) n(s) / (s - z) ds, for z off the closed support.
pub fn cauchy_of_f(
    tr: &BroadeningTransform,
    grid: &LambdaGrid,
    f: &[Mat2],
    z: C64,
) -> Result<Mat2> {
    if z.im == 0.0 && z.re.abs() <= grid.reach() {
        return Err(Error::config(
            "on-support Cauchy transform needs a side; use the sided variant",
        ));
    }
    assert_eq!(f.len(), grid.len());
    let mut acc = Mat2::zero();
    for (k, fk) in f.iter().enumerate() {
        let s = grid.nodes[k];
        let scale = grid.weights[k] * tr.density(s) / (c64(s, 0.0) - z);
        acc = acc + fk.scale(0.25 * scale);
    }
    Ok(acc)
}

/// One-sided boundary values of the Cauchy transform on the support,
/// G(lambda +- i0), by singularity subtraction on the panel containing the
/// detuning plus the Plemelj half-residue.  `f_at` is the density matrix at
/// the evaluation detuning itself.
pub fn cauchy_of_f_sided(
    tr: &BroadeningTransform,
    grid: &LambdaGrid,
    f: &[Mat2],
    f_at: &Mat2,
    lambda: f64,
    side: ImSide,
) -> Result<Mat2> {
    assert_eq!(f.len(), grid.len());
    let (panel, range) = grid
        .panel_of(lambda)
        .ok_or_else(|| Error::config("sided Cauchy transform needs an on-support detuning"))?;
    let (a, b) = (grid.breaks[panel], grid.breaks[panel + 1]);
    if lambda <= a || lambda >= b {
        return Err(Error::config(
            "sided Cauchy transform needs a detuning interior to a quadrature panel",
        ));
    }
    let fl = f_at.scale(c64(tr.density(lambda), 0.0));
    let mut acc = Mat2::zero();
    for (k, fk) in f.iter().enumerate() {
        let s = grid.nodes[k];
        let fn_k = fk.scale(c64(tr.density(s), 0.0));
        if range.contains(&k) {
            if (s - lambda).abs() < 1e-13 * grid.reach() {
                return Err(Error::config(
                    "sided Cauchy transform evaluated on a quadrature node",
                ));
            }
            acc = acc + (fn_k - fl).scale(c64(grid.weights[k] / (s - lambda), 0.0));
        } else {
            acc = acc + fn_k.scale(c64(grid.weights[k] / (s - lambda), 0.0));
        }
    }
    acc = acc + fl.scale(c64(((b - lambda) / (lambda - a)).ln(), 0.0));
    let half_residue = match side {
        ImSide::Upper => I * std::f64::consts::PI,
        ImSide::Lower => -I * std::f64::consts::PI,
    };
    Ok((acc + fl.scale(half_residue)).scale(c64(0.25, 0.0)))
}

/// Fields sampled on a rectangular (t, x) grid and the shared detuning grid.
#[derive(Debug, Clone)]
pub struct SampledFields {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub grid: LambdaGrid,
    /// Envelope, row-major over (t, x).
    pub envelope: Vec<C64>,
    /// Density matrices, row-major over (t, x, detuning).
    pub density: Vec<Mat2>,
}

impl SampledFields {
    pub fn envelope_at(&self, it: usize, ix: usize) -> C64 {
        self.envelope[it * self.x.len() + ix]
    }

    pub fn density_at(&self, it: usize, ix: usize, il: usize) -> &Mat2 {
        &self.density[(it * self.x.len() + ix) * self.grid.len() + il]
    }

    fn density_slice(&self, it: usize, ix: usize) -> &[Mat2] {
        let nl = self.grid.len();
        let base = (it * self.x.len() + ix) * nl;
        &self.density[base..base + nl]
    }
}

/// Worst-case diagnostics accumulated while sampling a grid.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleDiagnostics {
    pub hermitian_drift: f64,
    pub det_drift: f64,
    pub condition: f64,
    pub linear_residual: f64,
}

/// Solves the inverse problem over a rectangular grid and samples envelope
/// and density matrix on the shared detuning quadrature.
pub fn sample_fields(
    tr: &BroadeningTransform,
    e: C64,
    t_grid: &[f64],
    x_grid: &[f64],
    grid: &LambdaGrid,
    params: &SolveParams,
) -> Result<(SampledFields, SampleDiagnostics)> {
    let (nt, nx, nl) = (t_grid.len(), x_grid.len(), grid.len());
    let mut envelope = vec![c64(0.0, 0.0); nt * nx];
    let mut density = vec![Mat2::zero(); nt * nx * nl];
    let mut diag = SampleDiagnostics::default();
    for (ix, &x) in x_grid.iter().enumerate() {
        let start = solve(tr, e, 0.0, x, SolveStrategy::ClosedForm, params)?;
        for (it, &t) in t_grid.iter().enumerate() {
            let strategy = choose_strategy(tr, e, t, x)?;
            let sol = solve(tr, e, t, x, strategy, params)?;
            diag.condition = diag.condition.max(sol.cond_estimate);
            diag.linear_residual = diag.linear_residual.max(sol.linear_residual);
            envelope[it * nx + ix] = sol.field();
            for (il, &lam) in grid.nodes.iter().enumerate() {
                let dp = density_matrix_continuous(&sol, &start, lam)?;
                diag.hermitian_drift = diag.hermitian_drift.max(dp.hermitian_drift);
                diag.det_drift = diag.det_drift.max(dp.det_drift);
                density[(it * nx + ix) * nl + il] = dp.f;
            }
        }
    }
    Ok((
        SampledFields {
            t: t_grid.to_vec(),
            x: x_grid.to_vec(),
            grid: grid.clone(),
            envelope,
            density,
        },
        diag,
    ))
}

/// Max-norm residuals of the sampled fields.
#[derive(Debug, Clone, Copy)]
pub struct ResidualReport {
    /// Field equation H_t + H_x = (1/4) int [sigma3, F] n ds, over interior
    /// grid points.
    pub field_equation: f64,
    /// Matrix transport equation F_t + [i lambda sigma3 + H, F] = 0, over
    /// interior time slices, all depths and detunings.
    pub matrix_equation: f64,
    /// Zero-curvature condition U_x - (V_pm)_t + [U, V_pm] = 0 at probe
    /// detunings (worst of the two banks).
    pub curvature: f64,
    /// max |N^2 + |rho|^2 - 1| over all samples.
    pub normalization: f64,
    /// max |E| over sampled points with t <= x.
    pub causality: f64,
}

fn uniform_step(grid: &[f64], what: &str) -> Result<f64> {
    if grid.len() < 3 {
        return Err(Error::config(format!(
            "{what} grid needs at least three points for centered differences"
        )));
    }
    let h = grid[1] - grid[0];
    if h <= 0.0 {
        return Err(Error::config(format!("{what} grid must increase")));
    }
    for win in grid.windows(2) {
        if ((win[1] - win[0]) - h).abs() > 1e-9 * h.abs() {
            return Err(Error::config(format!("{what} grid must be uniform")));
        }
    }
    Ok(h)
}

/// Cubic interpolation of the density matrix in the detuning, from the four
/// nearest quadrature nodes of the panel containing the probe.
fn interp_density(fields: &SampledFields, it: usize, ix: usize, lambda: f64) -> Result<Mat2> {
    let grid = &fields.grid;
    let (_, range) = grid
        .panel_of(lambda)
        .ok_or_else(|| Error::config("density interpolation needs an on-support detuning"))?;
    let slice = fields.density_slice(it, ix);
    let mut idx: Vec<usize> = range.collect();
    if idx.len() < 4 {
        return Err(Error::config("density interpolation needs four panel nodes"));
    }
    idx.sort_by(|&a, &b| {
        (grid.nodes[a] - lambda)
            .abs()
            .partial_cmp(&(grid.nodes[b] - lambda).abs())
            .unwrap()
    });
    idx.truncate(4);
    let mut out = Mat2::zero();
    for (pos, &k) in idx.iter().enumerate() {
        let mut l = 1.0;
        for (qos, &j) in idx.iter().enumerate() {
            if qos != pos {
                l *= (lambda - grid.nodes[j]) / (grid.nodes[k] - grid.nodes[j]);
            }
        }
        out = out + slice[k].scale(c64(l, 0.0));
    }
    Ok(out)
}

fn curvature_probes(grid: &LambdaGrid) -> Vec<f64> {
    let mut probes = Vec::new();
    for win in grid.breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        for frac in [0.23, 0.52, 0.81] {
            probes.push(a + (b - a) * frac);
        }
    }
    probes
}

/// Computes the residual suite over a sampled field set; both (t, x) grids
/// must be uniform with at least three points.
pub fn residual_suite(tr: &BroadeningTransform, fields: &SampledFields) -> Result<ResidualReport> {
    let dt = uniform_step(&fields.t, "time")?;
    let dx = uniform_step(&fields.x, "depth")?;
    let (nt, nx, nl) = (fields.t.len(), fields.x.len(), fields.grid.len());
    let s3 = Mat2::sigma3();
    let probes = curvature_probes(&fields.grid);

    let mut field_equation = 0.0f64;
    let mut matrix_equation = 0.0f64;
    let mut curvature = 0.0f64;
    let mut normalization = 0.0f64;
    let mut causality = 0.0f64;

    for it in 0..nt {
        for ix in 0..nx {
            if fields.t[it] <= fields.x[ix] {
                causality = causality.max(fields.envelope_at(it, ix).norm());
            }
            for il in 0..nl {
                let f = fields.density_at(it, ix, il);
                let n = f.at(0, 0).re;
                let rho = f.at(0, 1);
                normalization = normalization.max((n * n + rho.norm_sqr() - 1.0).abs());
            }
        }
    }

    for it in 1..nt - 1 {
        for ix in 0..nx {
            let h_t = (field_coupling(fields.envelope_at(it + 1, ix))
                - field_coupling(fields.envelope_at(it - 1, ix)))
            .scale(c64(0.5 / dt, 0.0));
            let h_center = field_coupling(fields.envelope_at(it, ix));
            for il in 0..nl {
                let lam = fields.grid.nodes[il];
                let f_t = (*fields.density_at(it + 1, ix, il)
                    - *fields.density_at(it - 1, ix, il))
                .scale(c64(0.5 / dt, 0.0));
                let gen = s3.scale(I * lam) + h_center;
                let res = f_t + Mat2::commutator(&gen, fields.density_at(it, ix, il));
                matrix_equation = matrix_equation.max(res.norm_max());
            }
            if ix == 0 || ix == nx - 1 {
                continue;
            }
            let h_x = (field_coupling(fields.envelope_at(it, ix + 1))
                - field_coupling(fields.envelope_at(it, ix - 1)))
            .scale(c64(0.5 / dx, 0.0));
            let mut integral = Mat2::zero();
            for il in 0..nl {
                let s = fields.grid.nodes[il];
                let wn = fields.grid.weights[il] * tr.density(s);
                integral = integral
                    + Mat2::commutator(&s3, fields.density_at(it, ix, il))
                        .scale(c64(0.25 * wn, 0.0));
            }
            field_equation = field_equation.max((h_t + h_x - integral).norm_max());

            for &lam in &probes {
                let f_center = interp_density(fields, it, ix, lam)?;
                let u = s3.scale(-I * lam) - h_center;
                for side in [ImSide::Upper, ImSide::Lower] {
                    let g_center = cauchy_of_f_sided(
                        tr,
                        &fields.grid,
                        fields.density_slice(it, ix),
                        &f_center,
                        lam,
                        side,
                    )?;
                    let g_next = cauchy_of_f_sided(
                        tr,
                        &fields.grid,
                        fields.density_slice(it + 1, ix),
                        &interp_density(fields, it + 1, ix, lam)?,
                        lam,
                        side,
                    )?;
                    let g_prev = cauchy_of_f_sided(
                        tr,
                        &fields.grid,
                        fields.density_slice(it - 1, ix),
                        &interp_density(fields, it - 1, ix, lam)?,
                        lam,
                        side,
                    )?;
                    let g_t = (g_next - g_prev).scale(c64(0.5 / dt, 0.0));
                    let v = s3.scale(I * lam) + h_center - g_center.scale(I);
                    let res = -h_x - (h_t - g_t.scale(I)) + Mat2::commutator(&u, &v);
                    curvature = curvature.max(res.norm_max());
                }
            }
        }
    }

    Ok(ResidualReport {
        field_equation,
        matrix_equation,
        curvature,
        normalization,
        causality,
    })
}
