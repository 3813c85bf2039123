//! Cauchy-transform collocation weights on clustered panels.
//!
//! For a density f on a panel s = phi(u), u in [-1, 1], the engine returns
//! weights Omega_j(z) such that
//!
//! ```text
//! (1/(2 pi i)) \int f(s)/(s - z) ds  ~=  sum_j Omega_j(z) phi'(u_j) f(s_j).
//! ```
//!
//! The combination phi' * (f o phi) is expanded in Legendre polynomials
//! (the Gauss nodes make the projection exact through the quadrature
//! degree), the kernel 1/(phi(u) - z) is split into partial fractions over
//! the roots of phi(u) = z, and each Legendre mode is integrated against
//! each simple pole in closed form through Legendre functions of the
//! second kind.  Target positions enter only through exact Q_k values, so
//! the weights stay accurate arbitrarily close to the panel, and boundary
//! values on the panel itself come from the one-sided Q_k limits.

use crate::contour::Discretization;
use crate::quad::{
    eval_poly_complex, gauss_legendre, legendre_p_row, legendre_q_row_complex,
    legendre_q_row_sided, poly_roots, ClusterMap, ImSide,
};
use crate::{c64, C64, Side};

/// Precomputed per-panel data.
pub struct Panel {
    pub map: ClusterMap,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// pw[j][k] = w_j (2k+1) P_k(u_j)
    pw: Vec<Vec<f64>>,
    /// Ascending coefficients of s'(u), for Newton polishing of kernel roots.
    dcoef: Vec<C64>,
}

impl Panel {
    fn new(map: ClusterMap, n: usize) -> Self {
        let rule = gauss_legendre(n);
        let u = rule.nodes.clone();
        let w = rule.weights.clone();
        let pw = u
            .iter()
            .zip(w.iter())
            .map(|(&uj, &wj)| {
                legendre_p_row(n - 1, uj)
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| wj * (2 * k + 1) as f64 * p)
                    .collect()
            })
            .collect();
        let d = map.b - map.a;
        let dcoef: Vec<C64> = map
            .g
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| d * (k as f64 * c))
            .collect();
        Panel { map, u, w, pw, dcoef }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }
}

/// Collocation-weight engine over a set of panels.
pub struct CauchyEngine {
    pub panels: Vec<Panel>,
}

impl CauchyEngine {
    /// Builds the engine over the panels of a discretized contour.
    pub fn new(disc: &Discretization) -> Self {
        CauchyEngine::from_maps(
            disc.pieces
                .iter()
                .map(|p| (p.map.clone(), p.n()))
                .collect(),
        )
    }

    /// Builds the engine from explicit (map, node count) pairs.
    pub fn from_maps(maps: Vec<(ClusterMap, usize)>) -> Self {
        CauchyEngine {
            panels: maps.into_iter().map(|(m, n)| Panel::new(m, n)).collect(),
        }
    }

    /// All roots of phi_p(u) = z, Newton-polished.
    fn kernel_roots(&self, p: usize, z: C64) -> Vec<C64> {
        let panel = &self.panels[p];
        let poly = panel.map.shifted_poly(z);
        if panel.map.degree() == 1 {
            return vec![-poly[0] / poly[1]];
        }
        let mut roots = poly_roots(&poly);
        for r in roots.iter_mut() {
            for _ in 0..6 {
                let pv = eval_poly_complex(&poly, *r);
                let dv = eval_poly_complex(&panel.dcoef, *r);
                if dv.norm() == 0.0 {
                    break;
                }
                let step = pv / dv;
                if step.norm() >= 0.5 {
                    break;
                }
                *r -= step;
                if step.norm() < 1e-15 {
                    break;
                }
            }
        }
        roots
    }

    /// q_k(z) = sum over kernel roots of Q_k(u_m) / phi'(u_m); when `snap`
    /// requests a boundary value, the root nearest the given parameter is
    /// replaced by the one-sided limit at exactly that parameter.
    fn q_row(&self, p: usize, z: C64, snap: Option<(f64, Side)>) -> Vec<C64> {
        let panel = &self.panels[p];
        let kmax = panel.n() - 1;
        let roots = self.kernel_roots(p, z);
        let mut skip = usize::MAX;
        if let Some((u0, _)) = snap {
            let mut best = f64::INFINITY;
            for (m, r) in roots.iter().enumerate() {
                let d = (r - c64(u0, 0.0)).norm();
                if d < best {
                    best = d;
                    skip = m;
                }
            }
            debug_assert!(best < 1e-5, "snapped root off by {best:.3e}");
        }
        let mut q = vec![c64(0.0, 0.0); kmax + 1];
        for (m, &rm) in roots.iter().enumerate() {
            if m == skip {
                continue;
            }
            let dphi = panel.map.ds_c(rm);
            let qs = legendre_q_row_complex(kmax, rm);
            for k in 0..=kmax {
                q[k] += qs[k] / dphi;
            }
        }
        if let Some((u0, side)) = snap {
            // the panel map is conformal and orientation-preserving, so the
            // left side of the oriented panel is the upper side in u
            let im_side = match side {
                Side::Left => ImSide::Upper,
                Side::Right => ImSide::Lower,
            };
            let dphi = panel.map.ds(u0);
            let qs = legendre_q_row_sided(kmax, u0, im_side);
            for k in 0..=kmax {
                q[k] += qs[k] / dphi;
            }
        }
        q
    }

    fn weights_from_q(&self, p: usize, q: &[C64]) -> Vec<C64> {
        let panel = &self.panels[p];
        let scale = crate::I / (2.0 * std::f64::consts::PI);
        panel
            .pw
            .iter()
            .map(|row| scale * row.iter().zip(q.iter()).map(|(&b, &qk)| b * qk).sum::<C64>())
            .collect()
    }

    /// Weights of panel p for a target z off that panel.
    pub fn weights(&self, p: usize, z: C64) -> Vec<C64> {
        let q = self.q_row(p, z, None);
        self.weights_from_q(p, &q)
    }

    /// Weights of panel p for the boundary value at parameter u0 on the
    /// panel itself, approached from the given side of the oriented panel.
    /// u0 must lie strictly inside (-1, 1) but need not be a node.
    pub fn weights_sided(&self, p: usize, u0: f64, side: Side) -> Vec<C64> {
        let z = self.panels[p].map.s(u0);
        let q = self.q_row(p, z, Some((u0, side)));
        self.weights_from_q(p, &q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tpi() -> C64 {
        c64(0.0, 2.0 * PI)
    }

    /// Closed-form (1/(2 pi i)) * integral of 1/(s-z) over the chord a..b.
    fn log_form(a: C64, b: C64, z: C64) -> C64 {
        ((b - z) / (a - z)).ln() / tpi()
    }

    /// Cauchy transform of f over one panel using the engine weights.
    fn transform<F: Fn(C64) -> C64>(
        eng: &CauchyEngine,
        p: usize,
        f: &F,
        w: &[C64],
    ) -> C64 {
        let panel = &eng.panels[p];
        (0..panel.n())
            .map(|j| w[j] * panel.map.ds(panel.u[j]) * f(panel.map.s(panel.u[j])))
            .sum()
    }

    #[test]
    fn constant_density_matches_log_closed_form() {
        let a = c64(-2.0, 0.0);
        let b = c64(0.0, 5.0);
        let eng = CauchyEngine::from_maps(vec![(ClusterMap::new(a, b, 1, 1), 24)]);
        let f = |_s: C64| c64(1.0, 0.0);
        for z in [
            c64(3.0, 1.0),
            c64(-1.0, 2.0),
            c64(0.1, 0.0),
            a + 1e-5 * (b - a) * C64::from_polar(1.0, PI / 3.0),
            c64(1e6, 1e6),
        ] {
            let w = eng.weights(0, z);
            let got = transform(&eng, 0, &f, &w);
            let want = log_form(a, b, z);
            assert!(
                (got - want).norm() < 1e-12 + 1e-11 * want.norm(),
                "z = {z}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn rational_density_plain_and_sided() {
        let a = c64(-1.0, 0.0);
        let b = c64(1.0, 0.0);
        let w0 = c64(0.0, 2.0);
        let eng = CauchyEngine::from_maps(vec![(ClusterMap::new(a, b, 1, 1), 40)]);
        let f = |s: C64| 1.0 / (s - w0);
        let lw = log_form(a, b, w0) * tpi();

        let z = c64(0.4, -0.7);
        let w = eng.weights(0, z);
        let got = transform(&eng, 0, &f, &w);
        let want = (log_form(a, b, z) * tpi() - lw) / (z - w0) / tpi();
        assert!((got - want).norm() < 1e-12);

        // one-sided boundary values at a non-node parameter
        let u0 = 0.3;
        let x = eng.panels[0].map.s(u0);
        let base = ((b - x) / (x - a)).re.ln();
        for (side, sgn) in [(Side::Left, 1.0), (Side::Right, -1.0)] {
            let ws = eng.weights_sided(0, u0, side);
            let got = transform(&eng, 0, &f, &ws);
            let l_side = c64(base, sgn * PI);
            let want = (l_side - lw) / (x - w0) / tpi();
            assert!(
                (got - want).norm() < 1e-11,
                "side {side:?}: got {got}, want {want}"
            );
        }

        // the two limits differ by exactly the density
        let wp = eng.weights_sided(0, u0, Side::Left);
        let wm = eng.weights_sided(0, u0, Side::Right);
        let jump: C64 = (0..40)
            .map(|j| {
                (wp[j] - wm[j]) * eng.panels[0].map.ds(eng.panels[0].u[j])
                    * f(eng.panels[0].map.s(eng.panels[0].u[j]))
            })
            .sum();
        assert!((jump - f(x)).norm() < 1e-12);
    }

    #[test]
    fn downward_panel_left_side_is_east() {
        // panel from +i to -i; the left of the travel direction is Re s > 0
        let a = c64(0.0, 1.0);
        let b = c64(0.0, -1.0);
        let eng = CauchyEngine::from_maps(vec![(ClusterMap::new(a, b, 1, 1), 32)]);
        let f = |s: C64| 1.0 / (s - c64(3.0, 0.0));
        let ws = eng.weights_sided(0, 0.0, Side::Left);
        let got = transform(&eng, 0, &f, &ws);
        let weast = eng.weights(0, c64(1e-7, 0.0));
        let approx = transform(&eng, 0, &f, &weast);
        assert!(
            (got - approx).norm() < 1e-5,
            "sided {got} vs east approach {approx}"
        );
    }

    #[test]
    fn clustered_map_polynomial_density_exact() {
        let a = c64(0.0, 0.0);
        let b = c64(2.0, 0.0);
        let eng = CauchyEngine::from_maps(vec![(ClusterMap::new(a, b, 4, 2), 24)]);
        let alpha = c64(0.7, 0.0);
        let beta = c64(-0.3, 0.1);
        let f = move |s: C64| alpha + beta * s;
        for z in [
            c64(0.5, 0.8),
            c64(1e-4, 0.0) * C64::from_polar(1.0, PI / 7.0),
            c64(2.3, -0.1),
        ] {
            let w = eng.weights(0, z);
            let got = transform(&eng, 0, &f, &w);
            let want = (beta * (b - a) + (alpha + beta * z) * (log_form(a, b, z) * tpi())) / tpi();
            // the ring of clustered kernel roots near the quartic end costs a
            // couple of digits through cancellation; 1e-9 still certifies the
            // closed-form splitting
            assert!(
                (got - want).norm() < 1e-9,
                "z = {z}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn touching_panel_target_stays_accurate() {
        // left panel [-1, 0], target = a point 1e-3 past its right end
        let eng = CauchyEngine::from_maps(vec![(
            ClusterMap::new(c64(-1.0, 0.0), c64(0.0, 0.0), 1, 3),
            32,
        )]);
        let w0 = c64(0.0, 2.0);
        let f = |s: C64| 1.0 / (s - w0);
        let z = c64(1e-3, 0.0);
        let w = eng.weights(0, z);
        let got = transform(&eng, 0, &f, &w);
        let a = c64(-1.0, 0.0);
        let b = c64(0.0, 0.0);
        let lw = log_form(a, b, w0) * tpi();
        let want = (log_form(a, b, z) * tpi() - lw) / (z - w0) / tpi();
        assert!(
            (got - want).norm() < 1e-10,
            "got {got}, want {want}, err {:.3e}",
            (got - want).norm()
        );
    }

    #[test]
    fn far_target_asymptotics() {
        let a = c64(-1.0, 0.5);
        let b = c64(2.0, -0.5);
        let eng = CauchyEngine::from_maps(vec![(ClusterMap::new(a, b, 2, 2), 20)]);
        let f = |s: C64| 1.0 / (s * s + 9.0);
        let z = c64(3e6, 2e6);
        let w = eng.weights(0, z);
        let got = transform(&eng, 0, &f, &w);
        // exact transform by partial fractions of f over the poles +-3i
        let pole = |w0: C64| (log_form(a, b, z) * tpi() - log_form(a, b, w0) * tpi()) / (z - w0);
        let want = (pole(c64(0.0, 3.0)) - pole(c64(0.0, -3.0))) / c64(0.0, 6.0) / tpi();
        assert!(
            (got - want).norm() < 1e-9 * want.norm().max(1e-12),
            "got {got}, want {want}"
        );
    }
}
