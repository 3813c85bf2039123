//! Run configuration: a single TOML file describing the pump, broadening
//! profile, sampling grids, solver knobs, and output layout.

use std::path::Path;

use serde::Deserialize;

use crate::broadening::{BroadeningProfile, BroadeningTransform};
use crate::error::{Error, Result};
use crate::rhsolver::SolveParams;
use crate::spectral::endpoint_from_boundary;
use crate::C64;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub boundary: BoundaryConfig,
    pub broadening: BroadeningConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub phase: Option<PhaseConfig>,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Pump amplitude at the medium boundary.
    pub a0: f64,
    /// Pump carrier frequency.
    pub omega0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadeningConfig {
    /// One of "box", "raised_cosine", "table", "gaussian".
    pub profile: String,
    /// Support half-width for the compact profiles.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Detuning/value pairs for the "table" profile.
    #[serde(default)]
    pub samples: Option<Vec<(f64, f64)>>,
    /// Standard deviation for the "gaussian" profile.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Quadrature window half-width for the "gaussian" profile.
    #[serde(default)]
    pub width: Option<f64>,
    /// Rescale a profile whose mass is off one.
    #[serde(default = "default_true")]
    pub rescale: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Time extent of the sampled rectangle.
    pub t_extent: f64,
    /// Depth extent of the sampled rectangle.
    pub x_extent: f64,
    /// Reconstruction samples in time.
    pub nt: usize,
    /// Reconstruction samples in depth.
    pub nx: usize,
    /// Detuning quadrature nodes per panel.
    pub nlambda: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub nodes_per_piece: usize,
    pub truncation_radius: f64,
    /// Held-out jump probes per contour piece in the diagnostics.
    pub probe_count: usize,
    /// Jump residual the diagnostics flag against.
    pub jump_tolerance: f64,
    /// Bloch normalization defect the diagnostics flag against.
    pub normalization_tolerance: f64,
    /// Reconstruction/integration envelope gap the comparison flags against.
    pub compare_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nodes_per_piece: 128,
            truncation_radius: 60.0,
            probe_count: 3,
            jump_tolerance: 1e-6,
            normalization_tolerance: 1e-6,
            compare_tolerance: 5e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Characteristic-aligned step of the direct integrator.
    pub step: f64,
    /// Corrector sweeps per level.
    pub corrector_sweeps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            step: 1.0 / 256.0,
            corrector_sweeps: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    /// Evaluation time for the phase exports; must lie past the wave front.
    pub t: f64,
    /// Evaluation depth for the phase exports.
    pub x: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsConfig {
    pub directory: String,
    /// Subset of {"csv", "json"}.
    pub formats: Vec<String>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig {
            directory: "out".to_string(),
            formats: vec!["csv".to_string(), "json".to_string()],
        }
    }
}

impl RunConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if !(g.t_extent > 0.0) || !(g.x_extent > 0.0) {
            return Err(Error::config("grid extents must be positive"));
        }
        if g.nt == 0 || g.nx == 0 || g.nlambda == 0 {
            return Err(Error::config("grid counts must be positive"));
        }
        if g.nlambda < 4 {
            return Err(Error::config(
                "detuning panels need at least four nodes for interpolation",
            ));
        }
        let s = &self.solver;
        if s.nodes_per_piece < 4 || s.probe_count == 0 {
            return Err(Error::config("solver counts must be positive"));
        }
        if !(s.truncation_radius > 0.0) {
            return Err(Error::config("truncation radius must be positive"));
        }
        for (name, tol) in [
            ("jump_tolerance", s.jump_tolerance),
            ("normalization_tolerance", s.normalization_tolerance),
            ("compare_tolerance", s.compare_tolerance),
        ] {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.oracle.step > 0.0) || self.oracle.corrector_sweeps == 0 {
            return Err(Error::config("oracle step and sweeps must be positive"));
        }
        // reconstruction samples must land on integrator levels for diffing
        for (name, extent, count) in [
            ("time", g.t_extent, g.nt),
            ("depth", g.x_extent, g.nx),
        ] {
            let spacing = extent / count as f64;
            let ratio = spacing / self.oracle.step;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
                return Err(Error::config(format!(
                    "{name} sample spacing {spacing} is not a multiple of the oracle step {}",
                    self.oracle.step
                )));
            }
        }
        if let Some(p) = &self.phase {
            if !(p.t > p.x && p.x >= 0.0) {
                return Err(Error::config(
                    "phase evaluation point must lie past the wave front (t > x >= 0)",
                ));
            }
        }
        for f in &self.outputs.formats {
            if f != "csv" && f != "json" {
                return Err(Error::config(format!("unknown output format {f:?}")));
            }
        }
        self.transform()?;
        self.endpoint()?;
        Ok(())
    }

    /// Builds the broadening transform described by the config.
    pub fn transform(&self) -> Result<BroadeningTransform> {
        let b = &self.broadening;
        let need_lambda = || {
            b.lambda.ok_or_else(|| {
                Error::config(format!("profile {:?} needs a support half-width", b.profile))
            })
        };
        let profile = match b.profile.as_str() {
            "box" => BroadeningProfile::box_profile(need_lambda()?)?,
            "raised_cosine" => BroadeningProfile::raised_cosine(need_lambda()?)?,
            "table" => {
                let samples = b
                    .samples
                    .clone()
                    .ok_or_else(|| Error::config("table profile needs samples"))?;
                BroadeningProfile::table(need_lambda()?, samples, b.rescale)?
            }
            "gaussian" => {
                let sigma = b
                    .sigma
                    .ok_or_else(|| Error::config("gaussian profile needs sigma"))?;
                if !(sigma > 0.0) {
                    return Err(Error::config("gaussian sigma must be positive"));
                }
                let width = b.width.unwrap_or(8.0 * sigma);
                let norm = sigma * (2.0 * std::f64::consts::PI).sqrt();
                BroadeningProfile::unbounded(
                    move |s| (-s * s / (2.0 * sigma * sigma)).exp() / norm,
                    width,
                    b.rescale,
                )?
            }
            other => {
                return Err(Error::config(format!("unknown broadening profile {other:?}")));
            }
        };
        Ok(BroadeningTransform::new(profile))
    }

    /// Branch endpoint induced by the boundary data.
    pub fn endpoint(&self) -> Result<C64> {
        endpoint_from_boundary(self.boundary.a0, self.boundary.omega0)
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            nodes_per_piece: self.solver.nodes_per_piece,
            truncation_radius: self.solver.truncation_radius,
            ..SolveParams::default()
        }
    }

    /// Reconstruction time samples: nt points from one spacing up to the
    /// extent.
    pub fn t_samples(&self) -> Vec<f64> {
        let h = self.grid.t_extent / self.grid.nt as f64;
        (1..=self.grid.nt).map(|i| i as f64 * h).collect()
    }

    /// Reconstruction depth samples: nx points from one spacing up to the
    /// extent.
    pub fn x_samples(&self) -> Vec<f64> {
        let h = self.grid.x_extent / self.grid.nx as f64;
        (1..=self.grid.nx).map(|i| i as f64 * h).collect()
    }

    /// Oracle levels per reconstruction time spacing.
    pub fn density_stride(&self) -> usize {
        let spacing = self.grid.t_extent / self.grid.nt as f64;
        (spacing / self.oracle.step).round() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
        [boundary]
        a0 = 1.0
        omega0 = 1.0

        [broadening]
        profile = "box"
        lambda = 1.0

        [grid]
        t_extent = 2.0
        x_extent = 1.0
        nt = 8
        nx = 8
        nlambda = 24
    "#;

    #[test]
    fn parses_and_validates_defaults() {
        let cfg: RunConfig = toml::from_str(GOOD).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver.nodes_per_piece, 128);
        assert_eq!(cfg.outputs.directory, "out");
        assert_eq!(cfg.t_samples().len(), 8);
        assert!((cfg.t_samples()[0] - 0.25).abs() < 1e-15);
        assert_eq!(cfg.density_stride(), 64);
        let e = cfg.endpoint().unwrap();
        assert!((e - crate::c64(-0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn rejects_negative_support() {
        let text = GOOD.replace("lambda = 1.0", "lambda = -1.0");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_misaligned_oracle_step() {
        let text = format!("{GOOD}\n[oracle]\nstep = 0.3\n");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_formats() {
        let text = format!("{GOOD}\n[outputs]\nformats = [\"yaml\"]\n");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
        assert!(toml::from_str::<RunConfig>(&format!("{GOOD}\nunknown = 1\n")).is_err());
    }

    #[test]
    fn out_of_range_tolerance_is_rejected() {
        let text = format!("{GOOD}\n[solver]\njump_tolerance = 2.0\n");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gaussian_profile_builds() {
        let text = GOOD
            .replace("profile = \"box\"", "profile = \"gaussian\"\nsigma = 1.0")
            .replace("lambda = 1.0", "");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        let tr = cfg.transform().unwrap();
        assert!(tr.support().is_none());
        assert!((tr.density(0.0) - 0.3989).abs() < 1e-3);
    }
}
