//! Experiment configuration. Geometry and observation points are given in units
//! of the free-space wavelength and converted to metres here.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use nalgebra::Vector3;
use serde::Deserialize;
use wirecm::experiment::DipoleStudy;
use wirecm::modes::DEFAULT_RANK_TOL;
use wirecm::{PlaneWave, QuadratureSpec, Wavenumber};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-space wavelength in metres.
    pub wavelength: f64,
    #[serde(default = "default_rank_tol")]
    pub rank_tolerance: f64,
    /// Rows and columns kept in matrix CSVs; `--modes` overrides.
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub incident: IncidentSpec,
    #[serde(default)]
    pub observation: ObservationSpec,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub length: f64,
    pub radius: f64,
    pub segments: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            length: 2.0,
            radius: 1e-3,
            segments: 40,
        }
    }
}

/// Either an explicit list or an inclusive `start..=stop` range.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub lengths: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            lengths: None,
            start: Some(0.3),
            stop: Some(2.0),
            step: Some(0.1),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSpec {
    pub direction: [f64; 3],
    pub polarization: [f64; 3],
    /// V/m
    pub amplitude: f64,
}

impl Default for IncidentSpec {
    fn default() -> Self {
        Self {
            direction: [1.0, 0.0, -1.0],
            polarization: [1.0, 0.0, 1.0],
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSpec {
    pub points: Vec<[f64; 3]>,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        Self {
            points: vec![[0.5, 0.0, 0.5]],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub points_per_segment: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            points_per_segment: QuadratureSpec::default().points_per_segment,
        }
    }
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

fn default_modes() -> usize {
    11
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.sweep_lengths()?;
        cfg.study()?;
        ensure!(cfg.modes >= 1, "modes must be at least 1");
        Ok(cfg)
    }

    /// Sweep lengths in units of the wavelength, in the order they were given.
    pub fn sweep_lengths(&self) -> anyhow::Result<Vec<f64>> {
        let s = &self.sweep;
        let lengths = match (&s.lengths, s.start, s.stop, s.step) {
            (Some(l), None, None, None) => l.clone(),
            (None, Some(a), Some(b), Some(h)) => {
                ensure!(h > 0.0 && h.is_finite(), "sweep step must be positive");
                ensure!(a <= b, "sweep start exceeds stop");
                let n = ((b - a) / h + 1e-9).floor() as usize;
                // Multiples of the step rather than repeated addition, so 0.3 + 7·0.1 stays 1.0.
                (0..=n).map(|i| a + i as f64 * h).collect()
            }
            _ => bail!("sweep needs either `lengths` or all of `start`, `stop`, `step`"),
        };
        ensure!(!lengths.is_empty(), "sweep is empty");
        for &l in &lengths {
            ensure!(
                l > 0.0 && l <= self.reference.length * (1.0 + 1e-12),
                "sweep length {l} outside (0, {}]",
                self.reference.length
            );
        }
        Ok(lengths)
    }

    pub fn study(&self) -> anyhow::Result<DipoleStudy<f64>> {
        ensure!(
            self.wavelength > 0.0 && self.wavelength.is_finite(),
            "wavelength must be positive"
        );
        let w = self.wavelength;
        let k = Wavenumber::from_wavelength(w)?;
        let inc = &self.incident;
        let wave = PlaneWave::linear(
            Vector3::from(inc.direction),
            Vector3::from(inc.polarization),
            inc.amplitude,
            k,
        )?;
        let study = DipoleStudy {
            wavelength: w,
            reference_length: self.reference.length * w,
            radius: self.reference.radius * w,
            segments: self.reference.segments,
            wave,
            observation_points: self.observation.points.iter().map(|p| Vector3::from(*p) * w).collect(),
            rank_tolerance: self.rank_tolerance,
            quadrature: QuadratureSpec {
                points_per_segment: self.quadrature.points_per_segment,
                ..QuadratureSpec::default()
            },
        };
        study.validate()?;
        ensure!(study.segments >= 3, "reference needs at least 3 segments");
        Ok(study)
    }
}
