use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MotionNoise, ParticleBounds, SensorModelConfig};
use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Covariance determinant (m²·m²·rad²) of roughly 0.2 m / 0.2 m / 0.2 rad.
pub(crate) const DEFAULT_CONVERGENCE_DET: f64 = 6.4e-5;

/// Which observation model weights the particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Range endpoints scored on the label fields only.
    Range,
    /// Range endpoints scored on the occupancy and label fields, mixed by
    /// `eps_rng` / `eps_lbl`.
    Combined,
    /// No ranges: semantic raycasting against the label fields.
    Ray,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Range, Mode::Combined, Mode::Ray];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Range => "range",
            Mode::Combined => "combined",
            Mode::Ray => "ray",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "range" => Ok(Mode::Range),
            "combined" => Ok(Mode::Combined),
            "ray" | "rays" | "ray-only" | "rayonly" => Ok(Mode::Ray),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Everything the filter needs besides the map; mirrors the filter
/// configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub sensor: SensorModelConfig,
    pub sigma_base: f64,
    pub motion: MotionNoise,
    pub bounds: ParticleBounds,
    pub seed: u64,
    pub mode: Mode,
    pub convergence_det: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            sensor: SensorModelConfig::default(),
            sigma_base: 0.1,
            motion: MotionNoise::default(),
            bounds: ParticleBounds { min: 250, max: 1000 },
            seed: 0,
            mode: Mode::Combined,
            convergence_det: DEFAULT_CONVERGENCE_DET,
        }
    }
}

impl FilterConfig {
    pub const KEYS: [&'static str; 17] = [
        "eps_rng", "eps_lbl", "sigma_occ", "sigma_base", "ghost_factor", "p_floor", "alpha1",
        "alpha2", "alpha3", "alpha4", "min_particles", "max_particles", "seed", "mode",
        "max_range", "convergence_det", "scan_exponent",
    ];

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        if let Some(unknown) = kv.keys().find(|k| !Self::KEYS.contains(k)) {
            return Err(Error::Config(format!("unknown filter key `{unknown}`")));
        }
        let cfg = Self {
            sensor: SensorModelConfig {
                eps_rng: kv.get_or("eps_rng", d.sensor.eps_rng)?,
                eps_lbl: kv.get_or("eps_lbl", d.sensor.eps_lbl)?,
                sigma_occ: kv.get_or("sigma_occ", d.sensor.sigma_occ)?,
                p_floor: kv.get_or("p_floor", d.sensor.p_floor)?,
                ghost_factor: kv.get_or("ghost_factor", d.sensor.ghost_factor)?,
                max_range: kv.get_or("max_range", d.sensor.max_range)?,
                scan_exponent: kv.get_or("scan_exponent", d.sensor.scan_exponent)?,
            },
            sigma_base: kv.get_or("sigma_base", d.sigma_base)?,
            motion: MotionNoise {
                alpha1: kv.get_or("alpha1", d.motion.alpha1)?,
                alpha2: kv.get_or("alpha2", d.motion.alpha2)?,
                alpha3: kv.get_or("alpha3", d.motion.alpha3)?,
                alpha4: kv.get_or("alpha4", d.motion.alpha4)?,
            },
            bounds: ParticleBounds::new(
                kv.get_or("min_particles", d.bounds.min)?,
                kv.get_or("max_particles", d.bounds.max)?,
            )?,
            seed: kv.get_or("seed", d.seed)?,
            mode: kv.get_or("mode", d.mode)?,
            convergence_det: kv.get_or("convergence_det", d.convergence_det)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text, "<filter config>")?)
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.motion.validate()?;
        ParticleBounds::new(self.bounds.min, self.bounds.max)?;
        if !(self.sigma_base > 0.0) {
            return Err(Error::Config(format!("sigma_base {} must be positive", self.sigma_base)));
        }
        if !(self.convergence_det > 0.0) {
            return Err(Error::Config("convergence_det must be positive".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let s = &self.sensor;
        let m = &self.motion;
        format!(
            "mode: {}\neps_rng: {}\neps_lbl: {}\nsigma_occ: {}\nsigma_base: {}\nghost_factor: {}\np_floor: {}\n\
             alpha1: {}\nalpha2: {}\nalpha3: {}\nalpha4: {}\nmin_particles: {}\nmax_particles: {}\nseed: {}\n\
             max_range: {}\nconvergence_det: {}\nscan_exponent: {}\n",
            self.mode, s.eps_rng, s.eps_lbl, s.sigma_occ, self.sigma_base, s.ghost_factor, s.p_floor,
            m.alpha1, m.alpha2, m.alpha3, m.alpha4, self.bounds.min, self.bounds.max, self.seed,
            s.max_range, self.convergence_det, s.scan_exponent,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = FilterConfig::default();
        cfg.mode = Mode::Ray;
        cfg.sensor.ghost_factor = 7.0;
        cfg.bounds = ParticleBounds { min: 15_000, max: 50_000 };
        cfg.seed = 99;
        assert_eq!(FilterConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_modes() {
        assert!(FilterConfig::parse("eps_rgn: 0.2").is_err());
        assert!(FilterConfig::parse("mode: lidar").is_err());
        assert!(FilterConfig::parse("min_particles: 10\nmax_particles: 5").is_err());
        assert_eq!(FilterConfig::parse("mode: RAY").unwrap().mode, Mode::Ray);
    }
}
