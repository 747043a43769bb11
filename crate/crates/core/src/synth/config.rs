//! Generator configuration and its key=value file format.

use rand::Rng;

use super::SynthError;

/// A closed interval to draw per-subject parameters from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub lo: f64,
    pub hi: f64,
}

impl ParamRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn fixed(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    fn validate(&self, name: &str) -> Result<(), SynthError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(SynthError::Config(format!(
                "{name} range [{}, {}] is not a valid interval",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Full dataset-generation configuration.
///
/// `afib_fraction` is the target fraction of positive labels across the
/// dataset; `spliced_fraction` is the fraction of records built as an
/// NSR-AFib-NSR splice (with the AFib episode covering half the record).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub fs_hz: f64,
    pub record_duration_s: f64,
    pub records_per_subject: usize,
    pub afib_fraction: f64,
    pub spliced_fraction: f64,
    pub cross_fade_s: f64,
    pub nsr_bpm: ParamRange,
    pub nsr_cv: ParamRange,
    pub nsr_resp_depth: ParamRange,
    pub afib_bpm: ParamRange,
    pub afib_cv: ParamRange,
    pub systolic_width_s: ParamRange,
    pub dicrotic_delay_s: ParamRange,
    pub dicrotic_ratio: ParamRange,
    pub amplitude_jitter: ParamRange,
    pub baseline_wander_amp: ParamRange,
    pub baseline_wander_hz: ParamRange,
    pub gaussian_sigma: ParamRange,
    pub dc_offset: ParamRange,
    pub dropout_prob_per_s: ParamRange,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            fs_hz: 20.0,
            record_duration_s: 600.0,
            records_per_subject: 2,
            afib_fraction: 0.4,
            spliced_fraction: 0.2,
            cross_fade_s: super::DEFAULT_CROSS_FADE_S,
            nsr_bpm: ParamRange::new(50.0, 90.0),
            nsr_cv: ParamRange::new(0.02, 0.06),
            nsr_resp_depth: ParamRange::new(0.2, 0.8),
            afib_bpm: ParamRange::new(70.0, 130.0),
            afib_cv: ParamRange::new(0.18, 0.35),
            systolic_width_s: ParamRange::new(0.06, 0.12),
            dicrotic_delay_s: ParamRange::new(0.25, 0.40),
            dicrotic_ratio: ParamRange::new(0.20, 0.45),
            amplitude_jitter: ParamRange::new(0.02, 0.10),
            baseline_wander_amp: ParamRange::new(0.0, 0.30),
            baseline_wander_hz: ParamRange::new(0.10, 0.40),
            gaussian_sigma: ParamRange::new(0.01, 0.08),
            dc_offset: ParamRange::new(-0.5, 0.5),
            dropout_prob_per_s: ParamRange::new(0.0, 0.02),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.fs_hz > 0.0) {
            return Err(SynthError::Config(format!("fs_hz must be positive, got {}", self.fs_hz)));
        }
        if !(self.record_duration_s > 0.0) {
            return Err(SynthError::Config(format!(
                "record_duration_s must be positive, got {}",
                self.record_duration_s
            )));
        }
        if self.records_per_subject == 0 {
            return Err(SynthError::Config("records_per_subject must be >= 1".into()));
        }
        for (name, v) in [
            ("afib_fraction", self.afib_fraction),
            ("spliced_fraction", self.spliced_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::Config(format!("{name} must be in [0,1], got {v}")));
            }
        }
        if !(self.cross_fade_s >= 0.0) {
            return Err(SynthError::Config(format!(
                "cross_fade_s must be non-negative, got {}",
                self.cross_fade_s
            )));
        }
        for (name, r) in [
            ("nsr_bpm", self.nsr_bpm),
            ("nsr_cv", self.nsr_cv),
            ("nsr_resp_depth", self.nsr_resp_depth),
            ("afib_bpm", self.afib_bpm),
            ("afib_cv", self.afib_cv),
            ("systolic_width_s", self.systolic_width_s),
            ("dicrotic_delay_s", self.dicrotic_delay_s),
            ("dicrotic_ratio", self.dicrotic_ratio),
            ("amplitude_jitter", self.amplitude_jitter),
            ("baseline_wander_amp", self.baseline_wander_amp),
            ("baseline_wander_hz", self.baseline_wander_hz),
            ("gaussian_sigma", self.gaussian_sigma),
            ("dc_offset", self.dc_offset),
            ("dropout_prob_per_s", self.dropout_prob_per_s),
        ] {
            r.validate(name)?;
        }
        // The class separation the classifier learns from.
        if !(self.afib_cv.lo > self.nsr_cv.hi) {
            return Err(SynthError::Config(format!(
                "afib_cv range must lie strictly above nsr_cv range ({} vs {})",
                self.afib_cv.lo, self.nsr_cv.hi
            )));
        }
        Ok(())
    }

    /// Parses the key=value config format. Blank lines and `#` comments
    /// are ignored; range-valued keys take `lo,hi`; unknown keys are
    /// rejected. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SynthError::Config(format!("line {}: expected key=value, got `{raw}`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());

            let scalar = |v: &str| -> Result<f64, SynthError> {
                v.parse().map_err(|_| {
                    SynthError::Config(format!("line {}: bad number `{v}`", lineno + 1))
                })
            };
            let range = |v: &str| -> Result<ParamRange, SynthError> {
                let (lo, hi) = v.split_once(',').ok_or_else(|| {
                    SynthError::Config(format!("line {}: expected `lo,hi`, got `{v}`", lineno + 1))
                })?;
                Ok(ParamRange::new(scalar(lo.trim())?, scalar(hi.trim())?))
            };

            match key {
                "fs_hz" => cfg.fs_hz = scalar(value)?,
                "record_duration_s" => cfg.record_duration_s = scalar(value)?,
                "records_per_subject" => {
                    cfg.records_per_subject = value.parse().map_err(|_| {
                        SynthError::Config(format!(
                            "line {}: bad integer `{value}`",
                            lineno + 1
                        ))
                    })?
                }
                "afib_fraction" => cfg.afib_fraction = scalar(value)?,
                "spliced_fraction" => cfg.spliced_fraction = scalar(value)?,
                "cross_fade_s" => cfg.cross_fade_s = scalar(value)?,
                "nsr_bpm" => cfg.nsr_bpm = range(value)?,
                "nsr_cv" => cfg.nsr_cv = range(value)?,
                "nsr_resp_depth" => cfg.nsr_resp_depth = range(value)?,
                "afib_bpm" => cfg.afib_bpm = range(value)?,
                "afib_cv" => cfg.afib_cv = range(value)?,
                "systolic_width_s" => cfg.systolic_width_s = range(value)?,
                "dicrotic_delay_s" => cfg.dicrotic_delay_s = range(value)?,
                "dicrotic_ratio" => cfg.dicrotic_ratio = range(value)?,
                "amplitude_jitter" => cfg.amplitude_jitter = range(value)?,
                "baseline_wander_amp" => cfg.baseline_wander_amp = range(value)?,
                "baseline_wander_hz" => cfg.baseline_wander_hz = range(value)?,
                "gaussian_sigma" => cfg.gaussian_sigma = range(value)?,
                "dc_offset" => cfg.dc_offset = range(value)?,
                "dropout_prob_per_s" => cfg.dropout_prob_per_s = range(value)?,
                other => {
                    return Err(SynthError::Config(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
