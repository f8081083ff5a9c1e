use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::csf::ViewingEnvironment;
use crate::error::{Result, VqaError};
use crate::features::{backbone_spec, motion_spec, FeatureMode};
use crate::losses::DEFAULT_LAMBDA;
use crate::quality_head::DEFAULT_HIDDEN_UNITS;
use crate::sampling::SamplingConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Paper,
    Stub,
}

/// What one training example is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleUnit {
    /// One random chunk per video per epoch, labelled with the video MOS.
    #[default]
    RandomChunk,
    /// Every chunk, pooled to a video score before the loss.
    AllChunks,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub profile: Profile,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    /// Chunk duration in seconds.
    pub tau: f64,
    pub sampling: SamplingConfig,
    pub backbone: String,
    pub motion: String,
    pub hidden_units: usize,
    pub feature_mode: FeatureMode,
    pub sample_unit: SampleUnit,
    pub seed: u64,
}

impl TrainConfig {
    pub fn paper() -> Self {
        TrainConfig {
            profile: Profile::Paper,
            learning_rate: 1e-5,
            batch_size: 8,
            epochs: 10,
            lambda: DEFAULT_LAMBDA,
            tau: 1.0,
            sampling: SamplingConfig::paper(),
            backbone: "resnet50".into(),
            motion: "slowfast-r50".into(),
            hidden_units: DEFAULT_HIDDEN_UNITS,
            feature_mode: FeatureMode::Full,
            sample_unit: SampleUnit::RandomChunk,
            seed: 0,
        }
    }

    pub fn stub() -> Self {
        TrainConfig {
            profile: Profile::Stub,
            learning_rate: 5e-3,
            epochs: 30,
            sampling: SamplingConfig::stub(),
            backbone: "stub-conv".into(),
            motion: "stub-motion".into(),
            ..Self::paper()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Paper => Self::paper(),
            Profile::Stub => Self::stub(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            problems.push("epochs must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            problems.push(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            problems.push(format!("tau must be positive, got {}", self.tau));
        }
        if self.hidden_units == 0 {
            problems.push("hidden_units must be positive".into());
        }
        if let Err(e) = self.sampling.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = backbone_spec(&self.backbone) {
            problems.push(e.to_string());
        }
        if let Err(e) = motion_spec(&self.motion) {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(VqaError::Validation(problems))
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// On-disk run configuration. Every field is optional and overrides the
/// defaults of the chosen profile; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub train: Option<TrainSection>,
    pub sampling: Option<SamplingSection>,
    pub adapters: Option<AdapterSection>,
    pub environment: Option<ViewingEnvironment>,
    pub data: Option<DataSection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub hidden_units: Option<usize>,
    pub feature_mode: Option<FeatureMode>,
    pub sample_unit: Option<SampleUnit>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub resize_min: Option<usize>,
    pub crop_size: Option<usize>,
    pub motion_size: Option<usize>,
    pub motion_frames: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterSection {
    pub backbone: Option<String>,
    pub motion: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub manifest: Option<PathBuf>,
    pub targets: Option<Vec<PathBuf>>,
    pub output_dir: Option<PathBuf>,
}

/// A fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub environment: ViewingEnvironment,
    pub manifest: Option<PathBuf>,
    pub targets: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| VqaError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| VqaError::io(path, e))?;
        Self::parse(&text)
    }

    /// Apply overrides to the profile defaults. Relative data paths resolve
    /// against `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<RunConfig> {
        let mut t = TrainConfig::for_profile(self.profile.unwrap_or(Profile::Stub));
        if let Some(seed) = self.seed {
            t.seed = seed;
        }
        if let Some(s) = &self.train {
            macro_rules! set {
                ($($f:ident),*) => { $( if let Some(v) = s.$f.clone() { t.$f = v; } )* };
            }
            set!(learning_rate, batch_size, epochs, lambda, tau, hidden_units, feature_mode, sample_unit);
        }
        if let Some(s) = &self.sampling {
            let c = &mut t.sampling;
            c.resize_min = s.resize_min.unwrap_or(c.resize_min);
            c.crop_size = s.crop_size.unwrap_or(c.crop_size);
            c.motion_size = s.motion_size.unwrap_or(c.motion_size);
            c.motion_frames = s.motion_frames.unwrap_or(c.motion_frames);
        }
        if let Some(a) = &self.adapters {
            if let Some(b) = &a.backbone {
                t.backbone = b.clone();
            }
            if let Some(m) = &a.motion {
                t.motion = m.clone();
            }
        }
        t.validate()?;
        let environment = self.environment.clone().unwrap_or_default();
        environment.validate()?;
        let abs = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base_dir.join(p)
            }
        };
        let data = self.data.clone().unwrap_or_default();
        Ok(RunConfig {
            train: t,
            environment,
            manifest: data.manifest.as_ref().map(abs),
            targets: data.targets.unwrap_or_default().iter().map(abs).collect(),
            output_dir: data.output_dir.as_ref().map(abs),
        })
    }
}
