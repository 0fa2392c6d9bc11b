use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{run_pipeline, GenerationConfig, PipelineError, PipelineOutput};
use crate::annotations::{
    aggregate_emotion_cues, build_enhanced_transcript, load_emotion_observations, load_visual_cues, AnnotationError, EmotionCue,
    EnhancedTranscript, VisualCue, DEFAULT_THRESHOLD_K,
};
use crate::bank::QuestionBank;
use crate::captions::{CaptionError, CaptionFormat, Transcript};
use crate::llm::Gateway;
use crate::strategy::{Strategy, StrategySet};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {detail}")]
    Config { path: PathBuf, detail: String },
    #[error("{path}: {source}")]
    Captions { path: PathBuf, source: CaptionError },
    #[error("{path}: {source}")]
    Annotations { path: PathBuf, source: AnnotationError },
}

fn default_k() -> u32 {
    DEFAULT_THRESHOLD_K
}

/// Everything `generate` needs: the video's inputs and the generation settings.
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub video_id: String,
    pub captions: PathBuf,
    pub emotion_observations: PathBuf,
    pub visual_annotations: PathBuf,
    #[serde(default = "default_k")]
    pub threshold_k: u32,
    /// `strategy` here is ignored; each run sets it.
    #[serde(default)]
    pub generation: GenerationConfig,
}

fn annotation_err(path: &Path) -> impl FnOnce(AnnotationError) -> InputError {
    let path = path.to_path_buf();
    move |source| InputError::Annotations { path, source }
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Read { path: path.into(), source })
}

impl GenerateConfig {
    pub fn load(path: &Path) -> Result<Self, InputError> {
        let mut config: GenerateConfig =
            toml::from_str(&read(path)?).map_err(|e| InputError::Config { path: path.into(), detail: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.captions, &mut config.emotion_observations, &mut config.visual_annotations] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }
}

pub fn load_transcript(path: &Path) -> Result<Transcript, InputError> {
    let content = read(path)?;
    CaptionFormat::detect(Some(path), &content)
        .parse(&content)
        .map_err(|source| InputError::Captions { path: path.into(), source })
}

/// A video's transcript and its aggregated cues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoInputs {
    pub video_id: String,
    pub transcript: Transcript,
    pub emotion_cues: Vec<EmotionCue>,
    pub visual_cues: Vec<VisualCue>,
}

impl VideoInputs {
    pub fn load(config: &GenerateConfig) -> Result<Self, InputError> {
        let transcript = load_transcript(&config.captions)?;
        let observations =
            load_emotion_observations(&read(&config.emotion_observations)?).map_err(annotation_err(&config.emotion_observations))?;
        let emotion_cues =
            aggregate_emotion_cues(&observations, config.threshold_k).map_err(annotation_err(&config.emotion_observations))?;
        let visual_cues = load_visual_cues(&read(&config.visual_annotations)?).map_err(annotation_err(&config.visual_annotations))?;
        Ok(VideoInputs { video_id: config.video_id.clone(), transcript, emotion_cues, visual_cues })
    }

    /// The transcript as the given strategy sees it.
    pub fn enhanced(&self, strategy: Strategy) -> Result<EnhancedTranscript, AnnotationError> {
        match strategy {
            Strategy::Transcript => Ok(EnhancedTranscript::plain(self.transcript.clone())),
            Strategy::Emotion => build_enhanced_transcript(&self.transcript, &self.emotion_cues),
            Strategy::Visual => build_enhanced_transcript(&self.transcript, &self.visual_cues),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("{strategy}: {source}")]
    Annotations { strategy: Strategy, source: AnnotationError },
    #[error("{strategy}: {source}")]
    Pipeline { strategy: Strategy, source: PipelineError },
    #[error("assembled bank is invalid: {0}")]
    Bank(#[from] crate::bank::SchemaViolation),
}

/// Runs the pipeline for each chosen strategy, in menu order, and assembles a bank.
pub fn generate_bank(
    inputs: &VideoInputs,
    base: &GenerationConfig,
    strategies: StrategySet,
    gateway: &Gateway,
) -> Result<(QuestionBank, Vec<(Strategy, PipelineOutput)>), GenerateError> {
    let mut outputs = Vec::new();
    let mut questions = Vec::new();
    for strategy in strategies.iter() {
        let enhanced = inputs.enhanced(strategy).map_err(|source| GenerateError::Annotations { strategy, source })?;
        let config = GenerationConfig { strategy, ..base.clone() };
        let out = run_pipeline(&enhanced, &config, gateway).map_err(|source| GenerateError::Pipeline { strategy, source })?;
        questions.extend(out.questions.iter().cloned());
        outputs.push((strategy, out));
    }
    let bank = QuestionBank::new(inputs.video_id.clone(), inputs.transcript.duration_ms(), questions)?;
    Ok((bank, outputs))
}
