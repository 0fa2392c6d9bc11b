use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::llm::{BackendMode, LlmSettings};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {detail}")]
    Invalid { path: PathBuf, detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatLlmConfig {
    pub mode: BackendMode,
    pub fixtures_dir: Option<PathBuf>,
    pub settings: LlmSettings,
}

impl Default for ChatLlmConfig {
    fn default() -> Self {
        ChatLlmConfig { mode: BackendMode::Off, fixtures_dir: None, settings: LlmSettings::chat() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub bank_path: PathBuf,
    /// JSON file with the video's id, title, duration, and URL.
    pub video_metadata_path: Option<PathBuf>,
    /// Session files go here; sessions stay in memory when unset.
    pub data_dir: Option<PathBuf>,
    /// Built web client, served at `/`.
    pub static_dir: Option<PathBuf>,
    pub bearer_token: Option<String>,
    pub session_size: usize,
    pub seed: u64,
    pub llm: ChatLlmConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            bank_path: PathBuf::from("bank.json"),
            video_metadata_path: None,
            data_dir: None,
            static_dir: None,
            bearer_token: None,
            session_size: crate::bank::DEFAULT_SESSION_SIZE,
            seed: 0,
            llm: ChatLlmConfig::default(),
        }
    }
}

impl ServiceConfig {
    /// Reads a TOML file, applies environment overrides, and resolves relative
    /// paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut config: ServiceConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Invalid { path: path.into(), detail: e.to_string() })?;
        config.apply_env(|k| std::env::var(k).ok()).map_err(|detail| ConfigError::Invalid { path: path.into(), detail })?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    /// Overrides from `VIDQUIZ_*` variables.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), String> {
        if let Some(v) = get("VIDQUIZ_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("VIDQUIZ_BANK") {
            self.bank_path = v.into();
        }
        if let Some(v) = get("VIDQUIZ_DATA_DIR") {
            self.data_dir = Some(v.into());
        }
        if let Some(v) = get("VIDQUIZ_STATIC_DIR") {
            self.static_dir = Some(v.into());
        }
        if let Some(v) = get("VIDQUIZ_TOKEN") {
            self.bearer_token = Some(v).filter(|t| !t.is_empty());
        }
        if let Some(v) = get("VIDQUIZ_SEED") {
            self.seed = v.parse().map_err(|_| format!("VIDQUIZ_SEED must be an integer, got {v:?}"))?;
        }
        if let Some(v) = get("VIDQUIZ_LLM_MODE") {
            self.llm.mode = serde_json::from_value(serde_json::Value::String(v.clone()))
                .map_err(|_| format!("VIDQUIZ_LLM_MODE must be off, replay, record or live, got {v:?}"))?;
        }
        if let Some(v) = get("VIDQUIZ_LLM_FIXTURES") {
            self.llm.fixtures_dir = Some(v.into());
        }
        Ok(())
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.bank_path);
        for p in [&mut self.video_metadata_path, &mut self.data_dir, &mut self.static_dir, &mut self.llm.fixtures_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoMetadata {
    pub video_id: String,
    pub title: String,
    pub duration_ms: u64,
    #[serde(default)]
    pub url: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_env() {
        let mut c: ServiceConfig = toml::from_str(
            "listen = \"0.0.0.0:9000\"\nbank_path = \"b.json\"\nseed = 7\n[llm]\nmode = \"replay\"\nfixtures_dir = \"fx\"\n",
        )
        .unwrap();
        assert_eq!(c.llm.mode, BackendMode::Replay);
        assert_eq!(c.llm.settings, LlmSettings::chat());
        c.apply_env(|k| (k == "VIDQUIZ_SEED").then(|| "9".to_string())).unwrap();
        assert_eq!(c.seed, 9);
        assert!(c.apply_env(|k| (k == "VIDQUIZ_LLM_MODE").then(|| "psychic".to_string())).is_err());
        c.resolve_paths(Path::new("/etc/vq"));
        assert_eq!(c.bank_path, PathBuf::from("/etc/vq/b.json"));
        assert_eq!(c.llm.fixtures_dir, Some(PathBuf::from("/etc/vq/fx")));
        assert!(toml::from_str::<ServiceConfig>("colour = 1").is_err());
    }
}
