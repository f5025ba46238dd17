//! Engine configuration file (TOML) and model selection.
//!
//! ```toml
//! tokenizer = "gpt2"          # builtin name or a vocab directory
//! chunk_size = 64
//! model = "copy"              # copy | uniform | ngram[:corpus_dir] | tcp://host:port
//! seed = 0
//! embedding_dim = 256
//!
//! [rag]
//! m = 64
//! k = 1
//! context_budget = 384
//! reserve_for_input = 192
//! include_metadata = true
//! include_continuation = true
//! ```
//!
//! Every key is optional; flags override the file, the file overrides the
//! defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context::RagConfig;
use crate::error::{Error, Result};
use crate::lm::{external_model_connect, CopyOracle, LanguageModel, NgramOracle, UniformOracle};
use crate::tokenizer::{load_tokenizer, TokenizerSpec};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub tokenizer: Option<String>,
    pub chunk_size: Option<usize>,
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub embedding_dim: Option<usize>,
    pub rag: Option<RagConfig>,
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: EngineConfig = toml::from_str(&text).map_err(|e| {
            let location = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!("line {line}")
                })
                .unwrap_or_else(|| "unknown location".into());
            Error::parse(path.display().to_string(), location, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(m) = self.chunk_size {
            if m < 2 {
                return Err(Error::Config(format!("chunk_size must be at least 2, got {m}")));
            }
        }
        if let Some(rag) = &self.rag {
            rag.validate()?;
        }
        if let Some(t) = &self.tokenizer {
            if builtin_tokenizer(t).is_none() && !Path::new(t).exists() {
                return Err(Error::Config(format!("tokenizer `{t}` does not exist")));
            }
        }
        Ok(())
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        path.map(Self::load).transpose().map(Option::unwrap_or_default)
    }
}

/// Vocabulary directories shipped with the crate.
pub fn builtin_tokenizer(name: &str) -> Option<PathBuf> {
    let dir = match name {
        "gpt2" => "gpt2",
        "starcoder" => "starcoder",
        _ => return None,
    };
    Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/vocab").join(dir))
}

pub fn open_tokenizer(name: &str) -> Result<TokenizerSpec> {
    match builtin_tokenizer(name) {
        Some(p) => load_tokenizer(p),
        None => load_tokenizer(name),
    }
}

pub type DynModel = Box<dyn LanguageModel + Send + Sync>;

/// Builds a model from its spec string.
pub fn open_model(spec_str: &str, tokenizer: &TokenizerSpec, ngram_extensions: &[String]) -> Result<DynModel> {
    let v = tokenizer.vocab_size();
    if let Some(addr) = spec_str.strip_prefix("tcp://") {
        return Ok(Box::new(external_model_connect(addr, tokenizer)?));
    }
    match spec_str.split_once(':') {
        None if spec_str == "copy" => Ok(Box::new(CopyOracle::new(v))),
        None if spec_str == "uniform" => Ok(Box::new(UniformOracle::new(v))),
        None if spec_str == "ngram" => Ok(Box::new(NgramOracle::new(v, NgramOracle::DEFAULT_ORDER))),
        Some(("ngram", dir)) => {
            let mut m = NgramOracle::new(v, NgramOracle::DEFAULT_ORDER);
            let mut files = 0;
            for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
                let entry = entry.map_err(|e| Error::Config(format!("ngram corpus {dir}: {e}")))?;
                let ext = entry.path().extension().and_then(|x| x.to_str()).unwrap_or("");
                if entry.file_type().is_file() && ngram_extensions.iter().any(|x| x == ext) {
                    let bytes = std::fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
                    m.add_sequence(&tokenizer.encode(&bytes));
                    files += 1;
                }
            }
            if files == 0 {
                return Err(Error::NoFiles(dir.into()));
            }
            Ok(Box::new(m))
        }
        _ => Err(Error::InvalidArgument(format!(
            "unknown model `{spec_str}` (copy, uniform, ngram[:dir], tcp://host:port)"
        ))),
    }
}
