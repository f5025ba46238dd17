use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use walkdir::WalkDir;

use super::RetrievalDatabase;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizerSpec;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub chunk_size: usize,
    /// File extensions to index, without the dot.
    pub extensions: Vec<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            chunk_size: 64,
            extensions: vec!["py".to_string()],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildWarning {
    pub path: String,
    pub message: String,
}

#[derive(Debug)]
pub struct BuildOutput {
    pub database: RetrievalDatabase,
    pub files_indexed: usize,
    pub warnings: Vec<BuildWarning>,
}

/// Project-relative path with `/` separators.
pub fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn matching_files(root: &Path, extensions: &[String]) -> (Vec<PathBuf>, Vec<BuildWarning>) {
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                let ext = e.path().extension().and_then(|x| x.to_str()).unwrap_or("");
                if extensions.iter().any(|x| x == ext) {
                    files.push(e.into_path());
                }
            }
            Ok(_) => {}
            Err(err) => warnings.push(BuildWarning {
                path: err.path().map(|p| relative_path(root, p)).unwrap_or_default(),
                message: err.to_string(),
            }),
        }
    }
    (files, warnings)
}

/// Tokenizes every matching file under `root` and chunks it. Unreadable
/// files are skipped with a warning; finding no files at all is an error.
pub fn build_database(root: impl AsRef<Path>, spec: &TokenizerSpec, opts: &BuildOptions) -> Result<BuildOutput> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "project root is not a directory"),
        ));
    }
    if opts.chunk_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "chunk size must be at least 2, got {}",
            opts.chunk_size
        )));
    }
    let (files, mut warnings) = matching_files(root, &opts.extensions);
    if files.is_empty() {
        return Err(Error::NoFiles(root.to_path_buf()));
    }
    let results: Vec<std::result::Result<(String, Vec<u32>), BuildWarning>> = files
        .par_iter()
        .map(|p| {
            let rel = relative_path(root, p);
            match std::fs::read(p) {
                Ok(bytes) => Ok((rel, spec.encode(&bytes).into_vec())),
                Err(e) => Err(BuildWarning {
                    path: rel,
                    message: e.to_string(),
                }),
            }
        })
        .collect();
    let mut tokenized = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(f) => tokenized.push(f),
            Err(w) => {
                log::warn!("skipping {}: {}", w.path, w.message);
                warnings.push(w);
            }
        }
    }
    let files_indexed = tokenized.len();
    let database = RetrievalDatabase::from_token_files(tokenized, opts.chunk_size, spec.id())?;
    Ok(BuildOutput {
        database,
        files_indexed,
        warnings,
    })
}
