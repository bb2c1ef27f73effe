use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_file, BenchError};

/// Contents of a task's optional `expected` marker file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expected {
    Verifiable,
    KnownHard,
}

/// One task directory: `program.dfy` plus optional `outline.md`,
/// `cassette.json`, `verifier.json` and `expected`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDescriptor {
    pub id: String,
    pub dir: PathBuf,
    pub program: String,
    pub outline: Option<String>,
    pub cassette: Option<PathBuf>,
    pub verifier_script: Option<PathBuf>,
    pub expected: Option<Expected>,
}

/// Optional `corpus.toml` at the corpus root. Only the global budget can be
/// raised per corpus, e.g. for a set of known-hard tasks.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSettings {
    pub global_timeout_seconds: Option<u64>,
}

fn optional(path: PathBuf) -> Option<PathBuf> {
    path.is_file().then_some(path)
}

impl TaskDescriptor {
    pub fn load(dir: &Path) -> Result<Self, BenchError> {
        let id = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| BenchError::Usage(format!("{} is not a task directory", dir.display())))?;
        let program = read_file(&dir.join("program.dfy"))?;
        let outline = match optional(dir.join("outline.md")) {
            Some(p) => Some(read_file(&p)?),
            None => None,
        };
        let expected = match optional(dir.join("expected")) {
            None => None,
            Some(p) => match read_file(&p)?.trim() {
                "verifiable" => Some(Expected::Verifiable),
                "known-hard" => Some(Expected::KnownHard),
                other => {
                    return Err(BenchError::Usage(format!(
                        "{}: expected `verifiable` or `known-hard`, found `{other}`",
                        p.display()
                    )))
                }
            },
        };
        Ok(TaskDescriptor {
            id,
            dir: dir.to_path_buf(),
            program,
            outline,
            cassette: optional(dir.join("cassette.json")),
            verifier_script: optional(dir.join("verifier.json")),
            expected,
        })
    }
}

/// Task directories of `root` in name order, with the corpus settings.
pub fn load_corpus(root: &Path) -> Result<(Vec<TaskDescriptor>, CorpusSettings), BenchError> {
    let entries = std::fs::read_dir(root).map_err(|e| BenchError::Usage(format!("cannot read corpus {}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join("program.dfy").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(BenchError::Usage(format!("corpus {} holds no task directories", root.display())));
    }
    let settings = match optional(root.join("corpus.toml")) {
        Some(p) => toml::from_str(&read_file(&p)?).map_err(|e| BenchError::Usage(format!("{}: {e}", p.display())))?,
        None => CorpusSettings::default(),
    };
    let tasks = dirs.iter().map(|d| TaskDescriptor::load(d)).collect::<Result<_, _>>()?;
    Ok((tasks, settings))
}
