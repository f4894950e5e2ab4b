//! Source-tree parsing into a typed repository graph.
//!
//! [`parse_repository`] walks a source tree, parses every file matching the
//! selected language profile, and assembles a [`RepoModel`]: file nodes,
//! method nodes, import relations between files, and resolved call
//! relations between methods. [`build_adjacency`] projects those relations
//! into symmetric binary adjacency matrices at file or method level.
//!
//! Only one profile ships (`java`, backed by tree-sitter); the profile owns
//! extraction and the deterministic resolution rules, so adding a language
//! touches no core types. Call resolution is name-and-arity based within
//! the repository only — calls into external dependencies are dropped with
//! a warning. Node IDs are assigned by lexicographic path order, then
//! source order within each file, so two runs over the same tree produce
//! byte-identical serialized models.

pub(crate) mod java;
mod resolve;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::exec;

// ── errors ──────────────────────────────────────────────────────────

/// Errors from parsing a repository or validating a model.
#[derive(Debug, Error)]
pub enum RepoGraphError {
    /// The requested root directory does not exist.
    #[error("repository root not found: {0}")]
    RootNotFound(String),
    /// The root exists but holds no files matching the profile.
    #[error("no {profile} source files under {root}")]
    NoSourceFiles { root: String, profile: String },
    /// Every candidate file failed to parse.
    #[error("all source files were unparseable; refusing to emit an empty model")]
    EmptyModel,
    /// No language profile is registered under this identifier.
    #[error("unknown language profile: {0}")]
    UnknownProfile(String),
    /// A constructed model violated a structural invariant.
    #[error("invalid repo model: {0}")]
    InvalidModel(String),
}

// ── domain types ────────────────────────────────────────────────────

/// One source file in the repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileNode {
    /// Stable integer ID; equals the index in [`RepoModel::files`].
    pub file_id: usize,
    /// Repository-relative path with forward slashes.
    pub path: String,
    /// Dotted package / namespace, empty for the default package.
    pub package: String,
}

/// One method (or constructor) in the repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodNode {
    /// Stable integer ID; equals the index in [`RepoModel::methods`].
    pub method_id: usize,
    /// Fully qualified name, unique across the repository.
    ///
    /// Shape is `package.Class.method`; constructors use `<init>`, and
    /// colliding names get an ordinal suffix (`…#2`, `…#3`).
    pub fqn: String,
    /// ID of the containing file.
    pub file_id: usize,
    /// 1-based (start_line, end_line) of the declaration.
    pub span: (usize, usize),
    /// Full declaration text; empty for bodiless (abstract / interface)
    /// declarations.
    pub source_text: String,
}

/// Parsed repository: entities plus their import and call relations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoModel {
    /// Root path as given to the parser.
    pub repo_root: String,
    /// Files ordered by repository-relative path.
    pub files: Vec<FileNode>,
    /// Methods ordered by (file, source position).
    pub methods: Vec<MethodNode>,
    /// Directed import relations `(importer_file_id, imported_file_id)`.
    pub imports: BTreeSet<(usize, usize)>,
    /// Directed call relations `(caller_method_id, callee_method_id)`.
    pub calls: BTreeSet<(usize, usize)>,
}

impl RepoModel {
    /// Checks every structural invariant, returning the first violation.
    pub fn validate(&self) -> Result<(), RepoGraphError> {
        let bad = |msg: String| Err(RepoGraphError::InvalidModel(msg));
        let mut paths = BTreeSet::new();
        for (i, f) in self.files.iter().enumerate() {
            if f.file_id != i {
                return bad(format!("file_id {} at index {i}", f.file_id));
            }
            if !paths.insert(&f.path) {
                return bad(format!("duplicate file path {:?}", f.path));
            }
        }
        let mut fqns = BTreeSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            if m.method_id != i {
                return bad(format!("method_id {} at index {i}", m.method_id));
            }
            if !fqns.insert(&m.fqn) {
                return bad(format!("duplicate fqn {:?}", m.fqn));
            }
            if m.file_id >= self.files.len() {
                return bad(format!("method {:?} references missing file {}", m.fqn, m.file_id));
            }
            if m.span.0 > m.span.1 {
                return bad(format!("method {:?} has inverted span {:?}", m.fqn, m.span));
            }
        }
        for &(a, b) in &self.imports {
            if a == b {
                return bad(format!("self-loop in imports: ({a},{a})"));
            }
            if a >= self.files.len() || b >= self.files.len() {
                return bad(format!("import edge ({a},{b}) has a dangling file_id"));
            }
        }
        for &(a, b) in &self.calls {
            if a == b {
                return bad(format!("self-loop in calls: ({a},{a})"));
            }
            if a >= self.methods.len() || b >= self.methods.len() {
                return bad(format!("call edge ({a},{b}) has a dangling method_id"));
            }
        }
        Ok(())
    }
}

/// Which entity level an adjacency matrix describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyLevel {
    File,
    Method,
}

/// Symmetric binary adjacency matrix in sparse triple form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    /// Entity level of the nodes.
    pub level: AdjacencyLevel,
    /// Node count (matrix is `n × n`).
    pub n: usize,
    /// Sorted nonzero entries `(i, j, 1)`; both orientations present.
    pub entries: Vec<(usize, usize, u8)>,
}

impl AdjacencyMatrix {
    /// Undirected edge list with `i < j`, one entry per pair.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.entries
            .iter()
            .filter(|&&(i, j, _)| i < j)
            .map(|&(i, j, _)| (i, j))
            .collect()
    }

    /// Checks symmetry, zero diagonal, binary values, and index bounds.
    pub fn validate(&self) -> Result<(), RepoGraphError> {
        let set: BTreeSet<(usize, usize)> =
            self.entries.iter().map(|&(i, j, _)| (i, j)).collect();
        for &(i, j, v) in &self.entries {
            if i == j {
                return Err(RepoGraphError::InvalidModel(format!(
                    "nonzero diagonal at ({i},{i})"
                )));
            }
            if i >= self.n || j >= self.n {
                return Err(RepoGraphError::InvalidModel(format!(
                    "entry ({i},{j}) out of bounds for n={}",
                    self.n
                )));
            }
            if v != 1 {
                return Err(RepoGraphError::InvalidModel(format!(
                    "non-binary value {v} at ({i},{j})"
                )));
            }
            if !set.contains(&(j, i)) {
                return Err(RepoGraphError::InvalidModel(format!(
                    "asymmetric entry ({i},{j})"
                )));
            }
        }
        Ok(())
    }
}

/// Result of [`parse_repository`]: the model plus non-fatal warnings
/// (per-file parse failures, unresolved call targets).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub model: RepoModel,
    pub warnings: Vec<String>,
}

// ── operations ──────────────────────────────────────────────────────

/// Parses the source tree under `root` with the named language profile.
///
/// Individual files that fail to parse are dropped with a warning; the
/// call only errors if the root is missing, no matching files exist, the
/// profile is unknown, or *every* file fails to parse.
pub fn parse_repository(root: &Path, profile: &str) -> Result<ParseOutcome, RepoGraphError> {
    if profile != "java" {
        return Err(RepoGraphError::UnknownProfile(profile.to_string()));
    }
    if !root.is_dir() {
        return Err(RepoGraphError::RootNotFound(root.display().to_string()));
    }

    let mut sources: Vec<(String, PathBuf)> = WalkDir::new(root)
        .into_iter()
        .filter_entry(|e| {
            // Skip hidden directories (.git and friends) below the root.
            e.depth() == 0
                || e.file_name()
                    .to_str()
                    .map(|s| !s.starts_with('.'))
                    .unwrap_or(false)
        })
        .filter_map(|entry| entry.ok())
        .filter(|e| e.file_type().is_file())
        .filter(|e| e.path().extension().and_then(|x| x.to_str()) == Some("java"))
        .filter_map(|e| {
            let rel = e
                .path()
                .strip_prefix(root)
                .ok()?
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            Some((rel, e.path().to_path_buf()))
        })
        .collect();
    sources.sort();

    if sources.is_empty() {
        return Err(RepoGraphError::NoSourceFiles {
            root: root.display().to_string(),
            profile: profile.to_string(),
        });
    }

    // Per-file parsing is independent; the merge below is a sequential
    // reduction in path order, so results are deterministic either way.
    let parsed: Vec<Result<java::FileFacts, String>> =
        exec::map_vec(sources, |(rel, full)| match std::fs::read_to_string(&full) {
            Ok(text) => java::parse_java_file(&rel, &text),
            Err(e) => Err(format!("{rel}: unreadable: {e}")),
        });

    let mut warnings = Vec::new();
    let mut facts = Vec::new();
    for result in parsed {
        match result {
            Ok(f) => facts.push(f),
            Err(w) => warnings.push(w),
        }
    }
    if facts.is_empty() {
        return Err(RepoGraphError::EmptyModel);
    }

    let (model, resolution_warnings) =
        resolve::assemble(root.display().to_string(), facts);
    warnings.extend(resolution_warnings);
    model.validate()?;
    Ok(ParseOutcome { model, warnings })
}

/// Projects the model's relations into a symmetric adjacency matrix.
///
/// File level derives from imports, method level from calls; an entry is
/// 1 when the relation exists in either direction.
pub fn build_adjacency(model: &RepoModel, level: AdjacencyLevel) -> AdjacencyMatrix {
    let (n, relation) = match level {
        AdjacencyLevel::File => (model.files.len(), &model.imports),
        AdjacencyLevel::Method => (model.methods.len(), &model.calls),
    };
    let mut entries = BTreeSet::new();
    for &(a, b) in relation {
        if a != b {
            entries.insert((a, b));
            entries.insert((b, a));
        }
    }
    AdjacencyMatrix {
        level,
        n,
        entries: entries.into_iter().map(|(i, j)| (i, j, 1)).collect(),
    }
}
