//! Markdown rendering of a [`DocumentTree`]: one index page plus one
//! page per epic, all byte-deterministic for a given tree.

use std::fs;
use std::path::{Path, PathBuf};

use super::{DocError, DocumentTree};

fn epic_page_name(epic_id: usize) -> String {
    format!("epic-{epic_id:03}.md")
}

fn render_index(tree: &DocumentTree) -> String {
    let mut out = format!(
        "# {} feature documentation\n\nGenerated with configuration `{}`.\n\n",
        tree.repo_name, tree.config_hash
    );
    if tree.epics.is_empty() {
        out.push_str("_No features were generated for this repository._\n");
        return out;
    }
    out.push_str("## Epics\n\n");
    for section in &tree.epics {
        let epic = &section.epic;
        out.push_str(&format!(
            "- [Epic {}: {}]({}) — {} feature{}\n",
            epic.epic_id,
            epic.title,
            epic_page_name(epic.epic_id),
            section.features.len(),
            if section.features.len() == 1 { "" } else { "s" },
        ));
    }
    out
}

fn render_epic(section: &super::EpicSection) -> String {
    let epic = &section.epic;
    let badge = |degraded: bool| if degraded { " **[DEGRADED]**" } else { "" };
    let mut out = format!(
        "# Epic {}: {}{}\n\n{}\n",
        epic.epic_id,
        epic.title,
        badge(epic.degraded),
        epic.description
    );
    for feature_section in &section.features {
        let f = &feature_section.feature;
        out.push_str(&format!(
            "\n## Feature {}: {}{}\n\n{}\n\nLinked files:\n\n",
            f.feature_id,
            f.title,
            badge(f.degraded),
            f.description
        ));
        for path in &feature_section.files {
            out.push_str(&format!("- `{path}`\n"));
        }
        out.push_str("\nLinked methods:\n\n");
        for (fqn, (start, end)) in &feature_section.methods {
            out.push_str(&format!("- `{fqn}` (lines {start}–{end})\n"));
        }
    }
    out
}

/// Writes `index.md` plus one page per epic into `out_dir` (created if
/// missing) and returns the written paths, index first.
pub fn render_documentation(tree: &DocumentTree, out_dir: &Path) -> Result<Vec<PathBuf>, DocError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(tree.epics.len() + 1);
    let index = out_dir.join("index.md");
    fs::write(&index, render_index(tree))?;
    written.push(index);
    for section in &tree.epics {
        let path = out_dir.join(epic_page_name(section.epic.epic_id));
        fs::write(&path, render_epic(section))?;
        written.push(path);
    }
    Ok(written)
}
