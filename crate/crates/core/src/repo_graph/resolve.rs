//! Assembly of per-file facts into a [`RepoModel`].
//!
//! Responsibilities: deterministic ID and FQN assignment, name-and-arity
//! call resolution with fixed scoping rules, and derivation of file-level
//! import edges. Resolution never guesses across ranks: a call binds to
//! the *nearest* scope that contains any match, and ties inside a rank
//! break by smallest FQN. Unresolved calls (external libraries, `super`,
//! dynamic receivers without a match) are dropped with a warning.
//!
//! Scoping ranks:
//! - unqualified / `this.m(...)`: containing class → other classes in
//!   the same file → classes named by static imports;
//! - `Name.m(...)` where `Name` is a known class (candidates ranked same
//!   file → same package → imported → repo-wide): that class's methods,
//!   falling back to a variable-receiver search when no class matches;
//! - variable or computed receivers: same file → same package plus
//!   imported files → repo-wide.
//!
//! Import edges: one per explicit single-type (or static) import naming a
//! repo file, plus one per resolved cross-file call whose target is in
//! the caller's package or a wildcard-imported package.

use std::collections::{BTreeMap, BTreeSet};

use super::java::{CallSite, FileFacts, ImportDecl, Receiver};
use super::{FileNode, MethodNode, RepoModel};

/// Per-method resolution record, index-aligned with `RepoModel::methods`.
/// The declared name lives in `ClassRec::methods_by_name`.
struct MethodRec {
    arity: usize,
    vararg: bool,
    class_idx: usize,
}

/// Per-class lookup record.
struct ClassRec {
    /// Package-qualified name (`pkg.Outer.Inner`).
    fqn: String,
    /// Final name segment.
    simple: String,
    file_id: usize,
    /// Method indices grouped by declared name.
    methods_by_name: BTreeMap<String, Vec<usize>>,
}

/// Per-file import context.
struct FileCtx {
    package: String,
    /// Class FQNs named by single-type and static imports.
    named_imports: Vec<String>,
    /// Packages named by wildcard imports.
    wildcard_packages: Vec<String>,
    /// `(class fqn, member-or-*)` from static imports.
    static_members: Vec<(String, String)>,
}

pub(crate) fn assemble(repo_root: String, parsed: Vec<FileFacts>) -> (RepoModel, Vec<String>) {
    let mut files = Vec::new();
    let mut methods = Vec::new();
    let mut method_recs: Vec<MethodRec> = Vec::new();
    let mut class_recs: Vec<ClassRec> = Vec::new();
    let mut contexts: Vec<FileCtx> = Vec::new();
    let mut fqn_counts: BTreeMap<String, usize> = BTreeMap::new();
    // Call sites queued as (caller method index, site) in ID order.
    let mut pending: Vec<(usize, CallSite)> = Vec::new();

    for (file_id, ff) in parsed.iter().enumerate() {
        files.push(FileNode {
            file_id,
            path: ff.path.clone(),
            package: ff.package.clone(),
        });
        contexts.push(file_context(ff));

        let class_base = class_recs.len();
        for class in &ff.classes {
            let fqn = if ff.package.is_empty() {
                class.name.clone()
            } else {
                format!("{}.{}", ff.package, class.name)
            };
            let simple = class.name.rsplit('.').next().unwrap_or(&class.name).to_string();
            class_recs.push(ClassRec {
                fqn,
                simple,
                file_id,
                methods_by_name: BTreeMap::new(),
            });
        }

        // Methods take IDs in source order across all classes of the file
        // (nested classes are collected out of order; the byte offset is
        // the ground truth).
        let mut flat: Vec<(usize, usize, usize)> = Vec::new();
        for (ci, class) in ff.classes.iter().enumerate() {
            for (mi, m) in class.methods.iter().enumerate() {
                flat.push((m.start_byte, ci, mi));
            }
        }
        flat.sort_unstable();

        for (_, ci, mi) in flat {
            let class_idx = class_base + ci;
            let m = &ff.classes[ci].methods[mi];
            let base_fqn = format!("{}.{}", class_recs[class_idx].fqn, m.name);
            let n = fqn_counts.entry(base_fqn.clone()).or_insert(0);
            *n += 1;
            let fqn = if *n == 1 { base_fqn } else { format!("{base_fqn}#{n}") };

            let method_idx = methods.len();
            methods.push(MethodNode {
                method_id: method_idx,
                fqn,
                file_id,
                span: m.span,
                source_text: m.source_text.clone(),
            });
            method_recs.push(MethodRec { arity: m.arity, vararg: m.vararg, class_idx });
            class_recs[class_idx]
                .methods_by_name
                .entry(m.name.clone())
                .or_default()
                .push(method_idx);
            for site in &m.calls {
                pending.push((method_idx, site.clone()));
            }
        }
    }

    let resolver = Resolver {
        files: &files,
        methods: &methods,
        method_recs: &method_recs,
        class_recs: &class_recs,
        contexts: &contexts,
        classes_by_simple: {
            let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, c) in class_recs.iter().enumerate() {
                map.entry(c.simple.as_str()).or_default().push(i);
            }
            for list in map.values_mut() {
                list.sort_by(|&a, &b| class_recs[a].fqn.cmp(&class_recs[b].fqn));
            }
            map
        },
        classes_by_fqn: {
            let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, c) in class_recs.iter().enumerate() {
                map.entry(c.fqn.as_str()).or_default().push(i);
            }
            map
        },
    };

    let mut calls: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut resolved_pairs: Vec<(usize, usize)> = Vec::new();
    let mut warnings = Vec::new();
    for (caller, site) in &pending {
        match resolver.resolve(*caller, site) {
            Some(callee) => {
                if callee != *caller {
                    calls.insert((*caller, callee));
                }
                resolved_pairs.push((*caller, callee));
            }
            None => {
                let file = &files[methods[*caller].file_id];
                warnings.push(format!(
                    "{}:{}: unresolved call to {}{}/{}",
                    file.path,
                    site.line,
                    receiver_prefix(&site.receiver),
                    site.name,
                    site.arity
                ));
            }
        }
    }

    // Import edges: explicit single-type/static imports, then used
    // same-package and wildcard-package references.
    let mut imports: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (f1, ctx) in contexts.iter().enumerate() {
        for named in &ctx.named_imports {
            if let Some(indices) = resolver.classes_by_fqn.get(named.as_str()) {
                for &ci in indices {
                    let f2 = class_recs[ci].file_id;
                    if f2 != f1 {
                        imports.insert((f1, f2));
                    }
                }
            }
        }
    }
    for &(caller, callee) in &resolved_pairs {
        let f1 = methods[caller].file_id;
        let f2 = methods[callee].file_id;
        if f1 == f2 {
            continue;
        }
        let ctx = &contexts[f1];
        let target_pkg = &files[f2].package;
        if *target_pkg == ctx.package || ctx.wildcard_packages.iter().any(|p| p == target_pkg) {
            imports.insert((f1, f2));
        }
    }

    let model = RepoModel { repo_root, files, methods, imports, calls };
    (model, warnings)
}

fn receiver_prefix(r: &Receiver) -> String {
    match r {
        Receiver::Unqualified => String::new(),
        Receiver::This => "this.".to_string(),
        Receiver::Super => "super.".to_string(),
        Receiver::Named(n) => format!("{n}."),
        Receiver::Dynamic => "<expr>.".to_string(),
    }
}

fn file_context(ff: &FileFacts) -> FileCtx {
    let mut ctx = FileCtx {
        package: ff.package.clone(),
        named_imports: Vec::new(),
        wildcard_packages: Vec::new(),
        static_members: Vec::new(),
    };
    for decl in &ff.imports {
        match decl {
            ImportDecl::Single(name) => ctx.named_imports.push(name.clone()),
            ImportDecl::Wildcard(pkg) => ctx.wildcard_packages.push(pkg.clone()),
            ImportDecl::StaticMember { class, member } => {
                ctx.named_imports.push(class.clone());
                ctx.static_members.push((class.clone(), member.clone()));
            }
            ImportDecl::StaticWildcard(class) => {
                ctx.named_imports.push(class.clone());
                ctx.static_members.push((class.clone(), "*".to_string()));
            }
        }
    }
    ctx
}

struct Resolver<'a> {
    files: &'a [FileNode],
    methods: &'a [MethodNode],
    method_recs: &'a [MethodRec],
    class_recs: &'a [ClassRec],
    contexts: &'a [FileCtx],
    classes_by_simple: BTreeMap<&'a str, Vec<usize>>,
    classes_by_fqn: BTreeMap<&'a str, Vec<usize>>,
}

impl<'a> Resolver<'a> {
    fn resolve(&self, caller: usize, site: &CallSite) -> Option<usize> {
        let caller_class = self.method_recs[caller].class_idx;
        let file_id = self.class_recs[caller_class].file_id;
        match &site.receiver {
            Receiver::Super => None,
            Receiver::This if site.name == "<init>" => {
                self.find_in_class(caller_class, "<init>", site.arity)
            }
            Receiver::Unqualified | Receiver::This => {
                self.resolve_unqualified(caller_class, file_id, site)
            }
            Receiver::Named(receiver) => {
                if site.name == "<init>" {
                    self.resolve_in_ranked_classes(receiver, file_id, "<init>", site.arity)
                } else {
                    self.resolve_in_ranked_classes(receiver, file_id, &site.name, site.arity)
                        .or_else(|| self.variable_search(file_id, &site.name, site.arity))
                }
            }
            Receiver::Dynamic => self.variable_search(file_id, &site.name, site.arity),
        }
    }

    /// Bare-name call: containing class, then siblings in the file, then
    /// statically imported members.
    fn resolve_unqualified(&self, caller_class: usize, file_id: usize, site: &CallSite) -> Option<usize> {
        if let Some(id) = self.find_in_class(caller_class, &site.name, site.arity) {
            return Some(id);
        }
        let siblings: Vec<usize> = (0..self.class_recs.len())
            .filter(|&ci| ci != caller_class && self.class_recs[ci].file_id == file_id)
            .collect();
        if let Some(id) = self.best_in_classes(&siblings, &site.name, site.arity) {
            return Some(id);
        }
        let ctx = &self.contexts[file_id];
        let mut static_targets = Vec::new();
        for (class_fqn, member) in &ctx.static_members {
            if member == &site.name || member == "*" {
                if let Some(indices) = self.classes_by_fqn.get(class_fqn.as_str()) {
                    static_targets.extend_from_slice(indices);
                }
            }
        }
        self.best_in_classes(&static_targets, &site.name, site.arity)
    }

    /// Resolves `Receiver.name(...)` by treating the receiver as a class
    /// reference; returns `None` when no candidate class has a match.
    fn resolve_in_ranked_classes(
        &self,
        receiver: &str,
        file_id: usize,
        name: &str,
        arity: usize,
    ) -> Option<usize> {
        for ci in self.ranked_class_candidates(receiver, file_id) {
            if let Some(id) = self.find_in_class(ci, name, arity) {
                return Some(id);
            }
        }
        None
    }

    /// Class candidates for a receiver, ordered by scope rank (same file,
    /// same package, imported, repo-wide), deduplicated, FQN-sorted
    /// within each rank.
    fn ranked_class_candidates(&self, receiver: &str, file_id: usize) -> Vec<usize> {
        // A dotted receiver may be a full class FQN (`tiny.A.m1()`).
        if receiver.contains('.') {
            if let Some(exact) = self.classes_by_fqn.get(receiver) {
                return exact.clone();
            }
            let Some((_, last)) = receiver.rsplit_once('.') else {
                return Vec::new();
            };
            return self.ranked_simple_candidates(last, file_id);
        }
        self.ranked_simple_candidates(receiver, file_id)
    }

    fn ranked_simple_candidates(&self, simple: &str, file_id: usize) -> Vec<usize> {
        let Some(all) = self.classes_by_simple.get(simple) else {
            return Vec::new();
        };
        let ctx = &self.contexts[file_id];
        let is_imported = |c: &ClassRec| {
            ctx.named_imports.iter().any(|n| n == &c.fqn)
                || ctx
                    .wildcard_packages
                    .iter()
                    .any(|p| p == &self.files[c.file_id].package)
        };
        let rank = |ci: usize| -> u8 {
            let c = &self.class_recs[ci];
            if c.file_id == file_id {
                0
            } else if self.files[c.file_id].package == ctx.package {
                1
            } else if is_imported(c) {
                2
            } else {
                3
            }
        };
        let mut ranked: Vec<(u8, &str, usize)> = all
            .iter()
            .map(|&ci| (rank(ci), self.class_recs[ci].fqn.as_str(), ci))
            .collect();
        ranked.sort();
        ranked.into_iter().map(|(_, _, ci)| ci).collect()
    }

    /// Variable / computed receivers: nearest scope containing a match.
    fn variable_search(&self, file_id: usize, name: &str, arity: usize) -> Option<usize> {
        let ctx = &self.contexts[file_id];
        let same_file: Vec<usize> = (0..self.class_recs.len())
            .filter(|&ci| self.class_recs[ci].file_id == file_id)
            .collect();
        if let Some(id) = self.best_in_classes(&same_file, name, arity) {
            return Some(id);
        }
        let nearby: Vec<usize> = (0..self.class_recs.len())
            .filter(|&ci| {
                let c = &self.class_recs[ci];
                c.file_id != file_id
                    && (self.files[c.file_id].package == ctx.package
                        || ctx.named_imports.iter().any(|n| n == &c.fqn)
                        || ctx
                            .wildcard_packages
                            .iter()
                            .any(|p| p == &self.files[c.file_id].package))
            })
            .collect();
        if let Some(id) = self.best_in_classes(&nearby, name, arity) {
            return Some(id);
        }
        let everywhere: Vec<usize> = (0..self.class_recs.len()).collect();
        self.best_in_classes(&everywhere, name, arity)
    }

    /// Smallest-FQN match for `name/arity` within one class.
    fn find_in_class(&self, class_idx: usize, name: &str, arity: usize) -> Option<usize> {
        let candidates = self.class_recs[class_idx].methods_by_name.get(name)?;
        candidates
            .iter()
            .copied()
            .filter(|&mi| arity_matches(&self.method_recs[mi], arity))
            .min_by(|&a, &b| self.methods[a].fqn.cmp(&self.methods[b].fqn))
    }

    /// Smallest-FQN match across a set of classes.
    fn best_in_classes(&self, classes: &[usize], name: &str, arity: usize) -> Option<usize> {
        classes
            .iter()
            .filter_map(|&ci| self.find_in_class(ci, name, arity))
            .min_by(|&a, &b| self.methods[a].fqn.cmp(&self.methods[b].fqn))
    }
}

/// Exact arity match, or a varargs tail absorbing the surplus.
fn arity_matches(m: &MethodRec, call_arity: usize) -> bool {
    call_arity == m.arity || (m.vararg && m.arity > 0 && call_arity >= m.arity - 1)
}
