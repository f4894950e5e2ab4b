//! Keyword extraction used by the offline judges and the stub
//! provider's judge replies.
//!
//! Texts are split into lowercase alphanumeric tokens (camelCase and
//! digit boundaries also split, so `validateOrder` yields `validate`
//! and `order`). Operations are the tokens found in a fixed verb
//! lexicon; entities are the remaining tokens minus a stop list.
//! Everything is deterministic and ordered.

use std::collections::BTreeSet;

/// Verbs recognized as operations.
const VERB_LEXICON: &[&str] = &[
    "add", "aggregate", "analyze", "apply", "assign", "build", "calculate", "cancel", "check",
    "cluster", "collect", "compare", "compute", "configure", "convert", "create", "delete",
    "derive", "detect", "display", "edit", "email", "embed", "evaluate", "export", "extract",
    "fetch", "filter", "find", "generate", "get", "handle", "import", "link", "list", "load",
    "log", "manage", "merge", "notify", "parse", "print", "process", "query", "read", "receive",
    "record", "register", "remove", "render", "report", "request", "resolve", "retrieve", "run",
    "save", "schedule", "search", "select", "send", "set", "show", "sort", "store", "submit",
    "summarize", "sync", "track", "transform", "update", "upload", "validate", "verify", "view",
    "write",
];

/// Function words ignored entirely.
const STOP_LIST: &[&str] = &[
    "a", "about", "after", "all", "an", "and", "any", "are", "as", "at", "be", "been", "before",
    "but", "by", "can", "each", "etc", "for", "from", "has", "have", "if", "in", "into", "is",
    "it", "its", "may", "must", "new", "no", "not", "of", "on", "only", "or", "other", "over",
    "per", "shall", "should", "so", "such", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "those", "to", "under", "up", "via", "was", "when", "where",
    "which", "while", "will", "with", "within", "without",
];

/// Splits text into lowercase tokens, breaking on non-alphanumerics
/// and on camelCase / letter-digit boundaries.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for ch in text.chars() {
        if ch.is_ascii_alphanumeric() {
            let boundary = match prev {
                Some(p) => {
                    (p.is_ascii_lowercase() && ch.is_ascii_uppercase())
                        || (p.is_ascii_alphabetic() != ch.is_ascii_alphabetic())
                }
                None => false,
            };
            if boundary && !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            current.push(ch.to_ascii_lowercase());
            prev = Some(ch);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            prev = None;
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_verb(token: &str) -> bool {
    VERB_LEXICON.binary_search(&token).is_ok()
        || token
            .strip_suffix('s')
            .map(|stem| VERB_LEXICON.binary_search(&stem).is_ok())
            .unwrap_or(false)
}

fn verb_stem(token: &str) -> String {
    match token.strip_suffix('s') {
        Some(stem) if VERB_LEXICON.binary_search(&stem).is_ok() => stem.to_string(),
        _ => token.to_string(),
    }
}

/// Tokens matching the verb lexicon (third-person `-s` forms are
/// stemmed onto their base verb).
pub fn extract_operations(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().filter(|t| is_verb(t)).map(|t| verb_stem(&t)).collect()
}

/// Non-verb, non-stop-word tokens of length ≥ 2 that contain a letter.
pub fn extract_entities(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| {
            t.len() >= 2
                && t.chars().any(|c| c.is_ascii_alphabetic())
                && !is_verb(t)
                && STOP_LIST.binary_search(&t.as_str()).is_err()
        })
        .collect()
}

/// Renders a set as a stable comma-separated list.
pub fn format_set(set: &BTreeSet<String>) -> String {
    set.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
}
