//! Java language profile: tree-sitter extraction of per-file facts.
//!
//! This layer is purely syntactic. It records packages, import
//! declarations, type declarations, method declarations, and raw call
//! sites (receiver text, method name, argument count). All cross-file
//! reasoning — ID assignment, call resolution, import edges — happens in
//! the resolver, which consumes these facts.

use tree_sitter::{Node, Parser};

/// Syntactic facts for one parsed source file.
#[derive(Debug, Clone)]
pub(crate) struct FileFacts {
    pub path: String,
    pub package: String,
    pub imports: Vec<ImportDecl>,
    pub classes: Vec<ClassFacts>,
}

/// One `import` statement, normalized.
#[derive(Debug, Clone)]
pub(crate) enum ImportDecl {
    /// `import a.b.C;` — names a single type.
    Single(String),
    /// `import a.b.*;` — names a package.
    Wildcard(String),
    /// `import static a.b.C.m;` — class plus member name.
    StaticMember { class: String, member: String },
    /// `import static a.b.C.*;` — class, all static members.
    StaticWildcard(String),
}

/// One class / interface / enum / record declaration.
#[derive(Debug, Clone)]
pub(crate) struct ClassFacts {
    /// Name qualified within the file (`Outer.Inner`), no package prefix.
    pub name: String,
    pub methods: Vec<MethodFacts>,
}

/// One method or constructor declaration.
#[derive(Debug, Clone)]
pub(crate) struct MethodFacts {
    /// Declared name; constructors are recorded as `<init>`.
    pub name: String,
    pub arity: usize,
    pub vararg: bool,
    /// 1-based (start_line, end_line).
    pub span: (usize, usize),
    /// Byte offset of the declaration, for source-order ID assignment.
    pub start_byte: usize,
    /// Full declaration text, or empty when the declaration has no body.
    pub source_text: String,
    pub calls: Vec<CallSite>,
}

/// One call expression found inside a method body.
#[derive(Debug, Clone)]
pub(crate) struct CallSite {
    pub receiver: Receiver,
    /// Invoked name; `<init>` for `new T(...)` and `this(...)`.
    pub name: String,
    pub arity: usize,
    /// 1-based line of the call, for warnings.
    pub line: usize,
}

/// Syntactic receiver shape of a call.
#[derive(Debug, Clone)]
pub(crate) enum Receiver {
    /// Bare `m(...)`.
    Unqualified,
    /// `this.m(...)` or `this(...)`.
    This,
    /// `super.m(...)` — never resolvable without inheritance tracking.
    Super,
    /// `expr.m(...)` where expr is an identifier or dotted name.
    Named(String),
    /// Receiver is a computed expression (chained call, cast, …).
    Dynamic,
}

const TYPE_DECL_KINDS: [&str; 4] = [
    "class_declaration",
    "interface_declaration",
    "enum_declaration",
    "record_declaration",
];

/// Parses one Java file into facts. `Err` carries the warning text; the
/// file is then dropped from the model.
pub(crate) fn parse_java_file(rel_path: &str, source: &str) -> Result<FileFacts, String> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::language())
        .map_err(|e| format!("{rel_path}: grammar unavailable: {e}"))?;
    let tree = parser
        .parse(source, None)
        .ok_or_else(|| format!("{rel_path}: parser produced no tree"))?;
    let root = tree.root_node();
    let bytes = source.as_bytes();

    let mut facts = FileFacts {
        path: rel_path.to_string(),
        package: String::new(),
        imports: Vec::new(),
        classes: Vec::new(),
    };

    let mut cursor = root.walk();
    for child in root.children(&mut cursor) {
        match child.kind() {
            "package_declaration" => {
                if let Some(name) = dotted_name(child, bytes) {
                    facts.package = name;
                }
            }
            "import_declaration" => {
                if let Some(decl) = import_decl(child, bytes) {
                    facts.imports.push(decl);
                }
            }
            _ => {}
        }
    }

    let mut stack = Vec::new();
    collect_types(root, bytes, &mut stack, &mut facts.classes);

    if root.has_error() && facts.classes.is_empty() {
        return Err(format!("{rel_path}: syntax errors, no declarations recovered"));
    }
    Ok(facts)
}

/// Text of a node.
fn text(node: Node, bytes: &[u8]) -> String {
    node.utf8_text(bytes).unwrap_or_default().to_string()
}

/// First `identifier` / `scoped_identifier` child, as dotted text.
fn dotted_name(node: Node, bytes: &[u8]) -> Option<String> {
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if matches!(child.kind(), "identifier" | "scoped_identifier") {
            return Some(text(child, bytes));
        }
    }
    None
}

/// Normalizes one `import_declaration` node.
fn import_decl(node: Node, bytes: &[u8]) -> Option<ImportDecl> {
    let mut is_static = false;
    let mut is_wildcard = false;
    let mut name = None;
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        match child.kind() {
            "static" => is_static = true,
            "asterisk" => is_wildcard = true,
            "identifier" | "scoped_identifier" => name = Some(text(child, bytes)),
            _ => {}
        }
    }
    let name = name?;
    Some(match (is_static, is_wildcard) {
        (false, false) => ImportDecl::Single(name),
        (false, true) => ImportDecl::Wildcard(name),
        (true, true) => ImportDecl::StaticWildcard(name),
        (true, false) => {
            // The final segment is the member; the rest names the class.
            match name.rsplit_once('.') {
                Some((class, member)) => ImportDecl::StaticMember {
                    class: class.to_string(),
                    member: member.to_string(),
                },
                None => return None,
            }
        }
    })
}

/// Recursively collects type declarations, maintaining the nesting stack.
fn collect_types(node: Node, bytes: &[u8], stack: &mut Vec<String>, out: &mut Vec<ClassFacts>) {
    if TYPE_DECL_KINDS.contains(&node.kind()) {
        let Some(name_node) = node.child_by_field_name("name") else {
            return;
        };
        stack.push(text(name_node, bytes));
        let mut class = ClassFacts { name: stack.join("."), methods: Vec::new() };
        if let Some(body) = node.child_by_field_name("body") {
            collect_members(body, bytes, stack, &mut class, out);
        }
        out.push(class);
        stack.pop();
        return;
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        collect_types(child, bytes, stack, out);
    }
}

/// Walks a type body, collecting its methods and any nested types.
fn collect_members(
    node: Node,
    bytes: &[u8],
    stack: &mut Vec<String>,
    class: &mut ClassFacts,
    out: &mut Vec<ClassFacts>,
) {
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        match child.kind() {
            "method_declaration" => {
                class.methods.push(method_facts(child, bytes, false));
                if let Some(body) = child.child_by_field_name("body") {
                    collect_types(body, bytes, stack, out);
                }
            }
            "constructor_declaration" => {
                class.methods.push(method_facts(child, bytes, true));
                if let Some(body) = child.child_by_field_name("body") {
                    collect_types(body, bytes, stack, out);
                }
            }
            // Enum constants live before a nested declarations block.
            "enum_body_declarations" => {
                collect_members(child, bytes, stack, class, out);
            }
            k if TYPE_DECL_KINDS.contains(&k) => {
                collect_types(child, bytes, stack, out);
            }
            _ => {}
        }
    }
}

/// Extracts facts for one method or constructor declaration.
fn method_facts(node: Node, bytes: &[u8], ctor: bool) -> MethodFacts {
    let name = if ctor {
        "<init>".to_string()
    } else {
        node.child_by_field_name("name")
            .map(|n| text(n, bytes))
            .unwrap_or_default()
    };

    let mut arity = 0;
    let mut vararg = false;
    if let Some(params) = node.child_by_field_name("parameters") {
        let mut cursor = params.walk();
        for p in params.children(&mut cursor) {
            match p.kind() {
                "formal_parameter" => arity += 1,
                "spread_parameter" => {
                    arity += 1;
                    vararg = true;
                }
                _ => {}
            }
        }
    }

    let mut calls = Vec::new();
    let source_text = match node.child_by_field_name("body") {
        Some(body) => {
            collect_calls(body, bytes, &mut calls);
            text(node, bytes)
        }
        // Bodiless declarations (interface / abstract) carry no source.
        None => String::new(),
    };

    MethodFacts {
        name,
        arity,
        vararg,
        span: (node.start_position().row + 1, node.end_position().row + 1),
        start_byte: node.start_byte(),
        source_text,
        calls,
    }
}

/// Collects call sites inside a body, stopping at nested type
/// declarations (their methods own their calls) and at anonymous class
/// bodies (whose methods are not modeled).
fn collect_calls(node: Node, bytes: &[u8], out: &mut Vec<CallSite>) {
    let kind = node.kind();
    if TYPE_DECL_KINDS.contains(&kind) {
        return;
    }
    match kind {
        "method_invocation" => {
            if let Some(site) = invocation_site(node, bytes) {
                out.push(site);
            }
        }
        "object_creation_expression" => {
            if let Some(site) = creation_site(node, bytes) {
                out.push(site);
            }
        }
        "explicit_constructor_invocation" => {
            if let Some(site) = explicit_ctor_site(node, bytes) {
                out.push(site);
            }
        }
        _ => {}
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if kind == "object_creation_expression" && child.kind() == "class_body" {
            continue;
        }
        collect_calls(child, bytes, out);
    }
}

fn argument_count(node: Node) -> usize {
    node.child_by_field_name("arguments")
        .map(|args| args.named_child_count())
        .unwrap_or(0)
}

fn invocation_site(node: Node, bytes: &[u8]) -> Option<CallSite> {
    let name = text(node.child_by_field_name("name")?, bytes);
    let receiver = match node.child_by_field_name("object") {
        None => Receiver::Unqualified,
        Some(obj) => match obj.kind() {
            "this" => Receiver::This,
            "super" => Receiver::Super,
            "identifier" | "field_access" => Receiver::Named(text(obj, bytes)),
            _ => Receiver::Dynamic,
        },
    };
    Some(CallSite {
        receiver,
        name,
        arity: argument_count(node),
        line: node.start_position().row + 1,
    })
}

fn creation_site(node: Node, bytes: &[u8]) -> Option<CallSite> {
    let type_node = node.child_by_field_name("type")?;
    let type_name = match type_node.kind() {
        "type_identifier" | "scoped_type_identifier" => text(type_node, bytes),
        "generic_type" => {
            let mut cursor = type_node.walk();
            let base = type_node
                .children(&mut cursor)
                .find(|c| matches!(c.kind(), "type_identifier" | "scoped_type_identifier"));
            base.map(|c| text(c, bytes))?
        }
        _ => return None,
    };
    Some(CallSite {
        receiver: Receiver::Named(type_name),
        name: "<init>".to_string(),
        arity: argument_count(node),
        line: node.start_position().row + 1,
    })
}

fn explicit_ctor_site(node: Node, _bytes: &[u8]) -> Option<CallSite> {
    let ctor = node.child_by_field_name("constructor")?;
    // `super(...)` targets an untracked superclass; only `this(...)`
    // resolves within the model.
    if ctor.kind() != "this" {
        return None;
    }
    Some(CallSite {
        receiver: Receiver::This,
        name: "<init>".to_string(),
        arity: argument_count(node),
        line: node.start_position().row + 1,
    })
}
