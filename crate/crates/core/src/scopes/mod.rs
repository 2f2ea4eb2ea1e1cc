//! Scope parsing of Java-like code, closest enclosing scopes of commit
//! hunks, and the line contexts around vulnerable statements.

mod commit;
mod context;
mod tree;

pub use commit::{ces_tokens, commit_inputs, CommitTokens};
pub use context::{
    build_input, context_lines, defuse_slice, function_context, line_vars, surrounding_context,
    vulnerable_identifiers, BuiltInput, ContextConfig, ContextKind, InputMode, LineVars,
};
pub use tree::{extract_ces, parse_scopes, ScopeKind, ScopeNode, ScopeTree};
