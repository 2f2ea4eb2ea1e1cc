// The context line sets of a vulnerable function and the inputs built
// from them.

use svassess::pipeline::function_tokens;
use svassess::scopes::{context_lines, defuse_slice, ContextConfig, ContextKind, InputMode};
use svassess::synth::synthetic_functions;
use svassess::Result;

pub fn run() -> Result<()> {
    let record = &synthetic_functions(1, 5).records[0];
    for (i, line) in record.lines.iter().enumerate() {
        let mark = if record.vulnerable_line_indices.contains(&i) { '*' } else { ' ' };
        println!("{mark}{i:>2} {line}");
    }
    let config = ContextConfig::default();
    for kind in [ContextKind::Slice, ContextKind::Surrounding, ContextKind::Function] {
        println!("{kind:?} context: {:?}", context_lines(record, kind, &config));
    }
    let (backward, forward) = defuse_slice(record);
    println!("slice backward {backward:?}, forward {forward:?}");
    for mode in ["vuln_only", "nonvuln_all", "vuln+surrounding", "vuln+slice:double"] {
        let tokens = function_tokens(record, InputMode::parse(mode, 1)?);
        println!("{mode:<18} {} tokens", tokens.len());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
