// Parse a unified diff, replay it, and find the closest enclosing scope of
// every hunk in the pre-change file.

use svassess::corpus::{apply_hunks, parse_unified_diff};
use svassess::scopes::{extract_ces, parse_scopes};
use svassess::Result;

const PRE: &str = "\
package demo;

public class Account {
    private int balance = 0;

    public void withdraw(int amount) {
        if (amount > 0) {
            balance -= amount;
        }
    }
}
";

const DIFF: &str = "\
--- a/Account.java
+++ b/Account.java
@@ -4,1 +4,1 @@
-    private int balance = 0;
+    private long balance = 0;
@@ -7,3 +7,3 @@
         if (amount > 0) {
-            balance -= amount;
+            balance = Math.max(0, balance - amount);
         }
";

pub fn run() -> Result<()> {
    let files = parse_unified_diff(DIFF)?;
    let file = &files[0];
    let post = apply_hunks(PRE, &file.hunks)?;
    println!("{}: {} hunks, post-change file has {} lines", file.path, file.hunks.len(), post.len());

    let tree = parse_scopes(PRE)?;
    for (i, hunk) in file.hunks.iter().enumerate() {
        let (start, end) = hunk.pre_change_range();
        let ces = extract_ces(&tree, start, end);
        println!(
            "hunk {i}: lines {start}-{end} -> {:?} spanning {}-{} ({} code lines)",
            ces.kind, ces.start_line, ces.end_line, ces.size
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
