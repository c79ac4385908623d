//! Canonicalize JSON from stdin, one document per line.
//!
//! ```sh
//! echo '{"b":2,"a":1}' | cargo run -p moltrust-core --example canonicalize
//! ```

use std::io::BufRead;

use moltrust_core::canonical::{canonicalize, parse_canonical_text};

fn main() {
    let stdin = std::io::stdin();
    for line in stdin.lock().lines() {
        let line = line.expect("stdin");
        if line.trim().is_empty() {
            continue;
        }
        match parse_canonical_text(&line).and_then(|v| canonicalize(&v)) {
            Ok(bytes) => println!("{}", String::from_utf8(bytes).expect("canonical is UTF-8")),
            Err(e) => println!("!error: {e}"),
        }
    }
}
