//! Writes a seeded synthetic annotation corpus as JSONL to stdout.
//!
//! cargo run -p agree-kit --example synth_corpus -- 1000 7 > corpus.jsonl

use std::io::Write;

fn main() {
    let mut args = std::env::args().skip(1);
    let n = args.next().map_or(1000, |s| s.parse().expect("item count"));
    let seed = args.next().map_or(7, |s| s.parse().expect("seed"));
    let items = agree_kit::pipeline::synth::synthetic_items(n, seed);
    std::io::stdout()
        .write_all(&agree_kit::pipeline::parse::to_jsonl(&items))
        .expect("stdout");
}
