//! Plain-text serialization of a canonical SDP for offline inspection.
//!
//! Layout: a header line `sdp <n_vars> <n_blocks>`, the objective as
//! `c <k> <value>` lines (nonzeros only), then per block a line
//! `block <index> <dim> <name>` followed by `F <var|-1> <i> <j> <value>`
//! upper-triangle triplets, `-1` marking the constant term.

use std::fmt::Write;

use super::CanonicalSdp;

pub fn to_text(sdp: &CanonicalSdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "sdp {} {}", sdp.n_vars, sdp.blocks.len());
    for (k, c) in sdp.c.iter().enumerate().filter(|(_, c)| **c != 0.0) {
        let _ = writeln!(out, "c {k} {c:.17e}");
    }
    for (bi, block) in sdp.blocks.iter().enumerate() {
        let _ = writeln!(out, "block {bi} {} {}", block.dim, block.name.replace(char::is_whitespace, "_"));
        let mats = std::iter::once((-1i64, &block.constant)).chain(block.coeffs.iter().map(|(k, m)| (*k as i64, m)));
        for (k, m) in mats {
            for j in 0..block.dim {
                for i in 0..=j {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        let _ = writeln!(out, "F {k} {i} {j} {v:.17e}");
                    }
                }
            }
        }
    }
    out
}
