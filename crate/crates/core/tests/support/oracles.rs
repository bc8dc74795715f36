//! Slow, obviously-correct reference implementations used by the test suites.

#![allow(dead_code)]

use num_complex::Complex64;
use qnlp_core::pregroup::SimpleType;

/// Every planar reduction of `ts` to `target`, found by exhaustive search.
///
/// Each reduction is the sorted list of cups. A simple either survives into
/// the residual (only outside every cup) or is cupped with a later simple it
/// contracts with, in which case everything strictly between them must
/// reduce to nothing.
pub fn planar_reductions(ts: &[SimpleType], target: &[SimpleType]) -> Vec<Vec<(usize, usize)>> {
    let mut out = top(ts, target, 0, 0);
    for r in &mut out {
        r.sort_unstable();
    }
    out.sort();
    out.dedup();
    out
}

fn top(ts: &[SimpleType], target: &[SimpleType], i: usize, t: usize) -> Vec<Vec<(usize, usize)>> {
    if i == ts.len() {
        return if t == target.len() { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    if t < target.len() && ts[i] == target[t] {
        out.extend(top(ts, target, i + 1, t + 1));
    }
    for j in i + 1..ts.len() {
        if !ts[i].contracts_with(ts[j]) {
            continue;
        }
        for inner in empty(ts, i + 1, j) {
            for rest in top(ts, target, j + 1, t) {
                let mut r = vec![(i, j)];
                r.extend(inner.iter().copied());
                r.extend(rest);
                out.push(r);
            }
        }
    }
    out
}

/// All ways `ts[lo..hi]` reduces to the empty type.
fn empty(ts: &[SimpleType], lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
    if lo == hi {
        return vec![vec![]];
    }
    if (hi - lo) % 2 == 1 {
        return vec![];
    }
    let mut out = Vec::new();
    for j in (lo + 1..hi).step_by(2) {
        if !ts[lo].contracts_with(ts[j]) {
            continue;
        }
        for inner in empty(ts, lo + 1, j) {
            for rest in empty(ts, j + 1, hi) {
                let mut r = vec![(lo, j)];
                r.extend(inner.iter().copied());
                r.extend(rest);
                out.push(r);
            }
        }
    }
    out
}

/// `⟨Φ⁺|ψ⟩` for a two-qubit state, with `Φ⁺ = (|00⟩ + |11⟩)/√2`.
pub fn bell_overlap(psi: &[Complex64; 4]) -> Complex64 {
    (psi[0] + psi[3]) / 2f64.sqrt()
}

/// Relative error with a floor on the denominator, so that entries that
/// are zero up to rounding do not dominate.
pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-3)
}
