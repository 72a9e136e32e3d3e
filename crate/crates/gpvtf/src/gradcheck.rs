//! Central finite differences for verifying analytic gradients.
//!
//! Kept in the library (not test-only) so integration suites and downstream
//! experiments can check hand-derived backward passes against an oracle that
//! only ever calls the forward path.

/// Central-difference gradient of a scalar function at `x`.
///
/// Perturbs one coordinate at a time by `±h` and evaluates `f` on a copy,
/// so `f` never observes a partially-modified input.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = f(&probe);
        probe[i] = orig - h;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Asserts each analytic entry is within `rel_tol` of the numeric one,
/// relative to the larger magnitude (floored at `1e-8` so near-zero pairs
/// compare absolutely). Returns the worst relative error seen.
pub fn assert_grads_close(analytic: &[f64], numeric: &[f64], rel_tol: f64, what: &str) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "{what}: length mismatch");
    let mut worst = 0.0_f64;
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let denom = a.abs().max(n.abs()).max(1e-8);
        let rel = ((a - n) / denom).abs();
        worst = worst.max(rel);
        assert!(
            rel < rel_tol,
            "{what}[{i}]: analytic {a} vs numeric {n} (rel {rel:.3e})"
        );
    }
    worst
}
