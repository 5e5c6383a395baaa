//! Bracketed scalar minimizers used by the calibration steps.

use std::collections::BTreeMap;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
    /// Minimizer sits on (within tolerance of) a bracket end.
    pub at_bound: bool,
}

/// Golden-section search for the minimum of `f` on `[a, b]`, stopping once
/// the bracket is narrower than `tol`. Both bracket ends are evaluated at
/// the close so a minimum on the boundary is returned exactly.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> SearchResult {
    let (lo0, hi0) = (a, b);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut evals = 2;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        evals += 1;
    }
    let (mut x, mut fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for end in [lo0, hi0] {
        let fe = f(end);
        evals += 1;
        if fe < fx {
            x = end;
            fx = fe;
        }
    }
    SearchResult {
        x,
        fx,
        evals,
        at_bound: (x - lo0).abs() <= tol || (hi0 - x).abs() <= tol,
    }
}

/// Golden-section over the integers `lo..=hi` for a unimodal `f`. Each
/// point is evaluated at most once; `evals` counts distinct points.
pub fn golden_section_int(
    mut f: impl FnMut(usize) -> f64,
    lo: usize,
    hi: usize,
) -> (usize, f64, usize) {
    assert!(lo <= hi);
    let mut cache: BTreeMap<usize, f64> = BTreeMap::new();
    let mut eval =
        |k: usize, cache: &mut BTreeMap<usize, f64>| *cache.entry(k).or_insert_with(|| f(k));
    let (mut a, mut b) = (lo, hi);
    while b - a > 3 {
        let span = (b - a) as f64;
        let m1 = a + (span * (1.0 - INV_PHI)).round() as usize;
        let mut m2 = a + (span * INV_PHI).round() as usize;
        if m2 <= m1 {
            m2 = m1 + 1;
        }
        if eval(m1, &mut cache) <= eval(m2, &mut cache) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let mut best = (a, eval(a, &mut cache));
    for k in a + 1..=b {
        let fk = eval(k, &mut cache);
        if fk < best.1 {
            best = (k, fk);
        }
    }
    (best.0, best.1, cache.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let r = golden_section(|x| (x - 1.3).powi(2), 0.25, 4.0, 1e-6);
        assert!((r.x - 1.3).abs() < 1e-5);
        assert!(!r.at_bound);
        assert!(r.evals < 50);
    }

    #[test]
    fn boundary_minimum_is_exact() {
        let r = golden_section(|x| x, 0.5, 2.0, 1e-3);
        assert_eq!(r.x, 0.5);
        assert!(r.at_bound);
    }

    #[test]
    fn integer_search_matches_scan() {
        for target in 1..=30usize {
            let f = |k: usize| (k as f64 - target as f64).abs();
            let (k, fk, evals) = golden_section_int(f, 1, 30);
            assert_eq!((k, fk), (target, 0.0));
            assert!(evals <= 12, "target {target}: {evals} evals");
        }
        assert_eq!(golden_section_int(|k| k as f64, 3, 3).0, 3);
    }
}
