//! Optimal assignment (Hungarian algorithm with potentials).

/// Maximum-weight perfect matching on a square matrix.
///
/// Returns `col[i]`, the column assigned to row `i`. Runs in `O(n^3)`.
pub fn max_weight_assignment(w: &[Vec<f64>]) -> Vec<usize> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(w.iter().all(|r| r.len() == n), "weight matrix must be square");
    let big = w.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    // minimise cost = big - weight, 1-based arrays with a virtual row/column 0
    let cost = |i: usize, j: usize| big - w[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            col[p[j] - 1] = j - 1;
        }
    }
    col
}

/// Pads a rectangular matrix with zeros to a square one.
pub fn pad_square(w: &[Vec<f64>], cols: usize) -> Vec<Vec<f64>> {
    let n = w.len().max(cols);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| w.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0))
                .collect()
        })
        .collect()
}
