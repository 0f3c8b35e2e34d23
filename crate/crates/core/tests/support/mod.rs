//! Shared oracles for the integration tests.

#![allow(dead_code)]

/// Dense primal simplex for `max c.x` subject to `A x <= b`, `x >= 0`,
/// with `b >= 0` so that the slack basis is feasible. Bland's rule.
pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let m = a.len();
    let n = c.len();
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        assert!(b[i] >= 0.0);
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let eps = 1e-12;
    loop {
        let Some(col) = (0..n + m).find(|&j| t[m][j] < -eps) else {
            break;
        };
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][col] > eps {
                let ratio = t[i][width - 1] / t[i][col];
                let better = ratio < best - eps
                    || (ratio <= best + eps && row.is_some_and(|r: usize| basis[i] < basis[r]));
                if row.is_none() || better {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let row = row.expect("bounded program");
        let p = t[row][col];
        t[row].iter_mut().for_each(|v| *v /= p);
        let pivot = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row && r[col] != 0.0 {
                let f = r[col];
                r.iter_mut().zip(&pivot).for_each(|(v, p)| *v -= f * p);
            }
        }
        basis[row] = col;
    }
    t[m][width - 1]
}

/// Flat distance as a linear program over the values of the test function
/// at every atom, with all pairwise Lipschitz constraints.
pub fn flat_distance_simplex(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> f64 {
    let mut xs: Vec<f64> = mu.iter().chain(nu).map(|a| a.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let n = xs.len();
    let mut s = vec![0.0; n];
    for (sign, atoms) in [(1.0, mu), (-1.0, nu)] {
        for &(x, w) in atoms {
            let i = xs.iter().position(|y| *y == x).unwrap();
            s[i] += sign * w;
        }
    }
    // f = g - 1 with 0 <= g <= 2.
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        a.push(row);
        b.push(2.0);
        for j in 0..n {
            if i != j {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row[j] = -1.0;
                a.push(row);
                b.push((xs[i] - xs[j]).abs());
            }
        }
    }
    let shift: f64 = s.iter().sum();
    let plus = simplex_max(&a, &b, &s) - shift;
    let neg: Vec<f64> = s.iter().map(|v| -v).collect();
    let minus = simplex_max(&a, &b, &neg) + shift;
    plus.max(minus)
}
