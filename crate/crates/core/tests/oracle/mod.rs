//! Reference implementations used by the integration tests. None of them
//! touch the library's numerical code paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

/// Unevaluated sum `hi + lo` with roughly 106 bits of mantissa.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from(q3))
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 {
            self.neg()
        } else {
            self
        }
    }
}

/// Solve `A x = B` (B has several right-hand sides) by Gaussian elimination
/// with partial pivoting in double-double.
pub fn dd_solve(mut a: Vec<Vec<Dd>>, mut b: Vec<Vec<Dd>>) -> Vec<Vec<Dd>> {
    let k = a.len();
    let m = b[0].len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().hi.partial_cmp(&a[j][col].abs().hi).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        assert!(d.hi != 0.0, "singular system in oracle");
        for row in col + 1..k {
            let f = a[row][col].div(d);
            if f.hi == 0.0 {
                continue;
            }
            for c in col..k {
                a[row][c] = a[row][c].sub(f.mul(a[col][c]));
            }
            for c in 0..m {
                b[row][c] = b[row][c].sub(f.mul(b[col][c]));
            }
        }
    }
    let mut x = vec![vec![Dd::ZERO; m]; k];
    for row in (0..k).rev() {
        for c in 0..m {
            let mut s = b[row][c];
            for j in row + 1..k {
                s = s.sub(a[row][j].mul(x[j][c]));
            }
            x[row][c] = s.div(a[row][row]);
        }
    }
    x
}

/// OLS coefficients from the normal equations `X'X b = X'y`, accumulated
/// and solved in double-double. `rows` holds the full design rows.
pub fn ols_normal_equations(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let mut xtx = vec![vec![Dd::ZERO; k]; k];
    let mut xty = vec![vec![Dd::ZERO; 1]; k];
    for (r, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            let xi = Dd::from(r[i]);
            xty[i][0] = xty[i][0].add(xi.mul(Dd::from(yi)));
            for j in 0..k {
                xtx[i][j] = xtx[i][j].add(xi.mul(Dd::from(r[j])));
            }
        }
    }
    dd_solve(xtx, xty).into_iter().map(|v| v[0].to_f64()).collect()
}

/// Least squares with one dummy per firm and no common intercept, solved in
/// double-double, plus the firm-clustered sandwich with the small-sample
/// factor `G/(G-1) * (n-1)/(n-K)`, `K = k + G`.
pub struct LsdvFit {
    pub beta: Vec<f64>,
    pub firm_effects: Vec<f64>,
    pub cluster_se: Vec<f64>,
}

pub fn lsdv_cluster(x: &[Vec<f64>], y: &[f64], firm: &[usize], n_firms: usize) -> LsdvFit {
    let n = y.len();
    let k = x[0].len();
    let kk = k + n_firms;
    // full design row i is [x_i, e_{firm_i}]; dummy products are sparse
    let mut xtx = vec![vec![Dd::ZERO; kk]; kk];
    let mut xty = vec![vec![Dd::ZERO; 1]; kk];
    for i in 0..n {
        let g = k + firm[i];
        let yi = Dd::from(y[i]);
        for a in 0..k {
            let xa = Dd::from(x[i][a]);
            for b in 0..k {
                xtx[a][b] = xtx[a][b].add(xa.mul(Dd::from(x[i][b])));
            }
            xtx[a][g] = xtx[a][g].add(xa);
            xtx[g][a] = xtx[g][a].add(xa);
            xty[a][0] = xty[a][0].add(xa.mul(yi));
        }
        xtx[g][g] = xtx[g][g].add(Dd::from(1.0));
        xty[g][0] = xty[g][0].add(yi);
    }
    let mut rhs = xty.clone();
    for (j, row) in rhs.iter_mut().enumerate() {
        row.extend((0..kk).map(|c| Dd::from(if c == j { 1.0 } else { 0.0 })));
    }
    let sol = dd_solve(xtx, rhs);
    let coef: Vec<Dd> = sol.iter().map(|r| r[0]).collect();
    let inv: Vec<Vec<Dd>> = sol.iter().map(|r| r[1..].to_vec()).collect();

    let resid: Vec<Dd> = (0..n)
        .map(|i| {
            let mut fit = coef[k + firm[i]];
            for a in 0..k {
                fit = fit.add(coef[a].mul(Dd::from(x[i][a])));
            }
            Dd::from(y[i]).sub(fit)
        })
        .collect();

    let mut scores = vec![vec![Dd::ZERO; kk]; n_firms];
    for i in 0..n {
        let s = &mut scores[firm[i]];
        for a in 0..k {
            s[a] = s[a].add(Dd::from(x[i][a]).mul(resid[i]));
        }
        s[k + firm[i]] = s[k + firm[i]].add(resid[i]);
    }
    // only the slope block of bread * meat * bread is needed
    let mut cov_diag = vec![Dd::ZERO; k];
    for (a, slot) in cov_diag.iter_mut().enumerate() {
        for s in &scores {
            let mut u = Dd::ZERO;
            for (c, sc) in s.iter().enumerate() {
                u = u.add(inv[a][c].mul(*sc));
            }
            *slot = slot.add(u.mul(u));
        }
    }
    let g = n_firms as f64;
    let scale = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - kk as f64);
    LsdvFit {
        beta: coef[..k].iter().map(|c| c.to_f64()).collect(),
        firm_effects: coef[k..].iter().map(|c| c.to_f64()).collect(),
        cluster_se: cov_diag.iter().map(|v| (v.to_f64() * scale).sqrt()).collect(),
    }
}

/// Maximum number of pairwise disjoint half-open intervals, by the
/// earliest-end greedy rule.
pub fn max_disjoint(mut intervals: Vec<(usize, usize)>) -> u64 {
    intervals.sort_by_key(|&(s, e)| (e, s));
    let mut count = 0;
    let mut free_from = 0;
    for (s, e) in intervals {
        if s >= free_from {
            count += 1;
            free_from = e;
        }
    }
    count
}

/// Does `word` match `pattern`, where a trailing `*` matches any suffix?
pub fn glob_word(pattern: &str, word: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(stem) => word.starts_with(stem),
        None => word == pattern,
    }
}

/// Every `(start, end)` span where a whitespace-separated phrase pattern
/// matches the token list, found by a quadratic scan.
pub fn phrase_spans(patterns: &[&str], tokens: &[&str]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    for p in patterns {
        let words: Vec<&str> = p.split_whitespace().collect();
        for start in 0..tokens.len() {
            if start + words.len() > tokens.len() {
                break;
            }
            if words.iter().enumerate().all(|(j, w)| glob_word(w, tokens[start + j])) {
                spans.push((start, start + words.len()));
            }
        }
    }
    spans
}

/// Exact rational `num/den` with nonnegative integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: u128,
    pub den: u128,
}

impl Frac {
    /// Decimal expansion to 30 places after the point, parsed back
    /// as the nearest f64.
    pub fn to_f64(self) -> f64 {
        let int = self.num / self.den;
        let mut rem = self.num % self.den;
        let mut s = format!("{int}.");
        for _ in 0..30 {
            rem *= 10;
            s.push(char::from(b'0' + (rem / self.den) as u8));
            rem %= self.den;
        }
        s.parse().unwrap()
    }
}

pub fn percent(count: u64, total: u64) -> Frac {
    Frac {
        num: 100 * count as u128,
        den: total as u128,
    }
}

/// Group rows by key with a plain map, for join and aggregation checks.
pub fn group_by<K: Ord + Clone, V: Clone>(items: &[(K, V)]) -> BTreeMap<K, Vec<V>> {
    let mut out: BTreeMap<K, Vec<V>> = BTreeMap::new();
    for (k, v) in items {
        out.entry(k.clone()).or_default().push(v.clone());
    }
    out
}
