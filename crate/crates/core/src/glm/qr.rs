//! Householder QR with limited column pivoting.
//!
//! Columns are processed in their given order. A column whose norm below the
//! current diagonal falls under `tolerance` times its original norm is
//! declared aliased and set aside, so among a collinear group the earliest
//! columns (the intercept first) are the ones kept.

/// QR factorisation of a tall matrix given column by column.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    n: usize,
    /// Transformed kept columns; rows `..=k` of the k-th kept column hold R.
    columns: Vec<Vec<f64>>,
    kept: Vec<usize>,
    aliased: Vec<usize>,
    /// Householder vectors (acting on rows `k..n`) and their scale factors.
    reflectors: Vec<(Vec<f64>, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large weights
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

impl PivotedQr {
    pub fn new(columns: Vec<Vec<f64>>, tolerance: f64) -> Self {
        let n = columns.first().map_or(0, Vec::len);
        let original_norms: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
        let mut columns = columns;
        let mut kept = Vec::new();
        let mut aliased = Vec::new();
        let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::new();

        for j in 0..columns.len() {
            // bring column j up to date with the reflections chosen so far
            for (k, (v, beta)) in reflectors.iter().enumerate() {
                let tail = &mut columns[j][k..];
                let s = beta * dot(v, tail);
                for (t, vi) in tail.iter_mut().zip(v) {
                    *t -= s * vi;
                }
            }
            let k = kept.len();
            if k >= n {
                aliased.push(j);
                continue;
            }
            let tail = &columns[j][k..];
            let residual = norm(tail);
            if residual <= tolerance * original_norms[j] || original_norms[j] == 0.0 {
                aliased.push(j);
                continue;
            }
            let alpha = if tail[0] >= 0.0 { -residual } else { residual };
            let mut v = tail.to_vec();
            v[0] -= alpha;
            let vv = dot(&v, &v);
            let beta = if vv > 0.0 { 2.0 / vv } else { 0.0 };
            let col = &mut columns[j];
            col[k] = alpha;
            for x in &mut col[k + 1..] {
                *x = 0.0;
            }
            reflectors.push((v, beta));
            kept.push(j);
        }
        let columns = kept.iter().map(|&j| std::mem::take(&mut columns[j])).collect();
        Self {
            n,
            columns,
            kept,
            aliased,
            reflectors,
        }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Original indices of the kept columns, in order.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Original indices of aliased columns.
    pub fn aliased(&self) -> &[usize] {
        &self.aliased
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    /// Least-squares coefficients for the kept columns.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "right-hand side length");
        let mut qtb = rhs.to_vec();
        for (k, (v, beta)) in self.reflectors.iter().enumerate() {
            let tail = &mut qtb[k..];
            let s = beta * dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
        let p = self.rank();
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = qtb[i];
            for j in i + 1..p {
                s -= self.r(i, j) * x[j];
            }
            x[i] = s / self.r(i, i);
        }
        x
    }

    /// `(RᵀR)⁻¹` over the kept columns, i.e. the inverse of the weighted
    /// cross-product matrix.
    pub fn inverse_gram(&self) -> Vec<Vec<f64>> {
        let p = self.rank();
        // R⁻¹ by back substitution, column by column
        let mut rinv = vec![vec![0.0; p]; p];
        for c in 0..p {
            for i in (0..=c).rev() {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for j in i + 1..=c {
                    s -= self.r(i, j) * rinv[j][c];
                }
                rinv[i][c] = s / self.r(i, i);
            }
        }
        let mut out = vec![vec![0.0; p]; p];
        for a in 0..p {
            for b in a..p {
                let s: f64 = (b..p).map(|k| rinv[a][k] * rinv[b][k]).sum();
                out[a][b] = s;
                out[b][a] = s;
            }
        }
        out
    }
}
