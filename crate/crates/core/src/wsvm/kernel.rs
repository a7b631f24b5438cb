use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Rbf,
    Linear,
}

/// `K(u, v) = exp(-gamma ||u - v||^2)` or `u . v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            gamma,
        }
    }

    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            gamma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Rbf && !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rbf gamma must be finite and positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => (-self.gamma * squared_distance(u, v)).exp(),
            KernelKind::Linear => dot(u, v),
        }
    }
}

fn check_dims<R: AsRef<[f64]>>(rows: &[R], dim: usize) -> Result<()> {
    for r in rows {
        if r.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// Row-major `|a| x |b|` matrix of kernel values.
pub fn kernel_matrix<R: AsRef<[f64]> + Sync>(a: &[R], b: &[R], k: &KernelSpec) -> Result<Vec<f64>> {
    k.validate()?;
    if let Some(first) = a.first().or(b.first()) {
        let dim = first.as_ref().len();
        check_dims(a, dim)?;
        check_dims(b, dim)?;
    }
    Ok(a.par_iter()
        .flat_map_iter(|u| b.iter().map(move |v| k.eval(u.as_ref(), v.as_ref())))
        .collect())
}

/// Symmetric training Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn new<R: AsRef<[f64]> + Sync>(rows: &[R], k: &KernelSpec) -> Result<Self> {
        let data = kernel_matrix(rows, rows, k)?;
        Ok(Self { n: rows.len(), data })
    }

    /// Builds an RBF Gram from precomputed squared distances.
    pub fn from_squared_distances(d2: &SquaredDistances, gamma: f64) -> Self {
        Self {
            n: d2.n,
            data: d2.data.iter().map(|d| (-gamma * d).exp()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Principal submatrix on `idx`.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Self {
            n: idx.len(),
            data,
        }
    }
}

/// Pairwise squared Euclidean distances, shared across an RBF gamma grid.
#[derive(Debug, Clone)]
pub struct SquaredDistances {
    n: usize,
    data: Vec<f64>,
}

impl SquaredDistances {
    pub fn new<R: AsRef<[f64]> + Sync>(rows: &[R]) -> Self {
        let data = rows
            .par_iter()
            .flat_map_iter(|u| rows.iter().map(move |v| squared_distance(u.as_ref(), v.as_ref())))
            .collect();
        Self {
            n: rows.len(),
            data,
        }
    }

    /// Median over distinct pairs `i < j`; 0 when fewer than two rows.
    pub fn median(&self) -> f64 {
        let mut off: Vec<f64> = (0..self.n)
            .flat_map(|i| ((i + 1)..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.data[i * self.n + j])
            .collect();
        if off.is_empty() {
            return 0.0;
        }
        let mid = off.len() / 2;
        off.select_nth_unstable_by(mid, f64::total_cmp);
        let upper = off[mid];
        if off.len() % 2 == 1 {
            upper
        } else {
            let lower = off[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lower + upper)
        }
    }
}

/// `2^e / median` for `e` in `-8..=2`; falls back to a unit median.
pub fn default_gamma_grid(median_sq_dist: f64) -> Vec<f64> {
    let scale = if median_sq_dist > 0.0 && median_sq_dist.is_finite() {
        1.0 / median_sq_dist
    } else {
        1.0
    };
    (-8..=2).map(|e| 2f64.powi(e) * scale).collect()
}

/// `2^e` for `e` in `-10..=4`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-10..=4).map(|e| 2f64.powi(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rbf_examples() {
        let k = KernelSpec::rbf(1.0);
        assert_eq!(k.eval(&[0.3, 0.4], &[0.3, 0.4]), 1.0);
        let d = 2f64.ln().sqrt();
        assert!((k.eval(&[0.0], &[d]) - 0.5).abs() < 1e-15);
        assert!(KernelSpec::rbf(0.0).validate().is_err());
        assert!(kernel_matrix(&[vec![0.0]], &[vec![0.0, 1.0]], &k).is_err());
    }

    #[test]
    fn gram_is_psd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| rng.random::<f64>()).collect())
            .collect();
        for k in [KernelSpec::rbf(0.7), KernelSpec::linear()] {
            let g = Gram::new(&rows, &k).unwrap();
            let m = nalgebra::DMatrix::from_row_slice(20, 20, &g.data);
            assert_eq!(m, m.transpose());
            let min = m.symmetric_eigenvalues().min();
            assert!(min >= -1e-8, "{min}");
        }
    }

    #[test]
    fn distances_and_median() {
        let rows = vec![vec![0.0], vec![1.0], vec![3.0]];
        let d2 = SquaredDistances::new(&rows);
        assert_eq!(d2.median(), 4.0);
        let g = Gram::from_squared_distances(&d2, 0.5);
        let direct = Gram::new(&rows, &KernelSpec::rbf(0.5)).unwrap();
        assert_eq!(g, direct);
        assert_eq!(g.subset(&[2, 0]).row(0), &[1.0, (-4.5f64).exp()]);
        let four = vec![vec![0.0], vec![1.0], vec![3.0], vec![7.0]];
        // pairs: 1 9 49 4 36 16 -> sorted 1 4 9 16 36 49
        assert_eq!(SquaredDistances::new(&four).median(), 12.5);
    }

    #[test]
    fn default_grids() {
        let g = default_gamma_grid(4.0);
        assert_eq!(g.len(), 11);
        assert_eq!(g[8], 0.25);
        let l = default_lambda_grid();
        assert_eq!(l.len(), 15);
        assert_eq!(l[0], 2f64.powi(-10));
        assert_eq!(default_gamma_grid(0.0)[8], 1.0);
    }
}
