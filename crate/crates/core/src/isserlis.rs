//! Moments of products of centred jointly Gaussian variables as sums over
//! perfect matchings.

use alloc::vec::Vec;

use crate::error::{domain, Error, Result};

/// Largest supported number of factors.
pub const MAX_DIM: usize = 12;

/// A partition of `{0, .., 2n-1}` into unordered pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairPartition {
    pub pairs: Vec<(usize, usize)>,
}

/// All perfect matchings of `dim` points, `(dim - 1)!!` of them.
pub fn perfect_matchings(dim: usize) -> Result<Vec<PairPartition>> {
    if dim % 2 == 1 {
        return Err(Error::OddDimension(dim));
    }
    let mut out = Vec::new();
    let mut used = alloc::vec![false; dim];
    let mut current = Vec::with_capacity(dim / 2);
    collect(&mut used, &mut current, &mut out);
    Ok(out)
}

fn collect(used: &mut [bool], current: &mut Vec<(usize, usize)>, out: &mut Vec<PairPartition>) {
    let Some(i) = used.iter().position(|u| !u) else {
        out.push(PairPartition { pairs: current.clone() });
        return;
    };
    used[i] = true;
    for j in i + 1..used.len() {
        if !used[j] {
            used[j] = true;
            current.push((i, j));
            collect(used, current, out);
            current.pop();
            used[j] = false;
        }
    }
    used[i] = false;
}

/// `E[X_1 ... X_{2n}]` for a centred Gaussian vector with covariance `cov`
/// (row-major, `dim x dim`).
pub fn isserlis(cov: &[f64], dim: usize) -> Result<f64> {
    if dim % 2 == 1 {
        return Err(Error::OddDimension(dim));
    }
    if dim > MAX_DIM {
        return Err(domain(alloc::format!("at most {MAX_DIM} factors supported")));
    }
    if cov.len() != dim * dim {
        return Err(domain("covariance size does not match the dimension"));
    }
    let mut used = [false; MAX_DIM];
    Ok(sum_matchings(cov, dim, &mut used[..dim]))
}

fn sum_matchings(cov: &[f64], dim: usize, used: &mut [bool]) -> f64 {
    let Some(i) = used.iter().position(|u| !u) else {
        return 1.0;
    };
    used[i] = true;
    let mut acc = 0.0;
    for j in i + 1..dim {
        if !used[j] {
            used[j] = true;
            acc += cov[i * dim + j] * sum_matchings(cov, dim, used);
            used[j] = false;
        }
    }
    used[i] = false;
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_counts() {
        assert_eq!(perfect_matchings(2).unwrap().len(), 1);
        assert_eq!(perfect_matchings(4).unwrap().len(), 3);
        assert_eq!(perfect_matchings(6).unwrap().len(), 15);
        assert_eq!(perfect_matchings(8).unwrap().len(), 105);
        assert!(perfect_matchings(5).is_err());
        for m in perfect_matchings(8).unwrap() {
            let mut seen = [false; 8];
            for (a, b) in m.pairs {
                assert!(!seen[a] && !seen[b]);
                seen[a] = true;
                seen[b] = true;
            }
            assert!(seen.iter().all(|s| *s));
        }
    }

    #[test]
    fn small_cases() {
        let ones = [1.0; 16];
        assert_eq!(isserlis(&ones, 4).unwrap(), 3.0);
        let mut id = [0.0; 16];
        for i in 0..4 {
            id[i * 5] = 1.0;
        }
        assert_eq!(isserlis(&id, 4).unwrap(), 0.0);
        let c = [
            2.0, 0.3, 0.5, -0.2, //
            0.3, 1.0, 0.1, 0.4, //
            0.5, 0.1, 1.5, 0.25, //
            -0.2, 0.4, 0.25, 0.8,
        ];
        let want = c[1] * c[11] + c[2] * c[7] + c[3] * c[6];
        assert!((isserlis(&c, 4).unwrap() - want).abs() < 1e-15);
        assert!(matches!(isserlis(&[1.0; 9], 3), Err(Error::OddDimension(3))));
    }

    #[test]
    fn sixth_moment_of_single_variable() {
        let v: f64 = 1.7;
        let cov = [v; 36];
        assert!((isserlis(&cov, 6).unwrap() - 15.0 * v.powi(3)).abs() < 1e-12);
    }
}
