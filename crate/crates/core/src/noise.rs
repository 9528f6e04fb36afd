//! Class-conditional label noise: transition matrices and corruption.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Role, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Flip to every other class with probability `eps / (n - 1)`.
    Symmetric,
    /// Flip to the cyclically next class with probability `eps`.
    PairFlip,
}

/// A noise kind together with its rate, written `sym:0.6` or `pair:0.4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
}

impl NoiseSpec {
    pub fn clean() -> NoiseSpec {
        NoiseSpec {
            kind: NoiseKind::Symmetric,
            rate: 0.0,
        }
    }

    pub fn matrix(&self, num_classes: usize) -> Result<TransitionMatrix> {
        match self.kind {
            NoiseKind::Symmetric => TransitionMatrix::symmetric(num_classes, self.rate),
            NoiseKind::PairFlip => TransitionMatrix::pair_flip(num_classes, self.rate),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Symmetric => "sym",
            NoiseKind::PairFlip => "pair",
        })
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.rate)
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sym" | "symmetric" => Ok(NoiseKind::Symmetric),
            "pair" | "pair_flip" | "pairflip" | "asym" | "asymmetric" => Ok(NoiseKind::PairFlip),
            other => Err(Error::invalid(format!("unknown noise kind `{other}`"))),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rate) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("noise spec `{s}` is not KIND:RATE")))?;
        let rate: f64 = rate
            .parse()
            .map_err(|_| Error::invalid(format!("bad noise rate `{rate}`")))?;
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::invalid(format!("noise rate {rate} outside [0, 1)")));
        }
        Ok(NoiseSpec {
            kind: kind.parse()?,
            rate,
        })
    }
}

/// Row-stochastic `Q[i][j] = Pr(noisy = j | clean = i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub kind: NoiseKind,
    pub eps: f64,
    q: Vec<Vec<f64>>,
}

fn check_args(n: usize, eps: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {n}")));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::invalid(format!("noise rate {eps} outside [0, 1)")));
    }
    Ok(())
}

impl TransitionMatrix {
    pub fn symmetric(n: usize, eps: f64) -> Result<TransitionMatrix> {
        check_args(n, eps)?;
        let off = eps / (n - 1) as f64;
        let q = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 1.0 - eps } else { off })
                    .collect()
            })
            .collect();
        Ok(TransitionMatrix {
            kind: NoiseKind::Symmetric,
            eps,
            q,
        })
    }

    pub fn pair_flip(n: usize, eps: f64) -> Result<TransitionMatrix> {
        check_args(n, eps)?;
        let mut q = vec![vec![0.0; n]; n];
        for (i, row) in q.iter_mut().enumerate() {
            row[i] = 1.0 - eps;
            row[(i + 1) % n] += eps;
        }
        Ok(TransitionMatrix {
            kind: NoiseKind::PairFlip,
            eps,
            q,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.q.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i][j]
    }

    /// Inverse-CDF draw from row `clean` given a uniform `u` in `[0, 1)`.
    pub fn sample(&self, clean: usize, u: f64) -> usize {
        let row = &self.q[clean];
        let mut cum = 0.0;
        for (j, &p) in row.iter().enumerate() {
            cum += p;
            if p > 0.0 && u < cum {
                return j;
            }
        }
        // u landed in the rounding gap above the final cumulative sum
        row.iter().rposition(|&p| p > 0.0).unwrap_or(clean)
    }
}

/// Corrupt labels of train nodes, and of validation nodes unless
/// `clean_val`. Each node draws from its own ChaCha stream keyed by
/// `(seed, node)`, so the result does not depend on iteration order.
pub fn corrupt_labels(
    clean: &[usize],
    q: &TransitionMatrix,
    split: &Split,
    seed: u64,
    clean_val: bool,
) -> Vec<usize> {
    clean
        .iter()
        .enumerate()
        .map(|(node, &y)| {
            let affected = match split.role(node) {
                Role::Train => true,
                Role::Val => !clean_val,
                Role::Test | Role::Unused => false,
            };
            if !affected || q.eps == 0.0 {
                return y;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(node as u64);
            q.sample(y, rng.random::<f64>())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_row_stochastic(m: &TransitionMatrix) {
        for i in 0..m.num_classes() {
            let s: f64 = m.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
            assert!(m.row(i).iter().all(|&p| p >= 0.0));
            assert!((m.get(i, i) - (1.0 - m.eps)).abs() < 1e-15);
        }
    }

    #[test]
    fn symmetric_three_classes() {
        let m = TransitionMatrix::symmetric(3, 0.4).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.6 } else { 0.2 };
                assert!((m.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pair_flip_three_classes() {
        let m = TransitionMatrix::pair_flip(3, 0.2).unwrap();
        let want = [[0.8, 0.2, 0.0], [0.0, 0.8, 0.2], [0.2, 0.0, 0.8]];
        for (i, row) in want.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                assert!((m.get(i, j) - p).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        for m in [
            TransitionMatrix::symmetric(5, 0.0).unwrap(),
            TransitionMatrix::pair_flip(5, 0.0).unwrap(),
        ] {
            for i in 0..5 {
                for j in 0..5 {
                    assert_eq!(m.get(i, j), if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn stochastic_rows() {
        assert_row_stochastic(&TransitionMatrix::symmetric(7, 0.8).unwrap());
        assert_row_stochastic(&TransitionMatrix::pair_flip(4, 0.8).unwrap());
        let m = TransitionMatrix::pair_flip(4, 0.8).unwrap();
        for i in 0..4 {
            assert_eq!(m.row(i).iter().filter(|&&p| p > 0.0).count(), 2);
        }
    }

    #[test]
    fn bad_args() {
        assert!(TransitionMatrix::symmetric(1, 0.2).is_err());
        assert!(TransitionMatrix::symmetric(3, 1.0).is_err());
        assert!(TransitionMatrix::pair_flip(3, -0.1).is_err());
    }

    #[test]
    fn parse_spec() {
        let s: NoiseSpec = "sym:0.6".parse().unwrap();
        assert_eq!(s.kind, NoiseKind::Symmetric);
        assert_eq!(s.rate, 0.6);
        assert_eq!(s.to_string(), "sym:0.6");
        assert_eq!(
            "pair:0.4".parse::<NoiseSpec>().unwrap().kind,
            NoiseKind::PairFlip
        );
        assert!("sym".parse::<NoiseSpec>().is_err());
        assert!("sym:1.2".parse::<NoiseSpec>().is_err());
    }

    #[test]
    fn test_nodes_untouched_and_clean_val_flag() {
        let n = 600;
        let clean: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let roles: Vec<Role> = (0..n)
            .map(|i| match i % 4 {
                0 => Role::Train,
                1 => Role::Val,
                _ => Role::Test,
            })
            .collect();
        let split = Split::from_roles(roles).unwrap();
        let q = TransitionMatrix::symmetric(3, 0.6).unwrap();
        let noisy = corrupt_labels(&clean, &q, &split, 11, false);
        let kept_clean = corrupt_labels(&clean, &q, &split, 11, true);
        let mut val_flips = 0;
        for i in 0..n {
            match split.role(i) {
                Role::Test => assert_eq!(noisy[i], clean[i]),
                Role::Val => {
                    assert_eq!(kept_clean[i], clean[i]);
                    val_flips += (noisy[i] != clean[i]) as usize;
                }
                _ => assert_eq!(noisy[i], kept_clean[i]),
            }
        }
        assert!(val_flips > 0);
    }

    #[test]
    fn zero_rate_leaves_labels() {
        let clean: Vec<usize> = (0..50).map(|i| i % 5).collect();
        let split = Split::from_roles(vec![Role::Train; 50]).unwrap();
        let q = TransitionMatrix::symmetric(5, 0.0).unwrap();
        assert_eq!(corrupt_labels(&clean, &q, &split, 3, false), clean);
    }
}
