//! Indirect sampling likelihood: a Parzen-style estimator with a binary
//! match/mismatch kernel, evaluated in log space via bit counts.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::textfmt::log_sum_exp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IslConfig {
    pub beta_isl: f64,
}

impl Default for IslConfig {
    fn default() -> Self {
        Self { beta_isl: 0.95 }
    }
}

impl IslConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_isl > 0.5 && self.beta_isl <= 1.0) {
            return Err(invalid(format!("ISL beta {} outside (0.5, 1]", self.beta_isl)));
        }
        Ok(())
    }
}

/// Binary vectors packed 64 per word.
struct Packed {
    words: usize,
    data: Vec<u64>,
}

impl Packed {
    fn new<T: AsRef<[u8]>>(vectors: &[T], d: usize) -> Result<Self> {
        let words = d.div_ceil(64);
        let mut data = vec![0u64; words * vectors.len()];
        for (i, v) in vectors.iter().enumerate() {
            let v = v.as_ref();
            check_len(d, v.len())?;
            for (j, &b) in v.iter().enumerate() {
                if b > 1 {
                    return Err(invalid("ISL inputs must be binary"));
                }
                data[i * words + j / 64] |= (b as u64) << (j % 64);
            }
        }
        Ok(Self { words, data })
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.words..(i + 1) * self.words]
    }

    fn mismatches(&self, i: usize, other: &Packed, j: usize) -> u32 {
        self.row(i).iter().zip(other.row(j)).map(|(a, b)| (a ^ b).count_ones()).sum()
    }
}

fn prepare<T: AsRef<[u8]>, U: AsRef<[u8]>>(test: &[T], generated: &[U]) -> Result<(usize, Packed, Packed)> {
    if test.is_empty() {
        return Err(Error::Empty("ISL test set"));
    }
    if generated.is_empty() {
        return Err(Error::Empty("ISL generated samples"));
    }
    let d = test[0].as_ref().len();
    Ok((d, Packed::new(test, d)?, Packed::new(generated, d)?))
}

/// Per-test-sample `log p(y)`.
pub fn isl_log_probs<T: AsRef<[u8]>, U: AsRef<[u8]>>(test: &[T], generated: &[U], cfg: &IslConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (d, t, g) = prepare(test, generated)?;
    let (lm, lx) = (cfg.beta_isl.ln(), (1.0 - cfg.beta_isl).ln());
    let log_n = (generated.len() as f64).ln();
    let mut terms = vec![0.0; generated.len()];
    Ok((0..test.len())
        .map(|i| {
            for (j, term) in terms.iter_mut().enumerate() {
                let miss = t.mismatches(i, &g, j) as f64;
                *term = kernel(d as f64 - miss, miss, lm, lx);
            }
            log_sum_exp(&terms) - log_n
        })
        .collect())
}

fn kernel(matches: f64, misses: f64, lm: f64, lx: f64) -> f64 {
    // avoid 0·(−∞) when β = 1
    let a = if matches == 0.0 { 0.0 } else { matches * lm };
    let b = if misses == 0.0 { 0.0 } else { misses * lx };
    a + b
}

/// Mean log-likelihood of `test` under the estimator built from `generated`.
pub fn isl_log_likelihood<T: AsRef<[u8]>, U: AsRef<[u8]>>(test: &[T], generated: &[U], cfg: &IslConfig) -> Result<f64> {
    let lp = isl_log_probs(test, generated, cfg)?;
    Ok(lp.iter().sum::<f64>() / lp.len() as f64)
}

/// ISL on growing prefixes of `generated`; checkpoints must increase.
pub fn isl_curve<T: AsRef<[u8]>, U: AsRef<[u8]>>(
    test: &[T],
    generated: &[U],
    checkpoints: &[usize],
    cfg: &IslConfig,
) -> Result<Vec<(usize, f64)>> {
    cfg.validate()?;
    if checkpoints.windows(2).any(|w| w[1] <= w[0]) || checkpoints.first() == Some(&0) {
        return Err(invalid("checkpoints must be positive and strictly increasing"));
    }
    if let Some(&last) = checkpoints.last() {
        if last > generated.len() {
            return Err(invalid(format!("checkpoint {last} beyond {} samples", generated.len())));
        }
    }
    let (d, t, g) = prepare(test, generated)?;
    let (lm, lx) = (cfg.beta_isl.ln(), (1.0 - cfg.beta_isl).ln());
    // running log-sum-exp per test sample
    let mut acc = vec![f64::NEG_INFINITY; test.len()];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut done = 0;
    for &cp in checkpoints {
        for j in done..cp {
            for (i, a) in acc.iter_mut().enumerate() {
                let miss = t.mismatches(i, &g, j) as f64;
                let x = kernel(d as f64 - miss, miss, lm, lx);
                let hi = a.max(x);
                *a = if hi == f64::NEG_INFINITY { hi } else { hi + ((*a - hi).exp() + (x - hi).exp()).ln() };
            }
        }
        done = cp;
        let log_n = (cp as f64).ln();
        out.push((cp, acc.iter().map(|a| a - log_n).sum::<f64>() / test.len() as f64));
    }
    Ok(out)
}

/// Independent per-pixel draws from the training marginals.
pub fn pom_baseline<T: AsRef<[u8]>, R: Rng + ?Sized>(training: &[T], n_samples: usize, rng: &mut R) -> Result<Vec<Vec<u8>>> {
    if training.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let d = training[0].as_ref().len();
    let mut marg = vec![0.0; d];
    for v in training {
        check_len(d, v.as_ref().len())?;
        for (m, &b) in marg.iter_mut().zip(v.as_ref()) {
            *m += b as f64;
        }
    }
    marg.iter_mut().for_each(|m| *m /= training.len() as f64);
    Ok((0..n_samples).map(|_| marg.iter().map(|&p| (rng.random::<f64>() < p) as u8).collect()).collect())
}

/// Draws with replacement from a base set of samples.
pub fn opt_baseline<T: AsRef<[u8]>, R: Rng + ?Sized>(base: &[T], n_samples: usize, rng: &mut R) -> Result<Vec<Vec<u8>>> {
    if base.is_empty() {
        return Err(Error::Empty("base set"));
    }
    Ok((0..n_samples).map(|_| base.choose(rng).unwrap().as_ref().to_vec()).collect())
}
