//! Boltzmann machines and exact reference distributions.
//!
//! `p(z) = exp(-β E(z)) / Z` with `E(z) = -zᵀWz/2 - zᵀb`. The partition
//! function is never stored; exact distributions are produced on demand by
//! enumerating all `2^n` states, which is capped at [`MAX_ENUM_UNITS`].

use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use crate::error::{check_len, invalid, Error, Result};
use crate::state::{state_index, BinaryState, SampleTrace};
use crate::textfmt::{self, log_sum_exp, neumaier_sum, stable_sigmoid};

/// Largest machine for which exact enumeration is allowed.
pub const MAX_ENUM_UNITS: usize = 20;

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BoltzmannMachine {
    n_units: usize,
    /// Row-major `n × n`, symmetric with zero diagonal.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl BoltzmannMachine {
    pub fn new(weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        let n = biases.len();
        if n == 0 {
            return Err(Error::Empty("machine without units"));
        }
        check_len(n * n, weights.len())?;
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(invalid(format!("self-coupling w[{i}][{i}] = {}", weights[i * n + i])));
            }
            for j in (i + 1)..n {
                if weights[i * n + j] != weights[j * n + i] {
                    return Err(invalid(format!("weights not symmetric at ({i}, {j})")));
                }
            }
        }
        if weights.iter().chain(&biases).any(|x| !x.is_finite()) {
            return Err(invalid("non-finite weight or bias"));
        }
        Ok(Self { n_units: n, weights, biases })
    }

    pub fn zeros(n: usize) -> Self {
        Self { n_units: n, weights: vec![0.0; n * n], biases: vec![0.0; n] }
    }

    /// Weights and biases drawn i.i.d. from `U(-half_width, half_width)`.
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, half_width: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                let w = rng.random_range(-half_width..half_width);
                m.weights[i * n + j] = w;
                m.weights[j * n + i] = w;
            }
        }
        for b in &mut m.biases {
            *b = rng.random_range(-half_width..half_width);
        }
        m
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n_units + j]
    }

    /// Set `w_ij = w_ji = w`. Diagonal entries are rejected.
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        let n = self.n_units;
        if i >= n || j >= n {
            return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
        }
        if i == j {
            return Err(invalid("diagonal weights must stay zero"));
        }
        if !w.is_finite() {
            return Err(invalid("non-finite weight"));
        }
        self.weights[i * n + j] = w;
        self.weights[j * n + i] = w;
        Ok(())
    }

    pub fn bias(&self, i: usize) -> f64 {
        self.biases[i]
    }

    pub fn set_bias(&mut self, i: usize, b: f64) -> Result<()> {
        if i >= self.n_units {
            return Err(Error::IndexOutOfRange { index: i, len: self.n_units });
        }
        if !b.is_finite() {
            return Err(invalid("non-finite bias"));
        }
        self.biases[i] = b;
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n_units..(k + 1) * self.n_units]
    }

    /// Mutable access for trainers; callers must keep the matrix symmetric.
    pub(crate) fn raw_parts_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (&mut self.weights, &mut self.biases)
    }

    /// `Σ_{i≠k} w_ki z_i + b_k`, the log-odds of unit `k` at β = 1.
    pub fn local_field(&self, bits: &[u8], k: usize) -> f64 {
        let row = self.row(k);
        let mut u = self.biases[k];
        for (w, &z) in row.iter().zip(bits) {
            if z != 0 {
                u += w;
            }
        }
        u
    }

    pub fn energy(&self, state: &BinaryState) -> Result<f64> {
        self.energy_of(state.bits())
    }

    pub fn energy_of(&self, bits: &[u8]) -> Result<f64> {
        check_len(self.n_units, bits.len())?;
        Ok(self.energy_unchecked(bits))
    }

    pub(crate) fn energy_unchecked(&self, bits: &[u8]) -> f64 {
        let n = self.n_units;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..n {
            if bits[i] == 0 {
                continue;
            }
            lin += self.biases[i];
            let row = &self.weights[i * n..(i + 1) * n];
            for j in 0..n {
                if bits[j] != 0 {
                    quad += row[j];
                }
            }
        }
        -0.5 * quad - lin
    }

    /// `p(z_k = 1 | z_{\k})` at inverse temperature `beta`.
    pub fn conditional_on(&self, state: &BinaryState, k: usize, inv_temperature: f64) -> Result<f64> {
        check_len(self.n_units, state.len())?;
        if k >= self.n_units {
            return Err(Error::IndexOutOfRange { index: k, len: self.n_units });
        }
        Ok(stable_sigmoid(inv_temperature * self.local_field(state.bits(), k)))
    }

    /// Energies of all `2^n` states, indexed little-endian.
    pub fn all_energies(&self) -> Result<Vec<f64>> {
        let n = self.n_units;
        if n > MAX_ENUM_UNITS {
            return Err(Error::EnumerationTooLarge(n));
        }
        let mut energies = vec![0.0; 1 << n];
        // E(s) = E(s without its top unit h) - b_h - Σ_{i<h, z_i=1} w_hi
        for s in 1usize..(1 << n) {
            let h = usize::BITS as usize - 1 - s.leading_zeros() as usize;
            let rest = s ^ (1 << h);
            let row = self.row(h);
            let mut field = self.biases[h];
            let mut bits = rest;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                field += row[i];
                bits &= bits - 1;
            }
            energies[s] = energies[rest] - field;
        }
        Ok(energies)
    }

    pub fn exact_distribution(&self, inv_temperature: f64) -> Result<DiscreteDistribution> {
        if !(inv_temperature > 0.0 && inv_temperature.is_finite()) {
            return Err(invalid(format!("inverse temperature {inv_temperature} must be positive")));
        }
        let log_w: Vec<f64> = self.all_energies()?.into_iter().map(|e| -inv_temperature * e).collect();
        DiscreteDistribution::from_log_weights(self.n_units, &log_w)
    }

    /// Relabel units: unit `i` of the result is unit `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_units;
        check_len(n, perm.len())?;
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(invalid("not a permutation"));
            }
        }
        let mut out = Self::zeros(n);
        for i in 0..n {
            out.biases[i] = self.biases[perm[i]];
            for j in 0..n {
                out.weights[i * n + j] = self.weight(perm[i], perm[j]);
            }
        }
        Ok(out)
    }

    /// Structured text form: `n_units`, `biases`, row-major `weights`.
    pub fn to_toml(&self) -> String {
        format!(
            "n_units = {}\nbiases = {}\nweights = {}\n",
            self.n_units,
            textfmt::float_array(&self.biases),
            textfmt::float_array(&self.weights)
        )
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            n_units: usize,
            biases: Vec<f64>,
            weights: Vec<f64>,
        }
        let doc: Doc = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        check_len(doc.n_units, doc.biases.len())?;
        Self::new(doc.weights, doc.biases)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Probabilities over all `2^n` states, indexed little-endian.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    n_units: usize,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(n_units: usize, probs: Vec<f64>) -> Result<Self> {
        if n_units > MAX_ENUM_UNITS {
            return Err(Error::EnumerationTooLarge(n_units));
        }
        check_len(1 << n_units, probs.len())?;
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(invalid("probabilities must be finite and non-negative"));
        }
        let total = neumaier_sum(probs.iter().copied());
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { n_units, probs })
    }

    pub fn uniform(n_units: usize) -> Result<Self> {
        if n_units > MAX_ENUM_UNITS {
            return Err(Error::EnumerationTooLarge(n_units));
        }
        let len = 1usize << n_units;
        Ok(Self { n_units, probs: vec![1.0 / len as f64; len] })
    }

    /// Normalize unnormalized log weights with log-sum-exp.
    pub fn from_log_weights(n_units: usize, log_weights: &[f64]) -> Result<Self> {
        let log_z = log_sum_exp(log_weights);
        if !log_z.is_finite() {
            return Err(invalid("log weights cannot be normalized"));
        }
        let probs: Vec<f64> = log_weights.iter().map(|lw| (lw - log_z).exp()).collect();
        Self::normalized(n_units, probs)
    }

    fn normalized(n_units: usize, mut probs: Vec<f64>) -> Result<Self> {
        let total = neumaier_sum(probs.iter().copied());
        for p in &mut probs {
            *p /= total;
        }
        Self::new(n_units, probs)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability that each unit is on.
    pub fn unit_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n_units];
        for (s, &p) in self.probs.iter().enumerate() {
            for (i, m) in means.iter_mut().enumerate() {
                if (s >> i) & 1 == 1 {
                    *m += p;
                }
            }
        }
        means
    }

    /// Marginal over `units`; bit `r` of the result index is unit `units[r]`.
    pub fn marginal_over(&self, units: &[usize]) -> Result<DiscreteDistribution> {
        let mut seen = vec![false; self.n_units];
        for &u in units {
            if u >= self.n_units {
                return Err(Error::IndexOutOfRange { index: u, len: self.n_units });
            }
            if std::mem::replace(&mut seen[u], true) {
                return Err(invalid(format!("unit {u} listed twice")));
            }
        }
        let mut probs = vec![0.0; 1 << units.len()];
        for (s, &p) in self.probs.iter().enumerate() {
            let idx = units
                .iter()
                .enumerate()
                .fold(0usize, |acc, (r, &u)| acc | (((s >> u) & 1) << r));
            probs[idx] += p;
        }
        Self::normalized(units.len(), probs)
    }
}

/// `Σ p log(p/q)`; zero-probability terms of `p` contribute nothing and a
/// positive `p` against a zero `q` yields `+∞`.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_len(p.len(), q.len())?;
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        terms.push(pi * (pi / qi).ln());
    }
    Ok(neumaier_sum(terms).max(0.0))
}

/// Histogram of the valid samples of a trace.
pub fn empirical_distribution(trace: &SampleTrace, n_units: usize) -> Result<DiscreteDistribution> {
    check_len(n_units, trace.n_units())?;
    if n_units > MAX_ENUM_UNITS {
        return Err(Error::EnumerationTooLarge(n_units));
    }
    let mut counts = vec![0u64; 1 << n_units];
    for s in trace.valid_states() {
        counts[state_index(s)] += 1;
    }
    distribution_from_counts(n_units, &counts)
}

pub fn distribution_from_counts(n_units: usize, counts: &[u64]) -> Result<DiscreteDistribution> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Empty("no valid samples"));
    }
    DiscreteDistribution::normalized(n_units, counts.iter().map(|&c| c as f64).collect())
}
