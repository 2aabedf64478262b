//! Adaptive simulated tempering.
//!
//! The chain state is `(z, k)`: a network state and a position on an
//! inverse-temperature ladder. Each step performs a Gibbs sweep at `β_k`,
//! proposes a neighbouring rung and accepts with
//! `min(1, exp((β_k - β_k')·E(z)) · g_k / g_k')`, where the adaptive weights
//! `g` grow at every visited rung so the walk spreads evenly over the ladder.
//! Weights are kept in log space; they grow without bound as `Σ γ_t` diverges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Sampler, SweepSchedule};
use crate::boltzmann::BoltzmannMachine;
use crate::error::{check_len, invalid, Result};
use crate::rng::SimRng;
use crate::state::{BinaryState, SampleTrace};

/// Decaying schedule `a / (b + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub numerator: f64,
    pub offset: f64,
}

impl RateSchedule {
    pub const fn new(numerator: f64, offset: f64) -> Self {
        Self { numerator, offset }
    }

    /// Rate at (1-based) iteration `t`.
    pub fn at(&self, t: u64) -> f64 {
        self.numerator / (self.offset + t as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.numerator >= 0.0 && self.offset > 0.0 && self.numerator.is_finite() && self.offset.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("rate schedule {}/({} + t)", self.numerator, self.offset)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureLadder {
    betas: Vec<f64>,
    cold: usize,
}

impl TemperatureLadder {
    /// Strictly monotone inverse temperatures in `(0, 1]` with β = 1 at one end.
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        let k = betas.len();
        if k == 0 {
            return Err(invalid("empty temperature ladder"));
        }
        if betas.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(invalid("inverse temperatures must lie in (0, 1]"));
        }
        let increasing = betas.windows(2).all(|w| w[1] > w[0]);
        let decreasing = betas.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(invalid("ladder must be strictly monotone"));
        }
        let cold = if betas[0] == 1.0 {
            0
        } else if betas[k - 1] == 1.0 {
            k - 1
        } else {
            return Err(invalid("ladder must contain β = 1 at an endpoint"));
        };
        Ok(Self { betas, cold })
    }

    /// `levels` equidistant values from 1 down to `beta_min`.
    pub fn equidistant(levels: usize, beta_min: f64) -> Result<Self> {
        if levels == 0 {
            return Err(invalid("ladder needs at least one level"));
        }
        if levels == 1 {
            return Self::new(vec![1.0]);
        }
        let step = (1.0 - beta_min) / (levels - 1) as f64;
        Self::new((0..levels).map(|i| if i == 0 { 1.0 } else { 1.0 - step * i as f64 }).collect())
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn beta(&self, level: usize) -> f64 {
        self.betas[level]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Index of the β = 1 rung.
    pub fn cold_index(&self) -> usize {
        self.cold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AstState {
    ladder: TemperatureLadder,
    log_weights: Vec<f64>,
    level: usize,
    steps: u64,
    gamma: RateSchedule,
}

impl AstState {
    /// All weights start at 1 and the chain starts on the cold rung.
    pub fn new(ladder: TemperatureLadder, gamma: RateSchedule) -> Result<Self> {
        gamma.validate()?;
        let k = ladder.len();
        let level = ladder.cold_index();
        Ok(Self { ladder, log_weights: vec![0.0; k], level, steps: 0, gamma })
    }

    pub fn ladder(&self) -> &TemperatureLadder {
        &self.ladder
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn is_cold(&self) -> bool {
        self.level == self.ladder.cold_index()
    }

    pub fn step_count(&self) -> u64 {
        self.steps
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| lw.exp()).collect()
    }

    /// `γ_t` for the next step.
    pub fn next_gamma(&self) -> f64 {
        self.gamma.at(self.steps + 1)
    }
}

/// Outcome of one tempering step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AstStep {
    /// Rung whose temperature the Gibbs sweep used.
    pub sampled_level: usize,
    /// Proposed rung, `None` when the proposal left the ladder.
    pub proposed: Option<usize>,
    pub accepted: bool,
}

/// Acceptance probability for moving from `β_from` to `β_to` at energy `energy`.
pub fn ast_accept_probability(energy: f64, beta_from: f64, beta_to: f64, log_g_from: f64, log_g_to: f64) -> f64 {
    let log_ratio = (beta_from - beta_to) * energy + log_g_from - log_g_to;
    if log_ratio >= 0.0 {
        1.0
    } else {
        log_ratio.exp()
    }
}

pub fn ast_step<R: Rng + ?Sized>(
    machine: &BoltzmannMachine,
    schedule: &SweepSchedule,
    state: &mut BinaryState,
    ast: &mut AstState,
    rng: &mut R,
) -> Result<AstStep> {
    check_len(machine.n_units(), state.len())?;
    let k = ast.level;
    let beta = ast.ladder.beta(k);
    schedule.sweep(machine, state.bits_mut(), beta, &[], rng);

    let up = rng.random::<bool>();
    let proposed = if up {
        (k + 1 < ast.ladder.len()).then_some(k + 1)
    } else {
        k.checked_sub(1)
    };
    let mut accepted = false;
    if let Some(to) = proposed {
        let energy = machine.energy_unchecked(state.bits());
        let a = ast_accept_probability(energy, beta, ast.ladder.beta(to), ast.log_weights[k], ast.log_weights[to]);
        if a >= 1.0 || rng.random::<f64>() < a {
            ast.level = to;
            accepted = true;
        }
    }
    let gamma = ast.next_gamma();
    ast.log_weights[ast.level] += gamma.ln_1p();
    ast.steps += 1;
    Ok(AstStep { sampled_level: k, proposed, accepted })
}

/// Fraction of samples in a trace flagged valid.
pub fn ast_effective_rate(trace: &SampleTrace) -> f64 {
    if trace.is_empty() {
        0.0
    } else {
        trace.valid_count() as f64 / trace.len() as f64
    }
}

/// An AST chain recording every state, flagged valid when drawn at β = 1.
#[derive(Debug, Clone)]
pub struct AstSampler<'a> {
    machine: &'a BoltzmannMachine,
    schedule: SweepSchedule,
    state: BinaryState,
    ast: AstState,
    occupancy: Vec<u64>,
    rng: SimRng,
}

impl<'a> AstSampler<'a> {
    pub fn new(
        machine: &'a BoltzmannMachine,
        schedule: SweepSchedule,
        ladder: TemperatureLadder,
        gamma: RateSchedule,
        mut rng: SimRng,
    ) -> Result<Self> {
        if let SweepSchedule::Bipartite(layout) = &schedule {
            layout.check(machine)?;
        }
        let state = BinaryState::random(machine.n_units(), &mut rng);
        let occupancy = vec![0; ladder.len()];
        Ok(Self { machine, schedule, state, ast: AstState::new(ladder, gamma)?, occupancy, rng })
    }

    pub fn ast(&self) -> &AstState {
        &self.ast
    }

    pub fn state(&self) -> &BinaryState {
        &self.state
    }

    /// Number of sweeps performed at each rung.
    pub fn occupancy(&self) -> &[u64] {
        &self.occupancy
    }

    pub fn step(&mut self) -> AstStep {
        let out = ast_step(self.machine, &self.schedule, &mut self.state, &mut self.ast, &mut self.rng)
            .expect("sampler state matches its machine");
        self.occupancy[out.sampled_level] += 1;
        out
    }
}

impl Sampler for AstSampler<'_> {
    fn n_units(&self) -> usize {
        self.machine.n_units()
    }

    fn step_into(&mut self, trace: &mut SampleTrace) -> Result<()> {
        let out = self.step();
        let valid = out.sampled_level == self.ast.ladder.cold_index();
        trace.push(self.ast.steps as f64, valid, self.state.bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann::{distribution_from_counts, kl_divergence};
    use crate::rng::seeded;

    #[test]
    fn ladder_validation() {
        assert!(TemperatureLadder::new(vec![]).is_err());
        assert!(TemperatureLadder::new(vec![1.0, 0.9, 0.95]).is_err());
        assert!(TemperatureLadder::new(vec![0.9, 0.95]).is_err());
        assert!(TemperatureLadder::new(vec![1.0, 1.2]).is_err());
        assert_eq!(TemperatureLadder::new(vec![0.8, 0.9, 1.0]).unwrap().cold_index(), 2);
        let l = TemperatureLadder::equidistant(20, 0.9).unwrap();
        assert_eq!(l.len(), 20);
        assert_eq!(l.beta(0), 1.0);
        assert!((l.beta(19) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn single_level_degenerates_to_gibbs() {
        let m = BoltzmannMachine::random_uniform(4, 1.0, &mut seeded(1));
        let ladder = TemperatureLadder::new(vec![1.0]).unwrap();
        let gamma = RateSchedule::new(90.0, 150.0);
        let mut ast = AstState::new(ladder, gamma).unwrap();
        let mut z_ast = BinaryState::zeros(4);
        let mut z_gibbs = BinaryState::zeros(4);
        // same stream: the AST step draws one extra direction bit per sweep
        let mut rng_a = seeded(3);
        let mut rng_g = seeded(3);
        let mut expected_log_g = 0.0;
        for t in 1..=500u64 {
            let out = ast_step(&m, &SweepSchedule::Sequential, &mut z_ast, &mut ast, &mut rng_a).unwrap();
            assert_eq!(out.proposed, None);
            super::super::gibbs_sweep(&m, &mut z_gibbs, 1.0, &mut rng_g).unwrap();
            let _: bool = rng_g.random();
            assert_eq!(z_ast, z_gibbs);
            expected_log_g += (90.0 / (150.0 + t as f64)).ln_1p();
        }
        assert!((ast.log_weights()[0] - expected_log_g).abs() < 1e-9);
    }

    #[test]
    fn equal_temperatures_always_accept() {
        for e in [-50.0, 0.0, 3.0, 1e6] {
            assert_eq!(ast_accept_probability(e, 0.95, 0.95, 0.0, 0.0), 1.0);
        }
        assert!((ast_accept_probability(2.0, 1.0, 0.9, 0.0, 0.0) - (0.2f64).exp().min(1.0)).abs() < 1e-15);
        assert!((ast_accept_probability(-2.0, 1.0, 0.9, 0.0, 0.0) - (-0.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn plain_simulated_tempering_samples_cold_distribution() {
        // γ ≡ 0 and g ≡ 1: standard simulated tempering
        let m = BoltzmannMachine::random_uniform(4, 0.6, &mut seeded(17));
        let ladder = TemperatureLadder::equidistant(5, 0.5).unwrap();
        let mut s =
            AstSampler::new(&m, SweepSchedule::Sequential, ladder, RateSchedule::new(0.0, 1.0), seeded(2)).unwrap();
        let trace = s.collect(300_000).unwrap();
        assert!(s.ast().log_weights().iter().all(|&g| g == 0.0));
        let emp = crate::boltzmann::empirical_distribution(&trace, 4).unwrap();
        let kl = kl_divergence(&emp, &m.exact_distribution(1.0).unwrap()).unwrap();
        assert!(kl < 5e-3, "kl {kl}");
    }

    #[test]
    fn adaptive_weights_flatten_occupancy() {
        let m = BoltzmannMachine::random_uniform(4, 0.6, &mut seeded(5));
        let ladder = TemperatureLadder::equidistant(20, 0.9).unwrap();
        let mut s =
            AstSampler::new(&m, SweepSchedule::Sequential, ladder, RateSchedule::new(90.0, 150.0), seeded(9)).unwrap();
        let n = 100_000;
        let mut counts = vec![0u64; 16];
        let mut valid = 0u64;
        for _ in 0..n {
            let out = s.step();
            if out.sampled_level == 0 {
                counts[s.state().index()] += 1;
                valid += 1;
            }
        }
        let k = 20.0;
        for &c in s.occupancy() {
            let f = c as f64 / n as f64;
            assert!(f >= 0.5 / k && f <= 2.0 / k, "occupancy {f}");
        }
        assert!(s.ast().weights().iter().all(|&g| g > 0.0));
        let emp = distribution_from_counts(4, &counts).unwrap();
        assert!(valid > 0);
        assert!(kl_divergence(&emp, &m.exact_distribution(1.0).unwrap()).unwrap() < 5e-3);
    }

    #[test]
    fn effective_rate_counts_valid_samples() {
        let mut t = SampleTrace::new(1);
        assert_eq!(ast_effective_rate(&t), 0.0);
        for i in 0..10 {
            t.push(i as f64, i % 5 == 0, &[0]).unwrap();
        }
        assert!((ast_effective_rate(&t) - 0.2).abs() < 1e-15);
    }
}
