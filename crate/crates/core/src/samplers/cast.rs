//! Coupled adaptive simulated tempering (CAST) training for RBMs.
//!
//! Two persistent particles run alongside the parameter updates: a statistics
//! chain fixed at β = 1, which supplies the negative phase, and an AST chain
//! that roams the temperature ladder. Whenever the AST chain sits on the cold
//! rung after its step, the two particles exchange states. Both then live at
//! β = 1, so the symmetric exchange is always accepted.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{ast_step, AstState, RateSchedule, RbmLayout, SweepSchedule, TemperatureLadder};
use crate::boltzmann::BoltzmannMachine;
use crate::error::{check_len, invalid, Error, Result};
use crate::rng::SimRng;
use crate::state::BinaryState;
use crate::textfmt::stable_sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub levels: usize,
    pub beta_min: f64,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self { levels: 20, beta_min: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSchedule {
    /// Number of parameter updates.
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: RateSchedule,
    #[serde(default = "default_gamma")]
    pub gamma: RateSchedule,
    #[serde(default)]
    pub ladder: LadderSpec,
    #[serde(default = "default_init_std")]
    pub init_weight_std: f64,
}

fn default_gamma() -> RateSchedule {
    RateSchedule::new(90.0, 150.0)
}

fn default_init_std() -> f64 {
    0.01
}

impl TrainingSchedule {
    /// The oriented-bars setting: `η = 10/(2000+t)`, batch 3.
    pub fn bars(iterations: usize) -> Self {
        Self {
            iterations,
            batch_size: 3,
            learning_rate: RateSchedule::new(10.0, 2000.0),
            gamma: default_gamma(),
            ladder: LadderSpec::default(),
            init_weight_std: default_init_std(),
        }
    }

    /// The digit setting: `η = 40/(2000+t)`.
    pub fn digits(iterations: usize, batch_size: usize) -> Self {
        Self {
            iterations,
            batch_size,
            learning_rate: RateSchedule::new(40.0, 2000.0),
            gamma: default_gamma(),
            ladder: LadderSpec::default(),
            init_weight_std: default_init_std(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(invalid("iterations and batch size must be positive"));
        }
        if self.learning_rate.numerator <= 0.0 {
            return Err(invalid("learning-rate numerator must be positive"));
        }
        self.learning_rate.validate()?;
        self.gamma.validate()?;
        if !(self.init_weight_std >= 0.0) {
            return Err(invalid("initial weight spread must be non-negative"));
        }
        TemperatureLadder::equidistant(self.ladder.levels, self.ladder.beta_min).map(|_| ())
    }
}

/// Gradient of the log-likelihood with respect to the RBM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    /// Row-major `visible_side × hidden`.
    pub weights: Vec<f64>,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl Gradient {
    fn zeros(layout: &RbmLayout) -> Self {
        Self {
            weights: vec![0.0; layout.n_visible_side() * layout.n_hidden],
            visible_bias: vec![0.0; layout.n_visible_side()],
            hidden_bias: vec![0.0; layout.n_hidden],
        }
    }
}

#[derive(Debug, Clone)]
pub struct CastTrainer {
    layout: RbmLayout,
    machine: BoltzmannMachine,
    schedule: TrainingSchedule,
    stats_particle: BinaryState,
    ast_particle: BinaryState,
    ast: AstState,
    iteration: u64,
    swaps: u64,
    rng: SimRng,
}

impl CastTrainer {
    /// Weights start as `N(0, init_weight_std²)` on the bipartite couplings, biases at 0.
    pub fn new(layout: RbmLayout, schedule: TrainingSchedule, mut rng: SimRng) -> Result<Self> {
        schedule.validate()?;
        if layout.n_visible_side() == 0 || layout.n_hidden == 0 {
            return Err(invalid("layout needs visible and hidden units"));
        }
        let mut machine = BoltzmannMachine::zeros(layout.n_units());
        let normal = Normal::new(0.0, schedule.init_weight_std).map_err(|e| invalid(e.to_string()))?;
        for v in layout.visible_side() {
            for h in layout.hidden() {
                machine.set_weight(v, h, normal.sample(&mut rng))?;
            }
        }
        let ladder = TemperatureLadder::equidistant(schedule.ladder.levels, schedule.ladder.beta_min)?;
        let ast = AstState::new(ladder, schedule.gamma)?;
        let stats_particle = BinaryState::random(layout.n_units(), &mut rng);
        let ast_particle = BinaryState::random(layout.n_units(), &mut rng);
        Ok(Self { layout, machine, schedule, stats_particle, ast_particle, ast, iteration: 0, swaps: 0, rng })
    }

    pub fn machine(&self) -> &BoltzmannMachine {
        &self.machine
    }

    pub fn into_machine(self) -> BoltzmannMachine {
        self.machine
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Number of particle exchanges so far.
    pub fn swaps(&self) -> u64 {
        self.swaps
    }

    pub fn stats_particle(&self) -> &BinaryState {
        &self.stats_particle
    }

    #[cfg(test)]
    pub(crate) fn set_stats_particle(&mut self, state: BinaryState) {
        self.stats_particle = state;
    }

    fn hidden_means(&self, visible_side: &[u8], out: &mut [f64]) {
        let hidden = self.layout.hidden();
        let active: Vec<usize> = visible_side.iter().enumerate().filter(|(_, &b)| b != 0).map(|(i, _)| i).collect();
        for (slot, h) in out.iter_mut().zip(hidden) {
            let row = self.machine.row(h);
            let field = self.machine.bias(h) + active.iter().map(|&i| row[i]).sum::<f64>();
            *slot = stable_sigmoid(field);
        }
    }

    fn check_item(&self, item: &[u8]) -> Result<()> {
        check_len(self.layout.n_visible_side(), item.len())?;
        if item.iter().any(|&b| b > 1) {
            return Err(invalid("training data must be binary"));
        }
        Ok(())
    }

    /// Data-phase minus model-phase statistics for one batch; hidden units
    /// enter through their exact conditional means in both phases.
    pub fn gradient(&self, batch: &[&[u8]]) -> Result<Gradient> {
        if batch.is_empty() {
            return Err(Error::Empty("empty batch"));
        }
        let nvs = self.layout.n_visible_side();
        let nh = self.layout.n_hidden;
        let mut grad = Gradient::zeros(&self.layout);
        let mut h = vec![0.0; nh];
        let scale = 1.0 / batch.len() as f64;
        for item in batch {
            self.check_item(item)?;
            self.hidden_means(item, &mut h);
            for (v, &x) in item.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                grad.visible_bias[v] += scale;
                let row = &mut grad.weights[v * nh..(v + 1) * nh];
                for (g, &hj) in row.iter_mut().zip(&h) {
                    *g += scale * hj;
                }
            }
            for (g, &hj) in grad.hidden_bias.iter_mut().zip(&h) {
                *g += scale * hj;
            }
        }
        let model_v = &self.stats_particle.bits()[..nvs];
        self.hidden_means(model_v, &mut h);
        for (v, &x) in model_v.iter().enumerate() {
            if x == 0 {
                continue;
            }
            grad.visible_bias[v] -= 1.0;
            let row = &mut grad.weights[v * nh..(v + 1) * nh];
            for (g, &hj) in row.iter_mut().zip(&h) {
                *g -= hj;
            }
        }
        for (g, &hj) in grad.hidden_bias.iter_mut().zip(&h) {
            *g -= hj;
        }
        Ok(grad)
    }

    /// One sweep for each particle, then the cold-rung exchange.
    pub fn advance_particles(&mut self) {
        let schedule = SweepSchedule::Bipartite(self.layout);
        schedule.sweep(&self.machine, self.stats_particle.bits_mut(), 1.0, &[], &mut self.rng);
        ast_step(&self.machine, &schedule, &mut self.ast_particle, &mut self.ast, &mut self.rng)
            .expect("particle sizes match the machine");
        if self.ast.is_cold() {
            std::mem::swap(&mut self.stats_particle, &mut self.ast_particle);
            self.swaps += 1;
        }
    }

    fn apply(&mut self, grad: &Gradient, eta: f64) {
        let nh = self.layout.n_hidden;
        let n = self.layout.n_units();
        let h0 = self.layout.n_visible_side();
        let (weights, biases) = self.machine.raw_parts_mut();
        for v in 0..h0 {
            for j in 0..nh {
                let d = eta * grad.weights[v * nh + j];
                weights[v * n + h0 + j] += d;
                weights[(h0 + j) * n + v] += d;
            }
            biases[v] += eta * grad.visible_bias[v];
        }
        for j in 0..nh {
            biases[h0 + j] += eta * grad.hidden_bias[j];
        }
    }

    /// Advance the particles, then take one gradient step on `batch`.
    pub fn step(&mut self, batch: &[&[u8]]) -> Result<()> {
        self.advance_particles();
        let grad = self.gradient(batch)?;
        self.iteration += 1;
        let eta = self.schedule.learning_rate.at(self.iteration);
        self.apply(&grad, eta);
        Ok(())
    }

    /// Run the configured number of iterations, cycling through reshuffled data.
    pub fn train(&mut self, data: &[Vec<u8>]) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Empty("empty training set"));
        }
        for item in data {
            self.check_item(item)?;
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut cursor = 0;
        let mut batch: Vec<&[u8]> = Vec::with_capacity(self.schedule.batch_size);
        for _ in 0..self.schedule.iterations {
            batch.clear();
            while batch.len() < self.schedule.batch_size {
                if cursor == order.len() {
                    order.shuffle(&mut self.rng);
                    cursor = 0;
                }
                batch.push(&data[order[cursor]]);
                cursor += 1;
            }
            self.step(&batch)?;
            if self.iteration % 10_000 == 0 {
                log::debug!("cast iteration {} swaps {}", self.iteration, self.swaps);
            }
        }
        Ok(())
    }
}

/// Train an RBM on binary visible-side vectors (visible pixels followed by
/// one-hot labels).
pub fn cast_train<R: Rng + ?Sized>(
    layout: &RbmLayout,
    data: &[Vec<u8>],
    schedule: &TrainingSchedule,
    rng: &mut R,
) -> Result<BoltzmannMachine> {
    let mut trainer = CastTrainer::new(*layout, schedule.clone(), crate::rng::seeded(rng.random()))?;
    trainer.train(data)?;
    Ok(trainer.into_machine())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn schedule(iterations: usize) -> TrainingSchedule {
        TrainingSchedule {
            iterations,
            batch_size: 1,
            learning_rate: RateSchedule::new(100.0, 1000.0),
            gamma: RateSchedule::new(90.0, 150.0),
            ladder: LadderSpec::default(),
            init_weight_std: 0.01,
        }
    }

    #[test]
    fn rejects_bad_data() {
        let layout = RbmLayout::new(3, 2, 0);
        let mut rng = seeded(0);
        assert!(cast_train(&layout, &[vec![0, 1]], &schedule(10), &mut rng).is_err());
        assert!(cast_train(&layout, &[vec![0, 2, 1]], &schedule(10), &mut rng).is_err());
        assert!(cast_train(&layout, &[], &schedule(10), &mut rng).is_err());
        let mut bad = schedule(10);
        bad.batch_size = 0;
        assert!(cast_train(&layout, &[vec![0, 1, 1]], &bad, &mut rng).is_err());
    }

    #[test]
    fn trained_machine_is_bipartite() {
        let layout = RbmLayout::new(4, 3, 1);
        let data = vec![vec![1, 0, 1, 0, 1], vec![0, 1, 0, 1, 0]];
        let m = cast_train(&layout, &data, &schedule(200), &mut seeded(1)).unwrap();
        layout.check(&m).unwrap();
    }

    #[test]
    fn single_pattern_becomes_the_visible_mode() {
        let layout = RbmLayout::new(4, 2, 0);
        let pattern = vec![1u8, 0, 1, 1];
        let m = cast_train(&layout, &[pattern.clone()], &schedule(5000), &mut seeded(2)).unwrap();
        let visible = m.exact_distribution(1.0).unwrap().marginal_over(&[0, 1, 2, 3]).unwrap();
        let best = (0..16).max_by(|&a, &b| visible.prob(a).total_cmp(&visible.prob(b))).unwrap();
        assert_eq!(best, crate::state::state_index(&pattern));
    }

    #[test]
    fn gradient_at_zero_parameters() {
        // W = 0, b = 0: data phase is x·½, model phase averages to ¼ on every pair
        let layout = RbmLayout::new(3, 2, 0);
        let mut s = schedule(1);
        s.init_weight_std = 0.0;
        let mut trainer = CastTrainer::new(layout, s, seeded(4)).unwrap();
        let x: &[u8] = &[1, 0, 1];
        let n = 100_000;
        let mut mean = vec![0.0; 6];
        let mut rng = seeded(5);
        for _ in 0..n {
            trainer.set_stats_particle(BinaryState::random(5, &mut rng));
            let g = trainer.gradient(&[x]).unwrap();
            for (m, gi) in mean.iter_mut().zip(&g.weights) {
                *m += gi / n as f64;
            }
        }
        // model term v·½ with v ~ Bernoulli(½): variance 1/16 per sample
        let tol = 3.0 * (1.0f64 / 16.0 / n as f64).sqrt();
        for v in 0..3 {
            for h in 0..2 {
                let data_term = x[v] as f64 * 0.5;
                assert!((mean[v * 2 + h] - (data_term - 0.25)).abs() < tol);
            }
        }
    }

    #[test]
    fn same_seed_same_machine() {
        let layout = RbmLayout::new(4, 2, 0);
        let data = vec![vec![1, 1, 0, 0], vec![0, 0, 1, 1]];
        let a = cast_train(&layout, &data, &schedule(300), &mut seeded(7)).unwrap();
        let b = cast_train(&layout, &data, &schedule(300), &mut seeded(7)).unwrap();
        assert_eq!(a, b);
    }
}
