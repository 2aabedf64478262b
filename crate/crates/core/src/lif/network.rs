//! Clock-driven simulation of LIF sampling networks.
//!
//! Each step of length `dt` integrates the membrane with exponential Euler
//! while the synaptic drive is held at its start-of-step value, then detects
//! threshold crossings, decays the synaptic variables and adds the events
//! that arrived during the step (recurrent spikes and Poisson background).
//! A spiking neuron is held at its reset potential for `τ_ref`; its binary
//! state is 1 on `[t_spike, t_spike + τ_ref)`.

use rand::SeedableRng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::calibration::Calibration;
use super::params::{LifParams, ModelKind, NoiseConfig};
use super::stp::{stp_spike_at, StpParams, SynapseState};
use crate::error::{check_len, invalid, Error, Result};
use crate::rng::SimRng;
use crate::samplers::Sampler;
use crate::state::{Clamp, ClampMask, SampleTrace};

/// Dense `n × n` synapse table indexed `[post][pre]`.
///
/// Weights are peak currents (nA, signed) for current-based neurons and
/// signed peak conductances (µS) for conductance-based ones, where the sign
/// selects the excitatory or inhibitory reversal potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseTable {
    n: usize,
    weights: Vec<f64>,
    stp: Vec<StpParams>,
}

impl SynapseTable {
    pub fn new(n: usize) -> Self {
        Self { n, weights: vec![0.0; n * n], stp: vec![StpParams::static_synapse(); n * n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weight(&self, post: usize, pre: usize) -> f64 {
        self.weights[post * self.n + pre]
    }

    pub fn stp(&self, post: usize, pre: usize) -> StpParams {
        self.stp[post * self.n + pre]
    }

    pub fn set(&mut self, post: usize, pre: usize, weight: f64, stp: StpParams) -> Result<()> {
        if post >= self.n || pre >= self.n {
            return Err(Error::IndexOutOfRange { index: post.max(pre), len: self.n });
        }
        if post == pre && weight != 0.0 {
            return Err(invalid("self-synapses are not allowed"));
        }
        if !weight.is_finite() {
            return Err(invalid("non-finite synaptic weight"));
        }
        stp.validate()?;
        self.weights[post * self.n + pre] = weight;
        self.stp[post * self.n + pre] = stp;
        Ok(())
    }

    pub fn set_weight(&mut self, post: usize, pre: usize, weight: f64) -> Result<()> {
        let stp = self.stp(post, pre);
        self.set(post, pre, weight, stp)
    }

    /// Use the same STP parameters on every synapse.
    pub fn set_all_stp(&mut self, stp: StpParams) -> Result<()> {
        stp.validate()?;
        self.stp.fill(stp);
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        check_len(self.n * self.n, self.weights.len())?;
        check_len(self.n * self.n, self.stp.len())?;
        for k in 0..self.n {
            if self.weights[k * self.n + k] != 0.0 {
                return Err(invalid(format!("self-synapse on neuron {k}")));
            }
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("non-finite synaptic weight"));
        }
        self.stp.iter().try_for_each(StpParams::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifNetworkConfig {
    pub neurons: Vec<LifParams>,
    pub synapses: SynapseTable,
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    /// Per-neuron clamp, empty for a free network.
    #[serde(default, with = "clamp_serde")]
    pub clamp: Vec<Clamp>,
    /// Distance (mV) of a clamped neuron's mean free potential from threshold.
    #[serde(default = "default_clamp_offset")]
    pub clamp_offset: f64,
    pub dt: f64,
    /// Interval (ms) between recorded network states.
    pub sample_interval: f64,
    /// Run every synapse as static regardless of its STP parameters.
    #[serde(default)]
    pub disable_stp: bool,
}

fn default_clamp_offset() -> f64 {
    30.0
}

mod clamp_serde {
    use super::Clamp;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Clamp], s: S) -> Result<S::Ok, S::Error> {
        let text: String = v
            .iter()
            .map(|c| match c {
                Clamp::Free => '-',
                Clamp::Zero => '0',
                Clamp::One => '1',
            })
            .collect();
        s.serialize_str(&text)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Clamp>, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '-' => Ok(Clamp::Free),
                '0' => Ok(Clamp::Zero),
                '1' => Ok(Clamp::One),
                other => Err(serde::de::Error::custom(format!("bad clamp character {other:?}"))),
            })
            .collect()
    }
}

impl LifNetworkConfig {
    /// Unconnected neurons with shared parameters, 0.1 ms steps, 1 ms sampling.
    pub fn unconnected(n: usize, lif: LifParams, noise: NoiseConfig) -> Self {
        Self {
            neurons: vec![lif; n],
            synapses: SynapseTable::new(n),
            noise,
            calibration: None,
            clamp: Vec::new(),
            clamp_offset: default_clamp_offset(),
            dt: 0.1,
            sample_interval: 1.0,
            disable_stp: false,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.neurons.len();
        if n == 0 {
            return Err(Error::Empty("network without neurons"));
        }
        check_len(n, self.synapses.len())?;
        self.synapses.validate()?;
        self.neurons.iter().try_for_each(LifParams::validate)?;
        self.noise.validate()?;
        if !self.clamp.is_empty() {
            check_len(n, self.clamp.len())?;
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("time step must be positive"));
        }
        if !(self.sample_interval >= self.dt) {
            return Err(invalid("sampling interval shorter than the time step"));
        }
        if !(self.clamp_offset >= 0.0) {
            return Err(invalid("clamp offset must be non-negative"));
        }
        let kind = self.neurons[0].kind;
        if self.neurons.iter().any(|p| p.kind != kind) {
            return Err(invalid("mixed CUBA and COBA neurons"));
        }
        if self.neurons.iter().any(|p| self.dt > p.tau_syn / 10.0) {
            log::warn!("time step {} ms exceeds a tenth of the synaptic time constant", self.dt);
        }
        Ok(())
    }

    /// Use the same STP parameters on every synapse.
    pub fn with_stp(mut self, stp: StpParams) -> Result<Self> {
        self.synapses.set_all_stp(stp)?;
        Ok(self)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Force neurons on or off by strong current injection; free entries are untouched.
pub fn clamp(config: &LifNetworkConfig, mask: &ClampMask) -> Result<LifNetworkConfig> {
    check_len(config.n_neurons(), mask.len())?;
    let mut out = config.clone();
    out.clamp = mask.0.clone();
    Ok(out)
}

/// Spike times (ms) per neuron, each list ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeTrains {
    trains: Vec<Vec<f64>>,
}

impl SpikeTrains {
    pub fn new(n: usize) -> Self {
        Self { trains: vec![Vec::new(); n] }
    }

    pub fn from_trains(trains: Vec<Vec<f64>>) -> Result<Self> {
        for t in &trains {
            if t.windows(2).any(|w| w[1] < w[0]) || t.iter().any(|x| !x.is_finite()) {
                return Err(invalid("spike times must be finite and ascending"));
            }
        }
        Ok(Self { trains })
    }

    pub fn n_neurons(&self) -> usize {
        self.trains.len()
    }

    pub fn train(&self, k: usize) -> &[f64] {
        &self.trains[k]
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().map(Vec::len).sum()
    }

    fn push(&mut self, k: usize, t: f64) {
        self.trains[k].push(t);
    }

    /// One `neuron_id time_ms` line per spike, ordered by time then neuron.
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut all: Vec<(f64, usize)> =
            self.trains.iter().enumerate().flat_map(|(k, ts)| ts.iter().map(move |&t| (t, k))).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (t, k) in all {
            writeln!(w, "{k} {t}")?;
        }
        Ok(())
    }

    pub fn read_text<R: std::io::BufRead>(r: R, n: usize) -> Result<Self> {
        let mut trains = vec![Vec::new(); n];
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("spike line {}: {line:?}", lineno + 1));
            let mut f = line.split_whitespace();
            let k: usize = f.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let t: f64 = f.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            if f.next().is_some() || k >= n {
                return Err(bad());
            }
            trains[k].push(t);
        }
        for t in &mut trains {
            t.sort_by(f64::total_cmp);
        }
        Self::from_trains(trains)
    }
}

/// `z_k(t) = 1` iff `t ∈ [t_s, t_s + τ_ref)` for some spike `t_s` of neuron `k`.
pub fn extract_states(spikes: &SpikeTrains, tau_ref: f64, sample_times: &[f64]) -> Result<SampleTrace> {
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("sample times must be sorted"));
    }
    let n = spikes.n_neurons();
    let mut cursor = vec![0usize; n];
    let mut trace = SampleTrace::with_capacity(n, sample_times.len());
    let mut z = vec![0u8; n];
    for &t in sample_times {
        for k in 0..n {
            let train = spikes.train(k);
            // advance past spikes whose window closed before t
            while cursor[k] < train.len() && train[cursor[k]] + tau_ref <= t {
                cursor[k] += 1;
            }
            z[k] = train.get(cursor[k]).is_some_and(|&s| s <= t) as u8;
        }
        trace.push(t, true, &z)?;
    }
    Ok(trace)
}

struct Efferent {
    post: u32,
    class: u32,
    weight: f64,
}

struct StpClass {
    params: StpParams,
    state: SynapseState,
    /// Efficacy is reported relative to the resting value `U₀`.
    scale: f64,
    is_static: bool,
}

/// Stateful network simulation owning its random stream.
pub struct LifSimulator {
    cfg: LifNetworkConfig,
    kind: ModelKind,
    n: usize,
    step: u64,
    dt: f64,
    // per-neuron constants
    e_leak: Vec<f64>,
    g_leak: Vec<f64>,
    c_m: Vec<f64>,
    membrane_decay: Vec<f64>,
    syn_decay: Vec<f64>,
    v_thresh: Vec<f64>,
    v_reset: Vec<f64>,
    ref_steps: Vec<u64>,
    clamp_current: Vec<f64>,
    e_exc: Vec<f64>,
    e_inh: Vec<f64>,
    // dynamic state
    u: Vec<f64>,
    /// CUBA: total synaptic current. COBA: excitatory conductance.
    syn_a: Vec<f64>,
    /// COBA only: inhibitory conductance.
    syn_b: Vec<f64>,
    refractory: Vec<u64>,
    last_spike_step: Vec<Option<u64>>,
    next_noise_exc: Vec<f64>,
    next_noise_inh: Vec<f64>,
    efferents: Vec<Vec<Efferent>>,
    stp_classes: Vec<Vec<StpClass>>,
    spikes: SpikeTrains,
    record_spikes: bool,
    spiked_now: Vec<usize>,
    noise_exc: Option<Exp<f64>>,
    noise_inh: Option<Exp<f64>>,
    eff_scratch: Vec<f64>,
    rng: SimRng,
}

impl LifSimulator {
    pub fn new(cfg: LifNetworkConfig, rng: SimRng) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_neurons();
        let dt = cfg.dt;
        let kind = cfg.neurons[0].kind;
        let noise = cfg.noise;
        let mk_exp = |rate: f64| if rate > 0.0 { Exp::new(rate).ok() } else { None };
        let noise_exc = mk_exp(noise.rate_exc);
        let noise_inh = mk_exp(noise.rate_inh);

        let mut efferents: Vec<Vec<Efferent>> = (0..n).map(|_| Vec::new()).collect();
        let mut stp_classes: Vec<Vec<StpClass>> = (0..n).map(|_| Vec::new()).collect();
        for pre in 0..n {
            for post in 0..n {
                let w = cfg.synapses.weight(post, pre);
                if w == 0.0 {
                    continue;
                }
                let params = if cfg.disable_stp { StpParams::static_synapse() } else { cfg.synapses.stp(post, pre) };
                let classes = &mut stp_classes[pre];
                let class = match classes.iter().position(|c| c.params == params) {
                    Some(c) => c,
                    None => {
                        classes.push(StpClass {
                            params,
                            state: SynapseState::rested(0.0),
                            scale: if params.u0 > 0.0 { 1.0 / params.u0 } else { 0.0 },
                            is_static: params.is_static(),
                        });
                        classes.len() - 1
                    }
                };
                efferents[pre].push(Efferent { post: post as u32, class: class as u32, weight: w });
            }
        }

        // drive that moves the mean free potential `clamp_offset` above or below threshold
        let clamp_current = (0..n)
            .map(|k| {
                let p = &cfg.neurons[k];
                let target = match cfg.clamp.get(k) {
                    Some(Clamp::One) => p.v_thresh + cfg.clamp_offset,
                    Some(Clamp::Zero) => p.v_thresh - cfg.clamp_offset,
                    _ => return 0.0,
                };
                match kind {
                    ModelKind::Cuba => p.g_leak() * (target - p.e_leak),
                    ModelKind::Coba => {
                        let g_e = noise.rate_exc * noise.weight_exc * p.tau_syn;
                        let g_i = noise.rate_inh * noise.weight_inh * p.tau_syn;
                        let g_tot = p.g_leak() + g_e + g_i;
                        g_tot * target - (p.g_leak() * p.e_leak + g_e * p.e_rev_exc + g_i * p.e_rev_inh)
                    }
                }
            })
            .collect();

        let p = &cfg.neurons;
        let mut sim = Self {
            kind,
            n,
            step: 0,
            dt,
            e_leak: p.iter().map(|p| p.e_leak).collect(),
            g_leak: p.iter().map(|p| p.g_leak()).collect(),
            c_m: p.iter().map(|p| p.c_m).collect(),
            membrane_decay: p.iter().map(|p| (-dt / p.tau_m).exp()).collect(),
            syn_decay: p.iter().map(|p| (-dt / p.tau_syn).exp()).collect(),
            v_thresh: p.iter().map(|p| p.v_thresh).collect(),
            v_reset: p.iter().map(|p| p.v_reset).collect(),
            ref_steps: p.iter().map(|p| ((p.tau_ref / dt).round() as u64).max(1)).collect(),
            clamp_current,
            e_exc: p.iter().map(|p| p.e_rev_exc).collect(),
            e_inh: p.iter().map(|p| p.e_rev_inh).collect(),
            u: p.iter().map(|p| p.e_leak.min(p.v_thresh)).collect(),
            syn_a: vec![0.0; n],
            syn_b: vec![0.0; n],
            refractory: vec![0; n],
            last_spike_step: vec![None; n],
            next_noise_exc: vec![f64::INFINITY; n],
            next_noise_inh: vec![f64::INFINITY; n],
            efferents,
            stp_classes,
            spikes: SpikeTrains::new(n),
            record_spikes: true,
            spiked_now: Vec::new(),
            noise_exc,
            noise_inh,
            cfg,
            eff_scratch: Vec::new(),
            rng,
        };
        for k in 0..n {
            if let Some(d) = &sim.noise_exc {
                sim.next_noise_exc[k] = d.sample(&mut sim.rng);
            }
            if let Some(d) = &sim.noise_inh {
                sim.next_noise_inh[k] = d.sample(&mut sim.rng);
            }
        }
        Ok(sim)
    }

    pub fn config(&self) -> &LifNetworkConfig {
        &self.cfg
    }

    /// Keep spike times in memory (default on).
    pub fn set_record_spikes(&mut self, on: bool) {
        self.record_spikes = on;
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn spikes(&self) -> &SpikeTrains {
        &self.spikes
    }

    pub fn take_spikes(&mut self) -> SpikeTrains {
        std::mem::replace(&mut self.spikes, SpikeTrains::new(self.n))
    }

    /// Membrane potentials (mV).
    pub fn potentials(&self) -> &[f64] {
        &self.u
    }

    /// CUBA: synaptic current (nA). COBA: excitatory conductance (µS).
    pub fn synaptic_drive(&self) -> &[f64] {
        &self.syn_a
    }

    /// Neurons that spiked during the last step.
    pub fn last_spikes(&self) -> &[usize] {
        &self.spiked_now
    }

    /// Binary state half a step before the current grid time.
    pub fn current_state(&self, out: &mut [u8]) {
        let now = self.step;
        for k in 0..self.n {
            out[k] = match self.last_spike_step[k] {
                Some(s) => (now - s >= 1 && now - s <= self.ref_steps[k]) as u8,
                None => 0,
            };
        }
    }

    pub fn advance(&mut self) {
        let n = self.n;
        self.step += 1;
        let t_end = self.step as f64 * self.dt;
        self.spiked_now.clear();

        for k in 0..n {
            if self.refractory[k] > 0 {
                self.refractory[k] -= 1;
                self.u[k] = self.v_reset[k];
                continue;
            }
            let u_inf;
            let decay;
            match self.kind {
                ModelKind::Cuba => {
                    u_inf = self.e_leak[k] + (self.syn_a[k] + self.clamp_current[k]) / self.g_leak[k];
                    decay = self.membrane_decay[k];
                }
                ModelKind::Coba => {
                    let gl = self.g_leak[k];
                    let ge = self.syn_a[k];
                    let gi = self.syn_b[k];
                    let g_tot = gl + ge + gi;
                    u_inf = (gl * self.e_leak[k] + ge * self.e_exc[k] + gi * self.e_inh[k] + self.clamp_current[k])
                        / g_tot;
                    decay = (-self.dt * g_tot / self.c_m[k]).exp();
                }
            }
            let u = u_inf + (self.u[k] - u_inf) * decay;
            if u >= self.v_thresh[k] {
                self.u[k] = self.v_reset[k];
                self.refractory[k] = self.ref_steps[k] - 1;
                self.last_spike_step[k] = Some(self.step);
                self.spiked_now.push(k);
                if self.record_spikes {
                    self.spikes.push(k, t_end);
                }
            } else {
                self.u[k] = u;
            }
        }

        for k in 0..n {
            self.syn_a[k] *= self.syn_decay[k];
        }
        if self.kind == ModelKind::Coba {
            for k in 0..n {
                self.syn_b[k] *= self.syn_decay[k];
            }
        }

        let noise = self.cfg.noise;
        if let Some(d) = self.noise_exc {
            for k in 0..n {
                while self.next_noise_exc[k] <= t_end {
                    self.syn_a[k] += noise.weight_exc;
                    self.next_noise_exc[k] += d.sample(&mut self.rng);
                }
            }
        }
        if let Some(d) = self.noise_inh {
            for k in 0..n {
                while self.next_noise_inh[k] <= t_end {
                    match self.kind {
                        ModelKind::Cuba => self.syn_a[k] -= noise.weight_inh,
                        ModelKind::Coba => self.syn_b[k] += noise.weight_inh,
                    }
                    self.next_noise_inh[k] += d.sample(&mut self.rng);
                }
            }
        }

        for idx in 0..self.spiked_now.len() {
            let pre = self.spiked_now[idx];
            self.eff_scratch.clear();
            for class in self.stp_classes[pre].iter_mut() {
                let e = if class.is_static {
                    1.0
                } else {
                    let (s, e) = stp_spike_at(class.state, &class.params, t_end);
                    class.state = s;
                    e * class.scale
                };
                self.eff_scratch.push(e);
            }
            for syn in &self.efferents[pre] {
                let amount = syn.weight * self.eff_scratch[syn.class as usize];
                let post = syn.post as usize;
                match self.kind {
                    ModelKind::Cuba => self.syn_a[post] += amount,
                    ModelKind::Coba => {
                        if amount >= 0.0 {
                            self.syn_a[post] += amount;
                        } else {
                            self.syn_b[post] -= amount;
                        }
                    }
                }
            }
        }
    }

    pub fn advance_by(&mut self, steps: u64) {
        for _ in 0..steps {
            self.advance();
        }
    }

    /// Advance until the grid time reaches `time` (ms).
    pub fn run_until(&mut self, time: f64) {
        let target = (time / self.dt).round() as u64;
        while self.step < target {
            self.advance();
        }
    }
}

/// Emits the network state every `sample_interval`, half a step before the grid point.
pub struct LifSampler {
    sim: LifSimulator,
    steps_per_sample: u64,
    scratch: Vec<u8>,
}

impl LifSampler {
    pub fn new(cfg: LifNetworkConfig, rng: SimRng) -> Result<Self> {
        let steps_per_sample = (cfg.sample_interval / cfg.dt).round() as u64;
        let n = cfg.n_neurons();
        let mut sim = LifSimulator::new(cfg, rng)?;
        sim.set_record_spikes(false);
        Ok(Self { sim, steps_per_sample: steps_per_sample.max(1), scratch: vec![0; n] })
    }

    pub fn simulator(&self) -> &LifSimulator {
        &self.sim
    }

    pub fn simulator_mut(&mut self) -> &mut LifSimulator {
        &mut self.sim
    }

    /// Run without recording, e.g. to let the network settle.
    pub fn burn_in(&mut self, duration: f64) {
        let steps = (duration / self.sim.dt).round() as u64;
        self.sim.advance_by(steps);
    }
}

impl Sampler for LifSampler {
    fn n_units(&self) -> usize {
        self.sim.n
    }

    fn step_into(&mut self, trace: &mut SampleTrace) -> Result<()> {
        self.sim.advance_by(self.steps_per_sample);
        self.sim.current_state(&mut self.scratch);
        let t = self.sim.time() - 0.5 * self.sim.dt;
        trace.push(t, true, &self.scratch)
    }
}

/// Run `config` for `duration` ms; returns the spikes and the states sampled
/// every `sample_interval`.
pub fn simulate(config: &LifNetworkConfig, duration: f64, rng: &mut SimRng) -> Result<(SpikeTrains, SampleTrace)> {
    if !(duration >= 0.0) {
        return Err(invalid("duration must be non-negative"));
    }
    let mut sim = LifSimulator::new(config.clone(), SimRng::from_rng(rng))?;
    let total = (duration / config.dt).round() as u64;
    sim.advance_by(total);
    let spikes = sim.take_spikes();
    let steps_per_sample = ((config.sample_interval / config.dt).round() as u64).max(1);
    let times: Vec<f64> = (1..)
        .map(|m| m * steps_per_sample)
        .take_while(|&k| k <= total)
        .map(|k| k as f64 * config.dt - 0.5 * config.dt)
        .collect();
    let tau_ref = config.neurons.iter().map(|p| p.tau_ref).fold(0.0, f64::max);
    if config.neurons.iter().any(|p| p.tau_ref != tau_ref) {
        return Err(invalid("state extraction needs a common refractory period"));
    }
    let trace = extract_states(&spikes, tau_ref, &times)?;
    Ok((spikes, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn quiet_neuron() -> LifNetworkConfig {
        let mut lif = LifParams::cuba();
        lif.e_leak = -60.0;
        LifNetworkConfig::unconnected(1, lif, NoiseConfig::silent())
    }

    #[test]
    fn silent_neuron_relaxes_to_leak() {
        let mut sim = LifSimulator::new(quiet_neuron(), seeded(0)).unwrap();
        sim.advance_by(1000);
        assert_eq!(sim.spikes().total_spikes(), 0);
        assert!((sim.potentials()[0] + 60.0).abs() < 1e-9);
    }

    #[test]
    fn clamped_on_neuron_fires_every_refractory_period() {
        let cfg = clamp(&quiet_neuron(), &ClampMask(vec![Clamp::One])).unwrap();
        let (spikes, trace) = simulate(&cfg, 200.0, &mut seeded(0)).unwrap();
        let t = spikes.train(0);
        assert!(t.len() >= 19);
        for w in t.windows(2) {
            assert!((w[1] - w[0] - 10.0).abs() < 1e-9);
        }
        let ones = trace.iter().filter(|(_, _, z)| z[0] == 1).count();
        assert!(ones >= trace.len() - 1);
    }

    #[test]
    fn clamped_off_neuron_stays_silent() {
        let mut lif = LifParams::cuba();
        lif.e_leak = -45.0;
        let cfg = LifNetworkConfig::unconnected(2, lif, NoiseConfig::cuba_default());
        let cfg = clamp(&cfg, &ClampMask(vec![Clamp::Zero, Clamp::Free])).unwrap();
        let (spikes, _) = simulate(&cfg, 2000.0, &mut seeded(1)).unwrap();
        assert_eq!(spikes.train(0).len(), 0);
        assert!(spikes.train(1).len() > 50);
    }

    #[test]
    fn clamp_rejects_wrong_length() {
        assert!(clamp(&quiet_neuron(), &ClampMask(vec![Clamp::One, Clamp::One])).is_err());
    }

    #[test]
    fn extract_states_half_open_window() {
        let spikes = SpikeTrains::from_trains(vec![vec![100.0]]).unwrap();
        let trace = extract_states(&spikes, 10.0, &[99.9, 100.0, 105.0, 109.99, 110.0]).unwrap();
        let z: Vec<u8> = trace.iter().map(|(_, _, z)| z[0]).collect();
        assert_eq!(z, vec![0, 1, 1, 1, 0]);
        let empty = extract_states(&SpikeTrains::new(3), 10.0, &[1.0, 2.0]).unwrap();
        assert!(empty.iter().all(|(_, _, z)| z.iter().all(|&b| b == 0)));
    }

    #[test]
    fn extract_states_matches_naive_scan() {
        let mut rng = seeded(9);
        let trains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut t = 0.0;
                (0..50)
                    .map(|_| {
                        t += rng.random_range(0.5..30.0);
                        t
                    })
                    .collect()
            })
            .collect();
        let spikes = SpikeTrains::from_trains(trains.clone()).unwrap();
        let times: Vec<f64> = (0..3000).map(|i| i as f64 * 0.37).collect();
        let trace = extract_states(&spikes, 10.0, &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            for (k, tr) in trains.iter().enumerate() {
                let naive = tr.iter().any(|&s| s <= t && t < s + 10.0) as u8;
                assert_eq!(trace.state(i)[k], naive);
            }
        }
    }

    #[test]
    fn sampler_matches_extracted_states() {
        let mut lif = LifParams::cuba();
        lif.e_leak = -50.5;
        let mut cfg = LifNetworkConfig::unconnected(3, lif, NoiseConfig::cuba_default());
        cfg.synapses.set_weight(0, 1, 2.0).unwrap();
        cfg.synapses.set_weight(1, 0, 2.0).unwrap();
        cfg.synapses.set_weight(2, 1, -3.0).unwrap();
        let (_, expected) = simulate(&cfg, 500.0, &mut seeded(3)).unwrap();
        let mut sampler = LifSampler::new(cfg, SimRng::from_rng(&mut seeded(3))).unwrap();
        let got = sampler.collect(expected.len()).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn spike_text_round_trip() {
        let spikes = SpikeTrains::from_trains(vec![vec![0.1, 12.5], vec![], vec![3.0]]).unwrap();
        let mut buf = Vec::new();
        spikes.write_text(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0 0.1\n2 3\n0 12.5\n");
        assert_eq!(SpikeTrains::read_text(&buf[..], 3).unwrap(), spikes);
        assert!(SpikeTrains::read_text(&b"5 1.0\n"[..], 3).is_err());
    }

    fn random_network(stp: StpParams) -> LifNetworkConfig {
        let mut rng = seeded(17);
        let mut lif = LifParams::cuba();
        lif.e_leak = -50.8;
        let mut cfg = LifNetworkConfig::unconnected(6, lif, NoiseConfig::cuba_default());
        for post in 0..6 {
            for pre in 0..6 {
                if post != pre {
                    cfg.synapses.set(post, pre, rng.random_range(-3.0..3.0), stp).unwrap();
                }
            }
        }
        cfg
    }

    #[test]
    fn static_synapses_match_disabled_stp() {
        let a = random_network(StpParams::static_synapse());
        let mut b = a.clone();
        b.disable_stp = true;
        let (sa, ta) = simulate(&a, 2000.0, &mut seeded(5)).unwrap();
        let (sb, tb) = simulate(&b, 2000.0, &mut seeded(5)).unwrap();
        assert!(sa.total_spikes() > 100);
        assert_eq!(sa, sb);
        assert_eq!(ta, tb);
    }

    #[test]
    fn identical_seed_identical_spikes() {
        let cfg = random_network(StpParams::renewing(10.0));
        let a = simulate(&cfg, 1000.0, &mut seeded(2)).unwrap().0;
        let b = simulate(&cfg, 1000.0, &mut seeded(2)).unwrap().0;
        let c = simulate(&cfg, 1000.0, &mut seeded(3)).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    /// Peak synaptic current of a target driven by a τ_ref-periodic burst.
    fn burst_peaks(stp: StpParams, n_spikes: usize) -> Vec<f64> {
        let mut lif = LifParams::cuba();
        lif.e_leak = -80.0;
        let mut cfg = LifNetworkConfig::unconnected(2, lif, NoiseConfig::silent());
        cfg.synapses.set(1, 0, 1.0, stp).unwrap();
        let cfg = clamp(&cfg, &ClampMask(vec![Clamp::One, Clamp::Free])).unwrap();
        let mut sim = LifSimulator::new(cfg, seeded(0)).unwrap();
        let mut peaks = Vec::new();
        let mut running: f64 = 0.0;
        while peaks.len() < n_spikes {
            sim.advance();
            if sim.last_spikes().contains(&0) {
                running = running.max(sim.synaptic_drive()[1]);
                peaks.push(running);
            }
        }
        peaks
    }

    #[test]
    fn renewing_synapse_keeps_running_maximum_bounded() {
        let renewing = burst_peaks(StpParams::renewing(10.0), 20);
        let fixed = burst_peaks(StpParams::static_synapse(), 20);
        let limit = 1.0 / (1.0 - (-1.0f64).exp());
        assert!(renewing.iter().all(|&p| p <= 1.0 + 1e-9), "{renewing:?}");
        assert!(fixed[19] > 0.99 * limit && fixed[19] <= limit + 1e-9, "{fixed:?}");
    }

    #[test]
    fn config_toml_round_trip() {
        let mut cfg = random_network(StpParams::new(0.3, 15.0, 2.0).unwrap());
        cfg.clamp = vec![Clamp::Free, Clamp::One, Clamp::Zero, Clamp::Free, Clamp::Free, Clamp::Free];
        let text = cfg.to_toml().unwrap();
        assert_eq!(LifNetworkConfig::from_toml(&text).unwrap(), cfg);
    }
}
