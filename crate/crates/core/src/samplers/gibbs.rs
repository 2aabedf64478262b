use rand::Rng;

use super::{RbmLayout, Sampler};
use crate::boltzmann::BoltzmannMachine;
use crate::error::{check_len, Result};
use crate::rng::SimRng;
use crate::state::{BinaryState, Clamp, ClampMask, SampleTrace};
use crate::textfmt::stable_sigmoid;

/// Order in which a sweep visits the units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepSchedule {
    /// Every unit once, ascending index.
    Sequential,
    /// Hidden block given the visible side, then the visible side given hidden.
    Bipartite(RbmLayout),
}

impl SweepSchedule {
    pub(crate) fn sweep<R: Rng + ?Sized>(
        &self,
        machine: &BoltzmannMachine,
        bits: &mut [u8],
        beta: f64,
        clamp: &[Clamp],
        rng: &mut R,
    ) {
        match self {
            SweepSchedule::Sequential => sequential(machine, bits, beta, clamp, 0..bits.len(), rng),
            SweepSchedule::Bipartite(layout) => {
                bipartite_half(machine, bits, beta, clamp, layout.hidden(), layout.visible_side(), rng);
                bipartite_half(machine, bits, beta, clamp, layout.visible_side(), layout.hidden(), rng);
            }
        }
    }
}

fn is_clamped(clamp: &[Clamp], k: usize) -> bool {
    clamp.get(k).is_some_and(|c| *c != Clamp::Free)
}

fn sequential<R: Rng + ?Sized>(
    machine: &BoltzmannMachine,
    bits: &mut [u8],
    beta: f64,
    clamp: &[Clamp],
    units: std::ops::Range<usize>,
    rng: &mut R,
) {
    for k in units {
        if is_clamped(clamp, k) {
            continue;
        }
        let p = stable_sigmoid(beta * machine.local_field(bits, k));
        bits[k] = (rng.random::<f64>() < p) as u8;
    }
}

/// Resample `targets` given `sources`; only cross-block weights are read.
fn bipartite_half<R: Rng + ?Sized>(
    machine: &BoltzmannMachine,
    bits: &mut [u8],
    beta: f64,
    clamp: &[Clamp],
    targets: std::ops::Range<usize>,
    sources: std::ops::Range<usize>,
    rng: &mut R,
) {
    let active: Vec<usize> = sources.filter(|&i| bits[i] != 0).collect();
    for k in targets {
        if is_clamped(clamp, k) {
            continue;
        }
        let row = machine.row(k);
        let field = machine.bias(k) + active.iter().map(|&i| row[i]).sum::<f64>();
        let p = stable_sigmoid(beta * field);
        bits[k] = (rng.random::<f64>() < p) as u8;
    }
}

/// One sequential Gibbs sweep in ascending unit order.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    machine: &BoltzmannMachine,
    state: &mut BinaryState,
    inv_temperature: f64,
    rng: &mut R,
) -> Result<()> {
    check_len(machine.n_units(), state.len())?;
    SweepSchedule::Sequential.sweep(machine, state.bits_mut(), inv_temperature, &[], rng);
    Ok(())
}

/// One block sweep of a bipartite machine: hidden first, then visible and label units.
pub fn block_gibbs_sweep<R: Rng + ?Sized>(
    machine: &BoltzmannMachine,
    layout: &RbmLayout,
    state: &mut BinaryState,
    inv_temperature: f64,
    rng: &mut R,
) -> Result<()> {
    layout.check(machine)?;
    check_len(machine.n_units(), state.len())?;
    SweepSchedule::Bipartite(*layout).sweep(machine, state.bits_mut(), inv_temperature, &[], rng);
    Ok(())
}

/// A persistent Gibbs chain that records the state after every sweep.
#[derive(Debug, Clone)]
pub struct GibbsSampler<'a> {
    machine: &'a BoltzmannMachine,
    schedule: SweepSchedule,
    inv_temperature: f64,
    clamp: Vec<Clamp>,
    state: BinaryState,
    sweeps: u64,
    rng: SimRng,
}

impl<'a> GibbsSampler<'a> {
    /// Starts from a uniformly random state drawn from `rng`.
    pub fn new(machine: &'a BoltzmannMachine, schedule: SweepSchedule, mut rng: SimRng) -> Result<Self> {
        if let SweepSchedule::Bipartite(layout) = &schedule {
            layout.check(machine)?;
        }
        let state = BinaryState::random(machine.n_units(), &mut rng);
        Ok(Self {
            machine,
            schedule,
            inv_temperature: 1.0,
            clamp: Vec::new(),
            state,
            sweeps: 0,
            rng,
        })
    }

    pub fn with_inv_temperature(mut self, beta: f64) -> Self {
        self.inv_temperature = beta;
        self
    }

    /// Clamp the leading units; the mask is padded with free entries.
    pub fn with_clamp(mut self, mask: &ClampMask) -> Result<Self> {
        let full = mask.padded(self.machine.n_units())?;
        full.apply(self.state.bits_mut());
        self.clamp = full.0;
        Ok(self)
    }

    pub fn with_state(mut self, state: BinaryState) -> Result<Self> {
        check_len(self.machine.n_units(), state.len())?;
        self.state = state;
        ClampMask(self.clamp.clone()).apply(self.state.bits_mut());
        Ok(self)
    }

    pub fn state(&self) -> &BinaryState {
        &self.state
    }

    pub fn sweep(&mut self) {
        self.schedule
            .sweep(self.machine, self.state.bits_mut(), self.inv_temperature, &self.clamp, &mut self.rng);
        self.sweeps += 1;
    }
}

impl Sampler for GibbsSampler<'_> {
    fn n_units(&self) -> usize {
        self.machine.n_units()
    }

    fn step_into(&mut self, trace: &mut SampleTrace) -> Result<()> {
        self.sweep();
        trace.push(self.sweeps as f64, true, self.state.bits())
    }
}
