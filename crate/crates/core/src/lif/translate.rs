//! Mapping of Boltzmann parameters onto LIF networks.
//!
//! A synaptic weight is chosen so that the mean membrane deflection it causes
//! over one refractory period, scaled by the calibrated slope, equals the
//! Boltzmann weight. Biases become shifts of the leak potential.

use serde::{Deserialize, Serialize};

use super::calibration::Calibration;
use super::network::{clamp, LifNetworkConfig, LifSampler, SynapseTable};
use super::params::{LifParams, ModelKind};
use super::stp::StpParams;
use crate::boltzmann::BoltzmannMachine;
use crate::error::{invalid, Result};
use crate::rng::SimRng;
use crate::state::ClampMask;

/// Mean over `[0, τ_ref)` of the membrane deflection caused by a PSC of unit
/// peak, in units of `1/C_m` (ms).
pub fn mean_psp_factor(tau_syn: f64, tau_eff: f64, tau_ref: f64) -> f64 {
    let rel = (tau_syn - tau_eff).abs() / tau_syn.max(tau_eff);
    let integral = if rel < 1e-9 {
        // equal time constants: t·e^{−t/τ} kernel
        let tau = 0.5 * (tau_syn + tau_eff);
        tau * tau * (1.0 - (-tau_ref / tau).exp() * (1.0 + tau_ref / tau))
    } else {
        let a = tau_syn * (-(-tau_ref / tau_syn).exp_m1());
        let b = tau_eff * (-(-tau_ref / tau_eff).exp_m1());
        tau_syn * tau_eff / (tau_syn - tau_eff) * (a - b)
    };
    integral / tau_ref
}

/// Effective membrane time constant, driving-force reference potential and
/// the ratio of total to leak conductance at the calibration midpoint.
fn operating_point(lif: &LifParams, cal: &Calibration) -> (f64, f64, f64) {
    match lif.kind {
        ModelKind::Cuba => (lif.tau_m, cal.midpoint(), 1.0),
        ModelKind::Coba => {
            let g_l = lif.g_leak();
            let g_e = cal.noise.rate_exc * cal.noise.weight_exc * lif.tau_syn;
            let g_i = cal.noise.rate_inh * cal.noise.weight_inh * lif.tau_syn;
            let g_tot = g_l + g_e + g_i;
            let mu = (g_l * cal.midpoint() + g_e * lif.e_rev_exc + g_i * lif.e_rev_inh) / g_tot;
            (lif.c_m / g_tot, mu, g_tot / g_l)
        }
    }
}

/// Synaptic weight for Boltzmann weight `w`: a current (nA) for CUBA, a
/// signed conductance (µS) for COBA.
pub fn synaptic_weight(w: f64, cal: &Calibration, lif: &LifParams) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    let (tau_eff, mu, g_ratio) = operating_point(lif, cal);
    // the calibration slope is per mV of leak potential; the membrane moves
    // g_l/g_tot mV per mV of leak
    let alpha_u = cal.alpha * g_ratio;
    let current = w * lif.c_m / (alpha_u * mean_psp_factor(lif.tau_syn, tau_eff, lif.tau_ref));
    match lif.kind {
        ModelKind::Cuba => current,
        ModelKind::Coba => {
            if current > 0.0 {
                current / (lif.e_rev_exc - mu)
            } else {
                -(current / (lif.e_rev_inh - mu))
            }
        }
    }
}

/// Static synapses, 0.1 ms steps and 1 ms state sampling.
pub fn translate(machine: &BoltzmannMachine, cal: &Calibration, lif: &LifParams) -> Result<LifNetworkConfig> {
    lif.validate()?;
    cal.noise.validate()?;
    if !(cal.alpha > 0.0 && cal.alpha.is_finite() && cal.beta_shift.is_finite()) {
        return Err(invalid("calibration slope must be positive and finite"));
    }
    let n = machine.n_units();
    let mut cfg = LifNetworkConfig::unconnected(n, *lif, cal.noise);
    for (k, p) in cfg.neurons.iter_mut().enumerate() {
        p.e_leak = cal.leak_for_bias(machine.bias(k));
    }
    let mut syn = SynapseTable::new(n);
    for post in 0..n {
        for pre in 0..n {
            if post != pre {
                syn.set_weight(post, pre, synaptic_weight(machine.weight(post, pre), cal, lif))?;
            }
        }
    }
    cfg.synapses = syn;
    cfg.calibration = Some(cal.clone());
    Ok(cfg)
}

/// Everything needed to turn a Boltzmann machine into a sampling network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifSetup {
    pub lif: LifParams,
    pub calibration: Calibration,
    pub stp: StpParams,
    pub dt: f64,
    pub sample_interval: f64,
}

impl LifSetup {
    pub fn new(lif: LifParams, calibration: Calibration, stp: StpParams) -> Self {
        Self { lif, calibration, stp, dt: 0.1, sample_interval: 1.0 }
    }

    pub fn with_sample_interval(mut self, ms: f64) -> Self {
        self.sample_interval = ms;
        self
    }

    pub fn with_stp(mut self, stp: StpParams) -> Self {
        self.stp = stp;
        self
    }

    pub fn network(&self, machine: &BoltzmannMachine) -> Result<LifNetworkConfig> {
        let mut cfg = translate(machine, &self.calibration, &self.lif)?.with_stp(self.stp)?;
        cfg.dt = self.dt;
        cfg.sample_interval = self.sample_interval;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sampler over all units; a short mask clamps the leading units.
    pub fn sampler(&self, machine: &BoltzmannMachine, mask: Option<&ClampMask>, rng: SimRng) -> Result<LifSampler> {
        let mut cfg = self.network(machine)?;
        if let Some(mask) = mask {
            cfg = clamp(&cfg, &mask.padded(machine.n_units())?)?;
        }
        LifSampler::new(cfg, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lif::params::NoiseConfig;

    fn cal() -> Calibration {
        Calibration { alpha: 1.2, beta_shift: 1.2 * -52.0, residual_rms: 0.0, noise: NoiseConfig::cuba_default(), points: vec![] }
    }

    /// Trapezoid integral of the double-exponential PSP kernel.
    fn numeric_factor(ts: f64, te: f64, tr: f64) -> f64 {
        let steps = 200_000;
        let h = tr / steps as f64;
        // v' = −v/τe + e^{−t/τs}, integrated with small RK4 steps
        let f = |t: f64, v: f64| -v / te + (-t / ts).exp();
        let (mut v, mut sum) = (0.0f64, 0.0f64);
        for i in 0..steps {
            let t = i as f64 * h;
            let k1 = f(t, v);
            let k2 = f(t + h / 2.0, v + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, v + h / 2.0 * k2);
            let k4 = f(t + h, v + h * k3);
            let next = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            sum += 0.5 * (v + next) * h;
            v = next;
        }
        sum / tr
    }

    #[test]
    fn psp_factor_matches_ode() {
        for &(ts, te, tr) in &[(10.0, 0.1, 10.0), (10.0, 3.0, 10.0), (5.0, 20.0, 10.0), (10.0, 10.0, 10.0)] {
            let a = mean_psp_factor(ts, te, tr);
            let b = numeric_factor(ts, te, tr);
            assert!((a - b).abs() < 1e-6 * b, "{ts} {te}: {a} vs {b}");
        }
    }

    #[test]
    fn psp_factor_is_continuous_at_equal_constants() {
        let at = mean_psp_factor(10.0, 10.0, 10.0);
        let near = mean_psp_factor(10.0, 10.0 + 1e-6, 10.0);
        assert!((at - near).abs() < 1e-6 * at);
    }

    #[test]
    fn zero_weight_and_zero_bias() {
        let lif = LifParams::cuba();
        let mut m = BoltzmannMachine::zeros(3);
        m.set_weight(0, 2, -0.4).unwrap();
        let cfg = translate(&m, &cal(), &lif).unwrap();
        assert_eq!(cfg.synapses.weight(0, 1), 0.0);
        assert!(cfg.synapses.weight(0, 2) < 0.0);
        assert_eq!(cfg.synapses.weight(0, 2), cfg.synapses.weight(2, 0));
        for p in &cfg.neurons {
            assert!((p.e_leak - cal().midpoint()).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_reproduces_mean_deflection() {
        let lif = LifParams::cuba();
        let c = cal();
        let w = 0.7;
        let big_w = synaptic_weight(w, &c, &lif);
        let deflection = big_w / lif.c_m * mean_psp_factor(lif.tau_syn, lif.tau_m, lif.tau_ref);
        assert!((c.alpha * deflection - w).abs() < 1e-12);
    }

    #[test]
    fn coba_sign_selects_pathway() {
        let lif = LifParams::coba();
        let c = Calibration { alpha: 3.0, beta_shift: 3.0 * -55.0, residual_rms: 0.0, noise: NoiseConfig::coba_default(), points: vec![] };
        assert!(synaptic_weight(0.5, &c, &lif) > 0.0);
        assert!(synaptic_weight(-0.5, &c, &lif) < 0.0);
    }
}
