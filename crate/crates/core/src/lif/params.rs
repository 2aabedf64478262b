use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Current-based synapses.
    Cuba,
    /// Conductance-based synapses.
    Coba,
}

/// Single-neuron parameters. Units: nF, ms, mV; conductances in µS and
/// currents in nA follow from these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    pub c_m: f64,
    pub tau_m: f64,
    pub tau_ref: f64,
    pub tau_syn: f64,
    pub v_thresh: f64,
    pub v_reset: f64,
    pub e_leak: f64,
    pub kind: ModelKind,
    pub e_rev_exc: f64,
    pub e_rev_inh: f64,
}

impl LifParams {
    /// Effective current-based neuron.
    pub fn cuba() -> Self {
        Self {
            c_m: 0.2,
            tau_m: 0.1,
            tau_ref: 10.0,
            tau_syn: 10.0,
            v_thresh: -50.0,
            v_reset: -50.01,
            e_leak: -50.0,
            kind: ModelKind::Cuba,
            e_rev_exc: 0.0,
            e_rev_inh: -100.0,
        }
    }

    /// Conductance-based neuron for the high-conductance regime.
    pub fn coba() -> Self {
        Self {
            c_m: 0.1,
            tau_m: 20.0,
            tau_ref: 10.0,
            tau_syn: 10.0,
            v_thresh: -50.0,
            v_reset: -53.0,
            e_leak: -65.0,
            kind: ModelKind::Coba,
            e_rev_exc: 0.0,
            e_rev_inh: -100.0,
        }
    }

    /// Leak conductance `C_m / τ_m` (µS).
    pub fn g_leak(&self) -> f64 {
        self.c_m / self.tau_m
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.c_m, self.tau_m, self.tau_ref, self.tau_syn, self.v_thresh, self.v_reset, self.e_leak,
            self.e_rev_exc, self.e_rev_inh,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("non-finite neuron parameter"));
        }
        if !(self.c_m > 0.0 && self.tau_m > 0.0 && self.tau_ref > 0.0 && self.tau_syn > 0.0) {
            return Err(invalid("capacitance and time constants must be positive"));
        }
        if self.v_reset > self.v_thresh {
            return Err(invalid("reset potential above threshold"));
        }
        if self.kind == ModelKind::Coba && self.e_rev_inh >= self.e_rev_exc {
            return Err(invalid("inhibitory reversal potential must lie below the excitatory one"));
        }
        Ok(())
    }
}

/// Balanced excitatory and inhibitory Poisson background.
///
/// Rates are in kHz. Weights are peak currents (nA) for current-based
/// neurons and peak conductances (µS) for conductance-based ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub rate_exc: f64,
    pub rate_inh: f64,
    pub weight_exc: f64,
    pub weight_inh: f64,
}

impl NoiseConfig {
    /// 0.4 kHz per channel with 1.5 nA kicks, a free-membrane spread of about 1.5 mV.
    pub fn cuba_default() -> Self {
        Self { rate_exc: 0.4, rate_inh: 0.4, weight_exc: 1.5, weight_inh: 1.5 }
    }

    /// 5 kHz per channel, placing the neuron in a high-conductance state.
    pub fn coba_default() -> Self {
        Self { rate_exc: 5.0, rate_inh: 5.0, weight_exc: 0.001, weight_inh: 0.0012 }
    }

    pub fn silent() -> Self {
        Self { rate_exc: 0.0, rate_inh: 0.0, weight_exc: 0.0, weight_inh: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.rate_exc, self.rate_inh, self.weight_exc, self.weight_inh]
            .iter()
            .all(|x| x.is_finite() && *x >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(invalid("noise rates and weights must be finite and non-negative"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        LifParams::cuba().validate().unwrap();
        LifParams::coba().validate().unwrap();
        assert!((LifParams::cuba().g_leak() - 2.0).abs() < 1e-12);
        assert!((LifParams::coba().g_leak() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut p = LifParams::cuba();
        p.v_reset = -40.0;
        assert!(p.validate().is_err());
        let mut p = LifParams::cuba();
        p.tau_syn = 0.0;
        assert!(p.validate().is_err());
        let mut n = NoiseConfig::cuba_default();
        n.rate_inh = -1.0;
        assert!(n.validate().is_err());
    }
}
