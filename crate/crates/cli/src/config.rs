//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spikemix_core::datasets::{BarsMode, Half};
use spikemix_core::lif::{ModelKind, StpParams};
use spikemix_core::samplers::{RateSchedule, RbmLayout, TrainingSchedule};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SampleTarget,
    Train,
    Generate,
    Classify,
    SweepStp,
    PatternComplete,
    Calibrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Valid samples per run.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Trailing window (in samples) used to assign modes.
    #[serde(default = "default_window")]
    pub mode_window: usize,
    /// Write the full sample trace next to the metrics.
    #[serde(default)]
    pub write_trace: bool,
    #[serde(default)]
    pub layout: Option<LayoutSpec>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub machine: Option<MachineSpec>,
    #[serde(default)]
    pub sampler: Option<SamplerSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub completion: Option<CompletionSpec>,
    #[serde(default)]
    pub classify: Option<ClassifySpec>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output() -> PathBuf {
    PathBuf::from("runs/out")
}

fn default_samples() -> usize {
    1000
}

fn default_window() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub visible: usize,
    pub hidden: usize,
    #[serde(default)]
    pub labels: usize,
}

impl From<LayoutSpec> for RbmLayout {
    fn from(l: LayoutSpec) -> Self {
        RbmLayout::new(l.visible, l.hidden, l.labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCount {
    pub class: u8,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Bars {
        side: usize,
        mode: BarsMode,
        n_per_class: usize,
        #[serde(default)]
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only these classes, relabelled by position.
        #[serde(default)]
        classes: Vec<u8>,
        /// Per-class counts drawn from the training split (original labels).
        #[serde(default)]
        counts: Vec<ClassCount>,
        /// Held-out images split off before anything else.
        #[serde(default)]
        test_size: usize,
        #[serde(default)]
        split_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MachineSpec {
    /// Weights and biases uniform in `±half_width`; bipartite if a layout is given.
    Random {
        n_units: usize,
        #[serde(default = "default_half_width")]
        half_width: f64,
        #[serde(default)]
        seed: u64,
    },
    File {
        path: PathBuf,
    },
    /// Train on the dataset's training split before the experiment.
    Train {
        schedule: TrainingSchedule,
    },
}

fn default_half_width() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerSpec {
    Gibbs {
        /// Block updates over the layout instead of single-site sweeps.
        #[serde(default)]
        bipartite: bool,
    },
    Ast {
        #[serde(default = "default_levels")]
        levels: usize,
        #[serde(default = "default_beta_min")]
        beta_min: f64,
        #[serde(default = "default_gamma")]
        gamma: RateSchedule,
        #[serde(default)]
        bipartite: bool,
    },
    Lif {
        #[serde(default = "default_model")]
        model: ModelKind,
        #[serde(default)]
        stp: StpParams,
        /// Milliseconds between recorded states.
        #[serde(default = "default_interval")]
        sample_interval: f64,
        #[serde(default)]
        burn_in: f64,
        /// Reuse a stored calibration instead of measuring one.
        #[serde(default)]
        calibration: Option<PathBuf>,
    },
}

fn default_levels() -> usize {
    20
}

fn default_beta_min() -> f64 {
    0.9
}

fn default_gamma() -> RateSchedule {
    RateSchedule::new(90.0, 150.0)
}

fn default_model() -> ModelKind {
    ModelKind::Cuba
}

fn default_interval() -> f64 {
    10.0
}

/// Two axes are scanned; the third parameter stays at `fixed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub u0: Vec<f64>,
    #[serde(default)]
    pub tau_rec: Vec<f64>,
    #[serde(default)]
    pub tau_fac: Vec<f64>,
    pub fixed: StpParams,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<StpParams> {
        let axis = |v: &[f64], f: f64| if v.is_empty() { vec![f] } else { v.to_vec() };
        let mut out = Vec::new();
        for &u0 in &axis(&self.u0, self.fixed.u0) {
            for &tau_rec in &axis(&self.tau_rec, self.fixed.tau_rec) {
                for &tau_fac in &axis(&self.tau_fac, self.fixed.tau_fac) {
                    out.push(StpParams { u0, tau_rec, tau_fac });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionSpec {
    /// Class (original label) of the image whose half is clamped.
    pub class: u8,
    #[serde(default)]
    pub exemplar: usize,
    pub half: Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySpec {
    #[serde(default = "default_readout_sweeps")]
    pub sweeps: usize,
    /// Readout window for spiking samplers (ms).
    #[serde(default = "default_readout_ms")]
    pub duration: f64,
}

impl Default for ClassifySpec {
    fn default() -> Self {
        Self { sweeps: default_readout_sweeps(), duration: default_readout_ms() }
    }
}

fn default_readout_sweeps() -> usize {
    50
}

fn default_readout_ms() -> f64 {
    500.0
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    fn need<'a, T>(&self, field: &'a Option<T>, name: &str) -> CliResult<&'a T> {
        field.as_ref().ok_or_else(|| CliError::Config(format!("{}: `{name}` is required", kind_name(self.kind))))
    }

    pub fn dataset(&self) -> CliResult<&DatasetSpec> {
        self.need(&self.dataset, "dataset")
    }

    pub fn machine(&self) -> CliResult<&MachineSpec> {
        self.need(&self.machine, "machine")
    }

    pub fn sampler(&self) -> CliResult<&SamplerSpec> {
        self.need(&self.sampler, "sampler")
    }

    pub fn layout(&self) -> CliResult<RbmLayout> {
        self.need(&self.layout, "layout").map(|&l| l.into())
    }

    /// Field-level checks that do not need to load any data.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.seeds.is_empty() {
            return bad("seeds: at least one seed is required".into());
        }
        if self.samples == 0 {
            return bad("samples: must be positive".into());
        }
        if self.mode_window == 0 {
            return bad("mode_window: must be positive".into());
        }
        if let Some(DatasetSpec::Idx { images, labels, .. }) = &self.dataset {
            for p in [images, labels] {
                if !p.exists() {
                    return bad(format!("dataset: {} does not exist", p.display()));
                }
            }
        }
        match &self.machine {
            Some(MachineSpec::File { path }) if !path.exists() => {
                return bad(format!("machine.path: {} does not exist", path.display()));
            }
            Some(MachineSpec::Train { schedule }) => {
                schedule.validate().map_err(|e| CliError::Config(format!("machine.schedule: {e}")))?;
                if self.dataset.is_none() || self.layout.is_none() {
                    return bad("machine: training needs `dataset` and `layout`".into());
                }
            }
            _ => {}
        }
        if let Some(SamplerSpec::Lif { stp, sample_interval, burn_in, calibration, .. }) = &self.sampler {
            stp.validate().map_err(|e| CliError::Config(format!("sampler.stp: {e}")))?;
            if !(*sample_interval > 0.0) || !(*burn_in >= 0.0) {
                return bad("sampler: sample_interval must be positive and burn_in non-negative".into());
            }
            if let Some(p) = calibration {
                if !p.exists() {
                    return bad(format!("sampler.calibration: {} does not exist", p.display()));
                }
            }
        }
        let needs: &[&str] = match self.kind {
            ExperimentKind::SampleTarget => &["machine", "sampler"],
            ExperimentKind::Train => &["dataset", "layout", "machine"],
            ExperimentKind::Generate => &["machine", "sampler", "layout"],
            ExperimentKind::Classify => &["dataset", "machine", "sampler", "layout"],
            ExperimentKind::SweepStp => &["machine", "sampler", "sweep"],
            ExperimentKind::PatternComplete => &["dataset", "machine", "sampler", "layout", "completion"],
            ExperimentKind::Calibrate => &["sampler"],
        };
        for &n in needs {
            let present = match n {
                "machine" => self.machine.is_some(),
                "sampler" => self.sampler.is_some(),
                "dataset" => self.dataset.is_some(),
                "layout" => self.layout.is_some(),
                "sweep" => self.sweep.is_some(),
                _ => self.completion.is_some(),
            };
            if !present {
                return bad(format!("{}: `{n}` is required", kind_name(self.kind)));
            }
        }
        if self.kind == ExperimentKind::Train && !matches!(self.machine, Some(MachineSpec::Train { .. })) {
            return bad("train: machine.source must be \"train\"".into());
        }
        if matches!(self.kind, ExperimentKind::SweepStp | ExperimentKind::Calibrate)
            && !matches!(self.sampler, Some(SamplerSpec::Lif { .. }))
        {
            return bad(format!("{}: sampler.kind must be \"lif\"", kind_name(self.kind)));
        }
        if self.kind == ExperimentKind::PatternComplete && matches!(self.sampler, Some(SamplerSpec::Ast { .. })) {
            return bad("pattern-complete: the AST sampler does not support clamping".into());
        }
        Ok(())
    }
}

pub fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SampleTarget => "sample-target",
        ExperimentKind::Train => "train",
        ExperimentKind::Generate => "generate",
        ExperimentKind::Classify => "classify",
        ExperimentKind::SweepStp => "sweep-stp",
        ExperimentKind::PatternComplete => "pattern-complete",
        ExperimentKind::Calibrate => "calibrate",
    }
}
