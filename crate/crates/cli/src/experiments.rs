//! Execution of each experiment kind for a single seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use spikemix_core::datasets::{generate_bars, half_clamp_mask, load_mnist_idx, make_imbalanced, ImageDataset};
use spikemix_core::evaluation::{
    class_prototypes, classify, isl_curve, label_mode_trace, mode_dwell_histogram, mode_occupancy, prototype_mode_trace,
    write_curve_csv, IslConfig, ModeTrace, Readout,
};
use spikemix_core::lif::{calibrate, Calibration, LifParams, LifSetup, ModelKind, NoiseConfig, StpParams};
use spikemix_core::samplers::{
    ast_effective_rate, cast_train, AstSampler, GibbsSampler, RateSchedule, RbmLayout, Sampler, SweepSchedule,
    TemperatureLadder,
};
use spikemix_core::{
    empirical_distribution, kl_divergence, seeded, substream, BoltzmannMachine, ClampMask, SampleTrace, MAX_ENUM_UNITS,
};

use crate::config::{DatasetSpec, ExperimentKind, MachineSpec, RunConfig, SamplerSpec};
use crate::error::{CliError, CliResult};

// independent random streams derived from one run seed
const STREAM_TRAIN: u64 = 1;
const STREAM_CALIBRATE: u64 = 2;
const STREAM_SAMPLE: u64 = 3;
const STREAM_READOUT: u64 = 4;

/// Training split and optional held-out split.
#[derive(Debug, Clone)]
pub struct Data {
    pub train: ImageDataset,
    pub test: Option<ImageDataset>,
}

impl Data {
    /// Images that likelihood estimates are measured against.
    pub fn evaluation_images(&self) -> &[Vec<u8>] {
        self.test.as_ref().unwrap_or(&self.train).images()
    }
}

pub fn load_data(spec: &DatasetSpec) -> CliResult<Data> {
    match spec {
        DatasetSpec::Bars { side, mode, n_per_class, seed } => {
            Ok(Data { train: generate_bars(*side, *mode, *n_per_class, &mut seeded(*seed))?, test: None })
        }
        DatasetSpec::Idx { images, labels, classes, counts, test_size, split_seed } => {
            let mut ds = load_mnist_idx(images, labels)?;
            if !classes.is_empty() {
                ds = ds.select_classes(classes);
            }
            let (test, mut train) = if *test_size > 0 {
                let (t, r) = ds.shuffle_split(*test_size, &mut seeded(*split_seed))?;
                (Some(t), r)
            } else {
                (None, ds)
            };
            if !counts.is_empty() {
                let mut map = BTreeMap::new();
                for c in counts {
                    let label = if classes.is_empty() {
                        c.class
                    } else {
                        classes.iter().position(|&k| k == c.class).ok_or_else(|| {
                            CliError::Config(format!("dataset.counts: class {} is not in dataset.classes", c.class))
                        })? as u8
                    };
                    map.insert(label, c.count);
                }
                train = make_imbalanced(&train, &map, &mut substream(*split_seed, 1))?;
            }
            Ok(Data { train, test })
        }
    }
}

/// Machines that do not depend on the run seed are built once.
pub fn shared_machine(cfg: &RunConfig) -> CliResult<Option<BoltzmannMachine>> {
    let layout = cfg.layout.map(RbmLayout::from);
    match cfg.machine.as_ref() {
        Some(MachineSpec::Random { n_units, half_width, seed }) => {
            let mut rng = seeded(*seed);
            let m = match layout {
                Some(l) => {
                    if l.n_units() != *n_units {
                        return Err(CliError::Config(format!(
                            "machine.n_units = {n_units} but the layout has {} units",
                            l.n_units()
                        )));
                    }
                    let mut m = BoltzmannMachine::zeros(*n_units);
                    for v in l.visible_side() {
                        for h in l.hidden() {
                            m.set_weight(v, h, rng.random_range(-half_width..=*half_width))?;
                        }
                    }
                    for k in 0..*n_units {
                        m.set_bias(k, rng.random_range(-half_width..=*half_width))?;
                    }
                    m
                }
                None => BoltzmannMachine::random_uniform(*n_units, *half_width, &mut rng),
            };
            Ok(Some(m))
        }
        Some(MachineSpec::File { path }) => {
            let m = BoltzmannMachine::load(path)?;
            if let Some(l) = layout {
                l.check(&m).map_err(|e| CliError::Config(format!("machine.path: {e}")))?;
            }
            Ok(Some(m))
        }
        Some(MachineSpec::Train { .. }) | None => Ok(None),
    }
}

fn machine_for_seed(cfg: &RunConfig, shared: Option<&BoltzmannMachine>, data: Option<&Data>, seed: u64) -> CliResult<BoltzmannMachine> {
    if let Some(m) = shared {
        return Ok(m.clone());
    }
    let Some(MachineSpec::Train { schedule }) = cfg.machine.as_ref() else {
        return Err(CliError::Config("`machine` is required".into()));
    };
    let layout = cfg.layout()?;
    let data = data.ok_or_else(|| CliError::Config("machine: training needs `dataset`".into()))?;
    let vectors = data.train.training_vectors(layout.n_label)?;
    Ok(cast_train(&layout, &vectors, schedule, &mut substream(seed, STREAM_TRAIN))?)
}

fn lif_defaults(model: ModelKind) -> (LifParams, NoiseConfig) {
    match model {
        ModelKind::Cuba => (LifParams::cuba(), NoiseConfig::cuba_default()),
        ModelKind::Coba => (LifParams::coba(), NoiseConfig::coba_default()),
    }
}

fn calibration_for(spec: &SamplerSpec, seed: u64) -> CliResult<Option<Calibration>> {
    let SamplerSpec::Lif { model, calibration, .. } = spec else {
        return Ok(None);
    };
    if let Some(path) = calibration {
        let text = fs::read_to_string(path)?;
        let cal: Calibration = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok(Some(cal));
    }
    let (lif, noise) = lif_defaults(*model);
    Ok(Some(calibrate(&lif, &noise, &mut substream(seed, STREAM_CALIBRATE))?))
}

fn lif_setup(spec: &SamplerSpec, cal: &Calibration) -> Option<LifSetup> {
    match spec {
        SamplerSpec::Lif { model, stp, sample_interval, .. } => {
            Some(LifSetup::new(lif_defaults(*model).0, cal.clone(), *stp).with_sample_interval(*sample_interval))
        }
        _ => None,
    }
}

fn sweep_schedule(bipartite: bool, layout: Option<RbmLayout>) -> CliResult<SweepSchedule> {
    if bipartite {
        let l = layout.ok_or_else(|| CliError::Config("sampler.bipartite needs a `layout`".into()))?;
        Ok(SweepSchedule::Bipartite(l))
    } else {
        Ok(SweepSchedule::Sequential)
    }
}

/// `n` valid samples from the configured sampler.
#[allow(clippy::too_many_arguments)]
fn draw(
    machine: &BoltzmannMachine,
    layout: Option<RbmLayout>,
    spec: &SamplerSpec,
    cal: Option<&Calibration>,
    clamp: Option<&ClampMask>,
    n: usize,
    seed: u64,
) -> CliResult<SampleTrace> {
    let rng = substream(seed, STREAM_SAMPLE);
    match spec {
        SamplerSpec::Gibbs { bipartite } => {
            let mut g = GibbsSampler::new(machine, sweep_schedule(*bipartite, layout)?, rng)?;
            if let Some(mask) = clamp {
                g = g.with_clamp(&mask.padded(machine.n_units())?)?;
            }
            Ok(g.collect(n)?)
        }
        SamplerSpec::Ast { levels, beta_min, gamma, bipartite } => {
            if clamp.is_some() {
                return Err(CliError::Config("the AST sampler does not support clamping".into()));
            }
            let ladder = TemperatureLadder::equidistant(*levels, *beta_min)?;
            let mut s = AstSampler::new(machine, sweep_schedule(*bipartite, layout)?, ladder, *gamma, rng)?;
            Ok(s.collect_valid(n, n.saturating_mul(*levels).saturating_mul(100))?)
        }
        SamplerSpec::Lif { burn_in, .. } => {
            let cal = cal.ok_or_else(|| CliError::Run("spiking sampler without calibration".into()))?;
            let setup = lif_setup(spec, cal).expect("lif spec");
            let mut s = setup.sampler(machine, clamp, rng)?;
            s.burn_in(*burn_in);
            Ok(s.collect(n)?)
        }
    }
}

/// 1, 2, 5, 10, 20, 50, … up to and including `n`.
fn checkpoints(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1;
    'outer: loop {
        for m in [1, 2, 5] {
            let c = m * decade;
            if c >= n {
                break 'outer;
            }
            out.push(c);
        }
        decade *= 10;
    }
    out.push(n);
    out
}

fn modes_of(trace: &SampleTrace, layout: Option<RbmLayout>, data: Option<&Data>, window: usize) -> CliResult<Option<(ModeTrace, usize)>> {
    if let Some(l) = layout.filter(|l| l.n_label > 0) {
        return Ok(Some((label_mode_trace(trace, l.labels(), window)?, l.n_label)));
    }
    let Some(data) = data else { return Ok(None) };
    let labels: Option<Vec<u8>> = data.train.labels().iter().copied().collect();
    let Some(labels) = labels else { return Ok(None) };
    let n_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let protos = class_prototypes(data.train.images(), &labels, n_classes)?;
    let visible = data.train.n_pixels();
    Ok(Some((prototype_mode_trace(trace, 0..visible, &protos, window)?, n_classes)))
}

struct SeedOutput {
    dir: PathBuf,
    files: Vec<String>,
}

impl SeedOutput {
    fn write(&mut self, name: &str, contents: &[u8]) -> CliResult<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_trace(&mut self, name: &str, trace: &SampleTrace) -> CliResult<()> {
        let mut buf = Vec::new();
        trace.write_text(&mut buf)?;
        self.write(name, &buf)
    }

    fn write_modes(&mut self, prefix: &str, modes: &ModeTrace, n_modes: usize) -> CliResult<()> {
        let mut buf = Vec::new();
        mode_dwell_histogram(modes).write_csv(&mut buf, 1.0)?;
        self.write(&format!("{prefix}dwell.csv"), &buf)?;
        let mut occ = String::from("mode,fraction\n");
        for (m, f) in mode_occupancy(modes, n_modes)?.iter().enumerate() {
            writeln!(occ, "{m},{f}").unwrap();
        }
        self.write(&format!("{prefix}occupancy.csv"), occ.as_bytes())
    }

    fn write_isl(&mut self, name: &str, test: &[Vec<u8>], trace: &SampleTrace, visible: usize) -> CliResult<Option<f64>> {
        let generated: Vec<&[u8]> = trace.valid_states().map(|z| &z[..visible]).collect();
        if generated.is_empty() {
            return Ok(None);
        }
        let curve = isl_curve(test, &generated, &checkpoints(generated.len()), &IslConfig::default())?;
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &curve)?;
        self.write(name, &buf)?;
        Ok(curve.last().map(|c| c.1))
    }
}

/// Everything a seed needs that is shared across seeds.
pub struct Shared {
    pub data: Option<Data>,
    pub machine: Option<BoltzmannMachine>,
}

/// Run one seed and return the files it wrote, relative to `run_dir`.
pub fn run_seed(cfg: &RunConfig, shared: &Shared, compare: bool, run_dir: &Path, seed: u64) -> CliResult<Vec<String>> {
    let name = format!("seed-{seed}");
    let dir = run_dir.join(&name);
    fs::create_dir_all(&dir)?;
    let mut out = SeedOutput { dir, files: Vec::new() };
    let data = shared.data.as_ref();
    let layout = cfg.layout.map(RbmLayout::from);
    match cfg.kind {
        ExperimentKind::Calibrate => {
            let cal = calibration_for(cfg.sampler()?, seed)?.expect("lif sampler");
            out.write("calibration.toml", toml::to_string(&cal).map_err(|e| CliError::Run(e.to_string()))?.as_bytes())?;
            let mut csv = String::from("e_leak,p,fit\n");
            for &(e, p) in &cal.points {
                writeln!(csv, "{e},{p},{}", cal.activation(e)).unwrap();
            }
            out.write("calibration.csv", csv.as_bytes())?;
        }
        ExperimentKind::SampleTarget => {
            let machine = machine_for_seed(cfg, shared.machine.as_ref(), data, seed)?;
            let spec = cfg.sampler()?;
            let cal = calibration_for(spec, seed)?;
            let trace = draw(&machine, layout, spec, cal.as_ref(), None, cfg.samples, seed)?;
            let n = machine.n_units();
            if n <= MAX_ENUM_UNITS {
                let exact = machine.exact_distribution(1.0)?;
                let mut curve = Vec::new();
                for c in checkpoints(trace.valid_count()) {
                    let emp = empirical_distribution(&trace.valid_prefix(c), n)?;
                    curve.push((c, kl_divergence(&emp, &exact)?));
                }
                let mut buf = Vec::new();
                write_curve_csv(&mut buf, &curve)?;
                out.write("kl.csv", &buf)?;
                let emp = empirical_distribution(&trace, n)?;
                let mut csv = String::from("state,empirical,target\n");
                for s in 0..exact.len() {
                    writeln!(csv, "{s},{},{}", emp.prob(s), exact.prob(s)).unwrap();
                }
                out.write("distribution.csv", csv.as_bytes())?;
            } else {
                log::warn!("{n} units are too many for exact enumeration; skipping KL");
            }
            if let SamplerSpec::Ast { .. } = spec {
                out.write("ast.csv", format!("metric,value\neffective_rate,{}\n", ast_effective_rate(&trace)).as_bytes())?;
            }
            if cfg.write_trace {
                out.write_trace("trace.txt", &trace)?;
            }
        }
        ExperimentKind::Train => {
            let machine = machine_for_seed(cfg, None, data, seed)?;
            out.write("machine.toml", machine.to_toml().as_bytes())?;
            let l = cfg.layout()?;
            if let (Some(test), true) = (data.and_then(|d| d.test.as_ref()), l.n_label > 0) {
                let acc = accuracy(&machine, &l, test, &Readout::Gibbs { sweeps: 50 }, seed)?;
                out.write("metrics.csv", format!("metric,value\naccuracy,{acc}\n").as_bytes())?;
            }
        }
        ExperimentKind::Classify => {
            let machine = machine_for_seed(cfg, shared.machine.as_ref(), data, seed)?;
            let l = cfg.layout()?;
            let spec = cfg.sampler()?;
            let opts = cfg.classify.unwrap_or_default();
            let cal = calibration_for(spec, seed)?;
            let setup = cal.as_ref().and_then(|c| lif_setup(spec, c));
            let readout = match &setup {
                Some(s) => Readout::Lif { setup: s, duration: opts.duration },
                None => Readout::Gibbs { sweeps: opts.sweeps },
            };
            let d = data.expect("validated");
            let test = d.test.as_ref().unwrap_or(&d.train);
            let acc = accuracy(&machine, &l, test, &readout, seed)?;
            out.write("metrics.csv", format!("metric,value\naccuracy,{acc}\nimages,{}\n", test.len()).as_bytes())?;
        }
        ExperimentKind::Generate if compare => compare_samplers(cfg, shared, &mut out, seed)?,
        ExperimentKind::Generate => {
            let machine = machine_for_seed(cfg, shared.machine.as_ref(), data, seed)?;
            let l = cfg.layout()?;
            let spec = cfg.sampler()?;
            let cal = calibration_for(spec, seed)?;
            let trace = draw(&machine, Some(l), spec, cal.as_ref(), None, cfg.samples, seed)?;
            if let Some(d) = data {
                out.write_isl("isl.csv", d.evaluation_images(), &trace, l.n_visible)?;
            }
            if let Some((modes, k)) = modes_of(&trace, Some(l), data, cfg.mode_window)? {
                out.write_modes("", &modes, k)?;
            }
            if cfg.write_trace {
                out.write_trace("trace.txt", &trace)?;
            }
        }
        ExperimentKind::PatternComplete => {
            let machine = machine_for_seed(cfg, shared.machine.as_ref(), data, seed)?;
            let l = cfg.layout()?;
            let spec = cfg.sampler()?;
            let c = cfg.completion.expect("validated");
            let d = data.expect("validated");
            let label = match cfg.dataset.as_ref() {
                Some(DatasetSpec::Idx { classes, .. }) if !classes.is_empty() => {
                    classes.iter().position(|&k| k == c.class).ok_or_else(|| {
                        CliError::Config(format!("completion.class {} is not in dataset.classes", c.class))
                    })? as u8
                }
                _ => c.class,
            };
            let exemplar = d
                .train
                .iter()
                .filter(|(_, l)| *l == Some(label))
                .nth(c.exemplar)
                .map(|(img, _)| img)
                .ok_or_else(|| CliError::Config(format!("completion: no exemplar {} of class {}", c.exemplar, c.class)))?;
            let side = (d.train.width(), d.train.height());
            let mask = half_clamp_mask(side.0, side.1, c.half, exemplar)?;
            let cal = calibration_for(spec, seed)?;
            let trace = draw(&machine, Some(l), spec, cal.as_ref(), Some(&mask), cfg.samples, seed)?;
            if let Some((modes, k)) = modes_of(&trace, Some(l), data, cfg.mode_window)? {
                out.write_modes("", &modes, k)?;
            }
            if cfg.write_trace {
                out.write_trace("trace.txt", &trace)?;
            }
        }
        ExperimentKind::SweepStp => {
            let machine = machine_for_seed(cfg, shared.machine.as_ref(), data, seed)?;
            let spec = cfg.sampler()?;
            let cal = calibration_for(spec, seed)?;
            let grid = cfg.sweep.as_ref().expect("validated").grid();
            let use_isl = data.is_some();
            if !use_isl && machine.n_units() > MAX_ENUM_UNITS {
                return Err(CliError::Config("sweep-stp: KL needs at most 20 units, or give a dataset for ISL".into()));
            }
            let values: Vec<f64> = grid
                .par_iter()
                .enumerate()
                .map(|(i, stp)| sweep_point(cfg, spec, &machine, layout, data, cal.as_ref(), stp, substream(seed, 100 + i as u64).random()))
                .collect::<CliResult<_>>()?;
            let metric = if use_isl { "isl" } else { "kl" };
            let mut csv = format!("u0,tau_rec,tau_fac,{metric}\n");
            for (p, v) in grid.iter().zip(&values) {
                writeln!(csv, "{},{},{},{v}", p.u0, p.tau_rec, p.tau_fac).unwrap();
            }
            out.write("sweep.csv", csv.as_bytes())?;
            // best = lowest KL or highest likelihood
            let best = values
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .max_by(|a, b| if use_isl { a.1.total_cmp(b.1) } else { b.1.total_cmp(a.1) })
                .map(|(i, _)| i);
            if let Some(i) = best {
                let p = grid[i];
                out.write(
                    "best.csv",
                    format!("u0,tau_rec,tau_fac,{metric}\n{},{},{},{}\n", p.u0, p.tau_rec, p.tau_fac, values[i]).as_bytes(),
                )?;
            }
        }
    }
    Ok(out.files.iter().map(|f| format!("{name}/{f}")).collect())
}

#[allow(clippy::too_many_arguments)]
fn sweep_point(
    cfg: &RunConfig,
    spec: &SamplerSpec,
    machine: &BoltzmannMachine,
    layout: Option<RbmLayout>,
    data: Option<&Data>,
    cal: Option<&Calibration>,
    stp: &StpParams,
    seed: u64,
) -> CliResult<f64> {
    stp.validate().map_err(|e| CliError::Config(format!("sweep: {e}")))?;
    let SamplerSpec::Lif { model, sample_interval, burn_in, calibration, .. } = spec else {
        unreachable!("validated as lif")
    };
    let point = SamplerSpec::Lif {
        model: *model,
        stp: *stp,
        sample_interval: *sample_interval,
        burn_in: *burn_in,
        calibration: calibration.clone(),
    };
    let trace = draw(machine, layout, &point, cal, None, cfg.samples, seed)?;
    match data {
        Some(d) => {
            let visible = layout.map_or(d.train.n_pixels(), |l| l.n_visible);
            let generated: Vec<&[u8]> = trace.valid_states().map(|z| &z[..visible]).collect();
            Ok(spikemix_core::evaluation::isl_log_likelihood(d.evaluation_images(), &generated, &IslConfig::default())?)
        }
        None => Ok(kl_divergence(&empirical_distribution(&trace, machine.n_units())?, &machine.exact_distribution(1.0)?)?),
    }
}

fn accuracy(machine: &BoltzmannMachine, layout: &RbmLayout, test: &ImageDataset, readout: &Readout<'_>, seed: u64) -> CliResult<f64> {
    let mut rng = substream(seed, STREAM_READOUT);
    let mut correct = 0;
    for (img, label) in test.iter() {
        let label = label.ok_or_else(|| CliError::Config("classification needs labelled images".into()))?;
        if classify(machine, layout, img, readout, &mut rng)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len().max(1) as f64)
}

/// Gibbs, AST and the spiking sampler on one machine with equal numbers of
/// valid samples.
fn compare_samplers(cfg: &RunConfig, shared: &Shared, out: &mut SeedOutput, seed: u64) -> CliResult<()> {
    let data = shared.data.as_ref();
    let machine = machine_for_seed(cfg, shared.machine.as_ref(), data, seed)?;
    let l = cfg.layout()?;
    let lif = match cfg.sampler()? {
        s @ SamplerSpec::Lif { .. } => s.clone(),
        _ => SamplerSpec::Lif {
            model: ModelKind::Cuba,
            stp: StpParams::static_synapse(),
            sample_interval: 10.0,
            burn_in: 0.0,
            calibration: None,
        },
    };
    let samplers = [
        ("gibbs", SamplerSpec::Gibbs { bipartite: true }),
        (
            "ast",
            SamplerSpec::Ast { levels: 20, beta_min: 0.9, gamma: RateSchedule::new(90.0, 150.0), bipartite: true },
        ),
        ("lif", lif),
    ];
    let mut summary = String::from("sampler,valid_samples,effective_rate,isl,switches\n");
    for (name, spec) in &samplers {
        let cal = calibration_for(spec, seed)?;
        let trace = draw(&machine, Some(l), spec, cal.as_ref(), None, cfg.samples, seed)?;
        let isl = match data {
            Some(d) => out.write_isl(&format!("{name}-isl.csv"), d.evaluation_images(), &trace, l.n_visible)?,
            None => None,
        };
        let switches = match modes_of(&trace, Some(l), data, cfg.mode_window)? {
            Some((modes, k)) => {
                out.write_modes(&format!("{name}-"), &modes, k)?;
                Some(modes.switches())
            }
            None => None,
        };
        let rate = trace.valid_count() as f64 / trace.len().max(1) as f64;
        let fmt = |v: Option<String>| v.unwrap_or_default();
        writeln!(
            summary,
            "{name},{},{rate},{},{}",
            trace.valid_count(),
            fmt(isl.map(|v| v.to_string())),
            fmt(switches.map(|v| v.to_string()))
        )
        .unwrap();
    }
    out.write("compare.csv", summary.as_bytes())
}
