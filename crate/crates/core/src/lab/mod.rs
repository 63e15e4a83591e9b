//! Scenario orchestration behind the `spdc-lab` binary.
//!
//! A [`Scenario`] is built from a [`Config`] and names the products to emit.
//! [`run_scenario`] runs the requested stages in order and writes each
//! product atomically into the output directory.

pub mod config;
pub mod csv;
pub mod evt;

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::correlator::{
    coincidence_rate, estimate_g2bar_si, estimate_gbar2_c, pair_histogram, singles_rate,
    triple_histogram, DelayGrid, EstimatorCurve, Rate, WindowMode,
};
use crate::curve::{CorrelationCurve, Unit};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::model::{correlation_pair, p_ssi_surface, Shape, SourceParams};
use crate::sim::{simulate, DetectorChain, SourceModel};
use crate::smearing::{
    build_kernel, g2bar_si_analytic, gbar2c_analytic, predict_plateaus, smear_surface,
    ResponseKernel, MIN_STEPS_PER_TRANSITION,
};
use crate::stream::{Channel, EventStream};

pub use config::Config;
use csv::{curve_doc, estimator_doc, num, surface_doc, CsvDoc};

/// Process exit status for an error: 2 for configuration problems, 3 for
/// numerical guards, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::Regime(_) | Error::GridTooCoarse(_) | Error::GridTooLarge { .. } => 3,
        _ => 1,
    }
}

pub(crate) fn atomic_write(path: &Path, fill: impl FnOnce(&File) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    fill(tmp.as_file())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Product {
    Analytic,
    Smear,
    Surface,
    Simulate,
    Count,
    Compare,
}

impl Product {
    pub const ALL: [Product; 6] = [
        Product::Analytic,
        Product::Smear,
        Product::Surface,
        Product::Simulate,
        Product::Count,
        Product::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Product::Analytic => "analytic",
            Product::Smear => "smear",
            Product::Surface => "surface",
            Product::Simulate => "simulate",
            Product::Count => "count",
            Product::Compare => "compare",
        }
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Product {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Product::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown product `{s}`")))
    }
}

/// Coincidence window and delay range of the counting and smearing stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisWindow {
    pub tauc: f64,
    pub bin: f64,
    /// Full delay range, centred on zero.
    pub span: f64,
    /// Step of the analytic smearing grid.
    pub grid_step: f64,
    pub mode: WindowMode,
}

impl AnalysisWindow {
    pub fn delay_grid(&self) -> Result<DelayGrid> {
        DelayGrid::symmetric(self.span / 2.0, self.bin)
    }

    pub fn analytic_grid(&self) -> Result<UniformGrid> {
        UniformGrid::symmetric(self.span / 2.0, self.grid_step)
    }

    pub fn kernel(&self, jitter: f64) -> Result<ResponseKernel> {
        build_kernel(self.tauc, jitter, self.grid_step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub source: SourceParams,
    pub chain: DetectorChain,
    pub window: AnalysisWindow,
    pub duration: f64,
    pub seed: u64,
    pub model: SourceModel,
    pub outputs: Vec<Product>,
    config: Config,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

impl Scenario {
    pub fn from_config(config: &Config) -> Result<Self> {
        let num =
            |key: &str, default: f64| -> Result<f64> { Ok(config.number(key)?.unwrap_or(default)) };
        let parse = |key: &str, default: &str| config.get(key).unwrap_or(default).to_string();

        let shape: Shape = parse("source.shape", "box").parse().map_err(config_err)?;
        let source = SourceParams::new(
            config.required("source.rate_hz")?,
            config.required("source.coherence_time_s")?,
            shape,
        )
        .map_err(config_err)?;
        let chain = DetectorChain::new(
            num("chain.eta_idler", 1.0)?,
            num("chain.eta_signal", 1.0)?,
            num("chain.splitter", 0.5)?,
            num("chain.jitter_s", 0.0)?,
        )
        .map_err(config_err)?;
        let tauc = config.required("window.tauc_s")?;
        let jitter = chain.jitter_width();
        let finest = if jitter > 0.0 { tauc.min(jitter) } else { tauc };
        let window = AnalysisWindow {
            tauc,
            bin: num("window.bin_s", tauc / 10.0)?,
            span: num("window.span_s", 4.0 * (tauc + jitter))?,
            grid_step: num("window.grid_s", finest / MIN_STEPS_PER_TRANSITION)?,
            mode: parse("window.mode", "centered")
                .parse()
                .map_err(config_err)?,
        };
        for (key, v) in [
            ("window.tauc_s", window.tauc),
            ("window.bin_s", window.bin),
            ("window.grid_s", window.grid_step),
        ] {
            if v <= 0.0 {
                return Err(Error::Config(format!("`{key}` must be > 0")));
            }
        }
        if window.span < 2.0 * (tauc + jitter) {
            return Err(Error::Config(format!(
                "`window.span_s` = {:e} s must cover 2(τc + τd) = {:e} s",
                window.span,
                2.0 * (tauc + jitter)
            )));
        }
        let duration = num("run.duration_s", 1.0)?;
        if duration < 0.0 {
            return Err(Error::Config("`run.duration_s` must be >= 0".into()));
        }
        let seed_text = parse("run.seed", "0");
        let seed = seed_text.parse::<u64>().map_err(|_| {
            Error::Config(format!(
                "`run.seed`: `{seed_text}` is not an unsigned integer"
            ))
        })?;
        let model: SourceModel = parse("run.model", "thermal").parse().map_err(config_err)?;
        let outputs = parse("run.outputs", "analytic")
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Product>>>()?;
        Ok(Self {
            source,
            chain,
            window,
            duration,
            seed,
            model,
            outputs,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Same scenario with one key replaced.
    pub fn with_key(&self, key: &str, value: &str) -> Result<Self> {
        let mut config = self.config.clone();
        config.set(key, value)?;
        Self::from_config(&config)
    }

    /// Resolved value of every key, as written into product headers.
    pub fn header(&self) -> Vec<String> {
        let w = &self.window;
        let outputs: Vec<&str> = self.outputs.iter().map(|p| p.name()).collect();
        let values = [
            num(self.source.pair_rate()),
            num(self.source.coherence_time()),
            self.source.shape().to_string(),
            num(self.chain.idler_efficiency()),
            num(self.chain.signal_efficiency()),
            num(self.chain.splitter_ratio()),
            num(self.chain.jitter_width()),
            num(w.tauc),
            num(w.bin),
            num(w.span),
            num(w.grid_step),
            w.mode.to_string(),
            num(self.duration),
            self.seed.to_string(),
            self.model.to_string(),
            outputs.join(","),
        ];
        config::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("# scenario: {k} = {v}"))
            .collect()
    }
}

/// Normalized estimators of one simulated or recorded run.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub idler_rate: Rate,
    pub signal_rate: Rate,
    /// Signal arm (both signal detectors) against the idler.
    pub g2bar_si: EstimatorCurve,
    pub gbar2_c: EstimatorCurve,
}

/// Counts `(idler, signal1, signal2)` and forms both estimators.
pub fn analyze(
    idler: &EventStream,
    signal1: &EventStream,
    signal2: &EventStream,
    window: &AnalysisWindow,
) -> Result<Analysis> {
    let grid = window.delay_grid()?;
    let (tauc, mode) = (window.tauc, window.mode);
    let signal = signal1.merged(signal2, Channel::Signal1);
    let idler_rate = singles_rate(idler)?;
    let signal_rate = singles_rate(&signal)?;
    let si = pair_histogram(&signal, idler, &grid, tauc, mode)?;
    let g2bar_si = estimate_g2bar_si(&si, signal_rate, idler_rate)?;
    let triples = triple_histogram(idler, signal1, signal2, &grid, tauc, mode)?;
    let pairs = pair_histogram(signal2, idler, &grid, tauc, mode)?;
    let pairs0 = coincidence_rate(signal1, idler, tauc, mode)?;
    let gbar2_c = estimate_gbar2_c(&triples, pairs0, &pairs, idler_rate)?;
    Ok(Analysis {
        idler_rate,
        signal_rate,
        g2bar_si,
        gbar2_c,
    })
}

/// Where a run writes and what it may read.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Recorded streams for `count` when no `simulate` stage precedes it.
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub written: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Run<'a> {
    scenario: &'a Scenario,
    header: Vec<String>,
    opts: &'a RunOptions,
    report: Report,
}

impl Run<'_> {
    fn emit(&mut self, name: &str, doc: &CsvDoc) -> Result<()> {
        let path = self.opts.out_dir.join(name);
        doc.write(&path)?;
        self.report.written.push(path);
        Ok(())
    }

    fn curve(&mut self, name: &str, curve: &CorrelationCurve) -> Result<()> {
        let doc = curve_doc(&self.header, curve);
        self.emit(name, &doc)
    }

    fn analytic(&mut self) -> Result<()> {
        let p = &self.scenario.source;
        let dt = p.coherence_time();
        let grid = UniformGrid::symmetric(4.0 * dt, dt / 200.0)?;
        let pair = correlation_pair(p);
        self.curve(
            "analytic_auto.csv",
            &CorrelationCurve::sample(grid, Unit::Rate, |t| pair.auto(t))?,
        )?;
        self.curve(
            "analytic_cross.csv",
            &CorrelationCurve::sample(grid, Unit::Rate, |t| pair.cross(t))?,
        )?;
        self.curve(
            "analytic_g2_si.csv",
            &CorrelationCurve::sample(grid, Unit::Dimensionless, |t| pair.g2_si(t))?,
        )?;
        self.curve(
            "analytic_g2_ss.csv",
            &CorrelationCurve::sample(grid, Unit::Dimensionless, |t| pair.g2_ss(t))?,
        )?;
        self.curve(
            "analytic_p_ssi_diag.csv",
            &CorrelationCurve::sample(grid, Unit::RateCubed, |t| pair.p_ssi_diag(t))?,
        )?;
        self.curve(
            "analytic_g2_c.csv",
            &CorrelationCurve::sample(grid, Unit::Dimensionless, |t| pair.g2_c(0.0, t, 0.0))?,
        )?;
        self.report.summary.push(format!(
            "analytic: g2_si(0) = {:e}, g2_c(0,0|0) = {:e}",
            pair.g2_si(0.0),
            pair.g2_c(0.0, 0.0, 0.0)
        ));
        Ok(())
    }

    fn smear(&mut self) -> Result<()> {
        let s = self.scenario;
        let kernel = s.window.kernel(s.chain.jitter_width())?;
        let grid = s.window.analytic_grid()?;
        self.curve(
            "smear_g2bar_si.csv",
            &g2bar_si_analytic(&s.source, &kernel, grid)?,
        )?;
        self.curve(
            "smear_gbar2_c.csv",
            &gbar2c_analytic(&s.source, &kernel, grid)?,
        )?;
        let pred = predict_plateaus(&s.source, &kernel);
        let mut doc = CsvDoc::new(
            &self.header,
            &[
                "x_1",
                "g2si_plateau_1",
                "nssi_short_per_s3",
                "nssi_long_per_s3",
                "gbar2c_short_1",
            ],
        );
        doc.row(&[
            num(pred.x),
            num(pred.g2si_plateau),
            num(pred.nssi_short),
            num(pred.nssi_long),
            num(pred.gbar2c_short),
        ]);
        self.emit("smear_plateaus.csv", &doc)?;
        self.report.summary.push(format!(
            "smear: X = {:e}, g2si plateau = {:e}, gbar2c short = {:e}",
            pred.x, pred.g2si_plateau, pred.gbar2c_short
        ));
        Ok(())
    }

    fn surface(&mut self) -> Result<()> {
        let s = self.scenario;
        let kernel = s.window.kernel(s.chain.jitter_width())?;
        let axis = s.window.analytic_grid()?;
        let smeared = smear_surface(&p_ssi_surface(&s.source, axis)?, &kernel)?;
        let doc = surface_doc(&self.header, &smeared);
        self.emit("surface_p_ssi.csv", &doc)
    }

    fn simulate(&mut self, model: SourceModel, seed: u64) -> Result<[EventStream; 3]> {
        let s = self.scenario;
        let (i, s1, s2) = simulate(model, &s.source, &s.chain, s.duration, seed)?;
        Ok([i, s1, s2])
    }

    fn count(&mut self, streams: &[EventStream; 3]) -> Result<()> {
        let [i, s1, s2] = streams;
        let a = analyze(i, s1, s2, &self.scenario.window)?;
        let doc = estimator_doc(&self.header, &a.g2bar_si);
        self.emit("count_g2bar_si.csv", &doc)?;
        let doc = estimator_doc(&self.header, &a.gbar2_c);
        self.emit("count_gbar2_c.csv", &doc)?;
        let mut doc = CsvDoc::new(
            &self.header,
            &["channel", "events", "rate_per_s", "stderr_per_s"],
        );
        for s in streams {
            let r = singles_rate(s)?;
            doc.row(&[
                s.channel().to_string(),
                s.len().to_string(),
                num(r.value),
                num(r.stderr),
            ]);
        }
        self.emit("count_rates.csv", &doc)?;
        self.report.summary.push(format!(
            "count: idler {:e}/s, signal {:e}/s, g2bar_si(0) = {:e}, gbar2_c(0) = {:e}",
            a.idler_rate.value,
            a.signal_rate.value,
            value_at_zero(&a.g2bar_si),
            value_at_zero(&a.gbar2_c)
        ));
        Ok(())
    }

    fn compare(&mut self) -> Result<()> {
        let seed = self.scenario.seed;
        let window = self.scenario.window;
        let [i, s1, s2] = self.simulate(SourceModel::Thermal, seed)?;
        let thermal = analyze(&i, &s1, &s2, &window)?.gbar2_c;
        let [i, s1, s2] = self.simulate(SourceModel::Poisson, seed.wrapping_add(1))?;
        let poisson = analyze(&i, &s1, &s2, &window)?.gbar2_c;
        let z = thermal.z_scores(&poisson)?;
        let max_z = z.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let bins = z.iter().flatten().count();
        let mut doc = CsvDoc::new(
            &self.header,
            &[
                "delay_s",
                "thermal_1",
                "thermal_stderr_1",
                "poisson_1",
                "poisson_stderr_1",
                "z_1",
            ],
        );
        doc.note(format!("compared_bins: {bins}"));
        doc.note(format!("max_abs_z: {}", num(max_z)));
        for (k, zk) in z.iter().enumerate() {
            doc.row(&[
                num(thermal.delays[k]),
                num(thermal.values[k]),
                num(thermal.stderr[k]),
                num(poisson.values[k]),
                num(poisson.stderr[k]),
                zk.map(num).unwrap_or_else(|| "nan".into()),
            ]);
        }
        self.emit("compare_gbar2_c.csv", &doc)?;
        self.report
            .summary
            .push(format!("compare: max |z| = {max_z:.3} over {bins} bins"));
        Ok(())
    }
}

fn value_at_zero(curve: &EstimatorCurve) -> f64 {
    curve
        .delays
        .iter()
        .position(|&d| d == 0.0)
        .map(|k| curve.values[k])
        .unwrap_or(f64::NAN)
}

/// Runs every product of `scenario.outputs` in order.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut run = Run {
        scenario,
        header: scenario.header(),
        opts,
        report: Report::default(),
    };
    let mut streams: Option<[EventStream; 3]> = None;
    for product in &scenario.outputs {
        match product {
            Product::Analytic => run.analytic()?,
            Product::Smear => run.smear()?,
            Product::Surface => run.surface()?,
            Product::Simulate => {
                let s = run.simulate(scenario.model, scenario.seed)?;
                let path = opts.out_dir.join("events.evt");
                evt::write_events(&s, &path)?;
                run.report.written.push(path);
                run.report.summary.push(format!(
                    "simulate: {} idler, {} signal1, {} signal2 events",
                    s[0].len(),
                    s[1].len(),
                    s[2].len()
                ));
                streams = Some(s);
            }
            Product::Count => {
                if streams.is_none() {
                    let path = opts.events.as_ref().ok_or_else(|| {
                        Error::Config(
                            "`count` needs a preceding `simulate` or an events file".into(),
                        )
                    })?;
                    streams = Some(load_triplet(path)?);
                }
                run.count(streams.as_ref().expect("streams loaded above"))?;
            }
            Product::Compare => run.compare()?,
        }
    }
    Ok(run.report)
}

/// Reads an `.evt` file holding the idler and both signal channels.
pub fn load_triplet(path: &Path) -> Result<[EventStream; 3]> {
    let mut streams = evt::read_events(path)?;
    let mut take = |c: Channel| {
        streams
            .iter()
            .position(|s| s.channel() == c)
            .map(|k| streams.swap_remove(k))
            .ok_or_else(|| Error::Format(format!("{} lacks the {c} channel", path.display())))
    };
    Ok([
        take(Channel::Idler)?,
        take(Channel::Signal1)?,
        take(Channel::Signal2)?,
    ])
}

/// Runs `scenario` once per value of `key`, each into `<out>/<key>=<value>`.
pub fn sweep(
    scenario: &Scenario,
    key: &str,
    values: &[String],
    opts: &RunOptions,
) -> Result<Vec<Report>> {
    let variants = values
        .iter()
        .map(|v| scenario.with_key(key, v).map(|s| (v, s)))
        .collect::<Result<Vec<_>>>()?;
    variants
        .into_iter()
        .map(|(v, s)| {
            let sub = RunOptions {
                out_dir: opts.out_dir.join(format!("{key}={v}")),
                ..opts.clone()
            };
            run_scenario(&s, &sub)
        })
        .collect()
}
