//! `key = value` experiment configuration.

use std::collections::HashMap;
use std::fmt;

use crate::afdm::{default_c1, default_c2, AfdmParams};
use crate::channel::PathConfig;
use crate::metrics::{Modulation, ModulationSpec};
use crate::precoding::{PrecodeConfig, PrecoderKind, Sampling, StepRule};
use crate::xl_array::{CorrelationSpec, SubarrayLayout};

/// A configuration problem, with the line it came from when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Waveform {
    Afdm,
    Ofdm,
}

impl Waveform {
    pub fn name(self) -> &'static str {
        match self {
            Waveform::Afdm => "afdm",
            Waveform::Ofdm => "ofdm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "afdm" => Some(Waveform::Afdm),
            "ofdm" => Some(Waveform::Ofdm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    SumRate,
    Ber,
    Flops,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::SumRate => "sum_rate",
            Metric::Ber => "ber",
            Metric::Flops => "flops",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum_rate" | "sumrate" => Some(Metric::SumRate),
            "ber" => Some(Metric::Ber),
            "flops" => Some(Metric::Flops),
            _ => None,
        }
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub n_carriers: usize,
    pub layout: SubarrayLayout,
    pub waveforms: Vec<Waveform>,
    /// Chirp rates used for AFDM; OFDM always uses zero.
    pub c1: f64,
    pub c2: f64,
    pub paths: PathConfig,
    pub correlation: CorrelationSpec,
    pub precoders: Vec<PrecoderKind>,
    pub iterations: usize,
    pub step_rule: StepRule,
    pub modulation: ModulationSpec,
    pub power_budget: f64,
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub frames_per_block: usize,
    pub seed: u64,
    pub metrics: Vec<Metric>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

impl ExperimentConfig {
    /// Modulator parameters for `waveform`.
    pub fn afdm_params(&self, waveform: Waveform) -> AfdmParams {
        match waveform {
            Waveform::Afdm => AfdmParams::new(self.n_carriers, self.c1, self.c2),
            Waveform::Ofdm => AfdmParams::ofdm(self.n_carriers),
        }
        .expect("validated at parse time")
    }

    /// Precoder settings at regularization `xi`.
    pub fn precode_config(&self, kind: PrecoderKind, xi: f64) -> PrecodeConfig {
        PrecodeConfig {
            xi,
            iterations: self.iterations,
            sampling: match kind {
                PrecoderKind::SworRka => Sampling::NormWeightedWithoutReplacement,
                _ => Sampling::Uniform,
            },
            step_rule: self.step_rule,
            power_budget: self.power_budget,
            symbol_power: self.modulation.symbol_power,
            track_residual: false,
        }
    }
}

/// Every recognised key with its default, in the order documented.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("experiment_id", "custom"),
    ("n_carriers", "64"),
    ("n_tx", "64"),
    ("subarrays", "4"),
    ("users", "8"),
    ("rx_per_user", "1"),
    ("waveform", "afdm"),
    ("c1", "auto"),
    ("c2", "auto"),
    ("paths", "3"),
    ("l_max", "2"),
    ("alpha_max", "1"),
    ("fractional", "false"),
    ("corr_coef", "0.5"),
    ("visibility", "1.0"),
    ("precoder", "zf"),
    ("iterations", "200"),
    ("step_rule", "regularized"),
    ("modulation", "qam4"),
    ("symbol_power", "1.0"),
    ("power_budget", "1.0"),
    ("snr_min", "-10"),
    ("snr_max", "30"),
    ("snr_step", "5"),
    ("snr_db", ""),
    ("trials", "200"),
    ("frames_per_block", "1"),
    ("seed", "1"),
    ("metric", "sum_rate"),
];

struct Entries {
    map: HashMap<&'static str, (String, Option<usize>)>,
}

impl Entries {
    fn raw(&self, key: &'static str) -> (&str, Option<usize>) {
        let (v, l) = &self.map[key];
        (v.as_str(), *l)
    }

    fn line(&self, key: &'static str) -> Option<usize> {
        self.map[key].1
    }

    fn parse<T: std::str::FromStr>(&self, key: &'static str, what: &str) -> Result<T, ConfigError> {
        let (v, l) = self.raw(key);
        v.parse()
            .map_err(|_| err(l, format!("`{key}` expects {what}, got `{v}`")))
    }

    fn list<T>(&self, key: &'static str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, ConfigError> {
        let (v, l) = self.raw(key);
        let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(err(l, format!("`{key}` needs at least one value")));
        }
        let mut out = Vec::new();
        for it in items {
            let x = f(it).ok_or_else(|| err(l, format!("`{key}` expects {what}, got `{it}`")))?;
            out.push(x);
        }
        Ok(out)
    }

    fn was_set(&self, key: &'static str) -> bool {
        self.map[key].1.is_some()
    }
}

/// Parses and validates a configuration. Omitted keys take the values in
/// [`DEFAULTS`]; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map: HashMap<&'static str, (String, Option<usize>)> =
        DEFAULTS.iter().map(|&(k, v)| (k, (v.to_string(), None))).collect();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| err(Some(line), format!("expected `key = value`, got `{content}`")))?;
        let k = k.trim();
        let key = DEFAULTS
            .iter()
            .map(|(d, _)| *d)
            .find(|d| *d == k)
            .ok_or_else(|| err(Some(line), format!("unknown key `{k}`")))?;
        map.insert(key, (v.trim().to_string(), Some(line)));
    }
    build(&Entries { map })
}

fn build(e: &Entries) -> Result<ExperimentConfig, ConfigError> {
    let positive = |key: &'static str| -> Result<usize, ConfigError> {
        let v: usize = e.parse(key, "a positive integer")?;
        if v == 0 {
            return Err(err(e.line(key), format!("`{key}` must be positive")));
        }
        Ok(v)
    };
    let positive_real = |key: &'static str| -> Result<f64, ConfigError> {
        let v: f64 = e.parse(key, "a real number")?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(err(e.line(key), format!("`{key}` must be positive")));
        }
        Ok(v)
    };

    let n = positive("n_carriers")?;
    let n_tx = positive("n_tx")?;
    let n_sub = positive("subarrays")?;
    let users = positive("users")?;
    let n_k = positive("rx_per_user")?;
    if n_tx % n_sub != 0 {
        return Err(err(
            e.line("subarrays").or(e.line("n_tx")),
            format!("`subarrays` ({n_sub}) must divide `n_tx` ({n_tx})"),
        ));
    }
    if users % n_sub != 0 {
        return Err(err(
            e.line("subarrays").or(e.line("users")),
            format!("`subarrays` ({n_sub}) must divide `users` ({users})"),
        ));
    }
    let layout = SubarrayLayout::new(n_tx, n_sub, users, n_k).map_err(|x| {
        err(
            e.line("users").or(e.line("n_tx")),
            format!("`users`/`n_tx`/`rx_per_user`: {x}"),
        )
    })?;

    let paths = PathConfig {
        n_paths: positive("paths")?,
        l_max: e.parse("l_max", "a non-negative integer")?,
        alpha_max: e.parse("alpha_max", "a non-negative integer")?,
        fractional: e.parse("fractional", "true or false")?,
    };
    paths.validate(n).map_err(|x| {
        err(
            e.line("alpha_max").or(e.line("l_max")).or(e.line("n_carriers")),
            x.to_string(),
        )
    })?;

    let c1 = match e.raw("c1").0 {
        "auto" => default_c1(paths.alpha_max, n).map_err(|x| err(e.line("alpha_max"), x.to_string()))?,
        _ => e.parse("c1", "a real number or `auto`")?,
    };
    let c2 = match e.raw("c2").0 {
        "auto" => default_c2(n),
        _ => e.parse("c2", "a real number or `auto`")?,
    };
    AfdmParams::new(n, c1, c2).map_err(|x| err(e.line("c1").or(e.line("c2")), x.to_string()))?;

    let correlation = CorrelationSpec::new(e.parse("corr_coef", "a real number")?, e.parse("visibility", "a real number")?)
        .map_err(|x| err(e.line("corr_coef").or(e.line("visibility")), x.to_string()))?;

    let waveforms = dedup(e.list("waveform", "afdm or ofdm", Waveform::parse)?);
    let precoders = dedup(e.list("precoder", "zf, rzf, rka or swor_rka", PrecoderKind::parse)?);
    let metrics = dedup(e.list("metric", "sum_rate, ber or flops", Metric::parse)?);

    let step_rule = match e.raw("step_rule").0.to_ascii_lowercase().as_str() {
        "regularized" => StepRule::Regularized,
        "literal" => StepRule::Literal,
        other => {
            return Err(err(
                e.line("step_rule"),
                format!("`step_rule` expects regularized or literal, got `{other}`"),
            ))
        }
    };
    let order = Modulation::parse(e.raw("modulation").0).ok_or_else(|| {
        err(
            e.line("modulation"),
            format!("`modulation` expects qam4, qam16 or qam64, got `{}`", e.raw("modulation").0),
        )
    })?;
    let modulation = ModulationSpec::new(order, positive_real("symbol_power")?).expect("checked positive");

    let snr_grid = if e.was_set("snr_db") {
        e.list("snr_db", "a real number", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))?
    } else {
        let lo: f64 = e.parse("snr_min", "a real number")?;
        let hi: f64 = e.parse("snr_max", "a real number")?;
        let step = positive_real("snr_step")?;
        if hi < lo {
            return Err(err(
                e.line("snr_max").or(e.line("snr_min")),
                format!("`snr_max` ({hi}) is below `snr_min` ({lo})"),
            ));
        }
        snr_range(lo, hi, step)
    };
    if snr_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(err(e.line("snr_db"), "SNR grid must be strictly increasing"));
    }

    let experiment_id = e.raw("experiment_id").0.to_string();
    if experiment_id.is_empty() || experiment_id.contains(',') {
        return Err(err(
            e.line("experiment_id"),
            "`experiment_id` must be non-empty and free of commas",
        ));
    }

    Ok(ExperimentConfig {
        experiment_id,
        n_carriers: n,
        layout,
        waveforms,
        c1,
        c2,
        paths,
        correlation,
        precoders,
        iterations: positive("iterations")?,
        step_rule,
        modulation,
        power_budget: positive_real("power_budget")?,
        snr_grid,
        trials: positive("trials")?,
        frames_per_block: positive("frames_per_block")?,
        seed: e.parse("seed", "an unsigned 64-bit integer")?,
        metrics,
    })
}

/// `lo, lo + step, …` up to `hi` inclusive (with a small tolerance).
pub fn snr_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| lo + i as f64 * step).collect()
}

fn dedup<T: PartialEq>(v: Vec<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len());
    for x in v {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}
