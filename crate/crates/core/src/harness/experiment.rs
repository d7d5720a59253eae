//! Monte Carlo sweeps over SNR, precoders and waveforms.

use std::collections::BTreeMap;

use crate::linalg::{hermitian, CMatrix};
use crate::metrics::{noise_variance, sinr, sum_rate, BitCount, LinkTrial, ModulationSpec, UserMetrics};
use crate::precoding::{flops_model, precode, precode_dual, FlopDims, PrecoderKind};
use crate::rng::{derive_seed, substream, tag};
use crate::xl_array::{decomposition_from_effective, gen_xl_channel, PowerDecomposition, XlChannel};
use crate::Error;

use super::config::{parse_config, ConfigError, ExperimentConfig, Metric, Waveform};

/// A module error tagged with where in the sweep it happened.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("trial {trial}{}: {source}", snr_db.map(|s| format!(", SNR {s} dB")).unwrap_or_default())]
pub struct RunError {
    pub trial: usize,
    pub snr_db: Option<f64>,
    pub source: Error,
}

/// One output value.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub waveform: Waveform,
    pub precoder: PrecoderKind,
    pub snr_db: f64,
    pub metric: Metric,
    pub value: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Per-trial measurements at one (waveform, precoder, SNR index).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointOutcome {
    pub sum_rate: Option<f64>,
    pub bits: Option<BitCount>,
}

pub type TrialOutcome = BTreeMap<(Waveform, PrecoderKind, usize), PointOutcome>;

/// Per-subarray precoders for `channel`. Subarray `j` uses the substream
/// `(seed, PRECODER, trial, j)`, shared by every waveform.
pub fn subarray_precoders(
    cfg: &ExperimentConfig,
    channel: &XlChannel,
    kind: PrecoderKind,
    xi: f64,
    trial: usize,
) -> crate::Result<Vec<CMatrix>> {
    let pc = cfg.precode_config(kind, xi);
    (0..cfg.layout.n_sub())
        .map(|j| {
            let h = hermitian(channel.served_channel(j));
            let seed = derive_seed(cfg.seed, &[tag::PRECODER, trial as u64, j as u64]);
            precode(kind, h.view(), &pc, seed).map(|r| r.matrix)
        })
        .collect()
}

/// Channel realization of `trial`; identical draws for every waveform.
pub fn trial_channel(cfg: &ExperimentConfig, waveform: Waveform, trial: usize) -> crate::Result<XlChannel> {
    gen_xl_channel(
        &cfg.layout,
        &cfg.afdm_params(waveform),
        &cfg.correlation,
        &cfg.paths,
        derive_seed(cfg.seed, &[tag::CHANNEL, trial as u64]),
    )
}

/// Channel products reused by every precoder and SNR point of a trial.
pub struct TrialChannel {
    pub channel: XlChannel,
    /// `cross[s] = H_s·(H_s^s)ᴴ`: every user's rows against the channels of
    /// the streams served by `s`.
    pub cross: Vec<CMatrix>,
    /// `gram[s] = H_s^s·(H_s^s)ᴴ`, the served rows of `cross[s]`.
    pub gram: Vec<CMatrix>,
}

impl TrialChannel {
    pub fn new(channel: XlChannel) -> Self {
        let l = *channel.layout();
        let rows = channel.afdm().n_carriers() * l.n_rx_per_user() * l.k_s();
        let mut cross = Vec::with_capacity(l.n_sub());
        let mut gram = Vec::with_capacity(l.n_sub());
        for s in 0..l.n_sub() {
            let c = channel.subarray_stack(s).dot(&hermitian(channel.served_channel(s)));
            gram.push(c.slice(ndarray::s![s * rows..(s + 1) * rows, ..]).to_owned());
            cross.push(c);
        }
        Self { channel, cross, gram }
    }

    /// Dual precoders `X_s` (precoder `G_s = (H_s^s)ᴴ·X_s`), seeded as in
    /// [`subarray_precoders`].
    pub fn duals(&self, cfg: &ExperimentConfig, kind: PrecoderKind, xi: f64, trial: usize) -> crate::Result<Vec<CMatrix>> {
        let pc = cfg.precode_config(kind, xi);
        self.gram
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let seed = derive_seed(cfg.seed, &[tag::PRECODER, trial as u64, j as u64]);
                precode_dual(kind, g, &pc, seed).map(|d| d.x)
            })
            .collect()
    }

    /// Per-user power split for dual precoders `x`.
    pub fn decomposition(&self, x: &[CMatrix], symbol_power: f64, noise_var: f64) -> crate::Result<Vec<PowerDecomposition>> {
        let effective: Vec<CMatrix> = self.cross.iter().zip(x).map(|(c, x)| c.dot(x)).collect();
        decomposition_from_effective(
            self.channel.layout(),
            self.channel.afdm().n_carriers(),
            &effective,
            symbol_power,
            noise_var,
        )
    }

    pub fn link<'a>(&'a self, x: &'a [CMatrix], modulation: ModulationSpec) -> crate::Result<LinkTrial<'a>> {
        let a: Vec<&CMatrix> = self.cross.iter().collect();
        LinkTrial::from_factors(self.channel.layout(), self.channel.afdm().n_carriers(), &a, x, modulation)
    }
}

/// Runs one coherence block for every waveform, precoder and SNR point.
/// Depends only on `(cfg, trial)`, not on the trial count.
pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome, RunError> {
    let at = |snr_db: Option<f64>| move |source| RunError { trial, snr_db, source };
    let want_rate = cfg.metrics.contains(&Metric::SumRate);
    let want_ber = cfg.metrics.contains(&Metric::Ber);
    let mut out = TrialOutcome::new();
    if !want_rate && !want_ber {
        return Ok(out);
    }
    for &wf in &cfg.waveforms {
        let tc = TrialChannel::new(trial_channel(cfg, wf, trial).map_err(at(None))?);
        for &kind in &cfg.precoders {
            let mut fixed: Option<Vec<CMatrix>> = None;
            for (i, &snr_db) in cfg.snr_grid.iter().enumerate() {
                let snr_lin = 10f64.powf(snr_db / 10.0);
                let noise_var = noise_variance(snr_db, cfg.power_budget);
                let fresh;
                let x = if kind == PrecoderKind::Zf {
                    if fixed.is_none() {
                        fixed = Some(tc.duals(cfg, kind, 0.0, trial).map_err(at(Some(snr_db)))?);
                    }
                    fixed.as_ref().expect("just set")
                } else {
                    fresh = tc
                        .duals(cfg, kind, kind.regularization(snr_lin), trial)
                        .map_err(at(Some(snr_db)))?;
                    &fresh
                };
                let mut point = PointOutcome::default();
                if want_rate {
                    let users = tc
                        .decomposition(x, cfg.modulation.symbol_power, noise_var)
                        .and_then(|d| d.iter().map(|d| sinr(d).map(UserMetrics::from_sinr)).collect::<crate::Result<Vec<_>>>())
                        .map_err(at(Some(snr_db)))?;
                    point.sum_rate = Some(sum_rate(&users));
                }
                if want_ber {
                    let link = tc.link(x, cfg.modulation).map_err(at(Some(snr_db)))?;
                    let mut bit_rng = substream(cfg.seed, &[tag::BITS, trial as u64]);
                    let mut noise_rng = substream(cfg.seed, &[tag::NOISE, trial as u64]);
                    point.bits = Some(
                        link.run(cfg.frames_per_block, noise_var, &mut bit_rng, &mut noise_rng)
                            .map_err(at(Some(snr_db)))?,
                    );
                }
                out.insert((wf, kind, i), point);
            }
        }
    }
    Ok(out)
}

/// Modelled FLOPs of `kind` for the configured system.
pub fn config_flops(cfg: &ExperimentConfig, kind: PrecoderKind) -> u64 {
    let dims = FlopDims {
        n: cfg.n_carriers as u64,
        s: cfg.layout.n_sub() as u64,
        k_s: cfg.layout.k_s() as u64,
        n_ts: cfg.layout.n_ts() as u64,
        t: cfg.iterations as u64,
    };
    flops_model(kind.flop_algorithm(), &dims)
}

/// Runs every trial and aggregates: mean sum-rate, pooled BER, modelled
/// FLOPs. Rows come back sorted as they are written to CSV.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    let mut rate_sum: BTreeMap<(Waveform, PrecoderKind, usize), f64> = BTreeMap::new();
    let mut bit_sum: BTreeMap<(Waveform, PrecoderKind, usize), BitCount> = BTreeMap::new();
    for trial in 0..cfg.trials {
        for (key, point) in run_trial(cfg, trial)? {
            if let Some(r) = point.sum_rate {
                *rate_sum.entry(key).or_default() += r;
            }
            if let Some(b) = point.bits {
                bit_sum.entry(key).or_default().add(b);
            }
        }
    }

    let mut rows = Vec::new();
    for &wf in &cfg.waveforms {
        for &kind in &cfg.precoders {
            for (i, &snr_db) in cfg.snr_grid.iter().enumerate() {
                let row = |metric, value| ResultRow {
                    experiment_id: cfg.experiment_id.clone(),
                    waveform: wf,
                    precoder: kind,
                    snr_db,
                    metric,
                    value,
                    trials: cfg.trials,
                    seed: cfg.seed,
                };
                for &m in &cfg.metrics {
                    let value = match m {
                        Metric::SumRate => rate_sum[&(wf, kind, i)] / cfg.trials as f64,
                        Metric::Ber => bit_sum[&(wf, kind, i)].ber(),
                        Metric::Flops => config_flops(cfg, kind) as f64,
                    };
                    rows.push(row(m, value));
                }
            }
        }
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Orders rows by precoder name, waveform name, SNR, then metric name.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.precoder
            .name()
            .cmp(b.precoder.name())
            .then(a.waveform.name().cmp(b.waveform.name()))
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.metric.name().cmp(b.metric.name()))
    });
}

/// Named reproduction setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Sum-rate against SNR for ZF, rKA and SwoR-rKA.
    Fig3,
    /// BER against SNR for ZF and rKA, AFDM against OFDM, with mobility.
    Fig4,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fig3" => Some(Preset::Fig3),
            "fig4" => Some(Preset::Fig4),
            _ => None,
        }
    }
}

/// Preset configuration on the 256-antenna, 32-user, 4-subarray layout;
/// `scale` divides the antenna and user counts.
pub fn preset(which: Preset, scale: usize) -> Result<ExperimentConfig, ConfigError> {
    let bad = |m: String| ConfigError { line: None, message: m };
    if scale == 0 || 256 % scale != 0 || 32 % scale != 0 {
        return Err(bad(format!("scale {scale} must divide both 256 antennas and 32 users")));
    }
    let common = format!(
        "n_tx = {}\nusers = {}\nsubarrays = 4\nrx_per_user = 1\nwaveform = afdm, ofdm\n",
        256 / scale,
        32 / scale
    );
    let text = match which {
        Preset::Fig3 => format!("experiment_id = fig3\n{common}precoder = zf, rka, swor_rka\nmetric = sum_rate\n"),
        Preset::Fig4 => format!(
            "experiment_id = fig4\n{common}precoder = zf, rka\nmetric = ber\nalpha_max = 2\nfractional = true\n"
        ),
    };
    parse_config(&text).map_err(|e| bad(format!("preset: {}", e.message)))
}
