//! Link metrics: SINR, sum-rate, Gray QAM, AWGN and Monte Carlo bit errors.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;

use crate::error::invalid;
use crate::linalg::{CMatrix, CVector};
use crate::rng::complex_gaussian;
use crate::xl_array::{PowerDecomposition, SubarrayLayout, XlChannel};
use crate::{Error, Result, C64};

/// `desired / (intra + inter + noise)`.
pub fn sinr(d: &PowerDecomposition) -> Result<f64> {
    if !(d.noise > 0.0) {
        return Err(Error::NonPositiveNoise(d.noise));
    }
    Ok(d.desired / (d.intra + d.inter + d.noise))
}

/// Per-user link quality.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserMetrics {
    pub sinr: f64,
    /// `log2(1 + sinr)` in bits/s/Hz.
    pub rate: f64,
    pub bit_errors: u64,
    pub bits: u64,
}

impl UserMetrics {
    pub fn from_sinr(sinr: f64) -> Self {
        Self {
            sinr,
            rate: (1.0 + sinr).log2(),
            ..Default::default()
        }
    }

    /// Bit error rate, or `None` before any bits were counted.
    pub fn ber(&self) -> Option<f64> {
        (self.bits > 0).then(|| self.bit_errors as f64 / self.bits as f64)
    }
}

/// `Σ_k log2(1 + sinr_k)`.
pub fn sum_rate(metrics: &[UserMetrics]) -> f64 {
    metrics.iter().map(|m| (1.0 + m.sinr).log2()).sum()
}

/// Square QAM orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qam4,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qam4" | "4" | "qpsk" => Some(Modulation::Qam4),
            "qam16" | "16" => Some(Modulation::Qam16),
            "qam64" | "64" => Some(Modulation::Qam64),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qam4 => "qam4",
            Modulation::Qam16 => "qam16",
            Modulation::Qam64 => "qam64",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSpec {
    pub order: Modulation,
    pub symbol_power: f64,
}

impl ModulationSpec {
    pub fn new(order: Modulation, symbol_power: f64) -> Result<Self> {
        if !(symbol_power > 0.0) {
            return Err(invalid("symbol_power", "must be positive"));
        }
        Ok(Self { order, symbol_power })
    }

    fn axis_bits(&self) -> usize {
        self.order.bits_per_symbol() / 2
    }

    fn axis_levels(&self) -> usize {
        1 << self.axis_bits()
    }

    /// Distance from the origin to the nearest level on one axis.
    fn unit(&self) -> f64 {
        let m = self.order.order() as f64;
        (self.symbol_power / (2.0 * (m - 1.0) / 3.0)).sqrt()
    }

    fn level(&self, bits: &[bool]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut idx = gray;
        let mut shift = gray >> 1;
        while shift > 0 {
            idx ^= shift;
            shift >>= 1;
        }
        (self.axis_levels() as f64 - 1.0 - 2.0 * idx as f64) * self.unit()
    }

    fn decide(&self, x: f64, out: &mut Vec<bool>) {
        let m = self.axis_levels();
        let pos = ((m as f64 - 1.0 - x / self.unit()) / 2.0).round();
        let idx = pos.clamp(0.0, (m - 1) as f64) as usize;
        let gray = idx ^ (idx >> 1);
        for b in (0..self.axis_bits()).rev() {
            out.push((gray >> b) & 1 == 1);
        }
    }
}

/// Gray-coded square QAM with average energy `symbol_power`.
///
/// The first half of each symbol's bits picks the in-phase level and the
/// second half the quadrature level; a leading 0 selects the positive side,
/// so QAM4 maps `00` to `(1 + j)/√2`.
pub fn qam_map(bits: &[bool], spec: &ModulationSpec) -> Result<CVector> {
    let bps = spec.order.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(Error::LengthMismatch {
            what: "bits (multiple of bits per symbol)",
            expected: bits.len().div_ceil(bps) * bps,
            actual: bits.len(),
        });
    }
    let half = bps / 2;
    Ok(bits
        .chunks_exact(bps)
        .map(|c| C64::new(spec.level(&c[..half]), spec.level(&c[half..])))
        .collect())
}

/// Minimum-distance hard decisions.
pub fn qam_demap(symbols: &[C64], spec: &ModulationSpec) -> Vec<bool> {
    let mut out = Vec::with_capacity(symbols.len() * spec.order.bits_per_symbol());
    for z in symbols {
        spec.decide(z.re, &mut out);
        spec.decide(z.im, &mut out);
    }
    out
}

/// I.i.d. `CN(0, variance)` samples.
pub fn awgn<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> Result<CVector> {
    if !(variance >= 0.0) {
        return Err(invalid("variance", format!("must be non-negative, got {variance}")));
    }
    Ok(CVector::from_shape_fn(len, |_| complex_gaussian(rng, variance)))
}

/// Noise variance for a transmit-power-to-noise ratio of `snr_db`.
pub fn noise_variance(snr_db: f64, power_budget: f64) -> f64 {
    power_budget / 10f64.powf(snr_db / 10.0)
}

/// Error and bit counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BitCount {
    pub errors: u64,
    pub bits: u64,
}

impl BitCount {
    pub fn add(&mut self, other: BitCount) {
        self.errors += other.errors;
        self.bits += other.bits;
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// A channel realization with its precoders, ready to carry frames.
///
/// Subarray `s` contributes `A_s·X_s·sym_s` to the received samples of all
/// users, where the rows of `A_s` are every user's channel towards `s`. With
/// `A_s = H_s` and `X_s = G_s` this is the plain precoded link; with
/// `A_s = H_s·H_sᴴ` and a dual precoder `X_s` it is the same link computed in
/// stream dimensions.
pub struct LinkTrial<'a> {
    factors: Vec<(ArrayView2<'a, C64>, ArrayView2<'a, C64>)>,
    gains: Vec<C64>,
    streams_per_sub: usize,
    rows: usize,
    modulation: ModulationSpec,
}

impl<'a> LinkTrial<'a> {
    /// `precoders[s]` is `N·N_ts × N·N_k·K_s` as for
    /// [`crate::xl_array::received_decomposition`].
    pub fn new(channel: &'a XlChannel, precoders: &'a [CMatrix], modulation: ModulationSpec) -> Result<Self> {
        let stacks: Vec<&CMatrix> = (0..channel.layout().n_sub()).map(|s| channel.subarray_stack(s)).collect();
        Self::from_factors(channel.layout(), channel.afdm().n_carriers(), &stacks, precoders, modulation)
    }

    /// Link with per-subarray factors `a[s]` (`K·N·N_k × d_s`) and `x[s]`
    /// (`d_s × N·N_k·K_s`).
    pub fn from_factors(
        layout: &SubarrayLayout,
        n_carriers: usize,
        a: &[&'a CMatrix],
        x: &'a [CMatrix],
        modulation: ModulationSpec,
    ) -> Result<Self> {
        let streams_per_sub = n_carriers * layout.n_rx_per_user() * layout.k_s();
        let rows = streams_per_sub * layout.n_sub();
        for (what, len) in [("channel factors", a.len()), ("precoders", x.len())] {
            if len != layout.n_sub() {
                return Err(Error::LengthMismatch {
                    what,
                    expected: layout.n_sub(),
                    actual: len,
                });
            }
        }
        let mut gains = Vec::with_capacity(rows);
        let mut factors = Vec::with_capacity(a.len());
        for (s, (a, x)) in a.iter().zip(x).enumerate() {
            if a.nrows() != rows || x.dim() != (a.ncols(), streams_per_sub) {
                return Err(invalid(
                    "precoders",
                    format!(
                        "factor shapes {:?} and {:?} do not match {rows} rows and {streams_per_sub} streams",
                        a.dim(),
                        x.dim()
                    ),
                ));
            }
            // Stream q of subarray s is received on global row s·streams_per_sub + q.
            for q in 0..streams_per_sub {
                gains.push(a.row(s * streams_per_sub + q).dot(&x.column(q)));
            }
            factors.push((a.view(), x.view()));
        }
        Ok(Self {
            factors,
            gains,
            streams_per_sub,
            rows,
            modulation,
        })
    }

    /// Effective complex gain of every stream, in global stream order.
    pub fn gains(&self) -> &[C64] {
        &self.gains
    }

    /// Bits carried by one frame.
    pub fn bits_per_frame(&self) -> usize {
        self.rows * self.modulation.order.bits_per_symbol()
    }

    /// Sends `frames` frames of random bits with noise of `noise_var` per
    /// sample, equalizes every stream by its own gain and counts bit errors.
    /// Noise is drawn as unit-variance samples scaled afterwards, so one
    /// noise stream serves every noise level.
    pub fn run<B: Rng + ?Sized, W: Rng + ?Sized>(
        &self,
        frames: usize,
        noise_var: f64,
        bit_rng: &mut B,
        noise_rng: &mut W,
    ) -> Result<BitCount> {
        if !(noise_var >= 0.0) {
            return Err(invalid("noise_var", format!("must be non-negative, got {noise_var}")));
        }
        let bps = self.modulation.order.bits_per_symbol();
        let bits: Vec<bool> = (0..frames * self.bits_per_frame()).map(|_| bit_rng.random()).collect();
        let symbols = qam_map(&bits, &self.modulation)?;
        // Column f holds frame f; rows are global streams.
        let tx = Array2::from_shape_vec((frames, self.rows), symbols.to_vec())
            .expect("symbol count matches")
            .reversed_axes();
        let mut rx = CMatrix::zeros((self.rows, frames));
        for (s, (a, x)) in self.factors.iter().enumerate() {
            let block = tx.slice(s![s * self.streams_per_sub..(s + 1) * self.streams_per_sub, ..]);
            rx = rx + a.dot(&x.dot(&block));
        }
        let sd = noise_var.sqrt();
        let noise = awgn(noise_rng, self.rows * frames, 1.0)?;
        let mut count = BitCount::default();
        let mut decided = Vec::with_capacity(bps);
        for f in 0..frames {
            for r in 0..self.rows {
                let y = rx[(r, f)] + noise[f * self.rows + r] * sd;
                let g = self.gains[r];
                let z = if g.norm_sqr() > 0.0 { y / g } else { y };
                decided.clear();
                self.modulation.decide(z.re, &mut decided);
                self.modulation.decide(z.im, &mut decided);
                let sent = &bits[(f * self.rows + r) * bps..(f * self.rows + r + 1) * bps];
                count.errors += decided.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
            }
        }
        count.bits = bits.len() as u64;
        Ok(count)
    }
}

/// One coherence block: transmit `frames` frames over `channel` with
/// `precoders` and count bit errors.
pub fn ber_trial<B: Rng + ?Sized, W: Rng + ?Sized>(
    channel: &XlChannel,
    precoders: &[CMatrix],
    modulation: ModulationSpec,
    frames: usize,
    noise_var: f64,
    bit_rng: &mut B,
    noise_rng: &mut W,
) -> Result<BitCount> {
    LinkTrial::new(channel, precoders, modulation)?.run(frames, noise_var, bit_rng, noise_rng)
}
