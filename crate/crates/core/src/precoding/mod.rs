//! Linear precoders for one subarray.
//!
//! Every precoder here takes the subarray's channel in "transmit-side" form:
//! `h` is `n_tx_dims × n_streams`, column `r` being the channel vector of
//! stream `r` (the conjugate transpose of the stacked user channels). The
//! regularized zero-forcing solution is `G = β·h·(hᴴh + ξI)⁻¹`; the
//! Kaczmarz precoders approximate it one column at a time without forming an
//! inverse.

mod flops;
mod kaczmarz;

pub use flops::{flops_model, FlopAlgorithm, FlopDims};
pub use kaczmarz::{kaczmarz_duals, kaczmarz_matrix, rka_precode, row_step, swor_rka_precode, KaczmarzColumn};

use ndarray::ArrayView2;

use crate::error::invalid;
use crate::linalg::{frobenius_sq, hermitian, hpd_solve, identity, CMatrix};
use crate::{Error, Result, C64};

/// How the Kaczmarz solver picks the next row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Uniform over the nonzero rows, with replacement.
    Uniform,
    /// Sweeps over the nonzero rows in a random order drawn with probability
    /// proportional to `‖h_r‖² + ξ`, without replacement inside a sweep.
    NormWeightedWithoutReplacement,
}

/// Kaczmarz step size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// `η = (e_k[r] - ⟨h_r, m⟩ - ξ·n[r]) / (‖h_r‖² + ξ)`; the fixed point is the
    /// RZF column.
    Regularized,
    /// `η = (e_k[r] - ⟨h_r, m⟩ - n[r]) / ‖h_r‖²`, the step as printed in the
    /// original algorithm listing. Kept for comparison only.
    Literal,
}

/// Precoder family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrecoderKind {
    /// Zero forcing (`ξ = 0`).
    Zf,
    /// Regularized zero forcing, solved directly.
    Rzf,
    /// Randomized Kaczmarz with uniform row sampling.
    Rka,
    /// Randomized Kaczmarz with norm-weighted sweeps.
    SworRka,
}

impl PrecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            PrecoderKind::Zf => "zf",
            PrecoderKind::Rzf => "rzf",
            PrecoderKind::Rka => "rka",
            PrecoderKind::SworRka => "swor_rka",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zf" => Some(PrecoderKind::Zf),
            "rzf" => Some(PrecoderKind::Rzf),
            "rka" => Some(PrecoderKind::Rka),
            "swor_rka" | "swor-rka" | "sworrka" => Some(PrecoderKind::SworRka),
            _ => None,
        }
    }

    /// Regularization used at a given linear SNR: none for ZF, `1/snr`
    /// otherwise.
    pub fn regularization(self, snr_linear: f64) -> f64 {
        match self {
            PrecoderKind::Zf => 0.0,
            _ => 1.0 / snr_linear,
        }
    }

    pub fn flop_algorithm(self) -> FlopAlgorithm {
        match self {
            PrecoderKind::Zf | PrecoderKind::Rzf => FlopAlgorithm::Zf,
            PrecoderKind::Rka => FlopAlgorithm::Rka,
            PrecoderKind::SworRka => FlopAlgorithm::SworRka,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecodeConfig {
    /// Regularization `ξ ≥ 0`.
    pub xi: f64,
    /// Kaczmarz iterations `T` per column.
    pub iterations: usize,
    pub sampling: Sampling,
    pub step_rule: StepRule,
    /// Transmit energy allowed per subarray and frame.
    pub power_budget: f64,
    pub symbol_power: f64,
    /// Record the per-iteration distance to the RZF column.
    pub track_residual: bool,
}

impl Default for PrecodeConfig {
    fn default() -> Self {
        Self {
            xi: 0.0,
            iterations: 200,
            sampling: Sampling::Uniform,
            step_rule: StepRule::Regularized,
            power_budget: 1.0,
            symbol_power: 1.0,
            track_residual: false,
        }
    }
}

impl PrecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) || !self.xi.is_finite() {
            return Err(invalid("xi", format!("must be finite and non-negative, got {}", self.xi)));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be at least 1"));
        }
        if !(self.power_budget > 0.0) {
            return Err(invalid("power_budget", "must be positive"));
        }
        if !(self.symbol_power > 0.0) {
            return Err(invalid("symbol_power", "must be positive"));
        }
        Ok(())
    }
}

/// A normalized precoder with its diagnostics.
#[derive(Debug, Clone)]
pub struct PrecodeResult {
    pub matrix: CMatrix,
    pub beta: f64,
    /// Modelled cost for this problem size (see [`flops_model`]).
    pub flops: u64,
    /// Per-iteration relative distance to the RZF solution, averaged over
    /// columns; empty unless residual tracking is on.
    pub residual_history: Vec<f64>,
}

/// Scales `g_raw` so that `symbol_power·‖G‖_F² = power_budget`.
pub fn power_normalize(g_raw: &CMatrix, power_budget: f64, symbol_power: f64) -> Result<(CMatrix, f64)> {
    let energy = frobenius_sq(g_raw.view());
    if energy == 0.0 {
        return Err(Error::ZeroPrecoder);
    }
    let beta = (power_budget / (symbol_power * energy)).sqrt();
    Ok((g_raw.mapv(|z| z * beta), beta))
}

/// `(hᴴh + ξI)`.
pub(crate) fn regularized_gram(h: ArrayView2<C64>, xi: f64) -> CMatrix {
    let mut gram = hermitian(h).dot(&h);
    for i in 0..gram.nrows() {
        gram[(i, i)] += xi;
    }
    gram
}

/// Unnormalized RZF matrix `h·(hᴴh + ξI)⁻¹`.
pub fn rzf_direction(h: ArrayView2<C64>, xi: f64) -> Result<CMatrix> {
    let gram = regularized_gram(h, xi);
    let inv = hpd_solve(&gram, &identity(gram.nrows()))?;
    Ok(h.dot(&inv))
}

/// `G = β·h·(hᴴh + ξI)⁻¹`; `ξ = 0` gives zero forcing.
pub fn rzf_precode(h: ArrayView2<C64>, cfg: &PrecodeConfig) -> Result<PrecodeResult> {
    cfg.validate()?;
    let g_raw = rzf_direction(h, cfg.xi)?;
    let (matrix, beta) = power_normalize(&g_raw, cfg.power_budget, cfg.symbol_power)?;
    Ok(PrecodeResult {
        matrix,
        beta,
        flops: flops_model(FlopAlgorithm::Zf, &FlopDims::single(h.nrows(), h.ncols(), cfg.iterations)),
        residual_history: Vec::new(),
    })
}

/// A normalized precoder kept in the form `G = h·x`.
///
/// Everything a link needs follows from the Gram matrix `Γ = hᴴh`:
/// `‖G‖_F² = tr(xᴴΓx)` and `hᴴG = Γx`.
#[derive(Debug, Clone)]
pub struct DualPrecoder {
    /// Already includes `beta`.
    pub x: CMatrix,
    pub beta: f64,
}

/// `tr(xᴴΓx)`, the squared Frobenius norm of `h·x`.
pub fn dual_energy(gram: &CMatrix, x: &CMatrix) -> f64 {
    gram.dot(x).iter().zip(x).map(|(gx, xv)| (xv.conj() * gx).re).sum()
}

/// Normalized precoder of the requested kind from `Γ = hᴴh` only. Kaczmarz
/// columns use substreams of `seed`.
pub fn precode_dual(kind: PrecoderKind, gram: &CMatrix, cfg: &PrecodeConfig, seed: u64) -> Result<DualPrecoder> {
    cfg.validate()?;
    let raw = match kind {
        PrecoderKind::Zf | PrecoderKind::Rzf => {
            let xi = if kind == PrecoderKind::Zf { 0.0 } else { cfg.xi };
            let mut reg = gram.clone();
            for i in 0..reg.nrows() {
                reg[(i, i)] += xi;
            }
            hpd_solve(&reg, &identity(reg.nrows()))?
        }
        PrecoderKind::Rka => kaczmarz_duals(gram, &PrecodeConfig { sampling: Sampling::Uniform, ..*cfg }, seed)?,
        PrecoderKind::SworRka => kaczmarz_duals(
            gram,
            &PrecodeConfig {
                sampling: Sampling::NormWeightedWithoutReplacement,
                ..*cfg
            },
            seed,
        )?,
    };
    let energy = dual_energy(gram, &raw);
    if !(energy > 0.0) {
        return Err(Error::ZeroPrecoder);
    }
    let beta = (cfg.power_budget / (cfg.symbol_power * energy)).sqrt();
    Ok(DualPrecoder {
        x: raw.mapv(|z| z * beta),
        beta,
    })
}

/// Full normalized precoder of the requested kind. Kaczmarz columns use
/// substreams of `seed`.
pub fn precode(kind: PrecoderKind, h: ArrayView2<C64>, cfg: &PrecodeConfig, seed: u64) -> Result<PrecodeResult> {
    match kind {
        PrecoderKind::Zf => rzf_precode(h, &PrecodeConfig { xi: 0.0, ..*cfg }),
        PrecoderKind::Rzf => rzf_precode(h, cfg),
        PrecoderKind::Rka => kaczmarz_precode(h, &PrecodeConfig { sampling: Sampling::Uniform, ..*cfg }, seed),
        PrecoderKind::SworRka => kaczmarz_precode(
            h,
            &PrecodeConfig {
                sampling: Sampling::NormWeightedWithoutReplacement,
                ..*cfg
            },
            seed,
        ),
    }
}

fn kaczmarz_precode(h: ArrayView2<C64>, cfg: &PrecodeConfig, seed: u64) -> Result<PrecodeResult> {
    cfg.validate()?;
    let (g_raw, residual_history) = kaczmarz_matrix(h, cfg, seed)?;
    let (matrix, beta) = power_normalize(&g_raw, cfg.power_budget, cfg.symbol_power)?;
    let alg = match cfg.sampling {
        Sampling::Uniform => FlopAlgorithm::Rka,
        Sampling::NormWeightedWithoutReplacement => FlopAlgorithm::SworRka,
    };
    Ok(PrecodeResult {
        matrix,
        beta,
        flops: flops_model(alg, &FlopDims::single(h.nrows(), h.ncols(), cfg.iterations)),
        residual_history,
    })
}
