//! Closed-form operation counts for the precoders.

/// Algorithm whose cost is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlopAlgorithm {
    Zf,
    Rka,
    SworRka,
}

/// System dimensions entering the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopDims {
    /// Subcarriers `N`.
    pub n: u64,
    /// Subarrays `S`.
    pub s: u64,
    /// Users per subarray `K_s`.
    pub k_s: u64,
    /// Antennas per subarray `N_ts`.
    pub n_ts: u64,
    /// Kaczmarz iterations `T`.
    pub t: u64,
}

impl FlopDims {
    /// A single precoding problem of `rows × cols` with `N = S = 1`.
    pub fn single(rows: usize, cols: usize, t: usize) -> Self {
        Self {
            n: 1,
            s: 1,
            k_s: cols as u64,
            n_ts: rows as u64,
            t: t as u64,
        }
    }
}

/// Modelled operation count:
///
/// * ZF: `N²·S·2·K_s²·N_ts`
/// * rKA: `N²·S·N_ts·T`
/// * SwoR-rKA: `N²·S·(N_ts·T + 2·N_ts·K_s)`
///
/// At `K_s = 32`, `N_ts = 64` the ZF formula gives `131072·N²·S`. Some
/// published tables list `65536·N²·S` for that point; this function follows
/// the formula.
pub fn flops_model(alg: FlopAlgorithm, d: &FlopDims) -> u64 {
    let outer = d.n * d.n * d.s;
    match alg {
        FlopAlgorithm::Zf => outer * 2 * d.k_s * d.k_s * d.n_ts,
        FlopAlgorithm::Rka => outer * d.n_ts * d.t,
        FlopAlgorithm::SworRka => outer * (d.n_ts * d.t + 2 * d.n_ts * d.k_s),
    }
}
