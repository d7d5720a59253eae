//! Discrete affine Fourier transform (DAFT) and AFDM modulation.
//!
//! With `Λ_c = diag(e^{-j2πcn²})` and the unitary DFT `F`, the AFDM modulator
//! is `A = Λ_{c1}^H F^H Λ_{c2}^H`, so a block of DAFT-domain symbols `x` is sent
//! as the time-domain samples `s = A x`. Setting `c1 = c2 = 0` turns `A` into
//! the unitary inverse DFT, which is how the OFDM baseline is obtained.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rustfft::FftPlanner;

use crate::error::invalid;
use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result, C64};

/// Chirp-carrier count and the two chirp rates of the DAFT.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AfdmParams {
    n_carriers: usize,
    c1: f64,
    c2: f64,
}

impl AfdmParams {
    pub fn new(n_carriers: usize, c1: f64, c2: f64) -> Result<Self> {
        if n_carriers < 2 {
            return Err(invalid("n_carriers", format!("must be at least 2, got {n_carriers}")));
        }
        if !c1.is_finite() {
            return Err(invalid("c1", "must be finite"));
        }
        if !c2.is_finite() {
            return Err(invalid("c2", "must be finite"));
        }
        Ok(Self { n_carriers, c1, c2 })
    }

    /// OFDM: both chirp rates zero.
    pub fn ofdm(n_carriers: usize) -> Result<Self> {
        Self::new(n_carriers, 0.0, 0.0)
    }

    /// AFDM tuned for integer Doppler up to `alpha_max`, using
    /// [`default_c1`] and [`default_c2`].
    pub fn tuned(n_carriers: usize, alpha_max: u32) -> Result<Self> {
        let c1 = default_c1(alpha_max, n_carriers)?;
        Self::new(n_carriers, c1, default_c2(n_carriers))
    }

    pub fn n_carriers(&self) -> usize {
        self.n_carriers
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn is_ofdm(&self) -> bool {
        self.c1 == 0.0 && self.c2 == 0.0
    }
}

/// `e^{+j2π c n²}`, i.e. the n-th diagonal entry of `Λ_c^H`.
pub(crate) fn chirp(c: f64, n: usize) -> C64 {
    let n2 = (n as f64) * (n as f64);
    let frac = (c * n2).rem_euclid(1.0);
    C64::from_polar(1.0, 2.0 * PI * frac)
}

/// `e^{+j2π k/N}` with the exponent reduced modulo `N` in integer arithmetic.
pub(crate) fn root_of_unity(k: i64, n: usize) -> C64 {
    let r = k.rem_euclid(n as i64) as f64;
    C64::from_polar(1.0, 2.0 * PI * r / n as f64)
}

/// Which side of the transform a frame lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Daft,
    Time,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Daft => "DAFT",
            Domain::Time => "time",
        }
    }
}

/// A block of `N` complex values tagged with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DaftFrame {
    domain: Domain,
    values: CVector,
}

impl DaftFrame {
    pub fn daft(values: CVector) -> Self {
        Self {
            domain: Domain::Daft,
            values,
        }
    }

    pub fn time(values: CVector) -> Self {
        Self {
            domain: Domain::Time,
            values,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &CVector {
        &self.values
    }

    pub fn into_values(self) -> CVector {
        self.values
    }

    fn check(&self, params: &AfdmParams, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(Error::WrongDomain {
                expected: domain.name(),
                actual: self.domain.name(),
            });
        }
        if self.values.len() != params.n_carriers {
            return Err(Error::LengthMismatch {
                what: "frame",
                expected: params.n_carriers,
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

/// The DAFT matrix `A = Λ_{c1}^H F^H Λ_{c2}^H` (unitary).
pub fn daft_matrix(params: &AfdmParams) -> CMatrix {
    let n = params.n_carriers;
    let norm = 1.0 / (n as f64).sqrt();
    let row: Vec<C64> = (0..n).map(|i| chirp(params.c1, i)).collect();
    let col: Vec<C64> = (0..n).map(|i| chirp(params.c2, i)).collect();
    Array2::from_shape_fn((n, n), |(i, m)| {
        row[i] * root_of_unity((i * m) as i64, n) * col[m] * norm
    })
}

/// `s = A x`, computed with one inverse FFT.
pub fn modulate(params: &AfdmParams, symbols: &DaftFrame) -> Result<DaftFrame> {
    symbols.check(params, Domain::Daft)?;
    let n = params.n_carriers;
    let mut buf: Vec<C64> = symbols
        .values
        .iter()
        .enumerate()
        .map(|(m, &x)| x * chirp(params.c2, m))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let norm = 1.0 / (n as f64).sqrt();
    let out = Array1::from_iter(
        buf.into_iter()
            .enumerate()
            .map(|(i, v)| v * norm * chirp(params.c1, i)),
    );
    Ok(DaftFrame::time(out))
}

/// `x̂ = A^H s`, computed with one forward FFT.
pub fn demodulate(params: &AfdmParams, samples: &DaftFrame) -> Result<DaftFrame> {
    samples.check(params, Domain::Time)?;
    let n = params.n_carriers;
    let mut buf: Vec<C64> = samples
        .values
        .iter()
        .enumerate()
        .map(|(i, &s)| s * chirp(params.c1, i).conj())
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = 1.0 / (n as f64).sqrt();
    let out = Array1::from_iter(
        buf.into_iter()
            .enumerate()
            .map(|(m, v)| v * norm * chirp(params.c2, m).conj()),
    );
    Ok(DaftFrame::daft(out))
}

/// Prepends a chirp-periodic prefix of `l_max` samples.
///
/// Prefix sample `n ∈ {-l_max, …, -1}` is `s[n+N]·e^{-j2πc1(N² + 2Nn)}`;
/// output index `i` holds `s[i - l_max]`. With `c1 = 0` this is an ordinary
/// cyclic prefix.
pub fn cpp_extend(params: &AfdmParams, samples: &DaftFrame, l_max: usize) -> Result<CVector> {
    samples.check(params, Domain::Time)?;
    let n = params.n_carriers;
    if l_max >= n {
        return Err(invalid("l_max", format!("must be below N = {n}, got {l_max}")));
    }
    let s = &samples.values;
    let nf = n as f64;
    let mut out = Vec::with_capacity(n + l_max);
    for k in 1..=l_max {
        let idx = l_max - k + 1;
        let neg = -(idx as f64);
        let phase = (params.c1 * (nf * nf + 2.0 * nf * neg)).rem_euclid(1.0);
        out.push(s[n - idx] * C64::from_polar(1.0, -2.0 * PI * phase));
    }
    out.extend(s.iter().copied());
    Ok(Array1::from_vec(out))
}

/// Smallest chirp rate that keeps integer-Doppler paths apart in the DAFT
/// domain: `c1 = (2·alpha_max + 1) / (2N)`.
pub fn default_c1(alpha_max: u32, n_carriers: usize) -> Result<f64> {
    let span = 2 * alpha_max as usize + 1;
    if n_carriers == 0 || span > n_carriers {
        return Err(invalid(
            "alpha_max",
            format!("2·alpha_max + 1 = {span} exceeds N = {n_carriers}"),
        ));
    }
    Ok(span as f64 / (2.0 * n_carriers as f64))
}

/// Default second chirp rate `1/(2N²π)`. Any finite value works; it only
/// rotates the phases of the DAFT-domain symbols.
pub fn default_c2(n_carriers: usize) -> f64 {
    let n = n_carriers as f64;
    1.0 / (2.0 * n * n * PI)
}
