//! Doubly-dispersive (delay + Doppler) channels in the DAFT domain.
//!
//! A path with integer delay `l`, Doppler `v = α + β` and gain `h` acts on the
//! time-domain samples as `r[n] = h·e^{-j2πvn/N}·s[n-l]`, where samples with
//! negative index come from the chirp-periodic prefix. After DAFT
//! demodulation its effective matrix has entries
//!
//! ```text
//! H_i[m, m'] = (1/N) · c(l, m, m') · F(θ),   θ = m - m' + ind + β,
//! c(l, m, m') = e^{j(2π/N)(N c1 l² - m' l + N c2 (m'² - m²))},
//! F(θ)        = Σ_{n<N} e^{-j2πθn/N} = (e^{-j2πθ} - 1) / (e^{-j2πθ/N} - 1),
//! ind         = (α + 2N c1 l) mod N.
//! ```
//!
//! [`time_domain_oracle`] builds the same matrix by pushing unit vectors
//! through the prefixed waveform, and the two must agree.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use rand::Rng;

use crate::afdm::{chirp, cpp_extend, daft_matrix, root_of_unity, AfdmParams, DaftFrame};
use crate::error::invalid;
use crate::linalg::{hermitian, CMatrix, CVector};
use crate::rng::complex_gaussian;
use crate::{Error, Result, C64};

/// Below this distance from an integer, `θ` is treated as exactly integer.
const INTEGER_THETA_TOL: f64 = 1e-9;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDopplerPath {
    /// Delay in samples.
    pub delay: usize,
    /// Integer part `α` of the normalized Doppler.
    pub doppler_int: i32,
    /// Fractional part `β ∈ (-1/2, 1/2]` of the normalized Doppler.
    pub doppler_frac: f64,
    pub gain: C64,
}

impl DelayDopplerPath {
    pub fn new(delay: usize, doppler_int: i32, doppler_frac: f64, gain: C64) -> Self {
        Self {
            delay,
            doppler_int,
            doppler_frac,
            gain,
        }
    }

    /// Normalized Doppler `v = α + β`.
    pub fn doppler(&self) -> f64 {
        self.doppler_int as f64 + self.doppler_frac
    }
}

/// Paths of one link together with the bounds they respect.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    paths: Vec<DelayDopplerPath>,
    l_max: usize,
    v_max: f64,
}

impl PathSet {
    pub fn new(paths: Vec<DelayDopplerPath>, l_max: usize, v_max: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(invalid("paths", "at least one path is required"));
        }
        if !(v_max >= 0.0) {
            return Err(invalid("v_max", "must be non-negative"));
        }
        for (i, p) in paths.iter().enumerate() {
            if p.delay > l_max {
                return Err(invalid(
                    "paths",
                    format!("path {i} delay {} exceeds l_max {l_max}", p.delay),
                ));
            }
            if !(p.doppler_frac > -0.5 && p.doppler_frac <= 0.5) {
                return Err(invalid(
                    "paths",
                    format!("path {i} fractional Doppler {} outside (-1/2, 1/2]", p.doppler_frac),
                ));
            }
            if p.doppler().abs() > v_max + 1e-12 {
                return Err(invalid(
                    "paths",
                    format!("path {i} Doppler {} exceeds v_max {v_max}", p.doppler()),
                ));
            }
        }
        Ok(Self {
            paths,
            l_max,
            v_max,
        })
    }

    pub fn paths(&self) -> &[DelayDopplerPath] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// The gains stored on the paths.
    pub fn gains(&self) -> Vec<C64> {
        self.paths.iter().map(|p| p.gain).collect()
    }
}

/// Chirp phase factor `c(l, m, m')`.
pub fn chirp_phase(params: &AfdmParams, l: usize, m: usize, m_prime: usize) -> C64 {
    let n = params.n_carriers();
    chirp(params.c1(), l)
        * root_of_unity(-((m_prime * l) as i64), n)
        * chirp(params.c2(), m_prime)
        * chirp(params.c2(), m).conj()
}

/// Index indicator `ind = (α + 2N c1 l) mod N`, real-valued for general `c1`.
fn index_indicator(params: &AfdmParams, path: &DelayDopplerPath) -> f64 {
    let n = params.n_carriers() as f64;
    (path.doppler_int as f64 + 2.0 * n * params.c1() * path.delay as f64).rem_euclid(n)
}

/// `Σ_{n<N} e^{-j2πθn/N}` with the removable singularity at `θ ≡ 0 (mod N)`.
fn dirichlet(theta: f64, n: usize) -> C64 {
    let nf = n as f64;
    let t = theta.rem_euclid(nf);
    let nearest = t.round();
    if (t - nearest).abs() < INTEGER_THETA_TOL {
        return if (nearest as usize) % n == 0 {
            C64::new(nf, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
    }
    let num = C64::from_polar(1.0, -2.0 * PI * t) - 1.0;
    let den = C64::from_polar(1.0, -2.0 * PI * t / nf) - 1.0;
    num / den
}

/// Doppler-spread kernel `F(θ)` with `θ = m - m' + ind + β`.
pub fn spread_kernel(params: &AfdmParams, path: &DelayDopplerPath, m: usize, m_prime: usize) -> C64 {
    let theta =
        m as f64 - m_prime as f64 + index_indicator(params, path) + path.doppler_frac;
    dirichlet(theta, params.n_carriers())
}

/// Unit-gain effective matrix of one path.
pub fn path_matrix(params: &AfdmParams, path: &DelayDopplerPath) -> CMatrix {
    let n = params.n_carriers();
    let l = path.delay;
    let ind = index_indicator(params, path);
    // F depends on (m - m') mod N only.
    let kernel: Vec<C64> = (0..n)
        .map(|d| dirichlet(d as f64 + ind + path.doppler_frac, n))
        .collect();
    let lead = chirp(params.c1(), l) / n as f64;
    let col: Vec<C64> = (0..n)
        .map(|mp| root_of_unity(-((mp * l) as i64), n) * chirp(params.c2(), mp))
        .collect();
    let row: Vec<C64> = (0..n).map(|m| chirp(params.c2(), m).conj() * lead).collect();
    Array2::from_shape_fn((n, n), |(m, mp)| {
        let k = kernel[(m + n - mp) % n];
        if k.re == 0.0 && k.im == 0.0 {
            k
        } else {
            row[m] * col[mp] * k
        }
    })
}

/// `Σ_i gains[i] · path_matrix(paths[i])`.
pub fn link_matrix(params: &AfdmParams, paths: &PathSet, gains: &[C64]) -> Result<CMatrix> {
    if gains.len() != paths.len() {
        return Err(Error::LengthMismatch {
            what: "path gains",
            expected: paths.len(),
            actual: gains.len(),
        });
    }
    let n = params.n_carriers();
    let mut out = CMatrix::zeros((n, n));
    for (p, &g) in paths.paths().iter().zip(gains) {
        if g != C64::new(0.0, 0.0) {
            out.scaled_add(g, &path_matrix(params, p));
        }
    }
    Ok(out)
}

/// Brute-force DAFT-domain matrix: build the time-domain LTV matrix by
/// sending every unit vector through the chirp-periodic prefix and the path
/// sum, then return `A^H H_t A`. Independent of the closed-form kernel.
pub fn time_domain_oracle(params: &AfdmParams, paths: &PathSet, gains: &[C64]) -> Result<CMatrix> {
    if gains.len() != paths.len() {
        return Err(Error::LengthMismatch {
            what: "path gains",
            expected: paths.len(),
            actual: gains.len(),
        });
    }
    let n = params.n_carriers();
    let l_max = paths.l_max();
    if l_max >= n {
        return Err(invalid("l_max", format!("must be below N = {n}")));
    }
    let mut h_time = CMatrix::zeros((n, n));
    for q in 0..n {
        let mut unit = Array1::zeros(n);
        unit[q] = C64::new(1.0, 0.0);
        let tx = cpp_extend(params, &DaftFrame::time(unit), l_max)?;
        for (p, &g) in paths.paths().iter().zip(gains) {
            let v = p.doppler();
            for t in 0..n {
                let doppler = C64::from_polar(1.0, -2.0 * PI * v * t as f64 / n as f64);
                h_time[(t, q)] += g * doppler * tx[t + l_max - p.delay];
            }
        }
    }
    let a = daft_matrix(params);
    Ok(hermitian(a.view()).dot(&h_time).dot(&a))
}

/// DAFT-domain MIMO channel: an `N_r × N_t` grid of `N × N` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockChannel {
    blocks: Vec<CMatrix>,
    n: usize,
    n_r: usize,
    n_t: usize,
}

impl BlockChannel {
    /// `(N, N_r, N_t)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.n_r, self.n_t)
    }

    pub fn block(&self, r: usize, t: usize) -> &CMatrix {
        &self.blocks[r * self.n_t + t]
    }

    /// The `N·N_r × N·N_t` matrix with block `(r, t)` at row-block `r`,
    /// column-block `t`.
    pub fn flatten(&self) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros((n * self.n_r, n * self.n_t));
        for r in 0..self.n_r {
            for t in 0..self.n_t {
                out.slice_mut(s![r * n..(r + 1) * n, t * n..(t + 1) * n])
                    .assign(self.block(r, t));
            }
        }
        out
    }
}

/// Assembles per-antenna-pair link matrices (`grid[r][t]`) into a
/// [`BlockChannel`].
pub fn assemble_mimo(grid: Vec<Vec<CMatrix>>) -> Result<BlockChannel> {
    let n_r = grid.len();
    if n_r == 0 {
        return Err(Error::RaggedGrid("grid has no rows".into()));
    }
    let n_t = grid[0].len();
    if n_t == 0 {
        return Err(Error::RaggedGrid("grid has no columns".into()));
    }
    let n = grid[0][0].nrows();
    let mut blocks = Vec::with_capacity(n_r * n_t);
    for (r, row) in grid.into_iter().enumerate() {
        if row.len() != n_t {
            return Err(Error::RaggedGrid(format!(
                "row {r} has {} blocks, expected {n_t}",
                row.len()
            )));
        }
        for (t, b) in row.into_iter().enumerate() {
            if b.dim() != (n, n) {
                return Err(Error::RaggedGrid(format!(
                    "block ({r}, {t}) is {:?}, expected {n}x{n}",
                    b.dim()
                )));
            }
            blocks.push(b);
        }
    }
    Ok(BlockChannel {
        blocks,
        n,
        n_r,
        n_t,
    })
}

/// `y = H_MIMO x + w`.
pub fn apply_channel(ch: &BlockChannel, x: &CVector, noise: &CVector) -> Result<CVector> {
    let (n, n_r, n_t) = ch.dims();
    if x.len() != n * n_t {
        return Err(Error::LengthMismatch {
            what: "transmit vector",
            expected: n * n_t,
            actual: x.len(),
        });
    }
    if noise.len() != n * n_r {
        return Err(Error::LengthMismatch {
            what: "noise vector",
            expected: n * n_r,
            actual: noise.len(),
        });
    }
    let mut y = noise.clone();
    for r in 0..n_r {
        let mut yr = y.slice_mut(s![r * n..(r + 1) * n]);
        for t in 0..n_t {
            yr += &ch.block(r, t).dot(&x.slice(s![t * n..(t + 1) * n]));
        }
    }
    Ok(y)
}

/// Statistical description of the paths drawn for a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathConfig {
    pub n_paths: usize,
    pub l_max: usize,
    pub alpha_max: u32,
    pub fractional: bool,
}

impl PathConfig {
    /// Doppler bound implied by the configuration.
    pub fn v_max(&self) -> f64 {
        self.alpha_max as f64 + if self.fractional { 0.5 } else { 0.0 }
    }

    pub fn validate(&self, n_carriers: usize) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid("paths", "at least one path is required"));
        }
        if self.l_max >= n_carriers {
            return Err(invalid(
                "l_max",
                format!("must be below N = {n_carriers}, got {}", self.l_max),
            ));
        }
        if 2 * self.alpha_max as usize + 1 > n_carriers {
            return Err(invalid(
                "alpha_max",
                format!("2·alpha_max + 1 exceeds N = {n_carriers}"),
            ));
        }
        Ok(())
    }
}

/// I.i.d. `CN(0, 1/P)` path gains (unit total average power).
pub fn draw_gains<R: Rng + ?Sized>(rng: &mut R, n_paths: usize) -> Vec<C64> {
    let var = 1.0 / n_paths as f64;
    (0..n_paths).map(|_| complex_gaussian(rng, var)).collect()
}

/// Draws a random path set. Path 0 always has zero delay.
pub fn gen_paths<R: Rng + ?Sized>(rng: &mut R, cfg: &PathConfig, n_carriers: usize) -> Result<PathSet> {
    cfg.validate(n_carriers)?;
    let a = cfg.alpha_max as i32;
    let mut paths = Vec::with_capacity(cfg.n_paths);
    for i in 0..cfg.n_paths {
        let delay = if i == 0 {
            0
        } else {
            rng.random_range(0..=cfg.l_max)
        };
        let doppler_int = rng.random_range(-a..=a);
        let doppler_frac = if cfg.fractional {
            0.5 - rng.random::<f64>()
        } else {
            0.0
        };
        paths.push(DelayDopplerPath::new(delay, doppler_int, doppler_frac, C64::new(0.0, 0.0)));
    }
    for (p, g) in paths.iter_mut().zip(draw_gains(rng, cfg.n_paths)) {
        p.gain = g;
    }
    PathSet::new(paths, cfg.l_max, cfg.v_max())
}
