//! Randomized Kaczmarz solvers for the RZF columns.
//!
//! Column `k` of the RZF matrix is `m = h·x` where `(hᴴh + ξI)·x = e_k`. The
//! solver keeps `m` and a dual vector `n` (so that `m = h·n` throughout) and
//! projects onto one row equation at a time.
//!
//! Two routes are provided. [`rka_precode`] and [`swor_rka_precode`] work on
//! `m` directly and cost `O(rows)` per step. [`kaczmarz_matrix`] runs every
//! column in the Gram domain, where `⟨h_r, m⟩ = (Γn)_r` with `Γ = hᴴh`, which
//! costs `O(cols)` per step after one matrix product. Given the same random
//! stream both routes follow the same trajectory.

use ndarray::ArrayView2;
use rand::Rng;

use super::{rzf_direction, PrecodeConfig, Sampling, StepRule};
use crate::linalg::{CMatrix, CVector};
use crate::rng::{substream, tag};
use crate::{Error, Result, C64};

/// Result of a single-column solve.
#[derive(Debug, Clone)]
pub struct KaczmarzColumn {
    /// Unnormalized precoder column `m`.
    pub column: CVector,
    /// Dual variable `n`, with `m = h·n`.
    pub dual: CVector,
    /// Relative distance `‖m - m*‖/‖m*‖` after each step, when tracked.
    pub residual_history: Vec<f64>,
}

/// Row picker shared by both routes.
struct RowSampler {
    rows: Vec<usize>,
    weights: Vec<f64>,
    mode: Sampling,
    sweep: Vec<usize>,
    pos: usize,
}

impl RowSampler {
    fn new(norms_sq: &[f64], xi: f64, mode: Sampling) -> Result<Self> {
        let rows: Vec<usize> = (0..norms_sq.len()).filter(|&r| norms_sq[r] > 0.0).collect();
        if rows.is_empty() {
            return Err(Error::AllRowsZero);
        }
        let weights = rows.iter().map(|&r| norms_sq[r] + xi).collect();
        Ok(Self {
            rows,
            weights,
            mode,
            sweep: Vec::new(),
            pos: 0,
        })
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        match self.mode {
            Sampling::Uniform => self.rows[rng.random_range(0..self.rows.len())],
            Sampling::NormWeightedWithoutReplacement => {
                if self.pos == self.sweep.len() {
                    self.refill(rng);
                }
                self.pos += 1;
                self.sweep[self.pos - 1]
            }
        }
    }

    /// Weighted random permutation: sort by `ln(u)/w` descending, which orders
    /// rows exactly as successive weighted draws without replacement.
    fn refill<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut keyed: Vec<(f64, usize)> = self
            .rows
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| (rng.random::<f64>().ln() / w, r))
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
        self.sweep = keyed.into_iter().map(|(_, r)| r).collect();
        self.pos = 0;
    }
}

fn step(step_rule: StepRule, target: f64, inner: C64, dual: C64, norm_sq: f64, xi: f64) -> C64 {
    match step_rule {
        StepRule::Regularized => (C64::new(target, 0.0) - inner - dual * xi) / (norm_sq + xi),
        StepRule::Literal => (C64::new(target, 0.0) - inner - dual) / norm_sq,
    }
}

/// Step size `η` that row `r` would apply to the state `(m, n)` when solving
/// for column `user`. Zero for every row exactly when `(m, n)` solves the
/// regularized normal equations (for [`StepRule::Regularized`]).
pub fn row_step(
    h: ArrayView2<C64>,
    m: &CVector,
    n: &CVector,
    r: usize,
    user: usize,
    xi: f64,
    step_rule: StepRule,
) -> Result<C64> {
    check_user(h, user)?;
    check_user(h, r)?;
    if m.len() != h.nrows() || n.len() != h.ncols() {
        return Err(Error::LengthMismatch {
            what: "Kaczmarz state",
            expected: h.nrows() + h.ncols(),
            actual: m.len() + n.len(),
        });
    }
    let hr = h.column(r);
    let norm_sq: f64 = hr.iter().map(|z| z.norm_sqr()).sum();
    let inner: C64 = hr.iter().zip(m).map(|(a, b)| a.conj() * b).sum();
    let target = if r == user { 1.0 } else { 0.0 };
    Ok(step(step_rule, target, inner, n[r], norm_sq, xi))
}

fn rel_distance(m: &CVector, target: &CVector, target_norm: f64) -> f64 {
    let d: f64 = m.iter().zip(target).map(|(a, b)| (a - b).norm_sqr()).sum();
    if target_norm > 0.0 {
        d.sqrt() / target_norm
    } else {
        d.sqrt()
    }
}

fn check_user(h: ArrayView2<C64>, user: usize) -> Result<()> {
    if user >= h.ncols() {
        return Err(Error::IndexOutOfRange {
            what: "stream",
            index: user,
            size: h.ncols(),
        });
    }
    Ok(())
}

fn solve_direct<R: Rng + ?Sized>(h: ArrayView2<C64>, user: usize, cfg: &PrecodeConfig, rng: &mut R) -> Result<KaczmarzColumn> {
    cfg.validate()?;
    check_user(h, user)?;
    let norms: Vec<f64> = h.columns().into_iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum()).collect();
    let mut sampler = RowSampler::new(&norms, cfg.xi, cfg.sampling)?;
    let reference = if cfg.track_residual {
        let t = rzf_direction(h, cfg.xi)?.column(user).to_owned();
        let tn = t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Some((t, tn))
    } else {
        None
    };

    let mut m = CVector::zeros(h.nrows());
    let mut n = CVector::zeros(h.ncols());
    let mut history = Vec::new();
    for _ in 0..cfg.iterations {
        let r = sampler.next(rng);
        let hr = h.column(r);
        let inner: C64 = hr.iter().zip(&m).map(|(a, b)| a.conj() * b).sum();
        let target = if r == user { 1.0 } else { 0.0 };
        let eta = step(cfg.step_rule, target, inner, n[r], norms[r], cfg.xi);
        m.scaled_add(eta, &hr);
        n[r] += eta;
        if let Some((t, tn)) = &reference {
            history.push(rel_distance(&m, t, *tn));
        }
    }
    Ok(KaczmarzColumn {
        column: m,
        dual: n,
        residual_history: history,
    })
}

/// Randomized Kaczmarz for column `user`, rows drawn uniformly.
pub fn rka_precode<R: Rng + ?Sized>(h: ArrayView2<C64>, user: usize, cfg: &PrecodeConfig, rng: &mut R) -> Result<KaczmarzColumn> {
    solve_direct(h, user, &PrecodeConfig { sampling: Sampling::Uniform, ..*cfg }, rng)
}

/// Randomized Kaczmarz for column `user`, rows visited in norm-weighted
/// sweeps without replacement.
pub fn swor_rka_precode<R: Rng + ?Sized>(
    h: ArrayView2<C64>,
    user: usize,
    cfg: &PrecodeConfig,
    rng: &mut R,
) -> Result<KaczmarzColumn> {
    solve_direct(
        h,
        user,
        &PrecodeConfig {
            sampling: Sampling::NormWeightedWithoutReplacement,
            ..*cfg
        },
        rng,
    )
}

/// All columns in the Gram domain, using `cfg.sampling`. Column `k` draws
/// from the substream `(seed, COLUMN, k)`. Returns the unnormalized matrix
/// and the column-averaged residual history (empty unless tracked).
pub fn kaczmarz_matrix(h: ArrayView2<C64>, cfg: &PrecodeConfig, seed: u64) -> Result<(CMatrix, Vec<f64>)> {
    cfg.validate()?;
    let gram = h.t().mapv(|z| z.conj()).dot(&h);
    let reference = if cfg.track_residual {
        Some(rzf_direction(h, cfg.xi)?)
    } else {
        None
    };
    let (duals, history) = run_columns(&gram, cfg, seed, reference.as_ref().map(|r| (h, r)))?;
    Ok((h.dot(&duals), history))
}

/// Dual matrix `X` (so that the precoder is `h·X`) from the Gram matrix
/// `Γ = hᴴh` alone. Same trajectories as [`kaczmarz_matrix`].
pub fn kaczmarz_duals(gram: &CMatrix, cfg: &PrecodeConfig, seed: u64) -> Result<CMatrix> {
    cfg.validate()?;
    Ok(run_columns(gram, cfg, seed, None)?.0)
}

fn run_columns(
    gram: &CMatrix,
    cfg: &PrecodeConfig,
    seed: u64,
    reference: Option<(ArrayView2<C64>, &CMatrix)>,
) -> Result<(CMatrix, Vec<f64>)> {
    let k = gram.nrows();
    let norms: Vec<f64> = (0..k).map(|r| gram[(r, r)].re).collect();
    let split = SplitMatrix::new(gram);
    let mut duals = CMatrix::zeros((k, k));
    let mut history = vec![0.0; if reference.is_some() { cfg.iterations } else { 0 }];
    let (mut n_re, mut n_im) = (vec![0.0; k], vec![0.0; k]);
    for col in 0..k {
        let mut rng = substream(seed, &[tag::COLUMN, col as u64]);
        let mut sampler = RowSampler::new(&norms, cfg.xi, cfg.sampling)?;
        n_re.fill(0.0);
        n_im.fill(0.0);
        let mut tracked = reference.map(|(h, g)| {
            let t = g.column(col).to_owned();
            let tn = t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (h, CVector::zeros(h.nrows()), t, tn)
        });
        for it in 0..cfg.iterations {
            let r = sampler.next(&mut rng);
            let inner = split.row_dot(r, &n_re, &n_im);
            let target = if r == col { 1.0 } else { 0.0 };
            let eta = step(cfg.step_rule, target, inner, C64::new(n_re[r], n_im[r]), norms[r], cfg.xi);
            n_re[r] += eta.re;
            n_im[r] += eta.im;
            if let Some((h, m, t, tn)) = tracked.as_mut() {
                m.scaled_add(eta, &h.column(r));
                history[it] += rel_distance(m, t, *tn) / k as f64;
            }
        }
        for r in 0..k {
            duals[(r, col)] = C64::new(n_re[r], n_im[r]);
        }
    }
    Ok((duals, history))
}

/// Row-major matrix with real and imaginary parts stored apart, so that row
/// products vectorize.
struct SplitMatrix {
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitMatrix {
    fn new(m: &CMatrix) -> Self {
        Self {
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    fn row_dot(&self, r: usize, x_re: &[f64], x_im: &[f64]) -> C64 {
        const L: usize = 8;
        let a_re = &self.re[r * self.cols..(r + 1) * self.cols];
        let a_im = &self.im[r * self.cols..(r + 1) * self.cols];
        let (mut acc_re, mut acc_im) = ([0.0; L], [0.0; L]);
        let body = self.cols / L * L;
        for c in (0..body).step_by(L) {
            for l in 0..L {
                let (ar, ai, xr, xi) = (a_re[c + l], a_im[c + l], x_re[c + l], x_im[c + l]);
                acc_re[l] += ar * xr - ai * xi;
                acc_im[l] += ar * xi + ai * xr;
            }
        }
        let (mut sr, mut si) = (acc_re.iter().sum::<f64>(), acc_im.iter().sum::<f64>());
        for c in body..self.cols {
            sr += a_re[c] * x_re[c] - a_im[c] * x_im[c];
            si += a_re[c] * x_im[c] + a_im[c] * x_re[c];
        }
        C64::new(sr, si)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use crate::rng::complex_gaussian;

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = substream(seed, &[]);
        CMatrix::from_shape_fn((rows, cols), |_| complex_gaussian(&mut rng, 1.0))
    }

    #[test]
    fn gram_route_matches_direct_route() {
        let h = random(40, 12, 1);
        for sampling in [Sampling::Uniform, Sampling::NormWeightedWithoutReplacement] {
            let cfg = PrecodeConfig { xi: 0.3, iterations: 300, sampling, ..Default::default() };
            let (g, _) = kaczmarz_matrix(h.view(), &cfg, 9).unwrap();
            for col in 0..12 {
                let mut rng = substream(9, &[tag::COLUMN, col as u64]);
                let d = solve_direct(h.view(), col, &cfg, &mut rng).unwrap();
                let err: f64 = g.column(col).iter().zip(&d.column).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                assert!(err < 1e-10, "{sampling:?} column {col}: {err}");
            }
        }
    }

    #[test]
    fn identity_converges_within_one_sweep() {
        let h = identity(6);
        let cfg = PrecodeConfig { iterations: 6, ..Default::default() };
        for user in 0..6 {
            let mut rng = substream(2, &[user as u64]);
            let c = swor_rka_precode(h.view(), user, &cfg, &mut rng).unwrap();
            let mut e = CVector::zeros(6);
            e[user] = C64::new(1.0, 0.0);
            assert!((&c.column - &e).iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn converges_to_rzf() {
        let h = random(64, 8, 3);
        let cfg = PrecodeConfig { xi: 0.1, iterations: 4000, track_residual: true, ..Default::default() };
        let mut rng = substream(4, &[]);
        let c = rka_precode(h.view(), 2, &cfg, &mut rng).unwrap();
        assert!(*c.residual_history.last().unwrap() < 1e-8);
        let m_from_dual = h.dot(&c.dual);
        assert!((&m_from_dual - &c.column).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn single_stream_trajectories_agree() {
        let h = random(10, 1, 5);
        let cfg = PrecodeConfig { xi: 0.2, iterations: 5, ..Default::default() };
        let a = rka_precode(h.view(), 0, &cfg, &mut substream(1, &[])).unwrap();
        let b = swor_rka_precode(h.view(), 0, &cfg, &mut substream(2, &[])).unwrap();
        assert!((&a.column - &b.column).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn errors() {
        let z = CMatrix::zeros((4, 3));
        let cfg = PrecodeConfig::default();
        assert_eq!(rka_precode(z.view(), 0, &cfg, &mut substream(0, &[])).unwrap_err(), Error::AllRowsZero);
        let h = random(4, 3, 6);
        assert!(matches!(
            rka_precode(h.view(), 3, &cfg, &mut substream(0, &[])),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn zero_rows_are_skipped() {
        let mut h = random(8, 4, 7);
        h.column_mut(1).fill(C64::new(0.0, 0.0));
        let cfg = PrecodeConfig { xi: 0.05, iterations: 3000, track_residual: true, ..Default::default() };
        let c = swor_rka_precode(h.view(), 0, &cfg, &mut substream(0, &[])).unwrap();
        assert_eq!(c.dual[1], C64::new(0.0, 0.0));
        assert!(*c.residual_history.last().unwrap() < 1e-8);
    }
}
