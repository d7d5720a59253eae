//! Subarray-partitioned XL-MIMO downlink channels.
//!
//! The `N_t` transmit antennas are split into `S` subarrays of `N_ts`
//! antennas; users are assigned to subarrays in contiguous groups of `K_s`.
//! The channel from subarray `s` to user `k` is `N·N_k × N·N_ts`: one `N × N`
//! DAFT-domain block per transmit antenna, each scaled by the user's
//! spatially correlated, partially visible antenna weight
//! `w = √N_ts·Θ^{1/2}·z` with `Θ = D^{1/2} R D^{1/2}`.

use ndarray::{s, Array1, ArrayView2};
use rand::Rng;

use crate::afdm::AfdmParams;
use crate::channel::{assemble_mimo, draw_gains, gen_paths, path_matrix, BlockChannel, PathConfig};
use crate::error::invalid;
use crate::linalg::{frobenius_sq, psd_sqrt, CMatrix, CVector};
use crate::rng::{complex_gaussian, substream, tag};
use crate::{Error, Result, C64};

/// Antenna and user partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubarrayLayout {
    n_tx: usize,
    n_sub: usize,
    n_users: usize,
    n_rx_per_user: usize,
}

impl SubarrayLayout {
    pub fn new(n_tx: usize, n_sub: usize, n_users: usize, n_rx_per_user: usize) -> Result<Self> {
        if n_tx == 0 || n_sub == 0 || n_users == 0 || n_rx_per_user == 0 {
            return Err(invalid("layout", "all dimensions must be positive"));
        }
        if n_tx % n_sub != 0 {
            return Err(invalid(
                "subarrays",
                format!("{n_sub} subarrays do not divide n_tx = {n_tx}"),
            ));
        }
        if n_users % n_sub != 0 {
            return Err(invalid(
                "subarrays",
                format!("{n_sub} subarrays do not divide users = {n_users}"),
            ));
        }
        let layout = Self {
            n_tx,
            n_sub,
            n_users,
            n_rx_per_user,
        };
        if layout.k_s() * n_rx_per_user > layout.n_ts() {
            return Err(invalid(
                "users",
                format!(
                    "{} receive antennas per subarray exceed its {} transmit antennas",
                    layout.k_s() * n_rx_per_user,
                    layout.n_ts()
                ),
            ));
        }
        Ok(layout)
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_sub(&self) -> usize {
        self.n_sub
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_rx_per_user(&self) -> usize {
        self.n_rx_per_user
    }

    /// Antennas per subarray, `N_ts`.
    pub fn n_ts(&self) -> usize {
        self.n_tx / self.n_sub
    }

    /// Users per subarray, `K_s`.
    pub fn k_s(&self) -> usize {
        self.n_users / self.n_sub
    }

    /// Subarray serving user `k` (0-based).
    pub fn serving_subarray(&self, k: usize) -> usize {
        k / self.k_s()
    }

    /// Position of user `k` within its subarray's group.
    pub fn local_index(&self, k: usize) -> usize {
        k % self.k_s()
    }

    pub fn users_of(&self, s: usize) -> std::ops::Range<usize> {
        s * self.k_s()..(s + 1) * self.k_s()
    }
}

/// Spatial correlation and visibility statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSpec {
    corr_coef: f64,
    visibility_fraction: f64,
}

impl CorrelationSpec {
    pub fn new(corr_coef: f64, visibility_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&corr_coef) {
            return Err(invalid("corr_coef", format!("must lie in [0, 1), got {corr_coef}")));
        }
        if !(visibility_fraction > 0.0 && visibility_fraction <= 1.0) {
            return Err(invalid(
                "visibility",
                format!("must lie in (0, 1], got {visibility_fraction}"),
            ));
        }
        Ok(Self {
            corr_coef,
            visibility_fraction,
        })
    }

    /// Uncorrelated, fully visible.
    pub fn iid() -> Self {
        Self {
            corr_coef: 0.0,
            visibility_fraction: 1.0,
        }
    }

    pub fn corr_coef(&self) -> f64 {
        self.corr_coef
    }

    pub fn visibility_fraction(&self) -> f64 {
        self.visibility_fraction
    }
}

/// Diagonal 0/1 visibility matrix, stored as its diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMask(Vec<bool>);

impl VisibilityMask {
    pub fn all(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_visible(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn visible_count(&self) -> usize {
        self.0.iter().filter(|&&v| v).count()
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_diag(&Array1::from_iter(
            self.0.iter().map(|&v| C64::new(if v { 1.0 } else { 0.0 }, 0.0)),
        ))
    }
}

/// A contiguous (wrapping) run of `⌈fraction·n⌉` visible antennas at a
/// uniformly random offset.
pub fn visibility_mask<R: Rng + ?Sized>(spec: &CorrelationSpec, n: usize, rng: &mut R) -> VisibilityMask {
    let count = ((spec.visibility_fraction * n as f64).ceil() as usize).clamp(1, n.max(1));
    if count >= n {
        return VisibilityMask::all(n);
    }
    let start = rng.random_range(0..n);
    let mut mask = vec![false; n];
    for i in 0..count {
        mask[(start + i) % n] = true;
    }
    VisibilityMask(mask)
}

/// One draw of the correlation structure for a (user, subarray) pair.
#[derive(Debug, Clone)]
pub struct CorrelationDraw {
    /// Exponential correlation `R[a, b] = ρ^{|a-b|}`.
    pub r: CMatrix,
    pub d: VisibilityMask,
    /// `Θ = D^{1/2} R D^{1/2}`.
    pub theta: CMatrix,
}

pub fn corr_matrix<R: Rng + ?Sized>(spec: &CorrelationSpec, n: usize, rng: &mut R) -> CorrelationDraw {
    let rho = spec.corr_coef;
    let r = CMatrix::from_shape_fn((n, n), |(a, b)| {
        C64::new(rho.powi((a as i64 - b as i64).unsigned_abs() as i32), 0.0)
    });
    let d = visibility_mask(spec, n, rng);
    // D is 0/1, so D^{1/2} = D and Θ is R with invisible rows/columns zeroed.
    let theta = CMatrix::from_shape_fn((n, n), |(a, b)| {
        if d.is_visible(a) && d.is_visible(b) {
            r[(a, b)]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    CorrelationDraw { r, d, theta }
}

/// `w = √n·Θ^{1/2}·z` for a given square root of `Θ`.
pub fn antenna_weights(theta_sqrt: &CMatrix, z: &CVector) -> CVector {
    let n = z.len() as f64;
    theta_sqrt.dot(z).mapv(|v| v * n.sqrt())
}

/// `[w_1·B_1, …, w_n·B_n]` with `B_t = Σ_i gains[t][i]·path_mats[i]`.
pub fn weighted_row(path_mats: &[CMatrix], weights: &CVector, gains: &[Vec<C64>]) -> CMatrix {
    let n = path_mats[0].nrows();
    let mut out = CMatrix::zeros((n, n * weights.len()));
    for (t, &w) in weights.iter().enumerate() {
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        let mut blk = out.slice_mut(s![.., t * n..(t + 1) * n]);
        for (pm, &g) in path_mats.iter().zip(&gains[t]) {
            blk.scaled_add(w * g, pm);
        }
    }
    out
}

/// Per-subarray DAFT-domain channels of every user.
#[derive(Debug, Clone)]
pub struct XlChannel {
    layout: SubarrayLayout,
    afdm: AfdmParams,
    /// Per subarray: all users' rows, `K·N·N_k × N·N_ts`.
    stacks: Vec<CMatrix>,
    /// Per (user, subarray): visibility mask drawn for that pair.
    masks: Vec<VisibilityMask>,
}

impl XlChannel {
    /// Wraps explicit per-subarray stacks (`K·N·N_k × N·N_ts` each). Every
    /// antenna is marked visible.
    pub fn from_stacks(layout: SubarrayLayout, afdm: AfdmParams, stacks: Vec<CMatrix>) -> Result<Self> {
        let n = afdm.n_carriers();
        if stacks.len() != layout.n_sub {
            return Err(Error::LengthMismatch {
                what: "stacks",
                expected: layout.n_sub,
                actual: stacks.len(),
            });
        }
        let want = (layout.n_users * layout.n_rx_per_user * n, n * layout.n_ts());
        if let Some(bad) = stacks.iter().find(|m| m.dim() != want) {
            return Err(invalid(
                "stacks",
                format!("expected {}x{}, got {:?}", want.0, want.1, bad.dim()),
            ));
        }
        let masks = vec![VisibilityMask::all(layout.n_ts()); layout.n_users * layout.n_sub];
        Ok(Self { layout, afdm, stacks, masks })
    }

    pub fn layout(&self) -> &SubarrayLayout {
        &self.layout
    }

    pub fn afdm(&self) -> &AfdmParams {
        &self.afdm
    }

    fn rows_per_user(&self) -> usize {
        self.afdm.n_carriers() * self.layout.n_rx_per_user
    }

    /// `h_k^s`, shape `N·N_k × N·N_ts`.
    pub fn user_block(&self, k: usize, s: usize) -> ArrayView2<'_, C64> {
        let r = self.rows_per_user();
        self.stacks[s].slice(s![k * r..(k + 1) * r, ..])
    }

    /// All users' rows towards subarray `s`.
    pub fn subarray_stack(&self, s: usize) -> &CMatrix {
        &self.stacks[s]
    }

    /// Rows of the users served by subarray `j`, i.e. `H_j^j`.
    pub fn served_channel(&self, j: usize) -> ArrayView2<'_, C64> {
        let r = self.rows_per_user();
        let users = self.layout.users_of(j);
        self.stacks[j].slice(s![users.start * r..users.end * r, ..])
    }

    /// Full `h_k = [h_k^1, …, h_k^S]`, shape `N·N_k × N·N_t`.
    pub fn user_channel(&self, k: usize) -> CMatrix {
        let blocks: Vec<_> = (0..self.layout.n_sub).map(|s| self.user_block(k, s)).collect();
        ndarray::concatenate(ndarray::Axis(1), &blocks).expect("blocks share row count")
    }

    pub fn visibility(&self, k: usize, s: usize) -> &VisibilityMask {
        &self.masks[k * self.layout.n_sub + s]
    }

    /// The same channel as a receive-antenna × transmit-antenna block grid.
    pub fn to_block_channel(&self) -> BlockChannel {
        let n = self.afdm.n_carriers();
        let n_ts = self.layout.n_ts();
        let n_rx = self.layout.n_users * self.layout.n_rx_per_user;
        let grid = (0..n_rx)
            .map(|r| {
                (0..self.layout.n_tx)
                    .map(|t| {
                        let (s, tl) = (t / n_ts, t % n_ts);
                        self.stacks[s]
                            .slice(s![r * n..(r + 1) * n, tl * n..(tl + 1) * n])
                            .to_owned()
                    })
                    .collect()
            })
            .collect();
        assemble_mimo(grid).expect("uniform blocks")
    }
}

/// Draws an XL-MIMO channel.
///
/// Each user gets one delay-Doppler profile shared by all its links; every
/// (user, subarray) pair then draws its correlation/visibility, its antenna
/// weights and fresh per-antenna path gains from its own substream of `seed`.
pub fn gen_xl_channel(
    layout: &SubarrayLayout,
    afdm: &AfdmParams,
    spec: &CorrelationSpec,
    path_cfg: &PathConfig,
    seed: u64,
) -> Result<XlChannel> {
    let n = afdm.n_carriers();
    path_cfg.validate(n)?;
    let n_ts = layout.n_ts();
    let n_k = layout.n_rx_per_user;
    let rows = layout.n_users * n_k * n;
    let mut stacks = vec![CMatrix::zeros((rows, n * n_ts)); layout.n_sub];
    let mut masks = Vec::with_capacity(layout.n_users * layout.n_sub);

    for k in 0..layout.n_users {
        let profile = gen_paths(&mut substream(seed, &[tag::PATHS, k as u64]), path_cfg, n)?;
        let path_mats: Vec<CMatrix> = profile.paths().iter().map(|p| path_matrix(afdm, p)).collect();
        for (s, stack) in stacks.iter_mut().enumerate() {
            let mut rng = substream(seed, &[tag::SUBARRAY, k as u64, s as u64]);
            let corr = corr_matrix(spec, n_ts, &mut rng);
            let theta_sqrt = psd_sqrt(&corr.theta)?;
            for r in 0..n_k {
                let z = Array1::from_shape_fn(n_ts, |_| complex_gaussian(&mut rng, 1.0 / n_ts as f64));
                let mut w = antenna_weights(&theta_sqrt, &z);
                // Θ^{1/2} vanishes on invisible rows; drop eigensolver round-off.
                for (t, wt) in w.iter_mut().enumerate() {
                    if !corr.d.is_visible(t) {
                        *wt = C64::new(0.0, 0.0);
                    }
                }
                let gains: Vec<Vec<C64>> = (0..n_ts).map(|_| draw_gains(&mut rng, path_mats.len())).collect();
                let row0 = (k * n_k + r) * n;
                stack
                    .slice_mut(s![row0..row0 + n, ..])
                    .assign(&weighted_row(&path_mats, &w, &gains));
            }
            masks.push(corr.d);
        }
    }
    Ok(XlChannel {
        layout: *layout,
        afdm: *afdm,
        stacks,
        masks,
    })
}

/// Signal and interference powers seen by one user, per receive dimension.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerDecomposition {
    pub desired: f64,
    pub intra: f64,
    pub inter: f64,
    pub noise: f64,
}

impl PowerDecomposition {
    /// Desired + intra + inter.
    pub fn received_signal(&self) -> f64 {
        self.desired + self.intra + self.inter
    }
}

fn check_precoders(ch: &XlChannel, precoders: &[CMatrix]) -> Result<()> {
    let l = ch.layout();
    let n = ch.afdm().n_carriers();
    if precoders.len() != l.n_sub() {
        return Err(Error::LengthMismatch {
            what: "precoders",
            expected: l.n_sub(),
            actual: precoders.len(),
        });
    }
    let want = (n * l.n_ts(), n * l.n_rx_per_user() * l.k_s());
    for p in precoders {
        if p.dim() != want {
            return Err(invalid(
                "precoders",
                format!("expected {}x{}, got {:?}", want.0, want.1, p.dim()),
            ));
        }
    }
    Ok(())
}

/// Splits each user's received power into desired, intra-subarray and
/// inter-subarray parts.
///
/// `precoders[s]` is `N·N_ts × N·N_k·K_s` with user-major stream columns.
/// Powers are squared Frobenius norms of the effective channel products,
/// scaled by `symbol_power` and divided by the user's `N·N_k` receive
/// dimensions, so they compare directly with the per-sample `noise_var`.
pub fn received_decomposition(
    ch: &XlChannel,
    precoders: &[CMatrix],
    symbol_power: f64,
    noise_var: f64,
) -> Result<Vec<PowerDecomposition>> {
    check_precoders(ch, precoders)?;
    let effective: Vec<CMatrix> = (0..ch.layout().n_sub())
        .map(|s| ch.subarray_stack(s).dot(&precoders[s]))
        .collect();
    decomposition_from_effective(ch.layout(), ch.afdm().n_carriers(), &effective, symbol_power, noise_var)
}

/// As [`received_decomposition`], given the effective channels
/// `effective[s] = H_s·G_s` (all users' rows against subarray `s`'s streams,
/// `K·N·N_k × N·N_k·K_s`).
pub fn decomposition_from_effective(
    layout: &SubarrayLayout,
    n_carriers: usize,
    effective: &[CMatrix],
    symbol_power: f64,
    noise_var: f64,
) -> Result<Vec<PowerDecomposition>> {
    let rpu = n_carriers * layout.n_rx_per_user;
    let want = (layout.n_users * rpu, rpu * layout.k_s());
    if effective.len() != layout.n_sub {
        return Err(Error::LengthMismatch {
            what: "effective channels",
            expected: layout.n_sub,
            actual: effective.len(),
        });
    }
    if let Some(bad) = effective.iter().find(|e| e.dim() != want) {
        return Err(invalid(
            "effective channels",
            format!("expected {}x{}, got {:?}", want.0, want.1, bad.dim()),
        ));
    }
    let scale = symbol_power / rpu as f64;
    Ok((0..layout.n_users)
        .map(|k| {
            let j = layout.serving_subarray(k);
            let own = layout.local_index(k);
            let mut d = PowerDecomposition {
                noise: noise_var,
                ..Default::default()
            };
            for (s, eff) in effective.iter().enumerate() {
                let rows = eff.slice(s![k * rpu..(k + 1) * rpu, ..]);
                if s == j {
                    for i in 0..layout.k_s() {
                        let p = frobenius_sq(rows.slice(s![.., i * rpu..(i + 1) * rpu])) * scale;
                        if i == own {
                            d.desired += p;
                        } else {
                            d.intra += p;
                        }
                    }
                } else {
                    d.inter += frobenius_sq(rows) * scale;
                }
            }
            d
        })
        .collect())
}
