//! State evolution for the underlying and spatially coupled ensembles.
//!
//! The scalar operator maps a per-section error `E` to the MMSE of one
//! section observed through the equivalent Gaussian channel with noise
//! `Sigma^2(E)`; the coupled operator does the same per block with the
//! design-variance mixing. All Monte-Carlo expectations run over one frozen
//! Gaussian sample bank per `(seed, B)` pair, so repeated evaluations are
//! common-random-number coupled: the degradation and monotonicity properties
//! of the operators hold as exact numerical predicates, and thresholds are
//! deterministic functions of the configuration.

use crate::channel::ChannelSpec;
use crate::code::CouplingSpec;
use crate::error::{Error, Result};
use crate::par::chunk_map_fold;
use crate::quad::GaussHermite;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Absolute tolerance for "reached the MSE floor" comparisons.
pub const FLOOR_MATCH_TOL: f64 = 1e-6;

/// Cap on the inverse effective noise where it is formally infinite
/// (binary-input channels at zero error).
const INV_SIGMA2_CAP: f64 = 1e18;

/// Stream id of the sample bank inside the master seed's ChaCha sequence.
const BANK_STREAM: u64 = 0xB_A9_4C;

/// Monte-Carlo and iteration controls for the state-evolution machinery.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeConfig {
    pub mc_samples: usize,
    pub gh_nodes: usize,
    /// Absolute fixed-point tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub master_seed: u64,
}

impl Default for SeConfig {
    fn default() -> Self {
        SeConfig {
            mc_samples: 100_000,
            gh_nodes: 61,
            tol: 1e-10,
            max_iter: 10_000,
            master_seed: 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Frozen sample bank
// ---------------------------------------------------------------------------

/// A frozen bank of `n` standard Gaussian `B`-vectors shared by every
/// Monte-Carlo expectation drawn from the same master seed.
#[derive(Debug, Clone)]
pub struct SampleBank {
    b: usize,
    n: usize,
    z: Vec<f64>,
}

impl SampleBank {
    pub fn new(b: usize, n: usize, master_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(BANK_STREAM);
        let z = (0..n * b)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        SampleBank { b, n, z }
    }

    pub fn from_config(b: usize, cfg: &SeConfig) -> Self {
        Self::new(b, cfg.mc_samples, cfg.master_seed)
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Sample row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.b..(i + 1) * self.b]
    }

    // Squared section error of sample i for effective noise sigma (per the
    // one-hot prior with the non-zero entry in the first slot).
    #[inline]
    fn sample_err(&self, i: usize, lb: f64, sigma: f64, sigma2: f64) -> f64 {
        let row = self.row(i);
        let z1 = row[0];
        let shift = -lb / sigma2;
        let scale = lb.sqrt() / sigma;
        let mut hi = 0.0f64;
        let mut us = [0.0f64; 64];
        let spill;
        let mut heap;
        let work: &mut [f64] = if self.b - 1 <= 64 {
            spill = &mut us[..self.b - 1];
            spill
        } else {
            heap = vec![0.0; self.b - 1];
            &mut heap
        };
        for (k, u) in work.iter_mut().enumerate() {
            *u = shift + (row[k + 1] - z1) * scale;
            if *u > hi {
                hi = *u;
            }
        }
        let g1_raw = (-hi).exp();
        let mut denom = g1_raw;
        for u in work.iter_mut() {
            *u = (*u - hi).exp();
            denom += *u;
        }
        let g1 = g1_raw / denom;
        let mut err = (1.0 - g1) * (1.0 - g1);
        for &u in work.iter() {
            let g = u / denom;
            err += g * g;
        }
        err
    }

    /// Sectionwise MMSE of the equivalent Gaussian channel with effective
    /// noise variance `sigma2`, averaged over the bank.
    ///
    /// Runs in parallel when the `parallel` feature is on; the chunked
    /// reduction makes the value identical to [`SampleBank::mmse_serial`].
    pub fn mmse(&self, sigma2: f64) -> f64 {
        match self.mmse_limit(sigma2) {
            Some(v) => v,
            None => {
                let lb = (self.b as f64).log2();
                let sigma = sigma2.sqrt();
                let sum = chunk_map_fold(
                    self.n,
                    |s, e| {
                        let mut acc = 0.0;
                        for i in s..e {
                            acc += self.sample_err(i, lb, sigma, sigma2);
                        }
                        acc
                    },
                    |a, b| a + b,
                )
                .unwrap_or(0.0);
                sum / self.n as f64
            }
        }
    }

    /// Strictly sequential reference path for [`SampleBank::mmse`].
    pub fn mmse_serial(&self, sigma2: f64) -> f64 {
        match self.mmse_limit(sigma2) {
            Some(v) => v,
            None => {
                let lb = (self.b as f64).log2();
                let sigma = sigma2.sqrt();
                let mut total = 0.0;
                let mut start = 0;
                while start < self.n {
                    let end = (start + crate::par::CHUNK).min(self.n);
                    let mut part = 0.0;
                    for i in start..end {
                        part += self.sample_err(i, lb, sigma, sigma2);
                    }
                    total += part;
                    start = end;
                }
                total / self.n as f64
            }
        }
    }

    /// [`SampleBank::mmse`] plus the half-bank consistency check: errors out
    /// when the two half-sample means disagree beyond three standard errors
    /// of their difference.
    pub fn mmse_checked(&self, sigma2: f64) -> Result<f64> {
        if let Some(v) = self.mmse_limit(sigma2) {
            return Ok(v);
        }
        let lb = (self.b as f64).log2();
        let sigma = sigma2.sqrt();
        self.mean_checked(|i| self.sample_err(i, lb, sigma, sigma2))
    }

    /// Bank average of a per-sample statistic with the half-bank consistency
    /// check; the backbone of every Monte-Carlo expectation in the crate.
    pub fn mean_checked<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let half = self.n / 2;
        let (sum, sumsq, first_half) = chunk_map_fold(
            self.n,
            |s, e| {
                let mut acc = (0.0, 0.0, 0.0);
                for i in s..e {
                    let v = f(i);
                    acc.0 += v;
                    acc.1 += v * v;
                    if i < half {
                        acc.2 += v;
                    }
                }
                acc
            },
            |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2),
        )
        .unwrap_or((0.0, 0.0, 0.0));
        let n = self.n as f64;
        let mean = sum / n;
        let var = (sumsq / n - mean * mean).max(0.0);
        let m1 = first_half / half as f64;
        let m2 = (sum - first_half) / (self.n - half) as f64;
        let half_gap = (m1 - m2).abs();
        let threshold = 3.0 * (var.sqrt() * 2.0 / n.sqrt()) + 1e-12;
        if half_gap > threshold {
            return Err(Error::McBudget { half_gap, threshold });
        }
        Ok(mean)
    }

    // Closed endpoints that skip the Monte-Carlo sum.
    fn mmse_limit(&self, sigma2: f64) -> Option<f64> {
        if sigma2 <= 0.0 {
            Some(0.0)
        } else if !sigma2.is_finite() {
            Some(1.0 - 1.0 / self.b as f64)
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Scalar (underlying) state evolution
// ---------------------------------------------------------------------------

/// One application of the scalar operator: `T_un(E) = mmse(Sigma(E))`.
pub fn t_un(
    e: f64,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
) -> Result<f64> {
    assert!((0.0..=1.0).contains(&e), "T_un needs E in [0,1], got {e}");
    bank.mmse_checked(spec.sigma2(rate, e, gh))
}

/// Iterates the scalar operator to its fixed point.
pub fn iterate_un(
    e0: f64,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<f64> {
    let mut e = e0;
    for _ in 0..cfg.max_iter {
        let next = t_un(e, spec, rate, bank, gh)?;
        let delta = (next - e).abs();
        e = next;
        if delta < cfg.tol {
            return Ok(e);
        }
    }
    Err(Error::MaxIterations {
        max_iter: cfg.max_iter,
        last_delta: f64::NAN,
    })
}

/// The per-iteration trajectory from `e0` (inclusive of the start), stopping
/// at the fixed point or after `cfg.max_iter` steps.
pub fn iterate_un_trace(
    e0: f64,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<Vec<f64>> {
    let mut e = e0;
    let mut out = vec![e0];
    for _ in 0..cfg.max_iter {
        let next = t_un(e, spec, rate, bank, gh)?;
        let delta = (next - e).abs();
        e = next;
        out.push(e);
        if delta < cfg.tol {
            break;
        }
    }
    Ok(out)
}

/// MSE floor: the fixed point reached from zero error.
pub fn mse_floor(
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<f64> {
    iterate_un(0.0, spec, rate, bank, gh, cfg)
}

/// Whether `e` lies in the basin of attraction of the MSE floor.
pub fn in_basin(
    e: f64,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<bool> {
    let floor = mse_floor(spec, rate, bank, gh, cfg)?;
    let limit = iterate_un(e, spec, rate, bank, gh, cfg)?;
    Ok((limit - floor).abs() <= FLOOR_MATCH_TOL)
}

/// A bisected threshold with its final bracket.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

// Bisection on a monotone rate predicate (true below the threshold). Tracks
// the largest true and smallest false rates ever seen and aborts if they
// cross, which would contradict the two-fixed-point dichotomy.
pub(crate) fn bisect_rate<P>(mut predicate: P, rate_tol: f64) -> Result<ThresholdResult>
where
    P: FnMut(f64) -> Result<bool>,
{
    let mut max_true: Option<f64> = None;
    let mut min_false: Option<f64> = None;
    let mut probe = |r: f64, max_true: &mut Option<f64>, min_false: &mut Option<f64>| -> Result<bool> {
        let v = predicate(r)?;
        if v {
            if min_false.map(|f| r > f).unwrap_or(false) {
                return Err(Error::NonMonotonePredicate { at: r });
            }
            *max_true = Some(max_true.map(|t: f64| t.max(r)).unwrap_or(r));
        } else {
            if max_true.map(|t| r < t).unwrap_or(false) {
                return Err(Error::NonMonotonePredicate { at: r });
            }
            *min_false = Some(min_false.map(|f: f64| f.min(r)).unwrap_or(r));
        }
        Ok(v)
    };

    // Find a decodable rate, walking down if necessary.
    let mut lo = 0.01;
    while !probe(lo, &mut max_true, &mut min_false)? {
        lo /= 2.0;
        if lo < 1e-6 {
            return Err(Error::BracketNotFound { hi: lo });
        }
    }
    // Double up to the first non-decodable rate.
    let mut hi = lo * 2.0;
    while probe(hi, &mut max_true, &mut min_false)? {
        lo = hi;
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::BracketNotFound { hi });
        }
    }
    while hi - lo > 2.0 * rate_tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut max_true, &mut min_false)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdResult {
        value: 0.5 * (lo + hi),
        lo,
        hi,
        tol: rate_tol,
    })
}

/// Threshold of the underlying ensemble: the largest rate at which the
/// all-error initialization still converges to the MSE floor.
pub fn r_un(
    spec: &ChannelSpec,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
    rate_tol: f64,
) -> Result<ThresholdResult> {
    bisect_rate(
        |r| {
            let floor = iterate_un(0.0, spec, r, bank, gh, cfg)?;
            let top = iterate_un(1.0, spec, r, bank, gh, cfg)?;
            Ok((top - floor).abs() <= FLOOR_MATCH_TOL)
        },
        rate_tol,
    )
}

// ---------------------------------------------------------------------------
// Coupled state evolution
// ---------------------------------------------------------------------------

/// Spatial MSE profile with the boundary pinning baked in: entries at rows
/// `{0..3w-1}` and `{Gamma-3w..Gamma-1}` are held at exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    e: Vec<f64>,
    w: usize,
}

impl Profile {
    /// All-ones start: unpinned rows at 1, pinned rows at 0.
    pub fn ones(gamma: usize, w: usize) -> Self {
        Self::flat(gamma, w, 1.0)
    }

    /// Flat profile at `value` on the unpinned rows.
    pub fn flat(gamma: usize, w: usize, value: f64) -> Self {
        assert!(gamma > 6 * w, "profile needs Gamma > 6w");
        let mut p = Profile {
            e: vec![value; gamma],
            w,
        };
        p.enforce_pinning();
        p
    }

    pub fn from_values(e: Vec<f64>, w: usize) -> Self {
        let mut p = Profile { e, w };
        p.enforce_pinning();
        p
    }

    fn enforce_pinning(&mut self) {
        let gamma = self.e.len();
        for r in 0..gamma {
            if self.is_pinned(r) {
                self.e[r] = 0.0;
            } else {
                self.e[r] = self.e[r].clamp(0.0, 1.0);
            }
        }
    }

    #[inline]
    pub fn is_pinned(&self, r: usize) -> bool {
        r < 3 * self.w || r >= self.e.len() - 3 * self.w
    }

    pub fn gamma(&self) -> usize {
        self.e.len()
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn values(&self) -> &[f64] {
        &self.e
    }

    /// Largest entry (pinned rows are zero, so this is the unpinned max).
    pub fn max(&self) -> f64 {
        self.e.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest absolute componentwise difference.
    pub fn max_diff(&self, other: &Profile) -> f64 {
        self.e
            .iter()
            .zip(&other.e)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// True when every entry is within `tol` above `level`.
    pub fn below(&self, level: f64, tol: f64) -> bool {
        self.e.iter().all(|&v| v <= level + tol)
    }

    /// Non-decreasing up to some peak, non-increasing after it.
    pub fn is_unimodal(&self, tol: f64) -> bool {
        let rising_end = self
            .e
            .windows(2)
            .position(|p| p[1] < p[0] - tol)
            .unwrap_or(self.e.len());
        self.e[rising_end..].windows(2).all(|p| p[1] <= p[0] + tol)
    }
}

/// Componentwise profile ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degradation {
    /// Profiles cross; no ordering.
    None,
    /// `a >= b` everywhere with equality throughout.
    Weak,
    /// `a >= b` everywhere and strictly somewhere.
    Strict,
}

/// Classifies whether `a` is degraded with respect to `b`.
pub fn degraded(a: &Profile, b: &Profile) -> Result<Degradation> {
    if a.gamma() != b.gamma() {
        return Err(Error::DimensionMismatch {
            expected: b.gamma(),
            got: a.gamma(),
        });
    }
    let mut strict = false;
    for (x, y) in a.values().iter().zip(b.values()) {
        if x < y {
            return Ok(Degradation::None);
        }
        if x > y {
            strict = true;
        }
    }
    Ok(if strict {
        Degradation::Strict
    } else {
        Degradation::Weak
    })
}

/// Per-block effective noise variances
/// `Sigma_c^{-2} = sum_r J_{r,c} Sigma^{-2}(E_r)`.
pub fn sigma_c(
    profile: &Profile,
    coupling: &CouplingSpec,
    spec: &ChannelSpec,
    rate: f64,
    gh: &GaussHermite,
) -> Vec<f64> {
    let gamma = coupling.gamma();
    assert_eq!(profile.gamma(), gamma);
    let w = coupling.w();
    // Inverse noise per row, deduplicated over repeated profile values
    // (plateaus at 0 and 1 dominate early and late iterations).
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let inv: Vec<f64> = profile
        .values()
        .iter()
        .map(|&e| {
            *cache.entry(e.to_bits()).or_insert_with(|| {
                let fe = spec.fisher_expectation(e, gh) / rate;
                fe.min(INV_SIGMA2_CAP)
            })
        })
        .collect();
    (0..gamma)
        .map(|c| {
            let lo = c.saturating_sub(w);
            let hi = (c + w).min(gamma - 1);
            let mut acc = 0.0;
            for (r, iv) in inv.iter().enumerate().take(hi + 1).skip(lo) {
                acc += coupling.j(r, c) * iv;
            }
            1.0 / acc
        })
        .collect()
}

/// One application of the coupled operator; pinned rows stay at zero.
pub fn t_co(
    profile: &Profile,
    coupling: &CouplingSpec,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
) -> Result<Profile> {
    let gamma = coupling.gamma();
    let w = coupling.w();
    let s2 = sigma_c(profile, coupling, spec, rate, gh);
    // One MMSE evaluation per distinct block noise.
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut mm = vec![0.0; gamma];
    for (c, &v) in s2.iter().enumerate() {
        mm[c] = match cache.get(&v.to_bits()) {
            Some(&m) => m,
            None => {
                let m = bank.mmse_checked(v)?;
                cache.insert(v.to_bits(), m);
                m
            }
        };
    }
    let e: Vec<f64> = (0..gamma)
        .map(|r| {
            if r < 3 * w || r >= gamma - 3 * w {
                0.0
            } else {
                let lo = r.saturating_sub(w);
                let hi = (r + w).min(gamma - 1);
                let mut acc = 0.0;
                for (c, m) in mm.iter().enumerate().take(hi + 1).skip(lo) {
                    acc += coupling.j(r, c) * m;
                }
                acc
            }
        })
        .collect();
    Ok(Profile::from_values(e, w))
}

/// Iterates the coupled operator from the all-ones profile to a fixed
/// profile.
pub fn iterate_co(
    coupling: &CouplingSpec,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<Profile> {
    let mut profile = Profile::ones(coupling.gamma(), coupling.w());
    for _ in 0..cfg.max_iter {
        let next = t_co(&profile, coupling, spec, rate, bank, gh)?;
        let delta = next.max_diff(&profile);
        profile = next;
        if delta < cfg.tol {
            return Ok(profile);
        }
    }
    Err(Error::MaxIterations {
        max_iter: cfg.max_iter,
        last_delta: f64::NAN,
    })
}

/// Per-iteration profiles from the all-ones start (inclusive), ending at the
/// fixed profile or the iteration cap.
pub fn iterate_co_trace(
    coupling: &CouplingSpec,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<Vec<Profile>> {
    let mut profile = Profile::ones(coupling.gamma(), coupling.w());
    let mut out = vec![profile.clone()];
    for _ in 0..cfg.max_iter {
        let next = t_co(&profile, coupling, spec, rate, bank, gh)?;
        let delta = next.max_diff(&profile);
        profile = next;
        out.push(profile.clone());
        if delta < cfg.tol {
            break;
        }
    }
    Ok(out)
}

/// Threshold of the coupled ensemble at fixed `(Gamma, w)`: the largest rate
/// whose fixed profile is degraded with respect to the floor profile within
/// [`FLOOR_MATCH_TOL`].
pub fn r_co(
    coupling: &CouplingSpec,
    spec: &ChannelSpec,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
    rate_tol: f64,
) -> Result<ThresholdResult> {
    bisect_rate(
        |r| {
            let floor = iterate_un(0.0, spec, r, bank, gh, cfg)?;
            let profile = iterate_co(coupling, spec, r, bank, gh, cfg)?;
            Ok(profile.below(floor, FLOOR_MATCH_TOL))
        },
        rate_tol,
    )
}
