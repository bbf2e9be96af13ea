//! Potential functions of the underlying and coupled ensembles, the free
//! energy gap and the potential threshold.
//!
//! The potential splits into an energy term driven by the channel and an
//! entropy term driven by the sectionwise prior; its stationary points
//! coincide with the state-evolution fixed points, which the test suites
//! verify by finite differences.

use crate::channel::{ChannelKind, ChannelSpec};
use crate::code::CouplingSpec;
use crate::error::{Error, Result};
use crate::quad::GaussHermite;
use crate::se::{self, bisect_rate, Profile, SampleBank, SeConfig, ThresholdResult, FLOOR_MATCH_TOL};
use crate::special::{q_func, xlog2x, LN_2};
use std::f64::consts::PI;

/// The grid infimum must move less than this under refinement halving before
/// a gap value is trusted.
pub const GAP_REFINE_TOL: f64 = 1e-4;

/// Energy term of the potential: the effective-noise part plus the
/// conditional output entropy of the smoothed channel.
pub fn u_un(e: f64, spec: &ChannelSpec, rate: f64, gh: &GaussHermite) -> f64 {
    assert!((0.0..=1.0).contains(&e), "U_un needs E in [0,1], got {e}");
    let sigma2 = spec.sigma2(rate, e, gh);
    // E * Sigma^{-2} extends continuously to 0 at E = 0 on binary channels.
    let first = if sigma2 == 0.0 {
        0.0
    } else {
        -e / (2.0 * LN_2 * sigma2)
    };
    let phi_term = match spec.kind() {
        ChannelKind::Awgn => {
            // phi(.|z,E) is Gaussian with variance E + 1/snr for every z;
            // its entropy integral is closed form.
            let var = e + 1.0 / spec.param();
            -0.5 * (2.0 * PI * std::f64::consts::E * var).log2()
        }
        _ => {
            let theta = spec.threshold().unwrap();
            let alphabet = spec.output_alphabet().unwrap();
            let w = |y: f64, a: f64| -> f64 {
                let eps = spec.param();
                match spec.kind() {
                    ChannelKind::Bsc => {
                        if y == a {
                            1.0 - eps
                        } else {
                            eps
                        }
                    }
                    ChannelKind::Bec => {
                        if y == 0.0 {
                            eps
                        } else if y == a {
                            1.0 - eps
                        } else {
                            0.0
                        }
                    }
                    ChannelKind::Z => {
                        if a == 1.0 {
                            if y == 1.0 {
                                1.0
                            } else {
                                0.0
                            }
                        } else if y == -1.0 {
                            1.0 - eps
                        } else if y == 1.0 {
                            eps
                        } else {
                            0.0
                        }
                    }
                    ChannelKind::Awgn => unreachable!(),
                }
            };
            let h_plus: f64 = alphabet.iter().map(|&y| xlog2x(w(y, 1.0))).sum();
            let h_minus: f64 = alphabet.iter().map(|&y| xlog2x(w(y, -1.0))).sum();
            if e == 0.0 {
                // phi degenerates to the raw channel law on either side of
                // the threshold.
                let p_plus = q_func(theta);
                p_plus * h_plus + (1.0 - p_plus) * h_minus
            } else if e == 1.0 {
                // the smoothed law no longer depends on z
                let c_plus = q_func(theta);
                alphabet
                    .iter()
                    .map(|&y| xlog2x(w(y, 1.0) * c_plus + w(y, -1.0) * (1.0 - c_plus)))
                    .sum()
            } else {
                // The integrand transitions between the two pure-channel
                // values inside a window of width sqrt(E) around the map
                // threshold; the tails are exact Gaussian masses and the
                // window itself is integrated densely.
                let sq = e.sqrt();
                let shrink = (1.0 - e).sqrt();
                let z_mid = theta / shrink;
                let span = 42.0 * sq / shrink;
                let z_lo = (z_mid - span).max(-10.0 - span.min(1.0)).max(z_mid - 24.0);
                let z_hi = (z_mid + span).min(10.0 + span.min(1.0)).min(z_mid + 24.0);
                let tail_minus = 1.0 - q_func(z_lo);
                let tail_plus = q_func(z_hi);
                let steps = 4000usize;
                let h = (z_hi - z_lo) / steps as f64;
                let mut acc = 0.0;
                for i in 0..=steps {
                    let z = z_lo + i as f64 * h;
                    let c_plus = q_func((theta - z * shrink) / sq);
                    let c_minus = 1.0 - c_plus;
                    let mut inner = 0.0;
                    for &y in alphabet {
                        inner += xlog2x(w(y, 1.0) * c_plus + w(y, -1.0) * c_minus);
                    }
                    let simp = if i == 0 || i == steps {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += simp * crate::special::norm_pdf(z) * inner;
                }
                acc * h / 3.0 + tail_minus * h_minus + tail_plus * h_plus
            }
        }
    };
    first - phi_term / rate
}

/// Entropy term of the potential at effective noise `sigma2`, Monte-Carlo
/// averaged over the frozen bank.
///
/// Ranges from 0 (no noise) to 1 (pure prior).
pub fn s_un(sigma2: f64, bank: &SampleBank, _cfg: &SeConfig) -> Result<f64> {
    if sigma2 <= 0.0 {
        return Ok(0.0);
    }
    if !sigma2.is_finite() {
        return Ok(1.0);
    }
    let b = bank.b() as f64;
    let lb = b.log2();
    let a2 = sigma2 / lb;
    let a = a2.sqrt();
    let ln_b = b.ln();
    bank.mean_checked(|i| {
        let row = bank.row(i);
        let z1 = row[0];
        let mut hi = 0.0f64;
        let mut acc_exps = 0.0;
        // log(1 + sum_i e^{u_i}) with u_i = (z_i - z_1)/a - 1/a^2,
        // max-stabilized.
        for &zk in &row[1..] {
            let u = (zk - z1) / a - 1.0 / a2;
            if u > hi {
                hi = u;
            }
        }
        for &zk in &row[1..] {
            let u = (zk - z1) / a - 1.0 / a2;
            acc_exps += (u - hi).exp();
        }
        (hi + ((-hi).exp() + acc_exps).ln()) / ln_b
    })
}

/// The potential `F_un(E) = U_un(E) - S_un(Sigma(E))`.
pub fn f_un(
    e: f64,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<f64> {
    Ok(u_un(e, spec, rate, gh) - s_un(spec.sigma2(rate, e, gh), bank, cfg)?)
}

/// Gridded decomposition of the potential.
#[derive(Debug, Clone)]
pub struct PotentialCurve {
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub f: Vec<f64>,
}

impl PotentialCurve {
    /// CSV with columns `e,u,s,f`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "e,u,s,f")?;
        for i in 0..self.e.len() {
            writeln!(out, "{},{},{},{}", self.e[i], self.u[i], self.s[i], self.f[i])?;
        }
        Ok(())
    }
}

/// Evaluates the potential decomposition on a strictly increasing grid.
pub fn potential_curve(
    grid: &[f64],
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<PotentialCurve> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("grid must be strictly increasing".into()));
    }
    if grid.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
        return Err(Error::Precondition("grid must lie in [0,1]".into()));
    }
    let mut curve = PotentialCurve {
        e: grid.to_vec(),
        u: Vec::with_capacity(grid.len()),
        s: Vec::with_capacity(grid.len()),
        f: Vec::with_capacity(grid.len()),
    };
    for &e in grid {
        let u = u_un(e, spec, rate, gh);
        let s = s_un(spec.sigma2(rate, e, gh), bank, cfg)?;
        curve.u.push(u);
        curve.s.push(s);
        curve.f.push(u - s);
    }
    Ok(curve)
}

/// Free energy gap over the complement of the floor's basin of attraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gap {
    Finite(f64),
    /// The complement is empty (every start decodes); by convention the
    /// infimum over the empty set.
    Infinite,
}

impl Gap {
    pub fn is_positive(&self) -> bool {
        match self {
            Gap::Infinite => true,
            Gap::Finite(v) => *v > 0.0,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Gap::Finite(v) => Some(*v),
            Gap::Infinite => None,
        }
    }
}

/// Largest error still attracted to the MSE floor, located by bisection.
///
/// Monotonicity of the scalar operator under common random numbers makes the
/// basin an interval `[0, edge]`, so membership is a monotone predicate.
pub fn basin_edge(
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<(f64, f64)> {
    let floor = se::iterate_un(0.0, spec, rate, bank, gh, cfg)?;
    let top = se::iterate_un(1.0, spec, rate, bank, gh, cfg)?;
    if (top - floor).abs() <= FLOOR_MATCH_TOL {
        return Ok((1.0, floor));
    }
    let mut lo = floor.min(1.0);
    let mut hi = 1.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let limit = se::iterate_un(mid, spec, rate, bank, gh, cfg)?;
        if (limit - floor).abs() <= FLOOR_MATCH_TOL {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok((lo, floor))
}

/// Free energy gap: the infimum of `F_un(E) - F_un(floor)` over errors
/// outside the basin of attraction, with grid refinement around the minimum
/// until the value is stable to [`GAP_REFINE_TOL`].
pub fn free_energy_gap(
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<Gap> {
    let (edge, floor) = basin_edge(spec, rate, bank, gh, cfg)?;
    if edge >= 1.0 {
        return Ok(Gap::Infinite);
    }
    let f_floor = f_un(floor, spec, rate, bank, gh, cfg)?;
    let eval = |e: f64| f_un(e, spec, rate, bank, gh, cfg);

    // Coarse pass: the 401-point uniform grid restricted to (edge, 1],
    // with the near-edge boundary point included.
    let near_edge = (edge + 1e-9).min(1.0);
    let mut best_e = near_edge;
    let mut best_f = eval(near_edge)?;
    let coarse: Vec<f64> = (0..=400)
        .map(|k| k as f64 / 400.0)
        .filter(|&e| e > edge && e <= 1.0)
        .collect();
    for &e in coarse.iter().chain(std::iter::once(&1.0)) {
        let f = eval(e)?;
        if f < best_f {
            best_f = f;
            best_e = e;
        }
    }
    // Local refinement around the minimizer until the infimum stabilizes.
    let mut spacing = 1.0 / 400.0;
    for _ in 0..20 {
        let prev_best = best_f;
        let lo = (best_e - spacing).max(near_edge);
        let hi = (best_e + spacing).min(1.0);
        spacing = (hi - lo) / 20.0;
        for k in 0..=20 {
            let e = lo + k as f64 * (hi - lo) / 20.0;
            let f = eval(e)?;
            if f < best_f {
                best_f = f;
                best_e = e;
            }
        }
        if (prev_best - best_f).abs() < GAP_REFINE_TOL {
            break;
        }
    }
    Ok(Gap::Finite(best_f - f_floor))
}

/// Potential threshold: the largest rate with a positive free energy gap.
pub fn r_pot(
    spec: &ChannelSpec,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
    rate_tol: f64,
) -> Result<ThresholdResult> {
    bisect_rate(
        |r| Ok(free_energy_gap(spec, r, bank, gh, cfg)?.is_positive()),
        rate_tol,
    )
}

/// Potential of the spatially coupled ensemble:
/// `sum_r U_un(E_r) - sum_c S_un(Sigma_c(E))`.
pub fn f_co(
    profile: &Profile,
    coupling: &CouplingSpec,
    spec: &ChannelSpec,
    rate: f64,
    bank: &SampleBank,
    gh: &GaussHermite,
    cfg: &SeConfig,
) -> Result<f64> {
    let s2 = se::sigma_c(profile, coupling, spec, rate, gh);
    let mut total = 0.0;
    for &e in profile.values() {
        total += u_un(e, spec, rate, gh);
    }
    for &v in &s2 {
        total -= s_un(v, bank, cfg)?;
    }
    Ok(total)
}
