//! GAMP decoder specialized to the sectionwise one-hot prior.
//!
//! One decode is a single sequential recursion; the matrix-vector products
//! inside each iteration are data-parallel with a fixed reduction order, so
//! identical seeds replay bit-identically.

use crate::channel::ChannelSpec;
use crate::code::{CodingMatrix, Message};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Floor applied to every variance used as a divisor.
pub const TAU_FLOOR: f64 = 1e-12;
/// Cap on variances; exceeding it before clamping is treated as divergence.
pub const TAU_CAP: f64 = 1e12;

/// Initialization of the estimate and its variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GampInit {
    /// Prior mean `1/B` per component with the prior variance
    /// `(1/B)(1-1/B)`.
    #[default]
    Prior,
    /// Zero estimate with variance `1/B`, the recursion's verbatim line-2
    /// initialization; aligns the first iteration with state evolution
    /// started from unit error.
    Flat,
}

/// Decoder knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GampConfig {
    pub n_iter: usize,
    /// Early stop when the per-section change of the estimate drops below
    /// this.
    pub stop_tol: f64,
    pub init: GampInit,
}

impl Default for GampConfig {
    fn default() -> Self {
        GampConfig {
            n_iter: 100,
            stop_tol: 1e-8,
            init: GampInit::Prior,
        }
    }
}

/// Per-iteration metrics of one decode, recorded when the truth is supplied.
#[derive(Debug, Clone, Default)]
pub struct DecodeTrace {
    /// Per-section mean-square error `L^{-1} sum_l ||s_hat_l - s_l||^2`.
    pub mse: Vec<f64>,
    /// Hard-decision section error rate over unseeded sections.
    pub ser: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl DecodeTrace {
    /// CSV with columns `t,mse,ser`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,mse,ser")?;
        for (t, (m, s)) in self.mse.iter().zip(&self.ser).enumerate() {
            writeln!(out, "{t},{m},{s}")?;
        }
        Ok(())
    }
}

/// Sectionwise posterior mean under an effective Gaussian observation
/// `r_hat = s + noise`, `noise_i ~ N(0, tau_i)`: componentwise softmax of
/// `(2 r_i - 1) / (2 tau_i)` with max-subtraction.
///
/// Zero variances take the continuous zero-noise limit.
pub fn denoise_gin(r_hat: &[f64], tau: &[f64], out: &mut [f64]) {
    debug_assert_eq!(r_hat.len(), tau.len());
    debug_assert_eq!(r_hat.len(), out.len());
    let mut hi = f64::NEG_INFINITY;
    for (o, (&r, &t)) in out.iter_mut().zip(r_hat.iter().zip(tau)) {
        let x = (2.0 * r - 1.0) / (2.0 * t.max(TAU_FLOOR));
        *o = x;
        if x > hi {
            hi = x;
        }
    }
    let mut norm = 0.0;
    for o in out.iter_mut() {
        *o = (*o - hi).exp();
        norm += *o;
    }
    for o in out.iter_mut() {
        *o /= norm;
    }
}

/// Posterior variance of a one-hot section given its posterior mean:
/// componentwise `g (1 - g)`.
pub fn denoise_var(g: &[f64], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(g) {
        *o = v - v * v;
    }
}

/// Hard decision: one-hot at the largest component of each section, ties to
/// the lowest index.
pub fn hard_decision(s_hat: &[f64], b: usize) -> Message {
    let positions = s_hat
        .chunks(b)
        .map(|sec| {
            let mut best = 0usize;
            for (i, &v) in sec.iter().enumerate() {
                if v > sec[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect();
    Message::from_positions(b, positions).expect("argmax is always a valid position")
}

/// Runs the GAMP recursion on observations `y` of the codeword `F s`.
///
/// When `truth` is given, seeded sections are pinned to their true value
/// with zero variance after every denoiser step, and the returned trace
/// carries per-iteration MSE and SER. Stops early once the estimate change
/// per section falls below `cfg.stop_tol`.
pub fn gamp_decode(
    y: &[f64],
    f: &CodingMatrix,
    spec: &ChannelSpec,
    b: usize,
    cfg: &GampConfig,
    truth: Option<&Message>,
) -> Result<(Vec<f64>, DecodeTrace)> {
    let (m, n) = (f.m(), f.n());
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    if n % b != 0 {
        return Err(Error::DimensionMismatch { expected: n, got: b });
    }
    let l = n / b;
    if let Some(t) = truth {
        if t.sections() != l || t.b() != b {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: t.sections() * t.b(),
            });
        }
    }

    let bf = b as f64;
    let (mut s_hat, mut tau_s) = match cfg.init {
        GampInit::Prior => (vec![1.0 / bf; n], vec![(1.0 / bf) * (1.0 - 1.0 / bf); n]),
        GampInit::Flat => (vec![0.0; n], vec![1.0 / bf; n]),
    };
    let mut z_hat = vec![0.0; m];
    let mut z_prev = vec![0.0; m]; // t = -1 term
    let mut tau_z = vec![0.0; m];
    let mut trace = DecodeTrace::default();

    let pin = |s_hat: &mut [f64], tau_s: &mut [f64]| {
        if let Some(t) = truth {
            for sec in 0..l {
                if t.is_seeded(sec) {
                    let base = sec * b;
                    for i in 0..b {
                        s_hat[base + i] = 0.0;
                        tau_s[base + i] = 0.0;
                    }
                    s_hat[base + t.position(sec)] = 1.0;
                }
            }
        }
    };
    pin(&mut s_hat, &mut tau_s);

    let mut converged = false;
    let mut iterations = 0;
    for t in 0..cfg.n_iter {
        // tau_p = F^{o2} tau_s ; p_hat = F s_hat - tau_p o z_prev
        let mut tau_p = f.mul_squared(&tau_s);
        let p_lin = f.mul(&s_hat);
        let mut p_hat = vec![0.0; m];
        for i in 0..m {
            if tau_p[i] > TAU_CAP {
                return Err(Error::Divergence {
                    tau_p_max: tau_p[i],
                    iteration: t,
                });
            }
            tau_p[i] = tau_p[i].max(TAU_FLOOR);
            p_hat[i] = p_lin[i] - tau_p[i] * z_prev[i];
        }

        // output step
        for i in 0..m {
            let (score, neg_deriv) = spec.g_out_pair(p_hat[i], y[i], tau_p[i])?;
            z_hat[i] = score;
            tau_z[i] = neg_deriv.max(0.0);
        }

        // tau_r = 1 / (tau_z^T F^{o2}) ; r_hat = s_hat + tau_r o (z^T F)
        let (zf, tzf2) = f.t_mul_both(&z_hat, &tau_z);
        let mut r_hat = vec![0.0; n];
        let mut tau_r = vec![0.0; n];
        for j in 0..n {
            let tr = 1.0 / tzf2[j].clamp(TAU_FLOOR, TAU_CAP);
            tau_r[j] = tr.clamp(TAU_FLOOR, TAU_CAP);
            r_hat[j] = s_hat[j] + tau_r[j] * zf[j];
        }

        // input step, sectionwise
        let mut delta = 0.0f64;
        for sec in 0..l {
            let range = sec * b..(sec + 1) * b;
            let mut g = vec![0.0; b];
            denoise_gin(&r_hat[range.clone()], &tau_r[range.clone()], &mut g);
            let mut d = 0.0;
            for (j, i) in range.clone().enumerate() {
                let step = g[j] - s_hat[i];
                d += step * step;
            }
            delta = delta.max(d);
            denoise_var(&g, &mut tau_s[range.clone()]);
            s_hat[range].copy_from_slice(&g);
        }
        pin(&mut s_hat, &mut tau_s);

        if s_hat.iter().any(|v| !v.is_finite()) || z_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { iteration: t });
        }

        std::mem::swap(&mut z_prev, &mut z_hat);
        iterations = t + 1;

        if let Some(tm) = truth {
            let dense = tm.to_dense();
            let mut mse = 0.0;
            for (a, b_) in s_hat.iter().zip(&dense) {
                let d = a - b_;
                mse += d * d;
            }
            trace.mse.push(mse / l as f64);
            let decided = hard_decision(&s_hat, b);
            trace.ser.push(decided.section_error_rate(tm)?);
        }

        if delta < cfg.stop_tol {
            converged = true;
            break;
        }
    }

    trace.converged = converged;
    trace.iterations = iterations;
    Ok((s_hat, trace))
}
