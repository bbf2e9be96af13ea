//! Memoryless channel models and the estimation-theoretic machinery built on
//! them: output sampling, the GAMP output score function, Fisher information
//! and the effective noise variance of the equivalent Gaussian channel.
//!
//! Codeword components are real; binary-input channels see them through a
//! threshold map `pi(z) = sign(z - theta)`. The concatenation of the map and
//! the physical channel is the effective channel all formulas refer to.
//! For the erasure channel the output alphabet is `{-1, 0, +1}` with `0`
//! encoding the erasure symbol.

use crate::error::{Error, Result};
use crate::quad::GaussHermite;
use crate::special::{gauss_pdf, h2, q_func, q_inv};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative tolerance for the node-doubling self check on quadratures.
pub const QUAD_DOUBLING_RTOL: f64 = 1e-8;

/// Physical channel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Awgn,
    Bsc,
    Bec,
    Z,
}

/// Input map applied to codeword components before transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PiMap {
    /// Pass-through; pairs with the AWGN channel.
    Identity,
    /// `sign(z)`, inducing a uniform binary input.
    Sign,
    /// `sign(z - Q^{-1}(p1))`, inducing `P(input = +1) = p1`.
    BiasedSign(f64),
}

/// A validated channel specification: family, noise parameter and input map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    kind: ChannelKind,
    param: f64,
    pi_map: PiMap,
}

impl ChannelSpec {
    /// Validates the pairing and parameter rules.
    ///
    /// AWGN pairs only with the identity map and needs `snr > 0`; BSC and BEC
    /// pair with the sign map; the Z channel accepts the sign map or a biased
    /// sign map with `p1` in `(0, 1)`. Flip/erasure probabilities live in
    /// `[0, 1]`.
    pub fn new(kind: ChannelKind, param: f64, pi_map: PiMap) -> Result<Self> {
        match kind {
            ChannelKind::Awgn => {
                if pi_map != PiMap::Identity {
                    return Err(Error::InvalidChannel(
                        "awgn pairs only with the identity map".into(),
                    ));
                }
                if param <= 0.0 || !param.is_finite() {
                    return Err(Error::InvalidChannel(format!("awgn needs snr > 0, got {param}")));
                }
            }
            ChannelKind::Bsc | ChannelKind::Bec => {
                if pi_map != PiMap::Sign {
                    return Err(Error::InvalidChannel(
                        "bsc/bec pair with the sign map".into(),
                    ));
                }
                if !(0.0..=1.0).contains(&param) {
                    return Err(Error::InvalidChannel(format!(
                        "flip/erasure probability must be in [0,1], got {param}"
                    )));
                }
            }
            ChannelKind::Z => {
                match pi_map {
                    PiMap::Sign => {}
                    PiMap::BiasedSign(p1) => {
                        if !(p1 > 0.0 && p1 < 1.0) {
                            return Err(Error::InvalidChannel(format!(
                                "biased_sign needs p1 in (0,1), got {p1}"
                            )));
                        }
                    }
                    PiMap::Identity => {
                        return Err(Error::InvalidChannel(
                            "z pairs with sign or biased_sign".into(),
                        ))
                    }
                }
                if !(0.0..=1.0).contains(&param) {
                    return Err(Error::InvalidChannel(format!(
                        "flip probability must be in [0,1], got {param}"
                    )));
                }
            }
        }
        Ok(ChannelSpec { kind, param, pi_map })
    }

    pub fn awgn(snr: f64) -> Result<Self> {
        Self::new(ChannelKind::Awgn, snr, PiMap::Identity)
    }

    pub fn bsc(eps: f64) -> Result<Self> {
        Self::new(ChannelKind::Bsc, eps, PiMap::Sign)
    }

    pub fn bec(eps: f64) -> Result<Self> {
        Self::new(ChannelKind::Bec, eps, PiMap::Sign)
    }

    pub fn z(eps: f64) -> Result<Self> {
        Self::new(ChannelKind::Z, eps, PiMap::Sign)
    }

    pub fn z_biased(eps: f64, p1: f64) -> Result<Self> {
        Self::new(ChannelKind::Z, eps, PiMap::BiasedSign(p1))
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    /// The noise parameter: `snr` for AWGN, flip/erasure probability otherwise.
    pub fn param(&self) -> f64 {
        self.param
    }

    pub fn pi_map(&self) -> PiMap {
        self.pi_map
    }

    /// Threshold of the sign map, `None` for the identity map.
    pub fn threshold(&self) -> Option<f64> {
        match self.pi_map {
            PiMap::Identity => None,
            PiMap::Sign => Some(0.0),
            PiMap::BiasedSign(p1) => Some(q_inv(p1)),
        }
    }


    /// Channel transition probability `W(y | a)` for binary input `a = ±1`.
    fn w_given(&self, y: f64, a: f64) -> f64 {
        let eps = self.param;
        match self.kind {
            ChannelKind::Awgn => unreachable!("w_given is for binary-input channels"),
            ChannelKind::Bsc => {
                if y == a {
                    1.0 - eps
                } else if y == -a {
                    eps
                } else {
                    0.0
                }
            }
            ChannelKind::Bec => {
                if y == a {
                    1.0 - eps
                } else if y == 0.0 {
                    eps
                } else {
                    0.0
                }
            }
            ChannelKind::Z => {
                // +1 passes clean; -1 flips to +1 with probability eps.
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
        }
    }

    /// Whether `y` lies in this channel's output alphabet.
    pub fn is_valid_output(&self, y: f64) -> bool {
        match self.kind {
            ChannelKind::Awgn => y.is_finite(),
            ChannelKind::Bsc | ChannelKind::Z => y == 1.0 || y == -1.0,
            ChannelKind::Bec => y == 1.0 || y == -1.0 || y == 0.0,
        }
    }

    /// The discrete output alphabet, `None` for the AWGN channel.
    pub fn output_alphabet(&self) -> Option<&'static [f64]> {
        match self.kind {
            ChannelKind::Awgn => None,
            ChannelKind::Bsc | ChannelKind::Z => Some(&[-1.0, 1.0]),
            ChannelKind::Bec => Some(&[-1.0, 0.0, 1.0]),
        }
    }

    /// Transmits one codeword component through the effective channel.
    pub fn sample_output<R: Rng + ?Sized>(&self, z: f64, rng: &mut R) -> f64 {
        match self.kind {
            ChannelKind::Awgn => {
                let noise: f64 = rng.sample(rand_distr::StandardNormal);
                z + noise / self.param.sqrt()
            }
            _ => {
                let theta = self.threshold().unwrap();
                let a = if z >= theta { 1.0 } else { -1.0 };
                let eps = self.param;
                let u: f64 = rng.random();
                match self.kind {
                    ChannelKind::Bsc => {
                        if u < eps {
                            -a
                        } else {
                            a
                        }
                    }
                    ChannelKind::Bec => {
                        if u < eps {
                            0.0
                        } else {
                            a
                        }
                    }
                    ChannelKind::Z => {
                        if a < 0.0 && u < eps {
                            1.0
                        } else {
                            a
                        }
                    }
                    ChannelKind::Awgn => unreachable!(),
                }
            }
        }
    }

    /// GAMP output function: the score `(E[Z|p,y,tau] - p) / tau` and its
    /// negated derivative `(tau - Var[Z|p,y,tau]) / tau^2`, for
    /// `Z ~ N(p, tau)` observed through the effective channel.
    ///
    /// Fails with [`Error::DegenerateLikelihood`] when the likelihood of `y`
    /// underflows to zero.
    pub fn g_out_pair(&self, p: f64, y: f64, tau: f64) -> Result<(f64, f64)> {
        if tau <= 0.0 || tau.is_nan() {
            return Err(Error::Precondition(format!("g_out needs tau > 0, got {tau}")));
        }
        match self.kind {
            ChannelKind::Awgn => {
                let denom = tau + 1.0 / self.param;
                Ok(((y - p) / denom, 1.0 / denom))
            }
            _ => {
                let theta = self.threshold().unwrap();
                let sq = tau.sqrt();
                // Mass, first and second truncated moments of N(p, tau) on
                // either side of the threshold.
                let t = (theta - p) / sq;
                let c_plus = q_func(t);
                let c_minus = q_func(-t);
                let dens = gauss_pdf(theta, p, tau);
                let m_plus = p * c_plus + tau * dens;
                let m_minus = p * c_minus - tau * dens;
                let q_plus = (p * p + tau) * c_plus + (p + theta) * tau * dens;
                let q_minus = (p * p + tau) * c_minus - (p + theta) * tau * dens;
                let w_plus = self.w_given(y, 1.0);
                let w_minus = self.w_given(y, -1.0);
                let f = w_plus * c_plus + w_minus * c_minus;
                if f == 0.0 {
                    return Err(Error::DegenerateLikelihood { p, y, tau });
                }
                let ez = (w_plus * m_plus + w_minus * m_minus) / f;
                let ez2 = (w_plus * q_plus + w_minus * q_minus) / f;
                let var = (ez2 - ez * ez).max(0.0);
                Ok(((ez - p) / tau, (tau - var) / (tau * tau)))
            }
        }
    }

    /// Fisher information `F(p|E)` of the location parameter of the effective
    /// channel smoothed by `N(p, E)` noise; closed forms per channel.
    ///
    /// Defined for any nonnegative smoothing variance, with the continuous
    /// extension at `E = 0`.
    pub fn fisher(&self, p: f64, e: f64) -> f64 {
        assert!(e >= 0.0, "fisher needs E >= 0, got {e}");
        match self.kind {
            ChannelKind::Awgn => 1.0 / (1.0 / self.param + e),
            _ => {
                if e == 0.0 {
                    // Density factor vanishes a.e.; the spike is handled by
                    // the expectation integral, not pointwise.
                    return 0.0;
                }
                let theta = self.threshold().unwrap();
                let dens = gauss_pdf(theta, p, e);
                if dens == 0.0 {
                    return 0.0;
                }
                let t = (theta - p) / e.sqrt();
                let c_plus = q_func(t);
                let c_minus = q_func(-t);
                dens * dens * self.fisher_shape(c_plus, c_minus)
            }
        }
    }

    // Channel-dependent factor A with F(p|E) = N(theta|p,E)^2 * A(c+, c-).
    fn fisher_shape(&self, c_plus: f64, c_minus: f64) -> f64 {
        let eps = self.param;
        match self.kind {
            ChannelKind::Awgn => unreachable!(),
            ChannelKind::Bsc => {
                let f_plus = (1.0 - eps) * c_plus + eps * c_minus;
                let f_minus = (1.0 - eps) * c_minus + eps * c_plus;
                let denom = f_plus * f_minus;
                if denom == 0.0 {
                    0.0
                } else {
                    (1.0 - 2.0 * eps).powi(2) / denom
                }
            }
            ChannelKind::Bec => {
                let denom = c_plus * c_minus;
                if denom == 0.0 {
                    0.0
                } else {
                    (1.0 - eps) / denom
                }
            }
            ChannelKind::Z => {
                let f_plus = c_plus + eps * c_minus;
                let first = if f_plus == 0.0 {
                    0.0
                } else {
                    (1.0 - eps) * (1.0 - eps) / f_plus
                };
                let second = if c_minus == 0.0 { 0.0 } else { (1.0 - eps) / c_minus };
                first + second
            }
        }
    }

    /// The Fisher expectation `E_{p ~ N(0, 1-E)}[F(p|E)]`; rate-independent
    /// numerator of the inverse effective noise.
    ///
    /// Returns `+inf` at `E = 0` for binary-input channels (the effective
    /// noise vanishes there).
    pub fn fisher_expectation(&self, e: f64, gh: &GaussHermite) -> f64 {
        assert!((0.0..=1.0).contains(&e), "E must be in [0,1], got {e}");
        match self.kind {
            ChannelKind::Awgn => 1.0 / (1.0 / self.param + e),
            _ => {
                if e == 0.0 {
                    return f64::INFINITY;
                }
                if e == 1.0 {
                    return self.fisher(0.0, 1.0);
                }
                let theta = self.threshold().unwrap();
                // The integrand is N(p|0,1-E) N(theta|p,E)^2 A(p). The two
                // Gaussian factors combine to precision a and mean m; the
                // quadrature runs over N(m, 1/a) and A alone, which keeps the
                // narrow small-E spike exactly resolved.
                let a = 1.0 / (1.0 - e) + 2.0 / e;
                let m = (2.0 * theta / e) / a;
                let log_pref = 0.5 * a * m * m - theta * theta / e;
                let pref = log_pref.exp() / (2.0 * PI * e * (a * (1.0 - e)).sqrt());
                let sqe = e.sqrt();
                let mean_shape = gh.expect(m, 1.0 / a, |p| {
                    let t = (theta - p) / sqe;
                    self.fisher_shape(q_func(t), q_func(-t))
                });
                pref * mean_shape
            }
        }
    }

    /// Effective noise variance `Sigma^2(E)` of the equivalent per-component
    /// Gaussian channel at rate `R`.
    ///
    /// Defined through `Sigma^{-2} = E_p[F(p|E)] / R`; zero at `E = 0` for
    /// binary-input channels, `R (E + 1/snr)` for AWGN.
    pub fn sigma2(&self, rate: f64, e: f64, gh: &GaussHermite) -> f64 {
        assert!(rate > 0.0, "rate must be positive");
        let fe = self.fisher_expectation(e, gh);
        if fe.is_infinite() {
            0.0
        } else {
            rate / fe
        }
    }

    /// [`ChannelSpec::sigma2`] with a node-doubling convergence check.
    pub fn sigma2_checked(&self, rate: f64, e: f64, nodes: usize) -> Result<f64> {
        let coarse = self.sigma2(rate, e, &GaussHermite::new(nodes));
        let fine = self.sigma2(rate, e, &GaussHermite::new(2 * nodes));
        let rel = (coarse - fine).abs() / fine.abs().max(f64::MIN_POSITIVE);
        if rel > QUAD_DOUBLING_RTOL {
            return Err(Error::QuadratureNonConvergence { coarse, fine, rel });
        }
        Ok(fine)
    }

    /// Shannon capacity of the channel under the input distribution induced
    /// by the configured map (symmetric capacity for the sign map, `C(p1)`
    /// for the biased map, Gaussian input for AWGN). In bits per use.
    pub fn capacity(&self) -> f64 {
        let eps = self.param;
        match self.kind {
            ChannelKind::Awgn => 0.5 * (1.0 + self.param).log2(),
            ChannelKind::Bsc => 1.0 - h2(eps),
            ChannelKind::Bec => 1.0 - eps,
            ChannelKind::Z => {
                let p1 = match self.pi_map {
                    PiMap::BiasedSign(p1) => p1,
                    _ => 0.5,
                };
                h2((1.0 - p1) * (1.0 - eps)) - (1.0 - p1) * h2(eps)
            }
        }
    }

    /// Least-squares power-law fit of the stiffness envelope
    /// `lambda(E) = max(Sigma^{-2}, |d Sigma^{-2}/dE|, |d^2 Sigma^{-2}/dE^2|)`
    /// against `1/E` over a logarithmic grid; derivatives by central
    /// differences. Returns `(beta_hat, c_hat)`.
    ///
    /// Defined for the BSC and BEC. The default window sits where the
    /// envelope hands over from curvature- to value-dominated; see
    /// [`ScalingFitOptions`].
    pub fn scaling_exponent_fit(&self, rate: f64) -> Result<(f64, f64)> {
        self.scaling_exponent_fit_on(rate, &ScalingFitOptions::default())
    }

    /// [`ChannelSpec::scaling_exponent_fit`] with an explicit grid.
    pub fn scaling_exponent_fit_on(
        &self,
        rate: f64,
        opts: &ScalingFitOptions,
    ) -> Result<(f64, f64)> {
        if !matches!(self.kind, ChannelKind::Bsc | ChannelKind::Bec) {
            return Err(Error::NotApplicable("scaling fit is defined for bsc and bec"));
        }
        let gh = GaussHermite::new(opts.gh_nodes);
        let inv_sigma2 = |e: f64| self.fisher_expectation(e, &gh) / rate;
        let h = opts.fd_step;
        let n = opts.points;
        let (lo, hi) = (opts.e_lo, opts.e_hi);
        assert!(n >= 2 && lo > 0.0 && hi > lo && hi + h < 1.0);
        let ratio = (hi / lo).powf(1.0 / (n as f64 - 1.0));
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for k in 0..n {
            let e = lo * ratio.powi(k as i32);
            let f0 = inv_sigma2(e);
            let fp = inv_sigma2(e + h);
            let fm = inv_sigma2(e - h);
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * f0 + fm) / (h * h);
            let lambda = f0.max(d1.abs()).max(d2.abs());
            if !lambda.is_finite() || lambda <= 0.0 {
                return Err(Error::Precondition(format!(
                    "non-finite envelope at E={e}: {lambda}"
                )));
            }
            xs.push((1.0 / e).ln());
            ys.push(lambda.ln());
        }
        let (beta, intercept) = least_squares(&xs, &ys);
        Ok((beta, intercept.exp()))
    }
}

/// Grid and step controls for [`ChannelSpec::scaling_exponent_fit_on`].
#[derive(Debug, Clone)]
pub struct ScalingFitOptions {
    pub e_lo: f64,
    pub e_hi: f64,
    pub points: usize,
    pub fd_step: f64,
    pub gh_nodes: usize,
}

impl Default for ScalingFitOptions {
    fn default() -> Self {
        ScalingFitOptions {
            e_lo: 0.9,
            e_hi: 0.99,
            points: 25,
            fd_step: 1e-5,
            gh_nodes: 61,
        }
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct WireSpec {
    kind: String,
    param: f64,
    pi_map: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    p1: Option<f64>,
}

impl Serialize for ChannelSpec {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let kind = match self.kind {
            ChannelKind::Awgn => "awgn",
            ChannelKind::Bsc => "bsc",
            ChannelKind::Bec => "bec",
            ChannelKind::Z => "z",
        };
        let (pi_map, p1) = match self.pi_map {
            PiMap::Identity => ("identity", None),
            PiMap::Sign => ("sign", None),
            PiMap::BiasedSign(p1) => ("biased_sign", Some(p1)),
        };
        WireSpec {
            kind: kind.into(),
            param: self.param,
            pi_map: pi_map.into(),
            p1,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ChannelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let wire = WireSpec::deserialize(de)?;
        let kind = match wire.kind.as_str() {
            "awgn" => ChannelKind::Awgn,
            "bsc" => ChannelKind::Bsc,
            "bec" => ChannelKind::Bec,
            "z" => ChannelKind::Z,
            other => return Err(D::Error::custom(format!("unknown channel kind {other:?}"))),
        };
        let pi_map = match wire.pi_map.as_str() {
            "identity" => PiMap::Identity,
            "sign" => PiMap::Sign,
            "biased_sign" => {
                let p1 = wire
                    .p1
                    .ok_or_else(|| D::Error::custom("biased_sign requires the p1 field"))?;
                PiMap::BiasedSign(p1)
            }
            other => return Err(D::Error::custom(format!("unknown pi_map {other:?}"))),
        };
        ChannelSpec::new(kind, wire.param, pi_map).map_err(D::Error::custom)
    }
}
