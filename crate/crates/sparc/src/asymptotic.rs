//! Large-alphabet closed forms: the limiting potential, the algorithmic
//! threshold expressed through a Fisher information, the capacity-equal
//! potential threshold, and the optimal input bias of the Z channel.

use crate::channel::{ChannelKind, ChannelSpec, PiMap};
use crate::error::{Error, Result};
use crate::potential::u_un;
use crate::quad::GaussHermite;
use crate::special::{gauss_pdf, h2, q_inv, xlog2x, LN_2};

/// Limiting potential as the section size grows:
/// `U_un(E) - max(0, 1 - 1/(2 ln2 Sigma^2(E)))`.
pub fn phi_un_large_b(e: f64, spec: &ChannelSpec, rate: f64, gh: &GaussHermite) -> f64 {
    let sigma2 = spec.sigma2(rate, e, gh);
    let entropy = if sigma2 == 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / (2.0 * LN_2 * sigma2)).max(0.0)
    };
    u_un(e, spec, rate, gh) - entropy
}

/// Large-alphabet algorithmic threshold `F(0|1) / (2 ln 2)`, per-channel
/// closed forms.
pub fn r_un_inf(spec: &ChannelSpec) -> f64 {
    let eps = spec.param();
    match spec.kind() {
        ChannelKind::Awgn => 1.0 / (2.0 * LN_2 * (1.0 + 1.0 / spec.param())),
        ChannelKind::Bsc => (1.0 - 2.0 * eps).powi(2) / (std::f64::consts::PI * LN_2),
        ChannelKind::Bec => (1.0 - eps) / (std::f64::consts::PI * LN_2),
        ChannelKind::Z => match spec.pi_map() {
            PiMap::BiasedSign(p1) => {
                let theta = q_inv(p1);
                (1.0 - eps) * (-theta * theta).exp()
                    / (4.0
                        * std::f64::consts::PI
                        * LN_2
                        * (1.0 - p1)
                        * ((1.0 - p1) * eps + p1))
            }
            _ => (1.0 - eps) / (std::f64::consts::PI * LN_2 * (1.0 + eps)),
        },
    }
}

/// Large-alphabet potential threshold; coincides with the Shannon capacity
/// under the configured input map.
pub fn r_pot_inf(spec: &ChannelSpec) -> f64 {
    spec.capacity()
}

/// Independent quadrature route to the large-alphabet potential threshold:
/// output entropy minus conditional output entropy of the effective channel
/// with a standard Gaussian codeword component at the input.
pub fn capacity_numeric(spec: &ChannelSpec, gh: &GaussHermite) -> f64 {
    match spec.kind() {
        ChannelKind::Awgn => {
            let snr = spec.param();
            // h(Y) with Y ~ N(0, 1 + 1/snr), minus h(Y|Z) with noise 1/snr.
            let vy = 1.0 + 1.0 / snr;
            let hy = gh.expect(0.0, vy, |y| -(gauss_pdf(y, 0.0, vy)).log2());
            let vn = 1.0 / snr;
            let hyz = gh.expect(0.0, vn, |y| -(gauss_pdf(y, 0.0, vn)).log2());
            hy - hyz
        }
        _ => {
            let theta = spec.threshold().unwrap();
            let alphabet = spec.output_alphabet().unwrap();
            // P(a = +1) by Simpson integration of the standard Gaussian; the
            // integrand is piecewise smooth in z with a jump at the map
            // threshold, so each side integrates separately.
            let gauss_mass = |lo: f64, hi: f64| -> f64 {
                let n = 100_001usize;
                let step = (hi - lo) / (n - 1) as f64;
                let mut acc = 0.0;
                for i in 0..n {
                    let z = lo + i as f64 * step;
                    let simp = if i == 0 || i == n - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += simp * gauss_pdf(z, 0.0, 1.0);
                }
                acc * step / 3.0
            };
            let p_plus = gauss_mass(theta, theta.abs().max(1.0) * 14.0);
            let p_minus = gauss_mass(-theta.abs().max(1.0) * 14.0, theta);
            let norm = p_plus + p_minus;
            let (p_plus, p_minus) = (p_plus / norm, p_minus / norm);
            let mut hy = 0.0;
            let mut h_cond = 0.0;
            for &y in alphabet {
                let py = p_plus * w_of(spec, y, 1.0) + p_minus * w_of(spec, y, -1.0);
                hy -= xlog2x(py);
                h_cond += p_plus * xlog2x(w_of(spec, y, 1.0)) + p_minus * xlog2x(w_of(spec, y, -1.0));
            }
            hy + h_cond
        }
    }
}

fn w_of(spec: &ChannelSpec, y: f64, a: f64) -> f64 {
    let eps = spec.param();
    match spec.kind() {
        ChannelKind::Awgn => unreachable!(),
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
    }
}

/// Input bias maximizing the Z-channel mutual information:
/// `p1* = 1 - [(1-eps)(1 + 2^{h2(eps)/(1-eps)})]^{-1}`.
pub fn z_optimal_bias(eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::Precondition(format!(
            "optimal bias needs eps in [0,1), got {eps}"
        )));
    }
    Ok(1.0 - 1.0 / ((1.0 - eps) * (1.0 + (h2(eps) / (1.0 - eps)).exp2())))
}

/// Z-channel mutual information at input bias `p1`.
pub fn z_capacity_at(eps: f64, p1: f64) -> f64 {
    h2((1.0 - p1) * (1.0 - eps)) - (1.0 - p1) * h2(eps)
}
