//! The experiment runners behind the CLI subcommands.

use crate::config::ExperimentConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sparc::code::{build_matrix, CodeParams};
use sparc::quad::GaussHermite;
use sparc::se::{iterate_un_trace, mse_floor, r_co, r_un};
use sparc::{asymptotic, gamp, potential, ChannelSpec, Error, Message, Result, SampleBank};

/// Per-trial RNG stream: one counter-derived stream per trial, never reused.
fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(1 + trial);
    rng
}

fn transmit(spec: &ChannelSpec, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    x.iter().map(|&z| spec.sample_output(z, rng)).collect()
}

/// Block length rounded up to a multiple of the block count, so coupled
/// matrices partition evenly.
fn align_params(l: usize, b: usize, rate: f64, gamma: Option<usize>) -> Result<CodeParams> {
    let mut params = CodeParams::new(l, b, rate)?;
    if let Some(g) = gamma {
        if !l.is_multiple_of(g) {
            return Err(Error::Divisibility { m: params.m, n: l, gamma: g });
        }
        params.m = params.m.div_ceil(g) * g;
    }
    Ok(params)
}

/// Monte-Carlo decoding sweep: encode, transmit, decode per (rate, trial).
pub fn run_simulate(cfg: &ExperimentConfig, seed: u64) -> Result<serde_json::Value> {
    let code = cfg
        .code
        .ok_or_else(|| Error::Precondition("simulate needs a code section".into()))?;
    let rates = cfg.rate_list()?;
    let trials = cfg.trials.unwrap_or(1);
    let gamp_cfg = cfg.gamp_config();
    let coupling = cfg.coupling_spec()?;
    let mut per_rate = Vec::new();
    let mut trial_counter = 0u64;
    for &rate in &rates {
        let params = align_params(code.l, code.b, rate, coupling.as_ref().map(|c| c.gamma()))?;
        let mut rows = Vec::new();
        let mut ser_sum = 0.0;
        let mut ser_sq = 0.0;
        let mut ok = 0usize;
        for trial in 0..trials {
            let mut rng = trial_rng(seed, trial_counter);
            trial_counter += 1;
            let outcome = (|| -> Result<(f64, f64, usize, bool)> {
                let f = build_matrix(&params, coupling.as_ref(), &mut rng)?;
                let mut msg = Message::random(code.b, code.l, &mut rng)?;
                if let Some(cp) = &coupling {
                    msg.mark_seeded(cp)?;
                }
                let x = f.encode(&msg)?;
                let y = transmit(&cfg.channel, &x, &mut rng);
                let (s_hat, trace) =
                    gamp::gamp_decode(&y, &f, &cfg.channel, code.b, &gamp_cfg, Some(&msg))?;
                let decided = gamp::hard_decision(&s_hat, code.b);
                let ser = decided.section_error_rate(&msg)?;
                let mse = trace.mse.last().copied().unwrap_or(f64::NAN);
                Ok((ser, mse, trace.iterations, trace.converged))
            })();
            match outcome {
                Ok((ser, mse, iterations, converged)) => {
                    ser_sum += ser;
                    ser_sq += ser * ser;
                    ok += 1;
                    rows.push(json!({
                        "trial": trial,
                        "ser": ser,
                        "mse": mse,
                        "iterations": iterations,
                        "converged": converged,
                    }));
                }
                Err(e) => {
                    rows.push(json!({ "trial": trial, "error": e.to_string() }));
                }
            }
        }
        let mean = if ok > 0 { ser_sum / ok as f64 } else { f64::NAN };
        let stderr = if ok > 1 {
            let var = (ser_sq / ok as f64 - mean * mean).max(0.0);
            (var / (ok - 1) as f64).sqrt()
        } else {
            f64::NAN
        };
        per_rate.push(json!({
            "rate": rate,
            "realized_rate": params.realized_rate(),
            "m": params.m,
            "trials_ok": ok,
            "ser_mean": mean,
            "ser_stderr": stderr,
            "trials": rows,
        }));
    }
    Ok(json!({ "decoder": gamp_cfg, "per_rate": per_rate }))
}

/// Decoder MSE per iteration next to the state-evolution prediction.
pub fn run_se_track(cfg: &ExperimentConfig, seed: u64) -> Result<(serde_json::Value, String)> {
    let code = cfg
        .code
        .ok_or_else(|| Error::Precondition("se-track needs a code section".into()))?;
    let rates = cfg.rate_list()?;
    let trials = cfg.trials.unwrap_or(1);
    let se_cfg = cfg.se_config(seed);
    let mut gamp_cfg = cfg.gamp_config();
    // exact alignment with the unit-error SE start
    gamp_cfg.init = sparc::GampInit::Flat;
    let gh = GaussHermite::new(se_cfg.gh_nodes);
    let bank = SampleBank::from_config(code.b, &se_cfg);
    let mut csv = String::from("rate,seed,t,gamp_mse,se_mse\n");
    let mut summary = Vec::new();
    let mut trial_counter = 0u64;
    for &rate in &rates {
        let se_trace = iterate_un_trace(1.0, &cfg.channel, rate, &bank, &gh, &se_cfg)?;
        let params = align_params(code.l, code.b, rate, None)?;
        gamp_cfg.n_iter = se_trace.len() - 1;
        gamp_cfg.stop_tol = 0.0;
        let mut worst = 0.0f64;
        for trial in 0..trials {
            let mut rng = trial_rng(seed, trial_counter);
            trial_counter += 1;
            let f = build_matrix(&params, None, &mut rng)?;
            let msg = Message::random(code.b, code.l, &mut rng)?;
            let x = f.encode(&msg)?;
            let y = transmit(&cfg.channel, &x, &mut rng);
            let (_, trace) = gamp::gamp_decode(&y, &f, &cfg.channel, code.b, &gamp_cfg, Some(&msg))?;
            for (t, &se_val) in se_trace.iter().enumerate() {
                let gamp_val = if t == 0 { 1.0 } else { trace.mse[t - 1] };
                csv.push_str(&format!("{rate},{trial},{t},{gamp_val},{se_val}\n"));
                if t > 0 {
                    worst = worst.max((gamp_val - se_val).abs());
                }
            }
        }
        summary.push(json!({
            "rate": rate,
            "se_iterations": se_trace.len() - 1,
            "se_fixed_point": se_trace.last().copied().unwrap(),
            "worst_abs_deviation": worst,
        }));
    }
    Ok((json!({ "per_rate": summary }), csv))
}

/// Finite-B thresholds of the underlying ensemble plus the potential
/// threshold, per section size.
pub fn run_thresholds(cfg: &ExperimentConfig, seed: u64) -> Result<serde_json::Value> {
    let rate_tol = cfg.rate_tol.unwrap_or(1e-4);
    let b_values = cfg.b_values.clone().unwrap_or_else(|| vec![2]);
    let se_cfg = cfg.se_config(seed);
    let gh = GaussHermite::new(se_cfg.gh_nodes);
    let mut rows = Vec::new();
    for &b in &b_values {
        let bank = SampleBank::from_config(b, &se_cfg);
        let run = r_un(&cfg.channel, &bank, &gh, &se_cfg, rate_tol)?;
        let rpot = potential::r_pot(&cfg.channel, &bank, &gh, &se_cfg, rate_tol)?;
        let floor = mse_floor(&cfg.channel, run.value, &bank, &gh, &se_cfg)?;
        rows.push(json!({
            "b": b,
            "r_un": run.value,
            "r_un_bracket": [run.lo, run.hi],
            "r_pot": rpot.value,
            "r_pot_bracket": [rpot.lo, rpot.hi],
            "mse_floor_at_r_un": floor,
            "capacity": cfg.channel.capacity(),
        }));
    }
    Ok(json!({ "rate_tol": rate_tol, "per_b": rows }))
}

/// Large-alphabet closed forms.
pub fn run_asymptotic(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let spec = &cfg.channel;
    let mut record = json!({
        "channel": match spec.kind() {
            sparc::ChannelKind::Awgn => "awgn",
            sparc::ChannelKind::Bsc => "bsc",
            sparc::ChannelKind::Bec => "bec",
            sparc::ChannelKind::Z => "z",
        },
        "param": spec.param(),
        "r_un_inf": asymptotic::r_un_inf(spec),
        "capacity": asymptotic::r_pot_inf(spec),
    });
    if spec.kind() == sparc::ChannelKind::Z {
        let p1 = asymptotic::z_optimal_bias(spec.param())?;
        record["p1_star"] = json!(p1);
        record["capacity_at_p1_star"] = json!(asymptotic::z_capacity_at(spec.param(), p1));
    }
    Ok(record)
}

/// Saturation sweep: the coupled threshold per window against the underlying
/// and potential thresholds.
pub fn run_saturation(cfg: &ExperimentConfig, seed: u64) -> Result<(serde_json::Value, String)> {
    let rate_tol = cfg.rate_tol.unwrap_or(1e-4);
    let b = cfg
        .code
        .map(|c| c.b)
        .or_else(|| cfg.b_values.as_ref().and_then(|v| v.first().copied()))
        .unwrap_or(2);
    let gamma = cfg
        .coupling
        .as_ref()
        .map(|c| c.gamma)
        .ok_or_else(|| Error::Precondition("saturation needs a coupling section".into()))?;
    let w_values = cfg.w_values.clone().unwrap_or_else(|| vec![1, 2, 4]);
    let se_cfg = cfg.se_config(seed);
    let gh = GaussHermite::new(se_cfg.gh_nodes);
    let bank = SampleBank::from_config(b, &se_cfg);
    let run = r_un(&cfg.channel, &bank, &gh, &se_cfg, rate_tol)?;
    let rpot = potential::r_pot(&cfg.channel, &bank, &gh, &se_cfg, rate_tol)?;
    let mut csv = String::from("gamma,w,r_co,r_un,r_pot,effective_rate_factor\n");
    let mut rows = Vec::new();
    for &w in &w_values {
        let df = sparc::DesignFunction::uniform(w);
        let cp = sparc::code::build_design_variances(&df, gamma, w)?;
        let rco = r_co(&cp, &cfg.channel, &bank, &gh, &se_cfg, rate_tol)?;
        let eff = sparc::code::effective_rate(1.0, w, gamma)?;
        csv.push_str(&format!(
            "{gamma},{w},{},{},{},{eff}\n",
            rco.value, run.value, rpot.value
        ));
        rows.push(json!({
            "gamma": gamma,
            "w": w,
            "r_co": rco.value,
            "r_co_bracket": [rco.lo, rco.hi],
        }));
    }
    Ok((
        json!({
            "b": b,
            "rate_tol": rate_tol,
            "r_un": run.value,
            "r_pot": rpot.value,
            "per_w": rows,
        }),
        csv,
    ))
}

/// Potential decomposition on a uniform grid.
pub fn run_potential_curve(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(serde_json::Value, String)> {
    let b = cfg.code.map(|c| c.b).unwrap_or(2);
    let rates = cfg.rate_list()?;
    let points = cfg.grid_points.unwrap_or(401);
    if points < 2 {
        return Err(Error::Precondition("grid needs at least two points".into()));
    }
    let se_cfg = cfg.se_config(seed);
    let gh = GaussHermite::new(se_cfg.gh_nodes);
    let bank = SampleBank::from_config(b, &se_cfg);
    let grid: Vec<f64> = (0..points)
        .map(|k| k as f64 / (points - 1) as f64)
        .collect();
    let mut csv = String::from("rate,e,u,s,f\n");
    let mut rows = Vec::new();
    for &rate in &rates {
        let curve = potential::potential_curve(&grid, &cfg.channel, rate, &bank, &gh, &se_cfg)?;
        for i in 0..curve.e.len() {
            csv.push_str(&format!(
                "{rate},{},{},{},{}\n",
                curve.e[i], curve.u[i], curve.s[i], curve.f[i]
            ));
        }
        let gap = potential::free_energy_gap(&cfg.channel, rate, &bank, &gh, &se_cfg)?;
        rows.push(json!({
            "rate": rate,
            "gap": match gap {
                potential::Gap::Infinite => json!("infinite"),
                potential::Gap::Finite(v) => json!(v),
            },
        }));
    }
    Ok((json!({ "b": b, "grid_points": points, "per_rate": rows }), csv))
}

/// Coupled state-evolution trajectory at explicit rates (exposed through
/// se-track configs with a coupling section). CSV rows carry the whole
/// profile per iteration: `rate,t,e_1..e_Gamma`.
pub fn run_coupled_profile(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(serde_json::Value, String)> {
    let b = cfg.code.map(|c| c.b).unwrap_or(2);
    let rates = cfg.rate_list()?;
    let cp = cfg
        .coupling_spec()?
        .ok_or_else(|| Error::Precondition("coupled profile needs a coupling section".into()))?;
    let se_cfg = cfg.se_config(seed);
    let gh = GaussHermite::new(se_cfg.gh_nodes);
    let bank = SampleBank::from_config(b, &se_cfg);
    let mut csv = String::from("rate,t");
    for r in 1..=cp.gamma() {
        csv.push_str(&format!(",e_{r}"));
    }
    csv.push('\n');
    let mut rows = Vec::new();
    for &rate in &rates {
        let trace = sparc::se::iterate_co_trace(&cp, &cfg.channel, rate, &bank, &gh, &se_cfg)?;
        for (t, profile) in trace.iter().enumerate() {
            csv.push_str(&format!("{rate},{t}"));
            for &e in profile.values() {
                csv.push_str(&format!(",{e}"));
            }
            csv.push('\n');
        }
        let fixed = trace.last().unwrap();
        rows.push(json!({
            "rate": rate,
            "iterations": trace.len() - 1,
            "max_error": fixed.max(),
            "unimodal": fixed.is_unimodal(1e-9),
        }));
    }
    Ok((json!({ "b": b, "per_rate": rows }), csv))
}
