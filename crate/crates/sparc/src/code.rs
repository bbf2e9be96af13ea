//! Code construction: position-modulated messages, design functions and block
//! variance matrices for spatial coupling, Gaussian coding matrices, encoding
//! and rate bookkeeping.

use crate::error::{Error, Result};
use crate::par::for_each_range;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Tolerance on the exact linear-algebra identities of the construction
/// (row normalization, bulk column sums, design normalization).
pub const CONSTRUCTION_TOL: f64 = 1e-12;

/// Section count, section size and rate bookkeeping of a code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    /// Number of sections.
    pub l: usize,
    /// Section size; a power of two, at least 2.
    pub b: usize,
    /// Requested design rate.
    pub r: f64,
    /// Block length, rounded up from `L log2 B / R`.
    pub m: usize,
}

impl CodeParams {
    pub fn new(l: usize, b: usize, r: f64) -> Result<Self> {
        if l == 0 {
            return Err(Error::Precondition("need at least one section".into()));
        }
        if b < 2 || !b.is_power_of_two() {
            return Err(Error::Precondition(format!(
                "section size must be a power of 2, at least 2; got {b}"
            )));
        }
        if r <= 0.0 || !r.is_finite() {
            return Err(Error::Precondition(format!("rate must be positive, got {r}")));
        }
        let bits = l as f64 * (b as f64).log2();
        let m = (bits / r).ceil() as usize;
        Ok(CodeParams { l, b, r, m })
    }

    /// Bits carried per codeword: `L log2 B`.
    pub fn bits(&self) -> usize {
        self.l * self.b.ilog2() as usize
    }

    /// Signal dimension `N = L B`.
    pub fn n(&self) -> usize {
        self.l * self.b
    }

    /// The rate actually realized by the integer block length.
    pub fn realized_rate(&self) -> f64 {
        self.bits() as f64 / self.m as f64
    }

    /// Measurement rate `alpha = M / N`.
    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n() as f64
    }
}

/// Rate after revealing the seeded boundary blocks: `R (1 - 8w / Gamma)`.
pub fn effective_rate(r: f64, w: usize, gamma: usize) -> Result<f64> {
    if w > 0 && gamma <= 8 * w {
        return Err(Error::Precondition(format!(
            "effective rate needs Gamma > 8w (got Gamma={gamma}, w={w})"
        )));
    }
    Ok(r * (1.0 - 8.0 * w as f64 / gamma as f64))
}

// ---------------------------------------------------------------------------
// Design function and coupling variances
// ---------------------------------------------------------------------------

/// Samples of the coupling design function on the window `{-w..w}`, together
/// with its bounds and Lipschitz constant.
///
/// The function must be strictly positive on the window, Lipschitz with
/// constant `g_star / w` between adjacent samples, and average to one.
/// Asymmetric designs are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFunction {
    samples: Vec<f64>,
    g_lower: f64,
    g_upper: f64,
    g_star: f64,
}

impl DesignFunction {
    /// Validates `samples[k]` as `g_w((k - w)/w)` for `k in 0..=2w`.
    pub fn from_samples(samples: Vec<f64>, g_star: f64) -> Result<Self> {
        if samples.is_empty() || samples.len().is_multiple_of(2) {
            return Err(Error::InvalidDesignFunction(format!(
                "need 2w+1 samples, got {}",
                samples.len()
            )));
        }
        let w = (samples.len() - 1) / 2;
        let g_lower = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let g_upper = samples.iter().cloned().fold(0.0f64, f64::max);
        if g_lower <= 0.0 {
            return Err(Error::InvalidDesignFunction(
                "samples must be strictly positive on the window".into(),
            ));
        }
        if w > 0 {
            let step = g_star / w as f64;
            for k in 1..samples.len() {
                if (samples[k] - samples[k - 1]).abs() > step + CONSTRUCTION_TOL {
                    return Err(Error::InvalidDesignFunction(format!(
                        "adjacent samples {k}-1,{k} violate the Lipschitz bound {step}"
                    )));
                }
            }
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        if (mean - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::InvalidDesignFunction(format!(
                "samples must average to 1, got {mean}"
            )));
        }
        Ok(DesignFunction {
            samples,
            g_lower,
            g_upper,
            g_star,
        })
    }

    /// The uniform design, `g = 1` on the whole window.
    pub fn uniform(w: usize) -> Self {
        DesignFunction {
            samples: vec![1.0; 2 * w + 1],
            g_lower: 1.0,
            g_upper: 1.0,
            g_star: 0.0,
        }
    }

    pub fn window(&self) -> usize {
        (self.samples.len() - 1) / 2
    }

    /// Sample at offset `d = c - r`, zero outside the window.
    pub fn at_offset(&self, d: isize) -> f64 {
        let w = self.window() as isize;
        if d.abs() > w {
            0.0
        } else {
            self.samples[(d + w) as usize]
        }
    }

    pub fn g_lower(&self) -> f64 {
        self.g_lower
    }

    pub fn g_upper(&self) -> f64 {
        self.g_upper
    }
}

/// Block variance structure of a spatially coupled ensemble: the `Gamma x
/// Gamma` banded matrix `J` with unit row sums, plus the per-row normalizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    gamma: usize,
    w: usize,
    /// Row-major `Gamma x Gamma`.
    j: Vec<f64>,
    gamma_r: Vec<f64>,
}

impl CouplingSpec {
    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn w(&self) -> usize {
        self.w
    }

    /// `J_{r,c}` with zero-based indices.
    #[inline]
    pub fn j(&self, r: usize, c: usize) -> f64 {
        self.j[r * self.gamma + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.j[r * self.gamma..(r + 1) * self.gamma]
    }

    pub fn gamma_r(&self) -> &[f64] {
        &self.gamma_r
    }

    /// Pinned profile rows `{0..3w-1} u {Gamma-3w..Gamma-1}` (zero based).
    pub fn pinned_rows(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..3 * self.w).collect();
        v.extend(self.gamma - 3 * self.w..self.gamma);
        v
    }

    /// Message blocks revealed to the decoder: the first and last `4w`.
    pub fn seeded_blocks(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..4 * self.w).collect();
        v.extend(self.gamma - 4 * self.w..self.gamma);
        v
    }
}

/// Builds the block variances `J_{r,c} = gamma_r g_w((c-r)/w) / (2w+1)` with
/// `gamma_r` normalizing every row to one.
///
/// Requires `Gamma >= 8w + 2` so the seeded boundary blocks fit.
pub fn build_design_variances(
    df: &DesignFunction,
    gamma: usize,
    w: usize,
) -> Result<CouplingSpec> {
    if df.window() != w {
        return Err(Error::InvalidDesignFunction(format!(
            "design window {} does not match requested w={w}",
            df.window()
        )));
    }
    if gamma < 8 * w + 2 {
        return Err(Error::Precondition(format!(
            "need Gamma >= 8w+2 for the boundary seeds (got Gamma={gamma}, w={w})"
        )));
    }
    let denom = (2 * w + 1) as f64;
    let mut j = vec![0.0; gamma * gamma];
    let mut gamma_r = vec![0.0; gamma];
    for r in 0..gamma {
        let mut row_sum = 0.0;
        for c in 0..gamma {
            row_sum += df.at_offset(c as isize - r as isize) / denom;
        }
        let norm = 1.0 / row_sum;
        gamma_r[r] = norm;
        for c in 0..gamma {
            j[r * gamma + c] = norm * df.at_offset(c as isize - r as isize) / denom;
        }
    }
    let spec = CouplingSpec { gamma, w, j, gamma_r };
    // Bulk rows have gamma_r = 1; boundary rows see a truncated window of at
    // least w+1 samples, so gamma_r <= (2w+1)/((w+1) g_lower) < 2/g_lower.
    debug_assert!(spec
        .gamma_r
        .iter()
        .all(|&g| g >= 1.0 - CONSTRUCTION_TOL && g <= 2.0 / df.g_lower() + CONSTRUCTION_TOL));
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

/// A sectioned message: `L` one-hot sections of size `B`, stored as the index
/// of the non-zero component, plus the seeded flags of the coupled case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    b: usize,
    positions: Vec<u32>,
    seeded: Vec<bool>,
}

impl Message {
    /// Position modulation: section `l` is one-hot at the integer value of
    /// the `log2 B` bits `u_l` (most significant bit first).
    pub fn pm_modulate(bits: &[u8], b: usize, l: usize) -> Result<Self> {
        if b < 2 || !b.is_power_of_two() {
            return Err(Error::Precondition(format!("invalid section size {b}")));
        }
        let width = b.ilog2() as usize;
        if bits.len() != l * width {
            return Err(Error::DimensionMismatch {
                expected: l * width,
                got: bits.len(),
            });
        }
        let mut positions = Vec::with_capacity(l);
        for sec in bits.chunks(width) {
            let mut v = 0u32;
            for &bit in sec {
                if bit > 1 {
                    return Err(Error::Precondition(format!("bit value {bit} is not 0/1")));
                }
                v = (v << 1) | bit as u32;
            }
            positions.push(v);
        }
        Ok(Message {
            b,
            positions,
            seeded: vec![false; l],
        })
    }

    /// Inverse of [`Message::pm_modulate`].
    pub fn pm_demodulate(&self) -> Vec<u8> {
        let width = self.b.ilog2() as usize;
        let mut bits = Vec::with_capacity(self.positions.len() * width);
        for &p in &self.positions {
            for k in (0..width).rev() {
                bits.push(((p >> k) & 1) as u8);
            }
        }
        bits
    }

    /// Draws a uniformly random message.
    pub fn random<R: Rng + ?Sized>(b: usize, l: usize, rng: &mut R) -> Result<Self> {
        if b < 2 || !b.is_power_of_two() {
            return Err(Error::Precondition(format!("invalid section size {b}")));
        }
        let positions = (0..l).map(|_| rng.random_range(0..b as u32)).collect();
        Ok(Message {
            b,
            positions,
            seeded: vec![false; l],
        })
    }

    /// Builds a message directly from one-hot positions.
    pub fn from_positions(b: usize, positions: Vec<u32>) -> Result<Self> {
        if positions.iter().any(|&p| p as usize >= b) {
            return Err(Error::Precondition("position outside section".into()));
        }
        let l = positions.len();
        Ok(Message {
            b,
            positions,
            seeded: vec![false; l],
        })
    }

    /// Flags the sections in the first and last `4w` blocks as known to the
    /// decoder.
    pub fn mark_seeded(&mut self, coupling: &CouplingSpec) -> Result<()> {
        let l = self.positions.len();
        if !l.is_multiple_of(coupling.gamma()) {
            return Err(Error::Divisibility {
                m: 0,
                n: l,
                gamma: coupling.gamma(),
            });
        }
        let per_block = l / coupling.gamma();
        for flag in self.seeded.iter_mut() {
            *flag = false;
        }
        for block in coupling.seeded_blocks() {
            for s in block * per_block..(block + 1) * per_block {
                self.seeded[s] = true;
            }
        }
        Ok(())
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn sections(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, l: usize) -> usize {
        self.positions[l] as usize
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    pub fn is_seeded(&self, l: usize) -> bool {
        self.seeded[l]
    }

    pub fn seeded_count(&self) -> usize {
        self.seeded.iter().filter(|&&s| s).count()
    }

    /// Dense `N`-vector with the one-hot sections written out.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.positions.len() * self.b];
        for (l, &p) in self.positions.iter().enumerate() {
            s[l * self.b + p as usize] = 1.0;
        }
        s
    }

    /// Fraction of unseeded sections whose one-hot position differs.
    pub fn section_error_rate(&self, truth: &Message) -> Result<f64> {
        if self.b != truth.b || self.positions.len() != truth.positions.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.positions.len(),
                got: self.positions.len(),
            });
        }
        let mut wrong = 0usize;
        let mut counted = 0usize;
        for l in 0..self.positions.len() {
            if truth.seeded[l] {
                continue;
            }
            counted += 1;
            if self.positions[l] != truth.positions[l] {
                wrong += 1;
            }
        }
        if counted == 0 {
            return Ok(0.0);
        }
        Ok(wrong as f64 / counted as f64)
    }

    /// Packed information bits plus a JSON metadata header.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let bits = self.pm_demodulate();
        let mut packed = vec![0u8; bits.len().div_ceil(8)];
        for (i, &bit) in bits.iter().enumerate() {
            packed[i / 8] |= bit << (7 - i % 8);
        }
        let header = serde_json::json!({
            "l": self.positions.len(),
            "b": self.b,
            "seeded": self.seeded.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| i).collect::<Vec<_>>(),
        });
        let mut fh = std::fs::File::create(path)?;
        serde_json::to_writer(&mut fh, &header)?;
        fh.write_all(b"\n")?;
        fh.write_all(&packed)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let data = std::fs::read(path)?;
        let nl = data
            .iter()
            .position(|&c| c == b'\n')
            .ok_or_else(|| Error::Precondition("missing message header".into()))?;
        let header: serde_json::Value = serde_json::from_slice(&data[..nl])?;
        let l = header["l"].as_u64().unwrap_or(0) as usize;
        let b = header["b"].as_u64().unwrap_or(0) as usize;
        if b < 2 || !b.is_power_of_two() {
            return Err(Error::Precondition(format!("invalid section size {b}")));
        }
        let width = b.ilog2() as usize;
        let packed = &data[nl + 1..];
        if packed.len() < (l * width).div_ceil(8) {
            return Err(Error::Precondition("truncated message payload".into()));
        }
        let mut bits = Vec::with_capacity(l * width);
        for i in 0..l * width {
            bits.push((packed[i / 8] >> (7 - i % 8)) & 1);
        }
        let mut msg = Message::pm_modulate(&bits, b, l)?;
        if let Some(seeded) = header["seeded"].as_array() {
            for idx in seeded {
                msg.seeded[idx.as_u64().unwrap() as usize] = true;
            }
        }
        Ok(msg)
    }
}

// ---------------------------------------------------------------------------
// Coding matrices
// ---------------------------------------------------------------------------

/// Ensemble tag of a coding matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ensemble {
    Underlying,
    Coupled { gamma: usize, w: usize },
}

/// A dense `M x N` real coding matrix, row-major, immutable once built.
#[derive(Debug, Clone)]
pub struct CodingMatrix {
    m: usize,
    n: usize,
    data: Vec<f64>,
    ensemble: Ensemble,
}

/// Draws a coding matrix; underlying entries are `N(0, 1/L)` i.i.d., coupled
/// block `(r, c)` entries are `N(0, J_{r,c} Gamma / L)` inside the band and
/// exactly zero outside it.
pub fn build_matrix<R: Rng + ?Sized>(
    params: &CodeParams,
    coupling: Option<&CouplingSpec>,
    rng: &mut R,
) -> Result<CodingMatrix> {
    let (m, n, l) = (params.m, params.n(), params.l);
    let mut data = vec![0.0; m * n];
    match coupling {
        None => {
            let sd = (1.0 / l as f64).sqrt();
            for v in data.iter_mut() {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                *v = sd * g;
            }
            Ok(CodingMatrix {
                m,
                n,
                data,
                ensemble: Ensemble::Underlying,
            })
        }
        Some(cp) => {
            let gamma = cp.gamma();
            if m % gamma != 0 || n % gamma != 0 {
                return Err(Error::Divisibility { m, n, gamma });
            }
            let rows_per = m / gamma;
            let cols_per = n / gamma;
            let scale = gamma as f64 / l as f64;
            for (i, row) in data.chunks_mut(n).enumerate() {
                let r = i / rows_per;
                for c in 0..gamma {
                    let var = cp.j(r, c) * scale;
                    if var == 0.0 {
                        continue;
                    }
                    let sd = var.sqrt();
                    for v in &mut row[c * cols_per..(c + 1) * cols_per] {
                        let g: f64 = rng.sample(rand_distr::StandardNormal);
                        *v = sd * g;
                    }
                }
            }
            Ok(CodingMatrix {
                m,
                n,
                data,
                ensemble: Ensemble::Coupled { gamma, w: cp.w() },
            })
        }
    }
}

impl CodingMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ensemble(&self) -> Ensemble {
        self.ensemble
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Codeword `x = F s`, using the one-hot structure of the message.
    pub fn encode(&self, msg: &Message) -> Result<Vec<f64>> {
        if msg.sections() * msg.b() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: msg.sections() * msg.b(),
            });
        }
        let cols: Vec<usize> = msg
            .positions()
            .iter()
            .enumerate()
            .map(|(l, &p)| l * msg.b() + p as usize)
            .collect();
        let mut x = vec![0.0; self.m];
        for_each_range(&mut x, 512, |start, chunk| {
            for (k, out) in chunk.iter_mut().enumerate() {
                let row = self.row(start + k);
                *out = cols.iter().map(|&j| row[j]).sum();
            }
        });
        Ok(x)
    }

    /// Dense product `F v`.
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.m];
        for_each_range(&mut out, 128, |start, chunk| {
            for (k, o) in chunk.iter_mut().enumerate() {
                *o = dot(self.row(start + k), v);
            }
        });
        out
    }

    /// `F^{o2} v` (componentwise squared matrix).
    pub fn mul_squared(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![0.0; self.m];
        for_each_range(&mut out, 128, |start, chunk| {
            for (k, o) in chunk.iter_mut().enumerate() {
                let row = self.row(start + k);
                let mut acc = 0.0;
                for (a, b) in row.iter().zip(v) {
                    acc += a * a * b;
                }
                *o = acc;
            }
        });
        out
    }

    /// Transpose products `(z^T F)^T` and `(tz^T F^{o2})^T` in one pass.
    pub fn t_mul_both(&self, z: &[f64], tz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(z.len(), self.m);
        assert_eq!(tz.len(), self.m);
        let cols = 1024.min(self.n);
        let mut first = vec![0.0; self.n];
        let mut second = vec![0.0; self.n];
        // Disjoint column ranges; each range walks all rows in order, so the
        // accumulation order per output element is fixed.
        let ranges: Vec<(usize, usize)> = (0..self.n)
            .step_by(cols)
            .map(|s| (s, (s + cols).min(self.n)))
            .collect();
        let walk = |&(s, e): &(usize, usize), first: &mut [f64], second: &mut [f64]| {
            for i in 0..self.m {
                let (zi, tzi) = (z[i], tz[i]);
                let row = &self.data[i * self.n + s..i * self.n + e];
                for (k, &a) in row.iter().enumerate() {
                    first[k] += zi * a;
                    second[k] += tzi * a * a;
                }
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let parts: Vec<(Vec<f64>, Vec<f64>)> = ranges
                .par_iter()
                .map(|r| {
                    let mut f = vec![0.0; r.1 - r.0];
                    let mut s = vec![0.0; r.1 - r.0];
                    walk(r, &mut f, &mut s);
                    (f, s)
                })
                .collect();
            for (r, (f, s)) in ranges.iter().zip(parts) {
                first[r.0..r.1].copy_from_slice(&f);
                second[r.0..r.1].copy_from_slice(&s);
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            for r in &ranges {
                let mut f = vec![0.0; r.1 - r.0];
                let mut s = vec![0.0; r.1 - r.0];
                walk(r, &mut f, &mut s);
                first[r.0..r.1].copy_from_slice(&f);
                second[r.0..r.1].copy_from_slice(&s);
            }
        }
        (first, second)
    }

    /// Binary blob with a JSON header line: little-endian f64, row-major.
    pub fn save<P: AsRef<Path>>(&self, path: P, seed: Option<u64>) -> Result<()> {
        let (ensemble, gamma, w) = match self.ensemble {
            Ensemble::Underlying => ("underlying", None, None),
            Ensemble::Coupled { gamma, w } => ("coupled", Some(gamma), Some(w)),
        };
        let mut header = serde_json::json!({
            "m": self.m,
            "n": self.n,
            "ensemble": ensemble,
        });
        if let Some(g) = gamma {
            header["gamma"] = g.into();
            header["w"] = w.unwrap().into();
        }
        if let Some(s) = seed {
            header["seed"] = s.into();
        }
        let fh = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(fh);
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let fh = std::fs::File::open(path)?;
        let mut reader = std::io::BufReader::new(fh);
        let mut header_bytes = Vec::new();
        let mut byte = [0u8; 1];
        loop {
            reader.read_exact(&mut byte)?;
            if byte[0] == b'\n' {
                break;
            }
            header_bytes.push(byte[0]);
        }
        let header: serde_json::Value = serde_json::from_slice(&header_bytes)?;
        let m = header["m"].as_u64().unwrap_or(0) as usize;
        let n = header["n"].as_u64().unwrap_or(0) as usize;
        let ensemble = match header["ensemble"].as_str() {
            Some("underlying") => Ensemble::Underlying,
            Some("coupled") => Ensemble::Coupled {
                gamma: header["gamma"].as_u64().unwrap_or(0) as usize,
                w: header["w"].as_u64().unwrap_or(0) as usize,
            },
            other => {
                return Err(Error::Precondition(format!(
                    "unknown ensemble tag {other:?}"
                )))
            }
        };
        let mut data = vec![0.0f64; m * n];
        let mut buf = [0u8; 8];
        for v in data.iter_mut() {
            reader.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(CodingMatrix { m, n, data, ensemble })
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}
