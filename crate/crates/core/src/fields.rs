//! Real fields on a periodic box `[-L/2, L/2)^d` with matching Fourier data.
//!
//! Coefficients approximate the continuum transform `u^(xi) = int u e^{-i xi.x} dx`:
//!
//! `u^_k = h^d sum_j u(x_j) e^{-i xi_k . x_j}`, `xi_k = 2 pi k / L`, `x_j = -L/2 + j h`.
//!
//! Because the box starts at `-L/2`, the phase `e^{i pi k}` reduces to a sign
//! `(-1)^{sum k}` on top of a plain DFT. Frequency integrals `int . d xi / (2 pi)^d`
//! become `L^{-d} sum_k`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::symbols::Symbol;

/// Default acceptance threshold for [`SpectralField::spectral_tail`].
pub const DEFAULT_TAIL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    d: usize,
    n: usize,
    box_len: f64,
}

impl GridSpec {
    /// `n` must be even and at least 8. Mixed-radix FFTs are used, so powers of
    /// two are not required.
    pub fn new(d: usize, n: usize, box_len: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameter(format!("grid dimension must be 1, 2 or 3, got {d}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("points per axis must be even and >= 8, got {n}")));
        }
        if !(box_len > 0.0 && box_len.is_finite()) {
            return Err(Error::InvalidParameter(format!("box length must be positive, got {box_len}")));
        }
        Ok(Self { d, n, box_len })
    }

    /// Desk-scale defaults per dimension.
    pub fn default_for(d: usize) -> Result<Self> {
        match d {
            1 => Self::new(1, 512, 40.0),
            2 => Self::new(2, 256, 30.0),
            3 => Self::new(3, 96, 24.0),
            _ => Err(Error::InvalidParameter(format!("no default grid for d = {d}"))),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    pub fn h(&self) -> f64 {
        self.box_len / self.n as f64
    }

    /// Number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^d`
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// `L^d`
    pub fn volume(&self) -> f64 {
        self.box_len.powi(self.d as i32)
    }

    /// Fundamental frequency `2 pi / L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.box_len
    }

    /// Signed lattice index in `[-n/2, n/2)` for an FFT-ordered index.
    #[inline]
    pub fn signed_index(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Splits a flat row-major index into per-axis indices (axis 0 slowest).
    #[inline]
    pub fn unflatten(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    /// Frequency vector `xi_k` of the flat FFT-ordered index `idx`.
    #[inline]
    pub fn freq(&self, idx: usize, out: &mut [f64]) {
        let dxi = self.dxi();
        let mut idx = idx;
        for a in (0..self.d).rev() {
            out[a] = dxi * self.signed_index(idx % self.n) as f64;
            idx /= self.n;
        }
    }

    /// Physical coordinate of the flat grid index `idx`.
    #[inline]
    pub fn coord(&self, idx: usize, out: &mut [f64]) {
        let h = self.h();
        let mut idx = idx;
        for a in (0..self.d).rev() {
            out[a] = -0.5 * self.box_len + h * (idx % self.n) as f64;
            idx /= self.n;
        }
    }

    /// Max-norm of the signed lattice index.
    #[inline]
    pub fn max_index(&self, idx: usize) -> u64 {
        let mut idx = idx;
        let mut m = 0u64;
        for _ in 0..self.d {
            m = m.max(self.signed_index(idx % self.n).unsigned_abs());
            idx /= self.n;
        }
        m
    }

    /// `(-1)^{sum of lattice indices}`.
    #[inline]
    fn phase(&self, idx: usize) -> f64 {
        let mut idx = idx;
        let mut s = 0usize;
        for _ in 0..self.d {
            s += idx % self.n;
            idx /= self.n;
        }
        if s.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// `P(xi_k)` for every mode, in FFT order.
    pub fn symbol_values(&self, sym: &Symbol) -> Result<Vec<f64>> {
        if sym.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: sym.dim() });
        }
        let mut xi = vec![0.0; self.d];
        Ok((0..self.len())
            .map(|i| {
                self.freq(i, &mut xi);
                sym.eval_unchecked(&xi)
            })
            .collect())
    }
}

/// In-place unnormalized d-dimensional DFT over a row-major cube.
fn fft_nd(data: &mut [Complex64], d: usize, n: usize, direction: FftDirection) {
    let fft = FftPlanner::new().plan_fft(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
            continue;
        }
        let block = n * stride;
        let mut lines = vec![Complex64::new(0.0, 0.0); block];
        for blk in data.chunks_exact_mut(block) {
            for j in 0..n {
                for s in 0..stride {
                    lines[s * n + j] = blk[j * stride + s];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for j in 0..n {
                for s in 0..stride {
                    blk[j * stride + s] = lines[s * n + j];
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    spec: GridSpec,
    phys: Vec<f64>,
    coeff: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Norms {
    pub l1: f64,
    pub l2sq: f64,
    pub linf_spectral: f64,
}

impl SpectralField {
    pub fn from_phys(spec: GridSpec, phys: Vec<f64>) -> Result<Self> {
        if phys.len() != spec.len() {
            return Err(Error::DimensionMismatch { expected: spec.len(), got: phys.len() });
        }
        if phys.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("field has non-finite samples".into()));
        }
        let mut coeff: Vec<Complex64> = phys.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut coeff, spec.d, spec.n, FftDirection::Forward);
        let hd = spec.cell_volume();
        for (i, c) in coeff.iter_mut().enumerate() {
            *c *= hd * spec.phase(i);
        }
        Ok(Self { spec, phys, coeff })
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; spec.d];
        let phys = (0..spec.len())
            .map(|i| {
                spec.coord(i, &mut x);
                f(&x)
            })
            .collect();
        Self::from_phys(spec, phys)
    }

    /// Builds a field from Fourier coefficients. Only the Hermitian part
    /// contributes: the physical samples are the real part of the inverse, and
    /// the stored coefficients are recomputed from them.
    pub fn from_coeff(spec: GridSpec, coeff: Vec<Complex64>) -> Result<Self> {
        if coeff.len() != spec.len() {
            return Err(Error::DimensionMismatch { expected: spec.len(), got: coeff.len() });
        }
        Self::from_phys(spec, inverse(&spec, coeff))
    }

    /// Multiplies every coefficient by `m(idx)` and transforms back. The
    /// multiplier must be even in `xi` so the result stays real.
    pub fn apply_multiplier(&self, m: impl Fn(usize) -> f64) -> Self {
        let coeff: Vec<Complex64> = self.coeff.iter().enumerate().map(|(i, c)| c * m(i)).collect();
        let phys = inverse(&self.spec, coeff.clone());
        Self { spec: self.spec, phys, coeff }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn phys(&self) -> &[f64] {
        &self.phys
    }

    pub fn coeff(&self) -> &[Complex64] {
        &self.coeff
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            spec: self.spec,
            phys: self.phys.iter().map(|v| v * c).collect(),
            coeff: self.coeff.iter().map(|v| v * c).collect(),
        }
    }

    /// Physical samples reconstructed from the coefficients.
    pub fn round_trip(&self) -> Vec<f64> {
        inverse(&self.spec, self.coeff.clone())
    }

    pub fn norms(&self) -> Norms {
        norms(self)
    }

    pub fn spectral_tail(&self) -> f64 {
        spectral_tail(self)
    }

    /// Refuses fields whose high-frequency content exceeds `cutoff`.
    pub fn check_resolved(&self, cutoff: f64) -> Result<()> {
        let tail = self.spectral_tail();
        if tail > cutoff {
            return Err(Error::Unresolved { tail, cutoff });
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.spec, other.spec)));
        }
        Ok(())
    }

    /// Header: `d`, `n` as u64 LE, `L` as f64 LE; then row-major f64 LE samples.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.spec.d as u64).to_le_bytes())?;
        w.write_all(&(self.spec.n as u64).to_le_bytes())?;
        w.write_all(&self.spec.box_len.to_le_bytes())?;
        for v in &self.phys {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let d = u64::from_le_bytes(b) as usize;
        r.read_exact(&mut b)?;
        let n = u64::from_le_bytes(b) as usize;
        r.read_exact(&mut b)?;
        let box_len = f64::from_le_bytes(b);
        let spec = GridSpec::new(d, n, box_len)?;
        let mut phys = Vec::with_capacity(spec.len());
        for _ in 0..spec.len() {
            r.read_exact(&mut b).map_err(|e| Error::Parse(format!("truncated field file: {e}")))?;
            phys.push(f64::from_le_bytes(b));
        }
        if r.read(&mut b)? != 0 {
            return Err(Error::Parse("trailing bytes after field data".into()));
        }
        Self::from_phys(spec, phys)
    }

    /// Two columns `x,u`; only for `d = 1`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if self.spec.d != 1 {
            return Err(Error::InvalidParameter("CSV export is only defined for d = 1".into()));
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "u"])?;
        let mut x = [0.0];
        for (i, v) in self.phys.iter().enumerate() {
            self.spec.coord(i, &mut x);
            w.write_record([format!("{:e}", x[0]), format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn inverse(spec: &GridSpec, mut coeff: Vec<Complex64>) -> Vec<f64> {
    for (i, c) in coeff.iter_mut().enumerate() {
        *c *= spec.phase(i);
    }
    fft_nd(&mut coeff, spec.d, spec.n, FftDirection::Inverse);
    let s = 1.0 / spec.volume();
    coeff.iter().map(|c| c.re * s).collect()
}

/// `exp(-|x|^2 / (2 sigma^2))` centered in the box. Requires `L >= 12 sigma`.
pub fn make_gaussian(spec: GridSpec, sigma: f64) -> Result<SpectralField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if spec.box_len < 12.0 * sigma {
        return Err(Error::Truncation { box_len: spec.box_len, required: 12.0 * sigma });
    }
    let s2 = 2.0 * sigma * sigma;
    SpectralField::from_fn(spec, |x| (-x.iter().map(|v| v * v).sum::<f64>() / s2).exp())
}

/// Random real trigonometric polynomial with lattice indices `|k_i| <= kmax`
/// and standard normal coefficients.
pub fn make_band_limited(spec: GridSpec, kmax: usize, seed: u64) -> Result<SpectralField> {
    if kmax == 0 || kmax >= spec.n / 4 {
        return Err(Error::InvalidParameter(format!("band limit must lie in 1..{}, got {kmax}", spec.n / 4)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeff = vec![Complex64::new(0.0, 0.0); spec.len()];
    let scale = spec.volume();
    for (i, c) in coeff.iter_mut().enumerate() {
        if spec.max_index(i) as usize <= kmax {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *c = Complex64::new(re, im) * scale;
        }
    }
    SpectralField::from_coeff(spec, coeff)
}

/// Tensor-product Dirichlet kernel: `u^_k = L^d` for `|k_i| <= kmax`, zero
/// elsewhere. Its spectral measure is the bare lattice counting measure of
/// the band, which makes it a bias-free probe of a symbol's DoS.
pub fn make_dirichlet_kernel(spec: GridSpec, kmax: usize) -> Result<SpectralField> {
    if kmax == 0 || kmax >= spec.n / 4 {
        return Err(Error::InvalidParameter(format!("band limit must lie in 1..{}, got {kmax}", spec.n / 4)));
    }
    let v = Complex64::new(spec.volume(), 0.0);
    let coeff = (0..spec.len())
        .map(|i| if spec.max_index(i) as usize <= kmax { v } else { Complex64::new(0.0, 0.0) })
        .collect();
    SpectralField::from_coeff(spec, coeff)
}

/// `cos(xi_k . x)` for an integer lattice vector `k`.
pub fn make_cosine_mode(spec: GridSpec, k: &[i64]) -> Result<SpectralField> {
    mode(spec, k, f64::cos)
}

/// `sin(xi_k . x)` for an integer lattice vector `k`.
pub fn make_sine_mode(spec: GridSpec, k: &[i64]) -> Result<SpectralField> {
    mode(spec, k, f64::sin)
}

fn mode(spec: GridSpec, k: &[i64], f: fn(f64) -> f64) -> Result<SpectralField> {
    if k.len() != spec.d {
        return Err(Error::DimensionMismatch { expected: spec.d, got: k.len() });
    }
    let dxi = spec.dxi();
    SpectralField::from_fn(spec, |x| f(x.iter().zip(k).map(|(xa, ka)| dxi * *ka as f64 * xa).sum()))
}

pub fn norms(f: &SpectralField) -> Norms {
    let hd = f.spec.cell_volume();
    Norms {
        l1: hd * f.phys.iter().map(|v| v.abs()).sum::<f64>(),
        l2sq: hd * f.phys.iter().map(|v| v * v).sum::<f64>(),
        linf_spectral: f.coeff.iter().map(|c| c.norm()).fold(0.0, f64::max),
    }
}

/// Fraction of `sum |u^_k|^2` carried by modes with max-norm index `>= n/4`.
pub fn spectral_tail(f: &SpectralField) -> f64 {
    let cut = (f.spec.n / 4) as u64;
    let (mut tail, mut total) = (0.0, 0.0);
    for (i, c) in f.coeff.iter().enumerate() {
        let e = c.norm_sqr();
        total += e;
        if f.spec.max_index(i) >= cut {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}
