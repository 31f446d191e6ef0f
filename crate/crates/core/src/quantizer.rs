//! Stochastic-rounding quantization onto a uniform `(delta, bits)` grid.
//!
//! A grid with scaling factor `delta` and width `b` represents the values
//! `{-2^(b-1) delta, ..., -delta, 0, delta, ..., (2^(b-1)-1) delta}`. Values
//! inside the hull round to one of their two neighbours with probabilities
//! that make the result unbiased; values outside clamp to the nearest end.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sparsifier::SparseRealVector;
use crate::{dist_sq, norm_inf, norm_sq, Error, Result};

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 32;

// Scaled coordinates this close to a hull endpoint count as the endpoint.
const HULL_SLACK: f64 = 1e-12;

/// Norm used to pick `delta` for a vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleNorm {
    /// `delta = ||v||_inf / (2^(b-1) - 1)`.
    #[default]
    Max,
    /// `delta = ||v||_2 / (2^(b-1) - 1)`.
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantGrid {
    delta: f64,
    bits: u32,
}

impl QuantGrid {
    pub fn new(delta: f64, bits: u32) -> Result<Self> {
        check_bits(bits)?;
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidGrid(format!("delta must be finite and >= 0, got {delta}")));
        }
        Ok(Self { delta, bits })
    }

    /// Grid whose hull covers `v`, using the max-norm scaling rule.
    pub fn for_vector(v: &[f64], bits: u32) -> Result<Self> {
        Self::for_vector_with(v, bits, ScaleNorm::Max)
    }

    pub fn for_vector_with(v: &[f64], bits: u32, norm: ScaleNorm) -> Result<Self> {
        check_bits(bits)?;
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(*x));
        }
        let scale = match norm {
            ScaleNorm::Max => norm_inf(v),
            ScaleNorm::L2 => norm_sq(v).sqrt(),
        };
        Self::new(scale / levels(bits), bits)
    }

    /// Smallest grid with a binary32-representable `delta` that still covers
    /// everything this grid covers. Wire messages carry `delta` as binary32, so
    /// quantizing against this grid keeps encode/decode lossless and the
    /// rounding unbiased.
    pub fn binary32_safe(self) -> Self {
        let mut d32 = self.delta as f32;
        if (d32 as f64) < self.delta {
            d32 = d32.next_up();
        }
        Self { delta: d32 as f64, bits: self.bits }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn min_code(&self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn max_code(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    pub fn is_binary32(&self) -> bool {
        (self.delta as f32) as f64 == self.delta
    }

    /// Returns true if `x` lies in the convex hull of the representable set.
    pub fn contains(&self, x: f64) -> bool {
        if self.delta == 0.0 {
            return x == 0.0;
        }
        let q = x / self.delta;
        q >= self.min_code() as f64 * (1.0 + HULL_SLACK) && q <= self.max_code() as f64 * (1.0 + HULL_SLACK)
    }

    pub fn value(&self, code: i32) -> f64 {
        code as f64 * self.delta
    }
}

/// `2^(b-1) - 1`, the number of positive grid levels.
pub fn levels(bits: u32) -> f64 {
    ((1u64 << (bits - 1)) - 1) as f64
}

fn check_bits(bits: u32) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::InvalidBits(bits))
    }
}

/// A dense vector on a quantization grid; coordinate `i` decodes to
/// `codes[i] * delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowPrecisionVector {
    pub grid: QuantGrid,
    pub codes: Vec<i32>,
}

impl LowPrecisionVector {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// A sparse vector on a quantization grid: `(index, code)` pairs with strictly
/// increasing indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseLowPrecisionVector {
    pub grid: QuantGrid,
    pub dim: usize,
    pub entries: Vec<(u32, i32)>,
}

impl SparseLowPrecisionVector {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, c) in &self.entries {
            out[i as usize] = self.grid.value(c);
        }
        out
    }
}

/// Stochastically rounds one value. Inside the hull the result is `floor(x/delta)`
/// or one above, with probabilities that make the decoded value unbiased;
/// outside it is the nearest endpoint.
pub fn quantize_scalar<R: Rng + ?Sized>(x: f64, grid: &QuantGrid, rng: &mut R) -> Result<i32> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if grid.delta == 0.0 {
        return Err(Error::InvalidGrid("delta is zero".into()));
    }
    let q = x / grid.delta;
    let (lo_code, hi_code) = (grid.min_code() as f64, grid.max_code() as f64);
    if q <= lo_code {
        return Ok(grid.min_code() as i32);
    }
    if q >= hi_code {
        return Ok(grid.max_code() as i32);
    }
    // q lies strictly inside the code range, so the cast is exact; this avoids
    // a libm floor call on targets without SSE4.1.
    let t = q as i64 as f64;
    let lo = if t > q { t - 1.0 } else { t };
    let frac = q - lo;
    if frac == 0.0 {
        return Ok(lo as i32);
    }
    // Branch-free round-up: the comparison is a coin flip the CPU cannot predict.
    let up = (rng.random::<f64>() < frac) as i32;
    Ok(lo as i32 + up)
}

/// Quantizes every coordinate of `v` independently on `grid`. A zero-delta grid
/// only accepts the zero vector.
pub fn quantize_with_grid<R: Rng + ?Sized>(
    v: &[f64],
    grid: QuantGrid,
    rng: &mut R,
) -> Result<LowPrecisionVector> {
    if grid.delta == 0.0 {
        if let Some(x) = v.iter().find(|x| **x != 0.0) {
            return Err(Error::InvalidGrid(format!("zero delta cannot encode {x}")));
        }
        return Ok(LowPrecisionVector { grid, codes: vec![0; v.len()] });
    }
    let codes = v
        .iter()
        .map(|&x| quantize_scalar(x, &grid, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(LowPrecisionVector { grid, codes })
}

/// Quantizes with `delta = ||v||_inf / (2^(b-1) - 1)`; every coordinate is
/// then inside the hull, so the result is unbiased.
pub fn quantize_vector<R: Rng + ?Sized>(v: &[f64], bits: u32, rng: &mut R) -> Result<LowPrecisionVector> {
    let grid = QuantGrid::for_vector(v, bits)?;
    quantize_with_grid(v, grid, rng)
}

/// Like [`quantize_vector`], but with `delta` rounded up to binary32 so the
/// result can be put on the wire without loss.
pub fn quantize_for_wire<R: Rng + ?Sized>(v: &[f64], bits: u32, rng: &mut R) -> Result<LowPrecisionVector> {
    let grid = QuantGrid::for_vector(v, bits)?.binary32_safe();
    quantize_with_grid(v, grid, rng)
}

/// Quantizes the retained values of a sparse vector on a shared grid scaled by
/// their max magnitude.
pub fn quantize_sparse<R: Rng + ?Sized>(
    v: &SparseRealVector,
    bits: u32,
    rng: &mut R,
) -> Result<SparseLowPrecisionVector> {
    let values: Vec<f64> = v.entries.iter().map(|e| e.1).collect();
    let grid = QuantGrid::for_vector(&values, bits)?.binary32_safe();
    let q = quantize_with_grid(&values, grid, rng)?;
    let entries = v
        .entries
        .iter()
        .zip(q.codes)
        .map(|(&(i, _), c)| (i as u32, c))
        .collect();
    Ok(SparseLowPrecisionVector { grid, dim: v.dim, entries })
}

pub fn dequantize(q: &LowPrecisionVector) -> Vec<f64> {
    q.codes.iter().map(|&c| q.grid.value(c)).collect()
}

/// Exact `E||Q(v) - v||^2` under stochastic rounding on `grid`:
/// `sum_i (v_i - z_i)(z_i + delta - v_i)` with `z_i` the grid point below `v_i`.
pub fn expected_sq_error(v: &[f64], grid: &QuantGrid) -> Result<f64> {
    if grid.delta == 0.0 {
        return match v.iter().position(|x| *x != 0.0) {
            None => Ok(0.0),
            Some(index) => Err(Error::OutsideHull { index, value: v[index] }),
        };
    }
    let (lo_code, hi_code) = (grid.min_code() as f64, grid.max_code() as f64);
    let mut acc = 0.0;
    for (index, &value) in v.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(value));
        }
        let q = value / grid.delta;
        if q < lo_code * (1.0 + HULL_SLACK) || q > hi_code * (1.0 + HULL_SLACK) {
            return Err(Error::OutsideHull { index, value });
        }
        let q = q.clamp(lo_code, hi_code);
        let frac = q - q.floor();
        acc += frac * (1.0 - frac);
    }
    Ok(acc * grid.delta * grid.delta)
}

/// `E||Q(x) - x||^2 / ||x - x_snapshot||^2` on the max-norm grid of width `bits`:
/// the smallest precision-loss budget that admits this quantization.
pub fn mu_required(x: &[f64], x_snapshot: &[f64], bits: u32) -> Result<f64> {
    mu_required_on(x, x_snapshot, &QuantGrid::for_vector(x, bits)?)
}

pub fn mu_required_on(x: &[f64], x_snapshot: &[f64], grid: &QuantGrid) -> Result<f64> {
    check_same_len(x, x_snapshot)?;
    let gap = dist_sq(x, x_snapshot);
    if gap == 0.0 {
        return Err(Error::UseFlagMessage);
    }
    Ok(expected_sq_error(x, grid)? / gap)
}

/// Smallest `b_x` in `[2, b_max]` whose max-norm grid satisfies
/// `E||Q(x) - x||^2 <= mu ||x - x_snapshot||^2`; `b_max` if none does.
pub fn choose_bx(x: &[f64], x_snapshot: &[f64], mu: f64, b_max: u32) -> Result<u32> {
    Ok(search_bits(x, x_snapshot, mu, MIN_BITS, b_max, QuantGrid::for_vector)?.bits)
}

/// Outcome of a model-precision search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BitsChoice {
    pub bits: u32,
    pub grid: QuantGrid,
    pub satisfied: bool,
}

/// Scans widths `b_min..=b_max` in order and returns the first grid (built by
/// `grid_for`) meeting the precision-loss budget.
pub fn search_bits<F>(
    x: &[f64],
    x_snapshot: &[f64],
    mu: f64,
    b_min: u32,
    b_max: u32,
    grid_for: F,
) -> Result<BitsChoice>
where
    F: Fn(&[f64], u32) -> Result<QuantGrid>,
{
    check_bits(b_min)?;
    check_bits(b_max)?;
    if b_min > b_max {
        return Err(Error::Config(format!("b_min {b_min} > b_max {b_max}")));
    }
    if mu < 0.0 || !mu.is_finite() {
        return Err(Error::Config(format!("mu must be finite and >= 0, got {mu}")));
    }
    check_same_len(x, x_snapshot)?;
    let rhs = mu * dist_sq(x, x_snapshot);
    if rhs == 0.0 && x == x_snapshot {
        return Err(Error::UseFlagMessage);
    }
    let mut last = None;
    for bits in b_min..=b_max {
        let grid = grid_for(x, bits)?;
        if expected_sq_error(x, &grid)? <= rhs {
            return Ok(BitsChoice { bits, grid, satisfied: true });
        }
        last = Some(grid);
    }
    Ok(BitsChoice { bits: b_max, grid: last.expect("nonempty range"), satisfied: false })
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}
