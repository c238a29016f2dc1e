//! Seeded Gaussian sampling split into independently generated blocks.
//!
//! Block `b` of a batch draws from the ChaCha8 stream `b` keyed by the
//! batch seed, so any block can be produced without touching the others and
//! results do not depend on how blocks are scheduled across threads.
//! Uniforms are mapped to normals by inverse CDF, one uniform per draw.

use std::ops::Range;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Identifies the exact sampling algorithm. Changing the generator, the
/// uniform mapping or the quantile function must change this tag.
pub const GENERATOR_TAG: &str = "chacha8-as241-v1";

/// Minimum number of blocks for a batch-means standard error.
pub const MIN_BLOCKS: usize = 30;

/// Default number of blocks a batch is split into.
pub const DEFAULT_BLOCKS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonteCarloError {
    #[error("sample count must be at least 1")]
    EmptyBatch,
    #[error("sample dimension must be at least 1")]
    ZeroDimension,
    #[error("block size must be at least 1")]
    ZeroBlockSize,
    #[error("{blocks} blocks is fewer than the {min} required for a batch-means error")]
    TooFewBlocks { blocks: usize, min: usize },
}

/// How block work is scheduled. Output is identical for every variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Execution::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Execution::Serial
        }
    }
}

/// Standard normal quantile (Wichura's AS 241, PPND16), accurate to about
/// 1e-16 relative on `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_13) * r
                + 67265.770_927_008_7)
                * r
                + 45921.953_931_549_87)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_4)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_546 + 28729.085_735_721_943) * r
                + 39307.895_800_092_71)
                * r
                + 21213.794_301_586_597)
                * r
                + 5394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_8e-9 + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Maps 52 random bits to the open interval `(0, 1)`.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// A reproducible `count x dim` matrix of standard normals, split into
/// blocks of `block_size` rows (the last block may be shorter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleBatch {
    seed: u64,
    dim: usize,
    count: usize,
    block_size: usize,
}

impl SampleBatch {
    /// Splits `count` rows into [`DEFAULT_BLOCKS`] blocks (fewer if `count` is small).
    pub fn new(seed: u64, dim: usize, count: usize) -> Result<Self, MonteCarloError> {
        if count == 0 {
            return Err(MonteCarloError::EmptyBatch);
        }
        if dim == 0 {
            return Err(MonteCarloError::ZeroDimension);
        }
        Ok(Self {
            seed,
            dim,
            count,
            block_size: count.div_ceil(DEFAULT_BLOCKS),
        })
    }

    pub fn with_block_size(mut self, block_size: usize) -> Result<Self, MonteCarloError> {
        if block_size == 0 {
            return Err(MonteCarloError::ZeroBlockSize);
        }
        self.block_size = block_size;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.count.div_ceil(self.block_size)
    }

    pub fn block_rows(&self, block: usize) -> Range<usize> {
        let start = (block * self.block_size).min(self.count);
        let end = (start + self.block_size).min(self.count);
        start..end
    }

    pub fn stream(&self, block: usize) -> BlockStream<'_> {
        BlockStream { batch: self, block }
    }

    /// Materializes a whole block, row-major.
    pub fn block(&self, block: usize) -> SampleBlock {
        let rows = self.block_rows(block).len();
        let mut data = Vec::with_capacity(rows * self.dim);
        self.stream(block)
            .for_each_row(|row| data.extend_from_slice(row));
        SampleBlock {
            block,
            dim: self.dim,
            data,
        }
    }
}

/// Lazily generated rows of one block.
#[derive(Debug, Clone, Copy)]
pub struct BlockStream<'a> {
    batch: &'a SampleBatch,
    block: usize,
}

impl BlockStream<'_> {
    pub fn index(&self) -> usize {
        self.block
    }

    pub fn len(&self) -> usize {
        self.batch.block_rows(self.block).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.batch.dim
    }

    /// Calls `f` once per row, reusing one buffer.
    pub fn for_each_row<F: FnMut(&[f64])>(&self, mut f: F) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.batch.seed);
        rng.set_stream(self.block as u64);
        let mut row = vec![0.0; self.batch.dim];
        for _ in 0..self.len() {
            for x in row.iter_mut() {
                *x = normal_quantile(open_unit(rng.next_u64()));
            }
            f(&row);
        }
    }
}

/// A materialized block of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    block: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SampleBlock {
    pub fn index(&self) -> usize {
        self.block
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Runs `f` on every block and returns the results in block order.
pub fn map_blocks<T, F>(batch: &SampleBatch, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(BlockStream<'_>) -> T + Sync + Send,
{
    let blocks = batch.num_blocks();
    match exec {
        Execution::Serial => (0..blocks).map(|b| f(batch.stream(b))).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..blocks)
            .into_par_iter()
            .map(|b| f(batch.stream(b)))
            .collect(),
    }
}

/// Sample mean with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub blocks: usize,
}

impl Estimate {
    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// Combines per-block `(sum, rows)` pairs, in block order.
///
/// The error is the weighted spread of block means around the overall mean.
pub fn batch_means(blocks: &[(f64, usize)]) -> Result<Estimate, MonteCarloError> {
    if blocks.len() < MIN_BLOCKS {
        return Err(MonteCarloError::TooFewBlocks {
            blocks: blocks.len(),
            min: MIN_BLOCKS,
        });
    }
    let samples: usize = blocks.iter().map(|b| b.1).sum();
    let mean = blocks.iter().map(|b| b.0).sum::<f64>() / samples as f64;
    let spread: f64 = blocks
        .iter()
        .filter(|b| b.1 > 0)
        .map(|&(sum, n)| {
            let d = sum / n as f64 - mean;
            n as f64 * d * d
        })
        .sum();
    let var_of_mean = spread / ((blocks.len() - 1) as f64 * samples as f64);
    Ok(Estimate {
        mean,
        stderr: var_of_mean.sqrt(),
        samples,
        blocks: blocks.len(),
    })
}

/// Estimates `E[f(X)]` for `X` standard normal in `batch.dim()` coordinates.
pub fn estimate<F>(batch: &SampleBatch, f: F) -> Result<Estimate, MonteCarloError>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    estimate_with(batch, Execution::default(), f)
}

pub fn estimate_with<F>(
    batch: &SampleBatch,
    exec: Execution,
    f: F,
) -> Result<Estimate, MonteCarloError>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if batch.num_blocks() < MIN_BLOCKS {
        return Err(MonteCarloError::TooFewBlocks {
            blocks: batch.num_blocks(),
            min: MIN_BLOCKS,
        });
    }
    let sums = map_blocks(batch, exec, |stream| {
        let mut sum = 0.0;
        stream.for_each_row(|row| sum += f(row));
        (sum, stream.len())
    });
    batch_means(&sums)
}
