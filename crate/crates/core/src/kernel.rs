//! Branch-free per-node search primitives.
//!
//! Every primitive has three implementations with identical results:
//!
//! * `Scalar`: plain loops with early exits, one element at a time.
//! * `Lanes`: fixed-width, branch-free lane loops over whole blocks (compare,
//!   mask, population count). Portable; the compiler maps them onto whatever
//!   vector unit the target has.
//! * `Avx2`: explicit 256-bit intrinsics on x86-64, chosen at run time when
//!   the CPU supports them.
//!
//! The splitter primitives always read a complete 64-byte block. Padding slots
//! hold the layout's maximum code, and results are clamped to the number of
//! real splitters, so padding never changes an answer.

use crate::model::CoordKey;

/// Lanes per leaf block. Leaf vectors are padded to a multiple of this.
pub const BLOCK: usize = 8;

/// User-facing selection between the data-parallel and the scalar kernels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SimdMode {
    #[default]
    Auto,
    Scalar,
}

impl std::str::FromStr for SimdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "scalar" => Ok(Self::Scalar),
            other => Err(format!("unknown simd mode `{other}` (expected auto|scalar)")),
        }
    }
}

/// Concrete primitive implementation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kernel {
    Scalar,
    Lanes,
    #[cfg(target_arch = "x86_64")]
    Avx2,
}

impl Kernel {
    /// Best kernel for this CPU.
    pub fn detect() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx2") {
                return Kernel::Avx2;
            }
        }
        Kernel::Lanes
    }

    pub fn for_mode(mode: SimdMode) -> Self {
        match mode {
            SimdMode::Auto => Self::detect(),
            SimdMode::Scalar => Kernel::Scalar,
        }
    }

    /// Every kernel usable on this machine.
    pub fn available() -> Vec<Kernel> {
        let mut v = vec![Kernel::Scalar, Kernel::Lanes];
        #[cfg(target_arch = "x86_64")]
        {
            if std::is_x86_feature_detected!("avx2") {
                v.push(Kernel::Avx2);
            }
        }
        v
    }

    pub fn is_scalar(self) -> bool {
        self == Kernel::Scalar
    }
}

/// A fixed-width splitter code stored in a 64-byte block.
pub trait SplitterCode: Copy + Ord + Eq + std::fmt::Debug + bytemuck::Pod {
    const BITS: u32;
    /// Padding code; also the largest representable code.
    const PAD: Self;
    fn from_key(key: u64) -> Self;
    fn to_key(self) -> u64;
}

macro_rules! splitter_code {
    ($t:ty) => {
        impl SplitterCode for $t {
            const BITS: u32 = <$t>::BITS;
            const PAD: Self = <$t>::MAX;
            #[inline(always)]
            fn from_key(key: u64) -> Self {
                key.min(<$t>::MAX as u64) as $t
            }
            #[inline(always)]
            fn to_key(self) -> u64 {
                self as u64
            }
        }
    };
}
splitter_code!(u16);
splitter_code!(u32);
splitter_code!(u64);

/// Number of real splitters `t` in `block[..slotuse]` with `key >= t`.
///
/// `block` must be sorted with padding after `slotuse`.
#[inline]
pub fn count_le<T: SplitterCode, const N: usize>(
    kernel: Kernel,
    block: &[T; N],
    slotuse: usize,
    key: T,
) -> usize {
    match kernel {
        Kernel::Scalar => scalar_count_le(block, slotuse, key),
        Kernel::Lanes => lanes_count_le(block, key).min(slotuse),
        #[cfg(target_arch = "x86_64")]
        Kernel::Avx2 => {
            // SAFETY: Avx2 is only constructed after run-time feature detection.
            unsafe { avx2::count_le(block, key) }.min(slotuse)
        }
    }
}

#[inline]
fn scalar_count_le<T: SplitterCode>(block: &[T], slotuse: usize, key: T) -> usize {
    let mut i = 0;
    while i < slotuse && key >= block[i] {
        i += 1;
    }
    i
}

#[inline(always)]
fn lanes_count_le<T: SplitterCode, const N: usize>(block: &[T; N], key: T) -> usize {
    block.iter().map(|&t| (key >= t) as usize).sum()
}

/// ANDs into `masks` the lanes of `col` that fall inside `[lo, hi]`.
///
/// `col.len()` must equal `masks.len() * BLOCK`.
#[inline]
pub fn and_range_mask(kernel: Kernel, col: &[CoordKey], lo: CoordKey, hi: CoordKey, masks: &mut [u8]) {
    debug_assert_eq!(col.len(), masks.len() * BLOCK);
    match kernel {
        Kernel::Scalar => {
            for (i, &x) in col.iter().enumerate() {
                if x < lo || x > hi {
                    masks[i / BLOCK] &= !(1 << (i % BLOCK));
                }
            }
        }
        Kernel::Lanes => {
            for (chunk, m) in col.chunks_exact(BLOCK).zip(masks.iter_mut()) {
                let mut bits = 0u8;
                for (j, &x) in chunk.iter().enumerate() {
                    bits |= (((x >= lo) & (x <= hi)) as u8) << j;
                }
                *m &= bits;
            }
        }
        #[cfg(target_arch = "x86_64")]
        Kernel::Avx2 => unsafe { avx2::and_range_mask(col, lo, hi, masks) },
    }
}

/// Adds `(col[i] - q)^2` into `acc[i]` for every lane, saturating.
#[inline]
pub fn accumulate_sq_diff(kernel: Kernel, col: &[CoordKey], q: CoordKey, acc: &mut [u128]) {
    debug_assert_eq!(col.len(), acc.len());
    match kernel {
        Kernel::Scalar => {
            for i in 0..col.len() {
                let diff = col[i].abs_diff(q) as u128;
                acc[i] = acc[i].saturating_add(diff * diff);
            }
        }
        _ => {
            for (chunk, a) in col.chunks_exact(BLOCK).zip(acc.chunks_exact_mut(BLOCK)) {
                let mut sq = [0u128; BLOCK];
                for j in 0..BLOCK {
                    let diff = chunk[j].abs_diff(q) as u128;
                    sq[j] = diff * diff;
                }
                for j in 0..BLOCK {
                    a[j] = a[j].saturating_add(sq[j]);
                }
            }
        }
    }
}

/// First lane in `start..len` whose value equals `needle`.
#[inline]
pub fn find_eq(kernel: Kernel, col: &[u64], start: usize, len: usize, needle: u64) -> Option<usize> {
    debug_assert!(len <= col.len() && col.len().is_multiple_of(BLOCK));
    if start >= len {
        return None;
    }
    let first = start / BLOCK;
    let head = !0u8 << (start % BLOCK);
    match kernel {
        Kernel::Scalar => col[start..len].iter().position(|&x| x == needle).map(|i| i + start),
        Kernel::Lanes => {
            for (b, chunk) in col.chunks_exact(BLOCK).enumerate().skip(first) {
                let mut bits = 0u8;
                for (j, &x) in chunk.iter().enumerate() {
                    bits |= ((x == needle) as u8) << j;
                }
                if b == first {
                    bits &= head;
                }
                if bits != 0 {
                    let idx = b * BLOCK + bits.trailing_zeros() as usize;
                    return (idx < len).then_some(idx);
                }
            }
            None
        }
        #[cfg(target_arch = "x86_64")]
        Kernel::Avx2 => unsafe { avx2::find_eq(col, first, head, needle) }.filter(|&i| i < len),
    }
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use super::{SplitterCode, BLOCK};
    use std::arch::x86_64::*;
    use std::mem::size_of;

    const SIGN: i64 = i64::MIN;

    /// Count of lanes with `key >= t` over a full 64-byte block.
    #[target_feature(enable = "avx2")]
    pub unsafe fn count_le<T: SplitterCode, const N: usize>(block: &[T; N], key: T) -> usize {
        debug_assert_eq!(N * size_of::<T>(), 64);
        let p = block.as_ptr() as *const __m256i;
        let a = _mm256_loadu_si256(p);
        let b = _mm256_loadu_si256(p.add(1));
        match T::BITS {
            64 => {
                // Unsigned compare through the sign-flip trick: t > key.
                let flip = _mm256_set1_epi64x(SIGN);
                let k = _mm256_xor_si256(_mm256_set1_epi64x(key.to_key() as i64), flip);
                let ga = _mm256_cmpgt_epi64(_mm256_xor_si256(a, flip), k);
                let gb = _mm256_cmpgt_epi64(_mm256_xor_si256(b, flip), k);
                let gt = _mm256_movemask_pd(_mm256_castsi256_pd(ga)) as u32
                    | ((_mm256_movemask_pd(_mm256_castsi256_pd(gb)) as u32) << 4);
                8 - gt.count_ones() as usize
            }
            32 => {
                // key >= t  <=>  max(key, t) == key
                let k = _mm256_set1_epi32(key.to_key() as u32 as i32);
                let ea = _mm256_cmpeq_epi32(_mm256_max_epu32(a, k), k);
                let eb = _mm256_cmpeq_epi32(_mm256_max_epu32(b, k), k);
                let m = _mm256_movemask_ps(_mm256_castsi256_ps(ea)) as u32
                    | ((_mm256_movemask_ps(_mm256_castsi256_ps(eb)) as u32) << 8);
                m.count_ones() as usize
            }
            _ => {
                let k = _mm256_set1_epi16(key.to_key() as u16 as i16);
                let ea = _mm256_cmpeq_epi16(_mm256_max_epu16(a, k), k);
                let eb = _mm256_cmpeq_epi16(_mm256_max_epu16(b, k), k);
                // movemask_epi8 yields two bits per 16-bit lane.
                let m = (_mm256_movemask_epi8(ea) as u32).count_ones()
                    + (_mm256_movemask_epi8(eb) as u32).count_ones();
                (m / 2) as usize
            }
        }
    }

    #[target_feature(enable = "avx2")]
    pub unsafe fn and_range_mask(col: &[u64], lo: u64, hi: u64, masks: &mut [u8]) {
        let flip = _mm256_set1_epi64x(SIGN);
        let lo = _mm256_xor_si256(_mm256_set1_epi64x(lo as i64), flip);
        let hi = _mm256_xor_si256(_mm256_set1_epi64x(hi as i64), flip);
        let p = col.as_ptr() as *const __m256i;
        for (b, m) in masks.iter_mut().enumerate() {
            let xa = _mm256_xor_si256(_mm256_loadu_si256(p.add(2 * b)), flip);
            let xb = _mm256_xor_si256(_mm256_loadu_si256(p.add(2 * b + 1)), flip);
            // outside <=> lo > x || x > hi
            let oa = _mm256_or_si256(_mm256_cmpgt_epi64(lo, xa), _mm256_cmpgt_epi64(xa, hi));
            let ob = _mm256_or_si256(_mm256_cmpgt_epi64(lo, xb), _mm256_cmpgt_epi64(xb, hi));
            let out = _mm256_movemask_pd(_mm256_castsi256_pd(oa)) as u8
                | ((_mm256_movemask_pd(_mm256_castsi256_pd(ob)) as u8) << 4);
            *m &= !out;
        }
    }

    #[target_feature(enable = "avx2")]
    pub unsafe fn find_eq(col: &[u64], first: usize, head: u8, needle: u64) -> Option<usize> {
        let n = _mm256_set1_epi64x(needle as i64);
        let p = col.as_ptr() as *const __m256i;
        for b in first..col.len() / BLOCK {
            let ea = _mm256_cmpeq_epi64(_mm256_loadu_si256(p.add(2 * b)), n);
            let eb = _mm256_cmpeq_epi64(_mm256_loadu_si256(p.add(2 * b + 1)), n);
            let mut m = _mm256_movemask_pd(_mm256_castsi256_pd(ea)) as u32
                | ((_mm256_movemask_pd(_mm256_castsi256_pd(eb)) as u32) << 4);
            if b == first {
                m &= head as u32;
            }
            if m != 0 {
                return Some(b * BLOCK + m.trailing_zeros() as usize);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn block_from<T: SplitterCode, const N: usize>(mut codes: Vec<T>) -> ([T; N], usize) {
        codes.sort();
        codes.dedup();
        codes.truncate(N - 1);
        let mut block = [T::PAD; N];
        block[..codes.len()].copy_from_slice(&codes);
        (block, codes.len())
    }

    fn fuzz_count<T: SplitterCode, const N: usize>(rng: &mut StdRng, gen: impl Fn(&mut StdRng) -> T) {
        for _ in 0..2000 {
            let n = rng.gen_range(0..N);
            let (block, slotuse) = block_from::<T, N>((0..n).map(|_| gen(rng)).collect());
            let key = if rng.gen_bool(0.3) && slotuse > 0 {
                block[rng.gen_range(0..slotuse)]
            } else {
                gen(rng)
            };
            let expect = block[..slotuse].iter().filter(|&&t| key >= t).count();
            for k in Kernel::available() {
                assert_eq!(count_le(k, &block, slotuse, key), expect, "{k:?} {block:?} {key:?}");
            }
            for k in Kernel::available() {
                assert_eq!(count_le(k, &block, slotuse, T::PAD), slotuse);
            }
        }
    }

    #[test]
    fn count_le_kernels_agree() {
        let mut rng = StdRng::seed_from_u64(1);
        fuzz_count::<u64, 8>(&mut rng, |r| r.gen());
        fuzz_count::<u64, 8>(&mut rng, |r| r.gen_range(0..20));
        fuzz_count::<u32, 16>(&mut rng, |r| r.gen());
        fuzz_count::<u32, 16>(&mut rng, |r| r.gen_range(0..40));
        fuzz_count::<u16, 32>(&mut rng, |r| r.gen());
        fuzz_count::<u16, 32>(&mut rng, |r| r.gen_range(0..80));
    }

    #[test]
    fn range_mask_kernels_agree() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..500 {
            let blocks = rng.gen_range(1..6);
            let span: u64 = if rng.gen_bool(0.5) { 50 } else { u64::MAX };
            let col: Vec<u64> = (0..blocks * BLOCK).map(|_| rng.gen_range(0..=span)).collect();
            let mut a = rng.gen_range(0..=span);
            let mut b = rng.gen_range(0..=span);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let init: Vec<u8> = (0..blocks).map(|_| rng.gen()).collect();
            let mut expect = init.clone();
            for (i, &x) in col.iter().enumerate() {
                if !(a <= x && x <= b) {
                    expect[i / BLOCK] &= !(1 << (i % BLOCK));
                }
            }
            for k in Kernel::available() {
                let mut m = init.clone();
                and_range_mask(k, &col, a, b, &mut m);
                assert_eq!(m, expect, "{k:?}");
            }
        }
    }

    #[test]
    fn find_eq_kernels_agree() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..500 {
            let blocks = rng.gen_range(1..5);
            let col: Vec<u64> = (0..blocks * BLOCK).map(|_| rng.gen_range(0..30)).collect();
            let len = rng.gen_range(0..=col.len());
            let start = rng.gen_range(0..=len);
            let needle = rng.gen_range(0..30);
            let expect = col[start..len].iter().position(|&x| x == needle).map(|i| i + start);
            for k in Kernel::available() {
                assert_eq!(find_eq(k, &col, start, len, needle), expect, "{k:?}");
            }
        }
    }

    #[test]
    fn sq_diff_kernels_agree() {
        let mut rng = StdRng::seed_from_u64(4);
        let col: Vec<u64> = (0..64).map(|_| rng.gen()).collect();
        let q = rng.gen();
        let mut outs = Vec::new();
        for k in Kernel::available() {
            let mut acc = vec![7u128; 64];
            accumulate_sq_diff(k, &col, q, &mut acc);
            accumulate_sq_diff(k, &col, q, &mut acc);
            outs.push(acc);
        }
        assert!(outs.windows(2).all(|w| w[0] == w[1]));
    }
}
