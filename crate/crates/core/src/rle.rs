//! Uncompressed run-length encoding of binary masks.
//!
//! Runs alternate 0/1 over the pixels in column-major order (`index = x *
//! height + y`) and always start with a 0-run, which may be empty. The
//! canonical form has no other empty runs.

use alloc::vec;
use alloc::vec::Vec;

use crate::point::{BBox, Pixel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RleError {
    #[error("run lengths sum to {actual}, expected {expected} ({height}x{width})")]
    SizeMismatch {
        expected: u64,
        actual: u64,
        height: u32,
        width: u32,
    },
    #[error("empty run at position {index} (only the leading run may be empty)")]
    NonCanonical { index: usize },
}

/// Binary image stored column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bitmap = Self::new(width, height);
        for x in 0..width {
            for y in 0..height {
                bitmap.set(x, y, f(x, y));
            }
        }
        bitmap
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        x as usize * self.height as usize + y as usize
    }

    /// Panics if `(x, y)` is outside the bitmap.
    pub fn get(&self, x: u32, y: u32) -> bool {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.bits[self.index(x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        let i = self.index(x, y);
        self.bits[i] = value;
    }

    pub fn count_ones(&self) -> u64 {
        self.bits.iter().filter(|b| **b).count() as u64
    }

    /// Pixels in column-major order.
    pub fn as_column_major(&self) -> &[bool] {
        &self.bits
    }
}

/// Run-length encoded binary mask of `height x width` pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RleMask {
    pub height: u32,
    pub width: u32,
    pub counts: Vec<u32>,
}

impl RleMask {
    pub fn empty(height: u32, width: u32) -> Self {
        Self {
            height,
            width,
            counts: vec![height * width],
        }
    }

    fn pixel_count(&self) -> u64 {
        u64::from(self.height) * u64::from(self.width)
    }

    /// Checks that the runs cover the image exactly.
    pub fn check(&self) -> Result<(), RleError> {
        let actual: u64 = self.counts.iter().map(|c| u64::from(*c)).sum();
        if actual != self.pixel_count() {
            return Err(RleError::SizeMismatch {
                expected: self.pixel_count(),
                actual,
                height: self.height,
                width: self.width,
            });
        }
        Ok(())
    }

    /// Checks [`check`](Self::check) plus the canonical-form rule.
    pub fn check_canonical(&self) -> Result<(), RleError> {
        self.check()?;
        match self.counts.iter().skip(1).position(|c| *c == 0) {
            Some(i) => Err(RleError::NonCanonical { index: i + 1 }),
            None => Ok(()),
        }
    }

    /// Iterator over the 1-runs as half-open column-major index ranges.
    fn one_runs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut pos = 0u64;
        self.counts.iter().enumerate().filter_map(move |(i, c)| {
            let start = pos;
            pos += u64::from(*c);
            (i % 2 == 1 && *c > 0).then_some((start, pos))
        })
    }

    /// Membership of a single pixel; `false` outside the image.
    pub fn get(&self, p: Pixel) -> bool {
        if p.x >= self.width || p.y >= self.height {
            return false;
        }
        let target = u64::from(p.x) * u64::from(self.height) + u64::from(p.y);
        let mut pos = 0u64;
        for (i, c) in self.counts.iter().enumerate() {
            pos += u64::from(*c);
            if target < pos {
                return i % 2 == 1;
            }
        }
        false
    }

    /// Number of 1-pixels.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|c| u64::from(*c)).sum()
    }

    /// Tight bounding box of the 1-pixels, `None` for an empty mask.
    pub fn bbox(&self) -> Option<BBox> {
        let h = u64::from(self.height);
        self.one_runs()
            .map(|(start, end)| {
                let (x0, x1) = (start / h, (end - 1) / h);
                let (y0, y1) = if x0 == x1 {
                    (start % h, (end - 1) % h)
                } else {
                    (0, h - 1)
                };
                BBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32)
            })
            .reduce(|a, b| a.union(&b))
    }

    pub fn decode(&self) -> Result<Bitmap, RleError> {
        self.check()?;
        let mut bitmap = Bitmap::new(self.width, self.height);
        for (start, end) in self.one_runs() {
            bitmap.bits[start as usize..end as usize].fill(true);
        }
        Ok(bitmap)
    }

    pub fn encode(bitmap: &Bitmap) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &bit in &bitmap.bits {
            if bit != current {
                counts.push(run);
                current = bit;
                run = 0;
            }
            run += 1;
        }
        if run > 0 || counts.is_empty() {
            counts.push(run);
        }
        Self {
            height: bitmap.height,
            width: bitmap.width,
            counts,
        }
    }

    /// Inclusive row ranges of 1-pixels for every column.
    pub fn column_spans(&self) -> Vec<Vec<(u32, u32)>> {
        let h = u64::from(self.height);
        let mut columns = vec![Vec::new(); self.width as usize];
        for (mut start, end) in self.one_runs() {
            while start < end {
                let x = start / h;
                let column_end = ((x + 1) * h).min(end);
                columns[x as usize].push(((start % h) as u32, ((column_end - 1) % h) as u32));
                start = column_end;
            }
        }
        columns
    }

    /// Canonical mask from per-column inclusive row ranges. Ranges within a
    /// column must be sorted and disjoint.
    pub fn from_column_spans(height: u32, width: u32, columns: &[Vec<(u32, u32)>]) -> Self {
        let h = u64::from(height);
        let total = h * u64::from(width);
        let mut counts = Vec::new();
        let mut pos = 0u64;
        let mut open: Option<(u64, u64)> = None;
        let flush = |run: (u64, u64), counts: &mut Vec<u32>, pos: &mut u64| {
            counts.push((run.0 - *pos) as u32);
            counts.push((run.1 - run.0) as u32);
            *pos = run.1;
        };
        for (x, spans) in columns.iter().enumerate().take(width as usize) {
            for &(y0, y1) in spans {
                let start = x as u64 * h + u64::from(y0);
                let end = x as u64 * h + u64::from(y1) + 1;
                open = match open {
                    Some((s, e)) if e == start => Some((s, end)),
                    Some(run) => {
                        flush(run, &mut counts, &mut pos);
                        Some((start, end))
                    }
                    None => Some((start, end)),
                };
            }
        }
        if let Some(run) = open {
            flush(run, &mut counts, &mut pos);
        }
        if pos < total || counts.is_empty() {
            counts.push((total - pos) as u32);
        }
        Self { height, width, counts }
    }

    /// Square-structuring-element dilation, clipped to the image.
    pub fn dilate(&self, radius: u32) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let columns = self.column_spans();
        let vertical: Vec<Vec<(u32, u32)>> = columns
            .iter()
            .map(|spans| {
                merge_spans(
                    spans
                        .iter()
                        .map(|&(y0, y1)| (y0.saturating_sub(radius), (y1 + radius).min(self.height - 1))),
                )
            })
            .collect();
        let width = self.width as usize;
        let r = radius as usize;
        let dilated: Vec<Vec<(u32, u32)>> = (0..width)
            .map(|x| {
                let lo = x.saturating_sub(r);
                let hi = (x + r).min(width - 1);
                let mut spans: Vec<(u32, u32)> = vertical[lo..=hi].iter().flatten().copied().collect();
                spans.sort_unstable();
                merge_spans(spans)
            })
            .collect();
        Self::from_column_spans(self.height, self.width, &dilated)
    }
}

/// Merges sorted inclusive ranges that overlap or touch.
fn merge_spans(spans: impl IntoIterator<Item = (u32, u32)>) -> Vec<(u32, u32)> {
    let mut merged: Vec<(u32, u32)> = Vec::new();
    for (a, b) in spans {
        match merged.last_mut() {
            Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

pub fn decode_rle(mask: &RleMask) -> Result<Bitmap, RleError> {
    mask.decode()
}

pub fn encode_rle(bitmap: &Bitmap) -> RleMask {
    RleMask::encode(bitmap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_zero_run_is_all_false() {
        let mask = RleMask {
            height: 3,
            width: 4,
            counts: vec![12],
        };
        let bitmap = mask.decode().unwrap();
        assert_eq!(bitmap.count_ones(), 0);
        assert_eq!(RleMask::encode(&bitmap), mask);
    }

    #[test]
    fn leading_empty_run_is_all_true() {
        let mask = RleMask {
            height: 3,
            width: 4,
            counts: vec![0, 12],
        };
        let bitmap = mask.decode().unwrap();
        assert_eq!(bitmap.count_ones(), 12);
        assert_eq!(RleMask::encode(&bitmap), mask);
    }

    #[test]
    fn column_major_order() {
        // 2 rows x 3 columns; only (x=1, y=0) set.
        let mask = RleMask {
            height: 2,
            width: 3,
            counts: vec![2, 1, 3],
        };
        let bitmap = mask.decode().unwrap();
        assert!(bitmap.get(1, 0));
        assert_eq!(bitmap.count_ones(), 1);
        assert!(mask.get(Pixel::new(1, 0)));
        assert!(!mask.get(Pixel::new(0, 1)));
        assert_eq!(mask.bbox(), Some(BBox::new(1, 0, 1, 0)));
    }

    #[test]
    fn sum_mismatch_is_rejected() {
        let mask = RleMask {
            height: 2,
            width: 2,
            counts: vec![1, 2],
        };
        assert!(matches!(
            mask.decode(),
            Err(RleError::SizeMismatch {
                expected: 4,
                actual: 3,
                ..
            })
        ));
    }

    #[test]
    fn interior_empty_run_is_not_canonical() {
        let mask = RleMask {
            height: 2,
            width: 2,
            counts: vec![1, 0, 3],
        };
        assert_eq!(mask.check_canonical(), Err(RleError::NonCanonical { index: 1 }));
        assert!(mask.check().is_ok());
    }

    #[test]
    fn dilate_single_pixel_to_block() {
        let bitmap = Bitmap::from_fn(11, 11, |x, y| x == 5 && y == 5);
        let dilated = RleMask::encode(&bitmap).dilate(1).decode().unwrap();
        let expected = Bitmap::from_fn(11, 11, |x, y| (4..=6).contains(&x) && (4..=6).contains(&y));
        assert_eq!(dilated, expected);
    }

    #[test]
    fn dilate_clips_at_border() {
        let bitmap = Bitmap::from_fn(4, 3, |x, y| x == 0 && y == 0);
        let dilated = RleMask::encode(&bitmap).dilate(2).decode().unwrap();
        let expected = Bitmap::from_fn(4, 3, |x, y| x <= 2 && y <= 2);
        assert_eq!(dilated, expected);
    }

    fn bitmap_strategy() -> impl Strategy<Value = Bitmap> {
        (1u32..12, 1u32..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize).prop_map(move |bits| Bitmap {
                width: w,
                height: h,
                bits,
            })
        })
    }

    proptest! {
        #[test]
        fn encode_is_canonical_and_invertible(bitmap in bitmap_strategy()) {
            let mask = RleMask::encode(&bitmap);
            prop_assert!(mask.check_canonical().is_ok());
            prop_assert_eq!(mask.decode().unwrap(), bitmap.clone());
            prop_assert_eq!(mask.area(), bitmap.count_ones());
            let spans = mask.column_spans();
            prop_assert_eq!(RleMask::from_column_spans(mask.height, mask.width, &spans), mask);
        }

        #[test]
        fn dilation_matches_brute_force(bitmap in bitmap_strategy(), radius in 0u32..3) {
            let dilated = RleMask::encode(&bitmap).dilate(radius).decode().unwrap();
            let r = radius as i64;
            let expected = Bitmap::from_fn(bitmap.width, bitmap.height, |x, y| {
                (-r..=r).any(|dx| (-r..=r).any(|dy| {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    nx >= 0 && ny >= 0 && nx < bitmap.width as i64 && ny < bitmap.height as i64
                        && bitmap.get(nx as u32, ny as u32)
                }))
            });
            prop_assert_eq!(dilated, expected);
        }
    }
}
