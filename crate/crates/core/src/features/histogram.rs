use std::ops::Range;

use super::{pixel_bins, FeatureError};
use crate::imaging::Frame;

/// Row bands of `n` stripes over `height` rows: stripe `i` covers
/// `[floor(i*H/n), floor((i+1)*H/n))`, so the last stripe takes the remainder.
pub fn stripe_bounds(height: usize, n: usize) -> Vec<Range<usize>> {
    (0..n).map(|i| i * height / n..(i + 1) * height / n).collect()
}

pub fn split_stripes(frame: &Frame, n: usize) -> Result<Vec<Frame>, FeatureError> {
    let height = frame.height() as usize;
    if n == 0 || height < n {
        return Err(FeatureError::TooShort {
            height: frame.height(),
            stripes: n,
        });
    }
    Ok(stripe_bounds(height, n)
        .into_iter()
        .map(|r| {
            frame
                .rows(r.start as u32, r.end as u32)
                .expect("bounds lie inside the frame")
        })
        .collect())
}

/// Hard-binned counts for one stripe. Channel ranges: hue `[0, 360)`,
/// saturation `[0, 1]`, a* and b* `[-128, 128)` (clamped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeHistograms {
    pub hue: Vec<u32>,
    pub saturation: Vec<u32>,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
}

pub fn stripe_histograms(stripe: &Frame, bins: usize) -> StripeHistograms {
    let mut h = StripeHistograms {
        hue: vec![0; bins],
        saturation: vec![0; bins],
        a: vec![0; bins],
        b: vec![0; bins],
    };
    for rgb in stripe.rgb_pixels() {
        let [bh, bs, ba, bb] = pixel_bins(rgb, bins);
        h.hue[bh] += 1;
        h.saturation[bs] += 1;
        h.a[ba] += 1;
        h.b[bb] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn even_and_uneven_bounds() {
        assert_eq!(stripe_bounds(6, 3), vec![0..2, 2..4, 4..6]);
        assert_eq!(stripe_bounds(7, 3), vec![0..2, 2..4, 4..7]);
    }

    #[test]
    fn too_short() {
        let f = Frame::gray(3, 2, vec![0; 6]).unwrap();
        assert_eq!(
            split_stripes(&f, 3),
            Err(FeatureError::TooShort { height: 2, stripes: 3 })
        );
    }

    #[test]
    fn split_rows_follow_bounds() {
        let px: Vec<u8> = (0..7).collect();
        let f = Frame::gray(1, 7, px).unwrap();
        let stripes = split_stripes(&f, 3).unwrap();
        let rows: Vec<&[u8]> = stripes.iter().map(|s| s.pixels()).collect();
        assert_eq!(rows, vec![&[0, 1][..], &[2, 3], &[4, 5, 6]]);
    }

    #[test]
    fn pure_red_lands_in_hue_bucket_zero() {
        let f = Frame::filled(4, 3, [255, 0, 0]).unwrap();
        let h = stripe_histograms(&f, 16);
        assert_eq!(h.hue[0], 12);
        assert_eq!(h.saturation[15], 12);
        // a* = 80.09 and b* = 67.20 for pure red.
        assert_eq!(h.a[13], 12);
        assert_eq!(h.b[12], 12);
    }

    #[test]
    fn two_pixel_stripe_bucket_indices() {
        // red: H 0, S 1, a* 80.09, b* 67.20; blue: H 240, S 1, a* 79.19, b* -107.86
        let f = Frame::rgb(2, 1, vec![255, 0, 0, 0, 0, 255]).unwrap();
        let h = stripe_histograms(&f, 16);
        let nonzero =
            |v: &[u32]| -> Vec<usize> { v.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, _)| i).collect() };
        assert_eq!(nonzero(&h.hue), vec![0, 10]);
        assert_eq!(nonzero(&h.saturation), vec![15]);
        assert_eq!(h.saturation[15], 2);
        assert_eq!(nonzero(&h.a), vec![12, 13]);
        assert_eq!(nonzero(&h.b), vec![1, 12]);
    }

    proptest! {
        #[test]
        fn stripes_tile_rows(height in 1usize..200, n in 1usize..20) {
            prop_assume!(height >= n);
            let bounds = stripe_bounds(height, n);
            prop_assert_eq!(bounds.len(), n);
            prop_assert_eq!(bounds[0].start, 0);
            prop_assert_eq!(bounds[n - 1].end, height);
            for w in bounds.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
            prop_assert!(bounds.iter().all(|r| r.start < r.end));
        }

        #[test]
        fn histograms_conserve_mass(w in 1u32..10, h in 1u32..10, seed in any::<u64>(), bins in 2usize..20) {
            let px = (0..w * h * 3).map(|i| (crate::rng::splitmix64(seed ^ i as u64) >> 3) as u8).collect();
            let f = Frame::rgb(w, h, px).unwrap();
            let hist = stripe_histograms(&f, bins);
            let n = w * h;
            for channel in [&hist.hue, &hist.saturation, &hist.a, &hist.b] {
                prop_assert_eq!(channel.len(), bins);
                prop_assert_eq!(channel.iter().sum::<u32>(), n);
            }
        }
    }
}
