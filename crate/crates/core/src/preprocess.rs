//! Intensity preprocessing: tail winsorization, per-protocol z-scoring,
//! histogram matching to a reference case and unit rescale.
//!
//! All statistics are computed over the nonzero (brain) voxels only; zero
//! voxels are skull-stripped background and pass through every step
//! unchanged. "Excluding" the intensity tails is implemented as clamping
//! (winsorizing), since the voxel grid must stay dense for the downstream
//! filtering stages.

use crate::volume::{MultimodalVolume, Volume3D};
use crate::{Error, Result};

/// Parameters of the preprocessing chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    /// Fraction winsorized at each end of the foreground intensity
    /// distribution, in `[0, 0.5)`.
    pub tail_fraction: f32,
    /// Histogram resolution used for CDF matching.
    pub hist_bins: usize,
    /// Identifier of the reference case; empty string selects the
    /// lexicographically first training case.
    pub reference_case: String,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            tail_fraction: 0.01,
            hist_bins: 256,
            reference_case: String::new(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.tail_fraction) {
            return Err(Error::InvalidParameter(format!(
                "tail_fraction must lie in [0, 0.5), got {}",
                self.tail_fraction
            )));
        }
        if self.hist_bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "hist_bins must be at least 2, got {}",
                self.hist_bins
            )));
        }
        Ok(())
    }
}

fn foreground(vol: &Volume3D) -> impl Iterator<Item = f32> + '_ {
    vol.data().iter().copied().filter(|&v| v != 0.0)
}

fn sorted_foreground(vol: &Volume3D) -> Result<Vec<f32>> {
    let mut fg: Vec<f32> = foreground(vol).collect();
    if fg.is_empty() {
        return Err(Error::EmptyForeground);
    }
    fg.sort_unstable_by(f32::total_cmp);
    Ok(fg)
}

/// Quantile of a sorted sample: value at fractional index `p * (n - 1)`,
/// linearly interpolated between neighbours.
pub fn quantile_sorted(sorted: &[f32], p: f64) -> f32 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    (sorted[i] as f64 * (1.0 - frac) + sorted[i + 1] as f64 * frac) as f32
}

/// Winsorizes foreground values to the `[q(tail), q(1 - tail)]` quantile
/// range. `tail_fraction = 0` is the identity.
pub fn clip_tails(vol: &Volume3D, tail_fraction: f32) -> Result<Volume3D> {
    if !(0.0..0.5).contains(&tail_fraction) {
        return Err(Error::InvalidParameter(format!(
            "tail_fraction must lie in [0, 0.5), got {tail_fraction}"
        )));
    }
    let fg = sorted_foreground(vol)?;
    let lo = quantile_sorted(&fg, tail_fraction as f64);
    let hi = quantile_sorted(&fg, 1.0 - tail_fraction as f64);
    Ok(vol.map(|v| if v == 0.0 { 0.0 } else { v.clamp(lo, hi) }))
}

fn foreground_mean_std(vol: &Volume3D) -> Result<(f64, f64)> {
    let mut n = 0u64;
    let mut sum = 0.0f64;
    for v in foreground(vol) {
        n += 1;
        sum += v as f64;
    }
    if n == 0 {
        return Err(Error::EmptyForeground);
    }
    let mean = sum / n as f64;
    let mut ss = 0.0f64;
    for v in foreground(vol) {
        let d = v as f64 - mean;
        ss += d * d;
    }
    Ok((mean, (ss / n as f64).sqrt()))
}

/// Centers the foreground to mean 0 and population standard deviation 1.
pub fn zscore_normalize(vol: &Volume3D) -> Result<Volume3D> {
    let (mean, std) = foreground_mean_std(vol)?;
    if std == 0.0 {
        return Err(Error::DegenerateIntensity(
            "constant foreground has zero standard deviation".into(),
        ));
    }
    Ok(vol.map(|v| {
        if v == 0.0 {
            0.0
        } else {
            ((v as f64 - mean) / std) as f32
        }
    }))
}

/// Piecewise-linear foreground CDF over a fixed-width histogram.
struct HistCdf {
    min: f32,
    width: f64,
    bins: usize,
    counts: Vec<f64>,
    cum: Vec<f64>, // cum[i] = mass strictly before bin i; cum[bins] = n
}

impl HistCdf {
    fn build(vol: &Volume3D, bins: usize) -> Result<HistCdf> {
        let mut min = f32::INFINITY;
        let mut max = f32::NEG_INFINITY;
        let mut n = 0usize;
        for v in foreground(vol) {
            min = min.min(v);
            max = max.max(v);
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyForeground);
        }
        let width = if max > min {
            (max as f64 - min as f64) / bins as f64
        } else {
            1.0 // degenerate constant foreground: single populated bin
        };
        let mut counts = vec![0.0f64; bins];
        for v in foreground(vol) {
            let t = ((v as f64 - min as f64) / width).floor() as usize;
            counts[t.min(bins - 1)] += 1.0;
        }
        let mut cum = Vec::with_capacity(bins + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for &c in &counts {
            acc += c;
            cum.push(acc);
        }
        Ok(HistCdf {
            min,
            width,
            bins,
            counts,
            cum,
        })
    }

    fn total(&self) -> f64 {
        self.cum[self.bins]
    }

    /// CDF value in [0, 1], linear within bins.
    fn cdf(&self, v: f32) -> f64 {
        let t = (v as f64 - self.min as f64) / self.width;
        if t <= 0.0 {
            return 0.0;
        }
        let b = (t.floor() as usize).min(self.bins - 1);
        let frac = (t - b as f64).min(1.0);
        ((self.cum[b] + frac * self.counts[b]) / self.total()).min(1.0)
    }

    /// Inverse CDF; monotone nondecreasing in `c`.
    fn inv(&self, c: f64) -> f32 {
        let target = c.clamp(0.0, 1.0) * self.total();
        // smallest bin whose cumulative upper bound reaches the target
        let j = self.cum[1..=self.bins].partition_point(|&u| u < target);
        let j = j.min(self.bins - 1);
        let within = if self.counts[j] > 0.0 {
            (target - self.cum[j]).max(0.0) / self.counts[j]
        } else {
            0.0
        };
        (self.min as f64 + (j as f64 + within) * self.width) as f32
    }
}

/// Maps foreground intensities so their CDF approximates the reference
/// foreground CDF. The mapping is monotone nondecreasing by construction.
pub fn histogram_match(vol: &Volume3D, reference: &Volume3D, bins: usize) -> Result<Volume3D> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "hist_bins must be at least 2, got {bins}"
        )));
    }
    let source = HistCdf::build(vol, bins)?;
    let target = HistCdf::build(reference, bins)?;
    Ok(vol.map(|v| {
        if v == 0.0 {
            0.0
        } else {
            target.inv(source.cdf(v))
        }
    }))
}

/// Affinely rescales the foreground so its minimum maps to 0 and its
/// maximum to 1.
pub fn rescale_unit(vol: &Volume3D) -> Result<Volume3D> {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    let mut any = false;
    for v in foreground(vol) {
        min = min.min(v);
        max = max.max(v);
        any = true;
    }
    if !any {
        return Err(Error::EmptyForeground);
    }
    if max <= min {
        return Err(Error::DegenerateIntensity(
            "constant foreground cannot be rescaled to [0, 1]".into(),
        ));
    }
    let span = max as f64 - min as f64;
    Ok(vol.map(|v| {
        if v == 0.0 {
            0.0
        } else {
            ((v as f64 - min as f64) / span) as f32
        }
    }))
}

/// Tail-clips and z-scores each modality of the chosen reference case.
/// The result is what cases are histogram-matched against.
pub fn prepare_reference(case: &MultimodalVolume, cfg: &PreprocessConfig) -> Result<MultimodalVolume> {
    cfg.validate()?;
    case.try_map(|_, vol| zscore_normalize(&clip_tails(vol, cfg.tail_fraction)?))
}

/// Full per-protocol chain: clip tails, z-score, histogram-match against the
/// same protocol of the prepared reference, rescale to `[0, 1]`.
pub fn preprocess_case(
    case: &MultimodalVolume,
    reference: &MultimodalVolume,
    cfg: &PreprocessConfig,
) -> Result<MultimodalVolume> {
    cfg.validate()?;
    case.try_map(|m, vol| {
        let clipped = clip_tails(vol, cfg.tail_fraction)?;
        let normed = zscore_normalize(&clipped)?;
        let matched = histogram_match(&normed, reference.modality(m), cfg.hist_bins)?;
        rescale_unit(&matched)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{stack_modalities, Dims};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vol_from(values: &[f32]) -> Volume3D {
        let n = values.len();
        Volume3D::new(Dims::new(n, 1, 1), (1.0, 1.0, 1.0), values.to_vec()).unwrap()
    }

    fn random_vol(seed: u64, n: usize, lo: f32, hi: f32) -> Volume3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f32> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        vol_from(&data)
    }

    /// Brute-force quantile oracle: exhaustive sort plus the interpolated
    /// index rule, written independently of `quantile_sorted`.
    fn oracle_quantile(values: &[f32], p: f64) -> f32 {
        let mut s = values.to_vec();
        s.sort_by(f32::total_cmp);
        let pos = p * (s.len() - 1) as f64;
        let lo = s[pos.floor() as usize] as f64;
        let hi = s[pos.ceil() as usize] as f64;
        (lo + (hi - lo) * (pos - pos.floor())) as f32
    }

    #[test]
    fn clip_tails_winsorizes_one_percent() {
        // 100 foreground voxels valued 1..=100; q(0.01) interpolates between
        // the two smallest order statistics: 1 + 0.99 * (2 - 1) = 1.99.
        let values: Vec<f32> = (1..=100).map(|v| v as f32).collect();
        let vol = vol_from(&values);
        let clipped = clip_tails(&vol, 0.01).unwrap();
        let lo_expect = oracle_quantile(&values, 0.01);
        let hi_expect = oracle_quantile(&values, 0.99);
        assert!((lo_expect - 1.99).abs() < 1e-5);
        assert!((hi_expect - 99.01).abs() < 1e-4);
        let min = clipped.data().iter().copied().fold(f32::INFINITY, f32::min);
        let max = clipped.data().iter().copied().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!(min, lo_expect);
        assert_eq!(max, hi_expect);
        // interior values pass through
        assert_eq!(clipped.data()[49], 50.0);
    }

    #[test]
    fn clip_tails_zero_fraction_is_identity() {
        let vol = random_vol(3, 64, 0.5, 9.0);
        let out = clip_tails(&vol, 0.0).unwrap();
        assert_eq!(out.data(), vol.data());
    }

    #[test]
    fn clip_tails_constant_foreground_unchanged() {
        let vol = vol_from(&[3.0; 50]);
        let out = clip_tails(&vol, 0.05).unwrap();
        assert_eq!(out.data(), vol.data());
    }

    #[test]
    fn clip_tails_keeps_background_zero() {
        let mut values = vec![0.0f32; 20];
        values.extend((1..=30).map(|v| v as f32));
        let out = clip_tails(&vol_from(&values), 0.1).unwrap();
        assert!(out.data()[..20].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn clip_tails_all_zero_is_empty_foreground() {
        let vol = vol_from(&[0.0; 8]);
        assert!(matches!(clip_tails(&vol, 0.01), Err(Error::EmptyForeground)));
    }

    #[test]
    fn zscore_two_point_case() {
        let vol = vol_from(&[0.5, 2.5]);
        let out = zscore_normalize(&vol).unwrap();
        assert!((out.data()[0] + 1.0).abs() < 1e-6);
        assert!((out.data()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zscore_is_idempotent_within_tolerance() {
        let vol = random_vol(7, 500, 1.0, 10.0);
        let once = zscore_normalize(&vol).unwrap();
        let twice = zscore_normalize(&once).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-5);
        }
        let (mean, std) = foreground_mean_std(&once).unwrap();
        assert!(mean.abs() < 1e-6 * once.data().len() as f64);
        assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zscore_constant_foreground_is_degenerate() {
        let vol = vol_from(&[4.0; 10]);
        assert!(matches!(
            zscore_normalize(&vol),
            Err(Error::DegenerateIntensity(_))
        ));
    }

    #[test]
    fn histogram_self_match_is_near_identity() {
        let vol = random_vol(11, 4000, 1.0, 5.0);
        let out = histogram_match(&vol, &vol, 256).unwrap();
        let bin_width = 4.0 / 256.0;
        for (a, b) in vol.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= bin_width + 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn histogram_match_tracks_reference_cdf() {
        // uniform input matched to a skewed reference; the output empirical
        // CDF must stay within 2/bins of the reference CDF in sup norm
        let bins = 64;
        let input = random_vol(13, 20_000, 0.0001, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let ref_data: Vec<f32> = (0..20_000)
            .map(|_| {
                let u: f32 = rng.gen_range(0.0f32..1.0).max(1e-6);
                u * u * 4.0 + 0.5
            })
            .collect();
        let reference = vol_from(&ref_data);
        let out = histogram_match(&input, &reference, bins).unwrap();

        // brute-force CDF comparison at a grid of probe values
        let mut ref_sorted = ref_data.clone();
        ref_sorted.sort_by(f32::total_cmp);
        let mut out_sorted: Vec<f32> = out.data().to_vec();
        out_sorted.sort_by(f32::total_cmp);
        let ecdf = |sorted: &[f32], v: f32| {
            sorted.partition_point(|&x| x <= v) as f64 / sorted.len() as f64
        };
        let mut sup = 0.0f64;
        for k in 0..200 {
            let v = 0.5 + 4.5 * k as f32 / 199.0;
            sup = sup.max((ecdf(&ref_sorted, v) - ecdf(&out_sorted, v)).abs());
        }
        assert!(sup <= 2.0 / bins as f64, "sup-norm CDF gap {sup}");
    }

    #[test]
    fn histogram_match_empty_foreground_errors() {
        let empty = vol_from(&[0.0; 16]);
        let ok = random_vol(5, 16, 1.0, 2.0);
        assert!(matches!(
            histogram_match(&empty, &ok, 16),
            Err(Error::EmptyForeground)
        ));
        assert!(matches!(
            histogram_match(&ok, &empty, 16),
            Err(Error::EmptyForeground)
        ));
    }

    #[test]
    fn rescale_unit_three_values() {
        let out = rescale_unit(&vol_from(&[-1.0, 5e-9, 1.0])).unwrap();
        // use a tiny nonzero middle value: exact zero would be background
        assert_eq!(out.data()[0], 0.0);
        assert!((out.data()[1] - 0.5).abs() < 1e-6);
        assert_eq!(out.data()[2], 1.0);
    }

    #[test]
    fn rescale_unit_is_identity_on_unit_extremes() {
        let vol = vol_from(&[1.0, 0.25, 0.5, 1e-5]);
        let out = rescale_unit(&vol).unwrap();
        for (a, b) in vol.data().iter().zip(out.data()) {
            assert!((a - (b * (1.0 - 1e-5) + 1e-5)).abs() < 1e-4);
        }
        let v01 = vol_from(&[1e-30, 0.3, 1.0]);
        let out = rescale_unit(&v01).unwrap();
        assert!((out.data()[1] - 0.3).abs() < 1e-6);
        assert_eq!(out.data()[2], 1.0);
    }

    #[test]
    fn rescale_unit_constant_is_degenerate() {
        assert!(matches!(
            rescale_unit(&vol_from(&[2.0; 6])),
            Err(Error::DegenerateIntensity(_))
        ));
    }

    fn random_case(seed: u64, n: usize) -> MultimodalVolume {
        stack_modalities(
            random_vol(seed, n, 10.0, 100.0),
            random_vol(seed + 1, n, 5.0, 80.0),
            random_vol(seed + 2, n, 20.0, 200.0),
        )
        .unwrap()
    }

    #[test]
    fn preprocess_case_output_in_unit_range() {
        let cfg = PreprocessConfig::default();
        let reference = prepare_reference(&random_case(21, 3000), &cfg).unwrap();
        let out = preprocess_case(&random_case(33, 3000), &reference, &cfg).unwrap();
        for m in crate::volume::Modality::ALL {
            for &v in out.modality(m).data() {
                assert!((0.0..=1.0).contains(&v), "value {v} outside [0,1]");
            }
        }
    }

    #[test]
    fn preprocess_reference_against_itself_is_rescale() {
        let cfg = PreprocessConfig::default();
        let reference = prepare_reference(&random_case(55, 6000), &cfg).unwrap();
        let out = preprocess_case(&reference, &reference, &cfg).unwrap();
        for m in crate::volume::Modality::ALL {
            let expect = rescale_unit(reference.modality(m)).unwrap();
            let bin_width = 1.0 / cfg.hist_bins as f32;
            for (a, b) in out.modality(m).data().iter().zip(expect.data()) {
                assert!((a - b).abs() <= 2.0 * bin_width, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn preprocess_case_constant_modality_errors() {
        let cfg = PreprocessConfig::default();
        let reference = prepare_reference(&random_case(77, 1000), &cfg).unwrap();
        let n = 1000;
        let case = stack_modalities(
            vol_from(&vec![5.0; n]),
            random_vol(90, n, 5.0, 80.0),
            random_vol(91, n, 20.0, 200.0),
        )
        .unwrap();
        assert!(matches!(
            preprocess_case(&case, &reference, &cfg),
            Err(Error::DegenerateIntensity(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn quantile_matches_oracle(seed in 0u64..500, n in 2usize..400) {
            let vol = random_vol(seed, n, -3.0, 7.0);
            let mut sorted: Vec<f32> = vol.data().to_vec();
            sorted.sort_unstable_by(f32::total_cmp);
            for p in [0.0, 0.01, 0.1, 0.5, 0.9, 0.99, 1.0] {
                let got = quantile_sorted(&sorted, p);
                let want = oracle_quantile(vol.data(), p);
                prop_assert!((got - want).abs() < 1e-4);
            }
        }

        #[test]
        fn zscore_foreground_moments(seed in 0u64..500, n in 10usize..800) {
            let vol = random_vol(seed, n, 0.5, 20.0);
            let out = zscore_normalize(&vol).unwrap();
            let (mean, std) = foreground_mean_std(&out).unwrap();
            prop_assert!(mean.abs() < 1e-6 * n as f64);
            prop_assert!((std - 1.0).abs() < 1e-6);
        }

        #[test]
        fn histogram_match_is_monotone(sa in 0u64..200, sb in 0u64..200, n in 32usize..600) {
            let a = random_vol(sa, n, 0.1, 9.0);
            let b = random_vol(sb.wrapping_add(1000), n, 2.0, 4.0);
            let out = histogram_match(&a, &b, 32).unwrap();
            let mut pairs: Vec<(f32, f32)> = a
                .data()
                .iter()
                .copied()
                .zip(out.data().iter().copied())
                .filter(|&(x, _)| x != 0.0)
                .collect();
            pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
            for w in pairs.windows(2) {
                prop_assert!(w[0].1 <= w[1].1 + 1e-6);
            }
        }

        #[test]
        fn full_chain_range_contract(seed in 0u64..100) {
            let cfg = PreprocessConfig::default();
            let reference = prepare_reference(&random_case(seed, 1500), &cfg).unwrap();
            let case = random_case(seed + 7, 1500);
            let out = preprocess_case(&case, &reference, &cfg).unwrap();
            for m in crate::volume::Modality::ALL {
                for &v in out.modality(m).data() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
