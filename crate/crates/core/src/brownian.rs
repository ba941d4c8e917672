//! Seeded Wiener increments with exactly coupled coarse views.
//!
//! A [`BrownianPath`] is sampled once at its finest resolution. Coarser
//! resolutions are obtained by summing blocks of fine increments, so an
//! Euler run at step `h` and one at step `h/2` see the same realisation
//! of `W`. Block sums are taken along a fixed binary tree which is stored
//! alongside the increments; any two routes to the same sum (coarsening,
//! prefix values) therefore agree bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SddeError};

/// Identifies the random stream a path was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathRef {
    pub seed: u64,
    pub stream_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    t0: f64,
    t1: f64,
    source: Option<PathRef>,
    /// `pyramid[0]` holds the fine increments, `pyramid[l]` the sums of
    /// aligned blocks of `2^l` fine increments.
    pyramid: Vec<Vec<f64>>,
}

impl BrownianPath {
    /// Draws `fine_steps` i.i.d. `N(0, (t1 - t0) / fine_steps)` increments.
    ///
    /// The generator is ChaCha8 keyed by `seed` with `stream_id` selecting
    /// the stream, so any path can be regenerated on its own, in any order
    /// and on any thread.
    pub fn generate(
        seed: u64,
        stream_id: u64,
        t0: f64,
        t1: f64,
        fine_steps: usize,
    ) -> Result<Self> {
        check_interval(t0, t1)?;
        if !fine_steps.is_power_of_two() {
            return Err(SddeError::config(
                "fine_steps",
                format!("{fine_steps} is not a power of two"),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        let scale = ((t1 - t0) / fine_steps as f64).sqrt();
        let increments = (0..fine_steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        let mut path = Self::build(t0, t1, increments);
        path.source = Some(PathRef { seed, stream_id });
        Ok(path)
    }

    /// Wraps caller-supplied increments. The length must be a power of two.
    pub fn from_increments(t0: f64, t1: f64, increments: Vec<f64>) -> Result<Self> {
        check_interval(t0, t1)?;
        if !increments.len().is_power_of_two() {
            return Err(SddeError::config(
                "fine_steps",
                format!("{} is not a power of two", increments.len()),
            ));
        }
        Ok(Self::build(t0, t1, increments))
    }

    fn build(t0: f64, t1: f64, increments: Vec<f64>) -> Self {
        let mut pyramid = vec![increments];
        while pyramid.last().map_or(0, Vec::len) > 1 {
            let next = pyramid
                .last()
                .unwrap()
                .chunks_exact(2)
                .map(|pair| pair[0] + pair[1])
                .collect();
            pyramid.push(next);
        }
        BrownianPath {
            t0,
            t1,
            source: None,
            pyramid,
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn fine_steps(&self) -> usize {
        self.pyramid[0].len()
    }

    /// Fine step `(t1 - t0) / fine_steps`.
    pub fn fine_step(&self) -> f64 {
        (self.t1 - self.t0) / self.fine_steps() as f64
    }

    pub fn increments(&self) -> &[f64] {
        &self.pyramid[0]
    }

    /// `None` for paths built from explicit increments.
    pub fn source(&self) -> Option<PathRef> {
        self.source
    }

    /// Sums of consecutive blocks of `factor` fine increments.
    ///
    /// `factor` must be a power of two dividing `fine_steps`.
    pub fn coarsen(&self, factor: usize) -> Result<Vec<f64>> {
        Ok(self.coarse_view(factor)?.to_vec())
    }

    /// Borrowing variant of [`coarsen`](Self::coarsen).
    pub fn coarse_view(&self, factor: usize) -> Result<&[f64]> {
        if factor == 0 || !factor.is_power_of_two() || factor > self.fine_steps() {
            return Err(SddeError::config(
                "factor",
                format!(
                    "{factor} must be a power of two dividing fine_steps={}",
                    self.fine_steps()
                ),
            ));
        }
        Ok(&self.pyramid[factor.trailing_zeros() as usize])
    }

    /// The same path seen at `fine_steps / factor` steps. Sums are shared
    /// with `self`, so prefix values agree bit-for-bit at common points.
    pub fn coarsened(&self, factor: usize) -> Result<BrownianPath> {
        self.coarse_view(factor)?;
        Ok(BrownianPath {
            t0: self.t0,
            t1: self.t1,
            source: self.source,
            pyramid: self.pyramid[factor.trailing_zeros() as usize..].to_vec(),
        })
    }

    /// Increments at a grid of `steps` equal steps over `[t0, t1]`.
    pub fn increments_at(&self, steps: usize) -> Result<&[f64]> {
        if steps == 0 || !self.fine_steps().is_multiple_of(steps) {
            return Err(SddeError::config(
                "steps",
                format!("{steps} does not divide fine_steps={}", self.fine_steps()),
            ));
        }
        self.coarse_view(self.fine_steps() / steps)
    }

    /// `W` at fine grid index `grid_index`, i.e. the sum of the first
    /// `grid_index` increments.
    pub fn wiener_value(&self, grid_index: usize) -> Result<f64> {
        let n = self.fine_steps();
        if grid_index > n {
            return Err(SddeError::IndexOutOfRange {
                index: grid_index,
                max: n,
            });
        }
        // Aligned dyadic blocks, largest first, added left to right.
        let mut total = 0.0;
        let mut start = 0usize;
        let mut first = true;
        for level in (0..self.pyramid.len()).rev() {
            let width = 1usize << level;
            if grid_index - start >= width {
                let block = self.pyramid[level][start / width];
                total = if first { block } else { total + block };
                first = false;
                start += width;
            }
        }
        Ok(total)
    }

    /// `W` at every fine grid index `0..=fine_steps`.
    ///
    /// Element `k` is bit-identical to `wiener_value(k)`.
    pub fn wiener_values(&self) -> Vec<f64> {
        let n = self.fine_steps();
        let mut w = vec![0.0; n + 1];
        for k in 1..=n {
            let low = k & k.wrapping_neg();
            let level = low.trailing_zeros() as usize;
            let block = self.pyramid[level][(k - low) / low];
            w[k] = if k == low { block } else { w[k - low] + block };
        }
        w
    }
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(SddeError::config(
            "t1",
            format!("interval [{t0}, {t1}] must satisfy t1 > t0"),
        ));
    }
    Ok(())
}

/// Sum along a balanced binary tree; for power-of-two lengths this is the
/// association used by [`BrownianPath`].
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let mid = n.next_power_of_two() / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn small() -> BrownianPath {
        BrownianPath::from_increments(0.0, 1.0, vec![0.1, -0.2, 0.3, 0.4]).unwrap()
    }

    #[test]
    fn starts_at_zero() {
        let path = BrownianPath::generate(99, 5, 0.0, 2.0, 64).unwrap();
        assert_eq!(path.wiener_value(0).unwrap(), 0.0);
        assert_eq!(path.wiener_values()[0], 0.0);
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = BrownianPath::generate(7, 3, 0.0, 1.0, 256).unwrap();
        let b = BrownianPath::generate(7, 3, 0.0, 1.0, 256).unwrap();
        assert_eq!(a.increments(), b.increments());
        let c = BrownianPath::generate(7, 4, 0.0, 1.0, 256).unwrap();
        assert_ne!(a.increments(), c.increments());
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(
            BrownianPath::generate(1, 0, 0.0, 1.0, 12),
            Err(SddeError::Config { .. })
        ));
        assert!(BrownianPath::generate(1, 0, 1.0, 1.0, 8).is_err());
    }

    #[test]
    fn coarsen_examples() {
        let path = small();
        assert_eq!(path.coarsen(1).unwrap(), path.increments());
        let pairs = path.coarsen(2).unwrap();
        assert_eq!(pairs.len(), 2);
        assert!((pairs[0] + 0.1).abs() < 1e-15);
        assert!((pairs[1] - 0.7).abs() < 1e-15);
        let all = path.coarsen(4).unwrap();
        assert_eq!(all, vec![path.wiener_value(4).unwrap()]);
        assert!(path.coarsen(3).is_err());
        assert!(path.coarsen(8).is_err());
    }

    #[test]
    fn wiener_value_examples() {
        let path = BrownianPath::from_increments(0.0, 1.0, vec![0.5, -0.25]).unwrap();
        assert_eq!(path.wiener_value(0).unwrap(), 0.0);
        assert_eq!(path.wiener_value(2).unwrap(), 0.25);
        assert!(matches!(
            path.wiener_value(3),
            Err(SddeError::IndexOutOfRange { index: 3, max: 2 })
        ));
    }

    #[test]
    fn increments_are_gaussian_with_fine_variance() {
        // 2^17 increments of variance 2^-14.
        let n = 1usize << 17;
        let h = 2f64.powi(-14);
        let path = BrownianPath::generate(1, 0, 0.0, h * n as f64, n).unwrap();
        let xs = path.increments();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        assert!(mean.abs() < 4.0 * h.sqrt() / nf.sqrt(), "mean {mean}");

        // (n-1) s^2 / sigma^2 ~ chi^2(n-1)
        let chi = ChiSquared::new(nf - 1.0).unwrap();
        let lo = chi.inverse_cdf(0.0005) * h / (nf - 1.0);
        let hi = chi.inverse_cdf(0.9995) * h / (nf - 1.0);
        assert!(lo < var && var < hi, "{lo} < {var} < {hi}");
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let n = 1usize << 17;
        let a = BrownianPath::generate(11, 0, 0.0, 1.0, n).unwrap();
        let b = BrownianPath::generate(11, 1, 0.0, 1.0, n).unwrap();
        let dot: f64 = a
            .increments()
            .iter()
            .zip(b.increments())
            .map(|(x, y)| x * y)
            .sum();
        let na: f64 = a.increments().iter().map(|x| x * x).sum();
        let nb: f64 = b.increments().iter().map(|x| x * x).sum();
        let rho = dot / (na * nb).sqrt();
        assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "rho {rho}");
    }

    proptest! {
        #[test]
        fn coupling_is_bit_exact(seed in any::<u64>(), stream in 0u64..1000, log_n in 0u32..10) {
            let n = 1usize << log_n;
            let path = BrownianPath::generate(seed, stream, 0.0, 1.0, n).unwrap();
            let w_end = path.wiener_value(n).unwrap();
            let prefix = path.wiener_values();
            for log_f in 0..=log_n {
                let f = 1usize << log_f;
                let coarse = path.coarsen(f).unwrap();
                prop_assert_eq!(pairwise_sum(&coarse).to_bits(), w_end.to_bits());
                // coarse grid values agree with fine prefix values
                let mut w = 0.0;
                for (k, dw) in coarse.iter().enumerate() {
                    let _ = dw;
                    w = path.wiener_value((k + 1) * f).unwrap();
                    prop_assert_eq!(w.to_bits(), prefix[(k + 1) * f].to_bits());
                }
                prop_assert_eq!(w.to_bits(), w_end.to_bits());
            }
        }
    }
}
