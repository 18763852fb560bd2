//! Portable counter-based pseudo-random stream (SplitMix64).
//!
//! Every draw is a pure function of `(seed, counter)` with fixed constants,
//! so generated parts are bit-identical across platforms and runs, and any
//! vertex's noise can be addressed directly without sequencing.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Raw SplitMix64 output for an explicit counter.
pub fn at(seed: u64, counter: u64) -> u64 {
    mix64(seed.wrapping_add(counter.wrapping_mul(GAMMA)).wrapping_add(GAMMA))
}

/// Uniform in [0, 1) with 53-bit resolution.
pub fn unit(seed: u64, counter: u64) -> f64 {
    (at(seed, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box-Muller on two counters.
pub fn gaussian(seed: u64, counter: u64) -> f64 {
    let u1 = unit(seed, 2 * counter).max(f64::MIN_POSITIVE);
    let u2 = unit(seed, 2 * counter + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Sequential convenience wrapper over the counter stream.
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = at(self.seed, self.counter);
        self.counter += 1;
        v
    }

    pub fn next_unit(&mut self) -> f64 {
        let v = unit(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in [-1, 1).
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }

    pub fn next_gaussian(&mut self) -> f64 {
        let c = self.counter;
        self.counter += 1;
        gaussian(self.seed, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible_and_counter_addressable() {
        let mut rng = CounterRng::new(42);
        let seq: Vec<u64> = (0..5).map(|_| rng.next_u64()).collect();
        let direct: Vec<u64> = (0..5).map(|c| at(42, c)).collect();
        assert_eq!(seq, direct);
    }

    #[test]
    fn unit_values_are_in_range_and_spread() {
        let vals: Vec<f64> = (0..1000).map(|c| unit(7, c)).collect();
        assert!(vals.iter().all(|&v| (0.0..1.0).contains(&v)));
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 0.5).abs() < 0.05);
    }

    #[test]
    fn gaussian_moments_are_sane() {
        let n = 20000;
        let vals: Vec<f64> = (0..n).map(|c| gaussian(3, c)).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn fixed_values_pin_the_constants() {
        // frozen outputs: any change to the mixing constants breaks these
        assert_eq!(at(0, 0), 16294208416658607535);
        assert_eq!(at(1, 1), 13757245211066428519);
    }
}
