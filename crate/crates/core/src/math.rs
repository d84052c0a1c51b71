//! Thin wrappers over `libm` plus a seeded standard-normal sampler.
//!
//! Routing every transcendental through `libm` keeps the crate `no_std` and
//! makes results bit-identical across platforms and optimization levels.

use rand::Rng;

pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}

/// One standard-normal draw via Box-Muller (two uniforms per call).
pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Open interval keeps ln(u) finite.
    let u: f64 = loop {
        let v = rng.random::<f64>();
        if v > 0.0 {
            break v;
        }
    };
    let v: f64 = rng.random();
    sqrt(-2.0 * ln(u)) * cos(2.0 * core::f64::consts::PI * v)
}

/// Deterministic 64-bit mixer (splitmix64 finalizer) for deriving
/// independent seed streams from a base seed.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        let mut z = h.wrapping_add(p).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z ^= z >> 27;
        z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        h = z;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = standard_normal(&mut rng);
            s += z;
            s2 += z * z;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn mix_seed_changes_with_any_part() {
        let a = mix_seed(&[1, 2, 3]);
        assert_ne!(a, mix_seed(&[1, 2, 4]));
        assert_ne!(a, mix_seed(&[0, 2, 3]));
        assert_eq!(a, mix_seed(&[1, 2, 3]));
    }
}
