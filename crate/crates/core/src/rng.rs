//! Small sampling helpers over a caller-provided [`RngCore`]. Keeping the
//! generator outside the crate makes every synthesis step reproducible
//! from a seed.

use num_complex::Complex64;
use rand_core::RngCore;

/// Uniform sample in `[0, 1)` with 53-bit resolution.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Uniform sample in `[lo, hi)`.
pub fn uniform_range<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform(rng)
}

/// Pair of independent standard normal samples (Box-Muller).
pub fn standard_normal_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u1 = uniform(rng);
        if u1 <= 1e-300 {
            continue;
        }
        let u2 = uniform(rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let a = 2.0 * core::f64::consts::PI * u2;
        return (r * a.cos(), r * a.sin());
    }
}

/// Zero-mean circular complex Gaussian with total variance `variance`
/// (each real component carries `variance / 2`).
pub fn complex_gaussian<R: RngCore + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let (g1, g2) = standard_normal_pair(rng);
    let s = (variance * 0.5).sqrt();
    Complex64::new(g1 * s, g2 * s)
}

/// Random unit-modulus phase factor.
pub fn unit_phase<R: RngCore + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(
        1.0,
        uniform_range(rng, -core::f64::consts::PI, core::f64::consts::PI),
    )
}
