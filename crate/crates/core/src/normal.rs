//! Standard normal density, distribution and quantile functions.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, accurate in relative terms in the lower tail.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - cdf(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

// Acklam's rational approximation, relative error ~1.2e-9 before refinement.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn acklam_lower(p: f64) -> f64 {
    // valid for p <= 0.5
    const P_LOW: f64 = 0.024_25;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Lower-tail quantile for `p` in `(0, 0.5]`, refined by a Newton step on `cdf`.
fn ppf_lower(p: f64) -> f64 {
    let mut x = acklam_lower(p);
    for _ in 0..2 {
        let dens = pdf(x);
        if dens <= 0.0 {
            break;
        }
        let step = (cdf(x) - p) / dens;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Inverse standard normal CDF. Returns `-inf` / `+inf` at 0 / 1.
pub fn ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p <= 0.5 {
        ppf_lower(p)
    } else {
        -ppf_lower(1.0 - p)
    }
}

/// Quantile from an upper-tail probability: returns `x` with `sf(x) = q`.
pub fn isf(q: f64) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    if q >= 1.0 {
        return f64::NEG_INFINITY;
    }
    if q <= 0.5 {
        -ppf_lower(q)
    } else {
        ppf_lower(1.0 - q)
    }
}

/// `1 / (2 pi)`.
pub const INV_2PI: f64 = 1.0 / (2.0 * PI);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        assert_eq!(ppf(0.5), 0.0);
        assert!((ppf(0.8) - 0.841_621_233_572_914_3).abs() < 1e-14);
        assert!((ppf(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
        assert!((isf(1e-10) - 6.361_340_902_404_056).abs() < 1e-12);
    }

    #[test]
    fn round_trip_tails() {
        for &p in &[1e-300, 1e-100, 1e-20, 1e-8, 0.01, 0.3, 0.5] {
            let x = ppf(p);
            assert!(((cdf(x) - p) / p).abs() < 1e-13, "p={p}");
        }
        for &q in &[1e-15, 1e-6, 0.2] {
            let x = isf(q);
            assert!(((sf(x) - q) / q).abs() < 1e-13);
        }
    }
}
