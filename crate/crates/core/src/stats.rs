//! Small statistics helpers shared by the estimators.

use alloc::vec::Vec;

/// log base `q`.
#[inline]
pub fn log_q(x: f64, q: f64) -> f64 {
    libm::log(x) / libm::log(q)
}

/// h(p) = -p log2 p - (1-p) log2 (1-p).
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * libm::log2(x) };
    term(p) + term(1.0 - p)
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must be in (0, 1)");
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
    let lo = 0.02425;
    if p < lo {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Upper end of the Wilson score interval for a binomial proportion.
pub fn wilson_upper(successes: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * libm::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    ((centre + spread) / (1.0 + z2 / n)).min(1.0)
}

/// Type-1 empirical quantile of stopping times; `None` (timeout) sorts above
/// every finite value. Returns the smallest `x` with `F(x) ≥ p`.
pub fn quantile(values: &[Option<u32>], p: f64) -> Option<u32> {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted: Vec<Option<u32>> = values.to_vec();
    sorted.sort_by_key(|v| v.unwrap_or(u32::MAX));
    let rank = libm::ceil(p * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Fraction of values strictly greater than `bound` (timeouts always count).
pub fn exceedance(values: &[Option<u32>], bound: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let over = values
        .iter()
        .filter(|v| v.is_none_or(|x| x as f64 > bound))
        .count();
    over as f64 / values.len() as f64
}

/// Least squares slope of a line through the origin, with its standard
/// error and root-mean-square residual.
pub fn slope_through_origin(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    if sxx == 0.0 {
        return (0.0, f64::INFINITY, 0.0);
    }
    let slope = sxy / sxx;
    let sse: f64 = points
        .iter()
        .map(|(x, y)| {
            let r = y - slope * x;
            r * r
        })
        .sum();
    let m = points.len() as f64;
    let rms = libm::sqrt(sse / m);
    let se = if points.len() > 1 {
        libm::sqrt(sse / (m - 1.0) / sxx)
    } else {
        f64::INFINITY
    };
    (slope, se, rms)
}
