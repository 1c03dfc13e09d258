//! Standard normal quantile function.
//!
//! Acklam's rational approximation (relative error below 1.15e-9 over the
//! whole open interval), evaluated piecewise on the lower tail, the central
//! region and the upper tail.

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
const P_LOW: f64 = 0.024_25;

fn tail(q: f64) -> f64 {
    let num = ((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5];
    let den = (((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0;
    num / den
}

/// Inverse of the standard normal CDF. Returns NaN outside `(0, 1)`.
pub fn inverse_cdf(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    if p == 0.5 {
        return 0.0;
    }
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        let num = ((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5];
        let den = ((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0;
        q * num / den
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // 30-digit reference quantiles (sqrt(2) * erfinv(2p - 1), mpmath).
    const REFERENCE: &[(f64, f64)] = &[
        (0.001, -3.090_232_306_167_813_5),
        (0.024_25, -1.972_961_051_311_884_9),
        (0.1, -1.281_551_565_544_600_5),
        (0.3, -0.524_400_512_708_040_8),
        (0.6, 0.253_347_103_135_799_8),
        (0.8, 0.841_621_233_572_914_2),
        (0.9, 1.281_551_565_544_600_5),
        (0.95, 1.644_853_626_951_472_7),
        (0.975, 1.959_963_984_540_054_2),
        (0.999, 3.090_232_306_167_813_5),
    ];

    #[test]
    fn matches_reference_quantiles() {
        for &(p, z) in REFERENCE {
            let got = inverse_cdf(p);
            assert!((got - z).abs() <= 1e-8, "p={p}: {got} vs {z}");
        }
    }

    #[test]
    fn rejects_closed_endpoints() {
        assert!(inverse_cdf(0.0).is_nan());
        assert!(inverse_cdf(1.0).is_nan());
        assert!(inverse_cdf(-0.2).is_nan());
        assert!(inverse_cdf(f64::NAN).is_nan());
    }
}
