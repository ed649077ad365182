//! Quintic smoothstep and monotone transition profiles built from it.

/// `6t⁵ − 15t⁴ + 10t³` clamped to `[0, 1]`, with first and second derivatives.
pub fn smoothstep5(t: f64) -> [f64; 3] {
    if t <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let t2 = t * t;
    [
        t2 * t * (10.0 - 15.0 * t + 6.0 * t2),
        30.0 * t2 * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    ]
}

/// Profile equal to 1 below `lo`, 0 above `hi`, with derivatives in `x`.
pub fn step_down(x: f64, lo: f64, hi: f64) -> [f64; 3] {
    let w = hi - lo;
    let [s, s1, s2] = smoothstep5((x - lo) / w);
    [1.0 - s, -s1 / w, -s2 / (w * w)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_flat() {
        for t in [0.0, 1.0] {
            let [_, d1, d2] = smoothstep5(t);
            assert_eq!(d1, 0.0);
            assert_eq!(d2, 0.0);
        }
        assert_eq!(smoothstep5(0.5)[0], 0.5);
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-6;
        for t in [0.1, 0.37, 0.8] {
            let [_, d1, d2] = smoothstep5(t);
            let fd1 = (smoothstep5(t + h)[0] - smoothstep5(t - h)[0]) / (2.0 * h);
            let fd2 = (smoothstep5(t + h)[1] - smoothstep5(t - h)[1]) / (2.0 * h);
            assert!((d1 - fd1).abs() < 1e-8 && (d2 - fd2).abs() < 1e-6);
        }
    }
}
