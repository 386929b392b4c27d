//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Runs the command line in-process; returns the exit code and stdout.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["ineqmn"];
    argv.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = ineqmn::cli::main_with_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// Runs a command with `--format json` and returns the report without timing.
pub fn run_json(args: &[&str]) -> Value {
    let mut full = args.to_vec();
    full.extend_from_slice(&["--format", "json"]);
    let (code, out, err) = run_cli(&full);
    assert_eq!(code, 0, "{:?} failed: {}", args, err);
    let mut v: Value = serde_json::from_str(&out).expect("report is JSON");
    v.as_object_mut().unwrap().remove("timing");
    v
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation.
pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the sample SD from `n` independent draws, using the
/// fourth central moment of `x`.
pub fn sd_se(x: &[f64], n: f64) -> f64 {
    let m = mean(x);
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / x.len() as f64;
    ((m4 - m2 * m2).max(0.0) / n).sqrt() / (2.0 * m2.sqrt())
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS test against a continuous CDF: `(D, p)`.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = x.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, ks_p(d, n))
}

/// Two-sample KS test: `(D, p)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    (d, ks_p(d, na * nb / (na + nb)))
}

#[cfg(test)]
mod tests {
    #[test]
    fn kolmogorov_reference_points() {
        // classical critical values: 1.358 at 5%, 1.628 at 1%
        assert!((super::kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((super::kolmogorov_q(1.628) - 0.01).abs() < 1e-3);
    }
}
