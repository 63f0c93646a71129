//! Damped-cosine fitting and oscillation visibility.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::mc::{map_indexed, mean_stderr, Domain, TraceResult};
use crate::{Error, Result};

/// `F(t) = (1 − a) + a e^{−t/τ} cos(Ω t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitModel {
    pub a: f64,
    pub tau: f64,
    pub omega: f64,
}

impl FitModel {
    pub fn eval(&self, t: f64) -> f64 {
        (1.0 - self.a) + self.a * (-t / self.tau).exp() * (self.omega * t).cos()
    }

    /// `(∂F/∂a, ∂F/∂τ, ∂F/∂Ω)`.
    pub fn gradient(&self, t: f64) -> Vector3<f64> {
        let e = (-t / self.tau).exp();
        let (s, c) = (self.omega * t).sin_cos();
        Vector3::new(e * c - 1.0, self.a * e * c * t / (self.tau * self.tau), -self.a * e * t * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    NotConverged,
    /// The data carry no oscillation; Ω is not identifiable.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    /// Standard errors of `(a, τ, Ω)`.
    pub errors: [f64; 3],
    pub residual_rms: f64,
    pub status: FitStatus,
    pub iterations: usize,
    /// Norm of the weighted least-squares gradient at the start and at the result.
    pub initial_gradient: f64,
    pub final_gradient: f64,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

const MAX_ITER: usize = 500;
const MULTI_START: [f64; 3] = [0.5, 1.0, 2.0];

struct Problem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn chi2(&self, m: &FitModel) -> f64 {
        self.t
            .iter()
            .zip(self.y)
            .zip(&self.w)
            .map(|((&t, &y), &w)| w * (y - m.eval(t)).powi(2))
            .sum()
    }

    /// `JᵀWJ` and `JᵀW r` with `r = y − F`.
    fn normal_equations(&self, m: &FitModel) -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((&t, &y), &w) in self.t.iter().zip(self.y).zip(&self.w) {
            let g = m.gradient(t);
            jtj += g * g.transpose() * w;
            jtr += g * (w * (y - m.eval(t)));
        }
        (jtj, jtr)
    }
}

fn in_bounds(m: &FitModel, bracket: (f64, f64)) -> bool {
    (0.0..=1.0).contains(&m.a) && m.tau > 0.0 && m.tau.is_finite() && m.omega >= bracket.0 && m.omega <= bracket.1
}

/// Levenberg-Marquardt with diagonal (scale-invariant) damping.
fn levenberg_marquardt(p: &Problem, start: FitModel, bracket: (f64, f64)) -> (FitModel, f64, usize, bool) {
    let mut m = start;
    let mut chi = p.chi2(&m);
    let mut lambda = 1e-3;
    for it in 0..MAX_ITER {
        let (jtj, jtr) = p.normal_equations(&m);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] *= 1.0 + lambda;
                a[(k, k)] += 1e-300;
            }
            let Some(step) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = FitModel { a: m.a + step[0], tau: m.tau + step[1], omega: m.omega + step[2] };
            if in_bounds(&trial, bracket) {
                let c = p.chi2(&trial);
                if c <= chi {
                    let rel_step = (step[0].abs() / m.a.abs().max(1e-3))
                        .max(step[1].abs() / m.tau)
                        .max(step[2].abs() / m.omega);
                    let small = chi - c <= 1e-15 * chi.max(1e-300) && rel_step < 1e-10;
                    m = trial;
                    chi = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if small {
                        return (m, chi, it + 1, true);
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: a stationary point
            return (m, chi, it + 1, true);
        }
    }
    (m, chi, MAX_ITER, false)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Crossing times of `y − mean(y)` by linear interpolation.
fn zero_crossings(t: &[f64], y: &[f64]) -> Vec<f64> {
    let m = mean(y);
    let mut out = Vec::new();
    for i in 1..y.len() {
        let (a, b) = (y[i - 1] - m, y[i] - m);
        if (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0) {
            out.push(t[i - 1] + (t[i] - t[i - 1]) * a / (a - b));
        }
    }
    out
}

/// Initial `(a, τ, Ω)` from the data shape.
fn initial_guess(t: &[f64], y: &[f64]) -> Option<FitModel> {
    let z = zero_crossings(t, y);
    if z.len() < 2 {
        return None;
    }
    let half_period = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
    if !(half_period > 0.0) {
        return None;
    }
    let omega = std::f64::consts::PI / half_period;
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let a = (0.5 * (hi - lo)).clamp(1e-3, 1.0);
    // envelope from the largest excursion per half period
    let centre = 1.0 - a;
    let span = t[t.len() - 1] - t[0];
    let mut pts = Vec::new();
    let mut k = 0;
    loop {
        let (t0, t1) = (t[0] + k as f64 * half_period, t[0] + (k + 1) as f64 * half_period);
        if t0 > t[t.len() - 1] {
            break;
        }
        let best = t
            .iter()
            .zip(y)
            .filter(|(&ti, _)| ti >= t0 && ti < t1)
            .map(|(&ti, &yi)| (ti, (yi - centre).abs()))
            .fold(None, |acc: Option<(f64, f64)>, v| match acc {
                Some(b) if b.1 >= v.1 => Some(b),
                _ => Some(v),
            });
        if let Some((ti, amp)) = best {
            if amp > 0.0 {
                pts.push((ti, amp.ln()));
            }
        }
        k += 1;
    }
    let tau = if pts.len() >= 2 {
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let slope = sxy / sxx;
        if slope < 0.0 { (-1.0 / slope).min(100.0 * span) } else { 10.0 * span }
    } else {
        10.0 * span
    };
    Some(FitModel { a, tau, omega })
}

/// Weighted least-squares fit of [`FitModel`].
///
/// Requires at least 8 points spanning at least 1.5 periods of the initial
/// frequency estimate. Flat data return a `Degenerate` result rather than an
/// error.
pub fn fit_damped_cosine(t: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<FitResult> {
    if t.len() != y.len() || sigma.is_some_and(|s| s.len() != t.len()) {
        return Err(Error::Domain("t, y and sigma must have equal lengths".into()));
    }
    if t.len() < 8 {
        return Err(Error::Domain(format!("fit needs at least 8 points, got {}", t.len())));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("times must be finite and increasing; values finite".into()));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => {
            if s.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::Domain("sigma must be positive".into()));
            }
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; t.len()],
    };

    // work in units of the time span so that step damping is well scaled
    let span = t[t.len() - 1] - t[0];
    let ts: Vec<f64> = t.iter().map(|v| v / span).collect();
    let p = Problem { t: &ts, y, w };

    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let flat = hi - lo <= 1e-9 * hi.abs().max(1.0);
    let guess = if flat { None } else { initial_guess(&ts, y) };
    let Some(guess) = guess else {
        let rms = (p.chi2(&FitModel { a: 0.0, tau: 1.0, omega: 1.0 }) / t.len() as f64).sqrt();
        return Ok(FitResult {
            model: FitModel { a: 0.0, tau: f64::INFINITY, omega: f64::NAN },
            errors: [f64::NAN; 3],
            residual_rms: rms,
            status: FitStatus::Degenerate,
            iterations: 0,
            initial_gradient: 0.0,
            final_gradient: 0.0,
        });
    };
    let periods = guess.omega / (2.0 * std::f64::consts::PI);
    if periods < 1.5 {
        return Err(Error::Domain(format!(
            "data span {periods:.2} oscillation periods; at least 1.5 are needed"
        )));
    }

    let bracket = (guess.omega * 0.25, guess.omega * 4.0);
    let initial_gradient = p.normal_equations(&guess).1.norm();
    let mut best: Option<(FitModel, f64, usize, bool)> = None;
    for f in MULTI_START {
        let start = FitModel { omega: guess.omega * f, ..guess };
        let r = levenberg_marquardt(&p, start, bracket);
        best = match best {
            None => Some(r),
            Some(b) => {
                let tie = (r.1 - b.1).abs() <= 1e-12 * b.1.max(1e-300);
                if r.1 < b.1 && !tie || tie && r.0.omega < b.0.omega { Some(r) } else { Some(b) }
            }
        };
    }
    let (m, chi, iterations, ok) = best.expect("at least one start");

    let (jtj, jtr) = p.normal_equations(&m);
    let dof = (t.len() as f64 - 3.0).max(1.0);
    let scale = if sigma.is_some() { 1.0 } else { chi / dof };
    let cov = jtj.try_inverse();
    let unit = [1.0, span, 1.0 / span];
    let errors = match cov {
        Some(c) => [0, 1, 2].map(|k| (c[(k, k)] * scale).max(0.0).sqrt() * unit[k]),
        None => [f64::NAN; 3],
    };
    let finite = errors.iter().all(|e| e.is_finite());
    let status = if m.a < 1e-6 {
        FitStatus::Degenerate
    } else if ok && finite {
        FitStatus::Converged
    } else {
        FitStatus::NotConverged
    };
    let rms = (ts.iter().zip(y).map(|(&ti, &yi)| (yi - m.eval(ti)).powi(2)).sum::<f64>() / t.len() as f64).sqrt();
    Ok(FitResult {
        model: FitModel { a: m.a, tau: m.tau * span, omega: m.omega / span },
        errors,
        residual_rms: rms,
        status,
        iterations,
        initial_gradient,
        final_gradient: jtr.norm(),
    })
}

/// Boxcar average over a full width `width` centred on each sample.
pub fn smooth(t: &[f64], y: &[f64], width: f64) -> Vec<f64> {
    let half = 0.5 * width;
    let mut lo = 0usize;
    let mut hi = 0usize;
    t.iter()
        .map(|&ti| {
            while t[lo] < ti - half {
                lo += 1;
            }
            while hi < t.len() && t[hi] <= ti + half {
                hi += 1;
            }
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// `(max − min)/(max + min)` of the signal smoothed over `period/8`, within
/// `[t₀, t₀ + periods·period]`.
pub fn visibility(t: &[f64], y: &[f64], period: f64, periods: f64) -> Result<f64> {
    if t.len() != y.len() || t.is_empty() {
        return Err(Error::Domain("t and y must be non-empty with equal lengths".into()));
    }
    if !(period > 0.0) || periods < 1.0 {
        return Err(Error::Domain("visibility window must cover at least one period".into()));
    }
    let end = t[0] + periods * period;
    let span_end = t[t.len() - 1];
    if end > span_end + 1e-9 * period {
        return Err(Error::Domain(format!(
            "visibility window ends at {end:e} beyond the data span {span_end:e}"
        )));
    }
    let s = smooth(t, y, period / 8.0);
    let (lo, hi) = t
        .iter()
        .zip(&s)
        .filter(|(&ti, _)| ti <= end + 1e-9 * period)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (_, &v)| (l.min(v), h.max(v)));
    if hi + lo == 0.0 {
        return Ok(0.0);
    }
    Ok((hi - lo) / (hi + lo))
}

/// Visibility of the mean of `rows` and its bootstrap standard error over rows.
pub fn bootstrap_visibility(t: &[f64], rows: &[Vec<f64>], period: f64, periods: f64, resamples: usize, seed: u64) -> Result<(f64, f64)> {
    if rows.len() < 2 || resamples < 2 {
        return Err(Error::Domain("bootstrap needs at least two rows and two resamples".into()));
    }
    let point = visibility(t, &TraceResult::from_samples(t.to_vec(), rows).signal, period, periods)?;
    let draws: Result<Vec<f64>> = map_indexed(seed, Domain::Bootstrap, resamples, |_, rng| {
        let pick: Vec<Vec<f64>> = (0..rows.len()).map(|_| rows[rng.random_range(0..rows.len())].clone()).collect();
        visibility(t, &TraceResult::from_samples(t.to_vec(), &pick).signal, period, periods)
    })
    .into_iter()
    .collect();
    let draws = draws?;
    let (_, se) = mean_stderr(&draws);
    Ok((point, se * (draws.len() as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    const TRUTH: FitModel = FitModel { a: 0.85, tau: 8e-6, omega: 2.0 * PI * 0.49e6 };

    fn grid(n: usize, t_max: f64) -> Vec<f64> {
        (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let t = grid(81, 8e-6);
        let y: Vec<f64> = t.iter().map(|&x| TRUTH.eval(x)).collect();
        let r = fit_damped_cosine(&t, &y, None).unwrap();
        assert!(r.converged(), "{r:?}");
        assert!((r.model.a / TRUTH.a - 1.0).abs() < 1e-6);
        assert!((r.model.tau / TRUTH.tau - 1.0).abs() < 1e-6);
        assert!((r.model.omega / TRUTH.omega - 1.0).abs() < 1e-6);
        assert!(r.final_gradient <= 1e-6 * r.initial_gradient);
    }

    #[test]
    fn model_at_zero_is_one() {
        assert_eq!(TRUTH.eval(0.0), 1.0);
    }

    #[test]
    fn flat_line_is_degenerate() {
        let t = grid(40, 8e-6);
        let r = fit_damped_cosine(&t, &vec![1.0; 40], None).unwrap();
        assert_eq!(r.status, FitStatus::Degenerate);
    }

    #[test]
    fn short_span_rejected() {
        let t = grid(40, 1.5e-6);
        let y: Vec<f64> = t.iter().map(|&x| TRUTH.eval(x)).collect();
        assert!(fit_damped_cosine(&t, &y, None).is_err());
        assert!(fit_damped_cosine(&t[..5], &y[..5], None).is_err());
    }

    #[test]
    fn unit_change_invariance() {
        let t = grid(60, 8e-6);
        let y: Vec<f64> = t.iter().map(|&x| TRUTH.eval(x) + 0.01 * (x * 1.7e7).sin()).collect();
        let s = fit_damped_cosine(&t, &y, None).unwrap();
        let t_us: Vec<f64> = t.iter().map(|v| v * 1e6).collect();
        let u = fit_damped_cosine(&t_us, &y, None).unwrap();
        assert!((u.model.tau * 1e-6 / s.model.tau - 1.0).abs() < 1e-8);
        assert!((u.model.omega * 1e6 / s.model.omega - 1.0).abs() < 1e-8);
        assert!((u.model.a - s.model.a).abs() < 1e-8);
    }

    #[test]
    fn noisy_calibration() {
        // σ = 0.05 per point, 100 seeds; medians of the relative errors
        let t = grid(41, 8e-6);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut om = Vec::new();
        let mut tau = Vec::new();
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = t.iter().map(|&x| TRUTH.eval(x) + noise.sample(&mut rng)).collect();
            let r = fit_damped_cosine(&t, &y, Some(&vec![0.05; t.len()])).unwrap();
            om.push((r.model.omega / TRUTH.omega - 1.0).abs());
            tau.push((r.model.tau / TRUTH.tau - 1.0).abs());
        }
        om.sort_by(f64::total_cmp);
        tau.sort_by(f64::total_cmp);
        assert!(om[50] < 0.02, "{}", om[50]);
        assert!(tau[50] < 0.25, "{}", tau[50]);
    }

    #[test]
    fn bootstrap_error_shrinks_with_rows() {
        let t = grid(81, 8e-6);
        let period = 2.0 * PI / TRUTH.omega;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.2).unwrap();
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| t.iter().map(|&x| TRUTH.eval(x) + noise.sample(&mut rng)).collect())
            .collect();
        let (v_small, e_small) = bootstrap_visibility(&t, &rows[..100], period, 2.0, 200, 1).unwrap();
        let (v_big, e_big) = bootstrap_visibility(&t, &rows, period, 2.0, 200, 1).unwrap();
        assert!(e_big < e_small);
        assert!((v_big - v_small).abs() < 4.0 * e_small);
        assert!(bootstrap_visibility(&t, &rows[..1], period, 2.0, 200, 1).is_err());
    }

    #[test]
    fn visibility_limits() {
        let period = 2e-6;
        let t = grid(400, 8e-6);
        let y: Vec<f64> = t.iter().map(|&x| 0.5 * (1.0 + (2.0 * PI * x / period).cos())).collect();
        let v = visibility(&t, &y, period, 2.0).unwrap();
        // smoothing over period/8 slightly lowers the extrema
        assert!(v > 0.95, "{v}");
        assert!(visibility(&t, &vec![0.7; 400], period, 2.0).unwrap().abs() < 1e-14);
        assert!(visibility(&t, &y, period, 5.0).is_err());
        assert!(visibility(&t, &y, period, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(a in 0.05f64..1.0, tau in 0.5f64..20.0, om in 0.5f64..10.0, t in 0.0f64..10.0) {
            let m = FitModel { a, tau, omega: om };
            let g = m.gradient(t);
            let fd = |k: usize| {
                let h = 1e-6 * [a, tau, om][k];
                let mut p = [a, tau, om];
                let mut q = p;
                p[k] += h;
                q[k] -= h;
                let mk = |v: [f64; 3]| FitModel { a: v[0], tau: v[1], omega: v[2] }.eval(t);
                (mk(p) - mk(q)) / (2.0 * h)
            };
            for k in 0..3 {
                let d = fd(k);
                prop_assert!((g[k] - d).abs() <= 1e-6 * g[k].abs().max(1e-3));
            }
        }

        #[test]
        fn model_bounded(a in 0.0f64..1.0, tau in 0.1f64..20.0, om in 0.1f64..10.0, t in 0.0f64..10.0) {
            let v = FitModel { a, tau, omega: om }.eval(t);
            prop_assert!(v <= 1.0 + 1e-15 && v >= 1.0 - 2.0 * a - 1e-15);
        }
    }
}
