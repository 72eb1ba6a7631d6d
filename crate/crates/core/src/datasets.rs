//! Benchmark series generators, min-max scaling, and sliding windows.
//!
//! All generators are deterministic given their parameters (and seed, for the
//! NARMA family). Scaling statistics come from the train portion only — the
//! first two thirds of the series — so the test segment never leaks into
//! normalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// The five benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    Bessel,
    DampedShm,
    DelayedControl,
    Narma5,
    Narma10,
}

impl SeriesKind {
    pub fn label(self) -> &'static str {
        match self {
            SeriesKind::Bessel => "bessel",
            SeriesKind::DampedShm => "damped-shm",
            SeriesKind::DelayedControl => "delayed-qc",
            SeriesKind::Narma5 => "narma5",
            SeriesKind::Narma10 => "narma10",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "bessel" => Some(SeriesKind::Bessel),
            "damped-shm" => Some(SeriesKind::DampedShm),
            "delayed-qc" => Some(SeriesKind::DelayedControl),
            "narma5" => Some(SeriesKind::Narma5),
            "narma10" => Some(SeriesKind::Narma10),
            _ => None,
        }
    }

    pub fn all() -> [SeriesKind; 5] {
        [
            SeriesKind::Bessel,
            SeriesKind::DampedShm,
            SeriesKind::DelayedControl,
            SeriesKind::Narma5,
            SeriesKind::Narma10,
        ]
    }
}

/// A raw generated series with its time grid and a human-readable record of
/// the generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub kind: SeriesKind,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub descriptor: String,
}

/// Train/test membership of a window (tagged by its target index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Test,
}

impl SplitTag {
    pub fn label(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        }
    }
}

/// One supervised example: the `n` scaled values preceding the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesWindow {
    pub inputs: Vec<f64>,
    pub target: f64,
    pub target_index: usize,
    pub split: SplitTag,
}

/// A scaled series together with its extracted windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSeries {
    pub series: Series,
    pub scaled: Vec<f64>,
    /// Indices `< train_len` belong to the train portion.
    pub train_len: usize,
    pub window_len: usize,
    pub windows: Vec<SeriesWindow>,
}

const MIN_POINTS: usize = 20;

fn check_length(n_points: usize) -> Result<()> {
    if n_points < MIN_POINTS {
        return Err(CoreError::Generation(format!(
            "series needs at least {MIN_POINTS} points, got {n_points}"
        )));
    }
    Ok(())
}

/// Second-order Bessel function of the first kind via its power series,
/// truncated once a term drops below 1e-15 in magnitude.
pub fn bessel_j2(t: f64) -> f64 {
    let half = t / 2.0;
    let x2 = half * half;
    // m = 0 term: (t/2)^2 / (0! * 2!)
    let mut term = x2 / 2.0;
    let mut sum = term;
    let mut m = 1.0;
    while term.abs() >= 1e-15 {
        term *= -x2 / (m * (m + 2.0));
        sum += term;
        m += 1.0;
        if m > 200.0 {
            break;
        }
    }
    sum
}

/// `J_2` sampled on a uniform grid over `[0, t_max]`.
pub fn gen_bessel(n_points: usize, t_max: f64) -> Result<Series> {
    check_length(n_points)?;
    let step = t_max / (n_points - 1) as f64;
    let t_grid: Vec<f64> = (0..n_points).map(|i| i as f64 * step).collect();
    let values = t_grid.iter().map(|&t| bessel_j2(t)).collect();
    Ok(Series {
        kind: SeriesKind::Bessel,
        t_grid,
        values,
        descriptor: format!("task=bessel n_points={n_points} t_max={t_max}"),
    })
}

/// `exp(-gamma t) cos(omega t)` on a uniform grid over `[0, t_max]`.
pub fn gen_damped_shm(n_points: usize, gamma: f64, omega: f64, t_max: f64) -> Result<Series> {
    check_length(n_points)?;
    if gamma <= 0.0 || omega <= 0.0 {
        return Err(CoreError::Generation(format!(
            "damped oscillator needs positive gamma and omega, got {gamma}, {omega}"
        )));
    }
    let step = t_max / (n_points - 1) as f64;
    let t_grid: Vec<f64> = (0..n_points).map(|i| i as f64 * step).collect();
    let values = t_grid
        .iter()
        .map(|&t| (-gamma * t).exp() * (omega * t).cos())
        .collect();
    Ok(Series {
        kind: SeriesKind::DampedShm,
        t_grid,
        values,
        descriptor: format!(
            "task=damped-shm n_points={n_points} gamma={gamma} omega={omega} t_max={t_max}"
        ),
    })
}

/// Delayed-feedback dynamics: `x'(t) = a x(t) + b x(t - tau)` with
/// `a = -0.1`, `b = -0.5`, `tau = 10`, and constant history `x(t <= 0) = 1`.
pub const DELAYED_A: f64 = -0.1;
pub const DELAYED_B: f64 = -0.5;
pub const DELAYED_TAU: f64 = 10.0;

/// Integrate the delayed-feedback system by fixed-step RK4 and sample every
/// unit of time. The delayed value at stage times is cubic-Hermite
/// interpolated from the stored grid values and derivatives.
pub(crate) fn integrate_delayed_feedback(n_points: usize, step: f64) -> Vec<f64> {
    let per_unit = (1.0 / step).round() as usize;
    let total_steps = (n_points - 1) * per_unit;

    let mut xs: Vec<f64> = Vec::with_capacity(total_steps + 1);
    let mut ds: Vec<f64> = Vec::with_capacity(total_steps + 1);

    // Delayed lookup: constant history for s <= 0, Hermite interpolation on
    // the computed grid otherwise.
    let delayed = |xs: &[f64], ds: &[f64], s: f64| -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        let j = (s / step).floor() as usize;
        let j = j.min(xs.len().saturating_sub(2));
        let u = s / step - j as f64;
        if u == 0.0 {
            return xs[j];
        }
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * xs[j] + h10 * step * ds[j] + h01 * xs[j + 1] + h11 * step * ds[j + 1]
    };

    xs.push(1.0);
    ds.push(DELAYED_A * 1.0 + DELAYED_B * 1.0);

    for k in 0..total_steps {
        let t = k as f64 * step;
        let x = xs[k];
        let f = |s: f64, y: f64, xs: &[f64], ds: &[f64]| -> f64 {
            DELAYED_A * y + DELAYED_B * delayed(xs, ds, s - DELAYED_TAU)
        };
        let k1 = f(t, x, &xs, &ds);
        let k2 = f(t + step / 2.0, x + step * k1 / 2.0, &xs, &ds);
        let k3 = f(t + step / 2.0, x + step * k2 / 2.0, &xs, &ds);
        let k4 = f(t + step, x + step * k3, &xs, &ds);
        let x_next = x + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        xs.push(x_next);
        let t_next = (k + 1) as f64 * step;
        let d_next = DELAYED_A * x_next + DELAYED_B * delayed(&xs, &ds, t_next - DELAYED_TAU);
        ds.push(d_next);
    }

    (0..n_points).map(|i| xs[i * per_unit]).collect()
}

/// The delayed-feedback control series sampled at unit times, integrated with
/// step 0.1.
pub fn gen_delayed_quantum_control(n_points: usize) -> Result<Series> {
    check_length(n_points)?;
    let values = integrate_delayed_feedback(n_points, 0.1);
    Ok(Series {
        kind: SeriesKind::DelayedControl,
        t_grid: (0..n_points).map(|i| i as f64).collect(),
        values,
        descriptor: format!(
            "task=delayed-qc n_points={n_points} a={DELAYED_A} b={DELAYED_B} tau={DELAYED_TAU} rk4_step=0.1"
        ),
    })
}

/// Seeded i.i.d. inputs on `[0, 0.5]` for the NARMA recurrences.
pub fn narma_inputs(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0.0..0.5)).collect()
}

/// The NARMA recurrence of the given order over an explicit input sequence,
/// with `y` and `u` zero-padded for negative time:
///
/// ```text
/// y[t+1] = 0.3 y[t] + 0.05 y[t] (sum_{i=0}^{order-1} y[t-i]) + 1.5 u[t-order+1] u[t] + 0.1
/// ```
pub fn narma_recurrence(order: usize, u: &[f64]) -> Result<Vec<f64>> {
    if order != 5 && order != 10 {
        return Err(CoreError::Generation(format!(
            "unsupported NARMA order {order}"
        )));
    }
    let n = u.len();
    let mut y = vec![0.0; n];
    for t in 0..n.saturating_sub(1) {
        let mut lag_sum = 0.0;
        for i in 0..order {
            if t >= i {
                lag_sum += y[t - i];
            }
        }
        let u_old = if t + 1 >= order {
            u[t + 1 - order]
        } else {
            0.0
        };
        y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * lag_sum + 1.5 * u_old * u[t] + 0.1;
        if y[t + 1].abs() > 1e3 {
            return Err(CoreError::Generation(format!(
                "NARMA-{order} trajectory diverged at step {}",
                t + 1
            )));
        }
    }
    Ok(y)
}

/// A NARMA benchmark series with seeded inputs.
pub fn gen_narma(order: usize, n_points: usize, seed: u64) -> Result<Series> {
    check_length(n_points)?;
    let u = narma_inputs(seed, n_points);
    let values = narma_recurrence(order, &u).map_err(|e| match e {
        CoreError::Generation(msg) => CoreError::Generation(format!("{msg} (seed {seed})")),
        other => other,
    })?;
    let kind = if order == 5 {
        SeriesKind::Narma5
    } else {
        SeriesKind::Narma10
    };
    Ok(Series {
        kind,
        t_grid: (0..n_points).map(|i| i as f64).collect(),
        values,
        descriptor: format!(
            "task={} n_points={n_points} order={order} seed={seed}",
            kind.label()
        ),
    })
}

/// Min-max scale to `[0, 1]` using train-portion statistics only, then emit
/// every sliding window of `n` inputs plus one target. Windows whose target
/// index falls before `floor(2L/3)` are train, the rest test.
pub fn scale_and_window(series: Series, n: usize) -> Result<WindowedSeries> {
    let len = series.values.len();
    if len <= n + 3 {
        return Err(CoreError::Generation(format!(
            "series of length {len} too short for window length {n}"
        )));
    }
    let train_len = 2 * len / 3;
    let train = &series.values[..train_len];
    let min = train.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = train.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(CoreError::ConstantSeries);
    }
    let scaled: Vec<f64> = series
        .values
        .iter()
        .map(|&x| (x - min) / (max - min))
        .collect();

    let windows = (0..len - n)
        .map(|i| {
            let target_index = i + n;
            SeriesWindow {
                inputs: scaled[i..i + n].to_vec(),
                target: scaled[target_index],
                target_index,
                split: if target_index < train_len {
                    SplitTag::Train
                } else {
                    SplitTag::Test
                },
            }
        })
        .collect();

    Ok(WindowedSeries {
        series,
        scaled,
        train_len,
        window_len: n,
        windows,
    })
}

impl WindowedSeries {
    /// CSV dump (`t,raw,scaled,split_tag`) with the generation parameters as a
    /// leading `#` comment line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {}\n", self.series.descriptor));
        out.push_str("t,raw,scaled,split_tag\n");
        for i in 0..self.series.values.len() {
            let tag = if i < self.train_len { "train" } else { "test" };
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.series.t_grid[i], self.series.values[i], self.scaled[i], tag
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: term-by-term series for J_nu with explicit
    /// factorials, summed to fixed high order.
    fn bessel_series_oracle(nu: usize, t: f64, terms: usize) -> f64 {
        fn factorial(k: usize) -> f64 {
            (1..=k).map(|x| x as f64).product()
        }
        let mut sum = 0.0;
        for m in 0..terms {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let power = (t / 2.0_f64).powi((2 * m + nu) as i32);
            sum += sign * power / (factorial(m) * factorial(m + nu));
        }
        sum
    }

    #[test]
    fn bessel_j2_matches_series_oracle() {
        assert_eq!(bessel_j2(0.0), 0.0);
        // The factorial-form oracle is well conditioned only for moderate t.
        for &t in &[0.5, 1.0, 2.0, 5.0] {
            let expected = bessel_series_oracle(2, t, 40);
            assert!(
                (bessel_j2(t) - expected).abs() < 1e-10,
                "J2({t}) = {} vs oracle {expected}",
                bessel_j2(t)
            );
        }
        // Frozen values from a 60-digit decimal evaluation of the series;
        // tolerances widen with t as f64 cancellation grows.
        assert!((bessel_j2(1.0) - 0.11490348493190047).abs() < 1e-12);
        assert!((bessel_j2(5.0) - 0.046565116277752214).abs() < 1e-12);
        assert!((bessel_j2(10.0) - 0.2546303136851206).abs() < 1e-10);
        assert!((bessel_j2(20.0) - -0.16034135192299814).abs() < 1e-9);
    }

    #[test]
    fn bessel_j2_satisfies_three_term_recurrence() {
        // J2(t) = (2/t) J1(t) - J0(t)
        for &t in &[1.0, 3.0, 5.0, 8.0] {
            let j0 = bessel_series_oracle(0, t, 40);
            let j1 = bessel_series_oracle(1, t, 40);
            assert!((bessel_j2(t) - (2.0 / t * j1 - j0)).abs() < 1e-10);
        }
    }

    #[test]
    fn bessel_grid_shape() {
        let s = gen_bessel(90, 20.0).unwrap();
        assert_eq!(s.values.len(), 90);
        assert_eq!(s.t_grid[0], 0.0);
        assert!((s.t_grid[89] - 20.0).abs() < 1e-12);
        assert!(gen_bessel(10, 20.0).is_err());
    }

    #[test]
    fn damped_shm_values() {
        let s = gen_damped_shm(90, 0.1, 1.0, 20.0).unwrap();
        assert_eq!(s.values[0], 1.0);
        // Direct-evaluation oracle at an interior grid point.
        let i = 37;
        let t = s.t_grid[i];
        assert!((s.values[i] - (-0.1 * t).exp() * t.cos()).abs() < 1e-15);
        // Envelope bound.
        for (t, x) in s.t_grid.iter().zip(&s.values) {
            assert!(x.abs() <= (-0.1 * t).exp() + 1e-15);
        }
        assert!(gen_damped_shm(90, -1.0, 1.0, 20.0).is_err());
    }

    #[test]
    fn damped_shm_at_pi() {
        // Not a grid point; checks the closed form itself.
        let x = (-0.1 * std::f64::consts::PI).exp() * std::f64::consts::PI.cos();
        assert!((x + 0.7304026910486456).abs() < 1e-12);
    }

    #[test]
    fn delayed_control_matches_closed_form_before_tau() {
        // While the delayed term still reads constant history, the system is
        // x' = a x + b, so x(t) = (1 + b/a) e^{a t} - b/a.
        let s = gen_delayed_quantum_control(90).unwrap();
        assert_eq!(s.values[0], 1.0);
        let closed =
            |t: f64| (1.0 + DELAYED_B / DELAYED_A) * (DELAYED_A * t).exp() - DELAYED_B / DELAYED_A;
        assert!((closed(1.0) - 0.42902450821575755).abs() < 1e-12);
        for t in 1..=10 {
            let err = (s.values[t] - closed(t as f64)).abs();
            assert!(
                err < 1e-6,
                "t={t}: {} vs {} (err {err})",
                s.values[t],
                closed(t as f64)
            );
        }
    }

    #[test]
    fn delayed_control_finite_and_step_converged() {
        // The feedback gain |b| tau = 5 sits beyond the delay-stability
        // boundary, so the oscillation amplitude grows over this horizon; the
        // trajectory must still be finite and step-size converged (relative,
        // since amplitudes reach a few hundred by t = 100).
        let coarse = integrate_delayed_feedback(101, 0.1);
        let fine = integrate_delayed_feedback(101, 0.05);
        for (i, (a, b)) in coarse.iter().zip(&fine).enumerate() {
            assert!(a.is_finite() && a.abs() < 1e4);
            let tol = 1e-6 * a.abs().max(1.0);
            assert!((a - b).abs() < tol, "t={i}: {a} vs {b}");
        }
    }

    #[test]
    fn narma_is_deterministic_per_seed() {
        let a = gen_narma(5, 100, 42).unwrap();
        let b = gen_narma(5, 100, 42).unwrap();
        assert_eq!(a.values, b.values);
        let c = gen_narma(5, 100, 43).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn narma_matches_straight_loop_reimplementation() {
        // Independent transcription of the recurrence, recomputing every lag
        // sum from scratch.
        fn oracle(order: usize, u: &[f64]) -> Vec<f64> {
            let mut y = vec![0.0f64; u.len()];
            for t in 0..u.len() - 1 {
                let mut s = 0.0;
                let mut i = 0;
                while i < order {
                    if t >= i {
                        s += y[t - i];
                    }
                    i += 1;
                }
                let u_lag = if t + 1 >= order {
                    u[t + 1 - order]
                } else {
                    0.0
                };
                y[t + 1] = 0.3 * y[t] + 0.05 * y[t] * s + 1.5 * u_lag * u[t] + 0.1;
            }
            y
        }
        for order in [5, 10] {
            for seed in 0..10 {
                let u = narma_inputs(seed, 200);
                let ours = narma_recurrence(order, &u).unwrap();
                let reference = oracle(order, &u);
                assert_eq!(ours, reference, "order {order} seed {seed}");
                // Bit-exact, not merely close.
                for (a, b) in ours.iter().zip(&reference) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }

    #[test]
    fn narma_zero_input_converges_to_fixed_point() {
        // Fixed point of y = 0.3 y + 0.05 * order * y^2 + 0.1, found by
        // iterating the scalar map to convergence.
        fn fixed_point(order: usize) -> f64 {
            let mut y = 0.0f64;
            for _ in 0..1000 {
                y = 0.3 * y + 0.05 * order as f64 * y * y + 0.1;
            }
            y
        }
        let fp5 = fixed_point(5);
        // Linear part alone would settle at 0.1 / 0.7 = 1/7.
        assert!((fp5 - 1.0 / 7.0).abs() < 0.01);
        let y = narma_recurrence(5, &vec![0.0; 300]).unwrap();
        assert!((y[299] - fp5).abs() < 1e-9, "{} vs {fp5}", y[299]);

        let fp10 = fixed_point(10);
        let y = narma_recurrence(10, &vec![0.0; 300]).unwrap();
        assert!((y[299] - fp10).abs() < 1e-9);
    }

    #[test]
    fn narma_divergence_is_reported() {
        let err = narma_recurrence(5, &vec![20.0; 60]).unwrap_err();
        assert!(matches!(err, CoreError::Generation(_)));
        assert!(gen_narma(7, 90, 1).is_err());
    }

    #[test]
    fn windowing_layout_and_split_boundary() {
        let series = gen_bessel(90, 20.0).unwrap();
        let w = scale_and_window(series, 4).unwrap();
        assert_eq!(w.train_len, 60);
        assert_eq!(w.windows.len(), 86);
        for win in &w.windows {
            assert_eq!(win.inputs.len(), 4);
            assert_eq!(
                win.inputs.as_slice(),
                &w.scaled[win.target_index - 4..win.target_index]
            );
            assert_eq!(win.target, w.scaled[win.target_index]);
            match win.split {
                SplitTag::Train => assert!(win.target_index < 60),
                SplitTag::Test => assert!(win.target_index >= 60),
            }
        }
        assert_eq!(
            w.windows
                .iter()
                .filter(|x| x.split == SplitTag::Train)
                .count(),
            56
        );
    }

    #[test]
    fn scaling_statistics_come_from_train_portion_only() {
        let series = gen_damped_shm(90, 0.1, 1.0, 20.0).unwrap();
        let raw = series.values.clone();
        let w = scale_and_window(series, 4).unwrap();

        // Recompute from the raw train segment and verify both the transform
        // and the exact train extrema.
        let train = &raw[..60];
        let min = train.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = train.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (x, s) in raw.iter().zip(&w.scaled) {
            assert!((s - (x - min) / (max - min)).abs() < 1e-15);
        }
        let train_scaled = &w.scaled[..60];
        let smin = train_scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = train_scaled
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(smin, 0.0);
        assert_eq!(smax, 1.0);
    }

    #[test]
    fn constant_series_cannot_be_scaled() {
        let series = Series {
            kind: SeriesKind::Bessel,
            t_grid: (0..30).map(|i| i as f64).collect(),
            values: vec![0.7; 30],
            descriptor: "synthetic".into(),
        };
        assert!(matches!(
            scale_and_window(series, 4),
            Err(CoreError::ConstantSeries)
        ));
    }

    #[test]
    fn short_series_cannot_be_windowed() {
        let series = Series {
            kind: SeriesKind::Bessel,
            t_grid: (0..6).map(|i| i as f64).collect(),
            values: (0..6).map(|i| i as f64).collect(),
            descriptor: "synthetic".into(),
        };
        assert!(scale_and_window(series, 4).is_err());
    }

    #[test]
    fn csv_export_shape() {
        let w = scale_and_window(gen_bessel(90, 20.0).unwrap(), 4).unwrap();
        let csv = w.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# task=bessel"));
        assert_eq!(lines.next().unwrap(), "t,raw,scaled,split_tag");
        assert_eq!(csv.lines().count(), 92);
        assert!(csv.is_ascii());
    }
}
