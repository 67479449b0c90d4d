//! Constant step-size and smoothing-radius schedules.
//!
//! Every schedule is a `min` (or nested min/max) over named terms. A term whose
//! guarding indicator is zero, or whose denominator vanishes, is `+inf` and so
//! drops out of a `min`. The name of the attaining term is kept for run logs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSource {
    /// One-point bandit feedback, Lipschitz losses.
    Theorem3,
    /// Two-point bandit feedback, Lipschitz losses.
    Theorem4,
    /// Two-point bandit feedback, smooth losses.
    Theorem5,
    /// Noisy first-order feedback, Lipschitz losses.
    Lemma1,
    /// Noisy first-order feedback, smooth losses.
    Lemma2,
    Manual,
}

impl fmt::Display for ScheduleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScheduleSource::Theorem3 => "theorem3",
            ScheduleSource::Theorem4 => "theorem4",
            ScheduleSource::Theorem5 => "theorem5",
            ScheduleSource::Lemma1 => "lemma1",
            ScheduleSource::Lemma2 => "lemma2",
            ScheduleSource::Manual => "manual",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta: f64,
    pub delta: f64,
    pub source: ScheduleSource,
    /// Which term attained the step-size min (informational).
    #[serde(default)]
    pub binding: String,
}

impl Schedule {
    pub fn manual(eta: f64, delta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(config(format!("step size must be positive, got {eta}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(config(format!("smoothing radius must be nonnegative, got {delta}")));
        }
        Ok(Self {
            eta,
            delta,
            source: ScheduleSource::Manual,
            binding: "manual".into(),
        })
    }
}

/// Problem constants shared by all schedules. `t` must equal `k * r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dims {
    pub g: f64,
    pub b: f64,
    pub t: usize,
    pub m: usize,
    pub k: usize,
    pub r: usize,
    pub d: usize,
}

impl Dims {
    pub fn new(g: f64, b: f64, m: usize, k: usize, r: usize, d: usize) -> Self {
        Self {
            g,
            b,
            t: k * r,
            m,
            k,
            r,
            d,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.g > 0.0 && self.g.is_finite()) || !(self.b > 0.0 && self.b.is_finite()) {
            return Err(config(format!("G and B must be positive, got G = {}, B = {}", self.g, self.b)));
        }
        if self.t == 0 || self.m == 0 || self.k == 0 || self.r == 0 || self.d == 0 {
            return Err(config("T, M, K, R and d must all be >= 1"));
        }
        if self.t != self.k * self.r {
            return Err(config(format!(
                "horizon T = {} differs from K * R = {} * {}",
                self.t, self.k, self.r
            )));
        }
        Ok(())
    }

    fn base(&self) -> f64 {
        self.b / (self.g * (self.t as f64).sqrt())
    }

    fn local(&self) -> bool {
        self.k > 1
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(config(format!("{name} must be nonnegative and finite, got {v}")));
    }
    Ok(())
}

/// `num / den`, or `+inf` when the term is switched off or its denominator is zero.
fn term(active: bool, num: f64, den: f64) -> f64 {
    if !active || den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Minimum over named terms; ties keep the earliest term.
fn argmin(terms: &[(&'static str, f64)]) -> (&'static str, f64) {
    let mut best = terms[0];
    for &t in &terms[1..] {
        if t.1 < best.1 {
            best = t;
        }
    }
    best
}

fn argmax(terms: &[(&'static str, f64)]) -> (&'static str, f64) {
    let mut best = terms[0];
    for &t in &terms[1..] {
        if t.1 > best.1 {
            best = t;
        }
    }
    best
}

fn finish(eta: f64, delta: f64, source: ScheduleSource, binding: String) -> Result<Schedule> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(config(format!("{source} schedule produced step size {eta}")));
    }
    Ok(Schedule {
        eta,
        delta,
        source,
        binding,
    })
}

/// One-point schedule with the estimator variance `sigma = 2 d G` substituted; `delta = B`.
pub fn schedule_theorem3(dims: &Dims, zeta: f64) -> Result<Schedule> {
    dims.validate()?;
    check_nonneg("zeta", zeta)?;
    let Dims { g, b, m, k, d, .. } = *dims;
    let sigma = 2.0 * d as f64 * g;
    let kf = k as f64;
    let (name, v) = argmin(&[
        ("one", 1.0),
        ("machines", g * (m as f64).sqrt() / sigma),
        ("local_noise", term(dims.local(), g.sqrt(), sigma.sqrt() * kf.powf(0.25))),
        ("heterogeneity", term(dims.local(), g.sqrt(), (zeta * kf).sqrt())),
    ]);
    finish(dims.base() * v, b, ScheduleSource::Theorem3, name.into())
}

/// Alternative one-point step size that uses `sqrt(M)/(dB)` and `sqrt(dB)` in place of
/// the `sigma`-based terms. These terms are not dimensionally consistent. Tagged `Manual`.
pub fn schedule_theorem3_printed(dims: &Dims, zeta: f64) -> Result<Schedule> {
    dims.validate()?;
    check_nonneg("zeta", zeta)?;
    let Dims { g, b, m, k, d, .. } = *dims;
    let (df, kf) = (d as f64, k as f64);
    let (name, v) = argmin(&[
        ("one", 1.0),
        ("machines", (m as f64).sqrt() / (df * b)),
        ("local_noise", term(dims.local(), 1.0, (df * b).sqrt() * kf.powf(0.25))),
        ("heterogeneity", term(dims.local(), g.sqrt(), (zeta * kf).sqrt())),
    ]);
    finish(dims.base() * v, b, ScheduleSource::Manual, format!("printed:{name}"))
}

fn theorem4_delta(dims: &Dims) -> f64 {
    let Dims { b, m, k, r, d, .. } = *dims;
    let q = (d as f64).powf(0.25);
    b * q / (r as f64).sqrt() * (1.0 + q / ((m * k) as f64).sqrt())
}

/// Two-point schedule for Lipschitz losses.
pub fn schedule_theorem4(dims: &Dims) -> Result<Schedule> {
    dims.validate()?;
    let Dims { m, k, d, .. } = *dims;
    let df = d as f64;
    let (name, v) = argmin(&[
        ("one", 1.0),
        ("machines", (m as f64).sqrt() / df.sqrt()),
        ("local", term(dims.local(), 1.0, (k as f64).sqrt() * df.powf(0.25))),
    ]);
    finish(dims.base() * v, theorem4_delta(dims), ScheduleSource::Theorem4, name.into())
}

/// Noisy first-order schedule for Lipschitz losses; `delta = 0`.
pub fn schedule_lemma1(dims: &Dims, sigma: f64) -> Result<Schedule> {
    dims.validate()?;
    check_nonneg("sigma", sigma)?;
    let Dims { g, m, k, .. } = *dims;
    let kf = k as f64;
    let (name, v) = argmin(&[
        ("one", 1.0),
        ("machines", term(true, g * (m as f64).sqrt(), sigma)),
        ("local_noise", term(dims.local(), g.sqrt(), (sigma * kf).sqrt())),
        ("local", term(dims.local(), 1.0, kf.sqrt())),
    ]);
    finish(dims.base() * v, 0.0, ScheduleSource::Lemma1, name.into())
}

/// Extra inputs of the smooth-loss schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothInputs {
    pub h: f64,
    pub fstar: Option<f64>,
    pub sigma: f64,
    pub zeta: f64,
}

/// Noisy first-order schedule for smooth losses; `delta = 0`.
///
/// `eta = min{ 1/(2H), B sqrt(M)/(sigma sqrt(KR)), max{B/(G sqrt(KR)), B/sqrt(H F* KR)}, local }`
/// where, for `K > 1`,
/// `local = max{ min{B^(2/3)/(H^(1/3) sigma^(2/3) K^(2/3) R^(1/3)), B^(2/3)/(H^(1/3) zeta^(2/3) K R^(1/3)),
///                   B/(K^(3/4) sqrt(zeta sigma R)), B/(zeta K sqrt R)},
///              min{B/(K^(3/4) sqrt(G sigma R)), B/(K sqrt(zeta G R))} }`.
/// The `F*` branch is used only when `H > 0` and a positive `F*` is supplied.
pub fn schedule_lemma2(dims: &Dims, inp: &SmoothInputs) -> Result<Schedule> {
    let (eta, binding) = lemma2_eta(dims, inp)?;
    finish(eta, 0.0, ScheduleSource::Lemma2, binding)
}

fn lemma2_eta(dims: &Dims, inp: &SmoothInputs) -> Result<(f64, String)> {
    dims.validate()?;
    let SmoothInputs { h, fstar, sigma, zeta } = *inp;
    if !(h >= 0.0 && h.is_finite()) {
        return Err(config(format!("smoothness H must be nonnegative, got {h}")));
    }
    check_nonneg("sigma", sigma)?;
    check_nonneg("zeta", zeta)?;
    let Dims { g, b, m, k, r, t, .. } = *dims;
    let (kf, rf, tf) = (k as f64, r as f64, t as f64);
    let local = dims.local();

    let fstar_term = match fstar {
        Some(fs) if h > 0.0 && fs > 0.0 => b / (h * fs * tf).sqrt(),
        _ => 0.0,
    };
    let (opt_name, optimistic) = argmax(&[("lipschitz", b / (g * tf.sqrt())), ("fstar", fstar_term)]);

    let (smooth_name, smooth_branch) = argmin(&[
        ("smooth_noise", term(local, b.powf(2.0 / 3.0), h.cbrt() * sigma.powf(2.0 / 3.0) * kf.powf(2.0 / 3.0) * rf.cbrt())),
        ("smooth_heterogeneity", term(local, b.powf(2.0 / 3.0), h.cbrt() * zeta.powf(2.0 / 3.0) * kf * rf.cbrt())),
        ("smooth_cross", term(local, b, kf.powf(0.75) * (zeta * sigma * rf).sqrt())),
        ("smooth_drift", term(local, b, zeta * kf * rf.sqrt())),
    ]);
    let (lip_name, lip_branch) = argmin(&[
        ("lipschitz_noise", term(local, b, kf.powf(0.75) * (g * sigma * rf).sqrt())),
        ("lipschitz_heterogeneity", term(local, b, kf * (zeta * g * rf).sqrt())),
    ]);
    let (local_name, local_term) = if smooth_branch >= lip_branch {
        (smooth_name, smooth_branch)
    } else {
        (lip_name, lip_branch)
    };

    let (name, eta) = argmin(&[
        ("smoothness_cap", term(true, 1.0, 2.0 * h)),
        ("machines", term(true, b * (m as f64).sqrt(), sigma * tf.sqrt())),
        (opt_name, optimistic),
        (local_name, local_term),
    ]);
    Ok((eta, name.into()))
}

/// Two-point schedule for smooth losses: the smooth-loss step size with the
/// estimator variance `sigma = sqrt(d) G`, and the two-point smoothing radius.
pub fn schedule_theorem5(dims: &Dims, h: f64, fstar: Option<f64>, zeta: f64) -> Result<Schedule> {
    let inp = SmoothInputs {
        h,
        fstar,
        sigma: (dims.d as f64).sqrt() * dims.g,
        zeta,
    };
    let (eta, binding) = lemma2_eta(dims, &inp)?;
    finish(eta, theorem4_delta(dims), ScheduleSource::Theorem5, binding)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn one_point_worked_example() {
        let s = schedule_theorem3(&Dims::new(1.0, 1.0, 4, 1, 100, 2), 0.0).unwrap();
        assert!(close(s.eta, 0.05));
        assert_eq!(s.delta, 1.0);
        assert_eq!(s.binding, "machines");
    }

    #[test]
    fn one_point_single_step_uses_two_terms() {
        for zeta in [0.0, 0.5, 2.0] {
            let dims = Dims::new(1.5, 2.0, 9, 1, 64, 3);
            let s = schedule_theorem3(&dims, zeta).unwrap();
            let expected = 2.0 / (1.5 * 8.0) * f64::min(1.0, 1.5 * 3.0 / (2.0 * 3.0 * 1.5));
            assert!(close(s.eta, expected));
            assert_eq!(s.delta, 2.0);
        }
    }

    #[test]
    fn one_point_printed_form_differs() {
        let dims = Dims::new(1.0, 2.0, 4, 1, 100, 2);
        let p = schedule_theorem3_printed(&dims, 0.0).unwrap();
        assert_eq!(p.source, ScheduleSource::Manual);
        assert!(close(p.eta, 0.2 * 0.5));
        let a = schedule_theorem3(&dims, 0.0).unwrap();
        assert!(close(a.eta, 0.2 * 0.5));
        let dims = Dims::new(1.0, 3.0, 4, 1, 100, 2);
        assert!(!close(
            schedule_theorem3_printed(&dims, 0.0).unwrap().eta,
            schedule_theorem3(&dims, 0.0).unwrap().eta
        ));
    }

    #[test]
    fn two_point_worked_examples() {
        let s = schedule_theorem4(&Dims::new(1.0, 1.0, 4, 1, 100, 16)).unwrap();
        assert!(close(s.eta, 0.05));
        assert!(close(s.delta, 0.4));
        let s = schedule_theorem4(&Dims::new(1.0, 1.0, 1, 4, 25, 16)).unwrap();
        assert!(close(s.eta, 0.025));
        let s = schedule_theorem4(&Dims::new(2.0, 3.0, 5, 1, 49, 1)).unwrap();
        assert!(close(s.eta, 3.0 / (2.0 * 7.0)));
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let mut dims = Dims::new(1.0, 1.0, 1, 4, 25, 16);
        dims.t = 99;
        assert!(schedule_theorem4(&dims).is_err());
        assert!(schedule_theorem3(&Dims::new(0.0, 1.0, 1, 1, 1, 1), 0.0).is_err());
        assert!(schedule_theorem3(&Dims::new(1.0, -1.0, 1, 1, 1, 1), 0.0).is_err());
    }

    #[test]
    fn first_order_schedule() {
        // sigma = 0, K = 1: plain online gradient descent step
        let s = schedule_lemma1(&Dims::new(2.0, 1.0, 1, 1, 400, 3), 0.0).unwrap();
        assert!(close(s.eta, 1.0 / (2.0 * 20.0)));
        let s = schedule_lemma1(&Dims::new(1.0, 1.0, 4, 16, 4, 3), 1.0).unwrap();
        // terms: 1, 2, 1/4, 1/4
        assert!(close(s.eta, 0.125 * 0.25));
    }

    #[test]
    fn smooth_schedule_linear_reduction() {
        let dims = Dims::new(1.0, 1.0, 4, 1, 256, 8);
        let s = schedule_lemma2(
            &dims,
            &SmoothInputs {
                h: 0.0,
                fstar: None,
                sigma: 2.0,
                zeta: 0.0,
            },
        )
        .unwrap();
        assert!(close(s.eta, f64::min(2.0 / (2.0 * 16.0), 1.0 / 16.0)));
    }

    #[test]
    fn smooth_schedule_respects_cap() {
        for h in [0.5, 1.0, 10.0, 1000.0] {
            let s = schedule_lemma2(
                &Dims::new(1.0, 1.0, 1, 1, 1, 1),
                &SmoothInputs {
                    h,
                    fstar: Some(0.1),
                    sigma: 0.0,
                    zeta: 0.0,
                },
            )
            .unwrap();
            assert!(s.eta <= 1.0 / (2.0 * h));
        }
        assert!(schedule_lemma2(
            &Dims::new(1.0, 1.0, 1, 1, 1, 1),
            &SmoothInputs {
                h: -1.0,
                fstar: None,
                sigma: 0.0,
                zeta: 0.0
            }
        )
        .is_err());
    }

    /// Direct, unoptimized evaluation of the nested min/max expression.
    fn lemma2_reference(g: f64, b: f64, m: f64, k: f64, r: f64, h: f64, fs: f64, s: f64, z: f64) -> f64 {
        let t = k * r;
        let a = 1.0 / (2.0 * h);
        let c = b * m.sqrt() / (s * t.sqrt());
        let e = f64::max(b / (g * t.sqrt()), b / (h * fs * t).sqrt());
        let p1 = b.powf(2.0 / 3.0) / (h.powf(1.0 / 3.0) * s.powf(2.0 / 3.0) * k.powf(2.0 / 3.0) * r.powf(1.0 / 3.0));
        let p2 = b.powf(2.0 / 3.0) / (h.powf(1.0 / 3.0) * z.powf(2.0 / 3.0) * k * r.powf(1.0 / 3.0));
        let p3 = b / (k.powf(3.0 / 4.0) * (z * s * r).sqrt());
        let p4 = b / (z * k * r.sqrt());
        let q1 = b / (k.powf(3.0 / 4.0) * (g * s * r).sqrt());
        let q2 = b / (k * (z * g * r).sqrt());
        let local = f64::max(p1.min(p2).min(p3).min(p4), q1.min(q2));
        a.min(c).min(e).min(local)
    }

    #[test]
    fn smooth_schedule_matches_reference() {
        let dims = Dims::new(1.0, 1.0, 2, 4, 25, 3);
        let inp = SmoothInputs {
            h: 1.0,
            fstar: Some(1.0),
            sigma: 1.0,
            zeta: 0.1,
        };
        let s = schedule_lemma2(&dims, &inp).unwrap();
        let want = lemma2_reference(1.0, 1.0, 2.0, 4.0, 25.0, 1.0, 1.0, 1.0, 0.1);
        assert!((s.eta - want).abs() <= 1e-12, "{} vs {want}", s.eta);

        for &(g, b, m, k, r, h, fs, sg, z) in &[
            (2.0, 0.5, 8, 16, 10, 3.0, 0.2, 4.0, 1.0),
            (1.0, 3.0, 1, 2, 100, 0.1, 5.0, 0.5, 0.01),
            (0.7, 1.2, 16, 32, 7, 20.0, 0.9, 9.0, 1.3),
        ] {
            let dims = Dims::new(g, b, m, k, r, 5);
            let inp = SmoothInputs {
                h,
                fstar: Some(fs),
                sigma: sg,
                zeta: z,
            };
            let got = schedule_lemma2(&dims, &inp).unwrap().eta;
            let want = lemma2_reference(g, b, m as f64, k as f64, r as f64, h, fs, sg, z);
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn schedules_are_pure() {
        let dims = Dims::new(1.3, 0.7, 3, 5, 11, 9);
        assert_eq!(schedule_theorem3(&dims, 0.4).unwrap(), schedule_theorem3(&dims, 0.4).unwrap());
        assert_eq!(schedule_theorem5(&dims, 0.0, None, 1.0).unwrap(), schedule_theorem5(&dims, 0.0, None, 1.0).unwrap());
    }

    #[test]
    fn two_point_smooth_uses_two_point_radius() {
        let dims = Dims::new(1.0, 1.0, 4, 8, 256, 64);
        let s = schedule_theorem5(&dims, 0.0, None, 0.0).unwrap();
        assert_eq!(s.delta, schedule_theorem4(&dims).unwrap().delta);
        assert!(close(s.eta, f64::min(2.0 / (8.0 * 2048f64.sqrt()), 1.0 / 2048f64.sqrt())));
    }
}
