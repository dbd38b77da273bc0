//! Closed-form performance of the fixed-parameter scheme.
//!
//! Everything here is specialized to `p* = 1`: a backlogged node transmits
//! in the slot right after it picks up a message, so the contention time is
//! exactly one slot `T*`. Functions that keep a `p_star` argument reject any
//! other value.

use serde::Serialize;

use crate::config::SystemConfig;
use crate::math::binomial_pmf;
use crate::policy::fixed_params;
use crate::sic::MhTable;
use crate::{Error, Result};

fn check_rate_slot(lambda: f64, t_star: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(t_star > 0.0 && t_star.is_finite()) {
        return Err(Error::domain(format!(
            "slot time must be positive, got {t_star}"
        )));
    }
    Ok(())
}

fn check_p_star(p_star: f64) -> Result<()> {
    if p_star != 1.0 {
        return Err(Error::domain(format!(
            "closed forms assume p* = 1, got {p_star}"
        )));
    }
    Ok(())
}

/// Probability that at least one message arrives within a slot.
fn arrival_in_slot(lambda: f64, t_star: f64) -> f64 {
    -(-lambda * t_star).exp_m1()
}

/// Probability that a node is backlogged at the start of a slot.
pub fn backlog_prob(lambda: f64, t_star: f64) -> Result<f64> {
    check_rate_slot(lambda, t_star)?;
    let q = arrival_in_slot(lambda, t_star);
    Ok(q / (1.0 + q))
}

/// Distribution of the number of backlogged nodes among the `n - 1` nodes
/// other than a tagged one; index `k` holds `P(k backlogged)`.
pub fn q_dist(n: usize, b: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::domain(format!("b must lie in [0, 1], got {b}")));
    }
    Ok(binomial_pmf(n - 1, b))
}

/// Per-transmission success probability when each of `n` nodes transmits
/// independently with probability `tau`.
pub fn success_prob(n: usize, tau: f64, gamma: f64, mh: &MhTable) -> Result<f64> {
    Ok(success_prob_with_error(n, tau, gamma, mh)?.0)
}

/// [`success_prob`] together with the standard error inherited from the
/// Monte-Carlo `m_h` estimates.
pub fn success_prob_with_error(n: usize, tau: f64, gamma: f64, mh: &MhTable) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::domain(format!("tau must lie in (0, 1], got {tau}")));
    }
    let weights = binomial_pmf(n, tau);
    let norm = n as f64 * tau;
    let (mut ps, mut var) = (0.0, 0.0);
    for (h, w) in weights.iter().enumerate().skip(1) {
        let e = mh.get(h, gamma)?;
        ps += e.estimate * w / norm;
        var += (e.stderr * w / norm).powi(2);
    }
    Ok((ps, var.sqrt()))
}

/// Fraction of slots in which at least one node transmits.
pub fn cbr(n: usize, b: f64, p_star: f64) -> Result<f64> {
    check_p_star(p_star)?;
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::domain(format!("b must lie in [0, 1], got {b}")));
    }
    Ok(1.0 - (1.0 - b * p_star).powi(n as i32))
}

/// First and second moments of the inter-departure time `Y = R + T*`,
/// where `R` is a geometric number of idle slots.
pub fn interdeparture_moments(lambda: f64, t_star: f64) -> Result<(f64, f64)> {
    check_rate_slot(lambda, t_star)?;
    let q = arrival_in_slot(lambda, t_star);
    let x = 1.0 - q;
    let ey = t_star + t_star / q;
    let ey2 = t_star * t_star * (1.0 + (3.0 - x) / (q * q));
    Ok((ey, ey2))
}

/// `1/x - 1/(e^x - 1)`, the mean time from the last arrival in a slot to the
/// slot end, in units of the slot.
fn last_arrival_offset(x: f64) -> f64 {
    if x < 1e-2 {
        0.5 - x / 12.0 + x.powi(3) / 720.0
    } else {
        1.0 / x - 1.0 / x.exp_m1()
    }
}

/// Mean access delay: time from the last arrival within the pickup slot to
/// the end of the transmission slot.
pub fn mean_access_delay(lambda: f64, t_star: f64, p_star: f64) -> Result<f64> {
    check_rate_slot(lambda, t_star)?;
    check_p_star(p_star)?;
    Ok(t_star * last_arrival_offset(lambda * t_star) + t_star / p_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Throughput {
    /// Delivered messages per second per node.
    pub messages: f64,
    /// Delivered bits per second per node.
    pub bps: f64,
    /// Fraction of generated messages that get delivered.
    pub normalized: f64,
}

pub fn throughput(p_s: f64, ey: f64, bits: u64, lambda: f64) -> Result<Throughput> {
    if !(0.0..=1.0).contains(&p_s) {
        return Err(Error::domain(format!("P_s must lie in [0, 1], got {p_s}")));
    }
    if !(ey > 0.0) || !(lambda > 0.0) {
        return Err(Error::domain("E[Y] and lambda must be positive"));
    }
    let messages = p_s / ey;
    Ok(Throughput {
        messages,
        bps: bits as f64 * messages,
        normalized: messages / lambda,
    })
}

/// Mean age of information. `P_s = 0` yields `f64::INFINITY`.
pub fn mean_aoi(ed: f64, ey: f64, ey2: f64, p_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_s) {
        return Err(Error::domain(format!("P_s must lie in [0, 1], got {p_s}")));
    }
    if !(ey > 0.0) {
        return Err(Error::domain("E[Y] must be positive"));
    }
    if p_s == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(ed + ey2 / (2.0 * ey) + ey * (1.0 / p_s - 1.0))
}

/// All closed-form metrics of the fixed scheme at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedMetrics {
    pub gamma: f64,
    pub t_star: f64,
    pub b: f64,
    pub tau: f64,
    pub p_s: f64,
    /// Standard error of `p_s` carried over from the `m_h` estimates.
    pub p_s_mc_stderr: f64,
    pub cbr: f64,
    pub ey: f64,
    pub ey2: f64,
    pub ed: f64,
    pub theta: f64,
    pub theta_bps: f64,
    pub theta_norm: f64,
    pub ea: f64,
}

/// Chains the fixed-scheme closed forms for `cfg`. `mh` must cover
/// `h = 1..=n` at the fixed threshold.
pub fn fixed_metrics(cfg: &SystemConfig, mh: &MhTable) -> Result<FixedMetrics> {
    let params = fixed_params(cfg)?;
    let (lambda, t_star, n) = (cfg.lambda(), params.slot, cfg.n());
    let b = backlog_prob(lambda, t_star)?;
    let tau = b * params.p;
    let (p_s, p_s_mc_stderr) = success_prob_with_error(n, tau, params.gamma, mh)?;
    let (ey, ey2) = interdeparture_moments(lambda, t_star)?;
    let ed = mean_access_delay(lambda, t_star, params.p)?;
    let thr = throughput(p_s, ey, cfg.packet_bits(), lambda)?;
    Ok(FixedMetrics {
        gamma: params.gamma,
        t_star,
        b,
        tau,
        p_s,
        p_s_mc_stderr,
        cbr: cbr(n, b, params.p)?,
        ey,
        ey2,
        ed,
        theta: thr.messages,
        theta_bps: thr.bps,
        theta_norm: thr.normalized,
        ea: mean_aoi(ed, ey, ey2, p_s)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sic::quantize_gamma;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn backlog_prob_values() {
        let t = 0.05;
        assert!((backlog_prob(LN2 / t, t).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((backlog_prob(1e6, t).unwrap() - 0.5).abs() < 1e-15);
        let b = backlog_prob(1e-6 / t, t).unwrap();
        assert!((b - 1e-6).abs() < 1e-11);
        assert!(backlog_prob(0.0, t).is_err());
        assert!(backlog_prob(1.0, -t).is_err());
    }

    #[test]
    fn q_dist_values() {
        let q = q_dist(5, 0.0).unwrap();
        assert_eq!(q, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let q = q_dist(2, 1.0 / 3.0).unwrap();
        assert!((q[0] - 2.0 / 3.0).abs() < 1e-15 && (q[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(q_dist(0, 0.5).is_err());
        assert!(q_dist(3, 1.5).is_err());
    }

    #[test]
    fn success_prob_limits() {
        let mh = MhTable::build(1, 1.0, 0.1, 100_000, 2).unwrap();
        let m1 = mh.mean(1, 1.0).unwrap();
        assert!((success_prob(1, 1.0, 1.0, &mh).unwrap() - m1).abs() < 1e-15);
        assert!((m1 - 0.9).abs() < 3.0 * mh.get(1, 1.0).unwrap().stderr);
        let mh = MhTable::build(20, 1.0, 0.1, 2000, 2).unwrap();
        // The lone-transmitter term dominates as tau -> 0.
        let m1 = mh.mean(1, 1.0).unwrap();
        assert!((success_prob(20, 1e-9, 1.0, &mh).unwrap() - m1).abs() < 1e-6);
        assert!(success_prob(20, 0.0, 1.0, &mh).is_err());
        assert!(matches!(
            success_prob(21, 0.5, 1.0, &mh),
            Err(Error::MissingMh { h: 21, .. })
        ));
    }

    #[test]
    fn cbr_values() {
        assert_eq!(cbr(50, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(cbr(50, 1.0, 1.0).unwrap(), 1.0);
        let v = cbr(50, 1.0 / 3.0, 1.0).unwrap();
        assert!((v - (1.0 - (2.0f64 / 3.0).powi(50))).abs() < 1e-15);
        assert!(cbr(50, 0.5, 0.5).is_err());
    }

    #[test]
    fn interdeparture_values() {
        let t = 0.01;
        let (ey, ey2) = interdeparture_moments(LN2 / t, t).unwrap();
        assert!((ey - 3.0 * t).abs() < 1e-15);
        assert!((ey2 - 11.0 * t * t).abs() < 1e-15);
        let (ey, ey2) = interdeparture_moments(1e9, t).unwrap();
        assert!((ey - 2.0 * t).abs() < 1e-15);
        assert!((ey2 - 4.0 * t * t).abs() < 1e-15);
    }

    #[test]
    fn access_delay_values() {
        let t = 0.0576;
        let ed = mean_access_delay(1.0 / t, t, 1.0).unwrap();
        let expected = t * (2.0 - 1.0 / (std::f64::consts::E - 1.0));
        assert!((ed - expected).abs() < 1e-15);
        assert!((expected / t - (2.0 - 0.58198)).abs() < 1e-5);
        assert!((mean_access_delay(1e9, t, 1.0).unwrap() - t).abs() < 1e-9);
        assert!((mean_access_delay(1e-9, t, 1.0).unwrap() - 1.5 * t).abs() < 1e-9);
        assert!(mean_access_delay(1.0, t, 0.5).is_err());
    }

    #[test]
    fn series_and_direct_branches_agree() {
        for x in [9e-3, 1e-2, 1.1e-2] {
            let direct = 1.0 / x - 1.0 / f64::exp_m1(x);
            assert!((last_arrival_offset(x) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn throughput_values() {
        assert_eq!(throughput(0.0, 1.0, 4000, 1.0).unwrap().bps, 0.0);
        let t = 0.02;
        let thr = throughput(1.0, 2.0 * t, 4000, 10.0).unwrap();
        assert!((thr.bps - 4000.0 / (2.0 * t)).abs() < 1e-9);
        assert!((thr.normalized - 1.0 / (2.0 * t) / 10.0).abs() < 1e-12);
    }

    #[test]
    fn aoi_values() {
        assert_eq!(mean_aoi(1.0, 1.0, 1.0, 0.0).unwrap(), f64::INFINITY);
        let d = 0.3;
        assert!((mean_aoi(0.1, d, d * d, 1.0).unwrap() - (0.1 + d / 2.0)).abs() < 1e-15);
        let (ed, ey, ey2) = (0.05, 0.2, 0.06);
        let ea = mean_aoi(ed, ey, ey2, 1.0).unwrap();
        assert!((ea - (ed + ey2 / (2.0 * ey))).abs() < 1e-15);
    }

    #[test]
    fn fixed_metrics_is_the_composition() {
        let cfg = SystemConfig::default().with_lambda(1.0 / 0.01).unwrap();
        let gamma = quantize_gamma(fixed_params(&cfg).unwrap().gamma);
        let mh = MhTable::build(50, gamma, 0.1, 2000, 4).unwrap();
        let m = fixed_metrics(&cfg, &mh).unwrap();
        let t = cfg.slot_time(1.0 / 20.28).unwrap();
        assert_eq!(m.t_star, t);
        let b = backlog_prob(100.0, t).unwrap();
        assert_eq!(m.b, b);
        let ps = success_prob(50, b, m.gamma, &mh).unwrap();
        assert_eq!(m.p_s, ps);
        let (ey, ey2) = interdeparture_moments(100.0, t).unwrap();
        let ed = mean_access_delay(100.0, t, 1.0).unwrap();
        assert_eq!(m.ea, mean_aoi(ed, ey, ey2, ps).unwrap());
        assert_eq!(m.theta_bps, throughput(ps, ey, 4000, 100.0).unwrap().bps);
        assert_eq!(m.cbr, cbr(50, b, 1.0).unwrap());
        assert!(m.theta_norm > 0.0 && m.theta_norm <= 1.0);
        assert!(m.ey2 >= m.ey * m.ey);
    }

    proptest! {
        #[test]
        fn access_delay_bounds(log_x in -3.0f64..3.0) {
            let t = 0.0576;
            let x = 10f64.powf(log_x);
            let ed = mean_access_delay(x / t, t, 1.0).unwrap();
            prop_assert!(ed > t && ed <= 1.5 * t);
        }

        #[test]
        fn backlog_prob_bounds_and_monotone(l1 in 1e-3f64..1e3, l2 in 1e-3f64..1e3) {
            let t = 0.0576;
            let (b1, b2) = (backlog_prob(l1, t).unwrap(), backlog_prob(l2, t).unwrap());
            prop_assert!(b1 > 0.0 && b1 <= 0.5);
            // 1 - e^{-x} rounds to 1 beyond x ~ 37.
            if l1 * t < 30.0 { prop_assert!(b1 < 0.5); }
            if l1 < l2 { prop_assert!(b1 <= b2); }
        }

        #[test]
        fn second_moment_dominates(log_x in -3.0f64..3.0) {
            let t = 0.02;
            let x = 10f64.powf(log_x);
            let (ey, ey2) = interdeparture_moments(x / t, t).unwrap();
            prop_assert!(ey2 >= ey * ey * (1.0 - 1e-12));
        }

        #[test]
        fn q_dist_sums_to_one(n in 1usize..300, b in 0.0f64..=1.0) {
            let s: f64 = q_dist(n, b).unwrap().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
