//! Transmission parameter rules and the sum-rate objective behind them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::math::{binomial_pmf, log_space};
use crate::sic::MhTable;
use crate::{Error, Result};

/// Access scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// `(p, γ)` chosen once from the node count.
    Fixed,
    /// `(p, γ)` chosen per slot from the backlog count.
    Adaptive,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Fixed => "fixed",
            Scheme::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Scheme::Fixed),
            "adaptive" => Ok(Scheme::Adaptive),
            other => Err(Error::config(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Per-slot decision: transmit probability, SNIR threshold, slot length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub p: f64,
    pub gamma: f64,
    /// Slot duration in seconds.
    pub slot: f64,
}

/// `γ = 1 / (a·k + b)`, the threshold law used by both schemes.
pub fn threshold_law(k: usize, a_gamma: f64, b_gamma: f64) -> f64 {
    1.0 / (a_gamma * k as f64 + b_gamma)
}

/// Fixed scheme: `p = 1`, `γ = 1 / (a·n + b)`.
pub fn fixed_params(cfg: &SystemConfig) -> Result<SchemeParams> {
    let gamma = threshold_law(cfg.n(), cfg.a_gamma(), cfg.b_gamma());
    Ok(SchemeParams {
        p: 1.0,
        gamma,
        slot: cfg.slot_time(gamma)?,
    })
}

/// Adaptive scheme for `k >= 1` backlogged nodes: below `k_c` every
/// backlogged node transmits with probability `1/k` at `γ_max`; from `k_c`
/// on everybody transmits and the threshold follows the law in `k`.
pub fn adaptive_params(k: usize, cfg: &SystemConfig) -> Result<SchemeParams> {
    if k == 0 {
        return Err(Error::domain("adaptive parameters need k >= 1"));
    }
    let (p, gamma) = if k < cfg.k_c() {
        (1.0 / k as f64, cfg.gamma_max())
    } else {
        (1.0, threshold_law(k, cfg.a_gamma(), cfg.b_gamma()))
    };
    Ok(SchemeParams {
        p,
        gamma,
        slot: cfg.slot_time(gamma)?,
    })
}

/// Parameters the scheme uses for every backlog level `k = 0..=n`.
///
/// Entry 0 is the empty-system slot (`T0`); its `p` and `γ` are never used
/// for transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    scheme: Scheme,
    by_backlog: Vec<SchemeParams>,
}

impl PolicyTable {
    pub fn new(scheme: Scheme, cfg: &SystemConfig) -> Result<Self> {
        let mut by_backlog = Vec::with_capacity(cfg.n() + 1);
        match scheme {
            Scheme::Fixed => {
                let fixed = fixed_params(cfg)?;
                // The fixed scheme keeps T* even when nobody is backlogged.
                by_backlog.resize(cfg.n() + 1, fixed);
            }
            Scheme::Adaptive => {
                by_backlog.push(SchemeParams {
                    p: 1.0,
                    gamma: cfg.gamma_max(),
                    slot: cfg.t0(),
                });
                for k in 1..=cfg.n() {
                    by_backlog.push(adaptive_params(k, cfg)?);
                }
            }
        }
        Ok(Self { scheme, by_backlog })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn get(&self, backlog: usize) -> SchemeParams {
        self.by_backlog[backlog]
    }

    /// Longest slot the scheme can produce.
    pub fn max_slot(&self) -> f64 {
        self.by_backlog.iter().map(|p| p.slot).fold(0.0, f64::max)
    }
}

/// Expected spectral efficiency (bit/s/Hz) with `k` contenders:
/// `log2(1+γ) Σ_h m_h(γ) C(k,h) p^h (1-p)^(k-h)`.
pub fn sum_rate(k: usize, p: f64, gamma: f64, mh: &MhTable) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::domain(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let weights = binomial_pmf(k, p);
    let mut expected = 0.0;
    for (h, w) in weights.iter().enumerate().skip(1) {
        let m = mh.mean(h, gamma)?;
        expected += m * w;
    }
    Ok(gamma.log2_1p() * expected)
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Search grid for [`grid_maximize_sum_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SumRateGrid {
    pub p: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl SumRateGrid {
    /// `p ∈ {0.05, 0.10, …, 1.0}` and 40 log-spaced `γ` in `(0.001, γ_max]`.
    pub fn standard(gamma_max: f64) -> Self {
        let p = (1..=20).map(|i| i as f64 * 0.05).collect();
        let gamma = log_space(1e-3, gamma_max, 41).into_iter().skip(1).collect();
        Self { p, gamma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub p: f64,
    pub gamma: f64,
    pub sum_rate: f64,
}

/// Exhaustive maximization of [`sum_rate`] over a grid. Ties go to the
/// smaller `p`, then the smaller `γ`.
pub fn grid_maximize_sum_rate(k: usize, grid: &SumRateGrid, mh: &MhTable) -> Result<GridOptimum> {
    if grid.p.is_empty() || grid.gamma.is_empty() {
        return Err(Error::domain("sum-rate grid is empty"));
    }
    let mut ps = grid.p.clone();
    let mut gammas = grid.gamma.clone();
    ps.sort_by(f64::total_cmp);
    gammas.sort_by(f64::total_cmp);
    let mut best: Option<GridOptimum> = None;
    for &p in &ps {
        for &gamma in &gammas {
            let u = sum_rate(k, p, gamma, mh)?;
            if best.is_none_or(|b| u > b.sum_rate) {
                best = Some(GridOptimum {
                    p,
                    gamma,
                    sum_rate: u,
                });
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemParams;
    use proptest::prelude::*;

    fn desk_cfg() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn fixed_params_for_fifty_nodes() {
        let fp = fixed_params(&desk_cfg()).unwrap();
        assert_eq!(fp.p, 1.0);
        assert!((fp.gamma - 1.0 / 20.28).abs() < 1e-15);
        assert!((fp.gamma - 0.049310).abs() < 1e-6);
        assert!((fp.slot - 57.6e-3).abs() < 0.05e-3);
    }

    #[test]
    fn fixed_params_single_node() {
        let cfg = SystemConfig::new(SystemParams {
            n: 1,
            ..SystemParams::default()
        })
        .unwrap();
        assert!((fixed_params(&cfg).unwrap().gamma - 1.0 / (0.39 + 0.78)).abs() < 1e-15);
    }

    #[test]
    fn adaptive_params_examples() {
        let cfg = desk_cfg();
        let a1 = adaptive_params(1, &cfg).unwrap();
        assert_eq!((a1.p, a1.gamma), (1.0, 31.0));
        assert!((a1.slot - 0.8e-3).abs() < 1e-15);
        let a5 = adaptive_params(5, &cfg).unwrap();
        assert_eq!((a5.p, a5.gamma), (0.2, 31.0));
        let a6 = adaptive_params(6, &cfg).unwrap();
        assert_eq!(a6.p, 1.0);
        assert!((a6.gamma - 1.0 / (0.39 * 6.0 + 0.78)).abs() < 1e-15);
        let a50 = adaptive_params(50, &cfg).unwrap();
        assert_eq!(a50, fixed_params(&cfg).unwrap());
        assert!(adaptive_params(0, &cfg).is_err());
    }

    #[test]
    fn sic_branch_is_monotone_in_backlog() {
        let cfg = desk_cfg();
        let branch: Vec<_> = (cfg.k_c()..=200)
            .map(|k| adaptive_params(k, &cfg).unwrap())
            .collect();
        for w in branch.windows(2) {
            assert!(w[1].gamma < w[0].gamma);
            assert!(w[1].slot > w[0].slot);
        }
    }

    #[test]
    fn policy_table_layout() {
        let cfg = desk_cfg();
        let fixed = PolicyTable::new(Scheme::Fixed, &cfg).unwrap();
        assert_eq!(fixed.get(0), fixed_params(&cfg).unwrap());
        assert_eq!(fixed.get(50), fixed_params(&cfg).unwrap());
        let adaptive = PolicyTable::new(Scheme::Adaptive, &cfg).unwrap();
        assert_eq!(adaptive.get(0).slot, cfg.t0());
        assert_eq!(adaptive.get(3), adaptive_params(3, &cfg).unwrap());
        assert!((adaptive.max_slot() - fixed.max_slot()).abs() < 1e-15);
    }

    #[test]
    fn scheme_parse_roundtrip() {
        for s in [Scheme::Fixed, Scheme::Adaptive] {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("both".parse::<Scheme>().is_err());
    }

    #[test]
    fn sum_rate_edge_values() {
        let mh = MhTable::build(3, 31.0, 0.1, 50_000, 1).unwrap();
        assert_eq!(sum_rate(3, 0.0, 31.0, &mh).unwrap(), 0.0);
        let u = sum_rate(1, 1.0, 31.0, &mh).unwrap();
        let m1 = mh.get(1, 31.0).unwrap();
        assert!((u - 5.0 * m1.estimate).abs() < 1e-12);
        assert!((u - 5.0 * 0.9).abs() <= 5.0 * 3.0 * m1.stderr);
        assert!(matches!(
            sum_rate(4, 0.5, 31.0, &mh),
            Err(Error::MissingMh { h: 4, .. })
        ));
        assert!(sum_rate(3, 1.5, 31.0, &mh).is_err());
    }

    #[test]
    fn grid_single_point_and_tie_break() {
        let mh = MhTable::build(2, 1.0, 0.1, 2000, 1).unwrap();
        let grid = SumRateGrid {
            p: vec![0.5],
            gamma: vec![1.0],
        };
        let opt = grid_maximize_sum_rate(2, &grid, &mh).unwrap();
        assert_eq!((opt.p, opt.gamma), (0.5, 1.0));
        assert_eq!(opt.sum_rate, sum_rate(2, 0.5, 1.0, &mh).unwrap());
        // k = 0: every point has zero rate, so the smallest p and γ win.
        let grid = SumRateGrid {
            p: vec![0.9, 0.1],
            gamma: vec![1.0],
        };
        let opt = grid_maximize_sum_rate(0, &grid, &mh).unwrap();
        assert_eq!(opt.p, 0.1);
        let empty = SumRateGrid {
            p: vec![],
            gamma: vec![1.0],
        };
        assert!(grid_maximize_sum_rate(1, &empty, &mh).is_err());
    }

    #[test]
    fn single_contender_optimum_is_gamma_max_full_power() {
        let grid = SumRateGrid::standard(31.0);
        assert_eq!(grid.p.len(), 20);
        assert_eq!(grid.gamma.len(), 40);
        assert!(grid.gamma[0] > 1e-3);
        assert_eq!(*grid.gamma.last().unwrap(), 31.0);
        let mut mh = MhTable::new(0.1).unwrap();
        for &g in &grid.gamma {
            mh.ensure(1, g, 20_000, 3).unwrap();
        }
        let opt = grid_maximize_sum_rate(1, &grid, &mh).unwrap();
        assert_eq!(opt.p, 1.0);
        assert_eq!(opt.gamma, 31.0);
        let at_policy = sum_rate(1, 1.0, 31.0, &mh).unwrap();
        assert!(opt.sum_rate >= at_policy);
    }

    proptest! {
        #[test]
        fn every_backlog_maps_to_valid_params(k in 1usize..500) {
            let cfg = desk_cfg();
            let sp = adaptive_params(k, &cfg).unwrap();
            prop_assert!(sp.p > 0.0 && sp.p <= 1.0);
            prop_assert!(sp.gamma > 0.0 && sp.gamma <= cfg.gamma_max());
            prop_assert_eq!(sp.slot, cfg.slot_time(sp.gamma).unwrap());
        }
    }
}
