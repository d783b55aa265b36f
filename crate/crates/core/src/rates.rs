//! Scenario-level ergodic rates: two-way, two-hop and two-way two-hop, HD
//! and FD, with time-split, relay-split and relay-power optimization.
//!
//! Every link draws its channels from its own stream (`McConfig::stream`
//! with a per-link tag), so candidates that differ only in SINR see the same
//! fading realizations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dof::ScenarioSpec;
use crate::error::{invalid, Error, Result};
use crate::mimo::{ergodic_rate, estimate_joint, ChannelSample, McConfig, RateEstimate, RateWorkspace};
use crate::model::{
    antenna_allocation, fd_splits, residual_si_power, sinr, AntennaSplit, DuplexMode, LinkBudget, SiParams,
};

/// Time-split grid for HD relaying.
pub const TAU_GRID: usize = 201;

/// Relay power grid density (points per decade).
pub const POWER_POINTS_PER_DECADE: usize = 61;

/// Lowest relay power considered by the power search.
pub const MIN_RELAY_POWER: f64 = 1e-2;

mod tag {
    pub const AB: u64 = 1;
    pub const BA: u64 = 2;
    pub const AR: u64 = 3;
    pub const RB: u64 = 4;
    pub const BR: u64 = 5;
    pub const RA: u64 = 6;
}

/// Budgets of the end nodes and, for relayed scenarios, the relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeBudgets {
    pub a: LinkBudget,
    pub b: LinkBudget,
    pub relay: Option<LinkBudget>,
}

impl NodeBudgets {
    pub fn two_way(a: LinkBudget, b: LinkBudget) -> Self {
        Self { a, b, relay: None }
    }

    pub fn relayed(a: LinkBudget, relay: LinkBudget, b: LinkBudget) -> Self {
        Self { a, b, relay: Some(relay) }
    }

    fn relay(&self) -> Result<&LinkBudget> {
        self.relay.as_ref().ok_or_else(|| invalid("relay", "relayed scenarios need a relay budget"))
    }
}

/// Operating point behind a [`ScenarioRates`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub tau: Option<f64>,
    /// `log P_coupled / log P_A` implied by the powers, when `P_A > 1`.
    pub gamma: Option<f64>,
    pub relay_power: Option<f64>,
    pub relay_power_second_phase: Option<f64>,
    pub r: Option<usize>,
    pub r_second_phase: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRates {
    pub r_ab: RateEstimate,
    pub r_ba: Option<RateEstimate>,
    pub params_used: RateParams,
    pub mode: DuplexMode,
}

/// How the two-way channel shares the medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TwoWayControl {
    /// HD: fraction of time A transmits.
    Tau(f64),
    /// FD: receive antennas at A and at B.
    Splits { rx_a: usize, rx_b: usize },
}

fn implied_gamma(p_ref: f64, p: f64) -> Option<f64> {
    (p_ref > 1.0 && p > 0.0).then(|| p.ln() / p_ref.ln())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid("tau", format!("{tau} not in [0, 1]")));
    }
    Ok(())
}

fn link(n_rx: usize, n_tx: usize, gamma: f64, cfg: &McConfig, link_tag: u64) -> Result<RateEstimate> {
    ergodic_rate(n_rx, n_tx, gamma, &cfg.stream(link_tag))
}

fn min_rate(x: RateEstimate, y: RateEstimate) -> RateEstimate {
    if y.mean_rate < x.mean_rate {
        y
    } else {
        x
    }
}

fn two_way_counts(spec: &ScenarioSpec) -> Result<(usize, usize)> {
    spec.validate()?;
    match *spec {
        ScenarioSpec::TwoWay { n_a, n_b } => Ok((n_a, n_b)),
        _ => Err(invalid("scenario", format!("expected two-way, got {}", spec.name()))),
    }
}

fn relay_counts(spec: &ScenarioSpec, want_two_way: bool) -> Result<(usize, usize, usize)> {
    spec.validate()?;
    match (*spec, want_two_way) {
        (ScenarioSpec::TwoHop { n_a, n_r, n_b }, false) | (ScenarioSpec::TwoWayTwoHop { n_a, n_r, n_b }, true) => {
            Ok((n_a, n_r, n_b))
        }
        _ => Err(invalid("scenario", format!("unexpected scenario {}", spec.name()))),
    }
}

/// Two-way rates. HD time-shares the channel with fraction `tau` for A -> B;
/// FD runs both directions all the time, each receiver seeing the residual SI
/// of its own transmitter.
pub fn twoway_rates(
    spec: &ScenarioSpec,
    mode: DuplexMode,
    budgets: &NodeBudgets,
    si: &SiParams,
    control: TwoWayControl,
    cfg: &McConfig,
) -> Result<ScenarioRates> {
    let (n_a, n_b) = two_way_counts(spec)?;
    let (a, b) = (&budgets.a, &budgets.b);
    match (mode, control) {
        (DuplexMode::HalfDuplex, TwoWayControl::Tau(tau)) => {
            check_tau(tau)?;
            let ab = link(n_b, n_a, sinr(a, b.noise_var(), 0.0), cfg, tag::AB)?;
            let ba = link(n_a, n_b, sinr(b, a.noise_var(), 0.0), cfg, tag::BA)?;
            Ok(ScenarioRates {
                r_ab: ab.scaled(tau),
                r_ba: Some(ba.scaled(1.0 - tau)),
                params_used: RateParams { tau: Some(tau), ..Default::default() },
                mode,
            })
        }
        (DuplexMode::HalfDuplex, TwoWayControl::Splits { .. }) => {
            Err(invalid("control", "half-duplex two-way needs a time split"))
        }
        (_, TwoWayControl::Tau(_)) => Err(invalid("control", "full-duplex two-way needs antenna splits")),
        (_, TwoWayControl::Splits { rx_a, rx_b }) => {
            let sa = antenna_allocation(n_a, mode, Some(rx_a))?;
            let sb = antenna_allocation(n_b, mode, Some(rx_b))?;
            let g_ab = sinr(a, b.noise_var(), residual_si_power(b.tx_power(), si));
            let g_ba = sinr(b, a.noise_var(), residual_si_power(a.tx_power(), si));
            Ok(ScenarioRates {
                r_ab: link(sb.rx, sa.tx, g_ab, cfg, tag::AB)?,
                r_ba: Some(link(sa.rx, sb.tx, g_ba, cfg, tag::BA)?),
                params_used: RateParams {
                    gamma: implied_gamma(a.tx_power(), b.tx_power()),
                    r: Some(rx_a),
                    r_second_phase: Some(rx_b),
                    ..Default::default()
                },
                mode,
            })
        }
    }
}

/// `tau` grid value maximizing `min(tau x, (1 - tau) y)`; ties keep the
/// smallest `tau`.
fn best_time_split(first: RateEstimate, second: RateEstimate) -> (f64, RateEstimate) {
    let mut best = (0.0, RateEstimate::zero(first.n_samples));
    for i in 0..TAU_GRID {
        let tau = i as f64 / (TAU_GRID - 1) as f64;
        let v = min_rate(first.scaled(tau), second.scaled(1.0 - tau));
        if v.mean_rate > best.1.mean_rate {
            best = (tau, v);
        }
    }
    best
}

/// HD decode-and-forward: `max_tau min(tau R_AR, (1 - tau) R_RB)`, or the
/// value at a given `tau`.
pub fn twohop_hd_rate(
    spec: &ScenarioSpec,
    budgets: &NodeBudgets,
    tau: Option<f64>,
    cfg: &McConfig,
) -> Result<ScenarioRates> {
    let (n_a, n_r, n_b) = relay_counts(spec, false)?;
    let relay = budgets.relay()?;
    let ar = link(n_r, n_a, sinr(&budgets.a, relay.noise_var(), 0.0), cfg, tag::AR)?;
    let rb = link(n_b, n_r, sinr(relay, budgets.b.noise_var(), 0.0), cfg, tag::RB)?;
    let (tau, rate) = match tau {
        Some(t) => {
            check_tau(t)?;
            (t, min_rate(ar.scaled(t), rb.scaled(1.0 - t)))
        }
        None => best_time_split(ar, rb),
    };
    Ok(ScenarioRates {
        r_ab: rate,
        r_ba: None,
        params_used: RateParams { tau: Some(tau), ..Default::default() },
        mode: DuplexMode::HalfDuplex,
    })
}

/// Relay power policy for FD relaying.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RelayPower {
    Fixed(f64),
    UpTo(f64),
}

fn power_grid(policy: RelayPower) -> Vec<f64> {
    match policy {
        RelayPower::Fixed(p) => vec![p],
        RelayPower::UpTo(p_max) => {
            let decades = (p_max / MIN_RELAY_POWER).log10().ceil().max(1.0) as usize;
            let k = decades * POWER_POINTS_PER_DECADE;
            (0..=k)
                .map(|i| {
                    if i == k {
                        p_max
                    } else {
                        p_max * 10f64.powf(-((k - i) as f64) / POWER_POINTS_PER_DECADE as f64)
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct HopChoice {
    value: RateEstimate,
    split: AntennaSplit,
    p_r: f64,
}

struct Hop<'a> {
    n_src: usize,
    n_dst: usize,
    src: &'a LinkBudget,
    relay: &'a LinkBudget,
    dst: &'a LinkBudget,
    tags: (u64, u64),
}

impl Hop<'_> {
    fn rates(
        &self,
        split: &AntennaSplit,
        p_r: f64,
        si: &SiParams,
        cfg: &McConfig,
    ) -> Result<(RateEstimate, RateEstimate)> {
        let g_in = sinr(self.src, self.relay.noise_var(), residual_si_power(p_r, si));
        let g_out = sinr(&self.relay.with_tx_power(p_r)?, self.dst.noise_var(), 0.0);
        Ok((link(split.rx, self.n_src, g_in, cfg, self.tags.0)?, link(self.n_dst, split.tx, g_out, cfg, self.tags.1)?))
    }

    /// Best relay power for one split. The incoming rate is nonincreasing and
    /// the outgoing rate nondecreasing in `P_R` under shared draws, so the
    /// max-min sits at their crossing, found by bisection on the grid. Ties
    /// prefer the larger power.
    fn best_power(&self, split: &AntennaSplit, policy: RelayPower, si: &SiParams, cfg: &McConfig) -> Result<HopChoice> {
        let grid = power_grid(policy);
        let mut memo = BTreeMap::new();
        let mut eval = |i: usize| -> Result<(RateEstimate, RateEstimate)> {
            if let Some(v) = memo.get(&i) {
                return Ok(*v);
            }
            let v = self.rates(split, grid[i], si, cfg)?;
            memo.insert(i, v);
            Ok(v)
        };
        let last = grid.len() - 1;
        // smallest index where the outgoing hop is no longer the bottleneck
        let (mut lo, mut hi) = (0, grid.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (inc, out) = eval(mid)?;
            if out.mean_rate >= inc.mean_rate {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mut candidates = vec![last];
        if lo < grid.len() {
            candidates.push(lo);
        }
        if lo > 0 {
            candidates.push(lo - 1);
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut best: Option<(usize, RateEstimate)> = None;
        for i in candidates.into_iter().rev() {
            let (inc, out) = eval(i)?;
            let v = min_rate(inc, out);
            if best.is_none_or(|(_, b)| v.mean_rate > b.mean_rate) {
                best = Some((i, v));
            }
        }
        let (i, value) = best.expect("grid is never empty");
        Ok(HopChoice { value, split: *split, p_r: grid[i] })
    }

    /// Best split (smallest `r` on ties) and relay power.
    fn best(
        &self,
        n_r: usize,
        mode: DuplexMode,
        policy: RelayPower,
        si: &SiParams,
        cfg: &McConfig,
    ) -> Result<HopChoice> {
        let splits = fd_splits(n_r, mode);
        if splits.is_empty() {
            return Err(Error::EmptyDomain(format!("a full-duplex relay needs at least 2 antennas, got {n_r}")));
        }
        let mut best: Option<HopChoice> = None;
        for split in &splits {
            let c = self.best_power(split, policy, si, cfg)?;
            if best.is_none_or(|b| c.value.mean_rate > b.value.mean_rate) {
                best = Some(c);
            }
        }
        Ok(best.expect("splits is not empty"))
    }
}

fn require_fd(mode: DuplexMode) -> Result<()> {
    if !mode.is_full_duplex() {
        return Err(Error::Precondition(format!("mode `{mode}` is not full-duplex")));
    }
    Ok(())
}

/// FD decode-and-forward: `max_{r, P_R <= P_R_max} min(R_AR, R_RB)` with the
/// relay's residual SI in `R_AR`.
pub fn twohop_fd_rate(
    spec: &ScenarioSpec,
    mode: DuplexMode,
    budgets: &NodeBudgets,
    si: &SiParams,
    cfg: &McConfig,
) -> Result<ScenarioRates> {
    require_fd(mode)?;
    let (n_a, n_r, n_b) = relay_counts(spec, false)?;
    let relay = budgets.relay()?;
    let p_max =
        relay.max_relay_power().ok_or_else(|| Error::Precondition("FD relaying needs a maximum relay power".into()))?;
    let hop = Hop { n_src: n_a, n_dst: n_b, src: &budgets.a, relay, dst: &budgets.b, tags: (tag::AR, tag::RB) };
    let c = hop.best(n_r, mode, RelayPower::UpTo(p_max), si, cfg)?;
    Ok(ScenarioRates {
        r_ab: c.value,
        r_ba: None,
        params_used: RateParams {
            gamma: implied_gamma(budgets.a.tx_power(), c.p_r),
            relay_power: Some(c.p_r),
            r: Some(c.split.rx),
            ..Default::default()
        },
        mode,
    })
}

/// FD relaying at a fixed split `rx` and the relay's configured power.
pub fn twohop_fd_rate_at(
    spec: &ScenarioSpec,
    mode: DuplexMode,
    budgets: &NodeBudgets,
    si: &SiParams,
    rx: usize,
    cfg: &McConfig,
) -> Result<ScenarioRates> {
    require_fd(mode)?;
    let (n_a, n_r, n_b) = relay_counts(spec, false)?;
    let relay = budgets.relay()?;
    let split = antenna_allocation(n_r, mode, Some(rx))?;
    let hop = Hop { n_src: n_a, n_dst: n_b, src: &budgets.a, relay, dst: &budgets.b, tags: (tag::AR, tag::RB) };
    let (inc, out) = hop.rates(&split, relay.tx_power(), si, cfg)?;
    Ok(ScenarioRates {
        r_ab: min_rate(inc, out),
        r_ba: None,
        params_used: RateParams {
            gamma: implied_gamma(budgets.a.tx_power(), relay.tx_power()),
            relay_power: Some(relay.tx_power()),
            r: Some(rx),
            ..Default::default()
        },
        mode,
    })
}

/// MAC-phase bounds at the relay: `[E R_AR, E R_BR, E R_sum]`, all from one
/// set of channel draws.
pub fn mac_rates(
    n_a: usize,
    n_b: usize,
    n_r: usize,
    gamma_ar: f64,
    gamma_br: f64,
    cfg: &McConfig,
) -> Result<[RateEstimate; 3]> {
    if n_a == 0 || n_b == 0 || n_r == 0 {
        return Err(invalid("antennas", "every node needs at least one antenna"));
    }
    let seeds = [cfg.stream(tag::AR).seed, cfg.stream(tag::BR).seed];
    let (s_a, s_b) = (gamma_ar / n_a as f64, gamma_br / n_b as f64);
    let est = estimate_joint(
        cfg,
        &seeds,
        3,
        || {
            (
                ChannelSample::zeros(n_r, n_a),
                ChannelSample::zeros(n_r, n_b),
                [RateWorkspace::new(n_r.min(n_a)), RateWorkspace::new(n_r.min(n_b)), RateWorkspace::new(n_r)],
            )
        },
        |(h_a, h_b, ws), rngs, out| {
            h_a.resample(&mut rngs[0]);
            h_b.resample(&mut rngs[1]);
            out[0] = ws[0].rate(h_a, gamma_ar)?;
            out[1] = ws[1].rate(h_b, gamma_br)?;
            out[2] = ws[2].joint_rate(&[(s_a, &*h_a), (s_b, &*h_b)])?;
            Ok(())
        },
    )?;
    Ok([est[0], est[1], est[2]])
}

/// Two-way relaying. HD: MAC phase for `tau`, BC phase for `1 - tau`, with
/// the MAC sum-rate bound enforced by scaling both directions down
/// proportionally. FD: direction A -> B for `tau`, B -> A for `1 - tau`, each
/// through an FD relay with its own split and power.
pub fn twr_rates(
    spec: &ScenarioSpec,
    mode: DuplexMode,
    budgets: &NodeBudgets,
    si: &SiParams,
    tau: f64,
    cfg: &McConfig,
) -> Result<ScenarioRates> {
    check_tau(tau)?;
    let (n_a, n_r, n_b) = relay_counts(spec, true)?;
    let relay = budgets.relay()?;
    let (a, b) = (&budgets.a, &budgets.b);
    if mode == DuplexMode::HalfDuplex {
        let g_ar = sinr(a, relay.noise_var(), 0.0);
        let g_br = sinr(b, relay.noise_var(), 0.0);
        let [ar, br, sum] = mac_rates(n_a, n_b, n_r, g_ar, g_br, cfg)?;
        let rb = link(n_b, n_r, sinr(relay, b.noise_var(), 0.0), cfg, tag::RB)?;
        let ra = link(n_a, n_r, sinr(relay, a.noise_var(), 0.0), cfg, tag::RA)?;
        let mut ab = min_rate(ar.scaled(tau), rb.scaled(1.0 - tau));
        let mut ba = min_rate(br.scaled(tau), ra.scaled(1.0 - tau));
        let total = ab.mean_rate + ba.mean_rate;
        let cap = sum.mean_rate * tau;
        if total > cap * (1.0 + 1e-12) {
            let s = cap / total;
            ab = ab.scaled(s);
            ba = ba.scaled(s);
        }
        return Ok(ScenarioRates {
            r_ab: ab,
            r_ba: Some(ba),
            params_used: RateParams { tau: Some(tau), ..Default::default() },
            mode,
        });
    }
    let policy = match relay.max_relay_power() {
        Some(p) => RelayPower::UpTo(p),
        None => RelayPower::Fixed(relay.tx_power()),
    };
    let fwd = Hop { n_src: n_a, n_dst: n_b, src: a, relay, dst: b, tags: (tag::AR, tag::RB) };
    let bwd = Hop { n_src: n_b, n_dst: n_a, src: b, relay, dst: a, tags: (tag::BR, tag::RA) };
    let ab = fwd.best(n_r, mode, policy, si, cfg)?;
    let ba = bwd.best(n_r, mode, policy, si, cfg)?;
    Ok(ScenarioRates {
        r_ab: ab.value.scaled(tau),
        r_ba: Some(ba.value.scaled(1.0 - tau)),
        params_used: RateParams {
            tau: Some(tau),
            gamma: implied_gamma(a.tx_power(), ab.p_r),
            relay_power: Some(ab.p_r),
            relay_power_second_phase: Some(ba.p_r),
            r: Some(ab.split.rx),
            r_second_phase: Some(ba.split.rx),
        },
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const AC: DuplexMode = DuplexMode::AntennaConservedFD;

    fn cfg(n: u64) -> McConfig {
        McConfig::new(n, 7, 1024).unwrap()
    }

    fn nb(p: f64) -> LinkBudget {
        LinkBudget::normalized(p).unwrap()
    }

    fn relay(p: f64) -> LinkBudget {
        nb(p).with_max_relay_power(p).unwrap()
    }

    #[test]
    fn hd_two_way_halves_point_to_point() {
        let spec = ScenarioSpec::TwoWay { n_a: 2, n_b: 2 };
        let c = cfg(4000);
        let r = twoway_rates(
            &spec,
            DuplexMode::HalfDuplex,
            &NodeBudgets::two_way(nb(100.0), nb(100.0)),
            &SiParams::with_lambda(1.0).unwrap(),
            TwoWayControl::Tau(0.5),
            &c,
        )
        .unwrap();
        let p2p = ergodic_rate(2, 2, 100.0, &c.stream(tag::AB)).unwrap();
        assert!((r.r_ab.mean_rate - p2p.mean_rate / 2.0).abs() < 1e-12);
        let p2p_ba = ergodic_rate(2, 2, 100.0, &c.stream(tag::BA)).unwrap();
        assert!((r.r_ba.unwrap().mean_rate - p2p_ba.mean_rate / 2.0).abs() < 1e-12);

        let r0 = twoway_rates(
            &spec,
            DuplexMode::HalfDuplex,
            &NodeBudgets::two_way(nb(100.0), nb(100.0)),
            &SiParams::with_lambda(1.0).unwrap(),
            TwoWayControl::Tau(0.0),
            &c,
        )
        .unwrap();
        assert_eq!(r0.r_ab.mean_rate, 0.0);
    }

    #[test]
    fn fd_two_way_with_perfect_cancellation_doubles_noise_floor() {
        let spec = ScenarioSpec::TwoWay { n_a: 2, n_b: 2 };
        let c = cfg(2000);
        let si = SiParams::with_lambda(1.0).unwrap();
        let r = twoway_rates(
            &spec,
            AC,
            &NodeBudgets::two_way(nb(50.0), nb(80.0)),
            &si,
            TwoWayControl::Splits { rx_a: 1, rx_b: 1 },
            &c,
        )
        .unwrap();
        let expect = ergodic_rate(1, 1, 50.0 / 2.0, &c.stream(tag::AB)).unwrap();
        assert_eq!(r.r_ab, expect);
    }

    #[test]
    fn control_must_match_mode() {
        let spec = ScenarioSpec::TwoWay { n_a: 2, n_b: 2 };
        let b = NodeBudgets::two_way(nb(10.0), nb(10.0));
        let si = SiParams::with_lambda(0.5).unwrap();
        assert!(twoway_rates(&spec, AC, &b, &si, TwoWayControl::Tau(0.5), &cfg(10)).is_err());
        assert!(twoway_rates(
            &spec,
            DuplexMode::HalfDuplex,
            &b,
            &si,
            TwoWayControl::Splits { rx_a: 1, rx_b: 1 },
            &cfg(10)
        )
        .is_err());
        assert!(matches!(
            twoway_rates(&spec, AC, &b, &si, TwoWayControl::Splits { rx_a: 2, rx_b: 1 }, &cfg(10)),
            Err(Error::FdSplitOutOfRange { .. })
        ));
    }

    #[test]
    fn hd_relay_time_split() {
        let c = cfg(3000);
        let sym = twohop_hd_rate(
            &ScenarioSpec::TwoHop { n_a: 2, n_r: 2, n_b: 2 },
            &NodeBudgets::relayed(nb(1e3), nb(1e3), nb(1e3)),
            None,
            &c,
        )
        .unwrap();
        assert!((sym.params_used.tau.unwrap() - 0.5).abs() <= 0.02);

        let spec = ScenarioSpec::TwoHop { n_a: 2, n_r: 6, n_b: 3 };
        let hi = twohop_hd_rate(&spec, &NodeBudgets::relayed(nb(1e8), nb(1e8), nb(1e8)), None, &c).unwrap();
        assert!((hi.params_used.tau.unwrap() - 0.6).abs() <= 0.03, "{:?}", hi.params_used);

        let none = twohop_hd_rate(&spec, &NodeBudgets::relayed(nb(1e3), nb(1e3), nb(1e3)), Some(1.0), &c).unwrap();
        assert_eq!(none.r_ab.mean_rate, 0.0);
    }

    #[test]
    fn hd_relay_optimum_dominates_grid() {
        let spec = ScenarioSpec::TwoHop { n_a: 2, n_r: 3, n_b: 1 };
        let b = NodeBudgets::relayed(nb(300.0), nb(100.0), nb(1.0));
        let c = cfg(2000);
        let best = twohop_hd_rate(&spec, &b, None, &c).unwrap().r_ab.mean_rate;
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            assert!(twohop_hd_rate(&spec, &b, Some(t), &c).unwrap().r_ab.mean_rate <= best + 1e-12);
        }
    }

    #[test]
    fn fd_relay_perfect_cancellation_uses_full_power() {
        let spec = ScenarioSpec::TwoHop { n_a: 2, n_r: 4, n_b: 2 };
        let si = SiParams::with_lambda(1.0).unwrap();
        let r =
            twohop_fd_rate(&spec, AC, &NodeBudgets::relayed(nb(1e4), relay(1e4), nb(1e4)), &si, &cfg(1000)).unwrap();
        assert_eq!(r.params_used.relay_power, Some(1e4));
    }

    #[test]
    fn fd_relay_linear_si_balances_hops() {
        let spec = ScenarioSpec::TwoHop { n_a: 1, n_r: 2, n_b: 1 };
        let si = SiParams::with_lambda(0.0).unwrap();
        let c = cfg(2000);
        let r = twohop_fd_rate(&spec, AC, &NodeBudgets::relayed(nb(1e4), relay(1e12), nb(1e4)), &si, &c).unwrap();
        let p = r.params_used.relay_power.unwrap();
        assert!(p > MIN_RELAY_POWER && p < 1e12, "{p}");
        // one grid step further the incoming hop is worse
        let b_up = NodeBudgets::relayed(nb(1e4), nb(p * 10f64.powf(1.0 / 61.0)), nb(1e4));
        let s = antenna_allocation(2, AC, Some(1)).unwrap();
        let hop = Hop {
            n_src: 1,
            n_dst: 1,
            src: &b_up.a,
            relay: b_up.relay.as_ref().unwrap(),
            dst: &b_up.b,
            tags: (tag::AR, tag::RB),
        };
        let (inc_here, _) = hop.rates(&s, p, &si, &c).unwrap();
        let (inc_up, _) = hop.rates(&s, p * 10f64.powf(1.0 / 61.0), &si, &c).unwrap();
        assert!(inc_up.mean_rate < inc_here.mean_rate);
    }

    #[test]
    fn fd_relay_power_search_matches_exhaustive_grid() {
        let spec = ScenarioSpec::TwoHop { n_a: 2, n_r: 3, n_b: 2 };
        let si = SiParams::with_lambda(0.3).unwrap();
        let c = cfg(500);
        let b = NodeBudgets::relayed(nb(1e3), relay(1e5), nb(1e3));
        let r = twohop_fd_rate(&spec, AC, &b, &si, &c).unwrap();
        let hop = Hop {
            n_src: 2,
            n_dst: 2,
            src: &b.a,
            relay: b.relay.as_ref().unwrap(),
            dst: &b.b,
            tags: (tag::AR, tag::RB),
        };
        let mut best = 0.0f64;
        for s in fd_splits(3, AC) {
            for p in power_grid(RelayPower::UpTo(1e5)) {
                let (i, o) = hop.rates(&s, p, &si, &c).unwrap();
                best = best.max(i.mean_rate.min(o.mean_rate));
            }
        }
        assert!((r.r_ab.mean_rate - best).abs() < 1e-12);
    }

    #[test]
    fn fd_relay_picks_balanced_split() {
        let spec = ScenarioSpec::TwoHop { n_a: 4, n_r: 8, n_b: 4 };
        let si = SiParams::with_lambda(0.5).unwrap();
        let r = twohop_fd_rate(&spec, AC, &NodeBudgets::relayed(nb(1e6), relay(1e6), nb(1e6)), &si, &cfg(400)).unwrap();
        assert_eq!(r.params_used.r, Some(4));
    }

    #[test]
    fn fd_relay_needs_power_cap_and_two_antennas() {
        let si = SiParams::with_lambda(0.5).unwrap();
        let spec = ScenarioSpec::TwoHop { n_a: 1, n_r: 2, n_b: 1 };
        assert!(matches!(
            twohop_fd_rate(&spec, AC, &NodeBudgets::relayed(nb(10.0), nb(10.0), nb(10.0)), &si, &cfg(10)),
            Err(Error::Precondition(_))
        ));
        let spec = ScenarioSpec::TwoHop { n_a: 1, n_r: 1, n_b: 1 };
        assert!(matches!(
            twohop_fd_rate(&spec, AC, &NodeBudgets::relayed(nb(10.0), relay(10.0), nb(10.0)), &si, &cfg(10)),
            Err(Error::EmptyDomain(_))
        ));
    }

    #[test]
    fn perfect_cancellation_dominates_at_equal_power() {
        let spec = ScenarioSpec::TwoHop { n_a: 2, n_r: 4, n_b: 2 };
        let b = NodeBudgets::relayed(nb(1e3), relay(1e3), nb(1e3));
        let c = cfg(1000);
        let hi = twohop_fd_rate(&spec, AC, &b, &SiParams::with_lambda(1.0).unwrap(), &c).unwrap();
        for l in [0.0, 0.5, 0.9] {
            let lo = twohop_fd_rate(&spec, AC, &b, &SiParams::with_lambda(l).unwrap(), &c).unwrap();
            assert!(hi.r_ab.mean_rate > lo.r_ab.mean_rate, "lambda {l}");
        }
    }

    #[test]
    fn twr_hd_with_silent_node_is_one_way_relaying() {
        let c = cfg(2000);
        let si = SiParams::with_lambda(1.0).unwrap();
        let b = NodeBudgets::relayed(nb(500.0), nb(300.0), nb(0.0));
        let twr =
            twr_rates(&ScenarioSpec::TwoWayTwoHop { n_a: 2, n_r: 3, n_b: 2 }, DuplexMode::HalfDuplex, &b, &si, 0.4, &c)
                .unwrap();
        let one = twohop_hd_rate(&ScenarioSpec::TwoHop { n_a: 2, n_r: 3, n_b: 2 }, &b, Some(0.4), &c).unwrap();
        assert!((twr.r_ab.mean_rate - one.r_ab.mean_rate).abs() < 1e-9);
        assert_eq!(twr.r_ba.unwrap().mean_rate, 0.0);
    }

    #[test]
    fn twr_hd_respects_mac_bounds_on_fresh_draws() {
        let spec = ScenarioSpec::TwoWayTwoHop { n_a: 2, n_r: 2, n_b: 2 };
        let si = SiParams::with_lambda(1.0).unwrap();
        let b = NodeBudgets::relayed(nb(1e3), nb(1e5), nb(1e3));
        let tau = 0.7;
        let r = twr_rates(&spec, DuplexMode::HalfDuplex, &b, &si, tau, &cfg(4000)).unwrap();
        let held_out = McConfig::new(4000, 99, 1024).unwrap();
        let [ar, br, sum] = mac_rates(2, 2, 2, 1e3, 1e3, &held_out).unwrap();
        let (ab, ba) = (r.r_ab.mean_rate, r.r_ba.unwrap().mean_rate);
        assert!(ab <= tau * (ar.mean_rate + 3.0 * ar.std_err));
        assert!(ba <= tau * (br.mean_rate + 3.0 * br.std_err));
        assert!(ab + ba <= tau * (sum.mean_rate + 3.0 * sum.std_err));
        // the sum bound is active here: individual MAC rates would exceed it
        assert!(ar.mean_rate + br.mean_rate > sum.mean_rate);
    }

    #[test]
    fn twr_fd_time_sharing() {
        let spec = ScenarioSpec::TwoWayTwoHop { n_a: 2, n_r: 4, n_b: 3 };
        let si = SiParams::with_lambda(0.8).unwrap();
        let b = NodeBudgets::relayed(nb(1e3), relay(1e3), nb(1e3));
        let c = cfg(500);
        let full = twr_rates(&spec, AC, &b, &si, 1.0, &c).unwrap();
        assert_eq!(full.r_ba.unwrap().mean_rate, 0.0);
        let half = twr_rates(&spec, AC, &b, &si, 0.5, &c).unwrap();
        assert!((half.r_ab.mean_rate - full.r_ab.mean_rate / 2.0).abs() < 1e-12);
        assert!(half.params_used.r.is_some() && half.params_used.r_second_phase.is_some());
    }
}
