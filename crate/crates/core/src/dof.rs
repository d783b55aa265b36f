//! Closed-form DoF expressions and regions for the two-way, two-hop and
//! two-way two-hop channels, with the HD vs FD crossover conditions.
//!
//! Full-duplex DoF come from the power coupling `log P_B / log P_A = gamma`:
//! a receiver whose own transmitter runs at `P^gamma` sees residual SI growing
//! like `P^(gamma (1 - lambda))`, which eats `gamma (1 - lambda)` of its
//! multiplexing gain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{antenna_allocation, fd_splits, AntennaSplit, DuplexMode, SiParams};
use crate::region::{DofPoint, DofRegion};
use crate::search::convex_hull;

/// Uniform grid size for gamma sweeps.
pub const GAMMA_GRID: usize = 2001;

/// Ties between algebraically equal DoF values.
const TIE_EPS: f64 = 1e-12;

/// Slack used when comparing a count against a real threshold.
const THRESHOLD_EPS: f64 = 1e-9;

/// Exponent `gamma` in `log P_B / log P_A = gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCoupling {
    gamma_exp: f64,
}

impl PowerCoupling {
    pub fn new(gamma_exp: f64) -> Result<Self> {
        if !(gamma_exp.is_finite() && gamma_exp > 0.0) {
            return Err(invalid("gamma", format!("{gamma_exp} must be positive")));
        }
        Ok(Self { gamma_exp })
    }

    /// Relays may only scale their power down: `0 < gamma <= 1`.
    pub fn for_relay(gamma_exp: f64) -> Result<Self> {
        let c = Self::new(gamma_exp)?;
        if gamma_exp > 1.0 {
            return Err(invalid("gamma", format!("{gamma_exp} exceeds 1 for a relay")));
        }
        Ok(c)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_exp
    }

    /// Power of the coupled node when the reference node transmits `p_ref`.
    pub fn coupled_power(&self, p_ref: f64) -> f64 {
        p_ref.powf(self.gamma_exp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    TwoWay { n_a: usize, n_b: usize },
    TwoHop { n_a: usize, n_r: usize, n_b: usize },
    TwoWayTwoHop { n_a: usize, n_r: usize, n_b: usize },
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let counts: &[usize] = match self {
            ScenarioSpec::TwoWay { n_a, n_b } => &[*n_a, *n_b],
            ScenarioSpec::TwoHop { n_a, n_r, n_b } | ScenarioSpec::TwoWayTwoHop { n_a, n_r, n_b } => {
                &[*n_a, *n_r, *n_b]
            }
        };
        if counts.contains(&0) {
            return Err(invalid("antennas", "every node needs at least one antenna"));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioSpec::TwoWay { .. } => "two-way",
            ScenarioSpec::TwoHop { .. } => "two-hop",
            ScenarioSpec::TwoWayTwoHop { .. } => "twr",
        }
    }
}

fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

fn require_counts(counts: &[usize]) -> Result<()> {
    if counts.contains(&0) {
        return Err(invalid("antennas", "every node needs at least one antenna"));
    }
    Ok(())
}

fn require_fd(mode: DuplexMode) -> Result<()> {
    if !mode.is_full_duplex() {
        return Err(Error::Precondition(format!("mode `{mode}` is not full-duplex")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Two-way channel

/// HD time sharing: `(tau, 1 - tau) * min(N_A, N_B)`.
pub fn twoway_hd_point(n_a: usize, n_b: usize, tau: f64) -> Result<DofPoint> {
    require_counts(&[n_a, n_b])?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(invalid("tau", format!("{tau} not in [0, 1]")));
    }
    let m = n_a.min(n_b) as f64;
    DofPoint::new(tau * m, (1.0 - tau) * m)
}

/// `{d_ab + d_ba <= min(N_A, N_B)}`.
pub fn twoway_hd_region(n_a: usize, n_b: usize) -> Result<DofRegion> {
    Ok(convex_hull(&[twoway_hd_point(n_a, n_b, 1.0)?, twoway_hd_point(n_a, n_b, 0.0)?]))
}

fn check_split(n: usize, mode: DuplexMode, split: &AntennaSplit) -> Result<()> {
    let expected = antenna_allocation(n, mode, Some(split.rx))?;
    if expected != *split {
        return Err(invalid("split", format!("{split:?} does not match the {mode} allocation of {n} antennas")));
    }
    Ok(())
}

/// FD two-way DoF pair for given splits and coupling:
/// `d_ab = [1 - gamma (1 - lambda)]^+ min(r_B, t_A)`,
/// `d_ba = [1 - (1 - lambda) / gamma]^+ min(r_A, t_B)`.
pub fn twoway_fd_point(
    n_a: usize,
    n_b: usize,
    mode: DuplexMode,
    split_a: &AntennaSplit,
    split_b: &AntennaSplit,
    coupling: &PowerCoupling,
    si: &SiParams,
) -> Result<DofPoint> {
    require_fd(mode)?;
    check_split(n_a, mode, split_a)?;
    check_split(n_b, mode, split_b)?;
    Ok(fd_pair(split_a, split_b, coupling.gamma(), si.leakage()))
}

fn fd_pair(a: &AntennaSplit, b: &AntennaSplit, gamma: f64, leak: f64) -> DofPoint {
    DofPoint::unchecked(
        positive_part(1.0 - gamma * leak) * a.tx.min(b.rx) as f64,
        positive_part(1.0 - leak / gamma) * a.rx.min(b.tx) as f64,
    )
}

/// Gamma values swept for two-way regions: a uniform grid on `(0, 1]`, its
/// reciprocals on `[1, inf)`, and the analytic breakpoints.
fn twoway_gammas(si: &SiParams) -> Vec<f64> {
    let leak = si.leakage();
    let mut gs: Vec<f64> = (1..=GAMMA_GRID).map(|i| i as f64 / GAMMA_GRID as f64).collect();
    let recips: Vec<f64> = gs.iter().map(|g| 1.0 / g).collect();
    gs.extend(recips);
    gs.push(1.0 / (2.0 - si.lambda()));
    gs.push(2.0 - si.lambda());
    if leak > 0.0 {
        gs.push(leak);
        gs.push(1.0 / leak);
    }
    gs
}

/// One generator of an FD two-way region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoWayGenerator {
    pub point: DofPoint,
    pub rx_a: usize,
    pub rx_b: usize,
    /// `None` for the silent-node limits `gamma -> 0` and `gamma -> inf`.
    pub gamma: Option<f64>,
}

/// Every generator point of the FD two-way region: all split pairs, the gamma
/// sweep, and the axis corners reached when one node stops transmitting.
pub fn twoway_fd_generators(n_a: usize, n_b: usize, mode: DuplexMode, si: &SiParams) -> Result<Vec<TwoWayGenerator>> {
    twoway_fd_generators_with(n_a, n_b, mode, si, &twoway_gammas(si))
}

fn twoway_fd_generators_with(
    n_a: usize,
    n_b: usize,
    mode: DuplexMode,
    si: &SiParams,
    gammas: &[f64],
) -> Result<Vec<TwoWayGenerator>> {
    require_fd(mode)?;
    require_counts(&[n_a, n_b])?;
    let leak = si.leakage();
    let (sa, sb) = (fd_splits(n_a, mode), fd_splits(n_b, mode));
    let mut out = Vec::with_capacity(sa.len() * sb.len() * (gammas.len() + 2));
    for a in &sa {
        for b in &sb {
            out.push(TwoWayGenerator {
                point: DofPoint::unchecked(a.tx.min(b.rx) as f64, 0.0),
                rx_a: a.rx,
                rx_b: b.rx,
                gamma: None,
            });
            out.push(TwoWayGenerator {
                point: DofPoint::unchecked(0.0, a.rx.min(b.tx) as f64),
                rx_a: a.rx,
                rx_b: b.rx,
                gamma: None,
            });
            for &g in gammas {
                out.push(TwoWayGenerator { point: fd_pair(a, b, g, leak), rx_a: a.rx, rx_b: b.rx, gamma: Some(g) });
            }
        }
    }
    Ok(out)
}

/// Convex hull of all FD two-way DoF pairs.
pub fn twoway_fd_region(n_a: usize, n_b: usize, mode: DuplexMode, si: &SiParams) -> Result<DofRegion> {
    let pts: Vec<DofPoint> = twoway_fd_generators(n_a, n_b, mode, si)?.into_iter().map(|g| g.point).collect();
    Ok(convex_hull(&pts))
}

/// Outcome of the AC FD vs HD sum-DoF comparison on the two-way channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    /// Interior maximum stays below `min(N_A, N_B)`.
    pub holds: bool,
    /// Largest `d_ab + d_ba` over AC FD pairs with both entries positive.
    pub max_interior_sum: f64,
    /// `(1 - (1 - lambda)^2) min(N_A, N_B)`.
    pub bound: f64,
    pub hd_sum: f64,
}

/// Sum-DoF check for the antenna-conserved two-way channel with imperfect
/// cancellation (`lambda < 1`).
pub fn prop1_check(n_a: usize, n_b: usize, si: &SiParams) -> Result<Prop1Report> {
    require_counts(&[n_a, n_b])?;
    if si.lambda() >= 1.0 {
        return Err(Error::Precondition("the AC FD sum-DoF bound needs lambda < 1".into()));
    }
    let leak = si.leakage();
    let mode = DuplexMode::AntennaConservedFD;
    let mut gammas = twoway_gammas(si);
    // stationary point of the sum for each split pair
    for a in fd_splits(n_a, mode) {
        for b in fd_splits(n_b, mode) {
            let (m1, m2) = (a.tx.min(b.rx) as f64, a.rx.min(b.tx) as f64);
            gammas.push((m2 / m1).sqrt());
        }
    }
    let max_interior_sum = twoway_fd_generators_with(n_a, n_b, mode, si, &gammas)?
        .iter()
        .filter(|g| g.point.d_ab > 0.0 && g.point.d_ba > 0.0)
        .map(|g| g.point.sum())
        .fold(0.0, f64::max);
    let hd_sum = n_a.min(n_b) as f64;
    Ok(Prop1Report { holds: max_interior_sum < hd_sum, max_interior_sum, bound: (1.0 - leak * leak) * hd_sum, hd_sum })
}

fn prop2_construction(n_a: usize, n_b: usize) -> Option<(AntennaSplit, AntennaSplit)> {
    let mode = DuplexMode::RfChainConservedFD;
    let a = antenna_allocation(n_a, mode, Some(2 * n_a / 3)).ok()?;
    let b = antenna_allocation(n_b, mode, Some(2 * n_b / 3)).ok()?;
    Some((a, b))
}

/// RC FD two-way point at `gamma = 1`, `r = floor(2N/3)` on both nodes,
/// returned when its sum DoF beats HD's `min(N_A, N_B)`.
pub fn prop2_witness(n_a: usize, n_b: usize, si: &SiParams) -> Option<DofPoint> {
    let (a, b) = prop2_construction(n_a, n_b)?;
    let p = fd_pair(&a, &b, 1.0, si.leakage());
    (p.sum() > n_a.min(n_b) as f64 + THRESHOLD_EPS).then_some(p)
}

/// Smallest-lambda threshold of the construction in [`prop2_witness`]: a
/// witness exists iff `lambda` strictly exceeds the returned value. `None`
/// when no `lambda <= 1` works.
pub fn prop2_threshold(n_a: usize, n_b: usize) -> Option<f64> {
    let (a, b) = prop2_construction(n_a, n_b)?;
    let s = (a.tx.min(b.rx) + a.rx.min(b.tx)) as f64;
    let th = n_a.min(n_b) as f64 / s;
    (th < 1.0).then_some(th)
}

// ---------------------------------------------------------------------------
// Two-hop channel

/// Which HD relaying regime applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelayCase {
    /// `N_R <= min(N_A, N_B)`
    RelayBottleneck,
    /// `N_R >= max(N_A, N_B)`
    RelayRich,
    /// `N_A <= N_R <= N_B`
    SourceLimited,
    /// `N_B <= N_R <= N_A`
    DestinationLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdRelayDof {
    pub tau_opt: f64,
    pub dof: f64,
    pub case: RelayCase,
}

/// HD decode-and-forward relaying DoF and optimal time split, by case.
pub fn twohop_hd_dof(n_a: usize, n_r: usize, n_b: usize) -> Result<HdRelayDof> {
    require_counts(&[n_a, n_r, n_b])?;
    let (a, r, b) = (n_a as f64, n_r as f64, n_b as f64);
    let out = if n_r <= n_a.min(n_b) {
        HdRelayDof { tau_opt: 0.5, dof: r / 2.0, case: RelayCase::RelayBottleneck }
    } else if n_r >= n_a.max(n_b) {
        HdRelayDof { tau_opt: b / (b + a), dof: a * b / (b + a), case: RelayCase::RelayRich }
    } else if n_a <= n_r && n_r <= n_b {
        HdRelayDof { tau_opt: r / (r + a), dof: r * a / (r + a), case: RelayCase::SourceLimited }
    } else {
        HdRelayDof { tau_opt: b / (b + r), dof: r * b / (r + b), case: RelayCase::DestinationLimited }
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdRelayDof {
    pub dof: f64,
    /// Relay receive antennas at the optimum (`None` if no split exists).
    pub r_opt: Option<usize>,
    pub t_opt: Option<usize>,
    pub gamma_opt: Option<f64>,
}

/// `max_gamma min((1 - gamma c) u, gamma v)` over `0 < gamma <= 1`, with the
/// smallest maximizing gamma.
fn balance(u: f64, v: f64, leak: f64) -> (f64, f64) {
    let gamma = (u / (v + leak * u)).min(1.0);
    let value = ((1.0 - gamma * leak) * u).min(gamma * v);
    (value, gamma)
}

/// FD decode-and-forward relaying DoF:
/// `max_{r, 0 < gamma <= 1} min((1 - gamma(1 - lambda)) min(N_A, r), gamma min(t, N_B))`
/// with `t` the relay's transmit antennas for the mode.
pub fn twohop_fd_dof(n_a: usize, n_r: usize, n_b: usize, mode: DuplexMode, si: &SiParams) -> Result<FdRelayDof> {
    require_fd(mode)?;
    require_counts(&[n_a, n_r, n_b])?;
    let leak = si.leakage();
    let mut best = FdRelayDof { dof: 0.0, r_opt: None, t_opt: None, gamma_opt: None };
    for split in fd_splits(n_r, mode) {
        let u = n_a.min(split.rx) as f64;
        let v = split.tx.min(n_b) as f64;
        let (value, gamma) = balance(u, v, leak);
        if best.r_opt.is_none() || value > best.dof + TIE_EPS {
            best = FdRelayDof { dof: value, r_opt: Some(split.rx), t_opt: Some(split.tx), gamma_opt: Some(gamma) };
        }
    }
    Ok(best)
}

/// Symmetric (`N_A = N_B = N`) FD relaying closed forms:
/// `min(N, N_R / 2) / (2 - lambda)` for AC and
/// `min(N, floor(2 N_R / 3)) / (2 - lambda)` for RC.
///
/// Both are achieved by a balanced split at `gamma = 1/(2 - lambda)`. They
/// equal [`twohop_fd_dof`] for `N_R` divisible by 3 (RC) and for most even
/// `N_R` (AC); with `N < N_R < 2N` an unbalanced AC split can do better, e.g.
/// `N = 5, N_R = 8, lambda = 1/2` reaches 30/11 with `r = 5`.
pub fn twohop_fd_symmetric_dof(n: usize, n_r: usize, mode: DuplexMode, lambda: f64) -> Result<f64> {
    require_fd(mode)?;
    require_counts(&[n, n_r])?;
    let streams = match mode {
        DuplexMode::AntennaConservedFD => n_r as f64 / 2.0,
        _ => (2 * n_r / 3) as f64,
    };
    Ok((n as f64).min(streams) / (2.0 - lambda))
}

/// Relay streams usable towards the destination when the source has one
/// antenna: the relay keeps a single receive antenna and transmits on the rest.
fn single_antenna_streams(n_r: usize, n_b: usize, mode: DuplexMode) -> usize {
    let t = match mode {
        DuplexMode::RfChainConservedFD => 2 * n_r - 2,
        _ => n_r - 1,
    };
    t.min(n_b)
}

/// Single-antenna source: `m / (m + 1 - lambda)` with `m = min(t, N_B)` and
/// `t` the relay's transmit antennas at `r = 1` (`N_R - 1` for AC,
/// `2 N_R - 2` for RC).
pub fn twohop_fd_single_antenna_dof(n_r: usize, n_b: usize, mode: DuplexMode, lambda: f64) -> Result<f64> {
    require_fd(mode)?;
    require_counts(&[n_r, n_b])?;
    let m = single_antenna_streams(n_r, n_b, mode) as f64;
    Ok(m / (m + 1.0 - lambda))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// Smallest `N_R` of the closed-form family (even for AC, multiple of 3
    /// for RC) satisfying the threshold inequality.
    pub rule: Option<usize>,
    /// Smallest `N_R` from which the general FD max-min beats HD for every
    /// larger relay.
    pub direct: Option<usize>,
    /// Relay sizes below `direct` where FD already wins (RC with
    /// `lambda > 2/3` and `N_R < N`).
    pub early_wins: Vec<usize>,
    /// The inequality behind `rule`.
    pub condition: String,
}

/// Symmetric FD relaying beats HD at this relay size.
pub fn twohop_fd_beats_hd(n: usize, n_r: usize, mode: DuplexMode, si: &SiParams) -> Result<bool> {
    let fd = twohop_fd_dof(n, n_r, n, mode, si)?.dof;
    let hd = twohop_hd_dof(n, n_r, n)?.dof;
    Ok(fd > hd + THRESHOLD_EPS)
}

/// Relay antenna count at which symmetric FD relaying overtakes HD.
pub fn twohop_crossover(n: usize, mode: DuplexMode, si: &SiParams) -> Result<Crossover> {
    require_fd(mode)?;
    require_counts(&[n])?;
    let lambda = si.lambda();
    let (threshold, step, condition) = match mode {
        DuplexMode::AntennaConservedFD => (n as f64 * (2.0 - lambda), 2, "N_R > N(2-lambda), N_R even"),
        _ => (0.75 * n as f64 * (2.0 - lambda), 3, "N_R > (3/4)N(2-lambda), 3 | N_R"),
    };
    let mut out = Crossover { rule: None, direct: None, early_wins: Vec::new(), condition: condition.to_string() };
    if lambda <= 0.0 {
        return Ok(out);
    }
    let smallest_above = (threshold + THRESHOLD_EPS).floor() as usize + 1;
    out.rule = Some(smallest_above.div_ceil(step).max(1) * step);

    // beyond 3N both DoF are saturated, so the tail of this range decides
    let top = 3 * n + 3;
    let wins: Vec<bool> = (2..=top).map(|n_r| twohop_fd_beats_hd(n, n_r, mode, si)).collect::<Result<_>>()?;
    if !wins[wins.len() - 1] {
        return Ok(out);
    }
    let mut first = top;
    while first > 2 && wins[first - 3] {
        first -= 1;
    }
    out.direct = Some(first);
    out.early_wins = (2..first).filter(|&n_r| wins[n_r - 2]).collect();
    Ok(out)
}

/// Single-antenna source: FD relaying beats HD iff
/// `lambda > 1 - m / min(N_R, N_B)`, `m = min(t, N_B)`. For AC this reads
/// `N_R > min(N_B, 1/lambda)`.
pub fn asym_crossover(n_b: usize, n_r: usize, mode: DuplexMode, si: &SiParams) -> Result<bool> {
    require_fd(mode)?;
    require_counts(&[n_r, n_b])?;
    let m = single_antenna_streams(n_r, n_b, mode) as f64;
    let b = n_r.min(n_b) as f64;
    Ok(si.lambda() > 1.0 - m / b + THRESHOLD_EPS)
}

// ---------------------------------------------------------------------------
// Two-way two-hop channel

/// HD two-way relaying with symmetric end nodes at `tau = 1/2`: the cut-set
/// box and the MAC-BC achievable region (box plus a sum constraint).
pub fn twr_hd_regions(n: usize, n_r: usize) -> Result<(DofRegion, DofRegion)> {
    require_counts(&[n, n_r])?;
    let side = (n as f64 / 2.0).min(n_r as f64 / 2.0);
    let sum = (n as f64).min(n_r as f64 / 2.0);
    let upper = convex_hull(&[DofPoint::new(side, side)?]);
    let mac_bc = if sum >= 2.0 * side {
        upper.clone()
    } else if sum <= side {
        convex_hull(&[DofPoint::new(sum, 0.0)?, DofPoint::new(0.0, sum)?])
    } else {
        convex_hull(&[DofPoint::new(side, sum - side)?, DofPoint::new(sum - side, side)?])
    };
    Ok((upper, mac_bc))
}

/// Corner DoF of FD two-way relaying: each direction on its own.
pub fn twr_fd_corners(
    n_a: usize,
    n_r: usize,
    n_b: usize,
    mode: DuplexMode,
    si: &SiParams,
) -> Result<(FdRelayDof, FdRelayDof)> {
    Ok((twohop_fd_dof(n_a, n_r, n_b, mode, si)?, twohop_fd_dof(n_b, n_r, n_a, mode, si)?))
}

/// Time sharing between the two FD relaying directions:
/// `{(tau D_AB, (1 - tau) D_BA)}` and everything below it.
pub fn twr_fd_region(n_a: usize, n_r: usize, n_b: usize, mode: DuplexMode, si: &SiParams) -> Result<DofRegion> {
    let (ab, ba) = twr_fd_corners(n_a, n_r, n_b, mode, si)?;
    Ok(convex_hull(&[DofPoint::new(ab.dof, 0.0)?, DofPoint::new(0.0, ba.dof)?]))
}
