//! Residual self-interference model, link SINR and the HD / AC FD / RC FD
//! antenna accounting.
//!
//! Powers are linear and noise-normalized unless a [`LinkBudget`] says
//! otherwise, so `10 * log10(P)` is the SNR in dB.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Parameters of the residual self-interference power law
/// `I = P^(1 - lambda) / (beta * mu^lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiParams {
    lambda: f64,
    beta: f64,
    mu: f64,
}

impl SiParams {
    pub fn new(lambda: f64, beta: f64, mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid("lambda", format!("{lambda} not in [0, 1]")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(invalid("beta", format!("{beta} must be positive")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(invalid("mu", format!("{mu} must be positive")));
        }
        Ok(Self { lambda, beta, mu })
    }

    /// `beta = mu = 1`; cancellation quality is carried by `lambda` alone.
    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, 1.0, 1.0)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `1 - lambda`, the exponent of the transmit power in the SI law.
    pub fn leakage(&self) -> f64 {
        1.0 - self.lambda
    }
}

/// Average residual SI power seen by a full-duplex receiver whose own
/// transmitter radiates `p_tx`.
///
/// With `lambda = 1` the result is the constant `1 / (beta * mu)` for every
/// `p_tx`, including zero. Callers modelling a silent transmitter must skip
/// the SI term themselves.
pub fn residual_si_power(p_tx: f64, si: &SiParams) -> f64 {
    debug_assert!(p_tx >= 0.0);
    if si.lambda >= 1.0 {
        return 1.0 / (si.beta * si.mu);
    }
    p_tx.powf(1.0 - si.lambda) / (si.beta * si.mu.powf(si.lambda))
}

/// Transmit-side budget of a node: power, path loss of its outgoing links
/// and the noise variance at its own receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    tx_power: f64,
    path_loss: f64,
    noise_var: f64,
    max_relay_power: Option<f64>,
}

impl LinkBudget {
    pub fn new(tx_power: f64, path_loss: f64, noise_var: f64) -> Result<Self> {
        if !(tx_power.is_finite() && tx_power >= 0.0) {
            return Err(invalid("tx_power", format!("{tx_power} must be finite and >= 0")));
        }
        if !(path_loss.is_finite() && path_loss > 0.0) {
            return Err(invalid("path_loss", format!("{path_loss} must be positive")));
        }
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(invalid("noise_var", format!("{noise_var} must be positive")));
        }
        Ok(Self { tx_power, path_loss, noise_var, max_relay_power: None })
    }

    /// Unit path loss and unit noise: `tx_power` is the SNR in linear units.
    pub fn normalized(tx_power: f64) -> Result<Self> {
        Self::new(tx_power, 1.0, 1.0)
    }

    pub fn with_max_relay_power(mut self, p_max: f64) -> Result<Self> {
        if !(p_max.is_finite() && p_max > 0.0) {
            return Err(invalid("max_relay_power", format!("{p_max} must be positive")));
        }
        self.max_relay_power = Some(p_max);
        Ok(self)
    }

    pub fn with_tx_power(mut self, tx_power: f64) -> Result<Self> {
        if !(tx_power.is_finite() && tx_power >= 0.0) {
            return Err(invalid("tx_power", format!("{tx_power} must be finite and >= 0")));
        }
        self.tx_power = tx_power;
        Ok(self)
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    pub fn path_loss(&self) -> f64 {
        self.path_loss
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn max_relay_power(&self) -> Option<f64> {
        self.max_relay_power
    }
}

/// Received SINR `P / (K * (sigma^2 + I))`.
pub fn sinr(tx: &LinkBudget, rx_noise_var: f64, si_power: f64) -> f64 {
    debug_assert!(rx_noise_var > 0.0 && si_power >= 0.0);
    tx.tx_power / (tx.path_loss * (rx_noise_var + si_power))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DuplexMode {
    #[serde(rename = "hd")]
    HalfDuplex,
    #[serde(rename = "ac")]
    AntennaConservedFD,
    #[serde(rename = "rc")]
    RfChainConservedFD,
}

impl DuplexMode {
    pub const ALL: [DuplexMode; 3] =
        [DuplexMode::HalfDuplex, DuplexMode::AntennaConservedFD, DuplexMode::RfChainConservedFD];

    pub fn is_full_duplex(self) -> bool {
        !matches!(self, DuplexMode::HalfDuplex)
    }

    /// Short tag used on the command line and in output files.
    pub fn tag(self) -> &'static str {
        match self {
            DuplexMode::HalfDuplex => "hd",
            DuplexMode::AntennaConservedFD => "ac",
            DuplexMode::RfChainConservedFD => "rc",
        }
    }

    /// Transmit antennas left over when `rx` of `n_total` go to reception.
    /// Only meaningful for full-duplex modes with a valid split.
    pub(crate) fn fd_tx_count(self, n_total: usize, rx: usize) -> usize {
        match self {
            DuplexMode::HalfDuplex => n_total,
            DuplexMode::AntennaConservedFD => n_total - rx,
            DuplexMode::RfChainConservedFD => 2 * n_total - 2 * rx,
        }
    }
}

impl std::str::FromStr for DuplexMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hd" | "half-duplex" => Ok(DuplexMode::HalfDuplex),
            "ac" | "ac-fd" => Ok(DuplexMode::AntennaConservedFD),
            "rc" | "rc-fd" => Ok(DuplexMode::RfChainConservedFD),
            other => Err(invalid("mode", format!("unknown mode `{other}` (hd, ac, rc)"))),
        }
    }
}

impl std::fmt::Display for DuplexMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// How a node's hardware is split between reception and transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntennaSplit {
    pub rx: usize,
    pub tx: usize,
    pub total_antennas_used: usize,
}

/// Antenna split of a node with `n_total` HD antennas.
///
/// HD uses every antenna both ways. AC FD keeps the antenna count (`tx = N - r`),
/// RC FD keeps the `2N` RF chains, spending `r` of them on analog cancellation
/// (`tx = 2N - 2r`).
pub fn antenna_allocation(n_total: usize, mode: DuplexMode, rx_count: Option<usize>) -> Result<AntennaSplit> {
    if n_total == 0 {
        return Err(invalid("n_total", "a node needs at least one antenna"));
    }
    if mode == DuplexMode::HalfDuplex {
        return Ok(AntennaSplit { rx: n_total, tx: n_total, total_antennas_used: n_total });
    }
    let rx = rx_count.ok_or_else(|| invalid("rx_count", "full-duplex modes need a receive count"))?;
    if rx < 1 || rx + 1 > n_total {
        return Err(Error::FdSplitOutOfRange { n_total, rx, max: n_total.saturating_sub(1) });
    }
    let tx = mode.fd_tx_count(n_total, rx);
    Ok(AntennaSplit { rx, tx, total_antennas_used: rx + tx })
}

/// Every valid full-duplex split of a node, in increasing `rx` order.
pub fn fd_splits(n_total: usize, mode: DuplexMode) -> Vec<AntennaSplit> {
    if !mode.is_full_duplex() {
        return Vec::new();
    }
    (1..n_total).filter_map(|rx| antenna_allocation(n_total, mode, Some(rx)).ok()).collect()
}
