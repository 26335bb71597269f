//! Raftery-Lewis run-length diagnostic.

use serde::{Deserialize, Serialize};

use super::dist::norm_quantile;
use super::draws::PosteriorDraws;
use super::McmcError;
use crate::stats;

const CONVERGE_EPS: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RafteryLewisEntry {
    /// Burn-in length (M).
    pub burn_in: usize,
    /// Total required length including burn-in (N).
    pub total: usize,
    /// Requirement under independent sampling.
    pub lower_bound: usize,
    /// Dependence factor N / lower_bound (I).
    pub dependence: f64,
    /// Thinning at which the indicator chain is close to first-order Markov.
    pub thin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RafteryLewisReport {
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub entries: Vec<(String, RafteryLewisEntry)>,
}

/// Length of an independent sample needed to estimate the `q` quantile to
/// within `r` with probability `s`.
pub fn minimum_iid_length(q: f64, r: f64, s: f64) -> usize {
    let phi = norm_quantile(0.5 * (1.0 + s));
    (q * (1.0 - q) * phi * phi / (r * r)).ceil() as usize
}

// Counts of consecutive (a, b, c) indicator triples on the thinned series.
fn g2_statistic(x: &[u8]) -> f64 {
    let mut t = [[[0.0f64; 2]; 2]; 2];
    for w in x.windows(3) {
        t[w[0] as usize][w[1] as usize][w[2] as usize] += 1.0;
    }
    let mut g2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                if t[i][j][k] > 0.0 {
                    let row = t[i][j][0] + t[i][j][1];
                    let col = t[0][j][k] + t[1][j][k];
                    let mid = t[0][j][0] + t[0][j][1] + t[1][j][0] + t[1][j][1];
                    let fitted = row * col / mid;
                    g2 += 2.0 * t[i][j][k] * (t[i][j][k] / fitted).ln();
                }
            }
        }
    }
    g2
}

pub fn raftery_lewis(chain: &[f64], q: f64, r: f64, s: f64) -> Result<RafteryLewisEntry, McmcError> {
    let phi = norm_quantile(0.5 * (1.0 + s));
    let nmin = minimum_iid_length(q, r, s);
    if chain.len() < nmin {
        return Err(McmcError::ChainTooShort {
            length: chain.len(),
            required: nmin,
        });
    }
    let cut = stats::quantile(chain, q);
    let dichot: Vec<u8> = chain.iter().map(|&v| (v <= cut) as u8).collect();
    if dichot.iter().all(|&d| d == dichot[0]) {
        return Err(McmcError::DegenerateChain("indicator chain is constant".into()));
    }
    let mut thin = 0;
    let thinned = loop {
        thin += 1;
        let x: Vec<u8> = dichot.iter().step_by(thin).copied().collect();
        if x.len() < 3 {
            return Err(McmcError::ChainTooShort {
                length: chain.len(),
                required: nmin,
            });
        }
        let bic = g2_statistic(&x) - 2.0 * ((x.len() - 2) as f64).ln();
        if bic < 0.0 {
            break x;
        }
    };
    let mut t = [[0.0f64; 2]; 2];
    for w in thinned.windows(2) {
        t[w[0] as usize][w[1] as usize] += 1.0;
    }
    let alpha = t[0][1] / (t[0][0] + t[0][1]);
    let beta = t[1][0] / (t[1][0] + t[1][1]);
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(McmcError::DegenerateChain(format!(
            "transition probabilities {alpha}, {beta}"
        )));
    }
    let lam = (1.0 - alpha - beta).abs();
    let burn_steps = if lam == 0.0 {
        0.0
    } else {
        ((CONVERGE_EPS * (alpha + beta) / alpha.max(beta)).ln() / lam.ln()).ceil().max(0.0)
    };
    let burn_in = burn_steps as usize * thin;
    let prec = (2.0 - alpha - beta) * alpha * beta * phi * phi / ((alpha + beta).powi(3) * r * r);
    let keep = (prec * thin as f64).ceil() as usize;
    let total = burn_in + keep;
    Ok(RafteryLewisEntry {
        burn_in,
        total,
        lower_bound: nmin,
        dependence: total as f64 / nmin as f64,
        thin,
    })
}

/// Diagnostic for every parameter selected by `keep`, on one chain.
pub fn raftery_lewis_report(
    draws: &PosteriorDraws,
    chain: usize,
    q: f64,
    r: f64,
    s: f64,
    mut keep: impl FnMut(&str) -> bool,
) -> Result<RafteryLewisReport, McmcError> {
    let mut entries = Vec::new();
    for (j, name) in draws.names().iter().enumerate() {
        if !keep(name) {
            continue;
        }
        let col = draws.chain_column(chain, j);
        entries.push((name.clone(), raftery_lewis(&col, q, r, s)?));
    }
    Ok(RafteryLewisReport { q, r, s, entries })
}

/// Two-quantile table with columns Parameters, Burn1, Size1, DF1, Burn2,
/// Size2, DF2, tab separated.
pub fn format_two_quantile_table(lower: &RafteryLewisReport, upper: &RafteryLewisReport) -> String {
    let mut out = String::from("Parameters\tBurn1\tSize1\tDF1\tBurn2\tSize2\tDF2\n");
    for ((name, a), (_, b)) in lower.entries.iter().zip(&upper.entries) {
        out.push_str(&format!(
            "{name}\t{}\t{}\t{:.2}\t{}\t{}\t{:.2}\n",
            a.burn_in, a.total, a.dependence, b.burn_in, b.total, b.dependence
        ));
    }
    out
}
