//! The `replay-table1` subcommand: re-derive the multiplier and penalty
//! columns of a reference iteration table from its constraint column and
//! flag any disagreement.
//!
//! Printed tables carry rounding, so multipliers are compared within 1.25
//! units of the last printed digit (the penalty column is integer-exact).

use cavsolve_core::auglag::{replay_block, AugLagConfig};
use std::fmt;

#[derive(Debug)]
pub struct ReplayError(pub String);

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed table: {}", self.0)
    }
}

impl std::error::Error for ReplayError {}

/// Size of one unit in the last printed place of a decimal literal;
/// integer literals count as exact.
fn printed_ulp(literal: &str) -> f64 {
    let s = literal.trim().trim_start_matches(['+', '-']);
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().unwrap_or(0)),
        None => (s, 0),
    };
    match mantissa.split_once('.') {
        Some((_, frac)) => 10f64.powi(exp - frac.len() as i32),
        None => 0.0,
    }
}

struct Row {
    eps: String,
    j: String,
    c: f64,
    mu_lit: String,
    mu: f64,
    eta: f64,
}

#[derive(Debug)]
pub struct ReplayOutcome {
    pub blocks: usize,
    pub rows: usize,
    pub mismatches: Vec<String>,
}

impl ReplayOutcome {
    pub fn all_match(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn parse_rows(text: &str) -> Result<Vec<Row>, ReplayError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| ReplayError("empty file".to_string()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| -> Result<usize, ReplayError> {
        columns
            .iter()
            .position(|&c| c == name)
            .ok_or_else(|| ReplayError(format!("missing column `{name}`")))
    };
    let (i_eps, i_j, i_c, i_mu, i_eta) =
        (col("eps")?, col("j")?, col("c")?, col("mu")?, col("eta")?);
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<&str, ReplayError> {
            fields
                .get(i)
                .copied()
                .ok_or_else(|| ReplayError(format!("line {}: too few fields", lineno + 2)))
        };
        let num = |i: usize| -> Result<f64, ReplayError> {
            get(i)?.parse::<f64>().map_err(|_| {
                ReplayError(format!(
                    "line {}: `{}` is not a number",
                    lineno + 2,
                    fields[i]
                ))
            })
        };
        rows.push(Row {
            eps: get(i_eps)?.to_string(),
            j: get(i_j)?.to_string(),
            c: num(i_c)?,
            mu_lit: get(i_mu)?.to_string(),
            mu: num(i_mu)?,
            eta: num(i_eta)?,
        });
    }
    if rows.is_empty() {
        return Err(ReplayError("no data rows".to_string()));
    }
    Ok(rows)
}

/// Replay every block of the table (blocks are maximal runs of equal `eps`),
/// anchoring each replay at the block's first printed multiplier and penalty.
pub fn replay_csv(text: &str) -> Result<ReplayOutcome, ReplayError> {
    let rows = parse_rows(text)?;
    let mut outcome = ReplayOutcome {
        blocks: 0,
        rows: rows.len(),
        mismatches: Vec::new(),
    };
    let mut start = 0;
    while start < rows.len() {
        let mut end = start + 1;
        while end < rows.len() && rows[end].eps == rows[start].eps {
            end += 1;
        }
        let block = &rows[start..end];
        outcome.blocks += 1;
        let cfg = AugLagConfig {
            mu1: block[0].mu,
            eta1: block[0].eta,
            ..AugLagConfig::default()
        };
        let c_column: Vec<f64> = block.iter().map(|r| r.c).collect();
        let replayed = replay_block(&c_column, &cfg);
        for (row, (mu_replay, eta_replay)) in block.iter().zip(&replayed) {
            if *eta_replay != row.eta {
                outcome.mismatches.push(format!(
                    "eps {} j {}: eta printed {} but replayed {}",
                    row.eps, row.j, row.eta, eta_replay
                ));
            }
            let tol = 1.25 * printed_ulp(&row.mu_lit) + 1e-12;
            if (mu_replay - row.mu).abs() > tol {
                outcome.mismatches.push(format!(
                    "eps {} j {}: mu printed {} but replayed {:.8} (tolerance {:.2e})",
                    row.eps, row.j, row.mu_lit, mu_replay, tol
                ));
            }
        }
        start = end;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ulp_of_printed_literals() {
        assert_eq!(printed_ulp("-3.3976"), 1e-4);
        assert_eq!(printed_ulp("0.187044"), 1e-6);
        assert_eq!(printed_ulp("5.80566e-05"), 1e-10);
        assert_eq!(printed_ulp("0"), 0.0);
        assert_eq!(printed_ulp("640"), 0.0);
    }

    #[test]
    fn replays_a_consistent_block() {
        let csv = "eps,j,c,mu,eta\n\
                   0.1,0,-0.4,0,5\n\
                   0.1,1,-0.1,-2,10\n\
                   0.1,2,-0.02,-3,10\n";
        let out = replay_csv(csv).unwrap();
        assert_eq!(out.blocks, 1);
        assert!(out.all_match(), "{:?}", out.mismatches);
    }

    #[test]
    fn flags_perturbed_constraint_at_next_row() {
        // c at j = 0 perturbed by 10%; the printed multipliers still follow
        // the unperturbed recurrence, so the replay disagrees from j = 1 on
        let csv = "eps,j,c,mu,eta\n\
                   0.1,0,-0.44,0,5\n\
                   0.1,1,-0.1,-2,10\n\
                   0.1,2,-0.02,-3,10\n";
        let out = replay_csv(csv).unwrap();
        assert!(!out.all_match());
        assert!(out.mismatches[0].contains("j 1"), "{:?}", out.mismatches);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(replay_csv("").is_err());
        assert!(replay_csv("eps,j,c,mu\n0.1,0,1,0\n").is_err());
        assert!(replay_csv("eps,j,c,mu,eta\n0.1,0,abc,0,5\n").is_err());
        assert!(replay_csv("eps,j,c,mu,eta\n").is_err());
    }
}
