//! Top-3 rho-regret and the Kendall tau-b diagnostic.
//!
//! Each true position carries a value (1, 2/3, 1/3 for the top three, then
//! 1/7 .. 6/7, 1 for positions 4..10). Predicted values are turned into
//! competition ranks, so tied items share the rank of the first of them, and
//! every item with competition rank ≤ 3 is in the predicted top 3. The regret
//! adds the values of true top-3 items that drop out of it and of lower
//! items that enter it.

use std::collections::HashMap;

use thiserror::Error;

pub const POSITION_VALUES: [f64; 10] = [
    1.0,
    2.0 / 3.0,
    1.0 / 3.0,
    1.0 / 7.0,
    2.0 / 7.0,
    3.0 / 7.0,
    4.0 / 7.0,
    5.0 / 7.0,
    6.0 / 7.0,
    1.0,
];

pub const TOP: usize = 3;

/// Largest regret of a tie-free prediction: the whole top 3 leaves and
/// positions 8..10 enter.
pub const MAX_RHO_REGRET: f64 = 2.0 + 18.0 / 7.0;

/// Largest regret when ties are allowed: a tied group ranked first can carry
/// all seven lower items into the top 3 while the true top 3 leaves.
pub const MAX_TIED_RHO_REGRET: f64 = 6.0;

#[derive(Debug, Error, PartialEq)]
pub enum RegretError {
    #[error("ranking has {0} items, expected 10")]
    Length(usize),
    #[error("no predicted value for item {0}")]
    MissingItem(usize),
}

/// `1 + number of strictly larger values` for each entry.
pub fn competition_ranks(values: &[f64]) -> Vec<usize> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| *w > v).count())
        .collect()
}

/// Regret from predicted values listed in true order (best first).
pub fn rho_regret_by_position(predicted: &[f64]) -> Result<f64, RegretError> {
    if predicted.len() != POSITION_VALUES.len() {
        return Err(RegretError::Length(predicted.len()));
    }
    let ranks = competition_ranks(predicted);
    Ok(ranks
        .iter()
        .enumerate()
        .filter(|&(position, &rank)| (position < TOP) != (rank <= TOP))
        .map(|(position, _)| POSITION_VALUES[position])
        .fold(0.0, |acc, v| acc + v))
}

/// Regret of predicted per-item values against a true ranking of item ids.
pub fn rho_regret(true_order: &[usize], predicted: &HashMap<usize, f64>) -> Result<f64, RegretError> {
    let values = true_order
        .iter()
        .map(|id| predicted.get(id).copied().ok_or(RegretError::MissingItem(*id)))
        .collect::<Result<Vec<_>, _>>()?;
    rho_regret_by_position(&values)
}

/// Kendall's tau-b between two score vectors; `None` when either is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "score vectors differ in length");
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            match (dx == 0.0, dy == 0.0) {
                (true, true) => {}
                (true, false) => tied_x += 1,
                (false, true) => tied_y += 1,
                (false, false) => {
                    if (dx > 0.0) == (dy > 0.0) {
                        concordant += 1
                    } else {
                        discordant += 1
                    }
                }
            }
        }
    }
    let n1 = (concordant + discordant + tied_x) as f64;
    let n2 = (concordant + discordant + tied_y) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / (n1 * n2).sqrt())
}
