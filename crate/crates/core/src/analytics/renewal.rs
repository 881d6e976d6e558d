//! Discrete renewal recursion for `P(D_n = 0)` and the Markov chain whose
//! first-return law at state 0 is a given return-time law.

use super::AnalyticError;
use crate::util::CompensatedSum;

const NORMALISATION_TOL: f64 = 1e-9;

/// Checks that `q` (entry `k - 1` holds `q_k`) is a probability vector.
pub fn validate_return_law(q: &[f64]) -> Result<(), AnalyticError> {
    if q.is_empty() {
        return Err(AnalyticError::BadReturnLaw("empty return-time law".into()));
    }
    if let Some((i, &v)) = q.iter().enumerate().find(|(_, &v)| !(0.0..=1.0).contains(&v)) {
        return Err(AnalyticError::BadReturnLaw(format!(
            "q_{} = {v} is not a probability",
            i + 1
        )));
    }
    let total = q.iter().copied().collect::<CompensatedSum>().value();
    if (total - 1.0).abs() > NORMALISATION_TOL {
        return Err(AnalyticError::BadReturnLaw(format!("masses sum to {total}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalState {
    /// `p00[n] = P^{(n)}_{00}`.
    pub p00: Vec<f64>,
    pub n: usize,
}

impl RenewalState {
    pub fn last(&self) -> f64 {
        self.p00[self.n]
    }
}

/// Iterates `p00[n] = sum_{k=1..n} q_k p00[n-k]` from `p00[0] = 1`.
pub fn renewal_iterate(q: &[f64], n: usize) -> Result<RenewalState, AnalyticError> {
    validate_return_law(q)?;
    let mut p00 = Vec::with_capacity(n + 1);
    p00.push(1.0);
    for step in 1..=n {
        let mut acc = CompensatedSum::new();
        for (k, &qk) in q.iter().enumerate().take(step) {
            acc.add(qk * p00[step - 1 - k]);
        }
        p00.push(acc.value().clamp(0.0, 1.0));
    }
    Ok(RenewalState { p00, n })
}

/// Chain on `0..K` (`K` the largest `k` with `q_k > 0`) that moves from `i`
/// to 0 with probability `q_{i+1} / (1 - sum_{k<=i} q_k)` and to `i + 1`
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    q: Vec<f64>,
    to_zero: Vec<f64>,
}

impl ChainSpec {
    pub fn from_return_law(q: &[f64]) -> Result<Self, AnalyticError> {
        validate_return_law(q)?;
        let support = q.iter().rposition(|&v| v > 0.0).map_or(0, |i| i + 1);
        let q = q[..support].to_vec();
        // tails[i] = sum_{k > i} q_k, summed from the far end
        let mut tails = vec![0.0; support + 1];
        for i in (0..support).rev() {
            tails[i] = tails[i + 1] + q[i];
        }
        let to_zero = (0..support)
            .map(|i| {
                if i + 1 == support {
                    1.0
                } else {
                    (q[i] / tails[i]).min(1.0)
                }
            })
            .collect();
        Ok(Self { q, to_zero })
    }

    pub fn states(&self) -> usize {
        self.q.len()
    }

    pub fn return_law(&self) -> &[f64] {
        &self.q
    }

    /// `P_{ij}`.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        if i >= self.states() || j >= self.states() {
            return 0.0;
        }
        let back = self.to_zero[i];
        match j {
            0 if i + 1 == self.states() => 1.0,
            0 => back,
            j if j == i + 1 => 1.0 - back,
            _ => 0.0,
        }
    }

    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.states();
        (0..k)
            .map(|i| (0..k).map(|j| self.transition(i, j)).collect())
            .collect()
    }

    /// Stationary mass at 0, `1 / sum_k k q_k`, from the product form
    /// `pi_i ∝ sum_{k > i} q_k`.
    pub fn stationary_zero_mass(&self) -> f64 {
        let mean: CompensatedSum = self.q.iter().enumerate().map(|(i, &v)| (i + 1) as f64 * v).collect();
        1.0 / mean.value()
    }
}

/// `f^{(k)}_{00}`: probability that the chain started at 0 first returns at
/// step `k`, from the taboo recursion over the full transition matrix.
pub fn chain_first_return(chain: &ChainSpec, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let states = chain.states();
    // mass on states other than 0 having avoided 0 so far
    let mut away: Vec<f64> = (0..states)
        .map(|j| if j == 0 { 0.0 } else { chain.transition(0, j) })
        .collect();
    if k == 1 {
        return chain.transition(0, 0);
    }
    for _ in 2..k {
        let mut next = vec![0.0; states];
        for (i, &mass) in away.iter().enumerate().skip(1) {
            if mass == 0.0 {
                continue;
            }
            for (j, slot) in next.iter_mut().enumerate().skip(1) {
                *slot += mass * chain.transition(i, j);
            }
        }
        away = next;
    }
    away.iter()
        .enumerate()
        .skip(1)
        .map(|(i, &mass)| mass * chain.transition(i, 0))
        .collect::<CompensatedSum>()
        .value()
}
