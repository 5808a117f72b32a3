//! Diagonal Gaussian posterior pieces shared by every model: the reparameterized sample,
//! the closed-form KL to a standard normal, and the multinomial log-likelihood.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Posterior parameters on a tape; σ is kept as `log σ` so it is always positive.
#[derive(Clone, Copy, Debug)]
pub struct GaussianParams {
    pub mu: Var,
    pub log_sigma: Var,
}

/// `z = μ + exp(log σ) ⊙ ε`.
pub fn reparameterize(tape: &mut Tape, g: &GaussianParams, eps: &Tensor) -> Result<Var> {
    let mu_shape = tape.value(g.mu).shape().to_vec();
    if eps.shape() != mu_shape.as_slice() {
        return Err(Error::Dimension {
            op: "reparameterize",
            left: mu_shape,
            right: eps.shape().to_vec(),
        });
    }
    let sigma = tape.exp(g.log_sigma);
    let noise = tape.input(eps.clone());
    let scaled = tape.mul(sigma, noise)?;
    tape.add(g.mu, scaled)
}

/// Per-row `KL(q || N(0, I)) = ½ Σ_k (σ_k² − 1 − log σ_k² + μ_k²)`, shape `[batch]`.
pub fn kl_gaussian_standard(tape: &mut Tape, g: &GaussianParams) -> Result<Var> {
    tape.kl_std_normal(g.mu, g.log_sigma)
}

/// Closed-form KL for a single diagonal Gaussian given as plain slices.
pub fn kl_standard_normal(mu: &[f64], log_sigma: &[f64]) -> f64 {
    mu.iter()
        .zip(log_sigma)
        .map(|(m, ls)| 0.5 * ((2.0 * ls).exp() - 1.0 - 2.0 * ls + m * m))
        .sum()
}

/// `Σ_{i ∈ x} log π_i`, counting repeated items once per occurrence.
pub fn multinomial_log_likelihood(items: &[usize], log_pi: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &i in items {
        let lp = log_pi.get(i).ok_or(Error::Index {
            op: "multinomial_log_likelihood",
            index: i,
            size: log_pi.len(),
        })?;
        total += lp;
    }
    Ok(total)
}

/// Row-wise multinomial log-likelihood on a tape: entry `r` sums `log_pi[r, i]` over
/// `targets[r]`. Returns a `[rows]` vector.
pub fn multinomial_rows(tape: &mut Tape, log_pi: Var, targets: &[Vec<usize>]) -> Result<Var> {
    let coords: Vec<(usize, usize)> = targets
        .iter()
        .enumerate()
        .flat_map(|(r, items)| items.iter().map(move |&i| (r, i)))
        .collect();
    let lens: Vec<usize> = targets.iter().map(Vec::len).collect();
    let picked = tape.gather(log_pi, &coords)?;
    tape.segment_sum(picked, &lens)
}
