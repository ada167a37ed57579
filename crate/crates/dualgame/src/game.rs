//! Game data model and exact probability/payoff bookkeeping.
//!
//! A repeated game with incomplete information on both sides is a family of
//! I x J matrix games indexed by a type pair (k, l), together with a joint
//! prior over types. Player 1 observes k, player 2 observes l, actions are
//! public. This module holds the finite data (payoff tensor, beliefs, stage
//! weights, behavior strategies) and the exact operations on them: stage
//! laws, Bayesian posteriors and their product decomposition, the auxiliary
//! weight update, and expected-payoff evaluation by full enumeration.

use crate::error::{Result, SolverError};
use crate::tol;

/// Which player a behavior strategy belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    One,
    Two,
}

/// Finite type/action sets and the payoff tensor, with its sup-norm bound.
#[derive(Debug, Clone)]
pub struct GameSpec {
    pub k_size: usize,
    pub l_size: usize,
    pub i_size: usize,
    pub j_size: usize,
    /// Payoffs to player 1, flat over (k, l, i, j).
    payoff: Vec<f64>,
    /// max |payoff| over all entries.
    pub payoff_bound: f64,
}

impl GameSpec {
    pub fn new(
        k_size: usize,
        l_size: usize,
        i_size: usize,
        j_size: usize,
        payoff: Vec<f64>,
    ) -> Result<Self> {
        if k_size == 0 || l_size == 0 || i_size == 0 || j_size == 0 {
            return Err(SolverError::invariant("all set sizes must be positive"));
        }
        let expect = k_size * l_size * i_size * j_size;
        if payoff.len() != expect {
            return Err(SolverError::invariant(format!(
                "payoff tensor has {} entries, expected {}",
                payoff.len(),
                expect
            )));
        }
        if payoff.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::invariant("payoff entries must be finite"));
        }
        let payoff_bound = payoff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(GameSpec {
            k_size,
            l_size,
            i_size,
            j_size,
            payoff,
            payoff_bound,
        })
    }

    #[inline]
    pub fn payoff(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.payoff[((k * self.l_size + l) * self.i_size + i) * self.j_size + j]
    }

    pub fn payoff_entries(&self) -> &[f64] {
        &self.payoff
    }

    /// The transposed game: roles of the players (types, actions, sign of the
    /// payoff) are exchanged, so player 1 of the swapped game is player 2 of
    /// the original.
    pub fn swapped(&self) -> GameSpec {
        let mut payoff = vec![0.0; self.payoff.len()];
        for k in 0..self.k_size {
            for l in 0..self.l_size {
                for i in 0..self.i_size {
                    for j in 0..self.j_size {
                        let idx = ((l * self.k_size + k) * self.j_size + j) * self.i_size + i;
                        payoff[idx] = -self.payoff(k, l, i, j);
                    }
                }
            }
        }
        GameSpec {
            k_size: self.l_size,
            l_size: self.k_size,
            i_size: self.j_size,
            j_size: self.i_size,
            payoff,
            payoff_bound: self.payoff_bound,
        }
    }
}

/// A joint prior pi over K x L.
#[derive(Debug, Clone)]
pub struct JointBelief {
    pub k_size: usize,
    pub l_size: usize,
    pi: Vec<f64>,
}

impl JointBelief {
    pub fn new(k_size: usize, l_size: usize, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != k_size * l_size {
            return Err(SolverError::invariant("prior has wrong shape"));
        }
        if pi.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SolverError::invariant("prior entries must be >= 0"));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > tol::PROB {
            return Err(SolverError::invariant(format!(
                "prior sums to {total}, expected 1"
            )));
        }
        Ok(JointBelief { k_size, l_size, pi })
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.pi[k * self.l_size + l]
    }

    pub fn entries(&self) -> &[f64] {
        &self.pi
    }

    /// Marginal on K.
    pub fn marginal_k(&self) -> Vec<f64> {
        (0..self.k_size)
            .map(|k| (0..self.l_size).map(|l| self.get(k, l)).sum())
            .collect()
    }

    pub fn transposed(&self) -> JointBelief {
        let mut pi = vec![0.0; self.pi.len()];
        for k in 0..self.k_size {
            for l in 0..self.l_size {
                pi[l * self.k_size + k] = self.get(k, l);
            }
        }
        JointBelief {
            k_size: self.l_size,
            l_size: self.k_size,
            pi,
        }
    }

    /// Disintegrate as pi = p (x) Q. Rows of Q at zero-mass types are set to
    /// the uniform distribution so that Q is always row-stochastic.
    pub fn disintegrate(&self) -> Disintegration {
        let p = self.marginal_k();
        let mut q = vec![0.0; self.k_size * self.l_size];
        for k in 0..self.k_size {
            if p[k] > 0.0 {
                for l in 0..self.l_size {
                    q[k * self.l_size + l] = self.get(k, l) / p[k];
                }
            } else {
                for l in 0..self.l_size {
                    q[k * self.l_size + l] = 1.0 / self.l_size as f64;
                }
            }
        }
        Disintegration {
            k_size: self.k_size,
            l_size: self.l_size,
            p,
            q,
        }
    }

    /// True when every row of the conditional Q is the same distribution,
    /// i.e. pi is a product measure p (x) q.
    pub fn is_independent(&self, tolerance: f64) -> bool {
        let d = self.disintegrate();
        let p = &d.p;
        // compare rows with positive mass only; zero-mass rows are conventions
        let mut reference: Option<usize> = None;
        for k in 0..self.k_size {
            if p[k] <= 0.0 {
                continue;
            }
            match reference {
                None => reference = Some(k),
                Some(r) => {
                    for l in 0..self.l_size {
                        if (d.q_at(k, l) - d.q_at(r, l)).abs() > tolerance {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// A disintegrated prior: marginal p on K and conditional Q from K to L.
#[derive(Debug, Clone)]
pub struct Disintegration {
    pub k_size: usize,
    pub l_size: usize,
    pub p: Vec<f64>,
    /// Row-stochastic matrix, flat over (k, l).
    q: Vec<f64>,
}

impl Disintegration {
    pub fn new(p: Vec<f64>, q: Vec<f64>, l_size: usize) -> Result<Self> {
        let k_size = p.len();
        if q.len() != k_size * l_size {
            return Err(SolverError::invariant("Q has wrong shape"));
        }
        if !is_distribution(&p) {
            return Err(SolverError::invariant("p is not a probability vector"));
        }
        for k in 0..k_size {
            if !is_distribution(&q[k * l_size..(k + 1) * l_size]) {
                return Err(SolverError::invariant(format!(
                    "row {k} of Q is not a probability vector"
                )));
            }
        }
        Ok(Disintegration {
            k_size,
            l_size,
            p,
            q,
        })
    }

    #[inline]
    pub fn q_at(&self, k: usize, l: usize) -> f64 {
        self.q[k * self.l_size + l]
    }

    pub fn q_row(&self, k: usize) -> &[f64] {
        &self.q[k * self.l_size..(k + 1) * self.l_size]
    }

    pub fn q_entries(&self) -> &[f64] {
        &self.q
    }

    /// Recompose pi = p (x) Q.
    pub fn compose(&self) -> JointBelief {
        let mut pi = vec![0.0; self.k_size * self.l_size];
        for k in 0..self.k_size {
            for l in 0..self.l_size {
                pi[k * self.l_size + l] = self.p[k] * self.q_at(k, l);
            }
        }
        JointBelief {
            k_size: self.k_size,
            l_size: self.l_size,
            pi,
        }
    }

    /// Replace the marginal, keeping the conditional.
    pub fn with_marginal(&self, p: Vec<f64>) -> Disintegration {
        Disintegration {
            k_size: self.k_size,
            l_size: self.l_size,
            p,
            q: self.q.clone(),
        }
    }
}

/// Stage weights theta_1..theta_n, a probability over stages.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    weights: Vec<f64>,
}

/// Renormalized truncation of a longer evaluation, with the value-shift
/// certificate |v_theta - scale * v_truncated| <= epsilon.
#[derive(Debug, Clone, Copy)]
pub struct TruncationCert {
    /// Mass kept by the prefix.
    pub scale: f64,
    /// Value error bound: payoff_bound * discarded mass.
    pub epsilon: f64,
}

impl Evaluation {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(SolverError::invariant("evaluation must have >= 1 stage"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SolverError::invariant("stage weights must be >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tol::PROB {
            return Err(SolverError::invariant(format!(
                "stage weights sum to {total}, expected 1"
            )));
        }
        Ok(Evaluation { weights })
    }

    /// Keep a prefix of (possibly infinite) stage weights, renormalize, and
    /// report the truncation certificate. `prefix` must have mass in (0, 1].
    pub fn truncate_prefix(prefix: &[f64], payoff_bound: f64) -> Result<(Evaluation, TruncationCert)> {
        if prefix.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SolverError::invariant("stage weights must be >= 0"));
        }
        let scale: f64 = prefix.iter().sum();
        if scale <= 0.0 || scale > 1.0 + tol::PROB {
            return Err(SolverError::invariant(format!(
                "prefix mass {scale} must lie in (0, 1]"
            )));
        }
        let weights = prefix.iter().map(|w| w / scale).collect();
        Ok((
            Evaluation { weights },
            TruncationCert {
                scale,
                epsilon: payoff_bound * (1.0 - scale).max(0.0),
            },
        ))
    }

    pub fn horizon(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn weight(&self, stage: usize) -> f64 {
        self.weights[stage]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn head(&self) -> f64 {
        self.weights[0]
    }

    /// True when all weight sits on the first stage.
    pub fn is_single_stage(&self) -> bool {
        self.weights.len() == 1 || 1.0 - self.weights[0] <= tol::PROB
    }

    /// Normalized tail theta+ with theta+_m = theta_{m+1} / (1 - theta_1).
    pub fn tail(&self) -> Result<Evaluation> {
        let head = self.weights[0];
        if 1.0 - head <= tol::PROB {
            return Err(SolverError::invariant(
                "tail() undefined when theta_1 = 1",
            ));
        }
        let rest = 1.0 - head;
        let weights: Vec<f64> = self.weights[1..].iter().map(|w| w / rest).collect();
        Ok(Evaluation { weights })
    }
}

/// Per-type payoff multiplier accumulating P(j|k) factors along the play.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxWeight {
    pub zeta: Vec<f64>,
}

impl AuxWeight {
    pub fn new(zeta: Vec<f64>) -> Result<Self> {
        if zeta.iter().any(|z| !z.is_finite()) {
            return Err(SolverError::invariant("zeta entries must be finite"));
        }
        Ok(AuxWeight { zeta })
    }

    /// The canonical initial weight: all ones.
    pub fn ones(k_size: usize) -> AuxWeight {
        AuxWeight {
            zeta: vec![1.0; k_size],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.zeta.iter().fold(0.0f64, |m, z| m.max(z.abs()))
    }
}

/// First-stage strategy pair: sigma rows over Delta(I), tau rows over Delta(J).
#[derive(Debug, Clone)]
pub struct StageStrategy {
    pub i_size: usize,
    pub j_size: usize,
    /// Flat over (k, i).
    sigma: Vec<f64>,
    /// Flat over (l, j).
    tau: Vec<f64>,
}

impl StageStrategy {
    pub fn new(i_size: usize, j_size: usize, sigma: Vec<f64>, tau: Vec<f64>) -> Result<Self> {
        if sigma.len() % i_size != 0 || tau.len() % j_size != 0 {
            return Err(SolverError::invariant("strategy matrices have wrong shape"));
        }
        for row in sigma.chunks(i_size) {
            if !is_distribution(row) {
                return Err(SolverError::invariant("sigma row is not a distribution"));
            }
        }
        for row in tau.chunks(j_size) {
            if !is_distribution(row) {
                return Err(SolverError::invariant("tau row is not a distribution"));
            }
        }
        Ok(StageStrategy {
            i_size,
            j_size,
            sigma,
            tau,
        })
    }

    pub fn k_size(&self) -> usize {
        self.sigma.len() / self.i_size
    }

    pub fn l_size(&self) -> usize {
        self.tau.len() / self.j_size
    }

    pub fn sigma_row(&self, k: usize) -> &[f64] {
        &self.sigma[k * self.i_size..(k + 1) * self.i_size]
    }

    pub fn tau_row(&self, l: usize) -> &[f64] {
        &self.tau[l * self.j_size..(l + 1) * self.j_size]
    }

    /// P(j | k) = sum_l Q(l|k) tau^l(j): the action law of player 2 as seen
    /// from a fixed type k of player 1.
    pub fn p2_action_law_given_k(&self, d: &Disintegration, k: usize, j: usize) -> f64 {
        (0..d.l_size)
            .map(|l| d.q_at(k, l) * self.tau_row(l)[j])
            .sum()
    }
}

/// One player's behavior strategy: a mixed action for every (own type,
/// public history) pair, for all histories up to the horizon.
///
/// Histories are alternating (i, j) action pairs. A history of length m is
/// encoded little-endian in base i_size * j_size: the first pair occupies the
/// least significant digit, so stripping the first pair is a division.
#[derive(Debug, Clone)]
pub struct BehaviorStrategy {
    pub player: Player,
    pub n_types: usize,
    pub i_size: usize,
    pub j_size: usize,
    pub horizon: usize,
    /// rows[m][t][h] = mixed action at stage m+1 for type t after history h.
    rows: Vec<Vec<Vec<Vec<f64>>>>,
}

impl BehaviorStrategy {
    pub fn own_actions(&self) -> usize {
        match self.player {
            Player::One => self.i_size,
            Player::Two => self.j_size,
        }
    }

    /// Build a strategy from a rule mapping (type, stage index from 0,
    /// decoded history of (i, j) pairs) to a mixed action.
    pub fn from_fn<F>(
        player: Player,
        n_types: usize,
        i_size: usize,
        j_size: usize,
        horizon: usize,
        mut rule: F,
    ) -> Result<BehaviorStrategy>
    where
        F: FnMut(usize, usize, &[(usize, usize)]) -> Vec<f64>,
    {
        let own = match player {
            Player::One => i_size,
            Player::Two => j_size,
        };
        let pair_count = i_size * j_size;
        let mut rows = Vec::with_capacity(horizon);
        for m in 0..horizon {
            let n_hist = pair_count.pow(m as u32);
            let mut per_type = Vec::with_capacity(n_types);
            for t in 0..n_types {
                let mut per_hist = Vec::with_capacity(n_hist);
                for h in 0..n_hist {
                    let hist = decode_history(h, m, i_size, j_size);
                    let row = rule(t, m, &hist);
                    if row.len() != own || !is_distribution(&row) {
                        return Err(SolverError::invariant(
                            "behavior rule produced an invalid mixed action",
                        ));
                    }
                    per_hist.push(row);
                }
                per_type.push(per_hist);
            }
            rows.push(per_type);
        }
        Ok(BehaviorStrategy {
            player,
            n_types,
            i_size,
            j_size,
            horizon,
            rows,
        })
    }

    pub fn uniform(
        player: Player,
        n_types: usize,
        i_size: usize,
        j_size: usize,
        horizon: usize,
    ) -> BehaviorStrategy {
        let own = match player {
            Player::One => i_size,
            Player::Two => j_size,
        };
        BehaviorStrategy::from_fn(player, n_types, i_size, j_size, horizon, |_, _, _| {
            vec![1.0 / own as f64; own]
        })
        .expect("uniform rows are valid")
    }

    #[inline]
    pub fn row(&self, t: usize, stage: usize, hist_code: usize) -> &[f64] {
        &self.rows[stage][t][hist_code]
    }

    /// The first-stage rows of both players assembled into a StageStrategy.
    pub fn stage_one_pair(s1: &BehaviorStrategy, s2: &BehaviorStrategy) -> StageStrategy {
        let sigma: Vec<f64> = (0..s1.n_types)
            .flat_map(|k| s1.row(k, 0, 0).to_vec())
            .collect();
        let tau: Vec<f64> = (0..s2.n_types)
            .flat_map(|l| s2.row(l, 0, 0).to_vec())
            .collect();
        StageStrategy::new(s1.i_size, s2.j_size, sigma, tau).expect("stored rows are valid")
    }

    /// The continuation strategy after a first stage (i, j) was played.
    pub fn continuation(&self, i: usize, j: usize) -> BehaviorStrategy {
        let pair = i * self.j_size + j;
        let pair_count = self.i_size * self.j_size;
        let mut rows = Vec::with_capacity(self.horizon.saturating_sub(1));
        for m in 1..self.horizon {
            let n_hist = pair_count.pow((m - 1) as u32);
            let per_type: Vec<Vec<Vec<f64>>> = (0..self.n_types)
                .map(|t| {
                    (0..n_hist)
                        .map(|h| self.rows[m][t][pair + h * pair_count].clone())
                        .collect()
                })
                .collect();
            rows.push(per_type);
        }
        BehaviorStrategy {
            player: self.player,
            n_types: self.n_types,
            i_size: self.i_size,
            j_size: self.j_size,
            horizon: self.horizon.saturating_sub(1),
            rows,
        }
    }
}

fn decode_history(code: usize, len: usize, i_size: usize, j_size: usize) -> Vec<(usize, usize)> {
    let pair_count = i_size * j_size;
    let mut rest = code;
    (0..len)
        .map(|_| {
            let pair = rest % pair_count;
            rest /= pair_count;
            (pair / j_size, pair % j_size)
        })
        .collect()
}

pub(crate) fn is_distribution(row: &[f64]) -> bool {
    row.iter().all(|v| v.is_finite() && *v >= -tol::PROB)
        && (row.iter().sum::<f64>() - 1.0).abs() <= tol::PROB
}

/// Result of a Bayesian update that may have conditioned on a null event.
#[derive(Debug, Clone)]
pub struct PosteriorOutcome {
    pub belief: JointBelief,
    /// True when P(i, j) = 0 and the prior was returned by convention.
    pub degenerate: bool,
}

/// The product decomposition pi_ij = p_ij (x) Q_j of a posterior.
#[derive(Debug, Clone)]
pub struct DecomposedPosterior {
    pub p_ij: Vec<f64>,
    /// Row-stochastic K x L matrix, flat.
    pub q_j: Vec<f64>,
    /// Rows k where P(j|k) = 0, reset to Q(.|k) by convention.
    pub fallback_rows: Vec<usize>,
}

/// P^pi_{sigma,tau}(k, l, i, j) = pi^{kl} sigma^k(i) tau^l(j), flat tensor.
pub fn stage_joint_law(pi: &JointBelief, s: &StageStrategy) -> Vec<f64> {
    let (nk, nl, ni, nj) = (pi.k_size, pi.l_size, s.i_size, s.j_size);
    let mut law = vec![0.0; nk * nl * ni * nj];
    for k in 0..nk {
        let sigma = s.sigma_row(k);
        for l in 0..nl {
            let base = pi.get(k, l);
            let tau = s.tau_row(l);
            for i in 0..ni {
                for j in 0..nj {
                    law[((k * nl + l) * ni + i) * nj + j] = base * sigma[i] * tau[j];
                }
            }
        }
    }
    law
}

/// Probability of the action pair (i, j) under the stage law.
pub fn action_pair_prob(pi: &JointBelief, s: &StageStrategy, i: usize, j: usize) -> f64 {
    let mut total = 0.0;
    for k in 0..pi.k_size {
        let si = s.sigma_row(k)[i];
        for l in 0..pi.l_size {
            total += pi.get(k, l) * si * s.tau_row(l)[j];
        }
    }
    total
}

/// Bayes posterior pi_ij on K x L given the observed pair (i, j). When the
/// pair has zero probability the prior is returned unchanged and flagged.
pub fn posterior(pi: &JointBelief, s: &StageStrategy, i: usize, j: usize) -> PosteriorOutcome {
    let denom = action_pair_prob(pi, s, i, j);
    if denom <= 0.0 {
        return PosteriorOutcome {
            belief: pi.clone(),
            degenerate: true,
        };
    }
    let mut post = vec![0.0; pi.k_size * pi.l_size];
    for k in 0..pi.k_size {
        let si = s.sigma_row(k)[i];
        for l in 0..pi.l_size {
            post[k * pi.l_size + l] = pi.get(k, l) * si * s.tau_row(l)[j] / denom;
        }
    }
    PosteriorOutcome {
        belief: JointBelief {
            k_size: pi.k_size,
            l_size: pi.l_size,
            pi: post,
        },
        degenerate: false,
    }
}

/// Posterior on K given player 1's action i: p_i^k = P(k | i).
pub fn posterior_on_k(d: &Disintegration, s: &StageStrategy, i: usize) -> Result<Vec<f64>> {
    let denom: f64 = (0..d.k_size).map(|k| d.p[k] * s.sigma_row(k)[i]).sum();
    if denom <= 0.0 {
        return Err(SolverError::invariant(format!(
            "posterior_on_k: action {i} has zero probability"
        )));
    }
    Ok((0..d.k_size)
        .map(|k| d.p[k] * s.sigma_row(k)[i] / denom)
        .collect())
}

/// P(j | i) = sum_k p_i^k P(j|k).
pub fn p2_action_prob_given_i(
    d: &Disintegration,
    s: &StageStrategy,
    i: usize,
    j: usize,
) -> Result<f64> {
    let p_i = posterior_on_k(d, s, i)?;
    Ok((0..d.k_size)
        .map(|k| p_i[k] * s.p2_action_law_given_k(d, k, j))
        .sum())
}

/// Product decomposition of the posterior:
/// p_ij^k = p_i^k P(j|k) / P(j|i) and Q_j(l|k) = Q(l|k) tau^l(j) / P(j|k).
///
/// Requires P(i, j) > 0. Rows of Q_j at types with P(j|k) = 0 carry no
/// posterior mass; they are reset to the prior row Q(.|k) and reported.
pub fn decompose_posterior(
    d: &Disintegration,
    s: &StageStrategy,
    i: usize,
    j: usize,
) -> Result<DecomposedPosterior> {
    let p_i = posterior_on_k(d, s, i)?;
    let p_j_given_k: Vec<f64> = (0..d.k_size)
        .map(|k| s.p2_action_law_given_k(d, k, j))
        .collect();
    let p_j_given_i: f64 = (0..d.k_size).map(|k| p_i[k] * p_j_given_k[k]).sum();
    if p_j_given_i <= 0.0 {
        return Err(SolverError::invariant(format!(
            "decompose_posterior: pair ({i}, {j}) has zero probability"
        )));
    }
    let p_ij: Vec<f64> = (0..d.k_size)
        .map(|k| p_i[k] * p_j_given_k[k] / p_j_given_i)
        .collect();
    let (q_j, fallback_rows) = q_update(d, s, j);
    Ok(DecomposedPosterior {
        p_ij,
        q_j,
        fallback_rows,
    })
}

/// Q_j(l|k) = Q(l|k) tau^l(j) / P(j|k): the conditional law player 2 keeps
/// after playing j. Rows with P(j|k) = 0 fall back to the prior row Q(.|k)
/// (they carry no posterior mass) and are reported.
pub fn q_update(d: &Disintegration, s: &StageStrategy, j: usize) -> (Vec<f64>, Vec<usize>) {
    let mut q_j = vec![0.0; d.k_size * d.l_size];
    let mut fallback_rows = Vec::new();
    for k in 0..d.k_size {
        let p_j_given_k = s.p2_action_law_given_k(d, k, j);
        if p_j_given_k > 0.0 {
            for l in 0..d.l_size {
                q_j[k * d.l_size + l] = d.q_at(k, l) * s.tau_row(l)[j] / p_j_given_k;
            }
        } else {
            q_j[k * d.l_size..(k + 1) * d.l_size].copy_from_slice(d.q_row(k));
            fallback_rows.push(k);
        }
    }
    (q_j, fallback_rows)
}

/// zeta_j^k = zeta^k P(j|k): the auxiliary weight after player 2 plays j.
pub fn zeta_update(z: &AuxWeight, d: &Disintegration, s: &StageStrategy, j: usize) -> AuxWeight {
    let zeta = (0..d.k_size)
        .map(|k| z.zeta[k] * s.p2_action_law_given_k(d, k, j))
        .collect();
    AuxWeight { zeta }
}

/// Expected stage payoffs under (p, Q, sigma, tau):
/// the vector G^{k,Q}_{i tau} per action i, and the scalar G^pi_{sigma tau}.
pub struct StagePayoffs {
    /// vectors[i][k] = sum_{l,j} Q(l|k) tau^l(j) G^{kl}(i, j).
    pub vectors: Vec<Vec<f64>>,
    /// Expected first-stage payoff under the full stage law.
    pub scalar: f64,
}

pub fn stage_payoff_vectors(g: &GameSpec, d: &Disintegration, s: &StageStrategy) -> StagePayoffs {
    let mut vectors = vec![vec![0.0; g.k_size]; g.i_size];
    for i in 0..g.i_size {
        for k in 0..g.k_size {
            let mut acc = 0.0;
            for l in 0..g.l_size {
                let tau = s.tau_row(l);
                let q = d.q_at(k, l);
                if q == 0.0 {
                    continue;
                }
                for j in 0..g.j_size {
                    acc += q * tau[j] * g.payoff(k, l, i, j);
                }
            }
            vectors[i][k] = acc;
        }
    }
    let mut scalar = 0.0;
    for k in 0..g.k_size {
        let sigma = s.sigma_row(k);
        for i in 0..g.i_size {
            scalar += d.p[k] * sigma[i] * vectors[i][k];
        }
    }
    StagePayoffs { vectors, scalar }
}

fn check_history_budget(g: &GameSpec, horizon: usize, budget: usize) -> Result<()> {
    let per_stage = g.i_size * g.j_size;
    let mut total: usize = 1;
    for _ in 0..horizon {
        total = total
            .checked_mul(per_stage)
            .ok_or_else(|| SolverError::Resource {
                what: "terminal history count".into(),
                required: usize::MAX,
                cap: budget,
            })?;
        if total > budget {
            return Err(SolverError::Resource {
                what: "terminal history count".into(),
                required: total,
                cap: budget,
            });
        }
    }
    Ok(())
}

/// E[sum_m theta_m zeta^k G^{kl}(i_m, j_m)] by exact enumeration of all type
/// pairs and histories up to the horizon of theta.
pub fn payoff_aux(
    g: &GameSpec,
    pi: &JointBelief,
    s1: &BehaviorStrategy,
    s2: &BehaviorStrategy,
    theta: &Evaluation,
    z: &AuxWeight,
    history_budget: usize,
) -> Result<f64> {
    let horizon = theta.horizon();
    if s1.horizon < horizon || s2.horizon < horizon {
        return Err(SolverError::invariant(
            "strategy horizon shorter than the evaluation support",
        ));
    }
    check_history_budget(g, horizon, history_budget)?;
    let pair_count = g.i_size * g.j_size;
    let mut total = 0.0;
    for k in 0..g.k_size {
        if z.zeta[k] == 0.0 {
            continue;
        }
        for l in 0..g.l_size {
            let mass = pi.get(k, l) * z.zeta[k];
            if mass == 0.0 {
                continue;
            }
            total += mass * type_pair_value(g, s1, s2, theta, k, l, 0, 0, 1, pair_count);
        }
    }
    Ok(total)
}

/// Expected continuation payoff for a fixed type pair from `stage` on, given
/// the current history code. Pure recursion over the public history tree.
#[allow(clippy::too_many_arguments)]
fn type_pair_value(
    g: &GameSpec,
    s1: &BehaviorStrategy,
    s2: &BehaviorStrategy,
    theta: &Evaluation,
    k: usize,
    l: usize,
    stage: usize,
    code: usize,
    stride: usize,
    pair_count: usize,
) -> f64 {
    if stage >= theta.horizon() {
        return 0.0;
    }
    let row1 = s1.row(k, stage, code);
    let row2 = s2.row(l, stage, code);
    let w = theta.weight(stage);
    let mut acc = 0.0;
    for (i, &pi_prob) in row1.iter().enumerate() {
        if pi_prob == 0.0 {
            continue;
        }
        for (j, &pj_prob) in row2.iter().enumerate() {
            let prob = pi_prob * pj_prob;
            if prob == 0.0 {
                continue;
            }
            let next_code = code + (i * g.j_size + j) * stride;
            let cont = type_pair_value(
                g,
                s1,
                s2,
                theta,
                k,
                l,
                stage + 1,
                next_code,
                stride * pair_count,
                pair_count,
            );
            acc += prob * (w * g.payoff(k, l, i, j) + cont);
        }
    }
    acc
}

/// gamma_theta(pi, s1, s2) = E[sum_m theta_m G^{kl}(i_m, j_m)].
pub fn payoff_primal(
    g: &GameSpec,
    pi: &JointBelief,
    s1: &BehaviorStrategy,
    s2: &BehaviorStrategy,
    theta: &Evaluation,
    history_budget: usize,
) -> Result<f64> {
    payoff_aux(
        g,
        pi,
        s1,
        s2,
        theta,
        &AuxWeight::ones(g.k_size),
        history_budget,
    )
}

/// h_theta[x, Q](p, s1, s2) = gamma_theta(p (x) Q, s1, s2) - <p, x>.
#[allow(clippy::too_many_arguments)]
pub fn payoff_dual(
    g: &GameSpec,
    x: &[f64],
    d: &Disintegration,
    s1: &BehaviorStrategy,
    s2: &BehaviorStrategy,
    theta: &Evaluation,
    history_budget: usize,
) -> Result<f64> {
    if x.len() != d.k_size {
        return Err(SolverError::invariant("x has wrong dimension"));
    }
    let gamma = payoff_primal(g, &d.compose(), s1, s2, theta, history_budget)?;
    let cost: f64 = d.p.iter().zip(x).map(|(pk, xk)| pk * xk).sum();
    Ok(gamma - cost)
}

/// Default budget on the number of terminal histories enumerated per type pair.
pub const DEFAULT_HISTORY_BUDGET: usize = 1_000_000;
