//! Ground-truth computations at desk scale.
//!
//! Exact values of the repeated game come from one linear program over
//! reduced pure strategies: a pure strategy of a player is a map from
//! (own type, reachable history) to an action, and the payoff is bilinear in
//! per-type mixtures because each type's play only enters through its own
//! marginal. Best responses against a fixed strategy are per-type backward
//! inductions. The direct (non-recursive) dual value conjugates a sampled
//! value function and is the reference the dual recursion is checked against.

use crate::convex::{upper_conjugate, ConcaveModel, ConvexModel};
use crate::error::{Result, SolverError};
use crate::game::{
    action_pair_prob, posterior, stage_payoff_vectors, AuxWeight, BehaviorStrategy, Disintegration,
    Evaluation, GameSpec, JointBelief, Player, StageStrategy,
};
use crate::grid::{product_strategy_grid, simplex_mesh};
use crate::lp::{LinearProgram, Relation};

/// Resource budgets and grid defaults for the ground-truth computations.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Cap on the per-player total of reduced pure strategies (summed over
    /// own types).
    pub strategy_cap: usize,
    /// Cap on terminal histories enumerated per type pair.
    pub history_budget: usize,
    /// Resolution of the strategy grids in the recursion check.
    pub recursion_grid: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            strategy_cap: 4096,
            history_budget: crate::game::DEFAULT_HISTORY_BUDGET,
            recursion_grid: 8,
        }
    }
}

/// A reduced pure strategy: an action now and a continuation per opponent
/// action. Decisions exist only at histories reachable given own play.
#[derive(Debug, Clone)]
pub struct PureStrategy {
    pub action: usize,
    pub children: Vec<PureStrategy>,
}

/// Number of reduced pure strategies per type at the given depth, saturating
/// at usize::MAX on overflow.
pub fn reduced_strategy_count(own_actions: usize, opp_actions: usize, depth: usize) -> usize {
    // own ^ (1 + opp + opp^2 + ... + opp^(depth-1))
    let mut exponent: u128 = 0;
    let mut pow: u128 = 1;
    for _ in 0..depth {
        exponent = exponent.saturating_add(pow);
        pow = pow.saturating_mul(opp_actions as u128);
    }
    let mut count: u128 = 1;
    for _ in 0..exponent {
        count = count.saturating_mul(own_actions as u128);
        if count > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    count as usize
}

fn enumerate_reduced(own_actions: usize, opp_actions: usize, depth: usize) -> Vec<PureStrategy> {
    if depth == 0 {
        return Vec::new();
    }
    let subs = if depth == 1 {
        vec![Vec::new()]
    } else {
        // all assignments of a continuation to each opponent action
        let children_choices = enumerate_reduced(own_actions, opp_actions, depth - 1);
        let mut assignments: Vec<Vec<PureStrategy>> = vec![Vec::new()];
        for _ in 0..opp_actions {
            let mut next = Vec::with_capacity(assignments.len() * children_choices.len());
            for partial in &assignments {
                for child in &children_choices {
                    let mut row = partial.clone();
                    row.push(child.clone());
                    next.push(row);
                }
            }
            assignments = next;
        }
        assignments
    };
    let mut out = Vec::new();
    for action in 0..own_actions {
        for children in &subs {
            out.push(PureStrategy {
                action,
                children: children.clone(),
            });
        }
    }
    out
}

/// Total theta-weighted payoff along the deterministic play of two reduced
/// pure strategies for a fixed type pair.
fn walk_payoff(
    g: &GameSpec,
    k: usize,
    l: usize,
    theta: &Evaluation,
    a: &PureStrategy,
    b: &PureStrategy,
) -> f64 {
    let mut pay = 0.0;
    let mut node_a = a;
    let mut node_b = b;
    for m in 0..theta.horizon() {
        let i = node_a.action;
        let j = node_b.action;
        pay += theta.weight(m) * g.payoff(k, l, i, j);
        if m + 1 < theta.horizon() {
            node_a = &node_a.children[j];
            node_b = &node_b.children[i];
        }
    }
    pay
}

/// A zero-sum game that is bilinear over products of simplices: the
/// maximizer mixes within each row block, the minimizer within each column
/// block, and the payoff matrix is dense over (row, col).
pub(crate) struct ProductGame {
    pub row_blocks: Vec<usize>,
    pub col_blocks: Vec<usize>,
    /// Dense payoff to the maximizer, rows = sum(row_blocks).
    pub matrix: Vec<Vec<f64>>,
}

pub(crate) struct ProductGameSolution {
    pub value: f64,
    /// One mixture per row block.
    pub max_mixtures: Vec<Vec<f64>>,
    /// One mixture per column block.
    pub min_mixtures: Vec<Vec<f64>>,
}

impl ProductGame {
    /// Solve from both sides and cross-check the two LP values.
    pub fn solve(&self) -> Result<ProductGameSolution> {
        let (v_min, y) = self.solve_min_side()?;
        let transposed = self.negated_transpose();
        let (v_max_neg, x) = transposed.solve_min_side()?;
        let v_max = -v_max_neg;
        if (v_min - v_max).abs() > 1e-7 {
            return Err(SolverError::numerical(format!(
                "minimax LP cross-check failed: {v_min} vs {v_max}"
            )));
        }
        Ok(ProductGameSolution {
            value: 0.5 * (v_min + v_max),
            max_mixtures: split_blocks(&x, &self.row_blocks),
            min_mixtures: split_blocks(&y, &self.col_blocks),
        })
    }

    /// min over column mixtures y of sum over row blocks of the best row
    /// response: an LP with one bound variable per row block.
    fn solve_min_side(&self) -> Result<(f64, Vec<f64>)> {
        let n_cols: usize = self.col_blocks.iter().sum();
        let n_row_blocks = self.row_blocks.len();
        let n_vars = n_cols + n_row_blocks;
        let mut objective = vec![0.0; n_vars];
        for rb in 0..n_row_blocks {
            objective[n_cols + rb] = 1.0;
        }
        let mut lp = LinearProgram::minimize(objective);
        for rb in 0..n_row_blocks {
            lp.set_free(n_cols + rb);
        }
        let mut row_idx = 0;
        for (rb, &rows) in self.row_blocks.iter().enumerate() {
            for _ in 0..rows {
                let mut coeffs = vec![0.0; n_vars];
                for (col, val) in self.matrix[row_idx].iter().enumerate() {
                    coeffs[col] = -val;
                }
                coeffs[n_cols + rb] = 1.0;
                lp.constrain(coeffs, Relation::Ge, 0.0);
                row_idx += 1;
            }
        }
        let mut offset = 0;
        for &cols in &self.col_blocks {
            let mut coeffs = vec![0.0; n_vars];
            for c in 0..cols {
                coeffs[offset + c] = 1.0;
            }
            lp.constrain(coeffs, Relation::Eq, 1.0);
            offset += cols;
        }
        let (value, solution) = lp.solve().optimal("product game")?;
        Ok((value, solution[..n_cols].to_vec()))
    }

    fn negated_transpose(&self) -> ProductGame {
        let n_rows: usize = self.row_blocks.iter().sum();
        let n_cols: usize = self.col_blocks.iter().sum();
        let mut matrix = vec![vec![0.0; n_rows]; n_cols];
        #[allow(clippy::needless_range_loop)]
        for r in 0..n_rows {
            for c in 0..n_cols {
                matrix[c][r] = -self.matrix[r][c];
            }
        }
        ProductGame {
            row_blocks: self.col_blocks.clone(),
            col_blocks: self.row_blocks.clone(),
            matrix,
        }
    }
}

fn split_blocks(flat: &[f64], blocks: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut offset = 0;
    for &b in blocks {
        // LP noise can leave tiny negatives; clean and renormalize
        let mut row: Vec<f64> = flat[offset..offset + b].iter().map(|v| v.max(0.0)).collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            for v in row.iter_mut() {
                *v /= total;
            }
        } else {
            row = vec![1.0 / b as f64; b];
        }
        out.push(row);
        offset += b;
    }
    out
}

/// Exact solution of the theta-weighted repeated game with payoff
/// E_pi[sum theta_m zeta^k G^{kl}], over reduced pure strategies.
#[derive(Debug)]
pub struct PrimalSolution {
    pub value: f64,
    /// Per type of player 1, a mixture over that type's reduced strategies.
    pub p1_mixtures: Vec<Vec<f64>>,
    pub p2_mixtures: Vec<Vec<f64>>,
    pub p1_behavior: BehaviorStrategy,
    pub p2_behavior: BehaviorStrategy,
}

pub fn primal_value(
    g: &GameSpec,
    pi: &JointBelief,
    theta: &Evaluation,
    zeta: &AuxWeight,
    cfg: &OracleConfig,
) -> Result<PrimalSolution> {
    let horizon = theta.horizon();
    let per_type_1 = reduced_strategy_count(g.i_size, g.j_size, horizon);
    let per_type_2 = reduced_strategy_count(g.j_size, g.i_size, horizon);
    let total_1 = per_type_1.saturating_mul(g.k_size);
    let total_2 = per_type_2.saturating_mul(g.l_size);
    if total_1 > cfg.strategy_cap || total_2 > cfg.strategy_cap {
        return Err(SolverError::Resource {
            what: "reduced pure strategies".into(),
            required: total_1.max(total_2),
            cap: cfg.strategy_cap,
        });
    }
    let trees_1 = enumerate_reduced(g.i_size, g.j_size, horizon);
    let trees_2 = enumerate_reduced(g.j_size, g.i_size, horizon);

    // dense payoff between (k, a)-rows and (l, b)-columns
    let n_cols = g.l_size * trees_2.len();
    let mut matrix = vec![vec![0.0; n_cols]; g.k_size * trees_1.len()];
    for k in 0..g.k_size {
        for (a_idx, a) in trees_1.iter().enumerate() {
            let row = &mut matrix[k * trees_1.len() + a_idx];
            for l in 0..g.l_size {
                let weight = pi.get(k, l) * zeta.zeta[k];
                if weight == 0.0 {
                    continue;
                }
                for (b_idx, b) in trees_2.iter().enumerate() {
                    row[l * trees_2.len() + b_idx] += weight * walk_payoff(g, k, l, theta, a, b);
                }
            }
        }
    }
    let game = ProductGame {
        row_blocks: vec![trees_1.len(); g.k_size],
        col_blocks: vec![trees_2.len(); g.l_size],
        matrix,
    };
    let solution = game.solve()?;
    let p1_behavior =
        induced_behavior(Player::One, g, horizon, &trees_1, &solution.max_mixtures)?;
    let p2_behavior =
        induced_behavior(Player::Two, g, horizon, &trees_2, &solution.min_mixtures)?;
    Ok(PrimalSolution {
        value: solution.value,
        p1_mixtures: solution.max_mixtures,
        p2_mixtures: solution.min_mixtures,
        p1_behavior,
        p2_behavior,
    })
}

/// Kuhn transformation: the behavior strategy realization-equivalent to a
/// mixture over reduced pure strategies.
fn induced_behavior(
    player: Player,
    g: &GameSpec,
    horizon: usize,
    trees: &[PureStrategy],
    mixtures: &[Vec<f64>],
) -> Result<BehaviorStrategy> {
    let own_actions = match player {
        Player::One => g.i_size,
        Player::Two => g.j_size,
    };
    BehaviorStrategy::from_fn(
        player,
        mixtures.len(),
        g.i_size,
        g.j_size,
        horizon,
        |t, _stage, hist| {
            let mut mass = vec![0.0; own_actions];
            let mut total = 0.0;
            'tree: for (tree, &w) in trees.iter().zip(&mixtures[t]) {
                if w <= 0.0 {
                    continue;
                }
                let mut node = tree;
                for &(i, j) in hist {
                    let (own, opp) = match player {
                        Player::One => (i, j),
                        Player::Two => (j, i),
                    };
                    if node.action != own {
                        continue 'tree;
                    }
                    node = &node.children[opp];
                }
                mass[node.action] += w;
                total += w;
            }
            if total > 0.0 {
                mass.iter().map(|m| m / total).collect()
            } else {
                vec![1.0 / own_actions as f64; own_actions]
            }
        },
    )
}

/// Best response of player 1 against a fixed behavior strategy of player 2:
/// per type k a finite-horizon decision tree solved by backward induction,
/// with player 2's randomization and the belief over l folded into
/// unnormalized type weights.
pub fn best_response_value(
    g: &GameSpec,
    pi: &JointBelief,
    theta: &Evaluation,
    fixed: &BehaviorStrategy,
    cfg: &OracleConfig,
) -> Result<(f64, BehaviorStrategy)> {
    if fixed.player != Player::Two {
        return Err(SolverError::invariant(
            "best_response_value expects a strategy of player 2",
        ));
    }
    let horizon = theta.horizon();
    if fixed.horizon < horizon {
        return Err(SolverError::invariant(
            "fixed strategy horizon shorter than the evaluation",
        ));
    }
    let pair_count = g.i_size * g.j_size;
    let mut n_hist: usize = 1;
    for _ in 0..horizon {
        n_hist = n_hist
            .checked_mul(pair_count)
            .filter(|&n| n <= cfg.history_budget)
            .ok_or(SolverError::Resource {
                what: "best-response history count".into(),
                required: usize::MAX,
                cap: cfg.history_budget,
            })?;
    }

    // chosen[stage][k][code] = argmax action
    let mut chosen: Vec<Vec<Vec<usize>>> = (0..horizon)
        .map(|m| vec![vec![0usize; pair_count.pow(m as u32)]; g.k_size])
        .collect();
    let mut total = 0.0;
    for k in 0..g.k_size {
        let weights: Vec<f64> = (0..g.l_size).map(|l| pi.get(k, l)).collect();
        total += br_recurse(g, theta, fixed, k, 0, 0, 1, &weights, &mut chosen);
    }
    let br = BehaviorStrategy::from_fn(
        Player::One,
        g.k_size,
        g.i_size,
        g.j_size,
        horizon,
        |k, stage, hist| {
            let code = encode_history(hist, g.j_size, pair_count);
            let mut row = vec![0.0; g.i_size];
            row[chosen[stage][k][code]] = 1.0;
            row
        },
    )?;
    Ok((total, br))
}

fn encode_history(hist: &[(usize, usize)], j_size: usize, pair_count: usize) -> usize {
    let mut code = 0;
    let mut stride = 1;
    for &(i, j) in hist {
        code += (i * j_size + j) * stride;
        stride *= pair_count;
    }
    code
}

/// Optimal continuation payoff for type k from `stage` given unnormalized
/// weights over player 2's types. Fills the argmax table along the way.
#[allow(clippy::too_many_arguments)]
fn br_recurse(
    g: &GameSpec,
    theta: &Evaluation,
    fixed: &BehaviorStrategy,
    k: usize,
    stage: usize,
    code: usize,
    stride: usize,
    weights: &[f64],
    chosen: &mut [Vec<Vec<usize>>],
) -> f64 {
    if stage >= theta.horizon() {
        return 0.0;
    }
    let w_stage = theta.weight(stage);
    let mut best = f64::NEG_INFINITY;
    let mut best_action = 0;
    for i in 0..g.i_size {
        let mut val = 0.0;
        for j in 0..g.j_size {
            let mut stage_pay = 0.0;
            let mut branch_mass = 0.0;
            let mut next_weights = vec![0.0; g.l_size];
            for l in 0..g.l_size {
                let wl = weights[l] * fixed.row(l, stage, code)[j];
                next_weights[l] = wl;
                branch_mass += wl;
                stage_pay += wl * g.payoff(k, l, i, j);
            }
            val += w_stage * stage_pay;
            if branch_mass > 0.0 && stage + 1 < theta.horizon() {
                val += br_recurse(
                    g,
                    theta,
                    fixed,
                    k,
                    stage + 1,
                    code + (i * g.j_size + j) * stride,
                    stride * (g.i_size * g.j_size),
                    &next_weights,
                    chosen,
                );
            }
        }
        if val > best + 1e-15 {
            best = val;
            best_action = i;
        }
    }
    chosen[stage][k][code] = best_action;
    best
}

/// Report of the primal recursive formula checked by grid minimax.
#[derive(Debug, Clone)]
pub struct RecursionReport {
    pub oracle_value: f64,
    pub sup_inf: f64,
    pub inf_sup: f64,
    /// Lipschitz grid-error certificate |G| (mesh_sigma + mesh_tau).
    pub grid_bound: f64,
    pub within_bound: bool,
    pub orderings_agree: bool,
}

/// Evaluates the one-step lookahead of the value recursion on strategy grids
/// and compares both orderings against the oracle value.
pub fn primal_recursion_check(
    g: &GameSpec,
    pi: &JointBelief,
    theta: &Evaluation,
    cfg: &OracleConfig,
) -> Result<RecursionReport> {
    let zeta = AuxWeight::ones(g.k_size);
    let oracle_value = primal_value(g, pi, theta, &zeta, cfg)?.value;
    if theta.is_single_stage() {
        // gamma_{theta+} = 0 convention: the lookahead is the one-stage value
        let rhs = oracle_value;
        return Ok(RecursionReport {
            oracle_value,
            sup_inf: rhs,
            inf_sup: rhs,
            grid_bound: 2.0 * crate::tol::LP,
            within_bound: true,
            orderings_agree: true,
        });
    }
    let r = cfg.recursion_grid;
    let sigma_grid = product_strategy_grid(g.k_size, g.i_size, r);
    let tau_grid = product_strategy_grid(g.l_size, g.j_size, r);
    let nodes = sigma_grid.len().saturating_mul(tau_grid.len());
    if nodes > 10_000_000 {
        return Err(SolverError::Resource {
            what: "strategy grid nodes".into(),
            required: nodes,
            cap: 10_000_000,
        });
    }
    let tail = theta.tail()?;
    let head = theta.head();
    let d = pi.disintegrate();
    let mut values = vec![vec![0.0f64; tau_grid.len()]; sigma_grid.len()];
    for (si, sigma) in sigma_grid.iter().enumerate() {
        for (ti, tau) in tau_grid.iter().enumerate() {
            let stage = StageStrategy::new(g.i_size, g.j_size, sigma.clone(), tau.clone())?;
            let stage_pay = stage_payoff_vectors(g, &d, &stage).scalar;
            let mut cont = 0.0;
            for i in 0..g.i_size {
                for j in 0..g.j_size {
                    let w = action_pair_prob(pi, &stage, i, j);
                    if w <= 0.0 {
                        continue;
                    }
                    let post = posterior(pi, &stage, i, j).belief;
                    cont += w * primal_value(g, &post, &tail, &zeta, cfg)?.value;
                }
            }
            values[si][ti] = head * stage_pay + (1.0 - head) * cont;
        }
    }
    let sup_inf = values
        .iter()
        .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    let inf_sup = (0..tau_grid.len())
        .map(|ti| {
            (0..sigma_grid.len())
                .map(|si| values[si][ti])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    let grid_bound =
        g.payoff_bound * (simplex_mesh(g.i_size, r) + simplex_mesh(g.j_size, r)) + 1e-7;
    let within_bound = (sup_inf - oracle_value).abs() <= grid_bound
        && (inf_sup - oracle_value).abs() <= grid_bound;
    let orderings_agree = (sup_inf - inf_sup).abs() <= 2.0 * grid_bound;
    Ok(RecursionReport {
        oracle_value,
        sup_inf,
        inf_sup,
        grid_bound,
        within_bound,
        orderings_agree,
    })
}

/// Direct dual value: conjugate of the sampled map p -> v_theta(p (x) Q; zeta)
/// evaluated at x, with its one-sided mesh certificate.
pub struct DualDirect {
    pub value: f64,
    pub error_bound: f64,
    pub concave: ConcaveModel,
    pub conjugate: ConvexModel,
}

pub fn dual_value_direct(
    g: &GameSpec,
    x: &[f64],
    d: &Disintegration,
    zeta: &AuxWeight,
    theta: &Evaluation,
    resolution: usize,
    cfg: &OracleConfig,
) -> Result<DualDirect> {
    if x.len() != g.k_size {
        return Err(SolverError::invariant("x has wrong dimension"));
    }
    let lipschitz = g.payoff_bound * zeta.max_abs();
    let concave = ConcaveModel::on_grid(g.k_size, resolution, lipschitz, |p| {
        let belief = d.with_marginal(p.to_vec()).compose();
        Ok(primal_value(g, &belief, theta, zeta, cfg)?.value)
    })?;
    let (conjugate, bound) = upper_conjugate(&concave)?;
    let value = conjugate.eval(x);
    let x_norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DualDirect {
        value,
        error_bound: bound.value_error(x_norm) + crate::tol::LP,
        concave,
        conjugate,
    })
}
