//! Recursive solver for the dual game with the auxiliary weight vector.
//!
//! The dual of the repeated game at (x, Q) lets player 1 pick the marginal p
//! at cost <p, x>. Its value is the upper conjugate of p -> v(p (x) Q) and
//! satisfies a backward recursion once the state is enlarged with a per-type
//! weight zeta accumulating P(j|k) factors: minimizing over the first move
//! tau of player 2 and over splittings (x_ij) of the adjusted target, the
//! stage value is the max over i of the summed child duals at
//! (x_ij, Q_j, zeta_j). Child value functions are certified piecewise-linear
//! models, so each inner minimization over splittings is one LP (an exact
//! infimal convolution) and every grid enters the reported error bound.
//!
//! Stage-payoff targets are weighted by the current zeta (at the root
//! zeta = 1 this is the plain expected stage payoff); this weighting is what
//! makes the recursion consistent with the scaling law
//! w(x, Q; a*zeta) = a * w(x/a, Q; zeta) below the root.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convex::{inf_convolution, upper_conjugate, ConcaveModel, ConvexModel};
use crate::error::{Result, SolverError};
use crate::game::{
    q_update, stage_payoff_vectors, zeta_update, AuxWeight, Disintegration, Evaluation, GameSpec,
    StageStrategy,
};
use crate::grid::{
    cross_section_cover, cross_section_grid, default_resolution, product_strategy_grid,
    simplex_grid, simplex_mesh,
};
use crate::lp::{LinearProgram, Relation};
use crate::oracle::{primal_value, OracleConfig};

/// Grid resolutions and budgets of the dual solver.
#[derive(Debug, Clone, Copy)]
pub struct DualConfig {
    /// Simplex grid resolution for value models; None picks by dimension.
    pub p_grid: Option<usize>,
    /// Resolution of the Delta(J) grid searched per type row of tau.
    pub tau_grid: usize,
    /// Points per axis when sampling child duals on the x cross-section
    /// (horizon >= 3 only).
    pub x_samples: usize,
    /// One local refinement pass around the incumbent tau.
    pub refine: bool,
    /// Relative jitter applied to refinement candidates.
    pub jitter: f64,
    pub seed: u64,
    pub oracle: OracleConfig,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            p_grid: None,
            tau_grid: 4,
            x_samples: 9,
            refine: true,
            jitter: 0.25,
            seed: 0,
            oracle: OracleConfig::default(),
        }
    }
}

impl DualConfig {
    pub fn p_resolution(&self, dim: usize) -> usize {
        self.p_grid.unwrap_or_else(|| default_resolution(dim))
    }

    /// Doubled grid resolutions, for refinement-trend checks.
    pub fn doubled(&self) -> DualConfig {
        DualConfig {
            p_grid: Some(self.p_resolution(0).max(1) * 2),
            tau_grid: self.tau_grid * 2,
            x_samples: self.x_samples * 2 - 1,
            ..*self
        }
    }
}

/// State of the dual game: (x, Q, zeta, theta). The conditional Q is carried
/// inside a Disintegration whose marginal is a placeholder (player 1 chooses
/// the marginal in the dual game; no code path below reads it).
#[derive(Debug, Clone)]
pub struct DualState {
    pub x: Vec<f64>,
    pub cond: Disintegration,
    pub zeta: AuxWeight,
    pub theta: Evaluation,
}

impl DualState {
    pub fn new(
        x: Vec<f64>,
        q_rows: Vec<f64>,
        l_size: usize,
        zeta: AuxWeight,
        theta: Evaluation,
    ) -> Result<Self> {
        let k_size = x.len();
        if zeta.zeta.len() != k_size {
            return Err(SolverError::invariant("zeta has wrong dimension"));
        }
        let cond = Disintegration::new(vec![1.0 / k_size as f64; k_size], q_rows, l_size)?;
        Ok(DualState {
            x,
            cond,
            zeta,
            theta,
        })
    }

    pub fn k_size(&self) -> usize {
        self.x.len()
    }
}

/// Per-j child state reached after the first dual stage.
#[derive(Debug, Clone)]
pub enum ChildState {
    /// P(j|k) = 0 for every k with nonzero weight: the branch carries no
    /// payoff and its value function is identically zero.
    Dead,
    Live { q_rows: Vec<f64>, zeta: AuxWeight },
}

/// Additive error certificate of a dual solve, by source.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorBreakdown {
    /// Conjugation mesh terms of the child value models.
    pub conj_mesh: f64,
    /// Covering term of the grid searched for tau.
    pub tau_grid: f64,
    /// Cross-section sampling terms (and recursive child errors) at
    /// horizon >= 3.
    pub x_grid: f64,
}

impl ErrorBreakdown {
    pub fn total(&self) -> f64 {
        self.conj_mesh + self.tau_grid + self.x_grid
    }
}

/// Value and minimizers of one dual solve.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub value: f64,
    pub l_size: usize,
    pub j_size: usize,
    /// Player 2's optimal first move, flat over (l, j).
    pub tau: Vec<f64>,
    /// splits[i][j] = x_ij. Empty when theta has a single stage. For the
    /// general recursion they satisfy sum_j x_ij = (x - theta_1 zeta*G_i) /
    /// (1 - theta_1); for the independent case, sum_j taubar(j) x_ij equals
    /// the same target with zeta = 1.
    pub splits: Vec<Vec<Vec<f64>>>,
    /// Child states per j; empty when theta has a single stage.
    pub children: Vec<ChildState>,
    pub error: ErrorBreakdown,
}

impl DualSolution {
    pub fn tau_row(&self, l: usize) -> &[f64] {
        &self.tau[l * self.j_size..(l + 1) * self.j_size]
    }
}

/// Error certificate of a child value model, as a function of where the
/// model is evaluated: fixed + per_xnorm * |x|_inf + x_grid.
#[derive(Debug, Clone, Copy)]
struct ModelErr {
    conj_fixed: f64,
    per_xnorm: f64,
    x_grid: f64,
}

impl ModelErr {
    fn zero() -> ModelErr {
        ModelErr {
            conj_fixed: 0.0,
            per_xnorm: 0.0,
            x_grid: 0.0,
        }
    }

    fn conj_at(&self, x_norm: f64) -> f64 {
        self.conj_fixed + self.per_xnorm * x_norm
    }
}

type ModelKey = Vec<u64>;

/// Memo of child value models, keyed by (Q, zeta, theta, grids, box).
/// Model construction is deterministic, so sharing across a solve is safe.
pub struct SolveCtx {
    cache: HashMap<ModelKey, (ConvexModel, ModelErr)>,
}

impl SolveCtx {
    pub fn new() -> SolveCtx {
        SolveCtx {
            cache: HashMap::new(),
        }
    }
}

impl Default for SolveCtx {
    fn default() -> Self {
        SolveCtx::new()
    }
}

fn push_bits(key: &mut ModelKey, values: &[f64]) {
    for v in values {
        key.push(v.to_bits());
    }
}

fn model_key(
    q_rows: &[f64],
    zeta: &AuxWeight,
    theta: &Evaluation,
    p_res: usize,
    x_samples: usize,
    sample_box: f64,
) -> ModelKey {
    let mut key = Vec::with_capacity(q_rows.len() + zeta.zeta.len() + theta.horizon() + 4);
    key.push(q_rows.len() as u64);
    push_bits(&mut key, q_rows);
    push_bits(&mut key, &zeta.zeta);
    push_bits(&mut key, theta.weights());
    key.push(p_res as u64);
    key.push(x_samples as u64);
    key.push(sample_box.to_bits());
    key
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn uniform_cond(q_rows: Vec<f64>, k_size: usize, l_size: usize) -> Result<Disintegration> {
    Disintegration::new(vec![1.0 / k_size as f64; k_size], q_rows, l_size)
}

/// Exact conjugate of the zero function on Delta(K): pieces over the grid,
/// all with intercept 0, evaluating to -min_k x^k.
fn zero_conjugate_model(k_size: usize, p_res: usize) -> Result<ConvexModel> {
    let pieces = simplex_grid(k_size, p_res)
        .into_iter()
        .map(|p| (p.iter().map(|c| -c).collect(), 0.0))
        .collect();
    ConvexModel::new(pieces, 0.0)
}

/// Value of the one-stage game at marginal p: a bilinear zero-sum LP over
/// sigma in Delta(I)^K, tau in Delta(J)^L with weights p^k zeta^k Q(l|k).
fn one_stage_value(
    g: &GameSpec,
    cond: &Disintegration,
    zeta: &AuxWeight,
    p: &[f64],
    oracle_cfg: &OracleConfig,
) -> Result<f64> {
    let belief = cond.with_marginal(p.to_vec()).compose();
    let theta = Evaluation::new(vec![1.0])?;
    Ok(primal_value(g, &belief, &theta, zeta, oracle_cfg)?.value)
}

/// The exact one-stage dual optimum of player 2:
/// min over tau of max_{k,i} [zeta^k G^{k,Q}_{i tau} - x^k], as one LP.
/// Returns (tau rows flat over (l, j), optimal value).
pub fn one_stage_dual_tau(
    g: &GameSpec,
    x: &[f64],
    cond: &Disintegration,
    zeta: &AuxWeight,
) -> Result<(Vec<f64>, f64)> {
    let (nk, nl, ni, nj) = (g.k_size, g.l_size, g.i_size, g.j_size);
    // variables: tau_{l j} >= 0, then t free; minimize t
    let n_vars = nl * nj + 1;
    let mut objective = vec![0.0; n_vars];
    objective[nl * nj] = 1.0;
    let mut lp = LinearProgram::minimize(objective);
    lp.set_free(nl * nj);
    for k in 0..nk {
        for i in 0..ni {
            // t >= sum_{l,j} zeta^k Q(l|k) G^{kl}(i,j) tau_{lj} - x^k
            let mut row = vec![0.0; n_vars];
            for l in 0..nl {
                for j in 0..nj {
                    row[l * nj + j] = -zeta.zeta[k] * cond.q_at(k, l) * g.payoff(k, l, i, j);
                }
            }
            row[nl * nj] = 1.0;
            lp.constrain(row, Relation::Ge, -x[k]);
        }
    }
    for l in 0..nl {
        let mut row = vec![0.0; n_vars];
        for j in 0..nj {
            row[l * nj + j] = 1.0;
        }
        lp.constrain(row, Relation::Eq, 1.0);
    }
    let (value, solution) = lp.solve().optimal("one-stage dual")?;
    let mut tau = solution[..nl * nj].to_vec();
    for row in tau.chunks_mut(nj) {
        let total: f64 = row.iter().map(|v| v.max(0.0)).sum();
        if total > 0.0 {
            for v in row.iter_mut() {
                *v = v.max(0.0) / total;
            }
        } else {
            row.fill(1.0 / nj as f64);
        }
    }
    Ok((tau, value))
}

/// Certified model of x -> w_theta(x, Q; zeta). Single-stage thetas conjugate
/// a grid of one-stage LP values; longer thetas sample the recursion on a
/// cross-section box and rebuild a simplex-sloped model through the lower
/// conjugate of the samples.
#[allow(clippy::too_many_arguments)]
fn child_value_model(
    g: &GameSpec,
    cfg: &DualConfig,
    ctx: &mut SolveCtx,
    q_rows: &[f64],
    zeta: &AuxWeight,
    theta: &Evaluation,
    sample_box: f64,
) -> Result<(ConvexModel, ModelErr)> {
    let nk = g.k_size;
    let p_res = cfg.p_resolution(nk);
    let key = model_key(q_rows, zeta, theta, p_res, cfg.x_samples, sample_box);
    if let Some((model, err)) = ctx.cache.get(&key) {
        return Ok((model.clone(), *err));
    }
    let result = if zeta.zeta.iter().all(|z| *z == 0.0) {
        (zero_conjugate_model(nk, p_res)?, ModelErr::zero())
    } else if theta.is_single_stage() {
        let cond = uniform_cond(q_rows.to_vec(), nk, g.l_size)?;
        let lipschitz = g.payoff_bound * zeta.max_abs();
        let concave = ConcaveModel::on_grid(nk, p_res, lipschitz, |p| {
            one_stage_value(g, &cond, zeta, p, &cfg.oracle)
        })?;
        let (model, bound) = upper_conjugate(&concave)?;
        let err = ModelErr {
            conj_fixed: bound.lipschitz * bound.mesh + crate::tol::LP,
            per_xnorm: bound.mesh,
            x_grid: 0.0,
        };
        (model, err)
    } else {
        // sample the recursion on the zero-sum cross-section; functions with
        // the translation property are determined there
        let samples = cross_section_grid(nk, sample_box, cfg.x_samples);
        let cover = cross_section_cover(nk, sample_box, cfg.x_samples);
        let mut values = Vec::with_capacity(samples.len());
        let mut worst_child_err = 0.0f64;
        for x_s in &samples {
            let state = DualState {
                x: x_s.clone(),
                cond: uniform_cond(q_rows.to_vec(), nk, g.l_size)?,
                zeta: zeta.clone(),
                theta: theta.clone(),
            };
            let sub = dual_recursive_in(g, &state, cfg, ctx)?;
            worst_child_err = worst_child_err.max(sub.error.total());
            values.push(sub.value);
        }
        let p_points = simplex_grid(nk, p_res);
        let mesh = simplex_mesh(nk, p_res);
        let mut model_samples = Vec::with_capacity(p_points.len());
        for p in p_points {
            let f = samples
                .iter()
                .zip(&values)
                .map(|(x_s, w)| w + x_s.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            model_samples.push((p, f));
        }
        let lipschitz = g.payoff_bound * zeta.max_abs();
        // declared constant must also dominate the sampled slopes, which can
        // exceed the true one by the approximation error
        let declared = declared_lipschitz(&model_samples, lipschitz);
        let concave = ConcaveModel::new(model_samples, declared, mesh)?;
        let (model, _) = upper_conjugate(&concave)?;
        let err = ModelErr {
            conj_fixed: lipschitz * mesh + crate::tol::LP,
            per_xnorm: mesh,
            x_grid: 2.0 * cover + worst_child_err,
        };
        (model, err)
    };
    ctx.cache.insert(key, result.clone());
    Ok(result)
}

fn declared_lipschitz(samples: &[(Vec<f64>, f64)], floor: f64) -> f64 {
    let mut lip = floor;
    for a in 0..samples.len() {
        for b in (a + 1)..samples.len() {
            let dist: f64 = samples[a]
                .0
                .iter()
                .zip(&samples[b].0)
                .map(|(x, y)| (x - y).abs())
                .sum();
            if dist > 1e-12 {
                lip = lip.max((samples[a].1 - samples[b].1).abs() / dist);
            }
        }
    }
    lip + 1e-9
}

/// Child x-box per level: splittings at the optimum stay within the
/// conjugate-slope range of the adjusted target.
fn child_box(g: &GameSpec, x: &[f64], head: f64, zeta_norm: f64) -> f64 {
    let g_term = g.payoff_bound * zeta_norm;
    (inf_norm(x) + head * g_term) / (1.0 - head) + g_term
}

/// Dispatch on the evaluation head: base case at theta_1 = 1, else the
/// recursion.
pub fn solve_dual(g: &GameSpec, state: &DualState, cfg: &DualConfig) -> Result<DualSolution> {
    let mut ctx = SolveCtx::new();
    solve_dual_in(g, state, cfg, &mut ctx)
}

pub fn solve_dual_in(
    g: &GameSpec,
    state: &DualState,
    cfg: &DualConfig,
    ctx: &mut SolveCtx,
) -> Result<DualSolution> {
    if state.theta.is_single_stage() {
        dual_base(g, state, cfg, ctx)
    } else {
        dual_recursive_in(g, state, cfg, ctx)
    }
}

/// Base case theta = (1): the value is the sampled conjugate of the
/// one-stage value function, and the optimal tau comes from the exact
/// one-stage dual LP.
pub fn dual_base(
    g: &GameSpec,
    state: &DualState,
    cfg: &DualConfig,
    ctx: &mut SolveCtx,
) -> Result<DualSolution> {
    if !state.theta.is_single_stage() {
        return Err(SolverError::invariant("dual_base requires theta = (1)"));
    }
    let (model, err) = child_value_model(
        g,
        cfg,
        ctx,
        state.cond.q_entries(),
        &state.zeta,
        &state.theta,
        0.0,
    )?;
    let value = model.eval(&state.x);
    let (tau, _exact) = one_stage_dual_tau(g, &state.x, &state.cond, &state.zeta)?;
    Ok(DualSolution {
        value,
        l_size: g.l_size,
        j_size: g.j_size,
        tau,
        splits: Vec::new(),
        children: Vec::new(),
        error: ErrorBreakdown {
            conj_mesh: err.conj_at(inf_norm(&state.x)),
            tau_grid: 0.0,
            x_grid: 0.0,
        },
    })
}

struct Candidate {
    value: f64,
    tau: Vec<f64>,
    splits: Vec<Vec<Vec<f64>>>,
    children: Vec<ChildState>,
    conj_err: f64,
    x_err: f64,
}

/// The dual recursion: for each tau on the grid, build child models for
/// every j, minimize over splittings per i by infimal convolution, take the
/// max over i, and keep the minimizing tau (first grid index on ties).
pub fn dual_recursive(g: &GameSpec, state: &DualState, cfg: &DualConfig) -> Result<DualSolution> {
    let mut ctx = SolveCtx::new();
    dual_recursive_in(g, state, cfg, &mut ctx)
}

pub fn dual_recursive_in(
    g: &GameSpec,
    state: &DualState,
    cfg: &DualConfig,
    ctx: &mut SolveCtx,
) -> Result<DualSolution> {
    let head = state.theta.head();
    if state.theta.is_single_stage() {
        return Err(SolverError::invariant(
            "dual_recursive requires theta_1 < 1",
        ));
    }
    let tail = state.theta.tail()?;
    let zeta_norm = state.zeta.max_abs();
    let b_child = child_box(g, &state.x, head, zeta_norm);

    let grid = product_strategy_grid(g.l_size, g.j_size, cfg.tau_grid);
    let mut best: Option<Candidate> = None;
    for tau_rows in &grid {
        let cand = evaluate_tau(g, state, cfg, ctx, tau_rows, &tail, head, b_child)?;
        if best.as_ref().map_or(true, |b| cand.value < b.value) {
            best = Some(cand);
        }
    }
    let mut best = best.ok_or_else(|| SolverError::invariant("empty tau grid"))?;

    if cfg.refine {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let step = 0.5 / cfg.tau_grid as f64;
        for tau_rows in refinement_candidates(
            &best.tau,
            g.l_size,
            g.j_size,
            step,
            cfg.jitter,
            &mut rng,
        ) {
            let cand = evaluate_tau(g, state, cfg, ctx, &tau_rows, &tail, head, b_child)?;
            if cand.value < best.value {
                best = cand;
            }
        }
    }

    // the tau certificate keeps the coarse-grid covering radius; refinement
    // only improves the incumbent
    let tau_term = g.payoff_bound * zeta_norm * simplex_mesh(g.j_size, cfg.tau_grid);
    Ok(DualSolution {
        value: best.value,
        l_size: g.l_size,
        j_size: g.j_size,
        tau: best.tau,
        splits: best.splits,
        children: best.children,
        error: ErrorBreakdown {
            conj_mesh: best.conj_err,
            tau_grid: tau_term,
            x_grid: best.x_err,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_tau(
    g: &GameSpec,
    state: &DualState,
    cfg: &DualConfig,
    ctx: &mut SolveCtx,
    tau_rows: &[f64],
    tail: &Evaluation,
    head: f64,
    b_child: f64,
) -> Result<Candidate> {
    let nk = g.k_size;
    let stage = StageStrategy::new(
        g.i_size,
        g.j_size,
        vec![1.0 / g.i_size as f64; g.k_size * g.i_size],
        tau_rows.to_vec(),
    )?;
    let mut models: Vec<ConvexModel> = Vec::with_capacity(g.j_size);
    let mut errs: Vec<ModelErr> = Vec::with_capacity(g.j_size);
    let mut children: Vec<ChildState> = Vec::with_capacity(g.j_size);
    let p_res = cfg.p_resolution(nk);
    for j in 0..g.j_size {
        let zeta_j = zeta_update(&state.zeta, &state.cond, &stage, j);
        if zeta_j.zeta.iter().all(|z| *z == 0.0) {
            models.push(zero_conjugate_model(nk, p_res)?);
            errs.push(ModelErr::zero());
            children.push(ChildState::Dead);
        } else {
            let (q_j, _) = q_update(&state.cond, &stage, j);
            let (model, err) = child_value_model(g, cfg, ctx, &q_j, &zeta_j, tail, b_child)?;
            models.push(model);
            errs.push(err);
            children.push(ChildState::Live {
                q_rows: q_j,
                zeta: zeta_j,
            });
        }
    }
    let payoffs = stage_payoff_vectors(g, &state.cond, &stage);
    let model_refs: Vec<&ConvexModel> = models.iter().collect();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_conj = 0.0f64;
    let mut splits = Vec::with_capacity(g.i_size);
    for i in 0..g.i_size {
        // target of the splitting: the zeta-weighted stage payoff removed
        let z_i: Vec<f64> = (0..nk)
            .map(|k| (state.x[k] - head * state.zeta.zeta[k] * payoffs.vectors[i][k]) / (1.0 - head))
            .collect();
        let (val, split_i) = inf_convolution(&model_refs, &z_i)?;
        for k in 0..nk {
            let total: f64 = split_i.iter().map(|s| s[k]).sum();
            if (total - z_i[k]).abs() > 1e-9 {
                return Err(SolverError::numerical(
                    "splitting constraint violated beyond tolerance",
                ));
            }
        }
        let conj_i: f64 = split_i
            .iter()
            .zip(&errs)
            .map(|(x_ij, e)| e.conj_at(b_child.max(inf_norm(x_ij))))
            .sum();
        if val > worst {
            worst = val;
        }
        worst_conj = worst_conj.max(conj_i);
        splits.push(split_i);
    }
    let x_err: f64 = errs.iter().map(|e| e.x_grid).sum();
    Ok(Candidate {
        value: (1.0 - head) * worst,
        tau: tau_rows.to_vec(),
        splits,
        children,
        conj_err: (1.0 - head) * worst_conj,
        x_err: (1.0 - head) * x_err,
    })
}

/// Local moves around the incumbent: single-step mass transfers on each row
/// at half the grid step, optionally jittered, combined across rows.
fn refinement_candidates(
    incumbent: &[f64],
    l_size: usize,
    j_size: usize,
    step: f64,
    jitter: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut per_row: Vec<Vec<Vec<f64>>> = Vec::with_capacity(l_size);
    for l in 0..l_size {
        let row = &incumbent[l * j_size..(l + 1) * j_size];
        let mut options = vec![row.to_vec()];
        for a in 0..j_size {
            for b in 0..j_size {
                if a == b {
                    continue;
                }
                let mut moved = row.to_vec();
                moved[a] += step;
                moved[b] -= step;
                if let Some(valid) = project_row(&moved) {
                    options.push(valid);
                }
            }
        }
        per_row.push(options);
    }
    let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
    for options in &per_row {
        let mut next = Vec::with_capacity(combos.len() * options.len());
        for prefix in &combos {
            for opt in options {
                let mut row = prefix.clone();
                row.extend_from_slice(opt);
                next.push(row);
            }
        }
        combos = next;
        if combos.len() > 512 {
            combos.truncate(512);
        }
    }
    // drop the unmodified incumbent, add one jittered copy of each move
    let mut out = Vec::with_capacity(combos.len() * 2);
    for combo in combos.into_iter().skip(1) {
        if jitter > 0.0 {
            let mut shaken = combo.clone();
            for l in 0..l_size {
                let row = &mut shaken[l * j_size..(l + 1) * j_size];
                for v in row.iter_mut() {
                    *v += jitter * step * rng.gen_range(-1.0..1.0);
                }
                if let Some(valid) = project_row(row) {
                    row.copy_from_slice(&valid);
                } else {
                    row.fill(1.0 / j_size as f64);
                }
            }
            out.push(shaken);
        }
        out.push(combo);
    }
    out
}

fn project_row(row: &[f64]) -> Option<Vec<f64>> {
    let clipped: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return None;
    }
    Some(clipped.iter().map(|v| v / total).collect())
}

/// Report of the non-revealing upper bound
/// w_theta(x, Q) <= (1 - theta_1) min_{taubar} max_i
/// w_theta+((x - theta_1 G^Q_{i taubar}) / (1 - theta_1), Q).
#[derive(Debug, Clone)]
pub struct NonrevealingReport {
    pub dual_value: f64,
    pub dual_error: f64,
    pub rhs: f64,
    pub rhs_error: f64,
    pub holds: bool,
    pub slack: f64,
    pub equality: bool,
    /// The minimizing type-independent first move; certified optimal when
    /// equality holds within tolerance.
    pub tau_bar: Vec<f64>,
}

pub fn nonrevealing_bound(
    g: &GameSpec,
    x: &[f64],
    cond: &Disintegration,
    theta: &Evaluation,
    cfg: &DualConfig,
) -> Result<NonrevealingReport> {
    if theta.is_single_stage() {
        return Err(SolverError::invariant(
            "nonrevealing bound requires theta_1 < 1",
        ));
    }
    let mut ctx = SolveCtx::new();
    let ones = AuxWeight::ones(g.k_size);
    let state = DualState {
        x: x.to_vec(),
        cond: cond.clone(),
        zeta: ones.clone(),
        theta: theta.clone(),
    };
    let rec = dual_recursive_in(g, &state, cfg, &mut ctx)?;

    let head = theta.head();
    let tail = theta.tail()?;
    let b_child = child_box(g, x, head, 1.0);
    // non-revealing play leaves Q unchanged: one child model for all j
    let (model, model_err) =
        child_value_model(g, cfg, &mut ctx, cond.q_entries(), &ones, &tail, b_child)?;

    let mut best_rhs = f64::INFINITY;
    let mut best_tau = Vec::new();
    let mut best_znorm = 0.0f64;
    for tau_bar in simplex_grid(g.j_size, cfg.tau_grid) {
        let rows: Vec<f64> = (0..g.l_size).flat_map(|_| tau_bar.clone()).collect();
        let stage = StageStrategy::new(
            g.i_size,
            g.j_size,
            vec![1.0 / g.i_size as f64; g.k_size * g.i_size],
            rows,
        )?;
        let payoffs = stage_payoff_vectors(g, cond, &stage);
        let mut worst = f64::NEG_INFINITY;
        let mut znorm = 0.0f64;
        for i in 0..g.i_size {
            let z_i: Vec<f64> = (0..g.k_size)
                .map(|k| (x[k] - head * payoffs.vectors[i][k]) / (1.0 - head))
                .collect();
            znorm = znorm.max(inf_norm(&z_i));
            worst = worst.max(model.eval(&z_i));
        }
        let rhs = (1.0 - head) * worst;
        if rhs < best_rhs {
            best_rhs = rhs;
            best_tau = tau_bar;
            best_znorm = znorm;
        }
    }
    let rhs_error = (1.0 - head) * model_err.conj_at(b_child.max(best_znorm))
        + head * g.payoff_bound * simplex_mesh(g.j_size, cfg.tau_grid);
    let dual_error = rec.error.total();
    let slack = best_rhs - rec.value;
    let holds = rec.value - dual_error <= best_rhs + rhs_error;
    let equality = slack.abs() <= dual_error + rhs_error;
    Ok(NonrevealingReport {
        dual_value: rec.value,
        dual_error,
        rhs: best_rhs,
        rhs_error,
        holds,
        slack,
        equality,
        tau_bar: best_tau,
    })
}

/// The independent-case recursion: with pi = p (x) q the weight never needs
/// to be carried (zeta_j = taubar(j) * zeta); scaling child conjugates by
/// taubar(j) absorbs it, and the splitting constraint gains taubar weights.
pub fn independent_recursive(
    g: &GameSpec,
    x: &[f64],
    q: &[f64],
    theta: &Evaluation,
    cfg: &DualConfig,
) -> Result<DualSolution> {
    if q.len() != g.l_size || !crate::game::is_distribution(q) {
        return Err(SolverError::invariant(
            "independent case requires q in Delta(L)",
        ));
    }
    if theta.is_single_stage() {
        return Err(SolverError::invariant(
            "independent_recursive requires theta_1 < 1",
        ));
    }
    let mut ctx = SolveCtx::new();
    let head = theta.head();
    let tail = theta.tail()?;
    let b_child = child_box(g, x, head, 1.0);
    let nk = g.k_size;
    let ones = AuxWeight::ones(nk);
    let cond_rows: Vec<f64> = (0..nk).flat_map(|_| q.to_vec()).collect();
    let cond = uniform_cond(cond_rows, nk, g.l_size)?;

    let grid = product_strategy_grid(g.l_size, g.j_size, cfg.tau_grid);
    let mut best: Option<Candidate> = None;
    for tau_rows in &grid {
        let cand = evaluate_tau_independent(
            g, cfg, &mut ctx, x, q, &cond, tau_rows, &tail, head, b_child, &ones,
        )?;
        if best.as_ref().map_or(true, |b| cand.value < b.value) {
            best = Some(cand);
        }
    }
    let mut best = best.ok_or_else(|| SolverError::invariant("empty tau grid"))?;
    if cfg.refine {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let step = 0.5 / cfg.tau_grid as f64;
        for tau_rows in refinement_candidates(
            &best.tau,
            g.l_size,
            g.j_size,
            step,
            cfg.jitter,
            &mut rng,
        ) {
            let cand = evaluate_tau_independent(
                g, cfg, &mut ctx, x, q, &cond, &tau_rows, &tail, head, b_child, &ones,
            )?;
            if cand.value < best.value {
                best = cand;
            }
        }
    }
    let tau_term = g.payoff_bound * simplex_mesh(g.j_size, cfg.tau_grid);
    Ok(DualSolution {
        value: best.value,
        l_size: g.l_size,
        j_size: g.j_size,
        tau: best.tau,
        splits: best.splits,
        children: best.children,
        error: ErrorBreakdown {
            conj_mesh: best.conj_err,
            tau_grid: tau_term,
            x_grid: best.x_err,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_tau_independent(
    g: &GameSpec,
    cfg: &DualConfig,
    ctx: &mut SolveCtx,
    x: &[f64],
    q: &[f64],
    cond: &Disintegration,
    tau_rows: &[f64],
    tail: &Evaluation,
    head: f64,
    b_child: f64,
    ones: &AuxWeight,
) -> Result<Candidate> {
    let nk = g.k_size;
    let nj = g.j_size;
    let stage = StageStrategy::new(
        g.i_size,
        nj,
        vec![1.0 / g.i_size as f64; g.k_size * g.i_size],
        tau_rows.to_vec(),
    )?;
    // taubar(j) = sum_l q^l tau^l(j); q_j its conditional given j
    let mut tau_bar = vec![0.0; nj];
    for l in 0..g.l_size {
        let row = &tau_rows[l * nj..(l + 1) * nj];
        for j in 0..nj {
            tau_bar[j] += q[l] * row[j];
        }
    }
    let mut live: Vec<usize> = Vec::new();
    let mut models: Vec<ConvexModel> = Vec::new();
    let mut errs: Vec<ModelErr> = Vec::new();
    let mut children: Vec<ChildState> = vec![ChildState::Dead; nj];
    for j in 0..nj {
        if tau_bar[j] <= 0.0 {
            continue;
        }
        let q_j: Vec<f64> = (0..g.l_size)
            .map(|l| q[l] * tau_rows[l * nj + j] / tau_bar[j])
            .collect();
        let child_rows: Vec<f64> = (0..nk).flat_map(|_| q_j.clone()).collect();
        let (base_model, base_err) =
            child_value_model(g, cfg, ctx, &child_rows, ones, tail, b_child)?;
        // (taubar f)# under u = taubar * x: scale intercepts by taubar
        models.push(base_model.with_scaled_intercepts(tau_bar[j]));
        errs.push(ModelErr {
            conj_fixed: tau_bar[j] * base_err.conj_fixed,
            per_xnorm: base_err.per_xnorm,
            x_grid: tau_bar[j] * base_err.x_grid,
        });
        children[j] = ChildState::Live {
            q_rows: child_rows,
            zeta: ones.clone(),
        };
        live.push(j);
    }
    if live.is_empty() {
        return Err(SolverError::invariant("tau has no live column"));
    }
    let payoffs = stage_payoff_vectors(g, cond, &stage);
    let model_refs: Vec<&ConvexModel> = models.iter().collect();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_conj = 0.0f64;
    let mut splits: Vec<Vec<Vec<f64>>> = Vec::with_capacity(g.i_size);
    for i in 0..g.i_size {
        let z_i: Vec<f64> = (0..nk)
            .map(|k| (x[k] - head * payoffs.vectors[i][k]) / (1.0 - head))
            .collect();
        let (val, split_u) = inf_convolution(&model_refs, &z_i)?;
        let mut conj_i = 0.0;
        let mut split_i: Vec<Vec<f64>> = vec![vec![0.0; nk]; nj];
        for (pos, &j) in live.iter().enumerate() {
            conj_i += errs[pos].conj_at(b_child.max(inf_norm(&split_u[pos])));
            // report the corollary's variables x_ij = u_ij / taubar(j)
            split_i[j] = split_u[pos].iter().map(|v| v / tau_bar[j]).collect();
        }
        if val > worst {
            worst = val;
        }
        worst_conj = worst_conj.max(conj_i);
        splits.push(split_i);
    }
    let x_err: f64 = errs.iter().map(|e| e.x_grid).sum();
    Ok(Candidate {
        value: (1.0 - head) * worst,
        tau: tau_rows.to_vec(),
        splits,
        children,
        conj_err: (1.0 - head) * worst_conj,
        x_err: (1.0 - head) * x_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::dual_value_direct;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn quick_cfg() -> DualConfig {
        DualConfig {
            p_grid: Some(8),
            tau_grid: 4,
            refine: false,
            ..Default::default()
        }
    }

    fn random_simplex(rng: &mut StdRng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| -(rng.gen::<f64>().max(1e-12)).ln()).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|v| v / total).collect()
    }

    fn random_game(rng: &mut StdRng, nk: usize, nl: usize, ni: usize, nj: usize) -> GameSpec {
        let payoff = (0..nk * nl * ni * nj)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        GameSpec::new(nk, nl, ni, nj, payoff).unwrap()
    }

    fn random_cond(rng: &mut StdRng, nk: usize, nl: usize) -> Vec<f64> {
        (0..nk).flat_map(|_| random_simplex(rng, nl)).collect()
    }

    fn state(
        x: Vec<f64>,
        q_rows: Vec<f64>,
        l_size: usize,
        zeta: Vec<f64>,
        theta: Vec<f64>,
    ) -> DualState {
        DualState::new(
            x,
            q_rows,
            l_size,
            AuxWeight::new(zeta).unwrap(),
            Evaluation::new(theta).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn base_zero_game_is_conjugate_of_zero() {
        let g = GameSpec::new(2, 2, 2, 2, vec![0.0; 16]).unwrap();
        let mut ctx = SolveCtx::new();
        let s = state(
            vec![0.4, -0.2],
            vec![0.5; 4],
            2,
            vec![1.0, 1.0],
            vec![1.0],
        );
        let sol = dual_base(&g, &s, &quick_cfg(), &mut ctx).unwrap();
        assert!((sol.value - 0.2).abs() < 1e-9, "-min x = 0.2, got {}", sol.value);
    }

    #[test]
    fn base_translation_shift() {
        let mut rng = StdRng::seed_from_u64(1);
        let g = random_game(&mut rng, 2, 2, 2, 2);
        let q = random_cond(&mut rng, 2, 2);
        let cfg = quick_cfg();
        let mut ctx = SolveCtx::new();
        let s0 = state(vec![0.1, -0.3], q.clone(), 2, vec![1.0, 1.0], vec![1.0]);
        let v0 = dual_base(&g, &s0, &cfg, &mut ctx).unwrap().value;
        let c = 0.53;
        let s1 = state(vec![0.1 + c, -0.3 + c], q, 2, vec![1.0, 1.0], vec![1.0]);
        let v1 = dual_base(&g, &s1, &cfg, &mut ctx).unwrap().value;
        assert!((v1 - (v0 - c)).abs() < 1e-12);
    }

    #[test]
    fn base_value_sandwiched_by_exact_lp() {
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..5 {
            let g = random_game(&mut rng, 2, 2, 2, 2);
            let q = random_cond(&mut rng, 2, 2);
            let x = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let cfg = quick_cfg();
            let mut ctx = SolveCtx::new();
            let s = state(x.clone(), q.clone(), 2, vec![1.0, 1.0], vec![1.0]);
            let sol = dual_base(&g, &s, &cfg, &mut ctx).unwrap();
            let cond = uniform_cond(q, 2, 2).unwrap();
            let (_, exact) = one_stage_dual_tau(&g, &x, &cond, &AuxWeight::ones(2)).unwrap();
            assert!(
                sol.value <= exact + 1e-7,
                "sampled conjugate above the exact dual: {} vs {exact}",
                sol.value
            );
            assert!(
                exact - sol.value <= sol.error.total() + 1e-7,
                "exact dual outside the certificate: {} vs {exact} (err {})",
                sol.value,
                sol.error.total()
            );
        }
    }

    #[test]
    fn recursive_constant_payoffs_have_no_information_value() {
        // G^{kl} = A for all types: w(x) = val(A) - min_k x^k
        let a = [0.3, -0.5, -0.1, 0.6];
        let mut payoff = Vec::new();
        for _ in 0..4 {
            payoff.extend_from_slice(&a);
        }
        let g = GameSpec::new(2, 2, 2, 2, payoff).unwrap();
        // val(A): row player maximizes; solve tiny LP by hand: value of
        // [[0.3,-0.5],[-0.1,0.6]] = (0.3*0.6 - 0.5*0.1)/(0.3+0.6+0.5+0.1) = 0.0867
        let val_a = (0.3f64 * 0.6 - (-0.5) * (-0.1)) / (0.3 + 0.6 + 0.5 + 0.1);
        let mut rng = StdRng::seed_from_u64(3);
        let q = random_cond(&mut rng, 2, 2);
        let x = vec![0.2, -0.4];
        let s = state(x, q, 2, vec![1.0, 1.0], vec![0.5, 0.5]);
        let sol = dual_recursive(&g, &s, &quick_cfg()).unwrap();
        let expect = val_a + 0.4;
        assert!(
            (sol.value - expect).abs() <= sol.error.total() + 1e-9,
            "constant game: {} vs {expect} (err {})",
            sol.value,
            sol.error.total()
        );
    }

    #[test]
    fn recursive_matches_direct_one_sided() {
        let mut rng = StdRng::seed_from_u64(4);
        let g = random_game(&mut rng, 2, 1, 2, 2);
        let q = vec![1.0, 1.0];
        let x = vec![0.3, -0.1];
        let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
        let cfg = quick_cfg();
        let s = state(x.clone(), q.clone(), 1, vec![1.0, 1.0], vec![0.5, 0.5]);
        let sol = dual_recursive(&g, &s, &cfg).unwrap();
        let cond = uniform_cond(q, 2, 1).unwrap();
        let direct = dual_value_direct(
            &g,
            &x,
            &cond,
            &AuxWeight::ones(2),
            &theta,
            cfg.p_resolution(2),
            &cfg.oracle,
        )
        .unwrap();
        assert!(
            (sol.value - direct.value).abs() <= sol.error.total() + direct.error_bound,
            "one-sided: recursive {} vs direct {} (errs {} + {})",
            sol.value,
            direct.value,
            sol.error.total(),
            direct.error_bound
        );
    }

    #[test]
    fn recursive_matches_direct_dependent() {
        let mut rng = StdRng::seed_from_u64(5);
        let g = random_game(&mut rng, 2, 2, 2, 2);
        let q = random_cond(&mut rng, 2, 2);
        let x = vec![-0.2, 0.4];
        let theta = Evaluation::new(vec![0.4, 0.6]).unwrap();
        let cfg = quick_cfg();
        let s = state(x.clone(), q.clone(), 2, vec![1.0, 1.0], vec![0.4, 0.6]);
        let sol = dual_recursive(&g, &s, &cfg).unwrap();
        let cond = uniform_cond(q, 2, 2).unwrap();
        let direct = dual_value_direct(
            &g,
            &x,
            &cond,
            &AuxWeight::ones(2),
            &theta,
            cfg.p_resolution(2),
            &cfg.oracle,
        )
        .unwrap();
        assert!(
            (sol.value - direct.value).abs() <= sol.error.total() + direct.error_bound,
            "dependent: recursive {} vs direct {} (errs {} + {})",
            sol.value,
            direct.value,
            sol.error.total(),
            direct.error_bound
        );
    }

    #[test]
    fn recursive_translation_property() {
        let mut rng = StdRng::seed_from_u64(6);
        let g = random_game(&mut rng, 2, 2, 2, 2);
        let q = random_cond(&mut rng, 2, 2);
        let cfg = quick_cfg();
        let s0 = state(vec![0.1, -0.2], q.clone(), 2, vec![1.0, 1.0], vec![0.5, 0.5]);
        let v0 = dual_recursive(&g, &s0, &cfg).unwrap().value;
        let c = -0.7;
        let s1 = state(vec![0.1 + c, -0.2 + c], q, 2, vec![1.0, 1.0], vec![0.5, 0.5]);
        let v1 = dual_recursive(&g, &s1, &cfg).unwrap().value;
        assert!((v1 - (v0 - c)).abs() < 1e-8, "{v1} vs {}", v0 - c);
    }

    #[test]
    fn recursive_zeta_scaling() {
        let mut rng = StdRng::seed_from_u64(7);
        let g = random_game(&mut rng, 2, 2, 2, 2);
        let q = random_cond(&mut rng, 2, 2);
        let cfg = quick_cfg();
        let alpha = 1.7;
        let x = vec![0.25, -0.15];
        let s_scaled = state(
            x.clone(),
            q.clone(),
            2,
            vec![alpha, alpha],
            vec![0.5, 0.5],
        );
        let v_scaled = dual_recursive(&g, &s_scaled, &cfg).unwrap();
        let s_base = state(
            x.iter().map(|v| v / alpha).collect(),
            q,
            2,
            vec![1.0, 1.0],
            vec![0.5, 0.5],
        );
        let v_base = dual_recursive(&g, &s_base, &cfg).unwrap();
        let tol = v_scaled.error.total() + alpha * v_base.error.total() + 1e-9;
        assert!(
            (v_scaled.value - alpha * v_base.value).abs() <= tol,
            "scaling: {} vs {}",
            v_scaled.value,
            alpha * v_base.value
        );
    }

    #[test]
    fn recursive_weak_duality_against_oracle() {
        let mut rng = StdRng::seed_from_u64(8);
        let g = random_game(&mut rng, 2, 2, 2, 2);
        let q = random_cond(&mut rng, 2, 2);
        let x = vec![0.2, -0.3];
        let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
        let cfg = quick_cfg();
        let s = state(x.clone(), q.clone(), 2, vec![1.0, 1.0], vec![0.5, 0.5]);
        let sol = dual_recursive(&g, &s, &cfg).unwrap();
        let cond = uniform_cond(q, 2, 2).unwrap();
        for p in simplex_grid(2, 8) {
            let belief = cond.with_marginal(p.clone()).compose();
            let v = primal_value(
                &g,
                &belief,
                &theta,
                &AuxWeight::ones(2),
                &cfg.oracle,
            )
            .unwrap()
            .value;
            let pairing: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!(
                sol.value >= v - pairing - sol.error.total() - 1e-9,
                "conjugate inequality failed at p = {p:?}"
            );
        }
    }

    #[test]
    fn recursive_monotone_refinement() {
        let mut rng = StdRng::seed_from_u64(9);
        let g = random_game(&mut rng, 2, 2, 2, 2);
        let q = random_cond(&mut rng, 2, 2);
        let cfg = quick_cfg();
        let s = state(vec![0.0, 0.1], q, 2, vec![1.0, 1.0], vec![0.5, 0.5]);
        let coarse = dual_recursive(&g, &s, &cfg).unwrap();
        let fine = dual_recursive(&g, &s, &cfg.doubled()).unwrap();
        assert!(
            fine.value <= coarse.value + coarse.error.total(),
            "refinement increased the value beyond the previous bound"
        );
        assert!(fine.error.total() < coarse.error.total());
    }

    #[test]
    fn split_constraint_feasibility() {
        let mut rng = StdRng::seed_from_u64(10);
        let g = random_game(&mut rng, 2, 2, 2, 2);
        let q = random_cond(&mut rng, 2, 2);
        let x = vec![0.3, -0.2];
        let s = state(x.clone(), q.clone(), 2, vec![1.0, 1.0], vec![0.3, 0.7]);
        let sol = dual_recursive(&g, &s, &quick_cfg()).unwrap();
        // recompute the target from the returned tau
        let stage = StageStrategy::new(2, 2, vec![0.5; 4], sol.tau.clone()).unwrap();
        let cond = uniform_cond(q, 2, 2).unwrap();
        let payoffs = stage_payoff_vectors(&g, &cond, &stage);
        for i in 0..2 {
            for k in 0..2 {
                let z = (x[k] - 0.3 * payoffs.vectors[i][k]) / 0.7;
                let total: f64 = (0..2).map(|j| sol.splits[i][j][k]).sum();
                assert!((total - z).abs() < 1e-9, "split constraint violated");
            }
        }
    }

    #[test]
    fn nonrevealing_equality_for_type_independent_payoffs() {
        let a = [0.5, -0.4, -0.3, 0.2];
        let mut payoff = Vec::new();
        for _ in 0..4 {
            payoff.extend_from_slice(&a);
        }
        let g = GameSpec::new(2, 2, 2, 2, payoff).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let q = random_cond(&mut rng, 2, 2);
        let cond = uniform_cond(q, 2, 2).unwrap();
        let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
        let report =
            nonrevealing_bound(&g, &[0.1, -0.1], &cond, &theta, &quick_cfg()).unwrap();
        assert!(report.holds);
        assert!(report.equality, "report: {report:?}");
    }

    #[test]
    fn nonrevealing_holds_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..3 {
            let g = random_game(&mut rng, 2, 2, 2, 2);
            let q = random_cond(&mut rng, 2, 2);
            let cond = uniform_cond(q, 2, 2).unwrap();
            let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
            let x = vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let report = nonrevealing_bound(&g, &x, &cond, &theta, &quick_cfg()).unwrap();
            assert!(report.holds, "bound failed: {report:?}");
        }
    }

    #[test]
    fn nonrevealing_single_column_is_tight() {
        let mut rng = StdRng::seed_from_u64(13);
        let g = random_game(&mut rng, 2, 2, 2, 1);
        let q = random_cond(&mut rng, 2, 2);
        let cond = uniform_cond(q, 2, 2).unwrap();
        let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
        let report =
            nonrevealing_bound(&g, &[0.0, 0.0], &cond, &theta, &quick_cfg()).unwrap();
        assert!(report.holds);
        assert!(report.equality, "unique tau must be tight: {report:?}");
    }

    #[test]
    fn independent_constant_payoffs() {
        let a = [0.3, -0.5, -0.1, 0.6];
        let mut payoff = Vec::new();
        for _ in 0..4 {
            payoff.extend_from_slice(&a);
        }
        let g = GameSpec::new(2, 2, 2, 2, payoff).unwrap();
        let val_a = (0.3f64 * 0.6 - (-0.5) * (-0.1)) / (0.3 + 0.6 + 0.5 + 0.1);
        let x = vec![0.2, -0.4];
        let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
        let sol = independent_recursive(&g, &x, &[0.3, 0.7], &theta, &quick_cfg()).unwrap();
        let expect = val_a + 0.4;
        assert!(
            (sol.value - expect).abs() <= sol.error.total() + 1e-9,
            "independent constant game: {} vs {expect}",
            sol.value
        );
    }

    #[test]
    fn independent_matches_general_recursion() {
        let mut rng = StdRng::seed_from_u64(14);
        for _ in 0..2 {
            let g = random_game(&mut rng, 2, 2, 2, 2);
            let qm = random_simplex(&mut rng, 2);
            let x = vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
            let cfg = quick_cfg();
            let ind = independent_recursive(&g, &x, &qm, &theta, &cfg).unwrap();
            let rows: Vec<f64> = (0..2).flat_map(|_| qm.clone()).collect();
            let s = state(x, rows, 2, vec![1.0, 1.0], vec![0.5, 0.5]);
            let gen = dual_recursive(&g, &s, &cfg).unwrap();
            assert!(
                (ind.value - gen.value).abs() <= ind.error.total() + gen.error.total(),
                "independent {} vs general {}",
                ind.value,
                gen.value
            );
        }
    }

    #[test]
    fn independent_duplicate_column_changes_nothing() {
        let mut rng = StdRng::seed_from_u64(15);
        // J = 2 game, then the same game with column 1 duplicated as column 2
        let base: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g2 = GameSpec::new(2, 2, 2, 2, base.clone()).unwrap();
        let mut padded = Vec::new();
        for cell in base.chunks(2) {
            padded.extend_from_slice(cell);
            padded.push(cell[1]);
        }
        let g3 = GameSpec::new(2, 2, 2, 3, padded).unwrap();
        let qm = random_simplex(&mut rng, 2);
        let x = vec![0.1, -0.1];
        let theta = Evaluation::new(vec![0.5, 0.5]).unwrap();
        let cfg = quick_cfg();
        let v2 = independent_recursive(&g2, &x, &qm, &theta, &cfg).unwrap();
        let v3 = independent_recursive(&g3, &x, &qm, &theta, &cfg).unwrap();
        assert!(
            (v2.value - v3.value).abs() <= v2.error.total() + v3.error.total(),
            "duplicated column moved the value: {} vs {}",
            v2.value,
            v3.value
        );
    }

    #[test]
    fn three_stage_recursion_runs_and_matches_direct() {
        let mut rng = StdRng::seed_from_u64(16);
        let g = random_game(&mut rng, 2, 1, 2, 2);
        let q = vec![1.0, 1.0];
        let x = vec![0.1, -0.1];
        let theta = Evaluation::new(vec![0.4, 0.3, 0.3]).unwrap();
        let cfg = DualConfig {
            p_grid: Some(6),
            tau_grid: 3,
            x_samples: 7,
            refine: false,
            ..Default::default()
        };
        let s = state(x.clone(), q.clone(), 1, vec![1.0, 1.0], vec![0.4, 0.3, 0.3]);
        let sol = dual_recursive(&g, &s, &cfg).unwrap();
        let cond = uniform_cond(q, 2, 1).unwrap();
        let direct = dual_value_direct(
            &g,
            &x,
            &cond,
            &AuxWeight::ones(2),
            &theta,
            6,
            &cfg.oracle,
        )
        .unwrap();
        assert!(
            (sol.value - direct.value).abs() <= sol.error.total() + direct.error_bound,
            "3-stage: recursive {} vs direct {} (err {})",
            sol.value,
            direct.value,
            sol.error.total()
        );
    }
}
