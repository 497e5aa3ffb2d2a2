use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::neighborhood::{apply_move, broken_pairs, formed_pairs, neighborhood};
use super::routes::{RouteContext, RouteSolution};
use crate::dynamics::JointPlan;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gls,
    Ts,
    Sa,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Gls => "gls",
            Method::Ts => "ts",
            Method::Sa => "sa",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gls" => Ok(Method::Gls),
            "ts" => Ok(Method::Ts),
            "sa" => Ok(Method::Sa),
            other => Err(Error::Config(format!("unknown metaheuristic {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaParams {
    pub max_iters: usize,
    pub seed: u64,
    /// GLS penalty weight as a multiple of the mean leg time of the initial solution.
    pub lambda_factor: f64,
    pub tenure: usize,
    /// SA start temperature as a multiple of the initial makespan.
    pub t0_factor: f64,
    pub alpha: f64,
    pub iters_per_temp: usize,
}

impl Default for MetaParams {
    fn default() -> Self {
        Self { max_iters: 2000, seed: 0, lambda_factor: 0.1, tenure: 10, t0_factor: 0.2, alpha: 0.95, iters_per_temp: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaResult {
    pub solution: RouteSolution,
    pub plan: JointPlan,
    pub initial_makespan_s: f64,
    /// `(iteration, incumbent makespan)` after every iteration, starting with iteration 0.
    pub log: Vec<(usize, f64)>,
}

impl MetaResult {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iter,incumbent_s\n");
        for (i, c) in &self.log {
            out.push_str(&format!("{i},{c}\n"));
        }
        out
    }
}

/// Metropolis rule: always accept improvements, accept a worsening `delta` with probability
/// `exp(-delta / temperature)`.
pub fn metropolis_accept<R: Rng>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    delta <= 0.0 || (temperature > 0.0 && rng.gen::<f64>() < (-delta / temperature).exp())
}

/// Cost cache keyed by task routes; every miss repairs and re-runs the executor.
struct Evaluator<'c, 'a> {
    ctx: &'c RouteContext<'a>,
    cache: HashMap<Vec<Vec<usize>>, Option<RouteSolution>>,
}

impl<'c, 'a> Evaluator<'c, 'a> {
    fn new(ctx: &'c RouteContext<'a>) -> Self {
        Self { ctx, cache: HashMap::new() }
    }

    fn eval(&mut self, tasks: &[Vec<usize>]) -> Option<RouteSolution> {
        if let Some(hit) = self.cache.get(tasks) {
            return hit.clone();
        }
        let sol = self.ctx.solve_routes(tasks).ok();
        self.cache.insert(tasks.to_vec(), sol.clone());
        sol
    }
}

struct Incumbent {
    best: RouteSolution,
    log: Vec<(usize, f64)>,
}

impl Incumbent {
    fn offer(&mut self, sol: &RouteSolution) {
        if sol.makespan_s < self.best.makespan_s {
            self.best = sol.clone();
        }
    }

    fn tick(&mut self, iter: usize) {
        self.log.push((iter, self.best.makespan_s));
    }
}

pub fn solve(scenario: &Scenario, method: Method, params: &MetaParams) -> Result<MetaResult> {
    let ctx = RouteContext::new(scenario)?;
    let initial = ctx.initial_solution()?;
    let mut inc = Incumbent { best: initial.clone(), log: vec![(0, initial.makespan_s)] };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut eval = Evaluator::new(&ctx);
    match method {
        Method::Gls => gls(&ctx, &mut eval, &initial, params, &mut rng, &mut inc),
        Method::Ts => tabu(&mut eval, &initial, params, &mut rng, &mut inc),
        Method::Sa => anneal(&mut eval, &initial, params, &mut rng, &mut inc),
    }
    let plan = ctx.plan(&inc.best)?;
    Ok(MetaResult { solution: inc.best, plan, initial_makespan_s: initial.makespan_s, log: inc.log })
}

pub fn gls_solve(scenario: &Scenario, params: &MetaParams) -> Result<MetaResult> {
    solve(scenario, Method::Gls, params)
}

pub fn ts_solve(scenario: &Scenario, params: &MetaParams) -> Result<MetaResult> {
    solve(scenario, Method::Ts, params)
}

pub fn sa_solve(scenario: &Scenario, params: &MetaParams) -> Result<MetaResult> {
    solve(scenario, Method::Sa, params)
}

/// A GLS feature: `uav` flies from `prev` (the depot when `None`) straight to `task`.
pub type Feature = (usize, Option<usize>, usize);

pub fn features(routes: &[Vec<usize>]) -> Vec<Feature> {
    let mut out = Vec::new();
    for (uav, r) in routes.iter().enumerate() {
        let mut prev = None;
        for &m in r {
            out.push((uav, prev, m));
            prev = Some(m);
        }
    }
    out
}

/// Penalty counters for guided local search.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlsPenalties {
    pub lambda: f64,
    pub counts: HashMap<Feature, u32>,
}

impl GlsPenalties {
    pub fn augmented(&self, routes: &[Vec<usize>], cost: f64) -> f64 {
        cost + self.lambda * features(routes).iter().map(|f| self.counts.get(f).copied().unwrap_or(0) as f64).sum::<f64>()
    }

    /// Penalizes the used feature with the highest `leg_time / (1 + penalty)`.
    pub fn penalize(&mut self, routes: &[Vec<usize>], leg_time: impl Fn(&Feature) -> f64) {
        let best = features(routes).into_iter().max_by(|a, b| {
            let ua = leg_time(a) / (1.0 + self.counts.get(a).copied().unwrap_or(0) as f64);
            let ub = leg_time(b) / (1.0 + self.counts.get(b).copied().unwrap_or(0) as f64);
            ua.total_cmp(&ub).then(b.cmp(a))
        });
        if let Some(f) = best {
            *self.counts.entry(f).or_insert(0) += 1;
        }
    }
}

fn leg_time(scenario: &Scenario, speed: f64, f: &Feature) -> f64 {
    let from = f.1.map(|p| scenario.tasks[p].position).unwrap_or(scenario.depot);
    from.dist(&scenario.tasks[f.2].position) / speed
}

fn gls(
    ctx: &RouteContext<'_>,
    eval: &mut Evaluator<'_, '_>,
    initial: &RouteSolution,
    params: &MetaParams,
    rng: &mut ChaCha8Rng,
    inc: &mut Incumbent,
) {
    let sc = ctx.scenario();
    let speed = ctx.dynamics.uav_speed;
    let mut current = initial.task_routes();
    let mut current_cost = initial.makespan_s;
    let legs = features(&current);
    let mean_leg = legs.iter().map(|f| leg_time(sc, speed, f)).sum::<f64>() / legs.len().max(1) as f64;
    let mut pen = GlsPenalties { lambda: params.lambda_factor * mean_leg, counts: HashMap::new() };
    for iter in 1..=params.max_iters {
        let mut moves = neighborhood(&current);
        moves.shuffle(rng);
        let here = pen.augmented(&current, current_cost);
        let mut best: Option<(f64, Vec<Vec<usize>>, f64)> = None;
        for mv in moves {
            let cand = apply_move(&current, mv);
            let Some(sol) = eval.eval(&cand) else { continue };
            inc.offer(&sol);
            let aug = pen.augmented(&cand, sol.makespan_s);
            if best.as_ref().is_none_or(|b| aug < b.0) {
                best = Some((aug, cand, sol.makespan_s));
            }
        }
        match best {
            Some((aug, cand, cost)) if aug < here - 1e-9 => {
                current = cand;
                current_cost = cost;
            }
            _ => pen.penalize(&current, |f| leg_time(sc, speed, f)),
        }
        inc.tick(iter);
    }
}

fn tabu(eval: &mut Evaluator<'_, '_>, initial: &RouteSolution, params: &MetaParams, rng: &mut ChaCha8Rng, inc: &mut Incumbent) {
    let mut current = initial.task_routes();
    let mut memory: VecDeque<Vec<(usize, usize)>> = VecDeque::with_capacity(params.tenure + 1);
    for iter in 1..=params.max_iters {
        let mut moves = neighborhood(&current);
        moves.shuffle(rng);
        let mut best: Option<(f64, Vec<Vec<usize>>, Vec<(usize, usize)>)> = None;
        for mv in moves {
            let cand = apply_move(&current, mv);
            let Some(sol) = eval.eval(&cand) else { continue };
            let tabu = formed_pairs(&current, mv).iter().any(|p| memory.iter().any(|m| m.contains(p)));
            if tabu && sol.makespan_s >= inc.best.makespan_s {
                continue;
            }
            if best.as_ref().is_none_or(|b| sol.makespan_s < b.0) {
                best = Some((sol.makespan_s, cand, broken_pairs(&current, mv)));
            }
            inc.offer(&sol);
        }
        if let Some((_, cand, broken)) = best {
            current = cand;
            if params.tenure > 0 {
                memory.push_back(broken);
                while memory.len() > params.tenure {
                    memory.pop_front();
                }
            }
        }
        inc.tick(iter);
    }
}

fn anneal(eval: &mut Evaluator<'_, '_>, initial: &RouteSolution, params: &MetaParams, rng: &mut ChaCha8Rng, inc: &mut Incumbent) {
    let mut current = initial.task_routes();
    let mut cost = initial.makespan_s;
    let mut temperature = params.t0_factor * initial.makespan_s;
    for iter in 1..=params.max_iters {
        let moves = neighborhood(&current);
        if let Some(&mv) = moves.choose(rng) {
            let cand = apply_move(&current, mv);
            if let Some(sol) = eval.eval(&cand) {
                inc.offer(&sol);
                if metropolis_accept(sol.makespan_s - cost, temperature, rng) {
                    current = cand;
                    cost = sol.makespan_s;
                }
            }
        }
        if params.iters_per_temp > 0 && iter % params.iters_per_temp == 0 {
            temperature *= params.alpha;
        }
        inc.tick(iter);
    }
}
