//! Executes one configured experiment for one seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use grl_core::agents::{shared, Mode};
use grl_core::envs::make_env;
use grl_core::metrics::{intelligence, realized_value, regret, RegretMode};
use grl_core::multiagent::{best_response_gaps, joint_step, JointTrace, MultiEnvRef};
use grl_core::planner::{optimal_value, policy_value};
use grl_core::prediction::{
    iid_kl_trajectory, ledger, regret_bound, sample_sequence, PredictorRef, PredictorSpec,
};
use grl_core::rng::{RNG_NAME, RNG_VERSION};
use grl_core::{
    Agent, AgentSpec, BeliefState, DiscountSchedule, EnvRef, GrlError, History, PlanQuery,
    PolicyRef, RngStream, StepOutcome,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{dedupe, Config, Kind};
use crate::error::RunError;
use crate::output::{num, opt, Record, Table, SCHEMA_VERSION};
use crate::values;

/// Longest sequence for which the exact KL column is computed (the cost is quadratic).
pub const KL_TRAJECTORY_CAP: usize = 5000;

/// The outcome of one seed: files to write, sweep scalars and the error that stopped it, if any.
#[derive(Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub record: Record,
    pub scalars: BTreeMap<String, f64>,
    pub error: Option<RunError>,
}

impl SeedRun {
    pub fn stem(&self, cfg: &Config) -> String {
        format!("{}_seed{}", cfg.experiment.name, self.seed)
    }
}

struct Ctx<'a> {
    cfg: &'a Config,
    sched: DiscountSchedule,
    cap: usize,
    root: RngStream,
}

impl Ctx<'_> {
    /// Lookahead m − t for gaps at time t.
    fn gap_depth(&self, t: usize) -> Result<usize, RunError> {
        if let Some(d) = self.cfg.experiment.gap_depth {
            return Ok(d);
        }
        Ok(self.sched.effective_horizon(t, self.cfg.experiment.eps)?.steps.clamp(1, self.cap))
    }

    fn checkpoint_every(&self) -> usize {
        let e = &self.cfg.experiment;
        e.checkpoint_every.unwrap_or((e.steps / 10).max(1))
    }
}

fn config_err(context: &str) -> impl Fn(GrlError) -> RunError + '_ {
    move |e| RunError::Config(format!("{context}: {e}"))
}

/// Runs every seed (in parallel) and writes the records into `out`.
pub fn run(cfg: &Config, out: &Path) -> Result<Vec<(SeedRun, Vec<PathBuf>)>, RunError> {
    let runs: Vec<SeedRun> = cfg
        .experiment
        .seeds
        .resolve()
        .into_par_iter()
        .map(|s| run_seed(cfg, s))
        .collect();
    let mut written = Vec::new();
    for r in runs {
        if let Some(RunError::Config(_)) = &r.error {
            return Err(r.error.expect("checked"));
        }
        let paths = r.record.write(out, &r.stem(cfg))?;
        written.push((r, paths));
    }
    Ok(written)
}

pub fn run_seed(cfg: &Config, seed: u64) -> SeedRun {
    let mut record = Record::default();
    let mut scalars = BTreeMap::new();
    let result = (|| {
        let ctx = Ctx {
            cfg,
            sched: cfg.schedule()?,
            cap: cfg.depth_cap(),
            root: RngStream::from_seed(seed),
        };
        let h = ctx.sched.effective_horizon(1, cfg.experiment.eps)?;
        scalars.insert("effective_horizon".into(), h.steps as f64);
        record.summary.insert("effective_horizon".into(), json!(h.steps));
        match cfg.experiment.kind {
            Kind::SingleAgent => single_agent(&ctx, &mut record, &mut scalars),
            Kind::Prediction => prediction(&ctx, &mut record, &mut scalars),
            Kind::Multiagent => multiagent(&ctx, &mut record, &mut scalars),
            Kind::Values => values_kind(&ctx, &mut record, &mut scalars),
        }
    })();
    let mut head = Map::new();
    head.insert("schema_version".into(), json!(SCHEMA_VERSION));
    head.insert("experiment".into(), json!(cfg.experiment.name));
    head.insert("kind".into(), json!(cfg.experiment.kind));
    head.insert("seed".into(), json!(seed));
    head.insert("config_hash".into(), json!(cfg.hash()));
    head.insert("rng".into(), json!({ "name": RNG_NAME, "version": RNG_VERSION }));
    head.insert("depth_cap".into(), json!(cfg.depth_cap()));
    let error = result.err();
    match &error {
        None => head.insert("status".into(), json!("ok")),
        Some(e) => {
            head.insert("status".into(), json!("error"));
            head.insert("error".into(), json!({ "kind": e.tag(), "message": e.to_string() }))
        }
    };
    head.append(&mut record.summary);
    record.summary = head;
    SeedRun {
        seed,
        record,
        scalars,
        error,
    }
}

fn mode_label(m: &Mode) -> &'static str {
    match m {
        Mode::Exploit => "exploit",
        Mode::Committed { .. } => "committed",
        Mode::Explore { .. } => "explore",
        Mode::Fixed => "fixed",
    }
}

fn agent_names(specs: &[AgentSpec]) -> Vec<String> {
    let mut names: Vec<String> = specs.iter().map(|s| s.label().to_string()).collect();
    dedupe(&mut names);
    names
}

fn posterior_json(b: &BeliefState) -> Value {
    let m: Map<String, Value> = b
        .names()
        .iter()
        .zip(b.posterior())
        .map(|(n, w)| (n.clone(), json!(w)))
        .collect();
    Value::Object(m)
}

/// Undiscounted optimal expected reward over steps 1..=n.
fn best_reward(mu: &EnvRef, n: usize, cap: usize) -> Result<f64, RunError> {
    let sched = DiscountSchedule::finite_horizon(n + 1)?;
    let q = PlanQuery::new(mu, &History::new(), n + 1, &sched)
        .undiscounted()
        .with_depth_cap(cap);
    Ok(optimal_value(&q)?.value)
}

fn single_agent(
    ctx: &Ctx,
    record: &mut Record,
    scalars: &mut BTreeMap<String, f64>,
) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let belief = cfg.belief(&ctx.sched)?;
    let mu = make_env(&cfg.true_env_spec()?, &ctx.sched).map_err(config_err("environment"))?;
    let names = agent_names(&cfg.agents);
    let mut blocks = Vec::new();
    let mut failure = None;
    for (spec, name) in cfg.agents.iter().zip(&names) {
        let agent = spec
            .build(
                belief.clone(),
                mu.actions(),
                &ctx.sched,
                ctx.root.split(&format!("agent/{name}")),
            )
            .map_err(config_err(&format!("agent `{name}`")))?;
        let mut block = Map::new();
        block.insert("name".into(), json!(name));
        block.insert("kind".into(), json!(spec.label()));
        let res = one_agent(ctx, &mu, agent, spec, name, record, &mut block, scalars);
        blocks.push(Value::Object(block));
        if let Err(e) = res {
            failure = Some(e);
            break;
        }
    }
    record.summary.insert("environment".into(), json!(mu.name()));
    record.summary.insert("agents".into(), Value::Array(blocks));
    failure.map_or(Ok(()), Err)
}

#[allow(clippy::too_many_arguments)]
fn one_agent(
    ctx: &Ctx,
    mu: &EnvRef,
    mut agent: Box<dyn Agent>,
    spec: &AgentSpec,
    name: &str,
    record: &mut Record,
    block: &mut Map<String, Value>,
    scalars: &mut BTreeMap<String, f64>,
) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let steps = cfg.experiment.steps;
    let fresh = agent.clone_box();
    let member_names: Vec<String> = agent.belief().map(|b| b.names().to_vec()).unwrap_or_default();
    let mut header: Vec<String> = ["t", "action", "percept", "reward", "mode", "eps_t"]
        .map(String::from)
        .to_vec();
    header.extend(member_names.iter().map(|n| format!("posterior_{n}")));
    let mut table = Table::new(header);
    let mut cp_table = Table::new(
        ["t", "regret_cum", "value_opt", "value_agent", "gap", "upsilon", "truncation"]
            .map(String::from)
            .to_vec(),
    );
    let mut env_rng = ctx.root.split("env");
    let mut ep = grl_core::EpisodeState::new(mu.clone());
    let mut halted_at = None;
    let mut cum_rewards = Vec::with_capacity(steps);
    let mut explored = vec![false; mu.actions().len()];
    let (mut explore_steps, mut boundaries) = (0usize, 0usize);

    let result = (|| -> Result<(), RunError> {
        for t in 1..=steps {
            let a = agent.act()?;
            explored[a.0] = true;
            let (mode, eps_t) = match agent.decision() {
                Some(d) => {
                    explore_steps += matches!(d.mode, Mode::Explore { .. }) as usize;
                    boundaries += d.boundary as usize;
                    (mode_label(&d.mode), num(d.eps_t))
                }
                None => ("fixed", String::new()),
            };
            match ep.sample_step(a, &mut env_rng)? {
                StepOutcome::Halt => {
                    halted_at = Some(t);
                    break;
                }
                StepOutcome::Percept(e) => {
                    agent.observe(a, e)?;
                    cum_rewards.push(ep.total_reward());
                    let mut row = vec![
                        t.to_string(),
                        mu.actions().name(a).to_string(),
                        mu.percepts().get(e).label.clone(),
                        num(mu.percepts().reward(e)),
                        mode.to_string(),
                        eps_t,
                    ];
                    if let Some(b) = agent.belief() {
                        row.extend(b.posterior().iter().map(|&w| num(w)));
                    }
                    table.push(row);
                }
            }
        }

        let upsilon = match (cfg.experiment.upsilon_horizon, fresh.belief()) {
            (Some(m), Some(b)) => {
                let u = intelligence(b, fresh.snapshot().as_ref(), m, &ctx.sched, ctx.cap)?;
                block.insert("upsilon".into(), json!({ "m": m, "value": u }));
                scalars.insert(format!("upsilon_{name}"), u);
                Some(u)
            }
            _ => None,
        };

        let traj = ep.history().clone();
        let fixed_policy: Option<PolicyRef> =
            matches!(spec, AgentSpec::Fixed { .. }).then(|| shared(fresh.snapshot()));
        let every = ctx.checkpoint_every();
        let mut last_gap = None;
        let mut t = every;
        while t <= steps {
            let d = ctx.gap_depth(t)?;
            let m = t + d;
            if traj.len() + 1 < m {
                break;
            }
            let h = traj.prefix(t);
            let q = PlanQuery::new(mu, &h, m, &ctx.sched).with_depth_cap(ctx.cap);
            let opt_v = optimal_value(&q)?.value;
            let agent_v = match &fixed_policy {
                Some(p) => policy_value(&q, p.as_ref())?,
                None => realized_value(mu, &traj, t, m, &ctx.sched)?,
            };
            let regret_cum = if t <= ctx.cap {
                Some(best_reward(mu, t, ctx.cap)? - cum_rewards[t - 1])
            } else {
                None
            };
            last_gap = Some(opt_v - agent_v);
            cp_table.push(vec![
                t.to_string(),
                opt(regret_cum),
                num(opt_v),
                num(agent_v),
                num(opt_v - agent_v),
                opt(upsilon),
                num(ctx.sched.tail_ratio(t, m)),
            ]);
            t += every;
        }
        if let Some(g) = last_gap {
            block.insert("final_gap".into(), json!(g));
            scalars.insert(format!("final_gap_{name}"), g);
        }

        if let Some(m) = cfg.experiment.regret_horizon {
            let l = regret(mu, fresh.snapshot().as_ref(), m, RegretMode::Exact, ctx.cap)?;
            block.insert("regret".into(), json!(l));
            scalars.insert(format!("regret_{name}"), l.regret);
        }
        Ok(())
    })();

    let total = ep.total_reward();
    let arms = explored.iter().filter(|&&x| x).count();
    block.insert("steps_completed".into(), json!(table.rows.len()));
    block.insert("halted_at".into(), json!(halted_at));
    block.insert("total_reward".into(), json!(total));
    block.insert("arms_explored".into(), json!(arms));
    block.insert("explore_steps".into(), json!(explore_steps));
    block.insert("boundaries".into(), json!(boundaries));
    if let Some(b) = agent.belief() {
        block.insert("posterior".into(), posterior_json(b));
    }
    scalars.insert(format!("total_reward_{name}"), total);
    scalars.insert(format!("arms_explored_{name}"), arms as f64);
    record.tables.push((format!("{name}_steps"), table));
    record.tables.push((format!("{name}_checkpoints"), cp_table));
    result
}

fn binary_iid_truth(spec: &PredictorSpec) -> Option<f64> {
    match spec {
        PredictorSpec::Bernoulli { p } => Some(*p),
        PredictorSpec::Iid { probs } if probs.len() == 2 => Some(probs[1] / (probs[0] + probs[1])),
        _ => None,
    }
}

fn prediction(
    ctx: &Ctx,
    record: &mut Record,
    scalars: &mut BTreeMap<String, f64>,
) -> Result<(), RunError> {
    let e = &ctx.cfg.experiment;
    let truth_spec = e.truth.as_ref().expect("validated");
    let truth = truth_spec.build().map_err(config_err("truth"))?;
    let mut preds: Vec<PredictorRef> = e
        .predictors
        .iter()
        .map(|p| p.build())
        .collect::<Result<_, _>>()
        .map_err(config_err("predictors"))?;
    if preds.iter().any(|p| p.alphabet() != truth.alphabet()) {
        return Err(RunError::Config("predictor and truth alphabets differ".into()));
    }
    let n_pred = preds.len();
    preds.push(truth.clone());
    let mut names: Vec<String> = preds[..n_pred].iter().map(|p| p.name().to_string()).collect();
    names.push("truth".into());
    dedupe(&mut names);

    let x = sample_sequence(truth.as_ref(), e.steps, &mut ctx.root.split("sequence"))?;
    let l = ledger(&preds, &x)?;
    let kl = match binary_iid_truth(truth_spec) {
        Some(p) if e.steps <= KL_TRAJECTORY_CAP => Some(iid_kl_trajectory(p, preds[0].as_ref(), e.steps)?),
        _ => None,
    };

    let mut header = vec!["t".to_string(), "symbol".into()];
    for n in &names {
        header.push(format!("pred_{n}"));
    }
    for n in &names {
        header.push(format!("err_{n}"));
    }
    for n in &names {
        header.push(format!("cumerr_{n}"));
    }
    header.push("kl_bound".into());
    let mut table = Table::new(header);
    let truth_j = names.len() - 1;
    for t in 1..=x.len() {
        let mut row = vec![t.to_string(), x[t - 1].to_string()];
        row.extend((0..names.len()).map(|j| l.predictions[j][t - 1].to_string()));
        row.extend((0..names.len()).map(|j| l.error(j, t).to_string()));
        row.extend((0..names.len()).map(|j| l.cumulative[j][t - 1].to_string()));
        let bound = kl
            .as_ref()
            .map(|k| regret_bound(k[t - 1], l.cumulative[truth_j][t - 1] as f64));
        row.push(opt(bound));
        table.push(row);
    }

    let mut cp_header = vec!["t".to_string(), format!("kl_{}", names[0])];
    cp_header.extend(names[..n_pred].iter().map(|n| format!("regret_{n}")));
    let mut cp = Table::new(cp_header);
    let every = ctx.checkpoint_every();
    for t in (every..=x.len()).step_by(every) {
        let mut row = vec![t.to_string(), opt(kl.as_ref().map(|k| k[t - 1]))];
        row.extend((0..n_pred).map(|j| {
            (l.cumulative[j][t - 1] as i64 - l.cumulative[truth_j][t - 1] as i64).to_string()
        }));
        cp.push(row);
    }

    let total = x.len();
    let mut errors = Map::new();
    let mut regrets = Map::new();
    for (j, n) in names.iter().enumerate() {
        let e_j = l.total_errors(j);
        errors.insert(n.clone(), json!(e_j));
        scalars.insert(format!("errors_{n}"), e_j as f64);
        if j < n_pred {
            let r = e_j as i64 - l.total_errors(truth_j) as i64;
            regrets.insert(n.clone(), json!(r));
            scalars.insert(format!("regret_{n}"), r as f64);
        }
    }
    record.summary.insert("steps".into(), json!(total));
    record.summary.insert("total_errors".into(), Value::Object(errors));
    record.summary.insert("regret".into(), Value::Object(regrets));
    if let Some(k) = &kl {
        let last = *k.last().unwrap_or(&0.0);
        record.summary.insert("kl_bits".into(), json!({ "predictor": names[0], "value": last }));
        scalars.insert("kl".into(), last);
    }
    record.tables.push(("steps".into(), table));
    record.tables.push(("checkpoints".into(), cp));
    Ok(())
}

fn multiagent(
    ctx: &Ctx,
    record: &mut Record,
    scalars: &mut BTreeMap<String, f64>,
) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let env: MultiEnvRef = cfg.experiment.game.expect("validated").build();
    let n = env.n_agents();
    let belief = cfg.belief(&ctx.sched)?;
    let mut agents: Vec<Box<dyn Agent>> = cfg
        .agents
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            spec.build(
                belief.clone(),
                env.actions(i),
                &ctx.sched,
                ctx.root.split(&format!("agent/{}", i + 1)),
            )
            .map_err(config_err(&format!("agent {}", i + 1)))
        })
        .collect::<Result<_, _>>()?;

    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        header.push(format!("a_{i}"));
        header.push(format!("r_{i}"));
    }
    let mut table = Table::new(header);
    let mut cp_header = vec!["t".to_string()];
    cp_header.extend((1..=n).map(|i| format!("br_gap_{i}")));
    cp_header.extend((1..=n).map(|i| format!("br_ok_{i}")));
    let mut cp = Table::new(cp_header);

    let steps = cfg.experiment.steps;
    let every = ctx.checkpoint_every();
    let mut trace = JointTrace::new(n);
    let mut rng = ctx.root.split("env");
    let mut ok_counts = vec![0usize; n];
    let mut last_gaps: Option<Vec<f64>> = None;
    let result = (|| -> Result<(), RunError> {
        for t in 1..=steps {
            if t % every == 0 {
                let snaps: Vec<PolicyRef> = agents.iter().map(|a| Arc::from(a.snapshot())).collect();
                let m = t + ctx.gap_depth(t)?;
                let gaps = best_response_gaps(&env, &trace, &snaps, m, &ctx.sched, ctx.cap)?;
                let mut row = vec![t.to_string()];
                row.extend(gaps.iter().map(|&g| num(g)));
                for (i, &g) in gaps.iter().enumerate() {
                    let ok = g < cfg.experiment.eps;
                    ok_counts[i] += ok as usize;
                    row.push((ok as u8).to_string());
                }
                cp.push(row);
                last_gaps = Some(gaps);
            }
            let percepts = joint_step(env.as_ref(), &mut trace, &mut agents, &mut rng)?;
            let mut row = vec![t.to_string()];
            for (i, &e) in percepts.iter().enumerate() {
                let a = trace.projections[i].at(t).0;
                row.push(env.actions(i).name(a).to_string());
                row.push(num(env.percepts(i).reward(e)));
            }
            table.push(row);
        }
        Ok(())
    })();

    let checkpoints = cp.rows.len();
    let mut blocks = Vec::new();
    for i in 0..n {
        let h = &trace.projections[i];
        let total: f64 = h.rewards(env.percepts(i)).sum();
        let mut freq = Map::new();
        for a in env.actions(i).iter() {
            let c = h.cycles().iter().filter(|(x, _)| *x == a).count();
            freq.insert(env.actions(i).name(a).to_string(), json!(c as f64 / h.len().max(1) as f64));
        }
        let fraction = ok_counts[i] as f64 / checkpoints.max(1) as f64;
        let mut b = Map::new();
        b.insert("agent".into(), json!(i + 1));
        b.insert("kind".into(), json!(cfg.agents[i].label()));
        b.insert("total_reward".into(), json!(total));
        b.insert("action_frequency".into(), Value::Object(freq));
        b.insert("br_ok_fraction".into(), json!(fraction));
        if let Some(g) = &last_gaps {
            b.insert("final_gap".into(), json!(g[i]));
            scalars.insert(format!("final_gap_{}", i + 1), g[i]);
        }
        if let Some(bel) = agents[i].belief() {
            b.insert("posterior".into(), posterior_json(bel));
        }
        scalars.insert(format!("total_reward_{}", i + 1), total);
        scalars.insert(format!("br_ok_fraction_{}", i + 1), fraction);
        blocks.push(Value::Object(b));
    }
    record.summary.insert("game".into(), json!(env.name()));
    record.summary.insert("steps_completed".into(), json!(table.rows.len()));
    record.summary.insert("checkpoints".into(), json!(checkpoints));
    record.summary.insert("agents".into(), Value::Array(blocks));
    record.summary.insert(
        "note".into(),
        json!("best-response gaps are measured for frozen snapshots of learning agents"),
    );
    record.tables.push(("steps".into(), table));
    record.tables.push(("checkpoints".into(), cp));
    result
}

fn values_kind(
    ctx: &Ctx,
    record: &mut Record,
    scalars: &mut BTreeMap<String, f64>,
) -> Result<(), RunError> {
    let e = &ctx.cfg.experiment;
    let spec = ctx.cfg.true_env_spec()?;
    let report = values::query(
        &spec,
        &ctx.sched,
        e.history.as_deref().unwrap_or(""),
        e.horizon.expect("validated"),
        e.eps,
        e.iterative,
        ctx.cap,
    )?;
    for (a, v) in &report.action_values {
        scalars.insert(format!("value_{a}"), *v);
    }
    record.summary.insert("values".into(), json!(report));
    Ok(())
}
