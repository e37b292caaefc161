use std::sync::Arc;

use grl_core::prediction::{
    adversarial_sequence, ledger, prediction_regret, regret_bound, Iid, Laplace,
    MixturePredictor, PredictorRef,
};

use crate::Outcome;

const T: usize = 10_000;
const SEEDS: u64 = 100;

pub fn run() -> Outcome {
    let laplace: PredictorRef = Arc::new(Laplace::new(2).unwrap());
    let grid: PredictorRef = Arc::new(MixturePredictor::bernoulli_grid(9).unwrap());
    let truth: PredictorRef = Arc::new(Iid::bernoulli(0.7).unwrap());
    let mut notes = Vec::new();
    let mut pass = true;

    // Adversarial sequences: every ML prediction is wrong, so E_t = t ≥ t/2 at every t.
    for q in [&laplace, &grid] {
        let z = adversarial_sequence(q.as_ref(), T).unwrap();
        let l = ledger(std::slice::from_ref(q), &z).unwrap();
        let ok = l.cumulative[0]
            .iter()
            .enumerate()
            .all(|(i, &e)| 2 * e as usize > i);
        pass &= ok;
        notes.push(format!("adversarial E^{}_T = {} (>= T/2: {ok})", q.name(), l.total_errors(0)));
    }

    // Laplace vs. the Bernoulli(0.7) truth.
    let mean_final: f64 = (0..SEEDS)
        .map(|s| prediction_regret(&truth, &laplace, T, s).unwrap().regret(T) as f64)
        .sum::<f64>()
        / SEEDS as f64;
    let ok = mean_final / T as f64 <= 0.02;
    pass &= ok;
    notes.push(format!("Laplace mean regret/T = {:.5} (<= 0.02: {ok})", mean_final / T as f64));

    // Seed-mean regret of the 9-member grid against the bound with KL <= log2 9, at every t.
    let kl = 9f64.log2();
    let mut sum_regret = vec![0.0; T];
    let mut sum_truth = vec![0.0; T];
    for s in 0..SEEDS {
        let r = prediction_regret(&truth, &grid, T, 1000 + s).unwrap();
        for t in 0..T {
            sum_regret[t] += r.errors_q[t] as f64 - r.errors_p[t] as f64;
            sum_truth[t] += r.errors_p[t] as f64;
        }
    }
    let n = SEEDS as f64;
    let mut worst_slack = f64::INFINITY;
    for t in 0..T {
        let slack = regret_bound(kl, sum_truth[t] / n) - sum_regret[t] / n;
        worst_slack = worst_slack.min(slack);
    }
    let ok = worst_slack >= 0.0;
    pass &= ok;
    notes.push(format!(
        "grid mean regret at T = {:.3}, bound = {:.3}, min slack over t = {worst_slack:.3} (holds: {ok})",
        sum_regret[T - 1] / n,
        regret_bound(kl, sum_truth[T - 1] / n)
    ));
    Outcome::check(pass, notes.join("; "))
}
