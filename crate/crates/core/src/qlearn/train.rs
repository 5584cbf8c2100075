//! Action selection, TD targets, gradient updates, and the training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::eval::{class_metrics, evaluate_policy, EvalLog, EvalRecord};
use crate::mdp_env::Environment;
use crate::util::derive_seed;

use super::{
    apply_sgd, argmax, backward, epsilon_at, forward_cached, forward_raw, lr_at, Hyperparams,
    Mat, NetworkConfig, QNetworkParams, QlearnError, ReplayBuffer, Transition,
};

const SEED_INIT: u64 = 1;
const SEED_LOOP: u64 = 2;

/// Epsilon-greedy action selection: with probability `epsilon` a uniform
/// random action, otherwise the argmax of the Q-row with lowest-index
/// tie-break.
pub fn select_action(
    params: &QNetworkParams,
    config: &NetworkConfig,
    state: &[f64],
    epsilon: f64,
    rng: &mut ChaCha20Rng,
) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..config.output_dim)
    } else {
        let rows: Vec<&[f64]> = vec![state];
        let q = forward_raw(params, &Mat::from_rows(&rows));
        argmax(q.row(0))
    }
}

/// Bootstrapped targets `y_i = r_i + gamma * max_a Q_target(s'_i, a)`, with
/// the bootstrap term dropped on terminal transitions.
pub fn td_targets(
    batch: &[&Transition],
    target: &QNetworkParams,
    hp: &Hyperparams,
) -> Vec<f64> {
    if batch.is_empty() {
        return Vec::new();
    }
    let rows: Vec<&[f64]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
    let next_q = forward_raw(target, &Mat::from_rows(&rows));
    batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                t.reward
            } else {
                let row = next_q.row(i);
                let max_next = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                t.reward + hp.gamma * max_next
            }
        })
        .collect()
}

/// One training call: `hp.gradient_steps` minibatch updates of the policy
/// network by gradient descent on the mean squared TD error, at the rate
/// `lr_at(step)`. Targets are constants computed from the target network.
/// Returns the mean loss across the sub-iterations.
pub fn train_step(
    policy: &mut QNetworkParams,
    target: &QNetworkParams,
    buffer: &ReplayBuffer,
    config: &NetworkConfig,
    hp: &Hyperparams,
    step: u64,
    rng: &mut ChaCha20Rng,
) -> Result<f64, QlearnError> {
    if buffer.len() < hp.batch_size {
        return Err(QlearnError::BufferTooSmall {
            have: buffer.len(),
            needed: hp.batch_size,
        });
    }
    policy.check_config(config)?;
    let lr = lr_at(step, hp);
    let mut loss_sum = 0.0;
    for _ in 0..hp.gradient_steps {
        let indices = buffer.sample_indices(hp.batch_size, rng);
        let batch: Vec<&Transition> = indices
            .iter()
            .map(|&i| buffer.get(i).expect("sampled index in range"))
            .collect();
        let targets = td_targets(&batch, target, hp);
        let rows: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let states = Mat::from_rows(&rows);
        let dropout_rng = if config.dropout_rate > 0.0 {
            Some(&mut *rng)
        } else {
            None
        };
        let cache = forward_cached(policy, config, &states, dropout_rng);
        let q = cache.outputs();
        let batch_len = batch.len() as f64;
        let mut dloss = Mat::zeros(q.rows, q.cols);
        let mut loss = 0.0;
        for (i, t) in batch.iter().enumerate() {
            let residual = q.row(i)[t.action] - targets[i];
            loss += residual * residual;
            dloss.row_mut(i)[t.action] = 2.0 * residual / batch_len;
        }
        loss /= batch_len;
        loss_sum += loss;
        let grads = backward(policy, &cache, &dloss);
        apply_sgd(policy, &grads, lr);
    }
    Ok(loss_sum / hp.gradient_steps as f64)
}

/// Exponential blend of policy parameters into the target network:
/// `theta_target <- tau * theta_policy + (1 - tau) * theta_target`.
pub fn soft_update(
    target: &mut QNetworkParams,
    policy: &QNetworkParams,
    tau: f64,
) -> Result<(), QlearnError> {
    if target.shapes() != policy.shapes() {
        return Err(QlearnError::ShapeMismatch(format!(
            "target shapes {:?} do not match policy shapes {:?}",
            target.shapes(),
            policy.shapes()
        )));
    }
    for (t_layer, p_layer) in target.layers.iter_mut().zip(&policy.layers) {
        for (t, &p) in t_layer.weights.iter_mut().zip(&p_layer.weights) {
            *t = tau * p + (1.0 - tau) * *t;
        }
        for (t, &p) in t_layer.biases.iter_mut().zip(&p_layer.biases) {
            *t = tau * p + (1.0 - tau) * *t;
        }
    }
    Ok(())
}

/// One row of the training log CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub epsilon: f64,
    pub lr: f64,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Trained parameters plus the evaluation and training logs.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: QNetworkParams,
    pub eval_log: EvalLog,
    pub log_rows: Vec<TrainLogRow>,
    pub final_step: u64,
}

/// Run the full training loop: epsilon-greedy interaction, replay storage,
/// per-step minibatch updates once the warmup is over, per-step soft target
/// updates, and periodic greedy evaluation on both splits. Fully
/// deterministic given the seeds in `hp` and the environments.
pub fn train(
    env: &mut Environment,
    eval_env: &Environment,
    hp: &Hyperparams,
    config: &NetworkConfig,
) -> Result<TrainOutcome, QlearnError> {
    train_from(env, eval_env, hp, config, None)
}

/// As [`train`], optionally resuming from existing parameters and a step
/// counter (the replay buffer always starts empty).
pub fn train_from(
    env: &mut Environment,
    eval_env: &Environment,
    hp: &Hyperparams,
    config: &NetworkConfig,
    initial: Option<(QNetworkParams, u64)>,
) -> Result<TrainOutcome, QlearnError> {
    let (num_classes, dim) = env.spaces();
    if eval_env.spaces() != (num_classes, dim) {
        return Err(QlearnError::ShapeMismatch(format!(
            "train env spaces {:?} do not match eval env spaces {:?}",
            env.spaces(),
            eval_env.spaces()
        )));
    }
    if config.input_dim != dim || config.output_dim != num_classes {
        return Err(QlearnError::ShapeMismatch(format!(
            "network ({}, {}) does not match environment (D={dim}, K={num_classes})",
            config.input_dim, config.output_dim
        )));
    }
    let (mut policy, start_step) = match initial {
        Some((params, step)) => {
            params.check_config(config)?;
            (params, step)
        }
        None => (
            QNetworkParams::init(config, derive_seed(hp.seed, SEED_INIT)),
            0,
        ),
    };
    let mut target = policy.clone();
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(hp.seed, SEED_LOOP));
    let mut eval_log = EvalLog::new();
    let mut log_rows = Vec::new();
    let mut last_loss = 0.0;

    if start_step >= hp.total_timesteps {
        return Ok(TrainOutcome {
            params: policy,
            eval_log,
            log_rows,
            final_step: start_step,
        });
    }

    let warmup = hp.learning_starts().max(hp.batch_size);
    let mut obs = env.reset()?;
    for step in start_step..hp.total_timesteps {
        let epsilon = epsilon_at(step, hp);
        let action = select_action(&policy, config, &obs, epsilon, &mut rng);
        let (next_obs, reward, done) = env.step(action)?;
        buffer.push(Transition {
            state: obs,
            action,
            reward,
            next_state: next_obs.clone(),
            terminal: done,
        });
        obs = if done { env.reset()? } else { next_obs };
        if buffer.len() >= warmup {
            last_loss = train_step(&mut policy, &target, &buffer, config, hp, step, &mut rng)?;
        }
        soft_update(&mut target, &policy, hp.tau)?;
        if let Some(interval) = hp.target_copy_interval {
            if interval > 0 && (step + 1) % interval == 0 {
                target = policy.clone();
            }
        }
        if hp.eval_interval > 0 && (step + 1) % hp.eval_interval == 0 {
            let logged = step + 1;
            let (train_acc, train_cm) = evaluate_policy(&policy, config, env.split())
                .expect("dimensions validated at loop entry");
            let (test_acc, test_cm) = evaluate_policy(&policy, config, eval_env.split())
                .expect("dimensions validated at loop entry");
            let train_metrics = class_metrics(&train_cm).expect("non-empty split");
            let test_metrics = class_metrics(&test_cm).expect("non-empty split");
            eval_log.push(EvalRecord::new(logged, "train", train_acc, &train_metrics));
            eval_log.push(EvalRecord::new(logged, "test", test_acc, &test_metrics));
            log_rows.push(TrainLogRow {
                step: logged,
                epsilon: epsilon_at(logged, hp),
                lr: lr_at(logged, hp),
                loss: last_loss,
                train_acc,
                test_acc,
            });
        }
    }
    Ok(TrainOutcome {
        params: policy,
        eval_log,
        log_rows,
        final_step: hp.total_timesteps,
    })
}
