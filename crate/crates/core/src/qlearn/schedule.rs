//! Exploration and learning-rate schedules.

use super::Hyperparams;

/// Linear epsilon decay: `exploration_initial` at step 0 down to
/// `exploration_final` at `exploration_fraction * total_timesteps`, constant
/// afterwards.
pub fn epsilon_at(step: u64, hp: &Hyperparams) -> f64 {
    let window = hp.exploration_fraction * hp.total_timesteps as f64;
    if window <= 0.0 {
        return if step == 0 {
            hp.exploration_initial
        } else {
            hp.exploration_final
        };
    }
    let progress = step as f64 / window;
    if progress >= 1.0 {
        hp.exploration_final
    } else {
        hp.exploration_initial + (hp.exploration_final - hp.exploration_initial) * progress
    }
}

/// Exponentially decayed learning rate with a continuous exponent:
/// `lr_base * lr_decay^(step / lr_decay_period)`.
pub fn lr_at(step: u64, hp: &Hyperparams) -> f64 {
    hp.lr_base * hp.lr_decay.powf(step as f64 / hp.lr_decay_period)
}
