/// Per-sample clipped surrogate objective `min(r A, clip(r, 1-eps, 1+eps) A)`
/// with `r = exp(lp_new - lp_old)`.
pub fn clipped_surrogate(log_prob_new: f64, log_prob_old: f64, advantage: f64, clip_eps: f64) -> f64 {
    let ratio = (log_prob_new - log_prob_old).exp();
    surrogate_from_ratio(ratio, advantage, clip_eps)
}

pub fn surrogate_from_ratio(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of the per-sample objective with respect to `log_prob_new`.
/// Zero whenever the clipped branch is strictly smaller.
pub fn surrogate_grad(log_prob_new: f64, log_prob_old: f64, advantage: f64, clip_eps: f64) -> f64 {
    let ratio = (log_prob_new - log_prob_old).exp();
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    if ratio * advantage <= clipped * advantage {
        ratio * advantage
    } else {
        0.0
    }
}

/// Loss `-mean(objective)` over a batch.
pub fn surrogate_loss(lp_new: &[f64], lp_old: &[f64], adv: &[f64], clip_eps: f64) -> f64 {
    let n = lp_new.len() as f64;
    -lp_new
        .iter()
        .zip(lp_old)
        .zip(adv)
        .map(|((&a, &b), &c)| clipped_surrogate(a, b, c, clip_eps))
        .sum::<f64>()
        / n
}
