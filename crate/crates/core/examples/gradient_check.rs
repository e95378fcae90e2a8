//! Compare the analytic backward pass with central differences on a small
//! network in double precision.

use swarmland::nn::{ActorCritic, ActorCriticSpec};

fn main() -> swarmland::Result<()> {
    let spec = ActorCriticSpec {
        obs_dim: 5,
        hidden: vec![16, 8],
        act_dim: 3,
    };
    let net = ActorCritic::<f64>::init(spec, 1);
    let obs: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
    let d_mean = vec![1.0; 6];
    let d_value = vec![1.0; 2];
    let d_log_std = vec![1.0; 3];
    let loss = |n: &ActorCritic<f64>| -> f64 {
        let o = n.forward(&obs, 2).unwrap();
        o.mean.iter().sum::<f64>() + o.value.iter().sum::<f64>() + n.log_std().iter().sum::<f64>()
    };
    let out = net.forward(&obs, 2)?;
    let grads = net.backward(&out.cache, &d_mean, &d_value, &d_log_std)?;
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = net.clone();
    for i in 0..net.n_params() {
        let p = net.params()[i];
        probe.params_mut()[i] = p + h;
        let up = loss(&probe);
        probe.params_mut()[i] = p - h;
        let down = loss(&probe);
        probe.params_mut()[i] = p;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-6));
    }
    println!("{} parameters, max relative error {worst:.2e}", net.n_params());
    Ok(())
}
