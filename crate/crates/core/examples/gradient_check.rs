//! Finite-difference check of the full network gradient on one small input.

use stc::losses::{multilabel_ce, multilabel_ce_grad, ProbMap, TargetProbMap};
use stc::segnet::{backward, forward, forward_cached, init_network, NetworkConfig};
use stc::tensor_grad::{channel_softmax, finite_diff_check, Tensor};

fn main() -> stc::Result<()> {
    let net = NetworkConfig {
        num_classes: 2,
        channels: vec![4, 6, 8],
        kernel_size: 3,
        seed: 3,
    };
    let mut params = init_network(&net)?;
    let image = Tensor::from_fn(&[1, 3, 8, 8], |i| ((i * 37 % 101) as f64) / 100.0);
    let target_logits = Tensor::from_fn(&[1, 3, 2, 2], |i| (i as f64 * 0.7).sin());
    let target = TargetProbMap::new(channel_softmax(&target_logits)?.reshape(vec![3, 2, 2])?)?;

    let cache = forward_cached(&params, &net, &image)?;
    let (loss, g) = multilabel_ce_grad(&cache.logits, &target)?;
    params.accumulate_grads(&backward(&params, &net, &cache, &g)?)?;
    let err = finite_diff_check(
        |p| {
            let logits = forward(p, &net, &image).expect("forward");
            multilabel_ce(&ProbMap::from_logits(&logits).expect("softmax"), &target).expect("loss")
        },
        &params,
        1e-5,
    );
    println!("loss {loss:.6}");
    println!(
        "{} parameters, worst relative error {err:.2e}",
        params.num_scalars()
    );
    Ok(())
}
