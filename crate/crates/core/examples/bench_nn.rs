use cellpk::models;
use cellpk::nn::{backward, forward_with_contexts, Gradients, Mode, Tensor, AdamState, AdamParams};
use std::time::Instant;

fn main() {
    for (name, kind) in [("tiny-shallow", models::ModelKind::TinyShallow), ("tiny-deep", models::ModelKind::TinyDeep)] {
        let mut g = models::build(kind, [3, 64, 64], 1).unwrap();
        let n = 16usize;
        let data: Vec<f32> = (0..n*3*64*64).map(|i| (i % 255) as f32 / 255.0).collect();
        let batch = Tensor::new(vec![n,3,64,64], data).unwrap();
        let targets = Tensor::new(vec![n,1], vec![0.5f32; n]).unwrap();
        // warmup
        let (_, ctxs) = forward_with_contexts(&g, &batch, Mode::Train, 0).unwrap();
        let _ = backward(&g, &ctxs, &targets).unwrap();

        let t0 = Instant::now();
        let iters: usize = 20;
        for i in 0..iters as u64 {
            let (_out, _) = forward_with_contexts(&g, &batch, Mode::Eval, i).unwrap();
        }
        let fwd = t0.elapsed().as_secs_f64() / (iters * n) as f64;

        let t0 = Instant::now();
        let mut adam = AdamState::new(&g, AdamParams::default());
        let mut grads_opt: Option<Gradients<f32>> = None;
        for i in 0..iters as u64 {
            let (_, ctxs) = forward_with_contexts(&g, &batch, Mode::Train, i).unwrap();
            let (_, grads) = backward(&g, &ctxs, &targets).unwrap();
            adam.step(&mut g, &grads, 1e-9).unwrap();
            grads_opt = Some(grads);
        }
        let full = t0.elapsed().as_secs_f64() / (iters * n) as f64;
        let _ = grads_opt;
        println!("{name}: fwd {:.3} ms/sample, fwd+bwd+adam {:.3} ms/sample", fwd*1e3, full*1e3);
    }
}
