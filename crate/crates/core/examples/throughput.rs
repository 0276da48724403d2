//! Times forward and reverse jet passes of the default network at each order.

use std::time::Instant;

use pinnbias::net::{Architecture, InitScheme, JetTape, Params};

fn main() {
    let p = Params::<f64>::init(1, Architecture::default(), InitScheme::GlorotNormal).unwrap();
    let xs: Vec<f64> = (0..1026).map(|i| -3.1 + 6.2 * i as f64 / 1026.0).collect();
    for order in 0..=3 {
        let cot = vec![1e-3; (order + 1) * xs.len()];
        let reps = 40;
        let t = Instant::now();
        let mut reuse = JetTape::default();
        for _ in 0..reps {
            reuse.run(&p, &xs, order).unwrap();
            std::hint::black_box(&reuse);
        }
        let fwd = t.elapsed().as_secs_f64() * 1e3 / reps as f64;
        let mut tape = JetTape::forward(&p, &xs, order).unwrap();
        let mut grad = p.zeros_like();
        let t = Instant::now();
        for _ in 0..reps {
            tape.backward_into(&p, &cot, &mut grad).unwrap();
            std::hint::black_box(&grad);
        }
        let bwd = t.elapsed().as_secs_f64() * 1e3 / reps as f64;
        println!("order {order}: forward {fwd:.2} ms, backward {bwd:.2} ms");
    }
}
