mod common;

use std::collections::BTreeMap;

use grasp_core::ColoredGraph;
use grasp_neural::optim::bce_loss;
use grasp_neural::{Model, ParamSet, Sample};

const EPS: f64 = 1e-4;
const TOLERANCE: f64 = 1e-3;
/// Gradients below this magnitude are compared on an absolute scale.
const FLOOR: f64 = 1e-6;

fn loss(model: &Model, p: &ParamSet<f64>, samples: &[Sample<'_>], labels: &[bool]) -> f64 {
    bce_loss(&model.logits(p, samples).unwrap(), labels, 0.01)
}

/// Every coordinate of every parameter block against central differences.
#[test]
fn analytic_gradients_match_finite_differences() {
    let model = Model::new(common::tiny_config()).unwrap();
    let mut p = common::randomized::<f64>(&model, 7, 0.3);
    let images: Vec<_> = (0..3).map(|i| common::noise_image(16, 100 + i)).collect();
    let graphs = vec![
        ColoredGraph::new(vec![0, 1, 0, 1], vec![(0, 1, 0), (1, 2, 0), (1, 3, 0)]).unwrap(),
        ColoredGraph::single(1),
        ColoredGraph::new(vec![1, 0, 0], vec![(0, 1, 0), (1, 2, 0), (2, 0, 0)]).unwrap(),
        ColoredGraph::empty(),
    ];
    let samples: Vec<Sample<'_>> = vec![
        Sample { image: &images[0], graph: &graphs[0], terminal: false },
        Sample { image: &images[1], graph: &graphs[1], terminal: true },
        Sample { image: &images[2], graph: &graphs[2], terminal: false },
        Sample { image: &images[0], graph: &graphs[3], terminal: true },
    ];
    let labels = [true, false, true, false];
    let analytic = model.loss_and_grad(&p, &samples, &labels, 0.01).unwrap();
    assert!((analytic.loss - loss(&model, &p, &samples, &labels)).abs() < 1e-12);

    let names = p.names().to_vec();
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        for i in 0..p.tensor(k).data.len() {
            let x = p.tensor(k).data[i];
            p.tensors_mut()[k].data[i] = x + EPS;
            let up = loss(&model, &p, &samples, &labels);
            p.tensors_mut()[k].data[i] = x - EPS;
            let down = loss(&model, &p, &samples, &labels);
            p.tensors_mut()[k].data[i] = x;
            let numeric = (up - down) / (2.0 * EPS);
            let a = analytic.grads[k][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            let block = name.split('.').take(2).collect::<Vec<_>>().join(".");
            let w = worst.entry(block).or_insert(0.0);
            *w = w.max(rel);
        }
    }
    for (block, rel) in &worst {
        println!("{block:<16} max relative error {rel:.2e}");
    }
    let failing: Vec<_> = worst.iter().filter(|(_, &r)| !(r < TOLERANCE)).collect();
    assert!(failing.is_empty(), "{failing:?}");
}
