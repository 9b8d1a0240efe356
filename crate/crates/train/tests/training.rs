use std::f64::consts::LN_2;

use grasp_core::TaskConfig;
use grasp_neural::{Checkpoint, ModelConfig};
use grasp_train::metrics::{read_metrics, read_rows, EvalRow, METRICS_HEADER};
use grasp_train::{ExperimentConfig, Progress, Trainer};

/// Small trees, one node color, a narrow network and short evaluations.
fn smoke_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.task = TaskConfig {
        min_nodes: 3,
        max_nodes: 4,
        node_colors: 1,
        ..TaskConfig::default()
    };
    c.render.size = 32;
    c.model = ModelConfig {
        node_colors: 1,
        hidden: 16,
        rounds: 2,
        image_size: 32,
        channels: vec![8, 16],
        blocks_per_stage: 1,
        ..ModelConfig::default()
    };
    c.schedule.warmup_samples = 1_000;
    c.schedule.cycle_samples = 20_000;
    c.train.batch_size = 64;
    c.train.micro_batch = 32;
    c.train.total_samples = 10_048;
    c.train.buffer_capacity = 200;
    c.train.eval_every = 5_000;
    c.eval.trajectories = 5;
    c.eval.transition_samples = 40;
    c
}

#[test]
fn smoke_run_beats_chance() {
    let mut t = Trainer::new(smoke_config()).unwrap();
    let mut losses = Vec::new();
    while t.state().samples < t.config().train.total_samples {
        let s = t.step().unwrap();
        assert!(s.loss.is_finite() && s.grad_norm.is_finite());
        losses.push(s.loss);
    }
    let tail = &losses[losses.len() - 20..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(mean < LN_2, "final loss {mean:.4} not below ln 2");
}

#[test]
fn batches_are_balanced_at_every_step() {
    let mut t = Trainer::new(smoke_config()).unwrap();
    for _ in 0..20 {
        let b = t.peek_batch().unwrap();
        assert_eq!(2 * b.iter().filter(|x| x.triplet.label).count(), b.len());
        t.step().unwrap();
    }
}

#[test]
fn resume_reproduces_losses_bit_exactly() {
    let mut a = Trainer::new(smoke_config()).unwrap();
    for _ in 0..3 {
        a.step().unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    a.checkpoint().save(&path).unwrap();
    let mut b = Trainer::resume(&Checkpoint::load(&path).unwrap()).unwrap();
    assert_eq!(a.state(), b.state());
    for _ in 0..4 {
        let (x, y) = (a.step().unwrap(), b.step().unwrap());
        assert_eq!(x.loss.to_bits(), y.loss.to_bits());
        assert_eq!(x.grad_norm.to_bits(), y.grad_norm.to_bits());
    }
    assert_eq!(a.params(), b.params());
}

#[test]
fn run_writes_logs_and_resumes_the_counter() {
    let mut c = smoke_config();
    c.train.total_samples = 640;
    c.train.eval_every = 320;
    let dir = tempfile::tempdir().unwrap();
    let mut evals = 0;
    Trainer::new(c.clone())
        .unwrap()
        .run(dir.path(), |p| evals += usize::from(matches!(p, Progress::Eval(_))))
        .unwrap();
    assert_eq!(evals, 2);

    let text = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(METRICS_HEADER));
    let rows = read_metrics(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.windows(2).all(|w| w[0].samples < w[1].samples));
    assert_eq!(rows.iter().filter(|r| r.acc.is_some()).count(), 2);
    let eval_rows: Vec<EvalRow> = read_rows(&dir.path().join("eval.csv")).unwrap();
    assert_eq!(eval_rows.iter().map(|r| r.samples).collect::<Vec<_>>(), vec![320, 640]);

    // Extend the finished run: the counter continues from the checkpoint.
    let ck = Checkpoint::load(&dir.path().join("checkpoint.bin")).unwrap();
    let t = Trainer::resume(&ck).unwrap();
    assert_eq!(t.state().samples, 640);
    let mut more = t.config().clone();
    more.train.total_samples = 768;
    let mut changed = more.clone();
    changed.train.batch_size = 32;
    assert!(Trainer::resume_with(&ck, changed).is_err());
    let mut t = Trainer::resume_with(&ck, more.clone()).unwrap();
    assert_eq!(t.config(), &more);
    t.run(dir.path(), |_| {}).unwrap();
    let rows = read_metrics(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.last().unwrap().samples, 768);
    assert_eq!(rows.len(), 12);

    let svg = grasp_train::plot::render_svg(&rows);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 5);
}
