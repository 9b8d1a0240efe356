//! End-to-end acceptance checks, one line per criterion.
//!
//! Criteria 7 and 8 are soft targets: they are measured and reported like
//! the others, but a miss does not fail the suite.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use grasp_core::buffers::DualBuffer;
use grasp_core::datagen::{DatagenConfig, Generator, GroupStream};
use grasp_core::graph::{count_connected_subgraphs, random_tree};
use grasp_core::render::RenderConfig;
use grasp_core::{seed, ColorSpace, ColoredGraph, RasterImage, TaskConfig};
use grasp_neural::optim::bce_loss;
use grasp_neural::tape::Tensor;
use grasp_neural::{Model, ModelConfig, ParamSet, RAdam, RAdamConfig, Sample};
use grasp_train::eval::run_episodes;
use grasp_train::metrics::{read_rows, EvalRow};
use grasp_train::{ExperimentConfig, OracleScorer, Progress, Trainer};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let quick: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "oracle-policy soundness", oracle_soundness),
        (2, "label correctness", label_correctness),
        (3, "gradient oracle", gradient_oracle),
        (4, "batch balance", batch_balance),
        (5, "permutation invariance", permutation_invariance),
        (6, "counting oracle", counting_oracle),
        (9, "determinism", determinism),
        (10, "RAdam equivalence", radam_equivalence),
    ];
    let mut hard_failures = 0;
    for (id, name, check) in quick {
        let t = Instant::now();
        let o = check();
        report(id, name, &o, t.elapsed(), false);
        hard_failures += usize::from(!o.pass);
    }
    let t = Instant::now();
    let (learning, ood) = desk_run();
    report(7, "desk-scale learning", &learning, t.elapsed(), true);
    report(8, "OOD trend", &ood, Duration::ZERO, true);
    if hard_failures > 0 {
        eprintln!("{hard_failures} criteria failed");
        std::process::exit(1);
    }
}

fn report(id: u32, name: &str, o: &Outcome, took: Duration, soft: bool) {
    let verdict = match (o.pass, soft) {
        (true, _) => "PASS",
        (false, false) => "FAIL",
        (false, true) => "FAIL (soft)",
    };
    println!("criterion {id:>2} {verdict:<11} {name}: {} [{:.1}s]", o.detail, took.as_secs_f64());
}

/// 1000 trees of 3 to 9 nodes with up to 4 node and 3 edge colors, decoded
/// greedily with the exact oracle as scorer.
fn oracle_soundness() -> Outcome {
    let start = Instant::now();
    let mut ok = 0;
    let total = 1000;
    for i in 0..total {
        let (nc, ec) = (1 + i % 4, 1 + (i / 4) % 3);
        let n = 3 + (i / 12) % 7;
        let task = TaskConfig {
            min_nodes: n,
            max_nodes: n,
            node_colors: nc,
            edge_colors: ec,
            ..TaskConfig::default()
        };
        let generator = Generator::new(task, RenderConfig::default(), DatagenConfig::default()).unwrap();
        let m = run_episodes(&OracleScorer, &generator, 1, seed::derive(1, i as u64)).unwrap();
        ok += usize::from(m.accuracy == 1.0);
    }
    let took = start.elapsed();
    let acc = ok as f64 / total as f64;
    outcome(
        acc == 1.0 && took <= Duration::from_secs(120),
        format!("accuracy {acc:.3} over {total} trees (need 1.000 within 120 s)"),
    )
}

fn brute_subgraph(g: &ColoredGraph, h: &ColoredGraph, map: &mut Vec<usize>, used: &mut [bool]) -> bool {
    if map.len() == g.node_count() {
        return g.edges().iter().all(|e| h.edge_color(map[e.u], map[e.v]) == Some(e.color));
    }
    let x = map.len();
    for y in 0..h.node_count() {
        if !used[y] && h.node_color(y) == g.node_color(x) {
            used[y] = true;
            map.push(y);
            if brute_subgraph(g, h, map, used) {
                return true;
            }
            map.pop();
            used[y] = false;
        }
    }
    false
}

/// Injective-map enumeration, independent of the matcher under test.
fn brute_label(g: &ColoredGraph, terminal: bool, target: &ColoredGraph) -> bool {
    if g.node_count() > target.node_count() {
        return false;
    }
    if terminal && (g.node_count() != target.node_count() || g.edge_count() != target.edge_count()) {
        return false;
    }
    brute_subgraph(g, target, &mut Vec::new(), &mut vec![false; target.node_count()])
}

fn label_correctness() -> Outcome {
    let task = TaskConfig {
        min_nodes: 3,
        max_nodes: 7,
        node_colors: 2,
        edge_colors: 2,
        ..TaskConfig::default()
    };
    let generator = Arc::new(Generator::new(task, RenderConfig::default(), DatagenConfig::default()).unwrap());
    let mut stream = GroupStream::spawn(generator, 2, 0, 2, 8);
    let (mut checked, mut wrong) = (0, 0);
    while checked < 10_000 {
        let g = stream.next_group();
        for t in g.triplets().take(10_000 - checked) {
            wrong += usize::from(brute_label(&t.graph, t.terminal, &g.target) != t.label);
            checked += 1;
        }
    }
    outcome(wrong == 0, format!("{wrong} disagreements in {checked} streamed triplets"))
}

fn jittered(model: &Model, s: u64, jitter: f64) -> ParamSet<f64> {
    let mut rng = seed::rng(s);
    let mut p = model.init::<f64, _>(&mut rng);
    for t in p.tensors_mut() {
        for v in &mut t.data {
            *v += rng.gen_range(-jitter..jitter);
        }
    }
    p
}

fn noise_image(size: usize, s: u64) -> RasterImage {
    let mut rng = seed::rng(s);
    RasterImage::from_pixels(size, size, (0..size * size * 3).map(|_| rng.gen()).collect()).unwrap()
}

/// Central differences over every coordinate of a d = 8 model with one
/// block per stage, in double precision.
fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let model = Model::new(ModelConfig {
        hidden: 8,
        rounds: 2,
        image_size: 16,
        stem_kernel: 2,
        stem_stride: 2,
        channels: vec![8, 16, 16],
        blocks_per_stage: 1,
        ..ModelConfig::default()
    })
    .unwrap();
    let mut p = jittered(&model, 3, 0.3);
    let images: Vec<_> = (0..2).map(|i| noise_image(16, i)).collect();
    let graphs = [
        ColoredGraph::new(vec![0, 1, 1, 0], vec![(0, 1, 0), (1, 2, 0), (2, 3, 0), (3, 1, 0)]).unwrap(),
        ColoredGraph::single(0),
        ColoredGraph::new(vec![1, 0, 0], vec![(0, 1, 0), (0, 2, 0)]).unwrap(),
    ];
    let samples = [
        Sample { image: &images[0], graph: &graphs[0], terminal: false },
        Sample { image: &images[1], graph: &graphs[1], terminal: true },
        Sample { image: &images[1], graph: &graphs[2], terminal: false },
    ];
    let labels = [true, false, false];
    let loss = |p: &ParamSet<f64>| bce_loss(&model.logits(p, &samples).unwrap(), &labels, 0.01);
    let analytic = model.loss_and_grad(&p, &samples, &labels, 0.01).unwrap().grads;
    let eps = 1e-4;
    let mut worst = (0.0f64, String::new());
    for k in 0..p.len() {
        for i in 0..p.tensor(k).data.len() {
            let x = p.tensor(k).data[i];
            p.tensors_mut()[k].data[i] = x + eps;
            let up = loss(&p);
            p.tensors_mut()[k].data[i] = x - eps;
            let down = loss(&p);
            p.tensors_mut()[k].data[i] = x;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[k][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > worst.0 {
                worst = (rel, p.names()[k].clone());
            }
        }
    }
    let took = start.elapsed();
    outcome(
        worst.0 < 1e-3 && took <= Duration::from_secs(300),
        format!(
            "max relative error {:.2e} ({}) over {} coordinates (need < 1e-3 within 300 s)",
            worst.0,
            worst.1,
            p.scalar_count()
        ),
    )
}

fn batch_balance() -> Outcome {
    let generator = Arc::new(
        Generator::new(TaskConfig::default(), RenderConfig::default(), DatagenConfig::default()).unwrap(),
    );
    let mut stream = GroupStream::spawn(generator, 4, 0, 1, 8);
    let mut buffer = DualBuffer::new(300);
    let mut rng = seed::rng(5);
    let mut violations = 0;
    for i in 0..1000 {
        if i % 2 == 0 || !buffer.is_warm(0.2) {
            while {
                buffer.push_group(&stream.next_group()).unwrap();
                !buffer.is_warm(0.2)
            } {}
        }
        let batch = buffer.sample_batch(256, &mut rng).unwrap();
        let pos = batch.iter().filter(|b| b.triplet.label).count();
        violations += usize::from(batch.len() != 256 || 2 * pos != batch.len());
    }
    outcome(violations == 0, format!("{violations} unbalanced batches out of 1000"))
}

fn permutation_invariance() -> Outcome {
    let model = Model::new(ModelConfig::default()).unwrap();
    let mut rng = seed::rng(6);
    let mut p = model.init::<f32, _>(&mut rng);
    // Nonzero FiLM projections so the graph reaches the image trunk.
    for t in p.tensors_mut() {
        for v in &mut t.data {
            *v += rng.gen_range(-0.05f32..0.05);
        }
    }
    let image = noise_image(64, 7);
    let colors = ColorSpace::new(2, 1);
    let mut worst = 0.0f32;
    for _ in 0..100 {
        let n = rng.gen_range(1..=9);
        let mut g = random_tree(n, colors, &mut rng).unwrap();
        if n > 2 {
            let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if u != v && !g.has_edge(u, v) {
                g.add_edge(u, v, 0).unwrap();
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let h = g.permute(&perm);
        let terminal = rng.gen();
        let z = model
            .logits(&p, &[Sample { image: &image, graph: &g, terminal }, Sample { image: &image, graph: &h, terminal }])
            .unwrap();
        worst = worst.max((z[0] - z[1]).abs());
    }
    outcome(worst < 1e-5, format!("max |dlogit| {worst:.2e} over 100 relabelings (need < 1e-5)"))
}

fn counting_oracle() -> Outcome {
    let mut bad = Vec::new();
    for n in 1..=10usize {
        let path = ColoredGraph::new(vec![0; n], (1..n).map(|i| (i - 1, i, 0)).collect()).unwrap();
        if count_connected_subgraphs(&path).unwrap() != (n * (n + 1) / 2) as u64 {
            bad.push(format!("P{n}"));
        }
    }
    for m in 1..=10usize {
        let star = ColoredGraph::new(vec![0; m + 1], (1..=m).map(|i| (0, i, 0)).collect()).unwrap();
        if count_connected_subgraphs(&star).unwrap() != (1u64 << m) + m as u64 {
            bad.push(format!("K1,{m}"));
        }
    }
    outcome(bad.is_empty(), format!("mismatches {bad:?} for paths and stars up to 10"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut listings = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        for cmd in [&["gen", "--count", "5"][..], &["render", "--index", "3"][..]] {
            let status = Command::new(env!("CARGO_BIN_EXE_grasp"))
                .args(["--seed", "11", "--out", out.to_str().unwrap()])
                .args(cmd)
                .env_remove("GRASP_CONFIG")
                .env_remove("GRASP_SEED")
                .env_remove("GRASP_OUT")
                .output()
                .unwrap()
                .status;
            assert!(status.success());
        }
        let mut files: Vec<(String, Vec<u8>)> = walk(&out)
            .into_iter()
            .filter(|p| p.file_name().is_some_and(|n| n != "config.toml"))
            .map(|p| (p.strip_prefix(&out).unwrap().display().to_string(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        listings.push(files);
    }
    let same = listings[0] == listings[1];
    outcome(
        same && !listings[0].is_empty(),
        format!("{} files compared across two runs, identical: {same}", listings[0].len()),
    )
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn radam_equivalence() -> Outcome {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let rho_inf = 2.0 / (1.0 - b2) - 1.0;
    let mut rng = seed::rng(10);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let theta0: f64 = rng.gen_range(-1.0..1.0);
        let mut p = ParamSet::new(vec!["x".into()], vec![Tensor::new(vec![1], vec![theta0])]);
        let mut opt = RAdam::new(RAdamConfig::default(), &p);
        let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
        for t in 1..=10 {
            let g: f64 = rng.gen_range(-2.0..2.0);
            let lr = 1e-2;
            opt.update(&mut p, &vec![vec![g]], lr).unwrap();
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let rho = rho_inf - 2.0 * f64::from(t) * b2.powi(t) / (1.0 - b2.powi(t));
            if rho > 4.0 {
                let r = ((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)).sqrt();
                theta -= lr * r * m_hat * (1.0 - b2.powi(t)).sqrt() / (v.sqrt() + eps);
            } else {
                theta -= lr * m_hat;
            }
            worst = worst.max((p.tensor(0).data[0] - theta).abs());
        }
    }
    let inf = RAdamConfig::default().rho_inf();
    outcome(
        worst < 1e-12 && (inf - 1999.0).abs() < 1e-9,
        format!("max deviation {worst:.1e} over 100 pairs x 10 steps, rho_inf {inf} (need < 1e-12, 1999)"),
    )
}

/// Criterion 7 config: default task, model and batch; the learning-rate
/// cycle is shortened to fit the 500k-sample budget.
fn desk_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.schedule.warmup_samples = 25_000;
    c.schedule.cycle_samples = 475_000;
    c.out_dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-desk-run");
    c
}

fn desk_run() -> (Outcome, Outcome) {
    let config = desk_config();
    let params = Model::new(config.model.clone()).unwrap().param_count();
    let out = config.out_dir.clone();
    let mut trainer = Trainer::new(config.clone()).unwrap();
    let mut last = None;
    trainer
        .run(&out, |p| {
            if let Progress::Eval(r) = p {
                eprintln!(
                    "  desk run @ {:>7}: acc {:.2} len {:.2} topk {:.2} ood {:.2} transition {:.3}",
                    r.samples,
                    r.metrics.in_dist.accuracy,
                    r.metrics.in_dist.mean_length,
                    r.metrics.in_dist.topk,
                    r.metrics.ood.accuracy,
                    r.transition_accuracy
                );
                last = Some(*r);
            }
        })
        .unwrap();
    let r = last.expect("the run ends with an evaluation");
    let rows: Vec<EvalRow> = read_rows(&out.join("eval.csv")).unwrap();
    let first = &rows[0];
    let trend = format!(
        "length {:.2} -> {:.2}, accuracy {:.2} -> {:.2}",
        first.len, r.metrics.in_dist.mean_length, first.acc, r.metrics.in_dist.accuracy
    );
    let transitions = r.transition_accuracy;
    let learning = outcome(
        params <= 500_000 && transitions >= 0.95 && r.metrics.in_dist.accuracy >= 0.80,
        format!(
            "{params} params, transition accuracy {transitions:.3} (need >= 0.95), trajectory accuracy {:.2} (need >= 0.80) at {} samples; {trend}",
            r.metrics.in_dist.accuracy, r.samples
        ),
    );
    let ood = outcome(
        r.metrics.ood.accuracy >= 0.5,
        format!(
            "trajectory accuracy {:.2} on n = {} (need >= 0.50)",
            r.metrics.ood.accuracy,
            config.ood_size()
        ),
    );
    (learning, ood)
}
