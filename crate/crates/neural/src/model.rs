//! The graph-conditioned image classifier.
//!
//! A message passing network embeds the candidate graph. The embedding
//! modulates a pre-activation residual CNN through FiLM after every group
//! norm. The pooled image embedding plus the terminal flag feed a small
//! head that emits one logit.

use grasp_core::{ColoredGraph, RasterImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::params::{Grads, ParamSet};
use crate::scalar::Scalar;
use crate::tape::{ConvGeom, Tape, Tensor, Var};
use crate::NeuralError;

/// Degrees above this share one embedding row.
pub const MAX_DEGREE_EMBEDDING: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub node_colors: usize,
    pub edge_colors: usize,
    /// Width of graph, image and head embeddings.
    pub hidden: usize,
    /// Message passing rounds.
    pub rounds: usize,
    pub image_size: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    /// Channels per residual stage; stages after the first halve the resolution.
    pub channels: Vec<usize>,
    pub blocks_per_stage: usize,
    pub norm_groups: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            node_colors: 2,
            edge_colors: 1,
            hidden: 64,
            rounds: 4,
            image_size: 64,
            stem_kernel: 4,
            stem_stride: 4,
            channels: vec![16, 32, 64],
            blocks_per_stage: 2,
            norm_groups: 8,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |msg: String| Err(NeuralError::Config(msg));
        if self.node_colors == 0 || self.edge_colors == 0 {
            return bad("color counts must be positive".into());
        }
        if self.hidden == 0 || self.channels.is_empty() || self.blocks_per_stage == 0 {
            return bad("hidden width, stages and blocks must be positive".into());
        }
        if self.norm_groups == 0 || self.channels.iter().any(|&c| c == 0 || c % self.norm_groups != 0) {
            return bad(format!("channels {:?} must be multiples of {} groups", self.channels, self.norm_groups));
        }
        if self.stem_stride == 0 || self.stem_kernel < self.stem_stride {
            return bad("stem kernel must cover its stride".into());
        }
        let mut size = self.stem_geom().out_checked(self.image_size);
        for _ in 1..self.channels.len() {
            size = size.and_then(|s| BLOCK_STRIDED.out_checked(s));
        }
        if size.is_none() {
            return bad(format!("image size {} too small for this trunk", self.image_size));
        }
        Ok(())
    }

    fn stem_geom(&self) -> ConvGeom {
        ConvGeom {
            kernel: self.stem_kernel,
            stride: self.stem_stride,
            pad: (self.stem_kernel - self.stem_stride).div_ceil(2),
        }
    }
}

const BLOCK_CONV: ConvGeom = ConvGeom {
    kernel: 3,
    stride: 1,
    pad: 1,
};

const BLOCK_STRIDED: ConvGeom = ConvGeom {
    kernel: 3,
    stride: 2,
    pad: 1,
};

const SHORTCUT: ConvGeom = ConvGeom {
    kernel: 1,
    stride: 2,
    pad: 0,
};

impl ConvGeom {
    fn out_checked(&self, size: usize) -> Option<usize> {
        (size + 2 * self.pad >= self.kernel).then(|| self.out_size(size)).filter(|&s| s > 0)
    }
}

#[derive(Clone, Copy, Debug)]
enum Init {
    Zeros,
    Ones,
    /// Normal with standard deviation `gain / sqrt(fan_in)`.
    Scaled { fan_in: usize, gain: f64 },
    Normal(f64),
}

#[derive(Clone, Debug)]
struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

#[derive(Clone, Copy, Debug)]
struct Lin {
    w: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Conv {
    w: usize,
    b: usize,
    geom: ConvGeom,
}

#[derive(Clone, Copy, Debug)]
struct Film {
    gamma: Lin,
    beta: Lin,
}

#[derive(Clone, Debug)]
struct Round {
    msg: [Lin; 2],
    update: [Lin; 2],
    norm: Norm,
}

#[derive(Clone, Debug)]
struct Block {
    norms: [Norm; 2],
    films: [Film; 2],
    convs: [Conv; 2],
    shortcut: Option<Conv>,
}

#[derive(Clone, Debug)]
struct Layout {
    node_embed: usize,
    edge_embed: usize,
    degree_embed: usize,
    empty_graph: usize,
    rounds: Vec<Round>,
    stem: Conv,
    blocks: Vec<Block>,
    final_norm: Norm,
    final_film: Film,
    image_proj: Lin,
    head_in: Lin,
    head_norm: Norm,
    head_out: Lin,
}

struct Builder {
    specs: Vec<Spec>,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>, init: Init) -> usize {
        self.specs.push(Spec { name, shape, init });
        self.specs.len() - 1
    }

    fn lin(&mut self, name: &str, i: usize, o: usize, gain: f64) -> Lin {
        Lin {
            w: self.add(format!("{name}.w"), vec![i, o], Init::Scaled { fan_in: i, gain }),
            b: self.add(format!("{name}.b"), vec![o], Init::Zeros),
        }
    }

    fn zero_lin(&mut self, name: &str, i: usize, o: usize) -> Lin {
        Lin {
            w: self.add(format!("{name}.w"), vec![i, o], Init::Zeros),
            b: self.add(format!("{name}.b"), vec![o], Init::Zeros),
        }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        Norm {
            g: self.add(format!("{name}.g"), vec![width], Init::Ones),
            b: self.add(format!("{name}.b"), vec![width], Init::Zeros),
        }
    }

    fn conv(&mut self, name: &str, i: usize, o: usize, geom: ConvGeom) -> Conv {
        let fan_in = i * geom.kernel * geom.kernel;
        Conv {
            w: self.add(
                format!("{name}.w"),
                vec![o, i, geom.kernel, geom.kernel],
                Init::Scaled {
                    fan_in,
                    gain: 2f64.sqrt(),
                },
            ),
            b: self.add(format!("{name}.b"), vec![o], Init::Zeros),
            geom,
        }
    }

    /// Zero projections so that FiLM starts as the identity.
    fn film(&mut self, name: &str, hidden: usize, channels: usize) -> Film {
        Film {
            gamma: self.zero_lin(&format!("{name}.gamma"), hidden, channels),
            beta: self.zero_lin(&format!("{name}.beta"), hidden, channels),
        }
    }
}

/// One classifier input.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub image: &'a RasterImage,
    pub graph: &'a ColoredGraph,
    pub terminal: bool,
}

/// Loss, logits and parameter gradients of one batch.
#[derive(Clone, Debug)]
pub struct LossAndGrad<T> {
    pub loss: T,
    pub logits: Vec<T>,
    pub grads: Grads<T>,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    specs: Vec<Spec>,
    layout: Layout,
}

const SILU_GAIN: f64 = 1.7;

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let d = config.hidden;
        let mut b = Builder { specs: Vec::new() };
        let node_embed = b.add("embed.node".into(), vec![config.node_colors, d], Init::Normal(1.0));
        let edge_embed = b.add("embed.edge".into(), vec![config.edge_colors, d], Init::Normal(1.0));
        let degree_embed = b.add("embed.degree".into(), vec![MAX_DEGREE_EMBEDDING + 1, d], Init::Normal(1.0));
        let empty_graph = b.add("gnn.empty".into(), vec![1, d], Init::Normal(1.0));
        let rounds = (0..config.rounds)
            .map(|r| Round {
                msg: [
                    b.lin(&format!("gnn.{r}.msg0"), 3 * d, d, SILU_GAIN),
                    b.lin(&format!("gnn.{r}.msg1"), d, d, 1.0),
                ],
                update: [
                    b.lin(&format!("gnn.{r}.upd0"), 2 * d, d, SILU_GAIN),
                    b.lin(&format!("gnn.{r}.upd1"), d, d, 1.0),
                ],
                norm: b.norm(&format!("gnn.{r}.norm"), d),
            })
            .collect();
        let stem = b.conv("cnn.stem", 3, config.channels[0], config.stem_geom());
        let mut blocks = Vec::new();
        let mut c_in = config.channels[0];
        for (s, &c) in config.channels.iter().enumerate() {
            for k in 0..config.blocks_per_stage {
                let name = format!("cnn.{s}.{k}");
                let down = s > 0 && k == 0;
                let first = if down { BLOCK_STRIDED } else { BLOCK_CONV };
                blocks.push(Block {
                    norms: [b.norm(&format!("{name}.gn0"), c_in), b.norm(&format!("{name}.gn1"), c)],
                    films: [b.film(&format!("{name}.film0"), d, c_in), b.film(&format!("{name}.film1"), d, c)],
                    convs: [
                        b.conv(&format!("{name}.conv0"), c_in, c, first),
                        b.conv(&format!("{name}.conv1"), c, c, BLOCK_CONV),
                    ],
                    shortcut: (down || c_in != c).then(|| {
                        let geom = if down {
                            SHORTCUT
                        } else {
                            ConvGeom {
                                kernel: 1,
                                stride: 1,
                                pad: 0,
                            }
                        };
                        b.conv(&format!("{name}.skip"), c_in, c, geom)
                    }),
                });
                c_in = c;
            }
        }
        let final_norm = b.norm("cnn.final.gn", c_in);
        let final_film = b.film("cnn.final.film", d, c_in);
        let image_proj = b.lin("cnn.proj", c_in, d, 1.0);
        let head_in = b.lin("head.in", d + 1, d, 1.0);
        let head_norm = b.norm("head.norm", d);
        let head_out = b.lin("head.out", d, 1, 1.0);
        let layout = Layout {
            node_embed,
            edge_embed,
            degree_embed,
            empty_graph,
            rounds,
            stem,
            blocks,
            final_norm,
            final_film,
            image_proj,
            head_in,
            head_norm,
            head_out,
        };
        Ok(Self {
            config,
            specs: b.specs,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.specs.iter().map(|s| s.shape.clone()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.specs.iter().map(|s| s.shape.iter().product::<usize>()).sum()
    }

    /// Fresh parameters drawn from `rng`.
    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet<T> {
        let tensors = self
            .specs
            .iter()
            .map(|s| {
                let len = s.shape.iter().product();
                let data = match s.init {
                    Init::Zeros => vec![T::zero(); len],
                    Init::Ones => vec![T::one(); len],
                    Init::Scaled { fan_in, gain } => normal(rng, len, gain / (fan_in as f64).sqrt()),
                    Init::Normal(std) => normal(rng, len, std),
                };
                Tensor::new(s.shape.clone(), data)
            })
            .collect();
        ParamSet::new(self.param_names(), tensors)
    }

    /// Checks that `params` has this model's names and shapes.
    pub fn check_params<T: Scalar>(&self, params: &ParamSet<T>) -> Result<(), NeuralError> {
        if params.len() != self.specs.len() {
            return Err(NeuralError::ParamMismatch(format!(
                "expected {} tensors, got {}",
                self.specs.len(),
                params.len()
            )));
        }
        for (s, (n, t)) in self.specs.iter().zip(params.names().iter().zip(params.tensors())) {
            if &s.name != n || s.shape != t.shape {
                return Err(NeuralError::ParamMismatch(format!(
                    "{n} {:?} where {} {:?} was expected",
                    t.shape, s.name, s.shape
                )));
            }
        }
        Ok(())
    }

    /// Pre-sigmoid logits, one per sample.
    pub fn logits<T: Scalar>(&self, params: &ParamSet<T>, samples: &[Sample<'_>]) -> Result<Vec<T>, NeuralError> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let pv = self.load(&mut tape, params)?;
        let out = self.forward(&mut tape, &pv, samples)?;
        Ok(tape.value(out).data.clone())
    }

    /// Mean label-smoothed binary cross-entropy and its exact gradient.
    pub fn loss_and_grad<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        samples: &[Sample<'_>],
        labels: &[bool],
        smoothing: f64,
    ) -> Result<LossAndGrad<T>, NeuralError> {
        assert_eq!(samples.len(), labels.len(), "one label per sample");
        if samples.is_empty() {
            return Err(NeuralError::EmptyBatch);
        }
        let mut tape = Tape::new();
        let pv = self.load(&mut tape, params)?;
        let logits = self.forward(&mut tape, &pv, samples)?;
        let targets: Vec<T> = labels.iter().map(|&y| T::of(smoothed_target(y, smoothing))).collect();
        let loss = tape.bce_with_logits(logits, &targets);
        let loss_value = tape.value(loss).data[0];
        let logit_values = tape.value(logits).data.clone();
        if !loss_value.is_finite() {
            let worst = logit_values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            return Err(NeuralError::NonFinite(format!(
                "loss {loss_value:?} over {} samples, largest |logit| {worst:?}, params finite: {}",
                samples.len(),
                params.all_finite()
            )));
        }
        let mut g = tape.backward(loss);
        let grads = pv
            .iter()
            .zip(params.tensors())
            .map(|(&v, t)| g.take(v).unwrap_or_else(|| vec![T::zero(); t.data.len()]))
            .collect();
        Ok(LossAndGrad {
            loss: loss_value,
            logits: logit_values,
            grads,
        })
    }

    /// Graph embeddings, one row of width `hidden` per graph.
    pub fn graph_embeddings<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        graphs: &[&ColoredGraph],
    ) -> Result<Vec<Vec<T>>, NeuralError> {
        let mut tape = Tape::new();
        let pv = self.load(&mut tape, params)?;
        let e = self.gnn(&mut tape, &pv, graphs)?;
        Ok(rows(tape.value(e)))
    }

    /// Image embeddings. With `conditioning` each image is modulated by the
    /// embedding of its graph; without it the trunk runs unmodulated.
    pub fn image_embeddings<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        images: &[&RasterImage],
        conditioning: Option<&[&ColoredGraph]>,
    ) -> Result<Vec<Vec<T>>, NeuralError> {
        let mut tape = Tape::new();
        let pv = self.load(&mut tape, params)?;
        let cond = match conditioning {
            Some(graphs) => {
                assert_eq!(graphs.len(), images.len());
                Some(self.gnn(&mut tape, &pv, graphs)?)
            }
            None => None,
        };
        let e = self.cnn(&mut tape, &pv, images, cond)?;
        Ok(rows(tape.value(e)))
    }

    fn load<T: Scalar>(&self, tape: &mut Tape<T>, params: &ParamSet<T>) -> Result<Vec<Var>, NeuralError> {
        self.check_params(params)?;
        Ok(params.tensors().iter().map(|t| tape.param(t.clone())).collect())
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, pv: &[Var], samples: &[Sample<'_>]) -> Result<Var, NeuralError> {
        let graphs: Vec<&ColoredGraph> = samples.iter().map(|s| s.graph).collect();
        let images: Vec<&RasterImage> = samples.iter().map(|s| s.image).collect();
        let g = self.gnn(tape, pv, &graphs)?;
        let img = self.cnn(tape, pv, &images, Some(g))?;
        let flags = tape.constant(Tensor::new(
            vec![samples.len(), 1],
            samples.iter().map(|s| if s.terminal { T::one() } else { T::zero() }).collect(),
        ));
        let l = &self.layout;
        let x = tape.concat(&[img, flags]);
        let x = self.linear(tape, pv, l.head_in, x);
        let x = tape.layer_norm(x, pv[l.head_norm.g], pv[l.head_norm.b]);
        let x = tape.silu(x);
        Ok(self.linear(tape, pv, l.head_out, x))
    }

    fn linear<T: Scalar>(&self, tape: &mut Tape<T>, pv: &[Var], lin: Lin, x: Var) -> Var {
        tape.linear(x, pv[lin.w], pv[lin.b])
    }

    fn mlp<T: Scalar>(&self, tape: &mut Tape<T>, pv: &[Var], layers: [Lin; 2], x: Var) -> Var {
        let h = self.linear(tape, pv, layers[0], x);
        let h = tape.silu(h);
        self.linear(tape, pv, layers[1], h)
    }

    fn gnn<T: Scalar>(&self, tape: &mut Tape<T>, pv: &[Var], graphs: &[&ColoredGraph]) -> Result<Var, NeuralError> {
        let l = &self.layout;
        let mut colors = Vec::new();
        let mut degrees = Vec::new();
        let mut segment = Vec::new();
        let (mut src, mut dst, mut edge_colors) = (Vec::new(), Vec::new(), Vec::new());
        for (gi, g) in graphs.iter().enumerate() {
            let offset = colors.len();
            for &c in g.node_colors() {
                if c as usize >= self.config.node_colors {
                    return Err(NeuralError::ColorOutOfRange {
                        kind: "node",
                        color: c,
                        limit: self.config.node_colors,
                    });
                }
                colors.push(c as usize);
                segment.push(gi);
            }
            degrees.extend(g.degrees().into_iter().map(|d| d.min(MAX_DEGREE_EMBEDDING)));
            for e in g.edges() {
                if e.color as usize >= self.config.edge_colors {
                    return Err(NeuralError::ColorOutOfRange {
                        kind: "edge",
                        color: e.color,
                        limit: self.config.edge_colors,
                    });
                }
                for (a, b) in [(e.u, e.v), (e.v, e.u)] {
                    src.push(offset + a);
                    dst.push(offset + b);
                    edge_colors.push(e.color as usize);
                }
            }
        }
        let nodes = colors.len();
        let c = tape.gather(pv[l.node_embed], &colors);
        let d = tape.gather(pv[l.degree_embed], &degrees);
        let mut h = tape.add(c, d);
        let e = tape.gather(pv[l.edge_embed], &edge_colors);
        for round in &l.rounds {
            let hs = tape.gather(h, &src);
            let hd = tape.gather(h, &dst);
            let m = tape.concat(&[hs, hd, e]);
            let m = self.mlp(tape, pv, round.msg, m);
            let agg = tape.scatter_add(m, &dst, nodes);
            let u = tape.concat(&[h, agg]);
            let u = self.mlp(tape, pv, round.update, u);
            let r = tape.add(h, u);
            h = tape.layer_norm(r, pv[round.norm.g], pv[round.norm.b]);
        }
        Ok(tape.segment_mean(h, &segment, graphs.len(), pv[l.empty_graph]))
    }

    fn modulate<T: Scalar>(&self, tape: &mut Tape<T>, pv: &[Var], norm: Norm, film: Film, x: Var, cond: Option<Var>) -> Var {
        let groups = self.config.norm_groups;
        let y = tape.group_norm(x, pv[norm.g], pv[norm.b], groups);
        let y = match cond {
            Some(g) => {
                let gamma = self.linear(tape, pv, film.gamma, g);
                let beta = self.linear(tape, pv, film.beta, g);
                tape.film(y, gamma, beta)
            }
            None => y,
        };
        tape.silu(y)
    }

    fn cnn<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        pv: &[Var],
        images: &[&RasterImage],
        cond: Option<Var>,
    ) -> Result<Var, NeuralError> {
        let size = self.config.image_size;
        let plane = size * size;
        let mut input = Vec::with_capacity(images.len() * 3 * plane);
        let scale = T::one() / T::of(255.0);
        for img in images {
            if img.width() != size || img.height() != size {
                return Err(NeuralError::ImageSize {
                    expected: size,
                    width: img.width(),
                    height: img.height(),
                });
            }
            let px = img.pixels();
            for c in 0..3 {
                input.extend((0..plane).map(|i| T::of(px[3 * i + c] as f64) * scale));
            }
        }
        let l = &self.layout;
        let x = tape.constant(Tensor::new(vec![images.len(), 3, size, size], input));
        let mut x = tape.conv2d(x, pv[l.stem.w], pv[l.stem.b], l.stem.geom);
        for block in &l.blocks {
            let pre = self.modulate(tape, pv, block.norms[0], block.films[0], x, cond);
            let y = tape.conv2d(pre, pv[block.convs[0].w], pv[block.convs[0].b], block.convs[0].geom);
            let y = self.modulate(tape, pv, block.norms[1], block.films[1], y, cond);
            let y = tape.conv2d(y, pv[block.convs[1].w], pv[block.convs[1].b], block.convs[1].geom);
            let skip = match block.shortcut {
                Some(s) => tape.conv2d(pre, pv[s.w], pv[s.b], s.geom),
                None => x,
            };
            x = tape.add(y, skip);
        }
        let x = self.modulate(tape, pv, l.final_norm, l.final_film, x, cond);
        let x = tape.avg_pool(x);
        Ok(self.linear(tape, pv, l.image_proj, x))
    }
}

/// `y (1 - eps) + eps / 2`.
pub fn smoothed_target(label: bool, smoothing: f64) -> f64 {
    let y = if label { 1.0 } else { 0.0 };
    y * (1.0 - smoothing) + smoothing / 2.0
}

fn normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Vec<T> {
    let dist = Normal::new(0.0, std).expect("valid deviation");
    (0..len).map(|_| T::of(dist.sample(rng))).collect()
}

fn rows<T: Scalar>(t: &Tensor<T>) -> Vec<Vec<T>> {
    let d = t.row_len();
    if d == 0 {
        return vec![Vec::new(); t.rows()];
    }
    t.data.chunks(d).map(<[T]>::to_vec).collect()
}
