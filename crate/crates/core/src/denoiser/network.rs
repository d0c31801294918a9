use super::params::{DenseShape, MlpShape, ParamLayout};
use super::{Activation, DenoiserConfig, DenoiserParams, GlobalFeatures, Scalar};
use crate::error::{Error, Result};
use crate::geometry::{knn_graph, Box3, NeighborGraph};

/// Borrowed view of one MLP inside a flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct MlpRef<'a, S> {
    pub params: &'a [S],
    pub shape: &'a MlpShape,
}

/// Activations saved by an MLP forward pass. `pre[l]` is the output of
/// dense layer `l` before its activation; `post[l]` the activated value for
/// every hidden layer.
struct MlpTrace<S> {
    pre: Vec<Vec<S>>,
    post: Vec<Vec<S>>,
}

impl<S: Scalar> MlpTrace<S> {
    fn output(&self) -> &[S] {
        &self.pre[self.pre.len() - 1]
    }
}

/// Inputs and intermediate values of one edge convolution.
struct ConvTrace<S> {
    node_in: Option<Vec<S>>,
    mlp: MlpTrace<S>,
    argmax: Vec<u32>,
    out: Vec<S>,
}

struct ForwardTrace<S> {
    n: usize,
    disp: Vec<S>,
    global: Vec<S>,
    convs: Vec<ConvTrace<S>>,
    out_in: Vec<S>,
    out_mlp: MlpTrace<S>,
}

fn dense<S: Scalar>(x: &[S], rows: usize, shape: &DenseShape, params: &[S]) -> Vec<S> {
    let mut y = Vec::with_capacity(rows * shape.fan_out);
    let bias = &params[shape.bias()];
    for _ in 0..rows {
        y.extend_from_slice(bias);
    }
    S::gemm(rows, shape.fan_in, shape.fan_out, x, false, &params[shape.weights()], false, &mut y, true);
    y
}

/// Run dense layers `start..` of `shape` on `z0`, the pre-activation output
/// of layer `start - 1` (or the raw input when `start == 0`).
fn mlp_tail<S: Scalar>(
    first_pre: Vec<S>,
    rows: usize,
    shape: &MlpShape,
    params: &[S],
    act: Activation,
) -> MlpTrace<S> {
    let mut pre = vec![first_pre];
    let mut post = Vec::new();
    for layer in &shape.layers[1..] {
        let a: Vec<S> = pre[pre.len() - 1].iter().map(|&z| act.apply(z)).collect();
        let z = dense(&a, rows, layer, params);
        post.push(a);
        pre.push(z);
    }
    MlpTrace { pre, post }
}

fn mlp_forward<S: Scalar>(x: &[S], rows: usize, shape: &MlpShape, params: &[S], act: Activation) -> MlpTrace<S> {
    let z0 = dense(x, rows, &shape.layers[0], params);
    mlp_tail(z0, rows, shape, params, act)
}

/// Backpropagate through layers `1..` of an MLP. Returns the gradient with
/// respect to the pre-activation output of layer 0.
fn mlp_tail_backward<S: Scalar>(
    trace: &MlpTrace<S>,
    mut d_out: Vec<S>,
    rows: usize,
    shape: &MlpShape,
    params: &[S],
    grads: &mut [S],
    act: Activation,
) -> Vec<S> {
    for l in (1..shape.layers.len()).rev() {
        let layer = &shape.layers[l];
        let a = &trace.post[l - 1];
        // dW += a^T dZ
        S::gemm(
            layer.fan_in,
            rows,
            layer.fan_out,
            a,
            true,
            &d_out,
            false,
            &mut grads[layer.weights()],
            true,
        );
        let db = &mut grads[layer.bias()];
        for row in d_out.chunks_exact(layer.fan_out) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        // dA = dZ W^T, then through the activation
        let mut d_a = vec![S::zero(); rows * layer.fan_in];
        S::gemm(
            rows,
            layer.fan_out,
            layer.fan_in,
            &d_out,
            false,
            &params[layer.weights()],
            true,
            &mut d_a,
            false,
        );
        for (d, &z) in d_a.iter_mut().zip(&trace.pre[l - 1]) {
            *d *= act.derivative(z);
        }
        d_out = d_a;
    }
    d_out
}

/// Backward through a whole MLP, returning the gradient of its input.
fn mlp_backward<S: Scalar>(
    x: &[S],
    trace: &MlpTrace<S>,
    d_out: Vec<S>,
    rows: usize,
    shape: &MlpShape,
    params: &[S],
    grads: &mut [S],
    act: Activation,
) -> Vec<S> {
    let d_z0 = mlp_tail_backward(trace, d_out, rows, shape, params, grads, act);
    let first = &shape.layers[0];
    S::gemm(first.fan_in, rows, first.fan_out, x, true, &d_z0, false, &mut grads[first.weights()], true);
    let db = &mut grads[first.bias()];
    for row in d_z0.chunks_exact(first.fan_out) {
        for (g, &d) in db.iter_mut().zip(row) {
            *g += d;
        }
    }
    let mut dx = vec![S::zero(); rows * first.fan_in];
    S::gemm(rows, first.fan_out, first.fan_in, &d_z0, false, &params[first.weights()], true, &mut dx, false);
    dx
}

/// Row blocks of the first conv-MLP weight matrix, matching the input
/// layout `[d (3) | f_i (h) | f_j - f_i (h) | g]`.
struct FirstLayerBlocks {
    w_d: std::ops::Range<usize>,
    w_a: std::ops::Range<usize>,
    w_b: std::ops::Range<usize>,
    w_g: std::ops::Range<usize>,
}

impl FirstLayerBlocks {
    fn new(layer: &DenseShape, h: usize, g: usize) -> Self {
        let o = layer.fan_out;
        let base = layer.offset;
        let w_d = base..base + 3 * o;
        let w_a = w_d.end..w_d.end + h * o;
        let w_b = w_a.end..w_a.end + h * o;
        let w_g = w_b.end..w_b.end + g * o;
        Self { w_d, w_a, w_b, w_g }
    }
}

/// Edge convolution with max pooling. The first linear map is split into a
/// per-edge displacement term plus per-node terms:
/// `W [d | f_i | f_j - f_i | g] = W_d d + (W_a - W_b) f_i + W_b f_j + W_g g`.
fn conv_forward<S: Scalar>(
    params: &[S],
    shape: &MlpShape,
    act: Activation,
    graph: &NeighborGraph<3>,
    disp: &[S],
    node: Option<(&[S], usize)>,
    global: &[S],
) -> Result<ConvTrace<S>> {
    let n = graph.n_nodes();
    let k = graph.k();
    let e = graph.n_edges();
    let first = &shape.layers[0];
    let h = node.map_or(0, |(_, h)| h);
    let expected_in = 3 + 2 * h + global.len();
    if first.fan_in != expected_in {
        return Err(Error::InvalidArgument(format!(
            "conv MLP expects {} inputs, edge features have {expected_in}",
            first.fan_in
        )));
    }
    if let Some((f, h)) = node {
        if f.len() != n * h {
            return Err(Error::InvalidArgument(format!(
                "node features have {} entries, expected {n} x {h}",
                f.len()
            )));
        }
    }
    let o = first.fan_out;
    let blocks = FirstLayerBlocks::new(first, h, global.len());

    // per-edge displacement term
    let mut z0 = vec![S::zero(); e * o];
    S::gemm(e, 3, o, disp, false, &params[blocks.w_d.clone()], false, &mut z0, false);

    // shared term: bias + W_g g
    let mut shared = params[first.bias()].to_vec();
    S::gemm(1, global.len(), o, global, false, &params[blocks.w_g.clone()], false, &mut shared, true);

    match node {
        None => {
            for row in z0.chunks_exact_mut(o) {
                for (z, &c) in row.iter_mut().zip(&shared) {
                    *z += c;
                }
            }
        }
        Some((f, h)) => {
            let w_a = &params[blocks.w_a.clone()];
            let w_b = &params[blocks.w_b.clone()];
            let diff: Vec<S> = w_a.iter().zip(w_b).map(|(&a, &b)| a - b).collect();
            let mut p = vec![S::zero(); n * o];
            S::gemm(n, h, o, f, false, &diff, false, &mut p, false);
            let mut q = vec![S::zero(); n * o];
            S::gemm(n, h, o, f, false, w_b, false, &mut q, false);
            for (i, p_row) in p.chunks_exact_mut(o).enumerate() {
                for (pv, &c) in p_row.iter_mut().zip(&shared) {
                    *pv += c;
                }
                for m in 0..k {
                    let edge = i * k + m;
                    let j = graph.targets()[edge];
                    let q_row = &q[j * o..(j + 1) * o];
                    let z_row = &mut z0[edge * o..(edge + 1) * o];
                    for ((z, &pv), &qv) in z_row.iter_mut().zip(p_row.iter()).zip(q_row) {
                        *z += pv + qv;
                    }
                }
            }
        }
    }

    let mlp = mlp_tail(z0, e, shape, params, act);
    let width = shape.fan_out();
    let edge_out = mlp.output();
    let mut out = vec![S::zero(); n * width];
    let mut argmax = vec![0u32; n * width];
    for i in 0..n {
        let base = i * k;
        let o_row = &mut out[i * width..(i + 1) * width];
        let a_row = &mut argmax[i * width..(i + 1) * width];
        o_row.copy_from_slice(&edge_out[base * width..(base + 1) * width]);
        for m in 1..k {
            let row = &edge_out[(base + m) * width..(base + m + 1) * width];
            for c in 0..width {
                // strict comparison keeps the earliest edge on ties
                if row[c] > o_row[c] {
                    o_row[c] = row[c];
                    a_row[c] = m as u32;
                }
            }
        }
    }

    Ok(ConvTrace {
        node_in: node.map(|(f, _)| f.to_vec()),
        mlp,
        argmax,
        out,
    })
}

/// Backward through one edge convolution. Returns the gradient with respect
/// to the input node features, if the layer had any.
fn conv_backward<S: Scalar>(
    trace: &ConvTrace<S>,
    d_out: &[S],
    params: &[S],
    grads: &mut [S],
    shape: &MlpShape,
    act: Activation,
    graph: &NeighborGraph<3>,
    disp: &[S],
    global: &[S],
    h: usize,
) -> Option<Vec<S>> {
    let n = graph.n_nodes();
    let k = graph.k();
    let e = graph.n_edges();
    let width = shape.fan_out();

    // max pool routes each component's gradient to its winning edge
    let mut d_edge = vec![S::zero(); e * width];
    for i in 0..n {
        for c in 0..width {
            let m = trace.argmax[i * width + c] as usize;
            d_edge[(i * k + m) * width + c] = d_out[i * width + c];
        }
    }
    let d_z0 = mlp_tail_backward(&trace.mlp, d_edge, e, shape, params, grads, act);

    let first = &shape.layers[0];
    let o = first.fan_out;
    let blocks = FirstLayerBlocks::new(first, h, global.len());
    S::gemm(3, e, o, disp, true, &d_z0, false, &mut grads[blocks.w_d.clone()], true);

    // gradient of the per-node term P_i (bias, W_g g and (W_a - W_b) f_i)
    let mut d_p = vec![S::zero(); n * o];
    for i in 0..n {
        let dp = &mut d_p[i * o..(i + 1) * o];
        for m in 0..k {
            let row = &d_z0[(i * k + m) * o..(i * k + m + 1) * o];
            for (a, &b) in dp.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
    let mut d_shared = vec![S::zero(); o];
    for row in d_p.chunks_exact(o) {
        for (a, &b) in d_shared.iter_mut().zip(row) {
            *a += b;
        }
    }
    for (g, &d) in grads[first.bias()].iter_mut().zip(&d_shared) {
        *g += d;
    }
    S::gemm(global.len(), 1, o, global, false, &d_shared, false, &mut grads[blocks.w_g.clone()], true);

    let f = trace.node_in.as_ref()?;
    let mut d_q = vec![S::zero(); n * o];
    for edge in 0..e {
        let j = graph.targets()[edge];
        let src = &d_z0[edge * o..(edge + 1) * o];
        for (a, &b) in d_q[j * o..(j + 1) * o].iter_mut().zip(src) {
            *a += b;
        }
    }
    // d(W_a - W_b) = f^T dP ; dW_b += f^T dQ
    let mut d_diff = vec![S::zero(); h * o];
    S::gemm(h, n, o, f, true, &d_p, false, &mut d_diff, false);
    let mut d_wb = vec![S::zero(); h * o];
    S::gemm(h, n, o, f, true, &d_q, false, &mut d_wb, false);
    for (g, &d) in grads[blocks.w_a.clone()].iter_mut().zip(&d_diff) {
        *g += d;
    }
    for ((g, &dq), &dd) in grads[blocks.w_b.clone()].iter_mut().zip(&d_wb).zip(&d_diff) {
        *g += dq - dd;
    }
    let w_a = &params[blocks.w_a.clone()];
    let w_b = &params[blocks.w_b.clone()];
    let diff: Vec<S> = w_a.iter().zip(w_b).map(|(&a, &b)| a - b).collect();
    let mut d_f = vec![S::zero(); n * h];
    S::gemm(n, o, h, &d_p, false, &diff, true, &mut d_f, false);
    S::gemm(n, o, h, &d_q, false, w_b, true, &mut d_f, true);
    Some(d_f)
}

/// One edge convolution over `graph`: for node `i`, the componentwise max over
/// neighbors `j` of `MLP([d_ij | f_i | f_j - f_i | g])`. Without node
/// features (the input layer) the edge input is `[d_ij | g]`.
pub fn pbc_conv<S: Scalar>(
    node_features: Option<(&[S], usize)>,
    graph: &NeighborGraph<3>,
    global: &[S],
    mlp: MlpRef<'_, S>,
    activation: Activation,
) -> Result<Vec<S>> {
    let disp = displacements_as::<S>(graph);
    Ok(conv_forward(mlp.params, mlp.shape, activation, graph, &disp, node_features, global)?.out)
}

fn displacements_as<S: Scalar>(graph: &NeighborGraph<3>) -> Vec<S> {
    graph
        .displacements()
        .iter()
        .flat_map(|d| d.iter().map(|&x| S::of(x)))
        .collect()
}

fn forward<S: Scalar>(
    graph: &NeighborGraph<3>,
    global: Vec<S>,
    params: &DenoiserParams<S>,
    layout: &ParamLayout,
) -> Result<ForwardTrace<S>> {
    let cfg = &params.config;
    let p = &params.values[..];
    let n = graph.n_nodes();
    let h = cfg.hidden;
    let act = cfg.activation;
    let disp = displacements_as::<S>(graph);
    let g_cat: &[S] = if cfg.concat_global { &global } else { &[] };

    let mut convs = Vec::with_capacity(cfg.n_layers + 1);
    let first = conv_forward(p, &layout.input_conv, act, graph, &disp, None, &global)?;
    let mut f = first.out.clone();
    convs.push(first);
    for shape in &layout.convs {
        let layer = conv_forward(p, shape, act, graph, &disp, Some((&f, h)), g_cat)?;
        if cfg.residual {
            for (a, &b) in f.iter_mut().zip(&layer.out) {
                *a += b;
            }
        } else {
            f.copy_from_slice(&layer.out);
        }
        convs.push(layer);
    }

    let width = g_cat.len() + h;
    let mut out_in = Vec::with_capacity(n * width);
    for row in f.chunks_exact(h) {
        out_in.extend_from_slice(g_cat);
        out_in.extend_from_slice(row);
    }
    let out_mlp = mlp_forward(&out_in, n, &layout.output, p, act);
    Ok(ForwardTrace {
        n,
        disp,
        global,
        convs,
        out_in,
        out_mlp,
    })
}

fn backward<S: Scalar>(
    trace: &ForwardTrace<S>,
    d_pred: Vec<S>,
    graph: &NeighborGraph<3>,
    params: &DenoiserParams<S>,
    layout: &ParamLayout,
    grads: &mut [S],
) {
    let cfg = &params.config;
    let p = &params.values[..];
    let h = cfg.hidden;
    let act = cfg.activation;
    let n = trace.n;
    let g_cat: &[S] = if cfg.concat_global { &trace.global } else { &[] };
    let width = g_cat.len() + h;

    let d_in = mlp_backward(&trace.out_in, &trace.out_mlp, d_pred, n, &layout.output, p, grads, act);
    let mut d_f: Vec<S> = d_in
        .chunks_exact(width)
        .flat_map(|row| row[g_cat.len()..].iter().copied())
        .collect();

    for (l, shape) in layout.convs.iter().enumerate().rev() {
        let layer = &trace.convs[l + 1];
        let d_node = conv_backward(layer, &d_f, p, grads, shape, act, graph, &trace.disp, g_cat, h)
            .expect("hidden conv layers consume node features");
        if cfg.residual {
            for (a, b) in d_f.iter_mut().zip(d_node) {
                *a += b;
            }
        } else {
            d_f = d_node;
        }
    }
    conv_backward(&trace.convs[0], &d_f, p, grads, &layout.input_conv, act, graph, &trace.disp, &trace.global, 0);
}

fn check_particle_count(n: usize, config: &DenoiserConfig) -> Result<()> {
    if n <= config.k_neighbors {
        return Err(Error::InvalidArgument(format!(
            "denoiser needs more than k = {} particles, got {n}",
            config.k_neighbors
        )));
    }
    Ok(())
}

/// Predicted noise for every particle. Positions must be wrapped in `bbox`.
pub fn predict_noise<S: Scalar>(
    positions: &[[f64; 3]],
    global: &GlobalFeatures,
    params: &DenoiserParams<S>,
    bbox: &Box3,
) -> Result<Vec<[f64; 3]>> {
    check_particle_count(positions.len(), &params.config)?;
    let graph = knn_graph(positions, params.config.k_neighbors, bbox)?;
    predict_noise_with_graph(&graph, global, params)
}

/// [`predict_noise`] on a prebuilt neighbor graph.
pub fn predict_noise_with_graph<S: Scalar>(
    graph: &NeighborGraph<3>,
    global: &GlobalFeatures,
    params: &DenoiserParams<S>,
) -> Result<Vec<[f64; 3]>> {
    check_particle_count(graph.n_nodes(), &params.config)?;
    if graph.k() != params.config.k_neighbors {
        return Err(Error::InvalidArgument(format!(
            "graph has k = {}, denoiser expects {}",
            graph.k(),
            params.config.k_neighbors
        )));
    }
    let layout = params.layout();
    let g = global.to_vec::<S>(&params.config)?;
    let trace = forward(graph, g, params, &layout)?;
    Ok(trace
        .out_mlp
        .output()
        .chunks_exact(3)
        .map(|r| [r[0].f64(), r[1].f64(), r[2].f64()])
        .collect())
}

/// One training item: noised positions, the global features used to noise
/// them, and the noise the network should recover.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub positions: Vec<[f64; 3]>,
    pub global: GlobalFeatures,
    pub target: Vec<[f64; 3]>,
}

/// Mean over items and particles of `|eps - eps_hat|^2`, with exact
/// gradients for every parameter.
pub fn loss_and_gradients<S: Scalar>(
    batch: &[TrainingExample],
    params: &DenoiserParams<S>,
    bbox: &Box3,
) -> Result<(f64, Vec<S>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let layout = params.layout();
    let mut grads = vec![S::zero(); layout.total];
    let mut loss = 0.0;
    let inv_b = 1.0 / batch.len() as f64;
    for item in batch {
        let n = item.positions.len();
        if item.target.len() != n {
            return Err(Error::InvalidArgument(format!(
                "target has {} rows for {n} particles",
                item.target.len()
            )));
        }
        check_particle_count(n, &params.config)?;
        let graph = knn_graph(&item.positions, params.config.k_neighbors, bbox)?;
        let g = item.global.to_vec::<S>(&params.config)?;
        let trace = forward(&graph, g, params, &layout)?;
        let pred = trace.out_mlp.output();
        let scale = inv_b / n as f64;
        let mut item_loss = 0.0;
        let mut d_pred = Vec::with_capacity(3 * n);
        for (p, t) in pred.chunks_exact(3).zip(&item.target) {
            for d in 0..3 {
                let r = p[d].f64() - t[d];
                item_loss += r * r;
                d_pred.push(S::of(2.0 * r * scale));
            }
        }
        if !item_loss.is_finite() {
            return Err(Error::Divergence {
                epoch: 0,
                detail: "non-finite loss in forward pass".into(),
                last_params: params.to_f64(),
            });
        }
        loss += item_loss * scale;
        backward(&trace, d_pred, &graph, params, &layout, &mut grads);
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::init_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_points(n: usize, l: f64, rng: &mut impl Rng) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| [rng.gen::<f64>() * l, rng.gen::<f64>() * l, rng.gen::<f64>() * l])
            .collect()
    }

    fn tiny_config() -> DenoiserConfig {
        DenoiserConfig {
            n_layers: 2,
            hidden: 4,
            k_neighbors: 3,
            conv_mlp_hidden: vec![4, 4],
            out_mlp_hidden: vec![4, 4],
            ..Default::default()
        }
    }

    /// Straight edge loop: build the full concatenated input for each edge and
    /// run the MLP on it row by row.
    fn naive_conv(
        node: Option<(&[f64], usize)>,
        graph: &NeighborGraph<3>,
        global: &[f64],
        params: &[f64],
        shape: &MlpShape,
        act: Activation,
    ) -> Vec<f64> {
        let width = shape.fan_out();
        let mut out = vec![f64::NEG_INFINITY; graph.n_nodes() * width];
        for (e, (i, j)) in graph.edges().enumerate() {
            let mut x: Vec<f64> = graph.displacements()[e].to_vec();
            if let Some((f, h)) = node {
                x.extend_from_slice(&f[i * h..(i + 1) * h]);
                x.extend((0..h).map(|c| f[j * h + c] - f[i * h + c]));
            }
            x.extend_from_slice(global);
            for (l, layer) in shape.layers.iter().enumerate() {
                let w = &params[layer.weights()];
                let b = &params[layer.bias()];
                let mut y = b.to_vec();
                for (a, xa) in x.iter().enumerate() {
                    for o in 0..layer.fan_out {
                        y[o] += xa * w[a * layer.fan_out + o];
                    }
                }
                if l + 1 < shape.layers.len() {
                    y.iter_mut().for_each(|v| *v = act.apply(*v));
                }
                x = y;
            }
            for c in 0..width {
                let slot = &mut out[i * width + c];
                *slot = slot.max(x[c]);
            }
        }
        out
    }

    #[test]
    fn conv_matches_edge_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bbox = Box3::cubic(3.0).unwrap();
        let cfg = tiny_config();
        let params: DenoiserParams<f64> = init_params(&cfg, 9).unwrap();
        let layout = params.layout();
        for _ in 0..5 {
            let pts = random_points(8, 3.0, &mut rng);
            let graph = knn_graph(&pts, 3, &bbox).unwrap();
            let feats: Vec<f64> = (0..8 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = [0.37];
            let fast = pbc_conv(
                Some((&feats, 4)),
                &graph,
                &g,
                MlpRef { params: &params.values, shape: &layout.convs[0] },
                cfg.activation,
            )
            .unwrap();
            let slow = naive_conv(Some((&feats, 4)), &graph, &g, &params.values, &layout.convs[0], cfg.activation);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
            let fast = pbc_conv(
                None,
                &graph,
                &g,
                MlpRef { params: &params.values, shape: &layout.input_conv },
                cfg.activation,
            )
            .unwrap();
            let slow = naive_conv(None, &graph, &g, &params.values, &layout.input_conv, cfg.activation);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_rejects_shape_mismatch() {
        let bbox = Box3::cubic(3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = random_points(8, 3.0, &mut rng);
        let graph = knn_graph(&pts, 3, &bbox).unwrap();
        let cfg = tiny_config();
        let params: DenoiserParams<f64> = init_params(&cfg, 9).unwrap();
        let layout = params.layout();
        let feats = vec![0.0; 8 * 5];
        let mlp = MlpRef { params: &params.values, shape: &layout.convs[0] };
        assert!(pbc_conv(Some((&feats, 5)), &graph, &[0.1], mlp, cfg.activation).is_err());
        assert!(pbc_conv(Some((&feats[..20], 4)), &graph, &[0.1], mlp, cfg.activation).is_err());
    }

    #[test]
    fn lattice_with_constant_features_gives_uniform_output() {
        let bbox = Box3::cubic(4.0).unwrap();
        let mut pts = Vec::new();
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    pts.push([x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5]);
                }
            }
        }
        let cfg = DenoiserConfig { k_neighbors: 6, ..tiny_config() };
        let params: DenoiserParams<f64> = init_params(&cfg, 2).unwrap();
        let layout = params.layout();
        let graph = knn_graph(&pts, 6, &bbox).unwrap();
        let feats = vec![0.25; 64 * 4];
        let out = pbc_conv(
            Some((&feats, 4)),
            &graph,
            &[0.5],
            MlpRef { params: &params.values, shape: &layout.convs[0] },
            cfg.activation,
        )
        .unwrap();
        for row in out.chunks_exact(4) {
            for (a, b) in row.iter().zip(&out[..4]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn prediction_shape_and_particle_count_check() {
        let cfg = DenoiserConfig { k_neighbors: 8, ..tiny_config() };
        let params: DenoiserParams<f32> = init_params(&cfg, 0).unwrap();
        let bbox = Box3::cubic(3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts = random_points(20, 3.0, &mut rng);
        let out = predict_noise(&pts, &GlobalFeatures::unconditional(0.3), &params, &bbox).unwrap();
        assert_eq!(out.len(), 20);
        assert!(predict_noise(&pts[..8], &GlobalFeatures::unconditional(0.3), &params, &bbox).is_err());
    }

    fn random_example(n: usize, l: f64, rng: &mut impl Rng) -> TrainingExample {
        TrainingExample {
            positions: random_points(n, l, rng),
            global: GlobalFeatures::unconditional(rng.gen()),
            target: (0..n)
                .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)])
                .collect(),
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let bbox = Box3::cubic(2.5).unwrap();
        let cfg = tiny_config();
        let params: DenoiserParams<f64> = init_params(&cfg, 5).unwrap();
        let batch = vec![random_example(10, 2.5, &mut rng), random_example(10, 2.5, &mut rng)];
        let (_, grads) = loss_and_gradients(&batch, &params, &bbox).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let idx = rng.gen_range(0..params.len());
            let h = 1e-4;
            // loss is O(1) and gradients O(1e-5); smaller steps drown in roundoff
            let mut plus = params.clone();
            plus.values[idx] += h;
            let mut minus = params.clone();
            minus.values[idx] -= h;
            let lp = loss_and_gradients(&batch, &plus, &bbox).unwrap().0;
            let lm = loss_and_gradients(&batch, &minus, &bbox).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            let err = (fd - grads[idx]).abs() / fd.abs().max(grads[idx].abs()).max(1e-6);
            worst = worst.max(err);
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn non_residual_and_no_concat_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let bbox = Box3::cubic(2.5).unwrap();
        let cfg = DenoiserConfig {
            residual: false,
            concat_global: false,
            activation: Activation::Tanh,
            conv_mlp_hidden: vec![],
            ..tiny_config()
        };
        let params: DenoiserParams<f64> = init_params(&cfg, 5).unwrap();
        let batch = vec![random_example(10, 2.5, &mut rng)];
        let (_, grads) = loss_and_gradients(&batch, &params, &bbox).unwrap();
        for idx in (0..params.len()).step_by(7) {
            let h = 1e-4;
            let mut plus = params.clone();
            plus.values[idx] += h;
            let mut minus = params.clone();
            minus.values[idx] -= h;
            let fd = (loss_and_gradients(&batch, &plus, &bbox).unwrap().0
                - loss_and_gradients(&batch, &minus, &bbox).unwrap().0)
                / (2.0 * h);
            let err = (fd - grads[idx]).abs() / fd.abs().max(grads[idx].abs()).max(1e-6);
            assert!(err < 1e-4, "param {idx}: fd {fd} vs {}", grads[idx]);
        }
    }

    #[test]
    fn planted_target_gives_zero_loss_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bbox = Box3::cubic(2.5).unwrap();
        let cfg = tiny_config();
        let params: DenoiserParams<f64> = init_params(&cfg, 1).unwrap();
        let mut item = random_example(10, 2.5, &mut rng);
        item.target = predict_noise(&item.positions, &item.global, &params, &bbox).unwrap();
        let (loss, grads) = loss_and_gradients(&[item], &params, &bbox).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn loss_independent_of_batch_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bbox = Box3::cubic(2.5).unwrap();
        let params: DenoiserParams<f64> = init_params(&tiny_config(), 1).unwrap();
        let batch: Vec<_> = (0..3).map(|_| random_example(10, 2.5, &mut rng)).collect();
        let reversed: Vec<_> = batch.iter().rev().cloned().collect();
        let a = loss_and_gradients(&batch, &params, &bbox).unwrap().0;
        let b = loss_and_gradients(&reversed, &params, &bbox).unwrap().0;
        assert!((a - b).abs() < 1e-14 * a);
    }

    #[test]
    fn empty_batch_rejected() {
        let bbox = Box3::cubic(2.5).unwrap();
        let params: DenoiserParams<f64> = init_params(&tiny_config(), 1).unwrap();
        assert!(loss_and_gradients(&[], &params, &bbox).is_err());
    }
}
