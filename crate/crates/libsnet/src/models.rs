//! The three networks: residual denoiser, per-element calibration head, and
//! the fused end-to-end regressor.
//!
//! The denoiser predicts the corruption and subtracts it (`x_hat = y - R(y)`).
//! The head runs one independent branch per element; a branch never touches
//! another branch's parameters. The end-to-end net wires the denoiser trunk
//! (including its subtraction stage) into the head so one feed-forward pass
//! maps a raw spectrum to a composition estimate.
//!
//! Train-mode forwards return a tape of intermediates; `backward` consumes it
//! and yields a flat gradient vector aligned with `flatten_params`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    global_avg_pool, global_avg_pool_backward, relu, relu2, relu2_backward, relu_backward,
    BatchNorm1d, BnCache, Conv1d, Dense, Mode, Scalar, Tensor2, Tensor3,
};

/// Architecture hyperparameters shared by all three networks.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NetConfig {
    /// Total number of convolutions in the denoiser (first + body + last).
    pub depth_d: usize,
    /// Channel width of the body convolutions.
    pub width: usize,
    /// Convolution kernel size (odd).
    pub kernel: usize,
    /// Number of regressed elements `C`.
    pub num_elements: usize,
    /// Expected spectrum length `N`.
    pub input_len: usize,
}

impl NetConfig {
    /// Desk-scale default: `D=8`, width 16, `N=512`, `C=8`.
    pub fn desk() -> Self {
        Self {
            depth_d: 8,
            width: 16,
            kernel: 3,
            num_elements: 8,
            input_len: 512,
        }
    }

    /// Full-scale configuration: `D=20`, width 64, `N=5500`, `C=8`.
    pub fn full() -> Self {
        Self {
            depth_d: 20,
            width: 64,
            kernel: 3,
            num_elements: 8,
            input_len: 5500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth_d < 2 {
            return Err(Error::InvalidArgument(format!(
                "depth_d must be >= 2, got {}",
                self.depth_d
            )));
        }
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(Error::InvalidArgument(format!(
                "kernel must be odd and positive, got {}",
                self.kernel
            )));
        }
        if self.width == 0 || self.num_elements == 0 || self.input_len == 0 {
            return Err(Error::InvalidArgument(
                "width, num_elements and input_len must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `depth_d * (kernel - 1) + 1` bins seen by one output bin.
    pub fn receptive_field(&self) -> usize {
        self.depth_d * (self.kernel - 1) + 1
    }
}

/// Width of the per-branch convolution in the calibration head.
pub const BRANCH_CONV_CHANNELS: usize = 4;
/// Hidden width of the per-branch dense stage.
pub const BRANCH_HIDDEN: usize = 16;

fn check_signal_batch<F: Scalar>(x: &Tensor3<F>, input_len: usize, what: &'static str) -> Result<()> {
    if x.channels != 1 {
        return Err(Error::LengthMismatch {
            context: "input channels",
            expected: 1,
            got: x.channels,
        });
    }
    if x.len != input_len {
        return Err(Error::LengthMismatch {
            context: what,
            expected: input_len,
            got: x.len,
        });
    }
    if x.batch == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

fn ensure_finite<F: Scalar>(t: &Tensor3<F>, what: &'static str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

// ---------------------------------------------------------------------------
// Residual denoiser (modules 1 and 2)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct BodyBlock<F> {
    conv: Conv1d<F>,
    bn: BatchNorm1d<F>,
}

/// Residual denoiser: first conv + ReLU, `depth_d - 2` conv/BN/ReLU blocks,
/// and a final conv whose output is the corruption estimate.
#[derive(Debug, Clone)]
pub struct PreprocNet<F> {
    cfg: NetConfig,
    first: Conv1d<F>,
    body: Vec<BodyBlock<F>>,
    last: Conv1d<F>,
}

/// Intermediates of one train-mode denoiser pass.
pub struct PreprocTape<F> {
    y: Tensor3<F>,
    first_out: Tensor3<F>,
    blocks: Vec<BlockTape<F>>,
    last_in: Tensor3<F>,
}

struct BlockTape<F> {
    conv_in: Tensor3<F>,
    bn_cache: BnCache<F>,
    bn_out: Tensor3<F>,
}

impl<F: Scalar> PreprocNet<F> {
    pub fn init<R: Rng>(cfg: NetConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let first = Conv1d::kaiming(1, cfg.width, cfg.kernel, true, rng);
        let body = (0..cfg.depth_d - 2)
            .map(|_| BodyBlock {
                conv: Conv1d::kaiming(cfg.width, cfg.width, cfg.kernel, false, rng),
                bn: BatchNorm1d::new(cfg.width),
            })
            .collect();
        let last = Conv1d::kaiming(cfg.width, 1, cfg.kernel, true, rng);
        Ok(Self {
            cfg,
            first,
            body,
            last,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// Zero the final convolution: turns the net into the identity denoiser
    /// (`z_hat = 0`). Useful as a baseline and in tests.
    pub fn zero_last(&mut self) {
        self.last.weights.fill(F::zero());
        if let Some(b) = &mut self.last.bias {
            b.fill(F::zero());
        }
    }

    /// Eval-mode pass: returns `(z_hat, x_hat)` with `x_hat = y - z_hat`.
    pub fn forward_eval(&self, y: &Tensor3<F>) -> Result<(Tensor3<F>, Tensor3<F>)> {
        check_signal_batch(y, self.cfg.input_len, "denoiser input length")?;
        let mut h = relu(&self.first.forward(y));
        for block in &self.body {
            let a = block.conv.forward(&h);
            let n = block.bn.forward_eval(&a);
            h = relu(&n);
        }
        let z_hat = self.last.forward(&h);
        ensure_finite(&z_hat, "denoiser eval output")?;
        let x_hat = y.sub(&z_hat);
        Ok((z_hat, x_hat))
    }

    /// Train-mode pass (batch statistics, running stats updated).
    pub fn forward_train(
        &mut self,
        y: &Tensor3<F>,
    ) -> Result<(Tensor3<F>, Tensor3<F>, PreprocTape<F>)> {
        check_signal_batch(y, self.cfg.input_len, "denoiser input length")?;
        if y.batch < 2 {
            return Err(Error::InvalidArgument(
                "degenerate batch statistics: train-mode forward needs batch >= 2".into(),
            ));
        }
        let first_out = self.first.forward(y);
        let mut h = relu(&first_out);
        let mut blocks = Vec::with_capacity(self.body.len());
        for block in &mut self.body {
            let conv_in = h;
            let conv_out = block.conv.forward(&conv_in);
            let (bn_out, cache) = block.bn.forward(&conv_out, Mode::Train);
            drop(conv_out);
            let bn_cache = cache.expect("train mode produces a cache");
            h = relu(&bn_out);
            blocks.push(BlockTape {
                conv_in,
                bn_cache,
                bn_out,
            });
        }
        let z_hat = self.last.forward(&h);
        ensure_finite(&z_hat, "denoiser train output")?;
        let x_hat = y.sub(&z_hat);
        let tape = PreprocTape {
            y: y.clone(),
            first_out,
            blocks,
            last_in: h,
        };
        Ok((z_hat, x_hat, tape))
    }

    /// Backpropagate `d loss / d z_hat`; returns `(grad_y, flat_grads)` with
    /// `flat_grads` aligned with [`PreprocNet::flatten_params`].
    pub fn backward(&self, tape: &PreprocTape<F>, grad_zhat: &Tensor3<F>) -> (Tensor3<F>, Vec<F>) {
        let (g_last_in, last_grads) = self.last.backward(&tape.last_in, grad_zhat);
        let mut g = g_last_in;
        let mut block_grads = Vec::with_capacity(self.body.len());
        for (block, bt) in self.body.iter().zip(&tape.blocks).rev() {
            let g_bn_out = relu_backward(&bt.bn_out, &g);
            let (g_conv_out, bn_grads) = block.bn.backward(&bt.bn_cache, &g_bn_out);
            let (g_conv_in, conv_grads) = block.conv.backward(&bt.conv_in, &g_conv_out);
            block_grads.push((conv_grads, bn_grads));
            g = g_conv_in;
        }
        block_grads.reverse();
        let g_first_out = relu_backward(&tape.first_out, &g);
        let (grad_y, first_grads) = self.first.backward(&tape.y, &g_first_out);

        let mut flat = Vec::with_capacity(self.param_count());
        flat.extend_from_slice(&first_grads.weights);
        flat.extend_from_slice(first_grads.bias.as_ref().expect("first conv has bias"));
        for (conv_grads, bn_grads) in &block_grads {
            flat.extend_from_slice(&conv_grads.weights);
            flat.extend_from_slice(&bn_grads.gamma);
            flat.extend_from_slice(&bn_grads.beta);
        }
        flat.extend_from_slice(&last_grads.weights);
        flat.extend_from_slice(last_grads.bias.as_ref().expect("last conv has bias"));
        (grad_y, flat)
    }

    pub fn param_count(&self) -> usize {
        let mut n = self.first.param_count() + self.last.param_count();
        for b in &self.body {
            n += b.conv.param_count() + b.bn.param_count();
        }
        n
    }

    /// Trainable parameters in declaration order: first conv (w, b), each
    /// body block (conv w, gamma, beta), last conv (w, b).
    pub fn flatten_params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.first.weights);
        out.extend_from_slice(self.first.bias.as_ref().expect("first conv has bias"));
        for b in &self.body {
            out.extend_from_slice(&b.conv.weights);
            out.extend_from_slice(&b.bn.gamma);
            out.extend_from_slice(&b.bn.beta);
        }
        out.extend_from_slice(&self.last.weights);
        out.extend_from_slice(self.last.bias.as_ref().expect("last conv has bias"));
        out
    }

    pub fn load_params(&mut self, params: &[F]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                context: "denoiser parameter vector",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut cursor = Cursor::new(params);
        cursor.take_into(&mut self.first.weights);
        cursor.take_into(self.first.bias.as_mut().expect("first conv has bias"));
        for b in &mut self.body {
            cursor.take_into(&mut b.conv.weights);
            cursor.take_into(&mut b.bn.gamma);
            cursor.take_into(&mut b.bn.beta);
        }
        cursor.take_into(&mut self.last.weights);
        cursor.take_into(self.last.bias.as_mut().expect("last conv has bias"));
        debug_assert!(cursor.exhausted());
        Ok(())
    }

    /// Full state (parameters plus batch-norm running statistics) as `f64`,
    /// used by model serialization.
    pub fn state_blocks(&self) -> Vec<(String, Vec<f64>)> {
        let mut blocks = Vec::new();
        push_block(&mut blocks, "first.weights", &self.first.weights);
        push_block(
            &mut blocks,
            "first.bias",
            self.first.bias.as_ref().expect("bias"),
        );
        for (i, b) in self.body.iter().enumerate() {
            push_block(&mut blocks, &format!("body{i}.conv.weights"), &b.conv.weights);
            push_block(&mut blocks, &format!("body{i}.bn.gamma"), &b.bn.gamma);
            push_block(&mut blocks, &format!("body{i}.bn.beta"), &b.bn.beta);
            push_block(
                &mut blocks,
                &format!("body{i}.bn.running_mean"),
                &b.bn.running_mean,
            );
            push_block(
                &mut blocks,
                &format!("body{i}.bn.running_var"),
                &b.bn.running_var,
            );
        }
        push_block(&mut blocks, "last.weights", &self.last.weights);
        push_block(
            &mut blocks,
            "last.bias",
            self.last.bias.as_ref().expect("bias"),
        );
        blocks
    }

    pub fn load_state_blocks(&mut self, blocks: &[(String, Vec<f64>)]) -> Result<()> {
        let mut map = BlockReader::new(blocks);
        map.read_into("first.weights", &mut self.first.weights)?;
        map.read_into("first.bias", self.first.bias.as_mut().expect("bias"))?;
        for i in 0..self.body.len() {
            let b = &mut self.body[i];
            map.read_into(&format!("body{i}.conv.weights"), &mut b.conv.weights)?;
            map.read_into(&format!("body{i}.bn.gamma"), &mut b.bn.gamma)?;
            map.read_into(&format!("body{i}.bn.beta"), &mut b.bn.beta)?;
            map.read_into(&format!("body{i}.bn.running_mean"), &mut b.bn.running_mean)?;
            map.read_into(&format!("body{i}.bn.running_var"), &mut b.bn.running_var)?;
        }
        map.read_into("last.weights", &mut self.last.weights)?;
        map.read_into("last.bias", self.last.bias.as_mut().expect("bias"))?;
        Ok(())
    }

    /// Layer views used by the fast inference engine.
    pub(crate) fn layers_for_inference(&self) -> (&Conv1d<F>, Vec<(&Conv1d<F>, &BatchNorm1d<F>)>, &Conv1d<F>) {
        (
            &self.first,
            self.body.iter().map(|b| (&b.conv, &b.bn)).collect(),
            &self.last,
        )
    }
}

fn push_block<F: Scalar>(blocks: &mut Vec<(String, Vec<f64>)>, name: &str, data: &[F]) {
    blocks.push((name.to_string(), data.iter().map(|v| v.as_f64()).collect()));
}

struct BlockReader<'a> {
    blocks: &'a [(String, Vec<f64>)],
}

impl<'a> BlockReader<'a> {
    fn new(blocks: &'a [(String, Vec<f64>)]) -> Self {
        Self { blocks }
    }

    fn read_into<F: Scalar>(&mut self, name: &str, dst: &mut [F]) -> Result<()> {
        let (_, data) = self
            .blocks
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::ModelFormat(format!("missing parameter block `{name}`")))?;
        if data.len() != dst.len() {
            return Err(Error::ModelFormat(format!(
                "parameter block `{name}` has length {}, expected {}",
                data.len(),
                dst.len()
            )));
        }
        for (d, &s) in dst.iter_mut().zip(data) {
            *d = F::from_f64(s);
        }
        Ok(())
    }
}

struct Cursor<'a, F> {
    data: &'a [F],
}

impl<'a, F: Scalar> Cursor<'a, F> {
    fn new(data: &'a [F]) -> Self {
        Self { data }
    }

    fn take_into(&mut self, dst: &mut [F]) {
        let (head, rest) = self.data.split_at(dst.len());
        dst.copy_from_slice(head);
        self.data = rest;
    }

    fn exhausted(&self) -> bool {
        self.data.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Calibration head (module 3)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct CalibBranch<F> {
    conv: Conv1d<F>,
    fc1: Dense<F>,
    fc2: Dense<F>,
}

/// One independent regression branch per element: conv + ReLU, global
/// average pooling, then a small dense stack.
#[derive(Debug, Clone)]
pub struct CalibHead<F> {
    cfg: NetConfig,
    branches: Vec<CalibBranch<F>>,
}

/// Intermediates of one head pass.
pub struct CalibTape<F> {
    x: Tensor3<F>,
    branches: Vec<BranchTape<F>>,
}

struct BranchTape<F> {
    conv_out: Tensor3<F>,
    pooled: Tensor2<F>,
    fc1_out: Tensor2<F>,
    fc1_act: Tensor2<F>,
}

impl<F: Scalar> CalibHead<F> {
    pub fn init<R: Rng>(cfg: NetConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let branches = (0..cfg.num_elements)
            .map(|_| CalibBranch {
                conv: Conv1d::kaiming(1, BRANCH_CONV_CHANNELS, cfg.kernel, true, rng),
                fc1: Dense::kaiming(BRANCH_CONV_CHANNELS, BRANCH_HIDDEN, rng),
                fc2: Dense::kaiming(BRANCH_HIDDEN, 1, rng),
            })
            .collect();
        Ok(Self { cfg, branches })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    /// Swap two branches; outputs permute identically (used in tests).
    pub fn swap_branches(&mut self, a: usize, b: usize) {
        self.branches.swap(a, b);
    }

    /// Zero every parameter of branch `k` (used in tests).
    pub fn zero_branch(&mut self, k: usize) {
        let br = &mut self.branches[k];
        br.conv.weights.fill(F::zero());
        if let Some(b) = &mut br.conv.bias {
            b.fill(F::zero());
        }
        br.fc1.weights.fill(F::zero());
        br.fc1.bias.fill(F::zero());
        br.fc2.weights.fill(F::zero());
        br.fc2.bias.fill(F::zero());
    }

    fn forward_impl(&self, x: &Tensor3<F>, mut tape: Option<&mut Vec<BranchTape<F>>>) -> Tensor2<F> {
        let mut out = Tensor2::zeros(x.batch, self.branches.len());
        for (k, branch) in self.branches.iter().enumerate() {
            let conv_out = branch.conv.forward(x);
            let act = relu(&conv_out);
            let pooled = global_avg_pool(&act);
            let fc1_out = branch.fc1.forward(&pooled);
            let fc1_act = relu2(&fc1_out);
            let v = branch.fc2.forward(&fc1_act);
            for b in 0..x.batch {
                out.row_mut(b)[k] = v.row(b)[0];
            }
            if let Some(tape) = tape.as_deref_mut() {
                tape.push(BranchTape {
                    conv_out,
                    pooled,
                    fc1_out,
                    fc1_act,
                });
            }
        }
        out
    }

    /// Composition estimates, one row per batch item, `C` columns, oxide
    /// wt.% units, unclamped.
    pub fn forward_eval(&self, x: &Tensor3<F>) -> Result<Tensor2<F>> {
        check_signal_batch(x, self.cfg.input_len, "head input length")?;
        let out = self.forward_impl(x, None);
        if !out.all_finite() {
            return Err(Error::NonFinite("head output".into()));
        }
        Ok(out)
    }

    pub fn forward_train(&self, x: &Tensor3<F>) -> Result<(Tensor2<F>, CalibTape<F>)> {
        check_signal_batch(x, self.cfg.input_len, "head input length")?;
        let mut branches = Vec::with_capacity(self.branches.len());
        let out = self.forward_impl(x, Some(&mut branches));
        if !out.all_finite() {
            return Err(Error::NonFinite("head output".into()));
        }
        Ok((
            out,
            CalibTape {
                x: x.clone(),
                branches,
            },
        ))
    }

    /// Backpropagate `d loss / d output`; returns `(grad_x, flat_grads)`.
    pub fn backward(&self, tape: &CalibTape<F>, grad_out: &Tensor2<F>) -> (Tensor3<F>, Vec<F>) {
        assert_eq!(
            (grad_out.rows, grad_out.cols),
            (tape.x.batch, self.branches.len()),
            "head backward grad shape"
        );
        let mut grad_x = Tensor3::zeros(tape.x.batch, 1, tape.x.len);
        let mut flat = Vec::with_capacity(self.param_count());
        for (k, (branch, bt)) in self.branches.iter().zip(&tape.branches).enumerate() {
            let mut g2 = Tensor2::zeros(grad_out.rows, 1);
            for b in 0..grad_out.rows {
                g2.row_mut(b)[0] = grad_out.row(b)[k];
            }
            let (g_fc1_act, fc2_grads) = branch.fc2.backward(&bt.fc1_act, &g2);
            let g_fc1_out = relu2_backward(&bt.fc1_out, &g_fc1_act);
            let (g_pooled, fc1_grads) = branch.fc1.backward(&bt.pooled, &g_fc1_out);
            let g_act = global_avg_pool_backward(&g_pooled, tape.x.len);
            let g_conv_out = relu_backward(&bt.conv_out, &g_act);
            let (g_x, conv_grads) = branch.conv.backward(&tape.x, &g_conv_out);
            for (dst, src) in grad_x.data_mut().iter_mut().zip(g_x.data()) {
                *dst = *dst + *src;
            }
            flat.extend_from_slice(&conv_grads.weights);
            flat.extend_from_slice(conv_grads.bias.as_ref().expect("branch conv has bias"));
            flat.extend_from_slice(&fc1_grads.weights);
            flat.extend_from_slice(&fc1_grads.bias);
            flat.extend_from_slice(&fc2_grads.weights);
            flat.extend_from_slice(&fc2_grads.bias);
        }
        (grad_x, flat)
    }

    pub fn param_count(&self) -> usize {
        self.branches
            .iter()
            .map(|b| b.conv.param_count() + b.fc1.param_count() + b.fc2.param_count())
            .sum()
    }

    pub fn flatten_params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.param_count());
        for b in &self.branches {
            out.extend_from_slice(&b.conv.weights);
            out.extend_from_slice(b.conv.bias.as_ref().expect("branch conv has bias"));
            out.extend_from_slice(&b.fc1.weights);
            out.extend_from_slice(&b.fc1.bias);
            out.extend_from_slice(&b.fc2.weights);
            out.extend_from_slice(&b.fc2.bias);
        }
        out
    }

    pub fn load_params(&mut self, params: &[F]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                context: "head parameter vector",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut cursor = Cursor::new(params);
        for b in &mut self.branches {
            cursor.take_into(&mut b.conv.weights);
            cursor.take_into(b.conv.bias.as_mut().expect("branch conv has bias"));
            cursor.take_into(&mut b.fc1.weights);
            cursor.take_into(&mut b.fc1.bias);
            cursor.take_into(&mut b.fc2.weights);
            cursor.take_into(&mut b.fc2.bias);
        }
        debug_assert!(cursor.exhausted());
        Ok(())
    }

    pub fn state_blocks(&self) -> Vec<(String, Vec<f64>)> {
        let mut blocks = Vec::new();
        for (k, b) in self.branches.iter().enumerate() {
            push_block(&mut blocks, &format!("branch{k}.conv.weights"), &b.conv.weights);
            push_block(
                &mut blocks,
                &format!("branch{k}.conv.bias"),
                b.conv.bias.as_ref().expect("bias"),
            );
            push_block(&mut blocks, &format!("branch{k}.fc1.weights"), &b.fc1.weights);
            push_block(&mut blocks, &format!("branch{k}.fc1.bias"), &b.fc1.bias);
            push_block(&mut blocks, &format!("branch{k}.fc2.weights"), &b.fc2.weights);
            push_block(&mut blocks, &format!("branch{k}.fc2.bias"), &b.fc2.bias);
        }
        blocks
    }

    pub fn load_state_blocks(&mut self, blocks: &[(String, Vec<f64>)]) -> Result<()> {
        let mut map = BlockReader::new(blocks);
        for k in 0..self.branches.len() {
            let b = &mut self.branches[k];
            map.read_into(&format!("branch{k}.conv.weights"), &mut b.conv.weights)?;
            map.read_into(
                &format!("branch{k}.conv.bias"),
                b.conv.bias.as_mut().expect("bias"),
            )?;
            map.read_into(&format!("branch{k}.fc1.weights"), &mut b.fc1.weights)?;
            map.read_into(&format!("branch{k}.fc1.bias"), &mut b.fc1.bias)?;
            map.read_into(&format!("branch{k}.fc2.weights"), &mut b.fc2.weights)?;
            map.read_into(&format!("branch{k}.fc2.bias"), &mut b.fc2.bias)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// End-to-end network (modules 1-3)
// ---------------------------------------------------------------------------

/// Denoiser trunk (with its subtraction stage) feeding the calibration head.
#[derive(Debug, Clone)]
pub struct EndToEndNet<F> {
    pub trunk: PreprocNet<F>,
    pub head: CalibHead<F>,
}

pub struct EndToEndTape<F> {
    trunk: PreprocTape<F>,
    head: CalibTape<F>,
}

impl<F: Scalar> EndToEndNet<F> {
    pub fn init<R: Rng>(cfg: NetConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            trunk: PreprocNet::init(cfg.clone(), rng)?,
            head: CalibHead::init(cfg, rng)?,
        })
    }

    pub fn config(&self) -> &NetConfig {
        self.trunk.config()
    }

    /// Single pass raw spectrum batch -> composition batch.
    pub fn forward_eval(&self, y: &Tensor3<F>) -> Result<Tensor2<F>> {
        let (_, x_hat) = self.trunk.forward_eval(y)?;
        self.head.forward_eval(&x_hat)
    }

    pub fn forward_train(&mut self, y: &Tensor3<F>) -> Result<(Tensor2<F>, EndToEndTape<F>)> {
        let (_, x_hat, trunk_tape) = self.trunk.forward_train(y)?;
        let (out, head_tape) = self.head.forward_train(&x_hat)?;
        Ok((
            out,
            EndToEndTape {
                trunk: trunk_tape,
                head: head_tape,
            },
        ))
    }

    /// Gradients flow through the head, the subtraction (`x_hat = y - z_hat`)
    /// and the trunk jointly.
    pub fn backward(&self, tape: &EndToEndTape<F>, grad_out: &Tensor2<F>) -> Vec<F> {
        let (grad_xhat, head_grads) = self.head.backward(&tape.head, grad_out);
        let grad_zhat = grad_xhat.neg();
        let (_, trunk_grads) = self.trunk.backward(&tape.trunk, &grad_zhat);
        let mut flat = trunk_grads;
        flat.extend_from_slice(&head_grads);
        flat
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.head.param_count()
    }

    /// Theta_3 = trunk parameters followed by head parameters.
    pub fn flatten_params(&self) -> Vec<F> {
        let mut out = self.trunk.flatten_params();
        out.extend_from_slice(&self.head.flatten_params());
        out
    }

    pub fn load_params(&mut self, params: &[F]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                context: "end-to-end parameter vector",
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let split = self.trunk.param_count();
        self.trunk.load_params(&params[..split])?;
        self.head.load_params(&params[split..])
    }

    pub fn state_blocks(&self) -> Vec<(String, Vec<f64>)> {
        let mut blocks: Vec<(String, Vec<f64>)> = self
            .trunk
            .state_blocks()
            .into_iter()
            .map(|(n, v)| (format!("trunk.{n}"), v))
            .collect();
        blocks.extend(
            self.head
                .state_blocks()
                .into_iter()
                .map(|(n, v)| (format!("head.{n}"), v)),
        );
        blocks
    }

    pub fn load_state_blocks(&mut self, blocks: &[(String, Vec<f64>)]) -> Result<()> {
        let trunk_blocks: Vec<(String, Vec<f64>)> = blocks
            .iter()
            .filter_map(|(n, v)| {
                n.strip_prefix("trunk.")
                    .map(|s| (s.to_string(), v.clone()))
            })
            .collect();
        let head_blocks: Vec<(String, Vec<f64>)> = blocks
            .iter()
            .filter_map(|(n, v)| n.strip_prefix("head.").map(|s| (s.to_string(), v.clone())))
            .collect();
        self.trunk.load_state_blocks(&trunk_blocks)?;
        self.head.load_state_blocks(&head_blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn tiny_cfg() -> NetConfig {
        NetConfig {
            depth_d: 4,
            width: 6,
            kernel: 3,
            num_elements: 3,
            input_len: 32,
        }
    }

    fn random_batch(cfg: &NetConfig, batch: usize, seed: u64) -> Tensor3<f64> {
        let mut rng = substream(seed, 9);
        let data = (0..batch * cfg.input_len)
            .map(|_| rand::Rng::gen_range(&mut rng, 0.0..1.0))
            .collect();
        Tensor3::from_vec(batch, 1, cfg.input_len, data)
    }

    #[test]
    fn zero_last_conv_makes_identity_denoiser() {
        for (d, w) in [(2usize, 4usize), (4, 6), (8, 16), (5, 3)] {
            let cfg = NetConfig {
                depth_d: d,
                width: w,
                kernel: 3,
                num_elements: 2,
                input_len: 24,
            };
            let mut rng = substream(5, 2);
            let mut net = PreprocNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
            net.zero_last();
            let y = random_batch(&cfg, 2, 3);
            let (z_hat, x_hat) = net.forward_eval(&y).unwrap();
            assert!(z_hat.data().iter().all(|&v| v == 0.0));
            assert_eq!(x_hat.data(), y.data(), "x_hat must equal y bitwise");
        }
    }

    #[test]
    fn output_length_matches_input_for_random_configs() {
        let mut seed_rng = substream(100, 2);
        for _ in 0..20 {
            let cfg = NetConfig {
                depth_d: 2 + rand::Rng::gen_range(&mut seed_rng, 0..6usize),
                width: 1 + rand::Rng::gen_range(&mut seed_rng, 0..8usize),
                kernel: 3,
                num_elements: 1 + rand::Rng::gen_range(&mut seed_rng, 0..4usize),
                input_len: 4 + rand::Rng::gen_range(&mut seed_rng, 0..60usize),
            };
            let mut rng = substream(7, 2);
            let net = PreprocNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
            let y = random_batch(&cfg, 2, 11);
            let (z_hat, x_hat) = net.forward_eval(&y).unwrap();
            assert_eq!(z_hat.shape(), (2, 1, cfg.input_len));
            assert_eq!(x_hat.shape(), (2, 1, cfg.input_len));
        }
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let cfg = tiny_cfg();
        let mut rng = substream(1, 2);
        let net = PreprocNet::<f64>::init(cfg, &mut rng).unwrap();
        let y = Tensor3::<f64>::zeros(1, 1, 16);
        assert!(matches!(
            net.forward_eval(&y),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn head_with_zero_weights_predicts_final_bias() {
        let cfg = tiny_cfg();
        let mut rng = substream(2, 2);
        let mut head = CalibHead::<f64>::init(cfg.clone(), &mut rng).unwrap();
        for (k, want) in [(0usize, 1.5), (1, -2.0), (2, 0.25)] {
            head.zero_branch(k);
            head.branches[k].fc2.bias[0] = want;
        }
        let x = random_batch(&cfg, 3, 8);
        let out = head.forward_eval(&x).unwrap();
        for b in 0..3 {
            assert_eq!(out.row(b), &[1.5, -2.0, 0.25]);
        }
    }

    #[test]
    fn permuting_branches_permutes_outputs() {
        let cfg = tiny_cfg();
        let mut rng = substream(3, 2);
        let head = CalibHead::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let x = random_batch(&cfg, 2, 4);
        let base = head.forward_eval(&x).unwrap();
        let mut permuted = head.clone();
        permuted.swap_branches(0, 2);
        let out = permuted.forward_eval(&x).unwrap();
        for b in 0..2 {
            assert_eq!(out.row(b)[0], base.row(b)[2]);
            assert_eq!(out.row(b)[2], base.row(b)[0]);
            assert_eq!(out.row(b)[1], base.row(b)[1]);
        }
    }

    #[test]
    fn zeroing_one_branch_changes_only_that_output() {
        let cfg = tiny_cfg();
        let mut rng = substream(4, 2);
        let head = CalibHead::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let x = random_batch(&cfg, 2, 5);
        let base = head.forward_eval(&x).unwrap();
        let mut edited = head.clone();
        edited.zero_branch(1);
        let out = edited.forward_eval(&x).unwrap();
        for b in 0..2 {
            assert_eq!(out.row(b)[0], base.row(b)[0]);
            assert_eq!(out.row(b)[2], base.row(b)[2]);
            assert_eq!(out.row(b)[1], 0.0);
        }
    }

    #[test]
    fn end_to_end_equals_two_stage_composition_bitwise() {
        let cfg = tiny_cfg();
        let mut rng = substream(6, 2);
        let net = EndToEndNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let y = random_batch(&cfg, 2, 6);
        let fused = net.forward_eval(&y).unwrap();
        let (_, x_hat) = net.trunk.forward_eval(&y).unwrap();
        let staged = net.head.forward_eval(&x_hat).unwrap();
        assert_eq!(fused.data(), staged.data(), "must agree bitwise");
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let cfg = tiny_cfg();
        let mut rng = substream(8, 2);
        let net = EndToEndNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let y = random_batch(&cfg, 2, 7);
        let a = net.forward_eval(&y).unwrap();
        let b = net.forward_eval(&y).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn flatten_load_roundtrip_reproduces_outputs_bitwise() {
        let cfg = tiny_cfg();
        let mut rng = substream(9, 2);
        let mut net = EndToEndNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let y = random_batch(&cfg, 2, 10);
        let before = net.forward_eval(&y).unwrap();
        let params = net.flatten_params();
        assert_eq!(params.len(), net.param_count());
        net.load_params(&params).unwrap();
        let after = net.forward_eval(&y).unwrap();
        assert_eq!(before.data(), after.data());

        let wrong = vec![0.0; params.len() + 1];
        assert!(net.load_params(&wrong).is_err());
    }

    #[test]
    fn desk_config_param_count_matches_hand_sum() {
        let cfg = NetConfig::desk();
        let mut rng = substream(10, 2);
        let net = PreprocNet::<f64>::init(cfg, &mut rng).unwrap();
        // first: 16*1*3 + 16; body: 6 * (16*16*3 + 2*16); last: 1*16*3 + 1
        let expect = (16 * 3 + 16) + 6 * (16 * 16 * 3 + 32) + (16 * 3 + 1);
        assert_eq!(expect, 4913);
        assert_eq!(net.param_count(), expect);
    }

    #[test]
    fn full_config_param_count_matches_analytic_sum() {
        let cfg = NetConfig::full();
        let mut rng = substream(11, 2);
        let net = PreprocNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
        let expect = (64 * 3 + 64) + 18 * (64 * 64 * 3 + 2 * 64) + (64 * 3 + 1);
        assert_eq!(net.param_count(), expect);
        assert_eq!(expect, 223_937);
        assert_eq!(cfg.receptive_field(), 41);
    }

    #[test]
    fn state_blocks_roundtrip_preserves_running_stats() {
        let cfg = tiny_cfg();
        let mut rng = substream(12, 2);
        let mut net = PreprocNet::<f64>::init(cfg.clone(), &mut rng).unwrap();
        // push some training data through so running stats move
        let y = random_batch(&cfg, 4, 13);
        let _ = net.forward_train(&y).unwrap();
        let blocks = net.state_blocks();
        let mut fresh = PreprocNet::<f64>::init(cfg.clone(), &mut substream(99, 2)).unwrap();
        fresh.load_state_blocks(&blocks).unwrap();
        let (za, xa) = net.forward_eval(&y).unwrap();
        let (zb, xb) = fresh.forward_eval(&y).unwrap();
        assert_eq!(za.data(), zb.data());
        assert_eq!(xa.data(), xb.data());
    }
}
