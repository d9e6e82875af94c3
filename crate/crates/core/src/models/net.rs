//! Linear and batch-normalized MLP networks over flat parameter slices.

use alloc::format;
use alloc::vec::Vec;

use crate::autodiff::{ParamVector, Real};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const HIDDEN: [usize; 3] = [32, 16, 8];

/// Batch-norm behaviour for one forward call.
pub enum NetMode<'a> {
    /// Normalize with running statistics.
    Eval,
    /// Normalize with batch statistics and fold them into the running
    /// statistics stored in `running` (a full copy of the parameter values).
    Train { running: &'a mut [f64] },
}

impl NetMode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, NetMode::Train { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Hidden {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

/// Offsets of an MLP's segments inside a [`ParamVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayout {
    hidden: Vec<Hidden>,
    out_w: usize,
    out_b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl MlpLayout {
    /// Appends the segments of an `n_in -> hidden... -> n_out` network.
    pub fn build(p: &mut ParamVector, prefix: &str, n_in: usize, hidden: &[usize], n_out: usize) -> Self {
        let mut layers = Vec::new();
        let mut prev = n_in;
        for (i, &h) in hidden.iter().enumerate() {
            let w = p.push_segment(&format!("{prefix}.l{i}.w"), h, prev, true);
            let b = p.push_segment(&format!("{prefix}.l{i}.b"), h, 1, true);
            let gamma = p.push_segment(&format!("{prefix}.bn{i}.gamma"), h, 1, true);
            let beta = p.push_segment(&format!("{prefix}.bn{i}.beta"), h, 1, true);
            let mean = p.push_segment(&format!("{prefix}.bn{i}.running_mean"), h, 1, false);
            let var = p.push_segment(&format!("{prefix}.bn{i}.running_var"), h, 1, false);
            layers.push(Hidden { n_in: prev, n_out: h, w, b, gamma, beta, mean, var });
            prev = h;
        }
        let out_w = p.push_segment(&format!("{prefix}.out.w"), n_out, prev, true);
        let out_b = p.push_segment(&format!("{prefix}.out.b"), n_out, 1, true);
        MlpLayout { hidden: layers, out_w, out_b, n_in, n_out }
    }

    /// Standard initialization: weights and biases uniform in
    /// `±1/sqrt(fan_in)`, batch-norm scale 1, shift 0, running variance 1.
    /// With `zero_output` the last layer starts at exactly zero.
    pub fn init(&self, p: &mut ParamVector, mut uniform: impl FnMut(f64) -> f64, zero_output: bool) {
        let v = &mut p.values;
        for l in &self.hidden {
            let bound = 1.0 / (l.n_in as f64).sqrt();
            v[l.w..l.w + l.n_in * l.n_out].iter_mut().for_each(|x| *x = uniform(bound));
            v[l.b..l.b + l.n_out].iter_mut().for_each(|x| *x = uniform(bound));
            v[l.gamma..l.gamma + l.n_out].iter_mut().for_each(|x| *x = 1.0);
            v[l.beta..l.beta + l.n_out].iter_mut().for_each(|x| *x = 0.0);
            v[l.mean..l.mean + l.n_out].iter_mut().for_each(|x| *x = 0.0);
            v[l.var..l.var + l.n_out].iter_mut().for_each(|x| *x = 1.0);
        }
        let fan_in = self.hidden.last().map_or(self.n_in, |l| l.n_out);
        let bound = 1.0 / (fan_in as f64).sqrt();
        for x in &mut v[self.out_w..self.out_w + fan_in * self.n_out] {
            *x = if zero_output { 0.0 } else { uniform(bound) };
        }
        for x in &mut v[self.out_b..self.out_b + self.n_out] {
            *x = if zero_output { 0.0 } else { uniform(bound) };
        }
    }

    /// Forward pass over a batch of input rows.
    ///
    /// Hidden layers are affine, batch norm, ReLU; the output layer is affine
    /// only. Train mode needs at least two rows.
    pub fn forward<S: Real>(&self, p: &[S], xs: &[Vec<S>], mode: &mut NetMode<'_>) -> Result<Vec<Vec<S>>> {
        let batch = xs.len();
        if batch == 0 {
            return Ok(Vec::new());
        }
        if mode.is_train() && batch < 2 {
            return Err(Error::Invalid("batch norm in train mode needs a batch of at least 2".into()));
        }
        for x in xs {
            if x.len() != self.n_in {
                return Err(Error::Dimension { expected: self.n_in, found: x.len(), what: "mlp input" });
            }
        }
        let mut acts: Vec<Vec<S>> = xs.to_vec();
        let inv_b = alloc::vec![1.0 / batch as f64; batch];
        for l in &self.hidden {
            let mut pre: Vec<Vec<S>> = (0..batch).map(|_| Vec::with_capacity(l.n_out)).collect();
            for u in 0..l.n_out {
                let w = &p[l.w + u * l.n_in..l.w + (u + 1) * l.n_in];
                for (row, x) in pre.iter_mut().zip(&acts) {
                    row.push(S::dot(w, x, p[l.b + u]));
                }
            }
            let mut next: Vec<Vec<S>> = (0..batch).map(|_| Vec::with_capacity(l.n_out)).collect();
            let mut column: Vec<S> = Vec::with_capacity(batch);
            for u in 0..l.n_out {
                let gamma = p[l.gamma + u];
                let beta = p[l.beta + u];
                match mode {
                    NetMode::Train { running } => {
                        column.clear();
                        column.extend(pre.iter().map(|r| r[u]));
                        let mean = S::weighted_sum(&column, &inv_b);
                        column.iter_mut().for_each(|h| *h = *h - mean);
                        let var = S::mean_square(&column);
                        let inv_std = var.lift(1.0) / (var + BN_EPS).sqrt();
                        let g = inv_std * gamma;
                        for (row, d) in next.iter_mut().zip(&column) {
                            row.push(S::dot(&[g], &[*d], beta).relu());
                        }
                        let unbiased = var.value() * batch as f64 / (batch - 1) as f64;
                        let m = &mut running[l.mean + u];
                        *m = (1.0 - BN_MOMENTUM) * *m + BN_MOMENTUM * mean.value();
                        let v = &mut running[l.var + u];
                        *v = (1.0 - BN_MOMENTUM) * *v + BN_MOMENTUM * unbiased;
                    }
                    NetMode::Eval => {
                        let mu = p[l.mean + u].value();
                        let inv_std = 1.0 / (p[l.var + u].value() + BN_EPS).sqrt();
                        let g = gamma * inv_std;
                        for (row, pr) in next.iter_mut().zip(&pre) {
                            row.push(S::dot(&[g], &[pr[u] - mu], beta).relu());
                        }
                    }
                }
            }
            acts = next;
        }
        let fan_in = self.hidden.last().map_or(self.n_in, |l| l.n_out);
        let out = acts
            .iter()
            .map(|x| {
                (0..self.n_out)
                    .map(|o| S::dot(&p[self.out_w + o * fan_in..self.out_w + (o + 1) * fan_in], x, p[self.out_b + o]))
                    .collect()
            })
            .collect();
        Ok(out)
    }
}

/// Offsets of a single affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayout {
    w: usize,
    b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl LinearLayout {
    pub fn build(p: &mut ParamVector, prefix: &str, n_in: usize, n_out: usize) -> Self {
        let w = p.push_segment(&format!("{prefix}.w"), n_out, n_in, true);
        let b = p.push_segment(&format!("{prefix}.b"), n_out, 1, true);
        LinearLayout { w, b, n_in, n_out }
    }

    pub fn init(&self, p: &mut ParamVector, mut uniform: impl FnMut(f64) -> f64) {
        let bound = 1.0 / (self.n_in.max(1) as f64).sqrt();
        p.values[self.w..self.b + self.n_out].iter_mut().for_each(|x| *x = uniform(bound));
    }

    /// `W x + b`.
    pub fn forward<S: Real>(&self, p: &[S], x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.n_in {
            return Err(Error::Dimension { expected: self.n_in, found: x.len(), what: "linear input" });
        }
        Ok((0..self.n_out)
            .map(|o| S::dot(&p[self.w + o * self.n_in..self.w + (o + 1) * self.n_in], x, p[self.b + o]))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn tiny() -> (ParamVector, MlpLayout) {
        let mut p = ParamVector::new();
        let m = MlpLayout::build(&mut p, "m", 2, &[2], 1);
        // l0.w (2x2), l0.b, gamma, beta, running mean/var, out.w (1x2), out.b
        p.values = vec![1.0, -1.0, 0.5, 2.0, 0.1, -0.2, 1.5, 0.8, 0.3, -0.4, 0.0, 0.0, 1.0, 1.0, 2.0, -3.0, 0.25];
        (p, m)
    }

    #[test]
    fn batch_norm_train_mode_by_hand() {
        let (p, m) = tiny();
        let xs = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, -1.0]];
        let mut running = p.values.clone();
        let out = m.forward(&p.values, &xs, &mut NetMode::Train { running: &mut running }).unwrap();

        let w = [[1.0, -1.0], [0.5, 2.0]];
        let b = [0.1, -0.2];
        let (gamma, beta) = ([1.5, 0.8], [0.3, -0.4]);
        let pre: Vec<[f64; 2]> = xs
            .iter()
            .map(|x| [w[0][0] * x[0] + w[0][1] * x[1] + b[0], w[1][0] * x[0] + w[1][1] * x[1] + b[1]])
            .collect();
        let mut act = [[0.0; 2]; 3];
        for u in 0..2 {
            let mean = pre.iter().map(|r| r[u]).sum::<f64>() / 3.0;
            let var = pre.iter().map(|r| (r[u] - mean) * (r[u] - mean)).sum::<f64>() / 3.0;
            for i in 0..3 {
                act[i][u] = (gamma[u] * (pre[i][u] - mean) / (var + BN_EPS).sqrt() + beta[u]).max(0.0);
            }
            assert!((running[10 + u] - BN_MOMENTUM * mean).abs() < 1e-12);
            assert!((running[12 + u] - (0.9 + BN_MOMENTUM * var * 1.5)).abs() < 1e-12);
        }
        for i in 0..3 {
            let expect = 2.0 * act[i][0] - 3.0 * act[i][1] + 0.25;
            assert!((out[i][0] - expect).abs() < 1e-12, "{} vs {expect}", out[i][0]);
        }
        assert_eq!(running[..10], p.values[..10]);
    }

    #[test]
    fn eval_mode_uses_running_statistics() {
        let (mut p, m) = tiny();
        p.values[10..14].copy_from_slice(&[0.5, -1.0, 4.0, 0.25]);
        let x = vec![0.3, -0.7];
        let out = m.forward(&p.values, core::slice::from_ref(&x), &mut NetMode::Eval).unwrap();
        let pre = [x[0] - x[1] + 0.1, 0.5 * x[0] + 2.0 * x[1] - 0.2];
        let a0 = (1.5 * (pre[0] - 0.5) / (4.0 + BN_EPS).sqrt() + 0.3).max(0.0);
        let a1 = (0.8 * (pre[1] + 1.0) / (0.25 + BN_EPS).sqrt() - 0.4).max(0.0);
        assert!((out[0][0] - (2.0 * a0 - 3.0 * a1 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn train_mode_needs_two_rows_and_right_width() {
        let (p, m) = tiny();
        let mut r = p.values.clone();
        assert!(m.forward(&p.values, &[vec![1.0, 2.0]], &mut NetMode::Train { running: &mut r }).is_err());
        assert!(m.forward(&p.values, &[vec![1.0]], &mut NetMode::Eval).is_err());
        assert!(m.forward::<f64>(&p.values, &[], &mut NetMode::Eval).unwrap().is_empty());
    }

    #[test]
    fn zero_output_init() {
        let mut p = ParamVector::new();
        let m = MlpLayout::build(&mut p, "m", 4, &HIDDEN, 3);
        let mut k = 0.0;
        m.init(
            &mut p,
            |b| {
                k += 0.37;
                (k % 1.0) * b
            },
            true,
        );
        let out = m.forward(&p.values, &[vec![1.0, -2.0, 0.5, 3.0], vec![0.0; 4]], &mut NetMode::Eval).unwrap();
        assert!(out.iter().flatten().all(|&v| v == 0.0));
        let gamma = p.get("m.bn1.gamma").unwrap();
        assert!(gamma.iter().all(|&g| g == 1.0));
        assert!(p.get("m.bn2.running_var").unwrap().iter().all(|&v| v == 1.0));
        assert!(!p.segment("m.bn0.running_mean").unwrap().learnable);
    }

    #[test]
    fn linear_layer_by_hand() {
        let mut p = ParamVector::new();
        let l = LinearLayout::build(&mut p, "lr", 2, 2);
        p.values = vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5];
        assert_eq!(l.forward(&p.values, &[1.0, -1.0]).unwrap(), vec![-0.5, -1.5]);
        assert!(l.forward(&p.values, &[1.0]).is_err());
    }
}
