//! Numerical pieces of the training recipe: softmax, label smoothing,
//! cross-entropy, cosine learning-rate decay, early stopping, epoch step
//! counts, validation splitting, and the separable-convolution identity.
//!
//! None of this trains anything. It exists so the recipe's arithmetic can be
//! checked and inspected.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 4;

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::param("logits", "need at least one entry"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("logits", "entries must be finite"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedLabel {
    pub distribution: [f64; NUM_CLASSES],
    pub epsilon: f64,
}

/// `(1 - epsilon) * onehot(index) + epsilon / 4`.
pub fn smooth_label(index: usize, epsilon: f64) -> Result<SmoothedLabel> {
    if index >= NUM_CLASSES {
        return Err(Error::param("index", format!("{index} is not a class index")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::param("epsilon", format!("{epsilon} is outside [0, 1]")));
    }
    let base = epsilon / NUM_CLASSES as f64;
    let mut distribution = [base; NUM_CLASSES];
    distribution[index] += 1.0 - epsilon;
    Ok(SmoothedLabel {
        distribution,
        epsilon,
    })
}

const LOG_FLOOR: f64 = 1e-12;

/// `-sum(target_k * ln(max(predicted_k, 1e-12)))`, skipping zero targets.
pub fn cross_entropy(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::param(
            "predicted",
            format!("length {} does not match target length {}", predicted.len(), target.len()),
        ));
    }
    let loss = target
        .iter()
        .zip(predicted)
        .filter(|(&t, _)| t != 0.0)
        .map(|(&t, &p)| -t * p.max(LOG_FLOOR).ln())
        .sum::<f64>();
    Ok(loss.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    initial_lr: f64,
    decay_steps: u64,
    alpha: f64,
}

impl ScheduleParams {
    pub fn new(initial_lr: f64, decay_steps: u64, alpha: f64) -> Result<Self> {
        if !(initial_lr.is_finite() && initial_lr > 0.0) {
            return Err(Error::param("initial_lr", format!("{initial_lr} must be positive")));
        }
        if decay_steps == 0 {
            return Err(Error::param("decay_steps", "must be positive"));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("{alpha} is outside [0, 1)")));
        }
        Ok(ScheduleParams {
            initial_lr,
            decay_steps,
            alpha,
        })
    }

    pub fn initial_lr(&self) -> f64 {
        self.initial_lr
    }

    pub fn decay_steps(&self) -> u64 {
        self.decay_steps
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Half-cosine from `initial_lr` down to `alpha * initial_lr`, flat afterwards.
pub fn cosine_decay_lr(params: &ScheduleParams, step: u64) -> f64 {
    let s = step.min(params.decay_steps) as f64 / params.decay_steps as f64;
    let cosine = 0.5 * (1.0 + (PI * s).cos());
    params.initial_lr * ((1.0 - params.alpha) * cosine + params.alpha)
}

pub const DEFAULT_PATIENCE: u32 = 3;

/// Early stopping on a metric that should increase (validation accuracy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopState {
    pub best_metric: f64,
    /// 1-based epoch of `best_metric`; 0 before any update.
    pub best_epoch: u32,
    pub epochs_seen: u32,
    pub epochs_since_improve: u32,
    pub patience: u32,
    pub stopped: bool,
}

impl EarlyStopState {
    pub fn new(patience: u32) -> Result<Self> {
        if patience == 0 {
            return Err(Error::param("patience", "must be positive"));
        }
        Ok(EarlyStopState {
            best_metric: f64::NEG_INFINITY,
            best_epoch: 0,
            epochs_seen: 0,
            epochs_since_improve: 0,
            patience,
            stopped: false,
        })
    }

    /// Only a strict improvement resets the counter; ties count against patience.
    pub fn update(self, epoch_metric: f64) -> EarlyStopState {
        let mut next = self;
        next.epochs_seen += 1;
        if epoch_metric > self.best_metric {
            next.best_metric = epoch_metric;
            next.best_epoch = next.epochs_seen;
            next.epochs_since_improve = 0;
        } else {
            next.epochs_since_improve += 1;
        }
        next.stopped = next.epochs_since_improve >= next.patience;
        next
    }
}

pub fn epoch_steps(total_images: u64, batch_size: u64) -> Result<u64> {
    if total_images == 0 {
        return Err(Error::param("total_images", "must be positive"));
    }
    if batch_size == 0 {
        return Err(Error::param("batch_size", "must be positive"));
    }
    Ok(total_images.div_ceil(batch_size))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassSplit {
    pub class_name: String,
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Number of validation items for a class of `n`: `floor(fraction * n)`.
pub fn validation_count(n: usize, fraction: f64) -> usize {
    // absorb representation error such as 0.29 * 100 = 28.999999999999996
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Per class, the lexicographically last `floor(fraction * n)` items are
/// held out for validation.
pub fn validation_split<S: AsRef<str>>(
    classes: &[(String, Vec<S>)],
    fraction: f64,
) -> Result<Vec<ClassSplit>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param("fraction", format!("{fraction} is outside (0, 1)")));
    }
    Ok(classes
        .iter()
        .map(|(name, items)| {
            let mut sorted: Vec<String> = items.iter().map(|s| s.as_ref().to_owned()).collect();
            sorted.sort();
            let cut = sorted.len() - validation_count(sorted.len(), fraction);
            let validation = sorted.split_off(cut);
            ClassSplit {
                class_name: name.clone(),
                train: sorted,
                validation,
            }
        })
        .collect())
}

/// Dense row-major 2-D grid of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::param(
                "grid",
                format!("{rows}x{cols} grid needs {} values, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Grid::new(rows, cols, data)
    }

    /// Outer product `column * row^T`, i.e. the rank-1 kernel.
    pub fn outer(column: &[f64], row: &[f64]) -> Result<Self> {
        Grid::from_fn(column.len(), row.len(), |r, c| column[r] * row[c])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn max_abs_diff(&self, other: &Grid) -> Result<f64> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::param("grid", "shapes differ"));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

fn check_odd(n: usize, name: &'static str) -> Result<()> {
    if n.is_multiple_of(2) {
        return Err(Error::param(name, format!("kernel size {n} must be odd")));
    }
    Ok(())
}

/// Valid (unpadded) cross-correlation with a square odd-sized kernel.
pub fn conv2d(image: &Grid, kernel: &Grid) -> Result<Grid> {
    if kernel.rows != kernel.cols {
        return Err(Error::param("kernel", "must be square"));
    }
    let n = kernel.rows;
    check_odd(n, "kernel")?;
    if image.rows < n || image.cols < n {
        return Err(Error::param("image", format!("must be at least {n}x{n}")));
    }
    let (out_r, out_c) = (image.rows - n + 1, image.cols - n + 1);
    Grid::from_fn(out_r, out_c, |y, x| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += kernel.at(i, j) * image.at(y + i, x + j);
            }
        }
        acc
    })
}

/// Vertical pass with an n x 1 kernel.
pub fn conv_columns(image: &Grid, column: &[f64]) -> Result<Grid> {
    let n = column.len();
    check_odd(n, "column")?;
    if image.rows < n {
        return Err(Error::param("image", format!("needs at least {n} rows")));
    }
    Grid::from_fn(image.rows - n + 1, image.cols, |y, x| {
        column.iter().enumerate().map(|(i, &u)| u * image.at(y + i, x)).sum()
    })
}

/// Horizontal pass with a 1 x n kernel.
pub fn conv_rows(image: &Grid, row: &[f64]) -> Result<Grid> {
    let n = row.len();
    check_odd(n, "row")?;
    if image.cols < n {
        return Err(Error::param("image", format!("needs at least {n} columns")));
    }
    Grid::from_fn(image.rows, image.cols - n + 1, |y, x| {
        row.iter().enumerate().map(|(j, &v)| v * image.at(y, x + j)).sum()
    })
}

/// Max absolute deviation between the direct n x n pass with `column * row^T`
/// and the column pass followed by the row pass.
pub fn separable_equivalence(column: &[f64], row: &[f64], image: &Grid) -> Result<f64> {
    if column.len() != row.len() {
        return Err(Error::param("row", "column and row kernels must have equal length"));
    }
    let direct = conv2d(image, &Grid::outer(column, row)?)?;
    let factored = conv_rows(&conv_columns(image, column)?, row)?;
    direct.max_abs_diff(&factored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_examples() {
        let u = softmax(&[0.0; 4]).unwrap();
        assert!(u.iter().all(|&p| close(p, 0.25, 1e-15)));
        let p = softmax(&[0.0, 0.0, 0.0, 3f64.ln()]).unwrap();
        for (got, want) in p.iter().zip([1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5]) {
            assert!(close(*got, want, 1e-15));
        }
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[1.0, f64::NAN]).is_err());
        assert!(softmax(&[f64::INFINITY]).is_err());
        // large logits stay finite thanks to the max shift
        let big = softmax(&[1000.0, 1000.0]).unwrap();
        assert!(close(big[0], 0.5, 1e-15));
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth_label(3, 0.0).unwrap().distribution, [0.0, 0.0, 0.0, 1.0]);
        let d = smooth_label(3, 0.4).unwrap().distribution;
        for (got, want) in d.iter().zip([0.1, 0.1, 0.1, 0.7]) {
            assert!(close(*got, want, 1e-15));
        }
        for i in 0..4 {
            assert_eq!(smooth_label(i, 1.0).unwrap().distribution, [0.25; 4]);
        }
        assert!(smooth_label(0, 1.5).is_err());
        assert!(smooth_label(0, -0.1).is_err());
        assert!(smooth_label(4, 0.1).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let one_hot = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(cross_entropy(&one_hot, &one_hot).unwrap(), 0.0);
        let u = [0.25; 4];
        assert!(close(cross_entropy(&u, &u).unwrap(), 4f64.ln(), 1e-12));
        let e = std::f64::consts::E;
        let p = [0.0, 1.0 / e, 1.0 - 1.0 / e, 0.0];
        assert!(close(cross_entropy(&one_hot, &p).unwrap(), 1.0, 1e-12));
        assert!(cross_entropy(&[1.0], &[0.5, 0.5]).is_err());
        // zero prediction on the true class is clamped, not infinite
        assert!(close(cross_entropy(&one_hot, &[1.0, 0.0, 0.0, 0.0]).unwrap(), -(1e-12f64).ln(), 1e-9));
    }

    #[test]
    fn schedule_examples() {
        let p = ScheduleParams::new(0.1, 100, 0.0).unwrap();
        assert_eq!(cosine_decay_lr(&p, 0), 0.1);
        assert!(close(cosine_decay_lr(&p, 50), 0.05, 1e-15));
        assert!(close(cosine_decay_lr(&p, 100), 0.0, 1e-15));
        assert!(close(cosine_decay_lr(&p, 10_000), 0.0, 1e-15));
        let floored = ScheduleParams::new(0.1, 100, 0.1).unwrap();
        assert!(close(cosine_decay_lr(&floored, 100), 0.01, 1e-15));
        assert!(close(cosine_decay_lr(&floored, 250), 0.01, 1e-15));
        assert!(ScheduleParams::new(0.0, 10, 0.0).is_err());
        assert!(ScheduleParams::new(0.1, 0, 0.0).is_err());
        assert!(ScheduleParams::new(0.1, 10, 1.0).is_err());
    }

    #[test]
    fn early_stop_trace() {
        let mut s = EarlyStopState::new(3).unwrap();
        let metrics = [0.5, 0.6, 0.7, 0.65, 0.64, 0.63];
        for (i, m) in metrics.iter().enumerate() {
            s = s.update(*m);
            assert_eq!(s.stopped, i == 5, "after update {}", i + 1);
        }
        assert_eq!(s.best_epoch, 3);
        assert_eq!(s.best_metric, 0.7);

        let mut s = EarlyStopState::new(2).unwrap();
        let stops: Vec<bool> = (0..3)
            .map(|_| {
                s = s.update(0.5);
                s.stopped
            })
            .collect();
        assert_eq!(stops, [false, false, true]);

        let mut s = EarlyStopState::new(1).unwrap();
        for i in 0..50 {
            s = s.update(f64::from(i));
            assert!(!s.stopped);
        }
        assert!(EarlyStopState::new(0).is_err());
    }

    #[test]
    fn epoch_step_examples() {
        assert_eq!(epoch_steps(7200, 32).unwrap(), 225);
        assert_eq!(epoch_steps(1, 32).unwrap(), 1);
        assert_eq!(epoch_steps(100, 32).unwrap(), 4);
        assert!(epoch_steps(0, 32).is_err());
        assert!(epoch_steps(10, 0).is_err());
    }

    #[test]
    fn split_examples() {
        let ten: Vec<String> = (0..10).map(|i| format!("img_{i:02}.png")).collect();
        let three: Vec<String> = ten[..3].to_vec();
        let split = validation_split(
            &[("a".to_owned(), ten.clone()), ("b".to_owned(), three), ("c".to_owned(), vec![])],
            0.2,
        )
        .unwrap();
        assert_eq!((split[0].train.len(), split[0].validation.len()), (8, 2));
        assert_eq!(split[0].validation, ["img_08.png", "img_09.png"]);
        assert_eq!((split[1].train.len(), split[1].validation.len()), (3, 0));
        assert!(split[2].train.is_empty() && split[2].validation.is_empty());
        assert_eq!(validation_count(100, 0.29), 29);
        assert!(validation_split::<String>(&[], 0.0).is_err());
        assert!(validation_split::<String>(&[], 1.0).is_err());
    }

    #[test]
    fn conv_examples() {
        let img = Grid::from_fn(5, 6, |r, c| (r * 10 + c) as f64).unwrap();
        let unit = Grid::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(conv2d(&img, &unit).unwrap(), img);

        let mut delta = vec![0.0; 9];
        delta[4] = 1.0;
        let crop = conv2d(&img, &Grid::new(3, 3, delta).unwrap()).unwrap();
        assert_eq!((crop.rows(), crop.cols()), (3, 4));
        assert_eq!(crop.at(0, 0), img.at(1, 1));
        assert_eq!(crop.at(2, 3), img.at(3, 4));

        let flat = Grid::from_fn(6, 6, |_, _| 2.5).unwrap();
        let ones = Grid::new(3, 3, vec![1.0; 9]).unwrap();
        assert!(conv2d(&flat, &ones).unwrap().data().iter().all(|&v| v == 22.5));

        assert!(conv2d(&img, &Grid::new(2, 2, vec![1.0; 4]).unwrap()).is_err());
        assert!(conv2d(&unit, &ones).is_err());
    }

    #[test]
    fn separable_delta_is_exact() {
        let img = Grid::from_fn(7, 7, |r, c| ((r * 31 + c * 17) % 13) as f64 - 6.0).unwrap();
        let d = [0.0, 1.0, 0.0];
        assert_eq!(separable_equivalence(&d, &d, &img).unwrap(), 0.0);
        assert!(separable_equivalence(&[1.0, 1.0], &[1.0, 1.0], &img).is_err());
        assert!(separable_equivalence(&[1.0, 1.0, 1.0], &[1.0], &img).is_err());
    }

    proptest! {
        #[test]
        fn softmax_is_shift_invariant(z in proptest::collection::vec(-30.0f64..30.0, 1..8), c in -50.0f64..50.0) {
            let a = softmax(&z).unwrap();
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let b = softmax(&shifted).unwrap();
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
                prop_assert!(*x > 0.0);
            }
        }

        #[test]
        fn softmax_preserves_strict_argmax(z in proptest::collection::vec(-10.0f64..10.0, 2..8)) {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(z.iter().filter(|&&v| v == max).count() == 1);
            let p = softmax(&z).unwrap();
            let am = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            prop_assert_eq!(am(&z), am(&p));
        }

        #[test]
        fn smoothing_sums_to_one(i in 0usize..4, eps in 0.0f64..=1.0) {
            let d = smooth_label(i, eps).unwrap().distribution;
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(d.iter().all(|&v| v >= eps / 4.0 - 1e-15));
        }

        #[test]
        fn lr_never_below_floor(lr in 1e-4f64..10.0, t in 1u64..500, alpha in 0.0f64..0.99, step in 0u64..1000) {
            let p = ScheduleParams::new(lr, t, alpha).unwrap();
            let v = cosine_decay_lr(&p, step);
            prop_assert!(v >= alpha * lr - 1e-12 && v <= lr + 1e-12);
        }

        #[test]
        fn split_is_stable_partition(
            mut items in proptest::collection::vec("[a-z]{1,6}", 0..30),
            frac in 0.01f64..0.99,
        ) {
            items.sort();
            items.dedup();
            let a = validation_split(&[("c".to_owned(), items.clone())], frac).unwrap();
            let mut rev = items.clone();
            rev.reverse();
            let b = validation_split(&[("c".to_owned(), rev)], frac).unwrap();
            prop_assert_eq!(&a, &b);
            let mut joined = a[0].train.clone();
            joined.extend(a[0].validation.iter().cloned());
            prop_assert_eq!(joined, items);
        }
    }
}
