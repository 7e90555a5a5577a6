//! Linear least-squares learner used as the client-side training stub.
//!
//! Prediction is `dot(model, input)` and the loss is the mean squared error.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: f64,
}

/// Training and validation split of one client's data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalDataset {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
}

impl LocalDataset {
    /// Draws `n` samples with inputs uniform in a box scaled so that
    /// `E[|x|^2] = 1`, targets `dot(truth, x)` plus uniform noise in
    /// `[-noise, noise]`, and splits them 80/20 into training and validation
    /// (at least one sample in each when `n >= 2`).
    pub fn synthesize<R: Rng>(rng: &mut R, truth: &[f64], n: usize, noise: f64) -> Self {
        let d = truth.len().max(1);
        let scale = libm::sqrt(3.0 / d as f64);
        let mut samples: Vec<Sample> = (0..n)
            .map(|_| {
                let input: Vec<f64> = truth
                    .iter()
                    .map(|_| rng.random_range(-scale..scale))
                    .collect();
                let eps = if noise > 0.0 {
                    rng.random_range(-noise..noise)
                } else {
                    0.0
                };
                Sample {
                    target: predict(truth, &input) + eps,
                    input,
                }
            })
            .collect();
        let train_len = if n >= 2 {
            (n * 4 / 5).clamp(1, n - 1)
        } else {
            n
        };
        let validation = samples.split_off(train_len);
        LocalDataset {
            train: samples,
            validation,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn predict(model: &[f64], input: &[f64]) -> f64 {
    model.iter().zip(input).map(|(w, x)| w * x).sum()
}

/// Mean squared error over `samples`; zero for an empty set.
pub fn mse(model: &[f64], samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum: f64 = samples
        .iter()
        .map(|s| {
            let r = predict(model, &s.input) - s.target;
            r * r
        })
        .sum();
    sum / samples.len() as f64
}

/// Gradient of [`mse`] with respect to the model: `2/n * sum((w.x - y) x)`.
pub fn gradient(model: &[f64], samples: &[Sample]) -> Vec<f64> {
    let mut g = vec![0.0; model.len()];
    if samples.is_empty() {
        return g;
    }
    for s in samples {
        let r = predict(model, &s.input) - s.target;
        for (gi, xi) in g.iter_mut().zip(&s.input) {
            *gi += r * xi;
        }
    }
    let k = 2.0 / samples.len() as f64;
    g.iter_mut().for_each(|gi| *gi *= k);
    g
}

/// The val-below-train stop rule.
pub fn stop_rule(train_loss: f64, val_loss: f64) -> bool {
    val_loss < train_loss
}

/// Per-client training state.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub model: Vec<f64>,
    pub dataset: LocalDataset,
    /// Training examples processed in the current round.
    pub samples_seen: u64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub halted: bool,
    pub epochs_done: usize,
}

impl ClientState {
    pub fn new(id: usize, dataset: LocalDataset, param_count: usize) -> Self {
        let mut c = ClientState {
            id,
            model: vec![0.0; param_count],
            dataset,
            samples_seen: 0,
            train_loss: 0.0,
            val_loss: 0.0,
            halted: false,
            epochs_done: 0,
        };
        c.evaluate();
        c
    }

    /// Resets the round counters and loads the global model.
    pub fn start_round(&mut self, global: &[f64]) {
        self.model.clear();
        self.model.extend_from_slice(global);
        self.samples_seen = 0;
        self.halted = false;
        self.epochs_done = 0;
        self.evaluate();
    }

    pub fn evaluate(&mut self) {
        self.train_loss = mse(&self.model, &self.dataset.train);
        self.val_loss = mse(&self.model, &self.dataset.validation);
    }

    /// One pass over the training set in consecutive mini-batches, followed
    /// by a loss evaluation. A halted client does nothing.
    pub fn train_epoch(&mut self, learning_rate: f64, batch_size: usize) {
        if self.halted {
            return;
        }
        for batch in self.dataset.train.chunks(batch_size.max(1)) {
            let g = gradient(&self.model, batch);
            for (w, gi) in self.model.iter_mut().zip(&g) {
                *w -= learning_rate * gi;
            }
        }
        self.samples_seen += self.dataset.train.len() as u64;
        self.epochs_done += 1;
        self.evaluate();
    }
}

/// Starts a round from `global` and trains for `epochs` passes.
pub fn local_train(
    mut client: ClientState,
    global: &[f64],
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
) -> ClientState {
    client.start_round(global);
    for _ in 0..epochs {
        client.train_epoch(learning_rate, batch_size);
    }
    client
}

/// Whether the server should halt this client.
pub fn check_stop(client: &ClientState) -> bool {
    stop_rule(client.train_loss, client.val_loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn client(noise: f64, n: usize) -> ClientState {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = [0.5, -1.0, 0.25, 2.0];
        ClientState::new(0, LocalDataset::synthesize(&mut rng, &truth, n, noise), 4)
    }

    #[test]
    fn split_is_eighty_twenty() {
        let c = client(0.1, 50);
        assert_eq!(c.dataset.train.len(), 40);
        assert_eq!(c.dataset.validation.len(), 10);
        let tiny = client(0.1, 2);
        assert_eq!(
            (tiny.dataset.train.len(), tiny.dataset.validation.len()),
            (1, 1)
        );
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let c = client(0.1, 40);
        let global = vec![0.1, 0.2, 0.3, 0.4];
        let trained = local_train(c.clone(), &global, 3, 0.0, 8);
        assert_eq!(trained.model, global);
        assert_eq!(trained.train_loss, mse(&global, &c.dataset.train));
        assert_eq!(trained.val_loss, mse(&global, &c.dataset.validation));
        assert_eq!(trained.samples_seen, 3 * 32);
    }

    #[test]
    fn stop_rule_is_strict() {
        assert!(!stop_rule(0.3, 0.3));
        assert!(stop_rule(0.2, 0.1));
        assert!(!stop_rule(0.1, 0.2));
    }

    #[test]
    fn halted_client_does_not_step() {
        let mut c = client(0.1, 40);
        c.start_round(&[1.0; 4]);
        c.halted = true;
        let before = c.clone();
        c.train_epoch(0.5, 8);
        assert_eq!(c, before);
    }

    #[test]
    fn learns_noise_free_target() {
        let c = local_train(client(0.0, 60), &[0.0; 4], 200, 0.2, 8);
        assert!(c.train_loss < 1e-8, "{}", c.train_loss);
    }
}
