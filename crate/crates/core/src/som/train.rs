use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::Exec;

use super::grid::{gaussian, GridSpec};
use super::init::{initialize, InitMode};
use super::model::{bmu_of, quantization_error_with, SomModel, TrainingData};
use super::schedule::TrainingSchedule;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SomModel,
    /// Quantization error over all samples after each epoch.
    pub epoch_qe: Vec<f64>,
}

/// Sequential (online) trainer. Each call to [`Trainer::step`] presents one
/// sample; samples are visited in epochs, each a fresh seeded shuffle.
pub struct Trainer<'a> {
    model: SomModel,
    data: &'a TrainingData,
    schedule: TrainingSchedule,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    position: usize,
    step: usize,
    /// Squared map distances between every pair of nodes.
    map_d2: Vec<f64>,
    exec: Exec,
}

fn pairwise_map_d2(grid: &GridSpec) -> Vec<f64> {
    let n = grid.nodes();
    let pos: Vec<(f64, f64)> = (0..n).map(|i| grid.position(i)).collect();
    let mut out = Vec::with_capacity(n * n);
    for a in &pos {
        for b in &pos {
            let (dx, dy) = (a.0 - b.0, a.1 - b.1);
            out.push(dx * dx + dy * dy);
        }
    }
    out
}

impl<'a> Trainer<'a> {
    pub fn new(model: SomModel, data: &'a TrainingData, schedule: TrainingSchedule, exec: Exec) -> Result<Self> {
        schedule.validate()?;
        model.check_dim(data.dim())?;
        if data.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("training data contains non-finite values".into()));
        }
        if schedule.iterations > 0 && data.is_empty() {
            return Err(Error::Empty("no samples to train on".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        rng.set_stream(0);
        // Pairwise table is nodes²; very large maps compute distances on the fly.
        let map_d2 = if model.nodes() <= 4096 {
            pairwise_map_d2(&model.grid)
        } else {
            Vec::new()
        };
        Ok(Trainer {
            order: (0..data.len()).collect(),
            model,
            data,
            schedule,
            rng,
            position: 0,
            step: 0,
            map_d2,
            exec,
        })
    }

    pub fn model(&self) -> &SomModel {
        &self.model
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.schedule.iterations
    }

    /// True when the last step completed a pass over the data.
    pub fn at_epoch_end(&self) -> bool {
        self.position == 0 && self.step > 0
    }

    fn map_d2(&self, a: usize, b: usize) -> f64 {
        if self.map_d2.is_empty() {
            let d = super::grid::map_distance(&self.model.grid, a, b);
            d * d
        } else {
            self.map_d2[a * self.model.nodes() + b]
        }
    }

    /// Presents one sample. Returns the BMU, or `None` once all iterations
    /// are done.
    pub fn step(&mut self) -> Option<usize> {
        if self.is_done() {
            return None;
        }
        if self.position == 0 {
            self.order.shuffle(&mut self.rng);
        }
        let sample_idx = self.order[self.position];
        self.position = (self.position + 1) % self.order.len();

        let row = self.data.samples.row(sample_idx);
        let owned;
        let x = match row.as_slice() {
            Some(x) => x,
            None => {
                owned = row.to_vec();
                &owned
            }
        };
        let radius = self.schedule.radius(self.step);
        let rate = self.schedule.rate(self.step);
        let bmu = bmu_of(self.model.weights.view(), x, self.exec);

        let nodes = self.model.nodes();
        let factors: Vec<f64> = (0..nodes)
            .map(|i| rate * gaussian(self.map_d2(bmu, i), radius))
            .collect();
        let dim = self.model.dim();
        let exec = self.exec.for_work(self.model.weights.len());
        let weights = self
            .model
            .weights
            .as_slice_mut()
            .expect("weights are stored contiguously");
        exec.for_each_chunk_mut(weights, dim, |i, w| {
            let f = factors[i];
            if f > 0.0 {
                for (wk, xk) in w.iter_mut().zip(x) {
                    *wk += f * (xk - *wk);
                }
            }
        });
        self.step += 1;
        Some(bmu)
    }

    /// Runs the remaining iterations, recording quantization error after
    /// every epoch (and after a final partial epoch).
    pub fn run(mut self) -> Result<TrainOutcome> {
        let mut epoch_qe = Vec::new();
        while self.step().is_some() {
            if self.at_epoch_end() || self.is_done() {
                let qe = quantization_error_with(&self.model, self.data.samples.view(), self.exec)?;
                log::debug!("epoch {}: quantization error {qe:.6}", epoch_qe.len() + 1);
                epoch_qe.push(qe);
            }
        }
        self.model.schedule = Some(self.schedule);
        Ok(TrainOutcome {
            model: self.model,
            epoch_qe,
        })
    }
}

/// Continues training an initialized model.
pub fn train_from(model: SomModel, data: &TrainingData, schedule: &TrainingSchedule, exec: Exec) -> Result<TrainOutcome> {
    Trainer::new(model, data, *schedule, exec)?.run()
}

/// Linear initialization (falling back to random) followed by sequential
/// training; the schedule's seed drives both.
pub fn train(data: &TrainingData, grid: GridSpec, schedule: &TrainingSchedule) -> Result<TrainOutcome> {
    let model = initialize(data, grid, InitMode::Linear, schedule.seed)?;
    train_from(model, data, schedule, Exec::default())
}
