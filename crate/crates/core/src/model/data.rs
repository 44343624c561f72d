//! Dataset container, synthetic data generation, CSV loading, and the
//! Dirichlet non-IID partitioner.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::Matrix;
use crate::crypto::rng::{derive_stream_id, seeded_rng, SeededRng};
use crate::error::{Error, Result};

const STREAM_SYNTHETIC: u64 = 0x5359;
const STREAM_PARTITION: u64 = 0x5041;

/// Labeled examples: feature rows plus class indices in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Input(format!(
                "feature rows {} != label count {}",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Input(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    /// New dataset from a subset of row indices, in the given order.
    pub fn gather(&self, indices: &[usize]) -> Dataset {
        let cols = self.features.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features: Matrix::from_vec(indices.len(), cols, data),
            labels,
            num_classes: self.num_classes,
        }
    }

    /// Deterministic shuffled split into (train, test).
    pub fn split_train_test(&self, test_fraction: f64, rng: &mut SeededRng) -> (Dataset, Dataset) {
        let mut indices: Vec<usize> = (0..self.len()).collect();
        shuffle(&mut indices, rng);
        let test_len = ((self.len() as f64) * test_fraction).round() as usize;
        let test_len = test_len.min(self.len());
        let (test_idx, train_idx) = indices.split_at(test_len);
        (self.gather(train_idx), self.gather(test_idx))
    }
}

fn shuffle(indices: &mut [usize], rng: &mut SeededRng) {
    // Fisher-Yates; kept local so the draw sequence is pinned by this crate,
    // not by a rand version bump.
    for i in (1..indices.len()).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
}

/// Gaussian-mixture classification data: one unit-variance cluster per class,
/// centers drawn once per seed. Deterministic given `(inputs, seed)`.
pub fn generate_synthetic(
    num_examples: usize,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_examples < 1 || input_dim < 1 || num_classes < 1 {
        return Err(Error::Input(
            "generate_synthetic: all counts must be >= 1".into(),
        ));
    }
    let mut rng = seeded_rng(seed, derive_stream_id(&[STREAM_SYNTHETIC]));
    // Center spread of 3 sigma per axis keeps classes separable at the
    // default dimensions.
    const CENTER_SCALE: f64 = 3.0;
    let mut centers = vec![0.0f64; num_classes * input_dim];
    for c in centers.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *c = CENTER_SCALE * z;
    }
    let mut data = Vec::with_capacity(num_examples * input_dim);
    let mut labels = Vec::with_capacity(num_examples);
    for _ in 0..num_examples {
        let label = rng.random_range(0..num_classes);
        let center = &centers[label * input_dim..(label + 1) * input_dim];
        for &c in center {
            let z: f64 = StandardNormal.sample(&mut rng);
            data.push(c + z);
        }
        labels.push(label);
    }
    Dataset::new(
        Matrix::from_vec(num_examples, input_dim, data),
        labels,
        num_classes,
    )
}

/// Loads the label-first pixel CSV format: first field is an integer class
/// label, remaining fields are integer pixel values 0-255, scaled to [0, 1].
/// A first line whose first field is non-numeric is treated as a header and
/// skipped. Errors name the offending 1-based line number.
pub fn load_csv_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<i64>().is_err() {
            continue; // header
        }
        if fields.len() < 2 {
            return Err(Error::Parse {
                row: row_no,
                detail: format!(
                    "expected label plus pixels, found {} field(s)",
                    fields.len()
                ),
            });
        }
        let label: i64 = fields[0].parse().map_err(|_| Error::Parse {
            row: row_no,
            detail: format!("label {:?} is not an integer", fields[0]),
        })?;
        if label < 0 {
            return Err(Error::Parse {
                row: row_no,
                detail: format!("label {label} is negative"),
            });
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    row: row_no,
                    detail: format!("expected {} fields, found {}", w, fields.len()),
                });
            }
            Some(_) => {}
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            let v: i64 = f.parse().map_err(|_| Error::Parse {
                row: row_no,
                detail: format!("pixel {f:?} is not an integer"),
            })?;
            if !(0..=255).contains(&v) {
                return Err(Error::Parse {
                    row: row_no,
                    detail: format!("pixel value {v} outside 0..=255"),
                });
            }
            row.push(v as f64 / 255.0);
        }
        rows.push(row);
        labels.push(label as usize);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            detail: "no data rows".into(),
        });
    }
    let cols = rows[0].len();
    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Dataset::new(
        Matrix::from_vec(labels.len(), cols, data),
        labels,
        num_classes.max(2),
    )
}

/// Class-wise Dirichlet(alpha) allocation of `data` across `num_clients`
/// shards. The union of the shards is exactly the input (no loss, no
/// duplication); small alpha skews per-client class mixtures. Clients may
/// come out empty at extreme alpha.
pub fn dirichlet_partition(
    data: &Dataset,
    num_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Dataset>> {
    if num_clients < 1 {
        return Err(Error::Input("dirichlet_partition: num_clients >= 1".into()));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::Input(
            "dirichlet_partition: alpha must be > 0".into(),
        ));
    }
    if num_clients == 1 {
        return Ok(vec![data.clone()]);
    }
    let mut per_client: Vec<Vec<usize>> = vec![Vec::new(); num_clients];
    for class in 0..data.num_classes() {
        let mut members: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels()[i] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut rng = seeded_rng(seed, derive_stream_id(&[STREAM_PARTITION, class as u64]));
        shuffle(&mut members, &mut rng);
        let weights = dirichlet_proportions(num_clients, alpha, &mut rng);
        let counts = apportion(members.len(), &weights);
        let mut offset = 0;
        for (client, &count) in counts.iter().enumerate() {
            per_client[client].extend_from_slice(&members[offset..offset + count]);
            offset += count;
        }
    }
    Ok(per_client.iter().map(|idx| data.gather(idx)).collect())
}

/// Dirichlet(alpha, ..., alpha) sample via normalized Gamma draws.
fn dirichlet_proportions(n: usize, alpha: f64, rng: &mut SeededRng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    let mut draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum <= 0.0 {
        // All draws underflowed (possible at tiny alpha); fall back to a
        // single winner so the apportionment stays total.
        let winner = rng.random_range(0..n);
        draws = vec![0.0; n];
        draws[winner] = 1.0;
        return draws;
    }
    for d in &mut draws {
        *d /= sum;
    }
    draws
}

/// Largest-remainder apportionment of `total` items by `weights`.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| (w * total as f64) as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = weights
        .iter()
        .enumerate()
        .map(|(i, w)| (i, w * total as f64 - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
    for (i, _) in remainders.iter().take(total - assigned) {
        counts[*i] += 1;
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), total);
    counts
}
