//! Checks the prevented-engagement estimator on posts that were never
//! removed: pretend each sampled post was removed at a realistic age and
//! compare the predicted potential with its known long-run total.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crawl::SeriesRow;
use crate::error::{Error, Result};
use crate::metrics::EstimatorIndex;
use crate::RunMeta;

/// Stated in every report because the accuracy formula is a convention.
pub const ACCURACY_DEFINITION: &str = "1 - min(1, |predicted - truth| / max(truth, 1))";

/// Bootstrap draws (with replacement) from observed removal lifetimes.
pub fn sample_cut_times<R: Rng + ?Sized>(
    lifetimes: &[u64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if lifetimes.is_empty() {
        return Err(Error::EmptyInput(
            "sample_cut_times needs removal lifetimes",
        ));
    }
    Ok((0..n)
        .map(|_| lifetimes[rng.random_range(0..lifetimes.len())])
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub n: usize,
    pub accuracy_mean: f64,
    /// |Σ predicted − Σ truth| / Σ truth.
    pub net_error: f64,
    pub sum_predicted: f64,
    pub sum_truth: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub n: usize,
    pub seed: u64,
    /// Refit page estimators without the evaluated post.
    pub leave_one_out: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            n: 10_000,
            seed: 42,
            leave_one_out: true,
        }
    }
}

/// Contents of `validation_report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub meta: RunMeta,
    pub config: ValidationOptions,
    pub accuracy_definition: String,
    pub population: usize,
    pub n_samples: usize,
    pub nonviral: ClassReport,
    pub viral: ClassReport,
    /// Set when validation could not run.
    pub skipped: Option<String>,
}

impl ValidationReport {
    pub fn skipped(meta: RunMeta, config: ValidationOptions, reason: impl Into<String>) -> Self {
        Self {
            meta,
            config,
            accuracy_definition: ACCURACY_DEFINITION.into(),
            population: 0,
            n_samples: 0,
            nonviral: ClassReport::default(),
            viral: ClassReport::default(),
            skipped: Some(reason.into()),
        }
    }
}

#[derive(Default)]
struct Acc {
    n: usize,
    acc_sum: f64,
    pred: f64,
    truth: u64,
}

impl Acc {
    fn finish(self) -> ClassReport {
        ClassReport {
            n: self.n,
            accuracy_mean: if self.n > 0 {
                self.acc_sum / self.n as f64
            } else {
                0.0
            },
            net_error: if self.truth > 0 {
                (self.pred - self.truth as f64).abs() / self.truth as f64
            } else {
                0.0
            },
            sum_predicted: self.pred,
            sum_truth: self.truth,
        }
    }
}

/// Simulated removals on surviving posts.
///
/// Posts are sampled without replacement; sample `k` draws its cut time
/// from its own RNG stream `k + 1`, so results do not depend on evaluation
/// order. Each post's series is truncated at the last grid step at or
/// before the cut, and the estimator's tail from there is added.
pub fn validate_estimators(
    rows: &[&SeriesRow],
    index: &EstimatorIndex,
    lifetimes: &[u64],
    options: &ValidationOptions,
    meta: RunMeta,
) -> Result<ValidationReport> {
    if lifetimes.is_empty() {
        return Err(Error::EmptyInput("validation needs removal lifetimes"));
    }
    let n = if options.n > rows.len() {
        log::warn!(
            "requested {} validation samples but only {} posts survive; using all",
            options.n,
            rows.len()
        );
        rows.len()
    } else {
        options.n
    };
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut picked = sample(&mut rng, rows.len(), n).into_vec();
    picked.sort_unstable();

    let (mut nv, mut vi) = (Acc::default(), Acc::default());
    for (k, &i) in picked.iter().enumerate() {
        let row = rows[i];
        let mut stream = ChaCha8Rng::seed_from_u64(options.seed);
        stream.set_stream(k as u64 + 1);
        let cut = sample_cut_times(lifetimes, 1, &mut stream)?[0];

        let truth = row.long_run();
        let viral = truth as f64 >= index.threshold;
        let anchor = index.grid.floor_index(cut);
        let observed = anchor.map_or(0, |s| row.values[s]);
        let tail = if options.leave_one_out {
            index.select_excluding(row).tail_from(anchor)
        } else {
            index.select(row.page_id, viral).tail_from(anchor)
        };
        let predicted = observed as f64 + tail;
        let accuracy = 1.0 - ((predicted - truth as f64).abs() / truth.max(1) as f64).min(1.0);
        let a = if viral { &mut vi } else { &mut nv };
        a.n += 1;
        a.acc_sum += accuracy;
        a.pred += predicted;
        a.truth += truth;
    }
    Ok(ValidationReport {
        meta,
        config: options.clone(),
        accuracy_definition: ACCURACY_DEFINITION.into(),
        population: rows.len(),
        n_samples: n,
        nonviral: nv.finish(),
        viral: vi.finish(),
        skipped: None,
    })
}
