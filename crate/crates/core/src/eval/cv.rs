//! K-fold cross-validation of the explainer and the random baseline.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::{fidelity_from_classes, ged, sparsity, validity_from_classes};
use super::report::{CounterfactualRecord, MetricReport, MetricRow};
use crate::error::{GistError, Result};
use crate::explainer::{
    explain, irand_explain, train_gist, Counterfactual, GistConfig, IRAND_FLIP_PROB, IRAND_ROUNDS,
};
use crate::graph::Dataset;
use crate::oracle::{train_oracle, Oracle, OracleConfig};
use crate::rng::{derive_rng, derive_seed};

pub const GIST_NAME: &str = "GIST";
pub const IRAND_NAME: &str = "iRand";

// Seed streams under the root seed.
const SPLIT_STREAM: u64 = 0;
const ORACLE_STREAM: u64 = 100;
const GIST_STREAM: u64 = 200;
const GIST_INSTANCE_STREAM: u64 = 300;
const VAL_STREAM: u64 = 400;
const IRAND_STREAM: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    /// Share of each training split held out to monitor oracle training.
    pub val_fraction: f64,
    pub oracle: OracleConfig,
    pub gist: GistConfig,
    pub irand_p: f64,
    pub irand_t: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            val_fraction: 0.1,
            oracle: OracleConfig::default(),
            gist: GistConfig::default(),
            irand_p: IRAND_FLIP_PROB,
            irand_t: IRAND_ROUNDS,
            seed: 0,
        }
    }
}

/// Test indices of each fold: a seeded permutation cut into `folds`
/// contiguous blocks. The blocks are disjoint and cover `0..n`.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(GistError::Input(format!(
            "cannot split {n} graphs into {folds} folds"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut derive_rng(seed, SPLIT_STREAM));
    Ok((0..folds)
        .map(|k| {
            let mut block = perm[k * n / folds..(k + 1) * n / folds].to_vec();
            block.sort_unstable();
            block
        })
        .collect())
}

/// Train/validation/test indices of one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    /// Everything outside the test block (oracle training plus validation).
    pub train: Vec<usize>,
    pub oracle_train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn fold_split(n: usize, fold: usize, cfg: &CvConfig) -> Result<FoldSplit> {
    let blocks = kfold_indices(n, cfg.folds, cfg.seed)?;
    let test = blocks.get(fold).cloned().ok_or(GistError::Index {
        index: fold,
        len: cfg.folds,
    })?;
    let train: Vec<usize> = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
    let mut shuffled = train.clone();
    shuffled.shuffle(&mut derive_rng(cfg.seed, VAL_STREAM + fold as u64));
    let n_val = ((train.len() as f64 * cfg.val_fraction).round() as usize).min(train.len() - 1);
    let mut validation = shuffled[..n_val].to_vec();
    let mut oracle_train = shuffled[n_val..].to_vec();
    validation.sort_unstable();
    oracle_train.sort_unstable();
    Ok(FoldSplit {
        fold,
        train,
        oracle_train,
        validation,
        test,
    })
}

/// Oracle for one fold, trained on the fold's oracle split.
pub fn fold_oracle(data: &Dataset, split: &FoldSplit, cfg: &CvConfig) -> Result<Oracle> {
    let train = data.subset(&split.oracle_train)?;
    let val = if split.validation.is_empty() {
        None
    } else {
        Some(data.subset(&split.validation)?)
    };
    let ocfg = OracleConfig {
        seed: derive_seed(cfg.seed, ORACLE_STREAM + split.fold as u64),
        ..cfg.oracle
    };
    Ok(train_oracle(&train, val.as_ref(), &ocfg)?.0)
}

/// GIST config with the fold-specific seed.
pub fn fold_gist_config(cfg: &CvConfig, fold: usize) -> GistConfig {
    GistConfig {
        seed: derive_seed(cfg.seed, GIST_STREAM + fold as u64),
        ..cfg.gist
    }
}

/// Seed of the RNG used to explain test instance `instance` in `fold`.
pub fn instance_seed(cfg: &CvConfig, fold: usize, instance: usize) -> u64 {
    derive_seed(
        derive_seed(cfg.seed, GIST_INSTANCE_STREAM + fold as u64),
        instance as u64,
    )
}

fn row_for(
    fold: usize,
    explainer: &str,
    instance: usize,
    label: usize,
    cf: &Counterfactual,
    runtime_ms: f64,
) -> Result<MetricRow> {
    Ok(MetricRow {
        fold,
        explainer: explainer.to_string(),
        instance,
        label,
        input_class: cf.input_class,
        result_class: cf.result_class,
        validity: validity_from_classes(cf.input_class, cf.result_class),
        fidelity: fidelity_from_classes(cf.input_class, cf.result_class, label),
        ged: ged(&cf.input, &cf.result),
        ged_to_overshoot: ged(&cf.result, &cf.overshoot),
        sparsity: sparsity(&cf.input, &cf.result)?,
        oracle_calls: cf.oracle_calls_used,
        runtime_ms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub split: FoldSplit,
    pub oracle_accuracy: f64,
    pub gist_train_loss: Vec<f64>,
    pub pairing_calls: u64,
    pub gist: MetricReport,
    pub irand: MetricReport,
    pub counterfactuals: Vec<CounterfactualRecord>,
}

/// Runs one fold: trains the oracle and GIST, then explains every test graph
/// with GIST (pool = the fold's training graphs) and with iRand.
pub fn run_fold(data: &Dataset, fold: usize, cfg: &CvConfig) -> Result<FoldOutcome> {
    let split = fold_split(data.len(), fold, cfg)?;
    let oracle = fold_oracle(data, &split, cfg)?;
    let test = data.subset(&split.test)?;
    let oracle_accuracy = oracle.accuracy(&test)?;
    let pool = data.subset(&split.train)?;
    let gcfg = fold_gist_config(cfg, fold);
    let (model, train_report) = train_gist(&pool, &oracle, &gcfg)?;
    let mut gist_rows = Vec::with_capacity(split.test.len());
    let mut irand_rows = Vec::with_capacity(split.test.len());
    let mut records = Vec::with_capacity(split.test.len());
    for &idx in &split.test {
        let g = &data.graphs[idx];
        let label = g
            .label()
            .ok_or_else(|| GistError::Input(format!("graph {idx} has no label")))?;
        let start = Instant::now();
        let cf = explain(
            &model,
            g,
            &pool,
            &oracle,
            &gcfg,
            &mut derive_rng(instance_seed(cfg, fold, idx), 0),
        )?;
        let row = row_for(
            fold,
            GIST_NAME,
            idx,
            label,
            &cf,
            start.elapsed().as_secs_f64() * 1e3,
        )?;
        records.push(CounterfactualRecord::new(
            &cf,
            row.clone(),
            gcfg.alpha,
            gcfg.seed,
        ));
        gist_rows.push(row);

        let start = Instant::now();
        let mut rng = derive_rng(
            derive_seed(cfg.seed, IRAND_STREAM + fold as u64),
            idx as u64,
        );
        let cf = irand_explain(g, &oracle, cfg.irand_p, cfg.irand_t, &mut rng)?;
        irand_rows.push(row_for(
            fold,
            IRAND_NAME,
            idx,
            label,
            &cf,
            start.elapsed().as_secs_f64() * 1e3,
        )?);
    }
    Ok(FoldOutcome {
        fold,
        split,
        oracle_accuracy,
        gist_train_loss: train_report.epoch_loss,
        pairing_calls: train_report.pairing_calls,
        gist: MetricReport {
            fold: Some(fold),
            explainer: GIST_NAME.into(),
            rows: gist_rows,
        },
        irand: MetricReport {
            fold: Some(fold),
            explainer: IRAND_NAME.into(),
            rows: irand_rows,
        },
        counterfactuals: records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub folds: Vec<FoldOutcome>,
}

impl CvOutcome {
    pub fn pooled_gist(&self) -> MetricReport {
        let reports: Vec<&MetricReport> = self.folds.iter().map(|f| &f.gist).collect();
        MetricReport::pooled(GIST_NAME, &reports)
    }

    pub fn pooled_irand(&self) -> MetricReport {
        let reports: Vec<&MetricReport> = self.folds.iter().map(|f| &f.irand).collect();
        MetricReport::pooled(IRAND_NAME, &reports)
    }

    pub fn mean_oracle_accuracy(&self) -> f64 {
        self.folds.iter().map(|f| f.oracle_accuracy).sum::<f64>() / self.folds.len() as f64
    }
}

/// Cross-validates on `data`. Folds run on separate threads with their own
/// oracles, models and RNG streams, so the result does not depend on
/// scheduling.
pub fn run_cv(data: &Dataset, cfg: &CvConfig) -> Result<CvOutcome> {
    cfg.gist.validate()?;
    kfold_indices(data.len(), cfg.folds, cfg.seed)?;
    let folds = std::thread::scope(|s| {
        let handles: Vec<_> = (0..cfg.folds)
            .map(|k| s.spawn(move || run_fold(data, k, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(CvOutcome { folds })
}
