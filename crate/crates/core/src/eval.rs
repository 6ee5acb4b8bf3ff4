//! Agreement between objective scores and subjective DMOS: logistic mapping
//! followed by rank correlation, linear correlation, RMSE and MAE.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::analysis::pearson;
use crate::error::{Error, Result};
use crate::media_io::{parse_csv_rows, read_csv_rows};

pub const MIN_FIT_POINTS: usize = 5;
const MAX_ITERATIONS: usize = 10_000;
const REL_TOLERANCE: f64 = 1e-10;

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::arg(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::arg("need at least 2 values"));
    }
    Ok(())
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(x, y)
}

pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok((x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64).sqrt())
}

pub fn mae(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `Q' = β2 + (β1 − β2) / (1 + exp(−(Q − β3) / |β4|))`.
pub fn logistic(q: f64, betas: &[f64; 4]) -> f64 {
    let [b1, b2, b3, b4] = *betas;
    b2 + (b1 - b2) * sigmoid((q - b3) / b4.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// `β4` reported as its absolute value.
    pub betas: [f64; 4],
    pub fitted: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the SSE settled.
    pub converged: bool,
}

fn sse(q: &[f64], target: &[f64], b: &[f64; 4]) -> f64 {
    q.iter().zip(target).map(|(&x, &t)| (logistic(x, b) - t).powi(2)).sum()
}

/// Least-squares logistic fit by Levenberg–Marquardt, started from
/// `β = (max target, min target, mean Q, std Q / 4)`.
pub fn logistic_fit(objective: &[f64], target: &[f64]) -> Result<LogisticFit> {
    if objective.len() != target.len() {
        return Err(Error::arg(format!(
            "length mismatch: {} objective vs {} subjective",
            objective.len(),
            target.len()
        )));
    }
    if objective.len() < MIN_FIT_POINTS {
        return Err(Error::arg(format!(
            "logistic fit needs at least {MIN_FIT_POINTS} points, got {}",
            objective.len()
        )));
    }
    if objective.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::arg("non-finite score"));
    }
    let n = objective.len() as f64;
    let mean_q = objective.iter().sum::<f64>() / n;
    let std_q = (objective.iter().map(|q| (q - mean_q).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(std_q > 0.0) {
        return Err(Error::data("objective scores are constant; logistic fit undefined"));
    }
    let max_t = target.iter().cloned().fold(f64::MIN, f64::max);
    let min_t = target.iter().cloned().fold(f64::MAX, f64::min);
    let mut b = [max_t, min_t, mean_q, std_q / 4.0];
    let mut current = sse(objective, target, &b);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix4::<f64>::zeros();
        let mut jtr = Vector4::<f64>::zeros();
        let scale = b[3].abs();
        let sign = if b[3] < 0.0 { -1.0 } else { 1.0 };
        for (&q, &t) in objective.iter().zip(target) {
            let z = (q - b[2]) / scale;
            let s = sigmoid(z);
            let ds = s * (1.0 - s);
            let r = b[1] + (b[0] - b[1]) * s - t;
            let j = Vector4::new(
                s,
                1.0 - s,
                -(b[0] - b[1]) * ds / scale,
                -(b[0] - b[1]) * ds * z / scale * sign,
            );
            jtj += j * j.transpose();
            jtr += j * r;
        }
        if jtr.norm() == 0.0 || current == 0.0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = [b[0] + step[0], b[1] + step[1], b[2] + step[2], b[3] + step[3]];
            if candidate[3] == 0.0 || candidate.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let next = sse(objective, target, &candidate);
            if next < current {
                let rel = (current - next) / current;
                b = candidate;
                current = next;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if rel < REL_TOLERANCE {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    b[3] = b[3].abs();
    Ok(LogisticFit {
        fitted: objective.iter().map(|&q| logistic(q, &b)).collect(),
        betas: b,
        sse: current,
        iterations,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub srcc: f64,
    pub pcc: f64,
    pub rmse: f64,
    pub mae: f64,
    pub betas: [f64; 4],
    pub converged: bool,
    /// Fitted objective score per sequence.
    pub fitted: BTreeMap<String, f64>,
}

/// Fits objective scores to `100 − DMOS` and measures agreement.
pub fn evaluate_metric(objective: &BTreeMap<String, f64>, dmos: &BTreeMap<String, f64>) -> Result<EvalStats> {
    let only_obj: Vec<&str> = objective.keys().filter(|k| !dmos.contains_key(*k)).map(String::as_str).collect();
    let only_dmos: Vec<&str> = dmos.keys().filter(|k| !objective.contains_key(*k)).map(String::as_str).collect();
    if !only_obj.is_empty() || !only_dmos.is_empty() {
        return Err(Error::data(format!(
            "sequence sets differ; only in objective: [{}]; only in DMOS: [{}]",
            only_obj.join(", "),
            only_dmos.join(", ")
        )));
    }
    let ids: Vec<&String> = objective.keys().collect();
    let q: Vec<f64> = ids.iter().map(|k| objective[*k]).collect();
    let target: Vec<f64> = ids.iter().map(|k| 100.0 - dmos[*k]).collect();
    let fit = logistic_fit(&q, &target)?;
    Ok(EvalStats {
        srcc: srcc(&fit.fitted, &target)?,
        pcc: pcc(&fit.fitted, &target)?,
        rmse: rmse(&fit.fitted, &target)?,
        mae: mae(&fit.fitted, &target)?,
        betas: fit.betas,
        converged: fit.converged,
        fitted: ids.into_iter().cloned().zip(fit.fitted).collect(),
    })
}

#[derive(Deserialize)]
struct ObjectiveRow {
    sequence_id: String,
    score: f64,
}

#[derive(Deserialize)]
struct DmosRow {
    sequence_id: String,
    o_dmos: f64,
}

fn unique<I: IntoIterator<Item = (String, f64)>>(rows: I, what: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (k, v) in rows {
        if out.insert(k.clone(), v).is_some() {
            return Err(Error::data(format!("duplicate {what} for sequence {k}")));
        }
    }
    Ok(out)
}

/// `sequence_id,score` rows.
pub fn load_objective(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let rows: Vec<ObjectiveRow> = read_csv_rows(path.as_ref())?;
    unique(rows.into_iter().map(|r| (r.sequence_id, r.score)), "objective score")
}

pub fn parse_objective(text: &str) -> Result<BTreeMap<String, f64>> {
    let rows: Vec<ObjectiveRow> = parse_csv_rows(text, "objective")?;
    unique(rows.into_iter().map(|r| (r.sequence_id, r.score)), "objective score")
}

/// `sequence_id,o_dmos` rows; extra columns (such as regional DMOS) are ignored.
pub fn load_dmos(path: impl AsRef<Path>) -> Result<BTreeMap<String, f64>> {
    let rows: Vec<DmosRow> = read_csv_rows(path.as_ref())?;
    unique(rows.into_iter().map(|r| (r.sequence_id, r.o_dmos)), "DMOS")
}
