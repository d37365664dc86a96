//! Loss terms and the warm-up and main objectives.

use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::array::Array;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Below this xy-length a direction has no usable azimuth.
pub const MIN_XY_NORM: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossTerm {
    Rec,
    Si,
    Az,
    Gp,
    Shadow,
    RecShadow,
}

impl LossTerm {
    pub const ALL: [LossTerm; 6] = [
        LossTerm::Rec,
        LossTerm::Si,
        LossTerm::Az,
        LossTerm::Gp,
        LossTerm::Shadow,
        LossTerm::RecShadow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Rec => "rec",
            LossTerm::Si => "si",
            LossTerm::Az => "az",
            LossTerm::Gp => "gp",
            LossTerm::Shadow => "shadow",
            LossTerm::RecShadow => "recshadow",
        }
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub si: f64,
    pub az: f64,
    pub gp: f64,
    /// Weight of both the pseudo-shadow and the reconstructed-shadow terms.
    pub shadow: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            si: 5.0,
            az: 0.1,
            gp: 10.0,
            shadow: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.si, self.az, self.gp, self.shadow]
            .iter()
            .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::invalid("loss weights must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn weight(&self, term: LossTerm) -> f64 {
        match term {
            LossTerm::Rec => 1.0,
            LossTerm::Si => self.si,
            LossTerm::Az => self.az,
            LossTerm::Gp => self.gp,
            LossTerm::Shadow | LossTerm::RecShadow => self.shadow,
        }
    }
}

/// The set of terms an objective sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Objective {
    pub terms: Vec<LossTerm>,
}

impl Objective {
    /// `{rec, si, az, gp, shadow}`, minus whatever is switched off.
    pub fn warmup(azimuth: bool, gradient_penalty: bool) -> Self {
        let mut terms = vec![LossTerm::Rec, LossTerm::Si];
        if azimuth {
            terms.push(LossTerm::Az);
        }
        if gradient_penalty {
            terms.push(LossTerm::Gp);
        }
        terms.push(LossTerm::Shadow);
        Objective { terms }
    }

    /// `{rec, si, recshadow}`.
    pub fn main() -> Self {
        Objective {
            terms: vec![LossTerm::Rec, LossTerm::Si, LossTerm::RecShadow],
        }
    }

    /// Weighted sum of plain term values; every term of the objective must be present.
    pub fn total(&self, values: &[(LossTerm, f64)], weights: &LossWeights) -> Result<f64> {
        let mut total = 0.0;
        for &term in &self.terms {
            let v = values
                .iter()
                .find(|(t, _)| *t == term)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::invalid(format!("missing loss term {term}")))?;
            total += weights.weight(term) * v;
        }
        Ok(total)
    }

    /// Weighted sum on the tape; every term of the objective must be present.
    pub fn total_on_tape(&self, tape: &mut Tape, terms: &[(LossTerm, Var)], weights: &LossWeights) -> Result<Var> {
        let mut acc: Option<Var> = None;
        for &term in &self.terms {
            let v = terms
                .iter()
                .find(|(t, _)| *t == term)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::invalid(format!("missing loss term {term}")))?;
            let w = weights.weight(term);
            let scaled = if w == 1.0 { v } else { tape.scale(v, w)? };
            acc = Some(match acc {
                Some(a) => tape.add(a, scaled)?,
                None => scaled,
            });
        }
        acc.ok_or_else(|| Error::invalid("objective has no terms"))
    }
}

pub fn warmup_total(values: &[(LossTerm, f64)], weights: &LossWeights) -> Result<f64> {
    Objective::warmup(true, true).total(values, weights)
}

pub fn main_total(values: &[(LossTerm, f64)], weights: &LossWeights) -> Result<f64> {
    Objective::main().total(values, weights)
}

/// Per-epoch summary of the optimized terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub epoch: usize,
    pub warmup: bool,
    pub terms: Vec<(LossTerm, f64)>,
    pub total: f64,
}

impl LossReport {
    pub fn new(epoch: usize, warmup: bool, terms: Vec<(LossTerm, f64)>, weights: &LossWeights) -> Self {
        let total = terms.iter().map(|(t, v)| weights.weight(*t) * v).sum();
        LossReport {
            epoch,
            warmup,
            terms,
            total,
        }
    }

    pub fn get(&self, term: LossTerm) -> Option<f64> {
        self.terms.iter().find(|(t, _)| *t == term).map(|(_, v)| *v)
    }

    pub fn term_names(&self) -> Vec<&'static str> {
        self.terms.iter().map(|(t, _)| t.name()).collect()
    }
}

/// Mean absolute difference.
pub fn rec_loss(tape: &mut Tape, observed: Var, rendered: Var) -> Result<Var> {
    if tape.value(observed).is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if tape.shape(observed) != tape.shape(rendered) {
        return Err(Error::ShapeMismatch {
            op: "rec-loss",
            lhs: tape.shape(observed).to_vec(),
            rhs: tape.shape(rendered).to_vec(),
        });
    }
    let d = tape.sub(rendered, observed)?;
    let a = tape.abs(d)?;
    tape.mean(a)
}

/// Silhouette term: mean over contour points of the ℓ1 distance between the
/// normalized xy of the predicted normal (`[K, 3]`) and the fitted 2D normal.
/// Points whose predicted xy is shorter than [`MIN_XY_NORM`] are skipped.
/// Returns the loss (if any point remained) and the number skipped.
pub fn si_loss(tape: &mut Tape, normals: Var, targets: &[[f64; 2]]) -> Result<(Option<Var>, usize)> {
    let (k, cols) = tape.value(normals).dims2()?;
    if k != targets.len() || cols != 3 {
        return Err(Error::invalid("silhouette normals and targets differ in count"));
    }
    let keep: Vec<usize> = (0..k)
        .filter(|&i| {
            let r = tape.value(normals).row(i);
            r[0].hypot(r[1]) >= MIN_XY_NORM
        })
        .collect();
    let skipped = k - keep.len();
    if keep.is_empty() {
        return Ok((None, skipped));
    }
    let rows = tape.gather_rows(normals, Rc::new(keep.clone()))?;
    let xy = tape.slice(rows, 0, 2)?;
    let unit = tape.l2_normalize(xy)?;
    let target: Vec<f64> = keep.iter().flat_map(|&i| targets[i]).collect();
    let t = tape.leaf(Array::matrix(keep.len(), 2, target)?)?;
    let d = tape.sub(unit, t)?;
    let a = tape.abs(d)?;
    let per = tape.sum_last(a)?;
    Ok((Some(tape.mean(per)?), skipped))
}

/// Azimuth term: mean ℓ2 distance between normalized xy of predicted lights
/// (`[f, 3]`) and the initializer's unit azimuth vectors. Pairs where either
/// side has no xy extent are skipped.
pub fn az_loss(tape: &mut Tape, lights: Var, targets: &[[f64; 2]]) -> Result<Var> {
    let (f, cols) = tape.value(lights).dims2()?;
    if f != targets.len() || cols != 3 {
        return Err(Error::invalid("light and azimuth counts differ"));
    }
    let keep: Vec<usize> = (0..f)
        .filter(|&j| {
            let r = tape.value(lights).row(j);
            r[0].hypot(r[1]) >= MIN_XY_NORM && targets[j][0].hypot(targets[j][1]) >= MIN_XY_NORM
        })
        .collect();
    if keep.is_empty() {
        return tape.leaf(Array::scalar(0.0));
    }
    let rows = tape.gather_rows(lights, Rc::new(keep.clone()))?;
    let xy = tape.slice(rows, 0, 2)?;
    let unit = tape.l2_normalize(xy)?;
    let target: Vec<f64> = keep
        .iter()
        .flat_map(|&j| {
            let t = targets[j];
            let n = t[0].hypot(t[1]);
            [t[0] / n, t[1] / n]
        })
        .collect();
    let t = tape.leaf(Array::matrix(keep.len(), 2, target)?)?;
    let d = tape.sub(unit, t)?;
    let sq = tape.square(d)?;
    let per = tape.sum_last(sq)?;
    // Exact matches contribute 0 and would make sqrt's derivative infinite.
    let nonzero: Vec<usize> = tape
        .value(per)
        .data()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, _)| i)
        .collect();
    if nonzero.is_empty() {
        return tape.leaf(Array::scalar(0.0));
    }
    let per = tape.gather_rows(per, Rc::new(nonzero))?;
    let dist = tape.sqrt(per)?;
    let total = tape.sum(dist)?;
    tape.scale(total, 1.0 / keep.len() as f64)
}

/// Gradient penalty: mean of `max(-slope, 0)²` over sampled points.
pub fn gp_loss(tape: &mut Tape, slope: Var) -> Result<Var> {
    let neg = tape.neg(slope)?;
    let hinge = tape.relu(neg)?;
    let sq = tape.square(hinge)?;
    tape.mean(sq)
}

/// Mean squared difference between shadow-field outputs and target maps.
pub fn shadow_loss(tape: &mut Tape, predicted: Var, target: Var) -> Result<Var> {
    if tape.shape(predicted) != tape.shape(target) {
        return Err(Error::ShapeMismatch {
            op: "shadow-loss",
            lhs: tape.shape(predicted).to_vec(),
            rhs: tape.shape(target).to_vec(),
        });
    }
    let d = tape.sub(predicted, target)?;
    let sq = tape.square(d)?;
    tape.mean(sq)
}

/// Same form as [`shadow_loss`], against ray-marched maps.
pub fn recshadow_loss(tape: &mut Tape, predicted: Var, rendered: Var) -> Result<Var> {
    shadow_loss(tape, predicted, rendered)
}
