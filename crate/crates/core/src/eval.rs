//! Genuine/impostor score distributions, FAR/FRR, DET curves and EER.
//!
//! A comparison is accepted when its distance is at most the threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::LabeledTemplate;
use crate::template::{hamming, Template};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScoreSet {
    pub genuine: Vec<usize>,
    pub impostor: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetPoint {
    pub threshold: usize,
    pub far: f64,
    pub frr: f64,
}

/// Which view of each object stands in for its enrolled reference.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum ReferenceView {
    /// The lexicographically smallest `view_id`.
    #[default]
    FirstLexicographic,
    Named(String),
}

fn group_by_object(templates: &[LabeledTemplate]) -> BTreeMap<&str, Vec<&LabeledTemplate>> {
    let mut groups: BTreeMap<&str, Vec<&LabeledTemplate>> = BTreeMap::new();
    for t in templates {
        groups.entry(&t.object_id).or_default().push(t);
    }
    for views in groups.values_mut() {
        views.sort_by(|a, b| a.view_id.cmp(&b.view_id));
    }
    groups
}

/// Distances between all unordered view pairs of each object.
pub fn genuine_scores(templates: &[LabeledTemplate]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for views in group_by_object(templates).values() {
        for (i, a) in views.iter().enumerate() {
            for b in &views[i + 1..] {
                out.push(hamming(&a.template, &b.template)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("genuine pairs need an object with two views".into()));
    }
    Ok(out)
}

/// Distances between the reference views of all unordered object pairs.
pub fn impostor_scores(templates: &[LabeledTemplate], reference: &ReferenceView) -> Result<Vec<usize>> {
    let refs = group_by_object(templates)
        .into_values()
        .filter_map(|views| match reference {
            ReferenceView::FirstLexicographic => views.first().copied(),
            ReferenceView::Named(v) => views.into_iter().find(|t| &t.view_id == v),
        })
        .collect::<Vec<_>>();
    if refs.len() < 2 {
        return Err(Error::InsufficientData("impostor pairs need two objects with a reference view".into()));
    }
    let mut out = Vec::with_capacity(refs.len() * (refs.len() - 1) / 2);
    for (i, a) in refs.iter().enumerate() {
        for b in &refs[i + 1..] {
            out.push(hamming(&a.template, &b.template)?);
        }
    }
    Ok(out)
}

pub fn pair_scores(templates: &[LabeledTemplate], reference: &ReferenceView) -> Result<ScoreSet> {
    Ok(ScoreSet {
        genuine: genuine_scores(templates)?,
        impostor: impostor_scores(templates, reference)?,
    })
}

impl ScoreSet {
    fn ensure_nonempty(&self) -> Result<()> {
        if self.genuine.is_empty() || self.impostor.is_empty() {
            return Err(Error::InsufficientData("score set needs genuine and impostor scores".into()));
        }
        Ok(())
    }
}

/// `far = |impostor ≤ t| / |impostor|`, `frr = |genuine > t| / |genuine|`.
pub fn far_frr(scores: &ScoreSet, threshold: usize) -> Result<(f64, f64)> {
    scores.ensure_nonempty()?;
    let accepted = scores.impostor.iter().filter(|&&d| d <= threshold).count();
    let rejected = scores.genuine.iter().filter(|&&d| d > threshold).count();
    Ok((
        accepted as f64 / scores.impostor.len() as f64,
        rejected as f64 / scores.genuine.len() as f64,
    ))
}

/// One point per threshold `0..=n`, from cumulative histograms.
pub fn det_curve(scores: &ScoreSet, n: usize) -> Result<Vec<DetPoint>> {
    scores.ensure_nonempty()?;
    let histogram = |d: &[usize]| {
        let mut h = vec![0usize; n + 1];
        for &x in d {
            h[x.min(n)] += 1;
        }
        h
    };
    let (hg, hi) = (histogram(&scores.genuine), histogram(&scores.impostor));
    let (ng, ni) = (scores.genuine.len() as f64, scores.impostor.len() as f64);
    let (mut genuine_accepted, mut impostor_accepted) = (0usize, 0usize);
    Ok((0..=n)
        .map(|t| {
            genuine_accepted += hg[t];
            impostor_accepted += hi[t];
            DetPoint {
                threshold: t,
                far: impostor_accepted as f64 / ni,
                frr: (scores.genuine.len() - genuine_accepted) as f64 / ng,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eer {
    /// `min_t max(far(t), frr(t))`.
    pub rate: f64,
    pub threshold: usize,
    pub far: f64,
    pub frr: f64,
}

/// Discrete equal error rate. Among thresholds minimising `max(far, frr)`, the
/// one with the smallest `|far − frr|` wins, then the smallest threshold.
pub fn eer(scores: &ScoreSet, n: usize) -> Result<Eer> {
    let curve = det_curve(scores, n)?;
    let key = |p: &DetPoint| (p.far.max(p.frr), (p.far - p.frr).abs());
    let best = curve
        .iter()
        .min_by(|a, b| key(a).partial_cmp(&key(b)).expect("rates are finite"))
        .expect("curve has n + 1 points");
    Ok(Eer {
        rate: best.far.max(best.frr),
        threshold: best.threshold,
        far: best.far,
        frr: best.frr,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossCount {
    pub accepts: usize,
    pub pairs: usize,
    pub ratio: f64,
    /// Number of distinct references with at least one accepted probe.
    pub references_hit: usize,
}

/// `accepts / (probes · references)`.
pub fn fa_ratio(accepts: usize, probes: usize, references: usize) -> f64 {
    accepts as f64 / (probes as f64 * references as f64)
}

/// Counts `(probe, reference)` pairs at distance strictly below `r`.
pub fn cross_fa_count(probes: &[Template], references: &[Template], r: usize) -> Result<CrossCount> {
    if probes.is_empty() || references.is_empty() {
        return Err(Error::InsufficientData("cross comparison needs nonempty sets".into()));
    }
    let mut accepts = 0;
    let mut hit = BTreeSet::new();
    for p in probes {
        for (j, q) in references.iter().enumerate() {
            if hamming(p, q)? < r {
                accepts += 1;
                hit.insert(j);
            }
        }
    }
    let pairs = probes.len() * references.len();
    Ok(CrossCount {
        accepts,
        pairs,
        ratio: fa_ratio(accepts, probes.len(), references.len()),
        references_hit: hit.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub eer: f64,
    pub eer_threshold: usize,
    pub far_at_r: f64,
    pub frr_at_r: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

/// Summary at the decoder's operating point: accept iff distance ≤ r − 1.
pub fn summarize(scores: &ScoreSet, n: usize, r: usize) -> Result<EvalSummary> {
    let e = eer(scores, n)?;
    let (far_at_r, frr_at_r) = far_frr(scores, r.saturating_sub(1))?;
    Ok(EvalSummary {
        eer: e.rate,
        eer_threshold: e.threshold,
        far_at_r,
        frr_at_r,
        n_genuine: scores.genuine.len(),
        n_impostor: scores.impostor.len(),
    })
}

pub fn write_det_csv<W: Write>(out: W, curve: &[DetPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "far", "frr"])?;
    for p in curve {
        w.write_record([p.threshold.to_string(), p.far.to_string(), p.frr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
