//! ROC curves, AUC and per-group breakdowns.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Receiver operating characteristic from a threshold sweep over the
/// distinct scores, plus the Mann-Whitney AUC with ties counted half.
#[derive(Clone, Debug, PartialEq)]
pub struct Roc {
    /// `(false positive rate, true positive rate)`, from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // negatives ranked strictly above the current group
    let mut concordant = 0u64;
    let mut tied = 0u64;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut gp, mut gn) = (0u64, 0u64);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] == 1 {
                gp += 1;
            } else {
                gn += 1;
            }
            k += 1;
        }
        // positives in this group beat every negative not yet seen
        concordant += gp * (negatives - fp - gn);
        tied += gp * gn;
        tp += gp;
        fp += gn;
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    let auc = (concordant as f64 + 0.5 * tied as f64) / (positives as f64 * negatives as f64);
    Ok(Roc { points, auc })
}

/// Classification summary of one set of predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub n: usize,
    pub accuracy: f64,
    /// `None` when the labels hold a single class.
    pub roc: Option<Roc>,
    /// Sub-metrics per group field, then per group value.
    pub groups: BTreeMap<String, BTreeMap<String, Metrics>>,
}

impl Metrics {
    /// `scores` are positive-class probabilities, `predicted` the argmax classes.
    pub fn compute(scores: &[f64], predicted: &[usize], labels: &[usize]) -> Result<Metrics> {
        if predicted.len() != labels.len() || scores.len() != labels.len() {
            return Err(Error::Shape("scores, predictions and labels differ in length".into()));
        }
        let correct = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
        let accuracy = if labels.is_empty() {
            0.0
        } else {
            correct as f64 / labels.len() as f64
        };
        let roc = match roc_auc(scores, labels) {
            Ok(r) => Some(r),
            Err(Error::DegenerateLabels) => None,
            Err(e) => return Err(e),
        };
        Ok(Metrics {
            n: labels.len(),
            accuracy,
            roc,
            groups: BTreeMap::new(),
        })
    }

    pub fn auc(&self) -> Option<f64> {
        self.roc.as_ref().map(|r| r.auc)
    }

    pub fn is_degenerate(&self) -> bool {
        self.roc.is_none()
    }

    /// Human-readable report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_text(&mut s, "");
        s
    }

    fn write_text(&self, s: &mut String, indent: &str) {
        let _ = writeln!(s, "{indent}n {}", self.n);
        match self.auc() {
            Some(a) => {
                let _ = writeln!(s, "{indent}auc {a:.6}");
            }
            None => {
                let _ = writeln!(s, "{indent}auc n/a (single class)");
            }
        }
        let _ = writeln!(s, "{indent}accuracy {:.6}", self.accuracy);
        if let Some(r) = &self.roc {
            let pts: Vec<String> = r.points.iter().map(|(f, t)| format!("({f:.6},{t:.6})")).collect();
            let _ = writeln!(s, "{indent}roc {}", pts.join(" "));
        }
        for (field, values) in &self.groups {
            for (value, m) in values {
                let _ = writeln!(s, "{indent}[{field}={value}]");
                m.write_text(s, &format!("{indent}  "));
            }
        }
    }

    /// Machine-readable rows: `scope,n,auc,accuracy` followed by `roc,fpr,tpr` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scope,n,auc,accuracy\n");
        let auc = |m: &Metrics| m.auc().map_or(String::new(), |a| format!("{a}"));
        let _ = writeln!(s, "all,{},{},{}", self.n, auc(self), self.accuracy);
        for (field, values) in &self.groups {
            for (value, m) in values {
                let _ = writeln!(s, "{field}={value},{},{},{}", m.n, auc(m), m.accuracy);
            }
        }
        if let Some(r) = &self.roc {
            s.push_str("roc,fpr,tpr\n");
            for (f, t) in &r.points {
                let _ = writeln!(s, "roc,{f},{t}");
            }
        }
        s
    }
}

/// Metrics within each distinct group value.
pub fn stratified_metrics(
    scores: &[f64],
    predicted: &[usize],
    labels: &[usize],
    groups: &[String],
) -> Result<BTreeMap<String, Metrics>> {
    if groups.len() != labels.len() {
        return Err(Error::Shape("one group value per sample".into()));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        members.entry(g.as_str()).or_default().push(i);
    }
    members
        .into_iter()
        .map(|(g, idx)| {
            let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let pick_u = |v: &[usize]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let m = Metrics::compute(&pick(scores), &pick_u(predicted), &pick_u(labels))?;
            Ok((g.to_string(), m))
        })
        .collect()
}

/// Left edges of the age bins: `[18,30)`, then decades from 30 upward.
pub const AGE_BIN_EDGES: [u32; 9] = [18, 30, 40, 50, 60, 70, 80, 90, 100];

/// Age bin label such as `[30,40)`; ages below 18 map to `<18`.
pub fn age_group(age: f64) -> String {
    if age < 18.0 {
        return "<18".to_string();
    }
    for w in AGE_BIN_EDGES.windows(2) {
        if age < w[1] as f64 {
            return format!("[{},{})", w[0], w[1]);
        }
    }
    let lo = (age / 10.0).floor() as u32 * 10;
    format!("[{},{})", lo, lo + 10)
}
