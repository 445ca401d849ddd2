//! Compares change-detection output with the generator's ledger.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::changedet::{verdict_counts, ChangeRecord, Verdict, VerdictCounts};
use crate::detections::TreeInstance;
use crate::synthgen::scene::{Fate, Ledger, LedgerTree, TreeState};

/// Default distance between a recovered centroid and its ledger tree.
pub const LEDGER_TOLERANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerCheck {
    pub expected: VerdictCounts,
    pub recovered: VerdictCounts,
    pub exact: bool,
    pub mismatches: Vec<String>,
}

fn nearest<'a>(ledger: &'a Ledger, inst: &TreeInstance, state: impl Fn(&'a LedgerTree) -> Option<&'a TreeState>, tol: f64) -> Option<&'a str> {
    ledger
        .trees
        .iter()
        .filter_map(|t| {
            let s = state(t)?;
            let d = ((s.center_m[0] - inst.centroid_m[0]).powi(2) + (s.center_m[1] - inst.centroid_m[1]).powi(2)).sqrt();
            (d <= tol).then_some((d, t.id.as_str()))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, id)| id)
}

/// Attributes every record to a ledger tree by centroid and checks that
/// each tree is recovered exactly once with its true fate.
pub fn check_against_ledger(ledger: &Ledger, records: &[ChangeRecord], tol_m: f64) -> LedgerCheck {
    let fates: BTreeMap<&str, Fate> = ledger.trees.iter().map(|t| (t.id.as_str(), t.fate)).collect();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut mismatches = Vec::new();
    for r in records {
        let e = r.earlier.as_ref().map(|i| (i, nearest(ledger, i, |t| t.earlier.as_ref(), tol_m)));
        let l = r.later.as_ref().map(|i| (i, nearest(ledger, i, |t| t.later.as_ref(), tol_m)));
        let id = match (e, l) {
            (Some((_, Some(a))), Some((_, Some(b)))) if a != b => {
                mismatches.push(format!("persisted pair joins {a} and {b}"));
                continue;
            }
            (Some((_, Some(a))), _) | (None, Some((_, Some(a)))) => a,
            _ => {
                mismatches.push(format!("{} {} has no ledger tree within {tol_m} m", r.verdict.as_str(), r.representative().id));
                continue;
            }
        };
        let want = match fates[id] {
            Fate::Persisted => Verdict::Persisted,
            Fate::Removed => Verdict::Lost,
            Fate::Added => Verdict::Gained,
        };
        if want != r.verdict {
            mismatches.push(format!("{id} recovered as {} but is {}", r.verdict.as_str(), want.as_str()));
        }
        *seen.entry(id).or_default() += 1;
    }
    for t in &ledger.trees {
        match seen.get(t.id.as_str()) {
            None => mismatches.push(format!("{} not recovered", t.id)),
            Some(&n) if n > 1 => mismatches.push(format!("{} recovered {n} times", t.id)),
            _ => {}
        }
    }
    let expected = VerdictCounts {
        persisted: ledger.scene.persisted,
        gained: ledger.scene.gained,
        lost: ledger.scene.lost,
    };
    let recovered = verdict_counts(records);
    LedgerCheck { exact: mismatches.is_empty() && expected == recovered, expected, recovered, mismatches }
}
