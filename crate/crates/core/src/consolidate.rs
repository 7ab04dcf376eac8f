//! Cross-voting and credibility-based set initialization.
//!
//! Each schema item's path support `n` out of `M` hypotheses is smoothed with
//! a uniform Beta prior: p ~ Beta(n+1, M-n+1). The credibility score
//! c = Pr(p > 0.5) has the exact closed form
//!
//!   c = 2^-(M+1) * sum_{k=0..n} C(M+1, k)
//!
//! which is computed with integer arithmetic for M <= 62 and in log space
//! beyond. Items with c >= tau_req are required, supported items below the
//! threshold are uncertain, zero-support items are candidates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{SchemaCatalog, SchemaItemId};
use crate::error::{Error, Result};
use crate::grounding::SelectionSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoteTally {
    pub item: SchemaItemId,
    pub n: u32,
    pub m: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Credibility {
    pub item: SchemaItemId,
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BucketedSets {
    pub required: std::collections::BTreeSet<SchemaItemId>,
    pub uncertain: std::collections::BTreeSet<SchemaItemId>,
    pub candidate: std::collections::BTreeSet<SchemaItemId>,
    pub tau_req: f64,
}

/// Path support for every item in the catalog universe. Items absent from all
/// selection sets get n = 0.
pub fn tally(selections: &[SelectionSet], catalog: &SchemaCatalog) -> BTreeMap<String, VoteTally> {
    let m = selections.len() as u32;
    let mut out = BTreeMap::new();
    for item in catalog.all_items() {
        let n = selections
            .iter()
            .filter(|s| s.tables.contains(item) || s.fields.contains(item))
            .count() as u32;
        out.insert(
            item.canonical.clone(),
            VoteTally {
                item: item.clone(),
                n,
                m,
            },
        );
    }
    out
}

const MAX_EXACT_M: u32 = 62;

fn binomial_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEFFS[0];
    let t = x + 7.5;
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn credibility_log_space(n: u32, m: u32) -> f64 {
    let mp1 = (m + 1) as f64;
    let mut max_term = f64::NEG_INFINITY;
    let terms: Vec<f64> = (0..=n)
        .map(|k| {
            let t = ln_gamma(mp1 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma(mp1 - k as f64 + 1.0);
            if t > max_term {
                max_term = t;
            }
            t
        })
        .collect();
    let sum: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
    let log_c = max_term + sum.ln() - mp1 * std::f64::consts::LN_2;
    log_c.exp().clamp(0.0, 1.0)
}

/// Credibility score c = Pr(Beta(n+1, M-n+1) > 0.5).
pub fn credibility(n: u32, m: u32) -> Result<f64> {
    if n > m {
        return Err(Error::InvalidArgument(format!("n = {n} exceeds M = {m}")));
    }
    if m <= MAX_EXACT_M {
        let denom = 1u128 << (m + 1);
        let num: u128 = (0..=n as u64).map(|k| binomial_u128(m as u64 + 1, k)).sum();
        Ok(num as f64 / denom as f64)
    } else {
        Ok(credibility_log_space(n, m))
    }
}

/// Partition the catalog item universe into required / uncertain / candidate.
pub fn bucketize(
    tallies: &BTreeMap<String, VoteTally>,
    tau_req: f64,
    catalog: &SchemaCatalog,
) -> Result<BucketedSets> {
    if !(tau_req > 0.5 && tau_req < 1.0) {
        return Err(Error::InvalidArgument(
            "tau_req must be in (0.5, 1)".into(),
        ));
    }
    let mut buckets = BucketedSets {
        required: Default::default(),
        uncertain: Default::default(),
        candidate: Default::default(),
        tau_req,
    };
    for item in catalog.all_items() {
        let t = tallies
            .get(&item.canonical)
            .ok_or_else(|| Error::NotFound(format!("tally for `{item}`")))?;
        if t.n == 0 {
            buckets.candidate.insert(item.clone());
        } else if credibility(t.n, t.m)? >= tau_req {
            buckets.required.insert(item.clone());
        } else {
            buckets.uncertain.insert(item.clone());
        }
    }
    Ok(buckets)
}

/// Credibility scores for every tallied item, in canonical order.
pub fn credibilities(tallies: &BTreeMap<String, VoteTally>) -> Result<Vec<Credibility>> {
    tallies
        .values()
        .map(|t| {
            Ok(Credibility {
                item: t.item.clone(),
                c: if t.m == 0 { 0.0 } else { credibility(t.n, t.m)? },
            })
        })
        .collect()
}
