//! Ranking of training datasets by cross-domain error and greedy cumulative
//! mixtures of the best-ranked ones.
//!
//! `MIX_k` is the union of the top `k` datasets. Because the ranking is fixed,
//! every `MIX_k` is contained in `MIX_{k+1}`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{dataset_mean, Benchmark, EvalRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub id: String,
    #[serde(default)]
    pub manifest_path: String,
    #[serde(default)]
    pub sample_count: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl DatasetRef {
    pub fn bare(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            manifest_path: String::new(),
            sample_count: 0,
            tags: Vec::new(),
        }
    }
}

/// Parse a catalog: a JSON array of dataset descriptions with unique ids.
pub fn read_catalog(text: &str) -> Result<Vec<DatasetRef>> {
    let catalog: Vec<DatasetRef> = serde_json::from_str(text)?;
    let mut seen = std::collections::BTreeSet::new();
    for d in &catalog {
        if !seen.insert(d.id.as_str()) {
            return Err(Error::Config(format!("duplicate dataset id {:?} in catalog", d.id)));
        }
    }
    Ok(catalog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub dataset: DatasetRef,
    pub mean_error: f64,
    /// Benchmark key to value, e.g. `"K12" -> 4.13`.
    #[serde(default)]
    pub benchmarks: BTreeMap<String, f64>,
}

/// Datasets ordered best first (lowest mean error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRanking")]
pub struct RankedList {
    entries: Vec<RankedEntry>,
}

#[derive(Deserialize)]
struct RawRanking {
    entries: Vec<RankedEntry>,
}

impl TryFrom<RawRanking> for RankedList {
    type Error = Error;
    fn try_from(raw: RawRanking) -> Result<Self> {
        RankedList::new(raw.entries)
    }
}

impl RankedList {
    /// Wrap entries that are already in rank order.
    pub fn new(entries: Vec<RankedEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("ranking is empty".into()));
        }
        if entries.windows(2).any(|w| w[0].mean_error > w[1].mean_error) {
            return Err(Error::InvalidParameter("ranking is not ordered by mean error".into()));
        }
        let mut ids: Vec<&str> = entries.iter().map(|e| e.dataset.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("ranking repeats a dataset id".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.dataset.id.as_str()).collect()
    }
}

/// Sort `(dataset, mean)` pairs ascending by mean, ties by id.
pub fn rank_by_mean(means: Vec<(DatasetRef, f64)>) -> Result<RankedList> {
    let mut entries: Vec<RankedEntry> = means
        .into_iter()
        .map(|(dataset, mean_error)| RankedEntry {
            dataset,
            mean_error,
            benchmarks: BTreeMap::new(),
        })
        .collect();
    if let Some(e) = entries.iter().find(|e| !e.mean_error.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite mean for {}", e.dataset.id)));
    }
    entries.sort_by(|a, b| {
        a.mean_error
            .total_cmp(&b.mean_error)
            .then_with(|| a.dataset.id.cmp(&b.dataset.id))
    });
    RankedList::new(entries)
}

/// Rank training datasets from evaluation records.
///
/// Each record's `dataset_id` names the training dataset and its `metric`
/// names the benchmark column (`K12`, `K15`, `Midd`, `E3D` or a full
/// benchmark name). Records for other metrics are ignored. Datasets found in
/// `catalog` carry its description; others get a bare reference.
pub fn rank_datasets(records: &[EvalRecord], catalog: &[DatasetRef]) -> Result<RankedList> {
    let mut models: Vec<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    models.sort_unstable();
    models.dedup();
    if models.len() > 1 {
        return Err(Error::InvalidParameter(format!(
            "records mix several models: {}",
            models.join(", ")
        )));
    }

    let mut grouped: BTreeMap<&str, BTreeMap<Benchmark, f64>> = BTreeMap::new();
    for r in records {
        let group = grouped.entry(r.dataset_id.as_str()).or_default();
        let Some(bench) = Benchmark::parse(&r.metric) else {
            continue;
        };
        if group.insert(bench, r.value).is_some() {
            return Err(Error::InvalidParameter(format!(
                "dataset {} has several {} records",
                r.dataset_id,
                bench.key()
            )));
        }
    }
    if grouped.is_empty() {
        return Err(Error::InvalidParameter("no evaluation records".into()));
    }

    let mut means = Vec::with_capacity(grouped.len());
    let mut columns = BTreeMap::new();
    for (id, values) in &grouped {
        let mut four = Vec::with_capacity(4);
        for b in Benchmark::ALL {
            match values.get(&b) {
                Some(&v) => four.push(v),
                None => {
                    return Err(Error::MissingMetric {
                        dataset: id.to_string(),
                        metric: b.key().to_string(),
                    })
                }
            }
        }
        let dataset = catalog
            .iter()
            .find(|d| d.id == *id)
            .cloned()
            .unwrap_or_else(|| DatasetRef::bare(*id));
        means.push((dataset, dataset_mean(&four)?.value));
        columns.insert(
            id.to_string(),
            values
                .iter()
                .map(|(b, &v)| (b.key().to_string(), v))
                .collect::<BTreeMap<_, _>>(),
        );
    }

    let mut ranked = rank_by_mean(means)?;
    for e in &mut ranked.entries {
        e.benchmarks = columns.remove(&e.dataset.id).unwrap_or_default();
    }
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Proportional to each dataset's sample count.
    #[default]
    SampleCount,
    /// Equal share per dataset.
    Uniform,
}

impl std::str::FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample_count" | "sample-count" | "samples" => Ok(Weighting::SampleCount),
            "uniform" => Ok(Weighting::Uniform),
            _ => Err(Error::InvalidParameter(format!("unknown weighting {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixMember {
    pub id: String,
    pub manifest_path: String,
    pub sample_count: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSnapshot {
    pub id: String,
    pub mean_error: f64,
}

/// The top `k` datasets of a ranking with their sampling weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub k: usize,
    pub weighting: Weighting,
    pub members: Vec<MixMember>,
    pub created_from: Vec<RankSnapshot>,
}

impl MixPlan {
    pub fn ids(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.id.as_str()).collect()
    }

    /// Integer shares proportional to the weights.
    fn shares(&self) -> Vec<u128> {
        self.members
            .iter()
            .map(|m| match self.weighting {
                Weighting::SampleCount => m.sample_count as u128,
                Weighting::Uniform => 1,
            })
            .collect()
    }
}

pub fn build_mix(ranked: &RankedList, k: usize, weighting: Weighting) -> Result<MixPlan> {
    if k < 1 || k > ranked.len() {
        return Err(Error::KOutOfRange { k, len: ranked.len() });
    }
    let top = &ranked.entries[..k];
    let shares: Vec<u64> = match weighting {
        Weighting::SampleCount => top.iter().map(|e| e.dataset.sample_count).collect(),
        Weighting::Uniform => vec![1; k],
    };
    if let Some(e) = top.iter().zip(&shares).find_map(|(e, &s)| (s == 0).then_some(e)) {
        return Err(Error::InvalidParameter(format!(
            "dataset {} has no samples; give its sample_count or use uniform weighting",
            e.dataset.id
        )));
    }
    let total: u128 = shares.iter().map(|&s| s as u128).sum();
    let members = top
        .iter()
        .zip(&shares)
        .map(|(e, &s)| MixMember {
            id: e.dataset.id.clone(),
            manifest_path: e.dataset.manifest_path.clone(),
            sample_count: e.dataset.sample_count,
            tags: e.dataset.tags.clone(),
            weight: s as f64 / total as f64,
        })
        .collect();
    Ok(MixPlan {
        k,
        weighting,
        members,
        created_from: ranked
            .entries
            .iter()
            .map(|e| RankSnapshot {
                id: e.dataset.id.clone(),
                mean_error: e.mean_error,
            })
            .collect(),
    })
}

pub fn emit_manifest(plan: &MixPlan) -> Result<String> {
    let mut s = serde_json::to_string_pretty(plan)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_manifest(text: &str) -> Result<MixPlan> {
    let plan: MixPlan = serde_json::from_str(text)?;
    if plan.members.len() != plan.k || plan.k == 0 {
        return Err(Error::Config(format!(
            "manifest declares k = {} but lists {} members",
            plan.k,
            plan.members.len()
        )));
    }
    if plan.members.iter().any(|m| m.weight <= 0.0 || m.weight.is_nan()) {
        return Err(Error::Config("manifest weights must be positive".into()));
    }
    Ok(plan)
}

/// Largest-remainder quotas for `total` draws; ties go to the earlier member.
pub fn quotas(plan: &MixPlan, total: usize) -> Vec<usize> {
    let shares = plan.shares();
    let sum: u128 = shares.iter().sum();
    let total_u = total as u128;
    let mut counts: Vec<usize> = shares.iter().map(|&s| (s * total_u / sum) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    // remainder of member i is (s_i * total mod sum) / sum
    order.sort_by(|&a, &b| {
        let ra = shares[a] * total_u % sum;
        let rb = shares[b] * total_u % sum;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Deterministic sequence of dataset ids realizing the plan's weights.
pub fn draw_schedule(plan: &MixPlan, total: usize, seed: u64) -> Result<Vec<String>> {
    if total == 0 {
        return Err(Error::InvalidParameter("schedule needs at least one draw".into()));
    }
    let mut out = Vec::with_capacity(total);
    for (m, n) in plan.members.iter().zip(quotas(plan, total)) {
        out.extend(std::iter::repeat_n(m.id.clone(), n));
    }
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, metric: &str, value: f64) -> EvalRecord {
        EvalRecord {
            model_id: "m".into(),
            dataset_id: dataset.into(),
            metric: metric.into(),
            value,
            n_valid: None,
            coverage: None,
        }
    }

    fn four(dataset: &str, v: [f64; 4]) -> Vec<EvalRecord> {
        ["K12", "K15", "Midd", "E3D"]
            .iter()
            .zip(v)
            .map(|(m, x)| rec(dataset, m, x))
            .collect()
    }

    fn counted(id: &str, n: u64) -> DatasetRef {
        DatasetRef {
            sample_count: n,
            ..DatasetRef::bare(id)
        }
    }

    #[test]
    fn ranks_ascending_with_lexicographic_ties() {
        let mut records = four("b", [2.0; 4]);
        records.extend(four("a", [2.0; 4]));
        records.extend(four("c", [1.0, 1.0, 1.0, 5.0]));
        let ranked = rank_datasets(&records, &[]).unwrap();
        assert_eq!(ranked.ids(), vec!["a", "b", "c"]);
        assert_eq!(ranked.entries()[2].mean_error, 2.0);
        assert_eq!(ranked.entries()[0].benchmarks["Midd"], 2.0);
    }

    #[test]
    fn single_dataset_ranks_itself() {
        let ranked = rank_datasets(&four("only", [1.0, 2.0, 3.0, 4.0]), &[]).unwrap();
        assert_eq!(ranked.ids(), vec!["only"]);
        assert_eq!(ranked.entries()[0].mean_error, 2.5);
    }

    #[test]
    fn missing_metric_is_reported() {
        let mut records = four("a", [1.0; 4]);
        records.pop();
        match rank_datasets(&records, &[]) {
            Err(Error::MissingMetric { dataset, metric }) => {
                assert_eq!(dataset, "a");
                assert_eq!(metric, "E3D");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_models_and_duplicates_rejected() {
        let mut records = four("a", [1.0; 4]);
        records[0].model_id = "other".into();
        assert!(rank_datasets(&records, &[]).is_err());
        let mut records = four("a", [1.0; 4]);
        records.push(rec("a", "kitti2012", 3.0));
        assert!(rank_datasets(&records, &[]).is_err());
    }

    #[test]
    fn catalog_entries_are_attached() {
        let records = four("a", [1.0; 4]);
        let catalog = vec![DatasetRef {
            id: "a".into(),
            manifest_path: "lists/a.txt".into(),
            sample_count: 7,
            tags: vec!["synthetic".into()],
        }];
        let ranked = rank_datasets(&records, &catalog).unwrap();
        assert_eq!(ranked.entries()[0].dataset, catalog[0]);
    }

    #[test]
    fn mix_membership_and_weights() {
        let ranked = rank_by_mean(vec![(counted("x", 100), 1.0), (counted("y", 300), 2.0)]).unwrap();
        let one = build_mix(&ranked, 1, Weighting::SampleCount).unwrap();
        assert_eq!(one.ids(), vec!["x"]);
        assert_eq!(one.members[0].weight, 1.0);
        let two = build_mix(&ranked, 2, Weighting::SampleCount).unwrap();
        assert_eq!(
            two.members.iter().map(|m| m.weight).collect::<Vec<_>>(),
            vec![0.25, 0.75]
        );
        let uni = build_mix(&ranked, 2, Weighting::Uniform).unwrap();
        assert_eq!(uni.members.iter().map(|m| m.weight).collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert!(matches!(
            build_mix(&ranked, 0, Weighting::Uniform),
            Err(Error::KOutOfRange { .. })
        ));
        assert!(matches!(
            build_mix(&ranked, 3, Weighting::Uniform),
            Err(Error::KOutOfRange { k: 3, len: 2 })
        ));
    }

    #[test]
    fn zero_counts_need_uniform_weighting() {
        let ranked = rank_by_mean(vec![(DatasetRef::bare("x"), 1.0)]).unwrap();
        assert!(build_mix(&ranked, 1, Weighting::SampleCount).is_err());
        assert!(build_mix(&ranked, 1, Weighting::Uniform).is_ok());
    }

    #[test]
    fn manifest_round_trip() {
        let ranked = rank_by_mean(vec![
            (counted("x", 1), 1.5),
            (counted("y", 2), 2.25),
            (counted("z", 3), 9.0),
        ])
        .unwrap();
        let plan = build_mix(&ranked, 2, Weighting::SampleCount).unwrap();
        let text = emit_manifest(&plan).unwrap();
        assert_eq!(parse_manifest(&text).unwrap(), plan);
        assert_eq!(emit_manifest(&parse_manifest(&text).unwrap()).unwrap(), text);
        let k_pos = text.find("\"k\"").unwrap();
        assert!(k_pos < text.find("\"members\"").unwrap());
        assert!(text.find("\"members\"").unwrap() < text.find("\"created_from\"").unwrap());
    }

    #[test]
    fn ranking_json_round_trip_and_validation() {
        let ranked = rank_by_mean(vec![(counted("x", 1), 1.0), (counted("y", 2), 2.0)]).unwrap();
        let text = serde_json::to_string(&ranked).unwrap();
        assert_eq!(serde_json::from_str::<RankedList>(&text).unwrap(), ranked);
        let swapped = text.replace("\"mean_error\":1.0", "\"mean_error\":3.0");
        assert!(serde_json::from_str::<RankedList>(&swapped).is_err());
    }

    #[test]
    fn quota_schedule() {
        let ranked = rank_by_mean(vec![(counted("a", 1), 1.0), (counted("b", 3), 2.0)]).unwrap();
        let plan = build_mix(&ranked, 2, Weighting::SampleCount).unwrap();
        let s = draw_schedule(&plan, 4, 9).unwrap();
        assert_eq!(s.iter().filter(|id| *id == "a").count(), 1);
        assert_eq!(s.iter().filter(|id| *id == "b").count(), 3);
        assert_eq!(s, draw_schedule(&plan, 4, 9).unwrap());

        // 1/3 each over 4 draws: remainders tie, earlier ranks win
        let ranked = rank_by_mean(vec![
            (counted("a", 1), 1.0),
            (counted("b", 1), 2.0),
            (counted("c", 1), 3.0),
        ])
        .unwrap();
        let plan = build_mix(&ranked, 3, Weighting::SampleCount).unwrap();
        assert_eq!(quotas(&plan, 4), vec![2, 1, 1]);

        let single = build_mix(&ranked, 1, Weighting::Uniform).unwrap();
        assert!(draw_schedule(&single, 5, 1).unwrap().iter().all(|id| id == "a"));
        assert!(draw_schedule(&single, 0, 1).is_err());
    }
}
