//! Coupon-based recruitment: simulating it over a population graph and
//! rebuilding the recruitment forest from survey coupon linkage.

use std::collections::{BTreeMap, VecDeque};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    AgeBracket, Attribute, Ethnicity, Gender, ShelterStatus, SurveyDataset, SurveyRecord, Variable,
    COUPON_LIMIT,
};
use crate::estimators::{self, EstimateError, Rds2Options};
use crate::graph::AttributedGraph;
use crate::rng;

#[derive(Debug, Error)]
pub enum RdsError {
    #[error("recruitment linkage contains a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("forest and dataset are not aligned ({forest} nodes vs {records} records)")]
    Misaligned { forest: usize, records: usize },
    #[error("forest file error: {0}")]
    Parse(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

/// Directed recruiter → recruitee forest. Node `i` corresponds to record
/// `i` of the dataset it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferralForest {
    ids: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    wave: Vec<u32>,
    roots: Vec<usize>,
    attributes: BTreeMap<String, Vec<Option<String>>>,
}

impl ReferralForest {
    /// Builds the forest from parent links; waves come from BFS over roots.
    pub fn from_parents(ids: Vec<String>, parent: Vec<Option<usize>>) -> Result<Self, RdsError> {
        let n = ids.len();
        assert_eq!(parent.len(), n);
        let mut children = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for (i, p) in parent.iter().enumerate() {
            match p {
                Some(p) => children[*p].push(i),
                None => roots.push(i),
            }
        }
        let mut wave = vec![u32::MAX; n];
        let mut queue: VecDeque<usize> = roots.iter().copied().collect();
        for &r in &roots {
            wave[r] = 0;
        }
        while let Some(u) = queue.pop_front() {
            for &c in &children[u] {
                wave[c] = wave[u] + 1;
                queue.push_back(c);
            }
        }
        let stuck: Vec<String> = (0..n).filter(|&i| wave[i] == u32::MAX).map(|i| ids[i].clone()).collect();
        if !stuck.is_empty() {
            return Err(RdsError::Cycle(stuck));
        }
        Ok(ReferralForest {
            ids,
            parent,
            children,
            wave,
            roots,
            attributes: BTreeMap::new(),
        })
    }

    pub fn with_attribute(mut self, name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        assert_eq!(values.len(), self.ids.len());
        self.attributes.insert(name.into(), values);
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn wave(&self, i: usize) -> u32 {
        self.wave[i]
    }

    pub fn waves(&self) -> &[u32] {
        &self.wave
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn attribute(&self, name: &str) -> Option<&[Option<String>]> {
        self.attributes.get(name).map(Vec::as_slice)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.keys().map(String::as_str)
    }

    pub fn max_wave(&self) -> u32 {
        self.wave.iter().copied().max().unwrap_or(0)
    }

    /// Nodes of the tree rooted at `root`, in BFS order.
    pub fn tree_nodes(&self, root: usize) -> Vec<usize> {
        let mut out = vec![root];
        let mut k = 0;
        while k < out.len() {
            out.extend_from_slice(&self.children[out[k]]);
            k += 1;
        }
        out
    }

    /// CSV `respondent_id,parent_id,wave`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let to_io = |e: csv::Error| std::io::Error::other(e);
        out.write_record(["respondent_id", "parent_id", "wave"]).map_err(to_io)?;
        for i in 0..self.len() {
            let parent = self.parent[i].map(|p| self.ids[p].as_str()).unwrap_or("");
            out.write_record([self.ids[i].as_str(), parent, &self.wave[i].to_string()])
                .map_err(to_io)?;
        }
        out.flush()
    }

    /// Reads the CSV written by [`ReferralForest::write_csv`]; the wave
    /// column is recomputed and checked.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, RdsError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| RdsError::Parse(e.to_string()))?;
            if rec.len() != 3 {
                return Err(RdsError::Parse("expected respondent_id,parent_id,wave".into()));
            }
            let wave: u32 = rec[2].parse().map_err(|_| RdsError::Parse(format!("bad wave `{}`", &rec[2])))?;
            rows.push((rec[0].to_string(), rec[1].to_string(), wave));
        }
        let index: BTreeMap<&str, usize> = rows.iter().enumerate().map(|(i, r)| (r.0.as_str(), i)).collect();
        let parent = rows
            .iter()
            .map(|(_, p, _)| {
                if p.is_empty() {
                    Ok(None)
                } else {
                    index
                        .get(p.as_str())
                        .map(|&i| Some(i))
                        .ok_or_else(|| RdsError::Parse(format!("unknown parent `{p}`")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ids: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
        let forest = Self::from_parents(ids, parent)?;
        if let Some((id, _, w)) = rows.iter().enumerate().find(|(i, r)| forest.wave[*i] != r.2).map(|(_, r)| r) {
            return Err(RdsError::Parse(format!("wave {w} for `{id}` disagrees with linkage")));
        }
        Ok(forest)
    }
}

/// Builds the recruitment forest from coupon linkage. Orphans (kept by the
/// `seed` load policy) are roots.
pub fn forest_from_dataset(ds: &SurveyDataset) -> Result<ReferralForest, RdsError> {
    let ids = ds.records.iter().map(|r| r.respondent_id.clone()).collect();
    let mut forest = ReferralForest::from_parents(ids, ds.recruiter_links().to_vec())?;
    for attr in Attribute::ALL {
        let values = ds.records.iter().map(|r| r.category(*attr).map(str::to_string)).collect();
        forest = forest.with_attribute(attr.name(), values);
    }
    Ok(forest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSelection {
    Uniform,
    #[default]
    DegreeProportional,
}

impl std::str::FromStr for SeedSelection {
    type Err = RdsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SeedSelection::Uniform),
            "degree_proportional" => Ok(SeedSelection::DegreeProportional),
            _ => Err(RdsError::Config(format!("unknown seed selection `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdsConfig {
    pub n_seeds: usize,
    pub seed_selection: SeedSelection,
    /// Use `usize::MAX` for an unlimited number of coupons.
    pub coupons_per_respondent: usize,
    /// Probability that a handed-out coupon is redeemed. The default of 0.5
    /// is an arbitrary choice, not an observed rate.
    pub acceptance_prob: f64,
    pub target_sample: usize,
    pub max_waves: u32,
    pub rng_seed: u64,
}

impl Default for RdsConfig {
    fn default() -> Self {
        RdsConfig {
            n_seeds: 6,
            seed_selection: SeedSelection::DegreeProportional,
            coupons_per_respondent: COUPON_LIMIT,
            acceptance_prob: 0.5,
            target_sample: 500,
            max_waves: u32::MAX,
            rng_seed: 0,
        }
    }
}

/// Output of one simulated survey.
#[derive(Debug, Clone)]
pub struct RdsSample {
    pub forest: ReferralForest,
    pub dataset: SurveyDataset,
    /// Population node of each respondent, in sampling order.
    pub nodes: Vec<usize>,
    /// True when the frontier died out before `target_sample`.
    pub shortfall: bool,
}

fn select_seeds(g: &AttributedGraph, cfg: &RdsConfig, rng: &mut rng::Rng) -> Vec<usize> {
    let n = g.node_count();
    match cfg.seed_selection {
        SeedSelection::Uniform => {
            let mut all: Vec<usize> = (0..n).collect();
            let (chosen, _) = all.partial_shuffle(rng, cfg.n_seeds);
            chosen.to_vec()
        }
        SeedSelection::DegreeProportional => {
            let mut weight: Vec<f64> = (0..n).map(|i| g.degree(i) as f64).collect();
            let mut total: f64 = weight.iter().sum();
            let mut chosen = Vec::with_capacity(cfg.n_seeds);
            let mut taken = vec![false; n];
            while chosen.len() < cfg.n_seeds {
                let pick = if total > 0.0 {
                    let u = rng.random::<f64>() * total;
                    let mut acc = 0.0;
                    let mut pick = None;
                    for (i, &w) in weight.iter().enumerate() {
                        acc += w;
                        if w > 0.0 && u < acc {
                            pick = Some(i);
                            break;
                        }
                    }
                    // rounding can leave u just past the last positive weight
                    pick.unwrap_or_else(|| (0..n).rev().find(|&i| weight[i] > 0.0).expect("positive total"))
                } else {
                    // only isolates remain
                    let rest: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
                    rest[rng.random_range(0..rest.len())]
                };
                taken[pick] = true;
                total -= weight[pick];
                weight[pick] = 0.0;
                if total < 1e-9 {
                    total = 0.0;
                }
                chosen.push(pick);
            }
            chosen
        }
    }
}

/// Runs the coupon protocol without replacement over `g`.
///
/// Each respondent hands coupons to up to `coupons_per_respondent`
/// uniformly chosen unsampled neighbors; each coupon is redeemed with
/// `acceptance_prob`. Respondents are processed first-in first-out until the
/// target is reached or nobody is left to recruit.
pub fn simulate_rds(g: &AttributedGraph, cfg: &RdsConfig) -> Result<RdsSample, RdsError> {
    let n = g.node_count();
    if cfg.n_seeds == 0 || cfg.n_seeds > n {
        return Err(RdsError::Config(format!("n_seeds {} for population {n}", cfg.n_seeds)));
    }
    if cfg.target_sample > n {
        return Err(RdsError::Config(format!("target_sample {} exceeds population {n}", cfg.target_sample)));
    }
    if cfg.coupons_per_respondent == 0 {
        return Err(RdsError::Config("coupons_per_respondent must be at least 1".into()));
    }
    if !(cfg.acceptance_prob > 0.0 && cfg.acceptance_prob <= 1.0) {
        return Err(RdsError::Config(format!("acceptance_prob {} outside (0, 1]", cfg.acceptance_prob)));
    }

    let mut rng = rng::rng(cfg.rng_seed);
    let seeds = select_seeds(g, cfg, &mut rng);
    let target = cfg.target_sample.max(1);

    // sample order -> (node, parent sample index, wave, coupons handed, redeemed)
    let mut order: Vec<usize> = Vec::new();
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut wave: Vec<u32> = Vec::new();
    let mut issued: Vec<usize> = Vec::new();
    let mut sampled = vec![false; n];
    for &s in seeds.iter().take(target) {
        sampled[s] = true;
        order.push(s);
        parent.push(None);
        wave.push(0);
        issued.push(0);
    }

    let mut frontier: VecDeque<usize> = (0..order.len()).collect();
    let mut candidates: Vec<usize> = Vec::new();
    while order.len() < target {
        let Some(k) = frontier.pop_front() else { break };
        if wave[k] >= cfg.max_waves {
            continue;
        }
        let u = order[k];
        candidates.clear();
        candidates.extend(g.neighbors(u).iter().map(|&v| v as usize).filter(|&v| !sampled[v]));
        candidates.sort_unstable();
        candidates.shuffle(&mut rng);
        candidates.truncate(cfg.coupons_per_respondent);
        issued[k] = candidates.len();
        for &v in &candidates {
            if order.len() >= target {
                break;
            }
            if rng.random::<f64>() < cfg.acceptance_prob {
                sampled[v] = true;
                parent.push(Some(k));
                wave.push(wave[k] + 1);
                issued.push(0);
                frontier.push_back(order.len());
                order.push(v);
            }
        }
    }
    let shortfall = order.len() < cfg.target_sample;

    let ids: Vec<String> = order.iter().map(|v| format!("n{v}")).collect();
    let mut redeemed = vec![0usize; order.len()];
    for p in parent.iter().flatten() {
        redeemed[*p] += 1;
    }
    // coupon c{node}_{k}; redeemed coupons get the lowest k
    let mut next_coupon = vec![0usize; order.len()];
    let mut recruiter_coupon = vec![None; order.len()];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            recruiter_coupon[i] = Some(format!("c{}_{}", order[p], next_coupon[p]));
            next_coupon[p] += 1;
        }
    }
    let records: Vec<SurveyRecord> = (0..order.len())
        .map(|i| {
            let node = order[i];
            let held = redeemed[i].max(issued[i].min(COUPON_LIMIT));
            let mut rec = SurveyRecord {
                recruiter_coupon: recruiter_coupon[i].clone(),
                own_coupons: (0..held).map(|k| format!("c{node}_{k}")).collect(),
                acquaintance_degree: Some(g.degree(node) as u32),
                referral_out_degree: redeemed[i] as u32,
                ..SurveyRecord::new(ids[i].clone())
            };
            copy_graph_attributes(g, node, &mut rec);
            rec
        })
        .collect();

    let dataset = SurveyDataset::from_linked("simulated", records, parent.clone(), u32::MAX);
    let mut forest = ReferralForest::from_parents(ids, parent)?;
    for (name, attr) in g.attributes() {
        let values = order.iter().map(|&v| Some(attr.label(v).to_string())).collect();
        forest = forest.with_attribute(name.clone(), values);
    }
    Ok(RdsSample {
        forest,
        dataset,
        nodes: order,
        shortfall,
    })
}

fn copy_graph_attributes(g: &AttributedGraph, node: usize, rec: &mut SurveyRecord) {
    let get = |attr: Attribute| g.label(attr.name(), node);
    let flag = |attr: Attribute| match get(attr) {
        Some("1") | Some("true") => Some(true),
        Some("0") | Some("false") => Some(false),
        _ => None,
    };
    rec.hub_id = get(Attribute::Hub).map(str::to_string);
    rec.age_bracket = get(Attribute::AgeBracket).and_then(|v| v.parse::<AgeBracket>().ok());
    rec.gender = get(Attribute::Gender).and_then(|v| v.parse::<Gender>().ok());
    rec.race = get(Attribute::Race).map(str::to_string);
    rec.ethnicity = get(Attribute::Ethnicity).and_then(|v| v.parse::<Ethnicity>().ok());
    rec.shelter_status = get(Attribute::ShelterStatus).and_then(|v| v.parse::<ShelterStatus>().ok());
    rec.veteran = flag(Attribute::Veteran);
    rec.chronic = flag(Attribute::Chronic);
    rec.mental_health = flag(Attribute::MentalHealth);
    rec.substance_use = flag(Attribute::SubstanceUse);
    rec.disability = flag(Attribute::Disability);
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub wave: u32,
    /// Usable records with wave ≤ `wave`.
    pub n: usize,
    pub estimate: f64,
}

/// Cumulative RDS-II estimate of `variable` over waves `0..=w`, per wave.
pub fn wave_trajectory(
    forest: &ReferralForest,
    ds: &SurveyDataset,
    variable: Variable,
    opts: &Rds2Options,
) -> Result<Vec<TrajectoryRow>, RdsError> {
    if forest.len() != ds.len() {
        return Err(RdsError::Misaligned {
            forest: forest.len(),
            records: ds.len(),
        });
    }
    let stat = estimators::Rds2Statistic::new(ds, estimators::Measure::Variable(variable), opts)?;
    let usable = stat.usable();
    if usable.is_empty() {
        return Err(EstimateError::NoUsableRecords.into());
    }
    let mut rows = Vec::new();
    let mut included = Vec::new();
    let mut by_wave = usable.clone();
    by_wave.sort_by_key(|&i| (forest.wave(i), i));
    let mut k = 0;
    for w in 0..=forest.max_wave() {
        while k < by_wave.len() && forest.wave(by_wave[k]) <= w {
            included.push(by_wave[k]);
            k += 1;
        }
        if let Some(estimate) = stat.evaluate(&included) {
            rows.push(TrajectoryRow {
                wave: w,
                n: included.len(),
                estimate,
            });
        }
    }
    Ok(rows)
}
