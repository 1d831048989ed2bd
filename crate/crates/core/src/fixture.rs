//! Deterministic synthetic 2024-style survey used as the shipped fixture.
//!
//! Margins: 1466 respondents in 310 recruitment trees, referral out-degree
//! counts 821/284/211/150 for 0..3 recruits (mean 0.789), one chain reaching
//! wave 20, close-friendship RDS-II mean 2.5 with top code 20, and
//! zero-or-skip shares of 82% (kinship), 45% (close friendship),
//! 12% (acquaintance) and 56% (referral).

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Geometric, LogNormal};

use crate::data::{
    AgeBracket, Attribute, Ethnicity, Gender, OrphanPolicy, ShelterStatus, SurveyDataset, SurveyRecord, Variable,
    RACE_CODES_2024,
};
use crate::estimators::resolve_weights;
use crate::rng;

pub const FIXTURE_SEED: u64 = 2024;
pub const RESPONDENTS: usize = 1466;
pub const SEEDS: usize = 310;
pub const TOP_CODE: u32 = 20;
pub const MAX_WAVE: u32 = 20;
/// Respondents with 0, 1, 2 and 3 recruits.
pub const OUT_DEGREE_COUNTS: [usize; 4] = [821, 284, 211, 150];

const FRIEND_MISSING: usize = 40;
const FRIEND_ZERO: usize = 620;
const FRIEND_TARGET: f64 = 2.5;
const FRIEND_TARGET_FEMALE: f64 = 2.58;
const ACQ_MISSING: usize = 103;
const ACQ_ZERO: usize = 74;
const KIN_MISSING: usize = 40;
const KIN_POSITIVE: usize = 264;

/// Parent links and waves of the fixture forest, seeds first.
fn grow_forest(rng: &mut rng::Rng) -> (Vec<Option<usize>>, Vec<u32>) {
    let mut pool: Vec<usize> = OUT_DEGREE_COUNTS
        .iter()
        .enumerate()
        .flat_map(|(d, &c)| std::iter::repeat_n(d, c))
        .collect();
    let take = |pool: &mut Vec<usize>, d: usize| {
        let pos = pool.iter().position(|&x| x == d).expect("degree available");
        pool.swap_remove(pos);
    };
    // the deepest tree is a bare chain of MAX_WAVE referrals
    let mut parent = vec![None];
    let mut wave = vec![0];
    for w in 1..=MAX_WAVE {
        take(&mut pool, 1);
        parent.push(Some(w as usize - 1));
        wave.push(w);
    }
    take(&mut pool, 0);

    let trees = SEEDS - 1;
    let first = parent.len();
    loop {
        pool.shuffle(rng);
        // Rotate the sequence so the BFS frontier stays non-empty until the
        // last node: start right after the first minimum of the running sum
        // of (degree - 1).
        let (mut sum, mut min, mut cut) = (0i64, i64::MAX, 0);
        for (k, &d) in pool.iter().enumerate() {
            sum += d as i64 - 1;
            if sum < min {
                min = sum;
                cut = k + 1;
            }
        }
        let m = pool.len();
        pool.rotate_left(cut % m);

        parent.truncate(first);
        wave.truncate(first);
        for _ in 0..trees {
            parent.push(None);
            wave.push(0);
        }
        let mut degrees = pool.iter();
        let mut u = first;
        while u < parent.len() {
            let d = *degrees.next().expect("frontier matches degree pool");
            for _ in 0..d {
                parent.push(Some(u));
                wave.push(wave[u] + 1);
            }
            u += 1;
        }
        debug_assert!(degrees.next().is_none());
        if wave[first..].iter().all(|&w| w <= MAX_WAVE) {
            break;
        }
    }
    (parent, wave)
}

fn pick<T: Copy>(rng: &mut rng::Rng, items: &[(T, f64)]) -> T {
    let w = WeightedIndex::new(items.iter().map(|x| x.1)).expect("positive weights");
    items[w.sample(rng)].0
}

fn maybe<T>(rng: &mut rng::Rng, missing: f64, value: T) -> Option<T> {
    (rng.random::<f64>() >= missing).then_some(value)
}

fn flag(rng: &mut rng::Rng, p: f64) -> Option<bool> {
    let v = rng.random::<f64>() < p;
    maybe(rng, 0.02, v)
}

fn gender_for(rng: &mut rng::Rng, recruiter: Option<Gender>) -> Gender {
    use Gender::*;
    match recruiter {
        Some(Male) => pick(rng, &[(Male, 0.79 * 0.98), (Female, 0.21 * 0.98), (Other, 0.02)]),
        Some(Female) => pick(rng, &[(Male, 0.60 * 0.98), (Female, 0.40 * 0.98), (Other, 0.02)]),
        _ => pick(rng, &[(Male, 0.688), (Female, 0.272), (Other, 0.04)]),
    }
}

/// Root of each node's tree.
fn tree_roots(parent: &[Option<usize>]) -> Vec<usize> {
    let mut root = vec![0; parent.len()];
    for i in 0..parent.len() {
        // parents always precede children
        root[i] = parent[i].map_or(i, |p| root[p]);
    }
    root
}

/// Builds the fixture dataset. Identical output on every call.
pub fn synthetic_2024() -> SurveyDataset {
    let mut rng = rng::rng(FIXTURE_SEED);
    let (parent, _wave) = grow_forest(&mut rng);
    let n = parent.len();
    let root = tree_roots(&parent);
    let ids: Vec<String> = (0..n).map(|i| format!("R{:04}", i + 1)).collect();
    let coupons: Vec<Vec<String>> = ids
        .iter()
        .map(|id| (1..=3).map(|k| format!("{id}-{k}")).collect())
        .collect();

    let hubs: Vec<String> = (1..=9).map(|h| format!("H{h}")).collect();
    let tree_hub: Vec<usize> = (0..n).map(|_| rng.random_range(0..hubs.len())).collect();
    let races: Vec<(&str, f64)> = RACE_CODES_2024
        .iter()
        .copied()
        .zip([0.45, 0.08, 0.04, 0.22, 0.08, 0.01, 0.03, 0.09])
        .collect();
    let ages = [
        (AgeBracket::Age18To24, 0.10),
        (AgeBracket::Age25To34, 0.22),
        (AgeBracket::Age35To44, 0.26),
        (AgeBracket::Age45To54, 0.20),
        (AgeBracket::Age55To64, 0.16),
        (AgeBracket::Age65Plus, 0.06),
    ];
    let shelter = [
        (ShelterStatus::Unsheltered, 0.60),
        (ShelterStatus::Sheltered, 0.35),
        (ShelterStatus::Housed, 0.05),
    ];
    let acq_dist = LogNormal::new(60f64.ln(), 1.0).expect("valid lognormal");

    let mut genders: Vec<Gender> = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let g = gender_for(&mut rng, parent[i].map(|p| genders[p]));
        genders.push(g);
        let recruiter_coupon = parent[i].map(|p| {
            let k = parent[..i].iter().filter(|&&q| q == Some(p)).count();
            coupons[p][k].clone()
        });
        let age = pick(&mut rng, &ages);
        let race = pick(&mut rng, &races);
        let hispanic = rng.random::<f64>() < if race == "HL" { 0.9 } else { 0.06 };
        let ethnicity = if hispanic { Ethnicity::Hispanic } else { Ethnicity::NonHispanic };
        let status = pick(&mut rng, &shelter);
        let acq = (acq_dist.sample(&mut rng).round() as u32).max(1);
        records.push(SurveyRecord {
            respondent_id: ids[i].clone(),
            recruiter_coupon,
            own_coupons: coupons[i].clone(),
            hub_id: Some(hubs[tree_hub[root[i]]].clone()),
            age_bracket: maybe(&mut rng, 0.01, age),
            gender: Some(g),
            race: maybe(&mut rng, 0.03, race.to_string()),
            ethnicity: maybe(&mut rng, 0.02, ethnicity),
            shelter_status: maybe(&mut rng, 0.01, status),
            veteran: flag(&mut rng, 0.08),
            chronic: flag(&mut rng, 0.45),
            mental_health: flag(&mut rng, 0.50),
            substance_use: flag(&mut rng, 0.40),
            disability: flag(&mut rng, 0.55),
            acquaintance_degree: Some(acq),
            close_friend_degree: None,
            kinship_degree: None,
            referral_out_degree: 0,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    for (k, &i) in order.iter().enumerate() {
        if k < ACQ_MISSING {
            records[i].acquaintance_degree = None;
        } else if k < ACQ_MISSING + ACQ_ZERO {
            records[i].acquaintance_degree = Some(0);
        }
    }

    order.shuffle(&mut rng);
    let positive_friends = Geometric::new(0.226).expect("valid p");
    for (k, &i) in order.iter().enumerate() {
        records[i].close_friend_degree = if k < FRIEND_MISSING {
            None
        } else if k < FRIEND_MISSING + FRIEND_ZERO {
            Some(0)
        } else {
            Some((1 + positive_friends.sample(&mut rng)).min(TOP_CODE as u64) as u32)
        };
    }

    assign_kinship(&mut rng, &mut records, &root);

    let (mut ds, _) = SurveyDataset::from_records("2024", records, TOP_CODE, OrphanPolicy::Reject)
        .expect("fixture linkage is valid");
    let weights = resolve_weights(&ds, Variable::Acquaintance).expect("weights present");
    let female = |r: &SurveyRecord| r.category(Attribute::Gender) == Some("female");
    calibrate_friends(&mut rng, &mut ds.records, &weights, FRIEND_TARGET_FEMALE, |r| female(r), |r| female(r));
    calibrate_friends(&mut rng, &mut ds.records, &weights, FRIEND_TARGET, |_| true, |r| !female(r));
    ds
}

/// Positive kinship reports clustered within whole recruitment trees.
fn assign_kinship(rng: &mut rng::Rng, records: &mut [SurveyRecord], root: &[usize]) {
    let n = records.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        members[root[i]].push(i);
    }
    let mut trees: Vec<usize> = (0..n).filter(|&r| members[r].len() > 1).collect();
    trees.shuffle(rng);
    let level_dist = Geometric::new(0.12).expect("valid p");
    let mut kin = vec![0u32; n];
    let mut positives = 0;
    'trees: for r in trees {
        let level = 2 + level_dist.sample(rng) as i64;
        for &i in &members[r] {
            if positives == KIN_POSITIVE {
                break 'trees;
            }
            if rng.random::<f64>() < 0.85 {
                kin[i] = (level + rng.random_range(-2..=2)).max(1) as u32;
                positives += 1;
            }
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| kin[i] == 0).collect();
    rest.shuffle(rng);
    let missing: Vec<usize> = rest[..KIN_MISSING].to_vec();
    for (i, rec) in records.iter_mut().enumerate() {
        rec.kinship_degree = Some(kin[i]);
    }
    for i in missing {
        records[i].kinship_degree = None;
    }
}

/// Nudges positive close-friendship reports of `adjustable` records by ±1
/// until the weighted mean over `domain` hits `target` within 0.005.
fn calibrate_friends(
    rng: &mut rng::Rng,
    records: &mut [SurveyRecord],
    weights: &[f64],
    target: f64,
    domain: impl Fn(&SurveyRecord) -> bool,
    adjustable: impl Fn(&SurveyRecord) -> bool,
) {
    let cells: Vec<usize> = (0..records.len())
        .filter(|&i| domain(&records[i]) && records[i].close_friend_degree.is_some())
        .collect();
    let candidates: Vec<usize> = cells
        .iter()
        .copied()
        .filter(|&i| adjustable(&records[i]) && records[i].close_friend_degree > Some(0))
        .collect();
    let w_total: f64 = cells.iter().map(|&i| 1.0 / weights[i]).sum();
    let mut est: f64 = cells
        .iter()
        .map(|&i| f64::from(records[i].close_friend_degree.unwrap()) / weights[i])
        .sum::<f64>()
        / w_total;
    for _ in 0..1_000_000 {
        let gap = target - est;
        if gap.abs() < 0.005 {
            return;
        }
        let i = candidates[rng.random_range(0..candidates.len())];
        let v = records[i].close_friend_degree.unwrap();
        let next = if gap > 0.0 { v + 1 } else { v - 1 };
        if next == 0 || next > TOP_CODE {
            continue;
        }
        let delta = (f64::from(next) - f64::from(v)) / weights[i] / w_total;
        if (gap - delta).abs() < gap.abs() {
            records[i].close_friend_degree = Some(next);
            est += delta;
        }
    }
    panic!("close-friendship calibration did not converge");
}
