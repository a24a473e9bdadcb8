//! Labelled-bin evaluation of the three reconstruction methods.
//!
//! Visitors are split into a training and a test population; a fixed number
//! of bins is sampled from each; the network is trained on the training bins
//! and every method is scored on the same test bins after reconstructing the
//! whole trajectory of each test visitor.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::{align_ground_truth, bin_sightings, BeaconLabels, GroundTruth, RssiMatrix, DEFAULT_FLOOR_DBM};
use crate::museum::MuseumGraph;
use crate::nn::{self, InputSpec, LabeledSet, NnModel, TrainConfig, TrainReport};
use crate::reconstruct::{
    argmax_reconstruct, extend_labeled_set, input_width, ma_reconstruct, nn_reconstruct, Prefilter, SmoothingWindow, Trajectory,
};
use crate::sim::{simulate_visits, SimConfig, SimOutput, WalkerPolicy};

/// A beacon's binned matrix with its labels on the same grid.
#[derive(Clone, Debug)]
pub struct LabeledMatrix {
    pub matrix: RssiMatrix,
    pub truth: GroundTruth,
}

/// Pair each matrix with the labels of the same beacon, resampled to the
/// matrix grid. Beacons without labels are skipped.
pub fn pair_with_labels(matrices: Vec<RssiMatrix>, labels: &BTreeMap<String, BeaconLabels>) -> Result<Vec<LabeledMatrix>> {
    let mut out = Vec::with_capacity(matrices.len());
    for matrix in matrices {
        let Some(l) = labels.get(&matrix.beacon) else {
            log::debug!("no labels for beacon {}", matrix.beacon);
            continue;
        };
        let truth = align_ground_truth(&l.events, &matrix, l.visit_type)?;
        out.push(LabeledMatrix { matrix, truth });
    }
    Ok(out)
}

/// [`pair_with_labels`] with labels taken from simulator ground truth.
pub fn pair_with_truth(matrices: Vec<RssiMatrix>, truths: &[GroundTruth]) -> Result<Vec<LabeledMatrix>> {
    let labels = truths
        .iter()
        .map(|gt| {
            let l = BeaconLabels {
                events: gt.events(),
                visit_type: gt.visit_type,
            };
            (gt.beacon.clone(), l)
        })
        .collect();
    pair_with_labels(matrices, &labels)
}

/// Which bins of a labelled matrix may be drawn for training or testing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LabelSpan {
    /// From the first to the last bin labelled with an interior room.
    #[default]
    Visit,
    /// Every bin of the matrix, including time spent outside.
    Matrix,
}

impl std::str::FromStr for LabelSpan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "visit" => Ok(LabelSpan::Visit),
            "matrix" => Ok(LabelSpan::Matrix),
            other => Err(Error::InvalidArgument(format!("unknown label span {other:?}"))),
        }
    }
}

fn candidate_range(pair: &LabeledMatrix, span: LabelSpan, outside: crate::museum::RoomId) -> (usize, usize) {
    match span {
        LabelSpan::Matrix => (0, pair.matrix.m()),
        LabelSpan::Visit => {
            let rooms = &pair.truth.rooms;
            match (rooms.iter().position(|&r| r != outside), rooms.iter().rposition(|&r| r != outside)) {
                (Some(a), Some(b)) => (a, b + 1),
                _ => (0, 0),
            }
        }
    }
}

/// Number of bins [`sample_bins`] can draw from.
pub fn available_bins(pairs: &[LabeledMatrix], span: LabelSpan, g: &MuseumGraph) -> usize {
    pairs.iter().map(|p| candidate_range(p, span, g.outside())).map(|r| r.1 - r.0).sum()
}

/// `count` distinct `(pair, bin)` positions drawn uniformly from the
/// candidate bins of every pair.
pub fn sample_bins(pairs: &[LabeledMatrix], span: LabelSpan, g: &MuseumGraph, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let ranges: Vec<(usize, usize)> = pairs.iter().map(|p| candidate_range(p, span, g.outside())).collect();
    let total: usize = ranges.iter().map(|r| r.1 - r.0).sum();
    if count > total {
        return Err(Error::InvalidArgument(format!(
            "asked for {count} labelled bins, only {total} available"
        )));
    }
    let mut picks: Vec<usize> = index::sample(rng, total, count).into_vec();
    picks.sort_unstable();
    let mut out = Vec::with_capacity(count);
    let mut base = 0;
    let mut p = 0;
    for flat in picks {
        while flat >= base + ranges[p].1 - ranges[p].0 {
            base += ranges[p].1 - ranges[p].0;
            p += 1;
        }
        out.push((p, ranges[p].0 + flat - base));
    }
    Ok(out)
}

/// Network inputs and targets for the picked bins.
pub fn labeled_set(pairs: &[LabeledMatrix], picks: &[(usize, usize)], spec: InputSpec) -> Result<LabeledSet> {
    let n = pairs.first().map_or(0, |p| p.matrix.n());
    let win = SmoothingWindow::new(spec.delta_minus, spec.delta_plus);
    let mut set = LabeledSet::new(input_width(n, win));
    for (p, pair) in pairs.iter().enumerate() {
        let bins: Vec<usize> = picks.iter().filter(|x| x.0 == p).map(|x| x.1).collect();
        if !bins.is_empty() {
            extend_labeled_set(&mut set, &pair.matrix, &pair.truth, spec, bins)?;
        }
    }
    Ok(set)
}

/// Generator for bin sampling, independent of the simulator streams.
pub fn sampling_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Sample `bins` labelled bins from `pairs` and train a network on them.
/// The returned model records `input`.
pub fn train_on(
    pairs: &[LabeledMatrix],
    g: &MuseumGraph,
    span: LabelSpan,
    bins: usize,
    input: InputSpec,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(NnModel, TrainReport)> {
    let picks = sample_bins(pairs, span, g, bins, rng)?;
    let set = labeled_set(pairs, &picks, input)?;
    let (mut model, report) = nn::train(&set, g.num_rooms(), cfg)?;
    model.input = Some(input);
    Ok((model, report))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub sim: SimConfig,
    /// Visitors `0..train_visitors` feed the training bins, the rest the test bins.
    pub train_visitors: usize,
    pub train_bins: usize,
    pub test_bins: usize,
    pub label_span: LabelSpan,
    pub window: SmoothingWindow,
    pub input: InputSpec,
    pub prefilter: Prefilter,
    pub train: TrainConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let window = SmoothingWindow::default();
        ProtocolConfig {
            sim: SimConfig {
                n_visitors: 40,
                ..SimConfig::default()
            },
            train_visitors: 20,
            train_bins: 5500,
            test_bins: 1000,
            label_span: LabelSpan::default(),
            window,
            input: InputSpec {
                delta_minus: window.delta_minus,
                delta_plus: window.delta_plus,
                features: Default::default(),
            },
            prefilter: Prefilter::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub am: f64,
    pub ma: f64,
    pub nn: f64,
    pub model: NnModel,
    pub report: TrainReport,
    /// Full NN reconstructions of every test visitor.
    pub nn_trajectories: Vec<Trajectory>,
}

fn score(trajs: &[Trajectory], pairs: &[LabeledMatrix], picks: &[(usize, usize)]) -> f64 {
    let hits = picks
        .iter()
        .filter(|&&(p, t)| trajs[p].rooms[t] == pairs[p].truth.rooms[t])
        .count();
    hits as f64 / picks.len() as f64
}

/// Simulate, split, train and score all three methods on one seed.
pub fn compare_methods(g: &MuseumGraph, policy: &WalkerPolicy, cfg: &ProtocolConfig) -> Result<Comparison> {
    let SimOutput { truths, sightings, .. } = simulate_visits(g, policy, &cfg.sim)?;
    let matrices = bin_sightings(&sightings, g, cfg.sim.dt_secs, DEFAULT_FLOOR_DBM)?;
    let pairs = pair_with_truth(matrices, &truths)?;
    let is_train = |lm: &LabeledMatrix| {
        truths.iter().position(|t| t.beacon == lm.matrix.beacon).is_some_and(|i| i < cfg.train_visitors)
    };
    let (train, test): (Vec<LabeledMatrix>, Vec<LabeledMatrix>) = pairs.into_iter().partition(is_train);

    let mut rng = sampling_rng(cfg.sim.seed);
    let (model, report) = train_on(&train, g, cfg.label_span, cfg.train_bins, cfg.input, &cfg.train, &mut rng)?;
    let test_picks = sample_bins(&test, cfg.label_span, g, cfg.test_bins, &mut rng)?;

    let nn_win = SmoothingWindow::new(cfg.input.delta_minus, cfg.input.delta_plus);
    let am: Vec<Trajectory> = test.iter().map(|p| argmax_reconstruct(&p.matrix, g)).collect();
    let ma: Vec<Trajectory> = test.iter().map(|p| ma_reconstruct(&p.matrix, cfg.window, g)).collect();
    let nn_trajs = test
        .iter()
        .map(|p| nn_reconstruct(&p.matrix, &model, nn_win, g, cfg.prefilter))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        am: score(&am, &test, &test_picks),
        ma: score(&ma, &test, &test_picks),
        nn: score(&nn_trajs, &test, &test_picks),
        model,
        report,
        nn_trajectories: nn_trajs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::VisitType;
    use crate::museum::RoomId;

    fn pair(beacon: &str, rooms: &[usize]) -> LabeledMatrix {
        LabeledMatrix {
            matrix: RssiMatrix::new(beacon, 0, 10_000, 2, rooms.len(), -100.0),
            truth: GroundTruth {
                beacon: beacon.into(),
                t0: 0,
                dt_ms: 10_000,
                rooms: rooms.iter().map(|&r| RoomId(r)).collect(),
                visit_type: VisitType::Normal,
            },
        }
    }

    #[test]
    fn sampled_bins_are_distinct_and_in_range() {
        let g = MuseumGraph::borghese();
        let pairs = vec![pair("a", &[0, 1, 1]), pair("b", &[9, 0, 0, 0, 9]), pair("c", &[2, 2])];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picks = sample_bins(&pairs, LabelSpan::Matrix, &g, 10, &mut rng).unwrap();
        assert_eq!(picks.len(), 10);
        let mut sorted = picks.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        assert!(picks.iter().all(|&(p, t)| t < pairs[p].matrix.m()));
        assert!(sample_bins(&pairs, LabelSpan::Matrix, &g, 11, &mut rng).is_err());

        let visit = sample_bins(&pairs, LabelSpan::Visit, &g, 8, &mut rng).unwrap();
        assert!(visit.iter().all(|&(p, t)| pairs[p].truth.rooms[t] != g.outside()));
        assert!(sample_bins(&pairs, LabelSpan::Visit, &g, 9, &mut rng).is_err());
    }
}
