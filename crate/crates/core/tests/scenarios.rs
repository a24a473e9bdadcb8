use roomtrace::analysis::{
    common_paths, default_bin_width, default_group_threshold, detect_groups, distance_matrix, percentile, time_of_permanence,
    transition_matrix, DistanceMode,
};
use roomtrace::experiment::{available_bins, pair_with_truth, sampling_rng, train_on, LabelSpan};
use roomtrace::ingest::{bin_sightings, DEFAULT_FLOOR_DBM};
use roomtrace::museum::build_weight_table;
use roomtrace::nn::{FeatureSource, InputSpec, TrainConfig};
use roomtrace::reconstruct::{argmax_reconstruct, ma_reconstruct, nn_reconstruct, Prefilter};
use roomtrace::sim::{simulate_visits, Dwell, GroupSpec, NoiseModel, SimConfig, SimOutput, WalkerPolicy};
use roomtrace::{GroundTruth, Method, MuseumGraph, RoomId, SmoothingWindow, Trajectory};

fn venue() -> MuseumGraph {
    MuseumGraph::borghese()
}

fn truths_as_trajectories(out: &SimOutput) -> Vec<Trajectory> {
    out.truths.iter().map(|gt| Trajectory::from_truth(gt, Method::Am)).collect()
}

/// Hits and total over the bins from the first to the last interior truth bin.
fn visit_hits(pred: &Trajectory, truth: &GroundTruth, g: &MuseumGraph) -> (usize, usize) {
    let inside = |r: &RoomId| !g.is_outside(*r);
    let (Some(a), Some(b)) = (truth.rooms.iter().position(inside), truth.rooms.iter().rposition(inside)) else {
        return (0, 0);
    };
    let offset = ((truth.t0 as i64 - pred.t0 as i64) / pred.dt_ms as i64) as isize;
    let hits = (a..=b)
        .filter(|&t| {
            let p = t as isize + offset;
            let room = if p >= 0 && (p as usize) < pred.rooms.len() { pred.rooms[p as usize] } else { g.outside() };
            room == truth.rooms[t]
        })
        .count();
    (hits, b - a + 1)
}

fn accuracy_over(preds: &[Trajectory], truths: &[&GroundTruth], g: &MuseumGraph) -> f64 {
    let (h, n) = preds
        .iter()
        .zip(truths)
        .map(|(p, t)| visit_hits(p, t, g))
        .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    h as f64 / n as f64
}

fn truth_of<'a>(out: &'a SimOutput, beacon: &str) -> &'a GroundTruth {
    out.truths.iter().find(|t| t.beacon == beacon).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[test]
fn zero_noise_argmax_recovers_every_bin() {
    let g = venue();
    let cfg = SimConfig { n_visitors: 30, seed: 2, noise: NoiseModel::noiseless(), ..SimConfig::default() };
    let out = simulate_visits(&g, &WalkerPolicy::borghese(&g), &cfg).unwrap();
    let matrices = bin_sightings(&out.sightings, &g, cfg.dt_secs, DEFAULT_FLOOR_DBM).unwrap();
    assert_eq!(matrices.len(), 30);
    for pair in pair_with_truth(matrices, &out.truths).unwrap() {
        let am = argmax_reconstruct(&pair.matrix, &g);
        assert_eq!(am.rooms, pair.truth.rooms, "{}", pair.matrix.beacon);
    }
}

#[test]
fn silent_receivers_mean_nobody_entered() {
    let g = venue();
    let noise = NoiseModel { dropout_p: 1.0, ..NoiseModel::default() };
    let cfg = SimConfig { n_visitors: 10, noise, ..SimConfig::default() };
    let out = simulate_visits(&g, &WalkerPolicy::borghese(&g), &cfg).unwrap();
    assert!(out.sightings.is_empty());
    assert!(bin_sightings(&out.sightings, &g, 10.0, DEFAULT_FLOOR_DBM).unwrap().is_empty());
}

#[test]
fn smoothing_beats_plain_argmax_on_noisy_data() {
    let g = venue();
    let cfg = SimConfig { n_visitors: 20, seed: 7, ..SimConfig::default() };
    let out = simulate_visits(&g, &WalkerPolicy::borghese(&g), &cfg).unwrap();
    let matrices = bin_sightings(&out.sightings, &g, cfg.dt_secs, DEFAULT_FLOOR_DBM).unwrap();
    let truths: Vec<&GroundTruth> = matrices.iter().map(|m| truth_of(&out, &m.beacon)).collect();
    let am: Vec<Trajectory> = matrices.iter().map(|m| argmax_reconstruct(m, &g)).collect();
    let ma: Vec<Trajectory> = matrices.iter().map(|m| ma_reconstruct(m, SmoothingWindow::default(), &g)).collect();
    let (a, m) = (accuracy_over(&am, &truths, &g), accuracy_over(&ma, &truths, &g));
    assert!(m > a, "am {a:.3} ma {m:.3}");
}

#[test]
fn argmax_degrades_with_jitter() {
    let g = venue();
    let policy = WalkerPolicy::borghese(&g);
    let mut medians = Vec::new();
    for jitter in [0.0, 4.0, 8.0, 12.0] {
        let accs: Vec<f64> = (0..10)
            .map(|seed| {
                let noise = NoiseModel { jitter_sd: jitter, ..NoiseModel::default() };
                let cfg = SimConfig { n_visitors: 10, seed, noise, ..SimConfig::default() };
                let out = simulate_visits(&g, &policy, &cfg).unwrap();
                let matrices = bin_sightings(&out.sightings, &g, cfg.dt_secs, DEFAULT_FLOOR_DBM).unwrap();
                let truths: Vec<&GroundTruth> = matrices.iter().map(|m| truth_of(&out, &m.beacon)).collect();
                let am: Vec<Trajectory> = matrices.iter().map(|m| argmax_reconstruct(m, &g)).collect();
                accuracy_over(&am, &truths, &g)
            })
            .collect();
        medians.push(median(accs));
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn network_overfits_noiseless_data() {
    let g = venue();
    let cfg = SimConfig { n_visitors: 2, seed: 4, noise: NoiseModel::noiseless(), ..SimConfig::default() };
    let out = simulate_visits(&g, &WalkerPolicy::borghese(&g), &cfg).unwrap();
    let matrices = bin_sightings(&out.sightings, &g, cfg.dt_secs, DEFAULT_FLOOR_DBM).unwrap();
    let pairs = pair_with_truth(matrices, &out.truths).unwrap();
    let input = InputSpec { delta_minus: 6, delta_plus: 6, features: FeatureSource::Normalized };
    let train = TrainConfig { iterations: 6000, hidden: vec![16], seed: 1, learning_rate: 1e-3, ..TrainConfig::default() };
    let mut rng = sampling_rng(1);
    let every_bin = available_bins(&pairs, LabelSpan::Visit, &g);
    let (model, report) = train_on(&pairs, &g, LabelSpan::Visit, every_bin, input, &train, &mut rng).unwrap();
    assert!(report.is_monotone());
    let win = SmoothingWindow::new(6, 6);
    for pair in &pairs {
        let nn = nn_reconstruct(&pair.matrix, &model, win, &g, Prefilter::default()).unwrap();
        let (hits, total) = visit_hits(&nn, &pair.truth, &g);
        assert_eq!(hits, total, "{}: {hits}/{total}", pair.matrix.beacon);
    }
}

#[test]
fn scripted_dwell_times_come_back_as_permanence() {
    let g = venue();
    let route: Vec<RoomId> = [0, 1, 2, 3, 4, 8, 4, 5, 6, 7, 0].map(RoomId).to_vec();
    let mut policy = WalkerPolicy::uniform(&g, Dwell { median_secs: 300.0, sigma: 0.0 });
    policy.dwell[8] = Dwell { median_secs: 1800.0, sigma: 0.0 };
    policy.dwell[1] = Dwell { median_secs: 120.0, sigma: 0.0 };
    policy.route = Some(route.clone());
    let cfg = SimConfig { n_visitors: 12, noise: NoiseModel::noiseless(), ..SimConfig::default() };
    let out = simulate_visits(&g, &policy, &cfg).unwrap();
    let rows = time_of_permanence(&truths_as_trajectories(&out), &g);
    let mut want = vec![0.0; g.num_rooms()];
    for r in &route {
        want[r.0] += policy.dwell[r.0].median_secs / 60.0;
    }
    for row in &rows {
        for r in g.interior_rooms() {
            assert!((row.mean_minutes[r.0] - want[r.0]).abs() <= 10.0 / 60.0, "{}: {} vs {}", g.room_name(r), row.mean_minutes[r.0], want[r.0]);
        }
    }
}

#[test]
fn the_dominant_route_is_the_most_common_path() {
    let g = venue();
    let mut route_policy = WalkerPolicy::uniform(&g, Dwell { median_secs: 400.0, sigma: 0.15 });
    route_policy.route = Some([0, 1, 2, 3, 4, 5, 6, 7, 0].map(RoomId).to_vec());
    route_policy.entry_delay_bins = (0, 6);
    let cfg = SimConfig { n_visitors: 24, seed: 3, noise: NoiseModel::noiseless(), ..SimConfig::default() };
    let on_route = simulate_visits(&g, &route_policy, &cfg).unwrap();
    let free = simulate_visits(&g, &WalkerPolicy::borghese(&g), &SimConfig { n_visitors: 6, ..cfg.clone() }).unwrap();
    let mut trajs = truths_as_trajectories(&on_route);
    for mut t in truths_as_trajectories(&free) {
        t.beacon = format!("free-{}", t.beacon);
        trajs.push(t);
    }
    let w = build_weight_table(&g).unwrap();
    let dm = distance_matrix(&trajs, &w, DistanceMode::NormOfSum).unwrap();
    let paths = common_paths(&dm, default_bin_width(&dm)).unwrap();
    assert!(!paths.most_common.starts_with("free-"), "{paths:?}");
    assert!(paths.least_common.starts_with("free-"), "{paths:?}");
}

#[test]
fn transition_frequencies_converge_to_the_policy() {
    let g = venue();
    let mut policy = WalkerPolicy::borghese(&g);
    policy.slot_bins = None;
    policy.min_visit_bins = 0;
    policy.entry_delay_bins = (1, 1);
    let cfg = SimConfig { n_visitors: 2500, seed: 8, noise: NoiseModel::noiseless(), ..SimConfig::default() };
    let out = simulate_visits(&g, &policy, &cfg).unwrap();
    let tm = transition_matrix(&truths_as_trajectories(&out), &g).unwrap();
    assert!(tm.total() >= 10_000, "{} transitions", tm.total());
    let want = policy.transition_probabilities(g.num_rooms());
    for (i, (row, want_row)) in tm.p.iter().zip(&want).enumerate() {
        for (j, (p, q)) in row.iter().zip(want_row).enumerate() {
            assert!((p - q).abs() <= 0.05, "{i}->{j}: {p:.3} vs {q:.3}");
        }
    }
}

#[test]
fn a_lagged_pair_is_closer_than_almost_everyone_else() {
    let g = venue();
    let mut policy = WalkerPolicy::borghese(&g);
    policy.groups = Some(GroupSpec { count: 1, size: 2, lag_bins: 1 });
    let cfg = SimConfig { n_visitors: 100, seed: 5, noise: NoiseModel::noiseless(), ..SimConfig::default() };
    let out = simulate_visits(&g, &policy, &cfg).unwrap();
    let w = build_weight_table(&g).unwrap();
    let dm = distance_matrix(&truths_as_trajectories(&out), &w, DistanceMode::NormOfSum).unwrap();
    let (a, b) = (out.groups[0][0], out.groups[0][1]);
    let mut independent = Vec::new();
    for i in 0..dm.len() {
        for j in i + 1..dm.len() {
            if (i, j) != (a, b) {
                independent.push(dm.scalar(i, j));
            }
        }
    }
    assert!(dm.scalar(a, b) < percentile(&independent, 1.0));
    let clusters = detect_groups(&dm, dm.scalar(a, b) * 1.001).unwrap();
    assert!(clusters.iter().any(|c| c.members.contains(&dm.order[a]) && c.members.contains(&dm.order[b])));
}

#[test]
fn independent_walkers_form_no_groups() {
    let g = venue();
    let cfg = SimConfig { n_visitors: 100, seed: 1, noise: NoiseModel::noiseless(), ..SimConfig::default() };
    let out = simulate_visits(&g, &WalkerPolicy::borghese(&g), &cfg).unwrap();
    let w = build_weight_table(&g).unwrap();
    let dm = distance_matrix(&truths_as_trajectories(&out), &w, DistanceMode::NormOfSum).unwrap();
    let clusters = detect_groups(&dm, default_group_threshold(&dm)).unwrap();
    assert!(clusters.is_empty(), "{clusters:?}");
}
