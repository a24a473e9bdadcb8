mod common;

use common::oracle::{self, Lcg};
use roomtrace::analysis::{clockwisety, trajectory_distance, DistanceMode};
use roomtrace::ingest::bin_sightings;
use roomtrace::museum::{build_weight_table, shortest_hops};
use roomtrace::nn::{LabeledSet, NnModel};
use roomtrace::reconstruct::{moving_average, normalize_rows};
use roomtrace::{MuseumGraph, ReceiverId, RoomId, RssiMatrix, Sighting, SmoothingWindow, Trajectory};

fn venue() -> MuseumGraph {
    MuseumGraph::borghese()
}

fn room(g: &MuseumGraph, name: &str) -> RoomId {
    g.room_by_name(name).unwrap()
}

fn traj(t0: u64, rooms: Vec<RoomId>) -> Trajectory {
    Trajectory {
        beacon: "x".into(),
        t0,
        dt_ms: 10_000,
        rooms,
        visit_type: None,
        method: roomtrace::Method::Am,
    }
}

#[test]
fn forward_matches_the_loop_oracle() {
    let mut rng = Lcg(3);
    for seed in 0..12 {
        let sizes = [182, 64, 10];
        let model = NnModel::random(&sizes, 0.05 + seed as f64 * 0.1, seed).unwrap();
        let x: Vec<f64> = (0..182).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let got = model.forward(&x).unwrap();
        let want = oracle::forward(&model, &x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn batched_loss_matches_the_loop_oracle() {
    let mut rng = Lcg(11);
    let model = NnModel::random(&[7, 5, 4, 3], 0.7, 2).unwrap();
    let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..7).map(|_| rng.uniform(-2.0, 2.0)).collect()).collect();
    let targets: Vec<usize> = (0..40).map(|_| rng.below(3)).collect();
    let set = LabeledSet::from_rows(&rows, &targets).unwrap();
    assert!((model.loss(&set).unwrap() - oracle::loss(&model, &set)).abs() < 1e-10);
}

#[test]
fn gradients_match_central_differences() {
    let shapes: [&[usize]; 4] = [&[4, 3, 2], &[6, 5, 4], &[3, 4, 4, 3], &[5, 2]];
    for seed in 0..12u64 {
        let sizes = shapes[seed as usize % shapes.len()];
        let err = oracle::gradient_check(sizes, seed, 9);
        assert!(err < 1e-4, "seed {seed}, shape {sizes:?}: relative error {err:e}");
    }
}

#[test]
fn venue_weights_follow_the_hop_rule_and_stairs_overrides() {
    let g = venue();
    let w = build_weight_table(&g).unwrap();
    let stairs = room(&g, "Ratto di Proserpina");
    let upstairs = room(&g, "Pinacoteca");
    for a in g.interior_rooms().filter(|&a| a != upstairs) {
        for b in g.interior_rooms().filter(|&b| b != upstairs && b != a) {
            let h = shortest_hops(&g, a, b).unwrap();
            assert_eq!(w.get(a, b).re, (2 * h - 1) as f64);
        }
        let walk = if a == stairs { 0.0 } else { w.get(a, stairs).re };
        assert_eq!(w.get(a, upstairs).re, 15.0 + walk, "{}", g.room_name(a));
    }
    // one intermediate room
    assert_eq!(w.get(room(&g, "Portico"), room(&g, "Paolina")).re, 3.0);
    // antipodal on the ring of eight
    assert_eq!(shortest_hops(&g, room(&g, "Portico"), stairs).unwrap(), 4);
    for x in g.interior_rooms() {
        let o = w.get(g.outside(), x);
        assert_eq!((o.re, o.im), (w.get(g.entrance(), x).re, 10.0));
    }
}

#[test]
fn a_25_second_span_fills_three_bins() {
    let g = venue();
    let s = |ts: u64| Sighting {
        beacon: "b".into(),
        receiver: ReceiverId(0),
        rssi: -60.0,
        timestamp: 1_000_000 + ts,
    };
    let m = bin_sightings(&[s(0), s(12_000), s(25_000)], &g, 10.0, -100.0).unwrap();
    assert_eq!(m[0].m(), 3);
}

#[test]
fn spike_is_spread_by_the_window_mean() {
    let r = RssiMatrix::from_rows("b", 0, 10_000, -100.0, &[vec![-100.0, -100.0, -40.0, -100.0, -100.0]]).unwrap();
    let s = moving_average(&r, SmoothingWindow::new(1, 1));
    let want = [-100.0, -80.0, -80.0, -80.0, -100.0];
    for (t, w) in want.iter().enumerate() {
        assert!((s.get(0, t) - w).abs() < 1e-12);
    }
    let z = normalize_rows(&RssiMatrix::from_rows("b", 0, 10_000, -100.0, &[vec![-100.0, -60.0]]).unwrap());
    assert_eq!(z.row(0), &[-1.0, 1.0]);
}

#[test]
fn distances_match_the_padded_sum_oracle() {
    let g = venue();
    let w = build_weight_table(&g).unwrap();
    let mut rng = Lcg(5);
    for _ in 0..300 {
        let walk = |rng: &mut Lcg| {
            let len = 1 + rng.below(60);
            let mut r = RoomId(rng.below(g.num_rooms()));
            (0..len)
                .map(|_| {
                    if rng.below(4) == 0 {
                        let nb = g.neighbors(r);
                        r = nb[rng.below(nb.len())];
                    }
                    r
                })
                .collect::<Vec<_>>()
        };
        let x = traj(1_000_000 + 10_000 * rng.below(10) as u64, walk(&mut rng));
        let y = traj(1_000_000 + 10_000 * rng.below(10) as u64, walk(&mut rng));
        let d = trajectory_distance(&x, &y, &w, DistanceMode::NormOfSum).unwrap();
        let (re, im) = oracle::distance(&x, &y, &w);
        assert!((d.complex.re - re).abs() < 1e-9 && (d.complex.im - im).abs() < 1e-9);
        assert!((d.scalar - re.hypot(im)).abs() < 1e-9);
    }
}

#[test]
fn lagged_copy_distance_is_the_sum_of_its_run_changes() {
    let g = venue();
    let w = build_weight_table(&g).unwrap();
    let rooms: Vec<RoomId> = [0, 0, 1, 1, 1, 2, 2].iter().map(|&r| RoomId(r)).collect();
    let x = traj(0, rooms.clone());
    let y = traj(10_000, rooms);
    let d = trajectory_distance(&x, &y, &w, DistanceMode::NormOfSum).unwrap();
    // outside/Portico at the head, two door crossings, Paolina/outside at the tail
    let tail = w.get(RoomId(2), g.outside());
    let head = w.get(RoomId(0), g.outside());
    let want = (head.re + 1.0 + 1.0 + tail.re, head.im + tail.im);
    assert_eq!((d.complex.re, d.complex.im), want);
}

#[test]
fn clockwisety_fixtures() {
    let g = venue();
    let ring: Vec<RoomId> = (0..8).map(RoomId).collect();
    let mut tour = ring.clone();
    tour.push(RoomId(0));
    assert_eq!(clockwisety(&traj(0, tour.clone()), &g).score, 8);

    let mut back = tour.clone();
    back.extend([7, 6, 5, 4].map(RoomId));
    assert_eq!(clockwisety(&traj(0, back.clone()), &g).score, 4);

    let mut both = back.clone();
    both.extend(back.iter().rev());
    assert_eq!(clockwisety(&traj(0, both), &g).score, 0);

    let mut reversed = tour;
    reversed.reverse();
    assert_eq!(clockwisety(&traj(0, reversed), &g).score, -8);
}
