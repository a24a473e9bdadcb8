//! Room-per-bin trajectories from RSSI matrices.
//!
//! Three methods are provided:
//! - **AM**: column argmax of the binned matrix.
//! - **MA**: column argmax after a time-axis moving average and per-receiver
//!   z-scoring.
//! - **NN**: a trained classifier over a window of bins, bounded by a signal
//!   threshold prefilter and decoded with a door-adjacency filter.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{GroundTruth, RssiMatrix, VisitType};
use crate::museum::{MuseumGraph, ReceiverId, RoomId};
use crate::nn::{FeatureSource, InputSpec, LabeledSet, NnModel};

/// Rows whose standard deviation is below this normalize to zero.
pub const SIGMA_FLOOR: f64 = 1e-6;
/// Multiplier applied to rooms that are not reachable in one step.
pub const ADJACENCY_PENALTY: f64 = 0.01;
pub const DEFAULT_THETA_DBM: f64 = -85.0;
pub const DEFAULT_MIN_RUN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Am,
    Ma,
    Nn,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Am => "am",
            Method::Ma => "ma",
            Method::Nn => "nn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "am" => Ok(Method::Am),
            "ma" => Ok(Method::Ma),
            "nn" => Ok(Method::Nn),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub beacon: String,
    pub t0: u64,
    pub dt_ms: u64,
    pub rooms: Vec<RoomId>,
    pub visit_type: Option<VisitType>,
    pub method: Method,
}

impl Trajectory {
    pub fn m(&self) -> usize {
        self.rooms.len()
    }

    /// Wrap a ground truth as a trajectory (useful for analysing labels).
    pub fn from_truth(gt: &GroundTruth, method: Method) -> Self {
        Trajectory {
            beacon: gt.beacon.clone(),
            t0: gt.t0,
            dt_ms: gt.dt_ms,
            rooms: gt.rooms.clone(),
            visit_type: Some(gt.visit_type),
            method,
        }
    }

    /// Compact run-length form: `(room, first bin, last bin)` per stay.
    pub fn runs(&self) -> Vec<(RoomId, usize, usize)> {
        let mut out: Vec<(RoomId, usize, usize)> = Vec::new();
        for (t, &room) in self.rooms.iter().enumerate() {
            match out.last_mut() {
                Some(run) if run.0 == room => run.2 = t,
                _ => out.push((room, t, t)),
            }
        }
        out
    }
}

/// Bins before (`delta_minus`) and after (`delta_plus`) the current one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmoothingWindow {
    pub delta_minus: usize,
    pub delta_plus: usize,
}

impl Default for SmoothingWindow {
    fn default() -> Self {
        SmoothingWindow {
            delta_minus: 6,
            delta_plus: 6,
        }
    }
}

impl SmoothingWindow {
    pub fn new(delta_minus: usize, delta_plus: usize) -> Self {
        SmoothingWindow {
            delta_minus,
            delta_plus,
        }
    }

    pub fn width(&self) -> usize {
        1 + self.delta_minus + self.delta_plus
    }

    /// Clamped inclusive bin range around `t` in a matrix of `m` bins.
    fn range(&self, t: usize, m: usize) -> (usize, usize) {
        (t.saturating_sub(self.delta_minus), (t + self.delta_plus).min(m - 1))
    }
}

/// Column argmax over receivers; ties go to the lowest receiver index.
/// Returns `None` when every receiver sits at or below the floor.
fn column_argmax(r: &RssiMatrix, t: usize) -> Option<ReceiverId> {
    let mut best: Option<(usize, f64)> = None;
    for rx in 0..r.n() {
        let v = r.get(rx, t);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((rx, v));
        }
    }
    best.filter(|&(_, v)| v > r.floor).map(|(rx, _)| ReceiverId(rx))
}

fn trajectory(r: &RssiMatrix, rooms: Vec<RoomId>, method: Method) -> Trajectory {
    Trajectory {
        beacon: r.beacon.clone(),
        t0: r.t0,
        dt_ms: r.dt_ms,
        rooms,
        visit_type: None,
        method,
    }
}

/// Strongest receiver per bin, mapped to its room. Silent bins are outside.
pub fn argmax_reconstruct(r: &RssiMatrix, g: &MuseumGraph) -> Trajectory {
    let rooms = (0..r.m())
        .map(|t| column_argmax(r, t).map_or(g.outside(), |rx| g.receiver_room(rx)))
        .collect();
    trajectory(r, rooms, Method::Am)
}

/// Time-axis moving average, window clamped at the edges.
pub fn moving_average(r: &RssiMatrix, win: SmoothingWindow) -> RssiMatrix {
    let m = r.m();
    let mut out = Vec::with_capacity(r.n() * m);
    for rx in 0..r.n() {
        let row = r.row(rx);
        for t in 0..m {
            let (lo, hi) = win.range(t, m);
            // offsets from the centre value keep constant stretches exact
            let anchor = row[t];
            let dev: f64 = row[lo..=hi].iter().map(|v| v - anchor).sum();
            out.push(anchor + dev / (hi - lo + 1) as f64);
        }
    }
    r.with_values(out)
}

/// Per-receiver z-scores (population standard deviation). Rows whose
/// standard deviation is below [`SIGMA_FLOOR`] become all zero.
pub fn normalize_rows(r: &RssiMatrix) -> RssiMatrix {
    let m = r.m() as f64;
    let mut out = r.clone();
    for rx in 0..r.n() {
        let row = out.row_mut(rx);
        let mean = row.iter().sum::<f64>() / m;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
        let sigma = var.sqrt();
        if sigma < SIGMA_FLOOR {
            row.fill(0.0);
            continue;
        }
        for v in row.iter_mut() {
            *v = (*v - mean) / sigma;
        }
    }
    out
}

/// Argmax of the smoothed and normalised matrix.
///
/// A bin whose whole window received no sample at all is outside.
pub fn ma_reconstruct(r: &RssiMatrix, win: SmoothingWindow, g: &MuseumGraph) -> Trajectory {
    let m = r.m();
    let smoothed = normalize_rows(&moving_average(r, win));
    let col_cov: Vec<u32> = (0..m).map(|t| r.column_coverage(t)).collect();
    let rooms = (0..m)
        .map(|t| {
            let (lo, hi) = win.range(t, m);
            if col_cov[lo..=hi].iter().all(|&c| c == 0) {
                return g.outside();
            }
            let mut best = 0;
            for rx in 1..smoothed.n() {
                if smoothed.get(rx, t) > smoothed.get(best, t) {
                    best = rx;
                }
            }
            g.receiver_room(ReceiverId(best))
        })
        .collect();
    trajectory(r, rooms, Method::Ma)
}

/// Threshold prefilter parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prefilter {
    /// dBm a column maximum must reach.
    pub theta: f64,
    /// Minimum run length, in bins.
    pub min_run: usize,
}

impl Default for Prefilter {
    fn default() -> Self {
        Prefilter {
            theta: DEFAULT_THETA_DBM,
            min_run: DEFAULT_MIN_RUN,
        }
    }
}

/// First and last bin of the in-museum span, or `None` if the beacon never
/// entered.
///
/// The span starts at the first run of at least `k` consecutive bins whose
/// column maximum reaches `theta` and ends at the last bin of the last such
/// run.
pub fn threshold_prefilter(r: &RssiMatrix, theta: f64, k: usize) -> Option<(usize, usize)> {
    let k = k.max(1);
    let mut first = None;
    let mut last = None;
    let mut run_start = 0;
    let mut run_len = 0;
    for t in 0..r.m() {
        let max = (0..r.n()).map(|rx| r.get(rx, t)).fold(f64::NEG_INFINITY, f64::max);
        if max >= theta {
            if run_len == 0 {
                run_start = t;
            }
            run_len += 1;
            if run_len >= k {
                first.get_or_insert(run_start);
                last = Some(t);
            }
        } else {
            run_len = 0;
        }
    }
    first.zip(last)
}

/// Pick the next room given the previous one.
///
/// Rooms that are neither `prev` nor a door neighbour of it are scaled by
/// `penalty`. Whenever a reachable room has positive probability the choice
/// is restricted to reachable rooms; the penalised rooms only compete when
/// every reachable entry is zero. Ties go to the lowest room index.
pub fn adjacency_filter(p: &[f64], prev: RoomId, g: &MuseumGraph, penalty: f64) -> RoomId {
    let feasible = |i: usize| i == prev.0 || g.adjacent(prev, RoomId(i));
    let masked: Vec<f64> = p
        .iter()
        .enumerate()
        .map(|(i, &v)| if feasible(i) { v } else { v * penalty })
        .collect();
    let total: f64 = masked.iter().sum();
    let masked: Vec<f64> = if total > 0.0 {
        masked.iter().map(|v| v / total).collect()
    } else {
        masked
    };
    let any_feasible = masked.iter().enumerate().any(|(i, &v)| feasible(i) && v > 0.0);
    let mut best: Option<usize> = None;
    for (i, &v) in masked.iter().enumerate() {
        if any_feasible && !feasible(i) {
            continue;
        }
        if best.is_none_or(|b| v > masked[b]) {
            best = Some(i);
        }
    }
    RoomId(best.unwrap_or(prev.0))
}

/// The matrix transform named by `source`.
pub fn feature_matrix(r: &RssiMatrix, win: SmoothingWindow, source: FeatureSource) -> RssiMatrix {
    match source {
        FeatureSource::Raw => r.clone(),
        FeatureSource::Smoothed => moving_average(r, win),
        FeatureSource::Normalized => normalize_rows(r),
        FeatureSource::SmoothedNormalized => normalize_rows(&moving_average(r, win)),
    }
}

/// Flattened window of columns around bin `t`, offset-major
/// (`out[(offset) * n + receiver]`). Columns past either edge repeat the
/// boundary column.
pub fn window_features(f: &RssiMatrix, t: usize, win: SmoothingWindow, out: &mut Vec<f64>) {
    out.clear();
    let m = f.m() as isize;
    for off in -(win.delta_minus as isize)..=(win.delta_plus as isize) {
        let col = (t as isize + off).clamp(0, m - 1) as usize;
        out.extend((0..f.n()).map(|rx| f.get(rx, col)));
    }
}

/// Network input width for `n` receivers and window `win`.
pub fn input_width(n: usize, win: SmoothingWindow) -> usize {
    n * win.width()
}

/// Add every bin of `r` to `set` with its ground-truth room as target.
pub fn extend_labeled_set(set: &mut LabeledSet, r: &RssiMatrix, truth: &GroundTruth, spec: InputSpec, bins: impl IntoIterator<Item = usize>) -> Result<()> {
    if truth.m() != r.m() {
        return Err(Error::Shape(format!(
            "labels cover {} bins, matrix has {}",
            truth.m(),
            r.m()
        )));
    }
    let win = SmoothingWindow::new(spec.delta_minus, spec.delta_plus);
    let f = feature_matrix(r, win, spec.features);
    let mut buf = Vec::with_capacity(input_width(r.n(), win));
    for t in bins {
        window_features(&f, t, win, &mut buf);
        set.push(&buf, truth.rooms[t].0)?;
    }
    Ok(())
}

/// Per-bin room probabilities from the network, for every bin of `r`.
pub fn nn_probabilities(r: &RssiMatrix, model: &NnModel, win: SmoothingWindow) -> Result<Vec<Vec<f64>>> {
    let need = input_width(r.n(), win);
    if model.input_dim() != need {
        return Err(Error::Shape(format!(
            "model expects {} inputs, {} receivers x {} bins give {}",
            model.input_dim(),
            r.n(),
            win.width(),
            need
        )));
    }
    let source = model.input.map(|s| s.features).unwrap_or_default();
    let f = feature_matrix(r, win, source);
    let mut buf = Vec::with_capacity(need);
    (0..r.m())
        .map(|t| {
            window_features(&f, t, win, &mut buf);
            model.forward(&buf)
        })
        .collect()
}

/// Network reconstruction bounded by the prefilter and decoded with the
/// adjacency filter, starting from the entrance.
pub fn nn_reconstruct(r: &RssiMatrix, model: &NnModel, win: SmoothingWindow, g: &MuseumGraph, prefilter: Prefilter) -> Result<Trajectory> {
    if model.output_dim() != g.num_rooms() {
        return Err(Error::Shape(format!(
            "model has {} outputs, venue has {} rooms",
            model.output_dim(),
            g.num_rooms()
        )));
    }
    let probs = nn_probabilities(r, model, win)?;
    let mut rooms = vec![g.outside(); r.m()];
    if let Some((enter, exit)) = threshold_prefilter(r, prefilter.theta, prefilter.min_run) {
        let mut prev = g.entrance();
        for t in enter..=exit {
            prev = adjacency_filter(&probs[t], prev, g, ADJACENCY_PENALTY);
            rooms[t] = prev;
        }
    }
    Ok(trajectory(r, rooms, Method::Nn))
}

/// Fraction of bins where prediction and label agree.
pub fn accuracy(pred: &Trajectory, truth: &GroundTruth) -> Result<f64> {
    let (hits, total) = accuracy_counts(pred, truth)?;
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}

/// `(matching bins, total bins)`.
pub fn accuracy_counts(pred: &Trajectory, truth: &GroundTruth) -> Result<(usize, usize)> {
    if pred.m() != truth.m() {
        return Err(Error::Shape(format!(
            "prediction has {} bins, labels have {}",
            pred.m(),
            truth.m()
        )));
    }
    let hits = pred.rooms.iter().zip(&truth.rooms).filter(|(a, b)| a == b).count();
    Ok((hits, pred.m()))
}

pub const TRAJECTORY_HEADER: &str = "# roomtrace trajectories v1";

/// Tab-separated trajectory file: a version comment, a column header, then
/// `beacon`, `method`, `visit_type` (`-` if unknown), `t0_ms`, `dt_ms` and
/// the comma-separated room index of every bin.
pub fn write_trajectories<W: Write>(mut w: W, trajs: &[Trajectory]) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    writeln!(w, "beacon\tmethod\tvisit_type\tt0_ms\tdt_ms\trooms")?;
    for t in trajs {
        let vt = t.visit_type.map_or("-", VisitType::as_str);
        write!(w, "{}\t{}\t{vt}\t{}\t{}\t", t.beacon, t.method, t.t0, t.dt_ms)?;
        for (i, r) in t.rooms.iter().enumerate() {
            if i > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{}", r.0)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Read a file written by [`write_trajectories`]; room indices are checked
/// against `g`.
pub fn read_trajectories<R: BufRead>(reader: R, g: &MuseumGraph) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') || line.starts_with("beacon\t") {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::parse(lineno, format!("expected 6 columns, found {}", cols.len())));
        }
        let num = |s: &str, what: &str| s.parse::<u64>().map_err(|_| Error::parse(lineno, format!("bad {what} {s:?}")));
        let method = cols[1].parse::<Method>().map_err(|e| Error::parse(lineno, e.to_string()))?;
        let visit_type = match cols[2] {
            "-" => None,
            s => Some(s.parse::<VisitType>().map_err(|e| Error::parse(lineno, e.to_string()))?),
        };
        let dt_ms = num(cols[4], "dt_ms")?;
        if dt_ms == 0 {
            return Err(Error::parse(lineno, "dt_ms must be positive"));
        }
        let rooms = if cols[5].is_empty() {
            Vec::new()
        } else {
            cols[5]
                .split(',')
                .map(|r| {
                    let idx = num(r, "room index")? as usize;
                    if idx >= g.num_rooms() {
                        return Err(Error::parse(lineno, format!("room index {idx} out of range")));
                    }
                    Ok(RoomId(idx))
                })
                .collect::<Result<Vec<_>>>()?
        };
        out.push(Trajectory {
            beacon: cols[0].to_string(),
            t0: num(cols[3], "t0_ms")?,
            dt_ms,
            rooms,
            visit_type,
            method,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLOOR: f64 = -100.0;

    fn g() -> MuseumGraph {
        MuseumGraph::borghese()
    }

    fn mat(rows: &[Vec<f64>]) -> RssiMatrix {
        RssiMatrix::from_rows("b", 0, 10_000, FLOOR, rows).unwrap()
    }

    fn floor_matrix(m: usize) -> RssiMatrix {
        RssiMatrix::new("b", 0, 10_000, 14, m, FLOOR)
    }

    #[test]
    fn argmax_picks_the_strongest_receiver() {
        let mut r = floor_matrix(1);
        r.set(5, 0, -60.0);
        r.set(2, 0, -70.0);
        let tr = argmax_reconstruct(&r, &g());
        assert_eq!(tr.rooms, vec![g().receiver_room(ReceiverId(5))]);
    }

    #[test]
    fn silent_column_is_outside() {
        let tr = argmax_reconstruct(&floor_matrix(3), &g());
        assert_eq!(tr.rooms, vec![g().outside(); 3]);
    }

    #[test]
    fn argmax_ties_go_to_the_lower_receiver() {
        let mut r = floor_matrix(1);
        r.set(9, 0, -60.0);
        r.set(4, 0, -60.0);
        let tr = argmax_reconstruct(&r, &g());
        assert_eq!(tr.rooms, vec![g().receiver_room(ReceiverId(4))]);
    }

    #[test]
    fn moving_average_of_constant_is_constant() {
        let r = mat(&[vec![-70.0; 9], vec![-55.5; 9]]);
        assert_eq!(moving_average(&r, SmoothingWindow::default()), r);
    }

    #[test]
    fn spike_spreads_over_three_bins() {
        let r = mat(&[vec![-100.0, -100.0, -40.0, -100.0, -100.0]]);
        let s = moving_average(&r, SmoothingWindow::new(1, 1));
        assert_eq!(s.row(0), &[-100.0, -80.0, -80.0, -80.0, -100.0]);
    }

    #[test]
    fn edges_use_the_actual_window_size() {
        let r = mat(&[vec![-40.0, -100.0, -100.0, -100.0]]);
        let s = moving_average(&r, SmoothingWindow::new(1, 1));
        assert_eq!(s.get(0, 0), -70.0);
        assert_eq!(s.get(0, 3), -100.0);
    }

    #[test]
    fn zero_window_is_identity() {
        let r = mat(&[vec![-40.0, -71.3, -100.0], vec![-63.0, -50.1, -99.9]]);
        assert_eq!(moving_average(&r, SmoothingWindow::new(0, 0)), r);
    }

    #[test]
    fn normalize_two_values() {
        let n = normalize_rows(&mat(&[vec![-100.0, -60.0]]));
        assert_eq!(n.row(0), &[-1.0, 1.0]);
    }

    #[test]
    fn constant_row_normalizes_to_zero() {
        let n = normalize_rows(&mat(&[vec![-80.0; 5]]));
        assert!(n.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ma_on_silent_matrix_is_all_outside() {
        let tr = ma_reconstruct(&floor_matrix(20), SmoothingWindow::default(), &g());
        assert_eq!(tr.rooms, vec![g().outside(); 20]);
    }

    #[test]
    fn prefilter_cases() {
        assert_eq!(threshold_prefilter(&floor_matrix(10), -85.0, 3), None);
        let loud = mat(&[vec![-60.0; 7]]);
        assert_eq!(threshold_prefilter(&loud, -85.0, 3), Some((0, 6)));
        let blip = mat(&[vec![-100.0, -100.0, -60.0, -100.0, -100.0]]);
        assert_eq!(threshold_prefilter(&blip, -85.0, 3), None);
        let two_runs = mat(&[vec![-60.0, -100.0, -60.0, -60.0, -60.0, -100.0, -70.0, -70.0, -70.0, -70.0, -60.0]]);
        assert_eq!(threshold_prefilter(&two_runs, -85.0, 3), Some((2, 10)));
    }

    #[test]
    fn adjacency_filter_follows_a_confident_neighbour() {
        let g = g();
        let prev = g.room_by_name("Portico").unwrap();
        let salone = g.room_by_name("Salone").unwrap();
        let mut p = vec![0.01; 10];
        p[salone.0] = 0.91;
        assert_eq!(adjacency_filter(&p, prev, &g, ADJACENCY_PENALTY), salone);
    }

    #[test]
    fn adjacency_filter_penalises_jumps() {
        let g = g();
        let prev = g.room_by_name("Portico").unwrap();
        let far = g.room_by_name("David").unwrap();
        let mut p = vec![0.001 / 8.0; 10];
        p[far.0] = 0.50;
        p[prev.0] = 0.49;
        assert_eq!(adjacency_filter(&p, prev, &g, ADJACENCY_PENALTY), prev);
        // the restriction holds even when the jump would win the penalised product
        let mut p = vec![0.0; 10];
        p[far.0] = 0.999;
        p[prev.0] = 0.001;
        assert_eq!(adjacency_filter(&p, prev, &g, ADJACENCY_PENALTY), prev);
    }

    #[test]
    fn adjacency_filter_uniform_goes_to_lowest_feasible() {
        let g = g();
        let prev = g.room_by_name("Caravaggio").unwrap();
        // feasible: Portico(0), Enea(6), Caravaggio(7)
        assert_eq!(adjacency_filter(&[0.1; 10], prev, &g, ADJACENCY_PENALTY), RoomId(0));
    }

    #[test]
    fn adjacency_filter_falls_back_when_nothing_feasible() {
        let g = g();
        let prev = g.room_by_name("Portico").unwrap();
        let mut p = vec![0.0; 10];
        p[4] = 1.0;
        assert_eq!(adjacency_filter(&p, prev, &g, ADJACENCY_PENALTY), RoomId(4));
    }

    #[test]
    fn window_features_repeat_edges() {
        let r = mat(&[vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0]]);
        let mut buf = Vec::new();
        window_features(&r, 0, SmoothingWindow::new(2, 1), &mut buf);
        assert_eq!(buf, vec![1.0, 10.0, 1.0, 10.0, 1.0, 10.0, 2.0, 20.0]);
        window_features(&r, 2, SmoothingWindow::new(0, 2), &mut buf);
        assert_eq!(buf, vec![3.0, 30.0, 3.0, 30.0, 3.0, 30.0]);
    }

    #[test]
    fn nn_never_entered_is_all_outside() {
        let g = g();
        let model = NnModel::zeros(&[182, 4, 10]).unwrap();
        let tr = nn_reconstruct(&floor_matrix(12), &model, SmoothingWindow::default(), &g, Prefilter::default()).unwrap();
        assert_eq!(tr.rooms, vec![g.outside(); 12]);
    }

    #[test]
    fn nn_shape_mismatch() {
        let model = NnModel::zeros(&[100, 4, 10]).unwrap();
        let err = nn_reconstruct(&floor_matrix(12), &model, SmoothingWindow::default(), &g(), Prefilter::default());
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn accuracy_examples() {
        let truth = |rooms: Vec<usize>| GroundTruth {
            beacon: "b".into(),
            t0: 0,
            dt_ms: 10_000,
            rooms: rooms.into_iter().map(RoomId).collect(),
            visit_type: VisitType::Normal,
        };
        let pred = |rooms: Vec<usize>| Trajectory::from_truth(&truth(rooms), Method::Am);
        assert_eq!(accuracy(&pred(vec![0, 1, 2]), &truth(vec![0, 1, 2])).unwrap(), 1.0);
        assert_eq!(accuracy(&pred(vec![0, 1, 2, 3]), &truth(vec![0, 1, 5, 5])).unwrap(), 0.5);
        let a = accuracy(&pred(vec![0, 0, 1]), &truth(vec![0, 1, 1])).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
        assert!(accuracy(&pred(vec![0]), &truth(vec![0, 1])).is_err());
    }

    #[test]
    fn runs_compress_stays() {
        let t = Trajectory {
            beacon: "b".into(),
            t0: 0,
            dt_ms: 10_000,
            rooms: vec![RoomId(9), RoomId(0), RoomId(0), RoomId(1)],
            visit_type: None,
            method: Method::Am,
        };
        assert_eq!(t.runs(), vec![(RoomId(9), 0, 0), (RoomId(0), 1, 2), (RoomId(1), 3, 3)]);
    }

    #[test]
    fn trajectory_file_round_trip() {
        let g = MuseumGraph::borghese();
        let trajs = vec![
            Trajectory {
                beacon: "a".into(),
                t0: 20_000,
                dt_ms: 10_000,
                rooms: vec![RoomId(9), RoomId(0), RoomId(1)],
                visit_type: Some(VisitType::Guide),
                method: Method::Ma,
            },
            Trajectory {
                beacon: "b".into(),
                t0: 0,
                dt_ms: 10_000,
                rooms: vec![],
                visit_type: None,
                method: Method::Nn,
            },
        ];
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &trajs).unwrap();
        assert_eq!(read_trajectories(&buf[..], &g).unwrap(), trajs);
        let bad = format!("{TRAJECTORY_HEADER}\na\tam\t-\t0\t10000\t0,12\n");
        match read_trajectories(bad.as_bytes(), &g) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
