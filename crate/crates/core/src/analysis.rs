//! Statistics over ensembles of reconstructed trajectories.
//!
//! Durations are reported in minutes. Distances between trajectories use the
//! room-pair [`WeightTable`]: the complex costs are summed bin by bin and the
//! scalar distance is the modulus of that sum (or, optionally, the sum of the
//! per-bin moduli).

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ingest::VisitType;
use crate::museum::{MuseumGraph, RoomId, WeightTable};
use crate::reconstruct::Trajectory;

pub const DEFAULT_MIN_VISIT_MIN: f64 = 25.0;
pub const DEFAULT_MAX_VISIT_MIN: f64 = 125.0;
/// Histogram bins used when `common_paths` gets no explicit width.
pub const DEFAULT_HISTOGRAM_BINS: usize = 50;

fn bin_minutes(traj: &Trajectory) -> f64 {
    traj.dt_ms as f64 / 60_000.0
}

fn first_last_inside(traj: &Trajectory, outside: Option<RoomId>) -> Option<(usize, usize)> {
    let inside = |r: &RoomId| Some(*r) != outside;
    let first = traj.rooms.iter().position(inside)?;
    let last = traj.rooms.iter().rposition(inside)?;
    Some((first, last))
}

/// Minutes from the first to the last non-outside bin, inclusive.
pub fn time_of_visit(traj: &Trajectory, g: &MuseumGraph) -> f64 {
    match first_last_inside(traj, Some(g.outside())) {
        Some((a, b)) => (b - a + 1) as f64 * bin_minutes(traj),
        None => 0.0,
    }
}

/// Keep visits whose duration lies in `[min_min, max_min]` minutes.
pub fn filter_visits(trajs: &[Trajectory], g: &MuseumGraph, min_min: f64, max_min: f64) -> Vec<Trajectory> {
    trajs
        .iter()
        .filter(|t| {
            let tov = time_of_visit(t, g);
            tov >= min_min && tov <= max_min
        })
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisitStats {
    pub beacon: String,
    pub visit_type: Option<VisitType>,
    pub time_of_visit: f64,
    /// Minutes per room, indexed by `RoomId`; the outside room is always 0.
    pub per_room_permanence: Vec<f64>,
}

pub fn visit_stats(traj: &Trajectory, g: &MuseumGraph) -> VisitStats {
    let mut per_room = vec![0.0; g.num_rooms()];
    let per_bin = bin_minutes(traj);
    for &room in &traj.rooms {
        if room != g.outside() {
            per_room[room.0] += per_bin;
        }
    }
    VisitStats {
        beacon: traj.beacon.clone(),
        visit_type: traj.visit_type,
        time_of_visit: time_of_visit(traj, g),
        per_room_permanence: per_room,
    }
}

/// Report groups in table order: the three visit types, then unlabelled
/// trajectories. Empty groups are skipped.
const GROUP_ORDER: [Option<VisitType>; 4] = [
    Some(VisitType::Normal),
    Some(VisitType::Audioguide),
    Some(VisitType::Guide),
    None,
];

pub fn group_label(vt: Option<VisitType>) -> &'static str {
    vt.map_or("unlabelled", VisitType::as_str)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PermanenceRow {
    pub visit_type: Option<VisitType>,
    pub visits: usize,
    /// Mean minutes per room over the group's trajectories.
    pub mean_minutes: Vec<f64>,
}

pub fn time_of_permanence(trajs: &[Trajectory], g: &MuseumGraph) -> Vec<PermanenceRow> {
    let stats: Vec<VisitStats> = trajs.iter().map(|t| visit_stats(t, g)).collect();
    GROUP_ORDER
        .iter()
        .filter_map(|&vt| {
            let members: Vec<&VisitStats> = stats.iter().filter(|s| s.visit_type == vt).collect();
            if members.is_empty() {
                return None;
            }
            let mut mean = vec![0.0; g.num_rooms()];
            for s in &members {
                for (acc, v) in mean.iter_mut().zip(&s.per_room_permanence) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= members.len() as f64);
            Some(PermanenceRow {
                visit_type: vt,
                visits: members.len(),
                mean_minutes: mean,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TovRow {
    /// `None` in the label column means "unlabelled"; the final row is the
    /// whole ensemble and has `all = true`.
    pub visit_type: Option<VisitType>,
    pub all: bool,
    pub visits: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Time-of-visit mean and spread per visit type, plus an overall row.
pub fn time_of_visit_summary(trajs: &[Trajectory], g: &MuseumGraph) -> Vec<TovRow> {
    let tov: Vec<(Option<VisitType>, f64)> = trajs.iter().map(|t| (t.visit_type, time_of_visit(t, g))).collect();
    let mut rows: Vec<TovRow> = GROUP_ORDER
        .iter()
        .filter_map(|&vt| {
            let xs: Vec<f64> = tov.iter().filter(|x| x.0 == vt).map(|x| x.1).collect();
            if xs.is_empty() {
                return None;
            }
            let (mean, std) = mean_std(&xs);
            Some(TovRow {
                visit_type: vt,
                all: false,
                visits: xs.len(),
                mean,
                std,
            })
        })
        .collect();
    let xs: Vec<f64> = tov.iter().map(|x| x.1).collect();
    let (mean, std) = mean_std(&xs);
    rows.push(TovRow {
        visit_type: None,
        all: true,
        visits: xs.len(),
        mean,
        std,
    });
    rows
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Clockwisety {
    /// Counterclockwise door crossings minus clockwise ones.
    pub score: i64,
    /// Room changes between rooms without a door; they score 0.
    pub non_adjacent: usize,
}

pub fn clockwisety(traj: &Trajectory, g: &MuseumGraph) -> Clockwisety {
    let mut out = Clockwisety::default();
    for w in traj.rooms.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        match g.door_orientation(w[0], w[1]) {
            Some(o) => out.score += o.score(),
            None => out.non_adjacent += 1,
        }
    }
    out
}

/// How per-bin complex costs are turned into one scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DistanceMode {
    /// Modulus of the complex sum.
    #[default]
    NormOfSum,
    /// Sum of the per-bin moduli.
    SumOfModuli,
}

impl std::str::FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm-of-sum" => Ok(DistanceMode::NormOfSum),
            "sum-of-moduli" => Ok(DistanceMode::SumOfModuli),
            other => Err(Error::InvalidArgument(format!("unknown distance mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Distance {
    pub complex: Complex64,
    pub scalar: f64,
}

/// Room at absolute bin `t` (relative to `start`), outside beyond the ends.
#[inline]
fn room_at(traj: &Trajectory, offset: usize, t: usize, outside: RoomId) -> RoomId {
    t.checked_sub(offset)
        .and_then(|i| traj.rooms.get(i).copied())
        .unwrap_or(outside)
}

/// Distance between two trajectories.
///
/// Both are placed on a shared time axis from the earlier start to the
/// later end and padded with the outside room, so they must share a bin
/// width and bin grid.
pub fn trajectory_distance(x: &Trajectory, y: &Trajectory, w: &WeightTable, mode: DistanceMode) -> Result<Distance> {
    if x.dt_ms != y.dt_ms || x.dt_ms == 0 {
        return Err(Error::Shape(format!(
            "bin widths differ: {} ms vs {} ms",
            x.dt_ms, y.dt_ms
        )));
    }
    let dt = x.dt_ms;
    let start = x.t0.min(y.t0);
    if !(x.t0 - start).is_multiple_of(dt) || !(y.t0 - start).is_multiple_of(dt) {
        return Err(Error::Shape(format!(
            "{} and {} are not on a common bin grid",
            x.beacon, y.beacon
        )));
    }
    for traj in [x, y] {
        if let Some(r) = traj.rooms.iter().find(|r| r.0 >= w.num_rooms()) {
            return Err(Error::Shape(format!("{}: room {} outside the weight table", traj.beacon, r.0)));
        }
    }
    let ox = ((x.t0 - start) / dt) as usize;
    let oy = ((y.t0 - start) / dt) as usize;
    let m = (ox + x.m()).max(oy + y.m());
    let outside = w.outside();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut moduli = 0.0;
    for t in 0..m {
        let c = w.get(room_at(x, ox, t, outside), room_at(y, oy, t, outside));
        sum += c;
        if mode == DistanceMode::SumOfModuli {
            moduli += c.norm();
        }
    }
    let scalar = match mode {
        DistanceMode::NormOfSum => sum.norm(),
        DistanceMode::SumOfModuli => moduli,
    };
    Ok(Distance { complex: sum, scalar })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub order: Vec<String>,
    complex_d: Vec<Complex64>,
    scalar_d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn scalar(&self, i: usize, j: usize) -> f64 {
        self.scalar_d[i * self.len() + j]
    }

    pub fn complex(&self, i: usize, j: usize) -> Complex64 {
        self.complex_d[i * self.len() + j]
    }

    /// Upper-triangle scalar distances in row order.
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.scalar(i, j));
            }
        }
        out
    }
}

/// All pairwise distances. Rows are spread over the available cores; each
/// entry is computed independently, so the result does not depend on the
/// thread count.
pub fn distance_matrix(trajs: &[Trajectory], w: &WeightTable, mode: DistanceMode) -> Result<DistanceMatrix> {
    let n = trajs.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a distance matrix needs at least 2 trajectories, got {n}"
        )));
    }
    let threads = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n);
    let rows: Vec<Result<Vec<Distance>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|k| {
                s.spawn(move || {
                    (k..n)
                        .step_by(threads)
                        .map(|i| {
                            let upper: Result<Vec<Distance>> = (i + 1..n)
                                .map(|j| trajectory_distance(&trajs[i], &trajs[j], w, mode))
                                .collect();
                            (i, upper)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut rows: Vec<Option<Result<Vec<Distance>>>> = (0..n).map(|_| None).collect();
        for h in handles {
            for (i, row) in h.join().expect("distance worker panicked") {
                rows[i] = Some(row);
            }
        }
        rows.into_iter().map(|r| r.expect("every row computed")).collect()
    });

    let zero = Complex64::new(0.0, 0.0);
    let mut complex_d = vec![zero; n * n];
    let mut scalar_d = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (k, d) in row?.into_iter().enumerate() {
            let j = i + 1 + k;
            complex_d[i * n + j] = d.complex;
            complex_d[j * n + i] = d.complex;
            scalar_d[i * n + j] = d.scalar;
            scalar_d[j * n + i] = d.scalar;
        }
    }
    Ok(DistanceMatrix {
        order: trajs.iter().map(|t| t.beacon.clone()).collect(),
        complex_d,
        scalar_d,
    })
}

/// Fixed-width histogram starting at 0: bin `b` covers `[b*width, (b+1)*width)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub width: f64,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], width: f64) -> Result<Histogram> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidArgument(format!("bin width must be positive, got {width}")));
    }
    let mut counts: Vec<usize> = Vec::new();
    for &v in values {
        let b = (v.max(0.0) / width).floor() as usize;
        if b >= counts.len() {
            counts.resize(b + 1, 0);
        }
        counts[b] += 1;
    }
    Ok(Histogram { width, counts })
}

impl Histogram {
    /// Index of the fullest bin; ties go to the lower bin.
    pub fn mode_bin(&self) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None;
        for (b, &c) in self.counts.iter().enumerate() {
            if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((b, c));
            }
        }
        best.map(|(b, _)| b)
    }
}

/// Default interval width for [`common_paths`]: the largest distance over
/// [`DEFAULT_HISTOGRAM_BINS`].
pub fn default_bin_width(dm: &DistanceMatrix) -> f64 {
    let max = dm.off_diagonal().into_iter().fold(0.0, f64::max);
    if max > 0.0 {
        max / DEFAULT_HISTOGRAM_BINS as f64
    } else {
        1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommonPaths {
    pub most_common: String,
    pub least_common: String,
    /// Lower bound of each trajectory's modal distance interval, in matrix order.
    pub modal_lower: Vec<f64>,
}

/// Most and least common trajectory by the mode of their distance profile.
pub fn common_paths(dm: &DistanceMatrix, bin_width: f64) -> Result<CommonPaths> {
    let n = dm.len();
    if n < 2 {
        return Err(Error::InvalidArgument("common paths need at least 2 trajectories".into()));
    }
    let mut modal_lower = Vec::with_capacity(n);
    for i in 0..n {
        let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dm.scalar(i, j)).collect();
        let h = histogram(&others, bin_width)?;
        let b = h.mode_bin().expect("at least one distance");
        modal_lower.push(b as f64 * bin_width);
    }
    let mut most = 0;
    let mut least = 0;
    for i in 1..n {
        if modal_lower[i] < modal_lower[most] {
            most = i;
        }
        if modal_lower[i] > modal_lower[least] {
            least = i;
        }
    }
    Ok(CommonPaths {
        most_common: dm.order[most].clone(),
        least_common: dm.order[least].clone(),
        modal_lower,
    })
}

/// Linear-interpolation percentile of `values` (`q` in `[0, 100]`).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Smallest ratio between neighbouring distances that counts as a gap
/// between grouped and independent visitors.
pub const GROUP_GAP_RATIO: f64 = 1.75;

/// Default cutoff for [`detect_groups`].
///
/// Visitors moving together show up as a separate low mode of the distance
/// distribution. Among the smallest tenth of the positive off-diagonal
/// distances, the widest multiplicative gap between neighbours is found; if
/// it reaches [`GROUP_GAP_RATIO`] the cutoff is the geometric mean of the two
/// distances around it. Otherwise the cutoff is the 5th percentile capped at
/// a twentieth of the median, which keeps unrelated visitors apart.
pub fn default_group_threshold(dm: &DistanceMatrix) -> f64 {
    let d = dm.off_diagonal();
    let mut positive: Vec<f64> = d.iter().copied().filter(|&x| x > 0.0).collect();
    positive.sort_by(f64::total_cmp);
    let head = (positive.len() / 10).max(2).min(positive.len());
    let mut gap: Option<(f64, f64)> = None;
    for w in positive[..head].windows(2) {
        let ratio = w[1] / w[0];
        if gap.is_none_or(|(r, _)| ratio > r) {
            gap = Some((ratio, (w[0] * w[1]).sqrt()));
        }
    }
    let t = match gap {
        Some((ratio, cut)) if ratio >= GROUP_GAP_RATIO => cut,
        _ => percentile(&d, 5.0).min(percentile(&d, 50.0) / 20.0),
    };
    if t > 0.0 {
        t
    } else {
        f64::MIN_POSITIVE
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub members: Vec<String>,
    /// Largest distance between two members.
    pub diameter: f64,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clusters of trajectories at most `threshold` apart.
/// Singletons are left out; clusters and members follow matrix order.
pub fn detect_groups(dm: &DistanceMatrix, threshold: f64) -> Result<Vec<Cluster>> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {threshold}")));
    }
    let n = dm.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if dm.scalar(i, j) <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let root = find(&mut parent, i);
        members[root].push(i);
    }
    Ok(members
        .into_iter()
        .filter(|m| m.len() > 1)
        .map(|m| {
            let mut diameter: f64 = 0.0;
            for (a, &i) in m.iter().enumerate() {
                for &j in &m[a + 1..] {
                    diameter = diameter.max(dm.scalar(i, j));
                }
            }
            Cluster {
                members: m.iter().map(|&i| dm.order[i].clone()).collect(),
                diameter,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    pub counts: Vec<Vec<u64>>,
    /// Row-normalised counts; rows without transitions are all zero.
    pub p: Vec<Vec<f64>>,
    pub zero_rows: Vec<RoomId>,
}

impl TransitionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Room-change frequencies over consecutive bins of every trajectory.
pub fn transition_matrix(trajs: &[Trajectory], g: &MuseumGraph) -> Result<TransitionMatrix> {
    let k = g.num_rooms();
    let mut counts = vec![vec![0u64; k]; k];
    for traj in trajs {
        for w in traj.rooms.windows(2) {
            if w[0] != w[1] {
                if w[0].0 >= k || w[1].0 >= k {
                    return Err(Error::Shape(format!("{}: room index out of range", traj.beacon)));
                }
                counts[w[0].0][w[1].0] += 1;
            }
        }
    }
    let mut zero_rows = Vec::new();
    let p = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                zero_rows.push(RoomId(i));
                vec![0.0; k]
            } else {
                row.iter().map(|&c| c as f64 / total as f64).collect()
            }
        })
        .collect();
    Ok(TransitionMatrix { counts, p, zero_rows })
}

// ---------------------------------------------------------------------------
// Tabular output
// ---------------------------------------------------------------------------

/// Tab-separated: `visit_type`, `visits`, then mean minutes per interior room.
pub fn write_permanence_table<W: Write>(mut w: W, rows: &[PermanenceRow], g: &MuseumGraph) -> Result<()> {
    write!(w, "visit_type\tvisits")?;
    for room in g.interior_rooms() {
        write!(w, "\t{}", g.room_name(room))?;
    }
    writeln!(w)?;
    for row in rows {
        write!(w, "{}\t{}", group_label(row.visit_type), row.visits)?;
        for room in g.interior_rooms() {
            write!(w, "\t{:.3}", row.mean_minutes[room.0])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Tab-separated: `visit_type`, `visits`, `mean_min`, `std_min`.
pub fn write_tov_summary<W: Write>(mut w: W, rows: &[TovRow]) -> Result<()> {
    writeln!(w, "visit_type\tvisits\tmean_min\tstd_min")?;
    for row in rows {
        let label = if row.all { "all" } else { group_label(row.visit_type) };
        writeln!(w, "{label}\t{}\t{:.2}\t{:.2}", row.visits, row.mean, row.std)?;
    }
    Ok(())
}

/// Tab-separated: `lower`, `upper`, `count`.
pub fn write_histogram<W: Write>(mut w: W, h: &Histogram, origin: f64) -> Result<()> {
    writeln!(w, "lower\tupper\tcount")?;
    for (b, c) in h.counts.iter().enumerate() {
        let lo = origin + b as f64 * h.width;
        writeln!(w, "{lo}\t{}\t{c}", lo + h.width)?;
    }
    Ok(())
}

/// Plot series: bin centre and count, space-separated, one point per line.
pub fn write_series<W: Write>(mut w: W, h: &Histogram, origin: f64) -> Result<()> {
    for (b, c) in h.counts.iter().enumerate() {
        writeln!(w, "{} {c}", origin + (b as f64 + 0.5) * h.width)?;
    }
    Ok(())
}

/// Integer histogram of clockwisety scores, shifted so the lowest score is
/// bin 0. Returns the histogram and the score of bin 0.
pub fn clockwisety_histogram(scores: &[i64]) -> (Histogram, i64) {
    let lo = scores.iter().copied().min().unwrap_or(0);
    let values: Vec<f64> = scores.iter().map(|&s| (s - lo) as f64).collect();
    (histogram(&values, 1.0).expect("unit width"), lo)
}

/// Tab-separated: `cluster`, `size`, `diameter`, comma-joined members.
pub fn write_clusters<W: Write>(mut w: W, clusters: &[Cluster], threshold: f64) -> Result<()> {
    writeln!(w, "# threshold {threshold}")?;
    writeln!(w, "cluster\tsize\tdiameter\tmembers")?;
    for (i, c) in clusters.iter().enumerate() {
        writeln!(w, "{i}\t{}\t{:.3}\t{}", c.members.len(), c.diameter, c.members.join(","))?;
    }
    Ok(())
}

/// Square table with room names as header row and first column, followed by
/// a `flag` column that reads `no-data` on rows without transitions.
pub fn write_transition_matrix<W: Write>(mut w: W, tm: &TransitionMatrix, g: &MuseumGraph) -> Result<()> {
    write!(w, "from\\to")?;
    for room in g.rooms() {
        write!(w, "\t{}", g.room_name(room))?;
    }
    writeln!(w, "\tflag")?;
    for room in g.rooms() {
        write!(w, "{}", g.room_name(room))?;
        for p in &tm.p[room.0] {
            write!(w, "\t{p:.6}")?;
        }
        let flag = if tm.zero_rows.contains(&room) { "no-data" } else { "" };
        writeln!(w, "\t{flag}")?;
    }
    Ok(())
}

/// Tab-separated distance matrix with beacon ids as header.
pub fn write_distance_matrix<W: Write>(mut w: W, dm: &DistanceMatrix) -> Result<()> {
    write!(w, "beacon")?;
    for b in &dm.order {
        write!(w, "\t{b}")?;
    }
    writeln!(w)?;
    for (i, b) in dm.order.iter().enumerate() {
        write!(w, "{b}")?;
        for j in 0..dm.len() {
            write!(w, "\t{:.3}", dm.scalar(i, j))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
