//! Seeded visit simulator.
//!
//! Visitors walk the door graph bin by bin under a [`WalkerPolicy`] and carry
//! a beacon that is heard by the receivers of the occupied room (strong) and
//! of door-adjacent rooms (leakage), with Gaussian jitter, per-receiver gain
//! offsets, sample dropout and occasional stray pickups while queueing
//! outside. Every visitor draws from its own ChaCha stream `(seed, index)`,
//! so results do not depend on the order visitors are simulated in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::error::{Error, Result};
use crate::ingest::{dt_to_ms, GroundTruth, Sighting, VisitType, DEFAULT_DT_SECS};
use crate::museum::{MuseumGraph, ReceiverId, RoomId};

/// Epoch ms of the default slot start (aligned to a 10 s boundary).
pub const DEFAULT_SLOT_START_MS: u64 = 1_567_000_000_000;
const VENUE_STREAM: u64 = u64::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    /// Mean dBm at a receiver in the occupied room.
    pub base_rssi: f64,
    /// Mean dBm at receivers of door-adjacent rooms.
    pub neighbor_rssi: f64,
    /// Standard deviation of per-sample Gaussian noise.
    pub jitter_sd: f64,
    /// Probability that one receiver misses one emission.
    pub dropout_p: f64,
    /// Seconds between beacon emissions.
    pub sample_period: f64,
    /// Standard deviation of the fixed per-receiver gain offset.
    pub receiver_gain_sd: f64,
    /// Standard deviation of a per beacon-receiver offset, drawn once per
    /// visitor (how the beacon is worn relative to each receiver).
    pub link_gain_sd: f64,
    /// Probability per emission that an entrance receiver picks up a beacon
    /// that is still outside.
    pub stray_p: f64,
    pub stray_rssi: f64,
    /// Samples at or below this level are never reported.
    pub sensitivity: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            base_rssi: -55.0,
            neighbor_rssi: -80.0,
            jitter_sd: 6.0,
            dropout_p: 0.2,
            sample_period: 2.0,
            receiver_gain_sd: 0.0,
            link_gain_sd: 18.0,
            stray_p: 0.05,
            stray_rssi: -92.0,
            sensitivity: -100.0,
        }
    }
}

impl NoiseModel {
    /// Deterministic levels: no jitter, no dropout, no gain spread, no strays.
    pub fn noiseless() -> Self {
        NoiseModel {
            jitter_sd: 0.0,
            dropout_p: 0.0,
            receiver_gain_sd: 0.0,
            link_gain_sd: 0.0,
            stray_p: 0.0,
            ..NoiseModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("noise model: {msg}")));
        if !(self.base_rssi > self.neighbor_rssi && self.neighbor_rssi > self.sensitivity) {
            return bad("levels must satisfy base > neighbor > sensitivity");
        }
        if !(0.0..=1.0).contains(&self.dropout_p) || !(0.0..=1.0).contains(&self.stray_p) {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(self.jitter_sd >= 0.0 && self.receiver_gain_sd >= 0.0 && self.link_gain_sd >= 0.0) {
            return bad("standard deviations must be nonnegative");
        }
        if !(self.sample_period > 0.0 && self.sample_period.is_finite()) {
            return bad("sample period must be positive");
        }
        Ok(())
    }
}

/// Lognormal dwell time, parameterised by its median.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dwell {
    pub median_secs: f64,
    /// Standard deviation of the log dwell time.
    pub sigma: f64,
}

/// Visitors moving together: `size` members, each `lag_bins` behind the
/// previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    pub count: usize,
    pub size: usize,
    pub lag_bins: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkerPolicy {
    /// Per room, indexed by `RoomId`.
    pub dwell: Vec<Dwell>,
    /// Per room, weights over its door neighbours (the outside room may
    /// appear as a neighbour of the entrance and means leaving).
    pub next: Vec<Vec<(RoomId, f64)>>,
    /// Fixed route followed by every visitor instead of random choices.
    pub route: Option<Vec<RoomId>>,
    pub groups: Option<GroupSpec>,
    /// Uniform range of outside bins before entering.
    pub entry_delay_bins: (usize, usize),
    /// Leaving is not chosen before this many bins inside.
    pub min_visit_bins: usize,
    /// Bins in the slot; visitors head for the exit in time to leave before
    /// it ends. `None` means no limit (the walk only ends by choosing to leave).
    pub slot_bins: Option<usize>,
    /// Relative frequency of Normal, Audioguide and Guide visits.
    pub visit_mix: [f64; 3],
    /// Dwell multiplier per visit type, same order as `visit_mix`.
    pub dwell_scale: [f64; 3],
    /// Log-space standard deviation of a per-visitor pace factor that
    /// scales every dwell time of that visitor.
    pub pace_sigma: f64,
}

impl WalkerPolicy {
    /// Equal weights over all door neighbours and the same dwell everywhere.
    pub fn uniform(g: &MuseumGraph, dwell: Dwell) -> Self {
        WalkerPolicy {
            dwell: vec![dwell; g.num_rooms()],
            next: g
                .rooms()
                .map(|r| g.neighbors(r).iter().map(|&n| (n, 1.0)).collect())
                .collect(),
            route: None,
            groups: None,
            entry_delay_bins: (0, 0),
            min_visit_bins: 0,
            slot_bins: None,
            visit_mix: [1.0, 0.0, 0.0],
            dwell_scale: [1.0; 3],
            pace_sigma: 0.0,
        }
    }

    /// A policy for the bundled venue: mostly counterclockwise tours of the
    /// ring, long stays upstairs, at least 50 minutes inside, two-hour slots.
    pub fn borghese(g: &MuseumGraph) -> Self {
        let name = |n: &str| g.room_by_name(n).expect("bundled venue room");
        let mut policy = WalkerPolicy::uniform(
            g,
            Dwell {
                median_secs: 240.0,
                sigma: 0.5,
            },
        );
        policy.dwell[name("Portico").0] = Dwell {
            median_secs: 150.0,
            sigma: 0.5,
        };
        policy.dwell[name("Pinacoteca").0] = Dwell {
            median_secs: 1200.0,
            sigma: 0.4,
        };
        for room in g.interior_rooms() {
            policy.next[room.0] = g
                .neighbors(room)
                .iter()
                .map(|&n| {
                    let w = match g.door_orientation(room, n) {
                        Some(crate::museum::Orientation::Ccw) => 3.0,
                        Some(crate::museum::Orientation::Cw) => 1.0,
                        _ if n == g.outside() => 1.5,
                        _ => 1.0,
                    };
                    (n, w)
                })
                .collect();
        }
        policy.entry_delay_bins = (0, 180);
        policy.min_visit_bins = 300;
        policy.pace_sigma = 0.3;
        policy.slot_bins = Some(720);
        policy.visit_mix = [819.0, 57.0, 24.0];
        policy.dwell_scale = [1.0, 1.15, 1.2];
        policy
    }

    pub fn validate(&self, g: &MuseumGraph) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("walker policy: {msg}")));
        if self.dwell.len() != g.num_rooms() || self.next.len() != g.num_rooms() {
            return bad("per-room tables must cover every room".into());
        }
        for d in &self.dwell {
            if !(d.median_secs > 0.0 && d.sigma >= 0.0 && d.median_secs.is_finite()) {
                return bad("dwell times must be positive".into());
            }
        }
        for room in g.interior_rooms() {
            let weights = &self.next[room.0];
            if weights.iter().any(|&(n, w)| !(w >= 0.0 && w.is_finite()) || !g.adjacent(room, n)) {
                return bad(format!(
                    "room {:?}: next-room weights must be nonnegative and over door neighbours",
                    g.room_name(room)
                ));
            }
            if self.route.is_none() && weights.iter().map(|w| w.1).sum::<f64>() <= 0.0 {
                return bad(format!("room {:?}: next-room weights sum to zero", g.room_name(room)));
            }
        }
        if let Some(route) = &self.route {
            check_route(g, route)?;
        }
        if let Some(gs) = self.groups {
            if gs.size < 2 {
                return bad("groups need at least two members".into());
            }
        }
        if self.entry_delay_bins.0 > self.entry_delay_bins.1 {
            return bad("entry delay range is reversed".into());
        }
        if self.visit_mix.iter().any(|w| !(*w >= 0.0)) || self.visit_mix.iter().sum::<f64>() <= 0.0 {
            return bad("visit mix must be nonnegative with a positive sum".into());
        }
        if self.dwell_scale.iter().any(|s| !(*s > 0.0)) {
            return bad("dwell scales must be positive".into());
        }
        if !(self.pace_sigma >= 0.0 && self.pace_sigma.is_finite()) {
            return bad("pace sigma must be nonnegative".into());
        }
        Ok(())
    }

    /// Transition probabilities implied by `next` (rows of rooms without
    /// weights are all zero).
    pub fn transition_probabilities(&self, k: usize) -> Vec<Vec<f64>> {
        let mut p = vec![vec![0.0; k]; k];
        for (i, weights) in self.next.iter().enumerate() {
            let total: f64 = weights.iter().map(|w| w.1).sum();
            if total > 0.0 {
                for &(n, w) in weights {
                    p[i][n.0] += w / total;
                }
            }
        }
        p
    }
}

fn check_route(g: &MuseumGraph, rooms: &[RoomId]) -> Result<()> {
    if rooms.is_empty() {
        return Err(Error::InvalidArgument("route is empty".into()));
    }
    if let Some(r) = rooms.iter().find(|r| r.0 >= g.num_rooms()) {
        return Err(Error::InvalidArgument(format!("room {} does not exist", r.0)));
    }
    for w in rooms.windows(2) {
        if !g.adjacent(w[0], w[1]) {
            return Err(Error::InvalidArgument(format!(
                "route steps from {:?} to {:?} without a door",
                g.room_name(w[0]),
                g.room_name(w[1])
            )));
        }
    }
    Ok(())
}

/// Expand a room sequence with per-room dwell counts into a per-bin truth.
pub fn scripted_route(g: &MuseumGraph, rooms: &[RoomId], dwell_bins: &[usize]) -> Result<GroundTruth> {
    if rooms.len() != dwell_bins.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rooms but {} dwell counts",
            rooms.len(),
            dwell_bins.len()
        )));
    }
    check_route(g, rooms)?;
    let per_bin = rooms
        .iter()
        .zip(dwell_bins)
        .flat_map(|(&r, &d)| std::iter::repeat_n(r, d))
        .collect();
    Ok(GroundTruth {
        beacon: "scripted".into(),
        t0: DEFAULT_SLOT_START_MS,
        dt_ms: dt_to_ms(DEFAULT_DT_SECS)?,
        rooms: per_bin,
        visit_type: VisitType::Normal,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n_visitors: usize,
    pub seed: u64,
    pub dt_secs: f64,
    pub slot_start_ms: u64,
    pub noise: NoiseModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_visitors: 100,
            seed: 0,
            dt_secs: DEFAULT_DT_SECS,
            slot_start_ms: DEFAULT_SLOT_START_MS,
            noise: NoiseModel::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    /// Per visitor, bins from the slot start to the end of its walk.
    pub truths: Vec<GroundTruth>,
    /// All sightings, ordered by (timestamp, beacon, receiver).
    pub sightings: Vec<Sighting>,
    /// Groups as lists of visitor indices.
    pub groups: Vec<Vec<usize>>,
}

pub fn beacon_name(index: usize) -> String {
    format!("b{index:04}")
}

fn visitor_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[(RoomId, f64)]) -> Option<RoomId> {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if total <= 0.0 {
        return None;
    }
    let mut x = rng.random::<f64>() * total;
    for &(room, w) in weights {
        if x < w {
            return Some(room);
        }
        x -= w;
    }
    weights.iter().rev().find(|w| w.1 > 0.0).map(|w| w.0)
}

fn sample_visit_type<R: Rng>(rng: &mut R, mix: &[f64; 3]) -> VisitType {
    let total: f64 = mix.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (vt, w) in VisitType::ALL.iter().zip(mix) {
        if x < *w {
            return *vt;
        }
        x -= w;
    }
    VisitType::Normal
}

/// Bins spent in `room`, at least one.
fn sample_dwell<R: Rng>(rng: &mut R, d: Dwell, scale: f64, dt_secs: f64) -> usize {
    let secs = if d.sigma > 0.0 {
        LogNormal::new(d.median_secs.ln(), d.sigma)
            .expect("validated dwell")
            .sample(rng)
    } else {
        d.median_secs
    };
    ((secs * scale / dt_secs).round() as usize).max(1)
}

/// Room per bin for one walker, from the slot start until it is back outside.
fn walk<R: Rng>(g: &MuseumGraph, policy: &WalkerPolicy, vt: VisitType, dt_secs: f64, rng: &mut R) -> Vec<RoomId> {
    let (lo, hi) = policy.entry_delay_bins;
    let delay = rng.random_range(lo..=hi);
    let mut rooms = vec![g.outside(); delay];
    let mut scale = policy.dwell_scale[VisitType::ALL.iter().position(|v| *v == vt).unwrap()];
    if policy.pace_sigma > 0.0 {
        scale *= LogNormal::new(0.0, policy.pace_sigma).expect("validated sigma").sample(rng);
    }

    if let Some(route) = &policy.route {
        for &room in route {
            let d = sample_dwell(rng, policy.dwell[room.0], scale, dt_secs);
            rooms.extend(std::iter::repeat_n(room, d));
        }
        rooms.push(g.outside());
        return rooms;
    }

    let deadline = policy.slot_bins;
    let mut room = g.entrance();
    let entered = rooms.len();
    loop {
        let mut d = sample_dwell(rng, policy.dwell[room.0], scale, dt_secs);
        if let Some(end) = deadline {
            // leave enough bins to walk back out before the slot ends
            let back = g.shortest_path(room, g.entrance()).map(|p| p.len()).unwrap_or(1);
            let latest = end.saturating_sub(back + rooms.len());
            d = d.min(latest.max(1));
        }
        rooms.extend(std::iter::repeat_n(room, d));
        let inside = rooms.len() - entered;
        let must_leave = deadline.is_some_and(|end| {
            let back = g.shortest_path(room, g.entrance()).map(|p| p.len()).unwrap_or(1);
            // one spare bin in case the next room is a step farther out
            rooms.len() + back + 1 >= end
        });
        let next = if must_leave {
            if room == g.entrance() {
                g.outside()
            } else {
                g.shortest_path(room, g.entrance()).expect("connected interior")[1]
            }
        } else {
            let allowed: Vec<(RoomId, f64)> = policy.next[room.0]
                .iter()
                .copied()
                .filter(|&(n, _)| n != g.outside() || inside >= policy.min_visit_bins)
                .collect();
            match pick_weighted(rng, &allowed) {
                Some(n) => n,
                None => match pick_weighted(rng, &policy.next[room.0]) {
                    Some(n) => n,
                    None => g.outside(),
                },
            }
        };
        if next == g.outside() {
            break;
        }
        room = next;
        if rooms.len() > 1_000_000 {
            // a policy that never leaves; cut the walk rather than loop forever
            break;
        }
    }
    rooms.push(g.outside());
    rooms
}

/// Per-receiver gain offsets of the simulated venue.
pub fn receiver_gains(g: &MuseumGraph, noise: &NoiseModel, seed: u64) -> Vec<f64> {
    let mut rng = visitor_rng(seed, VENUE_STREAM);
    if noise.receiver_gain_sd == 0.0 {
        return vec![0.0; g.num_receivers()];
    }
    let normal = Normal::new(0.0, noise.receiver_gain_sd).expect("validated sd");
    (0..g.num_receivers()).map(|_| normal.sample(&mut rng)).collect()
}

/// Emit the sightings of one visitor whose room timeline is `rooms`.
#[allow(clippy::too_many_arguments)]
fn emit<R: Rng>(g: &MuseumGraph, cfg: &SimConfig, dt_ms: u64, gains: &[f64], beacon: &str, rooms: &[RoomId], rng: &mut R, out: &mut Vec<Sighting>) {
    let noise = &cfg.noise;
    let gains: Vec<f64> = if noise.link_gain_sd > 0.0 {
        let link = Normal::new(0.0, noise.link_gain_sd).expect("validated sd");
        gains.iter().map(|g| g + link.sample(rng)).collect()
    } else {
        gains.to_vec()
    };
    let period_ms = (noise.sample_period * 1000.0).round().max(1.0) as u64;
    let phase = rng.random_range(0..period_ms);
    let span = rooms.len() as u64 * dt_ms;
    let jitter = Normal::new(0.0, noise.jitter_sd).expect("validated sd");
    let entrance_rx: Vec<ReceiverId> = g.receivers_in(g.entrance()).collect();
    let mut offset = phase;
    while offset < span {
        let ts = cfg.slot_start_ms + offset;
        let room = rooms[(offset / dt_ms) as usize];
        let mut hear = |rx: ReceiverId, level: f64, rng: &mut R| {
            if noise.dropout_p > 0.0 && rng.random::<f64>() < noise.dropout_p {
                return;
            }
            let mut rssi = level + gains[rx.0];
            if noise.jitter_sd > 0.0 {
                rssi += jitter.sample(rng);
            }
            if rssi > noise.sensitivity {
                out.push(Sighting {
                    beacon: beacon.to_string(),
                    receiver: rx,
                    rssi,
                    timestamp: ts,
                });
            }
        };
        if room == g.outside() {
            if noise.stray_p > 0.0 && rng.random::<f64>() < noise.stray_p {
                let rx = entrance_rx[rng.random_range(0..entrance_rx.len())];
                hear(rx, noise.stray_rssi, rng);
            }
        } else {
            for rx in 0..g.num_receivers() {
                let rx = ReceiverId(rx);
                let at = g.receiver_room(rx);
                if at == room {
                    hear(rx, noise.base_rssi, rng);
                } else if g.adjacent(room, at) {
                    hear(rx, noise.neighbor_rssi, rng);
                }
            }
        }
        offset += period_ms;
    }
}

/// Simulate `cfg.n_visitors` visits.
///
/// Visitors `0..count*size` form the groups of `policy.groups` (leader
/// first); the rest walk independently. Truths start at the slot start.
pub fn simulate_visits(g: &MuseumGraph, policy: &WalkerPolicy, cfg: &SimConfig) -> Result<SimOutput> {
    policy.validate(g)?;
    cfg.noise.validate()?;
    let dt_ms = dt_to_ms(cfg.dt_secs)?;
    if !cfg.slot_start_ms.is_multiple_of(dt_ms) {
        return Err(Error::InvalidArgument("slot start must lie on a bin boundary".into()));
    }
    let gains = receiver_gains(g, &cfg.noise, cfg.seed);

    let mut groups = Vec::new();
    if let Some(gs) = policy.groups {
        let grouped = (gs.count * gs.size).min(cfg.n_visitors);
        for start in (0..grouped).step_by(gs.size) {
            groups.push((start..(start + gs.size).min(grouped)).collect::<Vec<_>>());
        }
    }

    let mut truths = Vec::with_capacity(cfg.n_visitors);
    let mut sightings = Vec::new();
    let mut leader_walk: Option<(Vec<RoomId>, VisitType)> = None;
    for i in 0..cfg.n_visitors {
        let mut rng = visitor_rng(cfg.seed, i as u64);
        let position_in_group = groups.iter().find_map(|grp| grp.iter().position(|&v| v == i));
        let (rooms, vt) = match (position_in_group, &leader_walk) {
            (Some(pos), Some((lead, vt))) if pos > 0 => {
                let lag = policy.groups.map_or(0, |gs| gs.lag_bins) * pos;
                let mut rooms = vec![g.outside(); lag];
                rooms.extend_from_slice(lead);
                (rooms, *vt)
            }
            _ => {
                let vt = sample_visit_type(&mut rng, &policy.visit_mix);
                let rooms = walk(g, policy, vt, cfg.dt_secs, &mut rng);
                if position_in_group == Some(0) {
                    leader_walk = Some((rooms.clone(), vt));
                }
                (rooms, vt)
            }
        };
        let mut rooms = rooms;
        if let Some(end) = policy.slot_bins {
            if rooms.len() < end {
                rooms.resize(end, g.outside());
            }
        }
        let beacon = beacon_name(i);
        emit(g, cfg, dt_ms, &gains, &beacon, &rooms, &mut rng, &mut sightings);
        truths.push(GroundTruth {
            beacon,
            t0: cfg.slot_start_ms,
            dt_ms,
            rooms,
            visit_type: vt,
        });
    }
    sightings.sort_by(|a, b| {
        (a.timestamp, &a.beacon, a.receiver).cmp(&(b.timestamp, &b.beacon, b.receiver))
    });
    Ok(SimOutput {
        truths,
        sightings,
        groups,
    })
}
