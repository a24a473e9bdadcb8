//! Venue topology: rooms, receivers, doors and the room-pair weight table.
//!
//! A venue is loaded from a TOML document (see `data/borghese.toml` for the
//! annotated default). Loading validates every structural invariant so the
//! rest of the crate can index rooms and receivers without further checks.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_CONFIG: &str = include_str!("../data/borghese.toml");

/// Imaginary weight attached to every pair that has exactly one endpoint outside.
pub const OUTSIDE_WEIGHT_IM: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoomId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReceiverId(pub usize);

impl fmt::Display for RoomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ReceiverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Direction label of a door crossing, used for clockwisety.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Ccw,
    Cw,
    Neutral,
}

impl Orientation {
    pub fn reversed(self) -> Self {
        match self {
            Orientation::Ccw => Orientation::Cw,
            Orientation::Cw => Orientation::Ccw,
            Orientation::Neutral => Orientation::Neutral,
        }
    }

    /// +1 for counterclockwise, -1 for clockwise, 0 otherwise.
    pub fn score(self) -> i64 {
        match self {
            Orientation::Ccw => 1,
            Orientation::Cw => -1,
            Orientation::Neutral => 0,
        }
    }
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Name of the interior room visitors enter through.
    pub entrance: String,
    pub rooms: Vec<RoomConfig>,
    pub receivers: Vec<ReceiverConfig>,
    #[serde(default)]
    pub doors: Vec<DoorConfig>,
    #[serde(default)]
    pub special_weights: Vec<SpecialWeightConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub name: String,
    #[serde(default)]
    pub outside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    pub id: usize,
    pub room: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoorConfig {
    pub from: String,
    pub to: String,
    pub orientation: Orientation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialWeightConfig {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct Door {
    pub from: RoomId,
    pub to: RoomId,
    pub orientation: Orientation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecialWeight {
    pub a: RoomId,
    pub b: RoomId,
    pub weight: Complex64,
}

/// Validated venue topology. Immutable once built.
#[derive(Clone, Debug)]
pub struct MuseumGraph {
    names: Vec<String>,
    outside: RoomId,
    entrance: RoomId,
    receiver_rooms: Vec<RoomId>,
    doors: Vec<Door>,
    special_weights: Vec<SpecialWeight>,
    neighbors: Vec<Vec<RoomId>>,
    orientation: HashMap<(RoomId, RoomId), Orientation>,
}

/// Parse and validate a venue config.
pub fn load_graph(config_text: &str) -> Result<MuseumGraph> {
    let cfg: GraphConfig = toml::from_str(config_text).map_err(|e| {
        let line = e
            .span()
            .map(|span| config_text[..span.start.min(config_text.len())].lines().count().max(1))
            .unwrap_or(0);
        Error::parse(line, e.message().trim().to_string())
    })?;
    MuseumGraph::from_config(&cfg)
}

impl MuseumGraph {
    /// The bundled two-floor gallery fixture: 10 rooms, 14 receivers.
    pub fn borghese() -> Self {
        load_graph(DEFAULT_CONFIG).expect("bundled venue config is valid")
    }

    pub fn default_config_text() -> &'static str {
        DEFAULT_CONFIG
    }

    pub fn from_config(cfg: &GraphConfig) -> Result<Self> {
        if cfg.rooms.is_empty() {
            return Err(Error::Validation("config declares no rooms".into()));
        }
        let mut index = HashMap::new();
        for (i, room) in cfg.rooms.iter().enumerate() {
            if index.insert(room.name.clone(), RoomId(i)).is_some() {
                return Err(Error::Validation(format!("duplicate room {:?}", room.name)));
            }
        }
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownRoom(name.to_string()))
        };

        let outside: Vec<RoomId> = cfg
            .rooms
            .iter()
            .enumerate()
            .filter(|(_, r)| r.outside)
            .map(|(i, _)| RoomId(i))
            .collect();
        if outside.len() != 1 {
            return Err(Error::Validation(format!(
                "exactly one room must be flagged outside, found {}",
                outside.len()
            )));
        }
        let outside = outside[0];
        if cfg.rooms.len() < 2 {
            return Err(Error::Validation("at least one interior room is required".into()));
        }

        let entrance = lookup(&cfg.entrance)?;
        if entrance == outside {
            return Err(Error::Validation("entrance must be an interior room".into()));
        }

        let mut receiver_rooms = vec![None; cfg.receivers.len()];
        for rx in &cfg.receivers {
            let room = index.get(&rx.room).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "orphan receiver {}: room {:?} is not declared",
                    rx.id, rx.room
                ))
            })?;
            if room == outside {
                return Err(Error::Validation(format!(
                    "receiver {} is placed in the outside room",
                    rx.id
                )));
            }
            match receiver_rooms.get_mut(rx.id) {
                Some(slot @ None) => *slot = Some(room),
                Some(Some(_)) => {
                    return Err(Error::Validation(format!("duplicate receiver id {}", rx.id)))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "receiver ids must be 0..{}, got {}",
                        cfg.receivers.len(),
                        rx.id
                    )))
                }
            }
        }
        let receiver_rooms: Vec<RoomId> = receiver_rooms.into_iter().map(Option::unwrap).collect();
        if receiver_rooms.is_empty() {
            return Err(Error::Validation("config declares no receivers".into()));
        }

        let mut doors = Vec::with_capacity(cfg.doors.len());
        let mut orientation = HashMap::new();
        for d in &cfg.doors {
            let (from, to) = (lookup(&d.from)?, lookup(&d.to)?);
            if from == to {
                return Err(Error::Validation(format!("self-loop door on {:?}", d.from)));
            }
            if orientation.insert((from, to), d.orientation).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate door {:?} -> {:?}",
                    d.from, d.to
                )));
            }
            doors.push(Door {
                from,
                to,
                orientation: d.orientation,
            });
        }
        for d in &doors {
            match orientation.get(&(d.to, d.from)) {
                Some(o) if *o == d.orientation.reversed() => {}
                Some(o) => {
                    return Err(Error::Validation(format!(
                        "asymmetric door {:?} <-> {:?}: orientations {:?} and {:?} are not reverses",
                        cfg.rooms[d.from.0].name, cfg.rooms[d.to.0].name, d.orientation, o
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "asymmetric door: {:?} -> {:?} has no reverse door",
                        cfg.rooms[d.from.0].name, cfg.rooms[d.to.0].name
                    )))
                }
            }
        }

        let mut neighbors = vec![Vec::new(); cfg.rooms.len()];
        for d in &doors {
            neighbors[d.from.0].push(d.to);
        }
        for list in &mut neighbors {
            list.sort();
        }
        if !neighbors[entrance.0].contains(&outside) {
            return Err(Error::Validation(
                "the entrance must have a door to the outside room".into(),
            ));
        }

        let mut special_weights = Vec::new();
        for sw in &cfg.special_weights {
            let (a, b) = (lookup(&sw.a)?, lookup(&sw.b)?);
            if a == b {
                return Err(Error::Validation(format!(
                    "special weight on the diagonal ({:?})",
                    sw.a
                )));
            }
            let ok = sw.re.is_finite() && sw.im.is_finite() && sw.re >= 0.0 && sw.im >= 0.0;
            if !ok || (sw.re == 0.0 && sw.im == 0.0) {
                return Err(Error::Validation(format!(
                    "special weight {:?} <-> {:?} must be nonzero with nonnegative parts",
                    sw.a, sw.b
                )));
            }
            special_weights.push(SpecialWeight {
                a,
                b,
                weight: Complex64::new(sw.re, sw.im),
            });
        }

        let graph = MuseumGraph {
            names: cfg.rooms.iter().map(|r| r.name.clone()).collect(),
            outside,
            entrance,
            receiver_rooms,
            doors,
            special_weights,
            neighbors,
            orientation,
        };

        let dist = graph.interior_distances(entrance);
        if let Some(room) = graph.interior_rooms().find(|r| dist[r.0].is_none()) {
            return Err(Error::Validation(format!(
                "interior is disconnected: {:?} is unreachable from the entrance",
                graph.names[room.0]
            )));
        }
        Ok(graph)
    }

    pub fn num_rooms(&self) -> usize {
        self.names.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.receiver_rooms.len()
    }

    pub fn outside(&self) -> RoomId {
        self.outside
    }

    pub fn entrance(&self) -> RoomId {
        self.entrance
    }

    pub fn is_outside(&self, room: RoomId) -> bool {
        room == self.outside
    }

    pub fn room_name(&self, room: RoomId) -> &str {
        &self.names[room.0]
    }

    pub fn room_by_name(&self, name: &str) -> Option<RoomId> {
        self.names.iter().position(|n| n == name).map(RoomId)
    }

    pub fn rooms(&self) -> impl Iterator<Item = RoomId> {
        (0..self.names.len()).map(RoomId)
    }

    pub fn interior_rooms(&self) -> impl Iterator<Item = RoomId> + '_ {
        self.rooms().filter(move |r| *r != self.outside)
    }

    pub fn receiver_room(&self, rx: ReceiverId) -> RoomId {
        self.receiver_rooms[rx.0]
    }

    pub fn receivers_in(&self, room: RoomId) -> impl Iterator<Item = ReceiverId> + '_ {
        self.receiver_rooms
            .iter()
            .enumerate()
            .filter(move |(_, r)| **r == room)
            .map(|(i, _)| ReceiverId(i))
    }

    pub fn doors(&self) -> &[Door] {
        &self.doors
    }

    pub fn special_weights(&self) -> &[SpecialWeight] {
        &self.special_weights
    }

    /// Door neighbours of `room`, sorted by index.
    pub fn neighbors(&self, room: RoomId) -> &[RoomId] {
        &self.neighbors[room.0]
    }

    pub fn adjacent(&self, a: RoomId, b: RoomId) -> bool {
        self.orientation.contains_key(&(a, b))
    }

    /// Orientation of the door crossed when moving from `a` to `b`, if any.
    pub fn door_orientation(&self, a: RoomId, b: RoomId) -> Option<Orientation> {
        self.orientation.get(&(a, b)).copied()
    }

    /// BFS hop counts from `src` over interior rooms only.
    fn interior_distances(&self, src: RoomId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_rooms()];
        if src == self.outside {
            return dist;
        }
        dist[src.0] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.0].unwrap();
            for &v in &self.neighbors[u.0] {
                if v != self.outside && dist[v.0].is_none() {
                    dist[v.0] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Fewest-hops interior path from `a` to `b`, both endpoints included.
    ///
    /// Among equal-length paths the lexicographically smallest room-index
    /// sequence is returned.
    pub fn shortest_path(&self, a: RoomId, b: RoomId) -> Result<Vec<RoomId>> {
        self.check_interior(a)?;
        self.check_interior(b)?;
        let to_b = self.interior_distances(b);
        let mut remaining = to_b[a.0].ok_or(Error::Unreachable(a.0, b.0))?;
        let mut path = vec![a];
        let mut cur = a;
        while remaining > 0 {
            // neighbours are sorted, so the first one on a shortest path is the smallest
            cur = *self.neighbors[cur.0]
                .iter()
                .find(|v| **v != self.outside && to_b[v.0] == Some(remaining - 1))
                .expect("BFS layers are consistent");
            path.push(cur);
            remaining -= 1;
        }
        Ok(path)
    }

    fn check_interior(&self, room: RoomId) -> Result<()> {
        if room.0 >= self.num_rooms() {
            return Err(Error::InvalidArgument(format!("room {} does not exist", room.0)));
        }
        if room == self.outside {
            return Err(Error::InvalidArgument(
                "shortest paths are defined between interior rooms".into(),
            ));
        }
        Ok(())
    }
}

/// Minimum number of door crossings between two interior rooms.
pub fn shortest_hops(g: &MuseumGraph, a: RoomId, b: RoomId) -> Result<usize> {
    g.check_interior(a)?;
    g.check_interior(b)?;
    g.interior_distances(a)[b.0].ok_or(Error::Unreachable(a.0, b.0))
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

/// Symmetric table of complex room-pair costs with a zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    k: usize,
    outside: RoomId,
    w: Vec<Complex64>,
}

impl WeightTable {
    pub fn num_rooms(&self) -> usize {
        self.k
    }

    pub fn outside(&self) -> RoomId {
        self.outside
    }

    #[inline]
    pub fn get(&self, a: RoomId, b: RoomId) -> Complex64 {
        self.w[a.0 * self.k + b.0]
    }

    fn set_sym(&mut self, a: RoomId, b: RoomId, v: Complex64) {
        self.w[a.0 * self.k + b.0] = v;
        self.w[b.0 * self.k + a.0] = v;
    }
}

/// Build the room-pair weight table.
///
/// Interior pairs cost `1 + 2k`, `k` being the number of rooms crossed on a
/// fewest-hops path. Interior overrides from `special_weights` are applied
/// next. Pairs with the outside room take the (overridden) cost from the
/// entrance as real part and `10i` as imaginary part; overrides that involve
/// the outside room are applied last.
pub fn build_weight_table(g: &MuseumGraph) -> Result<WeightTable> {
    let k = g.num_rooms();
    let mut table = WeightTable {
        k,
        outside: g.outside,
        w: vec![Complex64::new(0.0, 0.0); k * k],
    };
    for a in g.interior_rooms() {
        let dist = g.interior_distances(a);
        for b in g.interior_rooms() {
            if a == b {
                continue;
            }
            let hops = dist[b.0].ok_or(Error::Unreachable(a.0, b.0))?;
            table.w[a.0 * k + b.0] = Complex64::new((2 * hops - 1) as f64, 0.0);
        }
    }
    let (interior_sw, outside_sw): (Vec<_>, Vec<_>) = g
        .special_weights
        .iter()
        .partition(|sw| sw.a != g.outside && sw.b != g.outside);
    for sw in interior_sw {
        table.set_sym(sw.a, sw.b, sw.weight);
    }
    let o = g.outside;
    for x in g.interior_rooms() {
        let re = table.get(g.entrance, x).re;
        table.set_sym(o, x, Complex64::new(re, OUTSIDE_WEIGHT_IM));
    }
    for sw in outside_sw {
        table.set_sym(sw.a, sw.b, sw.weight);
    }
    Ok(table)
}
