//! Distribution network graph and the topology queries the simulator needs:
//! island detection, critical-load energization, and simple-path counting.
//!
//! A [`Network`] is validated once on construction and is immutable
//! afterwards, so it can be shared freely between parallel trials.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hazard::{FragilityCurve, HazardError};

/// Default saturation cap for simple-path enumeration.
pub const DEFAULT_PATH_CAP: u64 = 1_000_000;

/// Slack used when comparing aggregate source capacity against demand.
const CAPACITY_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("failed to read network file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed network document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate bus id {0:?}")]
    DuplicateBus(String),
    #[error("duplicate line id {0:?}")]
    DuplicateLine(String),
    #[error("line {line:?} references unknown bus {bus:?}")]
    DanglingLine { line: String, bus: String },
    #[error("line {0:?} connects a bus to itself")]
    SelfLoop(String),
    #[error("source #{index} references unknown bus {bus:?}")]
    DanglingSource { index: usize, bus: String },
    #[error("network must have exactly one substation, found {0}")]
    SubstationCount(usize),
    #[error("source #{index} at bus {bus:?} has non-positive capacity {capacity_kw}")]
    SourceCapacity {
        index: usize,
        bus: String,
        capacity_kw: f64,
    },
    #[error("bus {bus:?}: {reason}")]
    InvalidBus { bus: String, reason: String },
    #[error("line {line:?} has an invalid fragility curve: {source}")]
    InvalidFragility {
        line: String,
        #[source]
        source: HazardError,
    },
    #[error("critical load {0:?} is not supplied by the substation in the intact topology")]
    UnservedCriticalLoad(String),
    #[error("unknown line id {0:?}")]
    UnknownLine(String),
    #[error("unknown bus id {0:?}")]
    UnknownBus(String),
    #[error("unknown source index {0}")]
    UnknownSource(usize),
}

/// Operating mode of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// No restoration within the horizon; only the substation supplies load.
    Base,
    /// DGs and remote-controlled tie switches enable phase-4 pickup.
    Smart,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Smart => "smart",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Mode::Base),
            "smart" => Ok(Mode::Smart),
            other => Err(format!("unknown network mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Substation,
    Dg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(default)]
    pub load_kw: f64,
    #[serde(default)]
    pub is_critical: bool,
    /// Criticality weight; only meaningful for critical loads.
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    /// Normally-open tie switch.
    #[serde(default)]
    pub is_tie: bool,
    #[serde(default)]
    pub is_switchable: bool,
    pub fragility: FragilityCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub bus: String,
    pub kind: SourceKind,
    pub capacity_kw: f64,
    /// DG that only participates in smart-mode operation.
    #[serde(default)]
    pub smart_only: bool,
}

/// Index of a source within [`Network::sources`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceId(pub usize);

/// Membership set over the lines of one network, indexed by line position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LineMask(Vec<bool>);

impl LineMask {
    pub fn empty(n_lines: usize) -> Self {
        LineMask(vec![false; n_lines])
    }

    pub fn full(n_lines: usize) -> Self {
        LineMask(vec![true; n_lines])
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        LineMask(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn contains(&self, line: usize) -> bool {
        self.0[line]
    }

    pub fn insert(&mut self, line: usize) {
        self.0[line] = true;
    }

    pub fn remove(&mut self, line: usize) {
        self.0[line] = false;
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn union(&self, other: &LineMask) -> LineMask {
        LineMask(self.0.iter().zip(&other.0).map(|(a, b)| *a || *b).collect())
    }
}

/// Connected components of a network snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Islands {
    label: Vec<usize>,
    count: usize,
}

impl Islands {
    /// Component label of a bus; labels are dense in `0..count()` and
    /// ordered by the lowest bus index in each component.
    pub fn component_of(&self, bus: usize) -> usize {
        self.label[bus]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Bus indices grouped per component.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (bus, &c) in self.label.iter().enumerate() {
            out[c].push(bus);
        }
        out
    }
}

/// Result of a saturating path count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathCount {
    pub count: u64,
    pub saturated: bool,
}

#[derive(Debug, Deserialize)]
struct RawNetwork {
    #[serde(default)]
    mode: Option<Mode>,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    sources: Vec<Source>,
    #[serde(flatten)]
    extra: BTreeMap<String, serde_json::Value>,
}

/// Validated distribution network.
#[derive(Debug, Clone)]
pub struct Network {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    sources: Vec<Source>,
    mode: Mode,
    bus_index: HashMap<String, usize>,
    line_index: HashMap<String, usize>,
    ends: Vec<(usize, usize)>,
    source_bus: Vec<usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
    critical: Vec<usize>,
    substation: SourceId,
}

impl Network {
    pub fn new(
        buses: Vec<Bus>,
        lines: Vec<Line>,
        sources: Vec<Source>,
        mode: Mode,
    ) -> Result<Self, GridError> {
        let mut bus_index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if bus_index.insert(bus.id.clone(), i).is_some() {
                return Err(GridError::DuplicateBus(bus.id.clone()));
            }
            if !(bus.load_kw.is_finite() && bus.load_kw >= 0.0) {
                return Err(GridError::InvalidBus {
                    bus: bus.id.clone(),
                    reason: format!("load_kw must be a nonnegative number, got {}", bus.load_kw),
                });
            }
            if bus.is_critical && !(bus.weight.is_finite() && bus.weight > 0.0) {
                return Err(GridError::InvalidBus {
                    bus: bus.id.clone(),
                    reason: format!("critical load weight must be positive, got {}", bus.weight),
                });
            }
        }

        let mut line_index = HashMap::with_capacity(lines.len());
        let mut ends = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line_index.insert(line.id.clone(), i).is_some() {
                return Err(GridError::DuplicateLine(line.id.clone()));
            }
            let lookup = |bus: &str| {
                bus_index.get(bus).copied().ok_or_else(|| GridError::DanglingLine {
                    line: line.id.clone(),
                    bus: bus.to_string(),
                })
            };
            let a = lookup(&line.from_bus)?;
            let b = lookup(&line.to_bus)?;
            if a == b {
                return Err(GridError::SelfLoop(line.id.clone()));
            }
            line.fragility
                .validate()
                .map_err(|source| GridError::InvalidFragility {
                    line: line.id.clone(),
                    source,
                })?;
            ends.push((a, b));
        }

        let mut source_bus = Vec::with_capacity(sources.len());
        let mut substations = Vec::new();
        for (i, src) in sources.iter().enumerate() {
            let bus = bus_index
                .get(&src.bus)
                .copied()
                .ok_or_else(|| GridError::DanglingSource {
                    index: i,
                    bus: src.bus.clone(),
                })?;
            if !(src.capacity_kw.is_finite() && src.capacity_kw > 0.0) {
                return Err(GridError::SourceCapacity {
                    index: i,
                    bus: src.bus.clone(),
                    capacity_kw: src.capacity_kw,
                });
            }
            if src.kind == SourceKind::Substation {
                substations.push(i);
            }
            source_bus.push(bus);
        }
        if substations.len() != 1 {
            return Err(GridError::SubstationCount(substations.len()));
        }

        let mut adjacency = vec![Vec::new(); buses.len()];
        for (l, &(a, b)) in ends.iter().enumerate() {
            adjacency[a].push((l, b));
            adjacency[b].push((l, a));
        }

        let critical = buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_critical)
            .map(|(i, _)| i)
            .collect();

        let net = Network {
            buses,
            lines,
            sources,
            mode,
            bus_index,
            line_index,
            ends,
            source_bus,
            adjacency,
            critical,
            substation: SourceId(substations[0]),
        };
        net.check_intact_supply()?;
        Ok(net)
    }

    /// Every critical load must be connected to, and supplied by, the
    /// substation when nothing has failed and all ties are open.
    fn check_intact_supply(&self) -> Result<(), GridError> {
        let none = LineMask::empty(self.lines.len());
        let energized = self.energized_buses(&none, &none, &[self.substation]);
        match self.critical.iter().find(|&&b| !energized[b]) {
            Some(&b) => Err(GridError::UnservedCriticalLoad(self.buses[b].id.clone())),
            None => Ok(()),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, GridError> {
        let raw: RawNetwork = serde_json::from_str(text)?;
        for key in raw.extra.keys() {
            log::warn!("network document: ignoring unknown field {key:?}");
        }
        Network::new(
            raw.buses,
            raw.lines,
            raw.sources,
            raw.mode.unwrap_or(Mode::Base),
        )
    }

    pub fn with_mode(&self, mode: Mode) -> Network {
        let mut net = self.clone();
        net.mode = mode;
        net
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn substation(&self) -> SourceId {
        self.substation
    }

    pub fn line_ends(&self, line: usize) -> (usize, usize) {
        self.ends[line]
    }

    pub fn source_bus(&self, src: SourceId) -> usize {
        self.source_bus[src.0]
    }

    /// Bus indices of critical loads, in bus order.
    pub fn critical_buses(&self) -> &[usize] {
        &self.critical
    }

    pub fn n_critical(&self) -> usize {
        self.critical.len()
    }

    pub fn bus_index(&self, id: &str) -> Result<usize, GridError> {
        self.bus_index
            .get(id)
            .copied()
            .ok_or_else(|| GridError::UnknownBus(id.to_string()))
    }

    pub fn line_index(&self, id: &str) -> Result<usize, GridError> {
        self.line_index
            .get(id)
            .copied()
            .ok_or_else(|| GridError::UnknownLine(id.to_string()))
    }

    pub fn line_mask<I, S>(&self, ids: I) -> Result<LineMask, GridError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut mask = LineMask::empty(self.lines.len());
        for id in ids {
            mask.insert(self.line_index(id.as_ref())?);
        }
        Ok(mask)
    }

    pub fn line_ids(&self, mask: &LineMask) -> Vec<&str> {
        mask.iter().map(|l| self.lines[l].id.as_str()).collect()
    }

    pub fn tie_mask(&self) -> LineMask {
        LineMask::from_bools(self.lines.iter().map(|l| l.is_tie).collect())
    }

    /// Tie switches that can be operated remotely during restoration.
    pub fn switchable_ties(&self) -> Vec<usize> {
        let mut ties: Vec<usize> = (0..self.lines.len())
            .filter(|&l| self.lines[l].is_tie && self.lines[l].is_switchable)
            .collect();
        ties.sort_by(|&a, &b| self.lines[a].id.cmp(&self.lines[b].id));
        ties
    }

    /// Sources participating in the given mode: the substation, plus every DG
    /// in smart mode, plus DGs not flagged `smart_only` in base mode.
    pub fn active_sources(&self, mode: Mode) -> Vec<SourceId> {
        self.sources
            .iter()
            .enumerate()
            .filter(|(_, s)| match (mode, s.kind) {
                (_, SourceKind::Substation) => true,
                (Mode::Smart, SourceKind::Dg) => true,
                (Mode::Base, SourceKind::Dg) => !s.smart_only,
            })
            .map(|(i, _)| SourceId(i))
            .collect()
    }

    #[inline]
    fn line_closed(&self, line: usize, failed: &LineMask, closed_ties: &LineMask) -> bool {
        !failed.contains(line) && (!self.lines[line].is_tie || closed_ties.contains(line))
    }

    /// Connected components over non-tie unfailed lines plus closed,
    /// unfailed ties.
    pub fn islands(&self, failed: &LineMask, closed_ties: &LineMask) -> Islands {
        let mut dsu = DisjointSets::new(self.buses.len());
        for (l, &(a, b)) in self.ends.iter().enumerate() {
            if self.line_closed(l, failed, closed_ties) {
                dsu.union(a, b);
            }
        }
        dsu.into_islands()
    }

    /// Bus-id partition for a snapshot given by line ids.
    pub fn islands_by_id<F, C>(&self, failed: F, closed_ties: C) -> Result<Vec<Vec<String>>, GridError>
    where
        F: IntoIterator,
        F::Item: AsRef<str>,
        C: IntoIterator,
        C::Item: AsRef<str>,
    {
        let failed = self.line_mask(failed)?;
        let closed = self.line_mask(closed_ties)?;
        Ok(self
            .islands(&failed, &closed)
            .members()
            .into_iter()
            .map(|m| m.into_iter().map(|b| self.buses[b].id.clone()).collect())
            .collect())
    }

    /// Per-island supply balance: (active source capacity, critical demand).
    pub(crate) fn island_balance(
        &self,
        islands: &Islands,
        active: &[SourceId],
    ) -> Vec<(f64, f64)> {
        let mut balance = vec![(0.0, 0.0); islands.count()];
        for &src in active {
            let c = islands.component_of(self.source_bus[src.0]);
            balance[c].0 += self.sources[src.0].capacity_kw;
        }
        for &b in &self.critical {
            balance[islands.component_of(b)].1 += self.buses[b].load_kw;
        }
        balance
    }

    pub(crate) fn island_served(capacity: f64, demand: f64) -> bool {
        capacity > 0.0 && demand <= capacity + CAPACITY_EPS
    }

    /// Per-bus flag: the bus lies in an island that holds an active source
    /// whose aggregate capacity covers the island's critical demand.
    pub fn energized_buses(
        &self,
        failed: &LineMask,
        closed_ties: &LineMask,
        active: &[SourceId],
    ) -> Vec<bool> {
        let islands = self.islands(failed, closed_ties);
        self.energized_on(&islands, active)
    }

    pub(crate) fn energized_on(&self, islands: &Islands, active: &[SourceId]) -> Vec<bool> {
        let served: Vec<bool> = self
            .island_balance(islands, active)
            .into_iter()
            .map(|(cap, dem)| Network::island_served(cap, dem))
            .collect();
        (0..self.buses.len())
            .map(|b| served[islands.component_of(b)])
            .collect()
    }

    /// Ids of energized critical loads.
    pub fn energized_critical_loads(
        &self,
        failed: &LineMask,
        closed_ties: &LineMask,
        active: &[SourceId],
    ) -> Result<BTreeSet<String>, GridError> {
        if let Some(bad) = active.iter().find(|s| s.0 >= self.sources.len()) {
            return Err(GridError::UnknownSource(bad.0));
        }
        let energized = self.energized_buses(failed, closed_ties, active);
        Ok(self
            .critical
            .iter()
            .filter(|&&b| energized[b])
            .map(|&b| self.buses[b].id.clone())
            .collect())
    }

    /// Number of simple paths summed over every (source, target) pair, with
    /// tie lines traversable and failed lines removed. A source that is also
    /// a target contributes its trivial single-vertex path. Counting stops
    /// at `cap` and reports saturation.
    pub fn count_simple_paths(
        &self,
        failed: &LineMask,
        sources: &[usize],
        targets: &[usize],
        cap: u64,
    ) -> PathCount {
        let n = self.buses.len();
        let mut is_target = vec![false; n];
        for &t in targets {
            is_target[t] = true;
        }
        let mut starts: Vec<usize> = sources.to_vec();
        starts.sort_unstable();
        starts.dedup();

        // Iteratively drop degree-one buses that are neither sources nor
        // targets: they can only end a path, never sit inside one.
        let mut keep = vec![true; n];
        let mut degree: Vec<usize> = (0..n)
            .map(|v| self.adjacency[v].iter().filter(|(l, _)| !failed.contains(*l)).count())
            .collect();
        let mut is_start = vec![false; n];
        for &s in &starts {
            is_start[s] = true;
        }
        let mut stack: Vec<usize> = (0..n)
            .filter(|&v| degree[v] <= 1 && !is_target[v] && !is_start[v])
            .collect();
        while let Some(v) = stack.pop() {
            if !keep[v] {
                continue;
            }
            keep[v] = false;
            for &(l, w) in &self.adjacency[v] {
                if failed.contains(l) || !keep[w] {
                    continue;
                }
                degree[w] -= 1;
                if degree[w] <= 1 && !is_target[w] && !is_start[w] {
                    stack.push(w);
                }
            }
        }

        let adjacency: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                if !keep[v] {
                    return Vec::new();
                }
                self.adjacency[v]
                    .iter()
                    .filter(|(l, w)| !failed.contains(*l) && keep[*w])
                    .map(|&(_, w)| w)
                    .collect()
            })
            .collect();

        let mut search = PathSearch {
            adjacency: &adjacency,
            is_target: &is_target,
            visited: vec![false; n],
            count: 0,
            cap,
        };
        for &s in &starts {
            if search.count >= cap {
                break;
            }
            search.descend(s);
        }
        PathCount {
            count: search.count.min(cap),
            saturated: search.count >= cap,
        }
    }
}

/// Loads and validates a network document.
pub fn load_network(path: impl AsRef<Path>) -> Result<Network, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Network::from_json_str(&text)
}

struct PathSearch<'a> {
    adjacency: &'a [Vec<usize>],
    is_target: &'a [bool],
    visited: Vec<bool>,
    count: u64,
    cap: u64,
}

impl PathSearch<'_> {
    fn descend(&mut self, v: usize) {
        if self.is_target[v] {
            self.count += 1;
            if self.count >= self.cap {
                return;
            }
        }
        self.visited[v] = true;
        for &w in &self.adjacency[v] {
            if !self.visited[w] {
                self.descend(w);
                if self.count >= self.cap {
                    break;
                }
            }
        }
        self.visited[v] = false;
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }

    fn into_islands(mut self) -> Islands {
        let n = self.parent.len();
        let mut root_label = vec![usize::MAX; n];
        let mut count = 0;
        let label = (0..n)
            .map(|v| {
                let r = self.find(v);
                if root_label[r] == usize::MAX {
                    root_label[r] = count;
                    count += 1;
                }
                root_label[r]
            })
            .collect();
        Islands { label, count }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn curve() -> FragilityCurve {
        FragilityCurve::new(0.0, 20.0, 60.0, 1.0).unwrap()
    }

    pub fn bus(id: &str, load_kw: f64, critical: bool) -> Bus {
        Bus {
            id: id.into(),
            load_kw,
            is_critical: critical,
            weight: 1.0,
        }
    }

    pub fn line(id: &str, a: &str, b: &str, tie: bool) -> Line {
        Line {
            id: id.into(),
            from_bus: a.into(),
            to_bus: b.into(),
            is_tie: tie,
            is_switchable: tie,
            fragility: curve(),
        }
    }

    pub fn source(bus: &str, kind: SourceKind, capacity_kw: f64) -> Source {
        Source {
            bus: bus.into(),
            kind,
            capacity_kw,
            smart_only: kind == SourceKind::Dg,
        }
    }

    /// Path a-b-c-d fed at a, with a normally-open tie a-d.
    pub fn ring4() -> Network {
        Network::new(
            vec![
                bus("a", 0.0, false),
                bus("b", 10.0, true),
                bus("c", 0.0, false),
                bus("d", 10.0, true),
            ],
            vec![
                line("ab", "a", "b", false),
                line("bc", "b", "c", false),
                line("cd", "c", "d", false),
                line("ad", "a", "d", true),
            ],
            vec![source("a", SourceKind::Substation, 100.0)],
            Mode::Base,
        )
        .unwrap()
    }
}
