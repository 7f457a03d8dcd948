//! Room-graph navigation to a treasure room.
//!
//! Rooms sit on grid cells and doors join grid neighbours, so every room has
//! at most one door per compass direction and door labels are consistent by
//! construction (a north door from A is a south door into A).

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde_json::json;

use crate::env::{Ctx, InstructionType, Problem, ResetOutput, Transition};
use crate::error::EnvError;
use crate::feedback::{FeedbackKind, FeedbackSet};
use crate::text::join_list;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::South, Direction::East, Direction::West];

    pub fn opposite(self) -> Self {
        match self {
            Direction::North => Direction::South,
            Direction::South => Direction::North,
            Direction::East => Direction::West,
            Direction::West => Direction::East,
        }
    }

    fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, 1),
            Direction::South => (0, -1),
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::North => "north",
            Direction::South => "south",
            Direction::East => "east",
            Direction::West => "west",
        }
    }

    /// Case-insensitive parse of free text. Accepts a bare direction word or
    /// initial, or a sentence naming exactly one direction ("go north").
    pub fn parse(text: &str) -> Option<Self> {
        let lowered = text.trim().to_lowercase();
        let bare = lowered.trim_matches(|c: char| !c.is_alphanumeric());
        if let Some(d) = Self::ALL.into_iter().find(|d| d.name() == bare || d.name()[..1] == *bare) {
            return Some(d);
        }
        let named: BTreeSet<Direction> = lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter_map(|w| Self::ALL.into_iter().find(|d| d.name() == w))
            .collect();
        match named.len() {
            1 => named.into_iter().next(),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Room {
    pub name: String,
    pub cell: (i32, i32),
    pub objects: Vec<String>,
    pub doors: BTreeMap<Direction, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomGraph {
    pub rooms: Vec<Room>,
    pub start: usize,
    pub treasure: usize,
}

pub const TREASURE_OBJECT: &str = "a treasure chest";

const OBJECTS: [&str; 24] = [
    "a brass lamp", "a wooden chair", "an old map", "a dusty rug", "a grandfather clock", "a bookshelf",
    "a potted fern", "a stone bust", "a broken mirror", "a velvet curtain", "a rusty sword", "a tea kettle",
    "a pile of crates", "a harp", "a chess board", "a stuffed owl", "a copper pot", "a globe",
    "a rocking horse", "a candle stand", "an empty vase", "a painting of a ship", "a fur coat", "a music box",
];

impl RoomGraph {
    pub fn neighbor(&self, room: usize, dir: Direction) -> Option<usize> {
        self.rooms[room].doors.get(&dir).copied()
    }

    /// BFS distances from `target` to every room (`usize::MAX` if unreachable).
    pub fn distances_to(&self, target: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.rooms.len()];
        let mut queue = VecDeque::from([target]);
        dist[target] = 0;
        while let Some(r) = queue.pop_front() {
            for &n in self.rooms[r].doors.values() {
                if dist[n] == usize::MAX {
                    dist[n] = dist[r] + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    pub fn adjacency(&self) -> BTreeSet<(usize, usize)> {
        self.rooms
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.doors.values().map(move |&j| (i.min(j), i.max(j))))
            .collect()
    }

    /// Check door degree, label symmetry and treasure reachability.
    pub fn validate(&self) -> Result<(), String> {
        for (i, room) in self.rooms.iter().enumerate() {
            if room.doors.len() > 4 {
                return Err(format!("{} has {} doors", room.name, room.doors.len()));
            }
            for (&dir, &j) in &room.doors {
                if self.rooms.get(j).and_then(|r| r.doors.get(&dir.opposite())) != Some(&i) {
                    return Err(format!("door {dir} from {} has no matching {} door", room.name, dir.opposite()));
                }
            }
        }
        if self.distances_to(self.treasure)[self.start] == usize::MAX {
            return Err("treasure unreachable".into());
        }
        Ok(())
    }

    fn door_map(&self) -> String {
        let mut order: Vec<usize> = (0..self.rooms.len()).collect();
        order.sort_by_key(|&i| room_number(&self.rooms[i].name));
        order
            .iter()
            .map(|&i| {
                let room = &self.rooms[i];
                let doors: Vec<String> = room
                    .doors
                    .iter()
                    .map(|(d, &j)| format!("{d} to {}", self.rooms[j].name))
                    .collect();
                format!("{}: {}", room.name, doors.join(", "))
            })
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn room_number(name: &str) -> usize {
    name.trim_start_matches("room ").parse().unwrap_or(usize::MAX)
}

/// Grow a random spanning tree on the grid, add a few extra grid-consistent
/// doors, scatter objects and place the treasure far enough from the start.
pub fn generate_graph<R: Rng + ?Sized>(
    rng: &mut R,
    n_rooms: usize,
    n_objects: usize,
    min_treasure_distance: usize,
) -> Result<RoomGraph, EnvError> {
    if n_rooms < 2 {
        return Err(EnvError::InfeasibleConfig("need at least 2 rooms".into()));
    }
    if min_treasure_distance >= n_rooms {
        return Err(EnvError::InfeasibleConfig(format!(
            "treasure distance {min_treasure_distance} impossible with {n_rooms} rooms"
        )));
    }
    let min_distance = min_treasure_distance.max(1);
    for _ in 0..1000 {
        let mut cells: BTreeMap<(i32, i32), usize> = BTreeMap::from([((0, 0), 0)]);
        let mut rooms = vec![Room { name: String::new(), cell: (0, 0), objects: Vec::new(), doors: BTreeMap::new() }];
        while rooms.len() < n_rooms {
            let from = rng.random_range(0..rooms.len());
            let dir = Direction::ALL[rng.random_range(0..4)];
            let (dx, dy) = dir.delta();
            let (x, y) = rooms[from].cell;
            let cell = (x + dx, y + dy);
            if cells.contains_key(&cell) {
                continue;
            }
            let id = rooms.len();
            cells.insert(cell, id);
            rooms.push(Room { name: String::new(), cell, objects: Vec::new(), doors: BTreeMap::new() });
            rooms[from].doors.insert(dir, id);
            rooms[id].doors.insert(dir.opposite(), from);
        }

        let mut extra: Vec<(usize, Direction, usize)> = Vec::new();
        for (i, room) in rooms.iter().enumerate() {
            for dir in [Direction::North, Direction::East] {
                let (dx, dy) = dir.delta();
                let cell = (room.cell.0 + dx, room.cell.1 + dy);
                if let Some(&j) = cells.get(&cell) {
                    if !room.doors.contains_key(&dir) {
                        extra.push((i, dir, j));
                    }
                }
            }
        }
        extra.shuffle(rng);
        for &(i, dir, j) in extra.iter().take(n_rooms / 4) {
            rooms[i].doors.insert(dir, j);
            rooms[j].doors.insert(dir.opposite(), i);
        }

        let mut numbers: Vec<usize> = (1..=n_rooms).collect();
        numbers.shuffle(rng);
        for (room, n) in rooms.iter_mut().zip(numbers) {
            room.name = format!("room {n}");
        }

        let start = rng.random_range(0..n_rooms);
        let mut graph = RoomGraph { rooms, start, treasure: start };
        let dist = graph.distances_to(start);
        let candidates: Vec<usize> = (0..n_rooms).filter(|&r| dist[r] != usize::MAX && dist[r] >= min_distance).collect();
        let Some(&treasure) = candidates.choose(rng) else {
            continue;
        };
        graph.treasure = treasure;
        for _ in 0..n_objects {
            let room = rng.random_range(0..n_rooms);
            let object = *OBJECTS.choose(rng).expect("non-empty vocabulary");
            if !graph.rooms[room].objects.iter().any(|o| o == object) {
                graph.rooms[room].objects.push(object.to_owned());
            }
        }
        graph.rooms[treasure].objects.push(TREASURE_OBJECT.to_owned());
        return Ok(graph);
    }
    Err(EnvError::InfeasibleConfig(format!(
        "could not place treasure {min_treasure_distance} doors from the start in {n_rooms} rooms"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridParams {
    pub rooms: usize,
    pub objects: usize,
    pub distance: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { rooms: 12, objects: 10, distance: 4 }
    }
}

impl GridParams {
    /// Parse `rooms=12,objects=10,distance=4` (any subset, any order).
    pub fn parse(variant: Option<&str>) -> Result<Self, EnvError> {
        let mut params = Self::default();
        let Some(variant) = variant else {
            return Ok(params);
        };
        for part in variant.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| EnvError::UnknownEnv(format!("gridworld:{variant}")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| EnvError::InvalidConfig(format!("gridworld parameter `{part}` is not a number")))?;
            match key.trim() {
                "rooms" => params.rooms = value,
                "objects" => params.objects = value,
                "distance" => params.distance = value,
                _ => return Err(EnvError::UnknownEnv(format!("gridworld:{variant}"))),
            }
        }
        if params.rooms < 2 || params.distance >= params.rooms {
            return Err(EnvError::InfeasibleConfig(format!("{params:?}")));
        }
        Ok(params)
    }
}

/// Navigation state plus the teacher's view of the graph.
#[derive(Debug, Clone)]
pub struct GridworldProblem {
    params: GridParams,
    graph: Option<RoomGraph>,
    current: usize,
    visited: BTreeSet<usize>,
    to_treasure: Vec<usize>,
}

impl GridworldProblem {
    pub fn new(params: GridParams) -> Self {
        Self { params, graph: None, current: 0, visited: BTreeSet::new(), to_treasure: Vec::new() }
    }

    pub fn from_variant(variant: Option<&str>) -> Result<Self, EnvError> {
        Ok(Self::new(GridParams::parse(variant)?))
    }

    pub fn graph(&self) -> Option<&RoomGraph> {
        self.graph.as_ref()
    }

    pub fn current_room(&self) -> usize {
        self.current
    }

    pub fn visited(&self) -> &BTreeSet<usize> {
        &self.visited
    }

    fn graph_ref(&self) -> &RoomGraph {
        self.graph.as_ref().expect("gridworld used before reset")
    }

    /// First direction (N, S, E, W order) whose door lowers the distance to
    /// the treasure. `None` only in the treasure room.
    pub fn suggested_direction(&self, room: usize) -> Option<Direction> {
        let graph = self.graph_ref();
        let here = self.to_treasure[room];
        Direction::ALL
            .into_iter()
            .find(|&d| graph.neighbor(room, d).is_some_and(|n| self.to_treasure[n] + 1 == here))
    }

    /// A direction not on any shortest path: a door leading farther away,
    /// else a door that keeps the distance, else a wall.
    pub fn avoid_direction(&self, room: usize) -> Option<Direction> {
        let graph = self.graph_ref();
        let here = self.to_treasure[room];
        let door_with = |pred: &dyn Fn(usize) -> bool| {
            Direction::ALL
                .into_iter()
                .find(|&d| graph.neighbor(room, d).is_some_and(|n| pred(self.to_treasure[n])))
        };
        door_with(&|d| d > here)
            .or_else(|| door_with(&|d| d == here))
            .or_else(|| Direction::ALL.into_iter().find(|&d| graph.neighbor(room, d).is_none()))
    }

    fn describe(&self) -> String {
        let graph = self.graph_ref();
        let room = &graph.rooms[self.current];
        let objects = if room.objects.is_empty() {
            "nothing of note".to_owned()
        } else {
            join_list(&room.objects)
        };
        let doors: Vec<&str> = room.doors.keys().map(|d| d.name()).collect();
        format!("You are in {}. You see {}. There are doors to the {}.", room.name, objects, join_list(&doors))
    }

    fn shortest_path(&self, from: usize) -> Vec<Direction> {
        let graph = self.graph_ref();
        let mut room = from;
        let mut path = Vec::new();
        while room != graph.treasure {
            let d = self.suggested_direction(room).expect("treasure reachable");
            path.push(d);
            room = graph.neighbor(room, d).expect("door exists");
        }
        path
    }
}

fn actions_slot() -> String {
    "north, south, east or west".to_owned()
}

impl Problem for GridworldProblem {
    fn reset(&mut self, ctx: &mut Ctx<'_>, _fresh_session: bool) -> Result<ResetOutput, EnvError> {
        let p = self.params;
        let graph = generate_graph(ctx.latent, p.rooms, p.objects, p.distance)?;
        self.to_treasure = graph.distances_to(graph.treasure);
        self.current = graph.start;
        self.visited = BTreeSet::from([graph.start]);
        self.graph = Some(graph);

        let instruction = match ctx.instruction_type {
            InstructionType::Complete => {
                let path: Vec<&str> = self.shortest_path(self.current).iter().map(|d| d.name()).collect();
                ctx.instruction(
                    "complete",
                    &[
                        ("actions", actions_slot()),
                        ("door_map", self.graph_ref().door_map()),
                        ("path", path.join(", ")),
                    ],
                )?
            }
            _ => ctx.instruction("basic", &[("actions", actions_slot())])?,
        };
        Ok(ResetOutput { observation: self.describe(), instruction })
    }

    fn step(&mut self, ctx: &mut Ctx<'_>, action: &str) -> Result<Transition, EnvError> {
        use FeedbackKind::*;
        let mut feedback = FeedbackSet::new();
        let before = self.to_treasure[self.current];
        let parsed = Direction::parse(action);
        match parsed {
            None => {
                let shown: String = action.trim().replace('\n', " ").chars().take(60).collect();
                ctx.emit(&mut feedback, Hn, "malformed", &[("action", shown)])?;
            }
            Some(dir) => match self.graph_ref().neighbor(self.current, dir) {
                None => ctx.emit(&mut feedback, Hn, "bounce", &[("direction", dir.to_string())])?,
                Some(next) => {
                    self.current = next;
                    self.visited.insert(next);
                    let after = self.to_treasure[next];
                    let slot = [("direction", dir.to_string())];
                    if after < before {
                        ctx.emit(&mut feedback, Hp, "closer", &slot)?;
                    } else if after > before {
                        ctx.emit(&mut feedback, Hn, "farther", &slot)?;
                    } else {
                        ctx.emit(&mut feedback, Hn, "sideways", &slot)?;
                    }
                }
            },
        }
        let graph = self.graph_ref();
        let found = self.current == graph.treasure;
        ctx.emit(&mut feedback, R, if found { "found" } else { "not_found" }, &[])?;
        if !found {
            if let Some(d) = self.suggested_direction(self.current) {
                ctx.emit(&mut feedback, Fp, "direction", &[("direction", d.to_string())])?;
            }
            if let Some(d) = self.avoid_direction(self.current) {
                ctx.emit(&mut feedback, Fn, "direction", &[("direction", d.to_string())])?;
            }
        }
        let info = [
            ("success", json!(found)),
            ("distance", json!(self.to_treasure[self.current])),
            ("room", json!(self.graph_ref().rooms[self.current].name)),
            ("malformed_action", json!(parsed.is_none())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        Ok(Transition {
            observation: self.describe(),
            reward: if found { 1.0 } else { 0.0 },
            terminated: found,
            feedback,
            info,
        })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
