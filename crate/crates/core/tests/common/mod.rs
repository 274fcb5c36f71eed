//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::f64::consts::PI;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use e2map_core::emotion::EmotionParams;
use e2map_core::grounding::{FeatureGrid, LexiconEmbedder, TextEmbedder};
use e2map_core::planning::CostField;
use e2map_core::sim::ScenarioSpec;
use e2map_core::{Cell, GridGeometry, OccupancyGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod trials;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn geometry(h: usize, w: usize) -> GridGeometry {
    GridGeometry::new(h, w, 0.25, [0.0, 0.0]).unwrap()
}

// ---- emotion ----

/// Weighted diagonal Gaussian written out from its definition.
pub fn gaussian(sx: f64, sy: f64, w: f64, dx: f64, dy: f64) -> f64 {
    w / (2.0 * PI * sx * sy) * (-(dx * dx) / (2.0 * sx * sx) - (dy * dy) / (2.0 * sy * sy)).exp()
}

/// Full summation over every Gaussian at every cell.
pub fn brute_force_field(params: &BTreeMap<Cell, EmotionParams>, h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut total = 0.0;
            for (cell, p) in params {
                let dx = c as f64 - f64::from(cell.col);
                let dy = r as f64 - f64::from(cell.row);
                total += gaussian(p.sigma_x, p.sigma_y, p.weight, dx, dy);
            }
            out[r * w + c] = total;
        }
    }
    out
}

/// Number of isotropic `sigma` Gaussians centred on `occupied` whose
/// unweighted density at `at` is at least `tau`.
pub fn valid_count(occupied: &BTreeSet<Cell>, sigma: f64, tau: f64, at: Cell) -> usize {
    occupied
        .iter()
        .filter(|c| {
            let d2 = f64::from((c.row - at.row).pow(2) + (c.col - at.col).pow(2));
            (-d2 / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma) >= tau
        })
        .count()
}

pub fn random_cells(rng: &mut ChaCha8Rng, h: usize, w: usize, n: usize) -> BTreeSet<Cell> {
    let mut cells = BTreeSet::new();
    while cells.len() < n {
        cells.insert(Cell::new(rng.random_range(0..h as i32), rng.random_range(0..w as i32)));
    }
    cells
}

pub fn random_params(rng: &mut ChaCha8Rng, cells: &BTreeSet<Cell>) -> BTreeMap<Cell, EmotionParams> {
    cells
        .iter()
        .map(|&c| {
            let p = EmotionParams { sigma_x: rng.random_range(0.4..4.0), sigma_y: rng.random_range(0.4..4.0), weight: rng.random_range(0.05..2.0) };
            (c, p)
        })
        .collect()
}

// ---- planning ----

const NEIGHBOURS: [(i32, i32); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Textbook Dijkstra over the same move rules: 8-connected, no corner
/// cutting, cost `base * length + extra(target)`.
pub fn dijkstra(field: &CostField, start: Cell, goal: Cell) -> Option<f64> {
    let (h, w) = (field.height() as i32, field.width() as i32);
    let free = |c: Cell| c.row >= 0 && c.col >= 0 && c.row < h && c.col < w && !field.is_blocked(c);
    if !free(start) || !free(goal) {
        return None;
    }
    let idx = |c: Cell| (c.row * w + c.col) as usize;
    let mut dist = vec![f64::INFINITY; (h * w) as usize];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0.0;
    heap.push(Reverse((ordered(0.0), start.row, start.col)));
    while let Some(Reverse((d, r, c))) = heap.pop() {
        let d = d.0;
        let u = Cell::new(r, c);
        if d > dist[idx(u)] {
            continue;
        }
        if u == goal {
            return Some(d);
        }
        for (dr, dc) in NEIGHBOURS {
            let v = Cell::new(r + dr, c + dc);
            if !free(v) {
                continue;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal && (!free(Cell::new(r + dr, c)) || !free(Cell::new(r, c + dc))) {
                continue;
            }
            let len = if diagonal { 2f64.sqrt() } else { 1.0 };
            let nd = d + field.base_step_cost() * len + field.extra_cost(v);
            if nd < dist[idx(v)] {
                dist[idx(v)] = nd;
                heap.push(Reverse((ordered(nd), v.row, v.col)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ordered(pub f64);
impl Eq for Ordered {}
impl PartialOrd for Ordered {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ordered {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
fn ordered(v: f64) -> Ordered {
    Ordered(v)
}

/// Checks that `waypoints` is a legal 8-connected walk under `field` and returns its cost.
pub fn walk_cost(field: &CostField, waypoints: &[Cell]) -> Option<f64> {
    waypoints.windows(2).map(|p| field.edge_cost(p[0], p[1])).sum()
}

// ---- grounding ----

/// BFS connected components of a row-major mask.
pub fn flood_fill(mask: &[bool], h: usize, w: usize, eight: bool) -> Vec<BTreeSet<Cell>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            let (r, c) = ((i / w) as i32, (i % w) as i32);
            comp.insert(Cell::new(r, c));
            for (dr, dc) in NEIGHBOURS {
                if !eight && dr != 0 && dc != 0 {
                    continue;
                }
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as i32 || nc >= w as i32 {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        out.push(comp);
    }
    out
}

pub const OBJECTS: [&str; 6] = ["chair", "table", "sofa", "refrigerator", "picture", "microwave"];

/// A synthetic room: each object planted as one solid rectangle plus a few
/// stray single cells of the same label, and a wall border.
pub struct PlantedMap {
    pub features: FeatureGrid,
    pub occupancy: OccupancyGrid,
    pub rects: BTreeMap<&'static str, [i32; 4]>,
}

pub fn planted_map(rng: &mut ChaCha8Rng, h: usize, w: usize, embedder: &LexiconEmbedder) -> PlantedMap {
    let g = geometry(h, w);
    let mut labels: BTreeMap<String, Vec<Cell>> = BTreeMap::new();
    let mut taken = vec![false; h * w];
    let mut occ = OccupancyGrid::empty(&g);
    for r in 0..h as i32 {
        for c in 0..w as i32 {
            if r == 0 || c == 0 || r == h as i32 - 1 || c == w as i32 - 1 {
                labels.entry("wall".into()).or_default().push(Cell::new(r, c));
                taken[r as usize * w + c as usize] = true;
                occ.set(Cell::new(r, c), true).unwrap();
            }
        }
    }
    let mut rects = BTreeMap::new();
    for obj in OBJECTS {
        for _attempt in 0..200 {
            let (rh, rw) = (rng.random_range(2..4), rng.random_range(2..5));
            let r0 = rng.random_range(2..h as i32 - rh - 2);
            let c0 = rng.random_range(2..w as i32 - rw - 2);
            // keep a one-cell free margin around every object
            let clear = (r0 - 1..r0 + rh + 1).all(|r| (c0 - 1..c0 + rw + 1).all(|c| !taken[r as usize * w + c as usize]));
            if !clear {
                continue;
            }
            for r in r0 - 1..r0 + rh + 1 {
                for c in c0 - 1..c0 + rw + 1 {
                    taken[r as usize * w + c as usize] = true;
                }
            }
            for r in r0..r0 + rh {
                for c in c0..c0 + rw {
                    labels.entry(obj.into()).or_default().push(Cell::new(r, c));
                    occ.set(Cell::new(r, c), true).unwrap();
                }
            }
            rects.insert(obj, [r0, c0, r0 + rh - 1, c0 + rw - 1]);
            break;
        }
    }
    // stray outlier cells
    for _ in 0..6 {
        let obj = OBJECTS[rng.random_range(0..OBJECTS.len())];
        let cell = Cell::new(rng.random_range(1..h as i32 - 1), rng.random_range(1..w as i32 - 1));
        let i = cell.row as usize * w + cell.col as usize;
        let isolated = cell.neighbors8().all(|n| !taken[n.row as usize * w + n.col as usize]);
        if !taken[i] && isolated {
            taken[i] = true;
            labels.entry(obj.into()).or_default().push(cell);
        }
    }
    let features = FeatureGrid::from_labels(g, embedder, labels.iter().map(|(l, c)| (l.as_str(), c.as_slice()))).unwrap();
    PlantedMap { features, occupancy: occ, rects }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn object_mask(features: &FeatureGrid, embedder: &dyn TextEmbedder, obj: &str) -> (Vec<bool>, Vec<f64>) {
    let e_obj = embedder.embed_text(obj).unwrap().vector;
    let e_neu = embedder.embed_text("other").unwrap().vector;
    let g = *features.geometry();
    let mut mask = Vec::with_capacity(g.len());
    let mut sim = Vec::with_capacity(g.len());
    for cell in g.cells() {
        let f = features.feature(cell);
        mask.push(dot(f, &e_obj) > dot(f, &e_neu));
        sim.push(dot(f, &e_obj));
    }
    (mask, sim)
}

// ---- instructions ----

/// (instruction, goal calls, object mentions)
pub const INSTRUCTIONS: [(&str, usize, usize); 30] = [
    ("Move to the picture.", 1, 1),
    ("Head to the bottom side of the chair.", 1, 1),
    ("First, reach the picture and stop at the bottom side of the microwave.", 2, 2),
    ("Go to the bottom side of the chair and finish your move at the picture.", 2, 2),
    ("Move toward the picture and go straight to the bottom side of the chair.", 2, 2),
    ("Move past to the right side of the chair, then continue to the door.", 2, 2),
    ("First, go straight to the picture, head to the microwave, then finally proceed to the table.", 3, 3),
    ("Go to the bottom side of the chair, then make your way to the picture, and finally stop at the bottom of the microwave.", 3, 3),
    ("Go to the right side of the chair, move to the table, then head to the microwave and finally reach the door.", 4, 4),
    ("Move to the bottom side of the chair, head to the table, go by the door, and finish at the microwave.", 4, 4),
    ("Go straight to the picture.", 1, 1),
    ("Reach the picture.", 1, 1),
    ("Move to the table, and finish at the picture.", 2, 2),
    ("Head between the shelving and refrigerator, and end at the picture.", 2, 3),
    ("Head toward the refrigerator, and finally stop at the picture.", 2, 2),
    ("First, go in front of the microwave, move to the top of the refrigerator, and end your trajectory at the picture.", 3, 3),
    ("Head to the bottom of the shelving, walk to the table, and finish your move in front of the picture.", 3, 3),
    ("Move between the table and microwave, pass to the refrigerator, and head straight to the picture.", 3, 4),
    ("Pass to the rightside of the table, go to the microwave, move between the table and refrigerator, and reach the picture.", 4, 5),
    ("Walk to the bottom side of the shelving, go to the table, then move to the refrigerator, and finish at the picture.", 4, 4),
    ("Head to the table.", 1, 1),
    ("Walk to the microwave.", 1, 1),
    ("Move to the refrigerator, and move to the bottom of chair.", 2, 2),
    ("Go to the chair, then take a step toward the table.", 2, 2),
    ("Make your way to the microwave, and stop at the TV monitor.", 2, 2),
    ("Move to the microwave, pass the picture, and finally stop at the bottom of the chair.", 3, 3),
    ("Take a step toward the picture, move to the refrigerator, and reach the chair.", 3, 3),
    ("Walk to the chair, go to the microwave, and stop at the refrigerator.", 3, 3),
    ("Make your way to the microwave, pass the picture, and arrive between the chair and the refrigerator.", 3, 4),
    ("Head to the picture, stop at the table, go to the refrigerator, and reach to the rightside of the chair.", 4, 4),
];

// ---- scenarios ----

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

pub fn scenario(name: &str) -> ScenarioSpec {
    ScenarioSpec::load(&scenario_dir().join(format!("{name}.json"))).unwrap()
}

/// Smallest Euclidean distance between any trajectory cell and any target cell.
pub fn min_distance(trajectory: &[Cell], targets: &[Cell]) -> f64 {
    trajectory
        .iter()
        .flat_map(|a| targets.iter().map(move |b| a.distance(*b)))
        .fold(f64::INFINITY, f64::min)
}

// ---- mock chat endpoint ----

/// Minimal HTTP server answering each request with the next canned body.
/// Returns the base URL and a handle yielding the request bodies it saw.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<String>>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(responses: Vec<(u16, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let Ok((stream, _)) = listener.accept() else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0usize;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap_or(0);
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0u8; length];
                let _ = reader.read_exact(&mut buf);
                seen.lock().unwrap().push(String::from_utf8_lossy(&buf).into_owned());
                let mut stream = stream;
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            }
        });
        Self { url, requests, handle: Some(handle) }
    }

    pub fn chat_reply(content: &str) -> (u16, String) {
        (200, serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
    }

    pub fn join(mut self) -> Vec<String> {
        if let Some(h) = self.handle.take() {
            h.join().unwrap();
        }
        self.requests.lock().unwrap().clone()
    }
}
