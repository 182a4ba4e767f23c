//! The split-tree generating process: balls are added one at a time at the
//! root, descend through internal vertices by their split vectors, and full
//! leaves split by keeping `s0` balls, seeding `s1` into every child and
//! routing the rest.

mod params;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{pick_with, SplitVectorSource};
use crate::{Error, Result};

pub use params::SplitParams;

/// Random stream used for every build.
pub type SimRng = ChaCha8Rng;

const NONE: u32 = u32::MAX;
const ANON: u32 = u32::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// What a build records beyond ball counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuildMode {
    CountsOnly,
    /// Tracks every ball's vertex, so final and insertion depths are available.
    Traced,
    /// Traced, plus the product of split components along each root path.
    Instrumented,
}

impl BuildMode {
    pub fn traced(self) -> bool {
        !matches!(self, BuildMode::CountsOnly)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BuildMode::CountsOnly => "counts",
            BuildMode::Traced => "traced",
            BuildMode::Instrumented => "instrumented",
        }
    }
}

impl std::str::FromStr for BuildMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "counts" | "counts-only" => Ok(BuildMode::CountsOnly),
            "traced" => Ok(BuildMode::Traced),
            "instrumented" => Ok(BuildMode::Instrumented),
            other => Err(Error::InvalidArgument(format!(
                "unknown build mode `{other}` (expected counts, traced or instrumented)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vertex {
    parent: Option<VertexId>,
    depth: u32,
    ball_count: u32,
    // index into the link / split-vector pools; NONE until the vertex splits
    slot: u32,
    // the parent's link pointing here; NONE for the root
    link: u32,
    cumulative_weight: Option<f64>,
}

/// One child position of a split vertex: its component of the split vector
/// and, once present, the child and the child's own slot. Keeping these
/// together lets a descent read a single record per level.
#[derive(Debug, Clone, Copy)]
struct Link {
    weight: f64,
    child: u32,
    child_slot: u32,
}

impl Vertex {
    pub fn parent(&self) -> Option<VertexId> {
        self.parent
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Balls held by the vertex itself (`C_v`).
    pub fn ball_count(&self) -> u32 {
        self.ball_count
    }

    /// Product of the split components on the root path (instrumented builds).
    pub fn cumulative_weight(&self) -> Option<f64> {
        self.cumulative_weight
    }

    pub fn has_children(&self) -> bool {
        self.slot != NONE
    }
}

#[derive(Debug, Clone)]
pub struct Tree {
    params: SplitParams,
    mode: BuildMode,
    vertices: Vec<Vertex>,
    links: Vec<Link>,
    split_vectors: Vec<f64>,
    n_balls: u64,
    // traced state
    ball_slots: Vec<u32>,
    ball_locations: Vec<u32>,
    insertion_depths: Vec<u32>,
    // scratch
    work: VecDeque<(u32, u32)>,
    pending: Vec<u32>,
    incoming_at: u32,
}

impl Tree {
    /// An empty tree: a root holding no balls.
    pub fn new(params: SplitParams, mode: BuildMode) -> Result<Self> {
        params.validate()?;
        let mut tree = Self {
            params,
            mode,
            vertices: Vec::new(),
            links: Vec::new(),
            split_vectors: Vec::new(),
            n_balls: 0,
            ball_slots: Vec::new(),
            ball_locations: Vec::new(),
            insertion_depths: Vec::new(),
            work: VecDeque::new(),
            pending: Vec::with_capacity(params.s as usize + 1),
            incoming_at: 0,
        };
        let weight = (mode == BuildMode::Instrumented).then_some(1.0);
        tree.push_vertex(None, NONE, 0, weight);
        Ok(tree)
    }

    pub fn params(&self) -> SplitParams {
        self.params
    }

    pub fn mode(&self) -> BuildMode {
        self.mode
    }

    pub fn root(&self) -> VertexId {
        VertexId(0)
    }

    pub fn n_balls(&self) -> u64 {
        self.n_balls
    }

    /// Number of vertices `N`.
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id.index()]
    }

    pub fn vertices(&self) -> impl ExactSizeIterator<Item = (VertexId, &Vertex)> {
        self.vertices.iter().enumerate().map(|(i, v)| (VertexId(i as u32), v))
    }

    /// The `b` child positions of `id`, `None` where no vertex exists.
    pub fn children(&self, id: VertexId) -> impl Iterator<Item = Option<VertexId>> + '_ {
        let b = self.params.b as usize;
        let slot = self.vertices[id.index()].slot;
        let range = if slot == NONE { 0..0 } else { slot as usize * b..(slot as usize + 1) * b };
        let padding = if slot == NONE { b } else { 0 };
        self.links[range]
            .iter()
            .map(|l| (l.child != NONE).then_some(VertexId(l.child)))
            .chain(std::iter::repeat_n(None, padding))
    }

    /// The split vector of `id`, once it has been sampled.
    pub fn split_vector(&self, id: VertexId) -> Option<&[f64]> {
        let b = self.params.b as usize;
        let slot = self.vertices[id.index()].slot;
        (slot != NONE).then(|| &self.split_vectors[slot as usize * b..(slot as usize + 1) * b])
    }

    /// Largest vertex depth `H_n`.
    pub fn height(&self) -> u32 {
        self.vertices.iter().map(|v| v.depth).max().unwrap_or(0)
    }

    /// Vertex currently holding ball `k` (0-based insertion index); traced builds only.
    pub fn ball_location(&self, k: usize) -> Option<VertexId> {
        self.ball_locations.get(k).map(|&v| VertexId(v))
    }

    /// Final depths `D_k` of every ball, in insertion order; traced builds only.
    pub fn final_depths(&self) -> Option<Vec<u32>> {
        self.mode
            .traced()
            .then(|| self.ball_locations.iter().map(|&v| self.vertices[v as usize].depth).collect())
    }

    /// Depths `D_k^f` of each ball when its insertion completed; traced builds only.
    pub fn insertion_depths(&self) -> Option<&[u32]> {
        self.mode.traced().then_some(self.insertion_depths.as_slice())
    }

    /// Balls held at `id`, by insertion index; traced builds only.
    pub fn balls_at(&self, id: VertexId) -> Option<&[u32]> {
        if !self.mode.traced() {
            return None;
        }
        let s = self.params.s as usize;
        let start = id.index() * s;
        Some(&self.ball_slots[start..start + self.vertices[id.index()].ball_count as usize])
    }

    /// Subtree ball counts `n_v`, indexed by vertex.
    pub fn subtree_ball_counts(&self) -> Vec<u64> {
        let mut counts: Vec<u64> = self.vertices.iter().map(|v| u64::from(v.ball_count)).collect();
        // parents always precede their children in the arena
        for i in (1..self.vertices.len()).rev() {
            let parent = self.vertices[i].parent.expect("non-root vertex has a parent").index();
            counts[parent] += counts[i];
        }
        counts
    }

    /// Subtree vertex counts `N_v`, indexed by vertex.
    pub fn subtree_vertex_counts(&self) -> Vec<u64> {
        let mut counts = vec![1u64; self.vertices.len()];
        for i in (1..self.vertices.len()).rev() {
            let parent = self.vertices[i].parent.expect("non-root vertex has a parent").index();
            counts[parent] += counts[i];
        }
        counts
    }

    /// Insert one ball and return its depth once the insertion (including any
    /// cascade of splits) has completed.
    pub fn add_ball<R: Rng>(&mut self, source: &SplitVectorSource, rng: &mut R) -> Result<u32> {
        if source.branch_factor() != self.params.b as usize {
            return Err(Error::InvalidArgument(format!(
                "source has branch factor {}, tree has b = {}",
                source.branch_factor(),
                self.params.b
            )));
        }
        let id = u32::try_from(self.n_balls)
            .ok()
            .filter(|&k| k < ANON)
            .ok_or_else(|| Error::InvalidArgument("ball count exceeds u32 range".into()))?;
        self.n_balls += 1;
        if self.mode.traced() {
            self.ball_locations.push(NONE);
        }
        let mut work = std::mem::take(&mut self.work);
        work.clear();
        work.push_back((0, id));
        let result = self.drain(&mut work, id, source, rng);
        self.work = work;
        result?;
        let depth = self.vertices[self.incoming_at as usize].depth;
        if self.mode.traced() {
            self.insertion_depths.push(depth);
        }
        Ok(depth)
    }

    fn drain<R: Rng>(
        &mut self,
        work: &mut VecDeque<(u32, u32)>,
        incoming: u32,
        source: &SplitVectorSource,
        rng: &mut R,
    ) -> Result<()> {
        while let Some((start, ball)) = work.pop_front() {
            let v = self.descend(start, rng);
            if self.vertices[v as usize].ball_count < self.params.s {
                self.place(v, ball, incoming)?;
            } else {
                self.split(v, ball, incoming, work, source, rng)?;
            }
        }
        Ok(())
    }

    /// Follow split vectors from `v` down to a vertex without children.
    fn descend<R: Rng>(&mut self, mut v: u32, rng: &mut R) -> u32 {
        let b = self.params.b as usize;
        let mut slot = self.vertices[v as usize].slot;
        while slot != NONE {
            let base = slot as usize * b;
            let links = &self.links[base..base + b];
            let i = pick_with(b, |k| links[k].weight, rng.random::<f64>());
            let link = links[i];
            if link.child == NONE {
                return self.child_or_create(v, i);
            }
            v = link.child;
            slot = link.child_slot;
        }
        v
    }

    fn child_or_create(&mut self, v: u32, i: usize) -> u32 {
        let b = self.params.b as usize;
        let parent = &self.vertices[v as usize];
        let at = parent.slot as usize * b + i;
        let existing = self.links[at].child;
        if existing != NONE {
            return existing;
        }
        let depth = parent.depth + 1;
        let weight = parent.cumulative_weight.map(|w| w * self.links[at].weight);
        let child = self.push_vertex(Some(VertexId(v)), at as u32, depth, weight);
        self.links[at].child = child;
        child
    }

    fn push_vertex(&mut self, parent: Option<VertexId>, link: u32, depth: u32, weight: Option<f64>) -> u32 {
        let id = self.vertices.len() as u32;
        self.vertices.push(Vertex { parent, depth, ball_count: 0, slot: NONE, link, cumulative_weight: weight });
        if self.mode.traced() {
            self.ball_slots.extend(std::iter::repeat_n(NONE, self.params.s as usize));
        }
        id
    }

    fn place(&mut self, v: u32, ball: u32, incoming: u32) -> Result<()> {
        let s = self.params.s;
        let vertex = &mut self.vertices[v as usize];
        if vertex.ball_count >= s {
            return Err(Error::Unreachable(format!(
                "vertex {v} would exceed capacity {s}"
            )));
        }
        let slot = vertex.ball_count;
        vertex.ball_count += 1;
        if self.mode.traced() {
            self.ball_slots[v as usize * s as usize + slot as usize] = ball;
            self.ball_locations[ball as usize] = v;
        }
        if ball == incoming {
            self.incoming_at = v;
        }
        Ok(())
    }

    /// Split the full leaf `v` that has just received `ball`.
    fn split<R: Rng>(
        &mut self,
        v: u32,
        ball: u32,
        incoming: u32,
        work: &mut VecDeque<(u32, u32)>,
        source: &SplitVectorSource,
        rng: &mut R,
    ) -> Result<()> {
        let SplitParams { b, s, s0, s1 } = self.params;
        let (b, s, s0, s1) = (b as usize, s as usize, s0 as usize, s1 as usize);
        let vertex = &self.vertices[v as usize];
        if vertex.ball_count as usize != s || vertex.slot != NONE {
            return Err(Error::Unreachable(format!("vertex {v} split while not a full leaf")));
        }

        let mut balls = std::mem::take(&mut self.pending);
        balls.clear();
        if self.mode.traced() {
            balls.extend_from_slice(&self.ball_slots[v as usize * s..(v as usize + 1) * s]);
        } else {
            balls.extend(std::iter::repeat_n(ANON, s));
        }
        balls.push(ball);

        // uniform sampling without replacement: stayers first, then each child's seeds
        let chosen = s0 + b * s1;
        for i in 0..chosen {
            let j = rng.random_range(i..balls.len());
            balls.swap(i, j);
        }

        let slot = (self.split_vectors.len() / b) as u32;
        let base = self.split_vectors.len();
        self.split_vectors.resize(base + b, 0.0);
        source.sample_into(rng, &mut self.split_vectors[base..base + b])?;
        self.links.extend(
            self.split_vectors[base..base + b]
                .iter()
                .map(|&weight| Link { weight, child: NONE, child_slot: NONE }),
        );
        let vertex = &mut self.vertices[v as usize];
        vertex.slot = slot;
        vertex.ball_count = 0;
        let link = vertex.link;
        if link != NONE {
            self.links[link as usize].child_slot = slot;
        }

        let result = (|| {
            for &k in &balls[..s0] {
                self.place(v, k, incoming)?;
            }
            for child in 0..b {
                if s1 == 0 {
                    break;
                }
                let c = self.child_or_create(v, child);
                for &k in &balls[s0 + child * s1..s0 + (child + 1) * s1] {
                    self.place(c, k, incoming)?;
                }
            }
            for &k in &balls[chosen..] {
                let i = pick_with(b, |k| self.links[base + k].weight, rng.random::<f64>());
                let c = self.child_or_create(v, i);
                work.push_back((c, k));
            }
            Ok(())
        })();
        self.pending = balls;
        result
    }
}

/// Build a tree from `n` balls with a stream seeded by `seed`.
pub fn build(
    params: SplitParams,
    source: &SplitVectorSource,
    n: u64,
    seed: u64,
    mode: BuildMode,
) -> Result<Tree> {
    let mut rng = SimRng::seed_from_u64(seed);
    build_with_rng(params, source, n, &mut rng, mode)
}

pub fn build_with_rng<R: Rng>(
    params: SplitParams,
    source: &SplitVectorSource,
    n: u64,
    rng: &mut R,
    mode: BuildMode,
) -> Result<Tree> {
    if n == 0 {
        return Err(Error::InvalidArgument("a tree needs at least one ball".into()));
    }
    let mut tree = Tree::new(params, mode)?;
    if mode.traced() {
        tree.ball_locations.reserve(n as usize);
        tree.insertion_depths.reserve(n as usize);
    }
    for _ in 0..n {
        tree.add_ball(source, rng)?;
    }
    Ok(tree)
}
