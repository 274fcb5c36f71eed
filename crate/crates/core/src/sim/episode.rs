use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::render::{render_topdown, RenderOptions};
use super::scenario::ScenarioSpec;
use super::world::{step, AgentState, Command, World};
use super::SimError;
use crate::emotion::{EmotionGrid, DEFAULT_SIGMA0, DEFAULT_SUPPORT_SIGMAS, DEFAULT_VALID_THRESHOLD};
use crate::geometry::{Cell, Heading, OccupancyGrid};
use crate::grounding::{FeatureGrid, Grounder, GroundingConfig, InstructionParser, LexiconEmbedder, ScriptedInstructionParser, TextEmbedder};
use crate::planning::{build_cost_field, follow_step, plan, CostModel, FollowCommand, Path, PlanError, PlannerState};
use crate::reflection::{capture_frames, reflect_and_update, Backends, EntityHint, EventRecord, Observation, RasterImage, ReflectionConfig};

/// Default number of steps between the event frame and the before/after frames.
pub const DEFAULT_FRAME_OFFSET: u32 = 5;
/// Episodes end at the first collision by default.
pub const DEFAULT_COLLISION_LIMIT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub cost: CostModel,
    pub reflection: ReflectionConfig,
    pub grounding: GroundingConfig,
    /// Frame offset `h`; the agent holds still this long after an event.
    pub frame_offset: u32,
    pub collision_limit: u32,
    /// Extra random delay (0..=jitter steps) added to entity latencies.
    pub latency_jitter: u32,
    /// Reflect on events and update the map.
    pub updates_enabled: bool,
    /// Attach top-down rasters to observations (needed by image-based describers).
    pub raster_frames: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            cost: CostModel::default(),
            reflection: ReflectionConfig::default(),
            grounding: GroundingConfig::default(),
            frame_offset: DEFAULT_FRAME_OFFSET,
            collision_limit: DEFAULT_COLLISION_LIMIT,
            latency_jitter: 0,
            updates_enabled: true,
            raster_frames: false,
        }
    }
}

/// Map layers plus the language and reflection backends.
pub struct Stack {
    pub emotion: EmotionGrid,
    pub features: FeatureGrid,
    pub embedder: Box<dyn TextEmbedder>,
    pub parser: Box<dyn InstructionParser>,
    pub backends: Backends,
}

/// Parameters for building the prebuilt map of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSettings {
    pub sigma0: f64,
    pub valid_threshold: f64,
    pub support_sigmas: Option<f64>,
}

impl Default for MapSettings {
    fn default() -> Self {
        Self { sigma0: DEFAULT_SIGMA0, valid_threshold: DEFAULT_VALID_THRESHOLD, support_sigmas: Some(DEFAULT_SUPPORT_SIGMAS) }
    }
}

/// Builds the emotion and feature layers from a scenario layout.
pub fn build_map(scenario: &ScenarioSpec, embedder: &dyn TextEmbedder, settings: &MapSettings) -> Result<(EmotionGrid, FeatureGrid), SimError> {
    let emotion = EmotionGrid::init(&scenario.occupied_set()?, scenario.geometry()?, settings.sigma0, settings.valid_threshold)?
        .with_support(settings.support_sigmas);
    let features = scenario.feature_grid(embedder)?;
    Ok((emotion, features))
}

impl Stack {
    /// Offline stack: bundled lexicon, rule-based parser and scripted reflection.
    pub fn scripted(emotion: EmotionGrid, features: FeatureGrid) -> Self {
        Self {
            emotion,
            features,
            embedder: Box::new(LexiconEmbedder::bundled()),
            parser: Box::new(ScriptedInstructionParser::default()),
            backends: Backends::scripted(),
        }
    }

    /// Offline stack with a freshly built map.
    pub fn for_scenario(scenario: &ScenarioSpec, settings: &MapSettings) -> Result<Self, SimError> {
        let embedder = LexiconEmbedder::bundled();
        let (emotion, features) = build_map(scenario, &embedder, settings)?;
        Ok(Self::scripted(emotion, features))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Success,
    CollisionLimit,
    MaxSteps,
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionSummary {
    pub t_evt: u32,
    pub description: String,
    pub upsetness: u8,
    pub guiltiness: u8,
    pub total: u8,
    pub updated_cells: Vec<Cell>,
    pub added_cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub episode: usize,
    pub instruction: String,
    /// All goals reached in order without a collision.
    pub success: bool,
    pub collisions: u32,
    pub steps: u32,
    pub termination: Termination,
    pub goals: Vec<Cell>,
    pub goals_reached: usize,
    /// Agent cell after every step, starting with the start cell.
    pub trajectory: Vec<Cell>,
    #[serde(skip)]
    pub events: Vec<EventRecord>,
    pub reflections: Vec<ReflectionSummary>,
}

impl EpisodeResult {
    pub fn summary(&self) -> String {
        format!("success={} collisions={} steps={}", self.success, self.collisions, self.steps)
    }
}

struct Recorder {
    history: Vec<Observation>,
    trajectory: Vec<Cell>,
    raster: Option<RenderOptions>,
}

impl Recorder {
    fn record(&mut self, t: u32, world: &World, agent: &AgentState, grid: &EmotionGrid, collided: bool) {
        let raster = self.raster.as_ref().map(|opts| frame_raster(world, agent, grid, opts));
        self.history.push(Observation {
            timestep: t,
            agent: agent.cell,
            heading: agent.heading,
            scene: world.scene(agent.cell, agent.heading, collided),
            raster,
        });
        self.trajectory.push(agent.cell);
    }
}

fn frame_raster(world: &World, agent: &AgentState, grid: &EmotionGrid, opts: &RenderOptions) -> RasterImage {
    let entities: Vec<Cell> = world.entities.iter().filter(|e| e.is_active()).flat_map(|e| e.cells.iter().copied()).collect();
    render_topdown(&grid.field(), Some(&world.occupancy), &entities, &[agent.cell], &[], opts)
}

fn seed_for(scenario: &ScenarioSpec, episode: usize) -> u64 {
    scenario.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(episode as u64)
}

/// Runs one instruction in a fresh copy of the scenario world.
///
/// The goal list is resolved once from the instruction. The agent plans to
/// each goal in turn and follows the path; when it collides it holds for
/// `frame_offset` steps, reflects on the event, updates the map and replans.
/// With `persist_map` the updated emotion layer is kept in `stack` for the
/// next episode.
pub fn run_episode(
    scenario: &ScenarioSpec,
    instruction: &str,
    episode: usize,
    stack: &mut Stack,
    config: &EpisodeConfig,
    persist_map: bool,
) -> Result<EpisodeResult, SimError> {
    let start = scenario.start();
    let program = stack.parser.parse(instruction)?;
    let grounder = Grounder::new(&stack.features, stack.embedder.as_ref(), config.grounding);
    let goals = grounder.resolve_program(&program, start, &stack.emotion.occupancy())?;

    let mut grid = stack.emotion.clone();
    let mut world = scenario.world()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(scenario, episode));
    let mut agent = AgentState::new(start, Heading::NORTH);
    let raster = config.raster_frames.then(RenderOptions::default);
    let mut rec = Recorder { history: Vec::new(), trajectory: Vec::new(), raster };
    rec.record(0, &world, &agent, &grid, false);

    let mut t: u32 = 0;
    let mut collisions: u32 = 0;
    let mut events = Vec::new();
    let mut reflections = Vec::new();
    let mut planner: Option<(PlannerState, Path)> = None;
    // entities the agent ran into stay blocked for the planner until the episode ends
    let mut seen_blockers: Vec<Cell> = Vec::new();
    let planning_occupancy = |grid: &EmotionGrid, blockers: &[Cell]| -> Result<OccupancyGrid, SimError> {
        let mut occ = grid.occupancy();
        for &c in blockers {
            occ.set(c, true)?;
        }
        Ok(occ)
    };
    let mut termination = Termination::Success;

    while agent.goal_index < goals.len() {
        let goal = goals[agent.goal_index];
        if agent.cell.distance(goal) <= scenario.goals_tolerance {
            agent.goal_index += 1;
            planner = None;
            continue;
        }
        if t >= scenario.max_steps {
            termination = Termination::MaxSteps;
            break;
        }
        if planner.is_none() {
            let field = build_cost_field(&grid, &planning_occupancy(&grid, &seen_blockers)?, &config.cost)?;
            match plan(field, agent.cell, goal) {
                Ok(p) => planner = Some(p),
                Err(PlanError::NoPath { .. }) => {
                    termination = Termination::NoPath;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let (state, path) = planner.as_mut().expect("planned above");
        let command = match follow_step(agent.cell, path) {
            Ok(FollowCommand::Move { to, heading }) => Command::Move { to, heading },
            Ok(FollowCommand::Arrived) => {
                agent.goal_index += 1;
                planner = None;
                continue;
            }
            Err(PlanError::OffPath(_)) => {
                planner = None;
                continue;
            }
            Err(e) => return Err(e.into()),
        };

        let outcome = step(&mut world, &mut agent, command, config.latency_jitter, &mut rng);
        t += 1;
        rec.record(t, &world, &agent, &grid, outcome.collision.is_some());
        let Some(collision) = outcome.collision else { continue };

        collisions += 1;
        if !seen_blockers.contains(&collision.cell) {
            seen_blockers.push(collision.cell);
        }
        let t_evt = t;
        log::info!("{}: collision with {:?} at {} (t={t_evt})", scenario.name, collision.kind, collision.cell);
        for _ in 0..config.frame_offset {
            step(&mut world, &mut agent, Command::Hold, config.latency_jitter, &mut rng);
            t += 1;
            rec.record(t, &world, &agent, &grid, false);
        }
        let captured = capture_frames(&rec.history, t_evt, config.frame_offset)?;
        let event = EventRecord {
            t_evt,
            agent: agent.cell,
            heading: agent.heading,
            frames: captured.frames,
            entity_hint: Some(EntityHint { kind: collision.kind, contact_cell: collision.cell }),
        };
        if config.updates_enabled {
            let outcome = reflect_and_update(&event, &mut grid, &stack.backends, &config.reflection)?;
            reflections.push(ReflectionSummary {
                t_evt,
                description: outcome.description.clone(),
                upsetness: outcome.score.upsetness(),
                guiltiness: outcome.score.guiltiness(),
                total: outcome.score.total(),
                updated_cells: outcome.updated_cells.clone(),
                added_cells: outcome.added_cells.clone(),
            });
            if outcome.replan && collisions < config.collision_limit {
                let updated = build_cost_field(&grid, &planning_occupancy(&grid, &seen_blockers)?, &config.cost)?;
                let changed = state.field().changed_cells(&updated)?;
                match state.replan(&updated, &changed, agent.cell) {
                    Ok(p) => *path = p,
                    Err(PlanError::NoPath { .. }) => {
                        events.push(event);
                        termination = Termination::NoPath;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        events.push(event);
        if collisions >= config.collision_limit {
            termination = Termination::CollisionLimit;
            break;
        }
    }

    if persist_map && config.updates_enabled {
        stack.emotion = grid;
    }
    let goals_reached = agent.goal_index;
    Ok(EpisodeResult {
        scenario: scenario.name.clone(),
        episode,
        instruction: instruction.to_string(),
        success: termination == Termination::Success && collisions == 0,
        collisions,
        steps: t,
        termination,
        goals,
        goals_reached,
        trajectory: rec.trajectory,
        events,
        reflections,
    })
}
