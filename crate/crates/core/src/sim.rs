//! Deterministic fixed-timestep Flappy Bird simulation.
//!
//! Coordinates are integer pixels with the origin at the top-left of the
//! screen; y grows downward. The playfield spans `0..playfield_height`
//! vertically, with the ground band below it. The player sits at a fixed
//! horizontal position and only the pipes move.
//!
//! Tick pipeline (one `step`): velocity update, vertical move + ceiling
//! clamp, rotation bookkeeping, pipe shift/despawn/spawn, scoring, then the
//! termination check (collision, then timeout, then score cap).

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::agents::Policy;
use crate::config::{validate_config, GameConfig};
use crate::rng::SplitMix64;
use crate::traces::{EpisodeTrace, RenderState, TickRecord, STRIP_WINDOW_TICKS};

/// Simulation ticks per game second.
pub const TICK_RATE: u32 = 30;
/// Episode cutoff: 120 game seconds.
pub const TIMEOUT_TICKS: u32 = 120 * TICK_RATE;
/// Episode cutoff: score cap.
pub const MAX_SCORE: u32 = 30;
/// Fixed horizontal position of the player's left edge.
pub const PLAYER_X: i32 = 57;
/// Number of lidar rays across the forward-facing semicircle.
pub const LIDAR_RAYS: usize = 180;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Flap,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    #[serde(rename = "collision")]
    Collision,
    #[serde(rename = "timeout_120s")]
    Timeout,
    #[serde(rename = "max_score_30")]
    MaxScore,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminationReason::Collision => "collision",
            TerminationReason::Timeout => "timeout_120s",
            TerminationReason::MaxScore => "max_score_30",
        }
    }
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One pipe pair. `gap_bottom_y` is the distance from the ground up to the
/// gap's lower edge; `gap_size` the vertical extent of the opening.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pipe {
    pub x: i32,
    pub gap_bottom_y: u32,
    pub gap_size: u32,
    pub scored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub tick: u32,
    /// Top edge of the player box, px from the top of the screen.
    pub player_y: i32,
    pub player_vel_y: i32,
    /// Display rotation in degrees; tracked but gameplay-irrelevant.
    pub player_rot: i32,
    /// Sorted by increasing x.
    pub pipes: Vec<Pipe>,
    pub score: u32,
    rng: SplitMix64,
    pub terminated: Option<TerminationReason>,
}

/// Lidar distances plus vertical velocity; everything a privileged-state-free
/// policy is allowed to see. Ray 0 points almost straight up, the last ray
/// almost straight down, sweeping through horizontal-forward in 1° steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lidar_distances: Vec<f64>,
    pub player_vel_y: i32,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("step on terminated state")]
    AlreadyTerminated,
    #[error("policy failure: {0}")]
    Policy(String),
}

/// Vertical extent of the area pipes and player can occupy.
pub fn playfield_height(cfg: &GameConfig) -> i32 {
    cfg.dimensions.background.height as i32 - cfg.dimensions.base.height as i32
}

fn spawn_pipe(rng: &mut SplitMix64, cfg: &GameConfig, x: i32) -> Pipe {
    let p = &cfg.dimensions.pipe;
    let gap_size = rng.next_range_u32(p.min_gap, p.max_gap);
    let gap_bottom_y = rng.next_range_u32(p.min_gap_distance, p.max_gap_distance);
    Pipe {
        x,
        gap_bottom_y,
        gap_size,
        scored: false,
    }
}

/// Keep pipes spawned out to the right edge so the level never runs dry.
fn top_up_pipes(state: &mut GameState, cfg: &GameConfig) {
    let screen_w = cfg.dimensions.background.width as i32;
    let p = &cfg.dimensions.pipe;
    while state
        .pipes
        .last()
        .map(|last| last.x < screen_w)
        .unwrap_or(true)
    {
        let x = match state.pipes.last() {
            Some(last) => {
                let spacing = state
                    .rng
                    .next_range_u32(p.min_horizontal_spacing, p.max_horizontal_spacing);
                last.x + spacing as i32
            }
            None => screen_w,
        };
        let pipe = spawn_pipe(&mut state.rng, cfg, x);
        state.pipes.push(pipe);
    }
}

/// Strict axis-aligned overlap with exclusive right/bottom edges.
#[allow(clippy::too_many_arguments)]
fn rects_overlap(ax: i32, ay: i32, aw: i32, ah: i32, bx: i32, by: i32, bw: i32, bh: i32) -> bool {
    ax < bx + bw && bx < ax + aw && ay < by + bh && by < ay + ah
}

impl GameState {
    /// Fresh seeded state: player at the vertical center, initial pipes ahead.
    pub fn reset(cfg: &GameConfig, seed: u64) -> Result<GameState, SimError> {
        let report = validate_config(cfg);
        if !report.valid {
            return Err(SimError::InvalidConfig(report.to_string()));
        }
        let playfield = playfield_height(cfg);
        let player_h = cfg.dimensions.player.height as i32;
        let mut state = GameState {
            tick: 0,
            player_y: ((playfield - player_h) / 2).max(0),
            player_vel_y: 0,
            player_rot: 0,
            pipes: Vec::new(),
            score: 0,
            rng: SplitMix64::new(seed),
            terminated: None,
        };
        top_up_pipes(&mut state, cfg);
        Ok(state)
    }

    /// Advance one tick.
    pub fn step(&mut self, cfg: &GameConfig, action: Action) -> Result<(), SimError> {
        if self.terminated.is_some() {
            return Err(SimError::AlreadyTerminated);
        }
        let p = &cfg.speed.player;

        match action {
            Action::Flap => {
                self.player_vel_y = p.flap_acc;
                self.player_rot = 45;
            }
            Action::Idle => {
                self.player_vel_y = (self.player_vel_y + p.acc_y).clamp(p.min_vel_y, p.max_vel_y);
                self.player_rot = (self.player_rot - p.vel_rot).max(-90);
            }
        }
        self.player_y += self.player_vel_y;
        if self.player_y < 0 {
            self.player_y = 0;
            self.player_vel_y = 0;
        }

        for pipe in &mut self.pipes {
            pipe.x += cfg.speed.pipe_vel_x;
        }
        let pipe_w = cfg.dimensions.pipe.width as i32;
        self.pipes.retain(|pipe| pipe.x + pipe_w > 0);
        top_up_pipes(self, cfg);

        for pipe in &mut self.pipes {
            if !pipe.scored && pipe.x + pipe_w < PLAYER_X {
                pipe.scored = true;
                self.score += 1;
            }
        }

        self.tick += 1;
        self.terminated = self.check_termination(cfg);
        Ok(())
    }

    fn check_termination(&self, cfg: &GameConfig) -> Option<TerminationReason> {
        let playfield = playfield_height(cfg);
        let pw = cfg.dimensions.player.width as i32;
        let ph = cfg.dimensions.player.height as i32;
        let pipe_w = cfg.dimensions.pipe.width as i32;

        if self.player_y + ph > playfield {
            return Some(TerminationReason::Collision);
        }
        for pipe in &self.pipes {
            let gap_bottom = playfield - pipe.gap_bottom_y as i32;
            let gap_top = gap_bottom - pipe.gap_size as i32;
            // Top pipe spans ceiling..gap_top, bottom pipe gap_bottom..ground.
            if rects_overlap(PLAYER_X, self.player_y, pw, ph, pipe.x, 0, pipe_w, gap_top)
                || rects_overlap(
                    PLAYER_X,
                    self.player_y,
                    pw,
                    ph,
                    pipe.x,
                    gap_bottom,
                    pipe_w,
                    playfield - gap_bottom,
                )
            {
                return Some(TerminationReason::Collision);
            }
        }
        if self.tick >= TIMEOUT_TICKS {
            return Some(TerminationReason::Timeout);
        }
        if self.score >= MAX_SCORE {
            return Some(TerminationReason::MaxScore);
        }
        None
    }

    /// Cast `LIDAR_RAYS` rays from the player center against pipes, ground,
    /// and ceiling; distances are clipped to the configured maximum.
    pub fn lidar_scan(&self, cfg: &GameConfig) -> Observation {
        let max_d = cfg.dimensions.lidar.max_distance as f64;
        let playfield = playfield_height(cfg) as f64;
        let pw = cfg.dimensions.player.width as f64;
        let ph = cfg.dimensions.player.height as f64;
        let pipe_w = cfg.dimensions.pipe.width as f64;
        let ox = PLAYER_X as f64 + pw / 2.0;
        let oy = self.player_y as f64 + ph / 2.0;

        let mut distances = Vec::with_capacity(LIDAR_RAYS);
        for i in 0..LIDAR_RAYS {
            let angle = (-89.5 + i as f64).to_radians();
            let (dy, dx) = angle.sin_cos();
            let mut best = max_d;

            // Ceiling (y = 0) and ground (y = playfield) planes.
            if dy < 0.0 {
                best = best.min(-oy / dy);
            } else if dy > 0.0 {
                best = best.min((playfield - oy) / dy);
            }
            for pipe in &self.pipes {
                let gap_bottom = playfield - pipe.gap_bottom_y as f64;
                let gap_top = gap_bottom - pipe.gap_size as f64;
                let px = pipe.x as f64;
                if let Some(t) = ray_rect(ox, oy, dx, dy, px, 0.0, px + pipe_w, gap_top) {
                    best = best.min(t);
                }
                if let Some(t) = ray_rect(ox, oy, dx, dy, px, gap_bottom, px + pipe_w, playfield) {
                    best = best.min(t);
                }
            }
            distances.push(best.clamp(0.0, max_d));
        }
        Observation {
            lidar_distances: distances,
            player_vel_y: self.player_vel_y,
        }
    }

    pub fn render_state(&self) -> RenderState {
        RenderState {
            tick: self.tick,
            player_y: self.player_y,
            player_rot: self.player_rot,
            pipes: self.pipes.clone(),
        }
    }
}

/// Slab-method ray/rectangle intersection; returns the entry distance
/// (zero when the origin is inside).
#[allow(clippy::too_many_arguments)]
fn ray_rect(ox: f64, oy: f64, dx: f64, dy: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> Option<f64> {
    if x1 <= x0 || y1 <= y0 {
        return None;
    }
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for (o, d, lo, hi) in [(ox, dx, x0, x1), (oy, dy, y0, y1)] {
        if d.abs() < 1e-12 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let t1 = (lo - o) / d;
            let t2 = (hi - o) / d;
            tmin = tmin.max(t1.min(t2));
            tmax = tmax.min(t1.max(t2));
        }
    }
    if tmax < tmin.max(0.0) {
        None
    } else {
        Some(tmin.max(0.0))
    }
}

/// Play one episode from reset to termination, recording per-tick telemetry
/// and a sliding window of render snapshots for the strip renderer.
pub fn run_episode(
    cfg: &GameConfig,
    policy: &mut dyn Policy,
    seed: u64,
) -> Result<EpisodeTrace, SimError> {
    let mut state = GameState::reset(cfg, seed)?;
    let window = STRIP_WINDOW_TICKS as usize + 1;
    let mut snapshots: VecDeque<RenderState> = VecDeque::with_capacity(window);
    snapshots.push_back(state.render_state());
    let mut telemetry = Vec::new();
    let mut peak_y = state.player_y;

    while state.terminated.is_none() {
        let action = policy.act(&state, cfg)?;
        state.step(cfg, action)?;
        peak_y = peak_y.min(state.player_y);
        telemetry.push(TickRecord {
            tick: state.tick,
            player_y: state.player_y,
            player_vel_y: state.player_vel_y,
            score: state.score,
            action,
        });
        snapshots.push_back(state.render_state());
        if snapshots.len() > window {
            snapshots.pop_front();
        }
    }

    Ok(EpisodeTrace {
        episode_id: format!("seed-{seed}"),
        seed,
        score: state.score,
        duration_s: state.tick as f64 / TICK_RATE as f64,
        termination: state.terminated.expect("loop exits terminated"),
        peak_y,
        snapshots: snapshots.into(),
        telemetry,
    })
}
