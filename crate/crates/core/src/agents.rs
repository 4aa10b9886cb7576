//! Playtest policies: the player side of the design loop.
//!
//! The bundled policies are deterministic heuristics standing in for a
//! trained agent; an external policy speaking newline-delimited JSON over
//! stdin/stdout is the hook for plugging in a real one.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::rng::SplitMix64;
use crate::sim::{playfield_height, run_episode, Action, GameState, Observation, Pipe, SimError};
use crate::traces::EpisodeTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    HeuristicGap,
    HeuristicLidar,
    AlwaysIdle,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDescriptor {
    pub name: String,
    pub kind: PolicyKind,
}

pub trait Policy {
    fn act(&mut self, state: &GameState, cfg: &GameConfig) -> Result<Action, SimError>;
    fn descriptor(&self) -> PolicyDescriptor;
}

// ---------------------------------------------------------------------------
// Gap-following heuristic
// ---------------------------------------------------------------------------

/// Flap margin below the gap center, px. Tuned once against the default
/// configuration and frozen (see the `tuning` example).
pub const GAP_POLICY_MARGIN: i32 = 22;

/// Fraction of pipes approached with sloppy rather than precise aim, at the
/// default pipe speed.
pub const AIM_BLUNDER_RATE: f64 = 0.15;
/// Half-spread of the per-pipe aim offset for precise approaches, px.
pub const AIM_PRECISE_SPREAD: f64 = 6.0;
/// Half-spread for sloppy approaches, px.
pub const AIM_BLUNDER_SPREAD: f64 = 48.0;
/// Pipe speed the blunder rate is calibrated against.
pub const AIM_REFERENCE_SPEED: f64 = 4.0;
/// Blunder rate ceiling.
pub const AIM_BLUNDER_RATE_MAX: f64 = 0.85;

/// Blunder probability grows quadratically with closing speed: faster pipes
/// leave less time to judge the approach.
pub fn blunder_rate(pipe_vel_x: i32) -> f64 {
    let ratio = pipe_vel_x.unsigned_abs() as f64 / AIM_REFERENCE_SPEED;
    (AIM_BLUNDER_RATE * ratio * ratio).min(AIM_BLUNDER_RATE_MAX)
}

/// Deterministic per-pipe aim error. Without it the tracker is pixel-perfect
/// and score collapses from 30 to 0 over a few px of gap width, which leaves
/// a difficulty controller nothing to regulate; dispersing the aim point
/// spreads per-pipe survival smoothly across gap sizes and pipe speeds.
/// Derived from the pipe's sampled geometry, so it is stable while a pipe is
/// tracked and reproducible across runs.
pub fn aim_offset(pipe: &Pipe, pipe_vel_x: i32) -> i32 {
    let key = ((pipe.gap_bottom_y as u64) << 32) ^ pipe.gap_size as u64;
    let mut rng = SplitMix64::new(key ^ 0xA13_0FF5E7);
    let kind = rng.next_f64();
    let unit = rng.next_f64() * 2.0 - 1.0;
    let spread = if kind < blunder_rate(pipe_vel_x) {
        AIM_BLUNDER_SPREAD
    } else {
        AIM_PRECISE_SPREAD
    };
    (unit * spread).round() as i32
}

/// Tracks the next unscored pipe and flaps whenever the projected player
/// center would sit more than `margin` px below that pipe's (aim-offset)
/// gap center. A pipe is only tracked once it comes within the lidar range;
/// until then the policy holds altitude at the playfield center, so faster
/// pipes leave genuinely less time to line up.
#[derive(Debug, Clone)]
pub struct GapPolicy {
    pub margin: i32,
}

impl Default for GapPolicy {
    fn default() -> Self {
        Self {
            margin: GAP_POLICY_MARGIN,
        }
    }
}

pub fn heuristic_gap_action(state: &GameState, cfg: &GameConfig, margin: i32) -> Action {
    let playfield = playfield_height(cfg);
    let horizon = cfg.dimensions.lidar.max_distance as i32;
    let player_right = crate::sim::PLAYER_X + cfg.dimensions.player.width as i32;

    let target_line = match state.pipes.iter().find(|p| !p.scored) {
        Some(target) if target.x - player_right <= horizon => {
            let gap_center =
                playfield - target.gap_bottom_y as i32 - target.gap_size as i32 / 2;
            gap_center + margin + aim_offset(target, cfg.speed.pipe_vel_x)
        }
        // Nothing observable yet: hold the middle of the playfield.
        _ => playfield / 2,
    };

    let p = &cfg.speed.player;
    let projected_vel = (state.player_vel_y + p.acc_y).clamp(p.min_vel_y, p.max_vel_y);
    let projected_center =
        state.player_y + projected_vel + cfg.dimensions.player.height as i32 / 2;
    if projected_center > target_line {
        Action::Flap
    } else {
        Action::Idle
    }
}

impl Policy for GapPolicy {
    fn act(&mut self, state: &GameState, cfg: &GameConfig) -> Result<Action, SimError> {
        Ok(heuristic_gap_action(state, cfg, self.margin))
    }

    fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor {
            name: "heuristic-gap".to_string(),
            kind: PolicyKind::HeuristicGap,
        }
    }
}

// ---------------------------------------------------------------------------
// Lidar-only heuristic
// ---------------------------------------------------------------------------

/// Clearance below which the lidar policy flaps, px.
pub const LIDAR_FLOOR_THRESHOLD: f64 = 36.0;
/// Extra clearance demanded per px/tick of descent speed.
pub const LIDAR_VEL_SCALE: f64 = 5.0;
/// Rays counted as the downward cone: angles from +45° to +89.5°.
pub const LIDAR_DOWN_CONE_START: usize = 135;

/// Decides purely from an [`Observation`]: flap when the downward ray cone
/// reports less clearance than the descent speed warrants.
pub fn heuristic_lidar_action(obs: &Observation) -> Action {
    let down_min = obs.lidar_distances[LIDAR_DOWN_CONE_START..]
        .iter()
        .fold(f64::INFINITY, |a, &d| a.min(d));
    let threshold = LIDAR_FLOOR_THRESHOLD + LIDAR_VEL_SCALE * obs.player_vel_y.max(0) as f64;
    if down_min < threshold {
        Action::Flap
    } else {
        Action::Idle
    }
}

/// Adapter that feeds lidar scans to [`heuristic_lidar_action`]. The policy
/// never sees pipe coordinates, only the observation.
#[derive(Debug, Clone, Default)]
pub struct LidarPolicy;

impl Policy for LidarPolicy {
    fn act(&mut self, state: &GameState, cfg: &GameConfig) -> Result<Action, SimError> {
        Ok(heuristic_lidar_action(&state.lidar_scan(cfg)))
    }

    fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor {
            name: "heuristic-lidar".to_string(),
            kind: PolicyKind::HeuristicLidar,
        }
    }
}

// ---------------------------------------------------------------------------
// Baselines and external processes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct AlwaysIdle;

impl Policy for AlwaysIdle {
    fn act(&mut self, _state: &GameState, _cfg: &GameConfig) -> Result<Action, SimError> {
        Ok(Action::Idle)
    }

    fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor {
            name: "always-idle".to_string(),
            kind: PolicyKind::AlwaysIdle,
        }
    }
}

/// Bridges to a subprocess: one JSON [`Observation`] per line on its stdin,
/// one `flap`/`idle` token per line back on its stdout.
pub struct ExternalPolicy {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    command: String,
}

impl ExternalPolicy {
    /// Spawn `command` (split on whitespace; no shell interpretation).
    pub fn spawn(command: &str) -> std::io::Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty policy command")
        })?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            child,
            stdin,
            stdout,
            command: command.to_string(),
        })
    }
}

impl Policy for ExternalPolicy {
    fn act(&mut self, state: &GameState, cfg: &GameConfig) -> Result<Action, SimError> {
        let obs = state.lidar_scan(cfg);
        let line = serde_json::to_string(&obs).expect("observation serializes");
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SimError::Policy(format!("external policy stdin: {e}")))?;
        let mut reply = String::new();
        self.stdout
            .read_line(&mut reply)
            .map_err(|e| SimError::Policy(format!("external policy stdout: {e}")))?;
        match reply.trim() {
            "flap" => Ok(Action::Flap),
            "idle" => Ok(Action::Idle),
            other => Err(SimError::Policy(format!(
                "external policy sent `{other}`, expected `flap` or `idle`"
            ))),
        }
    }

    fn descriptor(&self) -> PolicyDescriptor {
        PolicyDescriptor {
            name: format!("external:{}", self.command),
            kind: PolicyKind::External,
        }
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Construct a policy from its kind; `External` requires a command.
pub fn build_policy(
    kind: PolicyKind,
    external_cmd: Option<&str>,
) -> Result<Box<dyn Policy>, SimError> {
    match kind {
        PolicyKind::HeuristicGap => Ok(Box::new(GapPolicy::default())),
        PolicyKind::HeuristicLidar => Ok(Box::new(LidarPolicy)),
        PolicyKind::AlwaysIdle => Ok(Box::new(AlwaysIdle)),
        PolicyKind::External => {
            let cmd = external_cmd.ok_or_else(|| {
                SimError::Policy("external policy requires a command".to_string())
            })?;
            ExternalPolicy::spawn(cmd)
                .map(|p| Box::new(p) as Box<dyn Policy>)
                .map_err(|e| SimError::Policy(format!("spawn `{cmd}`: {e}")))
        }
    }
}

/// Run `n` episodes with consecutive seeds `seed_base..seed_base + n`.
pub fn run_batch(
    cfg: &GameConfig,
    policy: &mut dyn Policy,
    n: u32,
    seed_base: u64,
) -> Result<Vec<EpisodeTrace>, SimError> {
    (0..n as u64)
        .map(|k| run_episode(cfg, policy, seed_base + k))
        .collect()
}
