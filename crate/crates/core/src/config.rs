//! Game configuration: schema, parsing, canonical serialization, validation,
//! diffing, designer edit constraints, and the five broken starting scenarios.
//!
//! The YAML wire format is the one the designer sees and edits: same keys,
//! nesting, and explanatory comments as the shipped default file. Unknown
//! keys are rejected rather than ignored so that a designer inventing a
//! parameter fails loudly instead of silently being dropped.

use serde::{Deserialize, Serialize};

/// Complete tunable game definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub speed: Speed,
    pub dimensions: Dimensions,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Speed {
    /// Horizontal pipe velocity in pixels per tick; negative moves pipes
    /// toward the player.
    pub pipe_vel_x: i32,
    pub player: PlayerSpeed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerSpeed {
    /// Max descend speed in pixels per tick.
    pub max_vel_y: i32,
    /// Max ascend speed in pixels per tick (negative = upward).
    pub min_vel_y: i32,
    /// Downward acceleration in pixels per tick squared.
    pub acc_y: i32,
    /// Angular speed in degrees per tick (rendering metadata).
    pub vel_rot: i32,
    /// Velocity set on flap, pixels per tick (negative = upward).
    pub flap_acc: i32,
    /// Rotation display threshold in degrees (rendering metadata).
    pub rot_thr: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub player: PlayerDims,
    pub lidar: LidarDims,
    pub pipe: PipeDims,
    pub base: BaseDims,
    pub background: BackgroundDims,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerDims {
    pub width: u32,
    pub height: u32,
    /// Radius of the private zone for LIDAR. Locked.
    pub private_zone: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarDims {
    /// Maximum distance for LIDAR rays. Locked.
    pub max_distance: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeDims {
    pub width: u32,
    pub height: u32,
    pub min_gap: u32,
    pub max_gap: u32,
    /// Minimum distance from ground to the gap's lower edge.
    pub min_gap_distance: u32,
    /// Maximum distance from ground to the gap's lower edge.
    pub max_gap_distance: u32,
    pub min_horizontal_spacing: u32,
    pub max_horizontal_spacing: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseDims {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundDims {
    pub width: u32,
    pub height: u32,
    pub fill_color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub save_path: String,
    pub save_on_reset: bool,
}

/// The shipped default configuration.
pub fn default_config() -> GameConfig {
    GameConfig {
        speed: Speed {
            pipe_vel_x: -4,
            player: PlayerSpeed {
                max_vel_y: 10,
                min_vel_y: -8,
                acc_y: 1,
                vel_rot: 3,
                flap_acc: -9,
                rot_thr: 20,
            },
        },
        dimensions: Dimensions {
            player: PlayerDims {
                width: 34,
                height: 24,
                private_zone: 100,
            },
            lidar: LidarDims { max_distance: 200 },
            pipe: PipeDims {
                width: 52,
                height: 320,
                min_gap: 100,
                max_gap: 150,
                min_gap_distance: 50,
                max_gap_distance: 150,
                min_horizontal_spacing: 200,
                max_horizontal_spacing: 300,
            },
            base: BaseDims {
                width: 336,
                height: 112,
            },
            background: BackgroundDims {
                width: 288,
                height: 512,
                fill_color: [200, 200, 200],
            },
        },
        metrics: Metrics {
            save_path: "metrics".to_string(),
            save_on_reset: true,
        },
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// Malformed YAML text.
    #[error("yaml syntax error: {0}")]
    Syntax(String),
    /// Well-formed YAML that does not match the schema (missing, unknown, or
    /// wrong-typed field). The message names the offending field path.
    #[error("schema error: {0}")]
    Schema(String),
}

/// Parse YAML text into a [`GameConfig`], rejecting unknown keys.
pub fn parse_config(yaml_text: &str) -> Result<GameConfig, ConfigError> {
    let value: serde_yaml::Value =
        serde_yaml::from_str(yaml_text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    match serde_path_to_error::deserialize::<_, GameConfig>(value) {
        Ok(cfg) => Ok(cfg),
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner().to_string();
            Err(ConfigError::Schema(schema_error_message(&path, &inner)))
        }
    }
}

/// Compose a full dotted field path out of the error location and the field
/// named in serde's message, e.g. `dimensions.pipe.min_gap: missing field`.
fn schema_error_message(path: &str, inner: &str) -> String {
    let named_field = inner
        .strip_prefix("missing field `")
        .or_else(|| inner.strip_prefix("unknown field `"))
        .and_then(|rest| rest.split('`').next());
    match named_field {
        Some(field) if path != "." && !path.is_empty() => format!("{path}.{field}: {inner}"),
        Some(field) => format!("{field}: {inner}"),
        None if path != "." && !path.is_empty() => format!("{path}: {inner}"),
        None => inner.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Column at which comments in the player speed block are aligned.
const SPEED_COMMENT_COL: usize = 19;

fn push_aligned(out: &mut String, line: String, comment: &str, col: usize) {
    let pad = col.saturating_sub(line.len()).max(2);
    out.push_str(&line);
    for _ in 0..pad {
        out.push(' ');
    }
    out.push_str("# ");
    out.push_str(comment);
    out.push('\n');
}

fn yaml_quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            _ => q.push(c),
        }
    }
    q.push('"');
    q
}

fn yaml_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn yaml_color(c: [u8; 3]) -> String {
    format!("[{}, {}, {}]", c[0], c[1], c[2])
}

/// Emit the canonical YAML wire format: same key structure, ordering, and
/// explanatory comments as the shipped default file. Stable under
/// `parse_config` round-trips.
pub fn serialize_config(cfg: &GameConfig) -> String {
    let mut out = String::with_capacity(1024);
    let s = &cfg.speed;
    let p = &s.player;
    let d = &cfg.dimensions;

    out.push_str("# Speed and Acceleration\n");
    out.push_str("speed:\n");
    out.push_str(&format!("  pipe_vel_x: {}\n", s.pipe_vel_x));
    out.push_str("  player:\n");
    push_aligned(
        &mut out,
        format!("    max_vel_y: {}", p.max_vel_y),
        "max vel along Y, max descend speed",
        SPEED_COMMENT_COL,
    );
    push_aligned(
        &mut out,
        format!("    min_vel_y: {}", p.min_vel_y),
        "min vel along Y, max ascend speed",
        SPEED_COMMENT_COL,
    );
    push_aligned(
        &mut out,
        format!("    acc_y: {}", p.acc_y),
        "players downward acceleration",
        SPEED_COMMENT_COL,
    );
    push_aligned(
        &mut out,
        format!("    vel_rot: {}", p.vel_rot),
        "angular speed",
        SPEED_COMMENT_COL,
    );
    push_aligned(
        &mut out,
        format!("    flap_acc: {}", p.flap_acc),
        "players speed on flapping",
        SPEED_COMMENT_COL,
    );
    push_aligned(
        &mut out,
        format!("    rot_thr: {}", p.rot_thr),
        "Player's rotation threshold",
        SPEED_COMMENT_COL,
    );

    out.push_str("\n# Dimensions\n");
    out.push_str("dimensions:\n");
    out.push_str("  player:\n");
    out.push_str(&format!("    width: {}\n", d.player.width));
    out.push_str(&format!("    height: {}\n", d.player.height));
    out.push_str(&format!(
        "    private_zone: {}  # Radius of the private zone for LIDAR. DO NOT MODIFY.\n",
        d.player.private_zone
    ));
    out.push('\n');
    out.push_str("  lidar:\n");
    out.push_str(&format!(
        "    max_distance: {}  # Maximum distance for LIDAR rays. DO NOT MODIFY.\n",
        d.lidar.max_distance
    ));
    out.push('\n');
    out.push_str("  pipe:\n");
    out.push_str(&format!("    width: {}\n", d.pipe.width));
    out.push_str(&format!("    height: {}\n", d.pipe.height));
    out.push_str(&format!("    min_gap: {}\n", d.pipe.min_gap));
    out.push_str(&format!("    max_gap: {}\n", d.pipe.max_gap));
    out.push_str(&format!(
        "    min_gap_distance: {}  # Minimum distance from ground to pipe gap\n",
        d.pipe.min_gap_distance
    ));
    out.push_str(&format!(
        "    max_gap_distance: {}  # Maximum distance from ground to pipe gap\n",
        d.pipe.max_gap_distance
    ));
    out.push_str(&format!(
        "    min_horizontal_spacing: {}  # Minimum horizontal spacing between pipes\n",
        d.pipe.min_horizontal_spacing
    ));
    out.push_str(&format!(
        "    max_horizontal_spacing: {}  # Maximum horizontal spacing between pipes\n",
        d.pipe.max_horizontal_spacing
    ));
    out.push('\n');
    out.push_str("  base:\n");
    out.push_str(&format!("    width: {}\n", d.base.width));
    out.push_str(&format!("    height: {}\n", d.base.height));
    out.push('\n');
    out.push_str("  background:\n");
    out.push_str(&format!("    width: {}\n", d.background.width));
    out.push_str(&format!("    height: {}\n", d.background.height));
    out.push_str(&format!(
        "    fill_color: {}  # RGB color tuple\n",
        yaml_color(d.background.fill_color)
    ));
    out.push('\n');
    out.push_str("metrics:\n");
    out.push_str(&format!("  save_path: {}\n", yaml_quote(&cfg.metrics.save_path)));
    out.push_str(&format!(
        "  save_on_reset: {}\n",
        yaml_bool(cfg.metrics.save_on_reset)
    ));
    out
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            valid: violations.is_empty(),
            violations,
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.valid {
            write!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{}: {}", v.path, v.message)?;
            }
            Ok(())
        }
    }
}

/// Check every structural invariant and report all violations.
pub fn validate_config(cfg: &GameConfig) -> ValidationReport {
    let mut out = Vec::new();
    let d = &cfg.dimensions;
    let positives: [(&str, u32); 16] = [
        ("dimensions.player.width", d.player.width),
        ("dimensions.player.height", d.player.height),
        ("dimensions.player.private_zone", d.player.private_zone),
        ("dimensions.lidar.max_distance", d.lidar.max_distance),
        ("dimensions.pipe.width", d.pipe.width),
        ("dimensions.pipe.height", d.pipe.height),
        ("dimensions.pipe.min_gap", d.pipe.min_gap),
        ("dimensions.pipe.max_gap", d.pipe.max_gap),
        ("dimensions.pipe.min_gap_distance", d.pipe.min_gap_distance),
        ("dimensions.pipe.max_gap_distance", d.pipe.max_gap_distance),
        (
            "dimensions.pipe.min_horizontal_spacing",
            d.pipe.min_horizontal_spacing,
        ),
        (
            "dimensions.pipe.max_horizontal_spacing",
            d.pipe.max_horizontal_spacing,
        ),
        ("dimensions.base.width", d.base.width),
        ("dimensions.base.height", d.base.height),
        ("dimensions.background.width", d.background.width),
        ("dimensions.background.height", d.background.height),
    ];
    for (path, v) in positives {
        if v == 0 {
            out.push(Violation {
                path: path.to_string(),
                message: "must be > 0".to_string(),
            });
        }
    }

    let mut check = |cond: bool, path: &str, msg: String| {
        if !cond {
            out.push(Violation {
                path: path.to_string(),
                message: msg,
            });
        }
    };

    check(
        d.pipe.min_gap <= d.pipe.max_gap,
        "dimensions.pipe.min_gap",
        format!(
            "must be <= dimensions.pipe.max_gap ({} > {})",
            d.pipe.min_gap, d.pipe.max_gap
        ),
    );
    check(
        d.pipe.min_gap_distance <= d.pipe.max_gap_distance,
        "dimensions.pipe.min_gap_distance",
        format!(
            "must be <= dimensions.pipe.max_gap_distance ({} > {})",
            d.pipe.min_gap_distance, d.pipe.max_gap_distance
        ),
    );
    check(
        d.pipe.min_horizontal_spacing <= d.pipe.max_horizontal_spacing,
        "dimensions.pipe.min_horizontal_spacing",
        format!(
            "must be <= dimensions.pipe.max_horizontal_spacing ({} > {})",
            d.pipe.min_horizontal_spacing, d.pipe.max_horizontal_spacing
        ),
    );

    let playfield = d.background.height as i64 - d.base.height as i64;
    check(
        (d.pipe.max_gap as i64 + d.pipe.max_gap_distance as i64) <= playfield,
        "dimensions.pipe.max_gap",
        format!(
            "max_gap + max_gap_distance ({}) must fit the playfield (background.height - base.height = {})",
            d.pipe.max_gap as i64 + d.pipe.max_gap_distance as i64,
            playfield
        ),
    );

    check(
        cfg.speed.pipe_vel_x < 0,
        "speed.pipe_vel_x",
        format!(
            "must be < 0 so pipes move toward the player (got {})",
            cfg.speed.pipe_vel_x
        ),
    );
    let p = &cfg.speed.player;
    check(
        p.acc_y > 0,
        "speed.player.acc_y",
        format!("must be > 0 (got {})", p.acc_y),
    );
    check(
        p.flap_acc < 0,
        "speed.player.flap_acc",
        format!("must be < 0 (got {})", p.flap_acc),
    );
    check(
        p.min_vel_y < 0,
        "speed.player.min_vel_y",
        format!("must be < 0 (got {})", p.min_vel_y),
    );
    check(
        p.max_vel_y > 0,
        "speed.player.max_vel_y",
        format!("must be > 0 (got {})", p.max_vel_y),
    );

    ValidationReport::from_violations(out)
}

// ---------------------------------------------------------------------------
// Diffing and designer constraints
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldChange {
    pub path: String,
    pub old: String,
    pub new: String,
}

/// Flatten a config into `(path, rendered value)` pairs in schema order.
fn flatten(cfg: &GameConfig) -> Vec<(&'static str, String)> {
    let s = &cfg.speed;
    let p = &s.player;
    let d = &cfg.dimensions;
    vec![
        ("speed.pipe_vel_x", s.pipe_vel_x.to_string()),
        ("speed.player.max_vel_y", p.max_vel_y.to_string()),
        ("speed.player.min_vel_y", p.min_vel_y.to_string()),
        ("speed.player.acc_y", p.acc_y.to_string()),
        ("speed.player.vel_rot", p.vel_rot.to_string()),
        ("speed.player.flap_acc", p.flap_acc.to_string()),
        ("speed.player.rot_thr", p.rot_thr.to_string()),
        ("dimensions.player.width", d.player.width.to_string()),
        ("dimensions.player.height", d.player.height.to_string()),
        (
            "dimensions.player.private_zone",
            d.player.private_zone.to_string(),
        ),
        (
            "dimensions.lidar.max_distance",
            d.lidar.max_distance.to_string(),
        ),
        ("dimensions.pipe.width", d.pipe.width.to_string()),
        ("dimensions.pipe.height", d.pipe.height.to_string()),
        ("dimensions.pipe.min_gap", d.pipe.min_gap.to_string()),
        ("dimensions.pipe.max_gap", d.pipe.max_gap.to_string()),
        (
            "dimensions.pipe.min_gap_distance",
            d.pipe.min_gap_distance.to_string(),
        ),
        (
            "dimensions.pipe.max_gap_distance",
            d.pipe.max_gap_distance.to_string(),
        ),
        (
            "dimensions.pipe.min_horizontal_spacing",
            d.pipe.min_horizontal_spacing.to_string(),
        ),
        (
            "dimensions.pipe.max_horizontal_spacing",
            d.pipe.max_horizontal_spacing.to_string(),
        ),
        ("dimensions.base.width", d.base.width.to_string()),
        ("dimensions.base.height", d.base.height.to_string()),
        ("dimensions.background.width", d.background.width.to_string()),
        (
            "dimensions.background.height",
            d.background.height.to_string(),
        ),
        (
            "dimensions.background.fill_color",
            yaml_color(d.background.fill_color),
        ),
        ("metrics.save_path", yaml_quote(&cfg.metrics.save_path)),
        (
            "metrics.save_on_reset",
            yaml_bool(cfg.metrics.save_on_reset).to_string(),
        ),
    ]
}

/// Field-by-field difference in deterministic schema order. Empty iff equal.
pub fn diff_configs(old: &GameConfig, new: &GameConfig) -> Vec<FieldChange> {
    flatten(old)
        .into_iter()
        .zip(flatten(new))
        .filter(|((_, a), (_, b))| a != b)
        .map(|((path, a), (_, b))| FieldChange {
            path: path.to_string(),
            old: a,
            new: b,
        })
        .collect()
}

/// Field paths the designer is never allowed to change.
pub const LOCKED_FIELD_PATHS: &[&str] = &[
    "speed.player.max_vel_y",
    "speed.player.min_vel_y",
    "speed.player.acc_y",
    "speed.player.vel_rot",
    "speed.player.flap_acc",
    "speed.player.rot_thr",
    "dimensions.player.private_zone",
    "dimensions.lidar.max_distance",
    "dimensions.base.width",
    "dimensions.base.height",
    "dimensions.background.width",
    "dimensions.background.height",
    "dimensions.background.fill_color",
    "metrics.save_path",
    "metrics.save_on_reset",
];

/// Revert any locked field the proposal touched back to `prev`'s value and
/// report the reverted paths. Pipe geometry and `pipe_vel_x` pass through.
pub fn enforce_designer_constraints(
    prev: &GameConfig,
    proposed: &GameConfig,
) -> (GameConfig, Vec<FieldChange>) {
    let mut result = proposed.clone();
    let mut violations = Vec::new();

    macro_rules! lock {
        ($field:expr, $prev:expr, $path:literal, $render:expr) => {
            if $field != $prev {
                violations.push(FieldChange {
                    path: $path.to_string(),
                    old: $render(&$prev),
                    new: $render(&$field),
                });
                $field = $prev;
            }
        };
    }
    let int = |v: &i32| v.to_string();
    let uint = |v: &u32| v.to_string();

    lock!(
        result.speed.player.max_vel_y,
        prev.speed.player.max_vel_y,
        "speed.player.max_vel_y",
        int
    );
    lock!(
        result.speed.player.min_vel_y,
        prev.speed.player.min_vel_y,
        "speed.player.min_vel_y",
        int
    );
    lock!(
        result.speed.player.acc_y,
        prev.speed.player.acc_y,
        "speed.player.acc_y",
        int
    );
    lock!(
        result.speed.player.vel_rot,
        prev.speed.player.vel_rot,
        "speed.player.vel_rot",
        int
    );
    lock!(
        result.speed.player.flap_acc,
        prev.speed.player.flap_acc,
        "speed.player.flap_acc",
        int
    );
    lock!(
        result.speed.player.rot_thr,
        prev.speed.player.rot_thr,
        "speed.player.rot_thr",
        int
    );
    lock!(
        result.dimensions.player.private_zone,
        prev.dimensions.player.private_zone,
        "dimensions.player.private_zone",
        uint
    );
    lock!(
        result.dimensions.lidar.max_distance,
        prev.dimensions.lidar.max_distance,
        "dimensions.lidar.max_distance",
        uint
    );
    lock!(
        result.dimensions.base.width,
        prev.dimensions.base.width,
        "dimensions.base.width",
        uint
    );
    lock!(
        result.dimensions.base.height,
        prev.dimensions.base.height,
        "dimensions.base.height",
        uint
    );
    lock!(
        result.dimensions.background.width,
        prev.dimensions.background.width,
        "dimensions.background.width",
        uint
    );
    lock!(
        result.dimensions.background.height,
        prev.dimensions.background.height,
        "dimensions.background.height",
        uint
    );
    lock!(
        result.dimensions.background.fill_color,
        prev.dimensions.background.fill_color,
        "dimensions.background.fill_color",
        |v: &[u8; 3]| yaml_color(*v)
    );
    if result.metrics.save_path != prev.metrics.save_path {
        violations.push(FieldChange {
            path: "metrics.save_path".to_string(),
            old: yaml_quote(&prev.metrics.save_path),
            new: yaml_quote(&result.metrics.save_path),
        });
        result.metrics.save_path = prev.metrics.save_path.clone();
    }
    lock!(
        result.metrics.save_on_reset,
        prev.metrics.save_on_reset,
        "metrics.save_on_reset",
        |v: &bool| yaml_bool(*v).to_string()
    );

    (result, violations)
}

// ---------------------------------------------------------------------------
// Broken starting scenarios
// ---------------------------------------------------------------------------

/// The five deliberately detuned starting configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Pipes move too fast, making the game too hard.
    TooFast,
    /// Pipe gaps are too wide, making the game too easy.
    TooEasy,
    /// Gaps placed like the default but too narrow.
    TooTight1,
    /// Gaps placed differently from the default and also too narrow.
    TooTight2,
    /// Pipes placed infrequently; wide horizontal gaps waste the clock.
    TooSpacedOut,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::TooFast,
        Scenario::TooEasy,
        Scenario::TooTight1,
        Scenario::TooTight2,
        Scenario::TooSpacedOut,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::TooFast => "too_fast",
            Scenario::TooEasy => "too_easy",
            Scenario::TooTight1 => "too_tight_1",
            Scenario::TooTight2 => "too_tight_2",
            Scenario::TooSpacedOut => "too_spaced_out",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}` (expected one of: too_fast, too_easy, too_tight_1, too_tight_2, too_spaced_out)"))
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Build the starting configuration for a scenario. Values were fixed by
/// simulation sweeps against the bundled gap-following policy (see the
/// `tuning` example) and are frozen here.
pub fn broken_config(scenario: Scenario) -> GameConfig {
    let mut cfg = default_config();
    match scenario {
        Scenario::TooFast => {
            cfg.speed.pipe_vel_x = -9;
            // Fast pipes arriving close together; the spacing recovers
            // toward the defaults as soon as the designer reacts.
            cfg.dimensions.pipe.min_horizontal_spacing = 90;
            cfg.dimensions.pipe.max_horizontal_spacing = 130;
        }
        Scenario::TooEasy => {
            cfg.dimensions.pipe.min_gap = 200;
            cfg.dimensions.pipe.max_gap = 260;
            // Keep the widened gap inside the playfield.
            cfg.dimensions.pipe.max_gap_distance = 140;
        }
        Scenario::TooTight1 => {
            cfg.dimensions.pipe.min_gap = 55;
            cfg.dimensions.pipe.max_gap = 70;
        }
        Scenario::TooTight2 => {
            cfg.dimensions.pipe.min_gap = 40;
            cfg.dimensions.pipe.max_gap = 60;
            // Same spread as the default distance band, shifted upward.
            cfg.dimensions.pipe.min_gap_distance = 100;
            cfg.dimensions.pipe.max_gap_distance = 200;
        }
        Scenario::TooSpacedOut => {
            cfg.dimensions.pipe.min_horizontal_spacing = 1700;
            cfg.dimensions.pipe.max_horizontal_spacing = 2000;
        }
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The wire-format text of the default configuration.
    pub const DEFAULT_YAML: &str = "\
# Speed and Acceleration
speed:
  pipe_vel_x: -4
  player:
    max_vel_y: 10  # max vel along Y, max descend speed
    min_vel_y: -8  # min vel along Y, max ascend speed
    acc_y: 1       # players downward acceleration
    vel_rot: 3     # angular speed
    flap_acc: -9   # players speed on flapping
    rot_thr: 20    # Player's rotation threshold

# Dimensions
dimensions:
  player:
    width: 34
    height: 24
    private_zone: 100  # Radius of the private zone for LIDAR. DO NOT MODIFY.

  lidar:
    max_distance: 200  # Maximum distance for LIDAR rays. DO NOT MODIFY.

  pipe:
    width: 52
    height: 320
    min_gap: 100
    max_gap: 150
    min_gap_distance: 50  # Minimum distance from ground to pipe gap
    max_gap_distance: 150  # Maximum distance from ground to pipe gap
    min_horizontal_spacing: 200  # Minimum horizontal spacing between pipes
    max_horizontal_spacing: 300  # Maximum horizontal spacing between pipes

  base:
    width: 336
    height: 112

  background:
    width: 288
    height: 512
    fill_color: [200, 200, 200]  # RGB color tuple

metrics:
  save_path: \"metrics\"
  save_on_reset: True
";

    #[test]
    fn parse_default_yaml_values() {
        let cfg = parse_config(DEFAULT_YAML).unwrap();
        assert_eq!(cfg.speed.pipe_vel_x, -4);
        assert_eq!(cfg.dimensions.pipe.min_gap, 100);
        assert_eq!(cfg.dimensions.pipe.max_gap, 150);
        assert_eq!(cfg.dimensions.pipe.min_horizontal_spacing, 200);
        assert_eq!(cfg.dimensions.pipe.max_horizontal_spacing, 300);
        assert_eq!(cfg.dimensions.lidar.max_distance, 200);
        assert_eq!(cfg.dimensions.player.private_zone, 100);
        assert_eq!(cfg.metrics.save_path, "metrics");
        assert!(cfg.metrics.save_on_reset);
        assert_eq!(cfg, default_config());
    }

    #[test]
    fn serialize_default_matches_wire_text() {
        assert_eq!(serialize_config(&default_config()), DEFAULT_YAML);
    }

    #[test]
    fn missing_field_names_full_path() {
        let broken = DEFAULT_YAML.replace("    min_gap: 100\n", "");
        let err = parse_config(&broken).unwrap_err();
        match err {
            ConfigError::Schema(msg) => {
                assert!(msg.contains("dimensions.pipe.min_gap"), "got: {msg}")
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_by_name() {
        let extra = DEFAULT_YAML.replace("    min_gap: 100\n", "    min_gap: 100\n    bonus: 3\n");
        let err = parse_config(&extra).unwrap_err();
        match err {
            ConfigError::Schema(msg) => {
                assert!(msg.contains("bonus"), "got: {msg}");
                assert!(msg.contains("dimensions.pipe"), "got: {msg}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_yaml_is_syntax_error() {
        let err = parse_config("speed: [unclosed").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax(_)));
    }

    #[test]
    fn roundtrip_identity() {
        let cfg = parse_config(DEFAULT_YAML).unwrap();
        let reparsed = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn serialize_is_idempotent() {
        let once = serialize_config(&parse_config(DEFAULT_YAML).unwrap());
        let twice = serialize_config(&parse_config(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn serialize_keeps_locked_comments_and_flow_color() {
        let text = serialize_config(&default_config());
        assert!(text.contains("private_zone: 100  # Radius of the private zone for LIDAR. DO NOT MODIFY."));
        assert!(text.contains("max_distance: 200  # Maximum distance for LIDAR rays. DO NOT MODIFY."));
        assert!(text.contains("fill_color: [200, 200, 200]"));
    }

    #[test]
    fn validate_default_is_valid() {
        let report = validate_config(&default_config());
        assert!(report.valid, "{report}");
        assert!(report.violations.is_empty());
    }

    #[test]
    fn validate_flags_gap_ordering() {
        let mut cfg = default_config();
        cfg.dimensions.pipe.min_gap = 200;
        cfg.dimensions.pipe.max_gap = 150;
        let report = validate_config(&cfg);
        assert!(!report.valid);
        assert!(report
            .violations
            .iter()
            .any(|v| v.path == "dimensions.pipe.min_gap"));
    }

    #[test]
    fn validate_flags_positive_pipe_velocity() {
        let mut cfg = default_config();
        cfg.speed.pipe_vel_x = 4;
        let report = validate_config(&cfg);
        assert!(report
            .violations
            .iter()
            .any(|v| v.path == "speed.pipe_vel_x"));
    }

    #[test]
    fn validate_flags_gap_exceeding_playfield() {
        let mut cfg = default_config();
        cfg.dimensions.pipe.max_gap = 350;
        let report = validate_config(&cfg);
        assert!(report
            .violations
            .iter()
            .any(|v| v.path == "dimensions.pipe.max_gap"));
    }

    #[test]
    fn diff_identity_is_empty() {
        let cfg = default_config();
        assert!(diff_configs(&cfg, &cfg).is_empty());
    }

    #[test]
    fn diff_single_field() {
        let old = default_config();
        let mut new = old.clone();
        new.speed.pipe_vel_x = -3;
        let diff = diff_configs(&old, &new);
        assert_eq!(diff.len(), 1);
        assert_eq!(diff[0].path, "speed.pipe_vel_x");
        assert_eq!(diff[0].old, "-4");
        assert_eq!(diff[0].new, "-3");
    }

    #[test]
    fn constraints_pass_through_pipe_edits() {
        let prev = default_config();
        let mut proposed = prev.clone();
        proposed.dimensions.pipe.min_gap = 140;
        let (result, violations) = enforce_designer_constraints(&prev, &proposed);
        assert_eq!(result, proposed);
        assert!(violations.is_empty());
    }

    #[test]
    fn constraints_revert_player_speed() {
        let prev = default_config();
        let mut proposed = prev.clone();
        proposed.speed.player.flap_acc = -12;
        let (result, violations) = enforce_designer_constraints(&prev, &proposed);
        assert_eq!(result.speed.player.flap_acc, -9);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].path, "speed.player.flap_acc");
    }

    #[test]
    fn constraints_revert_lidar() {
        let prev = default_config();
        let mut proposed = prev.clone();
        proposed.dimensions.lidar.max_distance = 300;
        let (result, violations) = enforce_designer_constraints(&prev, &proposed);
        assert_eq!(result.dimensions.lidar.max_distance, 200);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].path, "dimensions.lidar.max_distance");
    }

    #[test]
    fn constraints_identity_has_no_violations() {
        let prev = default_config();
        let (result, violations) = enforce_designer_constraints(&prev, &prev);
        assert_eq!(result, prev);
        assert!(violations.is_empty());
    }

    #[test]
    fn broken_configs_all_validate() {
        for scenario in Scenario::ALL {
            let cfg = broken_config(scenario);
            let report = validate_config(&cfg);
            assert!(report.valid, "{scenario}: {report}");
        }
    }

    #[test]
    fn scenario_names_roundtrip() {
        for scenario in Scenario::ALL {
            assert_eq!(scenario.name().parse::<Scenario>().unwrap(), scenario);
        }
        assert!("nonsense".parse::<Scenario>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Random configuration that satisfies `validate_config`.
        pub fn arb_valid_config() -> impl Strategy<Value = GameConfig> {
            (
                -12i32..=-1,
                1u32..=400,
                1u32..=60,
                (1u32..=900, 1u32..=900),
                (1i32..=20, -20i32..=-1, 1i32..=6, -20i32..=-1),
                (1u32..=64, 1u32..=64),
                proptest::array::uniform3(any::<u8>()),
            )
                .prop_flat_map(
                    |(vel, extra, base_h, (sa, sb), (max_vy, min_vy, acc, flap), (pw, ph), color)| {
                        let bg_h = base_h + 2 + extra;
                        let playfield = bg_h - base_h;
                        (1u32..=playfield - 1).prop_flat_map(move |gap_hi| {
                            let dist_cap = playfield - gap_hi;
                            (1u32..=gap_hi, 1u32..=dist_cap, 1u32..=dist_cap).prop_map(
                                move |(gap_lo, d1, d2)| {
                                    let mut cfg = default_config();
                                    cfg.speed.pipe_vel_x = vel;
                                    cfg.speed.player.max_vel_y = max_vy;
                                    cfg.speed.player.min_vel_y = min_vy;
                                    cfg.speed.player.acc_y = acc;
                                    cfg.speed.player.flap_acc = flap;
                                    cfg.dimensions.player.width = pw;
                                    cfg.dimensions.player.height = ph;
                                    cfg.dimensions.pipe.min_gap = gap_lo;
                                    cfg.dimensions.pipe.max_gap = gap_hi;
                                    cfg.dimensions.pipe.min_gap_distance = d1.min(d2);
                                    cfg.dimensions.pipe.max_gap_distance = d1.max(d2);
                                    cfg.dimensions.pipe.min_horizontal_spacing = sa.min(sb);
                                    cfg.dimensions.pipe.max_horizontal_spacing = sa.max(sb);
                                    cfg.dimensions.base.height = base_h;
                                    cfg.dimensions.background.height = bg_h;
                                    cfg.dimensions.background.fill_color = color;
                                    cfg
                                },
                            )
                        })
                    },
                )
        }

        proptest! {
            #[test]
            fn valid_configs_roundtrip(cfg in arb_valid_config()) {
                prop_assert!(validate_config(&cfg).valid);
                let reparsed = parse_config(&serialize_config(&cfg)).unwrap();
                prop_assert_eq!(cfg, reparsed);
            }

            #[test]
            fn diff_is_antisymmetric(a in arb_valid_config(), b in arb_valid_config()) {
                let forward = diff_configs(&a, &b);
                let backward = diff_configs(&b, &a);
                prop_assert_eq!(forward.len(), backward.len());
                for (f, r) in forward.iter().zip(backward.iter()) {
                    prop_assert_eq!(&f.path, &r.path);
                    prop_assert_eq!(&f.old, &r.new);
                    prop_assert_eq!(&f.new, &r.old);
                }
            }

            #[test]
            fn constraints_always_preserve_locked_fields(
                prev in arb_valid_config(),
                proposed in arb_valid_config(),
            ) {
                let (result, _violations) = enforce_designer_constraints(&prev, &proposed);
                prop_assert_eq!(result.speed.player, prev.speed.player);
                prop_assert_eq!(result.dimensions.player.private_zone, prev.dimensions.player.private_zone);
                prop_assert_eq!(result.dimensions.lidar, prev.dimensions.lidar);
                prop_assert_eq!(result.dimensions.base, prev.dimensions.base);
                prop_assert_eq!(result.dimensions.background, prev.dimensions.background);
                prop_assert_eq!(result.metrics, prev.metrics);
                // Pipe fields pass through untouched.
                prop_assert_eq!(result.dimensions.pipe, proposed.dimensions.pipe);
                prop_assert_eq!(result.speed.pipe_vel_x, proposed.speed.pipe_vel_x);
            }
        }
    }
}
