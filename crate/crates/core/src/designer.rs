//! The designer side of the loop: prompt assembly for the four feedback
//! variants, an OpenAI-compatible chat-completions client, and a scripted
//! controller that serves as an offline stand-in for an LLM designer.
//!
//! The designer is stateless across iterations: every call sees only the
//! current configuration and the latest batch of episodes.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::time::Duration;

use crate::config::{
    default_config, enforce_designer_constraints, parse_config, serialize_config, validate_config,
    FieldChange, GameConfig,
};
use crate::stats::iqm;
use crate::traces::{episode_metric_line, summarize_text, EpisodeTrace};

/// Parameter reference handed to the designer alongside the configuration.
pub const SCHEMA_DESCRIPTION: &str = include_str!("../assets/schema_description.txt");

/// Episode count quoted in the prompt templates.
pub const N_RECENT: usize = 5;

/// How many times an unusable reply (no YAML block, schema error, invalid
/// config) is bounced back to the model before giving up and keeping the
/// previous configuration.
pub const MAX_PARSE_RETRIES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    ConfigOnly,
    MetricsText,
    ImagesOnly,
    MetricsAndImages,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 4] = [
        PromptVariant::ConfigOnly,
        PromptVariant::MetricsText,
        PromptVariant::ImagesOnly,
        PromptVariant::MetricsAndImages,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PromptVariant::ConfigOnly => "config_only",
            PromptVariant::MetricsText => "metrics_text",
            PromptVariant::ImagesOnly => "images_only",
            PromptVariant::MetricsAndImages => "metrics_and_images",
        }
    }

    pub fn needs_metrics(&self) -> bool {
        matches!(
            self,
            PromptVariant::MetricsText | PromptVariant::MetricsAndImages
        )
    }

    pub fn needs_images(&self) -> bool {
        matches!(
            self,
            PromptVariant::ImagesOnly | PromptVariant::MetricsAndImages
        )
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant `{s}` (expected one of: config_only, metrics_text, images_only, metrics_and_images)"))
    }
}

impl std::fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Chat message model (OpenAI chat-completions wire shape)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: MessageContent,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self {
            role: "system".to_string(),
            content: MessageContent::Text(text.into()),
        }
    }

    pub fn user_text(text: impl Into<String>) -> Self {
        Self {
            role: "user".to_string(),
            content: MessageContent::Text(text.into()),
        }
    }

    pub fn user_parts(parts: Vec<ContentPart>) -> Self {
        Self {
            role: "user".to_string(),
            content: MessageContent::Parts(parts),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self {
            role: "assistant".to_string(),
            content: MessageContent::Text(text.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageContent {
    Text(String),
    Parts(Vec<ContentPart>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ContentPart {
    Text { text: String },
    ImageUrl { image_url: ImageRef },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    pub url: String,
}

fn png_data_url_part(png: &[u8]) -> ContentPart {
    ContentPart::ImageUrl {
        image_url: ImageRef {
            url: format!("data:image/png;base64,{}", BASE64.encode(png)),
        },
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DesignerError {
    #[error("prompt arity: {0}")]
    Arity(String),
    #[error("no fenced yaml block in response")]
    NoBlockFound,
    #[error("transport: {0}")]
    Transport(String),
    #[error("auth: {0}")]
    Auth(String),
}

// ---------------------------------------------------------------------------
// Prompt assembly
// ---------------------------------------------------------------------------

const COMMON_PREFIX: &str = "You are a game designer tasked with improving the difficulty of a Flappy Bird game. Your goal is to modify game configuration so the game is challenging but not excessively difficult.\n\n";

const COMMON_SUFFIX: &str = "SECOND, provide the *complete* YAML for the new configuration, enclosed in a markdown fenced code block like:\n```yaml\n<your yaml here>\n```\nThe goal is to arrive at a good configuration with as few attempts as possible.\nDo not modify the LIDAR parameters.Do not modify the player speed parameters. Only modify the parameters related to the pipes, including `pipe_vel_x`.";

fn system_intro(variant: PromptVariant) -> String {
    match variant {
        PromptVariant::ConfigOnly => format!(
            "{COMMON_PREFIX}Below you will find (1) a *schema* describing every configuration parameter, and (2) the *current* configuration.\n\nFirst, ANALYSE the configuration and explain (succinctly) what changes would improve gameplay.\n{COMMON_SUFFIX}"
        ),
        PromptVariant::ImagesOnly => format!(
            "{COMMON_PREFIX}Below you will find (1) a *schema* describing every configuration parameter, (2) the *current* configuration, and (3) a set of gameplay snapshots from recent sessions.\n\nAim for passing 10 pipes.First, ANALYSE the configuration and images and explain (succinctly) the current level of difficulty and what changes would improve gameplay.\n{COMMON_SUFFIX}"
        ),
        PromptVariant::MetricsText => format!(
            "{COMMON_PREFIX}Below you will find (1) a *schema* describing every configuration parameter, (2) the *current* configuration, and (3) a handful of recent game-session metrics.\n\nAim for a score of 10.First, ANALYSE the configuration and metrics (paying special attention to the recorded scores) and explain (succinctly) the current level of difficulty and what changes would improve gameplay.\n{COMMON_SUFFIX}"
        ),
        PromptVariant::MetricsAndImages => format!(
            "{COMMON_PREFIX}Below you will find (1) a *schema* describing every configuration parameter, (2) the *current* configuration, and (3) recent game-session metrics together with gameplay snapshots.\n\nAim for a score of 10.First, ANALYSE the configuration and metrics and explain (succinctly) the current level of difficulty and what changes would improve gameplay.\n{COMMON_SUFFIX}"
        ),
    }
}

fn user_header(variant: PromptVariant, schema_description: &str, base_yaml: &str) -> String {
    let common = format!(
        "Configuration schema (read-only):\n{schema_description}\n\nBase configuration (YAML):\n{base_yaml}"
    );
    match variant {
        PromptVariant::ConfigOnly => common,
        PromptVariant::MetricsText => format!(
            "{common}\n\nBelow you will find up to {N_RECENT} recent session metrics."
        ),
        PromptVariant::ImagesOnly => format!(
            "{common}\n\nBelow you will find up to {N_RECENT} gameplay snapshots from recent sessions."
        ),
        PromptVariant::MetricsAndImages => format!(
            "{common}\n\nBelow you will find up to {N_RECENT} recent session metrics, each followed by a gameplay snapshot."
        ),
    }
}

/// Assemble the system and user messages for one designer call. Strips are
/// pre-encoded PNG bytes, one per episode, in episode order.
pub fn build_prompt(
    variant: PromptVariant,
    cfg: &GameConfig,
    schema_description: &str,
    traces: &[EpisodeTrace],
    strips_png: &[Vec<u8>],
) -> Result<Vec<ChatMessage>, DesignerError> {
    match variant {
        PromptVariant::ConfigOnly => {
            if !traces.is_empty() || !strips_png.is_empty() {
                return Err(DesignerError::Arity(
                    "config_only takes no traces or strips".to_string(),
                ));
            }
        }
        PromptVariant::MetricsText => {
            if traces.is_empty() || !strips_png.is_empty() {
                return Err(DesignerError::Arity(
                    "metrics_text takes traces only".to_string(),
                ));
            }
        }
        PromptVariant::ImagesOnly => {
            if strips_png.is_empty() || !traces.is_empty() {
                return Err(DesignerError::Arity(
                    "images_only takes strips only".to_string(),
                ));
            }
        }
        PromptVariant::MetricsAndImages => {
            if traces.is_empty() || traces.len() != strips_png.len() {
                return Err(DesignerError::Arity(format!(
                    "metrics_and_images needs matching traces and strips (got {} traces, {} strips)",
                    traces.len(),
                    strips_png.len()
                )));
            }
        }
    }

    let base_yaml = serialize_config(cfg);
    let header = user_header(variant, schema_description, &base_yaml);
    let user = match variant {
        PromptVariant::ConfigOnly => ChatMessage::user_text(header),
        PromptVariant::MetricsText => {
            ChatMessage::user_text(format!("{header}\n{}", summarize_text(traces)))
        }
        PromptVariant::ImagesOnly => {
            let mut parts = vec![ContentPart::Text { text: header }];
            parts.extend(strips_png.iter().map(|png| png_data_url_part(png)));
            ChatMessage::user_parts(parts)
        }
        PromptVariant::MetricsAndImages => {
            let mut parts = vec![ContentPart::Text { text: header }];
            for (i, (trace, png)) in traces.iter().zip(strips_png).enumerate() {
                parts.push(ContentPart::Text {
                    text: episode_metric_line(i + 1, trace),
                });
                parts.push(png_data_url_part(png));
            }
            ChatMessage::user_parts(parts)
        }
    };

    Ok(vec![ChatMessage::system(system_intro(variant)), user])
}

/// Contents of the first fenced block tagged `yaml`, whitespace-trimmed.
pub fn extract_yaml_block(response: &str) -> Result<String, DesignerError> {
    let mut lines = response.lines();
    while let Some(line) = lines.next() {
        if line.trim() == "```yaml" {
            let mut block = String::new();
            for inner in lines.by_ref() {
                if inner.trim_start().starts_with("```") {
                    return Ok(block.trim().to_string());
                }
                block.push_str(inner);
                block.push('\n');
            }
            return Err(DesignerError::NoBlockFound);
        }
    }
    Err(DesignerError::NoBlockFound)
}

/// Free-text analysis preceding the first fence (the whole reply when no
/// fence exists).
fn analysis_of(response: &str) -> String {
    match response.find("```yaml") {
        Some(idx) => response[..idx].trim().to_string(),
        None => response.trim().to_string(),
    }
}

// ---------------------------------------------------------------------------
// Chat transport
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest {
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub messages: Vec<ChatMessage>,
}

/// Anything that can answer a chat request with the assistant's text.
pub trait ChatTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, DesignerError>;
}

/// Environment variable holding the API key; never passed as a flag.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";

/// Default request timeout.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

/// Blocking client for OpenAI-compatible `/chat/completions` endpoints,
/// including local servers.
pub struct HttpChatTransport {
    url: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpChatTransport {
    pub fn new(endpoint: &str, api_key: String, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            url: chat_completions_url(endpoint),
            api_key,
            agent,
        }
    }

    /// Read the key from [`API_KEY_ENV`]; absence is an auth error.
    pub fn from_env(endpoint: &str, timeout: Duration) -> Result<Self, DesignerError> {
        let key = std::env::var(API_KEY_ENV)
            .map_err(|_| DesignerError::Auth(format!("{API_KEY_ENV} is not set")))?;
        Ok(Self::new(endpoint, key, timeout))
    }
}

/// Normalize an endpoint base (`https://host/v1`) or full URL into the
/// chat-completions URL.
pub fn chat_completions_url(endpoint: &str) -> String {
    let trimmed = endpoint.trim_end_matches('/');
    if trimmed.ends_with("/chat/completions") {
        trimmed.to_string()
    } else {
        format!("{trimmed}/chat/completions")
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&mut self, request: &ChatRequest) -> Result<String, DesignerError> {
        let mut response = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(request)
            .map_err(|e| DesignerError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| DesignerError::Transport(format!("reading response body: {e}")))?;
        if status == 401 || status == 403 {
            return Err(DesignerError::Auth(format!("HTTP {status}: {body}")));
        }
        if !(200..300).contains(&status) {
            return Err(DesignerError::Transport(format!("HTTP {status}: {body}")));
        }
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                DesignerError::Transport(format!("response missing message content: {body}"))
            })
    }
}

// ---------------------------------------------------------------------------
// LLM designer
// ---------------------------------------------------------------------------

/// Full record of one designer call, including retry turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignerExchange {
    pub variant: PromptVariant,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub messages: Vec<ChatMessage>,
    pub raw_response: String,
    pub extracted_yaml: Option<String>,
    pub analysis: String,
    pub succeeded: bool,
    pub attempts: u32,
    pub constraint_violations: Vec<FieldChange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Ask the endpoint for a revised configuration. Unusable replies are
/// bounced back with the parse error up to [`MAX_PARSE_RETRIES`] times; on
/// exhaustion the input configuration is returned unchanged with the
/// exchange marked failed. Locked-field edits are reverted, never fatal.
#[allow(clippy::too_many_arguments)]
pub fn llm_designer_propose(
    transport: &mut dyn ChatTransport,
    model: &str,
    temperature: Option<f64>,
    variant: PromptVariant,
    cfg: &GameConfig,
    traces: &[EpisodeTrace],
    strips_png: &[Vec<u8>],
) -> Result<(GameConfig, DesignerExchange), DesignerError> {
    let mut messages = build_prompt(variant, cfg, SCHEMA_DESCRIPTION, traces, strips_png)?;
    let mut raw_response = String::new();
    let mut attempts = 0u32;
    let mut last_error = String::new();

    while attempts < 1 + MAX_PARSE_RETRIES {
        attempts += 1;
        let request = ChatRequest {
            model: model.to_string(),
            temperature,
            messages: messages.clone(),
        };
        raw_response = transport.complete(&request)?;

        match apply_response(cfg, &raw_response) {
            Ok((next, yaml, violations)) => {
                return Ok((
                    next,
                    DesignerExchange {
                        variant,
                        model: model.to_string(),
                        temperature,
                        messages,
                        analysis: analysis_of(&raw_response),
                        raw_response,
                        extracted_yaml: Some(yaml),
                        succeeded: true,
                        attempts,
                        constraint_violations: violations,
                        error: None,
                    },
                ));
            }
            Err(err) => {
                last_error = err;
                messages.push(ChatMessage::assistant(raw_response.clone()));
                messages.push(ChatMessage::user_text(format!(
                    "Your previous reply could not be applied: {last_error}\nReply again with the complete corrected YAML configuration in a ```yaml fenced code block."
                )));
            }
        }
    }

    let exchange = DesignerExchange {
        variant,
        model: model.to_string(),
        temperature,
        messages,
        analysis: analysis_of(&raw_response),
        raw_response,
        extracted_yaml: None,
        succeeded: false,
        attempts,
        constraint_violations: Vec::new(),
        error: Some(last_error),
    };
    Ok((cfg.clone(), exchange))
}

/// Extract, parse, constrain, validate. Any failure is reported as text for
/// the retry turn.
fn apply_response(
    cfg: &GameConfig,
    response: &str,
) -> Result<(GameConfig, String, Vec<FieldChange>), String> {
    let yaml = extract_yaml_block(response).map_err(|e| e.to_string())?;
    let proposed = parse_config(&yaml).map_err(|e| e.to_string())?;
    let (constrained, violations) = enforce_designer_constraints(cfg, &proposed);
    let report = validate_config(&constrained);
    if !report.valid {
        return Err(format!("proposed configuration is invalid: {report}"));
    }
    Ok((constrained, yaml, violations))
}

// ---------------------------------------------------------------------------
// Scripted designer
// ---------------------------------------------------------------------------

/// Gap adjustment per point of score error, px.
pub const SCRIPTED_GAP_GAIN: f64 = 1.5;
/// Horizontal-spacing adjustment toward defaults per point of |error|, px.
pub const SCRIPTED_SPACING_GAIN: f64 = 40.0;
/// No adjustment when |target - score| is within this band.
pub const SCRIPTED_DEADBAND: f64 = 1.0;
/// The gap floor keeps min_gap at least this much above the player height.
pub const SCRIPTED_GAP_FLOOR_MARGIN: u32 = 8;

/// Proportional controller over the pipe parameters: widen gaps, relax pipe
/// speed toward the default, and pull spacing toward defaults when the game
/// is too hard; tighten symmetrically when it is too easy. All steps are
/// clamped so the result stays valid.
pub fn scripted_designer_propose(
    cfg: &GameConfig,
    traces: &[EpisodeTrace],
    target_score: u32,
) -> GameConfig {
    let scores: Vec<f64> = traces.iter().map(|t| t.score as f64).collect();
    let observed = iqm(&scores).expect("scripted designer needs at least one trace");
    let error = target_score as f64 - observed;
    if error.abs() <= SCRIPTED_DEADBAND {
        return cfg.clone();
    }

    let mut next = cfg.clone();
    let pipe = &mut next.dimensions.pipe;

    // Gap widths.
    let delta = (SCRIPTED_GAP_GAIN * error).round() as i64;
    let floor = (cfg.dimensions.player.height + SCRIPTED_GAP_FLOOR_MARGIN)
        .min(pipe.min_gap) as i64;
    let playfield = cfg.dimensions.background.height as i64 - cfg.dimensions.base.height as i64;
    let cap = (playfield - pipe.max_gap_distance as i64).max(pipe.max_gap as i64);
    let new_min = (pipe.min_gap as i64 + delta).clamp(floor, cap);
    let new_max = (pipe.max_gap as i64 + delta).clamp(new_min, cap);
    pipe.min_gap = new_min as u32;
    pipe.max_gap = new_max as u32;

    // Pipe speed relaxes toward the default when too hard, tightens back
    // when too easy; it never leaves the [-8, -1] band the sweeps covered.
    if error > 0.0 && next.speed.pipe_vel_x < -4 {
        next.speed.pipe_vel_x += 1;
    } else if error < 0.0 && next.speed.pipe_vel_x > -4 {
        next.speed.pipe_vel_x -= 1;
    }

    // Horizontal spacing drifts toward the defaults in both regimes.
    let defaults = default_config().dimensions.pipe;
    let step = (SCRIPTED_SPACING_GAIN * error.abs()).round() as i64;
    let toward = |cur: u32, target: u32| -> u32 {
        let cur = cur as i64;
        let target = target as i64;
        if cur > target {
            (cur - step).max(target) as u32
        } else {
            (cur + step).min(target) as u32
        }
    };
    pipe.min_horizontal_spacing =
        toward(pipe.min_horizontal_spacing, defaults.min_horizontal_spacing);
    pipe.max_horizontal_spacing =
        toward(pipe.max_horizontal_spacing, defaults.max_horizontal_spacing);

    debug_assert!(validate_config(&next).valid, "{}", validate_config(&next));
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{broken_config, Scenario};
    use crate::sim::TerminationReason;

    fn fake_trace(score: u32) -> EpisodeTrace {
        EpisodeTrace {
            episode_id: format!("fake-{score}"),
            seed: score as u64,
            score,
            duration_s: score as f64,
            termination: TerminationReason::Collision,
            peak_y: 0,
            snapshots: Vec::new(),
            telemetry: Vec::new(),
        }
    }

    fn fake_traces(scores: &[u32]) -> Vec<EpisodeTrace> {
        scores.iter().map(|&s| fake_trace(s)).collect()
    }

    fn tiny_png() -> Vec<u8> {
        crate::traces::encode_png(&crate::traces::FrameBuffer::new(2, 2, [1, 2, 3])).unwrap()
    }

    #[test]
    fn config_only_prompt_is_text_without_feedback() {
        let cfg = default_config();
        let msgs = build_prompt(PromptVariant::ConfigOnly, &cfg, SCHEMA_DESCRIPTION, &[], &[])
            .unwrap();
        assert_eq!(msgs.len(), 2);
        assert_eq!(msgs[0].role, "system");
        let MessageContent::Text(user) = &msgs[1].content else {
            panic!("expected plain text content");
        };
        assert!(user.contains("Configuration schema (read-only):"));
        assert!(user.contains("Base configuration (YAML):"));
        assert!(user.contains("pipe_vel_x: -4"));
        assert!(!user.contains("session metrics"));
        assert!(!user.contains("data:image/png"));
    }

    #[test]
    fn metrics_text_prompt_contains_lidar_lock_and_lines() {
        let cfg = default_config();
        let traces = fake_traces(&[3, 0, 7, 1, 2]);
        let msgs =
            build_prompt(PromptVariant::MetricsText, &cfg, SCHEMA_DESCRIPTION, &traces, &[])
                .unwrap();
        let MessageContent::Text(system) = &msgs[0].content else {
            panic!("system should be text");
        };
        assert!(system.contains("Do not modify the LIDAR parameters."));
        assert!(system.contains("Aim for a score of 10."));
        assert!(system.ends_with("including `pipe_vel_x`."));
        let MessageContent::Text(user) = &msgs[1].content else {
            panic!("user should be text");
        };
        assert!(user.contains("up to 5 recent session metrics."));
        assert!(user.contains("episode=1 score=3"));
        assert!(user.contains("episode=5 score=2"));
    }

    #[test]
    fn images_only_prompt_attaches_images_in_order() {
        let cfg = default_config();
        let strips = vec![tiny_png(); 5];
        let msgs =
            build_prompt(PromptVariant::ImagesOnly, &cfg, SCHEMA_DESCRIPTION, &[], &strips)
                .unwrap();
        let MessageContent::Text(system) = &msgs[0].content else {
            panic!()
        };
        assert!(system.contains("Aim for passing 10 pipes."));
        let MessageContent::Parts(parts) = &msgs[1].content else {
            panic!("user should be parts");
        };
        assert_eq!(parts.len(), 6);
        assert!(matches!(parts[0], ContentPart::Text { .. }));
        for part in &parts[1..] {
            match part {
                ContentPart::ImageUrl { image_url } => {
                    assert!(image_url.url.starts_with("data:image/png;base64,"))
                }
                other => panic!("expected image part, got {other:?}"),
            }
        }
    }

    #[test]
    fn metrics_and_images_interleaves_metric_blocks() {
        let cfg = default_config();
        let traces = fake_traces(&[1, 2, 3, 4, 5]);
        let strips = vec![tiny_png(); 5];
        let msgs = build_prompt(
            PromptVariant::MetricsAndImages,
            &cfg,
            SCHEMA_DESCRIPTION,
            &traces,
            &strips,
        )
        .unwrap();
        let MessageContent::Parts(parts) = &msgs[1].content else {
            panic!()
        };
        assert_eq!(parts.len(), 11); // header + 5 × (metric, image)
        for k in 0..5 {
            match &parts[1 + 2 * k] {
                ContentPart::Text { text } => {
                    assert!(text.starts_with(&format!("episode={}", k + 1)))
                }
                other => panic!("expected metric text, got {other:?}"),
            }
            assert!(matches!(parts[2 + 2 * k], ContentPart::ImageUrl { .. }));
        }
    }

    #[test]
    fn prompt_arity_enforced() {
        let cfg = default_config();
        assert!(matches!(
            build_prompt(PromptVariant::ConfigOnly, &cfg, "", &fake_traces(&[1]), &[]),
            Err(DesignerError::Arity(_))
        ));
        assert!(matches!(
            build_prompt(PromptVariant::MetricsText, &cfg, "", &[], &[]),
            Err(DesignerError::Arity(_))
        ));
        assert!(matches!(
            build_prompt(
                PromptVariant::MetricsAndImages,
                &cfg,
                "",
                &fake_traces(&[1, 2]),
                &[tiny_png()]
            ),
            Err(DesignerError::Arity(_))
        ));
    }

    #[test]
    fn prompt_is_deterministic() {
        let cfg = broken_config(Scenario::TooFast);
        let traces = fake_traces(&[0, 1, 0, 2, 0]);
        let a = build_prompt(PromptVariant::MetricsText, &cfg, SCHEMA_DESCRIPTION, &traces, &[])
            .unwrap();
        let b = build_prompt(PromptVariant::MetricsText, &cfg, SCHEMA_DESCRIPTION, &traces, &[])
            .unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn extract_yaml_first_block() {
        let response = "analysis here\n```yaml\na: 1\n```\nmore\n```yaml\nb: 2\n```";
        assert_eq!(extract_yaml_block(response).unwrap(), "a: 1");
    }

    #[test]
    fn extract_yaml_requires_block() {
        assert!(matches!(
            extract_yaml_block("no code here"),
            Err(DesignerError::NoBlockFound)
        ));
        assert!(matches!(
            extract_yaml_block("```yaml\nunterminated"),
            Err(DesignerError::NoBlockFound)
        ));
    }

    struct MockTransport {
        replies: Vec<String>,
        calls: usize,
    }

    impl MockTransport {
        fn new(replies: Vec<String>) -> Self {
            Self { replies, calls: 0 }
        }
    }

    impl ChatTransport for MockTransport {
        fn complete(&mut self, _request: &ChatRequest) -> Result<String, DesignerError> {
            let reply = self
                .replies
                .get(self.calls.min(self.replies.len() - 1))
                .cloned()
                .unwrap();
            self.calls += 1;
            Ok(reply)
        }
    }

    fn yaml_reply(cfg: &GameConfig) -> String {
        format!("Looks too hard.\n```yaml\n{}```\n", serialize_config(cfg))
    }

    #[test]
    fn llm_propose_accepts_valid_edit() {
        let cfg = default_config();
        let mut edited = cfg.clone();
        edited.dimensions.pipe.min_gap = 140;
        let mut transport = MockTransport::new(vec![yaml_reply(&edited)]);
        let (next, exchange) = llm_designer_propose(
            &mut transport,
            "mock-model",
            None,
            PromptVariant::ConfigOnly,
            &cfg,
            &[],
            &[],
        )
        .unwrap();
        assert_eq!(next.dimensions.pipe.min_gap, 140);
        assert!(exchange.succeeded);
        assert_eq!(exchange.attempts, 1);
        assert_eq!(exchange.analysis, "Looks too hard.");
        assert!(exchange.extracted_yaml.is_some());
        assert!(exchange.constraint_violations.is_empty());
        assert_eq!(exchange.messages[0].role, "system");
    }

    #[test]
    fn llm_propose_reverts_locked_fields() {
        let cfg = default_config();
        let mut edited = cfg.clone();
        edited.speed.player.flap_acc = -12;
        edited.dimensions.pipe.max_gap = 160;
        let mut transport = MockTransport::new(vec![yaml_reply(&edited)]);
        let (next, exchange) = llm_designer_propose(
            &mut transport,
            "mock-model",
            None,
            PromptVariant::ConfigOnly,
            &cfg,
            &[],
            &[],
        )
        .unwrap();
        assert_eq!(next.speed.player.flap_acc, -9);
        assert_eq!(next.dimensions.pipe.max_gap, 160);
        assert!(exchange.succeeded);
        assert_eq!(exchange.constraint_violations.len(), 1);
        assert_eq!(exchange.constraint_violations[0].path, "speed.player.flap_acc");
        assert!(validate_config(&next).valid);
    }

    #[test]
    fn llm_propose_retries_then_keeps_previous_config() {
        let cfg = default_config();
        let mut transport = MockTransport::new(vec!["just prose, no yaml".to_string()]);
        let (next, exchange) = llm_designer_propose(
            &mut transport,
            "mock-model",
            None,
            PromptVariant::ConfigOnly,
            &cfg,
            &[],
            &[],
        )
        .unwrap();
        assert_eq!(next, cfg);
        assert!(!exchange.succeeded);
        assert_eq!(exchange.attempts, 1 + MAX_PARSE_RETRIES);
        assert_eq!(transport.calls as u32, 1 + MAX_PARSE_RETRIES);
        assert!(exchange.error.is_some());
        // Retry turns were appended: system, user, then (assistant, user) per failure.
        assert_eq!(
            exchange.messages.len(),
            2 + 2 * (1 + MAX_PARSE_RETRIES) as usize
        );
    }

    #[test]
    fn llm_propose_recovers_on_second_attempt() {
        let cfg = default_config();
        let mut edited = cfg.clone();
        edited.speed.pipe_vel_x = -3;
        let mut transport =
            MockTransport::new(vec!["no yaml".to_string(), yaml_reply(&edited)]);
        let (next, exchange) = llm_designer_propose(
            &mut transport,
            "mock-model",
            None,
            PromptVariant::ConfigOnly,
            &cfg,
            &[],
            &[],
        )
        .unwrap();
        assert_eq!(next.speed.pipe_vel_x, -3);
        assert!(exchange.succeeded);
        assert_eq!(exchange.attempts, 2);
    }

    #[test]
    fn llm_propose_rejects_invalid_pipe_geometry() {
        let cfg = default_config();
        let mut bad = cfg.clone();
        bad.dimensions.pipe.min_gap = 300;
        bad.dimensions.pipe.max_gap = 200;
        let mut transport = MockTransport::new(vec![yaml_reply(&bad)]);
        let (next, exchange) = llm_designer_propose(
            &mut transport,
            "mock-model",
            None,
            PromptVariant::ConfigOnly,
            &cfg,
            &[],
            &[],
        )
        .unwrap();
        assert_eq!(next, cfg);
        assert!(!exchange.succeeded);
        assert!(validate_config(&next).valid);
    }

    #[test]
    fn scripted_fixpoint_at_target() {
        let cfg = broken_config(Scenario::TooTight1);
        let traces = fake_traces(&[10, 10, 10, 10, 10]);
        assert_eq!(scripted_designer_propose(&cfg, &traces, 10), cfg);
    }

    #[test]
    fn scripted_widens_when_too_hard() {
        let cfg = broken_config(Scenario::TooTight1);
        let traces = fake_traces(&[0, 0, 0, 0, 0]);
        let next = scripted_designer_propose(&cfg, &traces, 10);
        assert!(next.dimensions.pipe.min_gap > cfg.dimensions.pipe.min_gap);
        assert!(validate_config(&next).valid);
    }

    #[test]
    fn scripted_tightens_when_too_easy() {
        let cfg = broken_config(Scenario::TooEasy);
        let traces = fake_traces(&[30, 30, 30, 30, 30]);
        let next = scripted_designer_propose(&cfg, &traces, 10);
        assert!(next.dimensions.pipe.max_gap < cfg.dimensions.pipe.max_gap);
        assert!(validate_config(&next).valid);
    }

    #[test]
    fn scripted_relaxes_fast_pipes() {
        let cfg = broken_config(Scenario::TooFast);
        let traces = fake_traces(&[0, 0, 1, 0, 0]);
        let next = scripted_designer_propose(&cfg, &traces, 10);
        assert_eq!(next.speed.pipe_vel_x, cfg.speed.pipe_vel_x + 1);
    }

    #[test]
    fn scripted_pulls_spacing_toward_defaults() {
        let cfg = broken_config(Scenario::TooSpacedOut);
        let traces = fake_traces(&[4, 5, 3, 6, 4]);
        let next = scripted_designer_propose(&cfg, &traces, 10);
        assert!(
            next.dimensions.pipe.max_horizontal_spacing
                < cfg.dimensions.pipe.max_horizontal_spacing
        );
        assert!(next.dimensions.pipe.max_horizontal_spacing >= 300);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// Sign-monotonicity of the control law.
            #[test]
            fn scripted_is_sign_monotone(
                scores in proptest::collection::vec(0u32..=30, 1..8),
                min_gap in 40u32..=200,
                gap_extra in 0u32..=60,
            ) {
                let mut cfg = default_config();
                cfg.dimensions.pipe.min_gap = min_gap;
                cfg.dimensions.pipe.max_gap = (min_gap + gap_extra).min(250);
                let traces: Vec<EpisodeTrace> = scores.iter().map(|&s| fake_trace(s)).collect();
                let sample: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
                let observed = iqm(&sample).unwrap();
                let next = scripted_designer_propose(&cfg, &traces, 10);
                let error = 10.0 - observed;
                if error > SCRIPTED_DEADBAND {
                    prop_assert!(next.dimensions.pipe.min_gap >= cfg.dimensions.pipe.min_gap);
                } else if error < -SCRIPTED_DEADBAND {
                    prop_assert!(next.dimensions.pipe.max_gap <= cfg.dimensions.pipe.max_gap);
                } else {
                    prop_assert_eq!(next, cfg);
                }
            }
        }
    }
}
