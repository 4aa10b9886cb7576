//! Episode records and the two designer feedback representations: text
//! metric summaries and composite image strips.
//!
//! Strips tile 25 frames sampled every 10 ticks over the final 240 ticks of
//! an episode (8 game seconds) into a 5×5 grid, row-major chronological,
//! with 2 px separator lines. Episodes shorter than the window left-pad by
//! repeating the earliest sampled frame.

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::sim::{playfield_height, Action, GameState, Pipe, TerminationReason, PLAYER_X};

/// Ticks covered by a composite strip (8 s at 30 ticks/s).
pub const STRIP_WINDOW_TICKS: u32 = 240;
/// Sampling stride within the window.
pub const STRIP_SAMPLE_STRIDE: u32 = 10;
/// Frames per strip.
pub const STRIP_FRAME_COUNT: u32 = 25;
/// Tiles per row/column of the montage.
pub const STRIP_GRID: u32 = 5;
/// Separator line thickness between tiles, px.
pub const STRIP_SEPARATOR_PX: u32 = 2;

pub const GROUND_COLOR: [u8; 3] = [222, 184, 135];
pub const PIPE_COLOR: [u8; 3] = [82, 176, 79];
pub const PLAYER_COLOR: [u8; 3] = [255, 200, 40];
pub const SEPARATOR_COLOR: [u8; 3] = [0, 0, 0];

/// Per-tick telemetry row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u32,
    pub player_y: i32,
    pub player_vel_y: i32,
    pub score: u32,
    pub action: Action,
}

/// Everything needed to redraw one tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderState {
    pub tick: u32,
    pub player_y: i32,
    pub player_rot: i32,
    pub pipes: Vec<Pipe>,
}

/// One playthrough's record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode_id: String,
    pub seed: u64,
    pub score: u32,
    pub duration_s: f64,
    pub termination: TerminationReason,
    /// Highest point reached, screen coordinates (smaller is higher).
    pub peak_y: i32,
    /// Render snapshots for every tick in the final strip window.
    pub snapshots: Vec<RenderState>,
    pub telemetry: Vec<TickRecord>,
}

impl EpisodeTrace {
    pub fn final_tick(&self) -> u32 {
        self.telemetry.last().map(|r| r.tick).unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// Text summaries
// ---------------------------------------------------------------------------

/// Golden-formatted metric line for one episode (1-based index).
pub fn episode_metric_line(index: usize, trace: &EpisodeTrace) -> String {
    format!(
        "episode={} score={} flight_time={:.1}s termination={}",
        index, trace.score, trace.duration_s, trace.termination
    )
}

/// One line per episode: index, score, flight time, termination reason.
pub fn summarize_text(traces: &[EpisodeTrace]) -> String {
    let mut out = String::new();
    for (i, trace) in traces.iter().enumerate() {
        out.push_str(&episode_metric_line(i + 1, trace));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Frame rendering
// ---------------------------------------------------------------------------

/// Row-major RGB pixel buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameBuffer {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl FrameBuffer {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&fill);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Fill a rectangle, clipped to the buffer.
    pub fn fill_rect(&mut self, x0: i32, y0: i32, x1: i32, y1: i32, color: [u8; 3]) {
        let x0 = x0.max(0) as u32;
        let y0 = y0.max(0) as u32;
        let x1 = (x1.max(0) as u32).min(self.width);
        let y1 = (y1.max(0) as u32).min(self.height);
        for y in y0..y1 {
            let row = (y * self.width) as usize * 3;
            for x in x0..x1 {
                let i = row + (x as usize) * 3;
                self.pixels[i..i + 3].copy_from_slice(&color);
            }
        }
    }

    /// Copy `src` into this buffer with its top-left corner at `(x, y)`.
    pub fn blit(&mut self, src: &FrameBuffer, x: u32, y: u32) {
        for row in 0..src.height {
            let dst_i = (((y + row) * self.width + x) * 3) as usize;
            let src_i = (row * src.width * 3) as usize;
            self.pixels[dst_i..dst_i + (src.width * 3) as usize]
                .copy_from_slice(&src.pixels[src_i..src_i + (src.width * 3) as usize]);
        }
    }
}

/// Draw one tick: background, ground band, pipe pairs, player box on top.
pub fn render_snapshot(snap: &RenderState, cfg: &GameConfig) -> FrameBuffer {
    let w = cfg.dimensions.background.width;
    let h = cfg.dimensions.background.height;
    let playfield = playfield_height(cfg);
    let mut frame = FrameBuffer::new(w, h, cfg.dimensions.background.fill_color);

    frame.fill_rect(0, playfield, w as i32, h as i32, GROUND_COLOR);
    let pipe_w = cfg.dimensions.pipe.width as i32;
    for pipe in &snap.pipes {
        let gap_bottom = playfield - pipe.gap_bottom_y as i32;
        let gap_top = gap_bottom - pipe.gap_size as i32;
        frame.fill_rect(pipe.x, 0, pipe.x + pipe_w, gap_top, PIPE_COLOR);
        frame.fill_rect(pipe.x, gap_bottom, pipe.x + pipe_w, playfield, PIPE_COLOR);
    }
    frame.fill_rect(
        PLAYER_X,
        snap.player_y,
        PLAYER_X + cfg.dimensions.player.width as i32,
        snap.player_y + cfg.dimensions.player.height as i32,
        PLAYER_COLOR,
    );
    frame
}

pub fn render_frame(state: &GameState, cfg: &GameConfig) -> FrameBuffer {
    render_snapshot(&state.render_state(), cfg)
}

// ---------------------------------------------------------------------------
// Composite strips
// ---------------------------------------------------------------------------

/// The 25 ticks a strip samples: `T-240, T-230, …, T`, where negative slots
/// are padded with the earliest tick the episode can supply.
pub fn strip_sample_ticks(final_tick: u32) -> [u32; STRIP_FRAME_COUNT as usize] {
    let t = final_tick as i64;
    let mut ticks = [0u32; STRIP_FRAME_COUNT as usize];
    // Earliest in-episode tick congruent to T modulo the stride.
    let first_valid = if t >= STRIP_WINDOW_TICKS as i64 {
        t - STRIP_WINDOW_TICKS as i64
    } else {
        t % STRIP_SAMPLE_STRIDE as i64
    };
    for (k, slot) in ticks.iter_mut().enumerate() {
        let raw = t - STRIP_WINDOW_TICKS as i64 + (k as i64) * STRIP_SAMPLE_STRIDE as i64;
        *slot = raw.max(first_valid) as u32;
    }
    ticks
}

/// Tile the sampled frames into a 5×5 montage with separator lines.
pub fn composite_strip(trace: &EpisodeTrace, cfg: &GameConfig) -> FrameBuffer {
    let w = cfg.dimensions.background.width;
    let h = cfg.dimensions.background.height;
    let out_w = STRIP_GRID * w + (STRIP_GRID - 1) * STRIP_SEPARATOR_PX;
    let out_h = STRIP_GRID * h + (STRIP_GRID - 1) * STRIP_SEPARATOR_PX;
    let mut canvas = FrameBuffer::new(out_w, out_h, SEPARATOR_COLOR);

    let ticks = strip_sample_ticks(trace.final_tick());
    let mut cache: Vec<(u32, FrameBuffer)> = Vec::new();
    for (k, &tick) in ticks.iter().enumerate() {
        let frame = match cache.iter().find(|(t, _)| *t == tick) {
            Some((_, f)) => f.clone(),
            None => {
                let snap = trace
                    .snapshots
                    .iter()
                    .find(|s| s.tick == tick)
                    .unwrap_or_else(|| panic!("snapshot for tick {tick} missing"));
                let f = render_snapshot(snap, cfg);
                cache.push((tick, f.clone()));
                f
            }
        };
        let row = k as u32 / STRIP_GRID;
        let col = k as u32 % STRIP_GRID;
        canvas.blit(
            &frame,
            col * (w + STRIP_SEPARATOR_PX),
            row * (h + STRIP_SEPARATOR_PX),
        );
    }
    canvas
}

/// Box-average downscale by an integer factor (1 = no-op). Trailing pixels
/// that do not fill a full block are dropped.
pub fn downscale(frame: &FrameBuffer, factor: u32) -> FrameBuffer {
    if factor <= 1 {
        return frame.clone();
    }
    let out_w = frame.width / factor;
    let out_h = frame.height / factor;
    let mut out = FrameBuffer::new(out_w, out_h, [0, 0, 0]);
    let block = factor * factor;
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut acc = [0u32; 3];
            for dy in 0..factor {
                for dx in 0..factor {
                    let p = frame.pixel(ox * factor + dx, oy * factor + dy);
                    acc[0] += p[0] as u32;
                    acc[1] += p[1] as u32;
                    acc[2] += p[2] as u32;
                }
            }
            let i = ((oy * out_w + ox) * 3) as usize;
            out.pixels[i] = (acc[0] / block) as u8;
            out.pixels[i + 1] = (acc[1] / block) as u8;
            out.pixels[i + 2] = (acc[2] / block) as u8;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// PNG encoding
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum EncodeError {
    #[error("png encode: {0}")]
    Encode(String),
    #[error("png decode: {0}")]
    Decode(String),
}

/// Encode as 8-bit RGB PNG.
pub fn encode_png(frame: &FrameBuffer) -> Result<Vec<u8>, EncodeError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, frame.width, frame.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| EncodeError::Encode(e.to_string()))?;
        writer
            .write_image_data(&frame.pixels)
            .map_err(|e| EncodeError::Encode(e.to_string()))?;
    }
    Ok(out)
}

/// Decode an 8-bit RGB PNG produced by [`encode_png`].
pub fn decode_png(bytes: &[u8]) -> Result<FrameBuffer, EncodeError> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| EncodeError::Decode(e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| EncodeError::Decode(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(EncodeError::Decode(format!(
            "unsupported format {:?}/{:?}",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    Ok(FrameBuffer {
        width: info.width,
        height: info.height,
        pixels: buf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::GapPolicy;
    use crate::config::{broken_config, default_config, Scenario};
    use crate::rng::SplitMix64;
    use crate::sim::{run_episode, GameState, TICK_RATE};

    fn fake_trace(score: u32, duration_s: f64, termination: TerminationReason) -> EpisodeTrace {
        EpisodeTrace {
            episode_id: "test".to_string(),
            seed: 0,
            score,
            duration_s,
            termination,
            peak_y: 0,
            snapshots: Vec::new(),
            telemetry: Vec::new(),
        }
    }

    #[test]
    fn summary_line_format() {
        let trace = fake_trace(10, 34.2, TerminationReason::Collision);
        let line = episode_metric_line(1, &trace);
        assert!(line.contains("score=10"));
        assert!(line.contains("flight_time=34.2s"));
        assert!(line.contains("termination=collision"));
    }

    #[test]
    fn summary_has_one_line_per_episode() {
        let traces: Vec<EpisodeTrace> = (0..5)
            .map(|i| fake_trace(i, i as f64, TerminationReason::Timeout))
            .collect();
        let text = summarize_text(&traces);
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("episode=1 score=0"));
    }

    #[test]
    fn summary_renders_zero_score() {
        let text = summarize_text(&[fake_trace(0, 1.0, TerminationReason::Collision)]);
        assert!(text.contains("score=0"));
    }

    #[test]
    fn render_empty_scene_is_background_over_ground() {
        let cfg = default_config();
        let mut state = GameState::reset(&cfg, 0).unwrap();
        state.pipes.clear();
        state.player_y = -1000; // park the player off-canvas
        let frame = render_frame(&state, &cfg);
        assert_eq!((frame.width, frame.height), (288, 512));
        let playfield = playfield_height(&cfg) as u32;
        assert_eq!(frame.pixel(10, 10), cfg.dimensions.background.fill_color);
        assert_eq!(frame.pixel(10, playfield - 1), cfg.dimensions.background.fill_color);
        assert_eq!(frame.pixel(10, playfield), GROUND_COLOR);
        assert_eq!(frame.pixel(287, 511), GROUND_COLOR);
    }

    #[test]
    fn render_player_center_is_player_tint() {
        let cfg = default_config();
        let state = GameState::reset(&cfg, 0).unwrap();
        let frame = render_frame(&state, &cfg);
        let cx = (PLAYER_X + cfg.dimensions.player.width as i32 / 2) as u32;
        let cy = (state.player_y + cfg.dimensions.player.height as i32 / 2) as u32;
        assert_eq!(frame.pixel(cx, cy), PLAYER_COLOR);
    }

    #[test]
    fn render_pipes_above_and_below_gap() {
        let cfg = default_config();
        let state = GameState::reset(&cfg, 0).unwrap();
        let mut snap = state.render_state();
        snap.pipes = vec![Pipe {
            x: 100,
            gap_bottom_y: 100,
            gap_size: 120,
            scored: false,
        }];
        let frame = render_snapshot(&snap, &cfg);
        let playfield = playfield_height(&cfg);
        let gap_bottom = (playfield - 100) as u32;
        let gap_top = gap_bottom - 120;
        assert_eq!(frame.pixel(110, gap_top - 1), PIPE_COLOR);
        assert_eq!(frame.pixel(110, gap_bottom), PIPE_COLOR);
        assert_eq!(
            frame.pixel(110, gap_top + 5),
            cfg.dimensions.background.fill_color
        );
    }

    #[test]
    fn strip_ticks_full_episode() {
        let ticks = strip_sample_ticks(3600);
        assert_eq!(ticks[0], 3360);
        assert_eq!(ticks[24], 3600);
        for pair in ticks.windows(2) {
            assert_eq!(pair[1] - pair[0], 10);
        }
    }

    #[test]
    fn strip_ticks_pad_short_episode() {
        let ticks = strip_sample_ticks(1);
        assert_eq!(ticks, [1; 25]);
        let ticks = strip_sample_ticks(100);
        assert_eq!(ticks[..15], [0; 15]);
        assert_eq!(ticks[15..], [10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
    }

    #[test]
    fn strip_dimensions_and_tile_content() {
        let cfg = default_config();
        let mut policy = GapPolicy::default();
        let trace = run_episode(&cfg, &mut policy, 2).unwrap();
        let strip = composite_strip(&trace, &cfg);
        assert_eq!(strip.width, 5 * 288 + 4 * 2);
        assert_eq!(strip.height, 5 * 512 + 4 * 2);

        // Spot-check a middle tile against a direct render of its tick.
        let ticks = strip_sample_ticks(trace.final_tick());
        let k = 12usize;
        let snap = trace
            .snapshots
            .iter()
            .find(|s| s.tick == ticks[k])
            .unwrap();
        let tile = render_snapshot(snap, &cfg);
        let ox = (k as u32 % 5) * (288 + 2);
        let oy = (k as u32 / 5) * (512 + 2);
        for (x, y) in [(0u32, 0u32), (144, 300), (287, 511)] {
            assert_eq!(strip.pixel(ox + x, oy + y), tile.pixel(x, y));
        }
        // Separator line between the first two tiles.
        assert_eq!(strip.pixel(288, 0), SEPARATOR_COLOR);
    }

    #[test]
    fn one_tick_episode_gives_identical_tiles() {
        let cfg = default_config();
        let mut state = GameState::reset(&cfg, 5).unwrap();
        // Force an immediate ground hit so the episode lasts one tick.
        state.player_y = playfield_height(&cfg) - cfg.dimensions.player.height as i32;
        let snap0 = state.render_state();
        state.step(&cfg, Action::Idle).unwrap();
        let trace = EpisodeTrace {
            episode_id: "one-tick".to_string(),
            seed: 5,
            score: 0,
            duration_s: 1.0 / TICK_RATE as f64,
            termination: TerminationReason::Collision,
            peak_y: state.player_y,
            snapshots: vec![snap0, state.render_state()],
            telemetry: vec![TickRecord {
                tick: 1,
                player_y: state.player_y,
                player_vel_y: state.player_vel_y,
                score: 0,
                action: Action::Idle,
            }],
        };
        let strip = composite_strip(&trace, &cfg);
        let tile = render_snapshot(&trace.snapshots[1], &cfg);
        for k in 0..25u32 {
            let ox = (k % 5) * (288 + 2);
            let oy = (k / 5) * (512 + 2);
            for (x, y) in [(0u32, 0u32), (57, 200), (200, 450)] {
                assert_eq!(strip.pixel(ox + x, oy + y), tile.pixel(x, y), "tile {k}");
            }
        }
    }

    #[test]
    fn png_roundtrip_single_white_pixel() {
        let frame = FrameBuffer::new(1, 1, [255, 255, 255]);
        let bytes = encode_png(&frame).unwrap();
        assert_eq!(&bytes[..8], &[0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A]);
        let decoded = decode_png(&bytes).unwrap();
        assert_eq!(decoded, frame);
    }

    #[test]
    fn png_roundtrip_random_frames() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..5 {
            let w = 1 + rng.next_range_u32(1, 40);
            let h = 1 + rng.next_range_u32(1, 40);
            let mut frame = FrameBuffer::new(w, h, [0, 0, 0]);
            for b in frame.pixels.iter_mut() {
                *b = (rng.next_u64() & 0xFF) as u8;
            }
            let decoded = decode_png(&encode_png(&frame).unwrap()).unwrap();
            assert_eq!(decoded, frame);
        }
    }

    #[test]
    fn downscale_averages_blocks() {
        let mut frame = FrameBuffer::new(2, 2, [0, 0, 0]);
        frame.fill_rect(0, 0, 1, 2, [100, 100, 100]);
        frame.fill_rect(1, 0, 2, 2, [200, 200, 200]);
        let small = downscale(&frame, 2);
        assert_eq!((small.width, small.height), (1, 1));
        assert_eq!(small.pixel(0, 0), [150, 150, 150]);
        assert_eq!(downscale(&frame, 1), frame);
    }

    #[test]
    fn strip_is_deterministic() {
        let cfg = broken_config(Scenario::TooTight1);
        let mut p1 = GapPolicy::default();
        let mut p2 = GapPolicy::default();
        let a = composite_strip(&run_episode(&cfg, &mut p1, 4).unwrap(), &cfg);
        let b = composite_strip(&run_episode(&cfg, &mut p2, 4).unwrap(), &cfg);
        assert_eq!(a, b);
    }
}
