//! Token-delimited three-stage response format and prompt assembly.
//!
//! A response is rendered as
//!
//! ```text
//! <DESC_START>scene<DESC_END><DECI_START>decision<DECI_END><TRAJ_START>(x,y),(x,y)<TRAJ_END>
//! ```
//!
//! with coordinates printed to four decimal places. Parsing ignores any text
//! before the first token and after `<TRAJ_END>`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::types::{EgoHistory, StructuredResponse, Trajectory, ValidationError, Waypoint};

/// Decimal places used for serialized waypoint coordinates.
pub const COORD_PRECISION: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTokens {
    pub desc_start: String,
    pub desc_end: String,
    pub deci_start: String,
    pub deci_end: String,
    pub traj_start: String,
    pub traj_end: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        Self {
            desc_start: "<DESC_START>".into(),
            desc_end: "<DESC_END>".into(),
            deci_start: "<DECI_START>".into(),
            deci_end: "<DECI_END>".into(),
            traj_start: "<TRAJ_START>".into(),
            traj_end: "<TRAJ_END>".into(),
        }
    }
}

impl SpecialTokens {
    /// The six literals in the order they appear in a well-formed response.
    pub fn in_order(&self) -> [&str; 6] {
        [
            &self.desc_start,
            &self.desc_end,
            &self.deci_start,
            &self.deci_end,
            &self.traj_start,
            &self.traj_end,
        ]
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let all = self.in_order();
        for (i, a) in all.iter().enumerate() {
            if a.is_empty() {
                return Err(ValidationError::Config(
                    "special tokens must be non-empty".into(),
                ));
            }
            if all[i + 1..].contains(a) {
                return Err(ValidationError::Config(format!(
                    "special token {a:?} is used twice"
                )));
            }
        }
        Ok(())
    }

    fn find_in(&self, text: &str) -> Option<&str> {
        self.in_order().into_iter().find(|t| text.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("{field} contains the reserved token {token:?}")]
    ReservedToken { field: &'static str, token: String },
    #[error(transparent)]
    Tokens(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    /// A token is missing or out of order. `position` is the byte offset of
    /// the offending token, or the input length when the token is missing.
    #[error("malformed structure at byte {position}: expected {expected}")]
    MalformedStructure { position: usize, expected: String },
    /// The trajectory segment is not a list of `(x,y)` pairs.
    #[error("malformed trajectory near {fragment:?}")]
    MalformedTrajectory { fragment: String },
}

impl ParseError {
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::MalformedStructure { .. } => "malformed_structure",
            ParseError::MalformedTrajectory { .. } => "malformed_trajectory",
        }
    }
}

/// Fixed-point rendering that never prints a negative zero.
pub(crate) fn fixed(value: f64, places: usize) -> String {
    let s = format!("{value:.places$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

pub fn format_waypoints(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 20);
    for (i, p) in traj.points.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "({},{})",
            fixed(p.x, COORD_PRECISION),
            fixed(p.y, COORD_PRECISION)
        );
    }
    out
}

pub fn serialize_response(
    resp: &StructuredResponse,
    tokens: &SpecialTokens,
) -> Result<String, SerializeError> {
    tokens.validate()?;
    for (field, text) in [
        ("description", &resp.description),
        ("decision", &resp.decision),
    ] {
        if let Some(token) = tokens.find_in(text) {
            return Err(SerializeError::ReservedToken {
                field,
                token: token.to_string(),
            });
        }
    }
    let mut out = String::new();
    out.push_str(&tokens.desc_start);
    out.push_str(&resp.description);
    out.push_str(&tokens.desc_end);
    out.push_str(&tokens.deci_start);
    out.push_str(&resp.decision);
    out.push_str(&tokens.deci_end);
    out.push_str(&tokens.traj_start);
    out.push_str(&format_waypoints(&resp.trajectory));
    out.push_str(&tokens.traj_end);
    Ok(out)
}

/// Earliest token occurrence at or after `from`; ties go to the longest literal.
fn next_token<'t>(text: &str, from: usize, tokens: &[&'t str]) -> Option<(usize, &'t str)> {
    let rest = &text[from..];
    tokens
        .iter()
        .filter_map(|tok| rest.find(tok).map(|pos| (from + pos, *tok)))
        .min_by(|a, b| a.0.cmp(&b.0).then(b.1.len().cmp(&a.1.len())))
}

pub fn parse_response(
    text: &str,
    tokens: &SpecialTokens,
) -> Result<StructuredResponse, ParseError> {
    let order = tokens.in_order();
    let mut cursor = 0;
    // byte ranges of the description, decision and (later) trajectory bodies
    let mut bodies = [(0usize, 0usize); 2];
    let mut body_start = 0;

    for (step, expected) in order[..5].iter().enumerate() {
        match next_token(text, cursor, &order) {
            Some((pos, tok)) if tok == *expected => {
                if step % 2 == 1 {
                    bodies[step / 2] = (body_start, pos);
                }
                cursor = pos + tok.len();
                body_start = cursor;
            }
            Some((pos, _)) => {
                return Err(ParseError::MalformedStructure {
                    position: pos,
                    expected: expected.to_string(),
                })
            }
            None => {
                return Err(ParseError::MalformedStructure {
                    position: text.len(),
                    expected: expected.to_string(),
                })
            }
        }
    }

    // the trajectory body is only scanned for its closing token
    let traj_end = text[cursor..]
        .find(tokens.traj_end.as_str())
        .ok_or_else(|| ParseError::MalformedStructure {
            position: text.len(),
            expected: tokens.traj_end.clone(),
        })?;
    let points = parse_waypoints(&text[cursor..cursor + traj_end])?;

    Ok(StructuredResponse {
        description: text[bodies[0].0..bodies[0].1].to_string(),
        decision: text[bodies[1].0..bodies[1].1].to_string(),
        trajectory: Trajectory::new(points),
    })
}

/// Parses `(x,y),(x,y),...`, allowing whitespace (including newlines)
/// around every element. An empty or all-whitespace body is an empty list.
pub fn parse_waypoints(body: &str) -> Result<Vec<Waypoint>, ParseError> {
    let malformed = |fragment: &str| ParseError::MalformedTrajectory {
        fragment: fragment.trim().to_string(),
    };
    let mut points = Vec::new();
    let mut rest = body.trim_start();
    if rest.is_empty() {
        return Ok(points);
    }
    loop {
        if !rest.starts_with('(') {
            return Err(malformed(rest));
        }
        let Some(close) = rest.find(')') else {
            return Err(malformed(rest));
        };
        let pair = &rest[..=close];
        let inner = &pair[1..pair.len() - 1];
        let mut coords = inner.split(',');
        let (Some(xs), Some(ys), None) = (coords.next(), coords.next(), coords.next()) else {
            return Err(malformed(pair));
        };
        let coord = |s: &str| s.trim().parse::<f64>().ok().filter(|v| v.is_finite());
        let (Some(x), Some(y)) = (coord(xs), coord(ys)) else {
            return Err(malformed(pair));
        };
        points.push(Waypoint::new(x, y));

        rest = rest[close + 1..].trim_start();
        if rest.is_empty() {
            return Ok(points);
        }
        match rest.strip_prefix(',') {
            Some(after) if !after.trim().is_empty() => rest = after.trim_start(),
            _ => return Err(malformed(rest)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraView {
    Front,
    FrontLeft,
    FrontRight,
    SideLeft,
    SideRight,
}

impl CameraView {
    /// Order in which views are placed in the prompt.
    pub const PROMPT_ORDER: [CameraView; 5] = [
        CameraView::Front,
        CameraView::FrontLeft,
        CameraView::FrontRight,
        CameraView::SideLeft,
        CameraView::SideRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CameraView::Front => "front",
            CameraView::FrontLeft => "front-left",
            CameraView::FrontRight => "front-right",
            CameraView::SideLeft => "side-left",
            CameraView::SideRight => "side-right",
        }
    }
}

/// Text scaffolding around the prompt's image slots and kinematics block.
/// `{view}` and `{instruction}` are substituted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub view_slot: String,
    pub history_header: String,
    pub navigation: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            view_slot: "<image:{view}>".into(),
            history_header: "Ego history (oldest first):".into(),
            navigation: "Navigation: {instruction}".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub ego_history: EgoHistory,
    pub nav_instruction: Option<String>,
    pub templates: PromptTemplates,
}

impl PromptSpec {
    pub fn new(ego_history: EgoHistory) -> Self {
        Self {
            ego_history,
            nav_instruction: None,
            templates: PromptTemplates::default(),
        }
    }

    pub fn view_order(&self) -> [CameraView; 5] {
        CameraView::PROMPT_ORDER
    }
}

/// Renders the textual prompt: one slot per camera view, then the
/// kinematics block (omitted when empty), then the navigation line.
/// Every line ends with `\n`.
pub fn build_prompt(spec: &PromptSpec) -> String {
    let mut out = String::new();
    for view in spec.view_order() {
        out.push_str(&spec.templates.view_slot.replace("{view}", view.as_str()));
        out.push('\n');
    }
    let samples = spec.ego_history.samples();
    if !samples.is_empty() {
        out.push_str(&spec.templates.history_header);
        out.push('\n');
        for s in samples {
            let _ = writeln!(
                out,
                "t={}s v={}m/s a={}m/s²",
                fixed(s.t, 2),
                fixed(s.velocity, 2),
                fixed(s.acceleration, 2)
            );
        }
    }
    if let Some(instruction) = &spec.nav_instruction {
        out.push_str(
            &spec
                .templates
                .navigation
                .replace("{instruction}", instruction),
        );
        out.push('\n');
    }
    out
}
