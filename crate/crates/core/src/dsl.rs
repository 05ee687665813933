//! Line-oriented text formats for models (`.hat`), lens catalogs (`.lens`),
//! specialised failure-mode bindings (`.sfm`) and mitigation catalogs (`.mit`).
//!
//! One statement per line, tokens separated by spaces, `"`-quoted strings with
//! `\"`, `\\` and `\n` escapes, and `key=value` attributes. Blank lines and lines
//! starting with `#` are ignored. Parsing is all-or-nothing: a document yields a
//! value or a list of diagnostics sorted by line and column, never both.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use crate::lenses::{Applicability, GenericFailureMode, Lens, LensCatalog};
use crate::mapping::SpecialisedFailureMode;
use crate::mitigations::{Mitigation, Placement, DEFAULT_DAMPING};
use crate::model::{
    ActionNode, ActivityEdge, GainBehaviour, GainKind, Lane, LaneKind, Location, Ooda2Model, Side,
    Stage, DEFAULT_AMPLIFY, DEFAULT_DAMPEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentKind {
    Model,
    LensCatalog,
    SfmBindings,
    MitigationCatalog,
}

impl DocumentKind {
    pub fn extension(self) -> &'static str {
        match self {
            DocumentKind::Model => "hat",
            DocumentKind::LensCatalog => "lens",
            DocumentKind::SfmBindings => "sfm",
            DocumentKind::MitigationCatalog => "mit",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext {
            "hat" => Some(DocumentKind::Model),
            "lens" => Some(DocumentKind::LensCatalog),
            "sfm" => Some(DocumentKind::SfmBindings),
            "mit" => Some(DocumentKind::MitigationCatalog),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    pub path: String,
    pub kind: DocumentKind,
    pub text: String,
}

impl SourceDocument {
    pub fn new(path: &str, kind: DocumentKind, text: &str) -> Self {
        SourceDocument {
            path: path.to_owned(),
            kind,
            text: text.to_owned(),
        }
    }

    /// Reads a file, inferring the kind from its extension unless given.
    pub fn read(path: &Path, kind: Option<DocumentKind>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let kind = kind
            .or_else(|| {
                path.extension()
                    .and_then(|e| e.to_str())
                    .and_then(DocumentKind::from_extension)
            })
            .ok_or_else(|| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("cannot infer document kind of {}", path.display()),
                )
            })?;
        Ok(SourceDocument {
            path: path.display().to_string(),
            kind,
            text,
        })
    }

    /// Raw lines with CR stripped.
    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.text.lines()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

// ---------------------------------------------------------------------------
// Tokenizer

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Bare(String),
    Quoted(String),
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Word(String),
    Quoted(String),
    Attr(String, Value),
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn tokenize(line: &str) -> Result<Vec<Token>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == ' ' || chars[i] == '\t' {
            i += 1;
            continue;
        }
        let column = i + 1;
        if chars[i] == '"' {
            let (text, next) = read_quoted(&chars, i)?;
            i = next;
            tokens.push(Token {
                kind: TokenKind::Quoted(text),
                column,
            });
            continue;
        }
        let mut word = String::new();
        let mut kind = None;
        while i < chars.len() && chars[i] != ' ' && chars[i] != '\t' {
            let c = chars[i];
            if c == '"' {
                match word.strip_suffix('=') {
                    Some(key) if !key.is_empty() && !key.contains('=') => {
                        let (text, next) = read_quoted(&chars, i)?;
                        i = next;
                        kind = Some(TokenKind::Attr(key.to_owned(), Value::Quoted(text)));
                        break;
                    }
                    _ => return Err((i + 1, "unexpected `\"` inside a word".to_owned())),
                }
            }
            word.push(c);
            i += 1;
        }
        let kind = kind.unwrap_or_else(|| match word.split_once('=') {
            Some((key, value)) => TokenKind::Attr(key.to_owned(), Value::Bare(value.to_owned())),
            None => TokenKind::Word(word),
        });
        tokens.push(Token { kind, column });
    }
    Ok(tokens)
}

/// Reads a quoted string starting at `start` (the opening quote). Returns the
/// unescaped text and the index just past the closing quote.
fn read_quoted(chars: &[char], start: usize) -> Result<(String, usize), (usize, String)> {
    let mut out = String::new();
    let mut i = start + 1;
    loop {
        match chars.get(i) {
            None => return Err((start + 1, "unterminated string".to_owned())),
            Some('"') => {
                i += 1;
                break;
            }
            Some('\\') => {
                match chars.get(i + 1) {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some(c) => return Err((i + 1, format!("unknown escape `\\{c}`"))),
                    None => return Err((start + 1, "unterminated string".to_owned())),
                }
                i += 2;
            }
            Some(&c) => {
                out.push(c);
                i += 1;
            }
        }
    }
    if let Some(c) = chars.get(i) {
        if *c != ' ' && *c != '\t' {
            return Err((i + 1, "expected a space after the closing quote".to_owned()));
        }
    }
    Ok((out, i))
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Shortest round-trip decimal, always with a fractional part.
fn format_real(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && chars
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '_' | '.' | '-'))
}

// ---------------------------------------------------------------------------
// Statement splitting

struct Statement {
    line: usize,
    keyword: String,
    words: Vec<(String, usize)>,
    strings: Vec<(String, usize)>,
    attrs: Vec<(String, Value, usize)>,
}

impl Statement {
    fn take_attr(&mut self, key: &str) -> Option<(Value, usize)> {
        let pos = self.attrs.iter().position(|(k, _, _)| k == key)?;
        let (_, v, c) = self.attrs.remove(pos);
        Some((v, c))
    }
}

struct Diags {
    list: Vec<ParseDiagnostic>,
}

impl Diags {
    fn push(&mut self, line: usize, column: usize, message: impl Into<String>) {
        self.list.push(ParseDiagnostic {
            line,
            column,
            message: message.into(),
        });
    }

    fn finish<T>(mut self, value: T) -> Result<T, Vec<ParseDiagnostic>> {
        if self.list.is_empty() {
            Ok(value)
        } else {
            self.list.sort();
            Err(self.list)
        }
    }

    /// Required bare attribute.
    fn bare(&mut self, stmt: &mut Statement, key: &str) -> Option<(String, usize)> {
        match stmt.take_attr(key) {
            Some((Value::Bare(v), c)) => Some((v, c)),
            Some((Value::Quoted(_), c)) => {
                self.push(
                    stmt.line,
                    c,
                    format!("malformed attribute `{key}`: expected an unquoted value"),
                );
                None
            }
            None => {
                self.push(
                    stmt.line,
                    1,
                    format!("`{}` is missing attribute `{key}`", stmt.keyword),
                );
                None
            }
        }
    }

    fn quoted_attr(&mut self, stmt: &mut Statement, key: &str, required: bool) -> Option<String> {
        match stmt.take_attr(key) {
            Some((Value::Quoted(v), _)) => Some(v),
            Some((Value::Bare(_), c)) => {
                self.push(
                    stmt.line,
                    c,
                    format!("malformed attribute `{key}`: expected a quoted string"),
                );
                None
            }
            None => {
                if required {
                    self.push(
                        stmt.line,
                        1,
                        format!("`{}` is missing attribute `{key}`", stmt.keyword),
                    );
                }
                None
            }
        }
    }

    fn ident(&mut self, stmt: &Statement, value: &str, column: usize, what: &str) -> bool {
        if is_ident(value) {
            true
        } else {
            self.push(stmt.line, column, format!("invalid {what} `{value}`"));
            false
        }
    }

    fn reject_leftovers(&mut self, stmt: &Statement) {
        for (key, _, c) in &stmt.attrs {
            self.push(
                stmt.line,
                *c,
                format!(
                    "malformed attribute: `{key}` is not valid on `{}`",
                    stmt.keyword
                ),
            );
        }
    }
}

fn statements(doc: &SourceDocument, diags: &mut Diags) -> Vec<Statement> {
    let mut out = Vec::new();
    for (idx, raw) in doc.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim_start_matches([' ', '\t']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = match tokenize(raw) {
            Ok(t) => t,
            Err((column, message)) => {
                diags.push(line, column, message);
                continue;
            }
        };
        let mut iter = tokens.into_iter();
        let first = iter.next().expect("non-empty line has a token");
        let TokenKind::Word(keyword) = first.kind else {
            diags.push(
                line,
                first.column,
                "expected a keyword at the start of the statement",
            );
            continue;
        };
        let mut stmt = Statement {
            line,
            keyword,
            words: Vec::new(),
            strings: Vec::new(),
            attrs: Vec::new(),
        };
        let mut seen = HashSet::new();
        for t in iter {
            match t.kind {
                TokenKind::Word(w) => stmt.words.push((w, t.column)),
                TokenKind::Quoted(s) => stmt.strings.push((s, t.column)),
                TokenKind::Attr(k, v) => {
                    if !seen.insert(k.clone()) {
                        diags.push(
                            line,
                            t.column,
                            format!("malformed attribute: `{k}` given twice"),
                        );
                    }
                    stmt.attrs.push((k, v, t.column));
                }
            }
        }
        out.push(stmt);
    }
    out
}

fn expect_shape(
    diags: &mut Diags,
    stmt: &Statement,
    words: usize,
    strings: (usize, usize),
) -> bool {
    let mut ok = true;
    if stmt.words.len() != words {
        let column = stmt.words.get(words).map_or(1, |w| w.1);
        diags.push(
            stmt.line,
            column,
            format!(
                "`{}` expects {words} bare argument(s), found {}",
                stmt.keyword,
                stmt.words.len()
            ),
        );
        ok = false;
    }
    if stmt.strings.len() < strings.0 || stmt.strings.len() > strings.1 {
        let column = stmt.strings.get(strings.1).map_or(1, |s| s.1);
        let expected = if strings.0 == strings.1 {
            format!("{}", strings.0)
        } else {
            format!("{} to {}", strings.0, strings.1)
        };
        diags.push(
            stmt.line,
            column,
            format!(
                "`{}` expects {expected} quoted string(s), found {}",
                stmt.keyword,
                stmt.strings.len()
            ),
        );
        ok = false;
    }
    ok
}

fn id_list(
    diags: &mut Diags,
    stmt: &Statement,
    value: &str,
    column: usize,
    what: &str,
) -> Vec<String> {
    let mut out = Vec::new();
    for part in value.split(',') {
        if diags.ident(stmt, part, column, what) {
            out.push(part.to_owned());
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Models

fn parse_gain(value: &str) -> Result<GainBehaviour, String> {
    let (kind, coeff) = match value.split_once(':') {
        Some((k, c)) => (k, Some(c)),
        None => (value, None),
    };
    let coefficient = match coeff {
        Some(c) => Some(
            c.parse::<f64>()
                .map_err(|_| format!("invalid coefficient `{c}`"))?,
        ),
        None => None,
    };
    match kind {
        "amplify" => GainBehaviour::amplify(coefficient.unwrap_or(DEFAULT_AMPLIFY))
            .map_err(|e| e.to_string()),
        "dampen" => {
            GainBehaviour::dampen(coefficient.unwrap_or(DEFAULT_DAMPEN)).map_err(|e| e.to_string())
        }
        "neutral" if coefficient.is_none() => Ok(GainBehaviour::neutral()),
        "neutral" => Err("`neutral` takes no coefficient".to_owned()),
        other => Err(format!(
            "unknown response `{other}`; expected amplify, dampen or neutral"
        )),
    }
}

fn format_gain(gain: &GainBehaviour) -> String {
    match gain.kind() {
        GainKind::Neutral => "neutral".to_owned(),
        kind => format!("{}:{}", kind.token(), format_real(gain.coefficient())),
    }
}

pub fn parse_model(doc: &SourceDocument) -> Result<Ooda2Model, Vec<ParseDiagnostic>> {
    let mut diags = Diags { list: Vec::new() };
    let file = Some(doc.path.as_str()).filter(|p| !p.is_empty());
    let mut model = Ooda2Model::default();
    let mut saw_model = false;
    let mut lane_ids = HashSet::new();
    let mut node_ids = HashSet::new();

    for mut stmt in statements(doc, &mut diags) {
        let location = Location::new(file, stmt.line);
        match stmt.keyword.as_str() {
            "model" => {
                if saw_model {
                    diags.push(stmt.line, 1, "duplicate `model` statement");
                    continue;
                }
                saw_model = true;
                if expect_shape(&mut diags, &stmt, 0, (1, 1)) {
                    model.name = stmt.strings[0].0.clone();
                }
                model.location = location;
                diags.reject_leftovers(&stmt);
            }
            "lane" => {
                let shape = expect_shape(&mut diags, &stmt, 1, (1, 1));
                let side = diags.bare(&mut stmt, "side");
                let kind = diags.bare(&mut stmt, "kind");
                diags.reject_leftovers(&stmt);
                let side = side.and_then(|(v, c)| {
                    Side::from_token(&v).or_else(|| {
                        diags.push(
                            stmt.line,
                            c,
                            format!("malformed attribute: side `{v}` is not human or machine"),
                        );
                        None
                    })
                });
                let kind = kind.and_then(|(v, c)| {
                    LaneKind::from_token(&v).or_else(|| {
                        diags.push(stmt.line, c, format!("malformed attribute: kind `{v}` is not operator, autonomy, hmi or other"));
                        None
                    })
                });
                if !shape {
                    continue;
                }
                let (id, id_col) = stmt.words[0].clone();
                if !diags.ident(&stmt, &id, id_col, "lane id") {
                    continue;
                }
                if !lane_ids.insert(id.clone()) {
                    diags.push(
                        stmt.line,
                        id_col,
                        format!("lane `{id}` is declared more than once"),
                    );
                    continue;
                }
                if let (Some(side), Some(kind)) = (side, kind) {
                    let mut lane = Lane::new(&id, side, kind, &stmt.strings[0].0);
                    lane.location = location;
                    model.lanes.push(lane);
                }
            }
            "node" => {
                let shape = expect_shape(&mut diags, &stmt, 1, (1, 1));
                let lane = diags.bare(&mut stmt, "lane");
                let stage = diags.bare(&mut stmt, "stage");
                let mut response = Vec::new();
                let mut causes = Vec::new();
                let mut mitigations = Vec::new();
                for (key, value, column) in std::mem::take(&mut stmt.attrs) {
                    let Value::Bare(value) = value else {
                        diags.push(
                            stmt.line,
                            column,
                            format!("malformed attribute `{key}`: expected an unquoted value"),
                        );
                        continue;
                    };
                    if let Some(category) = key.strip_prefix("response.") {
                        if !diags.ident(&stmt, category, column, "category") {
                            continue;
                        }
                        match parse_gain(&value) {
                            Ok(g) => response.push((category.to_owned(), g)),
                            Err(e) => diags.push(
                                stmt.line,
                                column,
                                format!("malformed attribute `{key}`: {e}"),
                            ),
                        }
                    } else if key == "cause" {
                        causes = id_list(&mut diags, &stmt, &value, column, "category");
                    } else if key == "mitigation" {
                        mitigations = id_list(&mut diags, &stmt, &value, column, "mitigation id");
                    } else {
                        diags.push(
                            stmt.line,
                            column,
                            format!("malformed attribute: `{key}` is not valid on `node`"),
                        );
                    }
                }
                let stage = stage.and_then(|(v, c)| {
                    Stage::from_token(&v).or_else(|| {
                        diags.push(stmt.line, c, format!("malformed attribute: stage `{v}` is not observe, orient, decide or act"));
                        None
                    })
                });
                let lane = lane.and_then(|(v, c)| {
                    if lane_ids.contains(&v) {
                        Some(v)
                    } else {
                        diags.push(stmt.line, c, format!("undeclared lane `{v}`"));
                        None
                    }
                });
                if !shape {
                    continue;
                }
                let (id, id_col) = stmt.words[0].clone();
                if !diags.ident(&stmt, &id, id_col, "node id") {
                    continue;
                }
                if !node_ids.insert(id.clone()) {
                    diags.push(
                        stmt.line,
                        id_col,
                        format!("node `{id}` is declared more than once"),
                    );
                    continue;
                }
                if let (Some(lane), Some(stage)) = (lane, stage) {
                    let mut node = ActionNode::new(&id, &lane, stage, &stmt.strings[0].0);
                    node.response = response.into_iter().collect();
                    node.causes = causes;
                    node.mitigation_ids = mitigations;
                    node.location = location;
                    model.nodes.push(node);
                }
            }
            "edge" => {
                let shape = expect_shape(&mut diags, &stmt, 3, (0, 1));
                let name = diags.quoted_attr(&mut stmt, "name", false);
                let mitigations = match stmt.take_attr("mitigation") {
                    Some((Value::Bare(v), c)) => id_list(&mut diags, &stmt, &v, c, "mitigation id"),
                    Some((Value::Quoted(_), c)) => {
                        diags.push(
                            stmt.line,
                            c,
                            "malformed attribute `mitigation`: expected an unquoted value",
                        );
                        Vec::new()
                    }
                    None => Vec::new(),
                };
                diags.reject_leftovers(&stmt);
                if !shape {
                    continue;
                }
                let (from, from_col) = stmt.words[0].clone();
                let (arrow, arrow_col) = stmt.words[1].clone();
                let (to, to_col) = stmt.words[2].clone();
                if arrow != "->" {
                    diags.push(
                        stmt.line,
                        arrow_col,
                        format!("expected `->`, found `{arrow}`"),
                    );
                    continue;
                }
                let mut ok = true;
                for (id, col) in [(&from, from_col), (&to, to_col)] {
                    if !node_ids.contains(id) {
                        diags.push(stmt.line, col, format!("undeclared node `{id}`"));
                        ok = false;
                    }
                }
                if ok && from == to {
                    diags.push(stmt.line, to_col, format!("self-loop on node `{from}`"));
                    ok = false;
                }
                if ok {
                    model.edges.push(ActivityEdge {
                        id: model.edges.len() + 1,
                        from_node: from,
                        to_node: to,
                        guard: stmt.strings.first().map(|s| s.0.clone()),
                        name,
                        mitigation_ids: mitigations,
                        location,
                    });
                }
            }
            other => diags.push(stmt.line, 1, format!("unknown keyword `{other}`")),
        }
    }
    if !saw_model {
        model.location = Location::new(file, 1);
    }
    diags.finish(model)
}

/// Canonical form: model, lanes, nodes, edges, each in declaration order, with
/// attributes in grammar order and responses sorted by category.
pub fn serialize_model(model: &Ooda2Model) -> SourceDocument {
    let mut out = String::new();
    out.push_str(&format!("model {}\n", quote(&model.name)));
    for lane in &model.lanes {
        out.push_str(&format!(
            "lane {} side={} kind={} {}\n",
            lane.id,
            lane.side.token(),
            lane.kind.token(),
            quote(&lane.display_name)
        ));
    }
    for node in &model.nodes {
        let mut line = format!(
            "node {} lane={} stage={} {}",
            node.id,
            node.lane_id,
            node.stage.token(),
            quote(&node.label)
        );
        for (category, gain) in &node.response {
            line.push_str(&format!(" response.{category}={}", format_gain(gain)));
        }
        if !node.causes.is_empty() {
            line.push_str(&format!(" cause={}", node.causes.join(",")));
        }
        if !node.mitigation_ids.is_empty() {
            line.push_str(&format!(" mitigation={}", node.mitigation_ids.join(",")));
        }
        out.push_str(&line);
        out.push('\n');
    }
    for edge in &model.edges {
        let mut line = format!("edge {} -> {}", edge.from_node, edge.to_node);
        if let Some(guard) = &edge.guard {
            line.push(' ');
            line.push_str(&quote(guard));
        }
        if let Some(name) = &edge.name {
            line.push_str(&format!(" name={}", quote(name)));
        }
        if !edge.mitigation_ids.is_empty() {
            line.push_str(&format!(" mitigation={}", edge.mitigation_ids.join(",")));
        }
        out.push_str(&line);
        out.push('\n');
    }
    SourceDocument {
        path: String::new(),
        kind: DocumentKind::Model,
        text: out,
    }
}

// ---------------------------------------------------------------------------
// Lens catalogs

pub fn parse_lens_catalog(doc: &SourceDocument) -> Result<LensCatalog, Vec<ParseDiagnostic>> {
    let mut diags = Diags { list: Vec::new() };
    let file = Some(doc.path.as_str()).filter(|p| !p.is_empty());
    let mut catalog = LensCatalog::default();
    let mut mode_ids = HashSet::new();

    for mut stmt in statements(doc, &mut diags) {
        let location = Location::new(file, stmt.line);
        match stmt.keyword.as_str() {
            "lens" => {
                let shape = expect_shape(&mut diags, &stmt, 1, (1, 1));
                diags.reject_leftovers(&stmt);
                if !shape {
                    continue;
                }
                let (id, col) = stmt.words[0].clone();
                if !diags.ident(&stmt, &id, col, "lens id") {
                    continue;
                }
                if catalog.lens(&id).is_some() {
                    diags.push(
                        stmt.line,
                        col,
                        format!("lens `{id}` is declared more than once"),
                    );
                    continue;
                }
                let mut lens = Lens::new(&id, &stmt.strings[0].0);
                lens.location = location;
                catalog.lenses.push(lens);
            }
            "mode" => {
                let shape = expect_shape(&mut diags, &stmt, 1, (1, 1));
                let lens = diags.bare(&mut stmt, "lens");
                let direction = diags.bare(&mut stmt, "direction");
                let category = diags.bare(&mut stmt, "category");
                let question = diags.quoted_attr(&mut stmt, "question", true);
                let benign = match stmt.take_attr("benign") {
                    Some((Value::Bare(v), _)) if v == "true" => true,
                    Some((Value::Bare(v), _)) if v == "false" => false,
                    Some((_, c)) => {
                        diags.push(
                            stmt.line,
                            c,
                            "malformed attribute `benign`: expected true or false",
                        );
                        false
                    }
                    None => false,
                };
                let mut stage_filter = |stmt: &mut Statement, key: &str| {
                    match stmt.take_attr(key) {
                    Some((Value::Bare(v), c)) => Stage::from_token(&v).or_else(|| {
                        diags.push(stmt.line, c, format!("malformed attribute: stage `{v}` is not observe, orient, decide or act"));
                        None
                    }),
                    Some((Value::Quoted(_), c)) => {
                        diags.push(stmt.line, c, format!("malformed attribute `{key}`: expected an unquoted value"));
                        None
                    }
                    None => None,
                }
                };
                let machine_stage = stage_filter(&mut stmt, "machine_stage");
                let human_stage = stage_filter(&mut stmt, "human_stage");
                diags.reject_leftovers(&stmt);
                let direction = direction.and_then(|(v, c)| {
                    Applicability::from_token(&v).or_else(|| {
                        diags.push(
                            stmt.line,
                            c,
                            format!("malformed attribute: direction `{v}` is not m2h, h2m or both"),
                        );
                        None
                    })
                });
                let category = category.filter(|(v, c)| diags.ident(&stmt, v, *c, "category"));
                let lens = lens.and_then(|(v, c)| {
                    if catalog.lens(&v).is_some() {
                        Some(v)
                    } else {
                        diags.push(stmt.line, c, format!("undeclared lens `{v}`"));
                        None
                    }
                });
                if !shape {
                    continue;
                }
                let (id, col) = stmt.words[0].clone();
                if !diags.ident(&stmt, &id, col, "mode id") {
                    continue;
                }
                if !mode_ids.insert(id.clone()) {
                    diags.push(
                        stmt.line,
                        col,
                        format!("mode `{id}` is declared more than once"),
                    );
                    continue;
                }
                if let (Some(lens), Some(direction), Some((category, _)), Some(question)) =
                    (lens, direction, category, question)
                {
                    let mut mode = GenericFailureMode::new(
                        &id,
                        &lens,
                        &category,
                        &stmt.strings[0].0,
                        &question,
                        direction,
                    );
                    mode.benign = benign;
                    mode.machine_stage = machine_stage;
                    mode.human_stage = human_stage;
                    mode.location = location;
                    catalog
                        .lenses
                        .iter_mut()
                        .find(|l| l.id == lens)
                        .expect("lens checked above")
                        .modes
                        .push(mode);
                }
            }
            other => diags.push(stmt.line, 1, format!("unknown keyword `{other}`")),
        }
    }
    diags.finish(catalog)
}

pub fn serialize_lens_catalog(catalog: &LensCatalog) -> SourceDocument {
    let mut out = String::new();
    for lens in &catalog.lenses {
        out.push_str(&format!("lens {} {}\n", lens.id, quote(&lens.name)));
        for mode in &lens.modes {
            let mut line = format!(
                "mode {} lens={} direction={} category={} {} question={}",
                mode.id,
                mode.lens_id,
                mode.applicability.token(),
                mode.category,
                quote(&mode.title),
                quote(&mode.question)
            );
            if mode.benign {
                line.push_str(" benign=true");
            }
            if let Some(s) = mode.machine_stage {
                line.push_str(&format!(" machine_stage={}", s.token()));
            }
            if let Some(s) = mode.human_stage {
                line.push_str(&format!(" human_stage={}", s.token()));
            }
            out.push_str(&line);
            out.push('\n');
        }
    }
    SourceDocument {
        path: String::new(),
        kind: DocumentKind::LensCatalog,
        text: out,
    }
}

// ---------------------------------------------------------------------------
// SFM bindings

pub fn parse_sfm_bindings(
    doc: &SourceDocument,
) -> Result<Vec<SpecialisedFailureMode>, Vec<ParseDiagnostic>> {
    let mut diags = Diags { list: Vec::new() };
    let file = Some(doc.path.as_str()).filter(|p| !p.is_empty());
    let mut out = Vec::new();
    for mut stmt in statements(doc, &mut diags) {
        if stmt.keyword != "sfm" {
            diags.push(stmt.line, 1, format!("unknown keyword `{}`", stmt.keyword));
            continue;
        }
        let shape = expect_shape(&mut diags, &stmt, 1, (1, 1));
        let interaction = diags.bare(&mut stmt, "interaction");
        let mode = diags.bare(&mut stmt, "mode");
        diags.reject_leftovers(&stmt);
        let interaction = interaction.and_then(|(v, c)| match v.parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                diags.push(
                    stmt.line,
                    c,
                    format!("malformed attribute: interaction `{v}` is not a positive integer"),
                );
                None
            }
        });
        let mode = mode.filter(|(v, c)| diags.ident(&stmt, v, *c, "mode id"));
        if !shape {
            continue;
        }
        let (id, col) = &stmt.words[0];
        let sfm_id = match id.parse::<u32>() {
            Ok(n) if n > 0 => n,
            _ => {
                diags.push(
                    stmt.line,
                    *col,
                    format!("SFM id `{id}` is not a positive integer"),
                );
                continue;
            }
        };
        if let (Some(interaction), Some((mode, _))) = (interaction, mode) {
            let mut sfm =
                SpecialisedFailureMode::new(sfm_id, interaction, &mode, &stmt.strings[0].0);
            sfm.location = Location::new(file, stmt.line);
            out.push(sfm);
        }
    }
    diags.finish(out)
}

pub fn serialize_sfm_bindings(sfms: &[SpecialisedFailureMode]) -> SourceDocument {
    let text = sfms
        .iter()
        .map(|s| {
            format!(
                "sfm {} interaction={} mode={} {}\n",
                s.sfm_id,
                s.interaction_id,
                s.generic_mode_id,
                quote(&s.text)
            )
        })
        .collect();
    SourceDocument {
        path: String::new(),
        kind: DocumentKind::SfmBindings,
        text,
    }
}

// ---------------------------------------------------------------------------
// Mitigation catalogs

pub fn parse_mitigation_catalog(
    doc: &SourceDocument,
) -> Result<Vec<Mitigation>, Vec<ParseDiagnostic>> {
    let mut diags = Diags { list: Vec::new() };
    let mut out: Vec<Mitigation> = Vec::new();
    for mut stmt in statements(doc, &mut diags) {
        if stmt.keyword != "mitigation" {
            diags.push(stmt.line, 1, format!("unknown keyword `{}`", stmt.keyword));
            continue;
        }
        let shape = expect_shape(&mut diags, &stmt, 1, (1, 1));
        let categories = diags.bare(&mut stmt, "category");
        let placement = diags.bare(&mut stmt, "placement");
        let detail = diags.quoted_attr(&mut stmt, "detail", true);
        let caveat = diags.quoted_attr(&mut stmt, "caveat", false);
        let damping = match stmt.take_attr("damping") {
            Some((Value::Bare(v), c)) => match v.parse::<f64>() {
                Ok(d) if d > 0.0 && d < 1.0 => Some(d),
                _ => {
                    diags.push(
                        stmt.line,
                        c,
                        format!("malformed attribute: damping `{v}` must be a number in (0, 1)"),
                    );
                    None
                }
            },
            Some((Value::Quoted(_), c)) => {
                diags.push(
                    stmt.line,
                    c,
                    "malformed attribute `damping`: expected an unquoted value",
                );
                None
            }
            None => Some(DEFAULT_DAMPING),
        };
        diags.reject_leftovers(&stmt);
        let categories = categories.map(|(v, c)| id_list(&mut diags, &stmt, &v, c, "category"));
        let placement = placement.and_then(|(v, c)| {
            Placement::from_token(&v).or_else(|| {
                diags.push(
                    stmt.line,
                    c,
                    format!("malformed attribute: placement `{v}` is not node or edge"),
                );
                None
            })
        });
        if !shape {
            continue;
        }
        let (id, col) = stmt.words[0].clone();
        if !diags.ident(&stmt, &id, col, "mitigation id") {
            continue;
        }
        if out.iter().any(|m| m.id == id) {
            diags.push(
                stmt.line,
                col,
                format!("mitigation `{id}` is declared more than once"),
            );
            continue;
        }
        if let (Some(categories), Some(placement), Some(detail), Some(damping)) =
            (categories, placement, detail, damping)
        {
            if categories.is_empty() {
                continue;
            }
            out.push(Mitigation {
                id,
                name: stmt.strings[0].0.clone(),
                categories,
                placement,
                detail,
                damping,
                caveat,
            });
        }
    }
    diags.finish(out)
}

pub fn serialize_mitigation_catalog(mitigations: &[Mitigation]) -> SourceDocument {
    let mut out = String::new();
    for m in mitigations {
        out.push_str(&format!(
            "mitigation {} category={} placement={} {} detail={}",
            m.id,
            m.categories.join(","),
            m.placement.token(),
            quote(&m.name),
            quote(&m.detail)
        ));
        if m.damping != DEFAULT_DAMPING {
            out.push_str(&format!(" damping={}", format_real(m.damping)));
        }
        if let Some(caveat) = &m.caveat {
            out.push_str(&format!(" caveat={}", quote(caveat)));
        }
        out.push('\n');
    }
    SourceDocument {
        path: String::new(),
        kind: DocumentKind::MitigationCatalog,
        text: out,
    }
}
