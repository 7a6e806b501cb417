//! The executable action space and its call-text syntax.
//!
//! Actions reference on-screen elements by their set-of-mark index. Model
//! output is parsed tolerantly (any case, positional or `name=value`
//! arguments, single or double quotes) and rendered canonically
//! (lowercase, positional, double-quoted strings).
//!
//! Grammar accepted by [`parse_action`]:
//!
//! ```text
//! call   := ws name ws "(" ws [ arg { ws "," ws arg } ] ws ")" ws [";"] ws
//! arg    := [ ident ws "=" ws ] value
//! value  := quoted | bare
//! quoted := '"' { char | escape } '"' | "'" { char | escape } "'"
//! escape := "\" ( "n" | "t" | "r" | any )
//! bare   := 1*( any char except , ( ) = " ' and whitespace )
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::env::{ElementKind, Screen};

/// Pause length used when `wait` is called without an interval.
pub const DEFAULT_WAIT_SECONDS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Short,
    Medium,
    Long,
}

impl Distance {
    pub const ALL: [Distance; 3] = [Distance::Short, Distance::Medium, Distance::Long];

    pub fn as_str(self) -> &'static str {
        match self {
            Distance::Short => "short",
            Distance::Medium => "medium",
            Distance::Long => "long",
        }
    }

    /// Scroll offset applied by a swipe of this distance.
    pub fn steps(self) -> i64 {
        match self {
            Distance::Short => 1,
            Distance::Medium => 2,
            Distance::Long => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Tap,
    Text,
    Swipe,
    LongPress,
    Back,
    Home,
    Wait,
    Finish,
}

impl ActionKind {
    pub const ALL: [ActionKind; 8] = [
        ActionKind::Tap,
        ActionKind::Text,
        ActionKind::Swipe,
        ActionKind::LongPress,
        ActionKind::Back,
        ActionKind::Home,
        ActionKind::Wait,
        ActionKind::Finish,
    ];

    /// Canonical function name.
    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Tap => "tap",
            ActionKind::Text => "text",
            ActionKind::Swipe => "swipe",
            ActionKind::LongPress => "long_press",
            ActionKind::Back => "back",
            ActionKind::Home => "home",
            ActionKind::Wait => "wait",
            ActionKind::Finish => "finish",
        }
    }

    /// Parameter names in positional order.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            ActionKind::Tap | ActionKind::LongPress => &["index"],
            ActionKind::Text => &["input_str"],
            ActionKind::Swipe => &["index", "direction", "dist"],
            ActionKind::Back | ActionKind::Home => &[],
            ActionKind::Wait => &["interval"],
            ActionKind::Finish => &["message"],
        }
    }

    /// Number of leading parameters that must be supplied.
    pub fn required(self) -> usize {
        match self {
            ActionKind::Wait | ActionKind::Finish => 0,
            other => other.params().len(),
        }
    }

    fn lookup(name: &str) -> Option<ActionKind> {
        let lower = name.to_ascii_lowercase();
        let kind = match lower.as_str() {
            "tap" => ActionKind::Tap,
            "text" | "type" => ActionKind::Text,
            "swipe" => ActionKind::Swipe,
            "long_press" | "longpress" => ActionKind::LongPress,
            "back" => ActionKind::Back,
            "home" => ActionKind::Home,
            "wait" => ActionKind::Wait,
            "finish" => ActionKind::Finish,
            _ => return None,
        };
        Some(kind)
    }
}

/// One GUI primitive. Each variant carries exactly the fields its kind needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Action {
    Tap { index: u32 },
    Text { input: String },
    Swipe { index: u32, direction: Direction, distance: Distance },
    LongPress { index: u32 },
    Back,
    Home,
    Wait { interval: u32 },
    Finish { message: Option<String> },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Tap { .. } => ActionKind::Tap,
            Action::Text { .. } => ActionKind::Text,
            Action::Swipe { .. } => ActionKind::Swipe,
            Action::LongPress { .. } => ActionKind::LongPress,
            Action::Back => ActionKind::Back,
            Action::Home => ActionKind::Home,
            Action::Wait { .. } => ActionKind::Wait,
            Action::Finish { .. } => ActionKind::Finish,
        }
    }

    /// The element index this action targets, if any.
    pub fn index(&self) -> Option<u32> {
        match self {
            Action::Tap { index } | Action::LongPress { index } | Action::Swipe { index, .. } => {
                Some(*index)
            }
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        render_action(self)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_action(self))
    }
}

impl FromStr for Action {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_action(self))
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_action(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty call")]
    Empty,
    #[error("malformed call: {0}")]
    Malformed(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("`{function}`: {detail}")]
    ArityMismatch { function: &'static str, detail: String },
    #[error("`{function}`: argument `{param}` {detail}")]
    BadArgumentType { function: &'static str, param: &'static str, detail: String },
    #[error("`{function}`: `{value}` is not a valid {param}")]
    BadEnumValue { function: &'static str, param: &'static str, value: String },
    #[error("more than one call in block")]
    MultipleCalls,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("no element with index {0} on screen")]
    NoSuchElement(u32),
    #[error("no focused input field on screen")]
    NoFocusedField,
}

/// Renders canonical call text: lowercase name, positional arguments,
/// double-quoted strings.
pub fn render_action(action: &Action) -> String {
    match action {
        Action::Tap { index } => format!("tap({index})"),
        Action::Text { input } => format!("text({})", quote(input)),
        Action::Swipe { index, direction, distance } => format!(
            "swipe({index}, \"{}\", \"{}\")",
            direction.as_str(),
            distance.as_str()
        ),
        Action::LongPress { index } => format!("long_press({index})"),
        Action::Back => "back()".to_string(),
        Action::Home => "home()".to_string(),
        Action::Wait { interval } => format!("wait({interval})"),
        Action::Finish { message: None } => "finish()".to_string(),
        Action::Finish { message: Some(m) } => format!("finish({})", quote(m)),
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq)]
struct RawArg {
    name: Option<String>,
    value: String,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, _src: src }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn rest(&self) -> String {
        self.chars[self.pos..].iter().collect()
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn quoted(&mut self, delim: char) -> Result<String, ParseError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(ParseError::Malformed("unterminated string".into())),
                Some('\\') => match self.bump() {
                    None => return Err(ParseError::Malformed("unterminated string".into())),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some(c) => out.push(c),
                },
                Some(c) if c == delim => return Ok(out),
                Some(c) => out.push(c),
            }
        }
    }

    fn bare(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !matches!(c, ',' | '(' | ')' | '=' | '"' | '\'') && !c.is_whitespace())
        {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn value(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(q @ ('"' | '\'')) => {
                self.pos += 1;
                self.quoted(q)
            }
            _ => {
                let v = self.bare();
                if v.is_empty() {
                    Err(ParseError::Malformed(format!("expected argument at `{}`", self.rest())))
                } else {
                    Ok(v)
                }
            }
        }
    }

    fn arg(&mut self) -> Result<RawArg, ParseError> {
        // A bare identifier followed by `=` is a keyword; otherwise rewind.
        let save = self.pos;
        if self.peek().is_some_and(|c| c.is_alphabetic() || c == '_') {
            let name = self.ident();
            self.skip_ws();
            if self.peek() == Some('=') {
                self.pos += 1;
                self.skip_ws();
                let value = self.value()?;
                return Ok(RawArg { name: Some(name.to_ascii_lowercase()), value });
            }
            self.pos = save;
        }
        Ok(RawArg { name: None, value: self.value()? })
    }
}

/// Parses the content of a called-function block into a typed action.
pub fn parse_action(call_text: &str) -> Result<Action, ParseError> {
    let mut cur = Cursor::new(call_text);
    cur.skip_ws();
    if cur.at_end() {
        return Err(ParseError::Empty);
    }
    let name = cur.ident();
    if name.is_empty() {
        return Err(ParseError::Malformed(format!("expected function name at `{}`", cur.rest())));
    }
    cur.skip_ws();
    if cur.bump() != Some('(') {
        return Err(ParseError::Malformed(format!("expected `(` after `{name}`")));
    }
    let mut args = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some(')') {
        cur.pos += 1;
    } else {
        loop {
            cur.skip_ws();
            args.push(cur.arg()?);
            cur.skip_ws();
            match cur.bump() {
                Some(',') => continue,
                Some(')') => break,
                Some(c) => return Err(ParseError::Malformed(format!("unexpected `{c}` in arguments"))),
                None => return Err(ParseError::Malformed("missing `)`".into())),
            }
        }
    }
    cur.skip_ws();
    if cur.peek() == Some(';') {
        cur.pos += 1;
        cur.skip_ws();
    }
    if !cur.at_end() {
        let rest = cur.rest();
        let looks_like_call = rest
            .find('(')
            .map(|p| {
                let head = rest[..p].trim();
                !head.is_empty() && head.chars().all(|c| c.is_alphanumeric() || c == '_')
            })
            .unwrap_or(false);
        return Err(if looks_like_call {
            ParseError::MultipleCalls
        } else {
            ParseError::Malformed(format!("trailing text `{}`", rest.trim()))
        });
    }
    let kind = ActionKind::lookup(&name).ok_or_else(|| ParseError::UnknownFunction(name.clone()))?;
    build(kind, bind(kind, args)?)
}

/// Matches positional and keyword arguments against the kind's parameter list.
fn bind(kind: ActionKind, args: Vec<RawArg>) -> Result<Vec<Option<String>>, ParseError> {
    let params = kind.params();
    let function = kind.name();
    let mut slots: Vec<Option<String>> = vec![None; params.len()];
    let mut seen_keyword = false;
    let mut positional = 0;
    for arg in args {
        match arg.name {
            None => {
                if seen_keyword {
                    return Err(ParseError::ArityMismatch {
                        function,
                        detail: "positional argument after keyword argument".into(),
                    });
                }
                if positional >= params.len() {
                    return Err(ParseError::ArityMismatch {
                        function,
                        detail: format!("takes at most {} argument(s)", params.len()),
                    });
                }
                slots[positional] = Some(arg.value);
                positional += 1;
            }
            Some(name) => {
                seen_keyword = true;
                let slot = params.iter().position(|p| *p == name).ok_or_else(|| {
                    ParseError::ArityMismatch { function, detail: format!("unexpected argument `{name}`") }
                })?;
                if slots[slot].is_some() {
                    return Err(ParseError::ArityMismatch {
                        function,
                        detail: format!("argument `{name}` given twice"),
                    });
                }
                slots[slot] = Some(arg.value);
            }
        }
    }
    if let Some(missing) = params[..kind.required()].iter().zip(&slots).find(|(_, s)| s.is_none()) {
        return Err(ParseError::ArityMismatch {
            function,
            detail: format!("missing argument `{}`", missing.0),
        });
    }
    Ok(slots)
}

fn parse_index(function: &'static str, raw: &str) -> Result<u32, ParseError> {
    let value: u32 = raw.trim().parse().map_err(|_| ParseError::BadArgumentType {
        function,
        param: "index",
        detail: format!("must be a positive integer, got `{raw}`"),
    })?;
    if value == 0 {
        return Err(ParseError::BadArgumentType {
            function,
            param: "index",
            detail: "must be at least 1".into(),
        });
    }
    Ok(value)
}

fn build(kind: ActionKind, mut slots: Vec<Option<String>>) -> Result<Action, ParseError> {
    let function = kind.name();
    let mut take = |i: usize| slots.get_mut(i).and_then(Option::take);
    let action = match kind {
        ActionKind::Tap => Action::Tap { index: parse_index(function, &take(0).unwrap_or_default())? },
        ActionKind::LongPress => {
            Action::LongPress { index: parse_index(function, &take(0).unwrap_or_default())? }
        }
        ActionKind::Text => Action::Text { input: take(0).unwrap_or_default() },
        ActionKind::Swipe => {
            let index = parse_index(function, &take(0).unwrap_or_default())?;
            let dir = take(1).unwrap_or_default();
            let direction = Direction::ALL
                .into_iter()
                .find(|d| d.as_str().eq_ignore_ascii_case(dir.trim()))
                .ok_or(ParseError::BadEnumValue { function, param: "direction", value: dir })?;
            let dist = take(2).unwrap_or_default();
            let distance = Distance::ALL
                .into_iter()
                .find(|d| d.as_str().eq_ignore_ascii_case(dist.trim()))
                .ok_or(ParseError::BadEnumValue { function, param: "dist", value: dist })?;
            Action::Swipe { index, direction, distance }
        }
        ActionKind::Back => Action::Back,
        ActionKind::Home => Action::Home,
        ActionKind::Wait => {
            let interval = match take(0) {
                None => DEFAULT_WAIT_SECONDS,
                Some(raw) => raw.trim().parse().map_err(|_| ParseError::BadArgumentType {
                    function,
                    param: "interval",
                    detail: format!("must be a non-negative integer, got `{raw}`"),
                })?,
            };
            Action::Wait { interval }
        }
        ActionKind::Finish => Action::Finish { message: take(0) },
    };
    Ok(action)
}

/// Checks an action against the screen it will be applied to.
pub fn validate_action(action: &Action, screen: &Screen) -> Result<(), ValidationError> {
    if let Some(index) = action.index() {
        if screen.element(index).is_none() {
            return Err(ValidationError::NoSuchElement(index));
        }
    }
    if matches!(action, Action::Text { .. })
        && !screen.elements.iter().any(|e| e.kind == ElementKind::Input && e.focused)
    {
        return Err(ValidationError::NoFocusedField);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Element;
    use proptest::prelude::*;

    fn screen(n: u32) -> Screen {
        Screen {
            id: "s".into(),
            app: "a".into(),
            elements: (1..=n)
                .map(|i| Element {
                    index: i,
                    kind: ElementKind::Button,
                    label: format!("b{i}"),
                    state: None,
                    focused: false,
                })
                .collect(),
            scroll_position: 0,
        }
    }

    #[test]
    fn parses_tap() {
        assert_eq!(parse_action("tap(5)").unwrap(), Action::Tap { index: 5 });
        assert_eq!(parse_action("  TAP ( 5 ) \n").unwrap(), Action::Tap { index: 5 });
        assert_eq!(parse_action("tap(index=5)").unwrap(), Action::Tap { index: 5 });
    }

    #[test]
    fn parses_swipe_with_quotes_and_keywords() {
        let want = Action::Swipe { index: 2, direction: Direction::Up, distance: Distance::Medium };
        assert_eq!(parse_action("swipe(2, \"up\", \"medium\")").unwrap(), want);
        assert_eq!(parse_action("swipe(2, 'up', 'medium')").unwrap(), want);
        assert_eq!(parse_action("Swipe(index=2, dist=\"medium\", direction='UP')").unwrap(), want);
        assert_eq!(parse_action("swipe(2, up, medium)").unwrap(), want);
    }

    #[test]
    fn unknown_function() {
        assert_eq!(parse_action("fly(1)"), Err(ParseError::UnknownFunction("fly".into())));
    }

    #[test]
    fn error_classes() {
        assert!(matches!(parse_action("tap()"), Err(ParseError::ArityMismatch { .. })));
        assert!(matches!(parse_action("tap(1, 2)"), Err(ParseError::ArityMismatch { .. })));
        assert!(matches!(parse_action("back(1)"), Err(ParseError::ArityMismatch { .. })));
        assert!(matches!(parse_action("tap(index=1, index=2)"), Err(ParseError::ArityMismatch { .. })));
        assert!(matches!(parse_action("tap(x=1)"), Err(ParseError::ArityMismatch { .. })));
        assert!(matches!(parse_action("tap(abc)"), Err(ParseError::BadArgumentType { .. })));
        assert!(matches!(parse_action("tap(0)"), Err(ParseError::BadArgumentType { .. })));
        assert!(matches!(parse_action("tap(-3)"), Err(ParseError::BadArgumentType { .. })));
        assert!(matches!(parse_action("wait(soon)"), Err(ParseError::BadArgumentType { .. })));
        assert!(matches!(
            parse_action("swipe(1, \"sideways\", \"short\")"),
            Err(ParseError::BadEnumValue { param: "direction", .. })
        ));
        assert!(matches!(
            parse_action("swipe(1, \"up\", \"far\")"),
            Err(ParseError::BadEnumValue { param: "dist", .. })
        ));
        assert_eq!(parse_action("tap(1) tap(2)"), Err(ParseError::MultipleCalls));
        assert_eq!(parse_action("tap(1); back()"), Err(ParseError::MultipleCalls));
        assert_eq!(parse_action("   "), Err(ParseError::Empty));
        assert!(matches!(parse_action("tap(1"), Err(ParseError::Malformed(_))));
        assert!(matches!(parse_action("text(\"abc)"), Err(ParseError::Malformed(_))));
        assert!(matches!(parse_action("tap 1"), Err(ParseError::Malformed(_))));
    }

    #[test]
    fn trailing_semicolon_is_tolerated() {
        assert_eq!(parse_action("back();").unwrap(), Action::Back);
    }

    #[test]
    fn renders_canonically() {
        assert_eq!(render_action(&Action::Back), "back()");
        assert_eq!(render_action(&Action::Finish { message: Some("done".into()) }), "finish(\"done\")");
        assert_eq!(render_action(&Action::Wait { interval: 5 }), "wait(5)");
        assert_eq!(parse_action("wait()").unwrap(), Action::Wait { interval: 5 });
        assert_eq!(render_action(&Action::Text { input: "say \"hi\"\n".into() }), r#"text("say \"hi\"\n")"#);
        assert_eq!(parse_action("type('hi')").unwrap(), Action::Text { input: "hi".into() });
        assert_eq!(parse_action("longpress(3)").unwrap().render(), "long_press(3)");
    }

    #[test]
    fn validation() {
        let s = screen(3);
        assert_eq!(validate_action(&Action::Tap { index: 3 }, &s), Ok(()));
        assert_eq!(validate_action(&Action::Tap { index: 9 }, &s), Err(ValidationError::NoSuchElement(9)));
        assert_eq!(
            validate_action(&Action::Text { input: "hi".into() }, &s),
            Err(ValidationError::NoFocusedField)
        );
        let mut focused = screen(2);
        focused.elements[1].kind = ElementKind::Input;
        focused.elements[1].focused = true;
        assert_eq!(validate_action(&Action::Text { input: "hi".into() }, &focused), Ok(()));
        assert_eq!(validate_action(&Action::Back, &screen(0)), Ok(()));
    }

    pub(crate) fn arb_action() -> impl Strategy<Value = Action> {
        let idx = 1u32..=u32::MAX;
        prop_oneof![
            idx.clone().prop_map(|index| Action::Tap { index }),
            any::<String>().prop_map(|input| Action::Text { input }),
            (idx.clone(), 0usize..4, 0usize..3).prop_map(|(index, d, s)| Action::Swipe {
                index,
                direction: Direction::ALL[d],
                distance: Distance::ALL[s],
            }),
            idx.prop_map(|index| Action::LongPress { index }),
            Just(Action::Back),
            Just(Action::Home),
            any::<u32>().prop_map(|interval| Action::Wait { interval }),
            proptest::option::of(any::<String>()).prop_map(|message| Action::Finish { message }),
        ]
    }

    proptest! {
        #[test]
        fn parse_inverts_render(a in arb_action()) {
            let text = render_action(&a);
            prop_assert_eq!(parse_action(&text).unwrap(), a);
        }

        #[test]
        fn parser_is_total(s in any::<String>()) {
            let _ = parse_action(&s);
        }

        #[test]
        fn rendered_text_has_call_shape(a in arb_action()) {
            let text = render_action(&a);
            let open = text.find('(').unwrap();
            prop_assert_eq!(&text[..open], a.kind().name());
            prop_assert!(text.ends_with(')'));
        }
    }
}
