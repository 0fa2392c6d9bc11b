//! Strategy-selection dialog.
//!
//! Transitions are decided by a fixed grammar. The model only ever supplies
//! prose for off-topic replies.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::llm::{ChatMessage, Gateway, LlmSettings};
use crate::strategy::{Strategy, StrategySet};

pub const MAX_BOT_CHARS: usize = 600;

pub const TOKEN_PATTERN: &str = r"^QUESTIONS( (transcript|emotion|visual))+ DONE$";

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(TOKEN_PATTERN).expect("valid pattern"));

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChatError {
    #[error("the selection dialog is already finished")]
    SessionFinished,
    #[error("cannot emit tokens for an empty selection")]
    EmptySelection,
    #[error("malformed token line: {0:?}")]
    MalformedTokens(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Intro,
    AwaitSelection,
    AwaitConfirmation,
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatState {
    phase: Phase,
    pending_selection: StrategySet,
    transcript: Vec<ChatMessage>,
    /// Set once, when the dialog reaches Done.
    token_line: Option<String>,
}

impl Default for ChatState {
    fn default() -> Self {
        ChatState::new()
    }
}

impl ChatState {
    pub fn new() -> Self {
        ChatState { phase: Phase::Intro, pending_selection: StrategySet::EMPTY, transcript: Vec::new(), token_line: None }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn pending_selection(&self) -> StrategySet {
        self.pending_selection
    }

    pub fn transcript(&self) -> &[ChatMessage] {
        &self.transcript
    }

    /// The confirmed selection, once the dialog is done.
    pub fn selection(&self) -> Option<StrategySet> {
        (self.phase == Phase::Done).then_some(self.pending_selection)
    }

    pub fn token_line(&self) -> Option<&str> {
        self.token_line.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionOutcome {
    Parsed(StrategySet),
    Ambiguous(String),
    Unrelated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionParse {
    pub outcome: SelectionOutcome,
    /// Lowercased tokens, space separated.
    pub echo: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotOption {
    pub label: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BotTurn {
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<BotOption>>,
}

impl BotTurn {
    fn new(text: impl Into<String>, options: Option<Vec<BotOption>>) -> Self {
        let text: String = text.into();
        let text = match text.char_indices().nth(MAX_BOT_CHARS) {
            Some((cut, _)) => text[..cut].to_string(),
            None => text,
        };
        BotTurn { text, options }
    }
}

pub const AMBIGUOUS_POSITION_VS_COUNT: &str = "position vs count";
pub const AMBIGUOUS_WHICH_TWO: &str = "which two";
pub const AMBIGUOUS_EXCLUSION: &str = "exclusion";

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

fn strategy_word(t: &str) -> Option<Strategy> {
    match t {
        "transcript" | "transcripts" | "base" | "basic" => Some(Strategy::Transcript),
        "emotion" | "emotions" | "emotional" | "feeling" | "feelings" => Some(Strategy::Emotion),
        "visual" | "visuals" => Some(Strategy::Visual),
        _ => None,
    }
}

fn position_word(t: &str) -> Option<Strategy> {
    match t {
        "1" | "one" | "first" => Some(Strategy::Transcript),
        "2" | "two" | "second" => Some(Strategy::Emotion),
        "3" | "three" | "third" => Some(Strategy::Visual),
        _ => None,
    }
}

fn is_count_word(t: &str) -> bool {
    matches!(t, "question" | "questions" | "type" | "types" | "kind" | "kinds" | "strategy" | "strategies" | "all" | "both")
}

/// Deterministic reading of a free-text strategy choice.
///
/// Numerals are menu positions, never counts.
pub fn parse_selection(text: &str) -> SelectionParse {
    let toks = tokens(text);
    let echo = toks.join(" ");
    let outcome = classify(&toks);
    SelectionParse { outcome, echo }
}

fn classify(toks: &[String]) -> SelectionOutcome {
    let mut set = StrategySet::EMPTY;
    let mut rest: Vec<&str> = Vec::with_capacity(toks.len());
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i].as_str();
        let next = toks.get(i + 1).map(String::as_str);
        match (t, next) {
            ("all", Some("three" | "3")) => {
                set = StrategySet::ALL;
                i += 2;
                continue;
            }
            ("all", Some("of")) if toks.get(i + 2).is_some_and(|t| t == "them") => {
                set = StrategySet::ALL;
                i += 3;
                continue;
            }
            ("everything", _) => set = StrategySet::ALL,
            // "the second one": the pronoun is not a position
            ("one" | "ones", _) if i > 0 && matches!(toks[i - 1].as_str(), "first" | "second" | "third" | "last" | "both") => {}
            _ => rest.push(t),
        }
        i += 1;
    }
    let has_position = rest.iter().any(|t| position_word(t).is_some());
    if has_position && rest.iter().any(|t| is_count_word(t)) {
        return SelectionOutcome::Ambiguous(AMBIGUOUS_POSITION_VS_COUNT.into());
    }
    if rest.contains(&"both") {
        return SelectionOutcome::Ambiguous(AMBIGUOUS_WHICH_TWO.into());
    }
    for t in &rest {
        if *t == "all" {
            set = StrategySet::ALL;
        } else if let Some(s) = strategy_word(t).or_else(|| position_word(t)) {
            set.insert(s);
        }
    }
    if set.is_empty() {
        return SelectionOutcome::Unrelated;
    }
    if rest.iter().any(|t| matches!(*t, "not" | "no" | "except" | "without" | "but")) {
        return SelectionOutcome::Ambiguous(AMBIGUOUS_EXCLUSION.into());
    }
    SelectionOutcome::Parsed(set)
}

pub fn emit_selection_tokens(selection: StrategySet) -> Result<String, ChatError> {
    if selection.is_empty() {
        return Err(ChatError::EmptySelection);
    }
    let names: Vec<&str> = selection.iter().map(Strategy::as_str).collect();
    Ok(format!("QUESTIONS {} DONE", names.join(" ")))
}

pub fn parse_selection_tokens(line: &str) -> Result<StrategySet, ChatError> {
    if !TOKEN_RE.is_match(line) {
        return Err(ChatError::MalformedTokens(line.to_string()));
    }
    let mut set = StrategySet::EMPTY;
    for name in line.split(' ').skip(1).filter(|w| *w != "DONE") {
        let s: Strategy = name.parse().map_err(|_| ChatError::MalformedTokens(line.to_string()))?;
        if set.contains(s) {
            return Err(ChatError::MalformedTokens(line.to_string()));
        }
        set.insert(s);
    }
    Ok(set)
}

/// Model access for off-topic replies.
pub struct Redirector<'a> {
    pub gateway: &'a Gateway,
    pub settings: &'a LlmSettings,
}

pub const SELECTION_PROMPT: &str = "Which question types do you want? Tap a button, or type a number or a name. \
Numbers pick the option with that number. They do not mean how many.";

const INTRO: &str = "Which question types do you want?\n\
1. Transcript: questions about what is said in the video.\n\
2. Emotion: questions about parts where other learners looked confused.\n\
3. Visual: questions about parts that are hard to follow on screen.\n\
You can pick more than one, for example \"1 and 3\" or \"all three\". \
Numbers pick the option with that number. They do not mean how many.";

const CANNED_REDIRECT: &str = "Let's choose your quiz questions first.";

const REDIRECT_SYSTEM: &str = "You help a deaf or hard-of-hearing learner pick quiz question types before a video. \
The learner wrote something that is not a choice. Reply in at most two short, plain sentences that gently bring them back to choosing. \
Do not list the options and do not choose for them.";

fn selection_options() -> Vec<BotOption> {
    let mut out: Vec<BotOption> = Strategy::ALL
        .iter()
        .map(|s| BotOption { label: format!("{}. {}", s.menu_position(), s.label()), value: s.as_str().to_string() })
        .collect();
    out.push(BotOption { label: "All three".into(), value: "all".into() });
    out
}

fn confirmation_options() -> Vec<BotOption> {
    vec![BotOption { label: "Yes".into(), value: "yes".into() }, BotOption { label: "No".into(), value: "no".into() }]
}

fn checklist(selection: StrategySet) -> String {
    Strategy::ALL
        .iter()
        .map(|s| format!("[{}] {}. {}", if selection.contains(*s) { "x" } else { " " }, s.menu_position(), s.label()))
        .collect::<Vec<_>>()
        .join("\n")
}

fn confirm_turn(selection: StrategySet, lead: &str) -> BotTurn {
    BotTurn::new(format!("{lead}\n{}\nIs this right? Answer Yes or No.", checklist(selection)), Some(confirmation_options()))
}

fn clarification(reason: &str) -> String {
    match reason {
        AMBIGUOUS_POSITION_VS_COUNT => "Did you mean an option number, or how many types? \
Numbers pick options: 1 Transcript, 2 Emotion, 3 Visual. Type \"all\" for all three."
            .into(),
        AMBIGUOUS_WHICH_TWO => "Which two types do you want? For example type \"1 and 2\".".into(),
        AMBIGUOUS_EXCLUSION => "Please name only the types you want, for example \"1 and 3\".".into(),
        other => format!("I am not sure what you meant ({other}). Please type the option numbers or names."),
    }
}

/// At most the first two sentences of `text`.
fn two_sentences(text: &str) -> String {
    text.split_inclusive(['.', '!', '?']).take(2).collect::<String>().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn redirect_text(message: &str, llm: Option<&Redirector<'_>>) -> String {
    let lead = llm
        .and_then(|r| {
            let request = r.settings.request(vec![ChatMessage::system(REDIRECT_SYSTEM), ChatMessage::user(message.trim())]);
            match r.gateway.complete(&request) {
                Ok(reply) => Some(two_sentences(&reply.content)),
                Err(e) => {
                    tracing::warn!(error = %e, "redirect generation failed, using canned text");
                    None
                }
            }
        })
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| CANNED_REDIRECT.to_string());
    format!("{lead}\n{SELECTION_PROMPT}")
}

const FILLER: [&str; 4] = ["please", "thanks", "thank", "you"];

fn confirmation_class(message: &str) -> Option<bool> {
    let toks: Vec<String> = tokens(message).into_iter().filter(|t| !FILLER.contains(&t.as_str())).collect();
    if toks.is_empty() {
        return None;
    }
    let affirmative = |t: &str| matches!(t, "yes" | "y" | "correct" | "right" | "ok" | "okay");
    let negative = |t: &str| matches!(t, "no" | "n" | "wrong");
    if toks.iter().all(|t| affirmative(t)) {
        Some(true)
    } else if toks.iter().all(|t| negative(t)) {
        Some(false)
    } else {
        None
    }
}

/// One dialog step. The input state is left untouched.
pub fn advance(state: &ChatState, user_message: &str, llm: Option<&Redirector<'_>>) -> Result<(ChatState, BotTurn), ChatError> {
    let mut next = state.clone();
    let message = user_message.trim();
    if !message.is_empty() {
        next.transcript.push(ChatMessage::user(message));
    }
    let turn = match state.phase {
        Phase::Done => return Err(ChatError::SessionFinished),
        Phase::Intro if message.is_empty() => {
            next.phase = Phase::AwaitSelection;
            BotTurn::new(INTRO, Some(selection_options()))
        }
        Phase::Intro | Phase::AwaitSelection => {
            next.phase = Phase::AwaitSelection;
            match parse_selection(message).outcome {
                SelectionOutcome::Parsed(set) => {
                    next.pending_selection = set;
                    next.phase = Phase::AwaitConfirmation;
                    confirm_turn(set, "You chose:")
                }
                SelectionOutcome::Ambiguous(reason) => BotTurn::new(clarification(&reason), Some(selection_options())),
                SelectionOutcome::Unrelated => BotTurn::new(redirect_text(message, llm), Some(selection_options())),
            }
        }
        Phase::AwaitConfirmation => match confirmation_class(message) {
            Some(true) => {
                let line = emit_selection_tokens(state.pending_selection)?;
                next.phase = Phase::Done;
                next.token_line = Some(line);
                let names: Vec<&str> = state.pending_selection.iter().map(Strategy::label).collect();
                BotTurn::new(format!("Great. Your questions: {}. You can start the video now.", names.join(", ")), None)
            }
            Some(false) => {
                next.pending_selection = StrategySet::EMPTY;
                next.phase = Phase::AwaitSelection;
                BotTurn::new(format!("Okay, let's choose again.\n{SELECTION_PROMPT}"), Some(selection_options()))
            }
            None => confirm_turn(state.pending_selection, "Please answer Yes or No. Your choice is still:"),
        },
    };
    next.transcript.push(ChatMessage::assistant(turn.text.clone()));
    Ok((next, turn))
}
