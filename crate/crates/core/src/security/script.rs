//! Adversary script files.
//!
//! Line-oriented; `#` starts a comment. Directives:
//!
//! ```text
//! name <label>
//! corrupt <role>...                # A, B or C
//! pair <prompt> => <completion> [sensitive]
//! query <prompt>
//! inject <prompt> => <completion> [sensitive]   # needs A corrupted
//! modify-response <text>                        # needs B corrupted
//! request <prompt>                              # needs B corrupted
//! observe <role>                                # needs that role corrupted
//! attack reverse <trials>
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SecurityError;
use crate::mini_giant::TrainingPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    /// Data provider.
    A,
    /// Requestor.
    B,
    /// Third-party server.
    C,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::A => "A",
            Role::B => "B",
            Role::C => "C",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Role::A),
            "B" | "b" => Ok(Role::B),
            "C" | "c" => Ok(Role::C),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Corrupted A adds a pair of its choosing to the upload.
    Inject(TrainingPair),
    /// Corrupted B replaces the next response with this text.
    ModifyResponse(String),
    /// Corrupted B issues an extra query.
    Request(String),
    /// Reveal a corrupted role's view to the environment.
    Observe(Role),
}

impl Action {
    /// Role that must be corrupted for the action to be legal.
    pub fn required_role(&self) -> Role {
        match self {
            Action::Inject(_) => Role::A,
            Action::ModifyResponse(_) | Action::Request(_) => Role::B,
            Action::Observe(r) => *r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AdversaryScript {
    pub name: String,
    pub corruptions: BTreeSet<Role>,
    pub actions: Vec<Action>,
}

impl AdversaryScript {
    pub fn honest(name: &str) -> Self {
        AdversaryScript { name: name.into(), ..Default::default() }
    }

    pub fn is_corrupted(&self, r: Role) -> bool {
        self.corruptions.contains(&r)
    }

    pub fn validate(&self) -> Result<(), SecurityError> {
        for (i, a) in self.actions.iter().enumerate() {
            let role = a.required_role();
            if !self.is_corrupted(role) {
                return Err(SecurityError::Script {
                    line: 0,
                    message: format!("action {} needs {role} corrupted", i + 1),
                });
            }
        }
        Ok(())
    }
}

/// A parsed script file: the adversary plus the session inputs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScriptFile {
    pub script: AdversaryScript,
    pub pairs: Vec<TrainingPair>,
    pub queries: Vec<String>,
    pub reverse_trials: Option<usize>,
}

fn parse_pair(rest: &str) -> Result<TrainingPair, String> {
    let (prompt, completion) = rest.split_once("=>").ok_or("expected `<prompt> => <completion>`")?;
    let completion = completion.trim();
    let (completion, sensitive) = match completion.strip_suffix("[sensitive]") {
        Some(c) => (c.trim(), true),
        None => (completion, false),
    };
    let prompt = prompt.trim();
    if prompt.is_empty() || completion.is_empty() {
        return Err("empty prompt or completion".into());
    }
    Ok(TrainingPair { prompt: prompt.into(), completion: completion.into(), sensitive })
}

pub fn parse_script(text: &str) -> Result<ScriptFile, SecurityError> {
    let mut file = ScriptFile::default();
    let mut action_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| SecurityError::Script { line: line_no, message };
        let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
        if line.is_empty() {
            continue;
        }
        let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let need = |what: &str| if rest.is_empty() { Err(err(format!("{word} needs {what}"))) } else { Ok(()) };
        match word {
            "name" => {
                need("a label")?;
                file.script.name = rest.into();
            }
            "corrupt" => {
                need("at least one role")?;
                for r in rest.split_whitespace() {
                    file.script.corruptions.insert(r.parse().map_err(err)?);
                }
            }
            "pair" => file.pairs.push(parse_pair(rest).map_err(err)?),
            "query" => {
                need("a prompt")?;
                file.queries.push(rest.into());
            }
            "inject" => {
                file.script.actions.push(Action::Inject(parse_pair(rest).map_err(err)?));
                action_lines.push(line_no);
            }
            "modify-response" => {
                need("replacement text")?;
                file.script.actions.push(Action::ModifyResponse(rest.into()));
                action_lines.push(line_no);
            }
            "request" => {
                need("a prompt")?;
                file.script.actions.push(Action::Request(rest.into()));
                action_lines.push(line_no);
            }
            "observe" => {
                file.script.actions.push(Action::Observe(rest.parse().map_err(err)?));
                action_lines.push(line_no);
            }
            "attack" => {
                let n = rest
                    .strip_prefix("reverse")
                    .map(str::trim)
                    .ok_or_else(|| err("expected `attack reverse <trials>`".into()))?;
                let n: usize = n.parse().map_err(|_| err(format!("invalid trial count {n:?}")))?;
                if n == 0 {
                    return Err(err("trial count must be >= 1".into()));
                }
                file.reverse_trials = Some(n);
            }
            other => return Err(err(format!("unknown directive {other:?}"))),
        }
    }
    for (a, line) in file.script.actions.iter().zip(action_lines) {
        let role = a.required_role();
        if !file.script.is_corrupted(role) {
            return Err(SecurityError::Script { line, message: format!("action needs {role} corrupted") });
        }
    }
    if file.script.name.is_empty() {
        file.script.name = "unnamed".into();
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_script() {
        let text = "\
# corrupted B
name corrupt-b
corrupt B
pair alice.brightness => 80% [sensitive]
pair lamp model => lx-200
query alice.brightness
modify-response 90%
request lamp model
attack reverse 500
";
        let f = parse_script(text).unwrap();
        assert_eq!(f.script.name, "corrupt-b");
        assert!(f.script.is_corrupted(Role::B));
        assert_eq!(f.pairs[0], TrainingPair::sensitive("alice.brightness", "80%"));
        assert!(!f.pairs[1].sensitive);
        assert_eq!(f.queries, ["alice.brightness"]);
        assert_eq!(f.script.actions, [Action::ModifyResponse("90%".into()), Action::Request("lamp model".into())]);
        assert_eq!(f.reverse_trials, Some(500));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("frobnicate\n", 1),
            ("\ncorrupt D\n", 2),
            ("pair no arrow\n", 1),
            ("corrupt A\n\nmodify-response x\n", 3),
            ("attack reverse 0\n", 1),
            ("attack forward 3\n", 1),
        ];
        for (text, line) in cases {
            match parse_script(text) {
                Err(SecurityError::Script { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn observe_needs_matching_corruption() {
        assert!(parse_script("corrupt C\nobserve C\n").is_ok());
        assert!(parse_script("corrupt B\nobserve C\n").is_err());
    }
}
