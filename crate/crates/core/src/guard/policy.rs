//! Exfiltration policy: rule parsing and pure evaluation.
//!
//! One rule per line, `ALLOW|DENY [obj, obj, ...] SIZE=<bytes>`, `#`
//! comments, and an optional `DEFAULT ALLOW|DENY` line. A rule matches an
//! ancestry only when every object pattern in its list matches some
//! ancestor (conjunctive: fused objects can reach a sensitivity level none
//! of them has alone). Evaluation is first-match-wins in file order.

use std::fmt;

use crate::model::SqlObject;
use crate::recorder::graph::AncestrySummary;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("policy syntax error at line {line}: {message}")]
pub struct PolicyError {
    pub line: usize,
    pub message: String,
}

fn syntax(line: usize, message: impl Into<String>) -> PolicyError {
    PolicyError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleAction {
    Allow,
    Deny,
}

impl RuleAction {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleAction::Allow => "ALLOW",
            RuleAction::Deny => "DENY",
        }
    }

    pub fn parse(word: &str) -> Option<Self> {
        match word.to_ascii_uppercase().as_str() {
            "ALLOW" => Some(RuleAction::Allow),
            "DENY" => Some(RuleAction::Deny),
            _ => None,
        }
    }
}

/// `table.column` (exact), `table.*` (any column of the table), or `table`
/// (the table object or any of its columns).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectPattern {
    table: String,
    column: PatternColumn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PatternColumn {
    WholeTable,
    AnyColumn,
    Exact(String),
}

impl ObjectPattern {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim().to_lowercase();
        let (table, column) = match text.split_once('.') {
            None => (text.as_str(), PatternColumn::WholeTable),
            Some((t, "*")) => (t, PatternColumn::AnyColumn),
            Some((t, c)) => {
                validate_ident(c)?;
                (t, PatternColumn::Exact(c.to_string()))
            }
        };
        validate_ident(table)?;
        Ok(ObjectPattern {
            table: table.to_string(),
            column,
        })
    }

    pub fn matches(&self, object: &SqlObject) -> bool {
        if object.table_name() != self.table {
            return false;
        }
        match &self.column {
            PatternColumn::WholeTable => true,
            PatternColumn::AnyColumn => object.column_name().is_some(),
            PatternColumn::Exact(col) => object.column_name() == Some(col.as_str()),
        }
    }
}

impl fmt::Display for ObjectPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            PatternColumn::WholeTable => write!(f, "{}", self.table),
            PatternColumn::AnyColumn => write!(f, "{}.*", self.table),
            PatternColumn::Exact(c) => write!(f, "{}.{}", self.table, c),
        }
    }
}

fn validate_ident(text: &str) -> Result<(), String> {
    SqlObject::table(text)
        .map(|_| ())
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRule {
    pub action: RuleAction,
    pub objects: Vec<ObjectPattern>,
    /// 0 disables the size condition.
    pub size_limit: u64,
}

impl PolicyRule {
    /// Conjunctive match: every pattern finds some ancestor, any flag.
    pub fn matches_ancestry(&self, ancestry: &AncestrySummary) -> bool {
        self.objects.iter().all(|pattern| {
            ancestry
                .ancestors
                .iter()
                .any(|(obj, _)| pattern.matches(obj))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub rules: Vec<PolicyRule>,
    pub default_action: RuleAction,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            rules: Vec::new(),
            default_action: RuleAction::Allow,
        }
    }
}

impl Policy {
    pub fn allow_all() -> Self {
        Policy::default()
    }
}

pub fn parse_policy(text: &str) -> Result<Policy, PolicyError> {
    let mut rules = Vec::new();
    let mut default_action: Option<RuleAction> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = strip_word(line, "DEFAULT") {
            if default_action.is_some() {
                return Err(syntax(line_no, "duplicate DEFAULT line"));
            }
            let action = RuleAction::parse(rest.trim())
                .ok_or_else(|| syntax(line_no, "DEFAULT expects ALLOW or DENY"))?;
            default_action = Some(action);
            continue;
        }
        let (action_word, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| syntax(line_no, "expected ALLOW|DENY [objects] SIZE=<n>"))?;
        let action = RuleAction::parse(action_word)
            .ok_or_else(|| syntax(line_no, format!("unknown action {action_word:?}")))?;
        let rest = rest.trim();
        if !rest.starts_with('[') {
            return Err(syntax(line_no, "expected '[' starting the object list"));
        }
        let close = rest
            .find(']')
            .ok_or_else(|| syntax(line_no, "unterminated object list"))?;
        let list = &rest[1..close];
        let mut objects = Vec::new();
        for item in list.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let pattern = ObjectPattern::parse(item)
                .map_err(|e| syntax(line_no, format!("bad object pattern {item:?}: {e}")))?;
            objects.push(pattern);
        }
        if objects.is_empty() {
            return Err(syntax(line_no, "object list must not be empty"));
        }
        let tail = rest[close + 1..].trim();
        let size_text = tail
            .strip_prefix("SIZE=")
            .ok_or_else(|| syntax(line_no, "expected SIZE=<bytes> after the object list"))?;
        let size_limit = size_text
            .trim()
            .parse()
            .map_err(|_| syntax(line_no, format!("bad SIZE value {size_text:?}")))?;
        rules.push(PolicyRule {
            action,
            objects,
            size_limit,
        });
    }
    Ok(Policy {
        rules,
        default_action: default_action.unwrap_or(RuleAction::Allow),
    })
}

fn strip_word<'a>(line: &'a str, word: &str) -> Option<&'a str> {
    let (head, rest) = line.split_once(char::is_whitespace)?;
    head.eq_ignore_ascii_case(word).then_some(rest)
}

/// Why a verdict came out the way it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchSource {
    Rule(usize),
    Default,
    Taint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub decision: RuleAction,
    pub matched: MatchSource,
    pub ancestry: AncestrySummary,
    pub reason: String,
}

impl Verdict {
    pub fn allowed(&self) -> bool {
        self.decision == RuleAction::Allow
    }
}

/// Pure policy evaluation over an ancestry snapshot.
///
/// Tainted units (a parse failure happened inside them) are denied before
/// any rule applies. A DENY rule with a positive size limit fires only when
/// the unit's accumulated response bytes exceed it; otherwise the rule is
/// skipped. ALLOW rules ignore the size field.
pub fn evaluate(policy: &Policy, ancestry: &AncestrySummary) -> Verdict {
    if ancestry.tainted {
        return Verdict {
            decision: RuleAction::Deny,
            matched: MatchSource::Taint,
            ancestry: ancestry.clone(),
            reason: "unit tainted by parse failure".into(),
        };
    }
    for (index, rule) in policy.rules.iter().enumerate() {
        if !rule.matches_ancestry(ancestry) {
            continue;
        }
        match rule.action {
            RuleAction::Allow => {
                return Verdict {
                    decision: RuleAction::Allow,
                    matched: MatchSource::Rule(index),
                    ancestry: ancestry.clone(),
                    reason: format!("rule {index} whitelists the ancestry"),
                };
            }
            RuleAction::Deny => {
                if rule.size_limit == 0 {
                    return Verdict {
                        decision: RuleAction::Deny,
                        matched: MatchSource::Rule(index),
                        ancestry: ancestry.clone(),
                        reason: format!("rule {index} blacklists the ancestry"),
                    };
                }
                if ancestry.impact_bytes > rule.size_limit {
                    return Verdict {
                        decision: RuleAction::Deny,
                        matched: MatchSource::Rule(index),
                        ancestry: ancestry.clone(),
                        reason: format!(
                            "rule {index} size exceeded: {} > {} bytes",
                            ancestry.impact_bytes, rule.size_limit
                        ),
                    };
                }
                // Size-conditional deny below its threshold: skip.
            }
        }
    }
    Verdict {
        decision: policy.default_action,
        matched: MatchSource::Default,
        ancestry: ancestry.clone(),
        reason: format!("default {}", policy.default_action.as_str()),
    }
}
