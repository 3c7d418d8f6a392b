//! Network guard: the egress proxy that evaluates exfiltration policy
//! against each response's provenance ancestry and drives verdict-coupled
//! garbage collection.

pub mod policy;
pub mod server;

pub use policy::{
    evaluate, parse_policy, MatchSource, ObjectPattern, Policy, PolicyError, PolicyRule,
    RuleAction, Verdict,
};
pub use server::{blocked_response, serve, GuardConfig, GuardServer, GuardStats, BLOCKED_BODY};
