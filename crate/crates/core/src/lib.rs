//! Planner-centric multi-agent automation at desk scale.
//!
//! A Planner decides the plan and next subgoal, a Memory Manager supplies
//! retrieved experience and gates its refresh, and an Actor grounds each
//! subgoal into one executable action inside a deterministic simulated
//! environment. Episodes are scored by a rubric judge with vote
//! aggregation, and the Planner alone is trained with group-relative
//! policy optimization while the other roles stay frozen.

pub mod agent;
pub mod client;
pub mod env;
pub mod fixtures;
pub mod grpo;
pub mod judge;
pub mod memory;
pub mod pipeline;
pub mod port;
pub mod scaling;
pub mod seed;
