//! Benchmark harness for OpenAI-compatible LLM inference endpoints.
//!
//! A run loads a config, renders task prompts, drives the endpoint under one
//! serving scenario while sampling telemetry, and emits a report with
//! latency, throughput, resource, energy and quality figures.

pub mod backend;
pub mod cli;
pub mod clock;
pub mod config;
pub mod metrics;
pub mod mockserver;
pub mod report;
pub mod task;
pub mod telemetry;
pub mod workload;
