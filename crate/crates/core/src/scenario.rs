//! Scenario files (stub).
