//! Smooth MPPI controller (placeholder).
