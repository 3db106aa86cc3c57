//! Learned terrain-aware kinodynamic model (placeholder).
