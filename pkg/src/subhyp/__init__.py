"""Subhyperbolic geometry, Whitney extension and trace-norm criteria for planar domains."""
