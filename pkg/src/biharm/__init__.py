"""Numerical toolkit for one-dimensional reductions of biharmonic maps."""
