"""Krylov subspace diagonalisation benchmarks: bases, regularised solvers, measurement cost, noise and Monte Carlo LCU estimation."""
