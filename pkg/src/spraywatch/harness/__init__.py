"""Experiment drivers: scenario builders, sweeps, calibration, metrics."""
