"""Simulation laboratory for random two-sided matching markets."""
