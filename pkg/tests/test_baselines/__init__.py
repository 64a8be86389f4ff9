"""
Tests for the SH and SG baselines.
"""
