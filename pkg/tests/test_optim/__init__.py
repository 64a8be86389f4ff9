"""
Tests for Adam and the learning-rate schedule.
"""
