"""
Tests for spherical geometry helpers.
"""
