"""
Tests for the invariant input transforms.
"""
