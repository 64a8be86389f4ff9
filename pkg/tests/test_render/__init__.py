"""
Tests for sphere shading and inverse rendering.
"""
