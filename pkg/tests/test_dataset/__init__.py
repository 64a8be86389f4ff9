"""
Tests for procedural skies and dataset directories.
"""
