"""
Tests for HDR file I/O and log normalization.
"""
