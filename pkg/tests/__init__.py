"""
Test suite for the reni package.
"""
