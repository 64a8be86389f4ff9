"""
Tests for variational auto-decoder training.
"""
