"""
Tests for latent fitting, metrics and alignment.
"""
