"""
Tests for the sine MLP and its gradients.
"""
