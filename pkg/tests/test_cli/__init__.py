"""
Command-line integration tests.
"""
