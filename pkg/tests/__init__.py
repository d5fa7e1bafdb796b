"""
Tests for swarmcast.
"""
