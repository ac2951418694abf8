"""Tests for the ldrdyn package."""
