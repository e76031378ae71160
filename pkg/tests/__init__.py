"""Tests for the vhetnet package."""
