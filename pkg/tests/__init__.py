"""Tests package for diagram_landmarks."""
