"""Sensorless cable-tension control for a tendon-driven shoulder exosuit."""

__version__ = "0.1.0"
