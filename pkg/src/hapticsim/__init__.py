"""Physics-based haptic rendering pipeline for string-drive fingertip actuators."""

__version__ = "0.1.0"
