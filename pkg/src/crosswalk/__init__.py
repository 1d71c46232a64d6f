"""crosswalk: vehicle-pedestrian crossing simulation and SVO-shaped RL."""

__version__ = "0.1.0"
