"""Grid-world UAV inspection simulator and a numpy Deep Q-Network trainer."""

__version__ = "0.1.0"
