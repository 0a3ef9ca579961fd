"""Stark-Heegner points on elliptic curves over Q attached to definite quaternion data."""

__version__ = "0.1.0"
