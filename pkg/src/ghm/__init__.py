"""Gear-quality classification from two-channel honing vibration spectrograms."""

__version__ = "0.1.0"
