"""Multimodal (text + audio) speech classification for mental-disorder prediction."""

__version__ = "0.1.0"
