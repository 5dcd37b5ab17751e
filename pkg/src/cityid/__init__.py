"""City identification from soundtracks using semantic urban-sound features."""

__version__ = "0.1.0"
