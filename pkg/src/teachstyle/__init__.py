"""Dimensional teaching-style modelling in the pleasure-arousal plane."""

from .core import AdjectiveEntry, AdjectiveLexicon, PACoordinate, centroid, default_lexicon, nearest_adjectives

__all__ = [
    "AdjectiveEntry",
    "AdjectiveLexicon",
    "PACoordinate",
    "centroid",
    "default_lexicon",
    "nearest_adjectives",
]
__version__ = "0.1.0"
