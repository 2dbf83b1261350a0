"""Presence-only species distribution modeling toolkit.

Generates pseudo-absence points for presence-only survey data (random
sampling with an exclusion buffer, environmental profiling, background
extent limitation, plain background sampling), assembles windowed
environmental features, trains four classifier families and compares
them with aligned-rank statistics.
"""

__version__ = "0.1.0"
