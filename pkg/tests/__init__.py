"""
Forward Search Test Suite

Tests for the forward-search project including:
- Reference distributions and truncated moments
- The Forward Search and its embeddings
- Asymptotic variances and bands
- The Monte Carlo engine
- Configuration, data input/output and the command line
"""

__version__ = '1.0.0'
