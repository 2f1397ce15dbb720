"""Real-vector-space quantum theory with a universal rebit coupled to a random environment."""

__version__ = "0.1.0"
