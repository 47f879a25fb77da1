"""Information-theoretic analysis of hand/object pose tracks from manipulation demonstrations."""

__version__ = "0.1.0"
