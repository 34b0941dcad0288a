"""Video summarization learned from unpaired raw videos and summaries."""

__version__ = "0.1.0"
