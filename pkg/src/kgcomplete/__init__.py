"""Loosely coupled knowledge graph completion: embeddings plus rule inference."""

__version__ = "0.1.0"
