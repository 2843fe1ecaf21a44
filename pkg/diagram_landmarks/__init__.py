"""
Landmark embeddings of persistence diagrams with certified classification.
"""

__version__ = "0.1.0"
