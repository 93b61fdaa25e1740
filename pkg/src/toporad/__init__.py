"""Topological and texture features for lesion patches and growth-model point clouds."""

__version__ = "0.1.0"
