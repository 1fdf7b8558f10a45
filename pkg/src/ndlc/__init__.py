"""Labelled sequent calculi for non-distributive modal logic over formal contexts."""

__version__ = "0.1.0"
