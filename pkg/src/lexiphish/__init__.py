"""Lexical phishing-URL detection with a small from-scratch 1D CNN."""

__version__ = "0.1.0"
