"""Exterior-calculus engine and verification harness for closed non-degenerate leafwise 2-forms on a foliation of S^5 with a Kodaira-Thurston compact leaf."""

__version__ = "0.1.0"
