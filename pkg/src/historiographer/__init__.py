"""Simulation toolkit for search-history reconstruction through autocomplete
suggestions, plus HTTP-trace session-exposure auditing."""

__version__ = "0.1.0"
