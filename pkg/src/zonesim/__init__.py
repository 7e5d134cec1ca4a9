"""Multizone building thermal, airflow and moisture simulation."""

__version__ = "0.1.0"
