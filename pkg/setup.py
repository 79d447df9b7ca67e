"""Setup script for structured-light-sdf

Kept for tools that still call setup.py directly. The package configuration
lives in pyproject.toml.
"""

from setuptools import setup

setup()
