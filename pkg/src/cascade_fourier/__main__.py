#!/usr/bin/env python3
"""Main entry point for cascade-fourier."""

from cascade_fourier.cli import app

if __name__ == "__main__":
    app()
