"""Mandelbrot cascades on b-adic cubes and planar curves, and the Fourier decay of their measures."""

__version__ = "0.1.0"
