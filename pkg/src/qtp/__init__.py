"""Simulator and exact analysis toolkit for three-pass polarization-rotation protocols."""

__version__ = "0.1.0"
