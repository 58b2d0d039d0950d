"""Photon counting statistics module."""
