"""Polarization, Bell-test, loophole and double-slit optics module."""
