"""PDC entanglement toolkit: Bell tests, loophole maps, two-photon slits and photon statistics."""

__version__ = "1.0.0"
