"""Large-N expansion and finite-N oracles for the beta-ensemble on a closed contour."""

__version__ = "0.1.0"
