"""Spectra of Sturm-Liouville operators with distributional potentials."""
__version__ = "0.1.0"
