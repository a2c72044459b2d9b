"""Classical simulator and identity checks for gauge fields of volume-preserving diffeomorphisms of an inner Minkowski space."""

__version__ = "0.1.0"
