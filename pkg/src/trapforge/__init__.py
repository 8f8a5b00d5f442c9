"""trapforge: design and verification of surface-electrode ion traps
with integrated microwave conductors."""

__version__ = "0.1.0"
