"""Container-based SDN network emulator."""

__version__ = "0.1.0"
