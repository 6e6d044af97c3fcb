"""Audio-visual egocentric activity recognition with adaptive multi-kernel fusion."""

__version__ = "0.1.0"
