"""Analysis toolkit for coded multichannel collaboration logs."""

__version__ = "0.1.0"
