"""Semi-automated prototype pollution gadget hunting for scripting runtimes."""

__version__ = "0.1.0"
