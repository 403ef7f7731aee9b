"""Goal exploration with learned goal spaces on simulated arm environments."""
__version__ = "0.1.0"
