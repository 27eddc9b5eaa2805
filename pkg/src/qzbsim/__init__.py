"""Coupled-mode simulation of quantum Zeno blockade in a chi-2 microdisk."""

from importlib import resources

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Absolute path of a file shipped in ``qzbsim/data``."""
    return str(resources.files("qzbsim") / "data" / name)
