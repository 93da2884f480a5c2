"""Data-driven inference on transportation networks."""

from ._core import *  # noqa: F401,F403
from ._core import Error, __doc__  # noqa: F401

__version__ = "0.1.0"
