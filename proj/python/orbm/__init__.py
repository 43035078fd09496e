"""Reflected Brownian motion in alpha-fair cones."""

from ._orbm import *  # noqa: F401,F403
from ._orbm import __version__  # noqa: F401
