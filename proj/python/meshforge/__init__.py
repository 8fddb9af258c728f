"""Progressive-mesh simplification, vertex trees and view-dependent refinement."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
