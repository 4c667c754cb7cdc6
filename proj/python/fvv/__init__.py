"""Free-viewpoint video tiles."""

from ._fvv import *  # noqa: F401,F403
from ._fvv import __doc__  # noqa: F401
