"""Battery-depletion attack simulator for secured IEEE 802.15.4 networks."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
