"""Expression-tree traversals, MWP datasets, PCA embedding init and a
shared-encoder / multi-decoder transformer trained with manual backprop."""

from ._mmtm import *  # noqa: F401,F403
from ._mmtm import MmtmError, __doc__ as _doc  # noqa: F401

__version__ = "0.1.0"
