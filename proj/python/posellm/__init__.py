"""Language-guided keypoint localization, desk scale."""

from ._posellm import *  # noqa: F401,F403
from ._posellm import __version__  # noqa: F401
