"""Multideviation tools for Bell scenarios.

``algebra`` holds exact scalars and product sets, ``multidev`` the
multideviation transform, ``contexts`` event spaces and Bell inequalities,
``pioneer`` the pioneer-set construction, ``tbic`` the exact tightness
checks and ``quantum`` the even-correlation state violations.
"""

from . import algebra, contexts, multidev, pioneer, quantum, tbic

__version__ = "0.1.0"

__all__ = ["algebra", "multidev", "contexts", "pioneer", "tbic", "quantum", "__version__"]
