"""Patterns package.

Exports the dependency-free pattern modules, e.g.:

    from ldrdyn.patterns import observer, strategy

The simulator factory lives in ``ldrdyn.patterns.factory`` and is imported
explicitly because it depends on the simulation modules.
"""

from . import observer  # noqa: F401
from . import strategy  # noqa: F401

__all__ = ["observer", "strategy"]
