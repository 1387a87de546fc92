"""Event-based spike detection pipeline.

Thin wrapper around the compiled ``_evspike`` extension: synthetic
recording generation, delta-modulator encoding, event-based and classical
spike detectors, and evaluation utilities.
"""

from ._evspike import *  # noqa: F401,F403

__version__ = "0.1.0"
