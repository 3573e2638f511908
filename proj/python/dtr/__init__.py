# Copyright 2026 The dtr Authors
# SPDX-License-Identifier: Apache-2.0
"""Multi-field deep text ranking."""

from ._dtr import *  # noqa: F401,F403
from ._dtr import __doc__  # noqa: F401

__version__ = "0.1.0"
