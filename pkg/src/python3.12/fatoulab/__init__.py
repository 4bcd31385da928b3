#!/usr/bin/env python3
# -*- coding: utf-8; mode: python -*-
"""Random local complex dynamics: cocycles, germs and their examples."""

import loguru as LG

from .core import *  # noqa: F403
from .core import __all__ as __all__

# fatoulab.cli enables it
LG.logger.disable('fatoulab')
