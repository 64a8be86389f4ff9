#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""Matching baseline sizes to a latent dimensionality D = 3N."""

from math import ceil, isqrt
from typing import Tuple

from reni.utils.validation import ValidationError

SG_PARAMS_PER_LOBE = 6


def dimension_plan(dimension: int) -> Tuple[int, int]:
    """
    SH order and SG lobe count comparable to a latent of dimensionality D.

    RGB SH of order l has 3 (l + 1)^2 parameters, so l = sqrt(D / 3) - 1 must be
    an integer. SG lobes have 6 parameters each and are rounded up.

    Returns:
        Tuple[int, int]: (l_max, k).

    Raises:
        ValidationError: If D is not of the form 3 (l + 1)^2.
    """
    if dimension < 3 or dimension % 3:
        raise ValidationError(f"D={dimension} is not 3 (l + 1)^2 for any order l")
    root = isqrt(dimension // 3)
    if root * root != dimension // 3:
        raise ValidationError(f"D={dimension} is not 3 (l + 1)^2 for any order l")
    return root - 1, ceil(dimension / SG_PARAMS_PER_LOBE)
