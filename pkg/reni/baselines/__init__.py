"""
Baseline lighting representations of matched dimensionality: RGB spherical
harmonics and spherical Gaussians.
"""

from typing import Any, Dict, Union

from reni.baselines.plan import dimension_plan
from reni.baselines.sg import SGLobes, sg_eval, sg_fit
from reni.baselines.sh import SHCoeffs, sh_basis, sh_eval, sh_fit, sh_fit_values
from reni.utils.validation import ValidationError


def baseline_from_dict(data: Dict[str, Any]) -> Union[SHCoeffs, SGLobes]:
    """Rebuild a serialized SHCoeffs or SGLobes from its JSON form."""
    kind = data.get("type")
    if kind == "sh":
        return SHCoeffs.from_dict(data)
    if kind == "sg":
        return SGLobes.from_dict(data)
    raise ValidationError(f"Unknown baseline type {kind!r}")


__all__ = [
    "SHCoeffs",
    "SGLobes",
    "baseline_from_dict",
    "dimension_plan",
    "sg_eval",
    "sg_fit",
    "sh_basis",
    "sh_eval",
    "sh_fit",
    "sh_fit_values",
]
