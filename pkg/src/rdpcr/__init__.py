"""Rate-distortion-perception tradeoffs under a common-randomness budget."""

__version__ = "0.1.0"

from .dist import (  # noqa: E402
    Channel,
    Coupling,
    Distribution,
    DistortionMeasure,
    TripleJoint,
    expected_distortion,
    maximal_coupling,
    mutual_information,
    product_extension,
    tv_distance,
)
