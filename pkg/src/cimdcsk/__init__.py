"""Code-index-modulated DCSK with ambient backscatter: simulator and BER theory."""

from . import channel, chaos, harness, modem, theory, walsh
from .errors import InvalidParameterError, NumericalFailureError
from .modem import SrParams, SystemParams

__all__ = [
    "InvalidParameterError",
    "NumericalFailureError",
    "SrParams",
    "SystemParams",
    "channel",
    "chaos",
    "harness",
    "modem",
    "theory",
    "walsh",
]
