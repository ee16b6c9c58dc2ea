"""Statistical model checking of MDPs with hash-defined schedulers and smart sampling."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import SmcError
from .model import Mdp, load_model, parse_model
from .prop import parse_property, resolve_property
from .scheduler import HISTORY, MEMORYLESS, MODULUS, simulate
from .stats import ChernoffSpec, SprtSpec
from .engine import MdpSimulator
from .algorithms import (
    estimate_multiple,
    hypothesis_multiple,
    smart_estimate,
    smart_hypothesis,
    synthetic_smart_estimate,
)
from .synthetic import SyntheticPopulation, SyntheticSimulator

__all__ = [
    "__version__",
    "SmcError",
    "Mdp",
    "load_model",
    "parse_model",
    "parse_property",
    "resolve_property",
    "HISTORY",
    "MEMORYLESS",
    "MODULUS",
    "simulate",
    "ChernoffSpec",
    "SprtSpec",
    "MdpSimulator",
    "estimate_multiple",
    "hypothesis_multiple",
    "smart_estimate",
    "smart_hypothesis",
    "synthetic_smart_estimate",
    "SyntheticPopulation",
    "SyntheticSimulator",
]
