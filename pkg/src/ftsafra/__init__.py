"""Fault-tolerant Safra termination detection workbench."""

from .core import BasicMessage, ClassicToken, ContractViolation, FtToken, HandlerOutcome, furthest
from .digest import BACKEND as DIGEST_BACKEND
from .ft import Variant
from .sim import GlobalState, Model, Transition, World

__version__ = "0.1.0"

__all__ = [
    "BasicMessage",
    "ClassicToken",
    "ContractViolation",
    "DIGEST_BACKEND",
    "FtToken",
    "GlobalState",
    "HandlerOutcome",
    "Model",
    "Transition",
    "Variant",
    "World",
    "furthest",
]
