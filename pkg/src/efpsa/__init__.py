"""Design-evaluation toolkit for electrode-programmed spin arrays:
spin dynamics, electrostatic field models, voltage programming, thermal
budgets, the optical interface and repeater-rate models."""

from .device import (
    DeviceGeometry,
    DeviceModel,
    FrameTransform,
    PhysicalConstants,
    load_device,
    with_overrides,
)
from .errors import NumericalError, ValidationError

__all__ = [
    "DeviceGeometry",
    "DeviceModel",
    "FrameTransform",
    "NumericalError",
    "PhysicalConstants",
    "ValidationError",
    "load_device",
    "with_overrides",
]
