from __future__ import annotations

import numpy as np


class ThickscapeError(Exception):
    """Base class for all errors raised by thickscape."""


class GeometryDegenerateError(ThickscapeError):
    """A curve or surface fails its regularity requirements at the queried point."""


class RayMissError(ThickscapeError):
    """A ray does not cross the target boundary transversally."""

    def __init__(self, message: str, origin=None, direction=None, tangential: bool = False) -> None:
        super().__init__(message)
        self.origin = None if origin is None else np.asarray(origin, dtype=float)
        self.direction = None if direction is None else np.asarray(direction, dtype=float)
        self.tangential = tangential


class OCViolationError(RayMissError):
    """An inward (or outward) normal ray fails to reach the other boundary."""

    def __init__(self, message: str, point=None, normal=None, tangential: bool = False) -> None:
        super().__init__(message, origin=point, direction=normal, tangential=tangential)

    @property
    def point(self):
        return self.origin

    @property
    def normal(self):
        return self.direction


class DegenerateEquilibriumError(ThickscapeError):
    """The Hessian at an equilibrium is singular where an inverse is required."""


class ScenarioParseError(ThickscapeError):
    """A scenario document is malformed; `path` names the offending JSON location."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


class UsageError(ThickscapeError):
    """Invalid command-line or command parameters."""
