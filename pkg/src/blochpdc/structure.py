"""Two-layer Bragg unit cell and mode-query types shared by the solvers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .materials import Material, refractive_index


class Polarization(str, enum.Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class BraggStructure:
    """Alternating layers; cell n holds b on [(n-1)L, nL - a] and a on [nL - a, nL].

    ``layers`` optionally records a total layer count (e.g. 30 for 15 periods);
    an odd count's trailing half period only affects reporting.
    """

    material_a: Material
    thickness_a: float
    material_b: Material
    thickness_b: float
    periods: int = 1
    layers: int | None = None

    def __post_init__(self):
        if not (self.thickness_a >= 0 and self.thickness_b >= 0):
            raise ValueError("layer thicknesses must be non-negative")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if int(self.periods) != self.periods or self.periods < 1:
            raise ValueError(f"periods must be a positive integer, got {self.periods}")

    @property
    def period(self) -> float:
        return self.thickness_a + self.thickness_b

    @property
    def length(self) -> float:
        """Interaction length along z used for finite-size factors."""
        return self.periods * self.period

    @property
    def reciprocal(self) -> float:
        return 2 * math.pi / self.period

    def indices(self, wavelength: float) -> tuple[float, float]:
        return (
            refractive_index(self.material_a, wavelength),
            refractive_index(self.material_b, wavelength),
        )

    def with_periods(self, periods: int) -> BraggStructure:
        return BraggStructure(
            self.material_a, self.thickness_a, self.material_b, self.thickness_b, periods
        )

    def scaled(self, factor: float) -> BraggStructure:
        return BraggStructure(
            self.material_a,
            self.thickness_a * factor,
            self.material_b,
            self.thickness_b * factor,
            self.periods,
            self.layers,
        )


@dataclass(frozen=True)
class ModeQuery:
    """Free-space wavelength (nm), in-plane wavevector (rad/nm) and polarization.

    Fields are solved in a frame whose y axis points along ``k_par``; for
    ``k_par == 0`` the frame axis is set by ``azimuth`` (radians from lab x,
    default pi/2 so the solver frame is the lab frame).
    """

    wavelength: float
    k_par: tuple[float, float] = (0.0, 0.0)
    polarization: Polarization = Polarization.TE
    azimuth: float = math.pi / 2

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "polarization", Polarization(self.polarization))
        object.__setattr__(self, "k_par", (float(self.k_par[0]), float(self.k_par[1])))

    @property
    def omega_over_c(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def k_par_mag(self) -> float:
        return math.hypot(*self.k_par)

    @property
    def frame_angle(self) -> float:
        if self.k_par_mag == 0.0:
            return self.azimuth
        return math.atan2(self.k_par[1], self.k_par[0])

    @property
    def frame(self) -> np.ndarray:
        """Columns are the lab-frame images of the solver x, y, z axes."""
        phi = self.frame_angle
        c, s = math.cos(phi), math.sin(phi)
        return np.array([[s, c, 0.0], [-c, s, 0.0], [0.0, 0.0, 1.0]])
