from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, List, Literal, Optional, Tuple

import numpy as np

from .errors import ArgumentError, ConfigurationError

# Normalized plasma units: q_e = -1, m_e = 1, eps0 = 1.
ELECTRON_CHARGE = -1.0
ELECTRON_MASS = 1.0
# Open interval of NUFFT tolerances the Gaussian gridding supports.
NUFFT_TOLERANCE_RANGE = (1e-15, 1e-1)

Vector3 = Tuple[float, float, float]
Matrix3 = Tuple[Vector3, Vector3, Vector3]

_ZERO3: Vector3 = (0.0, 0.0, 0.0)
_ZERO33: Matrix3 = (_ZERO3, _ZERO3, _ZERO3)


def wrap_periodic(x: np.ndarray, length: float) -> np.ndarray:
    """Map coordinates into [0, length)."""
    if not length > 0:
        raise ArgumentError(f"domain length must be positive, got {length}")
    wrapped = np.mod(np.asarray(x, dtype=np.float64), length)
    # np.mod of a tiny negative number rounds up to exactly `length`.
    return np.where(wrapped >= length, wrapped - length, wrapped)


def minimum_image(d: np.ndarray, length: float) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    return d - length * np.round(d / length)


@dataclass(frozen=True)
class Domain:
    """Periodic cube [0, L)^3."""

    length: float

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ArgumentError(f"domain length must be positive, got {self.length}")

    def wrap(self, x: np.ndarray) -> np.ndarray:
        return wrap_periodic(x, self.length)

    def displacement(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return minimum_image(np.asarray(a) - np.asarray(b), self.length)


@dataclass(eq=False)
class PhaseSpaceState:
    """Positions, velocities and weights of all macro-particles.

    The weight array is frozen (read-only) and shared between states derived
    from one another, so a propagation can never alter it.
    """

    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    domain: Domain
    q_over_m: float = ELECTRON_CHARGE / ELECTRON_MASS
    charge: float = ELECTRON_CHARGE

    def __post_init__(self) -> None:
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.v = np.ascontiguousarray(self.v, dtype=np.float64)
        if self.w.flags.writeable or self.w.dtype != np.float64:
            self.w = np.array(self.w, dtype=np.float64)
            self.w.setflags(write=False)
        if self.x.ndim != 2 or self.x.shape[1] != 3:
            raise ArgumentError(f"positions must have shape (N_p, 3), got {self.x.shape}")
        if self.v.shape != self.x.shape:
            raise ArgumentError(
                f"velocities {self.v.shape} and positions {self.x.shape} differ in shape"
            )
        if self.w.shape != (self.x.shape[0],):
            raise ArgumentError(f"weights must have shape ({self.x.shape[0]},), got {self.w.shape}")
        if self.x.shape[0] < 1:
            raise ArgumentError("a phase-space state needs at least one particle")

    @property
    def n_particles(self) -> int:
        return self.x.shape[0]

    @property
    def mass(self) -> float:
        return self.charge / self.q_over_m

    @property
    def length(self) -> float:
        return self.domain.length

    def with_phase(self, x: np.ndarray, v: np.ndarray) -> "PhaseSpaceState":
        return replace(self, x=x, v=v)

    def copy(self) -> "PhaseSpaceState":
        return replace(self, x=self.x.copy(), v=self.v.copy())

    def permuted(self, order: np.ndarray) -> "PhaseSpaceState":
        order = np.asarray(order)
        return replace(self, x=self.x[order], v=self.v[order], w=self.w[order])


def total_charge(state: PhaseSpaceState, q_e: Optional[float] = None) -> float:
    charge = state.charge if q_e is None else q_e
    return float(charge * np.sum(state.w))


class SpectrumKind(str, enum.Enum):
    DENSITY = "density"
    FIELD = "field"


@dataclass(eq=False)
class FieldSpectrum:
    """Fourier coefficients on the symmetric mode set.

    ``coefficients[..., i, j, l]`` holds mode (i - N/2, j - N/2, l - N/2); a
    field spectrum carries a leading component axis of length 3.
    ``normalization`` is ``"domain"`` for the 1/L^3 particle convention and
    ``"unitary"`` for the 1/sqrt(N^3) grid convention.
    """

    coefficients: np.ndarray
    modes: int
    length: float
    kind: SpectrumKind = SpectrumKind.DENSITY
    normalization: Literal["domain", "unitary"] = "domain"

    def __post_init__(self) -> None:
        if self.modes < 2 or self.modes % 2:
            raise ArgumentError(f"mode count per dimension must be even, got {self.modes}")
        expected = (self.modes,) * 3
        if self.kind is SpectrumKind.FIELD:
            expected = (3,) + expected
        if self.coefficients.shape != expected:
            raise ArgumentError(
                f"{self.kind.value} spectrum must have shape {expected}, got {self.coefficients.shape}"
            )

    def coefficient(self, n: Tuple[int, int, int]) -> complex:
        half = self.modes // 2
        index = tuple(int(c) + half for c in n)
        return complex(self.coefficients[(...,) + index])

    def hermitian_defect(self) -> float:
        """Largest |c(-k) - conj(c(k))| over modes whose mirror is in the set."""
        inner = self.coefficients[..., 1:, 1:, 1:]
        mirrored = inner[..., ::-1, ::-1, ::-1]
        return float(np.max(np.abs(mirrored - np.conj(inner)), initial=0.0))

    def rows(self) -> Iterator[Tuple[int, int, int, float, float]]:
        if self.kind is not SpectrumKind.DENSITY:
            raise ArgumentError("only scalar spectra have a row form")
        half = self.modes // 2
        for flat, value in enumerate(self.coefficients.ravel()):
            i, j, l = np.unravel_index(flat, self.coefficients.shape)
            yield int(i) - half, int(j) - half, int(l) - half, float(value.real), float(value.imag)


@dataclass(eq=False)
class GridField:
    """Scalar (N, N, N) or vector (3, N, N, N) field on the uniform periodic mesh."""

    values: np.ndarray
    length: float

    @property
    def points(self) -> int:
        return self.values.shape[-1]

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    def integral(self) -> np.ndarray:
        return np.sum(self.values, axis=(-3, -2, -1)) * self.cell_volume


class Scheme(str, enum.Enum):
    PIF_NUDFT = "pif_nudft"
    PIF_NUFFT = "pif_nufft"
    PIC = "pic"

    @property
    def is_spectral(self) -> bool:
        return self is not Scheme.PIC


@dataclass(frozen=True, eq=False)
class ExternalFields:
    """Constant magnetic field plus an affine electric field E = A x + b."""

    magnetic: Vector3 = _ZERO3
    electric_matrix: Matrix3 = _ZERO33
    electric_offset: Vector3 = _ZERO3

    @cached_property
    def magnetic_array(self) -> np.ndarray:
        return np.asarray(self.magnetic, dtype=np.float64)

    @cached_property
    def matrix_array(self) -> np.ndarray:
        return np.asarray(self.electric_matrix, dtype=np.float64)

    @cached_property
    def offset_array(self) -> np.ndarray:
        return np.asarray(self.electric_offset, dtype=np.float64)

    @property
    def has_magnetic(self) -> bool:
        return bool(np.any(self.magnetic_array))

    @property
    def has_electric(self) -> bool:
        return bool(np.any(self.matrix_array) or np.any(self.offset_array))

    def electric(self, x: np.ndarray) -> np.ndarray:
        return x @ self.matrix_array.T + self.offset_array

    def potential(self, x: np.ndarray) -> np.ndarray:
        """phi with E = -grad(phi); the electric matrix must be symmetric."""
        quadratic = np.einsum("ij,jk,ik->i", x, self.matrix_array, x)
        return -0.5 * quadratic - x @ self.offset_array

    @classmethod
    def penning(cls, length: float, magnetic_z: float = 5.0) -> "ExternalFields":
        """Uniform axial B and the quadrupole E centred in the box."""
        diag = (-15.0 / length, -15.0 / length, 30.0 / length)
        matrix = (
            (diag[0], 0.0, 0.0),
            (0.0, diag[1], 0.0),
            (0.0, 0.0, diag[2]),
        )
        offset = tuple(-d * length / 2.0 for d in diag)
        return cls(magnetic=(0.0, 0.0, magnetic_z), electric_matrix=matrix, electric_offset=offset)

    def __hash__(self) -> int:
        return hash((self.magnetic, self.electric_matrix, self.electric_offset))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExternalFields):
            return NotImplemented
        return (
            self.magnetic == other.magnetic
            and self.electric_matrix == other.electric_matrix
            and self.electric_offset == other.electric_offset
        )


@dataclass(frozen=True)
class PropagatorConfig:
    """Everything that defines one propagator (F or G)."""

    scheme: Scheme
    modes: int
    dt: float
    spline_order: int = 1
    tolerance: Optional[float] = None
    external_fields: Optional[ExternalFields] = None

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ConfigurationError(f"time step must be positive, got {self.dt}", ["dt"])
        if self.modes < 2 or self.modes % 2:
            raise ConfigurationError(f"modes per dimension must be even, got {self.modes}", ["modes"])
        if self.spline_order < 1:
            raise ConfigurationError(
                f"spline order must be at least 1, got {self.spline_order}", ["spline_order"]
            )
        if self.scheme is Scheme.PIF_NUFFT:
            low, high = NUFFT_TOLERANCE_RANGE
            if self.tolerance is None or not low < self.tolerance < high:
                raise ConfigurationError(
                    f"NUFFT scheme needs a tolerance in ({low:g}, {high:g}), got {self.tolerance}",
                    ["tolerance"],
                )
        if self.scheme is Scheme.PIC and self.modes & (self.modes - 1):
            raise ConfigurationError(
                f"PIC grid size must be a power of two, got {self.modes}", ["modes"]
            )

    @property
    def effective_tolerance(self) -> float:
        """0 for the exact transform, the requested tolerance otherwise."""
        if self.scheme is Scheme.PIF_NUFFT:
            assert self.tolerance is not None
            return self.tolerance
        return 0.0

    @property
    def label(self) -> str:
        if self.scheme is Scheme.PIF_NUFFT:
            return f"pif_nufft(eps={self.tolerance:g},N={self.modes},dt={self.dt:g})"
        return f"{self.scheme.value}(N={self.modes},dt={self.dt:g})"

    def with_dt(self, dt: float) -> "PropagatorConfig":
        return replace(self, dt=dt)

    def steps_between(self, t0: float, t1: float) -> int:
        """Integer number of steps covering [t0, t1]."""
        ratio = (t1 - t0) / self.dt
        steps = int(round(ratio))
        if steps < 0 or abs(ratio - steps) > 1e-9 * max(1.0, abs(ratio)):
            raise ConfigurationError(
                f"interval [{t0}, {t1}] is not an integer number of steps of {self.dt}",
                ["dt"],
            )
        return steps


@dataclass
class ConservedQuantities:
    kinetic: float
    field_energy: float
    field_energy_z: float
    external_potential: float
    momentum: np.ndarray = field(default_factory=lambda: np.zeros(3))
    charge_k0_error: float = 0.0

    @property
    def total_energy(self) -> float:
        return self.kinetic + self.field_energy + self.external_potential

    def as_row(self) -> List[float]:
        return [
            self.total_energy,
            float(self.momentum[0]),
            float(self.momentum[1]),
            float(self.momentum[2]),
            self.charge_k0_error,
        ]
