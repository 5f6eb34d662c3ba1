"""Envelope equations of discrete nonlinear Schrodinger type.

Three right-hand sides drive the complex envelope of the unit-frequency
carrier on the chain:

* standard (slow time tau):      2i a' + 3 nu |a|^2 a = a_+ + a_-
* generalized (slow time tau):   2i a' + 3 eps delta |a|^2 a
                                     = a_+ + a_- + eps/4 (a_++ + 2a + a_--)
* normal-form (fast time t):     i psi' = Omega psi + b1 (psi_+ + psi_-)
                                     [+ b2 (psi_++ + psi_--)] + 3/4 |psi|^2 psi

where a_+- are nearest and a_++/-- next-nearest periodic neighbours.  The
slow-clock models arise from the two-harmonic multiscale reduction with
nu = rho/eps resp. delta = rho/eps^2; the fast-clock model is the flow of
the truncated resonant normal form (see :mod:`dklab.normal_form`).

Every right-hand side conserves the squared l2 norm of the envelope, is
equivariant under cyclic shifts, and is invariant under global phase
rotation.  Chain-rule second derivatives are available in closed form so
that residual evaluations never resort to numerical differentiation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np

from .lattice_core import l2_norm

__all__ = [
    "EnvelopeState",
    "StandardDnls",
    "GeneralizedDnls",
    "NormalFormDnls",
    "DnlsModel",
    "rhs",
    "rhs_standard",
    "rhs_generalized",
    "rhs_normalform",
    "second_derivative",
    "l2_conserved",
    "warn_outside_asymptotic_range",
]


def _frozen_complex_vector(seq, name: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class EnvelopeState:
    """Complex envelope on the chain at its model's clock time.

    ``tau`` is slow time eps*t for the standard/generalized models and fast
    time t for the normal-form models; the integrator records which clock a
    model uses.
    """

    a: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen_complex_vector(self.a, "a"))
        n = len(self.a)
        if n < 3 or n % 2 == 0:
            raise ValueError(f"chain length must be odd and >= 3, got {n}")
        if not np.isfinite(self.tau):
            raise ValueError("time must be finite")
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n_sites(self) -> int:
        return len(self.a)

    @property
    def n_half(self) -> int:
        return len(self.a) // 2

    def to_json_dict(self) -> dict:
        return {
            "tau": self.tau,
            "re": self.a.real.tolist(),
            "im": self.a.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EnvelopeState":
        a = np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)
        return cls(a, float(d["tau"]))

    def write_csv(self, path, header_comment: str | None = None) -> None:
        n_half = self.n_half
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write(f"# tau={self.tau!r}\n")
            fh.write("j,re,im\n")
            for i in range(self.n_sites):
                fh.write(
                    f"{i - n_half},{float(self.a.real[i])!r},{float(self.a.imag[i])!r}\n"
                )

    @classmethod
    def read_csv(cls, path) -> "EnvelopeState":
        tau = 0.0
        rows = []
        with open(path, newline="") as fh:
            for line in fh:
                line = line.strip()
                if line.startswith("# tau="):
                    tau = float(line[6:])
                    continue
                if not line or line.startswith("#") or line.startswith("j,"):
                    continue
                rows.append(line.split(","))
        rows.sort(key=lambda r: int(r[0]))
        a = np.array([float(r[1]) + 1j * float(r[2]) for r in rows])
        return cls(a, tau)


@dataclass(frozen=True)
class StandardDnls:
    """2i a' + 3 nu |a|^2 a = a_+ + a_-  on the slow clock."""

    nu: float
    clock = "slow"

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0.0):
            raise ValueError(f"nu={self.nu} must be positive and finite")
        if self.nu > 1.0:
            warnings.warn(
                f"nu={self.nu} > 1 lies outside the asymptotic range of the "
                "standard envelope reduction; run proceeds",
                stacklevel=2,
            )


@dataclass(frozen=True)
class GeneralizedDnls:
    """Next-nearest-neighbour extension with cubic coefficient eps*delta."""

    delta: float
    epsilon: float
    clock = "slow"

    def __post_init__(self):
        if not (np.isfinite(self.delta) and self.delta > 0.0):
            raise ValueError(f"delta={self.delta} must be positive and finite")
        if not (0.0 < self.epsilon < 0.5):
            raise ValueError(f"epsilon={self.epsilon} must lie in (0, 1/2)")
        if self.delta > 1.0:
            warnings.warn(
                f"delta={self.delta} > 1 lies outside the asymptotic range of "
                "the generalized envelope reduction; run proceeds",
                stacklevel=2,
            )


@dataclass(frozen=True)
class NormalFormDnls:
    """Flow of the truncated normal-form Hamiltonian, on the fast clock.

    b1 (and b2, when the next-to-leading truncation is used) are the
    off-diagonal entries of the square root of the coupling matrix; they
    are non-positive for couplings in [0, 1/2).
    """

    Omega: float
    b1: float
    b2: float | None = None
    clock = "fast"

    def __post_init__(self):
        if not (np.isfinite(self.Omega) and self.Omega > 0.0):
            raise ValueError(f"Omega={self.Omega} must be positive")
        if not (np.isfinite(self.b1) and self.b1 <= 0.0):
            raise ValueError(f"b1={self.b1} must be <= 0")
        if self.b2 is not None and not (np.isfinite(self.b2) and self.b2 <= 0.0):
            raise ValueError(f"b2={self.b2} must be <= 0 when present")


DnlsModel = Union[StandardDnls, GeneralizedDnls, NormalFormDnls]


def warn_outside_asymptotic_range(model: DnlsModel, epsilon: float) -> None:
    """Warn when the cubic coefficient degenerates against the coupling.

    The reductions are derived for eps << nu <= 1 (standard) and
    eps << delta <= 1 (generalized); values outside are legitimate
    exploratory runs, so this never raises.
    """
    if isinstance(model, StandardDnls) and model.nu <= epsilon:
        warnings.warn(
            f"nu={model.nu} <= eps={epsilon}: the standard envelope reduction "
            "degenerates here (asymptotic range is eps << nu <= 1)",
            stacklevel=2,
        )
    elif isinstance(model, GeneralizedDnls) and model.delta <= epsilon:
        warnings.warn(
            f"delta={model.delta} <= eps={epsilon}: the generalized envelope "
            "reduction degenerates here (asymptotic range is eps << delta <= 1)",
            stacklevel=2,
        )


# -- right-hand sides --------------------------------------------------------


def rhs_standard(a: np.ndarray, nu: float) -> np.ndarray:
    """a' = -(i/2) (a_+ + a_- - 3 nu |a|^2 a)."""
    return -0.5j * (np.roll(a, -1) + np.roll(a, 1) - 3.0 * nu * np.abs(a) ** 2 * a)


def rhs_generalized(a: np.ndarray, delta: float, epsilon: float) -> np.ndarray:
    """a' = -(i/2) [a_+ + a_- + eps/4 (a_++ + 2a + a_--) - 3 eps delta |a|^2 a]."""
    lin2 = np.roll(a, -2) + 2.0 * a + np.roll(a, 2)
    return -0.5j * (
        np.roll(a, -1)
        + np.roll(a, 1)
        + 0.25 * epsilon * lin2
        - 3.0 * epsilon * delta * np.abs(a) ** 2 * a
    )


def rhs_normalform(
    psi: np.ndarray, Omega: float, b1: float, b2: float | None = None
) -> np.ndarray:
    """psi' = -i [Omega psi + b1 (psi_+ + psi_-) + b2 (psi_++ + psi_--)
    + 3/4 |psi|^2 psi]; the b2 term is omitted when b2 is None.

    This is minus i times the gradient of the truncated normal-form energy
    with respect to conj(psi).
    """
    grad = Omega * psi + b1 * (np.roll(psi, -1) + np.roll(psi, 1))
    if b2 is not None:
        grad = grad + b2 * (np.roll(psi, -2) + np.roll(psi, 2))
    grad = grad + 0.75 * np.abs(psi) ** 2 * psi
    return -1j * grad


def rhs(model: DnlsModel, a: np.ndarray) -> np.ndarray:
    """Dispatch to the model's right-hand side."""
    if isinstance(model, StandardDnls):
        return rhs_standard(a, model.nu)
    if isinstance(model, GeneralizedDnls):
        return rhs_generalized(a, model.delta, model.epsilon)
    if isinstance(model, NormalFormDnls):
        return rhs_normalform(a, model.Omega, model.b1, model.b2)
    raise TypeError(f"unknown envelope model {model!r}")


def _cubic_chain(a: np.ndarray, adot: np.ndarray) -> np.ndarray:
    # d/dt (|a|^2 a) = 2|a|^2 a' + a^2 conj(a')
    return 2.0 * np.abs(a) ** 2 * adot + a**2 * np.conj(adot)


def second_derivative(a: np.ndarray, model: DnlsModel) -> np.ndarray:
    """Exact second time derivative a'' obtained by differentiating the
    model's right-hand side along itself (chain rule through |a|^2 a).

    No finite differences are involved, so the result is accurate to
    rounding; residual evaluations rely on that.
    """
    ad = rhs(model, a)
    if isinstance(model, StandardDnls):
        return -0.5j * (
            np.roll(ad, -1) + np.roll(ad, 1) - 3.0 * model.nu * _cubic_chain(a, ad)
        )
    if isinstance(model, GeneralizedDnls):
        lin2 = np.roll(ad, -2) + 2.0 * ad + np.roll(ad, 2)
        return -0.5j * (
            np.roll(ad, -1)
            + np.roll(ad, 1)
            + 0.25 * model.epsilon * lin2
            - 3.0 * model.epsilon * model.delta * _cubic_chain(a, ad)
        )
    if isinstance(model, NormalFormDnls):
        grad = model.Omega * ad + model.b1 * (np.roll(ad, -1) + np.roll(ad, 1))
        if model.b2 is not None:
            grad = grad + model.b2 * (np.roll(ad, -2) + np.roll(ad, 2))
        grad = grad + 0.75 * _cubic_chain(a, ad)
        return -1j * grad
    raise TypeError(f"unknown envelope model {model!r}")


def l2_conserved(a: np.ndarray) -> float:
    """Squared l2 norm, the conserved quantity tracked during integration."""
    return l2_norm(a) ** 2
