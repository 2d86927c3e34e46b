"""Exact 2x2 complex linear algebra for qubit states and measurement operators.

Spin convention (used by every module in this package)
------------------------------------------------------
Basis ordering is (|0>, |1>) with

    sigma_z |0> = +|0>,   sigma_z |1> = -|1>,
    sigma_plus |1> = |0>,  sigma_minus |0> = |1>,

so ``sigma_plus`` raises toward the higher-energy level of H = (omega0/2) sigma_z
and ``sigma_minus = sigma_plus^dag`` lowers.  Density matrices are indexed the
same way: ``rho[0, 0]`` is the |0> population and ``rho[0, 1] = <0|rho|1>``.

All arithmetic is IEEE double precision; no arbitrary-precision types are used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CompletenessError, NormalizationError

#: Validation tolerance on analytically constructed states.
ATOL_ANALYTIC = 1e-12
#: Looser tolerance for states produced by numerical integration,
#: where integrator error dominates.
ATOL_INTEGRATED = 1e-9

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)   # |0><1|
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |1><0|

for _m in (IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS):
    _m.setflags(write=False)
del _m


def _require_finite(name: str, *values: complex) -> None:
    for v in values:
        if not (np.isfinite(v.real) and np.isfinite(v.imag)):
            raise ValueError(f"{name} must have finite components, got {v!r}")


@dataclass(frozen=True)
class QubitAmplitudes:
    """Normalized amplitudes (a, b) of the pure state a|0> + b|1>."""

    a: complex
    b: complex

    def __post_init__(self):
        a, b = complex(self.a), complex(self.b)
        _require_finite("amplitude", a, b)
        deviation = abs(abs(a) ** 2 + abs(b) ** 2 - 1.0)
        if deviation > ATOL_ANALYTIC:
            raise NormalizationError("|a|^2 + |b|^2 must equal 1", deviation)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def normalized(cls, a: complex, b: complex) -> "QubitAmplitudes":
        """Build amplitudes from an unnormalized pair by explicit rescaling."""
        norm = np.hypot(abs(a), abs(b))
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite amplitude pair")
        return cls(a / norm, b / norm)

    @property
    def bloch_z(self) -> float:
        """<sigma_z> = |a|^2 - |b|^2."""
        return abs(self.a) ** 2 - abs(self.b) ** 2


class DensityMatrix2:
    """A validated 2x2 density matrix.

    The matrix is stored as two real populations plus one complex coherence,
    so Hermiticity holds exactly by construction.  Construction checks

    * unit trace within ``atol``,
    * positive semidefiniteness: populations and determinant above ``-atol``.

    ``atol`` defaults to :data:`ATOL_ANALYTIC`; paths that go through a
    numerical integrator should pass :data:`ATOL_INTEGRATED`.
    """

    __slots__ = ("_p0", "_p1", "_coh")

    def __init__(self, matrix: np.ndarray, *, atol: float = ATOL_ANALYTIC):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m.view(float))):
            raise ValueError("density matrix entries must be finite")
        herm_dev = max(abs(m[0, 1] - np.conj(m[1, 0])),
                       abs(m[0, 0].imag), abs(m[1, 1].imag))
        if herm_dev > atol:
            raise ValueError(f"matrix is not Hermitian (deviation {herm_dev:.3e})")
        p0, p1 = m[0, 0].real, m[1, 1].real
        coh = 0.5 * (m[0, 1] + np.conj(m[1, 0]))
        self._validate(p0, p1, coh, atol)
        self._p0, self._p1, self._coh = p0, p1, coh

    @classmethod
    def from_parts(cls, p0: float, p1: float, coherence: complex,
                   *, atol: float = ATOL_ANALYTIC) -> "DensityMatrix2":
        """Build directly from populations and the (0,1) coherence entry."""
        self = object.__new__(cls)
        p0, p1, coherence = float(p0), float(p1), complex(coherence)
        if not (np.isfinite(p0) and np.isfinite(p1)):
            raise ValueError("populations must be finite")
        _require_finite("coherence", coherence)
        cls._validate(p0, p1, coherence, atol)
        self._p0, self._p1, self._coh = p0, p1, coherence
        return self

    @staticmethod
    def _validate(p0: float, p1: float, coh: complex, atol: float) -> None:
        trace_dev = abs(p0 + p1 - 1.0)
        if trace_dev > atol:
            raise ValueError(f"trace must equal 1 (deviation {trace_dev:.3e})")
        det = p0 * p1 - abs(coh) ** 2
        if p0 < -atol or p1 < -atol or det < -atol:
            raise ValueError(
                f"matrix is not positive semidefinite "
                f"(populations {p0:.3e}, {p1:.3e}, det {det:.3e})"
            )

    @property
    def rho00(self) -> float:
        return self._p0

    @property
    def rho11(self) -> float:
        return self._p1

    @property
    def coherence(self) -> complex:
        """The (0, 1) entry <0|rho|1>."""
        return self._coh

    @property
    def matrix(self) -> np.ndarray:
        """A fresh 2x2 complex array copy of the matrix."""
        return np.array([[self._p0, self._coh],
                         [np.conj(self._coh), self._p1]], dtype=complex)

    def isclose(self, other: "DensityMatrix2", atol: float = 1e-12) -> bool:
        return (abs(self._p0 - other._p0) <= atol
                and abs(self._p1 - other._p1) <= atol
                and abs(self._coh - other._coh) <= atol)

    def __repr__(self) -> str:
        return (f"DensityMatrix2(rho00={self._p0!r}, rho11={self._p1!r}, "
                f"coherence={self._coh!r})")


@dataclass(frozen=True)
class KrausPair:
    """Two measurement operators satisfying M0^dag M0 + M1^dag M1 = I."""

    M0: np.ndarray
    M1: np.ndarray

    def __post_init__(self):
        m0 = np.array(self.M0, dtype=complex)
        m1 = np.array(self.M1, dtype=complex)
        if m0.shape != (2, 2) or m1.shape != (2, 2):
            raise ValueError("measurement operators must be 2x2")
        if not (np.all(np.isfinite(m0.view(float)))
                and np.all(np.isfinite(m1.view(float)))):
            raise ValueError("measurement operators must be finite")
        total = m0.conj().T @ m0 + m1.conj().T @ m1
        deviation = float(np.max(np.abs(total - IDENTITY)))
        if deviation > ATOL_ANALYTIC:
            raise CompletenessError(
                "operators do not satisfy the completeness relation", deviation
            )
        m0.setflags(write=False)
        m1.setflags(write=False)
        object.__setattr__(self, "M0", m0)
        object.__setattr__(self, "M1", m1)


def density_from_amplitudes(psi: QubitAmplitudes) -> DensityMatrix2:
    """Rank-1 density matrix |psi><psi| of a pure state."""
    a, b = psi.a, psi.b
    return DensityMatrix2.from_parts(abs(a) ** 2, abs(b) ** 2, a * np.conj(b))


def bloch_z(rho: DensityMatrix2) -> float:
    """Bloch-vector z component rho00 - rho11, in [-1, 1]."""
    return rho.rho00 - rho.rho11


def apply_kraus(rho: DensityMatrix2, pair: KrausPair) -> DensityMatrix2:
    """Apply the channel rho -> M0 rho M0^dag + M1 rho M1^dag.

    Trace and Hermiticity are preserved for any completeness-satisfying pair.
    """
    m = rho.matrix
    out = (pair.M0 @ m @ pair.M0.conj().T
           + pair.M1 @ m @ pair.M1.conj().T)
    return DensityMatrix2(out)


def dephasing_projectors() -> KrausPair:
    """Measurement operators of the fixed-axis (sigma_z) measurement.

    M0 = (I + sigma_z)/2 = |0><0| and M1 = (I - sigma_z)/2 = |1><1|; applying
    the channel keeps populations and deletes coherences, reproducing the
    long-time dephasing fixed point.
    """
    return KrausPair((IDENTITY + SIGMA_Z) / 2.0, (IDENTITY - SIGMA_Z) / 2.0)


def excitation_capture_pair() -> KrausPair:
    """Measurement operators of the excitation-capture (central-spin) channel.

    M0 = (I - sigma_z)/2 = |1><1| fires when the system already sits in the
    stationary branch |1>, leaving the bath undisturbed.  M1 absorbs the
    excited branch: it maps |0> onto the post-measurement state |1>, the same
    way a photodetector absorbs a photon and returns to vacuum.  Under the
    sign convention of this module that flip operator is ``SIGMA_MINUS``
    (texts that label the occupied level |1> write the same operator as a
    raising operator).  Completeness holds exactly:
    |1><1| + |0><0| = I.
    """
    return KrausPair((IDENTITY - SIGMA_Z) / 2.0, SIGMA_MINUS)
