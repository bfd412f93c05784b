"""Fluxes, clock-and-shift matrices and the magnetic Bloch Hamiltonian.

The model lives on a triangular lattice threaded by a rational flux
2*pi*p/q per unit cell, with an independently tunable phase ``phi_d``
for the down-triangle plaquettes.  Everything downstream (spectra,
Chern numbers, butterflies) is built from the q x q Bloch families
constructed here.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

HERMITICITY_TOL = 1e-12
SYMMETRY_TOL = 1e-12
INVERSION_TOL = 1e-10


def modular_inverse(p: int, q: int) -> int:
    """Return s in [1, q] with s*p = 1 (mod q).

    The degenerate modulus q=1 returns 1.  Raises ValueError for
    non-positive or non-coprime input.
    """
    if q < 1 or p < 1:
        raise ValueError(f"need positive integers, got p={p}, q={q}")
    if math.gcd(p, q) != 1:
        raise ValueError(f"p={p} and q={q} are not coprime")
    if q == 1:
        return 1
    return pow(p, -1, q)


class BlochMomentum(NamedTuple):
    """A point (k1, k2) in momentum space."""

    k1: float
    k2: float

    def reduced(self, q: int) -> "BlochMomentum":
        """Map into the magnetic Brillouin zone |k1| <= pi, |q*k2| <= pi."""
        two_pi = 2.0 * math.pi
        k1 = (self.k1 + math.pi) % two_pi - math.pi
        k2 = (self.k2 + math.pi / q) % (two_pi / q) - math.pi / q
        return BlochMomentum(k1, k2)


@dataclass(frozen=True)
class Flux:
    """Reduced rational flux 2*pi*p/q through the unit cell."""

    p: int
    q: int
    s: int = field(init=False)

    def __post_init__(self):
        if self.q < 1 or self.p < 1 or self.p > self.q:
            raise ValueError(f"need 1 <= p <= q, got p={self.p}, q={self.q}")
        if math.gcd(self.p, self.q) != 1:
            raise ValueError(f"flux {self.p}/{self.q} is not reduced")
        object.__setattr__(self, "s", modular_inverse(self.p, self.q))

    @classmethod
    def reduced(cls, p: int, q: int) -> "Flux":
        """Construct from a not-necessarily-reduced ratio p/q > 0."""
        if q < 1 or p < 1:
            raise ValueError(f"need positive integers, got p={p}, q={q}")
        g = math.gcd(p, q)
        return cls(p // g, q // g)

    @property
    def omega(self) -> complex:
        return np.exp(2j * math.pi * self.p / self.q)

    @property
    def value(self) -> float:
        """Flux fraction p/q (vertical coordinate of the butterfly)."""
        return self.p / self.q

    def conjugate(self) -> "Flux":
        """The flux -Phi, i.e. (q-p)/q; 1/1 is self-conjugate."""
        if self.p == self.q:
            return self
        return Flux(self.q - self.p, self.q)


@dataclass(frozen=True)
class HofstadterModel:
    """Triangular-lattice Hofstadter model at rational flux.

    ``t1``, ``t2``, ``t3`` weigh the three hopping directions (the
    cyclic-shift, diagonal-clock and combined terms).  ``t3 = 0``
    recovers the square/rectangular model, where ``phi_d`` drops out.
    The isotropic triangular model is t1 = t2 = t3 = 1.
    """

    flux: Flux
    phi_d: float = 0.0
    t1: float = 1.0
    t2: float = 1.0
    t3: float = 1.0

    def __post_init__(self):
        if min(self.t1, self.t2, self.t3) < 0:
            raise ValueError("hopping amplitudes must be nonnegative")

    @property
    def q(self) -> int:
        return self.flux.q

    @property
    def omega_d(self) -> complex:
        return np.exp(1j * self.phi_d)

    @property
    def omega_u(self) -> complex:
        # always derived so that omega_u * omega_d == omega exactly
        return self.flux.omega / self.omega_d

    @property
    def is_isotropic(self) -> bool:
        return self.t1 == self.t2 == self.t3 == 1.0

    @property
    def spectral_bound(self) -> float:
        """2*(t1+t2+t3), a rigorous bound on |E| for every k."""
        return 2.0 * (self.t1 + self.t2 + self.t3)


def clock_shift(flux: Flux) -> tuple[np.ndarray, np.ndarray]:
    """The clock matrix S = diag(w, w^2, ..., w^q) and the cyclic shift T.

    T carries 1s on the subdiagonal and in the top-right corner; the
    pair satisfies S T = w T S and S^q = T^q = 1.
    """
    q = flux.q
    S = np.diag(flux.omega ** np.arange(1, q + 1)).astype(complex)
    T = np.zeros((q, q), dtype=complex)
    for i in range(1, q):
        T[i, i - 1] = 1.0
    T[0, q - 1] = 1.0
    return S, T


@functools.lru_cache(maxsize=64)
def _hopping_terms(model: HofstadterModel):
    """The three k-independent hopping matrices (M1, M2, M3).

    H(k) = e^{i k2} M1 + e^{i(k1+k2)} M2 + e^{i k1} M3 + h.c.
    """
    S, T = clock_shift(model.flux)
    M1 = model.t1 * T
    M2 = model.t3 * model.omega_u * (T @ S)
    M3 = model.t2 * S
    return M1, M2, M3


def build_hamiltonian(model: HofstadterModel, k) -> np.ndarray:
    """The q x q Bloch Hamiltonian H(k1, k2); exactly Hermitian."""
    k1, k2 = k
    M1, M2, M3 = _hopping_terms(model)
    A = np.exp(1j * k2) * M1 + np.exp(1j * (k1 + k2)) * M2 + np.exp(1j * k1) * M3
    return A + A.conj().T


def hamiltonian_batch(model: HofstadterModel, k1, k2) -> np.ndarray:
    """H evaluated on broadcastable arrays of momenta; shape (..., q, q)."""
    M1, M2, M3 = _hopping_terms(model)
    k1 = np.asarray(k1, dtype=float)[..., None, None]
    k2 = np.asarray(k2, dtype=float)[..., None, None]
    A = np.exp(1j * k2) * M1 + np.exp(1j * (k1 + k2)) * M2 + np.exp(1j * k1) * M3
    return A + np.conj(np.swapaxes(A, -1, -2))


def hamiltonian_derivatives(model: HofstadterModel, k) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (dH/dk1, dH/dk2); the hoppings carry explicit k-phases."""
    k1, k2 = k
    M1, M2, M3 = _hopping_terms(model)
    A1 = 1j * (np.exp(1j * (k1 + k2)) * M2 + np.exp(1j * k1) * M3)
    A2 = 1j * (np.exp(1j * k2) * M1 + np.exp(1j * (k1 + k2)) * M2)
    return A1 + A1.conj().T, A2 + A2.conj().T


@functools.lru_cache(maxsize=64)
def _symmetry_unitaries(flux: Flux) -> tuple[np.ndarray, np.ndarray]:
    """T^s and S^s implementing the 2*pi/q magnetic translations."""
    S, T = clock_shift(flux)
    return (np.linalg.matrix_power(T, flux.s),
            np.linalg.matrix_power(S, flux.s))


def magnetic_symmetry_residual(model: HofstadterModel, k) -> tuple[float, float]:
    """Deviation from the magnetic-translation identities.

    r1 compares H(k1, k2) with T^s' H(k1 - 2*pi/q, k2) T^s and r2 the
    analogous S^s conjugation shifting k2; both vanish identically for
    this Hamiltonian class.
    """
    k1, k2 = k
    q = model.q
    Ts, Ss = _symmetry_unitaries(model.flux)
    H = build_hamiltonian(model, (k1, k2))
    H1 = build_hamiltonian(model, (k1 - 2.0 * math.pi / q, k2))
    H2 = build_hamiltonian(model, (k1, k2 + 2.0 * math.pi / q))
    r1 = np.abs(H - Ts.conj().T @ H1 @ Ts).max()
    r2 = np.abs(H - Ss.conj().T @ H2 @ Ss).max()
    return float(r1), float(r2)


def _is_half_pi(phi: float, tol: float = 1e-9) -> bool:
    r = phi % (2 * math.pi)
    return min(abs(r - math.pi / 2), abs(r - 3 * math.pi / 2)) < tol


def inversion_check(model: HofstadterModel) -> float:
    """Residual of the spectral inversion E -> -E between fluxes +/-Phi.

    Valid only at phi_d = +/-pi/2 where the anti-unitary symmetry makes
    the spectra of flux p/q and flux (q-p)/q exact negatives.  Compares
    the sorted multiset of eigenvalues over the band-edge k-points of
    each flux; returns the max deviation.
    """
    from .spectrum import band_edge_kpoints  # local import avoids a cycle

    if not _is_half_pi(model.phi_d):
        raise ValueError("inversion symmetry requires phi_d = +/-pi/2")
    partner = HofstadterModel(model.flux.conjugate(), model.phi_d,
                              model.t1, model.t2, model.t3)
    evs_a = np.sort(np.concatenate([
        np.linalg.eigvalsh(build_hamiltonian(model, k))
        for k in band_edge_kpoints(model)]))
    evs_b = np.sort(np.concatenate([
        np.linalg.eigvalsh(build_hamiltonian(partner, k))
        for k in band_edge_kpoints(partner)]))
    return float(np.abs(evs_a + evs_b[::-1]).max())
