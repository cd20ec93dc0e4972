"""Potential solves for the two electron laws on the torus.

Linearized law::

    -sum_j c_j d_jj phi + eps * phi = rho - 1

Boltzmann law::

    -sum_j c_j d_jj phi + exp(eps * phi) = rho

The diffusion coefficients ``c_j`` default to ``eps**2`` on every axis; the
anisotropic two-dimensional scaling uses ``(eps**2, eps**3)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .spectral import SpectralField, forward, inverse

log = logging.getLogger(__name__)

LAWS = ("linearized", "boltzmann")


class PoissonError(RuntimeError):
    pass


class SingularOperatorError(PoissonError):
    pass


class PoissonDomainError(PoissonError, ValueError):
    pass


class ConvergenceError(PoissonError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def kp_anisotropy(eps: float) -> tuple[float, float]:
    """Diffusion coefficients of the anisotropic two-dimensional scaling."""
    return (eps**2, eps**3)


@dataclass(frozen=True, eq=False)
class PoissonProblem:
    law: str
    eps: float
    rho: SpectralField
    anisotropy: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"unknown law {self.law!r}; expected one of {LAWS}")
        if not np.isfinite(self.eps) or self.eps < 0 or self.eps > 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.anisotropy is not None and len(self.anisotropy) != self.rho.grid.ndim:
            raise ValueError("anisotropy needs one coefficient per grid axis")

    @property
    def coefficients(self) -> tuple[float, ...]:
        if self.anisotropy is None:
            return (self.eps**2,) * self.rho.grid.ndim
        return tuple(float(c) for c in self.anisotropy)


def _stiffness(grid, coefficients) -> np.ndarray:
    """Fourier symbol of ``-sum_j c_j d_jj``."""
    total = np.zeros(grid.spectral_shape)
    for axis, c in enumerate(coefficients):
        total = total + c * grid.wavenumbers(axis) ** 2
    return total


def apply_law(phi: SpectralField, eps: float, law: str, anisotropy=None) -> SpectralField:
    """Density ``rho`` for which ``phi`` solves the requested law exactly."""
    coeffs = (eps**2,) * phi.grid.ndim if anisotropy is None else anisotropy
    diffusion = inverse(phi.grid, _stiffness(phi.grid, coeffs) * forward(phi.grid, phi.values))
    if law == "linearized":
        return SpectralField(phi.grid, diffusion + 1.0 + eps * phi.values)
    if law == "boltzmann":
        return SpectralField(phi.grid, diffusion + np.exp(eps * phi.values))
    raise ValueError(f"unknown law {law!r}")


def residual(p: PoissonProblem, phi: SpectralField) -> float:
    """Max-norm residual of ``phi`` in the discrete equation of ``p``."""
    r = apply_law(phi, p.eps, p.law, p.coefficients).values - p.rho.values
    return float(np.max(np.abs(r)))


def solve_linearized(p: PoissonProblem) -> SpectralField:
    if p.law != "linearized":
        raise ValueError(f"solve_linearized called for law {p.law!r}")
    if p.eps == 0:
        raise SingularOperatorError("eps = 0 makes the zero mode singular")
    grid = p.rho.grid
    denom = _stiffness(grid, p.coefficients) + p.eps
    return SpectralField.from_coeffs(grid, forward(grid, p.rho.values - 1.0) / denom)


class BoltzmannResult(NamedTuple):
    phi: SpectralField
    iterations: int
    residual: float
    history: tuple[float, ...]


def boltzmann_newton(p: PoissonProblem, tol: float = 1e-12, max_iter: int = 50, phi0: SpectralField | None = None) -> BoltzmannResult:
    """Damped Newton iteration with a mean-coefficient spectral preconditioner."""
    if p.law != "boltzmann":
        raise ValueError(f"boltzmann_newton called for law {p.law!r}")
    if p.eps == 0:
        raise SingularOperatorError("eps = 0 leaves the exponential law without a potential")
    rho = p.rho.values
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise PoissonDomainError(f"Boltzmann law needs rho > 0, min(rho) = {np.min(rho):.3e}")
    grid, eps = p.rho.grid, p.eps
    stiff = _stiffness(grid, p.coefficients)
    target = tol * max(1.0, float(np.max(np.abs(rho))))

    def F(phi):
        return inverse(grid, stiff * forward(grid, phi)) + np.exp(eps * phi) - rho

    phi = np.log(rho) / eps if phi0 is None else phi0.values.copy()
    r = F(phi)
    rn = float(np.max(np.abs(r)))
    history = [rn]
    it = 0
    while rn > target:
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {rn:.3e})", rn, it)
        it += 1
        coef = eps * np.exp(eps * phi)
        precond_denom = stiff + float(np.mean(coef))

        def jac(d):
            return inverse(grid, stiff * forward(grid, d.reshape(grid.shape))).ravel() + coef.ravel() * d

        def prec(d):
            return inverse(grid, forward(grid, d.reshape(grid.shape)) / precond_denom).ravel()

        n = grid.size
        A = LinearOperator((n, n), matvec=jac, dtype=float)
        M = LinearOperator((n, n), matvec=prec, dtype=float)
        delta, info = cg(A, -r.ravel(), rtol=1e-14, atol=0.1 * target, maxiter=200, M=M)
        if info < 0:
            raise ConvergenceError(f"inner CG breakdown (info={info})", rn, it)
        delta = delta.reshape(grid.shape)
        step = 1.0
        while True:
            trial = phi + step * delta
            r_trial = F(trial)
            rn_trial = float(np.max(np.abs(r_trial)))
            if rn_trial < rn or step < 1e-4:
                break
            step *= 0.5
        if rn_trial >= rn:
            raise ConvergenceError(f"damped Newton stalled at residual {rn:.3e}", rn, it)
        phi, r, rn = trial, r_trial, rn_trial
        history.append(rn)
    log.debug("Boltzmann Newton: %d iterations, residual %.3e", it, rn)
    return BoltzmannResult(SpectralField(grid, phi), it, rn, tuple(history))


def solve_boltzmann(p: PoissonProblem, tol: float = 1e-12, max_iter: int = 50) -> SpectralField:
    return boltzmann_newton(p, tol, max_iter).phi


def solve(p: PoissonProblem) -> SpectralField:
    """Dispatch on the law of ``p``."""
    if p.law == "linearized":
        return solve_linearized(p)
    return solve_boltzmann(p)
