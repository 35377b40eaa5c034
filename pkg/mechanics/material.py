"""
Junction - Plate-Rod Limit Model Solver
Material Law: St Venant-Kirchhoff density, quadratic form, distance to SO(3)

Usage:
    from mechanics.material import MaterialParams, svk_density
    m = MaterialParams.from_engineering(young=2.6, poisson=0.3)
    w = svk_density(F, m)
"""

from dataclasses import dataclass

import numpy as np

from mechanics.errors import MaterialError


class _Nonphysical:
    """Sentinel for the +inf branch of the density (det F <= 0)."""
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NONPHYSICAL"

    def __bool__(self):
        return False


NONPHYSICAL = _Nonphysical()


# =============================================================================
# MATERIAL PARAMETERS
# =============================================================================

@dataclass(frozen=True)
class MaterialParams:
    """Isotropic constants; Lamé pair and engineering pair kept consistent."""
    lam: float
    mu: float
    young: float
    poisson: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise MaterialError(f"mu must be positive, got {self.mu}")
        if self.lam < 0.0:
            raise MaterialError(f"lambda must be non-negative, got {self.lam}")
        if not -1.0 < self.poisson < 0.5:
            raise MaterialError(f"Poisson ratio must lie in (-1, 1/2), got {self.poisson}")
        if not self.young > 0.0:
            raise MaterialError(f"Young modulus must be positive, got {self.young}")
        young = self.mu * (3.0 * self.lam + 2.0 * self.mu) / (self.lam + self.mu)
        poisson = self.lam / (2.0 * (self.lam + self.mu))
        if not (np.isclose(young, self.young, rtol=1e-12, atol=0.0)
                and np.isclose(poisson, self.poisson, rtol=1e-12, atol=1e-15)):
            raise MaterialError(
                f"inconsistent constants: (lambda, mu) give E={young:.15g}, nu={poisson:.15g}; "
                f"got E={self.young:.15g}, nu={self.poisson:.15g}"
            )

    @classmethod
    def from_lame(cls, lam: float, mu: float) -> "MaterialParams":
        if not mu > 0.0 or lam < 0.0:
            raise MaterialError(f"need mu > 0 and lambda >= 0, got lambda={lam}, mu={mu}")
        return cls(
            lam=float(lam), mu=float(mu),
            young=mu * (3.0 * lam + 2.0 * mu) / (lam + mu),
            poisson=lam / (2.0 * (lam + mu)),
        )

    @classmethod
    def from_engineering(cls, young: float, poisson: float) -> "MaterialParams":
        return lame_from_engineering(young, poisson)

    @property
    def plate_bending(self) -> float:
        """E / (3(1 - nu^2))"""
        return self.young / (3.0 * (1.0 - self.poisson ** 2))

    @property
    def plate_membrane(self) -> float:
        """E / (1 - nu^2)"""
        return self.young / (1.0 - self.poisson ** 2)

    @property
    def rod_bending(self) -> float:
        """E pi / 8"""
        return self.young * np.pi / 8.0


def lame_from_engineering(young: float, poisson: float) -> MaterialParams:
    """
    Convert (E, nu) to Lamé coefficients.

    Raises:
        MaterialError: if E <= 0 or nu outside (-1, 1/2).
    """
    if not young > 0.0:
        raise MaterialError(f"Young modulus must be positive, got {young}")
    if not -1.0 < poisson < 0.5:
        raise MaterialError(f"Poisson ratio must lie in (-1, 1/2), got {poisson}")
    lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
    mu = young / (2.0 * (1.0 + poisson))
    # recompute the engineering pair from (lam, mu) so the record is self-consistent to round-off
    return MaterialParams.from_lame(lam, mu)


# =============================================================================
# LIMIT-ENERGY COEFFICIENTS
# =============================================================================

@dataclass(frozen=True)
class LimitCoefficients:
    """
    Rod torsion and couple-load factors of the limit energy.

    consistent(): values obtained by integrating the 3D quadratic form of the
    limit rod strain over the unit disc (torsion mu*pi/4, couple pi/4).
    as_printed(): the closed-form constants mu*pi/8 and pi/2.
    """
    torsion_factor: float = np.pi / 4.0
    couple_factor: float = np.pi / 4.0
    name: str = "consistent"

    @classmethod
    def consistent(cls) -> "LimitCoefficients":
        return cls(np.pi / 4.0, np.pi / 4.0, "consistent")

    @classmethod
    def as_printed(cls) -> "LimitCoefficients":
        return cls(np.pi / 8.0, np.pi / 2.0, "as_printed")

    @classmethod
    def named(cls, name: str) -> "LimitCoefficients":
        if name == "consistent":
            return cls.consistent()
        if name == "as_printed":
            return cls.as_printed()
        raise MaterialError(f"unknown coefficient set '{name}' (expected consistent or as_printed)")

    def rod_torsion(self, m: MaterialParams) -> float:
        return self.torsion_factor * m.mu


# =============================================================================
# DENSITIES
# =============================================================================

def quadratic_form_Q(E: np.ndarray, m: MaterialParams) -> np.ndarray:
    """
    Q(E) = lambda/8 (tr E)^2 + mu/4 tr(E^2) for symmetric E of shape (..., 3, 3).
    """
    E = np.asarray(E, dtype=float)
    tr = np.trace(E, axis1=-2, axis2=-1)
    tr_sq = np.einsum("...ij,...ji->...", E, E)
    return m.lam / 8.0 * tr ** 2 + m.mu / 4.0 * tr_sq


def green_energy(E: np.ndarray, m: MaterialParams) -> np.ndarray:
    """Density in terms of the Green-St Venant tensor: Q(2E) = lambda/2 (tr E)^2 + mu tr(E^2)."""
    return quadratic_form_Q(2.0 * np.asarray(E, dtype=float), m)


def svk_density(F: np.ndarray, m: MaterialParams):
    """
    St Venant-Kirchhoff density of a single deformation gradient.

    Returns:
        Q(F^T F - I) when det F > 0, otherwise the NONPHYSICAL sentinel.
    """
    F = np.asarray(F, dtype=float)
    if np.linalg.det(F) <= 0.0:
        return NONPHYSICAL
    return float(quadratic_form_Q(F.T @ F - np.eye(3), m))


def svk_density_field(F: np.ndarray, m: MaterialParams) -> tuple[np.ndarray, np.ndarray]:
    """
    Batched density for gradients of shape (N, 3, 3).

    Returns:
        (densities with 0 at nonphysical points, mask of nonphysical points)
    """
    F = np.asarray(F, dtype=float)
    bad = np.linalg.det(F) <= 0.0
    C = np.einsum("...ki,...kj->...ij", F, F) - np.eye(3)
    density = np.where(bad, 0.0, quadratic_form_Q(C, m))
    return density, bad


def dist_SO3(F: np.ndarray) -> np.ndarray:
    """
    Frobenius distance from F (..., 3, 3) to SO(3) via singular values.

    For det F <= 0 the smallest singular value enters with flipped sign.
    """
    F = np.asarray(F, dtype=float)
    sigma = np.linalg.svd(F, compute_uv=False)
    flip = np.linalg.det(F) <= 0.0
    sigma = np.array(sigma, copy=True)
    sigma[..., -1] = np.where(flip, -sigma[..., -1], sigma[..., -1])
    return np.sqrt(np.sum((sigma - 1.0) ** 2, axis=-1))
