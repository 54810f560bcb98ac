"""Elastic constitutive matrices and material parameters.

Stress and strain vectors use the component order

    (xx, yy, zz, xy, yz, xz)

everywhere in this package: the three normal components first, then
the shear components with xy ahead of yz ahead of xz.  The 6x6 elastic
matrix maps the engineering strain vector in that order to the stress
vector in the same order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MaterialError

__all__ = [
    "VOIGT_COMPONENTS",
    "isotropic",
    "anisotropic",
    "packed_from_entries",
    "validate_elastic_matrix",
    "MaterialParams",
    "params_from_config",
    "max_wave_speed",
]

VOIGT_COMPONENTS = ("xx", "yy", "zz", "xy", "yz", "xz")

# relative eigenvalue floor below which the matrix counts as singular
_PD_RTOL = 1e-9


def validate_elastic_matrix(d: np.ndarray) -> None:
    """Require a symmetric positive-definite 6x6 elastic matrix.

    Positive definiteness is checked through the eigenvalues: the
    smallest one must exceed 1e-9 times the largest.  The error message
    names the offending eigenvalue.
    """
    d = np.asarray(d, dtype=float)
    if d.shape != (6, 6):
        raise MaterialError(f"elastic matrix must be 6x6, got {d.shape}")
    if not np.array_equal(d, d.T):
        raise MaterialError("elastic matrix must be exactly symmetric")
    w = np.linalg.eigvalsh(d)
    if w[0] <= _PD_RTOL * w[-1]:
        raise MaterialError(
            f"elastic matrix is singular or indefinite: eigenvalue {w[0]:.6e} "
            f"(largest {w[-1]:.6e})"
        )


def isotropic(E: float, nu: float) -> np.ndarray:
    """Isotropic elastic matrix from Young's modulus and Poisson's ratio.

    The normal block is E/((1+nu)(1-2nu)) * [[1-nu, nu, nu], ...] and the
    shear block is diagonal with the shear modulus E/(2(1+nu)); normal
    and shear components do not couple.

    Parameters
    ----------
    E : float
        Young's modulus, > 0.
    nu : float
        Poisson's ratio, inside (-1, 0.5).
    """
    if not E > 0.0:
        raise MaterialError(f"Young's modulus must be positive, got {E}")
    if not (-1.0 < nu < 0.5):
        raise MaterialError(f"Poisson's ratio must lie in (-1, 0.5), got {nu}")
    c = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    g = 0.5 * (1.0 - 2.0 * nu)  # times c this is the shear modulus
    d = np.zeros((6, 6))
    d[:3, :3] = c * nu
    np.fill_diagonal(d[:3, :3], c * (1.0 - nu))
    d[3, 3] = d[4, 4] = d[5, 5] = c * g
    validate_elastic_matrix(d)
    return d


def anisotropic(upper: np.ndarray) -> np.ndarray:
    """Elastic matrix from its 21 independent moduli.

    Parameters
    ----------
    upper : array_like, shape (21,)
        Upper-triangle entries row-major: c11..c16, c22..c26, c33..c36,
        c44..c46, c55, c56, c66 (units as given, typically Pa).

    The matrix is symmetrized from the upper triangle and must pass the
    positive-definiteness check.
    """
    upper = np.asarray(upper, dtype=float)
    if upper.shape != (21,):
        raise MaterialError(f"need 21 upper-triangle moduli, got shape {upper.shape}")
    d = np.zeros((6, 6))
    iu = np.triu_indices(6)
    d[iu] = upper
    d = d + np.triu(d, 1).T
    validate_elastic_matrix(d)
    return d


def packed_from_entries(entries) -> np.ndarray:
    """Pack sparse (i, j, value) moduli into the 21-vector for `anisotropic`.

    Indices are 1-based rows/columns of the 6x6 matrix; (i, j) and
    (j, i) address the same modulus.  Unspecified entries are zero;
    duplicates are rejected.
    """
    upper = np.zeros((6, 6))
    seen = set()
    for entry in entries:
        try:
            i, j, value = entry
        except (TypeError, ValueError) as exc:
            raise MaterialError(f"bad moduli entry {entry!r}: need (i, j, value)") from exc
        i, j = int(i), int(j)
        if not (1 <= i <= 6 and 1 <= j <= 6):
            raise MaterialError(f"moduli indices must be 1..6, got ({i}, {j})")
        a, b = (i - 1, j - 1) if i <= j else (j - 1, i - 1)
        if (a, b) in seen:
            raise MaterialError(f"duplicate moduli entry for ({i}, {j})")
        seen.add((a, b))
        upper[a, b] = float(value)
    return upper[np.triu_indices(6)]


@dataclass
class MaterialParams:
    """Bundle of material data used by the element kernels.

    Attributes
    ----------
    d : ndarray, shape (6, 6)
        Elastic matrix (component order per VOIGT_COMPONENTS).
    rho : float
        Mass density, > 0.
    h : float
        Membrane thickness, > 0.
    strain_threshold, stress_threshold : float or None
        Optional componentwise magnitudes above which an element is
        flagged in the per-element output.
    """

    d: np.ndarray
    rho: float
    h: float
    strain_threshold: float | None = None
    stress_threshold: float | None = None


def params_from_config(cfg: dict) -> MaterialParams:
    """Build MaterialParams from the `material` section of a JSON config.

    Isotropic materials take E (Pa) and nu; anisotropic ones take
    `moduli_gpa`, a list of [i, j, value] entries in GPa, unspecified
    entries zero.  Both take rho (kg/m^3) and h (m).
    """

    def need(key):
        if key not in cfg:
            raise ConfigError(f"missing config key: material.{key}")
        return cfg[key]

    kind = need("type")
    try:
        if kind == "isotropic":
            d = isotropic(float(need("E")), float(need("nu")))
        elif kind == "anisotropic":
            packed = packed_from_entries(need("moduli_gpa"))
            d = anisotropic(packed * 1e9)
        else:
            raise ConfigError(f"unknown material.type {kind!r}")
        rho = float(need("rho"))
        h = float(need("h"))
    except MaterialError as exc:
        raise ConfigError(f"invalid material: {exc}") from exc
    if not rho > 0.0:
        raise ConfigError(f"material.rho must be positive, got {rho}")
    if not h > 0.0:
        raise ConfigError(f"material.h must be positive, got {h}")

    def opt(key):
        v = cfg.get(key)
        return None if v is None else float(v)

    return MaterialParams(
        d=d,
        rho=rho,
        h=h,
        strain_threshold=opt("strain_threshold"),
        stress_threshold=opt("stress_threshold"),
    )


def max_wave_speed(material: MaterialParams) -> float:
    """Upper estimate sqrt(max diagonal modulus / rho) used for timesteps."""
    return float(np.sqrt(np.max(np.diag(material.d)) / material.rho))
