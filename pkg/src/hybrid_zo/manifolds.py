"""Closed-form geometry of the unit circle, the 2-sphere and flat tori.

Points and tangent vectors are plain ``numpy`` arrays in embedded
coordinates whose last axis is the ambient dimension; every method
broadcasts over leading axes so that batches of points are handled in a
single call.
"""

from __future__ import annotations

import math

import numpy as np

from .constants import TOL


class ManifoldError(ValueError):
    pass


class InvalidPointError(ManifoldError):
    pass


class InvalidTangentError(ManifoldError):
    pass


class DegenerateProjectionError(ManifoldError):
    pass


class KindMismatchError(ManifoldError):
    pass


def _norm(x):
    return np.sqrt((x * x).sum(axis=-1))


class Manifold:
    """Common interface; subclasses are :class:`Circle`, :class:`Sphere2`
    and :class:`Torus`."""

    name: str
    dim: int
    ambient_dim: int
    injectivity_radius: float = math.pi

    def __eq__(self, other):
        return type(self) is type(other) and self.dim == other.dim

    def __hash__(self):
        return hash((type(self).__name__, self.dim))

    def __repr__(self):
        return f"{type(self).__name__}()"

    # -- validation -----------------------------------------------------
    def point_violation(self, z):
        """Largest deviation from the unit-norm invariant, per point."""
        raise NotImplementedError

    def tangent_violation(self, z, v):
        raise NotImplementedError

    def check_point(self, z, tol=TOL.point):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.ambient_dim:
            raise InvalidPointError(
                f"{self.name}: expected ambient dimension {self.ambient_dim}, got {z.shape[-1]}"
            )
        worst = float(np.max(self.point_violation(z), initial=0.0))
        if worst > tol:
            raise InvalidPointError(f"{self.name}: point off the manifold by {worst:.3e}")
        return z

    def check_tangent(self, z, v, tol=TOL.tangent):
        worst = float(np.max(self.tangent_violation(z, v), initial=0.0))
        if worst > tol:
            raise InvalidTangentError(f"{self.name}: vector not tangent (violation {worst:.3e})")

    def _same_kind(self, z1, z2):
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        if z1.shape[-1] != self.ambient_dim or z2.shape[-1] != self.ambient_dim:
            raise KindMismatchError(
                f"{self.name}: points of ambient dimension {z1.shape[-1]} and {z2.shape[-1]}"
            )
        return z1, z2

    def check_same(self, other):
        if other != self:
            raise KindMismatchError(f"manifold mismatch: {self!r} vs {other!r}")

    # -- geometry -------------------------------------------------------
    def project(self, p):
        raise NotImplementedError

    def to_tangent(self, z, v):
        """Orthogonal projection of an ambient vector onto ``T_z M``."""
        raise NotImplementedError

    def exp(self, z, v, check=True):
        raise NotImplementedError

    def distance(self, z1, z2):
        raise NotImplementedError

    def tangent_frame(self, z):
        """Orthonormal frame of ``T_z M`` with shape ``(..., dim, ambient_dim)``."""
        raise NotImplementedError

    def random_point(self, rng, size=()):
        raise NotImplementedError

    def grid(self, count):
        """Deterministic, roughly uniform set of ``count`` points."""
        raise NotImplementedError

    def random_tangent(self, rng, z, scale=1.0):
        z = np.asarray(z, dtype=float)
        v = rng.standard_normal(z.shape)
        return scale * self.to_tangent(z, v)


def cross3(a, b):
    """``a x b`` over the last axis; much cheaper than ``np.cross`` on small batches."""
    a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2]
    b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    out[..., 0] = a2 * b3 - a3 * b2
    out[..., 1] = a3 * b1 - a1 * b3
    out[..., 2] = a1 * b2 - a2 * b1
    return out


def _exp_unit_sphere(z, v):
    nv = _norm(v)[..., None]
    small = nv < 1e-300
    safe = np.where(small, 1.0, nv)
    out = np.cos(nv) * z + np.sin(nv) * (v / safe)
    out = np.where(small, z, out)
    return out / _norm(out)[..., None]


def _unit_sphere_distance(z1, z2):
    # Same value as arccos(<z1, z2>) but accurate for nearly equal or
    # nearly antipodal points.
    return 2.0 * np.arctan2(_norm(z1 - z2), _norm(z1 + z2))


class _UnitSphere(Manifold):
    def point_violation(self, z):
        return np.abs(_norm(np.asarray(z, dtype=float)) - 1.0)

    def tangent_violation(self, z, v):
        return np.abs(np.sum(np.asarray(z) * np.asarray(v), axis=-1))

    def project(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.ambient_dim:
            raise InvalidPointError(
                f"{self.name}: expected ambient dimension {self.ambient_dim}, got {p.shape[-1]}"
            )
        n = _norm(p)
        if (n < TOL.degenerate).any():
            raise DegenerateProjectionError(f"{self.name}: cannot normalize a vector of norm {np.min(n):.3e}")
        return p / n[..., None]

    def to_tangent(self, z, v):
        return v - (z * v).sum(axis=-1, keepdims=True) * z

    def exp(self, z, v, check=True):
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        if check:
            self.check_tangent(z, v)
        return _exp_unit_sphere(z, v)

    def distance(self, z1, z2):
        z1, z2 = self._same_kind(z1, z2)
        return _unit_sphere_distance(z1, z2)

    def random_point(self, rng, size=()):
        size = (size,) if isinstance(size, int) else tuple(size)
        return self.project(rng.standard_normal(size + (self.ambient_dim,)))


class Circle(_UnitSphere):
    """The unit circle S^1 in R^2."""

    name = "circle"
    dim = 1
    ambient_dim = 2

    def tangent_frame(self, z):
        z = np.asarray(z, dtype=float)
        e = np.empty(z.shape[:-1] + (1, 2))
        e[..., 0, 0] = -z[..., 1]
        e[..., 0, 1] = z[..., 0]
        return e

    def grid(self, count):
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.stack((np.cos(theta), np.sin(theta)), axis=-1)

    @staticmethod
    def from_angle(theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack((np.cos(theta), np.sin(theta)), axis=-1)

    @staticmethod
    def angle(z):
        z = np.asarray(z, dtype=float)
        return np.arctan2(z[..., 1], z[..., 0])


class Sphere2(_UnitSphere):
    """The unit 2-sphere S^2 in R^3."""

    name = "sphere"
    dim = 2
    ambient_dim = 3

    def tangent_frame(self, z):
        # Gram-Schmidt the coordinate axis least aligned with z, then
        # complete with a cross product.
        z = np.asarray(z, dtype=float)
        a = (np.arange(3) == np.abs(z).argmin(axis=-1)[..., None]).astype(float)
        e1 = a - (a * z).sum(axis=-1, keepdims=True) * z
        out = np.empty(z.shape[:-1] + (2, 3))
        out[..., 0, :] = e1 / _norm(e1)[..., None]
        out[..., 1, :] = cross3(z, out[..., 0, :])
        return out

    def grid(self, count):
        """Fibonacci sphere points."""
        k = np.arange(count) + 0.5
        z3 = 1.0 - 2.0 * k / count
        r = np.sqrt(np.clip(1.0 - z3 * z3, 0.0, None))
        golden = np.pi * (3.0 - np.sqrt(5.0))
        phi = golden * np.arange(count)
        return np.stack((r * np.cos(phi), r * np.sin(phi), z3), axis=-1)

    @staticmethod
    def azimuth_elevation(z):
        z = np.asarray(z, dtype=float)
        az = np.arctan2(z[..., 1], z[..., 0])
        el = np.arcsin(np.clip(z[..., 2], -1.0, 1.0))
        return az, el


class Torus(Manifold):
    """The flat torus T^n embedded in R^{2n} as n unit circles."""

    name = "torus"

    def __init__(self, n):
        if int(n) != n or n < 1:
            raise ValueError(f"torus dimension must be a positive integer, got {n!r}")
        self.dim = int(n)
        self.ambient_dim = 2 * self.dim

    def __repr__(self):
        return f"Torus({self.dim})"

    def _pairs(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(x.shape[:-1] + (self.dim, 2))

    def _flat(self, x):
        return x.reshape(x.shape[:-2] + (self.ambient_dim,))

    def point_violation(self, z):
        return np.max(np.abs(_norm(self._pairs(z)) - 1.0), axis=-1)

    def tangent_violation(self, z, v):
        return np.max(np.abs(np.sum(self._pairs(z) * self._pairs(v), axis=-1)), axis=-1)

    def project(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.ambient_dim:
            raise InvalidPointError(f"torus: expected ambient dimension {self.ambient_dim}, got {p.shape[-1]}")
        pp = self._pairs(p)
        n = _norm(pp)
        if (n < TOL.degenerate).any():
            raise DegenerateProjectionError(f"torus: cannot normalize a block of norm {np.min(n):.3e}")
        return self._flat(pp / n[..., None])

    def to_tangent(self, z, v):
        zp, vp = self._pairs(z), self._pairs(v)
        return self._flat(vp - np.sum(zp * vp, axis=-1, keepdims=True) * zp)

    def exp(self, z, v, check=True):
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        if check:
            self.check_tangent(z, v)
        return self._flat(_exp_unit_sphere(self._pairs(z), self._pairs(v)))

    def distance(self, z1, z2):
        z1, z2 = self._same_kind(z1, z2)
        d = _unit_sphere_distance(self._pairs(z1), self._pairs(z2))
        return np.sqrt(np.sum(d * d, axis=-1))

    def tangent_frame(self, z):
        zp = self._pairs(z)
        per = np.stack((-zp[..., 1], zp[..., 0]), axis=-1)  # (..., n, 2)
        frame = np.zeros(zp.shape[:-2] + (self.dim, self.ambient_dim))
        for i in range(self.dim):
            frame[..., i, 2 * i : 2 * i + 2] = per[..., i, :]
        return frame

    def random_point(self, rng, size=()):
        size = (size,) if isinstance(size, int) else tuple(size)
        theta = rng.uniform(0.0, 2.0 * np.pi, size + (self.dim,))
        return self.from_angles(theta)

    def grid(self, count):
        per_axis = max(1, round(count ** (1.0 / self.dim)))
        axes = [2.0 * np.pi * np.arange(per_axis) / per_axis] * self.dim
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return self.from_angles(mesh)

    def from_angles(self, theta):
        theta = np.asarray(theta, dtype=float)
        pairs = np.stack((np.cos(theta), np.sin(theta)), axis=-1)
        return self._flat(pairs)


CIRCLE = Circle()
SPHERE = Sphere2()


def manifold_from_name(name):
    """``"circle"``, ``"sphere"`` or ``"torus<n>"`` (e.g. ``"torus3"``)."""
    if name in ("circle", "S1"):
        return CIRCLE
    if name in ("sphere", "S2"):
        return SPHERE
    if name.startswith("torus"):
        return Torus(int(name[5:] or 1))
    raise ValueError(f"unknown manifold {name!r}")


def manifold_name(manifold):
    if isinstance(manifold, Torus):
        return f"torus{manifold.dim}"
    return manifold.name


# Module-level spellings of the geometric operations.


def exp_map(manifold, z, v):
    return manifold.exp(z, v)


def distance(manifold, z1, z2):
    return manifold.distance(z1, z2)


def project_to_manifold(manifold, p):
    return manifold.project(p)


def tangent_frame(manifold, z):
    return manifold.tangent_frame(z)


def injectivity_radius(manifold):
    return manifold.injectivity_radius
