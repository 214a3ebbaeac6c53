"""System family, eigenstructure, equilibria and atom membership.

Every system handled by this package has the form

    dx/dt = A x + f(x) B

with a fixed 3x3 matrix ``A`` whose spectrum is ``{c, a + ib, a - ib}`` and a
functional ``f`` that is constant inside each atom of a partition of R^3.
The atoms are separated by switching planes; three layouts are supported:

* ``TWO_ATOM``: one plane ``2 x1 - x3 = 0`` and two equilibria ``(-alpha, 0, 0)``,
  ``(alpha, 0, 0)``.
* ``FOUR_ATOM_SLANTED``: three parallel planes ``2 x1 - x3 = -2 gamma, 0, 2 gamma``.
* ``FOUR_ATOM_HIDDEN``: the central plane replaced by ``x1 = 0``; the two outer
  slanted planes are kept on their own half-space.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates the family's validity constraints."""


class PreconditionError(ValueError):
    """Raised when an operation's inputs violate its stated precondition."""


class Variant(str, enum.Enum):
    TWO_ATOM = "two-atom"
    FOUR_ATOM_SLANTED = "four-atom-slanted"
    FOUR_ATOM_HIDDEN = "four-atom-hidden"

    @property
    def four_atom(self) -> bool:
        return self is not Variant.TWO_ATOM


class PlaneId(str, enum.Enum):
    SW12 = "SW12"
    SW23 = "SW23"
    SW34 = "SW34"


@dataclass(frozen=True)
class SystemParams:
    """Scalar knobs of one piecewise-linear system.

    ``a`` and ``b`` set the unstable spiral (eigenvalues ``a +- ib``), ``c`` is
    the stable real eigenvalue, ``alpha`` the half distance between paired
    equilibria and ``gamma`` the outer offset of the four-atom layouts.
    Construction does not validate; :meth:`validate` (called by
    :func:`build_system`) does.
    """

    a: float
    b: float
    c: float
    alpha: float
    gamma: float = 0.0
    variant: Variant = Variant.TWO_ATOM

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("a", "b", "c", "alpha", "gamma"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def validate(self) -> None:
        if self.a <= 0:
            raise ParameterError(f"a must be > 0 (got {self.a})")
        if self.b <= 0:
            raise ParameterError(f"b must be > 0 (got {self.b})")
        if self.c >= 0:
            raise ParameterError(f"c must be < 0 (got {self.c})")
        if self.alpha <= 0:
            raise ParameterError(f"alpha must be > 0 (got {self.alpha})")
        if divergence(self) >= 0:
            raise ParameterError(
                f"system is not dissipative: divergence 2a + c = {divergence(self):g} >= 0 "
                "(dissipativity requires 2a < |c|)"
            )
        if self.variant is Variant.TWO_ATOM:
            if self.gamma != 0:
                raise ParameterError(f"two-atom systems require gamma = 0 (got {self.gamma})")
        elif self.gamma <= self.alpha:
            raise ParameterError(
                f"four-atom systems require gamma > alpha (got gamma={self.gamma}, alpha={self.alpha})"
            )

    def replace(self, **changes) -> "SystemParams":
        values = dict(a=self.a, b=self.b, c=self.c, alpha=self.alpha,
                      gamma=self.gamma, variant=self.variant)
        values.update(changes)
        return SystemParams(**values)

    @property
    def scale(self) -> float:
        """Characteristic length of the phase portrait, ``max(1, gamma)``."""
        return max(1.0, self.gamma)


def divergence(params: SystemParams) -> float:
    """Trace of ``A``, i.e. ``2a + c``; negative means dissipative."""
    return 2.0 * params.a + params.c


# Eigenvectors v1 = (1, 0, 1/2), v2 = (0, -1, 0), v3 = (-1, 0, 1) as columns.
_Q = np.array([[1.0, 0.0, -1.0],
               [0.0, -1.0, 0.0],
               [0.5, 0.0, 1.0]])
# Exact inverse of _Q; independent of the parameters.
_QINV = np.array([[2.0 / 3.0, 0.0, 2.0 / 3.0],
                  [0.0, -1.0, 0.0],
                  [-1.0 / 3.0, 0.0, 2.0 / 3.0]])


@dataclass(frozen=True)
class Eigenframe:
    """Real eigenbasis of ``A`` and its block-diagonal canonical form."""

    Q: np.ndarray
    Qinv: np.ndarray
    lambda1: float
    spiral: tuple[float, float]

    @property
    def E(self) -> np.ndarray:
        a, b = self.spiral
        return np.array([[self.lambda1, 0.0, 0.0],
                         [0.0, a, -b],
                         [0.0, b, a]])

    @property
    def Einv(self) -> np.ndarray:
        a, b = self.spiral
        r2 = a * a + b * b
        return np.array([[1.0 / self.lambda1, 0.0, 0.0],
                         [0.0, a / r2, b / r2],
                         [0.0, -b / r2, a / r2]])

    def propagator(self, t: float) -> np.ndarray:
        """``E(t) = exp(E t)`` in closed form."""
        a, b = self.spiral
        ea = np.exp(a * t)
        cs, sn = np.cos(b * t), np.sin(b * t)
        return np.array([[np.exp(self.lambda1 * t), 0.0, 0.0],
                         [0.0, ea * cs, -ea * sn],
                         [0.0, ea * sn, ea * cs]])


def matrix_A(a: float, b: float, c: float) -> np.ndarray:
    return np.array([
        [a / 3 + 2 * c / 3, b, 2 * c / 3 - 2 * a / 3],
        [-b / 3, a, 2 * b / 3],
        [c / 3 - a / 3, -b, 2 * a / 3 + c / 3],
    ])


def vector_B(a: float, b: float, c: float) -> np.ndarray:
    return np.array([-a / 3 - 2 * c / 3, b / 3, a / 3 - c / 3])


@dataclass(frozen=True)
class SwitchPlane:
    """Plane ``normal . x = offset``.

    ``x1_sign`` restricts the plane to one half-space of ``x1`` (hidden layout
    outer planes); ``0`` means unrestricted.
    """

    id: PlaneId
    normal: np.ndarray
    offset: float
    x1_sign: int = 0

    def value(self, x) -> np.ndarray:
        return np.asarray(x) @ self.normal - self.offset

    @property
    def membership_rule(self) -> str:
        if np.allclose(self.normal, (1.0, 0.0, 0.0)):
            return "x3 > 0 -> left atom (x1 < 0 side), x3 <= 0 -> right atom"
        return "x3 > 0 -> lower-index atom, x3 <= 0 -> higher-index atom"


@dataclass(frozen=True)
class AtomSpec:
    """One atom: its functional value, equilibrium and bounding half-spaces.

    Each ``(plane, side)`` pair asserts ``side * (normal . x - offset) > 0`` for
    interior points; an atom is the intersection of these half-spaces.
    """

    index: int
    f_value: float
    equilibrium: np.ndarray
    bounding_planes: tuple[tuple[SwitchPlane, int], ...]

    def contains_strictly(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for plane, side in self.bounding_planes:
            ok &= side * plane.value(x) > 0
        return ok


class ManifoldKind(str, enum.Enum):
    STABLE_LINE = "stable-line"
    UNSTABLE_PLANE = "unstable-plane"


@dataclass(frozen=True)
class Manifold:
    """Invariant line (along ``v1``) or plane (spanned by ``v2, v3``) of one equilibrium.

    For a line ``direction`` is ``v1``; for a plane ``normal . x = offset``.
    """

    kind: ManifoldKind
    anchor: np.ndarray
    direction: np.ndarray | None = None
    normal: np.ndarray | None = None
    offset: float | None = None

    def distance(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind is ManifoldKind.STABLE_LINE:
            d = x - self.anchor
            u = self.direction / np.linalg.norm(self.direction)
            return float(np.linalg.norm(d - (d @ u) * u))
        return float(abs(x @ self.normal - self.offset) / np.linalg.norm(self.normal))

    def contains(self, x, tol: float = 1e-12) -> bool:
        return self.distance(x) <= tol

    def describe(self) -> str:
        x1, _, x3 = self.anchor
        if self.kind is ManifoldKind.STABLE_LINE:
            # x - anchor parallel to (1, 0, 1/2):  x1 - x1* = 2 (x3 - x3*), x2 = 0
            return f"{{x1 - ({x1:g}) = 2 (x3 - ({x3:g})), x2 = 0}}"
        return f"{{x1 + x3 = {self.offset:g}}}"


@dataclass(frozen=True)
class PwlSystem:
    """Compiled system; immutable and safe to share between workers."""

    params: SystemParams
    A: np.ndarray
    B: np.ndarray
    Ainv: np.ndarray
    atoms: tuple[AtomSpec, ...]
    planes: tuple[SwitchPlane, ...]
    frame: Eigenframe

    @property
    def variant(self) -> Variant:
        return self.params.variant

    @property
    def equilibria(self) -> np.ndarray:
        return np.array([atom.equilibrium for atom in self.atoms])

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def atom(self, index: int) -> AtomSpec:
        return self.atoms[index - 1]

    def plane(self, plane_id: PlaneId | str) -> SwitchPlane:
        plane_id = PlaneId(plane_id)
        for p in self.planes:
            if p.id is plane_id:
                return p
        raise KeyError(f"{plane_id.value} is not a switching plane of a {self.variant.value} system")

    def field(self, atom: int, x) -> np.ndarray:
        """Affine vector field of ``atom`` evaluated at ``x`` (regardless of membership)."""
        return np.asarray(x, dtype=float) @ self.A.T + self.atom(atom).f_value * self.B

    def vector_field(self, x) -> np.ndarray:
        """Piecewise vector field: each point uses the field of the atom it belongs to."""
        x = np.asarray(x, dtype=float)
        idx = atom_of(self, x)
        f = np.array([atom.f_value for atom in self.atoms])[np.asarray(idx) - 1]
        return x @ self.A.T + np.multiply.outer(f, self.B)

    def atom_of(self, x):
        return atom_of(self, x)


def _planes_for(params: SystemParams) -> tuple[SwitchPlane, ...]:
    slanted = np.array([2.0, 0.0, -1.0])
    g = params.gamma
    if params.variant is Variant.TWO_ATOM:
        return (SwitchPlane(PlaneId.SW12, slanted, 0.0),)
    if params.variant is Variant.FOUR_ATOM_SLANTED:
        return (SwitchPlane(PlaneId.SW12, slanted, -2 * g),
                SwitchPlane(PlaneId.SW23, slanted, 0.0),
                SwitchPlane(PlaneId.SW34, slanted, 2 * g))
    return (SwitchPlane(PlaneId.SW12, slanted, -2 * g, x1_sign=-1),
            SwitchPlane(PlaneId.SW23, np.array([1.0, 0.0, 0.0]), 0.0),
            SwitchPlane(PlaneId.SW34, slanted, 2 * g, x1_sign=+1))


def _f_values(params: SystemParams) -> tuple[float, ...]:
    al, g = params.alpha, params.gamma
    if params.variant is Variant.TWO_ATOM:
        return (-al, al)
    return (-al - g, al - g, -al + g, al + g)


def _bounds_for(variant: Variant, planes: Sequence[SwitchPlane]) -> list[tuple]:
    if variant is Variant.TWO_ATOM:
        (sw,) = planes
        return [((sw, -1),), ((sw, +1),)]
    sw12, sw23, sw34 = planes
    if variant is Variant.FOUR_ATOM_SLANTED:
        return [((sw12, -1),),
                ((sw12, +1), (sw23, -1)),
                ((sw23, +1), (sw34, -1)),
                ((sw34, +1),)]
    return [((sw23, -1), (sw12, -1)),
            ((sw23, -1), (sw12, +1)),
            ((sw23, +1), (sw34, -1)),
            ((sw23, +1), (sw34, +1))]


def build_system(params: SystemParams) -> PwlSystem:
    """Validate ``params`` and compile the system.

    Raises
    ------
    ParameterError
        If ``a <= 0``, ``b <= 0``, ``c >= 0``, ``alpha <= 0``, the system is
        not dissipative, or ``gamma`` is inconsistent with the variant.
    """
    params.validate()
    a, b, c = params.a, params.b, params.c
    frame = Eigenframe(Q=_Q.copy(), Qinv=_QINV.copy(), lambda1=c, spiral=(a, b))
    A = matrix_A(a, b, c)
    B = vector_B(a, b, c)
    Ainv = frame.Q @ frame.Einv @ frame.Qinv
    planes = _planes_for(params)
    bounds = _bounds_for(params.variant, planes)
    atoms = []
    for i, (f, bnd) in enumerate(zip(_f_values(params), bounds), start=1):
        # -f A^{-1} B reduces exactly to (f, 0, 0)
        eq = np.array([f, 0.0, 0.0])
        atoms.append(AtomSpec(index=i, f_value=f, equilibrium=eq, bounding_planes=bnd))
    atoms.sort(key=lambda at: at.equilibrium[0])
    for plane in planes:
        plane.normal.setflags(write=False)
    for arr in (A, B, Ainv, frame.Q, frame.Qinv):
        arr.setflags(write=False)
    return PwlSystem(params=params, A=A, B=B, Ainv=Ainv, atoms=tuple(atoms),
                     planes=planes, frame=frame)


def atom_of(system: PwlSystem, x):
    """Index (1-based) of the atom containing ``x``.

    Total function; accepts a single point or an ``(..., 3)`` array. Points on
    a switching plane are resolved by the sign of ``x3``: ``x3 > 0`` goes to the
    atom on the lower-``x1`` side, ``x3 <= 0`` to the other one.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    x1, x3 = x[..., 0], x[..., 2]
    s = 2 * x1 - x3
    upper = x3 <= 0  # on-plane points with x3 <= 0 belong to the higher-index atom
    variant = system.variant
    g = system.params.gamma

    def beyond(value, offset):
        return (value > offset) | ((value == offset) & upper)

    if variant is Variant.TWO_ATOM:
        idx = 1 + beyond(s, 0.0).astype(int)
    elif variant is Variant.FOUR_ATOM_SLANTED:
        idx = 1 + beyond(s, -2 * g).astype(int) + beyond(s, 0.0) + beyond(s, 2 * g)
    else:
        left = 1 + beyond(s, -2 * g).astype(int)
        right = 3 + beyond(s, 2 * g).astype(int)
        # on x1 = 0 evaluate the one-sided limits: x3 > 0 takes the left atom
        s0 = -x3
        left0 = 1 + ((s0 > -2 * g) | ((s0 == -2 * g) & upper)).astype(int)
        right0 = 3 + ((s0 > 2 * g) | ((s0 == 2 * g) & upper)).astype(int)
        on = np.where(x3 > 0, left0, right0)
        idx = np.where(x1 < 0, left, np.where(x1 > 0, right, on))
    idx = np.asarray(idx, dtype=int)
    return int(idx[0]) if scalar else idx


def manifolds(system: PwlSystem) -> list[Manifold]:
    """Stable line and unstable plane of every equilibrium, in atom order."""
    v1 = system.frame.Q[:, 0].copy()
    normal = np.cross(system.frame.Q[:, 1], system.frame.Q[:, 2])
    normal = normal / normal[0]
    out = []
    for atom in system.atoms:
        eq = atom.equilibrium
        out.append(Manifold(ManifoldKind.STABLE_LINE, anchor=eq, direction=v1))
        out.append(Manifold(ManifoldKind.UNSTABLE_PLANE, anchor=eq, normal=normal,
                            offset=float(normal @ eq)))
    return out


def stable_manifold(system: PwlSystem, eq: int) -> Manifold:
    return manifolds(system)[2 * (eq - 1)]


def unstable_manifold(system: PwlSystem, eq: int) -> Manifold:
    return manifolds(system)[2 * (eq - 1) + 1]
