"""Centroidal dynamics layer.

Domain types (contacts, stances, centroidal states) and the pure-function
operations built on them: net contact wrench, pendular force, friction-cone
membership, ZMP, DCM, and the equal-split excitation baseline.  Everything
here is a pure function on immutable value types and safe to call
concurrently.

Conventions: world frame, z up, SI units.  Forces are contact forces in
Newtons; ``hdot`` is the rate of change of angular momentum about the CoM
in N*m.  Gravity is passed as the positive scalar g; the gravity force on
the body is ``(0, 0, -m*g)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

STANDARD_GRAVITY = 9.81
DEFAULT_MIN_HEIGHT = 0.05

_ZHAT = np.array([0.0, 0.0, 1.0])


class DimensionMismatchError(ValueError):
    """A vector or list argument has the wrong length."""


class DegenerateStanceError(ValueError):
    """Stance geometry too degenerate for the requested operation."""


class StanceError(ValueError):
    """Operation requires a different number of contacts."""


def as_vec3(v, name: str = "vector") -> np.ndarray:
    """Coerce to a finite (3,) float array."""
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise DimensionMismatchError(f"{name} must have 3 components, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite components: {a}")
    return a


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return as_vec3((x, y, z))


def cross_matrix(v) -> np.ndarray:
    """Matrix [v]x with [v]x @ w == cross(v, w)."""
    x, y, z = as_vec3(v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@dataclass(frozen=True)
class Contact:
    """A point contact: world position, friction coefficient, surface normal."""

    position: np.ndarray
    mu: float
    normal: np.ndarray = field(default_factory=lambda: _ZHAT.copy())

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position, "contact position"))
        n = as_vec3(self.normal, "contact normal")
        if self.mu <= 0.0:
            raise ValueError(f"friction coefficient must be positive, got {self.mu}")
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError(f"contact normal must be unit length, got |n|={np.linalg.norm(n)}")
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True)
class StanceConfig:
    """A set of contacts plus body mass and gravity.

    ``support_region`` is the convex hull of the contact positions projected
    to the ground plane, as an (M, 2) vertex array in counter-clockwise
    order (M may be 1 or 2 for degenerate stances).
    """

    contacts: tuple[Contact, ...]
    mass: float
    gravity: float = STANDARD_GRAVITY

    def __post_init__(self):
        object.__setattr__(self, "contacts", tuple(self.contacts))
        if len(self.contacts) < 1:
            raise StanceError("stance needs at least one contact")
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.gravity <= 0.0:
            raise ValueError(f"gravity must be positive, got {self.gravity}")

    @property
    def n_contacts(self) -> int:
        return len(self.contacts)

    @property
    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.contacts])

    @property
    def mus(self) -> np.ndarray:
        return np.array([c.mu for c in self.contacts])

    @property
    def normals(self) -> np.ndarray:
        return np.array([c.normal for c in self.contacts])

    @property
    def support_region(self) -> np.ndarray:
        return convex_hull_2d(self.positions[:, :2])

    def weight_force(self) -> np.ndarray:
        """Contact-force sum that holds the body static: (0, 0, m*g)."""
        return np.array([0.0, 0.0, self.mass * self.gravity])


@dataclass(frozen=True)
class CentroidalState:
    """CoM kinematics plus the virtual pivot it is measured against.

    ``height`` is the pivot-to-CoM distance along the support normal; if not
    given it defaults to the vertical gap ``com_z - pivot_z``.
    """

    com: np.ndarray
    com_vel: np.ndarray
    com_acc: np.ndarray
    pivot: np.ndarray
    height: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "com", as_vec3(self.com, "com"))
        object.__setattr__(self, "com_vel", as_vec3(self.com_vel, "com_vel"))
        object.__setattr__(self, "com_acc", as_vec3(self.com_acc, "com_acc"))
        object.__setattr__(self, "pivot", as_vec3(self.pivot, "pivot"))
        h = self.height
        if h is None:
            h = float(self.com[2] - self.pivot[2])
        h = float(h)
        if not np.isfinite(h) or h <= 0.0:
            raise DegenerateStanceError(f"pivot-to-CoM height must be positive, got {h}")
        object.__setattr__(self, "height", h)


@dataclass(frozen=True)
class NetWrench:
    """Net force on the CoM (gravity included) and moment rate about it."""

    force: np.ndarray
    hdot: np.ndarray


def net_wrench(stance: StanceConfig, com, forces) -> NetWrench:
    """Total CoM force and angular-momentum rate for given contact forces.

    force = sum_i f_i + m*g*(0,0,-1)      (equals m * com acceleration)
    hdot  = sum_i (r_i - c) x f_i
    """
    c = as_vec3(com, "com")
    f = np.atleast_2d(np.asarray(forces, dtype=float))
    if f.shape != (stance.n_contacts, 3):
        raise DimensionMismatchError(
            f"expected {stance.n_contacts} forces of dim 3, got shape {f.shape}"
        )
    total = f.sum(axis=0) + np.array([0.0, 0.0, -stance.mass * stance.gravity])
    arms = stance.positions - c
    hdot = np.cross(arms, f).sum(axis=0)
    return NetWrench(force=total, hdot=hdot)


def pendular_force(
    state: CentroidalState,
    mass: float,
    gravity: float = STANDARD_GRAVITY,
    h_min: float = DEFAULT_MIN_HEIGHT,
) -> np.ndarray:
    """The unique contact-force sum colinear with (c - p): (m*g/h) * (c - p).

    Passing the result back through :func:`net_wrench` for a single contact
    at the pivot yields hdot = 0.
    """
    if state.height < h_min:
        raise DegenerateStanceError(
            f"pivot-to-CoM height {state.height} below minimum {h_min}"
        )
    return (mass * gravity / state.height) * (state.com - state.pivot)


def friction_contains(contact: Contact, f, tol: float = 1e-9) -> bool:
    """Second-order friction cone membership with relative tolerance.

    True iff f_n >= -tol*||f|| and ||f_t|| <= mu*f_n + tol*||f||, components
    taken about ``contact.normal``.  The slack is homogeneous in f, so
    membership is invariant under positive rescaling of the force.
    """
    if tol < 0.0:
        raise ValueError("tolerance must be non-negative")
    fv = as_vec3(f, "force")
    slack = tol * float(np.linalg.norm(fv))
    fn = float(fv @ contact.normal)
    ft = float(np.linalg.norm(fv - fn * contact.normal))
    return fn >= -slack and ft <= contact.mu * fn + slack


def cone_half_angle(mu: float) -> float:
    """Friction-cone half angle arctan(mu), in degrees."""
    if mu <= 0.0:
        raise ValueError(f"friction coefficient must be positive, got {mu}")
    return float(np.degrees(np.arctan(mu)))


def zmp(state: CentroidalState, gravity: float = STANDARD_GRAVITY) -> np.ndarray:
    """Zero-moment point c_xy - (h/g) * acc_xy."""
    return state.com[:2] - (state.height / gravity) * state.com_acc[:2]


def pendulum_frequency(height: float, gravity: float = STANDARD_GRAVITY) -> float:
    """Inverted-pendulum natural frequency omega = sqrt(g/h)."""
    if height <= 0.0:
        raise DegenerateStanceError(f"height must be positive, got {height}")
    return float(np.sqrt(gravity / height))


def dcm(state: CentroidalState, gravity: float = STANDARD_GRAVITY) -> np.ndarray:
    """Divergent component of motion xi = c_xy + vel_xy / omega."""
    omega = pendulum_frequency(state.height, gravity)
    return state.com[:2] + state.com_vel[:2] / omega


def dcm_rate(xi, p_xy, omega: float) -> np.ndarray:
    """Orbital DCM dynamics xi_dot = omega * (xi - p_xy)."""
    xi = np.asarray(xi, dtype=float).reshape(2)
    p = np.asarray(p_xy, dtype=float).reshape(2)
    return omega * (xi - p)


def equal_split_forces(stance: StanceConfig, f_net) -> np.ndarray:
    """(N, 3) array of f_net / N at every contact."""
    fn = as_vec3(f_net, "f_net")
    return np.tile(fn / stance.n_contacts, (stance.n_contacts, 1))


def excitation_baseline(stance: StanceConfig, com, com_acc) -> np.ndarray:
    """Angular-momentum rate of the equal-split force distribution, in N*m.

    The contact-force sum is fixed by Newton's law, F_net = m*(acc - g),
    and split equally across contacts.  For a coplanar stance with the CoM
    a height z_c above the contact centroid this reduces to
    m * z_c * (a_y, -a_x, 0).
    """
    acc = as_vec3(com_acc, "com_acc")
    f_net = stance.mass * acc + np.array([0.0, 0.0, stance.mass * stance.gravity])
    forces = equal_split_forces(stance, f_net)
    return net_wrench(stance, com, forces).hdot


def center_of_pressure(stance: StanceConfig, forces) -> np.ndarray:
    """Ground-plane point about which the contact tangential moment vanishes.

    Assumes coplanar contacts at z ~ 0; requires positive total normal force.
    """
    f = np.atleast_2d(np.asarray(forces, dtype=float))
    if f.shape != (stance.n_contacts, 3):
        raise DimensionMismatchError(
            f"expected {stance.n_contacts} forces of dim 3, got shape {f.shape}"
        )
    fz = f[:, 2].sum()
    if fz <= 0.0:
        raise DegenerateStanceError("center of pressure undefined for non-positive load")
    return (f[:, 2] @ stance.positions[:, :2]) / fz


# -- support-region geometry -------------------------------------------------

def _cross2(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def convex_hull_2d(points) -> np.ndarray:
    """Convex hull (CCW, no repeated first vertex) of an (N, 2) point set.

    Degenerate inputs are fine: collinear sets give the two extreme points,
    coincident sets give a single point.  Andrew's monotone chain.
    """
    pts = np.unique(np.round(np.atleast_2d(np.asarray(points, dtype=float)), 12), axis=0)
    if pts.shape[0] <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(chain_pts):
        chain: list[np.ndarray] = []
        for p in chain_pts:
            while len(chain) >= 2 and _cross2(chain[-1] - chain[-2], p - chain[-2]) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) <= 1:  # fully collinear
        return np.array([pts[0], pts[-1]])
    return np.array(hull)


def clamp_to_polygon(poly, p) -> np.ndarray:
    """Closest point of a convex polygon (or segment, or point) to p."""
    v = np.atleast_2d(np.asarray(poly, dtype=float))
    p = np.asarray(p, dtype=float).reshape(2)
    if v.shape[0] == 1:
        return v[0].copy()
    if point_in_polygon(v, p):
        return p.copy()
    best, best_d = None, np.inf
    m = v.shape[0]
    segs = [(v[i], v[(i + 1) % m]) for i in range(m if m > 2 else 1)]
    for a, b in segs:
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        q = a + t * ab
        d = float(np.linalg.norm(p - q))
        if d < best_d:
            best, best_d = q, d
    return best


def point_in_polygon(poly, p, tol: float = 1e-12) -> bool:
    """Membership in a convex CCW polygon; degenerate polygons handled."""
    v = np.atleast_2d(np.asarray(poly, dtype=float))
    p = np.asarray(p, dtype=float).reshape(2)
    if v.shape[0] == 1:
        return bool(np.linalg.norm(p - v[0]) <= tol)
    if v.shape[0] == 2:
        a, b = v
        ab = b - a
        t = float((p - a) @ ab / (ab @ ab))
        return bool(abs(_cross2(ab, p - a)) <= tol * max(1.0, np.linalg.norm(ab))
                    and -tol <= t <= 1.0 + tol)
    m = v.shape[0]
    for i in range(m):
        edge = v[(i + 1) % m] - v[i]
        if _cross2(edge, p - v[i]) < -tol * max(1.0, np.linalg.norm(edge)):
            return False
    return True


# -- linear-algebra glue shared by the QP and analysis layers ----------------

@lru_cache(maxsize=32)
def sum_constraint_nullspace(n_contacts: int) -> np.ndarray:
    """Orthonormal basis of {df in R^(3N): sum_i df_i = 0}, shape (3N, 3(N-1)).

    Built as W (x) I_3 where W spans the zero-sum subspace of R^N, so the
    block structure per contact is explicit.  Deterministic across calls.
    """
    if n_contacts < 1:
        raise StanceError("need at least one contact")
    if n_contacts == 1:
        return np.zeros((3, 0))
    ones = np.ones((1, n_contacts))
    _, _, vt = np.linalg.svd(ones)
    w = vt[1:].T  # (N, N-1), orthonormal, each column sums to 0
    return np.kron(w, np.eye(3))


def moment_arm_matrix(stance: StanceConfig, com) -> np.ndarray:
    """(3, 3N) map from stacked contact forces to hdot: [ [(r_1-c)x] ... ]."""
    c = as_vec3(com, "com")
    return np.hstack([cross_matrix(r - c) for r in stance.positions])
