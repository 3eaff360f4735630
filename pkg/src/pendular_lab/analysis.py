"""Closed-form balance analysis.

Moment-map SVD and the foot-span singular values, the calibration constant
relating the balance weight to the residual moment, the two-contact
geometric floor and its minimum-norm canceller, the critical acceleration
where the friction cone pins the canceller (with the non-smooth kink in the
infimum curve), the task prefactor, and a brute-force pointwise certificate
that the pendular force minimizes the moment rate.

Floors and infimum curves are reported per unit mass (m^2/s^2); the
calibration constant K is computed on raw moments (N*m) so that it overlays
the raw residual curve as K/alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import forceqp
from .model import (
    DegenerateStanceError,
    StanceConfig,
    StanceError,
    as_vec3,
    excitation_baseline,
    friction_contains,
    moment_arm_matrix,
    sum_constraint_nullspace,
)


class RankError(ValueError):
    """The moment map lacks the rank needed for this analysis."""


# -- moment map and scaling constant ------------------------------------------

@dataclass(frozen=True)
class MomentJacobian:
    """SVD data of the map from null-space force coordinates to hdot."""

    matrix: np.ndarray  # (3, 3(N-1))
    basis: np.ndarray  # (3N, 3(N-1)) orthonormal null-space basis
    singular_values: np.ndarray  # (3,) descending
    left_vectors: np.ndarray  # (3, 3) orthogonal U


def moment_jacobian(stance: StanceConfig, com) -> MomentJacobian:
    """Moment map restricted to redistributions with zero force sum.

    Columns are the hdot responses to the orthonormal basis vectors of
    {df : sum_i df_i = 0}; its singular values do not depend on the basis
    choice.  Needs at least two contacts.
    """
    if stance.n_contacts < 2:
        raise RankError("moment map needs at least 2 contacts")
    basis = sum_constraint_nullspace(stance.n_contacts)
    mat = moment_arm_matrix(stance, com) @ basis
    u, sig, _ = np.linalg.svd(mat)
    return MomentJacobian(matrix=mat, basis=basis, singular_values=sig[:3], left_vectors=u)


def rect_stance_sigmas(lx: float, ly: float) -> tuple[float, float, float]:
    """Exact singular values for a rectangular four-foot stance with the CoM
    above the centroid: the geometric foot spans (2*sqrt(lx^2+ly^2), 2lx, 2ly),
    sorted descending."""
    if lx <= 0.0 or ly <= 0.0:
        raise ValueError("half spans must be positive")
    sig = sorted((2.0 * math.hypot(lx, ly), 2.0 * lx, 2.0 * ly), reverse=True)
    return tuple(sig)


def scaling_constant(jac: MomentJacobian, excitation_samples) -> float:
    """Residual constant K = sqrt(sum_k <h_k^2>_t / s_k^4).

    ``excitation_samples`` are equal-split baseline moments (N*m) sampled
    over the motion; h_k projects them on the left singular vectors.  For
    alpha*s_k^2 >> gamma the residual moment follows gamma*K/alpha.
    """
    sig = jac.singular_values
    if sig[2] <= 1e-12 * max(1.0, sig[0]):
        raise RankError("moment map is rank deficient; use the floor analysis instead")
    samples = np.atleast_2d(np.asarray(list(excitation_samples), dtype=float))
    if samples.size == 0:
        return 0.0
    h = samples @ jac.left_vectors  # (T, 3) modal coordinates
    mean_sq = (h * h).mean(axis=0)
    return float(np.sqrt(np.sum(mean_sq / sig**4)))


def alpha_for_residual(k: float, eps_target: float) -> float:
    """Weight achieving a target residual: alpha* = K / eps^2."""
    if eps_target <= 0.0:
        raise ValueError("target residual must be positive")
    return float(k) / float(eps_target) ** 2


def task_prefactor(alpha: float, lam: float) -> float:
    """Fraction lam/(alpha+lam) of the moment-rate target realized at the optimum."""
    if alpha + lam <= 0.0:
        raise ValueError("alpha + lam must be positive")
    return float(lam) / float(alpha + lam)


# -- two-contact floor ----------------------------------------------------------

@dataclass(frozen=True)
class FloorReport:
    d_hat: np.ndarray  # unit foot-pair axis
    geometric_floor: float  # m^2/s^2 per unit mass
    floor_fraction: float  # |H0 . d_hat| / ||H0||, nan when H0 = 0
    canceller: np.ndarray  # minimum-norm antisymmetric force adjustment (N)
    canceller_feasible: bool


def _two_contact_geometry(stance: StanceConfig, com):
    if stance.n_contacts != 2:
        raise StanceError(f"floor analysis needs exactly 2 contacts, got {stance.n_contacts}")
    p1, p2 = stance.positions
    d = p1 - p2
    norm_d = float(np.linalg.norm(d))
    if norm_d < 1e-12:
        raise DegenerateStanceError("the two contacts coincide")
    d_hat = d / norm_d
    if d_hat[0] < 0.0:  # sign normalization: x component >= 0
        d_hat = -d_hat
    r = 0.5 * (p1 + p2) - as_vec3(com, "com")
    return d, d_hat, r


def geometric_floor(stance2: StanceConfig, com, f_net) -> FloorReport:
    """Uncancellable moment rate per unit mass in a two-contact stance.

    floor = |(r x F_net) . d_hat| / m with r from the foot midpoint to the
    CoM reversed; it is attained by the QP exactly when the minimum-norm
    canceller delta* = D x H0_perp / ||D||^2 keeps both forces inside their
    friction cones.
    """
    d, d_hat, r = _two_contact_geometry(stance2, com)
    fn = as_vec3(f_net, "f_net")
    h0 = np.cross(r, fn)
    h0_par = (h0 @ d_hat) * d_hat
    h0_perp = h0 - h0_par
    delta = np.cross(d, h0_perp) / float(d @ d)
    half = fn / 2.0
    feasible = friction_contains(stance2.contacts[0], half + delta, tol=1e-9) and \
        friction_contains(stance2.contacts[1], half - delta, tol=1e-9)
    norm_h0 = float(np.linalg.norm(h0))
    fraction = abs(float(h0 @ d_hat)) / norm_h0 if norm_h0 > 0.0 else float("nan")
    return FloorReport(
        d_hat=d_hat,
        geometric_floor=abs(float(h0 @ d_hat)) / stance2.mass,
        floor_fraction=fraction,
        canceller=delta,
        canceller_feasible=bool(feasible),
    )


def floor_fraction_sweep(stance2: StanceConfig, com, directions, accel_mag: float):
    """Fraction of the baseline moment along d_hat per excitation heading.

    ``directions`` are unit 2-vectors; the excitation is the equal-split
    baseline of a horizontal acceleration of magnitude ``accel_mag`` along
    each heading.  Returns one fraction per heading, None where the
    excitation vanishes.
    """
    _two_contact_geometry(stance2, com)  # validates the stance
    out = []
    for direction in directions:
        dxy = np.asarray(direction, dtype=float).reshape(2)
        acc = np.array([accel_mag * dxy[0], accel_mag * dxy[1], 0.0])
        h0 = excitation_baseline(stance2, com, acc)
        fn = stance2.mass * acc + stance2.weight_force()
        report = geometric_floor(stance2, com, fn)
        norm_h0 = float(np.linalg.norm(h0))
        out.append(None if norm_h0 <= 0.0 else float(abs(h0 @ report.d_hat)) / norm_h0)
    return out


# -- friction kink ---------------------------------------------------------------

KINK_ALPHA = 1e6  # realizes the infimum over alpha to ~6 digits at desk scale


@dataclass(frozen=True)
class KinkReport:
    kappa: float
    a_star: float
    curve: tuple[tuple[float, float, float], ...]  # (a_x, floor, qp_inf) rows
    left_slope: float
    right_slope: float
    # same grid solved without the channel restriction; axis-sliding defers
    # the cone transition, so this curve hugs the floor past a_star
    full_curve: tuple[tuple[float, float], ...] = ()


def kink_kappa(stance2: StanceConfig, com) -> float:
    """Geometry factor kappa = |(D x (r x xhat))_z| / ||D||^2 of the fore-aft canceller."""
    d, _, r = _two_contact_geometry(stance2, com)
    xhat = np.array([1.0, 0.0, 0.0])
    return abs(float(np.cross(d, np.cross(r, xhat))[2])) / float(d @ d)


def critical_acceleration(mu: float, kappa: float, gravity: float) -> float:
    """Fore-aft acceleration mu*g/(1+2*mu*kappa) where the cone pins the canceller."""
    return mu * gravity / (1.0 + 2.0 * mu * kappa)


def _channel_basis(stance2: StanceConfig, com) -> np.ndarray:
    """Null-space basis restricted to the moment-effective channel (delta
    orthogonal to the foot axis)."""
    d, d_hat, _ = _two_contact_geometry(stance2, com)
    del d
    base = sum_constraint_nullspace(2)  # (6, 3); z maps to delta = z/sqrt(2)
    _, _, vt = np.linalg.svd(d_hat.reshape(1, 3))
    reducer = vt[1:].T  # (3, 2) orthonormal basis of d_hat-perp
    return base @ reducer


def _qp_inf_value(stance2: StanceConfig, com, a_x: float, basis=None, warm=None):
    fn = np.array([stance2.mass * a_x, 0.0, stance2.mass * stance2.gravity])
    w = forceqp.QpWeights(alpha=KINK_ALPHA, gamma=1.0)
    if basis is None:
        sol = forceqp.solve(stance2, com, fn, w, warm=warm)
    else:
        sol = forceqp.solve_in_subspace(stance2, com, fn, w, basis, warm=warm)
    return float(np.linalg.norm(sol.hdot)) / stance2.mass, sol


def kink_analysis(stance2: StanceConfig, com, mu: float, accel_grid) -> KinkReport:
    """Infimum curve over the fore-aft acceleration family F = m*(a_x, 0, g).

    ``curve`` holds, per grid point, the geometric floor and the QP value at
    alpha = 1e6 with the redistribution restricted to the moment-effective
    channel (canceller orthogonal to the foot axis); this is the curve the
    closed-form critical acceleration describes, with the non-smooth kink at
    a_star.  ``full_curve`` holds the unrestricted QP values: moment-neutral
    sliding along the foot axis buys cone margin, so the unrestricted
    transition happens at a strictly larger acceleration.  One-sided slopes
    are least-squares fits over grid points within 0.15 m/s^2 of a_star,
    excluding points closer than 0.015; the grid must straddle the kink.
    """
    if any(abs(c.mu - mu) > 1e-12 for c in stance2.contacts):
        stance2 = _with_mu(stance2, mu)
    kappa = kink_kappa(stance2, com)
    a_star = critical_acceleration(mu, kappa, stance2.gravity)
    basis = _channel_basis(stance2, com)

    grid = np.sort(np.asarray(list(accel_grid), dtype=float))
    rows = []
    full_rows = []
    warm = warm_full = None
    for a_x in grid:
        fn = np.array([stance2.mass * a_x, 0.0, stance2.mass * stance2.gravity])
        floor = geometric_floor(stance2, com, fn).geometric_floor
        value, warm = _qp_inf_value(stance2, com, float(a_x), basis, warm)
        full_value, warm_full = _qp_inf_value(stance2, com, float(a_x), None, warm_full)
        rows.append((float(a_x), floor, value))
        full_rows.append((float(a_x), full_value))

    left_slope = _side_slope(rows, a_star, side=-1)
    right_slope = _side_slope(rows, a_star, side=+1)
    return KinkReport(
        kappa=kappa,
        a_star=a_star,
        curve=tuple(rows),
        left_slope=left_slope,
        right_slope=right_slope,
        full_curve=tuple(full_rows),
    )


def _side_slope(rows, a_star: float, side: int, window: float = 0.15, guard: float = 0.015) -> float:
    pts = [
        (a, q)
        for a, _, q in rows
        if guard < side * (a - a_star) <= window
    ]
    if len(pts) < 2:
        raise ValueError(
            f"kink grid does not straddle a* = {a_star:.3f} with enough points on side {side:+d}"
        )
    a = np.array([p[0] for p in pts])
    q = np.array([p[1] for p in pts])
    return float(np.polyfit(a, q, 1)[0])


def _with_mu(stance: StanceConfig, mu: float) -> StanceConfig:
    contacts = tuple(replace(c, mu=mu) for c in stance.contacts)
    return replace(stance, contacts=contacts)


def mu_sweep_no_kink(stance2: StanceConfig, com, accel_fixed: float, mu_grid):
    """Infimum value versus friction coefficient at a fixed fore-aft acceleration.

    While the canceller stays feasible the value sits at the (mu-independent)
    geometric floor, so the curve is smooth: sweeping friction does not
    reproduce the acceleration kink.
    """
    basis = _channel_basis(stance2, com)
    out = []
    for mu in mu_grid:
        stance_mu = _with_mu(stance2, float(mu))
        value, _ = _qp_inf_value(stance_mu, com, float(accel_fixed), basis)
        out.append((float(mu), value))
    return out


# -- pointwise certificate --------------------------------------------------------

@dataclass(frozen=True)
class CertificateReport:
    pendular_hdot: float
    best_sampled_hdot: float
    identity_max_error: float
    n_samples: int

    @property
    def pendular_is_min(self) -> bool:
        return self.pendular_hdot <= self.best_sampled_hdot + 1e-12


def pointwise_certificate(
    stance: StanceConfig, com, accel_xy, n_samples: int = 10_000, seed: int = 0
) -> CertificateReport:
    """Brute-force check that the pendular force minimizes the moment rate.

    The prescribed horizontal acceleration fixes the pivot of the matching
    pendular force, p_xy = c_xy - (h/g)*a_xy.  Half the samples sweep the
    free vertical component while honoring the prescribed acceleration (the
    family the minimization claim quantifies over); the rest add random
    perturbations perpendicular to the pivot axis.  Every sample must
    satisfy ||hdot||^2 = ||c-p||^2 * ||F_perp||^2, and no
    acceleration-respecting sample may beat the pendular force.
    """
    c = as_vec3(com, "com")
    axy = np.asarray(accel_xy, dtype=float).reshape(2)
    m, g = stance.mass, stance.gravity
    height = float(c[2])
    if height <= 0.0:
        raise DegenerateStanceError("CoM must lie above the support plane")
    pivot = np.array([c[0] - (height / g) * axy[0], c[1] - (height / g) * axy[1], 0.0])
    leg = c - pivot
    leg_hat = leg / np.linalg.norm(leg)
    f_pend = (m * g / height) * leg  # horizontal part is exactly m * axy

    rng = np.random.default_rng(seed)
    n_vert = max(n_samples // 2, 2)
    dz = np.linspace(-0.8 * m * g, 0.8 * m * g, n_vert)
    vertical_samples = np.column_stack(
        [np.full(n_vert, f_pend[0]), np.full(n_vert, f_pend[1]), f_pend[2] + dz]
    )
    kick = rng.normal(size=(n_samples - n_vert, 3))
    kick -= np.outer(kick @ leg_hat, leg_hat)
    norms = np.linalg.norm(kick, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    scales = rng.uniform(0.0, m * g, size=(n_samples - n_vert, 1))
    perp_samples = f_pend + scales * kick / norms

    samples = np.vstack([vertical_samples, perp_samples])
    arm = pivot - c
    hdots = np.cross(np.broadcast_to(arm, samples.shape), samples)
    hnorm_sq = np.einsum("ij,ij->i", hdots, hdots)

    f_perp = samples - np.outer(samples @ leg_hat, leg_hat)
    rhs = float(leg @ leg) * np.einsum("ij,ij->i", f_perp, f_perp)
    scale_ref = np.maximum(1.0, hnorm_sq)
    identity_err = float(np.max(np.abs(hnorm_sq - rhs) / scale_ref))

    pend_h = float(np.linalg.norm(np.cross(arm, f_pend)))
    best = float(np.sqrt(hnorm_sq[:n_vert].min()))
    return CertificateReport(
        pendular_hdot=pend_h,
        best_sampled_hdot=best,
        identity_max_error=identity_err,
        n_samples=int(samples.shape[0]),
    )


# -- aggregate report --------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisReport:
    """Flat bundle of the closed-form quantities for one stance/scenario."""

    singular_values: tuple[float, ...] = ()
    k_constant: float | None = None
    geometric_floor: float | None = None
    floor_fraction: float | None = None
    canceller: tuple[float, ...] | None = None
    canceller_feasible: bool | None = None
    kappa: float | None = None
    a_star: float | None = None
    prefactor: float | None = None

    def as_flat_items(self) -> list[tuple[str, str]]:
        """Key-value text rows consumed by the harness CSV writer."""
        rows: list[tuple[str, str]] = []
        for i, s in enumerate(self.singular_values, start=1):
            rows.append((f"sigma_{i}", format(s, ".10g")))
        scalars = [
            ("k_constant", self.k_constant),
            ("geometric_floor", self.geometric_floor),
            ("floor_fraction", self.floor_fraction),
            ("kappa", self.kappa),
            ("a_star", self.a_star),
            ("prefactor", self.prefactor),
        ]
        for key, val in scalars:
            if val is not None:
                rows.append((key, format(val, ".10g")))
        if self.canceller is not None:
            for ax, val in zip("xyz", self.canceller):
                rows.append((f"canceller_{ax}", format(val, ".10g")))
        if self.canceller_feasible is not None:
            rows.append(("canceller_feasible", str(self.canceller_feasible).lower()))
        return rows
