"""Hexaglide kinematics: rotations, mobility, inverse and forward kinematics.

Conventions
-----------
* Base frame ``O-XYZ``: X along the rails, Z towards the moving platform.
* A pose is ``[Px, Py, Pz, alpha, beta, gamma]`` (meters, radians) with the
  platform orientation ``R = Rx(alpha) @ Ry(beta) @ Rz(gamma)``.
* Limb ``i`` (1-based) closes the loop
  ``P + R @ B_i - q_i * x_hat - S_i``, whose norm must equal ``l_i``.
  Limbs 1-3 take the rear solution, limbs 4-6 the front one.

Everything in here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NoConvergence, SingularPose, Unreachable
from .geometry import MachineGeometry, PlatformPose

#: Branch sign per limb: rear solution for limbs 1-3, front for 4-6.
BRANCH = np.array([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0])

FD_STEP = 1e-6
MAX_CONDITION = 1e8
# discriminants this close below zero (relative to l^2) are rounding noise on the boundary
DISC_ROUNDING = 8 * np.finfo(float).eps
FK_TOLERANCE = 1e-9
FK_MAX_ITER = 100
FK_MAX_HALVINGS = 5


# --- rotations ---------------------------------------------------------------


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Platform orientation: rotate about Z by gamma, then Y by beta, then X by alpha."""
    return rot_x(alpha) @ rot_y(beta) @ rot_z(gamma)


def _rotation_batch(angles: np.ndarray) -> np.ndarray:
    """Expanded ``Rx @ Ry @ Rz`` for an ``(n, 3)`` array of angles -> ``(n, 3, 3)``."""
    ca, cb, cg = np.cos(angles).T
    sa, sb, sg = np.sin(angles).T
    out = np.empty((angles.shape[0], 3, 3))
    out[:, 0, 0] = cb * cg
    out[:, 0, 1] = -cb * sg
    out[:, 0, 2] = sb
    out[:, 1, 0] = ca * sg + sa * sb * cg
    out[:, 1, 1] = ca * cg - sa * sb * sg
    out[:, 1, 2] = -sa * cb
    out[:, 2, 0] = sa * sg - ca * sb * cg
    out[:, 2, 1] = sa * cg + ca * sb * sg
    out[:, 2, 2] = ca * cb
    return out


# --- mobility ----------------------------------------------------------------


@dataclass(frozen=True)
class MobilitySpec:
    """Inputs to Gruebler's mobility count."""

    space_dof: int
    link_count: int
    joint_count: int
    joint_dof: tuple[int, ...]

    def __post_init__(self):
        if self.space_dof not in (3, 6):
            raise ValueError(f"space_dof must be 3 or 6, got {self.space_dof}")
        if len(self.joint_dof) != self.joint_count:
            raise ValueError("joint_dof needs one entry per joint")
        if any(f not in (1, 2, 3) for f in self.joint_dof):
            raise ValueError("joint freedoms must be 1, 2 or 3")


#: Six spherical, six universal and six prismatic joints on 14 links.
HEXAGLIDE_MOBILITY = MobilitySpec(6, 14, 18, (3,) * 6 + (2,) * 6 + (1,) * 6)


def mobility(spec: MobilitySpec) -> int:
    return spec.space_dof * (spec.link_count - spec.joint_count - 1) + sum(spec.joint_dof)


def describe_mobility(spec: MobilitySpec = HEXAGLIDE_MOBILITY) -> str:
    return (
        f"{spec.space_dof}({spec.link_count}-{spec.joint_count}-1)"
        f"+{sum(spec.joint_dof)} = {mobility(spec)}"
    )


# --- inverse kinematics ------------------------------------------------------


def limb_vector(geom: MachineGeometry, pose: PlatformPose, i: int) -> np.ndarray:
    """Closure vector ``P + R @ B_i - S_i`` of limb ``i`` (1-based), before the slider offset."""
    if not 1 <= i <= 6:
        raise IndexError(f"limb index must be in 1..6, got {i}")
    R = rotation_matrix(*pose.orientation)
    return np.asarray(pose.position) + R @ geom.platform_joint[i - 1] - geom.rail_anchor[i - 1]


def _limb_vectors(geom: MachineGeometry, chis: np.ndarray) -> np.ndarray:
    R = _rotation_batch(chis[:, 3:])
    # (n,3,3) x (6,3) -> (n,6,3)
    rotated = np.einsum("nij,kj->nki", R, geom.platform_joint)
    return chis[:, None, :3] + rotated - geom.rail_anchor[None, :, :]


def _ik_batch(geom: MachineGeometry, chis: np.ndarray) -> np.ndarray:
    """Joint vectors for an ``(n, 6)`` array of pose vectors; raises on the first bad limb."""
    return _ik_from_limb_vectors(geom, _limb_vectors(geom, chis))


def _ik_from_limb_vectors(geom: MachineGeometry, b: np.ndarray) -> np.ndarray:
    l2 = geom.arm_length**2
    disc = l2 - b[..., 1] ** 2 - b[..., 2] ** 2
    bad = disc < -DISC_ROUNDING * l2
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise Unreachable(int(idx[-1]) + 1, float(disc[tuple(idx)]))
    return b[..., 0] + BRANCH * np.sqrt(np.maximum(disc, 0.0))


def discriminants(geom: MachineGeometry, pose: PlatformPose) -> np.ndarray:
    """Per-limb ``l_i^2 - b_iy^2 - b_iz^2``; negative means the limb cannot close."""
    b = _limb_vectors(geom, pose.as_array()[None, :])[0]
    return geom.arm_length**2 - b[:, 1] ** 2 - b[:, 2] ** 2


def inverse_kinematics(geom: MachineGeometry, pose: PlatformPose | Sequence[float]) -> np.ndarray:
    """Slider positions ``q`` (meters, along +X from each rail anchor) for a pose.

    Raises
    ------
    Unreachable
        If any limb's discriminant is negative. A zero discriminant is accepted.
    """
    chi = _as_chi(pose)
    # single pose: scalar trig is several times cheaper than the batched rotation
    R = rotation_matrix(*chi[3:])
    b = chi[:3] + geom.platform_joint @ R.T - geom.rail_anchor
    return _ik_from_limb_vectors(geom, b)


def closure_residuals(geom: MachineGeometry, pose: PlatformPose | Sequence[float], q) -> np.ndarray:
    """``|P + R B_i - q_i x - S_i| - l_i`` for every limb."""
    chi = _as_chi(pose)
    b = _limb_vectors(geom, chi[None, :])[0]
    b[:, 0] -= np.asarray(q, dtype=float)
    return np.linalg.norm(b, axis=1) - geom.arm_length


def ik_jacobian(geom: MachineGeometry, pose: PlatformPose | Sequence[float], step: float = FD_STEP) -> np.ndarray:
    """``dq/dchi`` by central differences of the inverse kinematics.

    Rows are limbs, columns the pose components. Raises ``SingularPose`` when
    the condition number exceeds 1e8.
    """
    J = _fd_jacobian(geom, _as_chi(pose), step)
    cond = np.linalg.cond(J)
    if not cond <= MAX_CONDITION:
        raise SingularPose(float(cond))
    return J


def _fd_jacobian(geom: MachineGeometry, chi: np.ndarray, step: float) -> np.ndarray:
    probes = np.concatenate([chi + step * np.eye(6), chi - step * np.eye(6)])
    q = _ik_batch(geom, probes)
    return ((q[:6] - q[6:]) / (2.0 * step)).T


# --- forward kinematics ------------------------------------------------------


@dataclass(frozen=True)
class FKResult:
    pose: PlatformPose
    iterations: int
    residual: float
    restarted: bool = False


def solve_forward_kinematics(
    geom: MachineGeometry,
    q_desired,
    initial_guess: PlatformPose | Sequence[float] | None = None,
    *,
    tol: float = FK_TOLERANCE,
    max_iter: int = FK_MAX_ITER,
) -> FKResult:
    """Newton-Raphson search for the pose whose inverse kinematics gives ``q_desired``.

    Each iteration solves ``J dchi = q_d - q`` with the finite-difference
    Jacobian and halves the step (up to five times) when the full step does not
    reduce ``max|q_d - q|``. If no trial step makes progress the solve stops
    with ``NoConvergence``. An ``Unreachable`` guess is retried once from the
    geometry's home pose.
    """
    qd = np.asarray(q_desired, dtype=float)
    if qd.shape != (6,) or not np.all(np.isfinite(qd)):
        raise ValueError("q_desired must be six finite numbers")
    home = geom.home_pose.as_array()
    start = home if initial_guess is None else _as_chi(initial_guess)
    try:
        return _newton(geom, qd, start, tol, max_iter, restarted=False)
    except Unreachable:
        if np.array_equal(start, home):
            raise
        return _newton(geom, qd, home, tol, max_iter, restarted=True)


def forward_kinematics(
    geom: MachineGeometry,
    q_desired,
    initial_guess: PlatformPose | Sequence[float] | None = None,
    **kwargs,
) -> PlatformPose:
    return solve_forward_kinematics(geom, q_desired, initial_guess, **kwargs).pose


def _newton(geom, qd, chi, tol, max_iter, restarted) -> FKResult:
    chi = np.array(chi, dtype=float)
    r = qd - _ik_batch(geom, chi[None, :])[0]
    res = float(np.max(np.abs(r)))
    for it in range(max_iter + 1):
        if res < tol:
            return FKResult(PlatformPose.from_array(chi), it, res, restarted)
        if it == max_iter:
            break
        J = ik_jacobian(geom, chi)
        dchi = np.linalg.solve(J, r)
        scale = 1.0
        for _ in range(FK_MAX_HALVINGS + 1):
            trial = chi + scale * dchi
            try:
                r_trial = qd - _ik_batch(geom, trial[None, :])[0]
            except Unreachable:
                r_trial = None
            if r_trial is not None:
                res_trial = float(np.max(np.abs(r_trial)))
                if res_trial < res:
                    chi, r, res = trial, r_trial, res_trial
                    break
            scale *= 0.5
        else:
            raise NoConvergence(it + 1, res)
    raise NoConvergence(max_iter, res)


def _as_chi(pose) -> np.ndarray:
    if isinstance(pose, PlatformPose):
        return pose.as_array()
    chi = np.asarray(pose, dtype=float)
    if chi.shape != (6,):
        raise ValueError("pose vector must have six components")
    return chi
