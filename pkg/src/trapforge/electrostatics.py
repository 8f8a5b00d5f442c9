"""DC and RF electrostatics of planar electrode layouts.

Potentials follow the gapless plane approximation: every electrode is a
patch of an infinite grounded plane at z = 0, and the potential of a
patch at unit voltage equals its subtended solid angle divided by 2 pi.
Gaps between electrodes are treated as grounded plane, which is the
approximation's defining assumption.  Solid angles of the (simple,
possibly non-convex) electrode polygons are evaluated exactly with the
two-argument arctangent formula for a fan of triangles, so the basis
potentials carry no quadrature error.

Gradients and Hessians are central finite differences with step
``max(10 nm, 1e-4 z)``, which balances truncation against cancellation
at the micrometre scales of the trap.

Positions at this interface are micrometres; energies are eV where noted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import constants as ct
from .geometry import Layout

__all__ = [
    "RfDrive",
    "IonSpecies",
    "BERYLLIUM_ION",
    "TrapCharacterization",
    "electrode_basis_potential",
    "rf_pseudopotential",
    "find_rf_null",
    "secular_analysis",
    "trap_depth",
    "BelowPlaneError",
    "NullSearchError",
    "UnstableTrapError",
]

DC_VOLTAGE_SOFT_LIMIT = 26.0


class BelowPlaneError(ValueError):
    """Potential requested in or below the electrode plane."""


class NullSearchError(RuntimeError):
    """RF null search failed to converge to a field zero."""


class UnstableTrapError(RuntimeError):
    """Total potential has no confining minimum."""


@dataclass(frozen=True)
class RfDrive:
    """RF drive: angular frequency (rad/s) and amplitude (V)."""

    omega_rf: float
    v_rf: float

    def __post_init__(self):
        if self.omega_rf <= 0 or self.v_rf <= 0:
            raise ValueError("RF frequency and amplitude must be positive")


@dataclass(frozen=True)
class IonSpecies:
    mass: float    # kg
    charge: float  # C
    name: str = "ion"

    def __post_init__(self):
        if self.mass <= 0 or self.charge == 0:
            raise ValueError("need positive mass and nonzero charge")


BERYLLIUM_ION = IonSpecies(mass=ct.BE9_ION_MASS, charge=ct.BE9_ION_CHARGE,
                           name="9Be+")


@dataclass(frozen=True)
class TrapCharacterization:
    """Operating point of a trap: null, mode frequencies, angle, depth."""

    null_x: float                  # um
    null_z: float                  # um
    omega_ax: float                # rad/s
    omega_lf: float
    omega_hf: float
    hf_angle_deg: float            # HF radial mode vs the x axis
    depth_ev: float
    mode_vectors: np.ndarray = field(default=None, repr=False, compare=False)
    depth_is_lower_bound: bool = False

    def __post_init__(self):
        for w in (self.omega_ax, self.omega_lf, self.omega_hf):
            if w <= 0:
                raise ValueError("mode frequencies must be positive and real")
        if self.depth_ev < 0:
            raise ValueError("trap depth must be >= 0")


def _solid_angle(vertices, points):
    """Solid angle (sr) of a planar polygon at z=0 seen from ``points``.

    Fan triangulation with the van Oosterom-Strackee arctangent per
    triangle; signed contributions handle non-convex outlines.
    """
    v = np.asarray(vertices, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.any(pts[:, 2] <= 0):
        raise BelowPlaneError("points must be strictly above the plane z = 0")
    v3 = np.column_stack([v, np.zeros(len(v))])
    r = v3[None, :, :] - pts[:, None, :]          # (n, m, 3)
    n = np.linalg.norm(r, axis=2)                 # (n, m)
    r0, n0 = r[:, :1, :], n[:, :1]
    r1, n1 = r[:, 1:-1, :], n[:, 1:-1]
    r2, n2 = r[:, 2:, :], n[:, 2:]
    numer = np.einsum("nij,nij->ni", np.broadcast_to(r0, r1.shape),
                      np.cross(r1, r2))
    denom = (n0 * n1 * n2
             + np.einsum("nij,nij->ni", np.broadcast_to(r0, r1.shape), r1) * n2
             + np.einsum("nij,nij->ni", r1, r2) * n0
             + np.einsum("nij,nij->ni", np.broadcast_to(r0, r2.shape), r2) * n1)
    return np.abs(2.0 * np.arctan2(numer, denom).sum(axis=1))


def electrode_basis_potential(polygon, points):
    """Dimensionless potential of one electrode at unit voltage.

    ``polygon`` is an electrode outline ((n, 2), um) or an Electrode;
    ``points`` one or many 3D positions strictly above the plane.  The
    value is the subtended solid angle over 2 pi, in (0, 1).
    """
    if hasattr(polygon, "polygon"):
        polygon = polygon.polygon
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    out = _solid_angle(polygon, pts) / (2.0 * np.pi)
    return float(out[0]) if single else out


def _fd_step(z):
    return max(0.01, 1e-4 * z)  # um


class _PlaneModel:
    """Summed basis potentials of a layout's RF and DC electrodes."""

    def __init__(self, layout: Layout, dc_voltages=None):
        self.rf = [np.asarray(e.polygon) for e in layout.by_role("RF")]
        self.dc = []
        if dc_voltages:
            for e in layout.electrodes:
                v = dc_voltages.get(e.id, 0.0)
                if v:
                    self.dc.append((np.asarray(e.polygon), float(v)))

    def phi_rf(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tot = np.zeros(pts.shape[0])
        for poly in self.rf:
            tot += _solid_angle(poly, pts)
        return tot / (2.0 * np.pi)

    def v_dc(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tot = np.zeros(pts.shape[0])
        for poly, v in self.dc:
            tot += v * _solid_angle(poly, pts) / (2.0 * np.pi)
        return tot

    def grad_phi_rf(self, point):
        """d(phi)/dr in 1/m by central differences."""
        p = np.asarray(point, dtype=float)
        h = _fd_step(p[2])
        g = np.zeros(3)
        for ax in range(3):
            dp = np.zeros(3)
            dp[ax] = h
            g[ax] = (self.phi_rf(p + dp)[0] - self.phi_rf(p - dp)[0]) \
                / (2.0 * h * 1e-6)
        return g


def rf_pseudopotential(layout: Layout, drive: RfDrive, ion: IonSpecies,
                       points, model=None):
    """Pseudopotential energy (eV) at one or many points.

    ``q^2 V^2 |grad phi|^2 / (4 m w^2)`` with phi the summed RF basis
    potential; the gradient is a central finite difference.
    """
    if model is None:
        model = _PlaneModel(layout)
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    pref = (ion.charge ** 2) * (drive.v_rf ** 2) \
        / (4.0 * ion.mass * drive.omega_rf ** 2)
    out = np.empty(pts.shape[0])
    for k, p in enumerate(pts):
        g = model.grad_phi_rf(p)
        out[k] = pref * (g @ g) / ct.E_CHARGE
    return float(out[0]) if single else out


def find_rf_null(layout: Layout, drive: RfDrive = None,
                 ion: IonSpecies = BERYLLIUM_ION, height_guess=30.0,
                 x_guess=0.0, model=None):
    """Locate the RF field zero in the radial plane at y = 0.

    Derivative-free minimization of |E|^2 seeded at ``(x_guess,
    height_guess)``, then Newton polish.  Returns (x1, z1) in um.  The
    converged point must suppress the field by 1e4 against a point 1 um
    away, otherwise a NullSearchError is raised.
    """
    if model is None:
        model = _PlaneModel(layout)

    def et2(xz):
        """Transverse |E|^2; the axial component from distant feed
        structures does not vanish at a point and is not part of the
        null condition (the null is a line along y)."""
        g = model.grad_phi_rf((xz[0], 0.0, xz[1]))
        return g[0] ** 2 + g[2] ** 2

    res = minimize(et2, np.array([x_guess, height_guess]),
                   method="Nelder-Mead",
                   options={"xatol": 1e-4, "fatol": 1e-30, "maxiter": 800})
    xz = res.x
    # Newton polish on the transverse field components
    for _ in range(30):
        g = model.grad_phi_rf((xz[0], 0.0, xz[1]))
        f = np.array([g[0], g[2]])
        h = 1e-2
        jac = np.zeros((2, 2))
        for col, dv in enumerate(([h, 0.0], [0.0, h])):
            gp = model.grad_phi_rf((xz[0] + dv[0], 0.0, xz[1] + dv[1]))
            gm = model.grad_phi_rf((xz[0] - dv[0], 0.0, xz[1] - dv[1]))
            jac[:, col] = [(gp[0] - gm[0]) / (2 * h), (gp[2] - gm[2]) / (2 * h)]
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 20.0:
            break
        xz = xz - step
        if np.linalg.norm(step) < 1e-10:
            break
    e_null = np.sqrt(et2(xz))
    e_away = np.sqrt(et2(xz + np.array([0.0, 1.0])))
    if not np.isfinite(e_null) or e_null > 1e-4 * e_away:
        raise NullSearchError(
            f"no transverse field zero: |E_t| at candidate is {e_null:.3g} "
            f"vs {e_away:.3g} 1 um away")
    return float(xz[0]), float(xz[1])


def _total_energy_fn(layout, drive, dc_voltages, ion):
    model = _PlaneModel(layout, dc_voltages)
    pref = (ion.charge ** 2) * (drive.v_rf ** 2) \
        / (4.0 * ion.mass * drive.omega_rf ** 2)

    def energy(p):
        """Total (pseudo + DC) energy in joules at a 3D point (um)."""
        g = model.grad_phi_rf(p)
        u = pref * (g @ g)
        if model.dc:
            u = u + ion.charge * model.v_dc(p)[0]
        return u

    return energy, model


def secular_analysis(layout: Layout, drive: RfDrive, dc_voltages,
                     ion: IonSpecies = BERYLLIUM_ION, seed=None,
                     height_guess=30.0, with_depth=True):
    """Mode frequencies, mode angle and depth at the trap's minimum.

    The Hessian of the total (pseudopotential + DC) energy at its
    minimum is diagonalized; ``w_i = sqrt(lambda_i / m)``.  DC voltages
    beyond the +-26 V supply range only warn.  Raises UnstableTrapError
    when an eigenvalue is negative (reporting the axis).
    """
    for eid, v in dc_voltages.items():
        if abs(v) > DC_VOLTAGE_SOFT_LIMIT:
            warnings.warn(
                f"DC electrode '{eid}' at {v:+.1f} V exceeds the "
                f"+-{DC_VOLTAGE_SOFT_LIMIT:.0f} V supply range")
    energy, model = _total_energy_fn(layout, drive, dc_voltages, ion)
    if seed is None:
        x1, z1 = find_rf_null(layout, drive, ion, height_guess, model=model)
        seed = (x1, 0.0, z1)
    res = minimize(lambda p: energy(p), np.asarray(seed, dtype=float),
                   method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-40, "maxiter": 2500})
    p0 = res.x

    h = _fd_step(p0[2]) * 20.0
    hess = np.zeros((3, 3))
    e0 = energy(p0)
    for i in range(3):
        for j in range(i, 3):
            di = np.zeros(3)
            dj = np.zeros(3)
            di[i] = h
            dj[j] = h
            if i == j:
                val = (energy(p0 + di) - 2 * e0 + energy(p0 - di)) \
                    / (h * 1e-6) ** 2
            else:
                val = (energy(p0 + di + dj) - energy(p0 + di - dj)
                       - energy(p0 - di + dj) + energy(p0 - di - dj)) \
                    / (4 * (h * 1e-6) ** 2)
            hess[i, j] = hess[j, i] = val
    evals, evecs = np.linalg.eigh(hess)
    for lam, vec in zip(evals, evecs.T):
        if lam <= 0:
            axis = ("x", "y", "z")[int(np.argmax(np.abs(vec)))]
            raise UnstableTrapError(
                f"unstable axis along {axis}: curvature {lam:.3g} J/m^2")
    omegas = np.sqrt(evals / ion.mass)
    # the axial mode has the dominant y component
    iy = int(np.argmax(np.abs(evecs[1, :])))
    radial = [k for k in range(3) if k != iy]
    r_lo, r_hi = sorted(radial, key=lambda k: omegas[k])
    v = evecs[:, r_hi]
    angle = np.degrees(np.arctan2(v[2], v[0]))
    if angle <= -90.0:
        angle += 180.0
    elif angle > 90.0:
        angle -= 180.0

    depth, bounded = (np.nan, False)
    if with_depth:
        depth, bounded = _depth_search(layout, drive, ion,
                                       (p0[0], p0[2]), model=model)
    return TrapCharacterization(
        null_x=float(p0[0]), null_z=float(p0[2]),
        omega_ax=float(omegas[iy]), omega_lf=float(omegas[r_lo]),
        omega_hf=float(omegas[r_hi]), hf_angle_deg=float(angle),
        depth_ev=float(depth) if with_depth else 0.0,
        mode_vectors=evecs, depth_is_lower_bound=bounded)


def _depth_search(layout, drive, ion, null_xz, model=None, n_rays=72,
                  r_max_factor=12.0):
    """Pseudopotential barrier: lowest escape saddle minus null value (eV).

    Polar ray scan in the radial plane followed by a local polish of
    |grad U|^2 around the best ray barrier.  Returns (depth_ev,
    hit_boundary).
    """
    if model is None:
        model = _PlaneModel(layout)
    x0, z0 = null_xz
    r_max = r_max_factor * z0
    psi0 = rf_pseudopotential(layout, drive, ion, (x0, 0.0, z0), model=model)

    best = (np.inf, None)
    hit_boundary = False
    for th in np.linspace(0, 2 * np.pi, n_rays, endpoint=False):
        d = np.array([np.sin(th), np.cos(th)])  # (x, z) direction
        peak = -np.inf
        peak_pt = None
        fell = False
        for r in np.geomspace(0.5, r_max, 120):
            x, z = x0 + r * d[0], z0 + r * d[1]
            if z <= 0.5:
                break
            val = rf_pseudopotential(layout, drive, ion, (x, 0.0, z),
                                     model=model)
            if val > peak:
                peak, peak_pt = val, (x, z)
            elif val < peak - 1e-3 * abs(peak):
                fell = True
                break
        if not fell:
            # barrier keeps rising to the domain edge along this ray
            continue
        if peak < best[0]:
            best = (peak, peak_pt)
    if best[1] is None:
        hit_boundary = True
        return np.nan, hit_boundary

    # polish: minimize |grad psi|^2 near the candidate saddle
    def grad2(xz):
        h = 0.05
        g = np.zeros(2)
        for ax, dv in enumerate(([h, 0.0], [0.0, h])):
            vp = rf_pseudopotential(layout, drive, ion,
                                    (xz[0] + dv[0], 0.0, xz[1] + dv[1]),
                                    model=model)
            vm = rf_pseudopotential(layout, drive, ion,
                                    (xz[0] - dv[0], 0.0, xz[1] - dv[1]),
                                    model=model)
            g[ax] = (vp - vm) / (2 * h)
        return g @ g

    res = minimize(grad2, np.asarray(best[1]), method="Nelder-Mead",
                   options={"xatol": 1e-6, "maxiter": 2000})
    saddle = res.x if res.fun < grad2(np.asarray(best[1])) else np.asarray(best[1])
    psi_saddle = rf_pseudopotential(layout, drive, ion,
                                    (saddle[0], 0.0, saddle[1]), model=model)
    return max(psi_saddle - psi0, 0.0), hit_boundary


def trap_depth(layout: Layout, drive: RfDrive,
               ion: IonSpecies = BERYLLIUM_ION, height_guess=30.0):
    """Intrinsic (RF-only) trap depth in eV."""
    model = _PlaneModel(layout)
    x1, z1 = find_rf_null(layout, drive, ion, height_guess, model=model)
    depth, hit_boundary = _depth_search(layout, drive, ion, (x1, z1),
                                        model=model)
    if hit_boundary or not np.isfinite(depth):
        raise UnstableTrapError(
            "escape search hit the domain boundary; the result is only a "
            "lower bound")
    return depth
