"""Quasi-static magnetic near-fields of filament sets.

At the ~1 GHz drive the free-space wavelength is four orders of magnitude
larger than the trap, so conductor currents are treated as stationary
complex phasors on straight filaments and the field follows from the
closed-form Biot-Savart expression of a finite segment, summed linearly.

Powers follow the drive-impedance convention ``I = sqrt(2 P / R0)`` with
``R0 = 50`` ohm unless stated otherwise: quoted excitation powers are
translated into a peak drive-current amplitude.

Positions at this interface are micrometres; fields are tesla.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import constants as ct
from .geometry import FilamentSet, MeanderParams, build_meander, \
    discretize_conductor

__all__ = [
    "GridSpec",
    "FieldMap",
    "MinimumReport",
    "field_at",
    "field_map",
    "drive_current_for_power",
    "find_field_minimum",
    "pocket_study",
    "write_field_map_csv",
    "read_field_map_csv",
    "FieldSingularityError",
    "MinimumSearchError",
]

_MU0_4PI = ct.MU_0 / (4.0 * np.pi)


class FieldSingularityError(ValueError):
    """Field requested on (or within 1 nm of) a filament."""


class MinimumSearchError(RuntimeError):
    """Field-minimum search failed or found no quadrupole."""


def drive_current_for_power(power_w, reference_ohms=ct.DEFAULT_REFERENCE_OHMS):
    """Peak drive current (A) for an excitation power (W)."""
    if power_w <= 0:
        raise ValueError("power must be positive")
    return np.sqrt(2.0 * power_w / reference_ohms)


def field_at(filaments: FilamentSet, points):
    """Complex magnetic field phasor (T) at one or many points (um).

    Sum of the closed-form contributions of finite straight segments with
    complex currents.  Raises if a point lies within 1 nm of a filament.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts) * 1e-6
    a = filaments.starts * 1e-6
    b = filaments.ends * 1e-6
    cur = filaments.currents
    seg = b - a
    length = np.linalg.norm(seg, axis=1)
    u = seg / length[:, None]

    out = np.zeros((pts.shape[0], 3), dtype=complex)
    chunk = max(1, int(2e6 / max(len(cur), 1)))
    for lo in range(0, pts.shape[0], chunk):
        p = pts[lo:lo + chunk]                       # (n,3)
        r1 = p[:, None, :] - a[None, :, :]           # (n,m,3)
        r2 = p[:, None, :] - b[None, :, :]
        n1 = np.linalg.norm(r1, axis=2)
        n2 = np.linalg.norm(r2, axis=2)
        cross = np.cross(np.broadcast_to(u, r1.shape), r1)
        c2 = np.einsum("nmk,nmk->nm", cross, cross)
        # perpendicular distance to the carrying line
        rho = np.sqrt(c2)
        # axial coordinates relative to endpoints
        s1 = np.einsum("mk,nmk->nm", u, r1)
        s2 = np.einsum("mk,nmk->nm", u, r2)
        dist = np.where((s1 >= 0) & (s2 <= 0), rho, np.minimum(n1, n2))
        if np.any(dist < 1e-9):
            raise FieldSingularityError(
                "field point within 1 nm of a filament")
        factor = (s1 / n1 - s2 / n2) / c2
        out[lo:lo + chunk] = np.einsum(
            "m,nm,nmk->nk", cur, factor, cross) * _MU0_4PI
    return out[0] if single else out


@dataclass(frozen=True)
class GridSpec:
    """Rectangular sampling grid in the radial plane at fixed y (um)."""

    x_range: tuple
    z_range: tuple
    nx: int
    nz: int
    y: float = 0.0

    def __post_init__(self):
        if self.nx < 1 or self.nz < 1:
            raise ValueError("grid needs at least one node per axis")
        if self.x_range[1] < self.x_range[0] or self.z_range[1] < self.z_range[0]:
            raise ValueError("grid ranges must be monotone")

    @property
    def xs(self):
        return np.linspace(*self.x_range, self.nx)

    @property
    def zs(self):
        return np.linspace(*self.z_range, self.nz)

    def points(self):
        """All nodes as (nx*nz, 3), x fastest in z-major ordering."""
        xg, zg = np.meshgrid(self.xs, self.zs, indexing="ij")
        pts = np.column_stack([xg.ravel(), np.full(xg.size, self.y),
                               zg.ravel()])
        return pts


@dataclass(frozen=True)
class FieldMap:
    """Sampled complex field on a grid, with drive metadata."""

    grid: GridSpec
    samples: np.ndarray          # (nx, nz, 3) complex, tesla
    power_w: float
    frequency_hz: float

    def __post_init__(self):
        if self.power_w <= 0:
            raise ValueError("power must be positive")
        if self.samples.shape != (self.grid.nx, self.grid.nz, 3):
            raise ValueError("sample array does not match the grid")

    @property
    def shape(self):
        return (self.grid.nx, self.grid.nz)

    def magnitude(self):
        """Time-averaged magnitude sqrt(sum |B_c|^2) per node."""
        return np.sqrt(np.sum(np.abs(self.samples) ** 2, axis=2))


def field_map(filaments: FilamentSet, grid: GridSpec, power_w=1.0,
              frequency_hz=1.0e9,
              reference_ohms=ct.DEFAULT_REFERENCE_OHMS) -> FieldMap:
    """Evaluate the field on a grid at the requested excitation power.

    The filament currents are rescaled so the drive current matches the
    power under the impedance convention.
    """
    i_want = drive_current_for_power(power_w, reference_ohms)
    scale = i_want / filaments.drive_current
    fs = filaments.scaled(scale)
    vals = field_at(fs, grid.points())
    samples = vals.reshape(grid.nx, grid.nz, 3)
    return FieldMap(grid=grid, samples=samples, power_w=power_w,
                    frequency_hz=frequency_hz)


@dataclass(frozen=True)
class MinimumReport:
    """Located field minimum and local quadrupole strength."""

    x0: float                 # um
    z0: float                 # um
    residual_t: float         # |B| at the minimum, tesla
    gradient_t_m: float       # largest singular value of the Jacobian
    principal_angle_deg: float
    y: float = 0.0

    def __post_init__(self):
        if self.residual_t < 0:
            raise ValueError("residual must be >= 0")
        if self.gradient_t_m <= 0:
            raise ValueError("no quadrupole: gradient must be positive")


def _as_field_fn(source, y=0.0):
    if isinstance(source, FilamentSet):
        def fn(xz):
            return field_at(source, np.array([xz[0], y, xz[1]]))
        return fn
    return source


def find_field_minimum(source, seed, y=0.0, gradient_floor=0.01,
                       scale_current=None) -> MinimumReport:
    """Minimize the field magnitude in the radial plane at fixed y.

    ``source`` is a FilamentSet or a callable ``(x, z) -> complex
    3-vector``; ``seed`` a 2-point (x, z) in the quadrupole's basin.  The
    magnitude is ``sqrt(sum_c |B_c|^2)``; the gradient is the largest
    singular value of the Jacobian of the real field part, and the
    principal angle is the direction of steepest field growth.
    """
    if isinstance(source, FilamentSet) and scale_current is not None:
        source = source.scaled(scale_current / source.drive_current)
    fn = _as_field_fn(source, y)

    def mag2(xz):
        b = fn(xz)
        return float(np.sum(np.abs(b) ** 2))

    res = minimize(mag2, np.asarray(seed, dtype=float), method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-30, "maxiter": 4000})
    if not res.success and res.status != 2:
        raise MinimumSearchError(f"minimum search failed: {res.message}")
    x0, z0 = res.x
    residual = float(np.sqrt(mag2(res.x)))

    # Jacobian of the transverse real part, SI units
    h = 1e-3  # um
    jac = np.zeros((2, 2))
    for col, dv in enumerate(([h, 0.0], [0.0, h])):
        bp = fn(res.x + dv)
        bm = fn(res.x - dv)
        d = (bp - bm).real / (2 * h * 1e-6)
        jac[:, col] = [d[0], d[2]]
    svals, svecs = np.linalg.eigh(jac.T @ jac)
    gradient = float(np.sqrt(svals[-1]))
    v = svecs[:, -1]
    angle = float(np.degrees(np.arctan2(v[1], v[0])))
    if angle <= -90.0:
        angle += 180.0
    elif angle > 90.0:
        angle -= 180.0
    if gradient < gradient_floor:
        raise MinimumSearchError(
            f"flat landscape: gradient {gradient:.3g} T/m below the "
            f"{gradient_floor:g} T/m floor")
    return MinimumReport(x0=float(x0), z0=float(z0), residual_t=residual,
                         gradient_t_m=gradient, principal_angle_deg=angle,
                         y=y)


def meander_filaments(params: MeanderParams, center=(0.0, 0.0),
                      transverse_n=8, vertical_n=8,
                      drive_current=1.0) -> FilamentSet:
    """Convenience: build and discretize a meander in one step."""
    path = build_meander(params, center=center)
    return discretize_conductor(path, transverse_n=transverse_n,
                                drive_current=drive_current,
                                vertical_n=vertical_n)


def pocket_study(params: MeanderParams, l_th_values, power_w=1.0,
                 center=(0.0, 0.0), reference=None, seed=None,
                 transverse_n=8, vertical_n=8,
                 reference_ohms=ct.DEFAULT_REFERENCE_OHMS):
    """Residual field and gradient as a function of the pocket length.

    The residual is evaluated at the design operating point: the field
    minimum of the meander as parameterized (its pocket aligned with the
    trap's rf null by construction), which is where the ion sits.  Each
    entry rebuilds the conductor with a different pocket length,
    re-minimizes to report the gradient and minimum position, and takes
    ``|B|`` at the fixed operating point as the residual seen by the ion.

    Returns a dict with arrays ``l_th_um``, ``residual_t``,
    ``gradient_t_m``, ``min_x_um``, ``min_z_um`` and a ``monotone`` flag
    (residual non-increasing with pocket length).
    """
    for v in l_th_values:
        if v >= params.l_m:
            raise ValueError("all pocket lengths must be below l_m")
    i_drive = drive_current_for_power(power_w, reference_ohms)
    if seed is None:
        # z = 0 is the electrode plane; the quadrupole null sits roughly
        # one segment pitch above the conductor mid-height
        seed = (center[0], params.segment_pitch - params.stack_height / 2.0)
    if reference is None:
        fs = meander_filaments(params, center, transverse_n, vertical_n,
                               drive_current=i_drive)
        ref_report = find_field_minimum(fs, seed)
        reference = (ref_report.x0, ref_report.z0)

    rows = {"l_th_um": [], "residual_t": [], "gradient_t_m": [],
            "min_x_um": [], "min_z_um": []}
    for v in l_th_values:
        p = dataclasses.replace(params, l_th=float(v))
        fs = meander_filaments(p, center, transverse_n, vertical_n,
                               drive_current=i_drive)
        rep = find_field_minimum(fs, seed)
        b_ref = field_at(fs, np.array([reference[0], 0.0, reference[1]]))
        rows["l_th_um"].append(float(v))
        rows["residual_t"].append(float(np.linalg.norm(np.abs(b_ref))))
        rows["gradient_t_m"].append(rep.gradient_t_m)
        rows["min_x_um"].append(rep.x0)
        rows["min_z_um"].append(rep.z0)
    out = {k: np.asarray(v) for k, v in rows.items()}
    out["reference_um"] = np.asarray(reference, dtype=float)
    out["monotone"] = bool(np.all(np.diff(out["residual_t"][
        np.argsort(out["l_th_um"])]) <= 1e-12 + 0.02 * out["residual_t"].max()))
    return out


def write_field_map_csv(path, fmap: FieldMap, preamble=()):
    """FieldMap CSV: '# key=value' preamble then one row per node."""
    lines = []
    for extra in preamble:
        lines.append(f"# {extra}")
    lines.append(f"# power_w={fmap.power_w!r}")
    lines.append(f"# frequency_hz={fmap.frequency_hz!r}")
    lines.append(f"# y_um={fmap.grid.y!r}")
    lines.append("x_um,z_um,ReBx,ImBx,ReBy,ImBy,ReBz,ImBz")
    xs, zs = fmap.grid.xs, fmap.grid.zs
    for i, x in enumerate(xs):
        for j, z in enumerate(zs):
            b = fmap.samples[i, j]
            lines.append(",".join(
                [f"{x:.9g}", f"{z:.9g}"]
                + [f"{val:.9g}" for c in range(3)
                   for val in (b[c].real, b[c].imag)]))
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def read_field_map_csv(path) -> FieldMap:
    """Inverse of :func:`write_field_map_csv`."""
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path) as fh:
            text = fh.read()
    meta = {}
    rows = []
    header_seen = False
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                meta[k.strip()] = v.strip()
            continue
        if not header_seen:
            header_seen = True
            continue
        rows.append([float(t) for t in line.split(",")])
    arr = np.asarray(rows)
    xs = np.unique(arr[:, 0])
    zs = np.unique(arr[:, 1])
    grid = GridSpec((xs[0], xs[-1]), (zs[0], zs[-1]), len(xs), len(zs),
                    y=float(meta.get("y_um", 0.0)))
    samples = np.zeros((len(xs), len(zs), 3), dtype=complex)
    ix = {v: k for k, v in enumerate(xs)}
    iz = {v: k for k, v in enumerate(zs)}
    for row in rows:
        i, j = ix[row[0]], iz[row[1]]
        samples[i, j] = [row[2] + 1j * row[3], row[4] + 1j * row[5],
                         row[6] + 1j * row[7]]
    return FieldMap(grid=grid, samples=samples,
                    power_w=float(meta.get("power_w", 1.0)),
                    frequency_hz=float(meta.get("frequency_hz", 1e9)))
