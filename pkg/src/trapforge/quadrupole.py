"""The 2D complex quadrupole model of the microwave near-field.

Around its minimum the transverse field phasor is described by seven
parameters: residual amplitude ``b`` (T), gradient ``b_prime`` (T/m),
residual direction ``alpha`` (deg), quadrupole axis ``beta`` (deg), the
phase ``psi`` (deg) between real and imaginary field parts, and the
minimum position ``(x0, z0)`` (um):

    B(r) = b_prime * exp(i psi) * M(beta) (r - r0)  +  b (cos a, sin a)

with the symmetric traceless unit matrix
``M(beta) = [[cos b, sin b], [sin b, -cos b]]`` whose eigenvalues are +-1,
so the pure quadrupole magnitude is isotropic, ``|Q| = b_prime |r - r0|``.

The phase sits on the quadrupole term and the residual is a real
(linearly polarized) vector.  This is the one arrangement of the seven
parameters that is identifiable: if the residual shared the quadrupole's
phase it could be absorbed exactly into a shift of the center, since
``M`` is invertible, and the residual amplitude would be pure gauge.
At ``psi = 0`` exactly that degeneracy reappears, so fits of
near-real data are well conditioned only through their nonzero ``psi``.

Positions are in micrometres at this interface, fields in tesla.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, brentq

from . import constants as ct
from .atom import HyperfineModel, TransitionSpec, ac_zeeman_shift

__all__ = [
    "QuadrupoleParams",
    "eval_quadrupole",
    "fit_quadrupole",
    "bound_residual_field",
    "FitError",
]

_PARAM_NAMES = ("b", "b_prime", "alpha", "beta", "psi", "x0", "z0")


class FitError(RuntimeError):
    """Quadrupole fit failed; carries optimizer diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class QuadrupoleParams:
    """Seven-parameter transverse quadrupole description.

    Angles are degrees, normalized to (-180, 180]; ``b >= 0`` and
    ``b_prime > 0``.  ``uncertainties`` maps parameter names to 1-sigma
    estimates when produced by a fit.
    """

    b: float
    b_prime: float
    alpha: float
    beta: float
    psi: float
    x0: float
    z0: float
    uncertainties: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("residual amplitude b must be >= 0")
        if self.b_prime <= 0:
            raise ValueError("gradient b_prime must be > 0")
        for name in ("alpha", "beta", "psi"):
            v = getattr(self, name)
            object.__setattr__(self, name, _wrap_deg(v))

    @property
    def r0(self):
        return np.array([self.x0, self.z0])


def _wrap_deg(angle):
    """Wrap an angle in degrees into (-180, 180]."""
    a = (angle + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def _mbeta(beta_deg):
    b = np.radians(beta_deg)
    return np.array([[np.cos(b), np.sin(b)], [np.sin(b), -np.cos(b)]])


def eval_quadrupole(p: QuadrupoleParams, points):
    """Complex transverse field (T) of the model at ``points`` (um).

    ``points`` is (..., 2); returns a complex array of the same shape.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    delta = (pts - p.r0) * 1e-6
    quad = delta @ _mbeta(p.beta).T * (p.b_prime * np.exp(1j * np.radians(p.psi)))
    a = np.radians(p.alpha)
    out = quad + p.b * np.array([np.cos(a), np.sin(a)])
    return out[0] if single else out


def _pack(p_dict, free):
    return np.array([p_dict[k] for k in free])


def _model_from_vector(vec, free, fixed):
    d = dict(fixed)
    d.update(zip(free, vec))
    return d


def _raw_eval(d, pts):
    delta = (pts - np.array([d["x0"], d["z0"]])) * 1e-6
    quad = delta @ _mbeta(d["beta"]).T * (d["b_prime"]
                                          * np.exp(1j * np.radians(d["psi"])))
    a = np.radians(d["alpha"])
    return quad + d["b"] * np.array([np.cos(a), np.sin(a)])


def fit_quadrupole(points, values, fix_b=False, fix_alpha=False,
                   observable=None, p0=None, sigma=None):
    """Least-squares fit of the seven-parameter model.

    Parameters
    ----------
    points : (n, 2) array
        Sample positions (um).
    values : array
        Either complex transverse fields, shape (n, 2), or real scalars,
        shape (n,).  Scalar data are compared against ``|B_model|`` or,
        when ``observable`` is given, against ``observable(B_model)``
        evaluated per sample (used to fit AC Zeeman shift maps).
    fix_b, fix_alpha : bool
        Pin the residual amplitude / direction to zero, the standard
        treatment when the residual is below the data noise.
    p0 : QuadrupoleParams, optional
        Starting point; a coarse default is derived from the data.
    sigma : array, optional
        Known 1-sigma data errors, broadcastable to ``values``.  A
        complex entry gives separate scales for the real and imaginary
        parts of complex data.  Residuals are whitened by it and the
        reported parameter uncertainties then carry the data's error
        anisotropy.

    Returns
    -------
    QuadrupoleParams with 1-sigma uncertainties from the Jacobian.
    """
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    scalar_mode = vals.ndim == 1
    n_fixed = int(fix_b) + int(fix_alpha)
    min_samples = 5 if n_fixed == 2 else 7
    if pts.shape[0] < min_samples:
        raise ValueError(f"need at least {min_samples} samples")
    centered = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9 * max(1.0, np.abs(pts).max())) < 2:
        raise FitError("rank-deficient sample geometry: points are collinear")

    fixed = {}
    free = list(_PARAM_NAMES)
    if fix_b:
        fixed["b"] = 0.0
        free.remove("b")
    if fix_alpha:
        fixed["alpha"] = 0.0
        free.remove("alpha")
    if scalar_mode and observable is None:
        # magnitudes are blind to the global phase
        fixed["psi"] = 0.0
        free.remove("psi")

    if p0 is None:
        guess = _default_guess(pts, vals, scalar_mode)
    else:
        guess = {k: getattr(p0, k) for k in _PARAM_NAMES}
    guess.update(fixed)

    if scalar_mode and observable is not None:
        def predict(d):
            return np.array([observable(v) for v in _raw_eval(d, pts)])
    elif scalar_mode:
        def predict(d):
            return np.abs(np.linalg.norm(_raw_eval(d, pts), axis=1))
    else:
        def predict(d):
            return _raw_eval(d, pts)

    target = vals
    if sigma is not None:
        sig = np.broadcast_to(np.asarray(sigma), vals.shape)
        if np.iscomplexobj(sig):
            w_re, w_im = 1.0 / sig.real, 1.0 / sig.imag
        else:
            w_re = w_im = 1.0 / sig
    else:
        w_re = w_im = None

    def residuals(vec):
        d = _model_from_vector(vec, free, fixed)
        pred = predict(d)
        r = pred - target
        if np.iscomplexobj(r):
            rr, ri = r.real, r.imag
            if w_re is not None:
                rr, ri = rr * w_re, ri * w_im
            return np.concatenate([rr.ravel(), ri.ravel()])
        if w_re is not None:
            r = r * w_re
        return np.asarray(r, dtype=float).ravel()

    # the beta -> beta + 90 deg family of local minima is avoided by a
    # small multi-start over the quadrupole axis
    best = None
    for beta_start in (guess["beta"], 0.0, 45.0, 90.0, 135.0):
        g = dict(guess)
        g["beta"] = beta_start
        x0 = _pack(g, free)
        res = least_squares(residuals, x0, method="lm", max_nfev=20000)
        if best is None or res.cost < best.cost:
            best = res
    if not best.success:
        raise FitError("quadrupole fit did not converge", diagnostics=best)

    d = _model_from_vector(best.x, free, fixed)
    d, flips = _canonicalize(d, fold_beta=(scalar_mode or d["b"] == 0.0))

    # 1-sigma from the Jacobian at the optimum; with known data errors the
    # whitened chi-square needs no rescaling
    dof = best.fun.size - len(free)
    errors = {}
    if dof > 0:
        jtj = best.jac.T @ best.jac
        scale = 1.0 if sigma is not None else 2.0 * best.cost / dof
        try:
            cov = np.linalg.inv(jtj) * scale
            for k, name in enumerate(free):
                errors[name] = float(np.sqrt(max(cov[k, k], 0.0)))
        except np.linalg.LinAlgError:
            pass

    return QuadrupoleParams(uncertainties=errors,
                            **{k: d[k] for k in _PARAM_NAMES})


def _default_guess(pts, vals, scalar_mode):
    if scalar_mode:
        k = int(np.argmin(np.abs(vals)))
        span = np.ptp(pts, axis=0).max() * 1e-6
        bp = max(np.abs(vals).max() / max(span, 1e-9), 1.0)
    else:
        mags = np.linalg.norm(vals, axis=1)
        k = int(np.argmin(mags))
        span = np.ptp(pts, axis=0).max() * 1e-6
        bp = max(mags.max() / max(span, 1e-9), 1.0)
    return {"b": 0.0, "b_prime": bp, "alpha": 0.0, "beta": 45.0,
            "psi": 0.0, "x0": pts[k, 0], "z0": pts[k, 1]}


def _canonicalize(d, fold_beta):
    """Fold parameter equivalences into the canonical representative.

    Exact model symmetries: (b -> -b, alpha += 180) and
    (psi += 180, beta += 180), since -M(beta) = M(beta + 180).  The
    representative has b >= 0 and psi in (-90, 90].  For magnitude data
    or a pure quadrupole, beta and beta + 180 are indistinguishable and
    beta itself is folded into (-90, 90].
    """
    d = dict(d)
    if d["b_prime"] < 0:
        d["b_prime"] = -d["b_prime"]
        d["psi"] = d["psi"] + 180.0
    if d["b"] < 0:
        d["b"] = -d["b"]
        d["alpha"] = d["alpha"] + 180.0
    psi = _wrap_deg(d["psi"])
    if psi <= -90.0 or psi > 90.0:
        psi = _wrap_deg(psi + 180.0)
        d["beta"] = d["beta"] + 180.0
    d["psi"] = psi
    d["beta"] = _wrap_deg(d["beta"])
    if fold_beta and (d["beta"] <= -90.0 or d["beta"] > 90.0):
        d["beta"] = _wrap_deg(d["beta"] + 180.0)
    d["alpha"] = _wrap_deg(d["alpha"])
    return d, None


def bound_residual_field(min_shift_hz: float, transition: TransitionSpec,
                         drive_frequency: float, fit: QuadrupoleParams,
                         model: HyperfineModel,
                         probe_power_db: float = 3.0) -> float:
    """Upper bound (T) on the residual field from the lowest measured shift.

    Solves for the residual amplitude that reproduces ``min_shift_hz`` at
    the fitted minimum, with the residual direction set to alpha = 0 (the
    orientation quoted with the bound) and the measured shift assumed to
    sit at the absolute field minimum.  ``probe_power_db`` is the nominal
    power step of the probe dataset above the reference dataset of the
    fit; the returned bound is referred back to the reference power.

    The bound scales as sqrt(min_shift) in the far-detuned regime where
    the shift is quadratic in the field.
    """
    if min_shift_hz < 0:
        raise ValueError("shift must be >= 0")
    if min_shift_hz == 0.0:
        return 0.0

    direction = np.array([1.0, 0.0, 0.0])  # alpha = 0: along the lateral axis

    def shift_of(b):
        return abs(ac_zeeman_shift(model, transition, b * direction,
                                   drive_frequency))

    # noise floor: the coefficient must produce the target shift for some
    # field below one tesla
    probe = 1e-9
    coeff = shift_of(probe) / probe ** 2
    if coeff * 1.0 < min_shift_hz:
        raise ValueError("requested shift is below the coupling's reach")

    b_hi = np.sqrt(min_shift_hz / coeff) * 4.0
    while shift_of(b_hi) < min_shift_hz:
        b_hi *= 2.0
        if b_hi > 1.0:
            raise ValueError("no field below 1 T reproduces the shift")
    b_at_probe = brentq(lambda b: shift_of(b) - min_shift_hz, 1e-12, b_hi)
    return b_at_probe * 10.0 ** (-probe_power_db / 20.0)
