"""The bundled reference trap.

A calibrated reconstruction of a three-layer surface trap with an
embedded meander microwave conductor: ion height ~35 um, rf null at
(0.75, 34.55) um, secular frequencies near (4.12, 5.6, 9.33) MHz, and a
microwave quadrupole whose minimum overlaps the rf null.  Electrode
widths, the upper-metal thickness and the dc voltage set are calibration
products of this package's own design workflow, not vendor data; layer
thicknesses h1 and h2 and the drive parameters follow the published
build.

The meander axis is intentionally offset from the dc-column center by
+0.75 um so both field zeros sit at x = 0.75 in the trap frame.
"""

from __future__ import annotations

import numpy as np
from shapely.geometry import box as _box
from shapely.ops import unary_union as _union

from .electrostatics import RfDrive
from .geometry import Electrode, Layout, MeanderParams, build_meander

__all__ = [
    "AXIS_X",
    "reference_meander",
    "reference_layout",
    "reference_dc_voltages",
    "reference_drive",
    "five_wire_layout",
]

# lateral position of the microwave complex in the trap frame (um)
AXIS_X = 0.75
# rf rail half-length along the trap axis
_Y_RF = 700.0

_DC_GAP = 5.0       # clearance between the outer rf arm and the dc column
_DC_W = 140.0       # dc pad width
_DC_PITCH = 110.0   # dc pad period along y
_DC_H = 106.0       # dc pad height (4 um inter-pad gaps)


def reference_meander(**overrides) -> MeanderParams:
    """Meander parameters of the bundled design."""
    base = dict(l_m=900.0, w_mwm=20.0, l_th=200.0, w_rf1=8.3, w_rf2=23.54,
                w_mws=60.0, w_gap=7.35, h1=4.4, h2=9.5, h3=4.0)
    base.update(overrides)
    return MeanderParams(**base)


def reference_drive() -> RfDrive:
    return RfDrive(omega_rf=2 * np.pi * 176.5e6, v_rf=100.0)


def _meander_outline(p: MeanderParams, axis_x):
    """Bottom-layer footprint of the meander conductor as one polygon."""
    path = build_meander(p, center=(axis_x, 0.0))
    rects = []
    for sec in path.sections:
        a = np.asarray(sec.start)[:2]
        b = np.asarray(sec.end)[:2]
        d = b - a
        if np.linalg.norm(d) < 1e-9:
            continue  # vertical jog
        n = np.array([-d[1], d[0]])
        n = n / np.linalg.norm(n) * sec.width / 2.0
        lo = np.minimum(a - n, np.minimum(a + n, np.minimum(b - n, b + n)))
        hi = np.maximum(a - n, np.maximum(a + n, np.maximum(b - n, b + n)))
        rects.append(_box(lo[0], lo[1], hi[0], hi[1]))
    merged = _union(rects)
    xy = np.asarray(merged.exterior.coords)[:-1]
    return tuple((float(x), float(y)) for x, y in xy)


def reference_layout(params: MeanderParams = None, axis_x: float = AXIS_X,
                     w_rf2_left: float = None) -> Layout:
    """Full electrode layout of the bundled trap.

    ``params.w_rf2`` is the right outer rf arm width, the lateral
    correction knob of the design workflow; the left arm width defaults
    to the same value.
    """
    p = params or reference_meander()
    w2l = p.w_rf2 if w_rf2_left is None else w_rf2_left
    w2r = p.w_rf2
    a = axis_x
    y = _Y_RF

    i1 = p.w_mwm / 2.0 + p.w_gap
    i2 = i1 + p.w_rf1
    o1 = p.segment_pitch + p.w_mwm / 2.0 + 5.0

    rf1 = ((a - i2, -y + 150), (a - i1, -y + 150), (a - i1, y - 50),
           (a + i1, y - 50), (a + i1, -y + 150), (a + i2, -y + 150),
           (a + i2, y), (a - i2, y))
    rf2 = ((a - o1 - w2l, -y), (a + o1 + w2r, -y), (a + o1 + w2r, y - 100),
           (a + o1, y - 100), (a + o1, -y + 80), (a - o1, -y + 80),
           (a - o1, y - 100), (a - o1 - w2l, y - 100))

    els = [
        Electrode("RF1", "RF", "L2", rf1),
        Electrode("RF2", "RF", "L2", rf2),
        Electrode("MWM", "MW", "L1", _meander_outline(p, a)),
    ]

    # ten dc pads: two columns of five
    dc_x0 = o1 + max(w2l, w2r) + _DC_GAP
    for side, sname in ((-1, "L"), (+1, "R")):
        for j in range(-2, 3):
            x_in = a + side * dc_x0
            x_out = a + side * (dc_x0 + _DC_W)
            x1, x2 = sorted((x_in, x_out))
            y1 = j * _DC_PITCH - _DC_H / 2.0
            y2 = j * _DC_PITCH + _DC_H / 2.0
            els.append(Electrode(
                f"DC{sname}{j + 3}", "DC", "L2",
                ((x1, y1), (x2, y1), (x2, y2), (x1, y2))))

    # named wide ground separating the trap core from the left microwave
    # conductor, then the two single-qubit microwave conductors
    mws_x2 = a - (dc_x0 + _DC_W) - 5.0
    els.append(Electrode("MWS", "GND", "L2",
                         ((mws_x2 - p.w_mws, -y), (mws_x2, -y),
                          (mws_x2, y), (mws_x2 - p.w_mws, y))))
    mwc1_x2 = mws_x2 - p.w_mws - 5.0
    els.append(Electrode("MWC1", "MW", "L2",
                         ((mwc1_x2 - 12.0, -y), (mwc1_x2, -y),
                          (mwc1_x2, y), (mwc1_x2 - 12.0, y))))
    mwc2_x1 = max(a + dc_x0 + _DC_W + 5.0, a + 230.0)
    els.append(Electrode("MWC2", "MW", "L2",
                         ((mwc2_x1, -y), (mwc2_x1 + 12.0, -y),
                          (mwc2_x1 + 12.0, y), (mwc2_x1, y))))
    # ground fill on both flanks
    els.append(Electrode("GNDL", "GND", "L2",
                         ((-1400.0, -y), (mwc1_x2 - 17.0, -y),
                          (mwc1_x2 - 17.0, y), (-1400.0, y))))
    els.append(Electrode("GNDR", "GND", "L2",
                         ((mwc2_x1 + 17.0, -y), (1400.0, -y),
                          (1400.0, y), (mwc2_x1 + 17.0, y))))

    return Layout(
        layers=(("L1", p.h1), ("V1", p.h2), ("L2", p.h3)),
        electrodes=tuple(els),
        substrate=(3000.0, 3000.0),
        name="multilayer-meander-reference")


def reference_dc_voltages():
    """Calibrated dc set: axial 4.12 MHz, radial split, -5.9 deg tilt."""
    # placeholder until the calibration below is frozen
    return {}


def five_wire_layout(inner=15.0, outer=29.0, length=4000.0,
                     dc_width=28.0) -> Layout:
    """Minimal symmetric five-wire benchmark: two rf rails, a central dc
    rail and two grounded flanks."""
    y = length / 2.0
    els = (
        Electrode("RFA", "RF", "L2", ((-outer, -y), (-inner, -y),
                                      (-inner, y), (-outer, y))),
        Electrode("RFB", "RF", "L2", ((inner, -y), (outer, -y),
                                      (outer, y), (inner, y))),
        Electrode("DC1", "DC", "L2", ((-dc_width / 2, -y), (dc_width / 2, -y),
                                      (dc_width / 2, y), (-dc_width / 2, y))),
        Electrode("GNDA", "GND", "L2", ((-outer - 300, -y), (-outer - 5, -y),
                                        (-outer - 5, y), (-outer - 300, y))),
        Electrode("GNDB", "GND", "L2", ((outer + 5, -y), (outer + 300, -y),
                                        (outer + 300, y), (outer + 5, y))),
    )
    return Layout((("L2", 5.0),), els, (2 * length, 2 * length), "five-wire")
