"""Trap geometry: multilayer layouts, the 3D meander conductor, and its
discretization into current filaments.

Lengths in this module are micrometres.  A :class:`Layout` describes the
planar electrode pattern (used by the electrostatics); a
:class:`ConductorPath` describes the three-dimensional microwave conductor
as a chain of straight sections; :func:`discretize_conductor` turns a path
into straight current filaments for the quasi-static field solver.

The conductor cross-section spans the three fabrication layers: the bottom
metal of thickness ``h1``, the interconnect of thickness ``h2`` and the top
metal of thickness ``h3``.  Inside a pocket only the bottom and top sheets
conduct; the current divides between them in proportion to their
cross-sectional areas.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import yaml
from shapely.geometry import Polygon as _ShapelyPolygon
from shapely.geometry import box as _shapely_box

__all__ = [
    "Layout",
    "Electrode",
    "MeanderParams",
    "ConductorPath",
    "PathSection",
    "FilamentSet",
    "LayoutError",
    "load_layout",
    "build_meander",
    "discretize_conductor",
]

ROLES = ("RF", "DC", "MW", "GND")


class LayoutError(ValueError):
    """Layout schema or geometric invariant violation."""


@dataclass(frozen=True)
class Electrode:
    id: str
    role: str
    layer: str
    polygon: tuple  # ((x, y), ...) in um

    def shapely(self):
        return _ShapelyPolygon(self.polygon)


@dataclass(frozen=True)
class Layout:
    """Validated multilayer electrode layout (um units)."""

    layers: tuple            # ((name, thickness), ...) bottom to top
    electrodes: tuple        # Electrode instances
    substrate: tuple         # (width, height), centered on the origin
    name: str = "layout"

    def __post_init__(self):
        self.validate()

    def validate(self):
        names = [n for n, _ in self.layers]
        if len(set(names)) != len(names):
            raise LayoutError("duplicate layer names")
        for n, t in self.layers:
            if t <= 0:
                raise LayoutError(f"layer '{n}' thickness must be positive")
        w, h = self.substrate
        if w <= 0 or h <= 0:
            raise LayoutError("substrate extent must be positive")
        bounds = _shapely_box(-w / 2, -h / 2, w / 2, h / 2)
        seen = set()
        for e in self.electrodes:
            if e.id in seen:
                raise LayoutError(f"duplicate electrode id '{e.id}'")
            seen.add(e.id)
            if e.role not in ROLES:
                raise LayoutError(
                    f"electrode '{e.id}': role must be one of {ROLES}")
            if e.layer not in names:
                raise LayoutError(
                    f"electrode '{e.id}': unknown layer '{e.layer}'")
            if len(e.polygon) < 3:
                raise LayoutError(
                    f"electrode '{e.id}': polygon needs >= 3 points")
            poly = e.shapely()
            if not poly.is_valid or poly.area <= 0:
                raise LayoutError(
                    f"electrode '{e.id}': polygon must be simple "
                    "(non-self-intersecting) with positive area")
            if not bounds.contains(poly):
                raise LayoutError(
                    f"electrode '{e.id}': polygon exceeds the substrate extent")
        # same-layer overlap
        by_layer = {}
        for e in self.electrodes:
            by_layer.setdefault(e.layer, []).append(e)
        for layer, els in by_layer.items():
            for i in range(len(els)):
                pi = els[i].shapely()
                for j in range(i + 1, len(els)):
                    inter = pi.intersection(els[j].shapely())
                    if inter.area > 1e-9:
                        raise LayoutError(
                            f"electrodes '{els[i].id}' and '{els[j].id}' "
                            f"overlap on layer {layer}")

    def layer_thickness(self, name):
        for n, t in self.layers:
            if n == name:
                return t
        raise KeyError(name)

    def electrode(self, eid):
        for e in self.electrodes:
            if e.id == eid:
                return e
        raise KeyError(eid)

    def by_role(self, role):
        return [e for e in self.electrodes if e.role == role]

    def translated(self, dx, dy):
        """Rigidly translated copy (used by invariance checks)."""
        els = tuple(
            Electrode(e.id, e.role, e.layer,
                      tuple((x + dx, y + dy) for x, y in e.polygon))
            for e in self.electrodes)
        # substrate is centered on the origin; grow it so the shifted
        # electrodes stay inside
        w, h = self.substrate
        return Layout(self.layers, els,
                      (w + 2 * abs(dx), h + 2 * abs(dy)), self.name)


def load_layout(text) -> Layout:
    """Parse and validate a layout document (YAML text or stream)."""
    if hasattr(text, "read"):
        text = text.read()
    try:
        doc = yaml.safe_load(io.StringIO(text))
    except yaml.YAMLError as exc:
        raise LayoutError(f"layout document is not valid YAML: {exc}")
    if not isinstance(doc, dict):
        raise LayoutError("layout document must be a mapping")
    for key in ("layers", "electrodes", "substrate"):
        if key not in doc:
            raise LayoutError(f"missing required key '{key}'")
    sub = doc["substrate"]
    if not isinstance(sub, dict) or "width" not in sub or "height" not in sub:
        raise LayoutError("'substrate' must map 'width' and 'height'")
    layers = []
    for k, item in enumerate(doc["layers"]):
        if not isinstance(item, dict) or "name" not in item:
            raise LayoutError(f"'layers[{k}]' needs a 'name'")
        if "thickness" not in item:
            raise LayoutError(f"'layers[{k}]' needs a 'thickness'")
        layers.append((str(item["name"]), float(item["thickness"])))
    electrodes = []
    for k, item in enumerate(doc["electrodes"]):
        for req in ("id", "role", "layer", "polygon"):
            if req not in item:
                raise LayoutError(f"'electrodes[{k}]' missing key '{req}'")
        poly = tuple((float(p[0]), float(p[1])) for p in item["polygon"])
        electrodes.append(Electrode(str(item["id"]), str(item["role"]),
                                    str(item["layer"]), poly))
    return Layout(tuple(layers), tuple(electrodes),
                  (float(sub["width"]), float(sub["height"])),
                  str(doc.get("name", "layout")))


def dump_layout(layout: Layout) -> str:
    """Serialize a Layout back to the text schema."""
    doc = {
        "name": layout.name,
        "substrate": {"width": layout.substrate[0],
                      "height": layout.substrate[1]},
        "layers": [{"name": n, "thickness": t} for n, t in layout.layers],
        "electrodes": [
            {"id": e.id, "role": e.role, "layer": e.layer,
             "polygon": [[float(x), float(y)] for x, y in e.polygon]}
            for e in layout.electrodes],
    }
    return yaml.safe_dump(doc, sort_keys=False)


@dataclass(frozen=True)
class MeanderParams:
    """Parametric description of the three-segment meander conductor.

    ``l_m`` segment length, ``w_mwm`` segment width, ``l_th`` pocket
    length, widths of the inner/outer rf rails, of the wide ground
    electrode and of the inter-electrode gap, and the three layer
    thicknesses.  Adjacent segments are separated edge-to-edge by
    ``2 w_gap + w_rf1`` so an inner rf rail fits between them.
    """

    l_m: float = 900.0
    w_mwm: float = 20.0
    l_th: float = 200.0
    w_rf1: float = 14.0
    w_rf2: float = 40.0
    w_mws: float = 100.0
    w_gap: float = 5.0
    h1: float = 4.4
    h2: float = 9.5
    h3: float = 5.2

    def __post_init__(self):
        for name in ("l_m", "w_mwm", "w_rf1", "w_rf2", "w_mws", "w_gap",
                     "h1", "h2", "h3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.l_th < 0:
            raise ValueError("l_th must be >= 0")
        if self.l_th >= self.l_m:
            raise ValueError("pocket length l_th must be smaller than l_m")

    @property
    def segment_pitch(self):
        """Center-to-center distance of adjacent segments."""
        return self.w_mwm + 2.0 * self.w_gap + self.w_rf1

    @property
    def stack_height(self):
        return self.h1 + self.h2 + self.h3


@dataclass(frozen=True)
class PathSection:
    """One straight piece of a conductor path.

    ``start``/``end`` are the 3D centroid line of the conducting
    cross-section (um).  ``kind`` is ``stack`` (all three layers),
    ``l1`` (bottom layer only), ``jog`` (vertical transition) or
    ``pocket`` (bottom and top sheets conducting, interconnect layer
    dielectric).
    """

    start: tuple
    end: tuple
    width: float
    thickness: float
    kind: str

    def __post_init__(self):
        if self.width <= 0 or self.thickness <= 0:
            raise ValueError("section width and thickness must be positive")
        if np.allclose(self.start, self.end):
            raise ValueError("zero-length section")


@dataclass(frozen=True)
class ConductorPath:
    """Connected chain of sections with feed (F) and ground (G) ports."""

    sections: tuple
    ports: dict
    params: MeanderParams = None

    def __post_init__(self):
        prev = None
        for s in self.sections:
            if prev is not None and not np.allclose(prev, s.start, atol=1e-9):
                raise ValueError("path sections are not connected end-to-end")
            prev = s.end
        if "F" not in self.ports or "G" not in self.ports:
            raise ValueError("path needs 'F' and 'G' ports")


def build_meander(p: MeanderParams, center=(0.0, 0.0)) -> ConductorPath:
    """Construct the three-segment meander conductor path.

    The three segments of length ``l_m`` run along y at lateral pitch
    ``segment_pitch`` and span the full layer stack; the turns and the
    feed/ground stubs lie in the bottom layer only and connect the
    segments outside their ends.  A pocket of length ``l_th`` is centered
    on each segment.  z = 0 is the top surface of the upper metal (the
    electrode plane); the conductor occupies z in [-stack_height, 0].
    The result is deterministic in its inputs.
    """
    cx, cy = center
    s = p.segment_pitch
    z_l1 = p.h1 / 2.0 - p.stack_height
    z_stack = -p.stack_height / 2.0
    half = p.l_m / 2.0
    stub = 4.0 * p.w_mwm

    xs = [cx - s, cx, cx + s]
    sections = []

    def add(a, b, width, thickness, kind):
        sections.append(PathSection(tuple(a), tuple(b), width, thickness, kind))

    def add_segment(x, y_from, y_to):
        """One meander segment along y with a centered pocket."""
        sgn = 1.0 if y_to > y_from else -1.0
        if p.l_th > 0:
            y1 = cy - sgn * p.l_th / 2.0
            y2 = cy + sgn * p.l_th / 2.0
            add((x, y_from, z_stack), (x, y1, z_stack), p.w_mwm,
                p.stack_height, "stack")
            add((x, y1, z_stack), (x, y2, z_stack), p.w_mwm,
                p.stack_height, "pocket")
            add((x, y2, z_stack), (x, y_to, z_stack), p.w_mwm,
                p.stack_height, "stack")
        else:
            add((x, y_from, z_stack), (x, y_to, z_stack), p.w_mwm,
                p.stack_height, "stack")

    # feed stub in L1, approaching seg 1 from the outside
    f_port = (xs[0], cy - half - stub, z_l1)
    add(f_port, (xs[0], cy - half, z_l1), p.w_mwm, p.h1, "l1")
    add((xs[0], cy - half, z_l1), (xs[0], cy - half, z_stack), p.w_mwm,
        p.w_mwm, "jog")
    add_segment(xs[0], cy - half, cy + half)
    add((xs[0], cy + half, z_stack), (xs[0], cy + half, z_l1), p.w_mwm,
        p.w_mwm, "jog")
    # turn 1 in L1, beyond the segment end
    add((xs[0], cy + half, z_l1), (xs[0], cy + half + stub, z_l1), p.w_mwm,
        p.h1, "l1")
    add((xs[0], cy + half + stub, z_l1), (xs[1], cy + half + stub, z_l1),
        p.w_mwm, p.h1, "l1")
    add((xs[1], cy + half + stub, z_l1), (xs[1], cy + half, z_l1), p.w_mwm,
        p.h1, "l1")
    add((xs[1], cy + half, z_l1), (xs[1], cy + half, z_stack), p.w_mwm,
        p.w_mwm, "jog")
    add_segment(xs[1], cy + half, cy - half)
    add((xs[1], cy - half, z_stack), (xs[1], cy - half, z_l1), p.w_mwm,
        p.w_mwm, "jog")
    # turn 2 in L1
    add((xs[1], cy - half, z_l1), (xs[1], cy - half - stub, z_l1), p.w_mwm,
        p.h1, "l1")
    add((xs[1], cy - half - stub, z_l1), (xs[2], cy - half - stub, z_l1),
        p.w_mwm, p.h1, "l1")
    add((xs[2], cy - half - stub, z_l1), (xs[2], cy - half, z_l1), p.w_mwm,
        p.h1, "l1")
    add((xs[2], cy - half, z_l1), (xs[2], cy - half, z_stack), p.w_mwm,
        p.w_mwm, "jog")
    add_segment(xs[2], cy - half, cy + half)
    add((xs[2], cy + half, z_stack), (xs[2], cy + half, z_l1), p.w_mwm,
        p.w_mwm, "jog")
    # ground stub in L1
    g_port = (xs[2], cy + half + stub, z_l1)
    add((xs[2], cy + half, z_l1), g_port, p.w_mwm, p.h1, "l1")

    return ConductorPath(tuple(sections), {"F": f_port, "G": g_port}, p)


class FilamentSet:
    """Straight current filaments (um coordinates, complex ampere phasors).

    ``starts``/``ends`` are (n, 3) arrays; ``currents`` is complex (n,).
    ``source`` keeps a reference to the ConductorPath the set came from.
    """

    def __init__(self, starts, ends, currents, source=None, drive_current=1.0):
        self.starts = np.asarray(starts, dtype=float).reshape(-1, 3)
        self.ends = np.asarray(ends, dtype=float).reshape(-1, 3)
        self.currents = np.asarray(currents, dtype=complex).reshape(-1)
        if not (len(self.starts) == len(self.ends) == len(self.currents)):
            raise ValueError("inconsistent filament arrays")
        lengths = np.linalg.norm(self.ends - self.starts, axis=1)
        if np.any(lengths <= 0):
            raise ValueError("zero-length filament")
        self.source = source
        self.drive_current = complex(drive_current)

    def __len__(self):
        return len(self.currents)

    def scaled(self, factor):
        """New set with all currents (and the drive) multiplied by factor."""
        return FilamentSet(self.starts, self.ends, self.currents * factor,
                           self.source, self.drive_current * factor)

    def merged(self, other):
        return FilamentSet(
            np.vstack([self.starts, other.starts]),
            np.vstack([self.ends, other.ends]),
            np.concatenate([self.currents, other.currents]),
            source=(self.source, other.source),
            drive_current=self.drive_current)

    def junction_imbalance(self, ports=None):
        """Maximum net current into any interior node, relative to the drive.

        Nodes are filament endpoints (rounded to 1e-6 um); the feed and
        termination nodes (``port_nodes`` when produced by the
        discretizer) are excluded from the balance.
        """
        if ports is None:
            ports = getattr(self, "port_nodes", ())
        nodes = {}

        def key(pt):
            return tuple(np.round(pt, 6))

        for st, en, cur in zip(self.starts, self.ends, self.currents):
            nodes[key(st)] = nodes.get(key(st), 0.0) - cur
            nodes[key(en)] = nodes.get(key(en), 0.0) + cur
        port_keys = {key(np.asarray(p)) for p in ports}
        worst = 0.0
        for k, net in nodes.items():
            if k in port_keys:
                continue
            worst = max(worst, abs(net))
        scale = abs(self.drive_current) or 1.0
        return worst / scale

    def feed_current(self):
        """Total current leaving the feed-port nodes (A, complex)."""
        feed = {tuple(np.round(p, 6))
                for p in getattr(self, "feed_nodes", ())}

        def key(pt):
            return tuple(np.round(pt, 6))

        total = 0.0
        for st, en, cur in zip(self.starts, self.ends, self.currents):
            if key(st) in feed:
                total += cur
            if key(en) in feed:
                total -= cur
        return total


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def discretize_conductor(path: ConductorPath, transverse_n: int = 8,
                         split_rule: str = "area", drive_current=1.0,
                         vertical_n: int = 1) -> FilamentSet:
    """Replace every path section by parallel current filaments.

    Each section becomes ``transverse_n`` filaments spread uniformly
    across its width, carrying equal shares of the drive current
    (uniform current density).  Across a pocket the current splits
    between the bottom and top sheets in proportion to their conducting
    cross-sections ``h1 w`` and ``h3 w``; short vertical filaments at the
    pocket ends carry the redistribution so that Kirchhoff's law holds at
    every junction.  ``vertical_n > 1`` additionally resolves full-stack
    sections into that many equal-current layers over the stack height
    (pocket sheets get proportional shares), which matters when the stack
    height is not small against the field-point distance.  Short diagonal
    connectors stitch the parallel strips around corners.
    """
    if transverse_n < 1:
        raise ValueError("transverse_n must be >= 1")
    if vertical_n < 1:
        raise ValueError("vertical_n must be >= 1")
    if split_rule != "area":
        raise ValueError("only the 'area' split rule is implemented")
    p = path.params
    if p is None:
        raise ValueError("path carries no MeanderParams")
    i0 = complex(drive_current)
    per = i0 / transverse_n

    starts, ends, currents = [], [], []

    def emit(a, b, cur):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.allclose(a, b, atol=1e-12):
            return
        starts.append(a)
        ends.append(b)
        currents.append(cur)

    def vertical_layers(z_lo, z_hi, n):
        edges = np.linspace(z_lo, z_hi, n + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def offset_dir(sec):
        d = _unit(np.asarray(sec.end) - np.asarray(sec.start))
        if abs(d[2]) > 0.99:
            # vertical jogs sit between y-running pieces: offset across x
            return np.array([1.0, 0.0, 0.0])
        return np.array([-d[1], d[0], 0.0])

    def bus(xy, nodes):
        """Vertical redistribution filaments at a section interface.

        ``nodes``: (z, current arriving).  Segments between consecutive
        heights carry the running sum; every node balances exactly.
        """
        nodes = sorted(nodes, key=lambda t: t[0])
        running = 0.0
        for (z1, cur), (z2, _) in zip(nodes[:-1], nodes[1:]):
            running = running + cur
            if abs(running) > 1e-300 and z2 > z1:
                emit((xy[0], xy[1], z1), (xy[0], xy[1], z2), running)

    offsets = _transverse_offsets(path.sections[0].width, transverse_n)
    feed_nodes, ground_nodes = [], []

    for k_strip, o in enumerate(offsets):
        prev_end = None
        for sec in path.sections:
            odir = offset_dir(sec)
            a = np.asarray(sec.start, dtype=float) + o * odir
            b = np.asarray(sec.end, dtype=float) + o * odir
            if prev_end is None:
                feed_nodes.append(tuple(a))
            elif not np.allclose(prev_end, a, atol=1e-9):
                emit(prev_end, a, per)  # corner connector
            if sec.kind == "pocket":
                a_frac = p.h1 / (p.h1 + p.h3)
                b_frac = p.h3 / (p.h1 + p.h3)
                base = a[2] - p.stack_height / 2.0
                n_lo = max(1, round(vertical_n * p.h1 / p.stack_height))
                n_hi = max(1, round(vertical_n * p.h3 / p.stack_height))
                z_lo = vertical_layers(base, base + p.h1, n_lo)
                z_hi = vertical_layers(base + p.h1 + p.h2,
                                       base + p.stack_height, n_hi)
                sheet = ([(z, -per * a_frac / n_lo) for z in z_lo]
                         + [(z, -per * b_frac / n_hi) for z in z_hi])
                bus(a, [(a[2], per)] + sheet)
                for z, cur in sheet:
                    emit((a[0], a[1], z), (b[0], b[1], z), -cur)
                bus(b, [(b[2], -per)] + [(z, -c) for z, c in sheet])
            elif sec.kind == "stack" and vertical_n > 1:
                base = a[2] - p.stack_height / 2.0
                z_w = vertical_layers(base, base + p.stack_height, vertical_n)
                slab = [(z, -per / vertical_n) for z in z_w]
                bus(a, [(a[2], per)] + slab)
                for z, cur in slab:
                    emit((a[0], a[1], z), (b[0], b[1], z), -cur)
                bus(b, [(b[2], -per)] + [(z, -c) for z, c in slab])
            else:
                emit(a, b, per)
            prev_end = b
        ground_nodes.append(tuple(prev_end))

    fs = FilamentSet(starts, ends, currents, source=path, drive_current=i0)
    fs.feed_nodes = tuple(feed_nodes)
    fs.ground_nodes = tuple(ground_nodes)
    fs.port_nodes = tuple(feed_nodes) + tuple(ground_nodes)
    return fs


def _transverse_offsets(width, n):
    """Centroids of n equal strips across the width."""
    edges = np.linspace(-width / 2.0, width / 2.0, n + 1)
    return 0.5 * (edges[:-1] + edges[1:])
