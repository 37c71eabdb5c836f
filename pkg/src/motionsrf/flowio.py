"""Flow fields: Middlebury .flo I/O, spatial derivatives, colour coding.

A flow field is an (H, W, 2) array of (u, v) displacements in pixels per
frame; a derivative field is (H, W, 4) ordered du/dx, du/dy, dv/dx, dv/dy.
"""

import numpy as np

from .errors import DataError, FlowFormatError

FLO_MAGIC = 202021.25
_HEADER = np.dtype([("magic", "<f4"), ("width", "<i4"), ("height", "<i4")])

DERIVATIVE_NAMES = ("du_dx", "du_dy", "dv_dx", "dv_dy")


def as_flow(flow, dims=2):
    arr = np.asarray(flow)
    if arr.ndim != 3 or arr.shape[2] != dims:
        raise DataError(f"expected (H, W, {dims}) field, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("flow contains non-finite values")
    return arr


def read_flo(path):
    """Read a Middlebury .flo file into a float32 (H, W, 2) array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.itemsize:
        raise FlowFormatError(f"{path}: truncated header")
    head = np.frombuffer(raw, dtype=_HEADER, count=1)[0]
    if head["magic"] != np.float32(FLO_MAGIC):
        raise FlowFormatError(f"{path}: bad magic")
    w, h = int(head["width"]), int(head["height"])
    if w <= 0 or h <= 0:
        raise FlowFormatError(f"{path}: bad dimensions {w}x{h}")
    need = 2 * w * h
    payload = np.frombuffer(raw, dtype="<f4", offset=_HEADER.itemsize)
    if payload.size < need:
        raise FlowFormatError(f"{path}: truncated payload ({payload.size} of {need} floats)")
    flow = payload[:need].reshape(h, w, 2).astype(np.float32)
    if not np.all(np.isfinite(flow)):
        raise FlowFormatError(f"{path}: non-finite values")
    return flow


def write_flo(path, flow):
    flow = as_flow(flow)
    h, w = flow.shape[:2]
    head = np.array([(FLO_MAGIC, w, h)], dtype=_HEADER)
    with open(path, "wb") as fh:
        fh.write(head.tobytes())
        fh.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def flow_derivatives(flow):
    """Spatial derivatives of u and v.

    Central differences inside, one-sided differences on the border.
    """
    flow = as_flow(flow)
    if flow.shape[0] < 3 or flow.shape[1] < 3:
        raise DataError("flow derivatives need a field of at least 3x3")
    f = flow.astype(np.float64)
    du_dy, du_dx = np.gradient(f[..., 0])
    dv_dy, dv_dx = np.gradient(f[..., 1])
    return np.stack([du_dx, du_dy, dv_dx, dv_dy], axis=-1)


def make_colorwheel():
    """The 55-colour Middlebury wheel as floats in [0, 1]."""
    segments = [(15, (1, 0, 0), (1, 1, 0)),   # red -> yellow
                (6, (1, 1, 0), (0, 1, 0)),    # yellow -> green
                (4, (0, 1, 0), (0, 1, 1)),    # green -> cyan
                (11, (0, 1, 1), (0, 0, 1)),   # cyan -> blue
                (13, (0, 0, 1), (1, 0, 1)),   # blue -> magenta
                (6, (1, 0, 1), (1, 0, 0))]    # magenta -> red
    rows = []
    for n, start, end in segments:
        ramp = np.floor(255.0 * np.arange(n) / n)
        seg = np.empty((n, 3))
        for c in range(3):
            if start[c] == end[c]:
                seg[:, c] = 255.0 * start[c]
            elif end[c] > start[c]:
                seg[:, c] = ramp
            else:
                seg[:, c] = 255.0 - ramp
        rows.append(seg)
    return np.concatenate(rows) / 255.0


def flow_to_color(flow, max_mag=None):
    """Colour-code a flow field; hue is direction, saturation is magnitude.

    Zero flow is white. Magnitudes are divided by ``max_mag`` (the field's
    maximum when omitted); anything beyond it is darkened.
    """
    flow = as_flow(flow).astype(np.float64)
    u, v = flow[..., 0], flow[..., 1]
    rad = np.hypot(u, v)
    if max_mag is None:
        max_mag = float(rad.max())
        if max_mag == 0.0:
            max_mag = 1.0
    elif not max_mag > 0:
        raise DataError("max_mag must be positive")
    rad = rad / max_mag
    wheel = make_colorwheel()
    ncols = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi
    # full circle spans all ncols entries so the wheel closes on itself
    fk = (angle + 1.0) / 2.0 * ncols
    k0 = np.floor(fk).astype(np.int64)
    frac = (fk - k0)[..., None]
    k0 %= ncols
    k1 = (k0 + 1) % ncols
    col = (1.0 - frac) * wheel[k0] + frac * wheel[k1]
    inside = (rad <= 1.0)[..., None]
    col = np.where(inside, 1.0 - rad[..., None] * (1.0 - col), col * 0.75)
    return np.clip(col, 0.0, 1.0)
