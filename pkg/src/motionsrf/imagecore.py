"""Images as float arrays in [0, 1]: I/O, opponent colour, Canny, warping.

An image is a float64 array of shape (H, W) for grayscale or (H, W, 3) for
colour. Convolutions pad by replicating the border.
"""

import math

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from . import kernels
from .errors import DataError, ImageFormatError

CANNY_SIGMA = 1.4
CANNY_LOW = 0.1
CANNY_HIGH = 0.2

_SQ2 = math.sqrt(2.0)
_SQ3 = math.sqrt(3.0)
_SQ6 = math.sqrt(6.0)
# analytic value ranges of the three opponent channels for RGB in [0, 1]
OPPONENT_RANGES = (
    (-1.0 / _SQ2, 1.0 / _SQ2),
    (-2.0 / _SQ6, 2.0 / _SQ6),
    (0.0, _SQ3),
)


def as_image(img):
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise DataError(f"expected (H, W) or (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DataError("image has zero size")
    return arr


def channels(img):
    return 1 if img.ndim == 2 else img.shape[2]


def load_image(path):
    """Read an 8-bit PNG or binary PPM/PGM into a float image in [0, 1]."""
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in ("PNG", "PPM"):
                raise ImageFormatError(f"{path}: unsupported format {fmt}")
            mode = im.mode
            if mode == "L":
                data = np.asarray(im, dtype=np.uint8)
            elif mode in ("RGB", "RGBA", "P", "LA"):
                target = "L" if mode == "LA" else "RGB"
                data = np.asarray(im.convert(target), dtype=np.uint8)
            elif mode == "1":
                data = np.asarray(im.convert("L"), dtype=np.uint8)
            else:
                raise ImageFormatError(f"{path}: unsupported pixel mode {mode}")
    except FileNotFoundError:
        raise
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: unreadable image") from exc
    if data.shape[0] == 0 or data.shape[1] == 0:
        raise ImageFormatError(f"{path}: zero dimensions")
    return data.astype(np.float64) / 255.0


def to_uint8(img):
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_image(path, img):
    """Write an image as 8-bit PNG."""
    img = as_image(img)
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def to_gray(img):
    img = as_image(img)
    if img.ndim == 2:
        return img
    return img.mean(axis=2)


def to_opponent(img, rescale=True):
    """RGB -> opponent colour space.

    O1 = (R-G)/sqrt2, O2 = (R+G-2B)/sqrt6, O3 = (R+G+B)/sqrt3. With
    ``rescale`` each channel is mapped affinely from its analytic range onto
    [0, 1], so the mapping does not depend on image content.
    """
    img = as_image(img)
    if img.ndim != 3:
        raise DataError("opponent conversion needs a 3-channel image")
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    opp = np.stack([(r - g) / _SQ2, (r + g - 2.0 * b) / _SQ6, (r + g + b) / _SQ3], axis=-1)
    if rescale:
        for c, (lo, hi) in enumerate(OPPONENT_RANGES):
            opp[..., c] = (opp[..., c] - lo) / (hi - lo)
    return opp


def gaussian_kernel(sigma=CANNY_SIGMA, size=5):
    ax = np.arange(size) - size // 2
    k = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return k / k.sum()


def smoothed_gradients(gray, sigma=CANNY_SIGMA):
    """Gaussian-smoothed gray -> (gx, gy, magnitude), Sobel scaled to units per pixel."""
    smooth = ndimage.correlate(gray, gaussian_kernel(sigma), mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest") / 8.0
    gy = ndimage.sobel(smooth, axis=0, mode="nearest") / 8.0
    return gx, gy, np.hypot(gx, gy)


def canny_edges(img, low=CANNY_LOW, high=CANNY_HIGH, sigma=CANNY_SIGMA):
    """Canny edge mask on the grayscale intensity (mean of channels).

    A pixel is an edge when it survives non-maximum suppression with
    magnitude > ``low`` and connects (8-neighbourhood) to a pixel with
    magnitude >= ``high``.
    """
    if not all(math.isfinite(v) for v in (low, high, sigma)):
        raise DataError("Canny thresholds must be finite")
    if not high >= low >= 0:
        raise DataError(f"need high >= low >= 0, got low={low}, high={high}")
    gray = np.ascontiguousarray(to_gray(img))
    gx, gy, mag = smoothed_gradients(gray, sigma)
    thin = kernels.nms(mag, gx, gy)
    return kernels.hysteresis(thin, low, high)


def warp_image(img, flow, step=1.0):
    """Forward-warp ``img`` by ``step * flow`` with bilinear splatting.

    Pixels that receive no splat keep their source value.
    """
    img = as_image(img)
    flow = np.asarray(flow, dtype=np.float64)
    if flow.shape != img.shape[:2] + (2,):
        raise DataError(f"flow shape {flow.shape} does not match image {img.shape[:2]}")
    if not math.isfinite(step):
        raise DataError("warp step must be finite")
    src = img if img.ndim == 3 else img[:, :, None]
    src = np.ascontiguousarray(src)
    dx = np.ascontiguousarray(step * flow[..., 0])
    dy = np.ascontiguousarray(step * flow[..., 1])
    acc, wsum = kernels.splat(src, dx, dy)
    filled = wsum > 0.0
    out = src.copy()
    out[filled] = acc[filled] / wsum[filled][:, None]
    out = np.clip(out, 0.0, 1.0)
    return out if img.ndim == 3 else out[:, :, 0]


def blend(a, b, alpha=0.5):
    """Overlay ``b`` on ``a``."""
    return (1.0 - alpha) * as_image(a) + alpha * as_image(b)


def resize(img, shape):
    """Bilinear resize of an image or any (H, W, ...) float array to (rows, cols)."""
    arr = np.asarray(img, dtype=np.float64)
    rows, cols = shape
    planes = arr.reshape(arr.shape[0], arr.shape[1], -1)
    out = np.empty((rows, cols, planes.shape[2]))
    for c in range(planes.shape[2]):
        im = Image.fromarray(planes[:, :, c].astype(np.float32))
        out[:, :, c] = np.asarray(im.resize((cols, rows), Image.BILINEAR), dtype=np.float64)
    return out.reshape((rows, cols) + arr.shape[2:])
