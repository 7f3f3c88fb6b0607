"""Image output: binary PPM (P6) for bit-exact goldens, optional PNG, and
sample-count heatmaps through a fixed 256-entry viridis-like colormap."""

from __future__ import annotations

from pathlib import Path

import numpy as np

# Anchor colors of the shipped heatmap colormap (perceptually ordered,
# viridis-like); expanded once to the documented 256-entry table below.
_HEATMAP_ANCHORS = np.array([
    [0.267004, 0.004874, 0.329415],
    [0.282623, 0.140926, 0.457517],
    [0.253935, 0.265254, 0.529983],
    [0.206756, 0.371758, 0.553117],
    [0.163625, 0.471133, 0.558148],
    [0.127568, 0.566949, 0.550556],
    [0.134692, 0.658636, 0.517649],
    [0.266941, 0.748751, 0.440573],
    [0.477504, 0.821444, 0.318195],
    [0.741388, 0.873449, 0.149561],
    [0.993248, 0.906157, 0.143936],
])


def _expand_colormap(anchors: np.ndarray, size: int = 256) -> np.ndarray:
    x = np.linspace(0.0, 1.0, len(anchors))
    u = np.linspace(0.0, 1.0, size)
    return np.stack([np.interp(u, x, anchors[:, c]) for c in range(3)], axis=1)


HEATMAP_LUT = quantize_lut = None  # assigned below


def quantize(img: np.ndarray) -> np.ndarray:
    """Float [0, 1] image to u8 with round-half-up."""
    c = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(c * 255.0 + 0.5).astype(np.uint8)


HEATMAP_LUT = quantize(_expand_colormap(_HEATMAP_ANCHORS))


def write_ppm(path, rgb_u8: np.ndarray) -> None:
    rgb_u8 = np.asarray(rgb_u8)
    if rgb_u8.dtype != np.uint8 or rgb_u8.ndim != 3 or rgb_u8.shape[2] != 3:
        raise ValueError("write_ppm expects a (H, W, 3) uint8 array")
    h, w = rgb_u8.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(rgb_u8.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P6"):
        raise ValueError("not a binary PPM (P6) file")
    parts = raw.split(b"\n", 3)
    if len(parts) < 4:
        raise ValueError("truncated PPM header")
    w, h = (int(v) for v in parts[1].split())
    if parts[2] != b"255":
        raise ValueError("only 8-bit PPM supported")
    data = parts[3]
    if len(data) != w * h * 3:
        raise ValueError("PPM pixel payload has the wrong size")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)


def write_png(path, rgb_u8: np.ndarray) -> None:
    from PIL import Image
    Image.fromarray(np.asarray(rgb_u8), mode="RGB").save(path, format="PNG")


def framebuffer_rgb(fb) -> np.ndarray:
    """Quantized RGB of a framebuffer (background already composited)."""
    return quantize(fb.rgba[..., :3])


def heatmap_rgb(counts: np.ndarray) -> np.ndarray:
    """Sample counts to colormapped u8 RGB, normalized by the image max."""
    counts = np.asarray(counts, dtype=np.float64)
    peak = counts.max()
    t = counts / peak if peak > 0 else np.zeros_like(counts)
    idx = np.floor(t * 255.0 + 0.5).astype(np.int64)
    return HEATMAP_LUT[idx]


def write_image(path, rgb_u8: np.ndarray) -> None:
    """PPM or PNG depending on the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix == ".png":
        write_png(path, rgb_u8)
    else:
        write_ppm(path, rgb_u8)
