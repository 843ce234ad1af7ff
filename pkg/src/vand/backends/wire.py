"""Base64-PNG payload codecs shared by the wire-protocol client and server.

Images travel as 8-bit RGB PNG, binary masks as 8-bit grayscale PNG
(0/255), and score maps as 16-bit grayscale PNG scaled by 65535. The
8/16-bit quantization is part of the protocol: bit-exactness across
servers is not promised, determinism within one server is.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

SCORE_SCALE = 65535


def _png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def encode_image(pixels: np.ndarray) -> str:
    arr = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    raw = np.rint(arr * 255).astype(np.uint8)
    return base64.b64encode(_png_bytes(Image.fromarray(raw, mode="RGB"))).decode("ascii")


def decode_image(data: str) -> np.ndarray:
    img = Image.open(io.BytesIO(base64.b64decode(data))).convert("RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def encode_mask(mask: np.ndarray) -> str:
    raw = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    return base64.b64encode(_png_bytes(Image.fromarray(raw, mode="L"))).decode("ascii")


def decode_mask(data: str) -> np.ndarray:
    img = Image.open(io.BytesIO(base64.b64decode(data))).convert("L")
    return np.asarray(img) > 0


def encode_score_map(values: np.ndarray) -> str:
    arr = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    raw = np.rint(arr * SCORE_SCALE).astype(np.uint16)
    return base64.b64encode(_png_bytes(Image.fromarray(raw))).decode("ascii")


def decode_score_map(data: str) -> np.ndarray:
    img = Image.open(io.BytesIO(base64.b64decode(data)))
    return np.asarray(img, dtype=np.float64) / SCORE_SCALE
