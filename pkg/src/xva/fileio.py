"""Binary file formats: .xvt tensors, .xvc checkpoints, PPM/PGM images.

.xvt layout: magic "XVAT", u16 LE version (=1), u8 dtype code (0 = float32),
u8 ndim, ndim x u64 LE dims, then the row-major little-endian payload.
Tensors are stored as float32 regardless of the float64 in-memory precision.

.xvc layout: magic "XVCK", u16 LE version (=1), u32 LE entry count, then per
entry a u16 LE name length, the UTF-8 name, and an embedded .xvt record.
Entries are written sorted by name so equal states produce equal bytes.
"""

import io
import struct

import numpy as np

from .errors import FormatError, NumericError

XVT_MAGIC = b"XVAT"
XVC_MAGIC = b"XVCK"
XVT_VERSION = 1
XVC_VERSION = 1
DTYPE_F32 = 0


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated {what}: wanted {n} bytes, got {len(buf)}")
    return buf


def write_tensor_stream(f, arr):
    arr = np.asarray(arr, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NumericError("refusing to serialize non-finite tensor")
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    f.write(XVT_MAGIC)
    f.write(struct.pack("<HBB", XVT_VERSION, DTYPE_F32, arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    f.write(payload)


def read_tensor_stream(f) -> np.ndarray:
    magic = _read_exact(f, 4, "tensor magic")
    if magic != XVT_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}")
    version, dtype, ndim = struct.unpack("<HBB", _read_exact(f, 4, "tensor header"))
    if version != XVT_VERSION:
        raise FormatError(f"unsupported tensor version {version}")
    if dtype != DTYPE_F32:
        raise FormatError(f"unknown dtype code {dtype}")
    dims = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim, "tensor dims"))
    count = 1
    for d in dims:
        count *= d
    payload = _read_exact(f, 4 * count, "tensor payload")
    arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return arr.astype(np.float64)


def write_tensor(path, arr):
    """Write one tensor as a .xvt file."""
    with open(path, "wb") as f:
        write_tensor_stream(f, arr)


def read_tensor(path) -> np.ndarray:
    """Read a .xvt file; trailing garbage is rejected."""
    with open(path, "rb") as f:
        arr = read_tensor_stream(f)
        if f.read(1):
            raise FormatError(f"trailing bytes after tensor record in {path}")
    return arr


def write_checkpoint(path, tensors: dict):
    """Write a name->tensor mapping as a .xvc file (names sorted)."""
    names = sorted(tensors)
    buf = io.BytesIO()
    buf.write(XVC_MAGIC)
    buf.write(struct.pack("<HI", XVC_VERSION, len(names)))
    for name in names:
        enc = name.encode("utf-8")
        if len(enc) > 0xFFFF:
            raise FormatError(f"checkpoint entry name too long: {name[:32]}...")
        buf.write(struct.pack("<H", len(enc)))
        buf.write(enc)
        write_tensor_stream(buf, tensors[name])
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def read_checkpoint(path) -> dict:
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "checkpoint magic")
        if magic != XVC_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        version, count = struct.unpack("<HI", _read_exact(f, 6, "checkpoint header"))
        if version != XVC_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        out = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _read_exact(f, 2, "entry name length"))
            name = _read_exact(f, nlen, "entry name").decode("utf-8")
            if name in out:
                raise FormatError(f"duplicate checkpoint entry {name!r}")
            out[name] = read_tensor_stream(f)
        if f.read(1):
            raise FormatError(f"trailing bytes after checkpoint records in {path}")
    return out


# --- portable pixmaps -------------------------------------------------------

def _read_pnm_tokens(f, n, what):
    """Read n whitespace-separated header tokens, honouring '#' comments."""
    tokens = []
    while len(tokens) < n:
        c = f.read(1)
        if not c:
            raise FormatError(f"truncated {what} header")
        if c in b" \t\r\n":
            continue
        if c == b"#":
            while c and c != b"\n":
                c = f.read(1)
            continue
        tok = c
        while True:
            c = f.read(1)
            if not c or c in b" \t\r\n":
                break
            tok += c
        if not tok.isdigit():
            raise FormatError(f"bad {what} header token {tok!r}")
        tokens.append(int(tok))
    return tokens


def write_ppm(path, img):
    """Write an RGB image (3,h,w) with values in [0,1] as binary PPM (P6)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise FormatError(f"PPM wants (3,h,w), got shape {img.shape}")
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape[1], img.shape[2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(q.transpose(1, 2, 0).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM into a (3,h,w) float64 array scaled to [0,1]."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P6":
            raise FormatError(f"bad PPM magic {magic!r} in {path}")
        w, h, maxval = _read_pnm_tokens(f, 3, "PPM")
        if w < 1 or h < 1 or maxval != 255:
            raise FormatError(f"unsupported PPM geometry {w}x{h} maxval {maxval}")
        payload = _read_exact(f, 3 * w * h, "PPM payload")
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3)
    return raw.transpose(2, 0, 1).astype(np.float64) / 255.0


def write_pgm(path, img):
    """Write a grayscale map (h,w) with values in [0,1] as binary PGM (P5)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise FormatError(f"PGM wants (h,w), got shape {img.shape}")
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(q.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic != b"P5":
            raise FormatError(f"bad PGM magic {magic!r} in {path}")
        w, h, maxval = _read_pnm_tokens(f, 3, "PGM")
        if w < 1 or h < 1 or maxval != 255:
            raise FormatError(f"unsupported PGM geometry {w}x{h} maxval {maxval}")
        payload = _read_exact(f, w * h, "PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(np.float64) / 255.0
