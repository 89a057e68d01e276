"""Readers and writers for every external artifact.

Supported formats:

* NPY (version 1.0, C order, little-endian) for heatmaps and masks;
* PNG (8/16-bit grayscale read; 8-bit grayscale and RGB write) for
  masks and overlays.  The encoder emits stored (uncompressed) deflate
  blocks so output bytes are identical across zlib builds;
* NIfTI-1 (.nii / .nii.gz, or .hdr/.img pairs) for atlas volumes, both
  magics, either byte order, with scl_slope/scl_inter applied;
* CSV or atlas XML label tables mapping label index to region name.

Orientation/affine information of NIfTI volumes is not acted upon;
registration is out of scope for this pipeline.
"""

from __future__ import annotations

import ast
import csv
import gzip
import struct
import zlib
from pathlib import Path
from typing import Dict, Union
from xml.etree import ElementTree

import numpy as np

from .core import Atlas, BinaryMask, Heatmap, validate_heatmap

__all__ = [
    "FormatError",
    "read_npy",
    "write_npy",
    "read_png",
    "write_png_gray8",
    "write_png_rgb8",
    "read_heatmap",
    "write_heatmap",
    "read_mask",
    "write_mask",
    "read_label_table",
    "read_nifti_volume",
    "read_atlas",
    "write_overlay",
]

PathLike = Union[str, Path]


class FormatError(ValueError):
    """A file does not conform to the format it was read as."""


# ---------------------------------------------------------------------------
# NPY

_NPY_MAGIC = b"\x93NUMPY"
_SUPPORTED_DESCRS = {
    "|b1",
    "|u1",
    "|i1",
    "<u2",
    "<u4",
    "<u8",
    "<i2",
    "<i4",
    "<i8",
    "<f4",
    "<f8",
}


def _descr_for(dtype: np.dtype) -> str:
    kind_size = f"{dtype.kind}{dtype.itemsize}"
    if dtype.itemsize == 1:
        return f"|{kind_size}"
    return f"<{kind_size}"


def read_npy(path: PathLike) -> np.ndarray:
    """Parse an NPY v1.0 file into an array (C order, little-endian)."""
    data = Path(path).read_bytes()
    if len(data) < 10 or data[:6] != _NPY_MAGIC:
        raise FormatError(f"{path}: not an NPY file (bad magic)")
    major, minor = data[6], data[7]
    if (major, minor) != (1, 0):
        raise FormatError(f"{path}: unsupported NPY version {major}.{minor}")
    (hlen,) = struct.unpack_from("<H", data, 8)
    header_end = 10 + hlen
    if len(data) < header_end:
        raise FormatError(f"{path}: truncated NPY header")
    try:
        header = ast.literal_eval(data[10:header_end].decode("latin1"))
        descr = header["descr"]
        fortran = header["fortran_order"]
        shape = tuple(header["shape"])
    except (ValueError, SyntaxError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: corrupt NPY header ({exc})") from exc
    if fortran:
        raise FormatError(f"{path}: Fortran-ordered NPY is not supported")
    if descr not in _SUPPORTED_DESCRS:
        raise FormatError(f"{path}: unsupported NPY dtype {descr!r}")
    dtype = np.dtype(descr)
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    expected = header_end + count * dtype.itemsize
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload length {len(data) - header_end} does not match "
            f"shape {shape} and dtype {descr}"
        )
    return np.frombuffer(data[header_end:], dtype=dtype).reshape(shape).copy()


def write_npy(path: PathLike, array: np.ndarray) -> None:
    """Write an array as NPY v1.0, byte-identical to ``numpy.save``."""
    arr = np.ascontiguousarray(array)
    descr = _descr_for(arr.dtype)
    if descr not in _SUPPORTED_DESCRS:
        raise FormatError(f"cannot write NPY dtype {arr.dtype}")
    if arr.dtype.itemsize > 1 and arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    header = (
        f"{{'descr': {descr!r}, 'fortran_order': False, 'shape': {arr.shape!r}, }}"
    )
    # pad so magic + version + length field + header is a multiple of 64
    unpadded = len(_NPY_MAGIC) + 2 + 2 + len(header) + 1
    header = header + " " * (-unpadded % 64) + "\n"
    with open(path, "wb") as fh:
        fh.write(_NPY_MAGIC)
        fh.write(bytes((1, 0)))
        fh.write(struct.pack("<H", len(header)))
        fh.write(header.encode("latin1"))
        fh.write(arr.tobytes(order="C"))


# ---------------------------------------------------------------------------
# PNG

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _png_chunk(kind: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + kind
        + payload
        + struct.pack(">I", zlib.crc32(kind + payload) & 0xFFFFFFFF)
    )


def _deflate_stored(data: bytes) -> bytes:
    """zlib stream using stored blocks only: deterministic everywhere."""
    out = bytearray(b"\x78\x01")
    n = len(data)
    pos = 0
    while True:
        chunk = data[pos : pos + 65535]
        pos += len(chunk)
        final = 1 if pos >= n else 0
        out += bytes((final,))
        out += struct.pack("<HH", len(chunk), ~len(chunk) & 0xFFFF)
        out += chunk
        if final:
            break
    out += struct.pack(">I", zlib.adler32(data) & 0xFFFFFFFF)
    return bytes(out)


def _write_png(path: PathLike, pixels: np.ndarray, color_type: int) -> None:
    h, w = pixels.shape[:2]
    raw = bytearray()
    for r in range(h):
        raw.append(0)  # filter type None
        raw += pixels[r].tobytes()
    ihdr = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(_PNG_SIGNATURE)
        fh.write(_png_chunk(b"IHDR", ihdr))
        fh.write(_png_chunk(b"IDAT", _deflate_stored(bytes(raw))))
        fh.write(_png_chunk(b"IEND", b""))


def write_png_gray8(path: PathLike, pixels: np.ndarray) -> None:
    p = np.asarray(pixels)
    if p.ndim != 2:
        raise FormatError("grayscale PNG needs a 2D array")
    _write_png(path, p.astype(np.uint8), color_type=0)


def write_png_rgb8(path: PathLike, pixels: np.ndarray) -> None:
    p = np.asarray(pixels)
    if p.ndim != 3 or p.shape[2] != 3:
        raise FormatError("RGB PNG needs an (H, W, 3) array")
    _write_png(path, p.astype(np.uint8), color_type=2)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, h: int, w: int, bpp: int) -> bytes:
    stride = w * bpp
    if len(raw) != h * (stride + 1):
        raise FormatError("PNG pixel data has the wrong length")
    out = bytearray(h * stride)
    prev_start = -1
    for r in range(h):
        f = raw[r * (stride + 1)]
        line = bytearray(raw[r * (stride + 1) + 1 : (r + 1) * (stride + 1)])
        if f == 0:
            pass
        elif f == 1:  # Sub
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif f == 2:  # Up
            for i in range(stride):
                up = out[prev_start + i] if r else 0
                line[i] = (line[i] + up) & 0xFF
        elif f == 3:  # Average
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up = out[prev_start + i] if r else 0
                line[i] = (line[i] + (left + up) // 2) & 0xFF
        elif f == 4:  # Paeth
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up = out[prev_start + i] if r else 0
                ul = out[prev_start + i - bpp] if (r and i >= bpp) else 0
                line[i] = (line[i] + _paeth(left, up, ul)) & 0xFF
        else:
            raise FormatError(f"unknown PNG filter type {f}")
        out[r * stride : (r + 1) * stride] = line
        prev_start = r * stride
    return bytes(out)


def read_png(path: PathLike) -> np.ndarray:
    """Decode a grayscale PNG to a 2D array (uint8 or uint16)."""
    data = Path(path).read_bytes()
    if data[: len(_PNG_SIGNATURE)] != _PNG_SIGNATURE:
        raise FormatError(f"{path}: not a PNG file (bad signature)")
    pos = len(_PNG_SIGNATURE)
    idat = bytearray()
    ihdr = None
    while pos + 8 <= len(data):
        (length,) = struct.unpack_from(">I", data, pos)
        kind = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
        if kind == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif kind == b"IDAT":
            idat += payload
        elif kind == b"IEND":
            break
    if ihdr is None:
        raise FormatError(f"{path}: PNG is missing its IHDR chunk")
    w, h, depth, color_type, _, _, interlace = ihdr
    if color_type != 0:
        raise FormatError(f"{path}: only grayscale PNG is supported (color type {color_type})")
    if depth not in (8, 16):
        raise FormatError(f"{path}: only 8/16-bit grayscale is supported (depth {depth})")
    if interlace != 0:
        raise FormatError(f"{path}: interlaced PNG is not supported")
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise FormatError(f"{path}: corrupt PNG pixel data ({exc})") from exc
    bpp = depth // 8
    flat = _unfilter(raw, h, w, bpp)
    if depth == 8:
        return np.frombuffer(flat, dtype=np.uint8).reshape(h, w).copy()
    return np.frombuffer(flat, dtype=">u2").reshape(h, w).astype(np.uint16)


# ---------------------------------------------------------------------------
# heatmaps and masks

def _squeeze_to_2d(arr: np.ndarray) -> np.ndarray:
    # drop singleton axes one at a time, stopping once the array is 2D
    while arr.ndim > 2:
        singles = [i for i, s in enumerate(arr.shape) if s == 1]
        if not singles:
            break
        arr = arr.squeeze(axis=singles[0])
    return arr


def _sniff(path: PathLike) -> str:
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:6] == _NPY_MAGIC:
        return "npy"
    if head == _PNG_SIGNATURE:
        return "png"
    raise FormatError(f"{path}: neither NPY nor PNG (unrecognized magic)")


def read_heatmap(path: PathLike) -> Heatmap:
    """Load a heatmap from NPY (float32/float64) or grayscale PNG.

    Singleton axes are squeezed away; the result must be 2D.  Values
    outside [0, 1] are min-max rescaled by :func:`validate_heatmap`.
    """
    kind = _sniff(path)
    if kind == "npy":
        arr = read_npy(path)
        if arr.dtype not in (np.float32, np.float64):
            raise FormatError(f"{path}: heatmap NPY must be float32/float64, got {arr.dtype}")
        arr = _squeeze_to_2d(arr)
        if arr.ndim != 2:
            raise FormatError(f"{path}: heatmap must be 2D after squeezing, got shape {arr.shape}")
        return validate_heatmap(arr)
    pixels = read_png(path)
    scale = 255.0 if pixels.dtype == np.uint8 else 65535.0
    return validate_heatmap(pixels.astype(np.float64) / scale)


def write_heatmap(path: PathLike, heatmap: Heatmap) -> None:
    """Store a heatmap as float32 NPY (the exporter interchange dtype)."""
    write_npy(path, heatmap.values.astype(np.float32))


def read_mask(path: PathLike) -> BinaryMask:
    """Load a binary mask from an 8-bit grayscale PNG or a 2D NPY.

    Binarization: 8-bit values are foreground iff > 127; floats iff
    > 0.5; booleans pass through.
    """
    kind = _sniff(path)
    if kind == "npy":
        arr = _squeeze_to_2d(read_npy(path))
        if arr.ndim != 2:
            raise FormatError(f"{path}: mask must be 2D after squeezing, got shape {arr.shape}")
        if arr.dtype == np.bool_:
            return BinaryMask(arr)
        if arr.dtype in (np.float32, np.float64):
            return BinaryMask(arr > 0.5)
        return BinaryMask(arr > 127)
    pixels = read_png(path)
    if pixels.dtype != np.uint8:
        raise FormatError(f"{path}: mask PNG must be 8-bit grayscale")
    return BinaryMask(pixels > 127)


def write_mask(path: PathLike, mask: BinaryMask) -> None:
    """Store a mask as an 8-bit grayscale PNG with foreground = 255."""
    write_png_gray8(path, mask.bits.astype(np.uint8) * 255)


# ---------------------------------------------------------------------------
# NIfTI-1

_NIFTI_DTYPES = {
    2: "u1",
    4: "i2",
    8: "i4",
    16: "f4",
    64: "f8",
    256: "i1",
    512: "u2",
    768: "u4",
    1024: "i8",
    1280: "u8",
}


def _open_maybe_gzip(path: PathLike) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def read_nifti_volume(path: PathLike) -> np.ndarray:
    """Read a 3D NIfTI-1 volume as an int64 array indexed [x, y, z].

    Accepts single-file ``n+1`` images and ``ni1`` header/image pairs,
    optionally gzipped, in either byte order.  scl_slope/scl_inter are
    applied before rounding float voxels to integers.
    """
    blob = _open_maybe_gzip(path)
    if len(blob) < 348:
        raise FormatError(f"{path}: too short to hold a NIfTI-1 header")
    magic = blob[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise FormatError(f"{path}: bad NIfTI magic {magic!r}")
    endian = "<"
    (sizeof_hdr,) = struct.unpack_from("<i", blob, 0)
    if sizeof_hdr != 348:
        (sizeof_hdr,) = struct.unpack_from(">i", blob, 0)
        if sizeof_hdr != 348:
            raise FormatError(f"{path}: sizeof_hdr is not 348 in either byte order")
        endian = ">"
    dim = struct.unpack_from(f"{endian}8h", blob, 40)
    datatype, _bitpix = struct.unpack_from(f"{endian}2h", blob, 70)
    (vox_offset,) = struct.unpack_from(f"{endian}f", blob, 108)
    scl_slope, scl_inter = struct.unpack_from(f"{endian}2f", blob, 112)

    if dim[0] != 3:
        raise FormatError(f"{path}: expected a 3D volume, got dim[0] = {dim[0]}")
    nx, ny, nz = dim[1], dim[2], dim[3]
    if min(nx, ny, nz) <= 0:
        raise FormatError(f"{path}: non-positive dimensions {(nx, ny, nz)}")
    if datatype not in _NIFTI_DTYPES:
        raise FormatError(f"{path}: unsupported NIfTI datatype code {datatype}")
    base = _NIFTI_DTYPES[datatype]
    dtype = np.dtype(base if np.dtype(base).itemsize == 1 else endian + base)

    count = nx * ny * nz
    if magic == b"n+1\x00":
        offset = int(vox_offset)
        if offset < 348:
            raise FormatError(f"{path}: vox_offset {offset} overlaps the header")
        payload = blob[offset : offset + count * dtype.itemsize]
    else:
        img = _companion_img(Path(path))
        payload = _open_maybe_gzip(img)[: count * dtype.itemsize]
    if len(payload) < count * dtype.itemsize:
        raise FormatError(f"{path}: voxel payload is truncated")

    flat = np.frombuffer(payload, dtype=dtype)
    if scl_slope not in (0.0, 1.0) or (scl_slope == 1.0 and scl_inter != 0.0):
        flat = flat.astype(np.float64) * scl_slope + scl_inter
    if flat.dtype.kind == "f":
        flat = np.rint(flat)
    return flat.astype(np.int64).reshape((nx, ny, nz), order="F")


def _companion_img(header_path: Path) -> Path:
    name = header_path.name
    for hdr_suffix, img_suffix in ((".hdr.gz", ".img.gz"), (".hdr.gz", ".img"), (".hdr", ".img.gz"), (".hdr", ".img")):
        if name.endswith(hdr_suffix):
            candidate = header_path.with_name(name[: -len(hdr_suffix)] + img_suffix)
            if candidate.exists():
                return candidate
    raise FormatError(f"{header_path}: ni1 header has no companion .img file")


def read_label_table(path: PathLike) -> Dict[int, str]:
    """Load a label-index-to-name table from 2-column CSV or atlas XML."""
    text = _open_maybe_gzip(path).decode("utf-8")
    stripped = text.lstrip()
    names: Dict[int, str] = {}
    if stripped.startswith("<"):
        try:
            root = ElementTree.fromstring(text)
        except ElementTree.ParseError as exc:
            raise FormatError(f"{path}: malformed XML ({exc})") from exc
        for el in root.iter("label"):
            if "index" not in el.attrib:
                raise FormatError(f"{path}: <label> element without index attribute")
            idx = int(el.attrib["index"])
            name = (el.text or "").strip()
            if idx in names:
                raise FormatError(f"{path}: duplicate label index {idx}")
            names[idx] = name
        return names
    for row in csv.reader(text.splitlines()):
        if not row or not row[0].strip():
            continue
        try:
            idx = int(row[0])
        except ValueError:
            continue  # header row
        if len(row) < 2:
            raise FormatError(f"{path}: label row for index {idx} has no name column")
        if idx in names:
            raise FormatError(f"{path}: duplicate label index {idx}")
        names[idx] = row[1].strip()
    return names


def read_atlas(volume_path: PathLike, labels_path: PathLike) -> Atlas:
    """Load an atlas volume plus its label table."""
    return Atlas(labels=read_nifti_volume(volume_path), names=read_label_table(labels_path))


# ---------------------------------------------------------------------------
# overlays

_ACCENT = np.array([255, 64, 64], dtype=np.uint8)


def _boundary(bits: np.ndarray) -> np.ndarray:
    # foreground pixels with a background 4-neighbor (outside counts as background)
    inner = np.zeros_like(bits)
    inner[1:-1, 1:-1] = (
        bits[1:-1, 1:-1]
        & bits[:-2, 1:-1]
        & bits[2:, 1:-1]
        & bits[1:-1, :-2]
        & bits[1:-1, 2:]
    )
    return bits & ~inner


def write_overlay(image: Union[Heatmap, np.ndarray], mask: BinaryMask, path: PathLike) -> None:
    """RGB PNG of the grayscale base with the mask boundary in accent color.

    Deterministic bytes for identical inputs; an empty mask reproduces
    the base image in RGB.
    """
    if isinstance(image, Heatmap):
        base = np.rint(image.values * 255.0).astype(np.uint8)
    else:
        arr = np.asarray(image)
        if arr.dtype == np.uint8:
            base = arr
        else:
            base = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    if base.shape != mask.shape:
        raise ValueError(f"image shape {base.shape} != mask shape {mask.shape}")
    rgb = np.repeat(base[:, :, None], 3, axis=2)
    rgb[_boundary(mask.bits)] = _ACCENT
    write_png_rgb8(path, rgb)
