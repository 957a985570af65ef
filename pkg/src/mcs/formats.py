"""On-disk formats: plain-text key files, binary P5 images, and the binary
equivalent-key container."""

from __future__ import annotations

import struct

import numpy as np

from .attack import EquivalentKey
from .core import Fixed129, SecretKey
from .errors import DomainError

_KEY_FIELDS = ("alpha1", "beta1", "alpha2", "beta2", "secret", "x0")


def format_key(key: SecretKey) -> str:
    lines = [f"alpha1={key.alpha1}", f"beta1={key.beta1}",
             f"alpha2={key.alpha2}", f"beta2={key.beta2}",
             f"secret={key.secret}", f"x0={key.x0.to_hex()}"]
    return "\n".join(lines) + "\n"


def parse_key(text: str) -> SecretKey:
    """Parse a key file; x0 accepts 33 hex digits or a decimal fraction."""
    values: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DomainError(f"bad key line: {line!r}")
        name, _, value = line.partition("=")
        values[name.strip()] = value.strip()
    missing = [f for f in _KEY_FIELDS if f not in values]
    if missing:
        raise DomainError(f"key file missing fields: {', '.join(missing)}")
    x0_text = values["x0"]
    if "." in x0_text:
        x0 = Fixed129.from_decimal_string(x0_text)
    else:
        x0 = Fixed129.from_hex(x0_text)
    try:
        ints = {f: int(values[f]) for f in _KEY_FIELDS[:-1]}
    except ValueError as exc:
        raise DomainError(f"bad integer in key file: {exc}") from exc
    return SecretKey(ints["alpha1"], ints["beta1"], ints["alpha2"],
                     ints["beta2"], ints["secret"], x0)


def write_key_file(path: str, key: SecretKey) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_key(key))


def read_key_file(path: str) -> SecretKey:
    with open(path, "r", encoding="ascii") as fh:
        return parse_key(fh.read())


# ---------------------------------------------------------------------------
# Binary PGM (P5)
# ---------------------------------------------------------------------------

def write_pgm(path: str, width: int, height: int, pixels: bytes,
              comments: tuple[str, ...] = ()) -> None:
    if len(pixels) != width * height:
        raise DomainError(f"pixel count {len(pixels)} != {width}x{height}")
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        for c in comments:
            fh.write(f"# {c}\n".encode("ascii"))
        fh.write(f"{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels)


def read_pgm(path: str) -> tuple[int, int, bytes, list[str]]:
    """Read a binary P5 image with maxval 255; returns (w, h, pixels, comments)."""
    with open(path, "rb") as fh:
        data = fh.read()
    comments: list[str] = []
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise DomainError("truncated PGM header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos + 1:end].decode("ascii", "replace").strip())
            pos = end + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P5":
        raise DomainError(f"not a binary PGM: magic {tokens[0]!r}")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise DomainError(f"only maxval 255 supported, got {maxval}")
    pixels = data[pos:pos + width * height]
    if len(pixels) != width * height:
        raise DomainError("truncated PGM pixel data")
    return width, height, pixels, comments


# ---------------------------------------------------------------------------
# Equivalent-key container
# ---------------------------------------------------------------------------

_EK_MAGIC = b"MEK1"
_EK_VERSION = 1
_L_UNIQUE, _L_UNKNOWN, _L_AMBIG = 0, 1, 2


def equivalent_key_to_bytes(ek: EquivalentKey) -> bytes:
    out = bytearray()
    out += _EK_MAGIC
    out.append(_EK_VERSION)
    out += struct.pack("<I", ek.num_blocks)
    for k in range(ek.num_blocks):
        if k in ek.l_candidates:
            cands = sorted(ek.l_candidates[k])
            out += bytes([_L_AMBIG, cands[0], cands[1]])
        elif ek.l_values[k] >= 0:
            out += bytes([_L_UNIQUE, int(ek.l_values[k]), 0])
        else:
            out += bytes([_L_UNKNOWN, 0, 0])
        swap = sum(int(ek.swap_bits[k, i]) << i for i in range(8))
        swapk = sum(int(ek.swap_known[k, i]) << i for i in range(8))
        out += bytes([swap, swapk])
        out += ek.perms[k, 0].tobytes() + ek.perms[k, 1].tobytes()
        out += ek.seed_star[k].tobytes()
        out += struct.pack("<H", sum(int(ek.seed_known[k, i]) << i for i in range(16)))
        out += ek.rot_x[k].tobytes()
        out += struct.pack("<H", sum(int(ek.rotx_known[k, i]) << i for i in range(16)))
        out += ek.rot_y[k].tobytes()
        out.append(1 if k in ek.unreliable_blocks else 0)
    return bytes(out)


def equivalent_key_from_bytes(data: bytes) -> EquivalentKey:
    if data[:4] != _EK_MAGIC:
        raise DomainError("not an equivalent-key file")
    if data[4] != _EK_VERSION:
        raise DomainError(f"unsupported version {data[4]}")
    num = struct.unpack("<I", data[5:9])[0]
    record = 3 + 2 + 16 + 18 + 18 + 16 + 1
    if len(data) != 9 + num * record:
        raise DomainError("equivalent-key file has the wrong size")
    l_values = np.full(num, -1, dtype=np.int16)
    l_candidates: dict[int, frozenset] = {}
    swap_bits = np.zeros((num, 8), dtype=np.uint8)
    swap_known = np.zeros((num, 8), dtype=bool)
    perms = np.zeros((num, 2, 8), dtype=np.uint8)
    seed = np.zeros((num, 16), dtype=np.uint8)
    seed_known = np.zeros((num, 16), dtype=bool)
    rot_x = np.zeros((num, 16), dtype=np.uint8)
    rotx_known = np.zeros((num, 16), dtype=bool)
    rot_y = np.zeros((num, 16), dtype=np.uint8)
    unreliable = set()
    pos = 9
    for k in range(num):
        rec = data[pos:pos + record]
        pos += record
        kind, v1, v2 = rec[0], rec[1], rec[2]
        if kind == _L_UNIQUE:
            l_values[k] = v1
        elif kind == _L_AMBIG:
            l_candidates[k] = frozenset({v1, v2})
        swap, swapk = rec[3], rec[4]
        for i in range(8):
            swap_bits[k, i] = (swap >> i) & 1
            swap_known[k, i] = bool((swapk >> i) & 1)
        perms[k, 0] = np.frombuffer(rec[5:13], dtype=np.uint8)
        perms[k, 1] = np.frombuffer(rec[13:21], dtype=np.uint8)
        seed[k] = np.frombuffer(rec[21:37], dtype=np.uint8)
        sk = struct.unpack("<H", rec[37:39])[0]
        rot_x[k] = np.frombuffer(rec[39:55], dtype=np.uint8)
        rk = struct.unpack("<H", rec[55:57])[0]
        rot_y[k] = np.frombuffer(rec[57:73], dtype=np.uint8)
        for i in range(16):
            seed_known[k, i] = bool((sk >> i) & 1)
            rotx_known[k, i] = bool((rk >> i) & 1)
        if rec[73]:
            unreliable.add(k)
    return EquivalentKey(num, l_values, l_candidates, swap_bits, swap_known,
                         perms, seed, seed_known, rot_x, rotx_known, rot_y,
                         frozenset(unreliable))


def write_equivalent_key(path: str, ek: EquivalentKey) -> None:
    with open(path, "wb") as fh:
        fh.write(equivalent_key_to_bytes(ek))


def read_equivalent_key(path: str) -> EquivalentKey:
    with open(path, "rb") as fh:
        return equivalent_key_from_bytes(fh.read())
