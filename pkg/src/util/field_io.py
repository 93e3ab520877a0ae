import io
import math
import struct
from pathlib import Path
from typing import TextIO, Union

import numpy as np

from util.grid import Field

CSV_HEADER = 'q,shape,p'
BINARY_MAGIC = b'SLRVFLD\x00'

# 17 significant digits round-trips every float64.
FLOAT_FORMAT = '%.17g'


def format_float(x: float) -> str:
    return FLOAT_FORMAT % x


def write_csv(field: Field, path: Union[str, Path]):
    """
    Line 1 is the header `q,shape,p`, line 2 the dimensions (shape joined by 'x'), then one row per grid point
    in canonical order holding its p values.
    """
    with open(path, 'w', newline='\n') as f:
        write_csv_stream(field, f)


def write_csv_stream(field: Field, f: TextIO):
    f.write(CSV_HEADER + '\n')
    f.write(f"{field.q},{'x'.join(str(n) for n in field.shape)},{field.p}\n")
    np.savetxt(f, field.values.reshape(-1, field.p), delimiter=',', fmt=FLOAT_FORMAT)


def format_csv(field: Field) -> str:
    buffer = io.StringIO()
    write_csv_stream(field, buffer)
    return buffer.getvalue()


def read_csv(path: Union[str, Path]) -> Field:
    with open(path) as f:
        header = f.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header '{CSV_HEADER}', found '{header}'")
        dims = f.readline().strip().split(',')
        if len(dims) != 3:
            raise ValueError(f"{path}: line 2 must be 'q,shape,p', found '{','.join(dims)}'")
        q, p = int(dims[0]), int(dims[2])
        shape = tuple(int(n) for n in dims[1].split('x'))
        if len(shape) != q:
            raise ValueError(f"{path}: q={q} but shape {shape} has {len(shape)} axes")
        rows = np.loadtxt(f, delimiter=',', ndmin=2, dtype=np.float64)
    if rows.shape != (math.prod(shape), p):
        raise ValueError(f"{path}: expected {math.prod(shape)} rows of {p} values, got {rows.shape}")
    return Field.from_flat(shape, p, rows.reshape(-1))


def write_binary(field: Field, path: Union[str, Path]):
    """8-byte magic, uint32 q, uint32 p, q x uint64 shape, then little-endian float64 data."""
    with open(path, 'wb') as f:
        f.write(BINARY_MAGIC)
        f.write(struct.pack('<II', field.q, field.p))
        f.write(struct.pack(f'<{field.q}Q', *field.shape))
        f.write(np.ascontiguousarray(field.data, dtype='<f8').tobytes())


def read_binary(path: Union[str, Path]) -> Field:
    raw = Path(path).read_bytes()
    if raw[:8] != BINARY_MAGIC:
        raise ValueError(f"{path}: not a field file (bad magic)")
    if len(raw) < 16:
        raise ValueError(f"{path}: truncated header, {len(raw)} bytes")
    q, p = struct.unpack_from('<II', raw, 8)
    offset = 16 + 8 * q
    if len(raw) < offset:
        raise ValueError(f"{path}: truncated header, {len(raw)} bytes for q={q}")
    shape = struct.unpack_from(f'<{q}Q', raw, 16)
    expected = offset + 8 * math.prod(shape) * p
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for shape {shape} and p={p}, found {len(raw)}")
    data = np.frombuffer(raw, dtype='<f8', offset=offset)
    return Field.from_flat(shape, p, data)


def read_field(path: Union[str, Path]) -> Field:
    if Path(path).suffix.lower() == '.csv':
        return read_csv(path)
    return read_binary(path)


def write_field(field: Field, path: Union[str, Path]):
    if Path(path).suffix.lower() == '.csv':
        write_csv(field, path)
    else:
        write_binary(field, path)
