"""
Rank-1 lattice point sets, the unit group U_n and generating-vector files.

A generating vector is stored as a single line ``n=<int> z=<comma-separated ints>``.
Lines starting with ``#`` are comments; a metadata comment of the form
``# key=value key=value`` may precede the vector.
"""
import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from .spectral import NATIVE

logger = logging.getLogger(__name__)


class InvalidSizeError(ValueError):
    pass


class GeneratingVectorParseError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


def units(n):
    """Ascending list of 1 <= z <= n-1 with gcd(z, n) = 1."""
    if n < 2:
        raise InvalidSizeError(f"number of points must be at least 2, got {n}")
    return [z for z in range(1, n) if math.gcd(z, n) == 1]


@dataclass(frozen=True)
class GeneratingVector:
    n: int
    z: tuple

    def __post_init__(self):
        if self.n < 2:
            raise InvalidSizeError(f"number of points must be at least 2, got {self.n}")
        object.__setattr__(self, "z", tuple(int(zj) for zj in self.z))
        if not self.z:
            raise ValueError("generating vector must have at least one component")
        for j, zj in enumerate(self.z):
            if not 1 <= zj <= self.n - 1 or math.gcd(zj, self.n) != 1:
                raise ValueError(f"component z[{j}]={zj} is not a unit modulo {self.n}")

    @property
    def d(self):
        return len(self.z)

    def prefix(self, s):
        return GeneratingVector(self.n, self.z[:s])

    def extend(self, zs):
        return GeneratingVector(self.n, self.z + (zs,))

    def mirrored(self, j):
        """The vector with z_j replaced by n - z_j (0-based j)."""
        z = list(self.z)
        z[j] = self.n - z[j]
        return GeneratingVector(self.n, tuple(z))

    def __str__(self):
        return format_generating_vector(self)


class LatticePointSet:
    """Points t_k = {k z / n} of a rank-1 lattice, generated from exact integer residues."""

    def __init__(self, gv):
        self.gv = gv

    def __len__(self):
        return self.gv.n

    @property
    def d(self):
        return self.gv.d

    def residues(self, k=None):
        """Integer matrix (k * z_j) mod n, shape (n, d), or one row for a given k."""
        z = np.asarray(self.gv.z, dtype=np.int64)
        if k is not None:
            return (k * z) % self.gv.n
        ks = np.arange(self.gv.n, dtype=np.int64)
        return np.outer(ks, z) % self.gv.n

    def point(self, k, ctx=NATIVE):
        return ctx.fractions(self.residues(k % self.gv.n), self.gv.n)

    def as_array(self, ctx=NATIVE):
        return ctx.fractions(self.residues(), self.gv.n)

    def __iter__(self):
        for k in range(self.gv.n):
            yield self.point(k)


def lattice_points(gv):
    return LatticePointSet(gv)


# ---------------------------------------------------------
# Text format
# ---------------------------------------------------------


def format_generating_vector(gv):
    return f"n={gv.n} z={','.join(str(zj) for zj in gv.z)}"


def format_metadata(metadata):
    return "# " + " ".join(f"{key}={value}" for key, value in metadata.items())


def serialize(gv, metadata=None):
    lines = []
    if metadata:
        lines.append(format_metadata(metadata))
    lines.append(format_generating_vector(gv))
    return "\n".join(lines) + "\n"


def _parse_int(field, text):
    try:
        return int(text)
    except ValueError:
        raise GeneratingVectorParseError(field, f"'{text}' is not an integer") from None


def _parse_vector_line(line):
    fields = line.split()
    if len(fields) != 2 or not fields[0].startswith("n=") or not fields[1].startswith("z="):
        raise GeneratingVectorParseError("line", f"expected 'n=<int> z=<ints>', got '{line}'")
    n = _parse_int("n", fields[0][2:])
    if n < 2:
        raise GeneratingVectorParseError("n", f"number of points must be at least 2, got {n}")
    components = fields[1][2:].split(",")
    if components == [""]:
        raise GeneratingVectorParseError("z", "no components")
    z = []
    for j, text in enumerate(components):
        zj = _parse_int(f"z[{j}]", text)
        if not 1 <= zj <= n - 1 or math.gcd(zj, n) != 1:
            raise GeneratingVectorParseError(f"z[{j}]", f"{zj} is not a unit modulo {n}")
        z.append(zj)
    return GeneratingVector(n, tuple(z))


def parse(text):
    """Generating vector from text; comments and blank lines are ignored."""
    vectors = [
        line.strip() for line in text.splitlines()
        if line.strip() and not line.strip().startswith("#")
    ]
    if len(vectors) != 1:
        raise GeneratingVectorParseError("line", f"expected exactly one vector line, found {len(vectors)}")
    return _parse_vector_line(vectors[0])


def parse_metadata(text):
    """key=value pairs found in comment lines."""
    metadata = {}
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("#"):
            continue
        for token in line.lstrip("#").split():
            if "=" in token:
                key, value = token.split("=", 1)
                metadata[key] = value
    return metadata


def write_generating_vector(path, gv, metadata=None):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        f.write(serialize(gv, metadata))
    logger.info(f"Wrote generating vector n={gv.n} d={gv.d} to {path}")


def read_generating_vector(path):
    with open(path) as f:
        text = f.read()
    return parse(text), parse_metadata(text)
