"""Index-specification strings such as ``"x^1,x_,y^1,y_"``.

Grammar (comma separated, whitespace around tokens ignored)::

    token := space ('^' | '_') [frame]

``^`` marks a contravariant (upper) index, ``_`` a covariant (lower) one.
The optional decimal frame label distinguishes coordinate systems within
one space; a missing label means frame 0.  Space letters are matched to
registered names case-insensitively.
"""

import enum
import re
from dataclasses import dataclass

from .errors import IndexSpecError, RegistryError

_TOKEN_RE = re.compile(r"([A-Za-z][A-Za-z0-9]*?)([\^_])([0-9]*)\Z")


class Variance(enum.IntEnum):
    # the integer value is the tie-break in the canonical order:
    # contravariant before covariant
    CONTRA = 0
    CO = 1

    def flipped(self):
        return Variance.CO if self is Variance.CONTRA else Variance.CONTRA

    @property
    def mark(self):
        return "^" if self is Variance.CONTRA else "_"


@dataclass(frozen=True)
class TensorIndex:
    space: str
    frame: int
    variance: Variance

    @property
    def group(self):
        """(space, frame): indices in one group merge or contract."""
        return (self.space, self.frame)

    def flipped(self):
        return TensorIndex(self.space, self.frame, self.variance.flipped())

    def with_frame(self, frame):
        return TensorIndex(self.space, frame, self.variance)

    def notation(self):
        label = str(self.frame) if self.frame else ""
        return f"{self.space.lower()}{self.variance.mark}{label}"

    def __str__(self):
        return self.notation()


def up(space, frame=0):
    return TensorIndex(space, frame, Variance.CONTRA)


def down(space, frame=0):
    return TensorIndex(space, frame, Variance.CO)


class IndexSpec(tuple):
    """Ordered tuple of TensorIndex as written by the user."""

    def __new__(cls, indices=()):
        indices = tuple(indices)
        seen = set()
        for pos, ix in enumerate(indices):
            if not isinstance(ix, TensorIndex):
                raise TypeError(f"expected TensorIndex, got {ix!r}")
            if ix in seen:
                raise IndexSpecError(f"duplicate index {ix}", pos)
            seen.add(ix)
        return super().__new__(cls, indices)

    def __str__(self):
        return print_index_spec(self)

    def __repr__(self):
        return f"IndexSpec({print_index_spec(self)!r})"


def sort_key(registry, index):
    return (registry.rank(index.space), index.frame, int(index.variance))


def canonical_order(registry, indices):
    return tuple(sorted(indices, key=lambda ix: sort_key(registry, ix)))


def parse_index_spec(registry, text):
    """Parse an index-spec string against ``registry``.

    >>> from tensalg.spaces import SpaceRegistry
    >>> w = SpaceRegistry([("X", 4)])
    >>> print_index_spec(parse_index_spec(w, " x^1 , x_ "))
    'x^1,x_'
    """
    if isinstance(text, IndexSpec):
        return text
    if not isinstance(text, str):
        indices = tuple(text)
        for ix in indices:
            registry.extent(ix.space)
        return IndexSpec(indices)
    if not text.strip():
        return IndexSpec()
    indices = []
    for pos, raw in enumerate(text.split(",")):
        token = raw.strip()
        if not token:
            raise IndexSpecError("empty token", pos)
        m = _TOKEN_RE.match(token)
        if m is None:
            if "^" not in token and "_" not in token:
                raise IndexSpecError(f"missing variance mark in {token!r}", pos)
            raise IndexSpecError(f"malformed token {token!r}", pos)
        letters, mark, label = m.groups()
        try:
            space = registry.resolve(letters)
        except RegistryError:
            raise IndexSpecError(f"unknown space {letters!r}", pos) from None
        variance = Variance.CONTRA if mark == "^" else Variance.CO
        ix = TensorIndex(space, int(label) if label else 0, variance)
        if ix in indices:
            raise IndexSpecError(f"duplicate index {token!r}", pos)
        indices.append(ix)
    return IndexSpec(indices)


def print_index_spec(spec):
    return ",".join(ix.notation() for ix in spec)


def negate_spec(spec):
    """Flip the variance of every index; frames and spaces are unchanged."""
    return IndexSpec(ix.flipped() for ix in spec)
