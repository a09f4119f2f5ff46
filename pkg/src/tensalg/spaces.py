"""The ordered set of named vector spaces that every tensor is built against.

The registry fixes one global order of spaces.  Index positions in every
tensor follow that order, which is what makes the tensor product
commutative.  Once a tensor has been created against a registry, the
registry is frozen.
"""

import re

from .errors import RegistryError

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")


class SpaceRegistry:
    """Ordered collection of ``(name, extent)`` vector spaces.

    >>> w = SpaceRegistry().define_space("X", 128).define_space("Y", 129)
    >>> w.rank("Y"), w.extent("X")
    (1, 128)
    """

    def __init__(self, spaces=()):
        self._names = []
        self._extents = {}
        self._lookup = {}
        self._frozen = False
        for name, extent in spaces:
            self.define_space(name, extent)

    def define_space(self, name, extent):
        if self._frozen:
            raise RegistryError(
                f"cannot define space {name!r}: registry is frozen "
                "(tensors already exist)"
            )
        if not isinstance(name, str) or not _NAME_RE.match(name):
            raise RegistryError(f"invalid space name {name!r}")
        if name in self._extents:
            raise RegistryError(f"duplicate space {name!r}")
        # notation letters are matched case-insensitively, so X and x
        # cannot coexist
        if name.lower() in self._lookup:
            raise RegistryError(
                f"duplicate space {name!r} (clashes with "
                f"{self._lookup[name.lower()]!r} in index notation)"
            )
        if isinstance(extent, bool) or int(extent) != extent or extent < 1:
            raise RegistryError(f"space {name!r}: extent must be >= 1, got {extent!r}")
        self._names.append(name)
        self._extents[name] = int(extent)
        self._lookup[name.lower()] = name
        return self

    def freeze(self):
        self._frozen = True

    @property
    def frozen(self):
        return self._frozen

    @property
    def names(self):
        return tuple(self._names)

    @property
    def spaces(self):
        return tuple((n, self._extents[n]) for n in self._names)

    def __len__(self):
        return len(self._names)

    def __contains__(self, name):
        return name in self._extents

    def resolve(self, letter):
        """Map a notation letter (any case) to the registered space name."""
        try:
            return self._lookup[letter.lower()]
        except KeyError:
            raise RegistryError(f"unknown space {letter!r}") from None

    def rank(self, name):
        try:
            return self._names.index(name)
        except ValueError:
            raise RegistryError(f"unknown space {name!r}") from None

    def extent(self, name):
        try:
            return self._extents[name]
        except KeyError:
            raise RegistryError(f"unknown space {name!r}") from None

    def __eq__(self, other):
        if not isinstance(other, SpaceRegistry):
            return NotImplemented
        return self.spaces == other.spaces

    def __hash__(self):
        return hash(self.spaces)

    def __repr__(self):
        body = ", ".join(f"{n}={e}" for n, e in self.spaces)
        return f"SpaceRegistry({body})"


def canonical_rank(registry, space_name):
    return registry.rank(space_name)


def define_space(registry, name, extent):
    return registry.define_space(name, extent)
