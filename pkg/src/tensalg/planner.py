"""Cost-based contraction order planning for multi-factor tensor products.

Because the product is commutative, any binary evaluation tree over the
factors is legal.  The planner picks the tree with the fewest flops, where
a pairwise node costs one multiply-add per point of the joint iteration
space of its two operands.  Ties are broken by peak live intermediate
size, then by the lexicographically smallest leaf order.

Up to :data:`EXHAUSTIVE_LIMIT` factors the search is exact (dynamic
programming over factor subsets, which covers every binary tree).  Larger
products fall back to a greedy pairing and the plan is flagged heuristic.
"""

import math
from dataclasses import dataclass, field

from .errors import PlanError, ShapeMismatchError
from .notation import TensorIndex, Variance, canonical_order, parse_index_spec
from .tensor import ProductContext

EXHAUSTIVE_LIMIT = 8
DEFAULT_CAP = 12

_UP, _DOWN, _BOTH = 1, 2, 3


@dataclass(frozen=True)
class FactorSignature:
    """Index list and extents of one factor; no component data."""

    indices: tuple
    extents: tuple  # ((space, extent), ...) for the spaces used
    name: str = ""
    ranks: tuple = ()  # ((space, canonical rank), ...)

    def extent(self, space):
        return dict(self.extents)[space]

    @property
    def size(self):
        return math.prod(self.extent(ix.space) for ix in self.indices)


def signature_of(t, name=""):
    spaces = sorted({ix.space for ix in t.indices}, key=t.registry.rank)
    return FactorSignature(
        tuple(t.indices),
        tuple((s, t.registry.extent(s)) for s in spaces),
        name,
        tuple((s, t.registry.rank(s)) for s in spaces),
    )


def signature_from_spec(registry, spec, name=""):
    spec = canonical_order(registry, parse_index_spec(registry, spec))
    spaces = sorted({ix.space for ix in spec}, key=registry.rank)
    return FactorSignature(
        tuple(spec),
        tuple((s, registry.extent(s)) for s in spaces),
        name,
        tuple((s, registry.rank(s)) for s in spaces),
    )


@dataclass
class PlanNode:
    leaf: int = None
    children: tuple = ()
    members: frozenset = frozenset()
    signature: tuple = ()  # ((space, frame), variance bits) pairs
    flops: int = 0
    size: int = 0  # components of this node's result; 0 for leaves
    peak: int = 0  # peak live intermediates while evaluating the subtree

    @property
    def is_leaf(self):
        return self.leaf is not None

    def leaves(self):
        if self.is_leaf:
            return (self.leaf,)
        return tuple(k for c in self.children for k in c.leaves())

    def internal_nodes(self):
        """Internal nodes in execution (post-)order."""
        if self.is_leaf:
            return []
        out = []
        for c in self.children:
            out.extend(c.internal_nodes())
        out.append(self)
        return out

    def shape(self):
        """Order-free nested frozenset description, for comparisons."""
        if self.is_leaf:
            return self.leaf
        return frozenset(c.shape() for c in self.children)


@dataclass
class ContractionPlan:
    root: PlanNode
    signatures: tuple
    total_flops: int
    peak: int
    heuristic: bool = False
    names: tuple = field(default=())

    @property
    def n_factors(self):
        return len(self.signatures)

    def leaf_order(self):
        return self.root.leaves()

    def render(self):
        return _render(self.root, self.names)

    def __str__(self):
        return self.render()


def _name_list(signatures):
    names = []
    for k, s in enumerate(signatures):
        names.append(s.name or f"F{k}")
    return tuple(names)


def _render(node, names, sep="·"):
    if node.is_leaf:
        return names[node.leaf]
    # leaves first, then subtrees, each group in execution order
    parts = [c for c in node.children if c.is_leaf] + [
        c for c in node.children if not c.is_leaf
    ]
    out = []
    for c in parts:
        text = _render(c, names, sep)
        out.append(text if c.is_leaf else f"({text})")
    return sep.join(out)


class _Model:
    """Symbolic product analysis shared by the exact and greedy searches."""

    def __init__(self, signatures):
        self.signatures = list(signatures)
        self.extent = {}
        self.rank = {}
        for s in self.signatures:
            self.rank.update(s.ranks)
            for space, n in s.extents:
                if self.extent.setdefault(space, n) != n:
                    raise ShapeMismatchError(f"space {space!r} has inconsistent extents")
        self.leaf_bits = []
        total = {}
        for s in self.signatures:
            bits = {}
            for ix in s.indices:
                b = _UP if ix.variance is Variance.CONTRA else _DOWN
                bits[ix.group] = bits.get(ix.group, 0) | b
                total[ix.group] = total.get(ix.group, 0) | b
            self.leaf_bits.append(bits)
        self.output = {g for g, b in total.items() if b != _BOTH}
        self.n = len(self.signatures)
        self._sig_cache = {}

    def groups_size(self, groups):
        return math.prod(self.extent[space] for space, _ in groups)

    def sig(self, members):
        """Groups (with variance bits) held by the term over ``members``."""
        key = members
        if key in self._sig_cache:
            return self._sig_cache[key]
        if len(members) == 1:
            (k,) = members
            out = dict(self.leaf_bits[k])
        else:
            outside = set()
            for k in range(self.n):
                if k not in members:
                    outside |= self.leaf_bits[k].keys()
            out = {}
            for k in members:
                for g, b in self.leaf_bits[k].items():
                    if g in self.output or g in outside:
                        out[g] = out.get(g, 0) | b
        result = tuple(
            sorted(out.items(), key=lambda kv: (self.rank.get(kv[0][0], 0), kv[0]))
        )
        self._sig_cache[key] = result
        return result

    def node_flops(self, m1, m2):
        groups = {g for g, _ in self.sig(m1)} | {g for g, _ in self.sig(m2)}
        return self.groups_size(groups)

    def result_size(self, members):
        return self.groups_size(g for g, _ in self.sig(members))

    def leaf(self, k):
        members = frozenset([k])
        return PlanNode(leaf=k, members=members, signature=self.sig(members))

    def join(self, a, b):
        members = a.members | b.members
        size = self.result_size(members)
        flops = a.flops + b.flops + self.node_flops(a.members, b.members)
        peak = max(a.peak, a.size + b.peak, a.size + b.size + size)
        return PlanNode(
            children=(a, b),
            members=members,
            signature=self.sig(members),
            flops=flops,
            size=size,
            peak=peak,
        )


def _exact(model):
    n = model.n
    best = {}
    for k in range(n):
        best[1 << k] = model.leaf(k)

    def members_of(mask):
        return frozenset(k for k in range(n) if mask >> k & 1)

    def key(node):
        return (node.flops, node.peak, node.leaves())

    for mask in sorted(range(1, 1 << n), key=lambda m: bin(m).count("1")):
        if mask in best:
            continue
        chosen = None
        sub = (mask - 1) & mask
        while sub:
            other = mask ^ sub
            a, b = best[sub], best[other]
            node = model.join(a, b)
            if chosen is None or key(node) < key(chosen):
                chosen = node
            sub = (sub - 1) & mask
        best[mask] = chosen
        assert chosen.members == members_of(mask)
    return best[(1 << n) - 1]


def _greedy(model):
    nodes = [model.leaf(k) for k in range(model.n)]
    while len(nodes) > 1:
        choice = None
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                a, b = nodes[i], nodes[j]
                cost = model.node_flops(a.members, b.members)
                k = (cost, model.result_size(a.members | b.members), i, j)
                if choice is None or k < choice:
                    choice = k
        _, _, i, j = choice
        joined = model.join(nodes[i], nodes[j])
        nodes = [x for k, x in enumerate(nodes) if k not in (i, j)] + [joined]
    return nodes[0]


def plan(signatures, cap=DEFAULT_CAP, exhaustive_limit=EXHAUSTIVE_LIMIT):
    """Choose a pairwise evaluation tree for a product of ``signatures``."""
    signatures = tuple(signatures)
    if not signatures:
        raise PlanError("cannot plan an empty product")
    if len(signatures) > cap:
        raise PlanError(f"{len(signatures)} factors exceed the planner cap of {cap}")
    model = _Model(signatures)
    heuristic = len(signatures) > exhaustive_limit
    root = _greedy(model) if heuristic else _exact(model)
    return ContractionPlan(
        root=root,
        signatures=signatures,
        total_flops=root.flops,
        peak=root.peak,
        heuristic=heuristic,
        names=_name_list(signatures),
    )


def left_to_right_plan(signatures):
    """The plan ``((F0 F1) F2) ...`` used as the reference evaluation."""
    signatures = tuple(signatures)
    if not signatures:
        raise PlanError("cannot plan an empty product")
    model = _Model(signatures)
    node = model.leaf(0)
    for k in range(1, model.n):
        node = model.join(node, model.leaf(k))
    return ContractionPlan(
        root=node,
        signatures=signatures,
        total_flops=node.flops,
        peak=node.peak,
        names=_name_list(signatures),
    )


def plan_from_tree(signatures, tree):
    """Build a plan from a nested tuple of leaf positions, e.g. ``((0, 3), 1)``."""
    signatures = tuple(signatures)
    model = _Model(signatures)

    def build(t):
        if isinstance(t, int):
            return model.leaf(t)
        a, b = t
        return model.join(build(a), build(b))

    root = build(tree)
    if sorted(root.leaves()) != list(range(len(signatures))):
        raise PlanError("tree leaves are not a permutation of the factors")
    return ContractionPlan(root, signatures, root.flops, root.peak, names=_name_list(signatures))


@dataclass
class ExecutionStats:
    peak: int = 0
    live: int = 0
    products: int = 0


def execute(plan, factors, stats=None):
    """Evaluate ``factors`` following ``plan``.

    Intermediates are dropped as soon as their parent node has been
    computed; ``stats`` (an :class:`ExecutionStats`) receives the measured
    peak of live intermediate components.
    """
    factors = list(factors)
    if len(factors) != plan.n_factors:
        raise ShapeMismatchError(
            f"plan expects {plan.n_factors} factors, got {len(factors)}"
        )
    for k, (t, sig) in enumerate(zip(factors, plan.signatures)):
        got = signature_of(t)
        if got.indices != sig.indices or dict(got.extents) != dict(sig.extents):
            raise ShapeMismatchError(
                f"factor {k} has signature {t.spec!r}, plan expects "
                f"{','.join(ix.notation() for ix in sig.indices)!r}"
            )
    ctx = ProductContext(factors)
    stats = stats if stats is not None else ExecutionStats()

    def run(node):
        if node.is_leaf:
            return ctx.leaf(node.leaf)
        first, second = node.children
        a = run(first)
        b = run(second)
        term = ctx.combine(a, b, node.members)
        stats.products += 1
        stats.live += term.array.size
        stats.peak = max(stats.peak, stats.live)
        for child, t in ((first, a), (second, b)):
            if not child.is_leaf:
                stats.live -= t.array.size
        return term

    result = ctx.finalize(run(plan.root))
    if not plan.root.is_leaf:
        stats.live -= plan.root.size
    return result


def _sig_text(signature):
    parts = []
    for (space, frame), bits in signature:
        for variance in (Variance.CONTRA, Variance.CO):
            b = _UP if variance is Variance.CONTRA else _DOWN
            if bits & b:
                parts.append(TensorIndex(space, frame, variance).notation())
    return ",".join(parts)


def cost_rows(plan):
    """One record per internal node, in execution order."""
    rows = []
    ids = {}
    for node in plan.root.internal_nodes():
        ids[id(node)] = len(rows)
        operands = []
        for c in node.children:
            operands.append(plan.names[c.leaf] if c.is_leaf else f"#{ids[id(c)]}")
        model_flops = node.flops - sum(c.flops for c in node.children)
        rows.append(
            {
                "node": len(rows),
                "operands": tuple(operands),
                "flops": model_flops,
                "size": node.size,
                "indices": _sig_text(node.signature),
            }
        )
    return rows


def cost_report(plan):
    """Stable text dump: one line per node followed by a totals line."""
    lines = [f"plan {plan.render()}" + ("  [heuristic]" if plan.heuristic else "")]
    for row in cost_rows(plan):
        lines.append(
            "node {node} = {a} * {b} flops={flops} size={size} indices={ix}".format(
                node=row["node"],
                a=row["operands"][0],
                b=row["operands"][1],
                flops=row["flops"],
                size=row["size"],
                ix=row["indices"] or "-",
            )
        )
    lines.append(f"total flops={plan.total_flops} peak={plan.peak}")
    return "\n".join(lines)
