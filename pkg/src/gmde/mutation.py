"""Composable mutation strategies.

A strategy is a base block plus an ordered list of scaled difference-vector
block pairs:

    V = X_base + sum_j F_j * (X_plus_j - X_minus_j)

Blocks name how each participating vector is chosen from the population:
``rand`` (uniform, distinct from the target and from every other resolved
role), ``best``, ``current`` (the target itself), ``base`` (echoes the
already-resolved base vector, legal only inside a difference), ``top:<p>``
(uniform among the best p fraction), ``worst:<p>`` (symmetric), and
``tour:<k>`` (fittest of k uniform distinct picks). Smarter parent-selection
blocks (proximity-, ranking- or distance-ratio-based) are deliberately not
part of the vocabulary.

The textual notation is ``GMDE(<base>, <control>, <d1>, <d2>)`` where d1
lists the first element of every difference pair and d2 the second; lists
with more than one entry are bracketed, e.g.
``GMDE(best, jDE, [rand,rand], [rand,rand])``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import ConfigurationError, Population, RngStream

__all__ = [
    "BASE",
    "BEST",
    "CURRENT",
    "RAND",
    "Block",
    "DiffPair",
    "RoleAssignment",
    "StrategySpec",
    "donor",
    "enumerate_family",
    "get_strategy",
    "parse_spec",
    "registry",
    "render_spec",
    "sample_roles",
    "tournament",
    "top_fraction",
    "worst_fraction",
]

_KINDS = ("rand", "best", "current", "base", "top", "worst", "tour")

STANDARD = "standard"
CURRENT_TO_RAND = "current-to-rand"


@dataclass(frozen=True)
class Block:
    kind: str
    p: float | None = None  # fraction for top/worst
    k: int | None = None  # tournament size

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown block kind {self.kind!r}")
        if self.kind in ("top", "worst"):
            if self.p is None or not 0.0 < self.p <= 1.0:
                raise ConfigurationError(f"{self.kind} fraction must be in (0, 1], got {self.p}")
        elif self.kind == "tour":
            if self.k is None or self.k < 2:
                raise ConfigurationError(f"tournament size must be >= 2, got {self.k}")
        elif self.p is not None or self.k is not None:
            raise ConfigurationError(f"{self.kind} takes no parameter")

    def render(self) -> str:
        if self.kind in ("top", "worst"):
            return f"{self.kind}:{self.p:g}"
        if self.kind == "tour":
            return f"tour:{self.k}"
        return self.kind


RAND = Block("rand")
BEST = Block("best")
CURRENT = Block("current")
BASE = Block("base")


def top_fraction(p: float = 0.1) -> Block:
    return Block("top", p=p)


def worst_fraction(p: float = 0.1) -> Block:
    return Block("worst", p=p)


def tournament(k: int) -> Block:
    return Block("tour", k=k)


@dataclass(frozen=True)
class DiffPair:
    plus: Block
    minus: Block


@dataclass(frozen=True)
class StrategySpec:
    """A mutation strategy; identity is structural, ``id`` is a label."""

    id: str = field(compare=False)
    base: Block
    diffs: tuple[DiffPair, ...]
    coefficient_mode: str = STANDARD

    def __post_init__(self):
        if len(self.diffs) < 1:
            raise ConfigurationError("a strategy needs at least one difference pair")
        if self.base.kind == "base":
            raise ConfigurationError("the base block cannot echo itself")
        if self.coefficient_mode not in (STANDARD, CURRENT_TO_RAND):
            raise ConfigurationError(f"unknown coefficient mode {self.coefficient_mode!r}")

    @property
    def n(self) -> int:
        return len(self.diffs)

    def render(self) -> str:
        return render_spec(self)


class RoleAssignment(NamedTuple):
    """Population indices resolved for every block of a strategy."""

    base: int
    diffs: tuple[tuple[int, int], ...]


# --------------------------------------------------------------------------
# role resolution


def _plan(spec: StrategySpec):
    """Slot layout in canonical order: base, d1+, d1-, d2+, d2-, ...

    Returns (n_slots, fixed_slots, rand_slots, echo_slots); cached on the
    spec instance because this sits on the generation loop's hot path.
    """
    cached = spec.__dict__.get("_plan")
    if cached is not None:
        return cached
    slots = [(0, spec.base)]
    for pair in spec.diffs:
        slots.append((len(slots), pair.plus))
        slots.append((len(slots), pair.minus))
    fixed, rand, echo = [], [], []
    for idx, block in slots:
        if block.kind == "rand":
            rand.append(idx)
        elif block.kind == "base":
            echo.append(idx)
        else:
            fixed.append((idx, block))
    plan = (len(slots), tuple(fixed), tuple(rand), tuple(echo))
    object.__setattr__(spec, "_plan", plan)
    return plan


def _resolve_selective(block: Block, pop: Population, target: int, rng: RngStream) -> int:
    if block.kind == "best":
        return pop.best_index
    if block.kind == "current":
        return target
    n = len(pop)
    if block.kind == "tour":
        picks = rng.distinct_indices(block.k, n)
        fit = pop.fitness
        best = picks[0]
        for i in picks[1:]:
            if fit[i] < fit[best] or (fit[i] == fit[best] and i < best):
                best = i
        return best
    # top / worst: rank by fitness ascending, ties by index (stable sort)
    order = np.argsort(pop.fitness, kind="stable")
    count = int(np.ceil(block.p * n))
    pool = order[:count] if block.kind == "top" else order[::-1][:count]
    return int(pool[rng.integer(0, count)])


def sample_roles(spec: StrategySpec, pop: Population, target: int, rng: RngStream) -> RoleAssignment:
    """Resolve every block of ``spec`` to a population index.

    Selective roles (best/current/top/worst/tour) resolve first, in slot
    order; ``rand`` roles are then drawn distinct from each other, from the
    target, and from every already-resolved index, so a difference pair can
    never accidentally collapse to zero. ``base`` echoes resolve last.
    """
    n_slots, fixed, rand, echo = _plan(spec)
    resolved = [0] * n_slots
    taken = [target]  # kept sorted; tiny, so linear scans beat set machinery
    for idx, block in fixed:
        r = _resolve_selective(block, pop, target, rng)
        resolved[idx] = r
        pos = len(taken)
        for i, t in enumerate(taken):
            if t >= r:
                pos = i
                break
        if pos == len(taken) or taken[pos] != r:
            taken.insert(pos, r)
    avail = len(pop) - len(taken)
    if avail < len(rand):
        raise ConfigurationError(
            f"{spec.id}: needs {len(rand)} distinct random members "
            f"but only {avail} of {len(pop)} are available"
        )
    uniform = rng.uniform
    for idx in rand:
        # r-th still-available index: shift the rank past each taken value
        r = int(uniform() * avail)
        pos = len(taken)
        for i, t in enumerate(taken):
            if r >= t:
                r += 1
            else:
                pos = i
                break
        resolved[idx] = r
        taken.insert(pos, r)
        avail -= 1
    for idx in echo:
        resolved[idx] = resolved[0]
    diffs = tuple(
        (resolved[1 + 2 * j], resolved[2 + 2 * j]) for j in range(spec.n)
    )
    return RoleAssignment(resolved[0], diffs)


# --------------------------------------------------------------------------
# donor computation


def donor(
    spec: StrategySpec,
    roles: RoleAssignment,
    pop: Population,
    f,
    rng: RngStream,
    k: float | None = None,
) -> np.ndarray:
    """V = X_base + sum_j f[j] * (X_plus_j - X_minus_j), not bound-clamped.

    In ``current-to-rand`` mode the first difference takes a fresh
    k ~ U(0,1) as its coefficient and every later difference takes k*f[0];
    pass ``k`` explicitly to pin it (otherwise it is drawn from ``rng``).
    """
    if len(f) != spec.n:
        raise ConfigurationError(f"expected {spec.n} scaling factors, got {len(f)}")
    if spec.coefficient_mode == CURRENT_TO_RAND:
        if k is None:
            k = rng.uniform()
        coefs = [k] + [k * f[0]] * (spec.n - 1)
    else:
        coefs = list(f)
    x = pop.x
    v = x[roles.base].copy()
    for c, (plus, minus) in zip(coefs, roles.diffs):
        t = np.subtract(x[plus], x[minus])
        t *= c
        v += t
    return v


# --------------------------------------------------------------------------
# registry: the classic strategies and the sixteen generalized ones


def _spec(sid, base, diffs, mode=STANDARD):
    return StrategySpec(sid, base, tuple(DiffPair(p, m) for p, m in diffs), mode)


def _build_registry() -> dict[str, StrategySpec]:
    specs = [
        _spec("GMDE#1", RAND, [(RAND, RAND)]),
        _spec("GMDE#2", BEST, [(RAND, RAND)]),
        _spec("GMDE#3", RAND, [(BEST, CURRENT)]),
        _spec("GMDE#4", RAND, [(BEST, RAND)]),
        _spec("GMDE#5", BEST, [(RAND, CURRENT)]),
        _spec("GMDE#6", RAND, [(RAND, RAND), (RAND, RAND)]),
        _spec("GMDE#7", RAND, [(BEST, BASE), (RAND, RAND)]),
        _spec("GMDE#8", BEST, [(RAND, RAND), (RAND, RAND)]),
        _spec("GMDE#9", BEST, [(RAND, RAND), (BEST, RAND)]),
        _spec("GMDE#10", BEST, [(RAND, RAND), (CURRENT, RAND)]),
        _spec("GMDE#11", BEST, [(BEST, RAND), (RAND, RAND)]),
        _spec("GMDE#12", BEST, [(BEST, RAND), (CURRENT, RAND)]),
        _spec("GMDE#13", BEST, [(CURRENT, RAND), (RAND, RAND)]),
        _spec("GMDE#14", BEST, [(CURRENT, RAND), (BEST, RAND)]),
        _spec("GMDE#15", CURRENT, [(RAND, BASE), (RAND, RAND)], CURRENT_TO_RAND),
        _spec("GMDE#16", CURRENT, [(BEST, BASE), (RAND, RAND)]),
    ]
    aliases = {
        "DE/rand/1": "GMDE#1",
        "DE/best/1": "GMDE#2",
        "DE/rand/2": "GMDE#6",
        "DE/rand-to-best/1": "GMDE#7",
        "DE/best/2": "GMDE#8",
        "DE/current-to-rand/1": "GMDE#15",
        "DE/current-to-best/1": "GMDE#16",
    }
    table = {s.id: s for s in specs}
    for alias, sid in aliases.items():
        s = table[sid]
        table[alias] = StrategySpec(alias, s.base, s.diffs, s.coefficient_mode)
    return table


_REGISTRY = _build_registry()


def registry() -> list[StrategySpec]:
    """All named strategies: GMDE#1..#16 plus the classic DE/X/Y aliases."""
    return list(_REGISTRY.values())


def get_strategy(strategy_id: str) -> StrategySpec:
    try:
        return _REGISTRY[strategy_id]
    except KeyError:
        raise ConfigurationError(f"unknown strategy id {strategy_id!r}") from None


# --------------------------------------------------------------------------
# textual notation


class SpecParseError(ConfigurationError):
    def __init__(self, text: str, pos: int, message: str):
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.pos = pos


DEFAULT_FRACTION = 0.1  # for a bare top/worst block in the notation

_BLOCK_RE = re.compile(
    r"(rand|best|current|base|top(?::([0-9.eE+-]+))?|worst(?::([0-9.eE+-]+))?|tour:(\d+))$"
)


def _parse_block(token: str, text: str, pos: int) -> Block:
    m = _BLOCK_RE.match(token)
    if not m:
        raise SpecParseError(text, pos, f"unknown block {token!r}")
    name = m.group(1)
    if name.startswith("top"):
        return Block("top", p=float(m.group(2)) if m.group(2) else DEFAULT_FRACTION)
    if name.startswith("worst"):
        return Block("worst", p=float(m.group(3)) if m.group(3) else DEFAULT_FRACTION)
    if name.startswith("tour:"):
        return Block("tour", k=int(m.group(4)))
    return Block(name)


def _split_args(body: str, text: str, offset: int) -> list[tuple[str, int]]:
    def push(start: int, end: int) -> None:
        raw = body[start:end]
        lead = len(raw) - len(raw.lstrip())
        args.append((raw.strip(), offset + start + lead))

    args, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
            if depth < 0:
                raise SpecParseError(text, offset + i, "unbalanced ']'")
        elif ch == "," and depth == 0:
            push(start, i)
            start = i + 1
    if depth != 0:
        raise SpecParseError(text, offset + len(body), "unbalanced '['")
    push(start, len(body))
    return args


def _parse_block_list(token: str, text: str, pos: int) -> list[Block]:
    if token.startswith("[") and token.endswith("]"):
        inner = token[1:-1]
        return [
            _parse_block(t.strip(), text, p)
            for t, p in _split_args(inner, text, pos + 1)
        ]
    return [_parse_block(token, text, pos)]


def parse_spec(text: str) -> StrategySpec:
    """Parse the ``GMDE(base, control, d1, d2)`` notation.

    A parsed spec that structurally matches a registry entry adopts that
    entry's id and coefficient mode (the notation itself does not encode
    the current-to-rand coefficient rule); anything else gets standard
    coefficients and its canonical rendering as id.
    """
    s = text.strip()
    m = re.match(r"GMDE\s*\(", s)
    if not m:
        raise SpecParseError(text, 0, "expected 'GMDE('")
    if not s.endswith(")"):
        raise SpecParseError(text, len(s), "expected closing ')'")
    body = s[m.end() : -1]
    args = _split_args(body, text, m.end())
    if len(args) != 4:
        raise SpecParseError(text, m.end(), f"expected 4 arguments, got {len(args)}")
    (base_tok, base_pos), (ctl_tok, ctl_pos), (d1_tok, d1_pos), (d2_tok, d2_pos) = args
    if not re.fullmatch(r"[A-Za-z_][\w*'-]*", ctl_tok):
        raise SpecParseError(text, ctl_pos, f"bad control token {ctl_tok!r}")
    base = _parse_block(base_tok, text, base_pos)
    d1 = _parse_block_list(d1_tok, text, d1_pos)
    d2 = _parse_block_list(d2_tok, text, d2_pos)
    if len(d1) != len(d2):
        raise SpecParseError(text, d2_pos, f"d1 has {len(d1)} entries but d2 has {len(d2)}")
    if base.kind == "base":
        raise SpecParseError(text, base_pos, "base block cannot echo itself")
    diffs = tuple(DiffPair(p, q) for p, q in zip(d1, d2))
    candidate = StrategySpec("?", base, diffs, STANDARD)
    for spec in _REGISTRY.values():
        if spec.base == base and spec.diffs == diffs:
            return spec
    return StrategySpec(render_spec(candidate), base, diffs, STANDARD)


def render_spec(spec: StrategySpec) -> str:
    def render_list(blocks):
        if len(blocks) == 1:
            return blocks[0].render()
        return "[" + ", ".join(b.render() for b in blocks) + "]"

    d1 = [p.plus for p in spec.diffs]
    d2 = [p.minus for p in spec.diffs]
    return f"GMDE({spec.base.render()}, jDE, {render_list(d1)}, {render_list(d2)})"


# --------------------------------------------------------------------------
# family enumeration for the sweep


def enumerate_family(n: int, blocks=(RAND, BEST, CURRENT)) -> list[StrategySpec]:
    """Every base x d1 x d2 combination over ``blocks``.

    For n = 2 the second difference pair is fixed to (rand, rand); the
    sweep therefore enumerates exactly len(blocks)**3 strategies for both
    family sizes. Ids are ``n<1|2>-<index>`` in enumeration order.
    """
    if n not in (1, 2):
        raise ConfigurationError("family size n must be 1 or 2")
    blocks = list(dict.fromkeys(blocks))
    if not blocks:
        raise ConfigurationError("blocks must be nonempty")
    out, seen = [], set()
    i = 0
    for base in blocks:
        if base.kind == "base":
            continue
        for plus in blocks:
            for minus in blocks:
                diffs = [(plus, minus)]
                if n == 2:
                    diffs.append((RAND, RAND))
                i += 1
                spec = _spec(f"n{n}-{i:02d}", base, diffs)
                key = (spec.base, spec.diffs, spec.coefficient_mode)
                if key in seen:
                    continue
                seen.add(key)
                out.append(spec)
    return out
