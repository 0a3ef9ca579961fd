"""Radial systems, the universal cocycle, Hecke stabilization and the exponent t."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import intlin
from .bttree import TreeEdge, TreeVertex, cover_edge, cover_size, edges_out, mat_inv
from .errors import (
    DepthLoss,
    InvariantViolation,
    MissingAbelianizationData,
    OrbitIncomplete,
    WordProblemUnavailable,
)
from .measures import P1Measure, act_p1
from .quatalg import GroupDatum, QuaternionElement, Word, free_reduce, word_inverse


class Embedder:
    """Memoized i_p on group elements."""

    def __init__(self, datum: GroupDatum):
        self.datum = datum
        self._cache: dict = {}

    def __call__(self, q: QuaternionElement):
        m = self._cache.get(q.key)
        if m is None:
            m = self.datum.embed_p(q)
            if len(self._cache) < 500_000:
                self._cache[q.key] = m
        return m


def _orbit_reps(datum, gens, embed, start: TreeEdge, targets: set, rng=None) -> tuple[dict, dict, list]:
    """BFS giving reps γ with γ(e) = start for every e in targets, their words, and Schreier generators."""
    reps = {start: datum.one}
    words = {start: ()}
    schreier = []
    queue = deque([start])
    letters = []
    for k, g in enumerate(gens):
        letters.append(((k, 1), g))
        letters.append(((k, -1), g.inverse()))
    if rng is not None:
        rng.shuffle(letters)
    while queue:
        e = queue.popleft()
        gam, w = reps[e], words[e]
        for letter, g in letters:
            new = gam * g
            e2 = e.act(embed(g.inverse()))
            if e2 not in targets:
                raise InvariantViolation("orbit", "generator leaves the star of the base vertex")
            if e2 in reps:
                h = new * reps[e2].inverse()
                hw = free_reduce(w + (letter,) + word_inverse(words[e2]))
                if not h.is_one():
                    schreier.append((h, hw))
            else:
                reps[e2], words[e2] = new, free_reduce(w + (letter,))
                queue.append(e2)
    if len(reps) != len(targets):
        raise OrbitIncomplete(f"reached {len(reps)} of {len(targets)} edges")
    return reps, words, schreier


@dataclass
class RadialSystem:
    datum: GroupDatum
    depth: int
    seed: int | None = None
    twist: int = 0
    reps: dict = field(default_factory=dict)
    hat_reps: dict = field(default_factory=dict)
    words: dict = field(default_factory=dict)
    schreier: list = field(default_factory=list)

    def __post_init__(self):
        d = self.datum
        p = d.p
        self.embed = Embedder(d)
        self._vertex_rep: dict = {}
        order = list(range(len(d.gamma0_generators)))
        rng = None
        if self.seed is not None:
            rng = random.Random(self.seed)
            rng.shuffle(order)
        gens = [d.gamma0_generators[k] for k in order]
        w, winv = d.omega_p, d.omega_p.inverse()
        hat_gens = [w * g * winv for g in gens]
        e_star = TreeEdge.e_star(p)
        v0, v1 = TreeVertex.root(p), TreeVertex.root_hat(p)
        out0 = set(edges_out(v0))
        into1 = {TreeEdge(u, v1) for u in v1.neighbors()}
        self.reps, words, schreier = _orbit_reps(d, gens, self.embed, e_star, out0, rng)
        self.hat_reps, _, _ = _orbit_reps(d, hat_gens, self.embed, e_star, into1, rng)
        # words refer to positions in the shuffled list; map back to datum indices
        relabel = lambda wd: tuple((order[g], s) for g, s in wd)  # noqa: E731
        self.words = {e: relabel(wd) for e, wd in words.items()}
        self.schreier = [(h, relabel(hw)) for h, hw in schreier]
        if self.twist and rng is not None:
            # representatives are only defined up to left multiplication by Γ_1
            for table in (self.reps, self.hat_reps):
                for e in sorted(table):
                    if e != e_star:
                        for _ in range(self.twist):
                            h = rng.choice(self.schreier)[0]
                            table[e] = (h if rng.random() < 0.5 else h.inverse()) * table[e]
        self._vertex_rep[v0] = d.one
        self._vertex_rep[v1] = d.one

    # ------------------------------------------------------------------
    def vertex_rep(self, v: TreeVertex) -> QuaternionElement:
        """γ_v with γ_v(v) = v_* (even v) or v̂_* (odd v)."""
        path = []
        while v not in self._vertex_rep:
            path.append(v)
            v = v.parent()
        for v in reversed(path):
            u = v.parent()
            gu = self._vertex_rep[u]
            if u.is_even:
                img = TreeEdge(u, v).act(self.embed(gu))
                g = self.reps[img] * gu
            else:
                img = TreeEdge(v, u).act(self.embed(gu))
                g = self.hat_reps[img] * gu
            self._vertex_rep[v] = g
        return self._vertex_rep[v]

    def edge_rep(self, e: TreeEdge) -> QuaternionElement:
        """γ_e for an even edge e, with γ_e(e) = e_*."""
        if not e.is_even:
            raise ValueError("edge representatives are defined on even edges")
        far = e.target if e.target.distance() > e.source.distance() else e.source
        return self.vertex_rep(far)

    def shell_edges(self, n: int) -> list[TreeEdge]:
        """Even edges whose far endpoint lies at distance n."""
        out = []
        for k in range(cover_size(self.datum.p, n)):
            e = cover_edge(self.datum.p, n, k)
            out.append(e if e.is_even else e.reverse())
        return out

    def check(self) -> None:
        p = self.datum.p
        e_star = TreeEdge.e_star(p)
        if not (self.reps[e_star].is_one() and self.hat_reps[e_star].is_one()):
            raise InvariantViolation("radial-identity", "γ_0 or γ̃_0 is not 1")
        for n in range(1, self.depth + 1):
            for e in self.shell_edges(n):
                if e.act(self.embed(self.edge_rep(e))) != e_star:
                    raise InvariantViolation("radial-transporter", f"γ_e does not move {e} to e_*")


def build_radial(datum: GroupDatum, depth: int, seed: int | None = None, twist: int = 0) -> RadialSystem:
    rs = RadialSystem(datum, depth, seed, twist)
    rs.check()
    return rs


# ---------------------------------------------------------------------------
# cocycles


class GammaCocycle:
    """γ ↦ P1Measure at a fixed depth, memoized per group element."""

    def __init__(self, datum: GroupDatum, depth: int):
        self.datum = datum
        self.depth = depth
        self.m = datum.H_rank
        self._cache: dict = {}
        self.embed = Embedder(datum)

    def _compute(self, g: QuaternionElement, n: int) -> P1Measure:
        raise NotImplementedError

    def value(self, g: QuaternionElement, n: int | None = None) -> P1Measure:
        n = self.depth if n is None else n
        key = (g.key, n)
        out = self._cache.get(key)
        if out is None:
            out = self._compute(g, n)
            self._cache[key] = out
        return out

    def act(self, g: QuaternionElement, nu_of, n: int | None = None) -> P1Measure:
        """g·ν at depth n, where nu_of(k) returns ν at depth k."""
        n = self.depth if n is None else n
        gm = self.embed(g)
        far = TreeVertex.root(self.datum.p).act(gm).distance()
        if far == 0:
            return act_p1(gm, nu_of(n))
        return act_to_depth(gm, nu_of(n + far), n)

    def on_word(self, word: Word, n: int | None = None) -> P1Measure:
        d = self.datum
        return self.value(d.eval_word(word), n)


class UniversalCocycle(GammaCocycle):
    """μ(γ)(e) = [γ_e γ γ_{γ^{-1}e}^{-1}] on even edges, extended to odd edges by antisymmetry."""

    def __init__(self, datum: GroupDatum, radial: RadialSystem, depth: int | None = None):
        super().__init__(datum, depth or radial.depth)
        self.radial = radial
        self._ecache: dict = {}

    def edge_value(self, g: QuaternionElement, e: TreeEdge) -> tuple:
        if not e.is_even:
            return tuple(-x for x in self.edge_value(g, e.reverse()))
        key = (g.key, e)
        hit = self._ecache.get(key)
        if hit is not None:
            return hit
        rs = self.radial
        ginv = g.inverse()
        e2 = e.act(self.embed(ginv))
        h = rs.edge_rep(e) * g * rs.edge_rep(e2).inverse()
        img = self.datum.abelianization_image(h)
        val = (0,) * self.m if img is None else tuple(img)
        self._ecache[key] = val
        return val

    def _compute(self, g, n):
        p = self.datum.p
        rows = [self.edge_value(g, cover_edge(p, n, k)) for k in range(cover_size(p, n))]
        return P1Measure(p, n, np.array(rows, dtype=np.int64).reshape(-1, self.m), None, True)


class StabilizedCocycle(GammaCocycle):
    """t_r c = T_r c − (r+1) c with (T_r c)(γ) = Σ_i δ_i·c(δ_i^{-1} γ δ_{σ(i)})."""

    def __init__(self, base: GammaCocycle, r: int):
        super().__init__(base.datum, base.depth)
        self.base = base
        self.r = r
        self.deltas = list(base.datum.hecke_reps(r))
        self._dinv = [d.inverse() for d in self.deltas]

    def sigma(self, g: QuaternionElement) -> list[int]:
        out = []
        for di in self._dinv:
            x = di * g
            j = next((j for j, dj in enumerate(self.deltas) if self.datum.is_in_gamma(x * dj)), None)
            if j is None:
                raise InvariantViolation("hecke-reps", "no matching coset representative")
            out.append(j)
        if sorted(out) != list(range(len(self.deltas))):
            raise InvariantViolation("hecke-reps", "representatives are not a coset decomposition")
        return out

    def _compute(self, g, n):
        total = self.base.value(g, n).scale(-(self.r + 1))
        for i, j in enumerate(self.sigma(g)):
            h = self._dinv[i] * g * self.deltas[j]
            total = total + self.act(self.deltas[i], lambda k, h=h: self.base.value(h, k), n)
        return total


class ShiftedCocycle(GammaCocycle):
    """c'(γ) = c(γ) + γ·m − m for a measure m (a coboundary change)."""

    def __init__(self, base: GammaCocycle, m_of):
        super().__init__(base.datum, base.depth)
        self.base = base
        self.m_of = m_of

    def _compute(self, g, n):
        return self.base.value(g, n) + self.act(g, self.m_of, n) - self.m_of(n)


def act_to_depth(g, nu: P1Measure, n: int) -> P1Measure:
    """(g·ν) on cover(n), reading ν on the pulled-back edges."""
    ginv = mat_inv(g)
    p = nu.p
    rows = [nu.edge_value(cover_edge(p, n, k).act(ginv)) for k in range(cover_size(p, n))]
    return P1Measure(p, n, np.array(rows).reshape(-1, nu.m), nu.modulus, nu.harmonic)


def universal_cocycle(datum, radial: RadialSystem, g: QuaternionElement, e: TreeEdge) -> tuple:
    return UniversalCocycle(datum, radial).edge_value(g, e)


def hecke_stabilize(c: GammaCocycle, r: int) -> StabilizedCocycle:
    return StabilizedCocycle(c, r)


def default_r(datum: GroupDatum) -> int:
    """Smallest prime r ∤ MDp with Hecke data in the datum."""
    bad = datum.M * datum.D * datum.p
    for r in sorted(datum.hecke):
        if bad % r:
            return r
    from .errors import MissingHeckeData

    raise MissingHeckeData("datum supplies no usable Hecke prime")


# ---------------------------------------------------------------------------
# exponent of Γ^ab


def _abelian_vector(word: Word, k: int) -> list[int]:
    v = [0] * k
    for g, e in word:
        v[g] += e
    return v


def exponent_t(datum: GroupDatum, radial: RadialSystem | None = None) -> int:
    """Exponent of (Γ_0^ab ⊕ Γ̂_0^ab) / Γ_1^ab, the abelianization of the amalgam."""
    k = len(datum.gamma0_generators)
    if not datum.relations:
        raise MissingAbelianizationData("datum lists no relations for Γ_0")
    rows = []
    for rel in datum.relations:
        v = _abelian_vector(rel, k)
        rows.append(v + [0] * k)
        rows.append([0] * k + v)
    table = datum.raw.get("abelianization")
    if table:
        for a0, a1 in zip(table["gamma1_in_gamma0"], table["gamma1_in_gamma0_hat"]):
            rows.append([int(x) for x in a0] + [-int(x) for x in a1])
    else:
        radial = radial or RadialSystem(datum, 1)
        w, winv = datum.omega_p, datum.omega_p.inverse()
        for h, hw in radial.schreier:
            try:
                hat_word = datum.word_for(winv * h * w)
            except WordProblemUnavailable as exc:
                raise MissingAbelianizationData("cannot abelianize Γ_1 inside Γ̂_0") from exc
            rows.append(_abelian_vector(hw, k) + [-x for x in _abelian_vector(hat_word, k)])
    torsion, free = intlin.cokernel_structure(rows, 2 * k)
    if free:
        raise InvariantViolation("finite-abelianization", f"Γ^ab has free rank {free}")
    return max(torsion, default=1)


# ---------------------------------------------------------------------------
# coboundary solver on Γ_0 generators


def solve_coboundary(diffs: dict, gens: dict, modulus: int | None = None) -> np.ndarray | None:
    """Find m with g·m − m = diffs[g] for every generator g (all in GL_2(Z_p)).

    gens maps a label to the depth-n permutation of g; returns m or None.
    With a modulus the equations are only required to hold modulo it.
    """
    labels = list(diffs)
    size, mm = diffs[labels[0]].shape
    m = np.zeros((size, mm), dtype=object)
    seen = np.zeros(size, dtype=bool)
    for root in range(size):
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            k = queue.popleft()
            for lab in labels:
                perm, d = gens[lab], diffs[lab]
                # (g m)[perm[k]] = m[k]
                j = perm[k]
                if not seen[j]:
                    m[j] = m[k] - d[j]
                    seen[j] = True
                    queue.append(j)
                inv = np.flatnonzero(perm == k)[0]
                if not seen[inv]:
                    m[inv] = m[k] + d[k]
                    seen[inv] = True
                    queue.append(inv)
    for lab in labels:
        perm, d = gens[lab], diffs[lab]
        gm = np.empty_like(m)
        gm[perm] = m
        res = gm - m - d
        if modulus is not None:
            res = res % modulus
        if np.any(res):
            return None
    return m if modulus is None else m % modulus
