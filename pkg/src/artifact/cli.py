"""Command-line driver: fixture, compute, lift, integrate, selftest.

Exit codes: 0 success, 1 mathematical failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import traceback
from dataclasses import asdict, dataclass, fields
from fractions import Fraction

from . import __version__
from .errors import ArtifactError, InvariantViolation, ResourceLimit
from .padic import PAdicScalar

EXIT_OK, EXIT_MATH, EXIT_USAGE = 0, 1, 2
ENV_MAX_CLASSES = "ARTIFACT_MAX_CLASSES"
DEFAULT_MAX_CLASSES = 25_000_000


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    datum: str | None = None  # path; None means the built-in p = 11 fixture
    d_K: int = 8
    c: int = 1
    n: int = 3
    N: int = 6
    r: int | None = None
    seed: int = 0
    fill: str = "zero"
    psi: str = "log"  # "log" or "tate:<q>,<index>"
    embedding: str | None = None  # "[[a,b],[c,-a]]" for i_p(ψ(sqrt d_K)); None = first found
    max_classes: int | None = None
    parallel: int = 1  # worker threads for the ball sum; never changes the result
    output: str | None = None

    def validate(self, datum=None) -> None:
        if self.n < 1:
            raise UsageError("depth n must be at least 1")
        if self.N < 2:
            raise UsageError("precision N must be at least 2")
        if self.parallel < 1:
            raise UsageError("parallel must be a positive worker count")
        if self.fill not in ("zero", "random"):
            raise UsageError("fill must be 'zero' or 'random'")
        if not (self.psi == "log" or self.psi.startswith("tate:")):
            raise UsageError("psi must be 'log' or 'tate:<q>,<index>'")
        if datum is not None:
            from math import gcd

            if gcd(self.c, datum.M * datum.D * self.d_K * datum.p) != 1:
                raise UsageError(f"conductor {self.c} is not prime to M D d_K p")

    def to_json(self) -> dict:
        return asdict(self)

    def echo(self) -> dict:
        """Fields that determine the result (output path and worker count do not)."""
        return {k: v for k, v in asdict(self).items() if k not in ("output", "parallel")}

    def hash(self) -> str:
        raw = self.echo()
        return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise UsageError(f"unknown config keys: {sorted(extra)}")
        return cls(**raw)


# ---------------------------------------------------------------------------
# helpers


def _load_datum(path):
    import warnings

    from .quatalg import fixture_datum, load_datum

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the D = 1 fixture warning is expected here
        return fixture_datum(11) if path is None else load_datum(path)


def _max_classes(cfg: RunConfig) -> int:
    if cfg.max_classes is not None:
        return cfg.max_classes
    return int(os.environ.get(ENV_MAX_CLASSES, DEFAULT_MAX_CLASSES))


def _check_resources(cfg: RunConfig, p: int) -> None:
    from .bttree import cover_size

    size = cover_size(p, cfg.n) * p ** (cfg.n - 1)
    if size > _max_classes(cfg):
        raise ResourceLimit(f"depth {cfg.n} needs {size} ball classes (ceiling {_max_classes(cfg)})")


def _parse_matrix(text: str):
    try:
        M = json.loads(text)
        return tuple(tuple(Fraction(x) for x in row) for row in M)
    except Exception as exc:  # noqa: BLE001
        raise UsageError(f"cannot parse matrix {text!r}") from exc


def _embedding(datum, cfg: RunConfig):
    from .darmon import embedding_from_matrix, find_embeddings

    if cfg.embedding:
        return embedding_from_matrix(datum, cfg.d_K, cfg.c, _parse_matrix(cfg.embedding))
    return find_embeddings(datum, cfg.d_K, cfg.c)[0]


def _psi(cfg: RunConfig, datum):
    """(array Ψ, Tate curve or None, isogeny index)."""
    from .darmon import iwasawa_psi
    from .tate import TateCurve, tate_psi

    if cfg.psi == "log":
        return iwasawa_psi, None, 1
    try:
        q_text, idx = cfg.psi[len("tate:"):].split(",")
        q = PAdicScalar.from_rational(Fraction(q_text), datum.p, cfg.N + 4)
        n_idx = int(idx)
    except ValueError as exc:
        raise UsageError(f"bad Tate selector {cfg.psi!r}") from exc
    E = TateCurve(datum.p, q, cfg.N, cfg.d_K)
    return tate_psi(E, n_idx), E, n_idx


def _envelope(cfg: RunConfig, datum, payload: dict) -> dict:
    return {
        "tool": "artifact",
        "version": __version__,
        "config": cfg.echo(),
        "config_hash": cfg.hash(),
        "datum_hash": datum.hash(),
        **payload,
    }


def _write(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def precision_ledger(result, t: int, p: int) -> dict:
    """Digit accounting: the Riemann sum at depth n fixes min(n, N) digits; κ is the loss beyond that."""
    from .padic import vp

    N = result.metadata.get("N")
    depth = result.metadata.get("depth")
    log_loss = 0  # vec_log_units carries guard digits internally
    kappa = log_loss  # multiplying by t adds no absolute error
    return {
        "working_precision": N,
        "riemann_depth": depth,
        "depth_truncation": N - min(depth, N) if N is not None and depth is not None else None,
        "log_truncation_loss": log_loss,
        "t_valuation": vp(t, p) if t else None,
        "kappa": kappa,
        "certified_digits": result.precision - kappa,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_fixture(p: int, output: str | None) -> dict:
    from .modsym import ManinOracle
    from .quatalg import datum_from_json, split_fixture, validate_datum

    raw = split_fixture(p)
    rank = ManinOracle(p, 1).rank if p > 2 else 0
    if rank < 1:
        raise InvariantViolation("H-rank", f"no weight-two cusp forms of level {p}")
    raw["H"]["rank"] = rank
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        validate_datum(datum_from_json(raw))
    if output:
        with open(output, "w") as fh:
            json.dump(raw, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return raw


def cmd_compute(cfg: RunConfig) -> dict:
    from .darmon import DarmonParams, darmon_point
    from .tate import darmon_point_on_A

    datum = _load_datum(cfg.datum)
    cfg.validate(datum)
    _check_resources(cfg, datum.p)
    emb = _embedding(datum, cfg)
    psi, E, n_idx = _psi(cfg, datum)
    params = DarmonParams(n=cfg.n, N=cfg.N, r=cfg.r, seed=cfg.seed, fill=cfg.fill)
    res = darmon_point(datum, emb, params, psi=psi, workers=cfg.parallel)
    payload = {"result": res.to_json(), "precision_ledger": precision_ledger(res, res.metadata["t"], datum.p)}
    if E is not None:
        on_A = darmon_point_on_A(res, E, n_idx)
        payload["log_A"] = [str(v) for v in on_A.log]
        payload["point_on_A"] = None if on_A.point is None else [str(c) for c in on_A.point]
        if on_A.note:
            payload["note"] = on_A.note
    out = _envelope(cfg, datum, payload)
    _write(out, cfg.output)
    return out


def cmd_lift(cfg: RunConfig, directory: str) -> dict:
    from .darmon import DarmonParams, pipeline_cocycle
    from .lift import lift_cocycle, write_lift

    datum = _load_datum(cfg.datum)
    cfg.validate(datum)
    _check_resources(cfg, datum.p)
    params = DarmonParams(n=cfg.n, N=cfg.N, r=cfg.r, seed=cfg.seed, fill=cfg.fill)
    _, r, mu = pipeline_cocycle(datum, params)
    gens = {i: mu.value(g, cfg.n) for i, g in enumerate(datum.gamma0_generators)}
    L = lift_cocycle(datum, gens, cfg.n, cfg.N, seed=cfg.seed, fill=cfg.fill)
    report = L.check(gens)
    if not all(report.values()):
        raise InvariantViolation("lift", f"check report {report}")
    write_lift(L, directory)
    return _envelope(cfg, datum, {"lift": directory, "method": L.method, "r": r, "check": report})


def cmd_integrate(cfg: RunConfig, directory: str) -> dict:
    from .cocycle import exponent_t
    from .darmon import darmon_integral, fixed_point, gamma_psi
    from .lift import read_lift

    datum = _load_datum(cfg.datum)
    cfg.validate(datum)
    L = read_lift(datum, directory)
    emb = _embedding(datum, cfg)
    psi, _, _ = _psi(cfg, datum)
    z, _ = fixed_point(datum, emb, L.N)
    t = exponent_t(datum)
    res = darmon_integral(L, gamma_psi(datum, emb), z, t, psi, workers=cfg.parallel)
    res.metadata.update({"datum": datum.hash(), "embedding": emb.label(datum), "lift": directory})
    out = _envelope(cfg, datum, {"result": res.to_json(), "precision_ledger": precision_ledger(res, t, datum.p)})
    _write(out, cfg.output)
    return out


# ---------------------------------------------------------------------------
# self-test


def _selftest_checks(level: str, datum_path: str | None):
    import random

    from .bttree import cover, edge_to_ball
    from .cocycle import UniversalCocycle, build_radial, exponent_t
    from .darmon import DarmonParams, darmon_point, embedding_from_matrix, fundamental_unit
    from .lift import lift_cocycle
    from .modsym import ManinOracle
    from .padic import QuadFieldElement
    from .quatalg import validate_datum
    from .tate import PeriodLattice, TateCurve, homothety_index, log_q

    datum = _load_datum(datum_path)

    def datum_valid():
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            validate_datum(datum)

    def padic_field():
        rng = random.Random(0)
        for _ in range(20):
            x = QuadFieldElement.make(11, 8, rng.randrange(1, 11**6), rng.randrange(11**6), 0, 6)
            assert (x * x.inverse()).equals(QuadFieldElement.one(11, 8, 6))

    def tree_cover():
        balls = [edge_to_ball(e) for e in cover(datum.p, 2)]
        assert all(a.disjoint(b) for i, a in enumerate(balls) for b in balls[i + 1 :])

    def manin_hecke():
        if datum.H_oracle.startswith("manin-symbols"):
            o = ManinOracle(int(datum.H_oracle.split(":")[1]), datum.H_sign)
            assert o.hecke(2) == ((-2,),) and o.hecke(3) == ((-1,),)

    def cocycle_identity():
        mu = UniversalCocycle(datum, build_radial(datum, 2), 2)
        rng = random.Random(1)
        gens = list(datum.gamma0_generators)
        for _ in range(5):
            g1 = rng.choice(gens) * rng.choice(gens)
            g2 = rng.choice(gens) * rng.choice(gens).inverse()
            lhs = mu.value(g1 * g2, 2)
            rhs = mu.value(g1, 2) + mu.act(g1, lambda k: mu.value(g2, k), 2)
            assert lhs.equals(rhs)

    def exponent():
        assert exponent_t(datum) > 0

    def lift_depth2():
        from .darmon import pipeline_cocycle

        _, _, mu = pipeline_cocycle(datum, DarmonParams(n=2, N=4))
        gens = {i: mu.value(g, 2) for i, g in enumerate(datum.gamma0_generators)}
        L = lift_cocycle(datum, gens, 2, 4, seed=0)
        assert all(L.check(gens).values())

    def darmon_seeds(n):
        def run():
            emb = embedding_from_matrix(datum, 8, 1, ((0, 4), (2, 0)))
            a = darmon_point(datum, emb, DarmonParams(n=n, N=n + 2, seed=0))
            b = darmon_point(datum, emb, DarmonParams(n=n, N=n + 2, seed=1, fill="random"))
            assert a.agreement(b) >= n

        return run

    def pell():
        e = fundamental_unit(8, 1)
        assert (e.X, e.Y) == (6, 2)

    def tate_axioms():
        q = PAdicScalar.from_rational(33, 11, 10)
        E = TateCurve(11, q, 8)
        assert log_q(E, q).is_zero()
        assert homothety_index(PeriodLattice([[q]]), PeriodLattice([[q**2]])) == (2, 1)

    checks = [
        ("datum-valid", datum_valid),
        ("padic-field", padic_field),
        ("tree-cover", tree_cover),
        ("manin-hecke", manin_hecke),
        ("cocycle-identity", cocycle_identity),
        ("exponent-t", exponent),
        ("lift-depth2", lift_depth2),
        ("pell", pell),
        ("tate", tate_axioms),
        ("darmon-seeds-depth2", darmon_seeds(2)),
    ]
    if level == "full":
        checks.append(("darmon-seeds-depth4", darmon_seeds(4)))
    return checks


def cmd_selftest(level: str = "quick", datum_path: str | None = None, stream=None) -> tuple[bool, list]:
    stream = stream or sys.stdout
    try:
        checks = _selftest_checks(level, datum_path)
    except ArtifactError as exc:
        stream.write(f"FAIL load-datum: {exc}\n")
        return False, [("load-datum", False, 0.0, str(exc))]
    report, ok = [], True
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            fn()
            status, detail = True, ""
        except InvariantViolation as exc:
            status, detail = False, f"{exc.check}: {exc}"
        except (AssertionError, ArtifactError) as exc:
            status, detail = False, f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        ok &= status
        report.append((name, status, dt, detail))
        stream.write(f"{'PASS' if status else 'FAIL'} {name} ({dt:.2f}s){' ' + detail if detail else ''}\n")
        stream.flush()
    return ok, report


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(sp):
    sp.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    sp.add_argument("--datum")
    sp.add_argument("--dK", dest="d_K", type=int)
    sp.add_argument("--c", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--r", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--fill", choices=["zero", "random"])
    sp.add_argument("--psi")
    sp.add_argument("--embedding")
    sp.add_argument("--max-classes", dest="max_classes", type=int)
    sp.add_argument("--parallel", type=int, help="worker threads for the ball sum (result is unchanged)")
    sp.add_argument("--out", dest="output")


def _config_from_args(args) -> RunConfig:
    raw = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    cfg = RunConfig.from_json(raw)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artifact", description="Darmon points on p-adic tori")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("fixture", help="emit the split matrix datum at level p")
    sp.add_argument("--p", type=int, default=11)
    sp.add_argument("--out", dest="output")
    sp = sub.add_parser("compute", help="run the full pipeline")
    _add_config_flags(sp)
    sp = sub.add_parser("lift", help="compute and store a lifted cocycle")
    _add_config_flags(sp)
    sp.add_argument("--dir", required=True)
    sp = sub.add_parser("integrate", help="integrate a stored lift")
    _add_config_flags(sp)
    sp.add_argument("--dir", required=True)
    sp = sub.add_parser("selftest", help="run the invariant suites")
    sp.add_argument("--level", choices=["quick", "full"], default="quick")
    sp.add_argument("--datum")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "fixture":
            raw = cmd_fixture(args.p, args.output)
            if not args.output:
                _write(raw, None)
            return EXIT_OK
        if args.command == "selftest":
            ok, _ = cmd_selftest(args.level, args.datum)
            return EXIT_OK if ok else EXIT_MATH
        cfg = _config_from_args(args)
        if args.command == "compute":
            cmd_compute(cfg)
        elif args.command == "lift":
            _write(cmd_lift(cfg, args.dir), cfg.output)
        elif args.command == "integrate":
            cmd_integrate(cfg, args.dir)
        return EXIT_OK
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ArtifactError, ValueError) as exc:
        stage = traceback.extract_tb(exc.__traceback__)[-1]
        sys.stderr.write(f"{type(exc).__name__} in {os.path.basename(stage.filename)}:{stage.name}: {exc}\n")
        return EXIT_MATH


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
