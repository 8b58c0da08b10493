"""Command line entry point: ``python -m qcis <subcommand> ...``.

Every invocation prints one JSON document (``"schema": "qcis-lab/1"``) on
stdout and a short human summary on stderr.  Exit status: 0 success, 1 usage
error, 2 a verification check above tolerance.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources

from .series import default_terms

SCHEMA_ID = "qcis-lab/1"

DEFAULT_TOLERANCES = {
    "bethe": 1e-10,
    "pi": 1e-8,
    "eigen": 1e-6,
    "mu": 1e-6,
    "det": 1e-8,
    "relation": 1e-6,
    "legendre": 1e-9,
    "cm_commute": 1e-8,
}

# subcommand -> option names that must be present (after defaults)
REQUIRED = {
    "wp-series": ["g2", "g3"],
    "lattice-invariants": ["omega1", "omega2"],
    "op eval": ["expr"],
    "op commutator": ["expr", "expr2"],
    "op adjoint": ["expr"],
    "commutant find": ["m", "order"],
    "spectral-curve": ["m"],
    "algebraic-type": ["m", "max_order"],
    "lame qm": ["m"],
    "lame bethe": ["m", "omega1", "omega2"],
    "lame verify": ["m"],
    "cm build": ["n", "m"],
    "cm integral": ["n", "m", "order"],
    "cm commute-check": ["n", "m"],
    "cm bethe": ["n", "m"],
    "monodromy group": ["m", "lambda"],
    "monodromy scan": ["m", "lambdas"],
}

EXACT_KEYS = ("m", "g2", "g3")
COMPLEX_KEYS = ("omega1", "omega2", "lambda")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)      # exact rationals as "p/q" strings
    numeric: dict = field(default_factory=dict)     # complex numbers as [re, im]
    options: dict = field(default_factory=dict)     # integers and strings
    seed: int = 0
    trunc: int = 0
    tolerances: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        if not self.trunc:
            self.trunc = default_terms()
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances)
        self.tolerances = tol

    def validate(self):
        if self.subcommand not in REQUIRED:
            raise UsageError(f"unknown subcommand {self.subcommand!r}")
        have = set(self.params) | set(self.numeric) | set(self.options)
        missing = [k for k in REQUIRED[self.subcommand] if k not in have]
        if missing:
            raise UsageError(f"{self.subcommand} needs --{', --'.join(k.replace('_', '-') for k in missing)}")

    def fraction(self, key: str) -> Fraction:
        return Fraction(self.params[key])

    def complex(self, key: str) -> complex:
        re_, im_ = self.numeric[key]
        return complex(re_, im_)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("output")
        return d


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def parse_rational(text: str) -> str:
    try:
        return str(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational p/q: {text!r}") from exc


def parse_complex(text: str) -> list:
    t = text.strip().strip("[]()")
    try:
        if "," in t:
            a, b = t.split(",")
            z = complex(float(a), float(b))
        elif "/" in t:
            z = complex(float(Fraction(t)))
        else:
            z = complex(t.replace("i", "j"))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc
    return [z.real, z.imag]


def _common(sub: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if sub else None
    p.add_argument("--m", type=parse_rational, default=d, help="Lame parameter m (p/q)")
    p.add_argument("--g2", type=parse_rational, default=d, help="curve invariant g2 (p/q)")
    p.add_argument("--g3", type=parse_rational, default=d, help="curve invariant g3 (p/q)")
    p.add_argument("--seed", type=int, default=d)
    p.add_argument("--trunc", type=int, default=d, help="series truncation (default QCIS_TRUNC or 40)")
    p.add_argument("--tol", action="append", default=d, metavar="NAME=VALUE", help="tolerance override")
    p.add_argument("--output", default=d, help="write the JSON document here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcis", description="Exact and numeric experiments with commuting differential operators.",
                     parents=[_common(False)])
    common = _common(True)
    top = parser.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def leaf(sp, name, **kw):
        return sp.add_parser(name, parents=[common], **kw)

    p = leaf(top, "wp-series", help="exact Laurent coefficients of wp")
    p = leaf(top, "lattice-invariants", help="g2, g3 and quasi-periods of a lattice")
    p.add_argument("--omega1", type=parse_complex, default=argparse.SUPPRESS)
    p.add_argument("--omega2", type=parse_complex, default=argparse.SUPPRESS)

    op = top.add_parser("op", help="operator algebra").add_subparsers(dest="sub", required=True, parser_class=_Parser)
    for name in ("eval", "commutator", "adjoint"):
        p = leaf(op, name)
        p.add_argument("--expr", default=argparse.SUPPRESS)
        if name == "commutator":
            p.add_argument("--expr2", default=argparse.SUPPRESS)
        p.add_argument("--ring", choices=["elliptic", "series"], default="elliptic")

    cm_ = top.add_parser("commutant", help="commuting operator search").add_subparsers(
        dest="sub", required=True, parser_class=_Parser)
    p = leaf(cm_, "find")
    p.add_argument("--order", type=int, default=argparse.SUPPRESS)
    p.add_argument("--wbound", type=int, default=argparse.SUPPRESS)

    leaf(top, "spectral-curve", help="Burchnall-Chaundy polynomial of the Lame operator")
    p = leaf(top, "algebraic-type", help="search for a regular semisimple commuting witness")
    p.add_argument("--max-order", dest="max_order", type=int, default=argparse.SUPPRESS)

    lame = top.add_parser("lame", help="Lame operator and Hermite solutions").add_subparsers(
        dest="sub", required=True, parser_class=_Parser)
    leaf(lame, "qm")
    leaf(lame, "verify")
    p = leaf(lame, "bethe")
    p.add_argument("--omega1", type=parse_complex, default=argparse.SUPPRESS)
    p.add_argument("--omega2", type=parse_complex, default=argparse.SUPPRESS)

    cmg = top.add_parser("cm", help="Calogero-Moser operators").add_subparsers(
        dest="sub", required=True, parser_class=_Parser)
    for name in ("build", "integral", "commute-check", "bethe"):
        p = leaf(cmg, name)
        p.add_argument("--n", type=int, default=argparse.SUPPRESS)
        if name == "integral":
            p.add_argument("--order", type=int, default=argparse.SUPPRESS)
        if name == "commute-check":
            p.add_argument("--samples", type=int, default=argparse.SUPPRESS)

    mono = top.add_parser("monodromy", help="numerical monodromy").add_subparsers(
        dest="sub", required=True, parser_class=_Parser)
    for name in ("group", "scan"):
        p = leaf(mono, name)
        p.add_argument("--omega1", type=parse_complex, default=argparse.SUPPRESS)
        p.add_argument("--omega2", type=parse_complex, default=argparse.SUPPRESS)
        p.add_argument("--basepoint", type=parse_complex, default=argparse.SUPPRESS)
        if name == "group":
            p.add_argument("--lambda", dest="lambda_", type=parse_complex, default=argparse.SUPPRESS)
        else:
            p.add_argument("--lambdas", type=parse_complex, nargs="+", default=argparse.SUPPRESS)
    return parser


def config_from_args(argv) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    cmd = args.pop("cmd")
    sub = args.pop("sub", None)
    name = cmd if sub is None else f"{cmd} {sub}"
    params, numeric, options = {}, {}, {}
    tolerances = {}
    for item in args.pop("tol", None) or []:
        k, _, v = item.partition("=")
        try:
            tolerances[k] = float(v)
        except ValueError as exc:
            raise UsageError(f"bad tolerance override {item!r}") from exc
    seed = args.pop("seed", None)
    trunc = args.pop("trunc", None)
    output = args.pop("output", None)
    if "lambda_" in args:
        args["lambda"] = args.pop("lambda_")
    for k, v in args.items():
        if v is None:
            continue
        if k in EXACT_KEYS:
            params[k] = v
        elif k in COMPLEX_KEYS or k == "basepoint":
            numeric[k] = v
        elif k == "lambdas":
            numeric[k] = v
        else:
            options[k] = v
    params.setdefault("g2", "4")
    # lame verify compares against a square lattice, which has g3 = 0
    params.setdefault("g3", "0" if name == "lame verify" else "1")
    if name in ("lame bethe", "monodromy group", "monodromy scan"):
        numeric.setdefault("omega1", [1.0, 0.0])
        numeric.setdefault("omega2", [0.0, 1.0])
    cfg = RunConfig(name, params, numeric, options, seed or 0, trunc or 0, tolerances, output)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# JSON helpers
# --------------------------------------------------------------------------
def jq(x) -> str:
    """Exact scalar as a string: ``"p/q"`` or ``"p/q + r/s*i"``."""
    from .scalars import QI
    if isinstance(x, QI):
        return f"[{x.re}, {x.im}]"
    return str(Fraction(x))


def jc(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _verification(checks: dict) -> bool:
    return all(c["passed"] for c in checks.values())


def _check(value: float, tol: float) -> dict:
    return {"value": float(value), "tolerance": tol, "passed": bool(value <= tol)}


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------
def _inv(cfg):
    from .elliptic import EllipticInvariants
    return EllipticInvariants(cfg.fraction("g2"), cfg.fraction("g3"))


def _lattice(cfg):
    from .elliptic import Lattice
    return Lattice(cfg.complex("omega1"), cfg.complex("omega2"))


def cmd_wp_series(cfg):
    from .elliptic import wp_prime_series, wp_series
    inv = _inv(cfg)
    s = wp_series(inv, cfg.trunc)
    # the relation loses 6 orders to the u^-6 poles: work with headroom
    big = wp_series(inv, cfg.trunc + 6)
    dbig = wp_prime_series(inv, cfg.trunc + 6)
    rel = dbig * dbig - big * big * big * 4 + big * inv.g2 + inv.g3
    coeffs = [[k, jq(c)] for k, c in s.terms()]
    checks = {"weierstrass_relation": {"value": 0.0 if rel.is_zero() else 1.0, "tolerance": 0.0,
                                       "passed": rel.is_zero(), "precision": rel.trunc}}
    return {"coefficients": coeffs, "series": str(s)}, checks


def cmd_lattice_invariants(cfg):
    import math
    lat = _lattice(cfg)
    e1, e2 = lat.quasi_periods()
    legendre = abs(e1 * lat.omega2 - e2 * lat.omega1 - 2j * math.pi)
    return ({"g2": jc(lat.g2), "g3": jc(lat.g3), "eta1": jc(e1), "eta2": jc(e2),
             "discriminant": jc(lat.g2 ** 3 - 27 * lat.g3 ** 2)},
            {"legendre": _check(legendre, cfg.tolerances["legendre"])})


def _ring(cfg):
    from .opalg import EllipticRing, SeriesRing
    if cfg.options.get("ring", "elliptic") == "series":
        return SeriesRing(cfg.trunc)
    return EllipticRing(_inv(cfg))


def _lower(cfg, src):
    from .opalg import SeriesRing
    from .parser import lower_diffop, lower_series_ring, parse_operator
    params = {k: cfg.fraction(k) for k in cfg.params}
    tree = parse_operator(src, params)
    ring = _ring(cfg)
    if isinstance(ring, SeriesRing):
        return lower_series_ring(tree, cfg.trunc, _inv(cfg))
    return lower_diffop(tree, ring)


def _op_json(A):
    return {"operator": str(A), "order": A.order if not A.is_zero() else None}


def cmd_op(cfg):
    from .opalg import adjoint, commutator
    A = _lower(cfg, cfg.options["expr"])
    kind = cfg.subcommand.split()[1]
    if kind == "eval":
        return _op_json(A), {}
    if kind == "adjoint":
        out = _op_json(adjoint(A))
        out["self_adjoint"] = adjoint(A) == A
        out["skew_adjoint"] = adjoint(A) == -A
        return out, {}
    B = _lower(cfg, cfg.options["expr2"])
    C = commutator(A, B)
    out = _op_json(C)
    out["commutes"] = C.is_zero()
    return out, {}


def _lame(cfg):
    from .lame import build_lame
    return build_lame(cfg.fraction("m"), _inv(cfg))


def cmd_commutant_find(cfg):
    from .commutant import NotFound, commuting_system, find_commuting, nullspace_dimension
    L = _lame(cfg)
    s = cfg.options["order"]
    wb = cfg.options.get("wbound")
    try:
        Q = find_commuting(L, s, wb)
    except NotFound as exc:
        sys_ = commuting_system(L, s, wb)
        return {"found": False, "reason": str(exc), "unknowns": len(sys_.unknowns),
                "nullspace_dimension": nullspace_dimension(sys_)}, {}
    return {"found": True, "operator": str(Q), "order": Q.order,
            "skew_adjoint": Q.adjoint() == -Q}, {}


def _curve_json(P):
    return {"coefficients": [jq(c) for c in P.coeffs], "degree": P.degree, "monic": P.is_monic(),
            "polynomial": str(P), "discriminant": jq(P.discriminant())}


def cmd_spectral_curve(cfg):
    from .commutant import NotFound, find_commuting, spectral_polynomial
    m = cfg.fraction("m")
    if m.denominator != 1 or m < 0:
        raise UsageError("spectral-curve needs a nonnegative integer m")
    L = _lame(cfg)
    Q = find_commuting(L, 2 * int(m) + 1)
    P = spectral_polynomial(L, Q)
    out = {"Q": str(Q), "P": _curve_json(P)}
    ok = P.is_monic() and P.degree == 2 * int(m) + 1
    return out, {"monic_degree": {"value": 0.0 if ok else 1.0, "tolerance": 0.0, "passed": ok}}


def cmd_algebraic_type(cfg):
    from .commutant import algebraic_type_test
    v = algebraic_type_test(_lame(cfg), cfg.options["max_order"], seed=cfg.seed)
    out = {"verdict": v.kind if v.kind != "NoWitnessUpTo" else f"NoWitnessUpTo({v.max_order})",
           "kind": v.kind, "max_order": v.max_order, "orders_tried": list(v.tried)}
    if v.witness is not None:
        out["witness"] = str(v.witness)
        out["samples"] = [[jq(lam), ok] for lam, ok in v.samples]
    if v.curve is not None:
        out["curve"] = _curve_json(v.curve)
    return out, {}


def cmd_lame_qm(cfg):
    return cmd_spectral_curve(cfg)


def _lame_point(cfg, lat):
    from .lame import as_m, eigenfunction_check, pi_residual, solve_bethe
    m = as_m(cfg.fraction("m"))
    sp = solve_bethe(m, lat, cfg.seed, tol=cfg.tolerances["bethe"])
    ans = sp.ansatz
    lam, pi_res = pi_residual(ans)
    ec = eigenfunction_check(ans, lam, 15)
    out = {"lambda": jc(lam), "poles": [jc(a) for a in ans.poles], "c0": jc(ans.c0),
           "residuals": {"bethe": ans.residual, "pi": pi_res, "eigen": ec.residual},
           "base_point": jc(ec.x0), "cauchy_radius": ec.radius}
    checks = {"bethe": _check(ans.residual, cfg.tolerances["bethe"]),
              "pi": _check(pi_res, cfg.tolerances["pi"]),
              "eigen": _check(ec.residual, cfg.tolerances["eigen"])}
    return sp, out, checks


def cmd_lame_bethe(cfg):
    _, out, checks = _lame_point(cfg, _lattice(cfg))
    return out, checks


def cmd_lame_verify(cfg):
    from .commutant import find_commuting, spectral_polynomial
    from .elliptic import EllipticInvariants, square_lattice_with_g2
    from .lame import build_lame, mu_on_eigenfunction, pi_residual, sigma, wronskian
    if cfg.fraction("g3") != 0 or cfg.fraction("g2") <= 0:
        raise UsageError("lame verify runs on a square lattice: needs g2 > 0 and g3 = 0")
    g2 = cfg.fraction("g2")
    inv = EllipticInvariants(g2, 0)
    lat = square_lattice_with_g2(float(g2))
    sp, out, checks = _lame_point(cfg, lat)
    ans = sp.ansatz
    lam2, _ = pi_residual(sigma(ans))
    x0 = complex(*out["base_point"])
    out["sigma_lambda_gap"] = abs(lam2 - sp.lam)
    out["wronskian"] = jc(wronskian(ans, sigma(ans), x0))
    m = ans.m
    L = build_lame(m, inv)
    Q = find_commuting(L, 2 * m + 1)
    P = spectral_polynomial(L, Q)
    mu = mu_on_eigenfunction(Q, ans)
    Pl = sum(complex(c) * sp.lam ** k for k, c in enumerate(P.coeffs))
    rel = abs(mu * mu - Pl) / max(abs(Pl), 1e-300)
    out.update({"mu": jc(mu), "P_of_lambda": jc(Pl), "invariants": [jq(g2), "0"]})
    checks["sigma"] = _check(out["sigma_lambda_gap"], cfg.tolerances["pi"])
    checks["mu_squared"] = _check(rel, cfg.tolerances["mu"])
    checks["wronskian_nonzero"] = {"value": abs(complex(*out["wronskian"])), "tolerance": 0.0,
                                   "passed": abs(complex(*out["wronskian"])) > 1e-8}
    return out, checks


def cmd_cm(cfg):
    from . import cm
    n = cfg.options["n"]
    m = cfg.fraction("m")
    kind = cfg.subcommand.split()[1]
    if kind == "build":
        L1, L2 = cm.build_cm(n, m)
        zero = cm.cm_commutator(L1, L2).is_zero()
        return ({"L1": str(L1), "L2": str(L2), "symmetric": L2.is_symmetric()},
                {"L1_L2_exact": {"value": 0.0 if zero else 1.0, "tolerance": 0.0, "passed": zero}})
    if kind == "integral":
        j = cfg.options["order"]
        try:
            op = cm.solve_higher_integral(n, m, j, seed=cfg.seed)
        except cm.ReducibleIntegral as exc:
            return {"reducible": True, "operator": str(exc.operator), "combination": exc.combination}, {}
        return {"reducible": False, "operator": str(op), "symmetric": op.is_symmetric()}, {}
    if kind == "commute-check":
        samples = cfg.options.get("samples", 200)
        ops = list(cm.build_cm(n, m))
        for j in range(3, n + 1):
            ops.append(cm.solve_higher_integral(n, m, j, seed=cfg.seed))
        pairs = []
        worst = 0.0
        for a in range(len(ops)):
            for b in range(a + 1, len(ops)):
                C = cm.cm_commutator(ops[a], ops[b])
                r = cm.residual_on_lattices(C, samples=samples, seed=cfg.seed)
                worst = max(worst, r)
                pairs.append({"pair": [f"L{a + 1}", f"L{b + 1}"], "exact_zero": C.is_zero(), "residual": r})
        return {"operators": [str(o) for o in ops], "pairs": pairs}, {"commute": _check(worst, cfg.tolerances["cm_commute"])}
    # bethe
    from .elliptic import square_lattice
    lat = square_lattice()
    mi = int(m)
    if m != mi:
        raise UsageError("cm bethe needs an integer m")
    st = cm.solve_cm_bethe(n, mi, lat, cfg.seed, tol=cfg.tolerances["bethe"])
    res = cm.cm_bethe_residual(st)
    out = {"poles": [jc(a) for a in st.poles], "residues": [list(map(int, r)) for r in st.residues],
           "c": [jc(c) for c in st.c], "residual": res}
    if n == 2:
        from .lame import pi_residual
        lam, pr = pi_residual(cm.lame_from_state(st))
        out["lame_lambda"] = jc(lam)
        out["pi_residual"] = pr
    return out, {"bethe": _check(res, cfg.tolerances["bethe"])}


def cmd_monodromy(cfg):
    from . import monodromy as mo
    lat = _lattice(cfg)
    m = float(cfg.fraction("m"))
    bp = cfg.complex("basepoint") if "basepoint" in cfg.numeric else None
    if cfg.subcommand.endswith("group"):
        r = mo.monodromy_group(m, cfg.complex("lambda"), lat, bp)
        d = r.diagnostics
        return r.to_json(), {"det": _check(max(d["det_defects"]), cfg.tolerances["det"]),
                             "relation": _check(d["relation_defect"], cfg.tolerances["relation"])}
    lams = [complex(*z) for z in cfg.numeric["lambdas"]]
    rows = mo.commutativity_scan(m, lams, lat, bp)
    return {"rows": rows}, {"det": _check(max(r["det_defect"] for r in rows), cfg.tolerances["det"]),
                            "relation": _check(max(r["relation_defect"] for r in rows), cfg.tolerances["relation"])}


DISPATCH = {
    "wp-series": cmd_wp_series,
    "lattice-invariants": cmd_lattice_invariants,
    "op eval": cmd_op,
    "op commutator": cmd_op,
    "op adjoint": cmd_op,
    "commutant find": cmd_commutant_find,
    "spectral-curve": cmd_spectral_curve,
    "algebraic-type": cmd_algebraic_type,
    "lame qm": cmd_lame_qm,
    "lame bethe": cmd_lame_bethe,
    "lame verify": cmd_lame_verify,
    "cm build": cmd_cm,
    "cm integral": cmd_cm,
    "cm commute-check": cmd_cm,
    "cm bethe": cmd_cm,
    "monodromy group": cmd_monodromy,
    "monodromy scan": cmd_monodromy,
}


def run(cfg: RunConfig):
    """Dispatch; returns ``(exit_status, document)``."""
    cfg.validate()
    result, checks = DISPATCH[cfg.subcommand](cfg)
    ok = _verification(checks)
    doc = {
        "schema": SCHEMA_ID,
        "command": cfg.subcommand,
        "config": cfg.to_json(),
        "status": "ok" if ok else "verification_failed",
        "checks": checks,
        "result": result,
    }
    return (0 if ok else 2), doc


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True)


def load_schema() -> dict:
    return json.loads(resources.files("qcis").joinpath("schema.json").read_text())


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
        status, doc = run(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # numerical or algebraic failure inside a check
        from .parser import ParseError
        if isinstance(exc, (ParseError, ValueError)) and not isinstance(exc, ArithmeticError):
            print(f"usage error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 1
        print(f"verification failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    text = dumps(doc)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    print(f"{cfg.subcommand}: {doc['status']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
