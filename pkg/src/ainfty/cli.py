"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 truncation or filtration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .deform import RestrictionError, moyal_product, restrict_to_W, solve_master
from .exactalg import Presentation, PresentationError, format_element, p_degree, parse_element
from .gradedmaps import CheckReport, MCReport, TruncationError, check_mc
from .hpt import FiltrationError, bpl_transfer
from .qsuper import (
    build_presentation, classify_central_cocycles, multiplicative_generators, verify_cocycle,
)
from .resolution import (
    ConfigError, NoSolutionError, ResolutionAlgebra, _parse_matrix, _parse_vector,
    algebra_from_config, build_D, central_form, check_D, check_gamma, check_sdr, constant_map,
    make_sdr, m2_map, parse_kv, solve_gamma, w_tuples,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_TRUNC = 0, 1, 2, 3


@dataclass
class RunConfig:
    alg: ResolutionAlgebra
    generator: str
    form: list | None
    t_order: int
    arity_max: int
    degree_max: int

    def validate(self) -> "RunConfig":
        if self.t_order < 0:
            raise ConfigError("order must be >= 0")
        if self.arity_max < 2:
            raise ConfigError("arity-max must be >= 2")
        if self.degree_max < 0:
            raise ConfigError("degree-max must be >= 0")
        tr = self.alg.truncation
        if tr is not None and tr < self.degree_max:
            raise ConfigError(f"truncation {tr} is below degree-max {self.degree_max}")
        if self.generator not in ("central", "D"):
            raise ConfigError(f"unknown generator {self.generator!r}")
        if self.generator == "D" and tr is None:
            raise ConfigError("generator D needs a truncation")
        return self


def _read_config(args) -> dict:
    if not args.config:
        return {}
    try:
        return parse_kv(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(str(exc)) from exc


def _int(cfg: dict, key: str, flag, default: int) -> int:
    if flag is not None:
        return flag
    try:
        return int(cfg.get(key, default))
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def run_config(args) -> RunConfig:
    cfg = _read_config(args)
    degree_max = _int(cfg, "degree_max", args.degree_max, 2)
    generator = cfg.get("generator", "central")
    if args.truncation is not None:
        cfg["truncation"] = str(args.truncation)
    elif "truncation" not in cfg and generator == "D":
        cfg["truncation"] = str(degree_max + 2)
    alg = algebra_from_config(cfg)
    form = _parse_matrix(cfg["form"]) if "form" in cfg else None
    return RunConfig(alg, generator, form, _int(cfg, "order", args.order, 1),
                     _int(cfg, "arity_max", args.arity_max, 4), degree_max).validate()


def _generator_maps(rc: RunConfig) -> tuple:
    alg = rc.alg
    if rc.generator == "central":
        return [constant_map(alg, central_form(alg, rc.form))], None
    gamma = solve_gamma(alg)
    return [build_D(gamma, alg)], gamma


def _window(rc: RunConfig):
    N = rc.alg.truncation
    if N is None:
        return None
    cut = N - rc.degree_max
    return lambda v: v.filter(lambda m: p_degree(m) < cut)


def _fmt_args(alg, args) -> str:
    return "[" + " ".join(repr(alg.space.embed(b)) for b in args) + "]"


def _emit(lines: list, out: str | None) -> None:
    text = "".join(line + "\n" for line in lines)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _series_rows(series, rc: RunConfig) -> dict:
    """{(order, arity, args): value} for nonzero values, on W-tuples."""
    alg = rc.alg
    tuples = w_tuples(alg)
    rows = {}
    for k in range(rc.t_order + 1):
        for r in range(rc.arity_max + 1):
            maps = series.arity_part(k, r)
            if not maps:
                continue
            for args in tuples(r, rc.degree_max):
                val = alg.space.zero()
                for f in maps:
                    val = val + f.on_basis(args)
                if not val.is_zero():
                    rows[(k, r, args)] = val
    return rows


def engine_series(rc: RunConfig, lam):
    ser = solve_master(lam, rc.alg, rc.t_order)
    return restrict_to_W(ser, rc.alg, window=_window(rc))


def cmd_deform(args) -> int:
    rc = run_config(args)
    lam, _ = _generator_maps(rc)
    rows = _series_rows(engine_series(rc, lam), rc)
    lines = [f"# deform generator={rc.generator} kind={rc.alg.kind} n={rc.alg.n} "
             f"order={rc.t_order} arity_max={rc.arity_max} degree_max={rc.degree_max} "
             f"truncation={rc.alg.truncation}"]
    for (k, r, a), val in rows.items():
        lines.append(f"{k}\t{r}\t{_fmt_args(rc.alg, a)}\t{val!r}")
    _emit(lines, args.out)
    return EXIT_OK


def _report_line(name: str, rep) -> list:
    status = "PASS" if rep.passed else "FAIL"
    lines = [f"{name}: {status} checked={rep.checked} failures={len(rep.rows)}"]
    if rep.rows:
        lines.append(f"  witness: {rep.rows[0]!r}")
    return lines


def _verify_q(args, cfg: dict) -> tuple:
    q, n, mode = _q_from_cfg(cfg)
    bound = _int(cfg, "bound", getattr(args, "bound", None), 2)
    trunc = args.truncation if args.truncation is not None else int(cfg.get("truncation", 4))
    pres = build_presentation(q, n=n, truncation=trunc, odd_cross=mode)
    reps = []
    for d in classify_central_cocycles(q, bound, n=n, mode=mode):
        reps.append((f"cocycle {d.text()}", verify_cocycle(d, pres)))
    return reps


def cmd_verify(args) -> int:
    cfg = _read_config(args)
    if "q" in cfg or "bound" in cfg:
        reports = _verify_q(args, cfg)
    else:
        rc = run_config(args)
        alg = rc.alg
        reports = [("sdr", check_sdr(make_sdr(alg), rc.degree_max))]
        lam, gamma = _generator_maps(rc)
        if gamma is not None:
            reports.append(("gamma", check_gamma(gamma, alg)))
            reports.append(("D", check_D(gamma, alg)))
        mc = check_mc(engine_series(rc, lam), rc.t_order, rc.arity_max, rc.degree_max,
                      w_tuples(alg), window=_window(rc))
        reports.append(("mc", mc))
    lines = []
    for name, rep in reports:
        lines += _report_line(name, rep)
    total = sum(rep.checked for _, rep in reports)
    ok = all(rep.passed for _, rep in reports)
    if total == 0:
        lines.append("warning: no checks were run")
    lines.append(f"RESULT {'PASS' if ok else 'FAIL'}")
    _emit(lines, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_transfer(args) -> int:
    rc = run_config(args)
    alg = rc.alg
    lam, _ = _generator_maps(rc)
    eng = _series_rows(engine_series(rc, lam), rc)
    bpl = _series_rows(bpl_transfer(make_sdr(alg), [m2_map(alg)], lam, rc.t_order, rc.arity_max),
                       rc)
    win = _window(rc) or (lambda v: v)
    lines = [f"# transfer generator={rc.generator} order={rc.t_order} "
             f"arity_max={rc.arity_max} degree_max={rc.degree_max}"]
    diffs = 0
    zero = alg.space.zero()
    for key in sorted(set(eng) | set(bpl), key=lambda t: (t[0], t[1], repr(t[2]))):
        a, b = eng.get(key, zero), bpl.get(key, zero)
        if not win(a - b).is_zero():
            diffs += 1
            k, r, t = key
            lines.append(f"DIFF {k}\t{r}\t{_fmt_args(alg, t)}\tengine={a!r}\tbpl={b!r}")
    lines.append(f"compared={len(set(eng) | set(bpl))} differences={diffs}")
    lines.append(f"RESULT {'IDENTICAL' if diffs == 0 else 'DIFFERENT'}")
    _emit(lines, args.out)
    return EXIT_OK if diffs == 0 else EXIT_FAIL


def _q_from_cfg(cfg: dict) -> tuple:
    try:
        q = _parse_matrix(cfg.get("q", ""))
        n = int(cfg["n"]) if "n" in cfg else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    mode = cfg.get("mode", "literal")
    if mode not in ("literal", "tensor"):
        raise ConfigError(f"unknown mode {mode!r}")
    if not q and n is None:
        raise ConfigError("a q-matrix file with no odd directions needs n")
    return q, n, mode


def cmd_classify(args) -> int:
    path = args.qfile or args.config
    if not path:
        raise ConfigError("classify needs a q-matrix file")
    try:
        cfg = parse_kv(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    q, n, mode = _q_from_cfg(cfg)
    bound = args.bound if args.bound is not None else _int(cfg, "bound", None, 2)
    descs = classify_central_cocycles(q, bound, n=n, mode=mode)
    if args.generators:
        descs = multiplicative_generators(descs, q)
    nn = n if n is not None else len(q[0])
    lines = [f"# classify n={nn} m={len(q)} mode={mode} bound={bound}"
             + (" generators" if args.generators else "")]
    ok = True
    pres = None
    if args.verify:
        trunc = args.truncation if args.truncation is not None else 4
        pres = build_presentation(q, n=n, truncation=trunc, odd_cross=mode)
    for d in descs:
        line = d.text()
        if pres is not None:
            rep = verify_cocycle(d, pres)
            ok &= rep.passed
            line += " verify=" + ("PASS" if rep.passed else "FAIL")
        lines.append(line)
    _emit(lines, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_moyal(args) -> int:
    n = args.n
    lam = _parse_matrix(args.lam) if args.lam else [[0, 1], [-1, 0]]
    if len(lam) != n or any(len(r) != n for r in lam):
        raise ConfigError("lambda must be an n x n matrix")
    pres = Presentation(n=n)
    try:
        a = parse_element(args.a, pres)
        b = parse_element(args.b, pres)
    except (ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"cannot parse element: {exc}") from exc
    if args.order is None:
        lines = [format_element(moyal_product(a, b, lam))]
    else:
        lines = [f"{k}\t{format_element(moyal_product(a, b, lam, order=k))}"
                 for k in range(args.order + 1)]
    _emit(lines, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ainfty", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--order", type=int, help="t-order")
        sp.add_argument("--arity-max", type=int)
        sp.add_argument("--degree-max", type=int)
        sp.add_argument("--truncation", type=int, help="p-degree truncation")
        sp.add_argument("--out", help="output file (default stdout)")

    for name, fn in (("deform", cmd_deform), ("verify", cmd_verify), ("transfer", cmd_transfer)):
        sp = sub.add_parser(name)
        common(sp)
        if name == "verify":
            sp.add_argument("--bound", type=int, help="dpi bound for q-matrix configs")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("classify")
    common(sp)
    sp.add_argument("qfile", nargs="?")
    sp.add_argument("--bound", type=int)
    sp.add_argument("--generators", action="store_true", help="only multiplicative generators")
    sp.add_argument("--verify", action="store_true", help="verify each cocycle")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("moyal")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--lambda", dest="lam", help="rows separated by ';', entries by ','")
    sp.add_argument("--order", type=int, help="print t-coefficients up to this order")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_moyal)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PresentationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TruncationError, FiltrationError, RestrictionError) as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNC
    except NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
