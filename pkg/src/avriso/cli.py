"""Command-line runner: ``avriso <subcommand> [flags]`` or ``python -m avriso``.

Every subcommand resolves its parameters from defaults, then ``--config``
(a flat JSON object), then explicit flags.  Artifacts go to ``--out``
(default: the working directory) via write-then-rename; stdout gets a short
summary.  Exit status: 0 success, 1 failed check, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from .cone import (
    disk,
    ellipse,
    isoperimetric_deficit,
    load_cone,
    measure,
    perimeter_aniso,
    random_star,
    wulff_shape,
)
from .density1d import milman_profile
from .errors import AvrisoError, ConfigError, DomainError
from .localization import disk_instance, residual_l1_curve, solve_l1_potential
from .rigidity import Thresholds, rigidity_verdict
from .rigidity1d import CSV_FIELDS, family_certificates

_NUM = (int, float)

# key -> (type, default); "list" entries are lists of numbers
SCHEMAS: dict[str, dict[str, tuple]] = {
    "profile": {"N": (float, 2.0), "D": (float, 1.0), "v_grid": (int, 99)},
    "residual-1d": {"N": (float, 3.0), "k_min": (int, 4), "k_max": (int, 14)},
    "cone-check": {"cone": (str, "quadrant_xy"), "family": (str, "wulff"),
                   "count": (int, 1), "radius": (float, 1.0), "amplitude": (float, 0.1),
                   "n_dirs": (int, 2048)},
    "localize": {"cone": (str, "quadrant_xy"), "set": (str, "wulff"),
                 "radius": (float, 1.0), "center": (list, [0.3, 0.2]),
                 "R_list": (list, [10.0, 31.6227766, 100.0, 316.227766, 1000.0]),
                 "n_rays": (int, 256), "grid_size": (int, 64), "grid_rho": (float, 0.3),
                 "grid_R": (float, 0.95)},
    "rigidity": {"cone": (str, "quadrant_xy"), "set": (str, "wulff"),
                 "radius": (float, 1.0), "center": (list, [0.3, 0.2]),
                 "axes": (list, [1.0, 1.2]), "amplitude": (float, 0.1),
                 "n_dirs": (int, 2048), "deficit": (float, 1e-3),
                 "sym_diff": (float, 5e-2), "ray": (float, 5e-2), "n_rays": (int, 64),
                 "R_factor": (float, 100.0)},
    "selftest": {"criteria": (list, [c[0] for c in acceptance.CRITERIA])},
}
COMMON = {"seed": (int, 0), "threads": (int, 1)}
SET_KINDS = ("wulff", "disk", "ellipse", "random_star")
FAMILIES = ("wulff", "random_star", "ellipse")


class CheckFailed(Exception):
    pass


# -- configuration -----------------------------------------------------------------

def _coerce(key: str, typ, value):
    if typ is list:
        if not isinstance(value, list) or not all(
                isinstance(v, _NUM) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{key} must be a list of numbers")
        return [float(v) if isinstance(v, float) else v for v in value]
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    if isinstance(value, bool) or not isinstance(value, _NUM):
        raise ConfigError(f"{key} must be a number")
    if typ is int:
        if float(value) != int(value):
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    return float(value)


def resolve_config(command: str, file_cfg: dict, flags: dict) -> dict:
    schema = {**COMMON, **SCHEMAS[command]}
    unknown = sorted(set(file_cfg) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = {k: d for k, (_, d) in schema.items()}
    for source in (file_cfg, {k: v for k, v in flags.items() if v is not None}):
        for k, v in source.items():
            cfg[k] = _coerce(k, schema[k][0], v)
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def config_hash(command: str, cfg: dict) -> str:
    # the thread count does not change results, so it is left out
    blob = json.dumps({"command": command, **{k: v for k, v in cfg.items() if k != "threads"}},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# -- output ------------------------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_text(header: list[str], rows, command: str, cfg: dict, extra: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash(command, cfg)} seed={cfg['seed']}{extra}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for r in rows:
        wr.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# -- shared helpers ------------------------------------------------------------------

def _set(C, cfg: dict, rng: np.random.Generator):
    kind, n = cfg["set"], cfg.get("n_dirs", 2048)
    if kind not in SET_KINDS:
        raise ConfigError(f"set must be one of {', '.join(SET_KINDS)}")
    if kind == "wulff":
        return wulff_shape(C, cfg["radius"], n)
    if kind == "random_star":
        return random_star(C, rng, cfg["amplitude"], r=cfg["radius"], n_dirs=n)
    if kind == "disk":
        return disk(C, cfg["radius"], center=cfg["center"], n_dirs=n)
    if len(cfg["axes"]) != 2:
        raise ConfigError("axes must hold two semi-axes")
    return ellipse(C, *cfg["axes"], n_dirs=n)


def _pool_map(fn, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# -- subcommands --------------------------------------------------------------------

def cmd_profile(cfg: dict, out: Path) -> str:
    n = cfg["v_grid"]
    if n < 1:
        raise ConfigError("v_grid must be >= 1")
    vs = [(k + 1) / (n + 1) for k in range(n)]
    rows = _pool_map(lambda v: (v, *milman_profile(cfg["N"], cfg["D"], v)), vs, cfg["threads"])
    write_atomic(out / "profile.csv", csv_text(["v", "value", "xi_star"], rows, "profile", cfg))
    return f"profile: {n} rows -> {out / 'profile.csv'}"


def cmd_residual_1d(cfg: dict, out: Path) -> str:
    ks = range(cfg["k_min"], cfg["k_max"] + 1)
    if len(ks) == 0:
        raise ConfigError("k_min must not exceed k_max")
    certs = family_certificates(ks, N=cfg["N"])
    rows = [(k, *c.row()) for k, c in zip(ks, certs)]
    write_atomic(out / "certificates.csv",
                 csv_text(["k", *CSV_FIELDS], rows, "residual-1d", cfg))
    return f"residual-1d: {len(rows)} certificates -> {out / 'certificates.csv'}"


def cmd_cone_check(cfg: dict, out: Path) -> str:
    C = load_cone(cfg["cone"])
    fam, count = cfg["family"], cfg["count"]
    if fam not in FAMILIES:
        raise ConfigError(f"family must be one of {', '.join(FAMILIES)}")
    if count < 1:
        raise ConfigError("count must be >= 1")
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["n_dirs"]
    if fam == "wulff":
        params = [cfg["radius"] * 2.0 ** s for s in
                  (np.linspace(-1, 1, count) if count > 1 else [0.0])]
        sets = [wulff_shape(C, p, n) for p in params]
    elif fam == "random_star":
        params = [float(a) for a in rng.uniform(0, cfg["amplitude"], count)]
        sets = [random_star(C, rng, p, r=cfg["radius"], n_dirs=n) for p in params]
    else:
        params = [1.0 + cfg["amplitude"] * (i + 1) for i in range(count)]
        sets = [ellipse(C, cfg["radius"] * p, cfg["radius"], n) for p in params]

    def row(i):
        E = sets[i]
        return (i, fam, float(params[i]), measure(C, E), perimeter_aniso(C, E),
                isoperimetric_deficit(C, E))
    rows = _pool_map(row, range(count), cfg["threads"])
    write_atomic(out / "deficits.csv",
                 csv_text(["index", "family", "parameter", "measure", "perimeter", "deficit"],
                          rows, "cone-check", cfg, f" cone={C.name}"))
    deficits = [r[-1] for r in rows]
    lines = [f"{C.name} {fam} p={r[2]:.6g}: deficit={r[-1]:.3e}" for r in rows]
    if min(deficits) < -1e-6:
        raise CheckFailed(f"negative deficit {min(deficits):.3e}")
    if fam == "wulff" and max(deficits) > 1e-3:
        raise CheckFailed(f"Wulff-shape deficit {max(deficits):.3e} above 1e-3")
    return "\n".join(lines)


def cmd_localize(cfg: dict, out: Path) -> str:
    C = load_cone(cfg["cone"])
    rng = np.random.default_rng(cfg["seed"])
    E = _set(C, {**cfg, "n_dirs": 2048}, rng)
    Rs = [float(r) for r in cfg["R_list"]]
    if not Rs or min(Rs) <= 0:
        raise ConfigError("R_list must hold positive radii")
    curves = _pool_map(lambda R: residual_l1_curve(C, E, [R], n_dirs=cfg["n_rays"]), Rs,
                       cfg["threads"])
    vals = [c.value[0] for c in curves]
    A = curves[0]
    extra = f" anchor={A.anchor} x0={' '.join(repr(float(x)) for x in A.x0)}"
    write_atomic(out / "residual_curve.csv",
                 csv_text(["R", "l1_residual"], zip(Rs, vals), "localize", cfg, extra))
    msg = [f"residual curve ({A.anchor} anchor): " +
           ", ".join(f"R={R:g}:{v:.4g}" for R, v in zip(Rs, vals))]
    if len(Rs) > 1 and min(vals) > 0:
        msg.append(f"log-log slope {np.polyfit(np.log(Rs), np.log(vals), 1)[0]:.4f}")
    if cfg["grid_size"] > 0 and C.n == 2:
        center = cfg["center"] if cfg["set"] == "disk" else None
        P = disk_instance(C, cfg["grid_size"], rho=cfg["grid_rho"], R=cfg["grid_R"],
                          center=center)
        S = solve_l1_potential(P)
        body = S.potential_csv()
        head = f"# config_hash={config_hash('localize', cfg)} seed={cfg['seed']}\n"
        write_atomic(out / "potential.csv", head + body)
        msg.append(f"potential on {len(P.nodes)} nodes, duality gap {S.duality_gap():.1e}")
    return "\n".join(msg)


def _flatten(d: dict, prefix: str = "") -> list[tuple[str, object]]:
    out = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out += _flatten(v, key + ".")
        elif isinstance(v, (list, tuple)):
            out.append((key, " ".join(_fmt(float(x)) for x in v)))
        else:
            out.append((key, v))
    return out


def cmd_rigidity(cfg: dict, out: Path) -> str:
    C = load_cone(cfg["cone"])
    rng = np.random.default_rng(cfg["seed"])
    E = _set(C, cfg, rng)
    th = Thresholds(cfg["deficit"], cfg["sym_diff"], cfg["ray"], cfg["n_rays"],
                    cfg["R_factor"])
    v = rigidity_verdict(C, E, th)
    doc = {"config_hash": config_hash("rigidity", cfg), "seed": cfg["seed"],
           "cone": C.name, **v.as_dict()}
    write_atomic(out / "verdict.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    write_atomic(out / "verdict.csv",
                 csv_text(["field", "value"], _flatten(v.as_dict()), "rigidity", cfg))
    if not v.passed:
        raise CheckFailed(v.summary())
    return v.summary()


def cmd_selftest(cfg: dict, out: Path) -> str:
    wanted = [int(c) for c in cfg["criteria"]]
    known = {c[0] for c in acceptance.CRITERIA}
    if not set(wanted) <= known:
        raise ConfigError(f"criteria must be among {sorted(known)}")
    outcomes = acceptance.run_all(cfg["seed"], set(wanted),
                                  report=lambda o: print(o.line(), flush=True))
    rows = [(o.number, o.title, "PASS" if o.passed else "FAIL", o.detail) for o in outcomes]
    write_atomic(out / "selftest.csv",
                 csv_text(["criterion", "title", "status", "detail"], rows, "selftest", cfg))
    failed = [o.number for o in outcomes if not o.passed]
    total = sum(o.seconds for o in outcomes)
    if failed:
        raise CheckFailed(f"criteria {failed} failed ({total:.0f}s)")
    return f"all {len(outcomes)} criteria passed ({total:.0f}s)"


COMMANDS = {
    "profile": cmd_profile,
    "residual-1d": cmd_residual_1d,
    "cone-check": cmd_cone_check,
    "localize": cmd_localize,
    "rigidity": cmd_rigidity,
    "selftest": cmd_selftest,
}


# -- argument parsing ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"ERROR:cli:usage: {message}", file=sys.stderr)
        raise SystemExit(2)


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="avriso", description="Isoperimetry checks on CD(0,N) spaces "
                "and weighted convex cones.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="flat JSON object of parameters")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", type=Path, default=Path("."), help="output directory")
        s.add_argument("--threads", type=int)
        if "cone" in schema:
            s.add_argument("cone", nargs="?", help="cone JSON path or builtin name")
        for key, (typ, default) in schema.items():
            if key == "cone":
                continue
            if typ is list:
                kind = int if key == "criteria" else float
                s.add_argument(_flag(key), dest=key, type=kind, nargs="+",
                               help=f"default {default}")
            else:
                s.add_argument(_flag(key), dest=key, type=typ, help=f"default {default}")
    return p


def _load_config_file(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "out")}
    try:
        cfg = resolve_config(args.command, _load_config_file(args.config), flags)
        msg = COMMANDS[args.command](cfg, args.out)
    except CheckFailed as exc:
        print(f"ERROR:cli:assertion: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, DomainError) as exc:
        print(exc.tag(), file=sys.stderr)
        return 2
    except AvrisoError as exc:
        print(exc.tag(), file=sys.stderr)
        return 1
    if msg:
        print(msg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
