"""Command-line front end.

Every command reads one run configuration, writes ``<command>.csv`` and
``<command>.json`` into the output directory and prints a single summary line
``OK <command> rows=<n> out=<path>``.

Exit codes: 0 success, 1 acceptance failure in ``selftest``, 2 invalid
configuration, 3 numerical precondition failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from . import fock as F
from . import interacting as I
from . import wick as W
from .config import RunConfig, load_config
from .errors import ConfigError, SmearfieldError
from .freefield import FieldContext, inner_product_closed, smeared_commutator_1p1
from .report import ResultTable, plot_matrix, plot_table
from .testfn import BumpFunction, GaussianSum, contract_envelope, envelope_width, scale_functional

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4

NAN = float("nan")


def _need_functions(cfg: RunConfig, n: int, cmd: str):
    if len(cfg.functions) < n:
        raise ConfigError(f"{cmd} needs at least {n} registered function(s), got {len(cfg.functions)}")


def _ids(cfg: RunConfig) -> list:
    return [f.id for f in cfg.functions]


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_inner(cfg: RunConfig) -> ResultTable:
    """Pairwise ``(f_i, f_j)`` on the lattice and, for Gaussian pairs, in closed form."""
    _need_functions(cfg, 2, "inner")
    ctx = cfg.context()
    lat = FieldContext(ctx.quadrature, "lattice")
    ids = _ids(cfg)
    for i in ids:
        lat.register(i, ctx.function((i, False)))
    t = ResultTable(
        "inner", ("f", "g", "lattice_re", "lattice_im", "closed_re", "closed_im", "rel_diff"), config_hash=cfg.digest()
    )
    for a, fa in enumerate(ids):
        for fb in ids[a:]:
            v = lat.inner((fa, False), (fb, False))
            f, g = ctx.function((fa, False)), ctx.function((fb, False))
            if isinstance(f, GaussianSum) and isinstance(g, GaussianSum):
                c = inner_product_closed(f, g, cfg.mass)
                rel = abs(v - c) / max(abs(c), abs(v), 1e-300)
                t.append((fa, fb, v.real, v.imag, c.real, c.imag, rel))
            else:
                t.append((fa, fb, v.real, v.imag, NAN, NAN, NAN))
    return t


def cmd_commutator(cfg: RunConfig) -> ResultTable:
    """``[phi_f, phi_g]`` with causal classification and, for 1+1 bumps, the Pauli-Jordan oracle."""
    _need_functions(cfg, 2, "commutator")
    ctx = cfg.context()
    ids = _ids(cfg)
    t = ResultTable(
        "commutator",
        ("f", "g", "separation", "comm_re", "comm_im", "scale", "ratio", "oracle_re", "oracle_im"),
        config_hash=cfg.digest(),
    )
    for a, fa in enumerate(ids):
        for fb in ids[a + 1 :]:
            f, g = ctx.function((fa, False)), ctx.function((fb, False))
            sep = I.PastConeRelation.classify(I.support_box(f), I.support_box(g)).separation.value
            c = ctx.commutator(fa, fb)
            scale = max(ctx.norm(fa), ctx.norm(fb))
            o = NAN + 0j
            if cfg.dimension == 2 and isinstance(f, BumpFunction) and isinstance(g, BumpFunction):
                if np.allclose(f.grid.spacing, g.grid.spacing, rtol=0, atol=1e-15):
                    o = smeared_commutator_1p1(f, g, cfg.mass)
            t.append((fa, fb, sep, c.real, c.imag, scale, abs(c) / scale, o.real, o.imag))
    return t


def cmd_vev(cfg: RunConfig) -> ResultTable:
    """Vacuum expectation of each label string by recursion, pairings and the normal-form product."""
    _need_functions(cfg, 1, "vev")
    if not cfg.vev.labels:
        raise ConfigError("vev.labels must list at least one label sequence")
    ctx = cfg.context()
    t = ResultTable(
        "vev",
        ("labels", "n", "recursive_re", "recursive_im", "pairings_re", "pairings_im", "product_re", "product_im", "rel_diff"),
        config_hash=cfg.digest(),
    )
    for labels in cfg.vev.labels:
        for lab in labels:
            if W.FieldLabel.parse(lab).id not in ctx:
                raise ConfigError(f"vev label {lab!r} is not registered")
        r = W.vev_recursive(ctx, labels)
        p = W.vev_pairings(ctx, labels) if len(labels) <= 12 else NAN + 0j
        m = W.vacuum_expectation(W.field_string(ctx, labels)) if len(labels) <= 10 else NAN + 0j
        diffs = [abs(r - x) for x in (p, m) if not math.isnan(x.real)]
        rel = max(diffs, default=0.0) / max(abs(r), 1e-300)
        t.append((" ".join(labels), len(labels), r.real, r.imag, p.real, p.imag, m.real, m.imag, rel))
    return t


def cmd_envelope(cfg: RunConfig) -> ResultTable:
    """Contracted envelope summaries at the requested points."""
    _need_functions(cfg, 1, "envelope")
    ctx = cfg.context()
    fid = cfg.envelope_cmd.function or cfg.functions[0].id
    if fid not in ctx:
        raise ConfigError(f"envelope function {fid!r} is not registered")
    f = ctx.function((fid, False))
    spec = cfg.envelope_spec()
    lam = scale_functional(f, cfg.scale_spec(), ctx.norm(fid))
    points = cfg.envelope_cmd.points or [list(f.effective_support(1e-3).center)]
    n = cfg.dimension
    cols = ("point",) + tuple(f"x{i}" for i in range(n)) + ("lambda", "integral", "width", "norm", "max_abs")
    t = ResultTable("envelope", cols, config_hash=cfg.digest(), meta={"variant": spec.variant.value, "function": fid})
    for k, x in enumerate(points):
        if len(x) != n:
            raise ConfigError(f"envelope point {x} needs {n} components")
        h = contract_envelope(f, spec, lam, x)
        hid = ctx.register(f"{fid}@point{k}", h)
        if h.is_zero:
            t.append((k, *map(float, x), lam, 0.0, NAN, 0.0, 0.0))
            continue
        peak = float(np.max(np.abs(h.samples))) if isinstance(h, BumpFunction) else float(abs(h(np.asarray(x, float))))
        t.append((k, *map(float, x), lam, h.integral().real, envelope_width(h), ctx.norm(hid), peak))
    return t


def cmd_gns(cfg: RunConfig) -> tuple:
    """Gram spectrum and Fock dimension of the truncated space over the basis."""
    _need_functions(cfg, 1, "gns")
    ctx = cfg.context()
    basis = cfg.gns.basis or _ids(cfg)
    for b in basis:
        if b not in ctx:
            raise ConfigError(f"gns basis id {b!r} is not registered")
    spec = F.build_spec(ctx, basis, N=cfg.gns.max_particles, include_conjugates=cfg.gns.include_conjugates)
    t = ResultTable(
        "gns",
        ("mode", "eigenvalue"),
        [(a, float(e)) for a, e in enumerate(spec.eigenvalues)],
        config_hash=cfg.digest(),
        meta={"dimension": spec.dim, "modes": spec.n_modes, "discarded": spec.discarded, "max_particles": spec.max_particles},
    )
    return t, spec


def cmd_xi(cfg: RunConfig) -> ResultTable:
    """Coefficients of the first-order interacting field, plus geometry and retarded-form diagnostics."""
    _need_functions(cfg, 1, "xi")
    ctx = cfg.context()
    fid = cfg.xi.field or cfg.functions[0].id
    src = cfg.xi.source or fid
    for i in [fid, src, *cfg.xi.probes]:
        if i not in ctx:
            raise ConfigError(f"xi id {i!r} is not registered")
    spec = cfg.interaction_spec()
    xi = I.xi_first_order(ctx, fid, spec, src)
    seps = [s.value for s in I.classify_centers(ctx, fid, spec, src)]
    residual = None
    if cfg.xi.probes and seps and all(s == "past" for s in seps):
        try:
            residual = I.retarded_form_check(ctx, fid, cfg.xi.probes, spec, src)
        except SmearfieldError:
            residual = None
    t = ResultTable(
        "xi",
        ("creators", "annihilators", "coeff_re", "coeff_im"),
        config_hash=cfg.digest(),
        meta={"field": fid, "source": src, "separations": seps, "retarded_residual": residual},
    )
    for (cr, an), v in xi:
        t.append((" ".join(W._mode_str(k) for k in cr), " ".join(W._mode_str(k) for k in an), v.real, v.imag))
    return t


def cmd_sweep(cfg: RunConfig) -> ResultTable:
    """``mu`` sweep of a packet family; columns ``mu,observable,width,norm``."""
    method = "closed" if cfg.quadrature.method in ("closed", "auto") else "lattice"
    rows = I.mu_sweep(
        cfg.packet_family(), cfg.sweep.grid(), cfg.interaction_spec(), cfg.quadrature_obj(), cfg.sweep.observable, method
    )
    return ResultTable(
        "sweep", I.SWEEP_COLUMNS, [tuple(r) for r in rows], config_hash=cfg.digest(), meta={"observable": cfg.sweep.observable}
    )


def cmd_selftest(cfg: RunConfig, echo=print) -> ResultTable:
    """Acceptance criteria 1-9, then criterion 10 by an in-process rerun compared byte for byte."""
    first = acceptance.run_all(cfg.seed, echo=echo)
    table = acceptance.results_table(first, cfg.digest())
    second = acceptance.results_table(acceptance.run_all(cfg.seed), cfg.digest())
    same = table.to_csv() == second.to_csv()
    r10 = acceptance.CriterionResult(
        10, "determinism", same, 0.0 if same else 1.0, 0.0, 2, f"rerun with seed {cfg.seed} byte-identical CSV={same}"
    )
    echo(r10.line())
    table.append((r10.number, r10.name, r10.passed, r10.metric, r10.threshold, r10.cases, r10.detail))
    return table


COMMANDS = ("inner", "commutator", "vev", "envelope", "gns", "xi", "sweep", "selftest")


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=_u64, help="random seed (overrides seed)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override, repeatable")
    common.add_argument("--figures", action="store_true", help="also render PNG figures next to the tables")
    p = argparse.ArgumentParser(prog="smearfield", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "inner": "pairwise inner products",
        "commutator": "pairwise field commutators",
        "vev": "vacuum expectation values of label strings",
        "envelope": "contracted envelope summaries",
        "gns": "Gram spectrum and truncated Fock space",
        "xi": "first-order interacting field",
        "sweep": "mu sweep of a packet family",
        "selftest": "run the acceptance criteria",
    }
    for name in COMMANDS:
        sub.add_parser(name, help=helps[name], parents=[common])
    return p


def _figures(cmd: str, table: ResultTable, out: Path, extra=None) -> list:
    paths = []
    if cmd == "sweep":
        paths.append(plot_table(table, "mu", ["observable"], out / "sweep_observable.png", logx=True, logy=True))
        paths.append(plot_table(table, "mu", ["width"], out / "sweep_width.png", logx=True, logy=True))
    elif cmd == "gns" and extra is not None:
        paths.append(plot_matrix(extra.gram, out / "gns_gram.png", "|Gram|"))
    elif cmd == "inner":
        ids = list(dict.fromkeys(table.column("f") + table.column("g")))
        M = np.zeros((len(ids), len(ids)), complex)
        for f, g, re, im, *_ in table.rows:
            i, j = ids.index(f), ids.index(g)
            M[i, j] = complex(re, im)
            M[j, i] = complex(re, -im)
        paths.append(plot_matrix(M, out / "inner_gram.png", "|(f_i, f_j)|"))
    elif cmd == "selftest":
        paths.append(plot_table(table, "criterion", ["metric"], out / "selftest_metrics.png", logy=True))
    return paths


def run(argv=None, echo=print) -> int:
    args = build_parser().parse_args(argv)
    cmd = args.command
    try:
        cfg = load_config(getattr(args, "config", None), getattr(args, "set", None), getattr(args, "seed", None))
        out = Path(getattr(args, "out", None) or cfg.output.dir)
        extra = None
        if cmd == "gns":
            table, extra = cmd_gns(cfg)
        elif cmd == "selftest":
            table = cmd_selftest(cfg, echo)
        else:
            table = globals()[f"cmd_{cmd}"](cfg)
        path = table.write(out)
        if extra is not None:
            (out / "gns_spec.json").write_text(json.dumps(extra.to_json()))
            F.number_operator(extra).write_binary(out / "gns_number.bin")
            echo(f"fock dimension={extra.dim} modes={extra.n_modes} discarded={extra.discarded}")
        if getattr(args, "figures", False) or cfg.output.figures:
            for pth in _figures(cmd, table, out, extra):
                echo(f"figure {pth}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SmearfieldError, ArithmeticError) as exc:
        print(f"numerical precondition failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    echo(f"OK {cmd} rows={len(table.rows)} out={path}")
    if cmd == "selftest" and not all(table.column("passed")):
        return EXIT_FAIL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
