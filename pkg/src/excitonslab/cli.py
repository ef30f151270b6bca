"""Command-line front end: excitonslab {modes,field,flux,sweep,validate}.

Every command reads one RunConfig (YAML or JSON), writes a table to --out
(or stdout) and, for file output, a sidecar <out>.meta.json carrying the
config hash and the unit-restoration factors.  Exit codes: 0 ok, 1 a check
or certification failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, dynamics, spectrum, validation
from .config import RunConfig, load_config
from .contour import Box
from .errors import CertificationError, ConfigError, ExcitonSlabError, UnsupportedError
from .model import moments_from_state_spec

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _num(x):
    return format(float(x), ".17g")


def _box(cfg):
    sb = cfg.solver.search_box
    return Box(*sb) if sb is not None else None


def _modes(cfg, params):
    return spectrum.find_modes(params, search_box=_box(cfg), n0=cfg.solver.n0)


def _moments(cfg, params, mode_set=None):
    spec = cfg.state.as_spec(params.n_layers)
    basis = spectrum.mode_basis_matrix(mode_set) if cfg.state.basis == "mode" else None
    return moments_from_state_spec(spec, params.n_layers, mode_basis=basis)


def _detector(cfg, params, mode_set):
    d = cfg.detector
    tau_max = d.tau_max if d.tau_max is not None else 3.0 / spectrum.superradiant(mode_set).gamma
    if tau_max <= d.tau_min:
        raise ConfigError("detector.tau_max must exceed detector.tau_min")
    tau = np.linspace(d.tau_min, tau_max, d.n_samples)
    det = dynamics.DetectorSpec(d.z, d.z + tau, d.side)
    try:
        det.check_outside(params)
    except ExcitonSlabError as exc:
        raise ConfigError(str(exc)) from exc
    return det


# ------------------------------------------------------------------ commands
def cmd_modes(cfg, seed_only=False):
    """Mode table; returns (columns, rows, meta, ok)."""
    params = cfg.params.build()
    seeds = None
    try:
        seeds = spectrum.perturbative_roots(params)
    except UnsupportedError:
        pass
    if seed_only or cfg.solver.seed_only:
        if seeds is None:
            raise ConfigError("--seed-only needs N <= 3 (no closed-form roots beyond)")
        ms = seeds
    else:
        ms = _modes(cfg, params)
    n = params.n_layers
    cols = ["label", "omega_re", "gamma", "multiplicity", "certified", "paired", "residual",
            "box_re_min", "box_re_max", "box_im_min", "box_im_max", "seed_error"]
    cols += [f"w{i}_{part}" for i in range(n) for part in ("re", "im")]
    seed_by_label = {m.label: m.omega for m in seeds.modes} if seeds is not None else {}
    rows = []
    for m in ms.modes:
        box = m.box.as_list() if m.box is not None else [math.nan] * 4
        seed = seed_by_label.get(m.label)
        w = np.asarray(m.weight)
        w = w if w.ndim == 1 else w[:, 0]
        row = [m.label, m.omega.real, m.gamma, m.multiplicity, m.certified, ms.pairing_ok,
               m.residual, *box, abs(m.omega - seed) if seed is not None else math.nan]
        for x in w:
            row += [x.real, x.imag]
        rows.append(row)
    meta = {"n_roots": ms.count, "n_expected": ms.n_expected, "certified": ms.certified,
            "pairing_ok": ms.pairing_ok, "seed_only": ms is seeds}
    return cols, rows, meta, bool(ms.certified) or ms is seeds


def cmd_field(cfg):
    params = cfg.params.build()
    ms = spectrum.require_certified(_modes(cfg, params))
    mom = _moments(cfg, params, ms)
    det = _detector(cfg, params, ms)
    tr = dynamics.field_trace(ms, mom, det, params)
    rows = [[t, e.real, e.imag] for t, e in zip(tr.times, tr.envelope)]
    meta = {"retarded_time_origin": tr.retarded_time_origin, "side": det.side,
            "quantity": "mean envelope <eps>", "unit": "E0"}
    return ["t", "re_eps", "im_eps"], rows, meta, True


def cmd_flux(cfg):
    params = cfg.params.build()
    ms = spectrum.require_certified(_modes(cfg, params))
    mom = _moments(cfg, params, ms)
    det = _detector(cfg, params, ms)
    tr = dynamics.flux_trace(ms, mom, det, params, exact=cfg.output.exact_flux)
    names = list(tr.components)
    cols = ["t", "flux_total"] + [f"flux_comp_{i + 1}" for i in range(len(names))]
    rows = [[t, f] + [tr.components[k][i] for k in names] for i, (t, f) in enumerate(zip(tr.times, tr.flux))]
    meta = {
        "retarded_time_origin": tr.retarded_time_origin, "side": det.side, "unit": "S0",
        "components": [{"column": f"flux_comp_{i + 1}", "name": k, "rate": tr.component_rates[k]}
                       for i, k in enumerate(names)],
        "exact": tr.exact,
    }
    return cols, rows, meta, True


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def cmd_sweep(cfg):
    base = cfg.params.build()
    sw = cfg.sweep
    vals = list(sw.values)
    if len(vals) < 1:
        raise ConfigError("sweep.values must not be empty")
    checks = []
    if sw.variable == "n":
        ns = [int(v) for v in vals]
        if any(v != int(v) or v < 1 for v in vals):
            raise ConfigError("sweep over n needs positive integers")
        mono = spectrum.find_modes(base.replace(n_layers=1))
        g_mono = spectrum.require_certified(mono).positive()[0].gamma
        cols = ["n_layers", "gamma_super", "gamma_min", "ratio_super_mono"]
        rows = []
        for n in ns:
            ms = spectrum.require_certified(_modes_for(cfg, base.replace(n_layers=n)))
            gs = spectrum.superradiant(ms).gamma
            ratio = gs / g_mono
            rows.append([n, gs, min(m.gamma for m in ms.positive()), ratio])
            if n <= 3:
                rel = abs(ratio / n - 1)
                checks.append(validation.check(f"ratio_n{n}", rel <= 0.01, rel, 0.01))
    elif sw.variable == "delta0":
        if base.n_layers < 2:
            raise ConfigError("a delta0 sweep needs n_layers >= 2 (subradiant modes)")
        cols = ["delta0", "gamma_super", "gamma_sub"]
        rows = []
        for d in vals:
            ms = spectrum.require_certified(_modes_for(cfg, base.replace(delta0=d)))
            rows.append([d, spectrum.superradiant(ms).gamma, min(m.gamma for m in ms.positive())])
        if len(rows) >= 2:
            s = _slope([r[0] for r in rows], [r[2] for r in rows])
            checks.append(validation.check("sub_slope_delta0", abs(s - 2) <= 0.05, s, [1.95, 2.05]))
    else:
        cols = ["g", "gamma_super", "gamma_sub"]
        rows = []
        for g in vals:
            ms = spectrum.require_certified(_modes_for(cfg, base.replace(g=g)))
            rows.append([g, spectrum.superradiant(ms).gamma, min(m.gamma for m in ms.positive())])
        if len(rows) >= 2:
            s = _slope([r[0] for r in rows], [r[1] for r in rows])
            checks.append(validation.check("super_slope_g", abs(s - 1) <= 0.02, s, [0.98, 1.02]))
    meta = {"variable": sw.variable, "checks": checks}
    return cols, rows, meta, all(c["passed"] for c in checks)


def _modes_for(cfg, params):
    # an explicit search box only makes sense for the configured parameters
    return spectrum.find_modes(params, n0=cfg.solver.n0)


def cmd_validate(cfg):
    params = cfg.params.build()
    ms = None
    try:
        ms = _modes(cfg, params)
    except ExcitonSlabError:
        pass
    mom = _moments(cfg, params, ms if ms is not None and ms.certified else None) \
        if cfg.state.basis != "mode" or (ms is not None and ms.certified) else None
    if mom is None:
        raise ConfigError("state in the mode basis needs a certified mode set")
    o = cfg.oracle
    opts = dict(q_max=o.q_max, margin=o.margin, dt=o.dt, box_length=o.box_length,
                two_photon=o.two_photon, counter_rotating=o.counter_rotating)
    checks = validation.run_validation(params, mom, z=cfg.detector.z, side=cfg.detector.side,
                                       oracle_opts=opts, l2_tol=o.l2_tol, precone_tol=o.precone_tol)
    cols = ["name", "passed", "measured", "tolerance", "message"]
    rows = [[c["name"], c["passed"], c["measured"], c["tolerance"], c["message"]] for c in checks]
    ok = all(c["passed"] for c in checks)
    return cols, rows, {"passed": ok, "checks": checks}, ok


COMMANDS = {"modes": cmd_modes, "field": cmd_field, "flux": cmd_flux,
            "sweep": cmd_sweep, "validate": cmd_validate}


# -------------------------------------------------------------------- output
def _cell(v):
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _num(v)
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(_jsonable(v), sort_keys=True)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        # JSON has no nan/inf; keep them as strings so files stay valid
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    return v


def render(cols, rows, fmt, meta=None):
    if fmt == "json":
        doc = {"columns": cols, "rows": _jsonable(rows)}
        if meta is not None:
            doc["meta"] = _jsonable(meta)
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(_cell(v) for v in r) + "\n")
    return buf.getvalue()


def sidecar(cfg, params, command, meta):
    return {
        "command": command,
        "config_hash": cfg.config_hash(),
        "config": cfg.model_dump(mode="json"),
        "units": params.unit_factors() if params is not None else None,
        "version": __version__,
        "details": meta,
    }


def build_parser():
    p = argparse.ArgumentParser(prog="excitonslab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML or JSON run configuration (defaults if omitted)")
        s.add_argument("--out", help="output file (stdout if omitted)")
        s.add_argument("--format", choices=["csv", "json"], help="overrides output.format")
        s.add_argument("--seed-only", action="store_true",
                       help="skip certification and report perturbative roots (modes only)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed_only and args.command != "modes":
            raise ConfigError("--seed-only applies to the modes command only")
        fmt = args.format or cfg.output.format
        out = args.out or cfg.output.path
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            params = cfg.params.build()
            fn = COMMANDS[args.command]
            result = fn(cfg, seed_only=args.seed_only) if args.command == "modes" else fn(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ExcitonSlabError as exc:
        # parameter problems surfaced by the model count as configuration errors
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cols, rows, meta, ok = result
    side = sidecar(cfg, params, args.command, meta)
    text = render(cols, rows, fmt, meta=side if fmt == "json" else None)
    if out:
        path = Path(out)
        path.write_text(text)
        Path(str(path) + ".meta.json").write_text(json.dumps(_jsonable(side), sort_keys=True, indent=1) + "\n")
    else:
        sys.stdout.write(text)
    if not ok:
        print(f"{args.command}: checks failed", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
